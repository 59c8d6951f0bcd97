"""Mediated-transaction state machine with payment escrow, dispute paths,
and the known-answer question game.

A client and provider agree to route one transaction through a mediator: the
client escrows an opaque payment token (a key standing in for monetary
details — the provider never sees it before release), the mediator has the
provider execute, the result flows back (via the mediator or directly), and
payment is released only after the client accepts or a disputed result is
verified genuine. Inconclusive verification escalates to a human and freezes
the escrow; a not-genuine verdict refunds it.

The question game models a cheap honesty probe: the client asks k questions
knowing every answer but one, so a provider lying on a single uniformly
chosen question escapes detection with probability 1/k.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable

from .errors import IllegalTransition
from .model import Handle
from .wire import ParamValue, encode_param


class TxnState(Enum):
    PROPOSED = "Proposed"
    AGREED = "Agreed"
    PAYMENT_ESCROWED = "PaymentEscrowed"
    EXECUTED = "Executed"
    RESULT_DELIVERED = "ResultDelivered"
    ACCEPTED = "Accepted"
    DISPUTED = "Disputed"
    VERIFIED_GENUINE = "VerifiedGenuine"
    ESCALATED_TO_HUMAN = "EscalatedToHuman"
    PAYMENT_RELEASED = "PaymentReleased"
    REFUNDED = "Refunded"
    CLOSED = "Closed"


class TxnEvent(Enum):
    BOTH_ACCEPT = "BothAccept"
    DEPOSIT_ESCROW = "DepositEscrow"
    PROVIDER_EXECUTES = "ProviderExecutes"
    DELIVER_RESULT = "DeliverResult"
    CLIENT_ACCEPTS = "ClientAccepts"
    CLIENT_DISPUTES = "ClientDisputes"
    VERIFY_GENUINE = "VerifyGenuine"
    VERIFY_NOT_GENUINE = "VerifyNotGenuine"
    VERIFY_INCONCLUSIVE = "VerifyInconclusive"
    RELEASE_PAYMENT = "ReleasePayment"
    CLOSE = "Close"


_TRANSITIONS: dict[tuple[TxnState, TxnEvent], TxnState] = {
    (TxnState.PROPOSED, TxnEvent.BOTH_ACCEPT): TxnState.AGREED,
    (TxnState.AGREED, TxnEvent.DEPOSIT_ESCROW): TxnState.PAYMENT_ESCROWED,
    (TxnState.PAYMENT_ESCROWED, TxnEvent.PROVIDER_EXECUTES): TxnState.EXECUTED,
    (TxnState.EXECUTED, TxnEvent.DELIVER_RESULT): TxnState.RESULT_DELIVERED,
    (TxnState.RESULT_DELIVERED, TxnEvent.CLIENT_ACCEPTS): TxnState.ACCEPTED,
    (TxnState.RESULT_DELIVERED, TxnEvent.CLIENT_DISPUTES): TxnState.DISPUTED,
    (TxnState.ACCEPTED, TxnEvent.RELEASE_PAYMENT): TxnState.PAYMENT_RELEASED,
    (TxnState.DISPUTED, TxnEvent.VERIFY_GENUINE): TxnState.VERIFIED_GENUINE,
    (TxnState.DISPUTED, TxnEvent.VERIFY_NOT_GENUINE): TxnState.REFUNDED,
    (TxnState.DISPUTED, TxnEvent.VERIFY_INCONCLUSIVE): TxnState.ESCALATED_TO_HUMAN,
    (TxnState.VERIFIED_GENUINE, TxnEvent.RELEASE_PAYMENT): TxnState.PAYMENT_RELEASED,
    (TxnState.PAYMENT_RELEASED, TxnEvent.CLOSE): TxnState.CLOSED,
}

TERMINAL_STATES = frozenset(
    (TxnState.CLOSED, TxnState.ESCALATED_TO_HUMAN, TxnState.REFUNDED)
)


def enabled_events(state: TxnState) -> frozenset[TxnEvent]:
    """Exactly the events advance() accepts in *state* (terminals enable none)."""
    return frozenset(e for (s, e) in _TRANSITIONS if s is state)


@dataclass(frozen=True)
class PaymentToken:
    """Opaque escrow key standing in for the client's monetary details."""

    key: str


@dataclass(frozen=True)
class MediatedTransaction:
    """Immutable snapshot of one mediated transaction."""

    txn_id: str
    client: Handle
    provider: Handle
    mediator: Handle
    state: TxnState = TxnState.PROPOSED
    escrow: PaymentToken | None = None
    result: ParamValue | None = None
    dispute_note: str | None = None
    direct_delivery: bool = False
    client_notified: bool = False
    release_count: int = 0

    def provider_view(self) -> dict:
        """Everything the provider is allowed to see in the current state.

        The escrow key appears only once payment has been released.
        """
        view = {
            "txn_id": self.txn_id,
            "state": self.state.value,
            "client": self.client.to_wire(),
            "mediator": self.mediator.to_wire(),
        }
        if self.state in (TxnState.PAYMENT_RELEASED, TxnState.CLOSED) \
                and self.escrow is not None:
            view["payment_key"] = self.escrow.key
        return view


def new_transaction(client: Handle, provider: Handle, mediator: Handle,
                    txn_id: str = "txn-0", direct_delivery: bool = False) -> MediatedTransaction:
    return MediatedTransaction(txn_id, client, provider, mediator,
                               direct_delivery=direct_delivery)


def advance(t: MediatedTransaction, event: TxnEvent,
            token: PaymentToken | None = None,
            result: ParamValue | None = None,
            note: str = "") -> MediatedTransaction:
    """Pure transition: returns the next snapshot or raises IllegalTransition."""
    next_state = _TRANSITIONS.get((t.state, event))
    if next_state is None:
        raise IllegalTransition(
            f"event {event.value} is not enabled in state {t.state.value}"
        )
    changes: dict = {"state": next_state}
    if event is TxnEvent.DEPOSIT_ESCROW:
        changes["escrow"] = token if token is not None else PaymentToken("escrow-key")
    if event is TxnEvent.DELIVER_RESULT:
        changes["result"] = result if result is not None else encode_param("result")
    if event is TxnEvent.CLIENT_DISPUTES:
        changes["dispute_note"] = note or "client dispute"
    if event is TxnEvent.VERIFY_GENUINE:
        # the genuine verdict must reach the client as well
        changes["client_notified"] = True
    if event is TxnEvent.RELEASE_PAYMENT:
        changes["release_count"] = t.release_count + 1
    out = replace(t, **changes)
    if out.state is TxnState.PAYMENT_ESCROWED and out.escrow is None:
        raise IllegalTransition("escrow may not be empty once deposited")
    if out.state is TxnState.RESULT_DELIVERED and out.result is None:
        raise IllegalTransition("a delivered result may not be empty")
    return out


def txn_log_line(t: MediatedTransaction, event: TxnEvent | None = None) -> str:
    """One JSON line for the simulation log."""
    return json.dumps({
        "txn": t.txn_id,
        "event": event.value if event is not None else None,
        "state": t.state.value,
        "escrow_held": t.escrow is not None and t.release_count == 0
                       and t.state is not TxnState.REFUNDED,
        "released": t.release_count,
        "client_notified": t.client_notified,
    }, sort_keys=True)


# -- dispute verification -----------------------------------------------------------

class Verdict(Enum):
    GENUINE = "genuine"
    NOT_GENUINE = "not-genuine"
    UNKNOWN = "unknown"


_VERDICT_EVENT = {
    Verdict.GENUINE: TxnEvent.VERIFY_GENUINE,
    Verdict.NOT_GENUINE: TxnEvent.VERIFY_NOT_GENUINE,
    Verdict.UNKNOWN: TxnEvent.VERIFY_INCONCLUSIVE,
}


def resolve_dispute(t: MediatedTransaction,
                    oracle: Callable[[MediatedTransaction], Verdict]) -> MediatedTransaction:
    """Apply the harness-supplied verification oracle to a disputed txn."""
    return advance(t, _VERDICT_EVENT[oracle(t)])


class CredentialRegistry:
    """Lookup table standing in for registration-key verification."""

    def __init__(self):
        self._registries: dict[str, dict[str, str]] = {}

    def register(self, registry: str, key: str, company: str) -> None:
        self._registries.setdefault(registry, {})[key] = company

    def verify(self, registry: str, key: str, company: str) -> bool:
        return self._registries.get(registry, {}).get(key) == company


# -- known-answer question game ------------------------------------------------------

class RoundOutcome(Enum):
    HONEST = "Honest"
    CHEAT_UNDETECTED = "CheatUndetected"
    CHEAT_DETECTED = "CheatDetected"


@dataclass(frozen=True)
class QuestionGame:
    """k questions of which the client already knows k-1 answers."""

    questions: tuple[str, ...]
    known_answers: dict[str, str]
    genuine_index: int

    def __post_init__(self):
        k = len(self.questions)
        if k < 2:
            raise ValueError("the game needs at least two questions")
        if not 0 <= self.genuine_index < k:
            raise ValueError("genuine_index out of range")
        expected = set(self.questions) - {self.questions[self.genuine_index]}
        if set(self.known_answers) != expected or len(self.known_answers) != k - 1:
            raise ValueError("exactly the k-1 non-genuine questions need known answers")

    @property
    def k(self) -> int:
        return len(self.questions)


def make_question_game(k: int, genuine_index: int) -> QuestionGame:
    questions = tuple(f"q{i}" for i in range(k))
    answers = {q: f"a{i}" for i, q in enumerate(questions) if i != genuine_index}
    return QuestionGame(questions, answers, genuine_index)


def question_game_round(g: QuestionGame,
                        provider_strategy: Callable[[int], Iterable[int]]) -> RoundOutcome:
    """Outcome of one round given which question indices the provider answers
    wrongly: a wrong known answer is caught, a wrong genuine answer is not."""
    wrong = {i for i in provider_strategy(g.k)}
    if any(not 0 <= i < g.k for i in wrong):
        raise ValueError("strategy returned an index outside the question set")
    if any(i != g.genuine_index for i in wrong):
        return RoundOutcome.CHEAT_DETECTED
    if wrong:
        return RoundOutcome.CHEAT_UNDETECTED
    return RoundOutcome.HONEST


def uniform_single_cheat(rng: random.Random) -> Callable[[int], set[int]]:
    """Strategy answering exactly one uniformly chosen question wrongly."""
    return lambda k: {rng.randrange(k)}


def cheat_evasion_estimate(k: int, trials: int, seed: int = 0) -> float:
    """Monte-Carlo fraction of undetected cheats under the single-random-
    wrong-answer strategy; deterministic given the seed (analytically 1/k)."""
    if k < 2:
        raise ValueError("the game needs at least two questions")
    if trials < 1:
        raise ValueError("at least one trial is needed")
    rng = random.Random(seed)
    strategy = uniform_single_cheat(rng)
    undetected = 0
    for _ in range(trials):
        game = make_question_game(k, rng.randrange(k))
        if question_game_round(game, strategy) is RoundOutcome.CHEAT_UNDETECTED:
            undetected += 1
    return undetected / trials


# -- scenario scripts -----------------------------------------------------------------

@dataclass
class Scenario:
    """Declarative simulation script: event names plus expected terminal state."""

    name: str
    events: list[str]
    expected_terminal: str
    direct_delivery: bool = False


def load_scenario(path: str | Path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    return Scenario(
        name=obj.get("name", Path(path).stem),
        events=list(obj["events"]),
        expected_terminal=obj["expected_terminal"],
        direct_delivery=bool(obj.get("direct_delivery", False)),
    )


def run_scenario(scenario: Scenario) -> tuple[MediatedTransaction, list[str], bool]:
    """Drive one transaction through the scripted events.

    Returns the final txn, the JSON-line log, and whether the terminal state
    matched the script's expectation.
    """
    base = Handle("http://scenario.local")
    txn = new_transaction(base.child("client"), base.child("provider"),
                          base.child("mediator"), txn_id=scenario.name,
                          direct_delivery=scenario.direct_delivery)
    log = [txn_log_line(txn)]
    by_value = {e.value: e for e in TxnEvent}
    for name in scenario.events:
        event = by_value.get(name)
        if event is None:
            raise IllegalTransition(f"unknown event name {name!r}")
        txn = advance(txn, event)
        log.append(txn_log_line(txn, event))
    ok = txn.state.value == scenario.expected_terminal
    return txn, log, ok
