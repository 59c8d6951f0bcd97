"""Trust mediator: escrow state machine safety and the question game."""

import random
from importlib import resources

import pytest

from servnet.errors import IllegalTransition
from servnet.mediator import (
    CredentialRegistry,
    MediatedTransaction,
    PaymentToken,
    QuestionGame,
    RoundOutcome,
    Scenario,
    TERMINAL_STATES,
    TxnEvent,
    TxnState,
    Verdict,
    advance,
    cheat_evasion_estimate,
    enabled_events,
    load_scenario,
    make_question_game,
    new_transaction,
    question_game_round,
    resolve_dispute,
    run_scenario,
    uniform_single_cheat,
)
from servnet.model import Handle

BASE = Handle("http://trust.local")

HAPPY_SIX = [
    TxnEvent.BOTH_ACCEPT, TxnEvent.DEPOSIT_ESCROW, TxnEvent.PROVIDER_EXECUTES,
    TxnEvent.DELIVER_RESULT, TxnEvent.CLIENT_ACCEPTS, TxnEvent.RELEASE_PAYMENT,
]


def fresh(txn_id="t1"):
    return new_transaction(BASE.child("client"), BASE.child("provider"),
                           BASE.child("mediator"), txn_id=txn_id)


class TestHappyPath:
    def test_six_events_complete_with_one_release(self):
        txn = fresh()
        for event in HAPPY_SIX:
            txn = advance(txn, event)
        assert txn.state is TxnState.PAYMENT_RELEASED
        assert txn.release_count == 1
        txn = advance(txn, TxnEvent.CLOSE)
        assert txn.state is TxnState.CLOSED
        assert txn.release_count == 1

    def test_escrow_held_from_deposit_to_release(self):
        txn = fresh()
        token = PaymentToken("bank-key-123")
        txn = advance(txn, TxnEvent.BOTH_ACCEPT)
        txn = advance(txn, TxnEvent.DEPOSIT_ESCROW, token=token)
        for event in (TxnEvent.PROVIDER_EXECUTES, TxnEvent.DELIVER_RESULT,
                      TxnEvent.CLIENT_ACCEPTS, TxnEvent.RELEASE_PAYMENT):
            assert txn.escrow == token
            txn = advance(txn, event)
        assert txn.escrow == token  # retained for the provider after release


class TestDisputePaths:
    def disputed(self):
        txn = fresh()
        for event in (TxnEvent.BOTH_ACCEPT, TxnEvent.DEPOSIT_ESCROW,
                      TxnEvent.PROVIDER_EXECUTES, TxnEvent.DELIVER_RESULT,
                      TxnEvent.CLIENT_DISPUTES):
            txn = advance(txn, event)
        return txn

    def test_dispute_then_verified_releases_and_notifies_client(self):
        txn = self.disputed()
        txn = advance(txn, TxnEvent.VERIFY_GENUINE)
        assert txn.client_notified
        txn = advance(txn, TxnEvent.RELEASE_PAYMENT)
        assert txn.state is TxnState.PAYMENT_RELEASED
        assert txn.release_count == 1

    def test_dispute_not_genuine_refunds(self):
        txn = advance(self.disputed(), TxnEvent.VERIFY_NOT_GENUINE)
        assert txn.state is TxnState.REFUNDED
        assert txn.release_count == 0
        assert enabled_events(txn.state) == frozenset()

    def test_dispute_inconclusive_escalates_and_freezes(self):
        txn = advance(self.disputed(), TxnEvent.VERIFY_INCONCLUSIVE)
        assert txn.state is TxnState.ESCALATED_TO_HUMAN
        assert txn.escrow is not None and txn.release_count == 0
        assert enabled_events(txn.state) == frozenset()

    def test_verification_oracle_mapping(self):
        for verdict, state in ((Verdict.GENUINE, TxnState.VERIFIED_GENUINE),
                               (Verdict.NOT_GENUINE, TxnState.REFUNDED),
                               (Verdict.UNKNOWN, TxnState.ESCALATED_TO_HUMAN)):
            assert resolve_dispute(self.disputed(), lambda t: verdict).state is state


class TestTransitions:
    def test_release_in_proposed_is_illegal(self):
        with pytest.raises(IllegalTransition):
            advance(fresh(), TxnEvent.RELEASE_PAYMENT)

    def test_enabled_events_examples(self):
        assert enabled_events(TxnState.CLOSED) == frozenset()
        assert enabled_events(TxnState.RESULT_DELIVERED) == \
            {TxnEvent.CLIENT_ACCEPTS, TxnEvent.CLIENT_DISPUTES}
        assert enabled_events(TxnState.PAYMENT_ESCROWED) == \
            {TxnEvent.PROVIDER_EXECUTES}
        assert enabled_events(TxnState.REFUNDED) == frozenset()
        assert enabled_events(TxnState.ESCALATED_TO_HUMAN) == frozenset()

    def test_advance_agrees_with_enabled_events_everywhere(self):
        for state in TxnState:
            txn = MediatedTransaction("x", BASE.child("c"), BASE.child("p"),
                                      BASE.child("m"), state=state,
                                      escrow=PaymentToken("k"))
            enabled = enabled_events(state)
            for event in TxnEvent:
                if event in enabled:
                    advance(txn, event)
                else:
                    with pytest.raises(IllegalTransition):
                        advance(txn, event)


class TestEscrowSafety:
    def walk(self, txn, depth, seen_path):
        """Enumerate every event sequence up to length 10, asserting the
        release and information-flow invariants along each path."""
        assert txn.release_count <= 1
        if txn.release_count == 1:
            assert TxnState.ACCEPTED in seen_path or \
                TxnState.VERIFIED_GENUINE in seen_path
        if txn.state not in (TxnState.PAYMENT_RELEASED, TxnState.CLOSED):
            assert "payment_key" not in txn.provider_view()
        if depth == 0:
            return
        for event in enabled_events(txn.state):
            nxt = advance(txn, event)
            self.walk(nxt, depth - 1, seen_path + [nxt.state])

    def test_exhaustive_enumeration_depth_10(self):
        txn = fresh()
        self.walk(txn, 10, [txn.state])

    def test_release_edges_only_from_accept_or_verified(self):
        from servnet.mediator import _TRANSITIONS
        sources = {s for (s, e) in _TRANSITIONS if e is TxnEvent.RELEASE_PAYMENT}
        assert sources == {TxnState.ACCEPTED, TxnState.VERIFIED_GENUINE}


class TestQuestionGame:
    def test_honest_provider_always_honest(self):
        game = make_question_game(5, 2)
        assert question_game_round(game, lambda k: set()) is RoundOutcome.HONEST

    def test_wrong_known_answer_detected(self):
        game = make_question_game(4, 1)
        assert question_game_round(game, lambda k: {0}) is RoundOutcome.CHEAT_DETECTED
        assert question_game_round(game, lambda k: {0, 1}) is RoundOutcome.CHEAT_DETECTED

    def test_wrong_genuine_answer_undetected(self):
        game = make_question_game(4, 1)
        assert question_game_round(game, lambda k: {1}) is RoundOutcome.CHEAT_UNDETECTED

    def test_invariant_exactly_one_unknown_answer(self):
        with pytest.raises(ValueError):
            QuestionGame(("q0", "q1"), {"q0": "a0", "q1": "a1"}, 1)
        with pytest.raises(ValueError):
            make_question_game(1, 0)

    def test_two_question_monte_carlo_half(self):
        rng = random.Random(31)
        strategy = uniform_single_cheat(rng)
        hits = sum(
            question_game_round(make_question_game(2, rng.randrange(2)), strategy)
            is RoundOutcome.CHEAT_UNDETECTED
            for _ in range(100_000)
        )
        assert abs(hits / 100_000 - 0.5) <= 0.01

    def test_five_question_monte_carlo_fifth(self):
        # analytic value 1/k for a uniformly chosen single wrong answer
        estimate = cheat_evasion_estimate(5, 100_000, seed=17)
        assert abs(estimate - 0.2) <= 0.01


class TestEvasionEstimate:
    def test_k2_half(self):
        assert abs(cheat_evasion_estimate(2, 100_000, seed=1) - 0.50) <= 0.02

    def test_k10_tenth(self):
        assert abs(cheat_evasion_estimate(10, 100_000, seed=1) - 0.10) <= 0.02

    def test_single_trial_is_zero_or_one(self):
        assert cheat_evasion_estimate(3, 1, seed=5) in (0.0, 1.0)

    def test_deterministic_per_seed(self):
        assert cheat_evasion_estimate(4, 5000, seed=9) == \
            cheat_evasion_estimate(4, 5000, seed=9)

    def test_strictly_decreasing_in_k(self):
        estimates = [cheat_evasion_estimate(k, 100_000, seed=2)
                     for k in range(2, 11)]
        assert all(a > b for a, b in zip(estimates, estimates[1:]))


class TestScenarios:
    def scenario_paths(self):
        base = resources.files("servnet").joinpath("data/scenarios")
        return sorted(base.iterdir(), key=lambda p: p.name)

    def test_shipped_scenarios_all_pass(self):
        paths = self.scenario_paths()
        assert len(paths) >= 4
        for path in paths:
            scenario = load_scenario(path)
            txn, log, ok = run_scenario(scenario)
            assert ok, scenario.name
            assert txn.state in TERMINAL_STATES or \
                txn.state is TxnState.PAYMENT_RELEASED
            assert len(log) == len(scenario.events) + 1

    def test_failing_expectation_reported(self):
        scenario = Scenario("bad", ["BothAccept"], "Closed")
        txn, _, ok = run_scenario(scenario)
        assert not ok and txn.state is TxnState.AGREED


def test_credential_registry():
    registry = CredentialRegistry()
    registry.register("central", "key-1", "Acme Services")
    assert registry.verify("central", "key-1", "Acme Services")
    assert not registry.verify("central", "key-1", "Evil Corp")
    assert not registry.verify("other", "key-1", "Acme Services")
