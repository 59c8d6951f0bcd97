"""Auto-service cycles, dynamic links with reinforcement, and the two
built-in experiments (linked search and ID self-organization).

Dynamic links are concept-chain-keyed weighted edges built up by use: each
reinforcement bumps weight and hit count, and a link becomes *reliable* once
its hits reach the shared threshold. Searches consult reliable links for the
queried chain first (descending weight) and only then fall back to a
breadth-first sweep of the network, which is where the visit savings come
from. Per the shared-identity metadata rule, a shared-ID service may not
hold its own public dynamic links; the engine stores them for its parent.
"""

from __future__ import annotations

import json
import random
import threading
import time
from dataclasses import dataclass, field

from .concepts import DEFAULT_RELIABILITY_THRESHOLD, ConceptChain, as_chain
from .errors import EmptyNetwork, NoBehaviorInstalled, ServnetError
from .metadata import (
    MutationRequest,
    MutationTarget,
    Visibility,
    Volatility,
    check_mutation_allowed,
)
from .model import Handle
from .node import Node, NodeConfig, factory_spec
from .wire import CallEnvelope, ParamValue, encode_param, new_message_id

#: reference figures the experiment report is printed alongside
REFERENCE_SEARCH_REDUCTION = (0.80, 0.90)
REFERENCE_QUALITY_LOSS = (0.05, 0.10)

SELFORG_CHAIN: ConceptChain = ("selforg", "id-similarity")

#: cycle period matching the console's refresh cadence
DEFAULT_CYCLE_PERIOD = 1.0


@dataclass
class DynamicLink:
    """Weighted, chain-keyed edge created and reinforced by system use."""

    source: Handle
    target: Handle
    chain: ConceptChain
    weight: float = 0.0
    hits: int = 0
    last_used: float = 0.0

    def __post_init__(self):
        self.chain = as_chain(self.chain)
        if self.weight < 0:
            raise ValueError("link weight must be non-negative")


def reinforce_link(link: DynamicLink, delta: float) -> DynamicLink:
    """Strengthen a link: weight grows by *delta*, hits by one."""
    if delta <= 0:
        raise ValueError("reinforcement delta must be positive")
    link.weight += delta
    link.hits += 1
    link.last_used = time.time()
    return link


# -- evaluation functions and behaviors -----------------------------------------

def id_similarity(a: str, b: str) -> float:
    """1 minus normalized Hamming distance; zero for unequal lengths."""
    if not a or len(a) != len(b):
        return 0.0
    same = sum(1 for x, y in zip(a, b) if x == y)
    return same / len(a)


class EvaluationFunction:
    """Deterministic scoring of a peer reply against the service's own state."""

    kind = "evaluation"

    def score(self, self_state, peer_reply) -> float:
        raise NotImplementedError


class IdSimilarityEvaluation(EvaluationFunction):
    kind = "id-similarity"

    def score(self, self_state, peer_reply) -> float:
        return id_similarity(str(self_state), str(peer_reply))


@dataclass(frozen=True)
class LinkDecision:
    target: Handle
    create: bool
    chain: ConceptChain


class Behavior:
    """One evaluate step (what to ask, how to score) plus one decide step."""

    kind = "behavior"

    def query(self, service) -> tuple[str, list]:
        """(method, params) asked of every configured peer."""
        raise NotImplementedError

    def self_state(self, service):
        return getattr(service, "get_id", lambda: "")()

    def evaluate(self, service, reply) -> float:
        raise NotImplementedError

    def decide(self, service, scored: list[tuple[Handle, float]]) -> list[LinkDecision]:
        raise NotImplementedError


#: behavior kinds loadable by name (admin documents name them as managers)
BEHAVIOR_KINDS: dict[str, type] = {}


def register_behavior_kind(cls: type) -> type:
    BEHAVIOR_KINDS[cls.kind] = cls
    return cls


@register_behavior_kind
class ThresholdLinkBehavior(Behavior):
    """Link every peer scoring at or above a fixed threshold; drop the rest."""

    kind = "threshold-link"

    def __init__(self, evaluation: EvaluationFunction,
                 threshold: float = 0.5, chain: ConceptChain = SELFORG_CHAIN):
        self.evaluation = evaluation
        self.threshold = threshold
        self.chain = as_chain(chain)

    def query(self, service):
        return ("get_id", [])

    def evaluate(self, service, reply) -> float:
        return self.evaluation.score(self.self_state(service), reply)

    def decide(self, service, scored):
        return [
            LinkDecision(peer, score >= self.threshold, self.chain)
            for peer, score in scored
        ]


@register_behavior_kind
class BestPeerBehavior(Behavior):
    """Keep links only to peers scoring at least best-so-far times tolerance.

    With the default tolerance of 1.0 only the best peer survives, ties
    collapsing lexicographically (peer id, then name) so the converged graph
    is a deterministic argmax graph.
    """

    kind = "best-peer"

    def __init__(self, evaluation: EvaluationFunction, tolerance: float = 1.0,
                 chain: ConceptChain = SELFORG_CHAIN):
        self.evaluation = evaluation
        self.tolerance = tolerance
        self.chain = as_chain(chain)

    def query(self, service):
        return ("get_id", [])

    def evaluate(self, service, reply) -> float:
        return self.evaluation.score(self.self_state(service), reply)

    def decide(self, service, scored):
        if not scored:
            return []
        best = max(score for _, score in scored)
        keep = [(peer, score) for peer, score in scored
                if score >= best * self.tolerance]
        if self.tolerance >= 1.0:
            # single argmax winner; ties break on (peer id, peer name)
            ids = getattr(service, "_peer_ids", {})
            keep.sort(key=lambda item: (-item[1],
                                        ids.get(item[0], ""), item[0].path))
            keep = keep[:1]
        kept = {peer for peer, _ in keep}
        return [LinkDecision(peer, peer in kept, self.chain)
                for peer, _ in scored]


# -- the engine -------------------------------------------------------------------

@dataclass
class CycleReport:
    """What one auto cycle did: per-peer scores, link changes, failures."""

    service: str
    scores: dict[str, float] = field(default_factory=dict)
    created: list[str] = field(default_factory=list)
    removed: list[str] = field(default_factory=list)
    failures: dict[str, str] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)


@dataclass(frozen=True)
class SearchAnswer:
    value: float
    provider: Handle


class AutonomicEngine:
    """Owns the dynamic-link table of one node and runs auto cycles."""

    def __init__(self, node: Node,
                 reliability_threshold: int = DEFAULT_RELIABILITY_THRESHOLD):
        self.node = node
        self.reliability_threshold = reliability_threshold
        # chain -> (source wire, target wire) -> link
        self._links: dict[ConceptChain, dict[tuple[str, str], DynamicLink]] = {}
        node.engine = self

    # -- link table ----------------------------------------------------------------

    def _storage_source(self, source: Handle) -> Handle:
        """Where a new link lives: shared-ID services may not hold their own
        public dynamic metadata, so their links are stored for the parent."""
        try:
            node = self.node.network.resolve_handle(source)
        except ServnetError:
            return source
        request = MutationRequest(node.sid, Visibility.PUBLIC,
                                  Volatility.DYNAMIC, MutationTarget.THIS)
        if check_mutation_allowed(request):
            return source
        return source.parent() if source.path else source

    def link(self, source: Handle, target: Handle,
             chain: ConceptChain) -> DynamicLink:
        """Get or create the link (source, target, chain)."""
        chain = as_chain(chain)
        source = self._storage_source(source)
        table = self._links.setdefault(chain, {})
        key = (source.to_wire(), target.to_wire())
        if key not in table:
            table[key] = DynamicLink(source, target, chain)
        return table[key]

    def reinforce(self, source: Handle, target: Handle, chain: ConceptChain,
                  delta: float = 1.0) -> DynamicLink:
        return reinforce_link(self.link(source, target, chain), delta)

    def unlink(self, source: Handle, target: Handle, chain: ConceptChain) -> None:
        chain = as_chain(chain)
        source = self._storage_source(source)
        table = self._links.get(chain)
        if table is not None:
            table.pop((source.to_wire(), target.to_wire()), None)

    def is_reliable(self, link: DynamicLink) -> bool:
        return link.hits >= self.reliability_threshold

    def links_from(self, source: Handle) -> list[DynamicLink]:
        wire = source.to_wire()
        out = []
        for table in self._links.values():
            out.extend(l for (src, _), l in table.items() if src == wire)
        return out

    def reliable_links(self, chain: ConceptChain) -> list[DynamicLink]:
        table = self._links.get(as_chain(chain), {})
        links = [l for l in table.values() if self.is_reliable(l)]
        links.sort(key=lambda l: (-l.weight, l.target.to_wire()))
        return links

    def all_links(self) -> list[DynamicLink]:
        return [l for table in self._links.values() for l in table.values()]

    def clear_chain(self, chain: ConceptChain) -> None:
        self._links.pop(as_chain(chain), None)

    # -- calls ------------------------------------------------------------------------

    def call(self, target: Handle, method: str, params: list = ()) -> ParamValue:
        """Invoke through dispatch (local) or the HTTP client (remote)."""
        if target.base_uri == self.node.base_uri:
            envelope = CallEnvelope(
                new_message_id(), target, method,
                tuple(encode_param(p) for p in params),
            )
            return self.node.dispatch(envelope)
        return self.node.call_remote(target, method, list(params))

    # -- auto cycles --------------------------------------------------------------------

    def run_auto_cycle(self, s: Handle) -> CycleReport:
        """Query each configured peer, score replies, apply link decisions."""
        service_node = self.node.network.resolve_handle(s)
        impl = service_node.impl
        behavior: Behavior | None = getattr(impl, "behavior", None)
        if behavior is None:
            raise NoBehaviorInstalled(f"{s.to_wire()!r} has no behavior installed")
        report = CycleReport(service=s.to_wire())
        scored: list[tuple[Handle, float]] = []
        for peer in list(getattr(impl, "peers", [])):
            method, params = behavior.query(impl)
            try:
                reply = self.call(peer, method, params)
            except ServnetError as exc:
                report.failures[peer.to_wire()] = f"{exc.kind}: {exc}"
                continue
            score = behavior.evaluate(impl, reply.value)
            scored.append((peer, score))
            report.scores[peer.to_wire()] = score
        for decision in behavior.decide(impl, scored):
            if decision.create:
                link = self.reinforce(s, decision.target, decision.chain)
                if link.hits == 1:
                    report.created.append(decision.target.to_wire())
            else:
                existing = self._links.get(decision.chain, {})
                key = (self._storage_source(s).to_wire(), decision.target.to_wire())
                if key in existing:
                    self.unlink(s, decision.target, decision.chain)
                    report.removed.append(decision.target.to_wire())
        return report

    def install_managers(self, s: Handle) -> list[str]:
        """Install the behavior kinds named by the service's admin document.

        The last named kind becomes the active behavior (they stack as the
        admin document lists them); returns the kinds installed.
        """
        service_node = self.node.network.resolve_handle(s)
        admin = service_node.admin_doc
        names = tuple(admin.autonomic_managers) if admin is not None else ()
        installed = []
        for name in names:
            cls = BEHAVIOR_KINDS.get(name)
            if cls is None:
                raise NoBehaviorInstalled(f"unknown behavior kind {name!r}")
            service_node.impl.behavior = cls(IdSimilarityEvaluation())
            installed.append(name)
        return installed

    # -- searches ------------------------------------------------------------------------

    def search_targets(self) -> list[tuple[Handle, object]]:
        """Services answering lookup calls, in breadth-first network order."""
        return [
            (handle, node) for handle, node in self.node.network.walk()
            if node.methods is not None and "lookup" in node.methods
        ]

    def _visit(self, target: Handle, key: str) -> float | None:
        reply = self.call(target, "lookup", [key])
        return reply.value

    def linked_search(self, query: ConceptChain,
                      budget: int | None = None) -> tuple[SearchAnswer | None, int]:
        """Best answer for *query*: reliable linked targets first (descending
        weight), breadth-first fallback until the visit budget runs out."""
        query = as_chain(query)
        targets = self.search_targets()
        if not targets:
            raise EmptyNetwork("no lookup services registered")
        if budget is None:
            budget = len(targets)
        key = query[-1]
        visited = 0
        seen: set[str] = set()
        best: SearchAnswer | None = None
        linked_answer = False
        for link in self.reliable_links(query):
            if visited >= budget:
                break
            wire = link.target.to_wire()
            if wire in seen:
                continue
            seen.add(wire)
            visited += 1
            try:
                value = self._visit(link.target, key)
            except ServnetError:
                continue
            if value is not None:
                linked_answer = True
                if best is None or value > best.value:
                    best = SearchAnswer(value, link.target)
        if linked_answer:
            return best, visited
        for handle, _ in targets:
            if visited >= budget:
                break
            wire = handle.to_wire()
            if wire in seen:
                continue
            seen.add(wire)
            visited += 1
            try:
                value = self._visit(handle, key)
            except ServnetError:
                continue
            if value is not None and (best is None or value > best.value):
                best = SearchAnswer(value, handle)
        return best, visited

    def exhaustive_search(self, query: ConceptChain) -> tuple[SearchAnswer | None, int]:
        """Visit every lookup service; the independent reference route."""
        query = as_chain(query)
        targets = self.search_targets()
        if not targets:
            raise EmptyNetwork("no lookup services registered")
        key = query[-1]
        best: SearchAnswer | None = None
        visited = 0
        for handle, _ in targets:
            visited += 1
            try:
                value = self._visit(handle, key)
            except ServnetError:
                continue
            if value is not None and (best is None or value > best.value):
                best = SearchAnswer(value, handle)
        return best, visited


class CycleRunner:
    """Background thread driving one auto service's cycles at a fixed period."""

    def __init__(self, engine: AutonomicEngine, s: Handle,
                 period: float = DEFAULT_CYCLE_PERIOD):
        self.engine = engine
        self.handle = s
        self.period = period
        self.cycles = 0
        self.last_report: CycleReport | None = None
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def start(self) -> None:
        if self._thread is not None:
            return
        self._stop.clear()
        self._thread = threading.Thread(target=self._run, daemon=True,
                                        name=f"servnet-cycle-{self.handle.name}")
        self._thread.start()

    def _run(self) -> None:
        while not self._stop.is_set():
            try:
                self.last_report = self.engine.run_auto_cycle(self.handle)
            except ServnetError:
                pass  # service gone or behavior uninstalled; keep cycling
            self.cycles += 1
            self._stop.wait(self.period)

    def stop(self) -> None:
        self._stop.set()
        thread, self._thread = self._thread, None
        if thread is not None:
            thread.join(timeout=5)


# -- linked-search experiment -------------------------------------------------------

@dataclass
class ExperimentReport:
    """Linked vs exhaustive search over a seeded network."""

    n_services: int
    n_queries: int
    seed: int
    heldout_queries: int
    nodes_visited_linked: int
    nodes_visited_exhaustive: int
    quality_linked: float
    quality_exhaustive: float
    reliable_links: int
    reference_reduction: tuple[float, float] = REFERENCE_SEARCH_REDUCTION
    reference_quality_loss: tuple[float, float] = REFERENCE_QUALITY_LOSS

    @property
    def reduction(self) -> float:
        if self.nodes_visited_exhaustive == 0:
            return 0.0
        return 1.0 - self.nodes_visited_linked / self.nodes_visited_exhaustive

    @property
    def quality_loss(self) -> float:
        if self.quality_exhaustive == 0:
            return 0.0
        return 1.0 - self.quality_linked / self.quality_exhaustive

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["reduction"] = self.reduction
        out["quality_loss"] = self.quality_loss
        out["reference_reduction"] = list(self.reference_reduction)
        out["reference_quality_loss"] = list(self.reference_quality_loss)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def summary(self) -> str:
        lines = [
            f"{'linked search experiment':<34}  n={self.n_services} "
            f"queries={self.n_queries} seed={self.seed}",
            f"{'nodes visited (linked)':<34}  {self.nodes_visited_linked}",
            f"{'nodes visited (exhaustive)':<34}  {self.nodes_visited_exhaustive}",
            f"{'search reduction':<34}  {self.reduction:.1%}"
            f"   (reference {self.reference_reduction[0]:.0%}-"
            f"{self.reference_reduction[1]:.0%})",
            f"{'answer quality (linked)':<34}  {self.quality_linked:.4f}",
            f"{'answer quality (exhaustive)':<34}  {self.quality_exhaustive:.4f}",
            f"{'quality loss':<34}  {self.quality_loss:.1%}"
            f"   (reference {self.reference_quality_loss[0]:.0%}-"
            f"{self.reference_quality_loss[1]:.0%})",
            f"{'reliable links formed':<34}  {self.reliable_links}",
        ]
        return "\n".join(lines)


def _zipf_weights(count: int, s: float) -> list[float]:
    return [1.0 / (rank ** s) for rank in range(1, count + 1)]


def build_experiment_node(n_services: int, seed: int, n_keys: int = 50,
                          holder_prob: float = 0.2) -> tuple[Node, AutonomicEngine, list[str]]:
    """Offline node with one query origin and n item services holding seeded
    key to value items (every key held by at least one service)."""
    rng = random.Random(seed)
    node = Node(NodeConfig(listen=None, base_uri="http://experiment.local"))
    root = node.network.root_handle()
    node.register_service(root, "query", factory_spec("Query"))
    keys = [f"key-{i:03d}" for i in range(n_keys)]
    items: list[dict[str, float]] = [{} for _ in range(n_services)]
    for key in keys:
        holders = [i for i in range(n_services) if rng.random() < holder_prob]
        if not holders:
            holders = [rng.randrange(n_services)]
        for i in holders:
            items[i][key] = rng.random()
    for i in range(n_services):
        node.register_service(root, f"item-{i:03d}", factory_spec("ItemStore"),
                              args=(items[i],))
    engine = AutonomicEngine(node)
    return node, engine, keys


def run_experiment(n_services: int, n_queries: int, seed: int,
                   n_keys: int = 50, holder_prob: float = 0.2,
                   heldout_queries: int = 100,
                   zipf_exponent: float = 1.1) -> ExperimentReport:
    """Warm up dynamic links with skewed queries, then measure linked vs
    exhaustive search on a held-out batch. Pure function of the seed."""
    if n_services < 2:
        raise ValueError("the experiment needs at least two services")
    node, engine, keys = build_experiment_node(n_services, seed, n_keys, holder_prob)
    origin = node.network.handle_of(("query",))
    rng = random.Random(seed + 1)
    weights = _zipf_weights(len(keys), zipf_exponent)
    for _ in range(n_queries):
        key = rng.choices(keys, weights)[0]
        chain = ("item", key)
        answer, _ = engine.linked_search(chain)
        if answer is not None:
            engine.reinforce(origin, answer.provider, chain, 1.0)
    visited_linked = 0
    visited_exhaustive = 0
    value_linked = 0.0
    value_exhaustive = 0.0
    for _ in range(heldout_queries):
        key = rng.choices(keys, weights)[0]
        chain = ("item", key)
        linked_answer, v_linked = engine.linked_search(chain)
        exhaustive_answer, v_exhaustive = engine.exhaustive_search(chain)
        visited_linked += v_linked
        visited_exhaustive += v_exhaustive
        value_linked += linked_answer.value if linked_answer else 0.0
        value_exhaustive += exhaustive_answer.value if exhaustive_answer else 0.0
    reliable = sum(1 for l in engine.all_links() if engine.is_reliable(l))
    return ExperimentReport(
        n_services=n_services,
        n_queries=n_queries,
        seed=seed,
        heldout_queries=heldout_queries,
        nodes_visited_linked=visited_linked,
        nodes_visited_exhaustive=visited_exhaustive,
        quality_linked=value_linked / max(1, heldout_queries),
        quality_exhaustive=value_exhaustive / max(1, heldout_queries),
        reliable_links=reliable,
    )


# -- ID self-organization demo ---------------------------------------------------------

DEMO_ALPHABET = "abcdef"


@dataclass
class SelfOrgResult:
    ids: dict[str, str]
    graph: dict[str, list[str]]
    rounds_run: int
    converged: bool

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)


class SelfOrgDemo:
    """n auto services with random string IDs re-linking to their most
    similar peers each round until the link graph stops changing."""

    def __init__(self, node: Node, engine: AutonomicEngine, parent: Handle,
                 n: int, id_len: int, seed: int, tolerance: float = 1.0,
                 alphabet: str = DEMO_ALPHABET):
        if n < 2:
            raise ValueError("the demo needs at least two services")
        if id_len < 1:
            raise ValueError("id length must be at least one")
        self.node = node
        self.engine = engine
        self.round = 0
        self.converged = False
        rng = random.Random(seed)
        self.names = [f"auto-{i:02d}" for i in range(n)]
        self.ids: dict[str, str] = {}
        self.handles: dict[str, Handle] = {}
        for name in self.names:
            id_value = "".join(rng.choice(alphabet) for _ in range(id_len))
            handle = node.register_service(parent, name, factory_spec("Auto"),
                                           args=(id_value,))
            self.ids[name] = id_value
            self.handles[name] = handle
        behavior = BestPeerBehavior(IdSimilarityEvaluation(), tolerance)
        peer_ids = {self.handles[n2]: self.ids[n2] for n2 in self.names}
        for name in self.names:
            impl = node.network.resolve_handle(self.handles[name]).impl
            impl.behavior = behavior
            impl.peers = [self.handles[n2] for n2 in self.names if n2 != name]
            impl._peer_ids = peer_ids
        self._previous: dict[str, list[str]] | None = None

    def graph(self) -> dict[str, list[str]]:
        """Current demo link graph: service name to sorted target names."""
        by_wire = {self.handles[name].to_wire(): name for name in self.names}
        out: dict[str, list[str]] = {name: [] for name in self.names}
        for link in self.engine.all_links():
            if link.chain != SELFORG_CHAIN:
                continue
            src = by_wire.get(link.source.to_wire())
            dst = by_wire.get(link.target.to_wire())
            if src is not None and dst is not None:
                out[src].append(dst)
        for targets in out.values():
            targets.sort()
        return out

    def step(self) -> dict[str, list[str]]:
        """Run one round of cycles; flips converged when the graph repeats."""
        for name in self.names:
            self.engine.run_auto_cycle(self.handles[name])
        self.round += 1
        current = self.graph()
        if self._previous is not None and current == self._previous:
            self.converged = True
        self._previous = current
        return current

    def run(self, max_rounds: int = 100) -> SelfOrgResult:
        while not self.converged and self.round < max_rounds:
            self.step()
        return SelfOrgResult(dict(self.ids), self.graph(), self.round, self.converged)


def run_selforg_demo(n: int, id_len: int, rounds: int | None = None,
                     seed: int = 0, tolerance: float = 1.0) -> SelfOrgResult:
    """Deterministic, self-contained demo run on an offline node."""
    node = Node(NodeConfig(listen=None, base_uri="http://selforg.local"))
    engine = AutonomicEngine(node)
    demo = SelfOrgDemo(node, engine, node.network.root_handle(),
                       n, id_len, seed, tolerance)
    return demo.run(max_rounds=rounds if rounds is not None else 100)
