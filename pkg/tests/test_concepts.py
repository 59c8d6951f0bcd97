"""Concept store: chains, co-entry reinforcement, filtered queries."""

import random
from decimal import Decimal
from importlib import resources

import pytest

from servnet.concepts import (
    CmpOp,
    ConceptStore,
    FieldCompare,
    FieldEquality,
    FilterPredicate,
    Record,
    load_into,
    load_jsonl,
)
from servnet.errors import EmptyChain, UnknownField, UnknownRecord

T = 3  # default reliability threshold


def rec(rid, chain, **payload):
    return Record(rid, tuple(chain), payload)


@pytest.fixture
def travel_store():
    store = ConceptStore()
    load_into(store, resources.files("servnet").joinpath("data/travel.jsonl"))
    return store


TRAVEL_PREDICATE = FilterPredicate((
    FieldCompare("hotel", "city", CmpOp.EQ, "Paris"),
    FieldCompare("hotel", "street", CmpOp.EQ, "Rue des Conferences"),
    FieldCompare("hotel", "cost", CmpOp.LT, Decimal("100.00")),
    FieldCompare("flight", "arrival_day", CmpOp.EQ, "2009-12-01"),
    FieldCompare("flight", "cost", CmpOp.LT, Decimal("300.00")),
    FieldCompare("connection_transport", "date", CmpOp.EQ, "2009-12-01"),
    FieldEquality("connection_transport", "street", "hotel", "street"),
))

TRAVEL_TARGETS = [("hotel",), ("flight",), ("connection_transport",)]


# -- co-entry ---------------------------------------------------------------------

class TestAddEntry:
    def test_triple_entry_colinks_once(self):
        store = ConceptStore()
        store.add_entry([
            rec("h", ["hotel", "FR"], cost="10"),
            rec("f", ["flight", "CDG"], cost="20"),
            rec("c", ["connection_transport", "FR"], cost="5"),
        ])
        for a, b in (("h", "f"), ("h", "c"), ("f", "c")):
            assert store.colink_hits(a, b) == 1
            assert not store.is_reliable(a, b)

    def test_single_record_no_colinks(self):
        store = ConceptStore()
        store.add_entry([rec("solo", ["hotel", "FR"])])
        assert store.colink_hits("solo", "solo") == 0

    def test_three_visitors_make_reliable(self):
        store = ConceptStore()
        for _ in range(T):
            store.add_entry([rec("h", ["hotel"]), rec("f", ["flight"]),
                             rec("c", ["connection_transport"])])
        for a, b in (("h", "f"), ("h", "c"), ("f", "c")):
            assert store.is_reliable(a, b)

    def test_empty_chain_rejected(self):
        with pytest.raises(EmptyChain):
            rec("x", [])
        store = ConceptStore()
        with pytest.raises(EmptyChain):
            store.query_filtered([()], FilterPredicate())

    def test_reentry_does_not_duplicate_record(self):
        store = ConceptStore()
        store.add_entry([rec("h", ["hotel"], cost="1")])
        store.add_entry([rec("h", ["hotel"], cost="2")])
        assert len(store) == 1
        assert len(store.query_chain(("hotel",))) == 1


# -- chain queries -------------------------------------------------------------------

class TestQueryChain:
    def test_flight_prefix_returns_every_flight(self, travel_store):
        flights = travel_store.query_chain(("flight",))
        assert sorted(r.record_id for r in flights) == ["F1", "F2", "F3", "F4"]

    def test_deeper_prefix_narrows(self, travel_store):
        assert sorted(r.record_id for r in
                      travel_store.query_chain(("flight", "CDG"))) == ["F1", "F2", "F4"]

    def test_empty_store(self):
        assert ConceptStore().query_chain(("hotel",)) == []

    def test_prefix_deeper_than_any_chain(self, travel_store):
        assert travel_store.query_chain(("flight", "CDG", "BFS", "airfrance",
                                         "overflow")) == []

    def test_whole_store_under_empty_prefix(self, travel_store):
        assert len(travel_store.query_chain(())) == len(travel_store)


def linear_scan(records, prefix):
    return {r.record_id for r in records if r.chain[:len(prefix)] == prefix}


def test_prefix_soundness_and_completeness_randomized():
    rng = random.Random(77)
    concepts = ["a", "b", "c", "d"]
    for _ in range(50):
        store = ConceptStore()
        records = []
        for i in range(rng.randint(1, 60)):
            chain = tuple(rng.choice(concepts)
                          for _ in range(rng.randint(1, 4)))
            records.append(rec(f"r{i}", chain, n=i))
        for r in records:
            store.add_entry([r])
        for _ in range(10):
            prefix = tuple(rng.choice(concepts)
                           for _ in range(rng.randint(0, 3)))
            got = {r.record_id for r in store.query_chain(prefix)}
            assert got == linear_scan(records, prefix)


def test_monotonicity_adding_never_removes():
    rng = random.Random(13)
    store = ConceptStore()
    snapshots = []
    for i in range(30):
        store.add_entry([rec(f"r{i}", (rng.choice("ab"), rng.choice("cd")))])
        snapshots.append({r.record_id for r in store.query_chain(("a",))})
    for before, after in zip(snapshots, snapshots[1:]):
        assert before <= after


# -- reliability -----------------------------------------------------------------------

class TestReliability:
    def test_symmetry(self, travel_store):
        assert travel_store.is_reliable("H1", "F1") == \
            travel_store.is_reliable("F1", "H1") is True
        assert travel_store.is_reliable("H2", "F2") == \
            travel_store.is_reliable("F2", "H2") is False

    def test_never_coentered(self, travel_store):
        assert not travel_store.is_reliable("H1", "F2")

    def test_unknown_record(self, travel_store):
        with pytest.raises(UnknownRecord):
            travel_store.is_reliable("H1", "nope")

    def test_custom_threshold(self):
        store = ConceptStore(reliability_threshold=1)
        store.add_entry([rec("a", ["x"]), rec("b", ["x"])])
        assert store.is_reliable("a", "b")


# -- filtered queries ---------------------------------------------------------------------

def brute_force(store, targets, pred, reliable_only):
    """Independent oracle: full cross product, direct atom evaluation."""
    from servnet.concepts import _compare, _cross_equal
    lists = [store.query_chain(t) for t in targets]
    aliases = [t[0] for t in targets]
    out = []
    def tuples(idx, acc):
        if idx == len(lists):
            out.append(tuple(acc))
            return
        for r in lists[idx]:
            tuples(idx + 1, acc + [r])
    tuples(0, [])
    result = []
    for combo in out:
        by_alias = dict(zip(aliases, combo))
        ok = True
        for atom in pred.atoms:
            if isinstance(atom, FieldCompare):
                ok = ok and _compare(by_alias[atom.alias], atom)
            else:
                ok = ok and _cross_equal(by_alias[atom.alias_a], atom.field_a,
                                         by_alias[atom.alias_b], atom.field_b)
        if ok and reliable_only:
            ids = [r.record_id for r in combo]
            ok = all(store.is_reliable(a, b)
                     for i, a in enumerate(ids) for b in ids[i + 1:])
        if ok:
            result.append(tuple(r.record_id for r in combo))
    return sorted(result)


class TestQueryFiltered:
    def test_travel_query_matches_oracle_both_modes(self, travel_store):
        for reliable_only in (False, True):
            got = travel_store.query_filtered(TRAVEL_TARGETS, TRAVEL_PREDICATE,
                                              reliable_only)
            got_ids = sorted(tuple(r.record_id for r in t) for t in got)
            assert got_ids == brute_force(travel_store, TRAVEL_TARGETS,
                                          TRAVEL_PREDICATE, reliable_only)

    def test_reliability_gating_excludes_underreinforced(self, travel_store):
        reliable = travel_store.query_filtered(TRAVEL_TARGETS, TRAVEL_PREDICATE,
                                               reliable_only=True)
        assert [tuple(r.record_id for r in t) for t in reliable] == \
            [("H1", "F1", "C1")]
        everything = travel_store.query_filtered(TRAVEL_TARGETS, TRAVEL_PREDICATE,
                                                 reliable_only=False)
        ids = {tuple(r.record_id for r in t) for t in everything}
        assert ("H2", "F2", "C2") in ids  # passes the filter, not reliable

    def test_true_predicate_full_cross_product(self, travel_store):
        got = travel_store.query_filtered(TRAVEL_TARGETS, FilterPredicate(),
                                          reliable_only=False)
        hotels = len(travel_store.query_chain(("hotel",)))
        flights = len(travel_store.query_chain(("flight",)))
        connections = len(travel_store.query_chain(("connection_transport",)))
        assert len(got) == hotels * flights * connections

    def test_reliable_only_all_below_threshold_empty(self):
        store = ConceptStore()
        store.add_entry([rec("a", ["x"], v="1"), rec("b", ["y"], v="1")])
        assert store.query_filtered([("x",), ("y",)], FilterPredicate(),
                                    reliable_only=True) == []

    def test_unknown_alias_rejected(self, travel_store):
        pred = FilterPredicate((FieldCompare("train", "date", CmpOp.EQ, "d"),))
        with pytest.raises(UnknownField):
            travel_store.query_filtered(TRAVEL_TARGETS, pred)

    def test_duplicate_base_concepts_rejected(self, travel_store):
        with pytest.raises(UnknownField):
            travel_store.query_filtered([("hotel",), ("hotel", "France")],
                                        FilterPredicate())

    def test_randomized_oracle_equivalence(self):
        rng = random.Random(3)
        store = ConceptStore()
        for i in range(120):
            kind = rng.choice(["hotel", "flight"])
            batch = [rec(f"{kind}-{i}", (kind, rng.choice("pq")),
                         cost=str(rng.randint(1, 9)), tag=rng.choice("mn"))]
            if rng.random() < 0.5:
                other = "flight" if kind == "hotel" else "hotel"
                batch.append(rec(f"{other}-{i}", (other, rng.choice("pq")),
                                 cost=str(rng.randint(1, 9)), tag=rng.choice("mn")))
            for _ in range(rng.randint(1, 4)):
                store.add_entry(batch)
        pred = FilterPredicate((
            FieldCompare("hotel", "cost", CmpOp.LT, Decimal("7")),
            FieldEquality("hotel", "tag", "flight", "tag"),
        ))
        targets = [("hotel",), ("flight",)]
        for reliable_only in (False, True):
            got = sorted(tuple(r.record_id for r in t) for t in
                         store.query_filtered(targets, pred, reliable_only))
            assert got == brute_force(store, targets, pred, reliable_only)


class TestTypedComparisons:
    def test_date_literals(self):
        import datetime
        store = ConceptStore()
        store.add_entry([rec("early", ["event"], day="2009-12-01")])
        store.add_entry([rec("late", ["event"], day="2009-12-24")])
        pred = FilterPredicate((
            FieldCompare("event", "day", CmpOp.LT, datetime.date(2009, 12, 10)),))
        got = store.query_filtered([("event",)], pred)
        assert [t[0].record_id for t in got] == ["early"]

    def test_decimal_coercion_failure_is_nonmatch(self):
        store = ConceptStore()
        store.add_entry([rec("odd", ["thing"], cost="not-a-number")])
        pred = FilterPredicate((
            FieldCompare("thing", "cost", CmpOp.LT, Decimal("5")),))
        assert store.query_filtered([("thing",)], pred) == []

    def test_missing_field_is_nonmatch(self):
        store = ConceptStore()
        store.add_entry([rec("bare", ["thing"])])
        pred = FilterPredicate((
            FieldCompare("thing", "cost", CmpOp.GT, Decimal("1")),))
        assert store.query_filtered([("thing",)], pred) == []


# -- fixture format ------------------------------------------------------------------------

class TestFixtureFormat:
    def test_batches_grouped_by_entry_field(self):
        path = resources.files("servnet").joinpath("data/travel.jsonl")
        batches = load_jsonl(path)
        assert len(batches) == 9
        assert [r.record_id for r in batches[0]] == ["H1", "F1", "C1"]

    def test_sources_parsed_as_handles(self):
        path = resources.files("servnet").joinpath("data/travel.jsonl")
        batches = load_jsonl(path)
        assert batches[0][0].source.to_wire() == \
            "<U>http://fixture.local</U><S>travel</S>"
