"""Concept-chain record store with co-entry reinforcement and filtered queries.

Records live under ordered concept chains (base concept first); the chains
of all stored records form a prefix tree that queries traverse depth-first.
Records uploaded together in one entry are pairwise co-linked; each further
co-entry reinforces the pair until it crosses the reliability threshold and
becomes retrievable by linked (tuple) queries.
"""

from __future__ import annotations

import datetime
import json
import threading
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Iterator

from .errors import EmptyChain, UnknownField, UnknownRecord
from .model import Handle

#: co-entries needed before a pair of records counts as reliable
DEFAULT_RELIABILITY_THRESHOLD = 3

ConceptChain = tuple[str, ...]


def as_chain(concepts: Iterable[str]) -> ConceptChain:
    chain = tuple(concepts)
    if not chain:
        raise EmptyChain("a concept chain needs at least one concept")
    if not all(isinstance(c, str) and c for c in chain):
        raise EmptyChain("concepts must be non-empty strings")
    return chain


@dataclass(frozen=True)
class Record:
    """One stored reference: id, its concept chain, and a payload map."""

    record_id: str
    chain: ConceptChain
    payload: dict[str, Any] = field(default_factory=dict)
    source: Handle | None = None

    def __post_init__(self):
        object.__setattr__(self, "chain", as_chain(self.chain))
        object.__setattr__(self, "payload", dict(self.payload))


@dataclass
class CoLink:
    """Reinforced unordered pair of record ids."""

    pair: tuple[str, str]
    hits: int = 0

    def reliable(self, threshold: int) -> bool:
        return self.hits >= threshold


class _TrieNode:
    __slots__ = ("children", "records")

    def __init__(self):
        self.children: dict[str, _TrieNode] = {}
        self.records: list[str] = []


# -- filter predicates -----------------------------------------------------------

class CmpOp(Enum):
    EQ = "equals"
    LT = "less-than"
    GT = "greater-than"


@dataclass(frozen=True)
class FieldCompare:
    """field of one target {equals | less-than | greater-than} literal."""

    alias: str
    fieldname: str
    op: CmpOp
    literal: Any


@dataclass(frozen=True)
class FieldEquality:
    """field of target A equals field of target B."""

    alias_a: str
    field_a: str
    alias_b: str
    field_b: str


@dataclass(frozen=True)
class FilterPredicate:
    """Conjunction of comparison and cross-record equality atoms."""

    atoms: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))

    def aliases(self) -> set[str]:
        out = set()
        for atom in self.atoms:
            if isinstance(atom, FieldCompare):
                out.add(atom.alias)
            elif isinstance(atom, FieldEquality):
                out.update((atom.alias_a, atom.alias_b))
            else:
                raise UnknownField(f"unsupported predicate atom {atom!r}")
        return out


def _coerce(value: Any, like: Any) -> Any | None:
    """Coerce *value* to the literal's type; None when it cannot represent it."""
    if isinstance(like, bool):
        return value if isinstance(value, bool) else None
    if isinstance(like, Decimal):
        try:
            return Decimal(str(value))
        except (InvalidOperation, ValueError):
            return None
    if isinstance(like, int) and not isinstance(like, bool):
        try:
            return int(str(value)) if not isinstance(value, bool) else None
        except ValueError:
            return None
    if isinstance(like, float):
        try:
            return float(str(value))
        except ValueError:
            return None
    if isinstance(like, datetime.date):
        if isinstance(value, datetime.date):
            return value
        try:
            return datetime.date.fromisoformat(str(value))
        except ValueError:
            return None
    if isinstance(like, str):
        return value if isinstance(value, str) else None
    return None


def _compare(record: Record, atom: FieldCompare) -> bool:
    if atom.fieldname not in record.payload:
        return False
    value = _coerce(record.payload[atom.fieldname], atom.literal)
    if value is None:
        return False
    if atom.op is CmpOp.EQ:
        return value == atom.literal
    if atom.op is CmpOp.LT:
        return value < atom.literal
    return value > atom.literal


def _cross_equal(a: Record, fa: str, b: Record, fb: str) -> bool:
    if fa not in a.payload or fb not in b.payload:
        return False
    return a.payload[fa] == b.payload[fb]


class ConceptStore:
    """Single-writer multi-reader store of concept-chained records."""

    def __init__(self, reliability_threshold: int = DEFAULT_RELIABILITY_THRESHOLD):
        self.reliability_threshold = reliability_threshold
        self._root = _TrieNode()
        self._records: dict[str, Record] = {}
        self._colinks: dict[tuple[str, str], CoLink] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._records)

    # -- ingestion ---------------------------------------------------------------

    def add_entry(self, records: list[Record]) -> None:
        """Store one co-entered batch; every pair gains one co-link hit."""
        records = list(records)
        for r in records:
            as_chain(r.chain)  # EmptyChain on violation (Record enforces too)
        with self._lock:
            for r in records:
                if r.record_id not in self._records:
                    node = self._root
                    for concept in r.chain:
                        node = node.children.setdefault(concept, _TrieNode())
                    node.records.append(r.record_id)
                self._records[r.record_id] = r
            ids = sorted({r.record_id for r in records})
            for i, a in enumerate(ids):
                for b in ids[i + 1:]:
                    link = self._colinks.get((a, b))
                    if link is None:
                        link = self._colinks[(a, b)] = CoLink((a, b))
                    link.hits += 1

    # -- retrieval ------------------------------------------------------------------

    def query_chain(self, prefix: Iterable[str]) -> list[Record]:
        """All records whose chain starts with *prefix*, in depth-first order."""
        prefix = tuple(prefix)
        node = self._root
        for concept in prefix:
            child = node.children.get(concept)
            if child is None:
                return []
            node = child
        out: list[Record] = []
        self._collect(node, out)
        return out

    def _collect(self, node: _TrieNode, out: list[Record]) -> None:
        out.extend(self._records[rid] for rid in node.records)
        for child in node.children.values():
            self._collect(child, out)

    def is_reliable(self, a: str, b: str) -> bool:
        """Have these two records been co-entered at least threshold times?"""
        for rid in (a, b):
            if rid not in self._records:
                raise UnknownRecord(f"no record {rid!r}")
        link = self._colinks.get((min(a, b), max(a, b)))
        return link is not None and link.reliable(self.reliability_threshold)

    def colink_hits(self, a: str, b: str) -> int:
        link = self._colinks.get((min(a, b), max(a, b)))
        return link.hits if link else 0

    def query_filtered(self, targets: list[Iterable[str]], pred: FilterPredicate,
                       reliable_only: bool = False) -> list[tuple[Record, ...]]:
        """Tuples (one record per target prefix) satisfying the predicate.

        With *reliable_only*, every pair inside a tuple must be co-link
        reliable. Target aliases are the base concepts of the prefixes.
        """
        prefixes = [tuple(t) for t in targets]
        for p in prefixes:
            as_chain(p)
        aliases = [p[0] for p in prefixes]
        if len(set(aliases)) != len(aliases):
            raise UnknownField(f"target base concepts must be distinct: {aliases}")
        unknown = pred.aliases() - set(aliases)
        if unknown:
            raise UnknownField(f"predicate references non-target alias(es) {sorted(unknown)}")
        # per-target filtering with the single-alias atoms first
        candidate_lists: list[list[Record]] = []
        for alias, prefix in zip(aliases, prefixes):
            atoms = [a for a in pred.atoms
                     if isinstance(a, FieldCompare) and a.alias == alias]
            rows = [r for r in self.query_chain(prefix)
                    if all(_compare(r, a) for a in atoms)]
            candidate_lists.append(rows)
        cross = [a for a in pred.atoms if isinstance(a, FieldEquality)]
        index = {alias: i for i, alias in enumerate(aliases)}
        out: list[tuple[Record, ...]] = []
        for combo in _product(candidate_lists):
            ok = all(
                _cross_equal(combo[index[a.alias_a]], a.field_a,
                             combo[index[a.alias_b]], a.field_b)
                for a in cross
            )
            if ok and reliable_only:
                ids = [r.record_id for r in combo]
                ok = all(
                    self.is_reliable(ids[i], ids[j])
                    for i in range(len(ids)) for j in range(i + 1, len(ids))
                )
            if ok:
                out.append(combo)
        return out


def _product(lists: list[list[Record]]) -> Iterator[tuple[Record, ...]]:
    if not lists:
        return
    if len(lists) == 1:
        for r in lists[0]:
            yield (r,)
        return
    for r in lists[0]:
        for rest in _product(lists[1:]):
            yield (r,) + rest


# -- JSON-lines ingestion -------------------------------------------------------------

def record_from_json(obj: dict) -> Record:
    source = obj.get("source")
    return Record(
        record_id=str(obj["id"]),
        chain=as_chain(obj["chain"]),
        payload=dict(obj.get("payload", {})),
        source=Handle.from_wire(source) if source else None,
    )


def load_jsonl(path: str | Path) -> list[list[Record]]:
    """Read records from JSON lines, grouping consecutive lines that share an
    ``entry`` value into one co-entered batch."""
    batches: list[list[Record]] = []
    current_entry: object = object()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            record = record_from_json(obj)
            entry = obj.get("entry")
            if entry is not None and entry == current_entry:
                batches[-1].append(record)
            else:
                batches.append([record])
                current_entry = entry if entry is not None else object()
    return batches


def load_into(store: ConceptStore, path: str | Path) -> int:
    """Ingest a JSONL fixture file; returns the number of batches entered."""
    batches = load_jsonl(path)
    for batch in batches:
        store.add_entry(batch)
    return len(batches)
