"""Network tree of nested services: handles, link kinds, local resolution.

A node process hosts exactly one network. Services nest inside each other
(tree, single parent), may hold directed permanent links to other services on
the same node, and may keep an inert ordered list of association URIs.
Handles address a service as base-node URI plus the chain of service names
from the network root, with the wire form ``<U>uri</U><S>name</S>...``.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterator
from urllib.parse import urlsplit

from .errors import (
    CrossNetworkPermanentLink,
    DuplicateChildName,
    ForeignNode,
    InvalidServiceName,
    MalformedUri,
    ParseError,
    UnknownParent,
    UnknownService,
)

#: characters that would break the handle wire form; rejected in names
RESERVED_NAME_CHARS = frozenset("<>/")

_WIRE_TOKEN = re.compile(r"<([US])>([^<>]*)</\1>")


def is_absolute_uri(uri: str) -> bool:
    """True when *uri* has a scheme and a network location."""
    if not uri or any(c in uri for c in "<>") or any(ord(c) < 0x20 for c in uri):
        return False
    try:
        parts = urlsplit(uri)
    except ValueError:
        return False
    return bool(parts.scheme) and bool(parts.netloc)


def validate_service_name(name: str) -> str:
    if not name:
        raise InvalidServiceName("service name must be non-empty")
    bad = RESERVED_NAME_CHARS.intersection(name)
    if bad:
        raise InvalidServiceName(
            f"service name {name!r} contains reserved character(s) {sorted(bad)}"
        )
    return name


@dataclass(frozen=True)
class Handle:
    """Address of a service: hosting node URI plus nesting path (outermost first).

    An empty path addresses the network root of the node itself. Handles are
    compared case-sensitively, field by field.
    """

    base_uri: str
    path: tuple[str, ...] = ()

    def __post_init__(self):
        if not is_absolute_uri(self.base_uri):
            raise MalformedUri(f"not an absolute URI: {self.base_uri!r}")
        object.__setattr__(self, "path", tuple(self.path))
        for seg in self.path:
            validate_service_name(seg)

    @property
    def name(self) -> str:
        """Service's own name (last path segment)."""
        if not self.path:
            raise UnknownService("root handle has no service name")
        return self.path[-1]

    def child(self, name: str) -> "Handle":
        return Handle(self.base_uri, self.path + (validate_service_name(name),))

    def parent(self) -> "Handle":
        if not self.path:
            raise UnknownService("root handle has no parent")
        return Handle(self.base_uri, self.path[:-1])

    def to_wire(self) -> str:
        """Wire form: one ``<U>`` element then one ``<S>`` per path segment."""
        return f"<U>{self.base_uri}</U>" + "".join(f"<S>{s}</S>" for s in self.path)

    @classmethod
    def from_wire(cls, wire: str) -> "Handle":
        """Inverse of :meth:`to_wire`; raises ParseError on malformed input."""
        pos = 0
        tokens: list[tuple[str, str]] = []
        for m in _WIRE_TOKEN.finditer(wire):
            if m.start() != pos:
                raise ParseError(f"unexpected text at offset {pos} in {wire!r}")
            tokens.append((m.group(1), m.group(2)))
            pos = m.end()
        if pos != len(wire):
            raise ParseError(f"trailing garbage at offset {pos} in {wire!r}")
        if not tokens or tokens[0][0] != "U":
            raise ParseError("wire handle must start with a <U> element")
        if any(tag == "U" for tag, _ in tokens[1:]):
            raise ParseError("wire handle must contain exactly one <U> element")
        try:
            return cls(tokens[0][1], tuple(text for _, text in tokens[1:]))
        except (MalformedUri, InvalidServiceName) as exc:
            raise ParseError(str(exc)) from exc

    def __str__(self) -> str:
        return self.to_wire()


@dataclass(frozen=True)
class ServiceId:
    """Identity of a service instance; shared ids mark utility services."""

    id: str
    shared: bool = False


class LinkKind(Enum):
    NESTING = "nesting"
    PERMANENT = "permanent"
    DYNAMIC = "dynamic"
    ASSOCIATION = "association"


@dataclass(eq=False)
class ServiceNode:
    """One service instance in the network tree.

    ``impl`` is the object whose public methods are dispatched; ``metadata``
    and ``methods`` are filled in at registration time by the node server.
    """

    sid: ServiceId
    impl: Any = None
    children: dict[str, "ServiceNode"] = field(default_factory=dict)
    permanent_links: set[Handle] = field(default_factory=set)
    associations: list[str] = field(default_factory=list)
    metadata: Any = None
    methods: Any = None
    state_blob: str | None = None
    access_config: Any = None
    admin_doc: Any = None
    meta_uuid: str | None = None

    def __post_init__(self):
        # serializes dispatched calls to this service instance
        self.call_lock = threading.Lock()

    def iter_tree(self) -> Iterator["ServiceNode"]:
        """Depth-first over this node and all nested descendants."""
        yield self
        for child in self.children.values():
            yield from child.iter_tree()


class Network:
    """The tree of services hosted by one node, plus its mutation operations.

    All mutations run under a single writer lock; reads are lock-free (safe
    under the interpreter's atomic dict/set operations for our access
    patterns, and admin reads tolerate a concurrent mutation).
    """

    def __init__(self, base_uri: str):
        if not is_absolute_uri(base_uri):
            raise MalformedUri(f"not an absolute URI: {base_uri!r}")
        self.base_uri = base_uri
        self.root = ServiceNode(sid=ServiceId(base_uri, shared=False))
        self.lock = threading.RLock()

    # -- resolution ----------------------------------------------------------

    def root_handle(self) -> Handle:
        return Handle(self.base_uri)

    def resolve_handle(self, h: Handle) -> ServiceNode:
        """Return the node at *h*'s nesting path on this network."""
        if h.base_uri != self.base_uri:
            raise ForeignNode(f"handle is for {h.base_uri}, this node is {self.base_uri}")
        node = self.root
        for seg in h.path:
            try:
                node = node.children[seg]
            except KeyError:
                raise UnknownService(f"no service at {h.to_wire()!r} (missing {seg!r})")
        return node

    def handle_of(self, path: tuple[str, ...] | list[str]) -> Handle:
        return Handle(self.base_uri, tuple(path))

    # -- mutation ------------------------------------------------------------

    def add_nested(self, parent: Handle, name: str, node: ServiceNode) -> Handle:
        """Nest *node* under *parent* as child *name*; returns the new handle."""
        validate_service_name(name)
        with self.lock:
            try:
                parent_node = self.resolve_handle(parent)
            except UnknownService as exc:
                raise UnknownParent(str(exc)) from exc
            if name in parent_node.children:
                raise DuplicateChildName(
                    f"{parent.to_wire()!r} already has a child named {name!r}"
                )
            parent_node.children[name] = node
            return parent.child(name)

    def remove_nested(self, h: Handle) -> ServiceNode:
        """Detach the subtree at *h* (plumbing for demo re-creation)."""
        with self.lock:
            parent_node = self.resolve_handle(h.parent())
            try:
                return parent_node.children.pop(h.name)
            except KeyError:
                raise UnknownService(f"no service at {h.to_wire()!r}")

    def link_permanent(self, a: Handle, b: Handle, create: bool) -> None:
        """Add (or remove) the directed permanent link a -> b. Idempotent."""
        if a.base_uri != b.base_uri or a.base_uri != self.base_uri:
            raise CrossNetworkPermanentLink(
                "permanent links are limited to services of this node's network"
            )
        with self.lock:
            source = self.resolve_handle(a)
            self.resolve_handle(b)  # target must exist too
            if create:
                source.permanent_links.add(b)
            else:
                source.permanent_links.discard(b)

    def add_association(self, s: Handle, uri: str) -> None:
        """Append *uri* to *s*'s association list if absent (order preserved)."""
        if not is_absolute_uri(uri):
            raise MalformedUri(f"not an absolute URI: {uri!r}")
        with self.lock:
            node = self.resolve_handle(s)
            if uri not in node.associations:
                node.associations.append(uri)

    # -- traversal -----------------------------------------------------------

    def walk(self) -> Iterator[tuple[Handle, ServiceNode]]:
        """Breadth-first (handle, node) pairs over every registered service."""
        queue: list[tuple[Handle, ServiceNode]] = [(self.root_handle(), self.root)]
        while queue:
            handle, node = queue.pop(0)
            if node is not self.root:
                yield handle, node
            for name, child in node.children.items():
                queue.append((handle.child(name), child))
