"""Service base class, method reflection, and the built-in service kinds.

A service is a plain Python object; its public methods (reflected straight
from the class, no extra description needed) form the RPC surface. The node
server never lets a service open its own listener: everything enters through
dispatch.
"""

from __future__ import annotations

import inspect
import time
import typing
from dataclasses import dataclass
from typing import Any

from .access import OPEN_GROUP_ID, AccessConfig
from .errors import ConstructorMismatch

_TAG_BY_TYPE = {
    int: "i",
    float: "d",
    bool: "b",
    str: "s",
    bytes: "o",
    list: "l",
    dict: "m",
    type(None): "nil",
}


def type_tag(annotation: Any) -> str:
    """Wire type tag for an annotation; anything non-primitive tags as any."""
    return _TAG_BY_TYPE.get(annotation, "any")


@dataclass(frozen=True)
class MethodDescriptor:
    """Reflected description of one public method."""

    name: str
    param_tags: tuple[str, ...]
    return_tag: str
    access_group: str


@dataclass(frozen=True)
class MethodTable:
    """Name-keyed, alphabetically ordered method descriptors."""

    entries: tuple[MethodDescriptor, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        names = [e.name for e in self.entries]
        if len(names) != len(set(names)):
            raise ValueError("method names must be unique in a table")

    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def get(self, name: str) -> MethodDescriptor | None:
        for e in self.entries:
            if e.name == name:
                return e
        return None

    def __contains__(self, name: str) -> bool:
        return self.get(name) is not None


def public_method_names(cls: type) -> list[str]:
    """Public methods defined anywhere on *cls* (sorted, framework base included)."""
    names: set[str] = set()
    for klass in cls.__mro__:
        if klass is object:
            continue
        for name, obj in vars(klass).items():
            if not name.startswith("_") and inspect.isfunction(obj):
                names.add(name)
    return sorted(names)


def _signature_tags(func) -> tuple[tuple[str, ...], str]:
    try:
        hints = typing.get_type_hints(func)
    except Exception:
        hints = {}
    sig = inspect.signature(func)
    tags = []
    for pname, param in sig.parameters.items():
        if pname == "self":
            continue
        if param.kind in (param.VAR_POSITIONAL, param.VAR_KEYWORD):
            tags.append("*")
        else:
            tags.append(type_tag(hints.get(pname)))
    return tuple(tags), type_tag(hints.get("return"))


def build_method_table(impl: Any, cfg: AccessConfig | None = None) -> MethodTable:
    """Reflect *impl*'s public methods into a table, tagging access groups."""
    entries = []
    for name in public_method_names(type(impl)):
        func = getattr(type(impl), name)
        param_tags, return_tag = _signature_tags(func)
        group = OPEN_GROUP_ID
        if cfg is not None:
            group = cfg.method_group.get(name, OPEN_GROUP_ID)
        entries.append(MethodDescriptor(name, param_tags, return_tag, group))
    return MethodTable(tuple(entries))


def constructor_tags(cls: type) -> tuple[str, ...]:
    """Type tags of the class constructor's parameters."""
    try:
        hints = typing.get_type_hints(cls.__init__)
    except Exception:
        hints = {}
    sig = inspect.signature(cls.__init__)
    tags = []
    for pname, param in sig.parameters.items():
        if pname == "self" or param.kind in (param.VAR_POSITIONAL, param.VAR_KEYWORD):
            continue
        tags.append(type_tag(hints.get(pname)))
    return tuple(tags)


def check_constructor(cls: type, args: tuple) -> None:
    """Verify *args* fits the class constructor; ConstructorMismatch otherwise."""
    sig = inspect.signature(cls.__init__)
    params = [p for name, p in sig.parameters.items() if name != "self"]
    if any(p.kind in (p.VAR_POSITIONAL, p.VAR_KEYWORD) for p in params):
        return  # open-ended constructor, let Python arbitrate
    required = sum(1 for p in params if p.default is p.empty)
    if not required <= len(args) <= len(params):
        raise ConstructorMismatch(
            f"{cls.__name__} takes {required}..{len(params)} argument(s), got {len(args)}"
        )
    try:
        hints = typing.get_type_hints(cls.__init__)
    except Exception:
        hints = {}
    for value, p in zip(args, params):
        expected = hints.get(p.name)
        tag = type_tag(expected)
        if tag != "any" and type_tag(type(value)) not in (tag, "any"):
            raise ConstructorMismatch(
                f"{cls.__name__} argument {p.name!r} expects tag {tag!r}, "
                f"got {type(value).__name__}"
            )


# -- base class and built-ins --------------------------------------------------

class Service:
    """Base for everything loadable into a network.

    Subclasses add public methods; those become the RPC surface. The
    underscore-prefixed attributes are framework wiring and stay invisible
    to dispatch.
    """

    service_type = "service"
    description = "Generic container service."
    shared_identity: str | None = None

    def __init__(self):
        self._svc_node = None  # ServiceNode backref, set at registration

    def _identity(self) -> str | None:
        """Instance identity override; None lets registration mint one."""
        return None

    def get_data(self) -> str:
        """Data payload installed by an admin document (empty if none)."""
        if self._svc_node is None or self._svc_node.state_blob is None:
            return ""
        return self._svc_node.state_blob


class EchoService(Service):
    service_type = "echo"
    description = "Returns whatever it is sent; connectivity test helper."

    def echo(self, x):
        return x

    def ping(self) -> str:
        return "pong"


class CounterService(Service):
    service_type = "counter"
    description = "Shared counter with read-modify-write increments."

    def __init__(self):
        super().__init__()
        self._count = 0

    def increment(self, delay: float = 0.0) -> int:
        value = self._count
        # deliberate read-modify-write window; dispatch serialization keeps it safe
        if delay:
            time.sleep(delay)
        self._count = value + 1
        return self._count

    def value(self) -> int:
        return self._count


class ItemStoreService(Service):
    service_type = "item store"
    description = "Holds key to value items and answers lookups."

    def __init__(self, items: dict | None = None):
        super().__init__()
        self._items = dict(items or {})

    def lookup(self, key: str):
        return self._items.get(key)

    def keys(self) -> list:
        return sorted(self._items)


class AutoService(Service):
    """Cyclic runner shell: a behavior is installed and driven by the engine."""

    service_type = "auto"
    description = "Autonomous service running an installed behavior each cycle."

    def __init__(self, id_value: str = ""):
        super().__init__()
        self._id_value = id_value
        self.behavior = None          # installed by the autonomic engine
        self.peers: list = []         # handles this service evaluates

    def _identity(self) -> str | None:
        return self._id_value or None

    def get_id(self) -> str:
        return self._id_value


class QueryEngineService(Service):
    service_type = "query engine"
    description = "Search origin; dynamic links learned from its queries."

    def status(self) -> str:
        return "ready"


def default_kinds() -> dict[str, type]:
    """Built-in registry, keyed by short alias and by dotted class name."""
    kinds: dict[str, type] = {}
    for alias, cls in (
        ("Container", Service),
        ("Echo", EchoService),
        ("Counter", CounterService),
        ("ItemStore", ItemStoreService),
        ("Auto", AutoService),
        ("Query", QueryEngineService),
    ):
        kinds[alias] = cls
        kinds[f"{cls.__module__}.{cls.__qualname__}"] = cls
    return kinds
