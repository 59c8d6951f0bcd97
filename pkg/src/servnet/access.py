"""Leveled, password-gated method groups with group exclusion.

Methods are partitioned into groups. Each group has an integer level and its
own password; a password for a higher-level group also opens every group at a
strictly lower level, except the ones the higher group explicitly excludes.
Equal-level distinct groups never grant each other. Passwords are stored as
SHA-256 hashes and compared in constant time.
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass, field

from .errors import InvalidConfig, UncoveredMethod, UnknownMethod

#: group installed when a service has no admin-supplied access config;
#: its password is the empty string, so unauthenticated calls pass.
OPEN_GROUP_ID = "open"


def hash_password(password: str) -> str:
    return hashlib.sha256(password.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class AccessGroup:
    """One password-bearing method group."""

    group_id: str
    level: int
    password_hash: str
    excluded: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "excluded", frozenset(self.excluded))

    @classmethod
    def create(cls, group_id: str, level: int, password: str,
               excluded: frozenset[str] | set[str] = frozenset()) -> "AccessGroup":
        """Build a group from a plaintext password (hashed immediately)."""
        return cls(group_id, level, hash_password(password), frozenset(excluded))

    def matches(self, presented: str) -> bool:
        return hmac.compare_digest(self.password_hash, hash_password(presented))


@dataclass(frozen=True)
class AccessConfig:
    """Immutable snapshot of a service's groups and method mapping."""

    groups: tuple[AccessGroup, ...]
    method_group: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        object.__setattr__(self, "method_group", dict(self.method_group))
        self.validate()

    def validate(self) -> None:
        seen: set[str] = set()
        for g in self.groups:
            if g.group_id in seen:
                raise InvalidConfig(f"duplicate group id {g.group_id!r}")
            if g.level < 0:
                raise InvalidConfig(f"group {g.group_id!r} has negative level")
            seen.add(g.group_id)
        for g in self.groups:
            if g.group_id in g.excluded:
                raise InvalidConfig(f"group {g.group_id!r} excludes itself")
            unknown = g.excluded - seen
            if unknown:
                raise InvalidConfig(
                    f"group {g.group_id!r} excludes unknown group(s) {sorted(unknown)}"
                )
        for method, gid in self.method_group.items():
            if gid not in seen:
                raise InvalidConfig(f"method {method!r} maps to unknown group {gid!r}")

    def group(self, group_id: str) -> AccessGroup:
        for g in self.groups:
            if g.group_id == group_id:
                return g
        raise InvalidConfig(f"no group {group_id!r}")

    def group_of(self, method: str) -> AccessGroup:
        try:
            return self.group(self.method_group[method])
        except KeyError:
            raise UnknownMethod(f"method {method!r} is not access-mapped")


def open_config(methods: tuple[str, ...] | list[str]) -> AccessConfig:
    """Default config: one open, empty-password group covering *methods*."""
    group = AccessGroup.create(OPEN_GROUP_ID, 0, "")
    return AccessConfig((group,), {m: OPEN_GROUP_ID for m in methods})


def _grants(holder: AccessGroup, target: AccessGroup) -> bool:
    """Does a password for *holder* open *target*'s methods?"""
    if holder.group_id == target.group_id:
        return True
    return holder.level > target.level and target.group_id not in holder.excluded


def authorize(cfg: AccessConfig, method: str, presented: str | None) -> bool:
    """Grant iff the presented password opens the method's group.

    A password identifies every group whose hash it matches; the call is
    granted when any of those is the method's own group or sits strictly
    above it without excluding it.
    """
    target = cfg.group_of(method)
    presented = presented or ""
    granted = False
    # scan every group so timing does not reveal which password matched
    for g in cfg.groups:
        if g.matches(presented) and _grants(g, target):
            granted = True
    return granted


def effective_levels(cfg: AccessConfig, presented: str | None) -> set[str]:
    """Exact set of group ids whose methods :func:`authorize` would grant."""
    presented = presented or ""
    holders = [g for g in cfg.groups if g.matches(presented)]
    return {
        target.group_id
        for target in cfg.groups
        if any(_grants(h, target) for h in holders)
    }


def check_covers(cfg: AccessConfig, methods: list[str] | tuple[str, ...]) -> None:
    """Raise UncoveredMethod unless every method maps to a group."""
    missing = [m for m in methods if m not in cfg.method_group]
    if missing:
        raise UncoveredMethod(f"method(s) not mapped to any access group: {missing}")
