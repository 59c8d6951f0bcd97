"""Exception hierarchy shared by all servnet modules."""

from __future__ import annotations


class ServnetError(Exception):
    """Base class for every error raised by this package."""

    #: short machine-readable kind carried on the wire in fault replies
    kind = "Error"

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        cls.kind = cls.__name__


# -- network tree ------------------------------------------------------------

class UnknownService(ServnetError):
    """A handle path does not resolve to a service."""


class UnknownParent(UnknownService):
    """The parent handle of an add operation does not resolve."""


class ForeignNode(ServnetError):
    """Handle base URI does not match the node asked to resolve it."""


class DuplicateChildName(ServnetError):
    """A child with that name already exists under the parent."""


class InvalidServiceName(ServnetError):
    """Service name is empty or contains a reserved character."""


class CrossNetworkPermanentLink(ServnetError):
    """Permanent links may not leave the hosting node."""


class MalformedUri(ServnetError):
    """String is not an absolute URI."""


class ParseError(ServnetError):
    """Malformed wire string."""


# -- wire protocol -----------------------------------------------------------

class EncodeError(ServnetError):
    """Value cannot be encoded."""


class UnsupportedType(EncodeError):
    """Value lies outside the structured type lattice."""


class DecodeError(ServnetError):
    """Byte stream is not a valid encoded message."""


class BadPacketSize(ServnetError):
    """Packet size must be at least one byte."""


class MissingPacket(ServnetError):
    """Packet set is incomplete."""


class ConflictingPackets(ServnetError):
    """Two packets claim the same index with different payloads."""


# -- node server -------------------------------------------------------------

class UnknownServiceKind(ServnetError):
    """Class name is not in the service-kind registry."""


class ConstructorMismatch(ServnetError):
    """Constructor arguments do not fit the registered class."""


class UnknownMethod(ServnetError):
    """Method name is not in the target's method table."""


class AccessDenied(ServnetError):
    """Presented credential does not authorize the method."""


class MethodFault(ServnetError):
    """The service method raised; message carries the service error."""


class TransportError(ServnetError):
    """Remote node unreachable or HTTP-level failure."""


class RemoteFault(ServnetError):
    """Remote dispatch failed; carries the remote error kind."""

    def __init__(self, remote_kind: str, message: str):
        super().__init__(f"{remote_kind}: {message}")
        self.remote_kind = remote_kind


# -- metadata / admin --------------------------------------------------------

class SchemaViolation(ServnetError):
    """Document does not conform to the metadata schema."""


class InvalidAdminDoc(ServnetError):
    """Admin document failed schema or access-config validation."""


class SharedMetadataMismatch(ServnetError):
    """Two live services share an ID but not their public static metadata."""


# -- access control ----------------------------------------------------------

class InvalidConfig(ServnetError):
    """Access configuration violates its invariants."""


class UncoveredMethod(ServnetError):
    """A registered method is not mapped to any access group."""


# -- autonomic engine --------------------------------------------------------

class NoBehaviorInstalled(ServnetError):
    """Auto service has no behavior to run."""


class PeerUnreachable(ServnetError):
    """A configured peer could not be queried this cycle."""


class EmptyNetwork(ServnetError):
    """Search ran against a network with no services."""


class DemoNotCreated(ServnetError):
    """Demo control action requires created services."""


# -- trust mediator ----------------------------------------------------------

class IllegalTransition(ServnetError):
    """Event is not enabled in the transaction's current state."""


# -- concept store -----------------------------------------------------------

class EmptyChain(ServnetError):
    """Concept chains must hold at least one concept."""


class UnknownRecord(ServnetError):
    """Record id is not in the store."""


class UnknownField(ServnetError):
    """Predicate references a field outside the query's targets."""
