"""XML call envelopes, the two parameter encodings, and packet splitting.

Every remote call is one ``<Call>`` document. Parameter values travel either
*structured* (a typed XML tree over ints, floats, bools, strings, lists and
string-keyed maps, arbitrarily nested, plus nil) or *opaque* (a
version-tagged, length-prefixed byte blob carried as base64). Encoded
messages larger than the configured packet size are split into size-bounded
packets and reassembled on arrival regardless of order.

The concrete schema is documented in docs/protocol.md and shipped as
schemas/call_envelope.xsd.
"""

from __future__ import annotations

import base64
import struct
import threading
import time
import uuid
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable
from xml.etree import ElementTree as ET

from .errors import (
    BadPacketSize,
    ConflictingPackets,
    DecodeError,
    EncodeError,
    MissingPacket,
    ServnetError,
    UnsupportedType,
)
from .model import Handle

OPAQUE_FORMAT_VERSION = 1
DEFAULT_REASSEMBLY_TIMEOUT = 30.0

_ID_SAFE = frozenset("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_.:-")


def new_message_id() -> str:
    return uuid.uuid4().hex


def xml_safe_text(s: str) -> bool:
    """True when *s* survives an XML 1.0 text round trip unchanged.

    Carriage returns are excluded (parsers normalize them away), as are
    control characters, lone surrogates and the non-characters U+FFFE/FFFF.
    """
    for ch in s:
        cp = ord(ch)
        if cp in (0x09, 0x0A):
            continue
        if cp < 0x20 or 0xD800 <= cp <= 0xDFFF or cp in (0xFFFE, 0xFFFF):
            return False
    return True


class ParamEncoding(Enum):
    STRUCTURED = "structured"
    OPAQUE = "opaque"


@dataclass(frozen=True)
class ParamValue:
    """One self-describing parameter or result value."""

    encoding: ParamEncoding
    value: Any

    def __post_init__(self):
        if self.encoding is ParamEncoding.OPAQUE and not isinstance(self.value, bytes):
            raise UnsupportedType("opaque values must be byte strings")


def _normalize_structured(v: Any) -> Any:
    """Validate *v* against the structured lattice, normalizing sequences."""
    if v is None or isinstance(v, bool) or isinstance(v, int) or isinstance(v, float):
        return v
    if isinstance(v, str):
        if not xml_safe_text(v):
            raise UnsupportedType(f"string not representable in XML text: {v!r}")
        return v
    if isinstance(v, (list, tuple)):
        return [_normalize_structured(item) for item in v]
    if isinstance(v, dict):
        out = {}
        for k, item in v.items():
            if not isinstance(k, str) or not xml_safe_text(k):
                raise UnsupportedType(f"map keys must be XML-safe strings, got {k!r}")
            out[k] = _normalize_structured(item)
        return out
    raise UnsupportedType(f"value outside the structured type lattice: {type(v).__name__}")


def encode_param(v: Any, mode: ParamEncoding = ParamEncoding.STRUCTURED) -> ParamValue:
    """Wrap *v* for the wire, validating it against the chosen encoding."""
    if mode is ParamEncoding.OPAQUE:
        if isinstance(v, bytearray):
            v = bytes(v)
        if not isinstance(v, bytes):
            raise UnsupportedType("opaque mode accepts byte strings only")
        return ParamValue(ParamEncoding.OPAQUE, v)
    return ParamValue(ParamEncoding.STRUCTURED, _normalize_structured(v))


# -- structured value <-> XML element -----------------------------------------

def _value_to_element(v: Any) -> ET.Element:
    if v is None:
        return ET.Element("nil")
    if isinstance(v, bool):
        el = ET.Element("b")
        el.text = "true" if v else "false"
        return el
    if isinstance(v, int):
        el = ET.Element("i")
        el.text = str(v)
        return el
    if isinstance(v, float):
        el = ET.Element("d")
        el.text = repr(v)
        return el
    if isinstance(v, str):
        el = ET.Element("s")
        el.text = v
        return el
    if isinstance(v, list):
        el = ET.Element("l")
        el.extend(_value_to_element(item) for item in v)
        return el
    if isinstance(v, dict):
        el = ET.Element("m")
        for k, item in v.items():
            entry = ET.SubElement(el, "e")
            key = ET.SubElement(entry, "k")
            key.text = k
            entry.append(_value_to_element(item))
        return el
    raise UnsupportedType(f"value outside the structured type lattice: {type(v).__name__}")


def _require_leaf(el: ET.Element) -> str:
    if len(el) or el.attrib:
        raise DecodeError(f"element <{el.tag}> must be a bare text leaf")
    return el.text or ""


def _require_no_text(el: ET.Element) -> None:
    if (el.text or "").strip() or el.attrib:
        raise DecodeError(f"unexpected text or attributes in <{el.tag}>")
    for child in el:
        if (child.tail or "").strip():
            raise DecodeError(f"unexpected text after <{child.tag}>")


def _value_from_element(el: ET.Element) -> Any:
    tag = el.tag
    if tag == "nil":
        if len(el) or (el.text or "").strip() or el.attrib:
            raise DecodeError("<nil> must be empty")
        return None
    if tag == "b":
        text = _require_leaf(el)
        if text == "true":
            return True
        if text == "false":
            return False
        raise DecodeError(f"bad boolean literal {text!r}")
    if tag == "i":
        try:
            return int(_require_leaf(el))
        except ValueError as exc:
            raise DecodeError(f"bad integer literal: {exc}")
    if tag == "d":
        try:
            return float(_require_leaf(el))
        except ValueError as exc:
            raise DecodeError(f"bad float literal: {exc}")
    if tag == "s":
        return _require_leaf(el)
    if tag == "l":
        _require_no_text(el)
        return [_value_from_element(child) for child in el]
    if tag == "m":
        _require_no_text(el)
        out = {}
        for entry in el:
            if entry.tag != "e":
                raise DecodeError(f"unknown element <{entry.tag}> in <m>")
            _require_no_text(entry)
            if len(entry) != 2 or entry[0].tag != "k":
                raise DecodeError("<e> must hold a <k> and exactly one value")
            key = _require_leaf(entry[0])
            if key in out:
                raise DecodeError(f"duplicate map key {key!r}")
            out[key] = _value_from_element(entry[1])
        return out
    if tag == "o":
        raise DecodeError("opaque value where a structured one was expected")
    raise DecodeError(f"unknown value element <{tag}>")


def param_to_element(p: ParamValue) -> ET.Element:
    if p.encoding is ParamEncoding.OPAQUE:
        blob = struct.pack(">BI", OPAQUE_FORMAT_VERSION, len(p.value)) + p.value
        el = ET.Element("o")
        el.text = base64.b64encode(blob).decode("ascii")
        return el
    return _value_to_element(p.value)


def param_from_element(el: ET.Element) -> ParamValue:
    if el.tag == "o":
        try:
            blob = base64.b64decode(_require_leaf(el), validate=True)
        except Exception as exc:
            raise DecodeError(f"bad base64 in opaque value: {exc}")
        if len(blob) < 5:
            raise DecodeError("opaque blob shorter than its header")
        version, length = struct.unpack(">BI", blob[:5])
        if version != OPAQUE_FORMAT_VERSION:
            raise DecodeError(f"unsupported opaque format version {version}")
        data = blob[5:]
        if len(data) != length:
            raise DecodeError("opaque blob length prefix mismatch")
        return ParamValue(ParamEncoding.OPAQUE, data)
    return ParamValue(ParamEncoding.STRUCTURED, _value_from_element(el))


def param_to_bytes(p: ParamValue) -> bytes:
    """Canonical byte form of a single value (used for reply comparison)."""
    return ET.tostring(param_to_element(p), encoding="utf-8")


def param_from_bytes(data: bytes) -> ParamValue:
    try:
        el = ET.fromstring(data)
    except ET.ParseError as exc:
        raise DecodeError(f"malformed value XML: {exc}")
    return param_from_element(el)


# -- call envelope -------------------------------------------------------------

@dataclass(frozen=True)
class CallEnvelope:
    """One RPC invocation: target handle, method, ordered params, credential."""

    message_id: str
    target: Handle
    method: str
    params: tuple[ParamValue, ...] = ()
    credential: str | None = None
    reply_to: Handle | None = None

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        if not self.message_id or not set(self.message_id) <= _ID_SAFE:
            raise EncodeError(f"message id {self.message_id!r} is not wire-safe")
        if not self.method or not xml_safe_text(self.method):
            raise EncodeError(f"method name {self.method!r} is not wire-safe")
        if self.credential is not None and not xml_safe_text(self.credential):
            raise EncodeError("credential is not representable in XML text")


def _handle_into(parent: ET.Element, h: Handle) -> None:
    u = ET.SubElement(parent, "U")
    u.text = h.base_uri
    for seg in h.path:
        s = ET.SubElement(parent, "S")
        s.text = seg


def _handle_from(el: ET.Element) -> Handle:
    _require_no_text(el)
    if not len(el) or el[0].tag != "U":
        raise DecodeError(f"<{el.tag}> must start with a <U> element")
    segs = []
    for child in el[1:]:
        if child.tag != "S":
            raise DecodeError(f"unknown element <{child.tag}> in <{el.tag}>")
        segs.append(_require_leaf(child))
    try:
        return Handle(_require_leaf(el[0]), tuple(segs))
    except ServnetError as exc:
        raise DecodeError(f"bad handle: {exc}")


def encode_envelope(e: CallEnvelope) -> bytes:
    """Canonical XML bytes for *e*; ``decode_envelope`` is the exact inverse."""
    root = ET.Element("Call", {"id": e.message_id})
    target = ET.SubElement(root, "Target")
    _handle_into(target, e.target)
    method = ET.SubElement(root, "Method")
    method.text = e.method
    params = ET.SubElement(root, "Params")
    for p in e.params:
        params.append(param_to_element(p))
    if e.credential is not None:
        cred = ET.SubElement(root, "Credential")
        cred.text = e.credential
    if e.reply_to is not None:
        reply = ET.SubElement(root, "ReplyTo")
        _handle_into(reply, e.reply_to)
    return ET.tostring(root, encoding="utf-8")


def decode_envelope(data: bytes) -> CallEnvelope:
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise DecodeError(f"malformed envelope XML: {exc}")
    if root.tag != "Call":
        raise DecodeError(f"expected <Call>, got <{root.tag}>")
    if set(root.attrib) != {"id"}:
        raise DecodeError("<Call> must carry exactly the id attribute")
    if (root.text or "").strip():
        raise DecodeError("unexpected text inside <Call>")
    children = list(root)
    for child in children:
        if (child.tail or "").strip():
            raise DecodeError(f"unexpected text after <{child.tag}>")
    if len(children) < 3 or [c.tag for c in children[:3]] != ["Target", "Method", "Params"]:
        raise DecodeError("<Call> must open with Target, Method, Params")
    target = _handle_from(children[0])
    method = _require_leaf(children[1])
    _require_no_text(children[2])
    params = tuple(param_from_element(el) for el in children[2])
    credential: str | None = None
    reply_to: Handle | None = None
    rest = children[3:]
    if rest and rest[0].tag == "Credential":
        credential = _require_leaf(rest[0])
        rest = rest[1:]
    if rest and rest[0].tag == "ReplyTo":
        reply_to = _handle_from(rest[0])
        rest = rest[1:]
    if rest:
        raise DecodeError(f"unknown element <{rest[0].tag}> in <Call>")
    try:
        return CallEnvelope(root.attrib["id"], target, method, params, credential, reply_to)
    except EncodeError as exc:
        raise DecodeError(str(exc))


# -- reply envelope ------------------------------------------------------------

@dataclass(frozen=True)
class ReplyEnvelope:
    """Result (or fault kind + message) answering one call."""

    message_id: str
    result: ParamValue | None = None
    fault_kind: str | None = None
    fault_message: str = ""

    @property
    def is_fault(self) -> bool:
        return self.fault_kind is not None


def encode_reply(r: ReplyEnvelope) -> bytes:
    root = ET.Element("Reply", {"id": r.message_id})
    if r.is_fault:
        fault = ET.SubElement(root, "Fault", {"kind": r.fault_kind})
        fault.text = r.fault_message
    else:
        result = ET.SubElement(root, "Result")
        result.append(param_to_element(r.result))
    return ET.tostring(root, encoding="utf-8")


def decode_reply(data: bytes) -> ReplyEnvelope:
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise DecodeError(f"malformed reply XML: {exc}")
    if root.tag != "Reply" or set(root.attrib) != {"id"}:
        raise DecodeError("expected <Reply id=...>")
    children = list(root)
    if len(children) != 1:
        raise DecodeError("<Reply> must hold exactly one element")
    el = children[0]
    if el.tag == "Result":
        _require_no_text(el)
        if len(el) != 1:
            raise DecodeError("<Result> must hold exactly one value")
        return ReplyEnvelope(root.attrib["id"], result=param_from_element(el[0]))
    if el.tag == "Fault":
        if set(el.attrib) != {"kind"} or len(el):
            raise DecodeError("<Fault> must carry kind attribute and message text")
        return ReplyEnvelope(root.attrib["id"], fault_kind=el.attrib["kind"],
                             fault_message=el.text or "")
    raise DecodeError(f"unknown element <{el.tag}> in <Reply>")


# -- packets -------------------------------------------------------------------

@dataclass(frozen=True)
class Packet:
    """One size-bounded fragment of an encoded message."""

    message_id: str
    index: int
    total: int
    payload: bytes

    def __post_init__(self):
        if self.total < 1:
            raise BadPacketSize(f"packet total must be >= 1, got {self.total}")
        if not 0 <= self.index < self.total:
            raise ConflictingPackets(
                f"packet index {self.index} outside 0..{self.total - 1}"
            )


def split_packets(msg: bytes, max_size: int, message_id: str | None = None) -> list[Packet]:
    """Split *msg* into ceil(len/max_size) packets (at least one, even empty)."""
    if max_size < 1:
        raise BadPacketSize(f"max packet size must be >= 1, got {max_size}")
    mid = message_id if message_id is not None else new_message_id()
    total = max(1, -(-len(msg) // max_size))
    return [
        Packet(mid, i, total, msg[i * max_size:(i + 1) * max_size])
        for i in range(total)
    ]


def reassemble_packets(ps: Iterable[Packet]) -> bytes:
    """Rebuild the original byte string from a complete packet set.

    Arrival order does not matter; duplicate indices are accepted when the
    payloads agree (idempotent receive).
    """
    packets = list(ps)
    if not packets:
        raise MissingPacket("no packets to reassemble")
    mid, total = packets[0].message_id, packets[0].total
    by_index: dict[int, bytes] = {}
    for p in packets:
        if p.message_id != mid or p.total != total:
            raise ConflictingPackets(
                f"packet {p.message_id}/{p.index} does not belong to message {mid}"
            )
        if p.index in by_index and by_index[p.index] != p.payload:
            raise ConflictingPackets(f"index {p.index} received with differing payloads")
        by_index[p.index] = p.payload
    missing = [i for i in range(total) if i not in by_index]
    if missing:
        raise MissingPacket(f"message {mid} is missing packet(s) {missing}")
    return b"".join(by_index[i] for i in range(total))


class ReassemblyBuffer:
    """Keyed store collecting packets until a message completes or expires."""

    def __init__(self, timeout: float = DEFAULT_REASSEMBLY_TIMEOUT):
        self.timeout = timeout
        self._lock = threading.Lock()
        self._partial: dict[str, dict] = {}

    def add(self, p: Packet, now: float | None = None) -> bytes | None:
        """Insert one packet; returns the full message once complete."""
        now = time.monotonic() if now is None else now
        with self._lock:
            entry = self._partial.get(p.message_id)
            if entry is None:
                entry = {"total": p.total, "parts": {}, "deadline": now + self.timeout}
                self._partial[p.message_id] = entry
            if entry["total"] != p.total:
                raise ConflictingPackets(
                    f"message {p.message_id}: total changed between packets"
                )
            parts = entry["parts"]
            if p.index in parts and parts[p.index] != p.payload:
                raise ConflictingPackets(
                    f"message {p.message_id}: index {p.index} with differing payloads"
                )
            parts[p.index] = p.payload
            if len(parts) == entry["total"]:
                del self._partial[p.message_id]
                return b"".join(parts[i] for i in range(entry["total"]))
            return None

    def sweep(self, now: float | None = None) -> list[str]:
        """Drop messages past their deadline; returns the expired ids."""
        now = time.monotonic() if now is None else now
        with self._lock:
            expired = [mid for mid, e in self._partial.items() if e["deadline"] <= now]
            for mid in expired:
                del self._partial[mid]
            return expired

    def pending(self) -> int:
        with self._lock:
            return len(self._partial)
