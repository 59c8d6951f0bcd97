"""HTTP-facing base server hosting one network of nested services.

Every remote call enters through the node: envelopes are split into packets,
POSTed to ``/call`` (headers ``X-Msg-Id``, ``X-Pkt-Index``, ``X-Pkt-Total``),
reassembled, dispatched under a per-service execution lock, and the reply is
packet-split symmetrically — the completing POST is answered with the first
reply packet and the rest are pulled from ``/reply/{msg-id}/{index}``.
Services never open their own listeners.
"""

from __future__ import annotations

import importlib
import logging
import os
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .access import authorize, open_config
from .errors import (
    AccessDenied,
    ConstructorMismatch,
    DecodeError,
    MethodFault,
    RemoteFault,
    ServnetError,
    TransportError,
    UnknownMethod,
    UnknownService,
    UnknownServiceKind,
)
from .metadata import (
    AdminDoc,
    MetadataDoc,
    SharedMetadataRegistry,
    generate_metadata,
)
from .model import Handle, Network, ServiceId, ServiceNode
from .services import (
    MethodTable,
    build_method_table,
    check_constructor,
    constructor_tags,
    default_kinds,
)
from .wire import (
    CallEnvelope,
    Packet,
    ParamEncoding,
    ParamValue,
    ReassemblyBuffer,
    ReplyEnvelope,
    decode_envelope,
    decode_reply,
    encode_envelope,
    encode_param,
    encode_reply,
    new_message_id,
    reassemble_packets,
    split_packets,
)

log = logging.getLogger("servnet.node")

CONFIG_ENV_VAR = "SERVNET_CONFIG"


@dataclass
class NodeConfig:
    """Runtime configuration for one node process."""

    listen: str | None = "127.0.0.1:0"
    base_uri: str | None = None
    packet_size: int = 4096
    reassembly_timeout: float = 30.0
    admin_enabled: bool = True
    admin_token: str | None = None
    http_timeout: float = 10.0
    extra_kinds: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.packet_size < 1:
            raise ValueError("packet_size must be >= 1")


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def load_config(path: str | None = None) -> NodeConfig:
    """Read a key=value config file; SERVNET_CONFIG supplies a default path."""
    path = path or os.environ.get(CONFIG_ENV_VAR)
    cfg = NodeConfig()
    if not path:
        return cfg
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip().strip("\"'")
            if key == "listen":
                cfg.listen = value or None
            elif key == "base_uri":
                cfg.base_uri = value or None
            elif key == "packet_size":
                cfg.packet_size = int(value)
            elif key == "reassembly_timeout":
                cfg.reassembly_timeout = float(value)
            elif key == "admin_enabled":
                cfg.admin_enabled = _parse_bool(value)
            elif key == "admin_token":
                cfg.admin_token = value or None
            elif key == "http_timeout":
                cfg.http_timeout = float(value)
            elif key.startswith("kind."):
                cfg.extra_kinds[key[len("kind."):]] = value
            else:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
    if cfg.packet_size < 1:
        raise ValueError("packet_size must be >= 1")
    return cfg


def factory_spec(class_name: str, service_type: str = "", description: str = "",
                 other_meta: str = "", archive_uris: tuple[str, ...] = (),
                 constructors: tuple = ()) -> MetadataDoc:
    """Convenience builder for the registration document of a service kind."""
    return MetadataDoc(
        service_type=service_type,
        class_name=class_name,
        handle=Handle("factory://spec"),
        description=description,
        other_meta=other_meta,
        archive_uris=archive_uris,
        constructors=constructors,
    )


def _load_class(spec: str) -> type:
    module_name, _, attr = spec.partition(":")
    if not attr:
        module_name, _, attr = spec.rpartition(".")
    module = importlib.import_module(module_name)
    return getattr(module, attr)


class Node:
    """One network host: registration, dispatch, and the remote-call client."""

    def __init__(self, config: NodeConfig | None = None):
        self.config = config or NodeConfig()
        self._server: _NodeHTTPServer | None = None
        if self.config.listen:
            host, _, port = self.config.listen.rpartition(":")
            self._server = _NodeHTTPServer((host or "127.0.0.1", int(port)), _Handler)
            self._server.node = self
            bound_host, bound_port = self._server.server_address[:2]
            self.base_uri = self.config.base_uri or f"http://{bound_host}:{bound_port}"
        else:
            if not self.config.base_uri:
                raise ValueError("offline nodes need an explicit base_uri")
            self.base_uri = self.config.base_uri
        self.network = Network(self.base_uri)
        self.kinds: dict[str, type] = default_kinds()
        for name, spec in self.config.extra_kinds.items():
            self.kinds[name] = _load_class(spec)
        self.shared_meta = SharedMetadataRegistry()
        self.buffer = ReassemblyBuffer(self.config.reassembly_timeout)
        self._replies: dict[str, list[Packet]] = {}
        self._replies_lock = threading.Lock()
        self.engine = None  # installed by the autonomic engine
        self.demo = None    # installed by the admin demo controller
        self.stats = {
            "packets_received": 0,
            "calls_dispatched": 0,
            "reply_packets_served": 0,
        }
        self._serve_thread: threading.Thread | None = None

    # -- lifecycle -------------------------------------------------------------

    def start(self) -> None:
        if self._server is None:
            raise ValueError("offline node cannot serve HTTP")
        if self._serve_thread is None:
            self._serve_thread = threading.Thread(
                target=self._server.serve_forever, name="servnet-http", daemon=True
            )
            self._serve_thread.start()
            log.info("node serving at %s", self.base_uri)

    def stop(self) -> None:
        if self.demo is not None:
            self.demo.stop()
        if self._server is not None and self._serve_thread is not None:
            self._server.shutdown()
            self._serve_thread.join(timeout=5)
            self._serve_thread = None
        if self._server is not None:
            self._server.server_close()
            self._server = None

    def __enter__(self) -> "Node":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.stop()

    # -- registration ------------------------------------------------------------

    def register_service(self, parent: Handle, name: str, spec: MetadataDoc,
                         args: tuple = ()) -> Handle:
        """Construct the named kind, generate its metadata, nest it under parent."""
        cls = self.kinds.get(spec.class_name)
        if cls is None:
            raise UnknownServiceKind(f"no service kind {spec.class_name!r}")
        declared = [c.param_tags for c in spec.constructors]
        if declared and tuple(constructor_tags(cls)) not in declared:
            raise ConstructorMismatch(
                f"declared constructor(s) {declared} do not match {cls.__name__}"
            )
        check_constructor(cls, tuple(args))
        try:
            impl = cls(*args)
        except TypeError as exc:
            raise ConstructorMismatch(str(exc))
        identity = None
        if hasattr(impl, "_identity"):
            identity = impl._identity()
        shared_identity = getattr(cls, "shared_identity", None)
        if shared_identity:
            sid = ServiceId(shared_identity, shared=True)
        elif identity:
            sid = ServiceId(identity, shared=False)
        else:
            sid = ServiceId(f"{name}:{new_message_id()[:8]}", shared=False)
        node = ServiceNode(sid=sid, impl=impl)
        impl._svc_node = node
        if spec.archive_uris:
            impl.archive_uris = tuple(spec.archive_uris)
        overrides = {}
        if spec.service_type:
            overrides["service_type"] = spec.service_type
        if spec.description:
            overrides["description"] = spec.description
        if spec.other_meta:
            overrides["extra_meta"] = spec.other_meta
        if overrides:
            node.admin_doc = AdminDoc(**overrides)
        node.methods = build_method_table(impl)
        node.access_config = open_config(tuple(node.methods.names()))
        handle = self.network.add_nested(parent, name, node)
        try:
            doc = generate_metadata(self.network, handle)
            self.shared_meta.register(sid, doc)
        except ServnetError:
            self.network.remove_nested(handle)
            raise
        return handle

    def describe_methods(self, s: Handle) -> MethodTable:
        node = self.network.resolve_handle(s)
        if node.methods is None:
            raise UnknownService(f"{s.to_wire()!r} is not a registered service")
        return node.methods

    # -- dispatch ------------------------------------------------------------------

    def dispatch(self, e: CallEnvelope) -> ParamValue:
        """Run one call: resolve, authorize, execute under the service lock."""
        node = self.network.resolve_handle(e.target)
        if node.impl is None or node.methods is None:
            raise UnknownService(f"{e.target.to_wire()!r} is not a callable service")
        table: MethodTable = node.methods
        if e.method not in table:
            raise UnknownMethod(f"{e.target.to_wire()!r} has no method {e.method!r}")
        if not authorize(node.access_config, e.method, e.credential):
            raise AccessDenied(f"credential does not open method {e.method!r}")
        args = [p.value for p in e.params]
        self.stats["calls_dispatched"] += 1
        with node.call_lock:
            try:
                result = getattr(node.impl, e.method)(*args)
            except Exception as exc:
                raise MethodFault(f"{type(exc).__name__}: {exc}")
        if isinstance(result, ParamValue):
            return result
        if isinstance(result, (bytes, bytearray)):
            return encode_param(result, ParamEncoding.OPAQUE)
        try:
            return encode_param(result, ParamEncoding.STRUCTURED)
        except ServnetError as exc:
            raise MethodFault(f"unrepresentable result: {exc}")

    def handle_call_bytes(self, raw: bytes) -> bytes:
        """Full server-side path: decode, dispatch, encode reply (fault-safe)."""
        try:
            envelope = decode_envelope(raw)
        except DecodeError as exc:
            return encode_reply(ReplyEnvelope(
                new_message_id(), fault_kind=exc.kind, fault_message=str(exc)))
        try:
            result = self.dispatch(envelope)
            reply = ReplyEnvelope(new_message_id(), result=result)
        except ServnetError as exc:
            reply = ReplyEnvelope(new_message_id(), fault_kind=exc.kind,
                                  fault_message=str(exc))
        return encode_reply(reply)

    # -- remote client ----------------------------------------------------------------

    def call_remote(self, target: Handle, method: str, params: list = (),
                    credential: str | None = None) -> ParamValue:
        """Invoke a method on (possibly this) node over HTTP, packet-split."""
        values = tuple(
            p if isinstance(p, ParamValue) else
            encode_param(p, ParamEncoding.OPAQUE if isinstance(p, (bytes, bytearray))
                         else ParamEncoding.STRUCTURED)
            for p in params
        )
        envelope = CallEnvelope(new_message_id(), target, method, values,
                                credential, reply_to=self.network.root_handle())
        raw = encode_envelope(envelope)
        packets = split_packets(raw, self.config.packet_size, envelope.message_id)
        base = target.base_uri.rstrip("/")
        first_reply: Packet | None = None
        for packet in packets:
            status, headers, body = self._post_packet(base, packet)
            if packet.index == packet.total - 1:
                if status != 200:
                    raise TransportError(f"final packet answered with HTTP {status}")
                first_reply = _packet_from_http(headers, body)
            elif status not in (200, 202):
                raise TransportError(f"packet {packet.index} answered with HTTP {status}")
        assert first_reply is not None
        reply_packets = [first_reply]
        for index in range(1, first_reply.total):
            reply_packets.append(
                self._get_reply_packet(base, first_reply.message_id, index))
        reply = decode_reply(reassemble_packets(reply_packets))
        if reply.is_fault:
            raise RemoteFault(reply.fault_kind, reply.fault_message)
        return reply.result

    def _post_packet(self, base: str, p: Packet):
        request = urllib.request.Request(
            f"{base}/call",
            data=p.payload,
            method="POST",
            headers={
                "X-Msg-Id": p.message_id,
                "X-Pkt-Index": str(p.index),
                "X-Pkt-Total": str(p.total),
                "Content-Type": "application/octet-stream",
            },
        )
        try:
            with urllib.request.urlopen(request, timeout=self.config.http_timeout) as resp:
                return resp.status, dict(resp.headers), resp.read()
        except urllib.error.HTTPError as exc:
            raise TransportError(f"HTTP {exc.code} from {base}/call: {exc.reason}")
        except (urllib.error.URLError, OSError) as exc:
            raise TransportError(f"cannot reach {base}: {exc}")

    def _get_reply_packet(self, base: str, message_id: str, index: int) -> Packet:
        url = f"{base}/reply/{message_id}/{index}"
        try:
            with urllib.request.urlopen(url, timeout=self.config.http_timeout) as resp:
                return _packet_from_http(dict(resp.headers), resp.read())
        except urllib.error.HTTPError as exc:
            raise TransportError(f"HTTP {exc.code} fetching reply packet {index}")
        except (urllib.error.URLError, OSError) as exc:
            raise TransportError(f"cannot reach {base}: {exc}")

    # -- server-side packet plumbing -----------------------------------------------------

    def receive_packet(self, p: Packet) -> Packet | None:
        """Buffer one inbound packet; on completion dispatch and return the
        first packet of the reply."""
        self.stats["packets_received"] += 1
        self.buffer.sweep()
        self._sweep_replies()
        complete = self.buffer.add(p)
        if complete is None:
            return None
        reply_bytes = self.handle_call_bytes(complete)
        reply_id = new_message_id()
        reply_packets = split_packets(reply_bytes, self.config.packet_size, reply_id)
        if len(reply_packets) > 1:
            with self._replies_lock:
                self._replies[reply_id] = reply_packets
        return reply_packets[0]

    def reply_packet(self, message_id: str, index: int) -> Packet | None:
        with self._replies_lock:
            packets = self._replies.get(message_id)
            if packets is None or not 0 <= index < len(packets):
                return None
            self.stats["reply_packets_served"] += 1
            return packets[index]

    def _sweep_replies(self) -> None:
        # reply stores are small; cap rather than timestamp
        with self._replies_lock:
            while len(self._replies) > 256:
                self._replies.pop(next(iter(self._replies)))


def _packet_from_http(headers: dict, body: bytes) -> Packet:
    getter = {k.lower(): v for k, v in headers.items()}
    try:
        return Packet(
            getter["x-msg-id"],
            int(getter.get("x-pkt-index", "0")),
            int(getter.get("x-pkt-total", "1")),
            body,
        )
    except (KeyError, ValueError) as exc:
        raise TransportError(f"bad packet framing headers: {exc}")


class _NodeHTTPServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True
    node: Node


class _Handler(BaseHTTPRequestHandler):
    server_version = "servnet/0.1"
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # route access logs away from stderr
        log.debug("%s - %s", self.address_string(), fmt % args)

    def _send(self, status: int, body: bytes = b"",
              content_type: str = "application/octet-stream",
              extra: dict | None = None) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header(
            "Access-Control-Allow-Headers", "Content-Type, X-Admin-Token")
        for key, value in (extra or {}).items():
            self.send_header(key, value)
        self.end_headers()
        if body:
            self.wfile.write(body)

    def _send_packet(self, status: int, p: Packet) -> None:
        self._send(status, p.payload, extra={
            "X-Msg-Id": p.message_id,
            "X-Pkt-Index": str(p.index),
            "X-Pkt-Total": str(p.total),
        })

    def _body(self) -> bytes:
        length = int(self.headers.get("Content-Length", "0"))
        return self.rfile.read(length) if length else b""

    def do_POST(self):
        node: Node = self.server.node
        if self.path == "/call":
            message_id = self.headers.get("X-Msg-Id")
            if not message_id:
                self._send(400, b"missing X-Msg-Id header", "text/plain")
                return
            try:
                packet = Packet(
                    message_id,
                    int(self.headers.get("X-Pkt-Index", "0")),
                    int(self.headers.get("X-Pkt-Total", "1")),
                    self._body(),
                )
            except (ValueError, ServnetError) as exc:
                self._send(400, str(exc).encode(), "text/plain")
                return
            try:
                first_reply = node.receive_packet(packet)
            except ServnetError as exc:
                self._send(409, str(exc).encode(), "text/plain")
                return
            if first_reply is None:
                self._send(202, extra={"X-Pkt-Ack": str(packet.index)})
            else:
                self._send_packet(200, first_reply)
            return
        if self.path.startswith("/admin"):
            self._admin()
            return
        self._send(404, b"not found", "text/plain")

    def do_GET(self):
        node: Node = self.server.node
        if self.path.startswith("/reply/"):
            parts = self.path.split("/")
            if len(parts) == 4:
                try:
                    index = int(parts[3])
                except ValueError:
                    self._send(400, b"bad reply index", "text/plain")
                    return
                packet = node.reply_packet(parts[2], index)
                if packet is None:
                    self._send(404, b"no such reply packet", "text/plain")
                    return
                self._send_packet(200, packet)
                return
            self._send(400, b"bad reply path", "text/plain")
            return
        if self.path.startswith("/admin") or self.path == "/" or self.path.startswith("/ui"):
            self._admin()
            return
        self._send(404, b"not found", "text/plain")

    def do_OPTIONS(self):
        self._send(204, extra={"Access-Control-Allow-Methods": "GET, POST, OPTIONS"})

    def _admin(self):
        node: Node = self.server.node
        if not node.config.admin_enabled:
            self._send(404, b"admin api disabled", "text/plain")
            return
        from . import admin
        status, content_type, body = admin.handle_request(
            node, self.command, self.path,
            dict(self.headers.items()), self._body(),
        )
        self._send(status, body, content_type)
