"""JSON admin surface: network views from metadata, link editing, dynamic
link inspection, and demo/experiment control.

The view endpoint is generated solely from serialized metadata documents
(never from internal tree state), truncated at the requested depth with
expansion markers, so a console can rebuild exactly what it shows. The admin
protocol is JSON over HTTP, distinct from the XML call protocol.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from pathlib import Path
from typing import TYPE_CHECKING
from urllib.parse import parse_qs, unquote, urlsplit
from xml.etree import ElementTree as ET

from .autonomic import AutonomicEngine, SELFORG_CHAIN, SelfOrgDemo, run_experiment
from .errors import (
    CrossNetworkPermanentLink,
    DemoNotCreated,
    DuplicateChildName,
    IllegalTransition,
    InvalidAdminDoc,
    MalformedUri,
    ParseError,
    ServnetError,
    UnknownService,
)
from .metadata import MetadataDoc, generate_metadata, metadata_to_bytes
from .model import Handle
from .node import factory_spec

if TYPE_CHECKING:
    from .node import Node

log = logging.getLogger("servnet.admin")

DEFAULT_VIEW_DEPTH = 3
DEMO_CONTAINER = "demo"


# -- network view -----------------------------------------------------------------

def _sid_from_other_meta(fragment: str) -> dict:
    try:
        wrapped = ET.fromstring(f"<w>{fragment}</w>")
    except ET.ParseError:
        return {"id": "", "shared": False}
    sid = wrapped.find("Sid")
    if sid is None:
        return {"id": "", "shared": False}
    return {"id": sid.text or "", "shared": sid.get("shared") == "true"}


def view_from_doc(doc: MetadataDoc, depth: int) -> dict:
    """Render one metadata document (and its children) as a view node."""
    own_depth = len(doc.handle.path)
    children_visible = own_depth < depth
    node = {
        "name": doc.handle.path[-1] if doc.handle.path else "",
        "sid": _sid_from_other_meta(doc.other_meta),
        "service_type": doc.service_type,
        "depth": own_depth,
        "handle": doc.handle.to_wire(),
        "links": [link.handle.to_wire() for link in doc.link_meta],
        "children": [
            view_from_doc(child, depth) for child in doc.child_meta
        ] if children_visible else [],
        "truncated": bool(doc.child_meta) and not children_visible,
    }
    return node


def get_network_view(node: "Node", depth: int = DEFAULT_VIEW_DEPTH) -> dict:
    """Depth-truncated tree built from freshly generated metadata documents."""
    if depth < 1:
        raise ValueError("view depth must be at least 1")
    doc = generate_metadata(node.network, node.network.root_handle())
    return {
        "base_uri": node.base_uri,
        "depth": depth,
        "tree": view_from_doc(doc, depth),
    }


def _parse_handle_arg(node: "Node", obj: dict, key: str) -> Handle:
    wire = obj.get(key)
    if wire:
        return Handle.from_wire(wire)
    path = obj.get(f"{key}_path")
    if path is None:
        raise ValueError(f"missing {key!r} (wire handle) or {key}_path")
    if isinstance(path, str):
        path = [seg for seg in path.split("/") if seg]
    return node.network.handle_of(tuple(path))


def edit_permanent_link(node: "Node", a: Handle, b: Handle,
                        create: bool, mutual: bool = False) -> None:
    """Manual link editing; mutual applies both directions explicitly."""
    node.network.link_permanent(a, b, create)
    if mutual:
        node.network.link_permanent(b, a, create)


def get_dynamic_links(node: "Node", s: Handle) -> list[dict]:
    """Summaries of the dynamic links stored for service *s*."""
    node.network.resolve_handle(s)
    engine: AutonomicEngine | None = node.engine
    if engine is None:
        return []
    links = engine.links_from(s)
    links.sort(key=lambda l: (l.chain, l.target.to_wire()))
    return [
        {
            "target": l.target.to_wire(),
            "chain": list(l.chain),
            "weight": l.weight,
            "hits": l.hits,
            "reliable": engine.is_reliable(l),
        }
        for l in links
    ]


# -- demo control ------------------------------------------------------------------

class DemoController:
    """Owns the self-organization demo lifecycle on a live node."""

    def __init__(self, node: "Node"):
        self.node = node
        self.demo: SelfOrgDemo | None = None
        self.period = 1.0
        self._running = False
        self._thread: threading.Thread | None = None
        self._lock = threading.Lock()
        node.demo = self

    def create(self, n: int, id_len: int, seed: int,
               tolerance: float = 1.0, period: float = 1.0) -> dict:
        with self._lock:
            self._stop_runner()
            network = self.node.network
            engine = self.node.engine or AutonomicEngine(self.node)
            container = network.root_handle().child(DEMO_CONTAINER)
            try:
                network.resolve_handle(container)
            except UnknownService:
                container = self.node.register_service(
                    network.root_handle(), DEMO_CONTAINER, factory_spec("Container"))
            else:
                network.remove_nested(container)
                engine.clear_chain(SELFORG_CHAIN)
                container = self.node.register_service(
                    network.root_handle(), DEMO_CONTAINER, factory_spec("Container"))
            self.period = period
            self.demo = SelfOrgDemo(self.node, engine, container, n, id_len,
                                    seed, tolerance)
            return self.status()

    def start(self) -> dict:
        with self._lock:
            if self.demo is None:
                raise DemoNotCreated("create demo services before starting")
            if not self._running:
                self._running = True
                self._thread = threading.Thread(
                    target=self._run, name="servnet-demo", daemon=True)
                self._thread.start()
            return self.status()

    def _run(self) -> None:
        while self._running:
            with self._lock:
                demo = self.demo
                if demo is None or demo.converged:
                    self._running = False
                    break
                demo.step()
            time.sleep(self.period)

    def stop(self) -> dict:
        with self._lock:
            self._stop_runner()
            return self.status()

    def _stop_runner(self) -> None:
        self._running = False
        thread, self._thread = self._thread, None
        if thread is not None and thread is not threading.current_thread():
            thread.join(timeout=5)

    def status(self) -> dict:
        demo = self.demo
        if demo is None:
            return {"created": False, "running": False, "round": 0,
                    "converged": False, "ids": {}, "links": {}}
        return {
            "created": True,
            "running": self._running,
            "round": demo.round,
            "converged": demo.converged,
            "ids": dict(demo.ids),
            "links": demo.graph(),
        }


def control_demo(node: "Node", action: str, **kwargs) -> dict:
    controller: DemoController = node.demo or DemoController(node)
    if action == "create_services":
        return controller.create(
            n=int(kwargs.get("n", 10)),
            id_len=int(kwargs.get("id_len", 8)),
            seed=int(kwargs.get("seed", 0)),
            tolerance=float(kwargs.get("tolerance", 1.0)),
            period=float(kwargs.get("period", 1.0)),
        )
    if action == "start":
        return controller.start()
    if action == "stop":
        return controller.stop()
    if action == "status":
        return controller.status()
    raise ValueError(f"unknown demo action {action!r}")


# -- HTTP router -----------------------------------------------------------------------

_STATUS_BY_ERROR = (
    (UnknownService, 404),
    (CrossNetworkPermanentLink, 409),
    (DuplicateChildName, 409),
    (DemoNotCreated, 409),
    (IllegalTransition, 409),
    (InvalidAdminDoc, 400),
    (MalformedUri, 400),
    (ParseError, 400),
)


def _error_status(exc: Exception) -> int:
    for klass, status in _STATUS_BY_ERROR:
        if isinstance(exc, klass):
            return status
    if isinstance(exc, (ValueError, KeyError, json.JSONDecodeError)):
        return 400
    return 500


def _json(status: int, obj) -> tuple[int, str, bytes]:
    return status, "application/json", json.dumps(obj).encode("utf-8")


def _error(status: int, exc: Exception) -> tuple[int, str, bytes]:
    kind = getattr(exc, "kind", type(exc).__name__)
    return _json(status, {"error": kind, "message": str(exc)})


def _ui_root() -> Path | None:
    candidates = []
    env = os.environ.get("SERVNET_UI_DIR")
    if env:
        candidates.append(Path(env))
    candidates.append(Path.cwd() / "frontend" / "dist")
    for c in candidates:
        if c.is_dir():
            return c
    return None


_CONTENT_TYPES = {
    ".html": "text/html", ".js": "text/javascript", ".css": "text/css",
    ".map": "application/json", ".json": "application/json",
    ".svg": "image/svg+xml", ".png": "image/png",
}


def _serve_ui(path: str) -> tuple[int, str, bytes]:
    root = _ui_root()
    if root is None:
        return 404, "text/plain", b"console assets not built"
    rel = path[len("/ui"):].lstrip("/") or "index.html"
    target = (root / rel).resolve()
    if not str(target).startswith(str(root.resolve())) or not target.is_file():
        return 404, "text/plain", b"not found"
    ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
    return 200, ctype, target.read_bytes()


def handle_request(node: "Node", method: str, path: str,
                   headers: dict, body: bytes) -> tuple[int, str, bytes]:
    """Route one admin HTTP request; returns (status, content type, body)."""
    url = urlsplit(path)
    segments = [unquote(s) for s in url.path.split("/") if s]
    lowered = {k.lower(): v for k, v in headers.items()}
    token = node.config.admin_token
    if token and lowered.get("x-admin-token") != token:
        return _json(401, {"error": "Unauthorized", "message": "admin token required"})
    try:
        if url.path == "/" or url.path.startswith("/ui"):
            return _serve_ui(url.path if url.path.startswith("/ui") else "/ui/")
        if not segments or segments[0] != "admin":
            return _json(404, {"error": "NotFound", "message": path})
        route = segments[1] if len(segments) > 1 else ""
        rest = segments[2:]
        if method == "GET" and route == "view":
            query = parse_qs(url.query)
            depth = int(query.get("depth", [str(DEFAULT_VIEW_DEPTH)])[0])
            return _json(200, get_network_view(node, depth))
        if method == "GET" and route == "meta":
            handle = node.network.handle_of(tuple(rest))
            doc = generate_metadata(node.network, handle)
            return 200, "application/xml", metadata_to_bytes(doc)
        if method == "GET" and route == "dynlinks":
            handle = node.network.handle_of(tuple(rest))
            return _json(200, get_dynamic_links(node, handle))
        if method == "POST" and route == "link":
            obj = json.loads(body.decode("utf-8") or "{}")
            a = _parse_handle_arg(node, obj, "source")
            b = _parse_handle_arg(node, obj, "target")
            edit_permanent_link(node, a, b,
                                create=bool(obj.get("create", True)),
                                mutual=bool(obj.get("mutual", False)))
            return _json(200, {"ok": True})
        if method == "POST" and route == "demo":
            obj = json.loads(body.decode("utf-8") or "{}")
            action = obj.pop("action", "status")
            return _json(200, control_demo(node, action, **obj))
        if method == "POST" and route == "experiment":
            obj = json.loads(body.decode("utf-8") or "{}")
            report = run_experiment(
                n_services=int(obj.get("n_services", 100)),
                n_queries=int(obj.get("n_queries", 500)),
                seed=int(obj.get("seed", 1)),
                n_keys=int(obj.get("n_keys", 50)),
                heldout_queries=int(obj.get("heldout_queries", 100)),
            )
            return _json(200, report.to_dict())
        return _json(404, {"error": "NotFound", "message": path})
    except ServnetError as exc:
        return _error(_error_status(exc), exc)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        return _error(400, exc)
    except Exception as exc:  # surface internal errors as 500, not a crash
        log.exception("admin request failed: %s %s", method, path)
        return _error(500, exc)
