"""Command-line entry points: serve a node, and thin admin-API clients.

Exit codes: 0 success, 1 user error (bad arguments, failed expectation,
HTTP 4xx), 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import signal
import sys
import threading
import urllib.error
import urllib.request
from importlib import resources

from .autonomic import run_experiment
from .errors import ServnetError
from .mediator import load_scenario, run_scenario
from .node import Node, load_config

EXIT_OK = 0
EXIT_USER = 1
EXIT_INTERNAL = 2


def _api_request(url: str, method: str = "GET", obj: dict | None = None,
                 token: str | None = None) -> tuple[int, bytes]:
    data = json.dumps(obj).encode("utf-8") if obj is not None else None
    headers = {"Content-Type": "application/json"} if data else {}
    if token:
        headers["X-Admin-Token"] = token
    request = urllib.request.Request(url, data=data, method=method, headers=headers)
    try:
        with urllib.request.urlopen(request, timeout=30) as resp:
            return resp.status, resp.read()
    except urllib.error.HTTPError as exc:
        return exc.code, exc.read()


def _print_api(status: int, body: bytes, as_json: bool = True) -> int:
    if as_json:
        try:
            print(json.dumps(json.loads(body.decode("utf-8")), indent=2))
        except (ValueError, UnicodeDecodeError):
            sys.stdout.write(body.decode("utf-8", "replace"))
    else:
        sys.stdout.write(body.decode("utf-8", "replace") + "\n")
    return EXIT_OK if status < 400 else EXIT_USER


def cmd_serve(args) -> int:
    config = load_config(args.config)
    if args.listen:
        config.listen = args.listen
    if args.base_uri:
        config.base_uri = args.base_uri
    if args.packet_size:
        config.packet_size = args.packet_size
    if args.no_admin:
        config.admin_enabled = False
    if args.admin_token:
        config.admin_token = args.admin_token
    node = Node(config)
    node.start()
    print(f"servnet node listening at {node.base_uri}", flush=True)
    stop = threading.Event()
    signal.signal(signal.SIGINT, lambda *_: stop.set())
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    try:
        stop.wait()
    finally:
        node.stop()
    return EXIT_OK


def cmd_view(args) -> int:
    status, body = _api_request(
        f"{args.api}/admin/view?depth={args.depth}", token=args.token)
    return _print_api(status, body)


def cmd_link(args) -> int:
    payload = {
        "create": not args.destroy,
        "mutual": args.mutual,
    }
    for key, value in (("source", args.source), ("target", args.target)):
        if value.startswith("<U>"):
            payload[key] = value
        else:
            payload[f"{key}_path"] = value
    status, body = _api_request(f"{args.api}/admin/link", "POST", payload,
                                token=args.token)
    return _print_api(status, body)


def cmd_meta(args) -> int:
    suffix = "/".join(seg for seg in args.path.split("/") if seg)
    status, body = _api_request(f"{args.api}/admin/meta/{suffix}", token=args.token)
    return _print_api(status, body, as_json=False)


def cmd_demo(args) -> int:
    payload: dict = {"action": args.action}
    if args.action == "create_services":
        payload.update(n=args.n, id_len=args.id_len, seed=args.seed,
                       tolerance=args.tolerance, period=args.period)
    status, body = _api_request(f"{args.api}/admin/demo", "POST", payload,
                                token=args.token)
    return _print_api(status, body)


def cmd_experiment(args) -> int:
    if args.api:
        status, body = _api_request(
            f"{args.api}/admin/experiment", "POST",
            {"n_services": args.services, "n_queries": args.queries,
             "seed": args.seed}, token=args.token)
        return _print_api(status, body)
    report = run_experiment(args.services, args.queries, args.seed)
    print(report.to_json())
    print(report.summary())
    return EXIT_OK


def _builtin_scenarios() -> list:
    base = resources.files("servnet").joinpath("data/scenarios")
    return sorted(base.iterdir(), key=lambda p: p.name)


def cmd_txn_sim(args) -> int:
    paths = list(args.scenarios)
    if not paths:
        paths = _builtin_scenarios()
    all_ok = True
    for path in paths:
        scenario = load_scenario(path)
        txn, log_lines, ok = run_scenario(scenario)
        for line in log_lines:
            print(line)
        verdict = "ok" if ok else f"FAILED (expected {scenario.expected_terminal})"
        print(f"# scenario {scenario.name}: terminal={txn.state.value} {verdict}")
        all_ok = all_ok and ok
    return EXIT_OK if all_ok else EXIT_USER


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="servnet",
        description="Self-organising service networks: node server and admin tools.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run a node (HTTP server)")
    p.add_argument("--config", help="key=value config file (or $SERVNET_CONFIG)")
    p.add_argument("--listen", help="host:port to bind (port 0 picks one)")
    p.add_argument("--base-uri", dest="base_uri", help="advertised base URI")
    p.add_argument("--packet-size", dest="packet_size", type=int)
    p.add_argument("--admin-token", dest="admin_token")
    p.add_argument("--no-admin", action="store_true")
    p.set_defaults(func=cmd_serve)

    def api_args(p):
        p.add_argument("--api", default="http://127.0.0.1:8420",
                       help="admin API base URL")
        p.add_argument("--token", help="admin token, if the node requires one")

    p = sub.add_parser("view", help="print the network view")
    api_args(p)
    p.add_argument("--depth", type=int, default=3)
    p.set_defaults(func=cmd_view)

    p = sub.add_parser("link", help="create or destroy a permanent link")
    api_args(p)
    p.add_argument("source", help="wire handle (<U>..</U><S>..</S>) or a/b path")
    p.add_argument("target", help="wire handle or a/b path")
    p.add_argument("--destroy", action="store_true")
    p.add_argument("--mutual", action="store_true")
    p.set_defaults(func=cmd_link)

    p = sub.add_parser("meta", help="print a service's metadata XML")
    api_args(p)
    p.add_argument("path", nargs="?", default="", help="a/b service path ('' = node)")
    p.set_defaults(func=cmd_meta)

    p = sub.add_parser("demo", help="drive the self-organization demo")
    api_args(p)
    p.add_argument("action", choices=["create_services", "start", "stop", "status"])
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--id-len", dest="id_len", type=int, default=8)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--tolerance", type=float, default=1.0)
    p.add_argument("--period", type=float, default=1.0)
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("experiment", help="run the linked-search experiment")
    p.add_argument("--api", default=None,
                   help="run via a node's admin API instead of locally")
    p.add_argument("--token")
    p.add_argument("--services", type=int, default=100)
    p.add_argument("--queries", type=int, default=500)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("txn-sim", help="run mediated-transaction scenarios")
    p.add_argument("scenarios", nargs="*",
                   help="scenario JSON files (default: the shipped set)")
    p.set_defaults(func=cmd_txn_sim)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USER if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ServnetError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except Exception as exc:  # pragma: no cover - safety net
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
