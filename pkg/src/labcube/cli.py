"""Command-line surface mirroring the HTTP API.

Exit codes: 0 success, 1 validation findings, 2 runtime error, 64 usage.
`--json` switches every command to machine-readable output.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .context import AppContext, build_context
from .errors import (
    EngineFailureError,
    LabError,
    NotFoundError,
    StackAlreadyActiveError,
    UnknownStackError,
    ValidationFailedError,
)
from .monitor import multiplex_logs, poll_snapshot
from .orchestrator import Policy
from .settings import SettingsMap, render_stack, resolve_settings
from .subscribers import build_seed_set, plmn_from_settings, validate_subscriber
from .validation import ValidationReport

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_RUNTIME = 2
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> _Parser:
    parser = _Parser(prog="labcube", description="Mobile-network lab stack manager")
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    parser.add_argument("--catalog", help="stack catalog directory (env CUBE_CATALOG)")
    parser.add_argument("--settings", help="global settings env file (env CUBE_SETTINGS)")
    parser.add_argument("--networks", help="network catalog file (env CUBE_NETWORKS)")
    parser.add_argument("--hosts", help="host registry file (env CUBE_HOSTS)")
    parser.add_argument("--subscribers", help="subscriber env file (env CUBE_SUBSCRIBERS)")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="list catalog stacks")

    p = sub.add_parser("validate", help="validate one stack")
    p.add_argument("stack")
    p.add_argument("--emulated", action="store_true")

    p = sub.add_parser("render", help="render a stack's config templates")
    p.add_argument("stack")
    p.add_argument("--out", default="rendered", help="output directory")
    p.add_argument("--emulated", action="store_true")

    p = sub.add_parser("start", help="start a stack")
    p.add_argument("stack")
    p.add_argument("--replace", action="store_true", help="tear down any active stack first")
    p.add_argument("--emulated", action="store_true")

    sub.add_parser("stop", help="stop the active stack")

    p = sub.add_parser("status", help="show stack health")
    p.add_argument("--watch", action="store_true")
    p.add_argument("--interval", type=float, default=1.0, help="watch poll interval in seconds")

    p = sub.add_parser("logs", help="stream service logs")
    p.add_argument("service")
    p.add_argument("--follow", action="store_true")

    p = sub.add_parser("seed", help="inspect the subscriber seed set")
    p.add_argument("--check", action="store_true", help="validate records and report findings")

    p = sub.add_parser("serve", help="run the HTTP API (env CUBE_BIND)")
    p.add_argument("--bind", default=None, help="host:port, default 127.0.0.1:8080")
    p.add_argument("--ui", default=None, help="directory of built web console assets")
    return parser


def _print_report(report: ValidationReport, as_json: bool) -> None:
    if as_json:
        print(json.dumps(report.to_dict()))
        return
    if report.ok:
        print("no findings")
        return
    for f in report.findings:
        print(f"{f.severity.value}: [{f.code}] {f.subject}: {f.message}")


def _env_or(value, key):
    import os

    return value if value is not None else os.environ.get(key)


def _make_context(args) -> AppContext:
    return build_context(
        catalog_dir=_env_or(args.catalog, "CUBE_CATALOG"),
        settings_path=_env_or(args.settings, "CUBE_SETTINGS"),
        networks_path=_env_or(args.networks, "CUBE_NETWORKS"),
        hosts_path=_env_or(args.hosts, "CUBE_HOSTS"),
        subscribers_path=_env_or(args.subscribers, "CUBE_SUBSCRIBERS"),
    )


def main(argv: list[str] | None = None, ctx: AppContext | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    try:
        if ctx is None:
            ctx = _make_context(args)
    except (OSError, LabError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    try:
        return _dispatch(args, ctx)
    except KeyboardInterrupt:
        return EXIT_OK
    except ValidationFailedError as exc:
        _print_report(exc.report, args.json)
        return EXIT_FINDINGS
    except (UnknownStackError, NotFoundError, StackAlreadyActiveError, EngineFailureError) as exc:
        label = "UNKNOWN_STACK" if isinstance(exc, UnknownStackError) else type(exc).__name__
        if args.json:
            print(json.dumps({"error": label, "message": str(exc)}))
        else:
            print(f"error: {label}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except LabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def _dispatch(args, ctx: AppContext) -> int:
    orch = ctx.orchestrator

    if args.command == "list":
        entries = [
            {
                "name": item.manifest.name,
                "generation": item.manifest.generation.value,
                "description": item.manifest.description,
                "service_count": len(item.manifest.services),
            }
            for item in ctx.catalog.entries
        ]
        if args.json:
            print(json.dumps({"stacks": entries, "findings": [f.to_dict() for f in ctx.catalog_findings]}))
        else:
            for e in entries:
                print(f"{e['name']:28} {e['generation']:8} {e['service_count']:2} services  {e['description']}")
            for f in ctx.catalog_findings:
                print(f"warning: [{f.code}] {f.subject}: {f.message}", file=sys.stderr)
        return EXIT_OK

    if args.command == "validate":
        _, _, report, _ = orch.prepare(args.stack, emulated=args.emulated)
        _print_report(report, args.json)
        return EXIT_OK if report.ok else EXIT_FINDINGS

    if args.command == "render":
        manifest, resolved, report, _ = orch.prepare(args.stack, emulated=args.emulated)
        if not report.ok:
            _print_report(report, args.json)
            return EXIT_FINDINGS
        rendered = render_stack(manifest, resolved, ctx.template_root)
        out_root = Path(args.out)
        written = []
        for cfg in rendered:
            target = out_root / cfg.target_path.lstrip("/")
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(cfg.content, encoding="utf-8")
            written.append(str(target))
        if args.json:
            print(json.dumps({"written": written}))
        else:
            for path in written:
                print(path)
        return EXIT_OK

    if args.command == "start":
        policy = Policy.REPLACE_ACTIVE if args.replace else Policy.REJECT_IF_ACTIVE
        session = orch.start_stack(args.stack, policy=policy, emulated=args.emulated)
        if args.json:
            print(json.dumps({"session": session.to_dict()}))
        else:
            print(f"{session.stack}: {session.state.value}")
        return EXIT_OK

    if args.command == "stop":
        session = orch.active_session() or orch.last_session()
        orch.stop_stack(session)
        if args.json:
            print(json.dumps({"stopped": session.stack if session else None}))
        else:
            print(f"stopped {session.stack}" if session else "nothing to stop")
        return EXIT_OK

    if args.command == "status":
        while True:
            snapshot = poll_snapshot(orch.active_session(), orch.endpoints)
            if args.json:
                print(json.dumps(snapshot.to_dict()), flush=True)
            else:
                print(f"stack: {snapshot.stack or '-'}  health: {snapshot.aggregate.value}", flush=True)
                for entry in snapshot.per_service:
                    print(f"  {entry.service:16} {entry.status.state.value:9} {entry.color.value}", flush=True)
            if not args.watch:
                return EXIT_OK
            time.sleep(args.interval)

    if args.command == "logs":
        session = orch.active_session()
        if session is None:
            print("error: no active session", file=sys.stderr)
            return EXIT_RUNTIME
        for event in multiplex_logs(
            session, orch.endpoints, services=[args.service], follow=args.follow
        ):
            if args.json:
                print(json.dumps(event.to_dict()), flush=True)
            else:
                print(f"[{event.service}] {event.line}", flush=True)
        return EXIT_OK

    if args.command == "seed":
        resolved = resolve_settings(ctx.global_settings, SettingsMap())
        plmn = plmn_from_settings(resolved)
        report = ValidationReport()
        for record in ctx.subscriber_records:
            report.extend(validate_subscriber(record, plmn))
        if args.check:
            _print_report(report, args.json)
            return EXIT_OK if report.ok else EXIT_FINDINGS
        seed = build_seed_set(ctx.subscriber_records, plmn)
        if args.json:
            print(json.dumps({"plmn": {"mcc": plmn.mcc, "mnc": plmn.mnc}, "document": seed.canonical_document()}))
        else:
            sys.stdout.write(seed.canonical_document())
        return EXIT_OK

    if args.command == "serve":
        import os

        import uvicorn

        from .api import create_app

        bind = args.bind or os.environ.get("CUBE_BIND", "127.0.0.1:8080")
        host, _, port = bind.partition(":")
        app = create_app(ctx, ui_dir=Path(args.ui) if args.ui else None)
        uvicorn.run(app, host=host or "127.0.0.1", port=int(port or "8080"), log_level="warning")
        return EXIT_OK

    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    raise SystemExit(main())
