"""Command-line entry points: batch scanning and the local service."""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import logging
import os
import sys

from . import config
from .adapters import AdapterError, adapter_from_spec
from .ingest import IngestError, detect_artifact_kind
from .pipeline import AnalysisOptions, analyze_bytes
from .report import ReportStore, report_to_dict
from .sandbox.scenario import ScenarioError, parse_scenario
from .staticrules import MalformedSignatureDb, RuleConfig, SEVERITY_ORDER

EXIT_LOW = 0
EXIT_MEDIUM = 1
EXIT_HIGH = 2
EXIT_ERROR = 3

_VERDICT_EXIT = {"Low": EXIT_LOW, "Medium": EXIT_MEDIUM, "High": EXIT_HIGH}

_KIND_FLAGS = {
    "auto": None,
    "crx": "chrome-extension",
    "vsix": "vscode-extension",
    "npm": "npm-package",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="extsleuth",
        description="Vet browser extensions, VS Code extensions, and NPM "
                    "packages for malicious behavior.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    scan = sub.add_parser("scan", help="analyze one or more artifact files")
    scan.add_argument("paths", nargs="+", metavar="PATH")
    scan.add_argument("--kind", choices=sorted(_KIND_FLAGS), default="auto")
    scan.add_argument("--scenario", metavar="FILE",
                      help="scenario JSON overriding the kind defaults")
    scan.add_argument("--no-llm", action="store_true",
                      help="skip the model narrative even if --llm is set")
    scan.add_argument("--llm", metavar="SPEC",
                      help="model adapter: mock[:level], stdio:CMD, or a URL")
    scan.add_argument("--no-dynamic", action="store_true",
                      help="static analysis only")
    scan.add_argument("--net", choices=["block", "stub", "record"],
                      help="network policy override (default: scenario's, stub)")
    scan.add_argument("--out", metavar="FILE", help="write report(s) to FILE")
    scan.add_argument("--format", choices=["json", "text"], default="text")
    scan.add_argument("--signatures", metavar="DB",
                      help="vulnerable-library signature DB (JSON)")
    scan.add_argument("--allowlist", metavar="FILE",
                      help="newline-delimited benign host suffixes")
    scan.add_argument("--indicators", metavar="FILE",
                      help="newline-delimited known-bad host suffixes")
    scan.add_argument("--store", metavar="DIR",
                      help="report store for caching (env EXTSLEUTH_STORE wins)")
    scan.add_argument("--workers", type=int, default=4,
                      help="batch-mode concurrency (default 4)")
    scan.add_argument("--deterministic-timings", action="store_true",
                      help="zero out wall-clock timings for reproducible bytes")
    scan.add_argument("--guest-timeout", type=float,
                      default=config.GUEST_CALL_TIMEOUT_S,
                      help="wall seconds allowed per guest evaluation")

    serve = sub.add_parser("serve", help="run the local analysis service")
    serve.add_argument("--host", default=config.DEFAULT_HOST,
                       help="bind address (loopback unless overridden)")
    serve.add_argument("--port", type=int, default=config.DEFAULT_PORT)
    serve.add_argument("--store", metavar="DIR",
                       help="persistent store (env EXTSLEUTH_STORE wins)")
    serve.add_argument("--ui", metavar="DIR",
                       help="built dashboard assets to serve at /")
    serve.add_argument("--llm", metavar="SPEC")
    serve.add_argument("--workers", type=int, default=2)
    serve.add_argument("--signatures", metavar="DB")
    serve.add_argument("--allowlist", metavar="FILE")
    serve.add_argument("--indicators", metavar="FILE")
    return parser


def resolve_store_dir(flag_value: str | None) -> str | None:
    return os.environ.get(config.STORE_ENV_VAR) or flag_value


def _load_rules(args, reference_date_ms=None) -> RuleConfig:
    return RuleConfig.load_defaults(
        allowlist_path=args.allowlist,
        indicators_path=args.indicators,
        signatures_path=args.signatures,
        reference_date_ms=reference_date_ms,
    )


def _scan_one(path: str, args, store, adapter) -> tuple[str, dict | None, int, str]:
    """Returns (path, report dict or None, exit code, message)."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        return path, None, EXIT_ERROR, f"cannot read {path}: {exc}"
    kind = _KIND_FLAGS[args.kind]
    scenario = None
    skip_llm = args.no_llm
    try:
        detected = kind or detect_artifact_kind(data, os.path.basename(path))
        if args.scenario:
            with open(args.scenario, encoding="utf-8") as fh:
                raw_scenario = json.load(fh)
            scenario = parse_scenario(raw_scenario, detected)
            skip_llm = skip_llm or bool(raw_scenario.get("skipLlm"))
        options = AnalysisOptions(
            kind=detected,
            scenario=scenario,
            rules=_load_rules(
                args,
                reference_date_ms=scenario.virtual_start_ms if scenario else None,
            ),
            run_dynamic=not args.no_dynamic,
            llm_adapter=adapter,
            skip_llm=skip_llm,
            network_policy=args.net,
            allow_real_network=args.net == "record",
            store=store,
            deterministic_timings=args.deterministic_timings,
            call_timeout_s=args.guest_timeout,
        )
        result = analyze_bytes(data, os.path.basename(path), options)
    except (IngestError, ScenarioError, MalformedSignatureDb, OSError,
            ValueError) as exc:
        return path, None, EXIT_ERROR, f"{type(exc).__name__}: {exc}"
    report = result.report
    code = _VERDICT_EXIT[report.verdict.level]
    return path, report_to_dict(report), code, ""


def format_text(report: dict) -> str:
    verdict = report["verdict"]
    lines = [
        f"Verdict: {verdict['level']} (score {verdict['score']})",
        f"Artifact: {report['artifact']['name']} "
        f"{report['artifact']['version']} [{report['artifact']['kind']}] "
        f"digest {report['artifact']['digest'][:16]}",
        f"Dynamic outcome: {report['outcome']['dynamic']}"
        + (f" ({report['outcome']['detail']})" if report['outcome']['detail'] else ""),
        f"Events recorded: {report['events']['count']}",
    ]
    findings = sorted(
        report["findings"],
        key=lambda f: (-SEVERITY_ORDER[f["severity"]], f["id"]),
    )
    if findings:
        lines.append(f"Findings ({len(findings)}):")
        for f in findings[:10]:
            location = f.get("location", {})
            where = (
                f" [{location['path']}:{location.get('line', '?')}]"
                if location else ""
            )
            lines.append(f"  [{f['severity']}] {f['title']}{where}")
        if len(findings) > 10:
            lines.append(f"  ... and {len(findings) - 10} more")
    else:
        lines.append("Findings: none")
    if report.get("llm"):
        lines.append(
            f"Model opinion ({report['llm']['model']}): "
            f"{report['llm']['riskLevel']} (advisory)"
        )
    return "\n".join(lines)


def cmd_scan(args) -> int:
    store_dir = resolve_store_dir(args.store)
    store = ReportStore(store_dir) if store_dir else None
    adapter = None
    if args.llm and not args.no_llm:
        try:
            adapter = adapter_from_spec(args.llm)
        except AdapterError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_ERROR

    results = []
    if len(args.paths) == 1:
        results.append(_scan_one(args.paths[0], args, store, adapter))
    else:
        with concurrent.futures.ThreadPoolExecutor(
            max_workers=max(1, args.workers)
        ) as pool:
            futures = [
                pool.submit(_scan_one, path, args, store, adapter)
                for path in args.paths
            ]
            results = [f.result() for f in futures]

    reports = []
    exit_code = EXIT_LOW
    for path, report, code, message in results:
        exit_code = max(exit_code, code)
        if report is None:
            print(f"{path}: analysis error: {message}", file=sys.stderr)
            continue
        reports.append(report)
        if args.format == "text":
            header = f"== {path} ==" if len(args.paths) > 1 else ""
            if header:
                print(header)
            print(format_text(report))
        elif not args.out:
            print(json.dumps(report, indent=2, sort_keys=True))

    if args.out and reports:
        payload = reports[0] if len(reports) == 1 else {"reports": reports}
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
        print(f"wrote {args.out}")
    return exit_code


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    store_dir = resolve_store_dir(args.store) or os.path.join(
        os.path.expanduser("~"), ".extsleuth-store"
    )
    adapter = adapter_from_spec(args.llm) if args.llm else None
    app = create_app(
        store_dir=store_dir,
        rules=_load_rules(args),
        llm_adapter=adapter,
        workers=args.workers,
        ui_dir=args.ui,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("EXTSLEUTH_LOGLEVEL", "WARNING"))
    args = build_parser().parse_args(argv)
    if args.command == "scan":
        return cmd_scan(args)
    return cmd_serve(args)


if __name__ == "__main__":
    sys.exit(main())
