"""Command-line entry point.

    opvd-lab run --module gaussian_integrator --op integrate --params p.json --seed 1 --out runs
    opvd-lab gauss integrate --out runs --format csv
    opvd-lab report runs

Exit status: 0 when every invariant holds, 1 when one fails (its name is
printed), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import ops
from .errors import (NothingToReportError, OpvdError, PreconditionError, UnsupportedError, UsageError)
from .records import canonical_json, plain, read_output, write_output

USAGE_ERRORS = (UsageError, PreconditionError, UnsupportedError, NothingToReportError)
COMMANDS = ["run", "report"] + sorted(ops.MODULE_ALIASES)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="opvd-lab", description="numerical checks for smoothed field theory")
    ap.add_argument("command", choices=COMMANDS, help="run, report, or a module alias")
    ap.add_argument("target", nargs="?", help="operation name (for aliases) or run directory (for report)")
    ap.add_argument("--module", help="module name or alias (for run)")
    ap.add_argument("--op", help="operation name")
    ap.add_argument("--params", type=Path, help="JSON file with operation parameters")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=Path("."))
    ap.add_argument("--format", choices=("csv", "json"), default="json")
    return ap


def run_op(module: str, name: str, params: dict, seed: int, out: Path, fmt: str):
    mod, (fn, defaults) = ops.lookup(module, name)
    bound = ops.bind(defaults, params)
    result = fn(bound, seed)
    config = {"module": mod, "op": name, "seed": seed, "format": fmt, "parameters": plain(bound)}
    path = write_output(out / f"{mod}.{name}.{fmt}", config, result)
    return result, path


def report(run_dir: Path) -> dict:
    """Aggregate run outputs in ``run_dir`` into report.json, report.txt and PNG plots."""
    from . import plots

    if not run_dir.is_dir():
        raise NothingToReportError(f"{run_dir} is not a directory")
    files = sorted(p for p in run_dir.iterdir()
                   if p.suffix in (".json", ".csv") and p.stem != "report" and p.name.count(".") == 2)
    if not files:
        raise NothingToReportError(f"no run outputs in {run_dir}")
    entries, failing = {}, []
    for p in files:
        rec = read_output(p)
        meta = rec["metadata"]
        key = f"{meta['module']}.{meta['op']}"
        plot = None
        if meta.get("plot"):
            png = plots.render(rec["table"], meta["plot"], run_dir / f"{key}.png")
            plot = png.name if png else None
        entries.setdefault(ops.TOPICS.get(meta["module"], meta["module"]), {})[key] = {
            "file": p.name, "format": rec["format"], "status": meta["status"], "seed": meta["seed"],
            "config_hash": meta["config_hash"], "invariants": meta["invariants"], "plot": plot}
        if meta["status"] != "pass":
            failing.append(key)
    doc = {"status": "pass" if not failing else "fail", "failing": sorted(failing), "topics": entries}
    (run_dir / "report.json").write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    lines = [f"status: {doc['status']}" + (f" ({', '.join(doc['failing'])})" if failing else "")]
    for topic in sorted(entries):
        lines.append(f"\n[{topic}]")
        for key, e in sorted(entries[topic].items()):
            lines.append(f"  {e['status']:4s}  {key}  ({e['format']})")
            for inv in e["invariants"]:
                lines.append(f"        {'ok  ' if inv['passed'] else 'FAIL'} {inv['name']} {inv['detail']}".rstrip())
    (run_dir / "report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return doc


def _load_params(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        params = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read parameters from {path}: {exc}") from exc
    if not isinstance(params, dict):
        raise UsageError("parameter file must hold a JSON object")
    return params


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "report":
            target = Path(args.target) if args.target else args.out
            doc = report(target)
            print(f"report: {doc['status']}" + (f" failing {', '.join(doc['failing'])}" if doc["failing"] else ""))
            return 0 if doc["status"] == "pass" else 1
        if args.command == "run":
            module, name = args.module, args.op or args.target
            if not module or not name:
                raise UsageError("run needs --module and --op")
        else:
            module, name = args.command, args.op or args.target
            if not name:
                raise UsageError(f"{args.command} needs an operation name")
        result, path = run_op(module, name, _load_params(args.params), args.seed, args.out, args.format)
    except USAGE_ERRORS as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except OpvdError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    failed = [inv for inv in result.invariants if not inv.passed]
    print(f"{path}: {'pass' if not failed else 'fail'}")
    for inv in failed:
        print(f"invariant failed: {inv.name} {inv.detail}".rstrip())
    return 1 if failed else 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())


__all__ = ["main", "report", "run_op", "build_parser", "canonical_json"]
