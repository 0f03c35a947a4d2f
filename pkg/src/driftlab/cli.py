"""Command-line interface.

Every subcommand except ``plots`` builds a scenario (from a file or from
flags) and hands it to :func:`driftlab.report.run_scenario`, so single checks
and batch runs share one code path and one output layout.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, DriftlabError, MissingJob
from .report import EXIT_CONFIG, EXIT_FAIL, EXIT_PASS, EXIT_SOLVER, emit_plots, run_scenario
from .scenario import bundled_scenarios, load_scenario

ESTIMATE_KINDS = {
    "souplet_zhang": "souplet_zhang",
    "hamilton": "hamilton",
    "li_yau": "li_yau",
    "elliptic_global": "elliptic_global",
}
HARNACK_KINDS = {"elliptic": "elliptic_harnack", "parabolic": "parabolic_harnack"}


def combine_exit_codes(codes) -> int:
    """Config errors outrank solver aborts, which outrank margin failures."""
    for code in (EXIT_CONFIG, EXIT_SOLVER, EXIT_FAIL):
        if code in codes:
            return code
    return EXIT_PASS


def _value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _params(pairs) -> dict:
    out = {}
    for item in pairs or []:
        if "=" not in item:
            raise ConfigError(f"--param expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = _value(value)
    return out


def _problem_args(p: argparse.ArgumentParser, solve: bool = True):
    p.add_argument("--scenario", help="scenario file or bundled name providing defaults")
    p.add_argument("--space", help="space preset name or JSON object")
    p.add_argument("--nonlinearity", help="expression in t, r, w or JSON object")
    if solve:
        p.add_argument("--initial", help="initial data, e.g. 'heat_kernel(0.5)' or '1 + exp(-r^2)'")
        p.add_argument("--mode", choices=("parabolic", "elliptic"))
        p.add_argument("--dr", type=float)
        p.add_argument("--R", type=float, help="verification radius of the solve")
        p.add_argument("--T", type=float)
        p.add_argument("--nt", type=int)
        p.add_argument("--pad", type=float)
        p.add_argument("--cfl", type=float)
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="job parameter (JSON values accepted)")


def _base(args) -> dict:
    raw = {}
    if getattr(args, "scenario", None):
        raw = dict(load_scenario(args.scenario).raw)
        raw["jobs"] = []
    if args.space:
        raw["space"] = _value(args.space)
    if args.nonlinearity:
        raw["nonlinearity"] = _value(args.nonlinearity)
    solve = dict(raw.get("solve") or {})
    for key in ("initial", "mode", "dr", "R", "T", "nt", "pad", "cfl"):
        v = getattr(args, key, None)
        if v is not None:
            solve[key] = v
    if solve or getattr(args, "command", "") == "solve":
        raw["solve"] = solve
        raw.setdefault("space", "euclidean3")
    raw.setdefault("name", args.command)
    return raw


def _job(args, op: str, params: dict | None = None) -> dict:
    raw = _base(args)
    raw["jobs"] = [{"id": op, "op": op, "params": {**(params or {}), **_params(args.param)}}]
    return raw


def _global_args(p: argparse.ArgumentParser, default):
    def d(value):
        return value if default is None else default

    p.add_argument("--out", default=d("driftlab-out"), help="output directory (default: driftlab-out)")
    p.add_argument("--workers", type=int, default=d(1), help="parallel jobs per scenario")
    p.add_argument("--tolerance-profile", choices=("default", "strict"), default=d("default"))
    p.add_argument("--plots", action="store_true", default=d(False), help="also write SVG figures")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="driftlab", description="Verify gradient estimates and Harnack inequalities numerically.")
    parser.add_argument("--version", action="version", version=f"driftlab {__version__}")
    _global_args(parser, None)
    # global flags are also accepted after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    _global_args(common, argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)
    _add = sub.add_parser
    sub.add_parser = lambda *a, **k: _add(*a, parents=[common], **k)

    p = sub.add_parser("solve", help="run the solver and write the solution table")
    _problem_args(p)

    p = sub.add_parser("estimate", help="check one gradient estimate")
    p.add_argument("--kind", choices=sorted(ESTIMATE_KINDS), required=True)
    _problem_args(p)

    p = sub.add_parser("harnack", help="check an elliptic or parabolic Harnack inequality")
    p.add_argument("--kind", choices=sorted(HARNACK_KINDS), required=True)
    _problem_args(p)

    p = sub.add_parser("identities", help="residual convergence of an identity")
    p.add_argument("--name", required=True)
    _problem_args(p)

    p = sub.add_parser("liouville", help="Liouville predicate, optionally with the relaxation demo")
    p.add_argument("--theorem", default="coroLiouville")
    p.add_argument("--demo", action="store_true")
    _problem_args(p, solve=False)

    p = sub.add_parser("cutoff", help="certify a cutoff construction")
    p.add_argument("--kind", choices=("spatial", "space_time"), default="spatial")
    p.add_argument("--density", type=int, default=10_000)
    p.add_argument("--param", action="append", metavar="KEY=VALUE")

    p = sub.add_parser("run", help="run scenario files or bundled scenarios")
    p.add_argument("scenarios", nargs="*", help="paths or bundled names")
    p.add_argument("--list", action="store_true", help="list bundled scenarios")
    p.add_argument("--all", action="store_true", help="run every bundled scenario")

    p = sub.add_parser("plots", help="write SVG figures for jobs of a finished run")
    p.add_argument("--manifest", required=True)
    p.add_argument("--jobs", nargs="*", help="job ids (default: all)")
    return parser


def _report(manifest, stream) -> None:
    for jid, rec in manifest.jobs.items():
        line = f"{manifest.scenario}/{jid}: {rec['status']}"
        if rec.get("reason"):
            line += f" ({rec['reason']})"
        print(line, file=stream)
    print(f"{manifest.scenario}: exit {manifest.exit_code}", file=stream)


def _execute(raw_or_path, args, out: Path) -> int:
    manifest = run_scenario(raw_or_path, out=out, workers=args.workers, profile=args.tolerance_profile, plots=args.plots)
    _report(manifest, sys.stdout)
    return manifest.exit_code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Path(args.out)
    try:
        if args.command == "solve":
            raw = _base(args)
            raw["jobs"] = []
            return _execute(raw, args, out)
        if args.command == "estimate":
            return _execute(_job(args, ESTIMATE_KINDS[args.kind]), args, out)
        if args.command == "harnack":
            return _execute(_job(args, HARNACK_KINDS[args.kind]), args, out)
        if args.command == "identities":
            return _execute(_job(args, "identity", {"name": args.name}), args, out)
        if args.command == "liouville":
            raw = _job(args, "liouville_demo" if args.demo else "liouville_predicate", {"theorem": args.theorem})
            return _execute(raw, args, out)
        if args.command == "cutoff":
            raw = {"name": "cutoff", "jobs": [{"id": "cutoff", "op": "cutoff", "params": {"kind": args.kind, "density": args.density, **_params(args.param)}}]}
            return _execute(raw, args, out)
        if args.command == "run":
            bundled = bundled_scenarios()
            if args.list:
                for name in bundled:
                    print(name)
                return 0
            names = list(bundled) if args.all else args.scenarios
            if not names:
                parser.error("run needs scenario paths, bundled names or --all")
            codes = []
            for name in names:
                scenario = load_scenario(name)
                target = out / scenario.name if len(names) > 1 else out
                codes.append(_execute(scenario, args, target))
            return combine_exit_codes(codes)
        if args.command == "plots":
            for path in emit_plots(args.manifest, args.jobs):
                print(path)
            return 0
    except (ConfigError, MissingJob) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DriftlabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    parser.error(f"unknown command {args.command}")
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
