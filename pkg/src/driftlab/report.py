"""Scenario execution and report emission (JSON summaries, CSV tables, SVG plots)."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, DriftlabError, MissingJob, SolverAbort
from .jobs import OPS, PROFILES, Context, JobOutput, needs_solution
from .scenario import Scenario, SolveCache, load_scenario

__all__ = ["RunManifest", "run_scenario", "emit_plots", "check_expect", "EXIT_PASS", "EXIT_FAIL", "EXIT_CONFIG", "EXIT_SOLVER"]

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

# precondition failures: the job is skipped with a reason rather than failed
_SKIP = (
    "HypothesisUnverified",
    "NeedFiniteM",
    "ParameterOrder",
    "NotSameRay",
    "MissingCalibration",
    "TimeOrder",
    "NotStationary",
    "OutOfDomain",
    "InsufficientData",
    "MixedKinds",
    "DimensionConvention",
)
_TIMING_KEYS = ("seconds", "wall_time")


@dataclass
class RunManifest:
    """Record of one scenario run.

    ``jobs`` maps job ids to ``{op, status, reason, artifacts}``; statuses are
    ``pass``, ``fail``, ``skipped`` and ``error``.  Wall times live only in
    ``timing`` so the rest is reproducible bit for bit.
    """

    scenario: str
    scenario_hash: str
    version: str
    profile: str
    jobs: dict
    solver: dict
    exit_code: int
    out_dir: str
    timing: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "tool": "driftlab",
            "version": self.version,
            "scenario": self.scenario,
            "scenario_hash": self.scenario_hash,
            "profile": self.profile,
            "solver": self.solver,
            "jobs": self.jobs,
            "exit_code": self.exit_code,
            "timing": self.timing,
        }

    def reproducible(self) -> dict:
        """The manifest without wall-time fields."""
        d = self.to_dict()
        d.pop("timing")
        return d

    @classmethod
    def load(cls, path) -> "RunManifest":
        path = Path(path)
        d = json.loads(path.read_text())
        return cls(d["scenario"], d["scenario_hash"], d["version"], d["profile"], d["jobs"], d.get("solver", {}),
                   d["exit_code"], str(path.parent), d.get("timing", {}))


# -- serialisation -----------------------------------------------------------------------------------------------


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items() if k not in _TIMING_KEYS}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _sha(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


# -- expectations ---------------------------------------------------------------------------------------------------


def _lookup(summary, path):
    cur = summary
    for part in path.split("."):
        if isinstance(cur, list):
            cur = cur[int(part)]
        elif isinstance(cur, dict) and part in cur:
            cur = cur[part]
        else:
            raise ConfigError(f"expectation path {path!r} not found in the job summary")
    return cur


def check_expect(summary: dict, expect: dict) -> list:
    """Return the list of failed expectations.

    Each entry maps a dotted path in the summary to a literal, to
    ``{"min": a, "max": b}`` or to ``{"equals": v, "tol": t}``.
    """
    failures = []
    for path, rule in expect.items():
        value = _lookup(summary, path)
        if isinstance(rule, dict):
            if "min" in rule and not value >= rule["min"]:
                failures.append(f"{path}={value} < {rule['min']}")
            if "max" in rule and not value <= rule["max"]:
                failures.append(f"{path}={value} > {rule['max']}")
            if "equals" in rule and not abs(value - rule["equals"]) <= rule.get("tol", 0.0):
                failures.append(f"{path}={value} != {rule['equals']} (tol {rule.get('tol', 0.0)})")
            if "in" in rule and value not in rule["in"]:
                failures.append(f"{path}={value!r} not in {rule['in']}")
        elif value != rule:
            failures.append(f"{path}={value!r} != {rule!r}")
    return failures


# -- execution ----------------------------------------------------------------------------------------------------------


def _classify(exc: Exception) -> tuple:
    name = type(exc).__name__
    if any(cls.__name__ in _SKIP for cls in type(exc).__mro__):
        return "skipped", f"{name}: {exc}"
    return "error", f"{name}: {exc}"


def _waves(jobs: list) -> list:
    """Group jobs so every job runs after the jobs it depends on."""
    ids = {j["id"] for j in jobs}
    deps = {}
    for j in jobs:
        d = OPS[j["op"]].depends(j["params"])
        missing = [x for x in d if x not in ids]
        if missing:
            raise ConfigError(f"job {j['id']!r} depends on unknown jobs {missing}")
        deps[j["id"]] = set(d)
    done, waves = set(), []
    remaining = list(jobs)
    while remaining:
        ready = [j for j in remaining if deps[j["id"]] <= done]
        if not ready:
            raise ConfigError("job dependencies form a cycle")
        waves.append(ready)
        done |= {j["id"] for j in ready}
        remaining = [j for j in remaining if j["id"] not in done]
    return waves


def _run_job(ctx, job):
    start = time.perf_counter()
    try:
        out = OPS[job["op"]].run(ctx, job)
        failures = check_expect(_clean(out.summary), job["expect"]) if job["expect"] else []
        status = "pass" if out.passed and not failures else "fail"
        reason = "; ".join(failures)
        if not out.passed and not reason:
            reason = "margin or acceptance rule not met"
        return job, out, status, reason, None, time.perf_counter() - start
    except Exception as exc:  # recorded per job; the batch continues
        status, reason = _classify(exc)
        return job, None, status, reason, exc, time.perf_counter() - start


def run_scenario(scenario, out=None, workers: int = 1, profile: str = "default", plots: bool = False) -> RunManifest:
    """Execute every job of a scenario and write its artifacts.

    Parameters
    ----------
    scenario : Scenario, path, bundled name or dict
    out : path, optional
        Output directory; nothing is written when omitted.
    workers : int
        Thread pool size for jobs within one dependency wave.
    profile : {"default", "strict"}
    plots : bool
        Also write SVG figures for jobs with a plot series.

    Returns
    -------
    RunManifest
        ``exit_code`` is 0 when every non-skipped job passes, 1 on a margin
        failure, 2 on a configuration error and 3 when a solver aborted.
    """
    if profile not in PROFILES:
        raise ConfigError(f"unknown tolerance profile {profile!r}; choose from {sorted(PROFILES)}")
    if not isinstance(scenario, Scenario):
        scenario = load_scenario(scenario)
    t_start = time.perf_counter()
    cache = SolveCache()
    results = {}
    ctx = Context(scenario, cache, PROFILES[profile], results)
    records, outputs, timing = {}, {}, {}
    solver_info = {}
    exit_flags = set()

    if scenario.solve is not None:
        try:
            sol = ctx.solution({"id": "__base__"})
            solver_info = {"status": "ok", "metadata": {k: v for k, v in sol.metadata.items() if k not in ("history",)}}
        except SolverAbort as exc:
            solver_info = {"status": "abort", "reason": f"{type(exc).__name__}: {exc}"}
            exit_flags.add(EXIT_SOLVER)
        except DriftlabError as exc:
            solver_info = {"status": "error", "reason": f"{type(exc).__name__}: {exc}"}
            exit_flags.add(EXIT_CONFIG)

    workers = max(1, int(workers))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for wave in _waves(scenario.jobs):
            runnable = []
            for job in wave:
                if solver_info.get("status", "ok") != "ok" and needs_solution(job) and "solve" not in job:
                    records[job["id"]] = {"op": job["op"], "status": "error", "reason": f"base solve failed: {solver_info['reason']}"}
                    continue
                runnable.append(job)
            for job, res, status, reason, exc, secs in pool.map(lambda j: _run_job(ctx, j), runnable):
                records[job["id"]] = {"op": job["op"], "status": status, "reason": reason}
                timing[job["id"]] = secs
                if res is not None:
                    results[job["id"]] = res
                    outputs[job["id"]] = res
                if isinstance(exc, SolverAbort):
                    exit_flags.add(EXIT_SOLVER)
                elif isinstance(exc, ConfigError):
                    exit_flags.add(EXIT_CONFIG)
                elif status in ("fail", "error"):
                    exit_flags.add(EXIT_FAIL)

    exit_code = next((c for c in (EXIT_CONFIG, EXIT_SOLVER, EXIT_FAIL) if c in exit_flags), EXIT_PASS)
    ordered = {j["id"]: records[j["id"]] for j in scenario.jobs}
    manifest = RunManifest(scenario.name, scenario.hash, __version__, profile, ordered, _clean(solver_info), exit_code, str(out or ""))
    if out is not None:
        _write(manifest, scenario, outputs, ctx, Path(out), plots)
    timing["total"] = time.perf_counter() - t_start
    manifest.timing = timing
    if out is not None:
        (Path(out) / "manifest.json").write_text(_dumps(manifest.to_dict()))
    return manifest


def _write(manifest, scenario, outputs, ctx, out: Path, plots: bool):
    """Single collector: every file of the run is written from here."""
    out.mkdir(parents=True, exist_ok=True)
    (out / "jobs").mkdir(exist_ok=True)
    (out / "scenario.json").write_text(_dumps(scenario.raw))
    if scenario.solve is not None and manifest.solver.get("status") == "ok":
        sol = ctx.solution({"id": "__base__"})
        rows = [(float(t), float(r), float(w)) for i, t in enumerate(sol.t) for r, w in zip(sol.r, sol.w[i])]
        text = _csv(("t", "r", "w"), rows)
        (out / "solution.csv").write_text(text)
        manifest.solver["artifacts"] = {"solution.csv": _sha(text)}
    for jid, rec in manifest.jobs.items():
        res = outputs.get(jid)
        artifacts = {}
        summary = {"id": jid, "op": rec["op"], "status": rec["status"], "reason": rec["reason"]}
        if res is not None:
            summary["result"] = res.summary
        text = _dumps(summary)
        (out / "jobs" / f"{jid}.json").write_text(text)
        artifacts[f"jobs/{jid}.json"] = _sha(text)
        if res is not None and res.table is not None:
            text = _csv(*res.table)
            (out / "jobs" / f"{jid}.csv").write_text(text)
            artifacts[f"jobs/{jid}.csv"] = _sha(text)
        if res is not None and res.series is not None:
            text = _dumps(res.series)
            (out / "jobs" / f"{jid}.series.json").write_text(text)
            artifacts[f"jobs/{jid}.series.json"] = _sha(text)
        rec["artifacts"] = artifacts
    if plots:
        emit_plots(manifest, None, out)


# -- plots ----------------------------------------------------------------------------------------------------------------

_W, _H, _PAD = 480, 320, 48


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def svg_line_plot(x, y, xlabel="", ylabel="", title="", logx=False, logy=False) -> str:
    """A minimal deterministic SVG polyline plot."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    tx = np.log10(x) if logx else x
    ty = np.log10(y) if logy else y
    x0, x1 = float(tx.min()), float(tx.max())
    y0, y1 = float(ty.min()), float(ty.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    px = _PAD + (tx - x0) / (x1 - x0) * (_W - 2 * _PAD)
    py = _H - _PAD - (ty - y0) / (y1 - y0) * (_H - 2 * _PAD)
    pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
    xl = ("log10 " if logx else "") + xlabel
    yl = ("log10 " if logy else "") + ylabel
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" y2="{_H - _PAD}" stroke="black"/>',
        f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_H - _PAD}" stroke="black"/>',
        f'<polyline points="{pts}" fill="none" stroke="#1f4e9c" stroke-width="1.5"/>',
        f'<text x="{_W / 2:.0f}" y="{_PAD / 2:.0f}" text-anchor="middle" font-size="13">{title}</text>',
        f'<text x="{_W / 2:.0f}" y="{_H - 10}" text-anchor="middle" font-size="11">{xl}</text>',
        f'<text x="14" y="{_H / 2:.0f}" text-anchor="middle" font-size="11" transform="rotate(-90 14 {_H / 2:.0f})">{yl}</text>',
        f'<text x="{_PAD}" y="{_H - _PAD + 14}" font-size="10">{_fmt(x0)}</text>',
        f'<text x="{_W - _PAD}" y="{_H - _PAD + 14}" text-anchor="end" font-size="10">{_fmt(x1)}</text>',
        f'<text x="{_PAD - 4}" y="{_H - _PAD}" text-anchor="end" font-size="10">{_fmt(y0)}</text>',
        f'<text x="{_PAD - 4}" y="{_PAD + 4}" text-anchor="end" font-size="10">{_fmt(y1)}</text>',
        "</svg>",
    ]
    return "\n".join(lines) + "\n"


def emit_plots(manifest, selection=None, out=None) -> list:
    """Write one SVG per selected job that has a plot series.

    Parameters
    ----------
    manifest : RunManifest or path to ``manifest.json``
    selection : iterable of job ids, optional
        ``None`` selects every job; an empty selection writes nothing.

    Raises
    ------
    MissingJob
        A selected id is not in the manifest.
    """
    if not isinstance(manifest, RunManifest):
        manifest = RunManifest.load(manifest)
    out = Path(out or manifest.out_dir)
    chosen = list(manifest.jobs) if selection is None else list(selection)
    for jid in chosen:
        if jid not in manifest.jobs:
            raise MissingJob(f"job {jid!r} is not in the manifest")
    written = []
    for jid in chosen:
        series_path = out / "jobs" / f"{jid}.series.json"
        if not series_path.exists():
            continue
        s = json.loads(series_path.read_text())
        svg = svg_line_plot(s["x"], s["y"], s["xlabel"], s["ylabel"], jid, s["logx"], s["logy"])
        (out / "plots").mkdir(parents=True, exist_ok=True)
        target = out / "plots" / f"{jid}.svg"
        target.write_text(svg)
        written.append(target)
    return written
