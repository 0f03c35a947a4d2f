"""Scenario files: loading, validation and the shared solve cache."""

from __future__ import annotations

import copy
import hashlib
import json
import threading
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ConfigError, ParseError
from .fields import Grid
from .geometry import ModelSpace, shipped_spaces, space_from_config
from .nonlinearity import Nonlinearity, from_config
from .solver import make_initial, solve_elliptic, solve_parabolic

__all__ = ["Scenario", "load_scenario", "bundled_scenarios", "scenario_hash", "resolve_space", "resolve_nonlinearity", "SolveCache"]

DEFAULT_SOLVE = {"mode": "parabolic", "dr": 0.02, "R": 2.0, "T": 1.0, "nt": 10, "cfl": 0.4, "pad": None}


def bundled_scenarios() -> dict:
    """Bundled scenario names mapped to their paths."""
    root = resources.files("driftlab") / "scenarios"
    return {p.name[:-5]: Path(str(p)) for p in sorted(root.iterdir(), key=lambda q: q.name) if p.name.endswith(".json")}


def scenario_hash(raw: dict) -> str:
    """sha256 of the canonical JSON encoding."""
    return hashlib.sha256(json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def resolve_space(spec) -> ModelSpace:
    if isinstance(spec, ModelSpace):
        return spec
    if isinstance(spec, str):
        spaces = shipped_spaces()
        if spec not in spaces:
            raise ConfigError(f"unknown space preset {spec!r}; choose from {sorted(spaces)}")
        return spaces[spec]
    if isinstance(spec, dict) and "preset" in spec:
        return resolve_space(spec["preset"])
    return space_from_config(spec)


def resolve_nonlinearity(spec) -> Nonlinearity:
    if spec is None:
        return from_config({"family": "Zero"})
    return from_config(spec)


@dataclass
class Scenario:
    """A validated scenario.

    Attributes
    ----------
    name : str
    raw : dict
        The document as loaded (used for hashing).
    space, G
        Resolved defaults; jobs may override either.
    solve : dict or None
        Base solve block (``None`` for solver-free scenarios).
    jobs : list of dict
        Each with ``id``, ``op`` and ``params``.
    """

    name: str
    raw: dict
    space: ModelSpace | None
    G: Nonlinearity
    solve: dict | None
    jobs: list = field(default_factory=list)

    @property
    def hash(self) -> str:
        return scenario_hash(self.raw)


def _json_error(exc: json.JSONDecodeError, source: str) -> ConfigError:
    return ConfigError(f"{source}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}")


def _read(path_or_name) -> tuple:
    if isinstance(path_or_name, dict):
        return copy.deepcopy(path_or_name), "<dict>"
    text = str(path_or_name)
    path = Path(text)
    if not path.exists():
        name = text[len("bundled:"):] if text.startswith("bundled:") else text
        bundled = bundled_scenarios()
        if name not in bundled:
            raise ConfigError(f"no scenario file or bundled scenario named {text!r}")
        path = bundled[name]
    source = path.read_text()
    try:
        return json.loads(source), str(path)
    except json.JSONDecodeError as exc:
        raise _json_error(exc, str(path)) from exc


_SOLVE_KEYS = set(DEFAULT_SOLVE) | {"initial", "tol", "max_time", "chunk", "D"}
_GRID_KEYS = {"dr": "dr", "R_max": "R", "pad": "pad", "nt": "nt"}
_TIME_KEYS = {"T": "T", "cfl": "cfl"}


def normalize_solve(doc: dict, source: str = "<dict>"):
    """Collect the solve settings of a scenario or job into one flat dict.

    Accepts the documented layout (``grid: {dr, R_max, pad, nt}``,
    ``time: {T, cfl}``, top-level ``initial`` and ``D``) and the flat
    ``solve`` block, which also carries the elliptic-mode settings.  Returns
    ``None`` when neither is present.
    """
    out = {}
    found = False
    for block, keys in (("grid", _GRID_KEYS), ("time", _TIME_KEYS)):
        part = doc.get(block)
        if part is None:
            continue
        if not isinstance(part, dict):
            raise ConfigError(f"{source}: {block} block must be an object")
        unknown = set(part) - set(keys)
        if unknown:
            raise ConfigError(f"{source}: unknown {block} keys {sorted(unknown)}")
        out.update({keys[k]: v for k, v in part.items()})
        found = True
    for key in ("initial", "D"):
        if key in doc:
            out[key] = doc[key]
            found = True
    solve = doc.get("solve")
    if solve is not None:
        if not isinstance(solve, dict):
            raise ConfigError(f"{source}: solve block must be an object")
        unknown = set(solve) - _SOLVE_KEYS
        if unknown:
            raise ConfigError(f"{source}: unknown solve keys {sorted(unknown)}")
        out.update(solve)
        found = True
    return out if found else None


def load_scenario(path_or_name) -> Scenario:
    """Parse and validate a scenario file, bundled name or dict.

    Raises
    ------
    ConfigError
        Malformed JSON (with line and column), unknown operations, duplicate
        job ids, or expressions that fail to parse (with the field path and
        character offset).
    """
    from .jobs import OPS, needs_solution

    raw, source = _read(path_or_name)
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: scenario must be a JSON object")
    name = str(raw.get("name", Path(source).stem if source != "<dict>" else "scenario"))
    try:
        space = resolve_space(raw["space"]) if raw.get("space") is not None else None
    except ParseError as exc:
        raise ConfigError(f"{source}: space: {exc}") from exc
    try:
        G = resolve_nonlinearity(raw.get("nonlinearity"))
    except ParseError as exc:
        raise ConfigError(f"{source}: nonlinearity: {exc}") from exc
    solve = normalize_solve(raw, source)
    if solve is not None:
        solve = {**DEFAULT_SOLVE, **solve}
        if space is None:
            raise ConfigError(f"{source}: a solve block needs a space")
        try:
            make_initial(solve.get("initial", "1"), space)
        except ParseError as exc:
            raise ConfigError(f"{source}: solve.initial: {exc}") from exc
    jobs = []
    seen = set()
    for i, job in enumerate(raw.get("jobs", [])):
        if not isinstance(job, dict) or "op" not in job:
            raise ConfigError(f"{source}: jobs[{i}] needs an 'op'")
        op = job["op"]
        if op not in OPS:
            raise ConfigError(f"{source}: jobs[{i}]: unknown op {op!r}; choose from {sorted(OPS)}")
        jid = str(job.get("id", f"{op}_{i}"))
        if jid in seen:
            raise ConfigError(f"{source}: duplicate job id {jid!r}")
        seen.add(jid)
        params = dict(job.get("params", {}))
        entry = {"id": jid, "op": op, "params": params, "expect": dict(job.get("expect", {}))}
        for key in ("space", "nonlinearity"):
            if key in job:
                entry[key] = job[key]
        override = normalize_solve(job, f"{source}: job {jid!r}")
        if override is not None:
            entry["solve"] = override
        try:
            if "space" in entry:
                resolve_space(entry["space"])
            if "nonlinearity" in entry:
                resolve_nonlinearity(entry["nonlinearity"])
            OPS[op].validate(params)
        except ParseError as exc:
            raise ConfigError(f"{source}: jobs[{i}] ({jid}): {exc}") from exc
        if needs_solution(entry) and solve is None and "solve" not in entry:
            raise ConfigError(f"{source}: job {jid!r} needs a solve block")
        jobs.append(entry)
    return Scenario(name=name, raw=raw, space=space, G=G, solve=solve, jobs=jobs)


class SolveCache:
    """Thread-safe memo of solver runs keyed by their full configuration."""

    def __init__(self):
        self._lock = threading.Lock()
        self._locks = {}
        self._done = {}

    def get(self, space: ModelSpace, G: Nonlinearity, block: dict):
        key = (space.name, G.label, json.dumps(block, sort_keys=True, default=str))
        with self._lock:
            lock = self._locks.setdefault(key, threading.Lock())
        with lock:
            if key not in self._done:
                try:
                    self._done[key] = ("ok", _solve(space, G, block))
                except Exception as exc:  # cached so every dependent job sees the same failure
                    self._done[key] = ("err", exc)
            status, value = self._done[key]
        if status == "err":
            raise value
        return value


def _solve(space, G, block):
    grid = Grid(float(block["dr"]), float(block["R"]), int(block["nt"]), float(block["cfl"]))
    initial = block.get("initial", "1")
    if block["mode"] == "elliptic":
        return solve_elliptic(
            space, G, initial, grid,
            tol=float(block.get("tol", 1e-8)),
            max_time=float(block.get("max_time", 200.0)),
            chunk=float(block.get("chunk", 1.0)),
            pad=float(block["pad"] or 0.0),
        )
    if block["mode"] != "parabolic":
        raise ConfigError(f"solve mode must be 'parabolic' or 'elliptic', got {block['mode']!r}")
    return solve_parabolic(space, G, initial, grid, float(block["T"]), pad=block["pad"], D=block.get("D"))
