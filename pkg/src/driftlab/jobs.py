"""Verification jobs a scenario can request.

Every operation turns a parameter dict into a :class:`JobOutput`: a JSON
summary, an optional per-point table and an optional plot series.  Whether a
job passes is decided here; the runner only classifies exceptions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import estimates as est
from . import identities as ids
from .cutoff import build_space_time_cutoff, build_spatial_cutoff, certify
from .errors import ConfigError, MissingCalibration
from .fields import Cylinder
from .geometry import curvature_lower_bound
from .nonlinearity import gamma_quantities, liouville_predicate
from .solver import heat_kernel

__all__ = ["OPS", "JobOutput", "PROFILES", "Context"]

PROFILES = {
    "default": {"margin": 1e-10, "cd": 1e-8, "stationarity": 1e-6, "cutoff_stability": 1e-3},
    "strict": {"margin": 0.0, "cd": 1e-10, "stationarity": 1e-8, "cutoff_stability": 1e-4},
}


@dataclass
class JobOutput:
    passed: bool
    summary: dict
    table: tuple | None = None  # (header, rows)
    series: dict | None = None  # x, y, xlabel, ylabel, logx, logy
    obj: object = field(default=None, repr=False)


@dataclass
class Op:
    run: callable
    needs_solution: bool = False
    required: tuple = ()
    allowed: tuple | None = None
    depends_keys: tuple = ()

    def validate(self, params: dict):
        missing = [k for k in self.required if k not in params]
        if missing:
            raise ConfigError(f"missing parameters {missing}")
        if self.allowed is not None:
            extra = set(params) - set(self.allowed) - set(self.required)
            if extra:
                raise ConfigError(f"unknown parameters {sorted(extra)}")

    def depends(self, params: dict) -> list:
        out = []
        for key in self.depends_keys:
            v = params.get(key)
            if isinstance(v, str):
                out.append(v)
            elif isinstance(v, list):
                out.extend(str(x) for x in v)
        return out


class Context:
    """What a job sees: resolved space and nonlinearity, solutions and earlier results."""

    def __init__(self, scenario, cache, profile: dict, results: dict):
        self.scenario = scenario
        self.cache = cache
        self.profile = profile
        self.results = results

    def space(self, job):
        from .scenario import resolve_space

        if "space" in job:
            return resolve_space(job["space"])
        if self.scenario.space is None:
            raise ConfigError(f"job {job['id']!r} needs a space")
        return self.scenario.space

    def G(self, job):
        from .scenario import resolve_nonlinearity

        if "nonlinearity" in job:
            return resolve_nonlinearity(job["nonlinearity"])
        return self.scenario.G

    def block(self, job, **override):
        from .scenario import DEFAULT_SOLVE

        base = dict(self.scenario.solve or DEFAULT_SOLVE)
        base.update(job.get("solve", {}))
        base.update(override)
        return base

    def solution(self, job, **override):
        return self.cache.get(self.space(job), self.G(job), self.block(job, **override))


# -- helpers ----------------------------------------------------------------------------------------------------


def _estimate_series(report):
    p = report.points
    if not p:
        return None
    margin = p["rhs"] - p["lhs"]
    ts = np.unique(p["t"])
    ys = [float(np.min(margin[p["t"] == t])) for t in ts]
    return {"x": ts.tolist(), "y": ys, "xlabel": "t", "ylabel": "min margin", "logx": False, "logy": False}


def _estimate_table(report):
    p = report.points
    if not p:
        return None
    rows = [(r, t, l, h, h - l) for r, t, l, h in zip(p["r"], p["t"], p["lhs"], p["rhs"])]
    return (("r", "t", "lhs", "rhs", "margin"), rows)


def _estimate_output(report, ctx, params):
    tol = ctx.profile["margin"]
    if report.kind in est.FREE_CONSTANT and params.get("C") is None and report.kind != "EllipticHarnack":
        passed = bool(np.isfinite(report.empirical_C))
        if params.get("C_max") is not None:
            passed = passed and report.empirical_C <= float(params["C_max"])
    else:
        passed = report.margin >= -tol
    return JobOutput(passed, report.to_dict(), _estimate_table(report), _estimate_series(report), report)


def _cylinder(params):
    c = params.get("cylinder")
    if c is None:
        return None
    return Cylinder.ball(float(params.get("R", 4.0)), float(c[0]), float(c[1]))


# -- solver diagnostics ---------------------------------------------------------------------------------------


def _kernel_error(ctx, job):
    p = job["params"]
    levels = [float(x) for x in p.get("levels", [0.04, 0.02, 0.01])]
    band = p.get("ratio_band", [3.0, 5.0])
    errors = []
    for dr in levels:
        sol = ctx.solution(job, dr=dr)
        if not str(sol.metadata.get("initial", "")).startswith("heat_kernel"):
            raise ConfigError("kernel_error needs heat_kernel(t0) initial data")
        rv = float(p.get("r_verify", sol.unpolluted_radius))
        mask = sol.r <= rv + 1e-12
        exact = heat_kernel(sol.r[mask][None, :], sol.t[:, None], sol.space.n)
        errors.append(float(np.max(np.abs(sol.w[:, mask] / exact - 1))))
    ratios = [a / b for a, b in zip(errors[:-1], errors[1:])]
    passed = all(band[0] <= q <= band[1] for q in ratios)
    summary = {"levels": levels, "max_relative_error": errors, "ratios": ratios, "ratio_band": band}
    series = {"x": levels, "y": errors, "xlabel": "dr", "ylabel": "max relative error", "logx": True, "logy": True}
    return JobOutput(passed, summary, (("dr", "max_relative_error"), list(zip(levels, errors))), series)


def _mass_drift(ctx, job):
    sol = ctx.solution(job)
    mass = np.asarray(sol.metadata["mass"])
    drift = np.abs(mass / mass[0] - 1)
    tol = float(job["params"].get("tol", 1e-6))
    summary = {"initial_mass": float(mass[0]), "max_relative_drift": float(drift.max()), "tol": tol}
    series = {"x": sol.t.tolist(), "y": drift.tolist(), "xlabel": "t", "ylabel": "relative mass drift", "logx": False, "logy": False}
    return JobOutput(bool(drift.max() < tol), summary, (("t", "mass", "relative_drift"), list(zip(sol.t, mass, drift))), series)


# -- estimates -----------------------------------------------------------------------------------------------------


def _souplet_zhang(ctx, job):
    p = dict(job["params"])
    sol = ctx.solution(job)
    rep = est.souplet_zhang_check(
        sol, ctx.space(job), ctx.G(job), p.get("D", "auto"), float(p.get("R", 4.0)), _cylinder(p),
        p.get("C"), p.get("k"), p.get("variant", "local"),
    )
    return _estimate_output(rep, ctx, p)


def _hamilton(ctx, job):
    p = dict(job["params"])
    sol = ctx.solution(job)
    rep = est.hamilton_check(
        sol, ctx.space(job), ctx.G(job), float(p.get("alpha", 4.0)), float(p.get("beta", 0.0)), float(p.get("R", 4.0)),
        _cylinder(p), p.get("C"), p.get("k"), p.get("variant", "local"),
    )
    return _estimate_output(rep, ctx, p)


def _li_yau(ctx, job):
    p = dict(job["params"])
    sol = ctx.solution(job)
    rep = est.li_yau_check(
        sol, ctx.space(job), ctx.G(job), float(p.get("alpha", 2.0)), float(p.get("epsilon", 0.5)), float(p.get("R", 2.0)),
        _cylinder(p), p.get("m"), p.get("k"), p.get("variant", "local"),
    )
    return _estimate_output(rep, ctx, p)


def _elliptic_global(ctx, job):
    p = dict(job["params"])
    sol = ctx.solution(job)
    rep = est.elliptic_global_check(
        sol, ctx.space(job), ctx.G(job), float(p.get("alpha", 2.0)), float(p.get("epsilon", 0.5)), p.get("m"), p.get("k"),
        float(p.get("tol", ctx.profile["stationarity"])),
    )
    return _estimate_output(rep, ctx, p)


def _elliptic_harnack(ctx, job):
    p = dict(job["params"])
    calibration = p.get("C")
    source = p.get("calibrate_from")
    if calibration is None and source is not None:
        prior = ctx.results.get(source)
        if prior is None or prior.obj is None:
            raise MissingCalibration(f"calibration job {source!r} has no result")
        calibration = prior.obj
    sol = ctx.solution(job)
    pairs = [tuple(x) for x in p.get("pairs", [[0.0, 1.0]])]
    rep = est.elliptic_harnack_check(
        sol, ctx.space(job), ctx.G(job), p.get("D", "auto"), float(p.get("R", 4.0)), p.get("t"), pairs, calibration,
        p.get("variant", "local"), p.get("k"),
    )
    return _estimate_output(rep, ctx, p)


def _random_pairs(sol, limit, count, seed):
    rng = np.random.default_rng(seed)
    levels = np.flatnonzero(sol.t > sol.t_origin + 1e-12)
    radii = sol.r[sol.r <= limit + 1e-12]
    if levels.size < 2:
        raise ConfigError("random Harnack pairs need at least two stored levels after the origin")
    out = []
    while len(out) < count:
        i, j = np.sort(rng.choice(levels, size=2, replace=False))
        r1, r2 = rng.choice(radii, size=2)
        out.append(((float(r1), float(sol.t[i])), (float(r2), float(sol.t[j]))))
    return out


def _parabolic_harnack(ctx, job):
    p = dict(job["params"])
    sol = ctx.solution(job)
    variant = p.get("variant", "local")
    R = float(p.get("R", 2.0))
    if "random_pairs" in p:
        spec = p["random_pairs"]
        limit = R if variant == "local" else min(sol.unpolluted_radius, float(spec.get("radius", R)))
        pairs = _random_pairs(sol, limit, int(spec.get("count", 50)), int(spec.get("seed", 0)))
    else:
        pairs = [((float(a[0]), float(a[1])), (float(b[0]), float(b[1]))) for a, b in p.get("pairs", [[[0, 1], [0, 2]]])]
    rep = est.parabolic_harnack_check(
        sol, ctx.space(job), ctx.G(job), float(p.get("alpha", 2.0)), pairs, float(p.get("epsilon", 0.5)), R, p.get("m"),
        p.get("k"), variant, p.get("gamma_E_radius", "R"),
    )
    rows = [(a[0], a[1], b[0], b[1], L, mg) for (a, b), L, mg in zip(pairs, rep.details["path_functional"], rep.details["pair_margins"])]
    table = (("r1", "t1", "r2", "t2", "L", "log_margin"), rows)
    return JobOutput(rep.margin >= -ctx.profile["margin"], rep.to_dict(), table, None, rep)


def _calibrate(ctx, job):
    p = job["params"]
    reports = []
    for source in p["from"]:
        prior = ctx.results.get(source)
        if prior is None or prior.obj is None:
            raise MissingCalibration(f"calibration source {source!r} has no report")
        reports.append(prior.obj)
    cal = est.calibrate_constant(reports)
    limit = float(p.get("max_stability", 0.2))
    summary = {**cal.to_dict(), "sources": list(p["from"]), "max_stability": limit}
    return JobOutput(cal.stability < limit, summary, None, None, cal)


# -- identities --------------------------------------------------------------------------------------------------------

_SOLUTION_IDENTITIES = {
    "h_evolution": lambda sols, space, G, p: ids.h_evolution_residual(sols, p.get("D"), space, G, p.get("r_verify")),
    "H_evolution": lambda sols, space, G, p: ids.H_evolution_residual(sols, space, G, p.get("D"), p.get("r_verify")),
    "F_beta_evolution": lambda sols, space, G, p: ids.F_beta_evolution_residual(
        sols, space, G, float(p.get("alpha", 2.0)), float(p.get("beta", 0.0)), p.get("r_verify")
    ),
    "liyau_F_evolution": lambda sols, space, G, p: ids.liyau_F_evolution_residual(
        sols, space, G, float(p.get("alpha", 2.0)), p.get("m"), p.get("r_verify")
    ),
    "delta_phi_G": lambda sols, space, G, p: ids.delta_phi_G_identity_residual(sols, space, G, p.get("r_verify")),
}

_PROFILE_IDENTITIES = {
    "bochner": lambda space, levels, p: ids.bochner_residual(space, p["u"], levels, p.get("R"), p.get("path", "discrete")),
    "exp_laplacian": lambda space, levels, p: ids.exp_laplacian_identity(space, p["f"], levels, p.get("R")),
    "product_rule": lambda space, levels, p: ids.product_rule_residual(
        space, p["eta"], p["H"], float(p.get("t", 1.0)), levels, p.get("R")
    ),
}


def _identity(ctx, job):
    p = dict(job["params"])
    name = p["name"]
    levels = tuple(float(x) for x in p.get("levels", ids.DEFAULT_LEVELS))
    if name in _SOLUTION_IDENTITIES:
        sols = [ctx.solution(job, dr=dr) for dr in levels]
        rep = _SOLUTION_IDENTITIES[name](sols, ctx.space(job), ctx.G(job), p)
    elif name in _PROFILE_IDENTITIES:
        rep = _PROFILE_IDENTITIES[name](ctx.space(job), levels, p)
    else:
        raise ConfigError(f"unknown identity {name!r}; choose from {sorted(_SOLUTION_IDENTITIES) + sorted(_PROFILE_IDENTITIES)}")
    passed = not rep.flagged
    if p.get("min_order") is not None and not rep.exact:
        passed = passed and rep.order is not None and rep.order >= float(p["min_order"])
    if p.get("max_residual") is not None:
        passed = passed and max(rep.max_abs_residual) < float(p["max_residual"])
    rows = list(zip(rep.dr, rep.max_abs_residual))
    series = None
    if all(v > 0 for v in rep.max_abs_residual):
        series = {"x": list(rep.dr), "y": list(rep.max_abs_residual), "xlabel": "dr", "ylabel": "max residual", "logx": True, "logy": True}
    return JobOutput(passed, rep.to_dict(), (("dr", "max_abs_residual"), rows), series, rep)


def random_radial_fields(count: int, seed: int = 0) -> list:
    """Smooth even radial test functions as expression strings."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        a, b, c, d = rng.uniform(-2, 2, size=4)
        om, s = rng.uniform(0.2, 2.0), rng.uniform(0.1, 1.0)
        out.append(f"{a:.6f}*r^2 + {b:.6f}*cos({om:.6f}*r) + {c:.6f}*exp(-{s:.6f}*r^2) + {d:.6f}*r^4/(1+r^2)")
    return out


def _cd_condition(ctx, job):
    p = job["params"]
    space = ctx.space(job)
    m = p.get("m")
    flavor = "Ric_phi" if math.isinf(space.m if m is None else float(m)) else "Ric_phi^m"
    R = p.get("R")
    region = (0.0, float(R) if R is not None else space.R_max)
    k = p.get("k", "certified")
    if k == "certified":
        k = curvature_lower_bound(space, flavor, region=region, m=m).min_eigenvalue
    fields_ = list(p.get("u", []))
    if "random" in p:
        fields_ += random_radial_fields(int(p["random"].get("count", 100)), int(p["random"].get("seed", 0)))
    margins = [ids.cd_condition_check(space, u, float(k), m, R) for u in fields_]
    worst = int(np.argmin(margins))
    tol = ctx.profile["cd"]
    summary = {"space": space.name, "k": float(k), "fields": len(fields_), "min_margin": float(margins[worst]), "worst_field": fields_[worst], "tol": tol}
    return JobOutput(bool(margins[worst] >= -tol), summary, (("field", "margin"), list(zip(fields_, margins))), None)


def _quadratic_lemma(ctx, job):
    p = job["params"]
    res = ids.quadratic_lemma_check(int(p.get("samples", 100_000)), p.get("ranges"), int(p.get("seed", 0)), float(p.get("tol", 1e-12)))
    return JobOutput(res.violations == 0, res.to_dict(), None, None, res)


# -- cutoffs and Liouville ------------------------------------------------------------------------------------------


def _cutoff(ctx, job):
    p = job["params"]
    kind = p.get("kind", "spatial")
    density = int(p.get("density", 10_000))
    if kind == "spatial":
        build = lambda d: build_spatial_cutoff(float(p.get("R", 1.0)), density=d)  # noqa: E731
    elif kind == "space_time":
        build = lambda d: build_space_time_cutoff(  # noqa: E731
            float(p.get("R", 1.0)), float(p.get("T", 1.0)), float(p.get("t0", 1.0)), float(p.get("tau", 0.5)), density=d
        )
    else:
        raise ConfigError(f"cutoff kind must be 'spatial' or 'space_time', got {kind!r}")
    c1, c2 = certify(build(density), density), certify(build(2 * density), 2 * density)
    drift = {}
    for name, a in _flat(c1.constants).items():
        b = _flat(c2.constants)[name]
        drift[name] = abs(a - b) / max(abs(a), abs(b), 1e-300)
    limit = float(p.get("stability", ctx.profile["cutoff_stability"]))
    summary = {"certificate": c1.to_dict(), "doubled": c2.to_dict(), "constant_drift": drift, "stability_limit": limit}
    passed = c1.valid and c2.valid and all(v < limit for v in drift.values())
    return JobOutput(passed, summary, None, None, c1)


def _flat(d, prefix=""):
    out = {}
    for k, v in d.items():
        if isinstance(v, dict):
            out.update(_flat(v, f"{prefix}{k}."))
        else:
            out[f"{prefix}{k}"] = float(v)
    return out


def _liouville_predicate(ctx, job):
    p = job["params"]
    rep = liouville_predicate(ctx.G(job), p["theorem"], p.get("w_window"), p.get("params"))
    return JobOutput(True, rep.to_dict(), None, None, rep)


def _gamma(ctx, job):
    p = job["params"]
    sol = ctx.solution(job)
    R = float(p.get("R", sol.unpolluted_radius))
    gam = gamma_quantities(ctx.G(job), sol, ctx.space(job), Cylinder.ball(R, float(sol.t[0]), float(sol.t[-1])), float(p.get("alpha", 2.0)))
    return JobOutput(True, gam.to_dict(), None, None, gam)


def _liouville_demo(ctx, job):
    from .fields import Grid

    p = job["params"]
    grid = Grid(float(p.get("dr", 0.05)), float(p.get("R", 2.5)), 1, float(p.get("cfl", 0.4)))
    res = est.liouville_demo(
        ctx.space(job), ctx.G(job), p.get("initial", "1 + exp(-r^2)"), p.get("theorem", "coroLiouville"), grid,
        float(p.get("T", 20.0)), float(p.get("tol", 1e-6)), float(p.get("gradient_ratio", 1e-4)), p.get("params"),
    )
    summary = res.to_dict()
    return JobOutput(res.verdict != "inconsistent", summary, None, None, res)


_EST_KEYS = ("R", "C", "C_max", "k", "variant", "cylinder")
OPS = {
    "kernel_error": Op(_kernel_error, True, allowed=("levels", "ratio_band", "r_verify")),
    "mass_drift": Op(_mass_drift, True, allowed=("tol",)),
    "souplet_zhang": Op(_souplet_zhang, True, allowed=_EST_KEYS + ("D",)),
    "hamilton": Op(_hamilton, True, allowed=_EST_KEYS + ("alpha", "beta")),
    "li_yau": Op(_li_yau, True, allowed=("alpha", "epsilon", "R", "m", "k", "variant", "cylinder")),
    "elliptic_global": Op(_elliptic_global, True, allowed=("alpha", "epsilon", "m", "k", "tol")),
    "elliptic_harnack": Op(
        _elliptic_harnack, True, allowed=("C", "calibrate_from", "D", "R", "t", "pairs", "variant", "k"), depends_keys=("calibrate_from",)
    ),
    "parabolic_harnack": Op(
        _parabolic_harnack, True,
        allowed=("alpha", "epsilon", "R", "m", "k", "variant", "pairs", "random_pairs", "gamma_E_radius"),
    ),
    "calibrate": Op(_calibrate, False, required=("from",), allowed=("max_stability",), depends_keys=("from",)),
    "identity": Op(_identity, False, required=("name",)),
    "cd_condition": Op(_cd_condition, False, allowed=("k", "m", "R", "u", "random")),
    "quadratic_lemma": Op(_quadratic_lemma, False, allowed=("samples", "seed", "tol", "ranges")),
    "cutoff": Op(_cutoff, False, allowed=("kind", "R", "T", "t0", "tau", "density", "stability")),
    "liouville_predicate": Op(_liouville_predicate, False, required=("theorem",), allowed=("w_window", "params")),
    "gamma": Op(_gamma, True, allowed=("alpha", "R")),
    "liouville_demo": Op(
        _liouville_demo, False, allowed=("theorem", "initial", "T", "dr", "R", "cfl", "tol", "gradient_ratio", "params")
    ),
}
# solution-based identities need a solve block
_IDENTITY_NEEDS_SOLVE = set(_SOLUTION_IDENTITIES)


def needs_solution(job) -> bool:
    if job["op"] == "identity":
        return job["params"].get("name") in _IDENTITY_NEEDS_SOLVE
    return OPS[job["op"]].needs_solution
