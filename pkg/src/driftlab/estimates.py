"""Margin reports for the gradient estimates, Harnack inequalities and Liouville demos.

Each check evaluates the left-hand side of an inequality pointwise on a
verification set and assembles the right-hand side from certified curvature
bounds, cutoff constants and the nonlinearity suprema.  The constants of the
Souplet-Zhang and Hamilton bounds are not explicit; for those an empirical
constant (the smallest value making the inequality hold on the data) is
recorded instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from sklearn.base import BaseEstimator

from .cutoff import build_spatial_cutoff
from .errors import (
    BoundViolated,
    ConfigError,
    HypothesisUnverified,
    InsufficientData,
    MissingCalibration,
    MixedKinds,
    NeedFiniteM,
    NoConvergence,
    NotSameRay,
    NotStationary,
    OutOfDomain,
    TimeOrder,
)
from .fields import Cylinder, Grid, SolutionField
from .geometry import ModelSpace, curvature_lower_bound, gamma_delta_phi
from .nonlinearity import (
    GammaQuantities,
    Nonlinearity,
    _check_alpha_beta,
    gamma_quantities,
    hamilton_sup_terms,
    liouville_predicate,
    souplet_zhang_sup_terms,
    zero,
)
from .solver import solve_elliptic

__all__ = [
    "KINDS",
    "EstimateReport",
    "HarnackConstants",
    "souplet_zhang_check",
    "hamilton_check",
    "elliptic_harnack_check",
    "li_yau_check",
    "harnack_constants",
    "path_functional",
    "parabolic_harnack_check",
    "elliptic_global_check",
    "liouville_demo",
    "LiouvilleDemoResult",
    "calibrate_constant",
    "Calibration",
    "SoupletZhangEstimator",
    "HamiltonEstimator",
    "LiYauEstimator",
    "EllipticGlobalEstimator",
]

KINDS = (
    "SoupletZhang",
    "SoupletZhangGlobal",
    "Hamilton",
    "HamiltonGlobal",
    "LiYau",
    "LiYauGlobal",
    "EllipticHarnack",
    "ParabolicHarnack",
    "EllipticGlobal",
)
# kinds whose constant is not given explicitly
FREE_CONSTANT = {"SoupletZhang", "SoupletZhangGlobal", "Hamilton", "HamiltonGlobal", "EllipticHarnack"}


@dataclass
class EstimateReport:
    """Outcome of one inequality check.

    Attributes
    ----------
    kind : str
        One of :data:`KINDS`.
    params : dict
        Parameters used (alpha, beta, epsilon, k, m, D, R, T, t0, C).
    lhs_max : float
        Largest left-hand side over the verification set.
    rhs_terms : dict
        Named non-negative pieces of the right-hand side.
    margin : float
        Smallest ``rhs - lhs`` over the verification set (log scale for the
        Harnack kinds).
    empirical_C : float or None
        Smallest constant for which the inequality holds on the data; only
        for kinds without an explicit constant.
    argmin : dict
        Location ``{r, t}`` of the smallest margin.
    verification_set : dict
    points : dict
        Per-point arrays (``r``, ``t``, ``lhs``, ``rhs``) for tables and plots.
    """

    kind: str
    params: dict
    lhs_max: float
    rhs_terms: dict
    margin: float
    empirical_C: float | None = None
    argmin: dict = field(default_factory=dict)
    verification_set: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    points: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown estimate kind {self.kind!r}")

    @property
    def holds(self) -> bool:
        return self.margin >= 0

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "params": self.params,
            "lhs_max": self.lhs_max,
            "rhs_terms": self.rhs_terms,
            "margin": self.margin,
            "holds": self.holds,
            "argmin": self.argmin,
            "verification_set": self.verification_set,
            "details": self.details,
        }
        if self.empirical_C is not None:
            out["empirical_C"] = self.empirical_C
        return out

    def table(self) -> list:
        """Per-point rows ``(r, t, lhs, rhs)``."""
        p = self.points
        if not p:
            return []
        return [tuple(float(v) for v in row) for row in zip(p["r"], p["t"], p["lhs"], p["rhs"])]


# -- shared helpers ------------------------------------------------------------------------------------------


def _resolve(sol: SolutionField, space, G):
    space = space if space is not None else sol.space
    if G is None:
        G = sol.G if sol.G is not None else zero()
    return space, G


def _window(sol: SolutionField, t0=None, T=None):
    """Time window ``[t0 - T, t0]``, defaulting to the stored range."""
    t0 = float(sol.t[-1]) if t0 is None else float(t0)
    T = float(t0 - sol.t[0]) if T is None else float(T)
    if not T > 0:
        raise ConfigError("time window length T must be positive")
    if t0 - T < sol.t[0] - 1e-9 * max(1.0, abs(t0)) or t0 > sol.t[-1] + 1e-9 * max(1.0, abs(t0)):
        raise OutOfDomain(f"window [{t0 - T:g}, {t0:g}] is not covered by the stored times")
    return t0, T


def _check_radius(sol: SolutionField, R: float, what: str):
    if R > sol.unpolluted_radius * (1 + 1e-12) or R > sol.r[-1] * (1 + 1e-12):
        raise OutOfDomain(f"{what} radius {R:g} leaves the unpolluted region (r <= {min(sol.unpolluted_radius, sol.r[-1]):g})")


def _certified_k(space, flavor, radius, k, m=None):
    bound = curvature_lower_bound(space, flavor, region=(0.0, min(radius, space.R_max)), m=m)
    if k is None:
        return bound.k, bound
    k = float(k)
    if k < 0:
        raise ConfigError("k must be non-negative")
    if k < bound.k - 1e-9 * max(1.0, bound.k):
        raise HypothesisUnverified(f"k={k:g} is below the certified bound {bound.k:.6g} for {flavor} on B_{radius:g}")
    return k, bound


def _grid_points(sol: SolutionField, rmax: float, t_lo: float, t_hi: float, strict_lo: bool = True, after_origin: bool = False):
    tol = 1e-9 * max(1.0, abs(t_hi))
    tmask = (sol.t <= t_hi + tol) & ((sol.t > t_lo + tol) if strict_lo else (sol.t >= t_lo - tol))
    if after_origin and np.isfinite(sol.t_origin):
        tmask &= sol.t > sol.t_origin + tol
    rmask = sol.r <= rmax + 1e-12
    levels = np.flatnonzero(tmask)
    if levels.size == 0 or not rmask.any():
        raise ConfigError("verification set contains no grid nodes")
    return levels, rmask


def _worst(lhs, rhs, r, t):
    margin = rhs - lhs
    i, j = np.unravel_index(int(np.argmin(margin)), margin.shape)
    return float(margin[i, j]), {"r": float(r[j]), "t": float(t[i])}


def _points(r, t, lhs, rhs):
    tt, rr = np.meshgrid(t, r, indexing="ij")
    return {"r": rr.ravel(), "t": tt.ravel(), "lhs": np.asarray(lhs).ravel(), "rhs": np.asarray(rhs).ravel()}


def _bracket_terms(space, sol, k, R, t, t_lo, variant, extra):
    """Shared bracket of the Souplet-Zhang and Hamilton bounds (per time level)."""
    terms = {"sqrt_k": math.sqrt(k)}
    terms.update(extra)
    if variant == "local":
        terms["inv_R"] = 1.0 / R
        terms["gamma_delta_phi"] = math.sqrt(max(gamma_delta_phi(space), 0.0) / R)
    const = sum(terms.values())
    time_term = 1.0 / np.sqrt(t - t_lo)
    return const, time_term, terms


def _variant(variant: str) -> str:
    v = str(variant).lower()
    if v not in ("local", "global"):
        raise ConfigError(f"variant must be 'local' or 'global', got {variant!r}")
    return v


# -- Souplet-Zhang ------------------------------------------------------------------------------------------------


def souplet_zhang_check(
    sol: SolutionField,
    space: ModelSpace | None = None,
    G: Nonlinearity | None = None,
    D="auto",
    R: float = 4.0,
    cylinder: Cylinder | None = None,
    C: float | None = None,
    k: float | None = None,
    variant: str = "local",
) -> EstimateReport:
    """Check ``|grad w|/w <= C (1 - log(w/D)) [sqrt k + 1/sqrt(t - t0 + T) + ...]``.

    Parameters
    ----------
    sol : SolutionField
    D : float or "auto"
        Upper bound of ``w`` on ``Q_{R,T}``; ``"auto"`` uses ``(1 + 1e-9) sup w``.
    R : float
        Cylinder radius; the local bound is verified on ``Q_{R/2,T}``.
    cylinder : Cylinder, optional
        Time window ``[t_lo, t_hi] = [t0 - T, t0]``; defaults to the stored range.
    C : float, optional
        Fixed constant.  Without it the check is structural: the margin uses
        ``C = 1`` and ``empirical_C`` is the smallest admissible constant.
    k : float, optional
        Curvature constant; defaults to the certified ``Ric_phi`` bound on ``B_R``.
    variant : {"local", "global"}
        The global variant drops the ``1/R`` and ``gamma_{Delta phi}`` terms and
        takes the suprema over the whole unpolluted domain.

    Raises
    ------
    BoundViolated, HypothesisUnverified, OutOfDomain
    """
    variant = _variant(variant)
    space, G = _resolve(sol, space, G)
    t_lo, t_hi = (cylinder.t_lo, cylinder.t_hi) if cylinder is not None else (float(sol.t[0]), float(sol.t[-1]))
    t0, T = _window(sol, t_hi, t_hi - t_lo)
    sup_radius = R if variant == "local" else min(sol.unpolluted_radius, sol.r[-1])
    _check_radius(sol, sup_radius, "cylinder")
    k, bound = _certified_k(space, "Ric_phi", sup_radius, k)
    big = Cylinder.ball(sup_radius, t0 - T, t0)
    levels_all, rmask_all = big.select(sol, include_origin=True)
    wmax = float(sol.w[np.ix_(levels_all, np.flatnonzero(rmask_all))].max())
    if D == "auto":
        D = (1 + 1e-9) * wmax
    D = float(D)
    if wmax > D:
        raise BoundViolated(f"sup w = {wmax:.6g} exceeds D = {D:.6g} on Q_{{{sup_radius:g},T}}")
    term_x, term_w = souplet_zhang_sup_terms(G, sol, big, D)
    verify_radius = R / 2 if variant == "local" else sup_radius
    levels, rmask = _grid_points(sol, verify_radius, t0 - T, t0)
    r, t = sol.r[rmask], sol.t[levels]
    w = sol.w[np.ix_(levels, np.flatnonzero(rmask))]
    grad = sol.grad[np.ix_(levels, np.flatnonzero(rmask))]
    lhs = np.abs(grad) / w
    const, time_term, terms = _bracket_terms(space, sol, k, R, t, t0 - T, variant, {"term_x": term_x, "term_w": term_w})
    factor = 1.0 - np.log(w / D)
    unit = factor * (const + time_term[:, None])
    C_used = 1.0 if C is None else float(C)
    rhs = C_used * unit
    margin, where = _worst(lhs, rhs, r, t)
    terms["inv_sqrt_time_max"] = float(time_term.max())
    emp = float(np.max(lhs / unit))
    kind = "SoupletZhang" if variant == "local" else "SoupletZhangGlobal"
    return EstimateReport(
        kind=kind,
        params={"k": k, "D": D, "R": R, "T": T, "t0": t0, "C": C, "C_used": C_used},
        lhs_max=float(lhs.max()),
        rhs_terms=terms,
        margin=margin,
        empirical_C=emp,
        argmin=where,
        verification_set={"r": [0.0, verify_radius], "t": [t0 - T, t0], "sup_radius": sup_radius, "nodes": int(lhs.size)},
        details={"curvature_resolution": bound.resolution, "mode": "structural" if C is None else "fixed-C"},
        points=_points(r, t, lhs, rhs),
    )


# -- Hamilton --------------------------------------------------------------------------------------------------------


def hamilton_check(
    sol: SolutionField,
    space: ModelSpace | None = None,
    G: Nonlinearity | None = None,
    alpha: float = 4.0,
    beta: float = 0.0,
    R: float = 4.0,
    cylinder: Cylinder | None = None,
    C: float | None = None,
    k: float | None = None,
    variant: str = "local",
) -> EstimateReport:
    """Check ``|grad w| / w^{1-(beta+2)/(2 alpha)} <= C (sup w)^{(beta+2)/(2 alpha)} [...]``.

    Raises
    ------
    ParameterOrder
        Unless ``alpha > 1 + beta`` and ``beta >= 0``.
    HypothesisUnverified, OutOfDomain
    """
    _check_alpha_beta(alpha, beta)
    variant = _variant(variant)
    space, G = _resolve(sol, space, G)
    t_lo, t_hi = (cylinder.t_lo, cylinder.t_hi) if cylinder is not None else (float(sol.t[0]), float(sol.t[-1]))
    t0, T = _window(sol, t_hi, t_hi - t_lo)
    sup_radius = R if variant == "local" else min(sol.unpolluted_radius, sol.r[-1])
    _check_radius(sol, sup_radius, "cylinder")
    k, bound = _certified_k(space, "Ric_phi", sup_radius, k)
    big = Cylinder.ball(sup_radius, t0 - T, t0)
    levels_all, rmask_all = big.select(sol, include_origin=True)
    wmax = float(sol.w[np.ix_(levels_all, np.flatnonzero(rmask_all))].max())
    term_x, term_w = hamilton_sup_terms(G, sol, big, alpha, beta)
    verify_radius = R / 2 if variant == "local" else sup_radius
    levels, rmask = _grid_points(sol, verify_radius, t0 - T, t0)
    r, t = sol.r[rmask], sol.t[levels]
    w = sol.w[np.ix_(levels, np.flatnonzero(rmask))]
    grad = sol.grad[np.ix_(levels, np.flatnonzero(rmask))]
    p = (beta + 2) / (2 * alpha)
    lhs = np.abs(grad) / w ** (1 - p)
    const, time_term, terms = _bracket_terms(space, sol, k, R, t, t0 - T, variant, {"term_x": term_x, "term_w": term_w})
    unit = wmax**p * (const + time_term[:, None]) * np.ones_like(w)
    C_used = 1.0 if C is None else float(C)
    rhs = C_used * unit
    margin, where = _worst(lhs, rhs, r, t)
    terms["sup_w_power"] = wmax**p
    terms["inv_sqrt_time_max"] = float(time_term.max())
    kind = "Hamilton" if variant == "local" else "HamiltonGlobal"
    return EstimateReport(
        kind=kind,
        params={"alpha": alpha, "beta": beta, "k": k, "R": R, "T": T, "t0": t0, "C": C, "C_used": C_used},
        lhs_max=float(lhs.max()),
        rhs_terms=terms,
        margin=margin,
        empirical_C=float(np.max(lhs / unit)),
        argmin=where,
        verification_set={"r": [0.0, verify_radius], "t": [t0 - T, t0], "sup_radius": sup_radius, "nodes": int(lhs.size)},
        details={"curvature_resolution": bound.resolution, "mode": "structural" if C is None else "fixed-C"},
        points=_points(r, t, lhs, rhs),
    )


# -- elliptic Harnack ------------------------------------------------------------------------------------------


def _radial_pairs(pairs):
    out = []
    for pair in pairs:
        a, b = pair
        if isinstance(a, (tuple, list)) or isinstance(b, (tuple, list)):
            (r1, th1), (r2, th2) = a, b
            if r1 > 0 and r2 > 0 and abs(th1 - th2) > 1e-12:
                raise NotSameRay(f"points ({r1}, {th1}) and ({r2}, {th2}) are not on a common ray")
            out.append((float(r1), float(r2)))
        else:
            out.append((float(a), float(b)))
    return out


def elliptic_harnack_check(
    sol: SolutionField,
    space: ModelSpace | None = None,
    G: Nonlinearity | None = None,
    D="auto",
    R: float = 4.0,
    t: float | None = None,
    pairs=((0.0, 1.0),),
    calibration=None,
    variant: str = "local",
    k: float | None = None,
) -> EstimateReport:
    """Check ``w(x1,t)/(eD) <= [w(x2,t)/(eD)]^{a(R)}`` with ``a(R) = exp(-d C bracket)``.

    Parameters
    ----------
    pairs : sequence
        Radius pairs ``(r1, r2)`` on a common ray, or ``((r1, theta1), (r2, theta2))``.
    calibration : float, EstimateReport or Calibration
        Source of the constant ``C``: a number, a Souplet-Zhang report (its
        empirical constant) or a :class:`Calibration`.

    Returns
    -------
    EstimateReport
        ``margin`` is ``a log(w2/eD) - log(w1/eD)``, minimised over pairs.

    Raises
    ------
    NotSameRay, MissingCalibration, BoundViolated
    """
    if calibration is None:
        raise MissingCalibration("the Harnack exponent needs C from a Souplet-Zhang calibration run")
    if isinstance(calibration, EstimateReport):
        if calibration.empirical_C is None or not calibration.kind.startswith("SoupletZhang"):
            raise MissingCalibration("calibration report must be a Souplet-Zhang report with empirical_C")
        C = calibration.empirical_C
    elif isinstance(calibration, Calibration):
        C = calibration.C_min
    else:
        C = float(calibration)
    radial = _radial_pairs(pairs)
    t = float(sol.t[-1]) if t is None else float(t)
    sz = souplet_zhang_check(sol, space, G, D, R, None, C, k, variant)
    D = sz.params["D"]
    t_lo = sz.params["t0"] - sz.params["T"]
    if not t > t_lo:
        raise ConfigError("the Harnack time must lie strictly inside the window")
    terms = {k_: v for k_, v in sz.rhs_terms.items() if k_ not in ("inv_sqrt_time_max",)}
    bracket = sum(terms.values()) + 1.0 / math.sqrt(t - t_lo)
    rows = []
    limit = R / 2 if variant == "local" else R
    for r1, r2 in radial:
        if max(r1, r2) > limit + 1e-12:
            raise OutOfDomain(f"pair ({r1}, {r2}) leaves B_{limit:g}")
        d = abs(r1 - r2)
        a = math.exp(-d * C * bracket)
        l1 = math.log(sol.value_at(r1, t) / (math.e * D))
        l2 = math.log(sol.value_at(r2, t) / (math.e * D))
        rows.append((r1, r2, d, a, l1, a * l2, a * l2 - l1))
    arr = np.array(rows)
    j = int(np.argmin(arr[:, 6]))
    return EstimateReport(
        kind="EllipticHarnack",
        params={"C": C, "D": D, "R": R, "t": t, "k": sz.params["k"]},
        lhs_max=float(arr[:, 4].max()),
        rhs_terms={**terms, "inv_sqrt_time": 1.0 / math.sqrt(t - t_lo)},
        margin=float(arr[j, 6]),
        empirical_C=C,
        argmin={"r1": float(arr[j, 0]), "r2": float(arr[j, 1]), "t": t},
        verification_set={"pairs": [[float(a), float(b)] for a, b in radial], "t": t},
        details={"exponents": arr[:, 3].tolist(), "mode": "calibrated"},
    )


# -- Li-Yau ---------------------------------------------------------------------------------------------------------------


def _finite_m(space: ModelSpace, m):
    m = space.m if m is None else float(m)
    if math.isinf(m):
        raise NeedFiniteM("the Li-Yau family needs a finite synthetic dimension m")
    if m < space.n:
        raise HypothesisUnverified(f"m={m:g} is below n={space.n}")
    return m


def _liyau_pieces(m, alpha, epsilon, k, gam: GammaQuantities, R=None, c1=None, c2=None):
    """Named pieces of the Li-Yau right-hand side except the ``1/t`` term."""
    half = m * alpha / 2
    pieces = {}
    if R is not None:
        inner = m * c1**2 * alpha**2 / (4 * (alpha - 1)) + c2 + (m - 1) * c1 * (1 + R * math.sqrt(k)) + 2 * c1**2
        pieces["cutoff"] = half * inner / R**2
    pieces["gamma_C"] = half * gam.gamma_C
    a_part = m * alpha * ((m - 1) * k + gam.gamma_A / 2) ** 2 / (2 * (1 - epsilon) * (alpha - 1) ** 2)
    b_part = (27 * m * gam.gamma_B**4 / (32 * epsilon * alpha * (alpha - 1) ** 2)) ** (1 / 3)
    pieces["sqrt_term"] = math.sqrt(half) * math.sqrt(a_part + b_part + gam.gamma_D)
    pieces["_a"], pieces["_b"] = a_part, b_part
    return pieces


def _check_alpha_eps(alpha, epsilon):
    if not alpha > 1:
        raise ConfigError("alpha must exceed 1")
    if not 0 < epsilon < 1:
        raise ConfigError("epsilon must lie in (0, 1)")


def _liyau_setup(sol, space, G, alpha, epsilon, R, m, k, variant, t_hi=None):
    _check_alpha_eps(alpha, epsilon)
    m = _finite_m(space, m)
    if variant == "local":
        region_radius = 2 * R
    else:
        region_radius = min(sol.unpolluted_radius, sol.r[-1])
    _check_radius(sol, region_radius, "gamma region")
    k, bound = _certified_k(space, "Ric_phi^m", region_radius, k, m)
    t_hi = float(sol.t[-1]) if t_hi is None else float(t_hi)
    t_lo = float(sol.t[0]) if not np.isfinite(sol.t_origin) else min(float(sol.t[0]), sol.t_origin)
    gam = gamma_quantities(G, sol, space, Cylinder.ball(region_radius, t_lo, t_hi), alpha)
    if variant == "local":
        cut = build_spatial_cutoff(1.0)
        c1, c2 = cut.c1, cut.c2
        pieces = _liyau_pieces(m, alpha, epsilon, k, gam, R, c1, c2)
    else:
        c1 = c2 = None
        pieces = _liyau_pieces(m, alpha, epsilon, k, gam)
    return m, k, gam, pieces, c1, c2, region_radius


def li_yau_check(
    sol: SolutionField,
    space: ModelSpace | None = None,
    G: Nonlinearity | None = None,
    alpha: float = 2.0,
    epsilon: float = 0.5,
    R: float = 2.0,
    cylinder: Cylinder | None = None,
    m=None,
    k: float | None = None,
    variant: str = "local",
) -> EstimateReport:
    """Check ``|grad w|^2/(alpha w^2) - w_t/w + G/w <= RHS`` on ``H_{R,T}``.

    The local right-hand side uses the certified cutoff constants ``c1, c2``
    and gamma quantities over ``H_{2R,T}``; the global one drops the cutoff
    term.  Time ``t`` is measured from the solution's ``t_origin`` and
    ``t = 0`` is excluded.  No free constant is involved.

    Raises
    ------
    NeedFiniteM, HypothesisUnverified, OutOfDomain
    """
    variant = _variant(variant)
    space, G = _resolve(sol, space, G)
    if sol.dwdt is None:
        raise ConfigError("the Li-Yau check needs the stored time derivative")
    t_hi = cylinder.t_hi if cylinder is not None else float(sol.t[-1])
    t_lo = cylinder.t_lo if cylinder is not None else float(sol.t[0])
    m, k, gam, pieces, c1, c2, region_radius = _liyau_setup(sol, space, G, alpha, epsilon, R, m, k, variant, t_hi)
    levels, rmask = _grid_points(sol, R, t_lo, t_hi, strict_lo=False, after_origin=True)
    cols = np.flatnonzero(rmask)
    r, t = sol.r[rmask], sol.t[levels]
    w = sol.w[np.ix_(levels, cols)]
    grad = sol.grad[np.ix_(levels, cols)]
    wt = sol.dwdt[np.ix_(levels, cols)]
    g = G(t[:, None], r[None, :], w)
    lhs = grad**2 / (alpha * w**2) - wt / w + g / w
    tau = t - sol.t_origin
    const = sum(v for key, v in pieces.items() if not key.startswith("_"))
    time_term = m * alpha / (2 * tau)
    rhs = (const + time_term)[:, None] * np.ones_like(lhs)
    margin, where = _worst(lhs, rhs, r, t)
    terms = {key: v for key, v in pieces.items() if not key.startswith("_")}
    terms["inv_t_max"] = float(time_term.max())
    pole = {"margin": float((rhs - lhs)[np.argmin(np.abs(t - where["t"])), 0]), "t": where["t"]} if rmask[0] else {}
    return EstimateReport(
        kind="LiYau" if variant == "local" else "LiYauGlobal",
        params={"alpha": alpha, "epsilon": epsilon, "k": k, "m": m, "R": R, "T": float(t_hi - sol.t_origin), "c1": c1, "c2": c2},
        lhs_max=float(lhs.max()),
        rhs_terms=terms,
        margin=margin,
        empirical_C=None,
        argmin=where,
        verification_set={"r": [0.0, R], "t": [float(t[0]), float(t[-1])], "gamma_radius": region_radius, "nodes": int(lhs.size)},
        details={"gammas": gam.to_dict(), "pole": pole},
        points=_points(r, t, lhs, rhs),
    )


# -- parabolic Harnack ---------------------------------------------------------------------------------------------


@dataclass
class HarnackConstants:
    """Constants entering the parabolic Harnack inequality.

    ``H`` combines ``gamma_E`` with the Li-Yau right-hand side (without the
    ``1/t`` term); ``L`` is the path functional for the requested pair.
    """

    H: float
    L: float
    alpha: float
    gammas: GammaQuantities
    c1: float | None
    c2: float | None
    gamma_E_radius: str = "R"

    def to_dict(self) -> dict:
        return {
            "H": self.H,
            "L": self.L,
            "alpha": self.alpha,
            "gammas": self.gammas.to_dict(),
            "c1": self.c1,
            "c2": self.c2,
            "gamma_E_radius": self.gamma_E_radius,
        }


def path_functional(space: ModelSpace, r1: float, r2: float, dt: float, R: float, angle: float = 0.0, nodes: int = 24):
    """``L = inf (1/(4 dt)) int_0^1 |zeta'|^2`` over paths in ``B_R``.

    Paths live in the totally geodesic plane through the pole, with metric
    ``dr^2 + psi(r)^2 dtheta^2``.  Returns ``(L, L_straight, L_opt)``: the
    radial straight path is exact for points on a common ray; the optimised
    piecewise-linear path is computed as an independent check and the smaller
    value is returned.
    """
    if not dt > 0:
        raise TimeOrder("the path functional needs t2 > t1")
    if max(r1, r2) > R + 1e-12:
        raise OutOfDomain("endpoints must lie in B_R")
    straight = None
    if abs(angle) < 1e-15:
        straight = (r1 - r2) ** 2 / (4 * dt)

    def energy(z):
        rr = np.concatenate([[r1], z[: nodes - 1], [r2]])
        th = np.concatenate([[0.0], z[nodes - 1:], [angle]])
        rm = 0.5 * (rr[1:] + rr[:-1])
        seg = np.diff(rr) ** 2 + space.psi(np.abs(rm)) ** 2 * np.diff(th) ** 2
        return nodes * float(seg.sum()) / (4 * dt)

    s = np.linspace(0.0, 1.0, nodes + 1)[1:-1]
    # start from a bent path so the optimiser has something to undo
    r0 = (1 - s) * r1 + s * r2 + 0.1 * np.sin(np.pi * s) * min(1.0, R)
    r0 = np.clip(r0, 0.0, R)
    th0 = s * angle
    z0 = np.concatenate([r0, th0])
    bounds = [(0.0, R)] * (nodes - 1) + [(None, None)] * (nodes - 1)
    res = minimize(energy, z0, method="L-BFGS-B", bounds=bounds, options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 5000})
    opt = float(res.fun)
    best = opt if straight is None else min(straight, opt)
    return best, straight, opt


def harnack_constants(
    sol: SolutionField,
    space: ModelSpace | None = None,
    G: Nonlinearity | None = None,
    alpha: float = 2.0,
    epsilon: float = 0.5,
    R: float = 2.0,
    m=None,
    k: float | None = None,
    variant: str = "local",
    gamma_E_radius: str = "R",
) -> HarnackConstants:
    """The constant ``H`` of the parabolic Harnack inequality (``L`` left at 0).

    ``gamma_E_radius`` selects ``gamma_E(R)`` (default) or the smaller-region
    alternative ``gamma_E(2R)``.
    """
    variant = _variant(variant)
    space, G = _resolve(sol, space, G)
    m, k, gam, pieces, c1, c2, region_radius = _liyau_setup(sol, space, G, alpha, epsilon, R, m, k, variant)
    if gamma_E_radius not in ("R", "2R"):
        raise ConfigError("gamma_E_radius must be 'R' or '2R'")
    if variant == "local":
        e_radius = R if gamma_E_radius == "R" else 2 * R
        t_lo = min(float(sol.t[0]), sol.t_origin) if np.isfinite(sol.t_origin) else float(sol.t[0])
        gamma_E = gamma_quantities(G, sol, space, Cylinder.ball(e_radius, t_lo, float(sol.t[-1])), alpha).gamma_E
    else:
        gamma_E = gam.gamma_E
    H = gamma_E - sum(v for key, v in pieces.items() if not key.startswith("_"))
    gam = GammaQuantities(gam.gamma_A, gam.gamma_B, gam.gamma_C, gam.gamma_D, gamma_E, gam.alpha, gam.region)
    return HarnackConstants(H=H, L=0.0, alpha=alpha, gammas=gam, c1=c1, c2=c2, gamma_E_radius=gamma_E_radius)


def parabolic_harnack_check(
    sol: SolutionField,
    space: ModelSpace | None = None,
    G: Nonlinearity | None = None,
    alpha: float = 2.0,
    pairs=(((0.0, 1.0), (0.0, 2.0)),),
    epsilon: float = 0.5,
    R: float = 2.0,
    m=None,
    k: float | None = None,
    variant: str = "local",
    gamma_E_radius: str = "R",
) -> EstimateReport:
    """Check ``w(x2,t2) >= w(x1,t1) exp[(t2-t1) H - alpha L] (t2/t1)^{-m alpha/2}``.

    Parameters
    ----------
    pairs : sequence of ``((r1, t1), (r2, t2))``
        Points on a common ray with stored times ``t2 > t1 > t_origin``; times
        are absolute and ``t`` in the power law is measured from ``t_origin``.

    Returns
    -------
    EstimateReport
        ``margin`` is the smallest ``log w2 - log(RHS)``;
        ``details["ratio_margin"]`` holds ``w2/w1 - RHS/w1`` at that pair.

    Raises
    ------
    TimeOrder
    """
    space, G = _resolve(sol, space, G)
    pairs = [((float(a[0]), float(a[1])), (float(b[0]), float(b[1]))) for a, b in pairs]
    for (r1, t1), (r2, t2) in pairs:
        if not t2 > t1:
            raise TimeOrder(f"need t2 > t1, got t1={t1}, t2={t2}")
        if not t1 > sol.t_origin:
            raise TimeOrder("t1 must be later than the start of the solution")
    const = harnack_constants(sol, space, G, alpha, epsilon, R, m, k, variant, gamma_E_radius)
    m = _finite_m(space, m)
    limit = R if variant == "local" else min(sol.unpolluted_radius, sol.r[-1])
    rows = []
    for (r1, t1), (r2, t2) in pairs:
        L, straight, opt = path_functional(space, r1, r2, t2 - t1, limit)
        if straight is not None and opt < straight - 1e-8:
            raise AssertionError("discrete path undercut the radial geodesic")
        tau1, tau2 = t1 - sol.t_origin, t2 - sol.t_origin
        w1, w2 = sol.value_at(r1, t1), sol.value_at(r2, t2)
        log_rhs = math.log(w1) + (t2 - t1) * const.H - alpha * L - (m * alpha / 2) * math.log(tau2 / tau1)
        rows.append((r1, t1, r2, t2, L, math.log(w2), log_rhs, w2 / w1 - math.exp(log_rhs) / w1))
    arr = np.array(rows)
    margins = arr[:, 5] - arr[:, 6]
    j = int(np.argmin(margins))
    (r1, t1), (r2, t2) = pairs[j]
    return EstimateReport(
        kind="ParabolicHarnack",
        params={"alpha": alpha, "epsilon": epsilon, "m": m, "R": R, "variant": variant},
        lhs_max=float(arr[:, 6].max()),
        rhs_terms={
            "power_penalty": float((m * alpha / 2) * math.log((t2 - sol.t_origin) / (t1 - sol.t_origin))),
            "path_penalty": float(alpha * arr[j, 4]),
            "H": const.H,
        },
        margin=float(margins[j]),
        empirical_C=None,
        argmin={"r1": r1, "t1": t1, "r2": r2, "t2": t2},
        verification_set={"pairs": [[list(a), list(b)] for a, b in pairs]},
        details={
            "ratio_margin": float(arr[j, 7]),
            "constants": const.to_dict(),
            "pairs_checked": len(pairs),
            "pair_margins": margins.tolist(),
            "path_functional": arr[:, 4].tolist(),
        },
    )


# -- elliptic global ---------------------------------------------------------------------------------------------


def elliptic_global_check(
    sol: SolutionField,
    space: ModelSpace | None = None,
    G: Nonlinearity | None = None,
    alpha: float = 2.0,
    epsilon: float = 0.5,
    m=None,
    k: float | None = None,
    tol: float = 1e-6,
) -> EstimateReport:
    """Check ``|grad w|^2/(alpha w^2) + G(w)/w <= (m alpha/2)[((m-1)k + gamma_A/2)/((alpha-1) sqrt(1-eps)) + gamma_C]``.

    Raises
    ------
    NotStationary
        ``max |L w + G(w)|`` at the last level is at least ``tol``.
    NeedFiniteM
    """
    space, G = _resolve(sol, space, G)
    _check_alpha_eps(alpha, epsilon)
    m = _finite_m(space, m)
    i = sol.t.size - 1
    w = sol.w[i]
    t = float(sol.t[i])
    res = float(np.max(np.abs(sol.lap[i] + G(t, sol.r, w))))
    if res >= tol:
        raise NotStationary(f"stationarity residual {res:.3g} >= {tol:g}")
    radius = min(sol.unpolluted_radius, sol.r[-1])
    k, bound = _certified_k(space, "Ric_phi^m", radius, k, m)
    single = SolutionField.stationary(sol.r, w, space, G) if sol.t.size > 1 else sol
    gam = gamma_quantities(G, single, space, Cylinder.ball(radius, float(single.t[0]), float(single.t[0])), alpha)
    lhs = sol.grad[i] ** 2 / (alpha * w**2) + G(t, sol.r, w) / w
    a_piece = (m * alpha / 2) * ((m - 1) * k + gam.gamma_A / 2) / ((alpha - 1) * math.sqrt(1 - epsilon))
    c_piece = (m * alpha / 2) * gam.gamma_C
    rhs = a_piece + c_piece
    keep = sol.r <= radius + 1e-12
    margin_arr = rhs - lhs[keep]
    j = int(np.argmin(margin_arr))
    return EstimateReport(
        kind="EllipticGlobal",
        params={"alpha": alpha, "epsilon": epsilon, "m": m, "k": k},
        lhs_max=float(lhs[keep].max()),
        rhs_terms={"curvature_gamma_A": a_piece, "gamma_C": c_piece},
        margin=float(margin_arr[j]),
        empirical_C=None,
        argmin={"r": float(sol.r[keep][j]), "t": t},
        verification_set={"r": [0.0, radius]},
        details={"stationarity_residual": res, "gammas": gam.to_dict()},
        points={"r": sol.r[keep], "t": np.full(int(keep.sum()), t), "lhs": lhs[keep], "rhs": np.full(int(keep.sum()), rhs)},
    )


# -- Liouville demo --------------------------------------------------------------------------------------------------


@dataclass
class LiouvilleDemoResult:
    verdict: str
    final_grad_sup: float | None
    final_sup: float | None
    predicate: dict | None
    curvature_k: float
    relaxation_time: float | None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "final_grad_sup": self.final_grad_sup,
            "final_sup": self.final_sup,
            "predicate": self.predicate,
            "curvature_k": self.curvature_k,
            "relaxation_time": self.relaxation_time,
            "diagnostics": self.diagnostics,
        }


def liouville_demo(
    space: ModelSpace,
    G: Nonlinearity | None = None,
    initial="1 + exp(-r^2)",
    theorem: str = "coroLiouville",
    grid: Grid | None = None,
    T: float = 20.0,
    tol: float = 1e-6,
    gradient_ratio: float = 1e-4,
    params: dict | None = None,
) -> LiouvilleDemoResult:
    """Numerical witness of a Liouville theorem by relaxing non-constant data.

    Verdicts
    --------
    ``"consistent"``
        The flow settles and ``sup |grad w| < gradient_ratio * sup w``.
    ``"consistent-nonexistence"``
        No stationary limit and the minimum of ``w`` grows steadily: no
        positive bounded solution, as the theorem predicts.
    ``"inconsistent"``
        Anything else (diagnostics attached).
    ``"not-applicable"``
        The predicate fails or ``k = 0`` is not certified.
    """
    G = zero() if G is None else G
    grid = grid or Grid(0.05, 2.5, nt=1, cfl=0.4)
    flavor = "Ric_phi" if math.isinf(space.m) else "Ric_phi^m"
    bound = curvature_lower_bound(space, flavor, region=(0.0, min(space.R_max, 2 * grid.R_max)))
    report = liouville_predicate(G, theorem, params={"alpha": 2.0, **(params or {})})
    pred = report.to_dict()
    if not report.holds:
        return LiouvilleDemoResult("not-applicable", None, None, pred, bound.k, None, {"reason": "predicate fails"})
    if bound.k > 0:
        return LiouvilleDemoResult("not-applicable", None, None, pred, bound.k, None, {"reason": "k = 0 is not certified"})
    try:
        sol = solve_elliptic(space, G, initial, grid, tol=tol, max_time=T)
    except NoConvergence as exc:
        history = getattr(exc, "history", [])
        mins = np.array([h[2] for h in history])
        growing = mins.size >= 3 and bool(np.all(np.diff(mins) > 0))
        diag = {"error": str(exc), "min_w_history": mins.tolist()}
        if growing or "blew up" in str(exc):
            return LiouvilleDemoResult("consistent-nonexistence", None, None, pred, bound.k, None, diag)
        return LiouvilleDemoResult("inconsistent", None, None, pred, bound.k, None, diag)
    w = sol.w[0]
    gsup = float(np.max(np.abs(sol.grad[0])))
    wsup = float(w.max())
    verdict = "consistent" if gsup < gradient_ratio * wsup else "inconsistent"
    return LiouvilleDemoResult(
        verdict, gsup, wsup, pred, bound.k, sol.metadata["relaxation_time"], {"residual": sol.metadata["residual"]}
    )


# -- calibration -------------------------------------------------------------------------------------------------------


@dataclass
class Calibration:
    kind: str
    C_min: float
    stability: float
    values: list

    def to_dict(self) -> dict:
        return {"kind": self.kind, "C_min": self.C_min, "stability": self.stability, "values": self.values}


def calibrate_constant(reports) -> Calibration:
    """Combine empirical constants of one kind.

    ``C_min`` is the largest empirical constant; ``stability`` the largest
    pairwise relative deviation ``|a - b| / max(a, b)``.

    Raises
    ------
    InsufficientData
        Fewer than two reports.
    MixedKinds
        Reports of different kinds or without an empirical constant.
    """
    reports = list(reports)
    if len(reports) < 2:
        raise InsufficientData("calibration needs at least two reports")
    kinds = {r.kind for r in reports}
    if len(kinds) != 1:
        raise MixedKinds(f"reports of different kinds: {sorted(kinds)}")
    kind = kinds.pop()
    if kind not in FREE_CONSTANT:
        raise MixedKinds(f"{kind} has an explicit constant; nothing to calibrate")
    vals = [float(r.empirical_C) for r in reports]
    stab = 0.0
    for i in range(len(vals)):
        for j in range(i + 1, len(vals)):
            top = max(vals[i], vals[j])
            if top > 0:
                stab = max(stab, abs(vals[i] - vals[j]) / top)
    return Calibration(kind, max(vals), stab, vals)


# -- estimator wrappers --------------------------------------------------------------------------------------------


class _EstimateMixin:
    """``fit(sol)`` runs the check and stores ``report_``, ``margin_`` and ``empirical_C_``."""

    def _store(self, report: EstimateReport):
        self.report_ = report
        self.margin_ = report.margin
        self.empirical_C_ = report.empirical_C
        return self

    def score(self, sol, space=None, G=None) -> float:
        """Margin of the check on ``sol`` (larger is better)."""
        return self.fit(sol, space, G).margin_


class SoupletZhangEstimator(_EstimateMixin, BaseEstimator):
    def __init__(self, D="auto", R=4.0, C=None, k=None, variant="local"):
        self.D = D
        self.R = R
        self.C = C
        self.k = k
        self.variant = variant

    def fit(self, sol, space=None, G=None):
        return self._store(souplet_zhang_check(sol, space, G, self.D, self.R, None, self.C, self.k, self.variant))


class HamiltonEstimator(_EstimateMixin, BaseEstimator):
    def __init__(self, alpha=4.0, beta=0.0, R=4.0, C=None, k=None, variant="local"):
        self.alpha = alpha
        self.beta = beta
        self.R = R
        self.C = C
        self.k = k
        self.variant = variant

    def fit(self, sol, space=None, G=None):
        return self._store(hamilton_check(sol, space, G, self.alpha, self.beta, self.R, None, self.C, self.k, self.variant))


class LiYauEstimator(_EstimateMixin, BaseEstimator):
    def __init__(self, alpha=2.0, epsilon=0.5, R=2.0, m=None, k=None, variant="local"):
        self.alpha = alpha
        self.epsilon = epsilon
        self.R = R
        self.m = m
        self.k = k
        self.variant = variant

    def fit(self, sol, space=None, G=None):
        return self._store(li_yau_check(sol, space, G, self.alpha, self.epsilon, self.R, None, self.m, self.k, self.variant))


class EllipticGlobalEstimator(_EstimateMixin, BaseEstimator):
    def __init__(self, alpha=2.0, epsilon=0.5, m=None, k=None, tol=1e-6):
        self.alpha = alpha
        self.epsilon = epsilon
        self.m = m
        self.k = k
        self.tol = tol

    def fit(self, sol, space=None, G=None):
        return self._store(elliptic_global_check(sol, space, G, self.alpha, self.epsilon, self.m, self.k, self.tol))
