"""Residual checks of the pointwise identities used in the gradient-estimate proofs.

Every check evaluates both sides of an identity on radial data and reports
the largest residual per grid level together with an observed convergence
order.  Time derivatives are eliminated through the equation itself
(``w_t = Delta_phi w + G``) so an identity is exact for any smooth spatial
profile and the residual measures stencil error only.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from ._validation import parse_extended
from .errors import ConfigError, GridTooCoarse, HypothesisUnverified, NeedFiniteM
from .fields import SolutionField
from .geometry import ModelSpace, _curvature_arrays, curvature_lower_bound, radial_derivatives
from .nonlinearity import Nonlinearity, zero

__all__ = [
    "ResidualReport",
    "DEFAULT_LEVELS",
    "observed_order",
    "bochner_residual",
    "cd_condition_check",
    "h_evolution_residual",
    "H_evolution_residual",
    "F_beta_evolution_residual",
    "liyau_F_evolution_residual",
    "delta_phi_G_identity_residual",
    "exp_laplacian_identity",
    "product_rule_residual",
    "quadratic_lemma_check",
    "QuadraticLemmaResult",
]

DEFAULT_LEVELS = (0.04, 0.02, 0.01)
ORDER_RANGE = (1.5, 4.5)
NOISE_FLOOR = 1e-12
ROUNDOFF = 1e-13  # relative round-off of a second difference, before the 1/dr^2 amplification


@dataclass
class ResidualReport:
    """Largest residual of an identity at each grid level.

    Attributes
    ----------
    identity : str
    dr : list of float
    max_abs_residual : list of float
    order : float or None
        Least-squares slope of ``log residual`` against ``log dr``; ``None``
        with fewer than two levels or when every residual is at round-off.
    path : str
        ``"analytic"`` (exact symbolic derivatives) or ``"discrete"``.
    terms : dict
        Largest magnitude of each named term at the finest level.
    """

    identity: str
    dr: list
    max_abs_residual: list
    order: float | None
    path: str = "discrete"
    terms: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    noise_floor: list = field(default_factory=list)

    @property
    def exact(self) -> bool:
        """Every level is at round-off (the stencils are exact on this data)."""
        floors = self.noise_floor or [NOISE_FLOOR] * len(self.max_abs_residual)
        return all(v <= f for v, f in zip(self.max_abs_residual, floors))

    @property
    def flagged(self) -> bool:
        """True when the observed order falls outside the expected band."""
        if self.exact or self.order is None:
            return False
        return not (ORDER_RANGE[0] <= self.order <= ORDER_RANGE[1])

    def to_dict(self) -> dict:
        return {
            "identity": self.identity,
            "path": self.path,
            "levels": [{"dr": d, "max_residual": v} for d, v in zip(self.dr, self.max_abs_residual)],
            "order": self.order,
            "exact": self.exact,
            "flagged": self.flagged,
            "terms": self.terms,
            "details": self.details,
        }


def observed_order(dr, residuals, floors=None) -> float | None:
    """Slope of the least-squares line through ``(log dr, log residual)``.

    Levels whose residual is below its round-off floor are left out.
    """
    dr = np.asarray(dr, dtype=float)
    res = np.asarray(residuals, dtype=float)
    floors = np.full(res.shape, NOISE_FLOOR) if floors is None else np.asarray(floors, dtype=float)
    use = res > floors
    if use.sum() < 2:
        return None
    return float(np.polyfit(np.log(dr[use]), np.log(res[use]), 1)[0])


def _floor(dr: float, scale: float) -> float:
    return max(NOISE_FLOOR, ROUNDOFF * max(1.0, scale) / dr**2)


# -- radial calculus --------------------------------------------------------------------------------------


class _Calc:
    """Discrete radial calculus on a uniform grid starting at the pole."""

    def __init__(self, space: ModelSpace, r, order: int = 2):
        self.space = space
        self.r = np.asarray(r, dtype=float)
        self.dr = float(self.r[1] - self.r[0])
        self.order = order
        if self.r.size < 2 * order + 4:
            raise GridTooCoarse(f"need at least {2 * order + 4} nodes, got {self.r.size}")
        self.pole = abs(self.r[0]) < 1e-14
        inner = self.r[1:] if self.pole else self.r
        with np.errstate(all="ignore"):
            drift = space.drift(inner)
            ratio = space.psi(inner, 1) / space.psi(inner)
            ric = _curvature_arrays(space, inner)[2]
        pad = [np.nan] if self.pole else []
        self.drift = np.concatenate([pad, drift])
        self.ratio = np.concatenate([pad, ratio])
        self.ric_phi = np.concatenate([pad, ric])
        self.dphi = space.phi(self.r, 1)

    def d(self, u, parity: str = "even"):
        return radial_derivatives(u, self.dr, order=self.order, parity=parity, pole=self.pole)

    def lap(self, u):
        u1, u2 = self.d(u)
        out = u2 + self.drift * u1
        if self.pole:
            out[0] = self.space.n * u2[0]
        return out

    def hess2(self, u1, u2):
        """``|Hess u|^2 = u''^2 + (n-1) (u' psi'/psi)^2``; the pole uses ``n u''(0)^2``."""
        out = u2**2 + (self.space.n - 1) * (u1 * self.ratio) ** 2
        if self.pole:
            out[0] = self.space.n * u2[0] ** 2
        return out

    def tangential(self, u1, u2):
        """``u' psi'/psi`` with its pole limit ``u''(0)``."""
        out = u1 * self.ratio
        if self.pole:
            out[0] = u2[0]
        return out

    def ric(self, u1):
        out = self.ric_phi * u1**2
        if self.pole:
            out[0] = 0.0
        return out


def _report(identity, drs, residuals, path="discrete", terms=None, details=None, scales=None) -> ResidualReport:
    if path == "analytic":
        floors = [NOISE_FLOOR * max(1.0, s) for s in (scales or [1.0])]
    else:
        floors = [_floor(d, s) for d, s in zip(drs, scales or [1.0] * len(drs))]
    return ResidualReport(
        identity=identity,
        dr=[float(d) for d in drs],
        max_abs_residual=[float(v) for v in residuals],
        order=observed_order(drs, residuals, floors) if path != "analytic" else None,
        path=path,
        terms=terms or {},
        details=details or {},
        noise_floor=floors,
    )


def _term_sizes(terms: dict, mask) -> dict:
    return {k: float(np.max(np.abs(np.asarray(v)[..., mask]))) for k, v in terms.items()}


# -- static identities on analytic profiles --------------------------------------------------------------


def _profile_radius(space: ModelSpace, R) -> float:
    return min(space.R_max, 4.0) if R is None else float(R)


def _profile_grid(space: ModelSpace, dr: float, R: float | None) -> np.ndarray:
    R = _profile_radius(space, R)
    if R > space.R_max * (1 + 1e-12):
        raise ConfigError(f"radius {R} exceeds the model space radius {space.R_max}")
    count = int(round(R / dr))
    if count < 8:
        raise GridTooCoarse(f"dr={dr} leaves only {count + 1} nodes on [0, {R}]")
    return np.arange(count + 1) * dr


EDGE_NODES = 10


def _edge_cut(R: float, levels) -> float:
    """Common outer radius for all levels, clear of the one-sided closures."""
    return R - EDGE_NODES * max(levels)


def _analytic_r(space, R, count=801):
    R = min(space.R_max, 4.0) if R is None else float(R)
    return np.linspace(R / count, R, count)


def bochner_residual(space: ModelSpace, u, levels=DEFAULT_LEVELS, R=None, path: str = "discrete") -> ResidualReport:
    """Weighted Bochner formula ``1/2 L|grad u|^2 = |Hess u|^2 + <grad u, grad L u> + Ric_phi(grad u, grad u)``.

    Parameters
    ----------
    space : ModelSpace
    u : str or Expr
        Smooth even radial function of ``r``.
    levels : sequence of float
        Grid spacings for the discrete path.
    R : float, optional
        Outer radius of the check (default ``min(R_max, 4)``).
    path : {"discrete", "analytic"}
    """
    u = ex.parse(u, ("r",)) if isinstance(u, str) else ex.as_expr(u)
    if path == "analytic":
        r = _analytic_r(space, R)
        u1, u2 = u.diff("r"), u.diff("r", 2)
        lhs = 0.5 * space.laplacian_expr(u1 * u1).compile(("r",))(r)
        ratio = space.warp.expression.diff("r") / space.warp.expression
        hess = (u2 * u2 + (space.n - 1) * (u1 * ratio) ** 2).compile(("r",))(r)
        cross = (u1 * space.laplacian_expr(u).diff("r")).compile(("r",))(r)
        ric = _curvature_arrays(space, r)[2] * u1.compile(("r",))(r) ** 2
        res = np.abs(lhs - hess - cross - ric)
        terms = {"lhs": float(np.abs(lhs).max()), "hess": float(hess.max()), "ric": float(np.abs(ric).max())}
        return _report("bochner", [0.0], [res.max()], "analytic", terms, scales=[max(terms.values())])
    out, terms, scales = [], {}, []
    for dr in levels:
        r = _profile_grid(space, dr, R)
        calc = _Calc(space, r)
        uv = u.compile(("r",))(r)
        u1, u2 = calc.d(uv)
        lhs = 0.5 * calc.lap(u1**2)
        cross = u1 * calc.d(calc.lap(uv))[0]
        hess = calc.hess2(u1, u2)
        ric = calc.ric(u1)
        keep = r <= _edge_cut(_profile_radius(space, R), levels) + 1e-12
        out.append(np.max(np.abs(lhs - hess - cross - ric)[keep]))
        terms = _term_sizes({"lhs": lhs, "hess": hess, "cross": cross, "ric": ric}, keep)
        scales.append(max(terms.values()))
    return _report("bochner", levels, out, "discrete", terms, scales=scales)


def cd_condition_check(space: ModelSpace, u, k: float, m=None, R=None, samples: int = 801, certify: bool = True) -> float:
    """Minimum of ``Gamma_2(u,u) - (L u)^2/m - k Gamma(u,u)`` over ``(0, R]``.

    ``Gamma_2`` is computed from its definition
    ``1/2 L Gamma(u,u) - Gamma(u, L u)`` with exact derivatives; ``k`` is the
    signed lower bound in ``Ric_phi^m >= k g`` (``Ric_phi`` when ``m`` is
    infinite).

    Raises
    ------
    HypothesisUnverified
        ``k`` exceeds the certified curvature lower bound on the region, or
        ``m = n`` with a non-constant potential.
    """
    m = space.m if m is None else parse_extended(m)
    if m < space.n:
        raise HypothesisUnverified(f"m={m:g} is below the dimension n={space.n}")
    if m == space.n and not space.potential.is_constant:
        raise HypothesisUnverified("m = n requires a constant potential")
    u = ex.parse(u, ("r",)) if isinstance(u, str) else ex.as_expr(u)
    r = _analytic_r(space, R, samples)
    if certify:
        flavor = "Ric_phi" if math.isinf(m) else "Ric_phi^m"
        bound = curvature_lower_bound(space, flavor, region=(0.0, float(r[-1])), m=m)
        if k > bound.min_eigenvalue + 1e-9 * max(1.0, abs(bound.min_eigenvalue)):
            raise HypothesisUnverified(
                f"k={k:g} exceeds the certified {flavor} lower bound {bound.min_eigenvalue:.6g}"
            )
    u1 = u.diff("r")
    Lu = space.laplacian_expr(u)
    gamma = u1 * u1
    gamma2 = 0.5 * space.laplacian_expr(gamma) - u1 * Lu.diff("r")
    vals = {name: e.compile(("r",))(r) for name, e in (("g2", gamma2), ("Lu", Lu), ("g", gamma))}
    inv_m = 0.0 if math.isinf(m) else 1.0 / m
    margin = vals["g2"] - inv_m * vals["Lu"] ** 2 - k * vals["g"]
    return float(np.min(margin))


def exp_laplacian_identity(space: ModelSpace, f, levels=DEFAULT_LEVELS, R=None) -> ResidualReport:
    """``L e^{-f} = -e^{-f} (L f - |grad f|^2)`` on sampled radial ``f``."""
    f = ex.parse(f, ("r",)) if isinstance(f, str) else ex.as_expr(f)
    out, scales = [], []
    for dr in levels:
        r = _profile_grid(space, dr, R)
        calc = _Calc(space, r)
        fv = f.compile(("r",))(r)
        lhs = calc.lap(np.exp(-fv))
        f1 = calc.d(fv)[0]
        rhs = -np.exp(-fv) * (calc.lap(fv) - f1**2)
        keep = r <= _edge_cut(_profile_radius(space, R), levels) + 1e-12
        out.append(np.max(np.abs(lhs - rhs)[keep]))
        scales.append(float(np.max(np.abs(lhs[keep]))))
    return _report("exp_laplacian", levels, out, scales=scales)


def product_rule_residual(space: ModelSpace, eta, H, t: float = 1.0, levels=DEFAULT_LEVELS, R=None, dt: float = 1e-4) -> ResidualReport:
    """Localisation identity for ``[L - d_t](eta H)`` with smooth ``eta(r, t)``, ``H(r, t)``.

    Checks ``[L - d_t](eta H) = eta [L - d_t] H + 2 [<grad eta, grad(eta H)> - |grad eta|^2 H] / eta + H [L - d_t] eta``
    where ``eta > 0``.  Time derivatives are exact (symbolic).
    """
    eta = ex.parse(eta, ("r", "t")) if isinstance(eta, str) else ex.as_expr(eta)
    H = ex.parse(H, ("r", "t")) if isinstance(H, str) else ex.as_expr(H)
    prod = eta * H
    out, scales = [], []
    for dr in levels:
        r = _profile_grid(space, dr, R)
        calc = _Calc(space, r)
        ev = {name: e.compile(("r", "t")) for name, e in (("eta", eta), ("H", H), ("p", prod))}
        et = {name: e.diff("t").compile(("r", "t")) for name, e in (("eta", eta), ("H", H), ("p", prod))}
        vals = {k: f(r, t) for k, f in ev.items()}
        if np.any(vals["eta"] <= 0):
            raise ConfigError("eta must be positive on the sampled region")
        heat = {k: calc.lap(vals[k]) - et[k](r, t) for k in vals}
        e1 = calc.d(vals["eta"])[0]
        p1 = calc.d(vals["p"])[0]
        rhs = vals["eta"] * heat["H"] + 2 * (e1 * p1 - e1**2 * vals["H"]) / vals["eta"] + vals["H"] * heat["eta"]
        keep = r <= _edge_cut(_profile_radius(space, R), levels) + 1e-12
        out.append(np.max(np.abs(heat["p"] - rhs)[keep]))
        scales.append(float(np.max(np.abs(heat["p"][keep]))))
    return _report("product_rule", levels, out, scales=scales)


# -- evolution identities on solution fields ----------------------------------------------------------------


def _as_levels(sol) -> list:
    if isinstance(sol, SolutionField):
        return [sol]
    sols = list(sol)
    if not sols:
        raise ConfigError("need at least one solution field")
    return sorted(sols, key=lambda s: -s.dr)


def _verify_radius(sols, r_verify):
    edge = min(_edge_cut(s.r[-1], [max(x.dr for x in sols)]) for s in sols)
    if r_verify is not None:
        return min(float(r_verify), edge)
    return min(min(s.unpolluted_radius for s in sols), edge)


def _levels_for(sol: SolutionField, need_origin_gap: bool):
    idx = np.arange(sol.t.size)
    if need_origin_gap and np.isfinite(sol.t_origin):
        idx = idx[sol.t > sol.t_origin + 1e-12]
    return idx


def _evolution(name, sols, space, G, kernel, r_verify, order, need_gap=False, origin_only=False):
    sols = _as_levels(sols)
    space = space or sols[0].space
    rv = _verify_radius(sols, r_verify)
    drs, out, terms, scales = [], [], {}, []
    for sol in sols:
        g = G if G is not None else (sol.G if sol.G is not None else zero())
        calc = _Calc(space, sol.r, order)
        keep = sol.r <= rv + 1e-12
        if not keep.any():
            raise GridTooCoarse(f"no interior nodes within r <= {rv}")
        worst = 0.0
        level_terms = {}
        for i in _levels_for(sol, need_gap):
            res, parts = kernel(calc, sol, g, i)
            worst = max(worst, float(np.max(np.abs(res[keep]))))
            for k, v in parts.items():
                level_terms[k] = max(level_terms.get(k, 0.0), float(np.max(np.abs(np.asarray(v)[keep]))))
        drs.append(sol.dr)
        out.append(worst)
        terms = level_terms
        scales.append(max(level_terms.values(), default=1.0))
    return _report(name, drs, out, "discrete", terms, {"r_verify": rv, "stencil_order": order}, scales)


def _pde_rate(calc, sol, G, i):
    """``w_t`` from the equation, with the same stencils as the identity."""
    w = sol.w[i]
    return calc.lap(w) + G(sol.t[i], sol.r, w)


def h_evolution_residual(sol, D=None, space=None, G=None, r_verify=None, order: int = 2) -> ResidualReport:
    """``d_t h = L h + |grad h|^2 + D^{-1} e^{-h} G(De^h)`` with ``h = log(w/D)``.

    ``d_t h`` is taken from the stored time derivative of the solver, so this
    check also measures the consistency of the solution with the equation.
    """
    sols = _as_levels(sol)
    sols = [_with_bound(s, D) for s in sols]

    def kernel(calc, s, g, i):
        if s.dwdt is None:
            raise ConfigError("h-evolution needs the stored time derivative")
        w = s.w[i]
        h = np.log(w / s.D)
        ht = s.dwdt[i] / w
        h1 = calc.d(h)[0]
        lap_h = calc.lap(h)
        src = g(s.t[i], s.r, w) / w
        return ht - lap_h - h1**2 - src, {"d_t h": ht, "L h": lap_h, "|grad h|^2": h1**2, "G/w": src}

    return _evolution("h_evolution", sols, space, G, kernel, r_verify, order)


def _with_bound(sol: SolutionField, D):
    if D is None:
        if sol.D is None:
            return sol.with_D("auto")
        return sol
    return sol.with_D(D)


def H_evolution_residual(sol, space=None, G=None, D=None, r_verify=None, order: int = 4) -> ResidualReport:
    """Evolution of ``H = |grad h|^2 / (1-h)^2`` under the equation.

    Residual of ``[L - d_t] H`` against the sum of the curvature, transport,
    quadratic, Hessian-square and reaction terms; each term is reported.
    Fourth-order stencils keep the residual above round-off on fine grids.
    """
    sols = [_with_bound(s, D) for s in _as_levels(sol)]

    def kernel(calc, s, g, i):
        t, r, w = s.t[i], s.r, s.w[i]
        Dv = s.D
        wt = _pde_rate(calc, s, g, i)
        h = np.log(w / Dv)
        h1, h2 = calc.d(h)
        om = 1.0 - h
        H = h1**2 / om**2
        ht = wt / w
        ht1 = calc.d(ht)[0]
        H_t = 2 * h1 * ht1 / om**2 + 2 * h1**2 * ht / om**3
        lhs = calc.lap(H) - H_t
        H1 = calc.d(H)[0]
        tang = calc.tangential(h1, h2)
        curv = 2 * calc.ric(h1) / om**2
        transport = 2 * h * h1 * H1 / om
        quad = 2 * om * H**2
        a = h2 / om + h1**2 / om**2
        b = tang / om
        square = 2 * (a**2 + (calc.space.n - 1) * b**2)
        gx = g.partial("G_x", t, r, w)
        gw = g.partial("G_w", t, r, w)
        gv = g(t, r, w)
        react_x = -2 * h1 * gx / (w * om**2)
        react_w = -2 * H * (gw + h * gv / (w * om))
        rhs = curv + transport + quad + square + react_x + react_w
        parts = {
            "lhs": lhs,
            "curvature": curv,
            "transport": transport,
            "quadratic": quad,
            "hessian_square": square,
            "reaction_x": react_x,
            "reaction_w": react_w,
        }
        return lhs - rhs, parts

    return _evolution("H_evolution", sols, space, G, kernel, r_verify, order)


def F_beta_evolution_residual(sol, space=None, G=None, alpha: float = 2.0, beta: float = 0.0, r_verify=None, order: int = 4) -> ResidualReport:
    """Evolution of ``F = f^beta |grad f|^2`` with ``f = w^{1/alpha}``."""
    if not alpha > 1 or beta < 0:
        raise ConfigError("F_beta evolution needs alpha > 1 and beta >= 0")
    al, be = float(alpha), float(beta)

    def kernel(calc, s, g, i):
        t, r, w = s.t[i], s.r, s.w[i]
        wt = _pde_rate(calc, s, g, i)
        w1 = calc.d(w)[0]
        wt1 = calc.d(wt)[0]
        c = (be + 2) / al - 2
        F = w**c * w1**2 / al**2
        F_t = (c * w ** (c - 1) * wt * w1**2 + 2 * w**c * w1 * wt1) / al**2
        lhs = calc.lap(F) - F_t
        f = w ** (1 / al)
        f1, f2 = calc.d(f)
        g1 = calc.d(f1**2, parity="even")[0]
        gx = g.partial("G_x", t, r, w)
        gw = g.partial("G_w", t, r, w)
        gv = g(t, r, w)
        parts = {
            "curvature": 2 * f**be * calc.ric(f1),
            "transport": 2 * (1 - al + be) * f ** (be - 1) * f1 * g1,
            "hessian": 2 * f**be * calc.hess2(f1, f2),
            "quadratic": -(2 - be**2 - al * (2 - be)) * F**2 / f ** (be + 2),
            "reaction_w": -(2 * w * gw - (2 - (2 + be) / al) * gv) * F / w,
            "reaction_x": -(2 / al) * f ** (be + 1) / w * f1 * gx,
        }
        rhs = sum(parts.values())
        parts["lhs"] = lhs
        return lhs - rhs, parts

    return _evolution("F_beta_evolution", sol, space, G, kernel, r_verify, order)


def liyau_F_evolution_residual(sol, space=None, G=None, alpha: float = 2.0, m=None, r_verify=None, order: int = 4) -> ResidualReport:
    """Evolution of ``F = t (|grad f|^2 - alpha d_t f + alpha e^{-f} G)`` with ``f = log w``.

    ``t`` is measured from the solution's ``t_origin``.  With ``m`` infinite
    the ``<grad phi, grad f>^2/(m-n)`` term is dropped and ``Ric_phi``
    replaces ``Ric_phi^m``.  ``details["inequality_slack"]`` is the smallest
    slack of the ``2t (L f)^2 / m`` lower bound over all levels (finite m only).

    Raises
    ------
    NeedFiniteM
        ``m = n`` with a non-constant potential.
    """
    sols = _as_levels(sol)
    sp = space or sols[0].space
    m = sp.m if m is None else parse_extended(m)
    if m == sp.n and not sp.potential.is_constant:
        raise NeedFiniteM("m = n with a non-constant potential leaves the (m-n) term undefined")
    if m < sp.n:
        raise ConfigError(f"m={m:g} is below the dimension")
    al = float(alpha)
    if al == 0:
        raise ConfigError("alpha must be non-zero")
    drop = math.isinf(m) or m == sp.n
    rv = _verify_radius(sols, r_verify)
    slack = [math.inf]

    def kernel(calc, s, g, i):
        t, r, w = s.t[i], s.r, s.w[i]
        tau = t - s.t_origin
        wt = _pde_rate(calc, s, g, i)
        lap_w = calc.lap(w)
        f = np.log(w)
        f1, f2 = calc.d(f)
        F = tau * (f1**2 - al * lap_w / w)
        # d_t (L w / w) = L(w_t)/w - (L w) w_t / w^2
        ft1 = calc.d(wt / w)[0]
        F_t = (f1**2 - al * lap_w / w) + tau * (2 * f1 * ft1 - al * (calc.lap(wt) / w - lap_w * wt / w**2))
        lhs = calc.lap(F) - F_t
        F1 = calc.d(F)[0]
        eG = g(t, r, w) / w
        eG1 = calc.d(eG)[0]
        dphi = calc.dphi
        ric = calc.ric(f1)
        parts = {
            "hessian": 2 * tau * calc.hess2(f1, f2),
            "transport": -2 * f1 * F1,
            "curvature": 2 * tau * ric,
            "decay": -F / tau,
            "reaction_grad": 2 * tau * (al - 1) * f1 * eG1,
            "reaction_lap": al * tau * calc.lap(eG),
        }
        rhs = sum(parts.values())
        if not drop:
            # split Ric_phi into Ric_phi^m plus the <grad phi, grad f>^2/(m-n) term
            extra = 2 * tau * (dphi * f1) ** 2 / (m - sp.n)
            parts["curvature"] = parts["curvature"] - extra
            parts["phi_term"] = extra
        if math.isfinite(m):
            lower = rhs - parts["hessian"] - parts.get("phi_term", 0.0) + 2 * tau * calc.lap(f) ** 2 / m
            keep = s.r <= rv + 1e-12
            slack[0] = min(slack[0], float(np.min((lhs - lower)[keep])))
        parts["lhs"] = lhs
        return lhs - rhs, parts

    rep = _evolution("liyau_F_evolution", sols, space, G, kernel, rv, order, need_gap=True)
    if math.isfinite(m):
        rep.details["inequality_slack"] = slack[0]
    rep.details["m"] = "inf" if math.isinf(m) else m
    return rep


def delta_phi_G_identity_residual(sol, space=None, G=None, r_verify=None, order: int = 2) -> ResidualReport:
    """Chain rule ``L G = L^x G + 2 e^f G_xw f' + e^f |f'|^2 (G_w + e^f G_ww) + e^f G_w L f``.

    The left side is the discrete Laplacian of ``r -> G(t, r, w(r))``; the
    frozen-``w`` Laplacian ``L^x G`` uses exact derivatives in ``r``.
    """

    def kernel(calc, s, g, i):
        t, r, w = s.t[i], s.r, s.w[i]
        lhs = calc.lap(g(t, r, w))
        f = np.log(w)
        f1 = calc.d(f)[0]
        frozen = g.delta_phi_frozen_exact(calc.space, t, r, w)
        gxw = g.partial("G_xw", t, r, w)
        gw = g.partial("G_w", t, r, w)
        gww = g.partial("G_ww", t, r, w)
        parts = {
            "frozen": frozen,
            "mixed": 2 * w * gxw * f1,
            "gradient": w * f1**2 * (gw + w * gww),
            "laplacian": w * gw * calc.lap(f),
        }
        rhs = sum(parts.values())
        parts["lhs"] = lhs
        return lhs - rhs, parts

    return _evolution("delta_phi_G", sol, space, G, kernel, r_verify, order)


# -- scalar lemma ------------------------------------------------------------------------------------------------


@dataclass
class QuadraticLemmaResult:
    samples: int
    violations: int
    worst_margin: float
    worst_sample: dict
    seconds: float

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "violations": self.violations,
            "worst_margin": self.worst_margin,
            "worst_sample": self.worst_sample,
            "seconds": self.seconds,
        }


QUADRATIC_RANGES = {
    "y": (1e-6, 50.0),
    "z": (-50.0, 50.0),
    "alpha": (1.001, 10.0),
    "eps": (1e-3, 0.999),
    "m": (1.0, 10.0),
    "c1": (0.0, 10.0),
    "R": (0.1, 10.0),
    "a": (-5.0, 5.0),
    "b": (-5.0, 5.0),
}


def quadratic_lemma_sides(y, z, alpha, eps, m, c1, R, a, b):
    """Left and right sides of the scalar inequality behind the Li-Yau bound."""
    y, z, alpha, eps, m, c1, R, a, b = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (y, z, alpha, eps, m, c1, R, a, b)))
    s = np.sqrt(y)
    gap = y - alpha * z
    mc = m * c1 / R
    lhs = (y - z) ** 2 - mc * s * gap - m * a * y - m * b * s
    rhs = (
        gap**2 / alpha**2
        - mc**2 * alpha**2 * gap / (8 * (alpha - 1))
        - alpha**2 * m**2 * a**2 / (4 * (1 - eps) * (alpha - 1) ** 2)
        - 0.75 * np.cbrt(m**4 * b**4 * alpha**2 / (4 * eps * (alpha - 1) ** 2))
    )
    return lhs, rhs


def quadratic_lemma_check(samples: int = 100_000, ranges: dict | None = None, seed: int = 0, tol: float = 1e-12) -> QuadraticLemmaResult:
    """Sample admissible tuples uniformly and count violations of the inequality.

    A tuple is admissible when ``y > 0``, ``alpha > 1``, ``0 < eps < 1`` and
    ``y - alpha z > 0``; inadmissible draws are rejected and redrawn.  A
    violation is ``lhs - rhs < -tol * max(1, |lhs|, |rhs|)``.
    """
    rng_ = dict(QUADRATIC_RANGES)
    if ranges:
        unknown = set(ranges) - set(rng_)
        if unknown:
            raise ConfigError(f"unknown sample ranges {sorted(unknown)}")
        rng_.update({k: tuple(map(float, v)) for k, v in ranges.items()})
    start = time.perf_counter()
    gen = np.random.default_rng(seed)
    names = list(rng_)
    chunks = {k: [] for k in names}
    have = 0
    while have < samples:
        batch = max(1024, 2 * (samples - have))
        draw = {k: gen.uniform(*rng_[k], size=batch) for k in names}
        ok = (draw["y"] > 0) & (draw["alpha"] > 1) & (draw["eps"] > 0) & (draw["eps"] < 1)
        ok &= draw["y"] - draw["alpha"] * draw["z"] > 0
        for k in names:
            chunks[k].append(draw[k][ok])
        have += int(ok.sum())
    vals = {k: np.concatenate(v)[:samples] for k, v in chunks.items()}
    lhs, rhs = quadratic_lemma_sides(**vals)
    margin = lhs - rhs
    scale = np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))
    bad = margin < -tol * scale
    j = int(np.argmin(margin / scale))
    return QuadraticLemmaResult(
        samples=samples,
        violations=int(bad.sum()),
        worst_margin=float(margin[j]),
        worst_sample={k: float(v[j]) for k, v in vals.items()},
        seconds=time.perf_counter() - start,
    )
