"""Reaction terms G(t, x, w), their partial derivatives and Liouville hypotheses.

Every family is assembled into a single expression tree in the variables
``t``, ``r`` and ``w`` so all partial derivatives are exact.  In the radial
model the spatial derivative ``G_x`` is the radial derivative ``G_r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import expr as ex
from .errors import (
    BoundViolated,
    ConfigError,
    DomainViolation,
    NonPositiveSolution,
    ParameterOrder,
    UnknownPredicate,
)
from .geometry import ModelSpace, weighted_laplacian_radial

__all__ = [
    "Nonlinearity",
    "GammaQuantities",
    "PredicateReport",
    "zero",
    "log_linear",
    "power_sum",
    "gamma_log",
    "lichnerowicz",
    "split_xy",
    "custom",
    "iterated_log",
    "iterated_log_gamma",
    "from_config",
    "eval_with_partials",
    "delta_phi_G_frozen",
    "gamma_quantities",
    "souplet_zhang_sup_terms",
    "hamilton_sup_terms",
    "liouville_predicate",
    "PREDICATES",
]

VARS = ("t", "r", "w")
DEFAULT_WINDOW = (1e-6, 1e6)

_PARTIALS = {
    "G": (),
    "G_w": ("w",),
    "G_x": ("r",),
    "G_ww": ("w", "w"),
    "G_xw": ("r", "w"),
    "G_t": ("t",),
    "G_xx": ("r", "r"),
    "G_www": ("w", "w", "w"),
    "G_xww": ("r", "w", "w"),
    "G_xxw": ("r", "r", "w"),
}


class Nonlinearity:
    """A reaction term ``G(t, r, w)`` with exact partials.

    Parameters
    ----------
    expression : Expr or str
        Expression in ``t``, ``r`` and ``w``.
    family : str
        Family tag used by the Liouville predicates.
    params : dict, optional
        Family parameters (coefficient expressions and exponents).
    w_window : tuple of float
        Positivity window on which the term is declared finite.
    nonsmooth : bool
        Whether the term is only C^1 away from a discrete set.
    singular_exclusion : float
        Samples whose non-smooth arguments are within this distance of zero
        are skipped by the predicates.
    """

    def __init__(
        self,
        expression,
        family: str = "Custom",
        params: dict | None = None,
        w_window=DEFAULT_WINDOW,
        label: str | None = None,
        nonsmooth: bool | None = None,
        singular_exclusion: float = 1e-6,
    ):
        if isinstance(expression, str):
            expression = ex.parse(expression, variables=VARS)
        self.expression = ex.as_expr(expression)
        extra = self.expression.variables() - set(VARS)
        if extra:
            raise ConfigError(f"nonlinearity may only use t, r, w; found {sorted(extra)}")
        self.family = family
        self.params = dict(params or {})
        lo, hi = (float(v) for v in w_window)
        if not 0 < lo < hi:
            raise ConfigError(f"positivity window must satisfy 0 < lo < hi, got {w_window}")
        self.w_window = (lo, hi)
        self.label = label or f"{family}: {self.expression}"
        self.singular_set = self.expression.nonsmooth_arguments()
        self.nonsmooth = bool(self.singular_set) if nonsmooth is None else nonsmooth
        self.singular_exclusion = float(singular_exclusion)

    def __repr__(self):
        return f"Nonlinearity({self.label!r})"

    @cached_property
    def _compiled(self):
        return {}

    def partial_expr(self, name: str) -> ex.Expr:
        if name not in _PARTIALS:
            raise KeyError(f"unknown partial {name!r}")
        e = self.expression
        for v in _PARTIALS[name]:
            e = e.diff(v)
        return e

    def partial(self, name: str, t, r, w) -> np.ndarray:
        fn = self._compiled.get(name)
        if fn is None:
            fn = self.partial_expr(name).compile(VARS)
            self._compiled[name] = fn
        return fn(t, r, w)

    def __call__(self, t, r, w):
        return self.partial("G", t, r, w)

    @property
    def depends_on_x(self) -> bool:
        return "r" in self.expression.variables()

    @property
    def depends_on_t(self) -> bool:
        return "t" in self.expression.variables()

    @property
    def is_autonomous(self) -> bool:
        return self.expression.variables() <= {"w"}

    @property
    def is_zero(self) -> bool:
        return isinstance(self.expression, ex.Const) and self.expression.value == 0.0

    def laplacian_frozen_expr(self, space: ModelSpace) -> ex.Expr:
        """Symbolic ``Delta_phi`` of ``x -> G(t, x, w)`` for r > 0."""
        return space.laplacian_expr(self.expression)

    def delta_phi_frozen_exact(self, space: ModelSpace, t, r, w) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        t, r_b, w = np.broadcast_arrays(np.asarray(t, float), r, np.asarray(w, float))
        gx = self.partial("G_x", t, r_b, w)
        gxx = self.partial("G_xx", t, r_b, w)
        out = np.empty_like(gxx)
        pole = r_b == 0.0
        out[pole] = space.n * gxx[pole]
        out[~pole] = gxx[~pole] + space.drift(r_b[~pole]) * gx[~pole]
        return out

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "expression": str(self.expression),
            "w_window": list(self.w_window),
            "nonsmooth": self.nonsmooth,
        }


# -- families -------------------------------------------------------------------------------------------


def _coef(value) -> ex.Expr:
    """A coefficient: a number or an expression in r and t."""
    if isinstance(value, ex.Expr):
        e = value
    elif isinstance(value, str):
        e = ex.parse(value, variables=("r", "t"))
    else:
        e = ex.const(value)
    if e.variables() - {"r", "t"}:
        raise ConfigError("coefficients may only depend on r and t")
    return e


def _power(w: ex.Expr, p: float) -> ex.Expr:
    return ex.power(w, ex.const(p))


W = ex.var("w")
S = ex.var("s")


def zero(**kw) -> Nonlinearity:
    return Nonlinearity(ex.const(0.0), "Zero", {}, label="Zero", **kw)


def log_linear(A=1.0, **kw) -> Nonlinearity:
    """``A(x, t) w log w``."""
    a = _coef(A)
    return Nonlinearity(a * W * ex.func("log", W), "LogLinear", {"A": a}, label=f"LogLinear(A={a})", **kw)


def power_sum(A=(), p=(), B=(), q=(), **kw) -> Nonlinearity:
    """``sum_j A_j w^{p_j} + sum_j B_j w^{q_j}``."""
    A, p, B, q = (list(np.atleast_1d(v)) if not isinstance(v, (list, tuple)) else list(v) for v in (A, p, B, q))
    if len(A) != len(p) or len(B) != len(q):
        raise ConfigError("each coefficient needs a matching exponent")
    A = [_coef(a) for a in A]
    B = [_coef(b) for b in B]
    p = [float(v) for v in p]
    q = [float(v) for v in q]
    e = ex.const(0.0)
    for a, pj in zip(A, p):
        e = e + a * _power(W, pj)
    for b, qj in zip(B, q):
        e = e + b * _power(W, qj)
    label = "PowerSum(" + ", ".join([f"{a}*w^{pj:g}" for a, pj in zip(A, p)] + [f"{b}*w^{qj:g}" for b, qj in zip(B, q)]) + ")"
    return Nonlinearity(e, "PowerSum", {"A": A, "p": p, "B": B, "q": q}, label=label, **kw)


def _s_expr(e) -> ex.Expr:
    if isinstance(e, str):
        e = ex.parse(e, variables=("s",))
    e = ex.as_expr(e)
    if e.variables() - {"s"}:
        raise ConfigError("this profile may only use the variable s")
    return e


def gamma_log(Gamma="s", A=1.0, p=1.0, B=0.0, q=1.0, C=0.0, **kw) -> Nonlinearity:
    """``A Gamma(log w) w^p + B w^q + C w``."""
    g = _s_expr(Gamma)
    a, b, c = _coef(A), _coef(B), _coef(C)
    e = a * g.subs({"s": ex.func("log", W)}) * _power(W, float(p)) + b * _power(W, float(q)) + c * W
    params = {"A": a, "B": b, "C": c, "p": float(p), "q": float(q), "Gamma": g}
    return Nonlinearity(e, "GammaLog", params, label=f"GammaLog(Gamma={g}, p={p:g}, q={q:g})", **kw)


def lichnerowicz(A=1.0, p=1.0, B=0.0, q=1.0, C=0.0, **kw) -> Nonlinearity:
    """``A w^p + B w^q + C w log w``."""
    a, b, c = _coef(A), _coef(B), _coef(C)
    e = a * _power(W, float(p)) + b * _power(W, float(q)) + c * W * ex.func("log", W)
    params = {"A": a, "B": b, "C": c, "p": float(p), "q": float(q)}
    return Nonlinearity(e, "Lichnerowicz", params, label=f"Lichnerowicz(p={p:g}, q={q:g})", **kw)


def split_xy(X="0", Y="0", r=1.0, x_terms=None, **kw) -> Nonlinearity:
    """``X(w) + w^r Y(log w)``.

    ``x_terms`` may give ``X`` as a list of ``(coefficient, exponent)`` pairs,
    which the exponent-based predicates need.
    """
    if x_terms is not None:
        x_terms = [(float(c), float(e)) for c, e in x_terms]
        xe = ex.const(0.0)
        for c, e in x_terms:
            xe = xe + c * _power(W, e)
    else:
        xe = ex.parse(X, variables=("w",)) if isinstance(X, str) else ex.as_expr(X)
        if xe.variables() - {"w"}:
            raise ConfigError("X may only use the variable w")
    y = _s_expr(Y)
    e = xe + _power(W, float(r)) * y.subs({"s": ex.func("log", W)})
    params = {"X": xe, "Y": y, "r": float(r), "x_terms": x_terms}
    return Nonlinearity(e, "SplitXY", params, label=f"SplitXY(X={xe}, Y={y}, r={r:g})", **kw)


def custom(expression, **kw) -> Nonlinearity:
    return Nonlinearity(expression, "Custom", {}, **kw)


def iterated_log(k: int, variant: str = "plain", arg: ex.Expr | None = None) -> ex.Expr:
    """``log_k`` applied to ``w = exp(s)``, as an expression in ``s``.

    ``variant`` is ``"plain"`` (``log log ...``), ``"abs"`` (``|log|`` at each
    level) or ``"plus"`` (``1 + [log]_+`` at each level).
    """
    if k < 1:
        raise ConfigError("iterated log order must be >= 1")
    if variant not in ("plain", "abs", "plus"):
        raise ConfigError(f"unknown iterated-log variant {variant!r}")
    level = S if arg is None else arg
    for j in range(k):
        inner = level if j == 0 else ex.func("log", level)
        if variant == "abs":
            level = ex.func("abs", inner)
        elif variant == "plus":
            level = 1.0 + ex.func("pos", inner)
        else:
            level = inner
    return level


def iterated_log_gamma(ks, betas, variant: str = "plain") -> ex.Expr:
    """``prod_j |log_{k_j} w|^{beta_j}`` as an expression in ``s = log w``."""
    if len(ks) != len(betas):
        raise ConfigError("ks and betas must have the same length")
    out = ex.const(1.0)
    for k, b in zip(ks, betas):
        out = out * ex.power(ex.func("abs", iterated_log(int(k), variant)), ex.const(float(b)))
    return out


def _indexed(block: dict, letter: str) -> list:
    keys = [k for k in block if k == letter or (k.startswith(letter) and k[len(letter):].isdigit())]
    keys.sort(key=lambda k: int(k[len(letter):] or 0))
    return [block[k] for k in keys]


def from_config(cfg) -> Nonlinearity:
    """Build a nonlinearity from its JSON description.

    The schema is ``{"family", "coefficients": [{"name", "value" | "profile"}],
    "exponents": {...}, "X"?, "Y"?, "Gamma"?, "w_window"?}``.  A bare string is
    read as a custom expression in ``t``, ``r`` and ``w``.
    """
    if isinstance(cfg, Nonlinearity):
        return cfg
    if isinstance(cfg, str):
        return custom(cfg)
    if not isinstance(cfg, dict):
        raise ConfigError("nonlinearity block must be an object or an expression string")
    family = str(cfg.get("family", "Custom"))
    coeffs = {}
    for item in cfg.get("coefficients", []):
        if "name" not in item:
            raise ConfigError("each coefficient needs a name")
        coeffs[item["name"]] = item.get("value", item.get("profile"))
    exps = dict(cfg.get("exponents", {}))
    kw = {"w_window": tuple(cfg.get("w_window", DEFAULT_WINDOW))}
    key = family.lower().replace("-", "").replace("_", "")
    if key == "zero":
        return zero(**kw)
    if key == "loglinear":
        return log_linear(coeffs.get("A", 1.0), **kw)
    if key == "powersum":
        return power_sum(_indexed(coeffs, "A"), _indexed(exps, "p"), _indexed(coeffs, "B"), _indexed(exps, "q"), **kw)
    if key == "gammalog":
        return gamma_log(
            cfg.get("Gamma", "s"), coeffs.get("A", 1.0), exps.get("p", 1.0),
            coeffs.get("B", 0.0), exps.get("q", 1.0), coeffs.get("C", 0.0), **kw,
        )
    if key == "lichnerowicz":
        return lichnerowicz(
            coeffs.get("A", 1.0), exps.get("p", 1.0), coeffs.get("B", 0.0),
            exps.get("q", 1.0), coeffs.get("C", 0.0), **kw,
        )
    if key == "splitxy":
        return split_xy(cfg.get("X", "0"), cfg.get("Y", "0"), exps.get("r", 1.0), cfg.get("X_terms"), **kw)
    if key == "custom":
        if "expression" not in cfg:
            raise ConfigError("custom nonlinearity needs an 'expression'")
        return custom(cfg["expression"], **kw)
    raise ConfigError(f"unknown nonlinearity family {family!r}")


# -- evaluation ---------------------------------------------------------------------------------------------


def eval_with_partials(G: Nonlinearity, t, r, w):
    """Return ``(G, G_w, G_x, G_ww, G_xw)`` at the given point(s).

    Raises
    ------
    DomainViolation
        ``w`` leaves the positivity window or a value is not finite
        (for example a nested logarithm of a non-positive number).
    """
    w_arr = np.asarray(w, dtype=float)
    lo, hi = G.w_window
    if np.any(~(w_arr >= lo * (1 - 1e-12))) or np.any(~(w_arr <= hi * (1 + 1e-12))):
        raise DomainViolation(f"w outside the positivity window [{lo:g}, {hi:g}]")
    out = tuple(G.partial(name, t, r, w_arr) for name in ("G", "G_w", "G_x", "G_ww", "G_xw"))
    for name, v in zip(("G", "G_w", "G_x", "G_ww", "G_xw"), out):
        if not np.all(np.isfinite(v)):
            raise DomainViolation(f"{name} is not finite at the requested point (nested logarithm undefined?)")
    if np.ndim(out[0]) == 0:
        return tuple(float(v) for v in out)
    return out


def delta_phi_G_frozen(G: Nonlinearity, space: ModelSpace, t: float, w: float, grid) -> np.ndarray:
    """Discrete ``Delta_phi`` of ``x -> G(t, x, w)`` on a radial grid."""
    r = np.asarray(grid, dtype=float)
    values = G(t, r, w)
    return weighted_laplacian_radial(space, values, r)


@dataclass(frozen=True)
class GammaQuantities:
    gamma_A: float
    gamma_B: float
    gamma_C: float
    gamma_D: float
    gamma_E: float
    alpha: float
    region: dict

    def to_dict(self) -> dict:
        return {
            "gamma_A": self.gamma_A,
            "gamma_B": self.gamma_B,
            "gamma_C": self.gamma_C,
            "gamma_D": self.gamma_D,
            "gamma_E": self.gamma_E,
            "alpha": self.alpha,
            "region": self.region,
        }


def _cylinder_samples(sol, region, include_origin: bool = True):
    levels, rmask = region.select(sol, include_origin=include_origin)
    if levels.size == 0 or not rmask.any():
        raise ConfigError("verification cylinder contains no grid nodes")
    t = sol.t[levels][:, None] * np.ones(int(rmask.sum()))[None, :]
    r = np.ones(levels.size)[:, None] * sol.r[rmask][None, :]
    w = sol.w[np.ix_(levels, np.flatnonzero(rmask))]
    return t, r, w, levels, rmask


def gamma_quantities(G: Nonlinearity, sol, space: ModelSpace, region, alpha: float) -> GammaQuantities:
    """The suprema ``gamma_A..gamma_D`` and the infimum ``gamma_E`` over a cylinder."""
    if np.any(sol.w <= 0):
        raise NonPositiveSolution("gamma quantities need a positive solution")
    t, r, w, _, _ = _cylinder_samples(sol, region)
    g = G.partial("G", t, r, w)
    gw = G.partial("G_w", t, r, w)
    gx = G.partial("G_x", t, r, w)
    gww = G.partial("G_ww", t, r, w)
    gxw = G.partial("G_xw", t, r, w)
    lapx = G.delta_phi_frozen_exact(space, t, r, w)
    a = np.maximum(-alpha * w * gww + gw - g / w, 0.0)
    b = np.abs(alpha * gxw - gx / w)
    c = np.maximum(gw - g / w, 0.0)
    d = np.maximum(-lapx / w, 0.0)
    e = g / w
    return GammaQuantities(
        gamma_A=float(a.max()),
        gamma_B=float(b.max()),
        gamma_C=float(c.max()),
        gamma_D=float(d.max()),
        gamma_E=float(e.min()),
        alpha=float(alpha),
        region=region.to_dict(),
    )


def souplet_zhang_sup_terms(G: Nonlinearity, sol, region, D: float):
    """The two nonlinearity suprema of the Souplet-Zhang bound."""
    t, r, w, _, _ = _cylinder_samples(sol, region)
    if np.any(w > D):
        raise BoundViolated(f"sup w = {w.max():.6g} exceeds D = {D:.6g} on the cylinder")
    h = np.log(w / D)
    one_h = 1.0 - h
    g = G.partial("G", t, r, w)
    gw = G.partial("G_w", t, r, w)
    gx = G.partial("G_x", t, r, w)
    denom = w * one_h**2
    term_x = float(np.max(np.abs(gx) / denom) ** (1.0 / 3.0))
    bracket = (w * one_h * gw + h * g) / denom
    term_w = float(np.sqrt(max(float(bracket.max()), 0.0)))
    return term_x, term_w


def _check_alpha_beta(alpha: float, beta: float):
    if beta < 0:
        raise ParameterOrder(f"beta must be >= 0, got {beta}")
    if not alpha > 1 + beta:
        raise ParameterOrder(f"need alpha > 1 + beta, got alpha={alpha}, beta={beta}")


def hamilton_sup_terms(G: Nonlinearity, sol, region, alpha: float, beta: float):
    """The two nonlinearity suprema of the Hamilton-type bound."""
    _check_alpha_beta(alpha, beta)
    t, r, w, _, _ = _cylinder_samples(sol, region)
    g = G.partial("G", t, r, w)
    gw = G.partial("G_w", t, r, w)
    gx = G.partial("G_x", t, r, w)
    term_x = float(np.max(np.abs(gx) / w) ** (1.0 / 3.0))
    bracket = (2 * w * gw - (2 - (beta + 2) / alpha) * g) / w
    term_w = float(np.sqrt(max(float(bracket.max()), 0.0)))
    return term_x, term_w


# -- Liouville predicates -------------------------------------------------------------------------------------


@dataclass
class PredicateReport:
    """Outcome of a sampled hypothesis check.

    ``witness`` is the first violating ``w`` (``witness_kind == "w"``), or the
    offending parameter for exponent conditions.
    """

    predicate: str
    holds: bool
    witness: float | None = None
    witness_kind: str | None = None
    reason: str = ""
    sampled_on: tuple | None = None
    samples: int = 0
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "predicate": self.predicate,
            "holds": self.holds,
            "witness": self.witness,
            "witness_kind": self.witness_kind,
            "reason": self.reason,
            "sampled_on": list(self.sampled_on) if self.sampled_on else None,
            "samples": self.samples,
            "details": self.details,
        }


BASE_SAMPLES = 2001
VIOLATION_TOL = 1e-12


def _log_samples(lo: float, hi: float, count: int) -> np.ndarray:
    return np.exp(np.linspace(math.log(lo), math.log(hi), count))


def _regular_mask(exprs, var: str, x: np.ndarray, eps: float) -> np.ndarray:
    """Samples whose non-smooth arguments stay at least ``eps`` from zero."""
    keep = np.ones(x.shape, dtype=bool)
    for arg in exprs:
        if arg.variables() - {var}:
            continue
        vals = arg.compile((var,))(x)
        keep &= ~(np.abs(vals) < eps)
    return keep


def _sampled_conditions(conditions, lo, hi, var="w", singular=(), eps=1e-6, transform=None):
    """Evaluate ``conditions`` (name -> fn(x) >= 0 required) on nested log grids.

    ``transform`` maps the sample variable to the reported witness value.
    Returns ``(ok, witness, failing_name, samples, min_values)``.
    """
    result = None
    for count in (BASE_SAMPLES, 2 * BASE_SAMPLES - 1):
        if var == "w":
            x = _log_samples(lo, hi, count)
        else:
            x = np.linspace(lo, hi, count)
        x = x[_regular_mask(singular, var, x, eps)]
        first = None
        mins = {}
        for name, fn in conditions:
            with np.errstate(all="ignore"):
                vals = np.asarray(fn(x), dtype=float) * np.ones_like(x)
            scale = 1.0 + np.abs(vals)
            bad = ~(vals >= -VIOLATION_TOL * scale)
            mins[name] = float(np.nanmin(vals)) if vals.size else math.nan
            if bad.any():
                j = int(np.argmax(bad))
                if first is None or x[j] < first[0]:
                    first = (float(x[j]), name)
        if first is not None:
            wit = first[0] if transform is None else float(transform(first[0]))
            return False, wit, first[1], x.size, mins
        result = (True, None, None, x.size, mins)
    return result


def _constant_value(e: ex.Expr, label: str) -> float:
    if not isinstance(e, ex.Const):
        raise ConfigError(f"{label} must be a constant for this predicate")
    return e.value


def _w_only(G: Nonlinearity, name: str):
    if not G.is_autonomous:
        return PredicateReport(name, False, reason="hypothesis needs an autonomous G(w); this G depends on (t, x)")
    return None


def _fn(G: Nonlinearity, part: str):
    return lambda w: G.partial(part, 0.0, 0.0, w)


def _kappa(params) -> float:
    alpha = float(params.get("alpha", math.nan))
    beta = float(params.get("beta", 0.0))
    if math.isnan(alpha):
        raise ConfigError("this predicate needs alpha")
    _check_alpha_beta(alpha, beta)
    return 1.0 - (beta / 2 + 1) / alpha


def _finish(name, G, ok, wit, failing, count, mins, window, kind="w", details=None):
    report = PredicateReport(
        predicate=name,
        holds=bool(ok),
        witness=wit,
        witness_kind=None if ok else kind,
        reason="" if ok else f"condition '{failing}' violated",
        sampled_on=tuple(window),
        samples=count,
        details={"min_values": mins, **(details or {})},
    )
    return report


def _pred_log(G, window, params):
    name = "Liouville log thm"
    bad = _w_only(G, name)
    if bad:
        return bad
    if "D" not in params:
        raise ConfigError("predicate 'Liouville log thm' needs D")
    D = float(params["D"])
    lo, hi = window[0], min(window[1], D)
    if lo >= hi:
        return PredicateReport(name, False, reason="window lies above D", sampled_on=tuple(window))
    g, gw = _fn(G, "G"), _fn(G, "G_w")

    def cond(w):
        h = np.log(w / D)
        return -((1 - h) * w * gw(w) + h * g(w))

    res = _sampled_conditions([("[1-log(w/D)] w G' + log(w/D) G <= 0", cond)], lo, hi, singular=G.singular_set, eps=G.singular_exclusion)
    return _finish(name, G, *res, (lo, hi))


def _pred_two(G, window, params):
    name = "Liouville two thm"
    bad = _w_only(G, name)
    if bad:
        return bad
    kappa = _kappa(params)
    g, gw = _fn(G, "G"), _fn(G, "G_w")
    res = _sampled_conditions(
        [("[1-(beta/2+1)/alpha] G - w G' >= 0", lambda w: kappa * g(w) - w * gw(w))],
        *window, singular=G.singular_set, eps=G.singular_exclusion,
    )
    return _finish(name, G, *res, window, details={"kappa": kappa})


def _y_parts(y: ex.Expr):
    c = [y.diff("s", k).compile(("s",)) for k in range(3)]
    return c


def _pred_one(G, window, params):
    name = "Liouville one thm"
    if G.family != "SplitXY":
        return PredicateReport(name, False, reason=f"needs the SplitXY family, got {G.family}")
    X, Y, r_exp = G.params["X"], G.params["Y"], G.params["r"]
    lo, hi = window
    xw = X.diff("w")
    X0, X1 = X.compile(("w",)), xw.compile(("w",))
    conds = [("X' <= 0", lambda w: -X1(w)), ("X - w X' >= 0", lambda w: X0(w) - w * X1(w))]
    res = _sampled_conditions(conds, lo, hi, singular=G.singular_set, eps=G.singular_exclusion)
    if not res[0]:
        return _finish(name, G, *res, window)
    y_zero = isinstance(Y, ex.Const) and Y.value == 0.0
    if y_zero:
        return _finish(name, G, *res, window, details={"case": "Y == 0"})
    y0, y1, _ = _y_parts(Y)
    s_sing = Y.nonsmooth_arguments()
    if lo >= 1.0:
        if r_exp < 1:
            return PredicateReport(name, False, r_exp, "r", "(Y1) needs r >= 1", (lo, hi))
        s_lo, s_hi = 0.0, math.log(hi)
        res = _sampled_conditions(
            [("Y <= 0", lambda s: -y0(s)), ("Y' <= 0", lambda s: -y1(s))],
            s_lo, max(s_hi, 1e-12), var="s", singular=s_sing, eps=G.singular_exclusion, transform=math.exp,
        )
        return _finish(name, G, *res, (lo, hi), details={"case": "Y1"})
    if hi <= 1.0:
        s_lo, s_hi = math.log(lo), 0.0
        gammas = [float(params["gamma"])] if "gamma" in params else [0.0] + list(np.logspace(-3, 3, 61))
        tried = []
        for gam in gammas:
            if r_exp > min(gam, 1.0):
                tried.append(gam)
                continue
            res = _sampled_conditions(
                [("Y >= 0", y0), ("Y' <= 0", lambda s: -y1(s)), ("s Y' >= gamma Y", lambda s, g=gam: s * y1(s) - g * y0(s))],
                s_lo, s_hi, var="s", singular=s_sing, eps=G.singular_exclusion, transform=math.exp,
            )
            if res[0]:
                return _finish(name, G, *res, (lo, hi), details={"case": "Y2", "gamma": float(gam)})
            tried.append(gam)
        report = PredicateReport(name, False, reason="(Y2) fails for every gamma tried", sampled_on=(lo, hi))
        report.details = {"case": "Y2", "gammas_tried": len(tried)}
        return report
    return PredicateReport(
        name, False, reason="the window straddles w = 1; (Y1) needs w >= 1 and (Y2) needs w <= 1", sampled_on=(lo, hi)
    )


def _power_terms(G):
    """Signed (coefficient, exponent) pairs for exponent-based predicates."""
    if G.family == "PowerSum":
        A = [_constant_value(a, "A_j") for a in G.params["A"]]
        B = [_constant_value(b, "B_j") for b in G.params["B"]]
        return list(zip(A, G.params["p"])), list(zip(B, G.params["q"]))
    raise ConfigError("needs the PowerSum family")


def _pred_2_8(G, window, params):
    name = "Liouville.2-8"
    if G.family != "PowerSum":
        return PredicateReport(name, False, reason=f"needs the PowerSum family, got {G.family}")
    kappa = _kappa(params)
    a_terms, b_terms = _power_terms(G)
    for a, p in a_terms:
        if a < 0:
            return PredicateReport(name, False, a, "A", "A_j >= 0 violated", details={"kappa": kappa})
        if p > kappa:
            return PredicateReport(name, False, p, "p", f"p_j <= 1-(beta/2+1)/alpha = {kappa:.6g} violated", details={"kappa": kappa})
    for b, q in b_terms:
        if b > 0:
            return PredicateReport(name, False, b, "B", "B_j <= 0 violated", details={"kappa": kappa})
        if q < kappa:
            return PredicateReport(name, False, q, "q", f"q_j >= 1-(beta/2+1)/alpha = {kappa:.6g} violated", details={"kappa": kappa})
    return PredicateReport(name, True, details={"kappa": kappa})


def _pred_2_9(G, window, params):
    name = "LiouvilleThmEx-2.9"
    if G.family != "SplitXY" or G.params.get("x_terms") is None:
        return PredicateReport(name, False, reason="needs SplitXY with X given as power terms")
    kappa = _kappa(params)
    for c, e in G.params["x_terms"]:
        if c > 0 and e > kappa:
            return PredicateReport(name, False, e, "p", f"p <= {kappa:.6g} violated", details={"kappa": kappa})
        if c < 0 and e < kappa:
            return PredicateReport(name, False, e, "q", f"q >= {kappa:.6g} violated", details={"kappa": kappa})
    Y, r_exp = G.params["Y"], G.params["r"]
    y0, y1, _ = _y_parts(Y)
    coef = 1.0 - kappa + r_exp - 1.0
    lo, hi = window
    s_sing = Y.nonsmooth_arguments()
    res = _sampled_conditions(
        [("Y' + [(beta/2+1)/alpha + r - 1] Y <= 0", lambda s: -(y1(s) + coef * y0(s)))],
        math.log(lo), math.log(hi), var="s", singular=s_sing, eps=G.singular_exclusion, transform=math.exp,
    )
    # sufficient conditions, reported for reference
    h1 = h2 = False
    if lo >= 1.0 and r_exp >= kappa:
        h1 = _sampled_conditions([("Y<=0", lambda s: -y0(s)), ("Y'<=0", lambda s: -y1(s))], 0.0, math.log(hi), var="s", singular=s_sing)[0]
    if hi <= 1.0 and r_exp <= kappa:
        h2 = _sampled_conditions([("Y>=0", y0), ("Y'<=0", lambda s: -y1(s))], math.log(lo), 0.0, var="s", singular=s_sing)[0]
    return _finish(name, G, *res, window, details={"kappa": kappa, "H1": h1, "H2": h2})


def _pred_coro(G, window, params):
    name = "coroLiouville"
    bad = _w_only(G, name)
    if bad:
        return bad
    alpha = float(params.get("alpha", math.nan))
    if not alpha > 1:
        raise ParameterOrder("coroLiouville needs alpha > 1")
    g, gw, gww = _fn(G, "G"), _fn(G, "G_w"), _fn(G, "G_ww")
    conds = [
        ("G >= 0", g),
        ("G - w G_w >= 0", lambda w: g(w) - w * gw(w)),
        ("G - w G_w + alpha w^2 G_ww >= 0", lambda w: g(w) - w * gw(w) + alpha * w**2 * gww(w)),
    ]
    res = _sampled_conditions(conds, *window, singular=G.singular_set, eps=G.singular_exclusion)
    return _finish(name, G, *res, window)


def _pred_ex(G, window, params):
    name = "LiouvilleThmEx"
    if G.family != "PowerSum":
        return PredicateReport(name, False, reason=f"needs the PowerSum family, got {G.family}")
    a_terms, b_terms = _power_terms(G)
    for a, p in a_terms + b_terms:
        if a < 0:
            return PredicateReport(name, False, a, "A", "A_j >= 0 violated")
        if p > 1:
            return PredicateReport(name, False, p, "p", "p_j <= 1 violated")
    return PredicateReport(name, True)


def _pred_ex_log(G, window, params):
    name = "LiouvilleThmEx-log"
    if G.family != "GammaLog" or G.params["p"] != 1.0:
        return PredicateReport(name, False, reason="needs A w Y(log w) + B w^s (GammaLog with p = 1)")
    C = _constant_value(G.params["C"], "C")
    if C != 0.0:
        return PredicateReport(name, False, C, "C", "the linear term C w must vanish")
    A = _constant_value(G.params["A"], "A")
    B = _constant_value(G.params["B"], "B")
    s_exp = G.params["q"]
    alpha = float(params.get("alpha", math.nan))
    if not alpha > 1:
        raise ParameterOrder("LiouvilleThmEx-log needs alpha > 1")
    if A < 0:
        return PredicateReport(name, False, A, "A", "A >= 0 violated")
    if B < 0:
        return PredicateReport(name, False, B, "B", "B >= 0 violated")
    if s_exp > 1 and B != 0.0:
        return PredicateReport(name, False, s_exp, "s", "s <= 1 violated")
    Y = G.params["Gamma"]
    y0, y1, y2 = _y_parts(Y)
    conds = [("Y >= 0", y0), ("Y' <= 0", lambda s: -y1(s)), ("alpha Y'' + (alpha-1) Y' >= 0", lambda s: alpha * y2(s) + (alpha - 1) * y1(s))]
    lo, hi = window
    res = _sampled_conditions(conds, math.log(lo), math.log(hi), var="s", singular=Y.nonsmooth_arguments(), eps=G.singular_exclusion, transform=math.exp)
    return _finish(name, G, *res, window)


def _pred_ancient(G, window, params):
    name = "ancient"
    bad = _w_only(G, name)
    if bad:
        return bad
    g, gw = _fn(G, "G"), _fn(G, "G_w")
    a = params.get("a")
    conds = [("G' <= 0", lambda w: -gw(w)), ("G - w G' >= 0", lambda w: g(w) - w * gw(w))]
    if a is not None:
        a = float(a)
        if not a > 0:
            raise ConfigError("ancient predicate needs a > 0")
        conds.append(("G >= a", lambda w: g(w) - a))
    res = _sampled_conditions(conds, *window, singular=G.singular_set, eps=G.singular_exclusion)
    report = _finish(name, G, *res, window)
    if report.holds and a is None:
        inf_g = float(np.min(g(_log_samples(*window, 2 * BASE_SAMPLES - 1))))
        report.details["inf_G"] = inf_g
        if not inf_g > 0:
            report.holds = False
            report.reason = "no a > 0 with G >= a on the window"
    return report


PREDICATES = {
    "Liouville log thm": _pred_log,
    "Liouville two thm": _pred_two,
    "Liouville one thm": _pred_one,
    "Liouville.2-8": _pred_2_8,
    "LiouvilleThmEx-2.9": _pred_2_9,
    "coroLiouville": _pred_coro,
    "LiouvilleThmEx": _pred_ex,
    "LiouvilleThmEx-log": _pred_ex_log,
    "ancient": _pred_ancient,
}


def liouville_predicate(G: Nonlinearity, theorem: str, w_window=None, params: dict | None = None) -> PredicateReport:
    """Check a Liouville hypothesis on a dense sample of ``w``.

    Parameters
    ----------
    G : Nonlinearity
    theorem : str
        One of :data:`PREDICATES`.
    w_window : (float, float), optional
        Sampling window; defaults to the positivity window of ``G``.
    params : dict, optional
        ``alpha``, ``beta``, ``gamma``, ``D``, ``a`` as the hypothesis needs.

    Returns
    -------
    PredicateReport
        ``holds`` is true only if no sampled violation occurs at two nested
        densities.
    """
    if theorem not in PREDICATES:
        raise UnknownPredicate(f"unknown predicate {theorem!r}; known: {', '.join(PREDICATES)}")
    window = G.w_window if w_window is None else tuple(float(v) for v in w_window)
    lo, hi = window
    if not (0 < lo < hi) or lo < G.w_window[0] * (1 - 1e-12) or hi > G.w_window[1] * (1 + 1e-12):
        raise DomainViolation(f"window {window} is not inside the positivity window {G.w_window}")
    report = PREDICATES[theorem](G, window, dict(params or {}))
    if report.sampled_on is None:
        report.sampled_on = window
    return report
