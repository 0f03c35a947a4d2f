"""Rotationally symmetric smooth metric measure spaces.

A model space is the warped product ``dr^2 + psi(r)^2 g_S`` on a ball of
radius ``R_max`` around a pole, weighted by ``exp(-phi(r))``.  For radial
functions every tensor reduces to a radial and a tangential eigenvalue, so
curvature, the Witten Laplacian and comparison quantities are computed
exactly from the profiles ``psi`` and ``phi``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import eigh_tridiagonal

from . import expr as ex
from ._validation import check_grid, check_interval, check_positive, parse_extended
from .errors import (
    ConfigError,
    DimensionConvention,
    GridTooCoarse,
    HypothesisUnverified,
    InvalidWarp,
    NeedFiniteM,
    OutOfDomain,
    ParseError,
)

__all__ = [
    "RadialProfile",
    "ModelSpace",
    "CurvatureSample",
    "CurvatureBound",
    "make_profile",
    "make_model_space",
    "space_from_config",
    "shipped_spaces",
    "ricci_eigenvalues",
    "curvature_lower_bound",
    "radial_derivatives",
    "weighted_laplacian_radial",
    "weighted_laplacian_exact",
    "divergence_operator",
    "gamma_delta_phi",
    "laplacian_comparison_margin",
    "sample_region",
]

WARP_TOL = 1e-10
REFINE_TOL = 1e-6


# -- profiles -------------------------------------------------------------------------------------


@dataclass(frozen=True)
class RadialProfile:
    """A scalar function of ``r`` with exact derivatives.

    Parameters
    ----------
    expression : Expr
        Expression tree in the single variable ``r``.
    label : str
        Human readable source (preset name or expression text).
    """

    expression: ex.Expr
    label: str = ""

    def __post_init__(self):
        extra = self.expression.variables() - {"r"}
        if extra:
            raise ParseError(f"profile may only use the variable r, found {sorted(extra)}")
        if not self.label:
            object.__setattr__(self, "label", str(self.expression))

    def derivative_expr(self, order: int = 1) -> ex.Expr:
        return self.expression.diff("r", order)

    def __call__(self, r, order: int = 0):
        return self.derivative_expr(order).compile(("r",))(r)

    def d1(self, r):
        return self(r, 1)

    def d2(self, r):
        return self(r, 2)

    @cached_property
    def is_constant(self) -> bool:
        return isinstance(self.derivative_expr(1), ex.Const) and self.derivative_expr(1).value == 0.0

    def __str__(self):
        return self.label


_PRESET = re.compile(r"^\s*([a-z_]+)\s*(?:\[\s*([^\]]+)\s*\])?\s*$")


def make_profile(spec, role: str = "warp") -> RadialProfile:
    """Build a profile from a preset name, an expression string, a number or an Expr.

    Presets are ``euclidean`` (r), ``hyperbolic[k]`` (sinh(sqrt(k) r)/sqrt(k)),
    ``sphere[k]`` (sin(sqrt(k) r)/sqrt(k)), ``gaussian[a]`` (a r^2/2) and
    ``zero``.  The bracketed parameter defaults to 1.
    """
    if isinstance(spec, RadialProfile):
        return spec
    if isinstance(spec, ex.Expr):
        return RadialProfile(spec)
    if isinstance(spec, (int, float)):
        return RadialProfile(ex.const(spec), label=repr(float(spec)))
    if not isinstance(spec, str):
        raise ConfigError(f"cannot build a {role} profile from {type(spec).__name__}")
    m = _PRESET.match(spec)
    if m and m.group(1) in ("euclidean", "hyperbolic", "sphere", "gaussian", "zero"):
        name, arg = m.group(1), m.group(2)
        p = 1.0 if arg is None else float(ex.parse(arg, variables=()).compile(())())
        r = ex.var("r")
        if name == "euclidean":
            return RadialProfile(r, "euclidean")
        if name == "zero":
            return RadialProfile(ex.const(0.0), "zero")
        if name == "gaussian":
            return RadialProfile(ex.const(p / 2.0) * r**2, f"gaussian[{p:g}]")
        if p <= 0:
            raise InvalidWarp(f"{name}[k] needs k > 0, got {p}")
        s = math.sqrt(p)
        f = "sinh" if name == "hyperbolic" else "sin"
        if p == 1.0:
            e = ex.func(f, r)
        else:
            e = ex.func(f, ex.const(s) * r) / s
        return RadialProfile(e, f"{name}[{p:g}]")
    return RadialProfile(ex.parse(spec, variables=("r",)), spec.strip())


# -- the space ---------------------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelSpace:
    """Warped product ``dr^2 + psi^2 g_S`` with weight ``exp(-phi)``.

    Use :func:`make_model_space` to build a validated instance.
    """

    n: int
    m: float
    warp: RadialProfile
    potential: RadialProfile
    R_max: float
    name: str = field(default="")

    def psi(self, r, order: int = 0):
        return self.warp(r, order)

    def phi(self, r, order: int = 0):
        return self.potential(r, order)

    @cached_property
    def drift_expr(self) -> ex.Expr:
        """Coefficient of u' in the radial Witten Laplacian (singular at r=0)."""
        psi = self.warp.expression
        return (self.n - 1) * psi.diff("r") / psi - self.potential.expression.diff("r")

    def drift(self, r):
        return self.drift_expr.compile(("r",))(r)

    def density(self, r):
        """Weighted measure density ``exp(-phi) psi^(n-1)``."""
        r = np.asarray(r, dtype=float)
        with np.errstate(all="ignore"):
            return np.exp(-self.phi(r)) * self.psi(r) ** (self.n - 1)

    def laplacian_expr(self, u) -> ex.Expr:
        """Symbolic radial Witten Laplacian of ``u(r)`` (valid for r > 0)."""
        u = ex.as_expr(u)
        return u.diff("r", 2) + self.drift_expr * u.diff("r")

    @property
    def max_drift(self) -> float:
        """Largest |phi'| on the domain (used by the time-step policy)."""
        rr = np.linspace(0.0, self.R_max, 2049)
        return float(np.max(np.abs(self.phi(rr, 1))))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "m": "inf" if math.isinf(self.m) else self.m,
            "warp": self.warp.label,
            "potential": self.potential.label,
            "R_max": self.R_max,
        }


def make_model_space(n, m, warp, potential="zero", R_max=10.0, name: str = "") -> ModelSpace:
    """Validate and build a model space.

    Parameters
    ----------
    n : int
        Manifold dimension, at least 2.
    m : int, float or "inf"
        Synthetic dimension, ``m >= n`` or infinite.
    warp, potential : str, number, Expr or RadialProfile
        Profiles for ``psi`` and ``phi``.
    R_max : float
        Radius of the modelled ball.

    Raises
    ------
    InvalidWarp
        ``psi(0) != 0``, ``psi'(0) != 1`` or ``psi <= 0`` inside the domain.
    DimensionConvention
        ``m == n`` with a non-constant potential, or ``m < n``.
    ParseError
        A profile expression does not parse.
    """
    if isinstance(n, bool) or int(n) != n or int(n) < 2:
        raise ConfigError(f"dimension n must be an integer >= 2, got {n!r}")
    n = int(n)
    m = parse_extended(m)
    if m < n:
        raise DimensionConvention(f"synthetic dimension m={m} must be >= n={n}")
    R_max = check_positive(R_max, "R_max")
    wp = make_profile(warp, "warp")
    pp = make_profile(potential, "potential")

    with np.errstate(all="ignore"):
        psi0 = float(wp(0.0))
        dpsi0 = float(wp(0.0, 1))
    if not (abs(psi0) <= WARP_TOL and abs(dpsi0 - 1.0) <= WARP_TOL):
        raise InvalidWarp(f"warp must satisfy psi(0)=0 and psi'(0)=1; got psi(0)={psi0}, psi'(0)={dpsi0}")
    rr = np.linspace(0.0, R_max, 4097)[1:]
    vals = wp(rr)
    bad = ~(vals > 0) | ~np.isfinite(vals)
    if np.any(bad):
        raise InvalidWarp(f"warp is not positive on (0, R_max]; fails at r={rr[np.argmax(bad)]:.6g}")
    phis = pp(np.linspace(0.0, R_max, 4097))
    if not np.all(np.isfinite(phis)):
        raise InvalidWarp("potential is not finite on [0, R_max]")
    if m == n and not pp.is_constant:
        dphi = pp(np.linspace(0.0, R_max, 4097), 1)
        if np.max(np.abs(dphi)) > 1e-12:
            raise DimensionConvention("m = n requires a constant potential")
    if not name:
        name = f"{wp.label}|{pp.label}|n={n}|m={'inf' if math.isinf(m) else f'{m:g}'}"
    return ModelSpace(n=n, m=m, warp=wp, potential=pp, R_max=R_max, name=name)


def space_from_config(cfg: dict) -> ModelSpace:
    """Build a space from a scenario ``space`` block."""
    if not isinstance(cfg, dict):
        raise ConfigError("space block must be an object")
    try:
        return make_model_space(
            n=cfg.get("n", 3),
            m=cfg.get("m", cfg.get("n", 3)),
            warp=cfg.get("warp", "euclidean"),
            potential=cfg.get("potential", "zero"),
            R_max=cfg.get("R_max", 10.0),
            name=cfg.get("name", ""),
        )
    except ParseError:
        raise
    except (TypeError, KeyError) as exc:
        raise ConfigError(f"bad space block: {exc}") from exc


def shipped_spaces() -> dict:
    """The model spaces used throughout the bundled scenarios and tests."""
    return {
        "euclidean3": make_model_space(3, 3, "euclidean", "zero", 10.0, "euclidean3"),
        "hyperbolic3": make_model_space(3, 3, "hyperbolic", "zero", 10.0, "hyperbolic3"),
        "sphere3": make_model_space(3, 3, "sphere", "zero", 3.0, "sphere3"),
        "gaussian3": make_model_space(3, "inf", "euclidean", "gaussian[1]", 10.0, "gaussian3"),
        "gaussian3_m5": make_model_space(3, 5, "euclidean", "gaussian[1]", 10.0, "gaussian3_m5"),
    }


# -- curvature -------------------------------------------------------------------------------------------


@dataclass(frozen=True)
class CurvatureSample:
    r: float
    ric_radial: float
    ric_tangential: float
    ric_phi_radial: float
    ric_phi_tangential: float
    ric_phi_m_radial: float
    ric_phi_m_tangential: float


def _curvature_arrays(space: ModelSpace, r, m=None):
    r = np.asarray(r, dtype=float)
    n = space.n
    m = space.m if m is None else m
    with np.errstate(all="ignore"):
        psi, dpsi, ddpsi = space.psi(r), space.psi(r, 1), space.psi(r, 2)
        dphi, ddphi = space.phi(r, 1), space.phi(r, 2)
        ric_rad = -(n - 1) * ddpsi / psi
        ric_tan = -ddpsi / psi + (n - 2) * (1.0 - dpsi**2) / psi**2
    phi_rad = ric_rad + ddphi
    phi_tan = ric_tan + dphi * dpsi / psi
    if math.isinf(m):
        m_rad = phi_rad
    elif m == n:
        # constant potential by convention: no correction term
        m_rad = phi_rad
    else:
        m_rad = phi_rad - dphi**2 / (m - n)
    return ric_rad, ric_tan, phi_rad, phi_tan, m_rad, phi_tan


def ricci_eigenvalues(space: ModelSpace, r: float) -> CurvatureSample:
    """Radial and tangential eigenvalues of Ric, Ric_phi and Ric_phi^m at radius r."""
    r = float(r)
    if not (0.0 < r <= space.R_max * (1 + 1e-12)):
        raise OutOfDomain(f"r={r} outside (0, {space.R_max}]")
    vals = _curvature_arrays(space, r)
    return CurvatureSample(r, *(float(v) for v in vals))


@dataclass(frozen=True)
class CurvatureBound:
    """Smallest admissible lower-bound constant k over a sampled region."""

    k: float
    flavor: str
    region: tuple
    m: float
    min_eigenvalue: float
    argmin: float
    resolution: float
    samples: int

    def __float__(self):
        return self.k


def sample_region(lo: float, hi: float, R_max: float, level: int) -> np.ndarray:
    """Lattice points ``j * R_max / 2^level`` in (lo, hi] plus the endpoints, excluding r = 0."""
    h = R_max / 2**level
    j0 = max(1, math.ceil(lo / h))
    j1 = math.floor(hi / h)
    pts = np.arange(j0, j1 + 1, dtype=float) * h
    extra = [x for x in (lo, hi) if x > 0]
    pts = np.unique(np.concatenate([pts, extra]))
    if pts.size == 0:
        pts = np.array([max(hi, h * 1e-3)])
    return pts


_FLAVORS = {"ric_phi": "Ric_phi", "ric_φ": "Ric_phi", "ric_phi_m": "Ric_phi^m", "ric_φ^m": "Ric_phi^m", "ric_phi^m": "Ric_phi^m"}


def _normalize_flavor(flavor: str) -> str:
    key = str(flavor).strip().lower().replace(" ", "")
    if key not in _FLAVORS:
        raise ConfigError(f"unknown curvature flavor {flavor!r}; use 'Ric_phi' or 'Ric_phi^m'")
    return _FLAVORS[key]


def curvature_lower_bound(space: ModelSpace, flavor: str = "Ric_phi", region=None, m=None) -> CurvatureBound:
    """Smallest k >= 0 with ``min eig >= -(n-1) k`` (or ``-(m-1) k``) on a region.

    The region is sampled on a dyadic lattice that is refined until the
    minimum eigenvalue changes by less than ``1e-6`` relative.
    """
    flavor = _normalize_flavor(flavor)
    lo, hi = check_interval((0.0, space.R_max) if region is None else region, 0.0, space.R_max)
    m_eff = space.m if m is None else parse_extended(m)
    if flavor == "Ric_phi^m":
        if math.isinf(m_eff):
            raise NeedFiniteM("the Ric_phi^m bound needs a finite synthetic dimension m")
        if m_eff < space.n or (m_eff == space.n and not space.potential.is_constant):
            raise HypothesisUnverified(f"Ric_phi^m is undefined for m={m_eff:g} on this space")
        denom = m_eff - 1
    else:
        denom = space.n - 1

    def min_eig(level):
        pts = sample_region(lo, hi, space.R_max, level)
        vals = _curvature_arrays(space, pts, m_eff)
        rad, tan = (vals[4], vals[5]) if flavor == "Ric_phi^m" else (vals[2], vals[3])
        both = np.minimum(rad, tan)
        if not np.all(np.isfinite(both)):
            raise OutOfDomain("curvature is not finite on the sampled region")
        i = int(np.argmin(both))
        return float(both[i]), float(pts[i]), pts.size

    level = 10
    prev, arg, count = min_eig(level)
    while level < 18:
        level += 1
        cur, arg, count = min_eig(level)
        if abs(cur - prev) <= REFINE_TOL * max(1.0, abs(cur)):
            prev = cur
            break
        prev = cur
    k = max(0.0, -prev / denom)
    return CurvatureBound(
        k=k,
        flavor=flavor,
        region=(lo, hi),
        m=m_eff,
        min_eigenvalue=prev,
        argmin=arg,
        resolution=space.R_max / 2**level,
        samples=count,
    )


# -- discrete operators ------------------------------------------------------------------------------------------


def _fd_weights(offsets, deriv: int) -> np.ndarray:
    offsets = np.asarray(offsets, dtype=float)
    k = offsets.size
    A = np.vander(offsets, k, increasing=True).T
    b = np.zeros(k)
    b[deriv] = math.factorial(deriv)
    return np.linalg.solve(A, b)


def radial_derivatives(u, dr: float, order: int = 2, parity: str = "even", pole: bool = True):
    """First and second radial derivatives on a uniform grid.

    Parameters
    ----------
    u : array_like
        Samples at ``r_i = r_0 + i dr``.
    dr : float
        Grid spacing.
    order : {2, 4}
        Accuracy order of the central interior stencils.
    parity : {"even", "odd"}
        Reflection used for ghost nodes when ``pole`` is true.
    pole : bool
        Whether the first node is the pole ``r = 0``.  Otherwise one-sided
        stencils are used on the left as well.

    Returns
    -------
    (ndarray, ndarray)
        ``u'`` and ``u''``.
    """
    if order not in (2, 4):
        raise ConfigError("stencil order must be 2 or 4")
    u = np.asarray(u, dtype=float)
    N = u.size
    half = order // 2
    if N < max(4, order + 2):
        raise GridTooCoarse(f"need at least {max(4, order + 2)} nodes for order {order}, got {N}")
    sign = 1.0 if parity == "even" else -1.0
    if pole:
        left = sign * u[half:0:-1]
    else:
        left = np.zeros(half)
    ext = np.concatenate([left, u, np.zeros(half)])
    if order == 2:
        d1 = (ext[2:] - ext[:-2]) / (2 * dr)
        d2 = (ext[2:] - 2 * ext[1:-1] + ext[:-2]) / dr**2
    else:
        d1 = (-ext[4:] + 8 * ext[3:-1] - 8 * ext[1:-3] + ext[:-4]) / (12 * dr)
        d2 = (-ext[4:] + 16 * ext[3:-1] - 30 * ext[2:-2] + 16 * ext[1:-3] - ext[:-4]) / (12 * dr**2)
    # one-sided closures
    edges = [("right", N - 1 - j) for j in range(half)]
    if not pole:
        edges += [("left", j) for j in range(half)]
    for side, i in edges:
        for deriv, target in ((1, d1), (2, d2)):
            width = order + deriv
            if side == "right":
                offs = np.arange(-(width - 1) + (N - 1 - i), (N - 1 - i) + 1)
            else:
                offs = np.arange(-i, width - i)
            w = _fd_weights(offs, deriv)
            target[i] = float(np.dot(w, u[i + offs])) / dr**deriv
    return d1, d2


def weighted_laplacian_radial(space: ModelSpace, u, r, order: int = 2) -> np.ndarray:
    """Discrete ``Delta_phi u = u'' + ((n-1) psi'/psi - phi') u'`` on a uniform grid.

    At ``r = 0`` the symmetric limit ``n u''(0)`` is used.
    """
    r = np.asarray(r, dtype=float)
    u = np.asarray(u, dtype=float)
    if r.size < 4 or u.size < 4:
        raise GridTooCoarse(f"need at least 4 radial nodes, got {min(r.size, u.size)}")
    if u.shape != r.shape:
        raise ConfigError("field and grid shapes differ")
    dr = check_grid(r)
    pole = abs(r[0]) < 1e-14
    d1, d2 = radial_derivatives(u, dr, order=order, pole=pole)
    out = np.empty_like(u)
    if pole:
        out[0] = space.n * d2[0]
        out[1:] = d2[1:] + space.drift(r[1:]) * d1[1:]
    else:
        out[:] = d2 + space.drift(r) * d1
    return out


def weighted_laplacian_exact(space: ModelSpace, u, r) -> np.ndarray:
    """Exact Witten Laplacian of a radial expression, with the pole rule at 0."""
    u = ex.as_expr(u)
    r = np.asarray(r, dtype=float)
    lap = space.laplacian_expr(u).compile(("r",))
    out = np.asarray(lap(r), dtype=float)
    at_pole = r == 0.0
    if np.any(at_pole):
        out = np.array(out, dtype=float, copy=True)
        out[at_pole] = space.n * u.diff("r", 2).compile(("r",))(0.0)
    return out


@dataclass(frozen=True)
class DivergenceOperator:
    """Finite-volume form of ``e^phi div(e^-phi grad .)`` with Neumann ends.

    ``apply(w)`` returns ``(F_{i+1/2} - F_{i-1/2}) / V_i`` where ``V_i`` is the
    weighted volume of cell ``i`` and ``F`` the weighted face flux.
    """

    r: np.ndarray
    volumes: np.ndarray
    face_weights: np.ndarray  # rho(r_{i+1/2}) / dr, length N-1

    def apply(self, w: np.ndarray) -> np.ndarray:
        flux = self.face_weights * np.diff(w)
        out = np.zeros_like(w)
        out[:-1] += flux
        out[1:] -= flux
        return out / self.volumes

    def mass(self, w: np.ndarray) -> float:
        return float(np.dot(self.volumes, w))

    def spectral_radius(self) -> float:
        """Largest |eigenvalue| of the operator (it is similar to a symmetric matrix)."""
        s = 1.0 / np.sqrt(self.volumes)
        diag = np.zeros_like(self.volumes)
        diag[:-1] -= self.face_weights
        diag[1:] -= self.face_weights
        diag *= s * s
        off = self.face_weights * s[:-1] * s[1:]
        lo = eigh_tridiagonal(diag, off, eigvals_only=True, select="i", select_range=(0, 0))
        return float(abs(lo[0]))


def divergence_operator(space: ModelSpace, r) -> DivergenceOperator:
    r = np.asarray(r, dtype=float)
    dr = check_grid(r)
    if abs(r[0]) > 1e-14:
        raise ConfigError("the finite-volume operator needs a grid starting at the pole")
    nodes, weights = np.polynomial.legendre.leggauss(6)
    edges = np.concatenate([[0.0], 0.5 * (r[:-1] + r[1:]), [r[-1]]])
    a, b = edges[:-1], edges[1:]
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    pts = mid[:, None] + half[:, None] * nodes[None, :]
    vol = (space.density(pts) * weights[None, :]).sum(axis=1) * half
    faces = space.density(edges[1:-1]) / dr
    if np.any(~(vol > 0)):
        raise InvalidWarp("weighted cell volume is not positive")
    return DivergenceOperator(r=r, volumes=vol, face_weights=faces)


# -- comparison quantities ---------------------------------------------------------------------------------------


def gamma_delta_phi(space: ModelSpace) -> float:
    """``Delta_phi r`` on the unit sphere about the pole."""
    if space.R_max < 1.0:
        raise OutOfDomain("gamma_delta_phi needs R_max >= 1")
    return float(space.drift(1.0))


def _comparison_bound(k: float, m: float, r: np.ndarray) -> np.ndarray:
    if k == 0.0:
        return (m - 1) / r
    s = math.sqrt(k)
    return (m - 1) * s / np.tanh(s * r)


def laplacian_comparison_margin(space: ModelSpace, k: float, m, region=None) -> float:
    """Minimum of ``(m-1) sqrt(k) coth(sqrt(k) r) - Delta_phi r`` over a region.

    ``k`` must be at least the certified bound for ``Ric_phi^m`` on the
    region, otherwise :class:`HypothesisUnverified` is raised.
    """
    m = parse_extended(m)
    if math.isinf(m):
        raise NeedFiniteM("Laplacian comparison needs a finite m")
    if m < space.n or (m == space.n and not space.potential.is_constant):
        raise HypothesisUnverified(
            f"m={m:g} is not admissible on this space (m = n requires a constant potential)"
        )
    lo, hi = check_interval((0.0, space.R_max) if region is None else region, 0.0, space.R_max)
    cert = curvature_lower_bound(space, "Ric_phi^m", (0.0, hi), m=m)
    k = float(k)
    if k < 0 or k < cert.k - 1e-9 * max(1.0, cert.k):
        raise HypothesisUnverified(f"k={k} is below the certified bound {cert.k:.6g} for Ric_phi^m")
    level = 12
    prev = None
    while True:
        pts = sample_region(lo, hi, space.R_max, level)
        margin = float(np.min(_comparison_bound(k, m, pts) - space.drift(pts)))
        if prev is not None and abs(margin - prev) <= REFINE_TOL * max(1.0, abs(margin)):
            return margin
        if level >= 16:
            return margin
        prev = margin
        level += 1
