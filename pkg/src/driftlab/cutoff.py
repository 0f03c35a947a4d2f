"""Cutoff functions with certified derivative constants.

The spatial cutoff ``zeta(s)`` is built from the quintic smoothstep and is
used through its constants ``c1`` and ``c2``.  The space-time cutoff
``eta(r, t) = rho(r) theta(t)`` uses the C-infinity step
``E(x) = e^{-1/x} / (e^{-1/x} + e^{-1/(1-x)})`` in both variables, since the
bounds ``|eta_r|, |eta_rr| <= c_a eta^a`` must hold for every ``a`` in (0, 1)
and a polynomial step only vanishes to finite order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit

from .errors import BadWindow, ConfigError

__all__ = [
    "SpatialCutoff",
    "SpaceTimeCutoff",
    "CutoffCertificate",
    "quintic_step",
    "smooth_step",
    "build_spatial_cutoff",
    "build_space_time_cutoff",
    "certify",
]

SAFETY = 1.05
VIOLATION_TOL = 1e-9
CONSTANT_DENSITY = 200_001
A_VALUES = (0.5, 0.75)


# -- one-dimensional steps ----------------------------------------------------------------------------


def quintic_step(x, order: int = 0):
    """``S(x) = 6x^5 - 15x^4 + 10x^3`` clamped to [0, 1], and its derivatives."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    if order == 0:
        return x**3 * (10 - 15 * x + 6 * x**2)
    if order == 1:
        return 30 * x**2 * (1 - x) ** 2
    if order == 2:
        return 60 * x * (1 - x) * (1 - 2 * x)
    raise ValueError("order must be 0, 1 or 2")


def _g(x):
    # E = expit(-g) with g = 1/x - 1/(1-x)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        g = 1.0 / x - 1.0 / (1.0 - x)
        g1 = -1.0 / x**2 - 1.0 / (1.0 - x) ** 2
        g2 = 2.0 / x**3 - 2.0 / (1.0 - x) ** 3
    return g, g1, g2


def smooth_step(x, order: int = 0):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1, with all derivatives vanishing at the ends."""
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 1.0, 1.0 if order == 0 else 0.0, 0.0)
    inside = (x > 0) & (x < 1)
    xi = x[inside]
    g, g1, g2 = _g(xi)
    E = expit(-g)
    q = E * (1 - E)
    if order == 0:
        out[inside] = E
    elif order == 1:
        out[inside] = -g1 * q
    elif order == 2:
        out[inside] = -g2 * q + g1**2 * q * (1 - 2 * E)
    else:
        raise ValueError("order must be 0, 1 or 2")
    return out


def _smooth_step_ratio(x, a: float, order: int):
    """``|E^(order)| / E^a`` computed in log space so it stays finite where E underflows."""
    g, g1, g2 = _g(x)
    logE = -np.logaddexp(0.0, g)
    one_minus = expit(g)
    base = np.exp((1 - a) * logE) * one_minus
    if order == 1:
        return base * np.abs(g1)
    E = np.exp(logE)
    return base * np.abs(-g2 + g1**2 * (1 - 2 * E))


# -- spatial cutoff --------------------------------------------------------------------------------------


@dataclass(frozen=True)
class SpatialCutoff:
    """Cutoff ``zeta(s)`` in the scaled variable ``s = r / R``.

    ``value``, ``d1`` and ``d2`` are callables in ``s``; ``c1`` and ``c2`` are
    the certified constants (inflated by 5%).
    """

    R: float
    c1: float
    c2: float
    value: Callable = field(repr=False)
    d1: Callable = field(repr=False)
    d2: Callable = field(repr=False)
    label: str = "quintic"

    def __call__(self, r):
        return self.value(np.asarray(r, dtype=float) / self.R)

    @classmethod
    def from_functions(cls, value, d1, d2, R: float = 1.0, label: str = "custom") -> "SpatialCutoff":
        """Wrap arbitrary profile callables, deriving constants by sampling."""
        c1, c2 = _spatial_constants(value, d1, d2, CONSTANT_DENSITY)
        return cls(R=float(R), c1=SAFETY * c1, c2=SAFETY * c2, value=value, d1=d1, d2=d2, label=label)


def _zeta(s):
    s = np.asarray(s, dtype=float)
    return np.where(s <= 1.0, 1.0, np.where(s >= 2.0, 0.0, quintic_step(2.0 - s)))


def _zeta_d1(s):
    s = np.asarray(s, dtype=float)
    inside = (s > 1.0) & (s < 2.0)
    return np.where(inside, -quintic_step(2.0 - s, 1), 0.0)


def _zeta_d2(s):
    s = np.asarray(s, dtype=float)
    inside = (s > 1.0) & (s < 2.0)
    return np.where(inside, quintic_step(2.0 - s, 2), 0.0)


def _spatial_constants(value, d1, d2, density: int):
    s = np.linspace(1.0, 2.0, density)
    z = value(s)
    dz = d1(s)
    ddz = d2(s)
    pos = z > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(pos, -dz / np.sqrt(np.where(pos, z, 1.0)), 0.0)
    c1 = float(np.max(ratio))
    c2 = float(np.max(np.maximum(-ddz, 0.0)))
    return c1, c2


def build_spatial_cutoff(R: float = 1.0, density: int = CONSTANT_DENSITY) -> SpatialCutoff:
    """Quintic-smoothstep cutoff: 1 on [0, 1], ``S(2 - s)`` on [1, 2], 0 beyond.

    ``density`` is the number of samples used to derive ``c1`` and ``c2``.
    """
    if not R > 0:
        raise ConfigError("R must be positive")
    c1, c2 = _spatial_constants(_zeta, _zeta_d1, _zeta_d2, int(density))
    return SpatialCutoff(R=float(R), c1=SAFETY * c1, c2=SAFETY * c2, value=_zeta, d1=_zeta_d1, d2=_zeta_d2)


# -- space-time cutoff ------------------------------------------------------------------------------------


@dataclass(frozen=True)
class SpaceTimeCutoff:
    """``eta(r, t) = rho(r) theta(t)`` on ``[0, inf) x [t0 - T, t0]``.

    ``rho`` is 1 on [0, R/2] and 0 beyond R; ``theta`` vanishes at
    ``t0 - T`` and equals 1 on ``[tau, t0]``.  ``c`` bounds the time
    derivative and ``c_a[a]`` the radial derivatives for each certified ``a``.
    """

    R: float
    T: float
    t0: float
    tau: float
    c: float
    c_a: dict

    @property
    def ramp(self) -> float:
        return self.tau - self.t0 + self.T

    def rho(self, r, order: int = 0):
        x = 2.0 - 2.0 * np.asarray(r, dtype=float) / self.R
        return (-2.0 / self.R) ** order * smooth_step(x, order)

    def theta(self, t, order: int = 0):
        x = (np.asarray(t, dtype=float) - (self.t0 - self.T)) / self.ramp
        return smooth_step(x, order) / self.ramp**order

    def __call__(self, r, t):
        return self.rho(r) * self.theta(t)

    def eta_r(self, r, t):
        return self.rho(r, 1) * self.theta(t)

    def eta_rr(self, r, t):
        return self.rho(r, 2) * self.theta(t)

    def eta_t(self, r, t):
        return self.rho(r) * self.theta(t, 1)


def _space_time_constants(density: int):
    x = np.linspace(0.0, 1.0, density)[1:-1]
    g, g1, _ = _g(x)
    logE = -np.logaddexp(0.0, g)
    c = float(np.max(np.exp(0.5 * logE) * expit(g) * np.abs(g1)))
    c_a = {}
    for a in A_VALUES:
        r1 = 2.0 * _smooth_step_ratio(x, a, 1)
        r2 = 4.0 * _smooth_step_ratio(x, a, 2)
        c_a[a] = float(max(np.max(r1), np.max(r2)))
    return c, c_a


def build_space_time_cutoff(R: float, T: float, t0: float, tau: float, density: int = CONSTANT_DENSITY) -> SpaceTimeCutoff:
    """Tensor-product cutoff with certified ``c`` and ``c_a`` for ``a`` in {1/2, 3/4}."""
    if not R >= 2:
        raise ConfigError("the space-time cutoff needs R >= 2")
    if not T > 0:
        raise ConfigError("T must be positive")
    if not (t0 - T < tau <= t0):
        raise BadWindow(f"tau={tau} must lie in (t0 - T, t0] = ({t0 - T}, {t0}]")
    c, c_a = _space_time_constants(int(density))
    return SpaceTimeCutoff(
        R=float(R), T=float(T), t0=float(t0), tau=float(tau),
        c=SAFETY * c, c_a={a: SAFETY * v for a, v in c_a.items()},
    )


# -- certification --------------------------------------------------------------------------------------------


@dataclass
class CutoffCertificate:
    """Per-clause verdicts of a sampled lemma check."""

    kind: str
    flags: dict
    max_violation: dict
    constants: dict
    density: int

    @property
    def valid(self) -> bool:
        return all(self.flags.values())

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "constants": self.constants,
            "flags": self.flags,
            "max_violation": self.max_violation,
            "density": self.density,
            "valid": self.valid,
        }


def _pos_max(v) -> float:
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        return 0.0
    if not np.all(np.isfinite(v)):
        return float("inf")
    return float(max(0.0, np.max(v)))


def _certify_spatial(cut: SpatialCutoff, density: int) -> CutoffCertificate:
    s = np.unique(np.concatenate([np.linspace(0.0, 3.0, density), [1.0, 2.0]]))
    z, dz, ddz = cut.value(s), cut.d1(s), cut.d2(s)
    plateau = s <= 1.0
    support = s >= 2.0
    pos = z > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(pos, dz / np.sqrt(np.where(pos, z, 1.0)), 0.0)
    viol = {
        "plateau": _pos_max(np.abs(z[plateau] - 1.0)),
        "support": _pos_max(np.abs(z[support])),
        "range": max(_pos_max(-z), _pos_max(z - 1.0)),
        "monotone": max(_pos_max(dz), _pos_max(np.diff(z))),
        "gradient_bound": max(_pos_max(-cut.c1 - ratio), _pos_max(ratio)),
        "hessian_bound": _pos_max(-cut.c2 - ddz),
    }
    flags = {k: v <= VIOLATION_TOL for k, v in viol.items()}
    return CutoffCertificate("spatial", flags, viol, {"c1": cut.c1, "c2": cut.c2}, density)


def _certify_space_time(cut: SpaceTimeCutoff, density: int) -> CutoffCertificate:
    nr = density
    nt = max(1000, density // 10)
    r = np.unique(np.concatenate([np.linspace(0.0, 1.5 * cut.R, nr), [cut.R / 2, cut.R]]))
    t = np.unique(np.concatenate([np.linspace(cut.t0 - cut.T, cut.t0, nt), [cut.tau]]))
    rho, rho1, rho2 = cut.rho(r), cut.rho(r, 1), cut.rho(r, 2)
    viol = dict.fromkeys(
        ["support", "range", "plateau", "flat_core", "time_derivative", "initial_zero"]
        + [f"radial_bound_a={a:g}" for a in cut.c_a],
        0.0,
    )
    outside = r > cut.R
    core = r <= cut.R / 2
    # eta is a product, so evaluate in blocks of time levels
    block = max(1, 2_000_000 // r.size)
    for i in range(0, t.size, block):
        tt = t[i:i + block]
        th, th1 = cut.theta(tt), cut.theta(tt, 1)
        eta = th[:, None] * rho[None, :]
        eta_t = th1[:, None] * rho[None, :]
        eta_r = th[:, None] * rho1[None, :]
        eta_rr = th[:, None] * rho2[None, :]
        viol["support"] = max(viol["support"], _pos_max(np.abs(eta[:, outside])))
        viol["range"] = max(viol["range"], _pos_max(-eta), _pos_max(eta - 1.0))
        late = tt >= cut.tau
        if late.any():
            viol["plateau"] = max(viol["plateau"], _pos_max(np.abs(eta[np.ix_(late, core)] - 1.0)))
        viol["flat_core"] = max(viol["flat_core"], _pos_max(np.abs(eta_r[:, core])))
        viol["time_derivative"] = max(
            viol["time_derivative"], _pos_max(np.abs(eta_t) - cut.c * np.sqrt(eta) / cut.ramp)
        )
        for a, ca in cut.c_a.items():
            key = f"radial_bound_a={a:g}"
            ea = eta**a
            viol[key] = max(
                viol[key],
                _pos_max(eta_r),
                _pos_max(-ca * ea / cut.R - eta_r),
                _pos_max(np.abs(eta_rr) - ca * ea / cut.R**2),
            )
    viol["initial_zero"] = _pos_max(np.abs(cut(r, cut.t0 - cut.T)))
    flags = {k: v <= VIOLATION_TOL for k, v in viol.items()}
    constants = {"c": cut.c, "c_a": {f"{a:g}": v for a, v in cut.c_a.items()}}
    return CutoffCertificate("space_time", flags, viol, constants, density)


def certify(cutoff, density: int = 10_000) -> CutoffCertificate:
    """Evaluate every lemma clause on a sample grid and report the worst violation."""
    density = int(density)
    if density < 1000:
        raise ConfigError("certification needs density >= 1000")
    if isinstance(cutoff, SpatialCutoff):
        return _certify_spatial(cutoff, density)
    if isinstance(cutoff, SpaceTimeCutoff):
        return _certify_space_time(cutoff, density)
    raise ConfigError(f"cannot certify {type(cutoff).__name__}")
