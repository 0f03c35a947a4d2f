"""Grids, space-time cylinders and solution fields."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .errors import BoundViolated, ConfigError, NonPositiveSolution, OutOfDomain
from .geometry import ModelSpace, radial_derivatives, weighted_laplacian_radial

__all__ = ["Grid", "Cylinder", "SolutionField"]


@dataclass(frozen=True)
class Grid:
    """Radial grid specification with time-step policy.

    Parameters
    ----------
    dr : float
        Radial spacing.
    R_max : float
        Verification radius; solvers extend the domain to ``2 R_max + pad``.
    nt : int
        Number of stored time levels after the initial one.
    cfl : float
        Safety factor in ``(0, 0.5]``.
    """

    dr: float
    R_max: float
    nt: int = 20
    cfl: float = 0.4

    def __post_init__(self):
        if not self.dr > 0:
            raise ConfigError("grid spacing dr must be positive")
        if not self.R_max > 0:
            raise ConfigError("grid radius must be positive")
        if int(self.nt) != self.nt or self.nt < 1:
            raise ConfigError("nt must be a positive integer")

    @property
    def r(self) -> np.ndarray:
        count = int(round(self.R_max / self.dr))
        return np.arange(count + 1) * self.dr


@dataclass(frozen=True)
class Cylinder:
    """Space-time verification set ``[r_lo, r_hi] x [t_lo, t_hi]``.

    ``flavor`` is ``"Q"`` for ``B_R x [t0-T, t0]`` and ``"H"`` for the
    doubled-radius cylinder used by the Li-Yau estimate.  Verification always
    excludes ``t <= t_origin`` of the solution (the open end of the window).
    """

    r_lo: float
    r_hi: float
    t_lo: float
    t_hi: float
    flavor: str = "Q"

    def __post_init__(self):
        if not (0 <= self.r_lo <= self.r_hi):
            raise ConfigError("cylinder needs 0 <= r_lo <= r_hi")
        if not self.t_lo <= self.t_hi:
            raise ConfigError("cylinder needs t_lo <= t_hi")

    @classmethod
    def ball(cls, R: float, t_lo: float, t_hi: float, flavor: str = "Q") -> "Cylinder":
        return cls(0.0, float(R), float(t_lo), float(t_hi), flavor)

    def scaled(self, factor: float) -> "Cylinder":
        return replace(self, r_lo=self.r_lo * factor, r_hi=self.r_hi * factor)

    def select(self, sol: "SolutionField", include_origin: bool = False):
        """Return ``(level_indices, radial_mask)`` of nodes inside the cylinder."""
        tol = 1e-9 * max(1.0, abs(self.t_hi))
        if self.r_hi > sol.r[-1] * (1 + 1e-12):
            raise OutOfDomain(f"cylinder radius {self.r_hi} exceeds the grid radius {sol.r[-1]}")
        rmask = (sol.r >= self.r_lo - 1e-12) & (sol.r <= self.r_hi + 1e-12)
        tmask = (sol.t >= self.t_lo - tol) & (sol.t <= self.t_hi + tol)
        if not include_origin:
            tmask &= sol.t > sol.t_origin + tol
        levels = np.flatnonzero(tmask)
        return levels, rmask

    def to_dict(self) -> dict:
        return {"r": [self.r_lo, self.r_hi], "t": [self.t_lo, self.t_hi], "flavor": self.flavor}


def _freeze(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SolutionField:
    """Space-time samples of a positive radial solution.

    Attributes
    ----------
    r : ndarray, shape (N,)
        Radial nodes, starting at the pole.
    t : ndarray, shape (L,)
        Stored times.
    w : ndarray, shape (L, N)
        Solution values.
    dwdt : ndarray or None
        Semi-discrete right-hand side at the stored levels.
    t_origin : float
        Start ``t0 - T`` of the time window; levels at ``t_origin`` are
        excluded from verification sets.
    D : float or None
        Certified upper bound, when attached.
    """

    r: np.ndarray
    t: np.ndarray
    w: np.ndarray
    space: ModelSpace
    G: object = None
    dwdt: np.ndarray | None = None
    t_origin: float = 0.0
    D: float | None = None
    order: int = 2
    unpolluted_radius: float = math.inf
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.w, dtype=float))
        r = np.asarray(self.r, dtype=float)
        t = np.atleast_1d(np.asarray(self.t, dtype=float))
        if w.shape != (t.size, r.size):
            raise ConfigError(f"w has shape {w.shape}, expected {(t.size, r.size)}")
        if not np.all(np.isfinite(w)):
            raise NonPositiveSolution("solution contains non-finite values")
        if np.any(w <= 0):
            i, j = np.argwhere(w <= 0)[0]
            raise NonPositiveSolution(f"solution is not positive at r={r[j]:.6g}, t={t[i]:.6g}")
        object.__setattr__(self, "w", _freeze(w))
        object.__setattr__(self, "r", _freeze(r))
        object.__setattr__(self, "t", _freeze(t))
        if self.dwdt is not None:
            object.__setattr__(self, "dwdt", _freeze(np.atleast_2d(self.dwdt)))

    @property
    def dr(self) -> float:
        return float(self.r[1] - self.r[0])

    @classmethod
    def stationary(cls, r, w, space, G=None, **kw) -> "SolutionField":
        """Single-level field for elliptic checks."""
        return cls(r=r, t=np.array([0.0]), w=np.asarray(w, dtype=float)[None, :], space=space, G=G, t_origin=-math.inf, **kw)

    def with_D(self, D) -> "SolutionField":
        """Attach an upper bound; ``"auto"`` uses ``(1 + 1e-9) sup w``."""
        if D is None:
            return replace(self, D=None)
        if isinstance(D, str):
            if D != "auto":
                raise ConfigError(f"D must be a number or 'auto', got {D!r}")
            D = (1 + 1e-9) * float(self.w.max())
        D = float(D)
        if not D > 0:
            raise ConfigError("D must be positive")
        if self.w.max() > D:
            raise BoundViolated(f"sup w = {self.w.max():.6g} exceeds D = {D:.6g}")
        return replace(self, D=D)

    # derived fields, computed per level
    @cached_property
    def _derivs(self):
        d1 = np.empty_like(self.w)
        d2 = np.empty_like(self.w)
        for i, row in enumerate(self.w):
            d1[i], d2[i] = radial_derivatives(row, self.dr, order=self.order)
        return d1, d2

    @property
    def grad(self) -> np.ndarray:
        return self._derivs[0]

    @property
    def w_rr(self) -> np.ndarray:
        return self._derivs[1]

    @cached_property
    def lap(self) -> np.ndarray:
        return np.stack([weighted_laplacian_radial(self.space, row, self.r, self.order) for row in self.w])

    @property
    def f(self) -> np.ndarray:
        return np.log(self.w)

    @property
    def h(self) -> np.ndarray:
        if self.D is None:
            raise ConfigError("h = log(w/D) needs an attached bound D")
        return np.log(self.w / self.D)

    def level(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.t - t)))
        if abs(self.t[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise OutOfDomain(f"no stored level at t={t}")
        return i

    def value_at(self, r: float, t: float) -> float:
        """Value at a stored time, cubic interpolation in r."""
        from scipy.interpolate import CubicSpline

        i = self.level(t)
        if not 0 <= r <= self.r[-1]:
            raise OutOfDomain(f"r={r} outside the grid")
        j = int(round(r / self.dr))
        if abs(self.r[j] - r) < 1e-12:
            return float(self.w[i, j])
        # even extension keeps the spline symmetric at the pole
        rr = np.concatenate([-self.r[:0:-1], self.r])
        ww = np.concatenate([self.w[i, :0:-1], self.w[i]])
        return float(CubicSpline(rr, ww)(r))
