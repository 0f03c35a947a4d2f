"""Method-of-lines solver for ``w_t = Delta_phi w + G(t, x, w)`` on radial model spaces.

Space is discretised in divergence form on a cell-centred finite-volume
grid (mass conserving for the weighted measure); time is advanced with the
classical explicit RK4 scheme.
"""

from __future__ import annotations

import math
import re
from dataclasses import replace

import numpy as np

from . import expr as ex
from .errors import (
    BlowUp,
    BoundViolated,
    CFLFailure,
    ConfigError,
    NoConvergence,
    OutOfDomain,
    PositivityLost,
)
from .fields import Grid, SolutionField
from .geometry import ModelSpace, divergence_operator
from .nonlinearity import Nonlinearity, zero

__all__ = [
    "POSITIVITY_FLOOR",
    "BLOWUP_CEILING",
    "heat_kernel",
    "make_initial",
    "solve_parabolic",
    "solve_elliptic",
    "derived_fields",
    "harnack_H",
    "harnack_F_beta",
    "harnack_F_LY",
]

POSITIVITY_FLOOR = 1e-12
BLOWUP_CEILING = 1e12
RK4_STABILITY = 2.5  # the real stability interval of RK4 is about 2.785


def heat_kernel(r, t, n: int = 3):
    """Euclidean heat kernel ``(4 pi t)^(-n/2) exp(-r^2 / (4t))``."""
    r = np.asarray(r, dtype=float)
    return (4 * math.pi * t) ** (-n / 2) * np.exp(-(r**2) / (4 * t))


_KERNEL = re.compile(r"^\s*heat_kernel\s*\(\s*([^)]+?)\s*\)\s*$")


def make_initial(spec, space: ModelSpace):
    """Resolve initial data into ``(callable_or_array, start_time, label)``.

    ``"heat_kernel(t0)"`` starts the flow at the absolute kernel time ``t0``
    so stored times are kernel times; other specs start at ``t = 0``.
    """
    if isinstance(spec, str):
        m = _KERNEL.match(spec)
        if m:
            t0 = float(ex.parse(m.group(1), variables=()).compile(())())
            if not t0 > 0:
                raise ConfigError("heat_kernel(t0) needs t0 > 0")
            return (lambda r: heat_kernel(r, t0, space.n)), t0, f"heat_kernel({t0:g})"
        e = ex.parse(spec, variables=("r",))
        return e.compile(("r",)), 0.0, spec.strip()
    if isinstance(spec, ex.Expr):
        return spec.compile(("r",)), 0.0, str(spec)
    if callable(spec):
        return spec, 0.0, getattr(spec, "__name__", "callable")
    if isinstance(spec, (int, float)):
        value = float(spec)
        return (lambda r: np.full_like(np.asarray(r, dtype=float), value)), 0.0, f"{value:g}"
    arr = np.asarray(spec, dtype=float)
    return arr, 0.0, "array"


def _rhs(op, G: Nonlinearity, r, t, w, zero_g: bool):
    out = op.apply(w)
    if not zero_g:
        out = out + G(t, r, w)
    return out


def _check_state(w, r, t):
    if not np.all(np.isfinite(w)):
        raise BlowUp(f"non-finite values at t={t:.6g}")
    j = int(np.argmin(w))
    if w[j] <= POSITIVITY_FLOOR:
        raise PositivityLost(
            f"w = {w[j]:.3g} <= {POSITIVITY_FLOOR:g} at r={r[j]:.6g}, t={t:.6g}", r=float(r[j]), t=float(t)
        )
    if w.max() > BLOWUP_CEILING:
        raise BlowUp(f"w exceeds {BLOWUP_CEILING:g} at t={t:.6g}")


def _time_step(space, op, G, r, t, w, dr, cfl, zero_g):
    dt = cfl * dr**2 / (1.0 + space.max_drift)
    lip = 0.0
    if not zero_g:
        gw = G.partial("G_w", t, r, w)
        if not np.all(np.isfinite(gw)):
            raise BlowUp("G_w is not finite on the current state")
        lip = float(np.max(np.abs(gw)))
    return min(dt, RK4_STABILITY / (op.spectral_radius() + lip))


def solve_parabolic(
    space: ModelSpace,
    G: Nonlinearity | None,
    initial,
    grid: Grid,
    T: float,
    pad: float | None = None,
    t_start: float | None = None,
    D=None,
) -> SolutionField:
    """Integrate the drifting heat equation with explicit RK4.

    Parameters
    ----------
    space : ModelSpace
    G : Nonlinearity or None
        Reaction term; ``None`` means zero.
    initial : str, Expr, callable, number or array
        Positive even initial data; ``"heat_kernel(t0)"`` is a preset.
    grid : Grid
        ``grid.R_max`` is the verification radius; the computational domain
        is ``[0, 2 grid.R_max + pad]`` with a Neumann condition at the far end.
    T : float
        Length of the time window.
    pad : float, optional
        Extra radius beyond ``2 grid.R_max``; defaults to ``4 sqrt(T)``.
    t_start : float, optional
        Override the start time implied by ``initial``.
    D : float or "auto", optional
        Upper bound to attach to the result.

    Returns
    -------
    SolutionField
        ``grid.nt + 1`` stored levels including the initial one.

    Raises
    ------
    PositivityLost, BlowUp, CFLFailure
    """
    G = zero() if G is None else G
    if not T > 0:
        raise ConfigError("T must be positive")
    if not (0 < grid.cfl <= 0.5):
        raise CFLFailure(f"CFL safety factor must lie in (0, 0.5], got {grid.cfl}")
    pad = 4.0 * math.sqrt(T) if pad is None else float(pad)
    if pad < 0:
        raise ConfigError("pad must be non-negative")
    L = 2 * grid.R_max + pad
    if L > space.R_max * (1 + 1e-12):
        raise OutOfDomain(f"domain radius {L:g} (2 R_max + pad) exceeds the model space radius {space.R_max:g}")
    count = int(round(L / grid.dr))
    r = np.arange(count + 1) * grid.dr
    if r.size < 8:
        raise ConfigError("grid needs at least 8 radial nodes")
    op = divergence_operator(space, r)

    init, start, label = make_initial(initial, space)
    if t_start is not None:
        start = float(t_start)
    w = np.asarray(init(r) if callable(init) else init, dtype=float).copy()
    if w.shape != r.shape:
        raise ConfigError(f"initial data has shape {w.shape}, expected {r.shape}")
    if np.any(~(w > 0)):
        raise ConfigError("initial data must be strictly positive")
    _check_state(w, r, start)

    zero_g = G.is_zero
    times = start + T * np.arange(grid.nt + 1) / grid.nt
    levels = [w.copy()]
    rates = [_rhs(op, G, r, start, w, zero_g)]
    steps = 0
    t = start
    for k in range(1, grid.nt + 1):
        target = times[k]
        dt_max = _time_step(space, op, G, r, t, w, grid.dr, grid.cfl, zero_g)
        nsub = max(1, math.ceil((target - t) / dt_max - 1e-9))
        dt = (target - t) / nsub
        for _ in range(nsub):
            k1 = _rhs(op, G, r, t, w, zero_g)
            k2 = _rhs(op, G, r, t + dt / 2, w + dt / 2 * k1, zero_g)
            k3 = _rhs(op, G, r, t + dt / 2, w + dt / 2 * k2, zero_g)
            k4 = _rhs(op, G, r, t + dt, w + dt * k3, zero_g)
            w = w + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += dt
            _check_state(w, r, t)
            steps += 1
        t = target
        levels.append(w.copy())
        rates.append(_rhs(op, G, r, t, w, zero_g))

    masses = [op.mass(lv) for lv in levels]
    sol = SolutionField(
        r=r,
        t=times,
        w=np.array(levels),
        space=space,
        G=G,
        dwdt=np.array(rates),
        t_origin=0.0 if label.startswith("heat_kernel") else start,
        order=2,
        unpolluted_radius=2 * grid.R_max,
        metadata={
            "initial": label,
            "dr": grid.dr,
            "domain_radius": L,
            "pad": pad,
            "pad_below_diffusion_length": pad < 4.0 * math.sqrt(T),
            "steps": steps,
            "cfl": grid.cfl,
            "mass": masses,
            "space": space.name,
            "nonlinearity": G.label,
        },
    )
    if D is not None:
        sol = sol.with_D(D)
    return sol


def solve_elliptic(
    space: ModelSpace,
    G: Nonlinearity | None,
    guess,
    grid: Grid,
    tol: float = 1e-8,
    max_time: float = 200.0,
    chunk: float = 1.0,
    pad: float = 0.0,
) -> SolutionField:
    """Relax to a stationary solution by running the parabolic flow.

    Stops once ``max |Delta_phi w + G(w)| < tol`` and returns a single-level
    field.  ``metadata["history"]`` holds ``(t, residual, min w, max w)``.

    Raises
    ------
    NoConvergence
        The time budget is exhausted or the flow blows up.
    PositivityLost
    """
    G = zero() if G is None else G
    if not tol > 0:
        raise ConfigError("tol must be positive")
    field = None
    t = 0.0
    history = []
    current = guess
    while True:
        try:
            field = solve_parabolic(space, G, current, replace(grid, nt=1), chunk, pad=pad, t_start=t)
        except BlowUp as exc:
            raise NoConvergence(f"relaxation blew up after t={t:g}: {exc}") from exc
        w = field.w[-1]
        t += chunk
        op = divergence_operator(space, field.r)
        res = float(np.max(np.abs(op.apply(w) + G(t, field.r, w))))
        history.append((t, res, float(w.min()), float(w.max())))
        if res < tol:
            break
        if t >= max_time - 1e-12:
            err = NoConvergence(f"residual {res:.3g} still above tol {tol:g} after t={t:g}")
            err.history = history
            raise err
        current = w
    meta = dict(field.metadata)
    meta.update({"residual": res, "relaxation_time": t, "history": history})
    return SolutionField.stationary(field.r, w, space, G, metadata=meta, unpolluted_radius=field.unpolluted_radius)


def derived_fields(sol: SolutionField, D=None) -> SolutionField:
    """Attach the bound ``D`` (checking ``w <= D``); derived arrays are lazy properties."""
    if D is None:
        return sol
    if not isinstance(D, str) and sol.w.max() > float(D):
        raise BoundViolated(f"sup w = {sol.w.max():.6g} exceeds D = {float(D):.6g}")
    return sol.with_D(D)


def harnack_H(sol: SolutionField) -> np.ndarray:
    """``|grad h|^2 / (1 - h)^2`` with ``h = log(w / D)``."""
    h = sol.h
    gh = sol.grad / sol.w
    return gh**2 / (1 - h) ** 2


def harnack_F_beta(sol: SolutionField, alpha: float, beta: float) -> np.ndarray:
    """``w^((beta+2)/alpha - 2) |grad w|^2 / alpha^2``."""
    return sol.w ** ((beta + 2) / alpha - 2) * sol.grad**2 / alpha**2


def harnack_F_LY(sol: SolutionField, alpha: float) -> np.ndarray:
    """``t (|grad f|^2 - alpha f_t + alpha e^{-f} G)`` with ``t`` measured from ``t_origin``."""
    if sol.dwdt is None:
        raise ConfigError("F_LY needs the time derivative of the solution")
    G = sol.G if sol.G is not None else zero()
    tt = (sol.t - sol.t_origin)[:, None]
    g = G(sol.t[:, None], sol.r[None, :], sol.w)
    return tt * ((sol.grad / sol.w) ** 2 - alpha * sol.dwdt / sol.w + alpha * g / sol.w)
