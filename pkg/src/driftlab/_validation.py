"""Input validation helpers shared by the public operations."""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError, GridTooCoarse, OutOfDomain


def as_float_array(x, name: str = "array", ndim: int | None = None) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ConfigError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} contains non-finite values")
    return arr


def check_grid(r, min_nodes: int = 4) -> float:
    """Validate a uniform radial grid and return its spacing."""
    r = np.asarray(r, dtype=float)
    if r.ndim != 1 or r.size < min_nodes:
        raise GridTooCoarse(f"need at least {min_nodes} radial nodes, got {r.size}")
    steps = np.diff(r)
    dr = float(steps.mean())
    if dr <= 0 or np.max(np.abs(steps - dr)) > 1e-9 * max(1.0, dr):
        raise ConfigError("radial grid must be uniform and increasing")
    return dr


def check_interval(region, lo_bound: float = 0.0, hi_bound: float = math.inf, name="region"):
    try:
        lo, hi = (float(v) for v in region)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a pair of numbers") from exc
    if not lo <= hi:
        raise ConfigError(f"{name} must satisfy lo <= hi, got [{lo}, {hi}]")
    tol = 1e-12 * max(1.0, abs(hi_bound) if math.isfinite(hi_bound) else 1.0)
    if lo < lo_bound - tol or hi > hi_bound + tol:
        raise OutOfDomain(f"{name} [{lo}, {hi}] leaves the domain [{lo_bound}, {hi_bound}]")
    return lo, hi


def parse_extended(value, name: str = "m") -> float:
    """Accept an integer, a float or an infinity token."""
    if isinstance(value, str):
        token = value.strip().lower()
        if token in ("inf", "infinity", "∞", "+inf"):
            return math.inf
        try:
            value = float(token)
        except ValueError as exc:
            raise ConfigError(f"{name} must be a number or 'inf', got {value!r}") from exc
    if value is None:
        return math.inf
    value = float(value)
    if math.isnan(value):
        raise ConfigError(f"{name} must not be NaN")
    return value


def check_positive(value, name: str) -> float:
    value = float(value)
    if not value > 0 or not math.isfinite(value):
        raise ConfigError(f"{name} must be a positive finite number, got {value}")
    return value
