import numpy as np
import pytest
from hypothesis import given, strategies as st

from driftlab.cutoff import (
    SpatialCutoff,
    build_space_time_cutoff,
    build_spatial_cutoff,
    certify,
    quintic_step,
    smooth_step,
)
from driftlab.errors import ConfigError


def test_plateau_and_support():
    cut = build_spatial_cutoff(1.0)
    assert cut.value(0.5) == 1.0 and cut.d1(0.5) == 0.0
    assert cut.value(3.0) == 0.0


def test_spatial_certificate_at_two_densities():
    a, b = certify(build_spatial_cutoff(1.0, 10_000), 10_000), certify(build_spatial_cutoff(1.0, 20_000), 20_000)
    assert a.valid and b.valid
    assert np.isfinite([a.constants["c1"], a.constants["c2"]]).all()
    for key in ("c1", "c2"):
        assert a.constants[key] == pytest.approx(b.constants[key], rel=1e-3)


def test_broken_profile_fails_monotonicity():
    # increasing on [1, 1.1] before decaying
    def value(s):
        s = np.asarray(s, dtype=float)
        return np.where(s <= 1, 1.0, np.where(s >= 2, 0.0, quintic_step(2.0 - s))) + np.where((s > 1) & (s < 1.2), 0.05 * np.sin(np.pi * (s - 1) / 0.2), 0.0)

    def d1(s):
        s = np.asarray(s, dtype=float)
        inside = (s > 1) & (s < 2)
        extra = np.where((s > 1) & (s < 1.2), 0.05 * np.pi / 0.2 * np.cos(np.pi * (s - 1) / 0.2), 0.0)
        return np.where(inside, -quintic_step(2.0 - s, 1), 0.0) + extra

    def d2(s):
        s = np.asarray(s, dtype=float)
        inside = (s > 1) & (s < 2)
        extra = np.where((s > 1) & (s < 1.2), -0.05 * (np.pi / 0.2) ** 2 * np.sin(np.pi * (s - 1) / 0.2), 0.0)
        return np.where(inside, quintic_step(2.0 - s, 2), 0.0) + extra

    cert = certify(SpatialCutoff.from_functions(value, d1, d2, label="broken"))
    assert cert.flags["monotone"] is False
    assert not cert.valid


@given(st.floats(0.1, 50.0))
def test_spatial_constants_do_not_depend_on_radius(R):
    ref = build_spatial_cutoff(1.0, 20_001)
    cut = build_spatial_cutoff(R, 20_001)
    assert (cut.c1, cut.c2) == (ref.c1, ref.c2)
    # scaled derivative bounds hold on the physical radius
    r = np.linspace(0, 3 * R, 2001)
    z, dz = cut(r), cut.d1(r / R) / R
    pos = z > 0
    assert np.all(-dz[pos] / np.sqrt(z[pos]) <= cut.c1 / R + 1e-9)


def test_space_time_clauses():
    cut = build_space_time_cutoff(4.0, 1.0, 0.0, -0.5)
    assert cut(1.0, -0.25) == pytest.approx(1.0)
    assert np.all(cut(np.linspace(0, 6, 31), -1.0) == 0.0)
    assert certify(cut).valid


@given(st.floats(0.0, 1.0))
def test_smooth_step_range_and_symmetry(x):
    assert 0.0 <= smooth_step(np.array([x]))[0] <= 1.0
    assert smooth_step(np.array([x]))[0] + smooth_step(np.array([1 - x]))[0] == pytest.approx(1.0, abs=1e-12)


def test_smooth_step_derivative_matches_differences():
    x = np.linspace(0.05, 0.95, 19)
    h = 1e-6
    fd = (smooth_step(x + h) - smooth_step(x - h)) / (2 * h)
    assert np.allclose(smooth_step(x, 1), fd, rtol=1e-5, atol=1e-7)
    fd2 = (smooth_step(x + h, 1) - smooth_step(x - h, 1)) / (2 * h)
    assert np.allclose(smooth_step(x, 2), fd2, rtol=1e-5, atol=1e-5)


def test_low_density_rejected():
    with pytest.raises(ConfigError):
        certify(build_spatial_cutoff(1.0), 10)
