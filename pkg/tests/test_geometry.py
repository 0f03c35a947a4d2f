import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from driftlab.errors import DimensionConvention, HypothesisUnverified, InvalidWarp, NeedFiniteM, OutOfDomain
from driftlab.geometry import (
    curvature_lower_bound,
    divergence_operator,
    gamma_delta_phi,
    laplacian_comparison_margin,
    make_model_space,
    ricci_eigenvalues,
    weighted_laplacian_exact,
    weighted_laplacian_radial,
)

r_sym = sp.symbols("r", positive=True)


def sym_ricci(psi, phi, n=3):
    """Radial and tangential Bakry-Emery Ricci eigenvalues of dr^2 + psi^2 g_S, by sympy."""
    rad = -(n - 1) * sp.diff(psi, r_sym, 2) / psi + sp.diff(phi, r_sym, 2)
    tan = -sp.diff(psi, r_sym, 2) / psi + (n - 2) * (1 - sp.diff(psi, r_sym) ** 2) / psi**2
    tan += sp.diff(phi, r_sym) * sp.diff(psi, r_sym) / psi
    return sp.simplify(rad), sp.simplify(tan)


class TestModelSpace:
    def test_euclidean_accepted(self, euclid):
        assert (euclid.n, euclid.m, euclid.R_max) == (3, 3.0, 10.0)

    def test_gaussian_soliton_accepted(self):
        space = make_model_space(3, "inf", "euclidean", "gaussian[1]", 10.0)
        assert math.isinf(space.m)

    def test_nonconstant_potential_with_m_equal_n_rejected(self):
        with pytest.raises(DimensionConvention):
            make_model_space(3, 3, "euclidean", "gaussian[1]", 10.0)

    def test_sphere_beyond_first_zero_rejected(self):
        with pytest.raises(InvalidWarp):
            make_model_space(3, 3, "sphere", "zero", 4.0)


class TestRicci:
    def test_flat_is_zero(self, euclid):
        s = ricci_eigenvalues(euclid, 1.0)
        assert s.ric_radial == s.ric_tangential == 0.0

    def test_hyperbolic_matches_sympy(self, spaces):
        rad, tan = sym_ricci(sp.sinh(r_sym), sp.Integer(0))
        assert rad == -2 and tan == -2
        s = ricci_eigenvalues(spaces["hyperbolic3"], 1.0)
        assert s.ric_radial == pytest.approx(-2.0, abs=1e-12)
        assert s.ric_tangential == pytest.approx(-2.0, abs=1e-12)

    def test_gaussian_bakry_emery_is_identity(self, spaces):
        rad, tan = sym_ricci(r_sym, r_sym**2 / 2)
        assert rad == 1 and tan == 1
        s = ricci_eigenvalues(spaces["gaussian3"], 1.0)
        assert (s.ric_phi_radial, s.ric_phi_tangential) == pytest.approx((1.0, 1.0), abs=1e-12)

    def test_m_equal_n_flavour_coincides(self, spaces):
        s = ricci_eigenvalues(spaces["hyperbolic3"], 2.3)
        assert s.ric_phi_m_radial == s.ric_radial
        assert s.ric_phi_m_tangential == s.ric_tangential

    def test_gaussian_finite_m_correction(self, spaces):
        # Ric_phi^m = Ric_phi - phi'^2/(m-n) radially: 1 - r^2/2 at m=5
        s = ricci_eigenvalues(spaces["gaussian3_m5"], 1.2)
        assert s.ric_phi_m_radial == pytest.approx(1 - 1.2**2 / 2, abs=1e-12)

    def test_outside_domain(self, euclid):
        with pytest.raises(OutOfDomain):
            ricci_eigenvalues(euclid, 11.0)

    @given(st.floats(0.05, 3.0))
    def test_sphere_has_constant_curvature(self, r):
        space = make_model_space(3, 3, "sphere", "zero", 3.0)
        s = ricci_eigenvalues(space, r)
        assert s.ric_radial == pytest.approx(2.0, abs=1e-9)
        assert s.ric_tangential == pytest.approx(2.0, abs=1e-9)


class TestCurvatureBound:
    def test_values(self, spaces):
        assert curvature_lower_bound(spaces["euclidean3"], "Ric_phi").k == pytest.approx(0.0, abs=1e-12)
        assert curvature_lower_bound(spaces["hyperbolic3"], "Ric_phi").k == pytest.approx(1.0, abs=1e-9)
        assert curvature_lower_bound(spaces["gaussian3"], "Ric_phi").k == pytest.approx(0.0, abs=1e-12)

    @given(st.floats(0.1, 4.0), st.floats(0.1, 4.0))
    def test_monotone_in_region(self, a, b):
        # enlarging the region can only lower the minimum eigenvalue
        space = make_model_space(3, 5, "euclidean", "gaussian[1]", 10.0)
        lo, hi = sorted((a, b))
        small = curvature_lower_bound(space, "Ric_phi^m", region=(0.0, lo))
        big = curvature_lower_bound(space, "Ric_phi^m", region=(0.0, hi))
        assert big.min_eigenvalue <= small.min_eigenvalue + 1e-12


class TestWeightedLaplacian:
    def test_r_squared(self, spaces):
        r = np.linspace(0, 3, 61)
        assert np.allclose(weighted_laplacian_exact(spaces["euclidean3"], "r^2", r), 6.0)
        assert np.allclose(weighted_laplacian_exact(spaces["gaussian3"], "r^2", r), 6 - 2 * r**2)

    def test_constant_is_zero(self, spaces):
        r = np.linspace(0, 3, 31)
        for space in spaces.values():
            assert np.allclose(weighted_laplacian_exact(space, "5", r[r <= space.R_max]), 0.0)

    def test_discrete_matches_exact_to_second_order(self, spaces):
        space = spaces["gaussian3"]
        errs = []
        for dr in (0.04, 0.02):
            r = np.arange(0, 3 + dr / 2, dr)
            u = np.exp(-(r**2))
            exact = weighted_laplacian_exact(space, "exp(-r^2)", r)
            errs.append(np.max(np.abs(weighted_laplacian_radial(space, u, r) - exact)[: int(2.5 / dr)]))
        assert 3.5 < errs[0] / errs[1] < 4.5

    @given(st.lists(st.floats(0.1, 10.0), min_size=5, max_size=40))
    def test_finite_volume_operator_is_conservative(self, values):
        space = make_model_space(3, "inf", "euclidean", "gaussian[1]", 10.0)
        w = np.asarray(values)
        r = np.arange(w.size) * 0.1
        op = divergence_operator(space, r)
        assert abs(op.mass(op.apply(w))) <= 1e-10 * max(1.0, np.abs(op.volumes * op.apply(w)).sum())

    @given(st.lists(st.floats(-5, 5), min_size=6, max_size=30), st.lists(st.floats(-5, 5), min_size=6, max_size=30))
    def test_finite_volume_operator_is_symmetric(self, a, b):
        n = min(len(a), len(b))
        u, v = np.asarray(a[:n]), np.asarray(b[:n])
        space = make_model_space(3, 3, "hyperbolic", "zero", 10.0)
        op = divergence_operator(space, np.arange(n) * 0.05)
        lhs = np.dot(op.volumes * op.apply(u), v)
        rhs = np.dot(op.volumes * u, op.apply(v))
        assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9)


class TestComparison:
    def test_gamma_delta_phi(self, spaces):
        assert gamma_delta_phi(spaces["euclidean3"]) == pytest.approx(2.0)
        assert gamma_delta_phi(spaces["gaussian3"]) == pytest.approx(1.0)
        assert gamma_delta_phi(spaces["hyperbolic3"]) == pytest.approx(2 / math.tanh(1.0))

    def test_equality_cases(self, spaces):
        assert laplacian_comparison_margin(spaces["hyperbolic3"], 1.0, 3, region=(0.5, 5.0)) == pytest.approx(0.0, abs=1e-9)
        assert laplacian_comparison_margin(spaces["euclidean3"], 0.0, 3) == pytest.approx(0.0, abs=1e-9)

    def test_infinite_m_rejected(self, spaces):
        with pytest.raises(NeedFiniteM):
            laplacian_comparison_margin(spaces["gaussian3"], 0.0, "inf")

    def test_m_equal_n_on_weighted_space_rejected(self, spaces):
        with pytest.raises(HypothesisUnverified):
            laplacian_comparison_margin(spaces["gaussian3"], 0.0, 3)

    def test_k_below_certified_rejected(self, spaces):
        with pytest.raises(HypothesisUnverified):
            laplacian_comparison_margin(spaces["hyperbolic3"], 0.5, 3)
