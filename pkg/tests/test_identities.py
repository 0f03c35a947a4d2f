import numpy as np
import pytest
import sympy as sp
from hypothesis import assume, given, strategies as st

from driftlab import identities as ids
from driftlab import nonlinearity as nl
from driftlab import solver
from driftlab.errors import HypothesisUnverified
from driftlab.fields import Grid
from driftlab.geometry import shipped_spaces

LEVELS = (0.04, 0.02, 0.01)


def levels_for(space, G, initial, R=0.5, T=0.5, pad=1.0):
    return [solver.solve_parabolic(space, G, initial, Grid(dr, R, nt=3), T, pad=pad) for dr in LEVELS]


@pytest.fixture(scope="module")
def log_linear_run(euclid):
    G = nl.log_linear(1.0)
    return levels_for(euclid, G, "1 + exp(-r^2)"), G


@pytest.fixture(scope="module")
def kernel_levels(euclid):
    return [solver.solve_parabolic(euclid, None, "heat_kernel(0.25)", Grid(dr, 0.5, nt=4), 1.0, pad=4.0) for dr in LEVELS]


def second_order(rep):
    return rep.order is not None and rep.order >= 1.8 and not rep.flagged


def test_observed_order_of_synthetic_data():
    dr = np.array([0.04, 0.02, 0.01])
    assert ids.observed_order(dr, 3.0 * dr**2) == pytest.approx(2.0)
    assert ids.observed_order(dr[:1], dr[:1]) is None


class TestBochner:
    def test_flat_r_squared_is_exact(self, euclid):
        assert ids.bochner_residual(euclid, "r^2", path="analytic").max_abs_residual[0] < 1e-10

    def test_gaussian_r_squared(self, spaces):
        # the curvature term is Ric_phi(grad u, grad u) = 4 r^2
        r = sp.symbols("r", positive=True)
        assert sp.simplify(1 * sp.diff(r**2, r) ** 2) == 4 * r**2
        rep = ids.bochner_residual(spaces["gaussian3"], "r^2")
        assert rep.exact or second_order(rep)
        assert ids.bochner_residual(spaces["gaussian3"], "r^2", path="analytic").max_abs_residual[0] < 1e-9

    def test_hyperbolic_cosh(self, spaces):
        assert second_order(ids.bochner_residual(spaces["hyperbolic3"], "cosh(r)"))

    @given(st.floats(0.2, 2.0), st.floats(0.1, 1.5))
    def test_analytic_path_on_random_fields(self, a, s):
        space = shipped_spaces()["hyperbolic3"]
        rep = ids.bochner_residual(space, f"{a}*exp(-{s}*r^2)", path="analytic", R=3.0)
        assert rep.max_abs_residual[0] <= 1e-9 * max(1.0, max(rep.terms.values()))


class TestCurvatureDimension:
    def test_equality_for_r_squared(self, euclid):
        assert ids.cd_condition_check(euclid, "r^2", 0.0, 3) == pytest.approx(0.0, abs=1e-10)

    def test_cubic_is_strict(self, euclid):
        # |Hess r^3|^2 - (Delta r^3)^2 / 3 = 54 r^2 - 48 r^2 = 6 r^2
        r = sp.symbols("r", positive=True)
        u = r**3
        hess = sp.diff(u, r, 2) ** 2 + 2 * (sp.diff(u, r) / r) ** 2
        lap = sp.diff(u, r, 2) + 2 * sp.diff(u, r) / r
        assert sp.simplify(hess - lap**2 / 3) == 6 * r**2
        assert ids.cd_condition_check(euclid, "r^3", 0.0, 3) > 0

    def test_gaussian_infinite_m(self, spaces):
        assert ids.cd_condition_check(spaces["gaussian3"], "cos(r) + r^2", 1.0) >= -1e-8

    def test_k_above_certified(self, spaces):
        with pytest.raises(HypothesisUnverified):
            ids.cd_condition_check(spaces["gaussian3"], "r^2", 1.5)

    def test_m_below_n(self, euclid):
        with pytest.raises(HypothesisUnverified):
            ids.cd_condition_check(euclid, "r^2", 0.0, 2)


class TestEvolution:
    def test_kernel_second_order(self, kernel_levels):
        assert second_order(ids.h_evolution_residual(kernel_levels, D="auto"))
        assert second_order(ids.H_evolution_residual(kernel_levels))
        assert second_order(ids.F_beta_evolution_residual(kernel_levels, alpha=2.0, beta=0.0))
        assert second_order(ids.F_beta_evolution_residual(kernel_levels, alpha=4.0, beta=1.0))
        assert second_order(ids.liyau_F_evolution_residual(kernel_levels, alpha=2.0))

    def test_log_linear_second_order(self, log_linear_run):
        sols, G = log_linear_run
        assert second_order(ids.h_evolution_residual(sols, G=G))
        assert second_order(ids.H_evolution_residual(sols, G=G))

    def test_gaussian_finite_m(self, spaces):
        sols = levels_for(spaces["gaussian3_m5"], None, "1 + exp(-r^2)")
        assert second_order(ids.liyau_F_evolution_residual(sols, alpha=2.0, m=5))

    def test_constant_solution(self, euclid):
        sols = levels_for(euclid, None, "2")
        for f in (ids.h_evolution_residual, ids.H_evolution_residual, ids.F_beta_evolution_residual, ids.liyau_F_evolution_residual):
            assert max(f(sols).max_abs_residual) < 1e-12


class TestLaplacianOfG:
    def test_x_independent_on_constant(self, euclid):
        sols = levels_for(euclid, nl.log_linear(1.0), "1")
        assert max(ids.delta_phi_G_identity_residual(sols).max_abs_residual) < 1e-12

    def test_radial_coefficient_on_kernel(self, kernel_levels):
        rep = ids.delta_phi_G_identity_residual(kernel_levels, G=nl.log_linear("1 + r^2"))
        assert second_order(rep)

    def test_power_sum_on_kernel(self, kernel_levels):
        assert second_order(ids.delta_phi_G_identity_residual(kernel_levels, G=nl.power_sum(A=["exp(-r^2)"], p=[2.0])))


class TestScalarIdentities:
    def test_exp_laplacian_constant(self, euclid):
        assert max(ids.exp_laplacian_identity(euclid, "3").max_abs_residual) < 1e-12

    def test_exp_laplacian_flat(self, euclid):
        rep = ids.exp_laplacian_identity(euclid, "r^2")
        assert rep.exact or second_order(rep)

    def test_exp_laplacian_gaussian(self, spaces):
        assert second_order(ids.exp_laplacian_identity(spaces["gaussian3"], "log(1 + r^2)"))

    def test_product_rule(self, euclid):
        rep = ids.product_rule_residual(euclid, "exp(-r^2) * (1 + t)", "1 + r^2 * t")
        assert rep.exact or second_order(rep)


class TestQuadraticLemma:
    def test_trivial_case(self):
        lhs, rhs = ids.quadratic_lemma_sides(1, 0, 2, 0.5, 3, 0, 1, 0, 0)
        assert (float(lhs), float(rhs)) == pytest.approx((1.0, 0.25))

    def test_arithmetic_case(self):
        lhs, rhs = ids.quadratic_lemma_sides(2, 0.5, 2, 0.5, 3, 1, 10, 0.1, 0.2)
        # direct arithmetic, written out independently
        s, gap, mc = np.sqrt(2), 2 - 2 * 0.5, 3 * 1 / 10
        ref_l = 1.5**2 - mc * s * gap - 3 * 0.1 * 2 - 3 * 0.2 * s
        ref_r = gap**2 / 4 - mc**2 * 4 * gap / 8 - 4 * 9 * 0.01 / (4 * 0.5) - 0.75 * (81 * 0.0016 * 4 / (4 * 0.5)) ** (1 / 3)
        assert (float(lhs), float(rhs)) == pytest.approx((ref_l, ref_r))
        assert lhs >= rhs

    @given(
        st.floats(1e-6, 50), st.floats(-50, 50), st.floats(1.001, 10), st.floats(1e-3, 0.999),
        st.floats(1, 10), st.floats(0, 10), st.floats(0.1, 10), st.floats(-5, 5), st.floats(-5, 5),
    )
    def test_holds_on_admissible_tuples(self, y, z, alpha, eps, m, c1, R, a, b):
        assume(y - alpha * z > 0)
        lhs, rhs = ids.quadratic_lemma_sides(y, z, alpha, eps, m, c1, R, a, b)
        assert lhs - rhs >= -1e-9 * max(1.0, abs(float(lhs)), abs(float(rhs)))

    def test_sampler_is_seeded(self):
        a = ids.quadratic_lemma_check(2000, seed=3)
        b = ids.quadratic_lemma_check(2000, seed=3)
        assert a.worst_sample == b.worst_sample and a.violations == 0
