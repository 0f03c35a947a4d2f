import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone

from driftlab import estimates as est
from driftlab import nonlinearity as nl
from driftlab import solver
from driftlab.errors import (
    BoundViolated,
    InsufficientData,
    MissingCalibration,
    MixedKinds,
    NeedFiniteM,
    NotSameRay,
    NotStationary,
    ParameterOrder,
    TimeOrder,
)
from driftlab.fields import Grid
from driftlab.geometry import shipped_spaces
from driftlab.scenario import SolveCache, load_scenario

from conftest import kernel_oracle


@pytest.fixture(scope="module")
def constant(euclid):
    return solver.solve_parabolic(euclid, None, "2", Grid(0.05, 1.0, nt=3), 1.0)


@pytest.fixture(scope="module")
def kernel_pair(euclid):
    return [solver.solve_parabolic(euclid, None, "heat_kernel(0.5)", Grid(dr, 1.0, nt=4, cfl=0.5), 1.0, pad=4.0) for dr in (0.04, 0.02)]


def rhs_terms_nonnegative(rep):
    return all(v >= 0 for k, v in rep.rhs_terms.items() if not k.startswith("_"))


class TestSoupletZhang:
    def test_constant_solution(self, constant):
        rep = est.souplet_zhang_check(constant, D=4.0, R=1.0, C=1.0)
        assert rep.lhs_max == 0.0 and rep.margin > 0
        assert rhs_terms_nonnegative(rep)

    def test_kernel_constant_stable_under_refinement(self, kernel_pair):
        values = [est.souplet_zhang_check(s, R=1.0, variant="global").empirical_C for s in kernel_pair]
        assert np.isfinite(values).all()
        assert abs(values[0] - values[1]) / max(values) < 0.1

    def test_bound_violated(self, constant):
        with pytest.raises(BoundViolated):
            est.souplet_zhang_check(constant, D=1.0, R=1.0)


class TestHamilton:
    def test_constant_solution(self, constant):
        assert est.hamilton_check(constant, alpha=4.0, R=1.0).lhs_max == 0.0

    def test_kernel_constant_stable(self, kernel_pair):
        values = [est.hamilton_check(s, alpha=4.0, R=1.0, variant="global").empirical_C for s in kernel_pair]
        assert np.isfinite(values).all()
        assert abs(values[0] - values[1]) / max(values) < 0.1

    @pytest.mark.parametrize("alpha, beta", [(2.0, 1.0), (1.5, 1.0), (3.0, -0.5)])
    def test_parameter_order(self, constant, alpha, beta):
        with pytest.raises(ParameterOrder):
            est.hamilton_check(constant, alpha=alpha, beta=beta, R=1.0)


class TestEllipticHarnack:
    def test_kernel_pair_against_closed_form(self, kernel_solution):
        C = 0.5
        rep = est.elliptic_harnack_check(kernel_solution, R=2.0, pairs=((0.0, 1.0),), calibration=C, variant="global")
        t = rep.params["t"]
        D = rep.params["D"]
        a = rep.details["exponents"][0]
        oracle = a * math.log(kernel_oracle(1.0, t) / (math.e * D)) - math.log(kernel_oracle(0.0, t) / (math.e * D))
        assert rep.holds
        assert rep.margin == pytest.approx(oracle, abs=1e-4)

    def test_same_point_has_zero_margin(self, kernel_solution):
        rep = est.elliptic_harnack_check(kernel_solution, R=2.0, pairs=((0.5, 0.5),), calibration=1.0, variant="global")
        assert rep.details["exponents"] == [1.0]
        assert rep.margin == pytest.approx(0.0, abs=1e-14)

    def test_calibration_from_report(self, kernel_solution):
        sz = est.souplet_zhang_check(kernel_solution, R=2.0, variant="global")
        rep = est.elliptic_harnack_check(kernel_solution, R=2.0, pairs=((0.0, 1.0),), calibration=sz, variant="global")
        assert rep.params["C"] == sz.empirical_C

    def test_missing_calibration(self, kernel_solution):
        with pytest.raises(MissingCalibration):
            est.elliptic_harnack_check(kernel_solution, R=2.0)

    def test_not_same_ray(self, kernel_solution):
        with pytest.raises(NotSameRay):
            est.elliptic_harnack_check(kernel_solution, R=2.0, pairs=(((0.3, 0.0), (0.5, 1.0)),), calibration=1.0)

    def test_bound_violated(self, kernel_solution):
        with pytest.raises(BoundViolated):
            est.elliptic_harnack_check(kernel_solution, D=1e-3, R=2.0, calibration=1.0)


class TestLiYau:
    def test_kernel_pole(self, kernel_solution):
        rep = est.li_yau_check(kernel_solution, alpha=2.0, R=1.0, variant="global")
        t = rep.details["pole"]["t"]
        assert rep.details["pole"]["margin"] == pytest.approx(1.5 / t, rel=1e-4)
        assert rhs_terms_nonnegative(rep)

    def test_constant_solution(self, constant):
        assert est.li_yau_check(constant, R=0.5).lhs_max == pytest.approx(0.0, abs=1e-14)

    def test_hyperbolic_bump_local(self):
        scn = load_scenario("hyperbolic_bump_liyau")
        sol = SolveCache().get(scn.space, scn.G, scn.solve)
        params = scn.jobs[0]["params"]
        rep = est.li_yau_check(sol, alpha=params.get("alpha", 2.0), R=params.get("R", 2.0), k=1.0, variant="local")
        assert rep.margin >= 0

    def test_infinite_m(self, spaces):
        sol = solver.solve_parabolic(spaces["gaussian3"], None, "2", Grid(0.1, 1.0, nt=2), 0.5)
        with pytest.raises(NeedFiniteM):
            est.li_yau_check(sol, R=0.5)


class TestParabolicHarnack:
    def test_pole_pair(self, kernel_solution):
        rep = est.parabolic_harnack_check(kernel_solution, alpha=1.1, pairs=(((0.0, 1.0), (0.0, 2.0)),), R=1.0, variant="global")
        assert rep.details["ratio_margin"] == pytest.approx(2**-1.5 - 2**-1.65, abs=1e-4)

    def test_close_times_shrink_margin(self, euclid):
        sol = solver.solve_parabolic(euclid, None, "heat_kernel(1)", Grid(0.05, 1.0, nt=200), 0.2, pad=4.0)
        far = est.parabolic_harnack_check(sol, alpha=1.1, pairs=(((0.0, 1.0), (0.0, 1.2)),), R=1.0, variant="global")
        near = est.parabolic_harnack_check(sol, alpha=1.1, pairs=(((0.0, 1.0), (0.0, 1.001)),), R=1.0, variant="global")
        assert 0 <= near.margin < far.margin
        assert near.margin < 1e-3

    def test_time_order(self, kernel_solution):
        with pytest.raises(TimeOrder):
            est.parabolic_harnack_check(kernel_solution, pairs=(((0.0, 2.0), (0.0, 1.0)),), R=1.0, variant="global")


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.1, 2.0), st.floats(0.0, 3.0))
def test_path_functional_never_exceeds_straight(r1, r2, dt, angle):
    for space in (shipped_spaces()["euclidean3"], shipped_spaces()["hyperbolic3"]):
        best, straight, opt = est.path_functional(space, r1, r2, dt, 1.0, angle=angle, nodes=12)
        if straight is not None:
            assert best <= straight + 1e-8
        # any admissible path costs at least the chordal radial difference
        assert best >= (r1 - r2) ** 2 / (4 * dt) - 1e-8


def test_path_functional_equality_on_a_ray(euclid):
    best, straight, opt = est.path_functional(euclid, 0.2, 0.9, 0.5, 1.0)
    assert best == pytest.approx(0.49 / 2.0)
    assert opt == pytest.approx(straight, rel=1e-6)


class TestEllipticGlobal:
    def test_logistic_constant(self, euclid):
        G = nl.custom("1 - w")
        sol = solver.solve_elliptic(euclid, G, "1", Grid(0.1, 1.0), tol=1e-10)
        rep = est.elliptic_global_check(sol, G=G)
        assert rep.lhs_max == pytest.approx(0.0, abs=1e-12)
        assert rep.margin == pytest.approx(0.0, abs=1e-12)

    def test_not_stationary(self, coarse_kernel):
        with pytest.raises(NotStationary):
            est.elliptic_global_check(coarse_kernel)


class TestLiouvilleDemo:
    def test_heat_flow_relaxes(self, euclid):
        res = est.liouville_demo(euclid, None, "1 + exp(-r^2)", grid=Grid(0.05, 2.5, nt=1), T=20.0)
        assert res.verdict == "consistent"

    def test_sqrt_growth(self, euclid):
        res = est.liouville_demo(euclid, nl.power_sum(A=[1.0], p=[0.5]), theorem="LiouvilleThmEx", grid=Grid(0.1, 1.0, nt=1), T=5.0)
        assert res.verdict == "consistent-nonexistence"

    def test_failing_predicate(self, euclid):
        G = nl.power_sum(A=[1.0], p=[1.0], B=[-1.0], q=[3.0])
        res = est.liouville_demo(euclid, G, theorem="Liouville.2-8", params={"alpha": 2.0})
        assert res.verdict == "not-applicable"


class TestCalibration:
    def test_refinement_pair(self, kernel_pair):
        reps = [est.souplet_zhang_check(s, R=1.0, variant="global") for s in kernel_pair]
        cal = est.calibrate_constant(reps)
        assert cal.stability < 0.1 and cal.C_min == max(r.empirical_C for r in reps)

    def test_single_report(self, kernel_pair):
        with pytest.raises(InsufficientData):
            est.calibrate_constant([est.souplet_zhang_check(kernel_pair[0], R=1.0, variant="global")])

    def test_mixed(self, kernel_pair):
        s = kernel_pair[0]
        with pytest.raises(MixedKinds):
            est.calibrate_constant([est.souplet_zhang_check(s, R=1.0, variant="global"), est.hamilton_check(s, R=1.0, variant="global")])


class TestEstimators:
    def test_fit_and_score(self, kernel_solution):
        model = est.LiYauEstimator(alpha=2.0, R=1.0, variant="global")
        assert model.fit(kernel_solution).margin_ == pytest.approx(model.score(kernel_solution))
        assert model.report_.kind == "LiYauGlobal"

    def test_params_round_trip(self):
        model = est.HamiltonEstimator(alpha=3.0, beta=0.5)
        assert model.get_params()["alpha"] == 3.0
        twin = clone(model).set_params(R=8.0)
        assert twin.get_params()["R"] == 8.0 and model.R == 4.0

    def test_empirical_constant_exposed(self, kernel_solution):
        model = est.SoupletZhangEstimator(R=2.0, variant="global").fit(kernel_solution)
        assert model.empirical_C_ > 0
