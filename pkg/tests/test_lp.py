"""Linear-programming wrapper: statuses, KKT quality, and duals."""

import numpy as np
import pytest

from shapeboost import SolverError
from shapeboost.lp import LinearProgram, solve_lp

from conftest import random_bounded_lp


def assert_kkt(lp: LinearProgram, sol) -> None:
    """Feasibility, stationarity, complementary slackness, strong duality."""
    x = sol.x
    n = lp.n
    lo = np.array([-np.inf if a is None else a for a, _ in lp.bounds])
    hi = np.array([np.inf if b is None else b for _, b in lp.bounds])
    assert np.all(x >= lo - 1e-8) and np.all(x <= hi + 1e-8)
    grad = lp.c.copy()
    dual_obj = 0.0
    if lp.A_ub is not None:
        slack = lp.b_ub - lp.A_ub @ x
        assert np.all(slack >= -1e-8)
        assert np.all(sol.ineq_duals >= -1e-9)
        assert np.max(np.abs(sol.ineq_duals * slack), initial=0.0) <= 1e-7
        grad += lp.A_ub.T @ sol.ineq_duals
        dual_obj -= lp.b_ub @ sol.ineq_duals
    if lp.A_eq is not None:
        assert np.max(np.abs(lp.A_eq @ x - lp.b_eq)) <= 1e-8
        grad -= lp.A_eq.T @ sol.eq_duals
        dual_obj += lp.b_eq @ sol.eq_duals
    lower = sol.lower_duals
    upper = sol.upper_duals
    assert np.all(lower >= -1e-9) and np.all(upper >= -1e-9)
    finite_lo = np.isfinite(lo)
    finite_hi = np.isfinite(hi)
    assert np.max(np.abs(lower[finite_lo] * (x - lo)[finite_lo]), initial=0.0) <= 1e-7
    assert np.max(np.abs(upper[finite_hi] * (hi - x)[finite_hi]), initial=0.0) <= 1e-7
    grad -= lower
    grad += upper
    assert np.max(np.abs(grad)) <= 1e-6
    dual_obj += float(lo[finite_lo] @ lower[finite_lo])
    dual_obj -= float(hi[finite_hi] @ upper[finite_hi])
    assert abs(sol.objective - dual_obj) <= 1e-6
    assert abs(sol.objective - lp.c @ x) <= 1e-8 * max(1.0, abs(sol.objective))


class TestSolveLp:
    def test_min_x_above_one(self):
        lp = LinearProgram(c=np.array([1.0]), bounds=[(1.0, None)])
        sol = solve_lp(lp)
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(1.0, abs=1e-9)
        assert sol.x[0] == pytest.approx(1.0, abs=1e-9)

    def test_box_simplex_mass_on_negative_costs(self):
        lp = LinearProgram(
            c=np.array([-1.0, -1.0, 1.0, 1.0]),
            A_eq=np.ones((1, 4)),
            b_eq=np.array([1.0]),
            bounds=[(0.0, 0.5)] * 4,
        )
        sol = solve_lp(lp)
        assert sol.status == "optimal"
        np.testing.assert_allclose(sol.x, [0.5, 0.5, 0.0, 0.0], atol=1e-9)
        assert sol.objective == pytest.approx(-1.0, abs=1e-9)

    def test_infeasible_detected(self):
        lp = LinearProgram(
            c=np.array([1.0]),
            A_ub=np.array([[-1.0]]),
            b_ub=np.array([-2.0]),
            bounds=[(0.0, 1.0)],
        )
        sol = solve_lp(lp)
        assert sol.status == "infeasible"
        assert sol.x is None

    def test_unbounded_detected(self):
        lp = LinearProgram(c=np.array([1.0]), bounds=[(None, 0.0)])
        assert solve_lp(lp).status == "unbounded"

    @pytest.mark.parametrize("seed", range(25))
    def test_kkt_residuals_on_random_instances(self, seed):
        lp = random_bounded_lp(np.random.default_rng(seed))
        sol = solve_lp(lp)
        assert sol.status == "optimal"
        assert_kkt(lp, sol)

    def test_objective_scaling_keeps_argmin(self):
        lp1 = LinearProgram(c=np.array([-1.0, -2.0]), bounds=[(0.0, 1.0)] * 2)
        lp2 = LinearProgram(c=np.array([-3.0, -6.0]), bounds=[(0.0, 1.0)] * 2)
        x1 = solve_lp(lp1).x
        x2 = solve_lp(lp2).x
        np.testing.assert_allclose(x1, x2, atol=1e-9)
        np.testing.assert_allclose(x1, [1.0, 1.0], atol=1e-9)

    def test_deterministic(self):
        lp = random_bounded_lp(np.random.default_rng(123))
        a = solve_lp(lp)
        b = solve_lp(lp)
        np.testing.assert_array_equal(a.x, b.x)
        assert a.objective == b.objective

    def test_retry_ladder_recovers_from_unknown_status(self, monkeypatch):
        import shapeboost.lp as lpmod
        from scipy.optimize import linprog as real_linprog

        seen = []

        def flaky(*args, **kwargs):
            seen.append(kwargs.get("options"))
            if len(seen) == 1:
                class Fake:
                    status = 4
                    message = "numerical trouble"
                return Fake()
            return real_linprog(*args, **kwargs)

        monkeypatch.setattr(lpmod, "_scipy_linprog", flaky)
        lp = LinearProgram(c=np.array([1.0]), bounds=[(1.0, None)])
        sol = lpmod.solve_lp(lp)
        assert sol.status == "optimal"
        assert len(seen) == 2

    def test_all_attempts_failing_raises(self, monkeypatch):
        import shapeboost.lp as lpmod

        def broken(*args, **kwargs):
            class Fake:
                status = 4
                message = "numerical trouble"
            return Fake()

        monkeypatch.setattr(lpmod, "_scipy_linprog", broken)
        lp = LinearProgram(c=np.array([1.0]), bounds=[(1.0, None)])
        with pytest.raises(SolverError):
            lpmod.solve_lp(lp)


class TestLinearProgramValidation:
    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            LinearProgram(
                c=np.array([1.0, 2.0]), A_ub=np.ones((1, 3)), b_ub=np.array([1.0])
            )

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            LinearProgram(c=np.array([np.inf]))

    def test_missing_rhs_rejected(self):
        with pytest.raises(ValueError):
            LinearProgram(c=np.array([1.0]), A_ub=np.ones((1, 1)))

    def test_bounds_length_checked(self):
        with pytest.raises(ValueError):
            LinearProgram(c=np.array([1.0, 2.0]), bounds=[(0.0, 1.0)])
