import numpy as np
import pytest

from potsolve.core import constraint_violation, feasibility_tol, validate_problem
from potsolve.errors import DummyCostTooSmall, NotConverged
from potsolve.sinkhorn import (
    extend,
    round_ot,
    sinkhorn_ot,
    solve_feasible,
    solve_infeasible,
)
from potsolve.reference import solve_exact

from conftest import random_problem


class TestExtend:
    def test_construction(self):
        prob = validate_problem([1, 1], [1, 1], 1, [[1, 2], [3, 4]])
        ext = extend(prob, 10.0)
        np.testing.assert_array_equal(
            ext.Ct, [[1, 2, 0], [3, 4, 0], [0, 0, 10]]
        )
        np.testing.assert_array_equal(ext.rt, [1, 1, 1])
        np.testing.assert_array_equal(ext.ct, [1, 1, 1])
        assert ext.rt.sum() == pytest.approx(ext.ct.sum(), rel=1e-12)

    def test_balanced_case_empty_dummy(self):
        prob = validate_problem([0.5, 0.5], [0.6, 0.4], 1.0, np.ones((2, 2)))
        ext = extend(prob, 5.0)
        assert ext.rt[-1] == pytest.approx(0.0)
        assert ext.ct[-1] == pytest.approx(0.0)

    def test_dummy_cost_too_small(self):
        prob = validate_problem([1, 1], [1, 1], 1, [[1, 2], [3, 4]])
        with pytest.raises(DummyCostTooSmall):
            extend(prob, 4.0)  # equality is not enough


class TestSinkhornOt:
    def test_zero_cost_gives_product_coupling(self):
        from potsolve.sinkhorn import ExtendedOtProblem

        rt = np.array([1.0, 2.0, 1.5])
        ct = np.array([2.0, 1.0, 1.5])  # balanced: equal totals
        ext = ExtendedOtProblem(Ct=np.zeros((3, 3)), rt=rt, ct=ct, A_val=0.0)
        Xt = sinkhorn_ot(ext, gamma=0.7, tol=1e-12, max_iter=50)
        expected = np.outer(rt, ct) / rt.sum()
        np.testing.assert_allclose(Xt, expected, atol=1e-12)

    def test_matches_damped_fixed_point_oracle(self):
        # independent plain-domain solver with damping, on a 2x2 instance
        prob = validate_problem([0.8], [0.6], 0.5, [[0.3]])
        ext = extend(prob, 1.2)
        gamma = 0.5
        K = np.exp(-ext.Ct / gamma)
        a, b = ext.rt, ext.ct
        alpha = np.ones(2)
        beta = np.ones(2)
        for _ in range(20000):
            alpha = np.sqrt(alpha * (a / (K @ beta)))
            beta = np.sqrt(beta * (b / (K.T @ alpha)))
        oracle = alpha[:, None] * K * beta[None, :]
        assert abs(oracle.sum(1) - a).sum() < 1e-12

        Xt = sinkhorn_ot(ext, gamma=gamma, tol=1e-13, max_iter=100000)
        np.testing.assert_allclose(Xt, oracle, atol=1e-10)

    def test_stopping_rule_and_mass(self, rng):
        prob = random_problem(rng, n=6)
        ext = extend(prob, 2.0)
        tol = 1e-7
        Xt = sinkhorn_ot(ext, gamma=0.1, tol=tol, max_iter=200000)
        err = (
            np.abs(Xt.sum(1) - ext.rt).sum() + np.abs(Xt.sum(0) - ext.ct).sum()
        )
        assert err <= tol
        assert Xt.sum() == pytest.approx(ext.rt.sum(), rel=1e-6)

    def test_not_converged_carries_iterate(self, rng):
        prob = random_problem(rng, n=5)
        ext = extend(prob, 2.0)
        with pytest.raises(NotConverged) as info:
            sinkhorn_ot(ext, gamma=1e-3, tol=1e-12, max_iter=3)
        assert info.value.iterate is not None
        assert info.value.marginal_error > 1e-12


class TestRoundOt:
    def test_feasible_fixed_point(self):
        Xt = np.array([[0.25, 0.25], [0.25, 0.25]])
        out = round_ot(Xt, np.array([0.5, 0.5]), np.array([0.5, 0.5]))
        np.testing.assert_allclose(out, Xt)

    def test_row_scaling_hand_trace(self):
        Xt = np.array([[0.6, 0.0], [0.0, 0.6]])
        out = round_ot(Xt, np.array([0.5, 0.5]), np.array([0.5, 0.5]))
        np.testing.assert_allclose(out, [[0.5, 0.0], [0.0, 0.5]])

    def test_zero_input_rank_one_fill(self):
        rt = np.array([0.5, 0.5])
        ct = np.array([0.3, 0.7])
        out = round_ot(np.zeros((2, 2)), rt, ct)
        np.testing.assert_allclose(out, np.outer(rt, ct) / rt.sum())


class TestSolvePipelines:
    def test_infeasible_violates_mass_when_corner_alive(self, rng):
        # large eps keeps the dummy-corner mass representable
        prob = random_problem(rng, n=10, s_frac=0.5)
        rep = solve_infeasible(prob, eps=1.0, max_iter=200000)
        assert abs(rep.plan.X.sum() - prob.s) > 1e-13
        assert rep.violation > 1e-13

    def test_infeasible_violation_decays_with_dummy_cost(self, rng):
        prob = random_problem(rng, n=8, s_frac=0.5)
        cmax = prob.C.max()
        violations = []
        for mult in (2.0, 10.0, 100.0, 1000.0):
            rep = solve_infeasible(prob, eps=0.5, A_val=mult * cmax,
                                   max_iter=300000)
            violations.append(abs(rep.plan.X.sum() - prob.s))
        for lo, hi in zip(violations[1:], violations[:-1]):
            assert lo <= hi + 1e-12
        assert violations[-1] < violations[0]

    def test_infeasible_balanced_case_is_exact(self, rng):
        n = 5
        r = rng.uniform(0.2, 1.0, n)
        c = rng.uniform(0.2, 1.0, n)
        c *= r.sum() / c.sum()
        prob = validate_problem(r, c, r.sum(), rng.uniform(0, 1, (n, n)))
        rep = solve_infeasible(prob, eps=0.5, max_iter=300000)
        assert abs(rep.plan.X.sum() - prob.s) <= 1e-9 * max(1, prob.b().sum())

    def test_feasible_output_exactly_feasible_for_every_eps(self, rng):
        prob = random_problem(rng, n=7)
        for eps in (1.0, 0.3, 0.1):
            rep = solve_feasible(prob, eps=eps, max_iter=500000)
            assert rep.violation <= feasibility_tol(prob.b())
            assert constraint_violation(rep.plan, prob) <= feasibility_tol(prob.b())

    def test_feasible_gap_meets_tolerance(self, rng):
        for _ in range(5):
            prob = random_problem(rng, n_lo=3, n_hi=8)
            fstar = solve_exact(prob).value
            rep = solve_feasible(prob, eps=1e-2, max_iter=1000000)
            assert rep.objective - fstar <= 1e-2

    def test_feasible_iterations_grow_as_eps_shrinks(self, rng):
        prob = random_problem(rng, n=6, s_frac=0.6)
        iters = [solve_feasible(prob, eps=eps, max_iter=10**6).iterations
                 for eps in (0.5, 0.2, 0.08)]
        assert iters[0] < iters[1] < iters[2]
        infeasible_iters = solve_infeasible(prob, eps=0.2, max_iter=10**6).iterations
        assert iters[1] > infeasible_iters

    def test_trace_records_progress(self, rng):
        prob = random_problem(rng, n=5)
        fstar = solve_exact(prob).value
        rep = solve_feasible(prob, eps=0.1, max_iter=10**6, fstar=fstar,
                             trace_every=10)
        assert rep.trace
        iters = [rec.iter for rec in rep.trace]
        assert iters == sorted(iters)
        assert all(rec.primal_gap is not None for rec in rep.trace)
