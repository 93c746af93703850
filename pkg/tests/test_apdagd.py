import math

import numpy as np
import pytest

from potsolve.apdagd import (
    DualPoint,
    apdagd_loop,
    approx_pot_apdagd,
    dual_value_grad,
    primal_from_dual,
    smoothed_marginals,
)
from potsolve.core import (
    constraint_violation,
    feasibility_tol,
    pot_objective,
    validate_problem,
)
from potsolve.errors import NonFinite, NotConverged
from potsolve.reference import solve_exact

from conftest import random_problem


def random_dual(rng, n, scale=1.0):
    return DualPoint(
        y=rng.uniform(-scale, scale, n),
        z=rng.uniform(-scale, scale, n),
        t=float(rng.uniform(-scale, scale)),
    )


class TestPrimalFromDual:
    def test_closed_form_at_zero(self):
        prob = validate_problem([1.0], [1.0], 1.0, [[0.0]])
        point = primal_from_dual(DualPoint(np.zeros(1), np.zeros(1), 0.0), prob, 1.0)
        e = math.exp(-1.0)
        assert point.X[0, 0] == pytest.approx(e)
        assert point.p[0] == pytest.approx(e)
        assert point.q[0] == pytest.approx(e)

    def test_exponent_homogeneity(self, rng):
        # with zero cost, scaling gamma and lambda together changes nothing
        prob = validate_problem([1, 1], [1, 1], 1.0, np.zeros((2, 2)))
        lam = random_dual(rng, 2)
        doubled = DualPoint(2 * lam.y, 2 * lam.z, 2 * lam.t)
        a = primal_from_dual(lam, prob, 1.0)
        b = primal_from_dual(doubled, prob, 2.0)
        np.testing.assert_allclose(a.X, b.X, rtol=1e-14)
        np.testing.assert_allclose(a.p, b.p, rtol=1e-14)

    def test_matches_scalar_loop(self, rng):
        prob = random_problem(rng, n=3)
        gamma = 0.7
        lam = random_dual(rng, 3)
        point = primal_from_dual(lam, prob, gamma)
        for i in range(3):
            for j in range(3):
                expected = math.exp(
                    -(prob.C[i, j] + lam.y[i] + lam.z[j] + lam.t) / gamma - 1.0
                )
                assert point.X[i, j] == pytest.approx(expected, rel=1e-14)
        for i in range(3):
            assert point.p[i] == pytest.approx(
                math.exp(-lam.y[i] / gamma - 1.0), rel=1e-14
            )
            assert point.q[i] == pytest.approx(
                math.exp(-lam.z[i] / gamma - 1.0), rel=1e-14
            )

    def test_nonfinite_without_clamp(self):
        prob = validate_problem([1.0], [1.0], 1.0, [[0.0]])
        lam = DualPoint(np.array([-1e6]), np.zeros(1), 0.0)
        with pytest.raises(NonFinite):
            primal_from_dual(lam, prob, 1.0, clamp=False)
        point = primal_from_dual(lam, prob, 1.0, clamp=True)
        assert np.all(np.isfinite(point.p))


class TestDualValueGrad:
    def test_value_at_zero_dual(self):
        prob = validate_problem([1.0], [1.0], 1.0, [[0.0]])
        phi, _ = dual_value_grad(DualPoint(np.zeros(1), np.zeros(1), 0.0), prob, 1.0)
        assert phi == pytest.approx(3.0 * math.exp(-1.0), rel=1e-14)

    def test_gradient_matches_finite_differences(self, rng):
        for _ in range(20):
            prob = random_problem(rng, n_lo=2, n_hi=8)
            n = prob.n
            gamma = float(rng.uniform(0.2, 1.5))
            lam = random_dual(rng, n)
            _, grad = dual_value_grad(lam, prob, gamma)
            grad_vec = grad.to_vector()
            lam_vec = lam.to_vector()
            for idx in rng.choice(2 * n + 1, size=min(5, 2 * n + 1), replace=False):
                h = 1e-5 * (1.0 + abs(lam_vec[idx]))
                for sign in (+1, -1):
                    shifted = lam_vec.copy()
                    shifted[idx] += sign * h
                    val, _ = dual_value_grad(
                        DualPoint.from_vector(shifted, n), prob, gamma
                    )
                    if sign > 0:
                        plus = val
                    else:
                        minus = val
                fd = (plus - minus) / (2 * h)
                assert grad_vec[idx] == pytest.approx(
                    fd, rel=1e-5, abs=1e-5 * (1 + abs(fd))
                )

    def test_midpoint_convexity(self, rng):
        prob = random_problem(rng, n=4)
        gamma = 0.5
        for _ in range(30):
            a = random_dual(rng, 4, scale=2.0)
            b = random_dual(rng, 4, scale=2.0)
            mid = DualPoint((a.y + b.y) / 2, (a.z + b.z) / 2, (a.t + b.t) / 2)
            fa, _ = dual_value_grad(a, prob, gamma)
            fb, _ = dual_value_grad(b, prob, gamma)
            fm, _ = dual_value_grad(mid, prob, gamma)
            assert fm <= (fa + fb) / 2 + 1e-12 * max(1.0, abs(fa), abs(fb))


class TestApdagdLoop:
    def test_terminates_with_both_criteria(self, rng):
        prob = random_problem(rng, n=2)
        gamma = 0.05
        point, eta, trace = apdagd_loop(
            prob, gamma, eps_f=1e-3, eps_eq=1e-3, max_iter=50_000, eq_norm="l2",
            trace_every=1,
        )
        from potsolve.core import apply_A_vec

        x = point.to_vector()
        res = apply_A_vec(x, 2) - prob.b()
        assert float(np.sqrt(res @ res)) <= 1e-3
        d = np.concatenate([prob.C.reshape(-1), np.zeros(4)])
        pos = x > 0
        f_val = float(d @ x) + gamma * float(np.sum(x[pos] * np.log(x[pos])))
        phi, _ = dual_value_grad(
            DualPoint.from_vector(eta.to_vector(), 2), prob, gamma
        )
        assert f_val + phi <= 1e-3 + 1e-12

    def test_beta_increases_and_tau_in_range(self, rng):
        prob = random_problem(rng, n=3)
        _, _, trace = apdagd_loop(
            prob, 0.05, eps_f=5e-3, eps_eq=5e-3, max_iter=50_000, trace_every=1
        )
        betas = [row["beta"] for row in trace]
        assert all(b2 > b1 for b1, b2 in zip(betas, betas[1:]))
        assert all(0.0 < row["tau"] <= 1.0 for row in trace)
        assert all(row["M"] > 0 for row in trace)

    def test_surrogate_near_nonnegative(self, rng):
        # weak duality up to the residual cross term
        prob = random_problem(rng, n=3)
        _, _, trace = apdagd_loop(
            prob, 0.1, eps_f=1e-2, eps_eq=1e-2, max_iter=50_000, trace_every=1
        )
        for row in trace:
            assert row["surrogate"] >= -1e-8 - 10.0 * row["res_l2"]

    def test_not_converged_carries_state(self, rng):
        prob = random_problem(rng, n=3)
        with pytest.raises(NotConverged) as info:
            apdagd_loop(prob, 0.05, eps_f=1e-9, eps_eq=1e-9, max_iter=5)
        state = info.value.iterate
        assert state.beta > 0
        assert state.x_hat.X.shape == (3, 3)


class TestApproxWrapper:
    def test_output_feasible_and_near_optimal(self, rng):
        for _ in range(10):
            prob = random_problem(rng, n=5)
            fstar = solve_exact(prob).value
            report = approx_pot_apdagd(prob, eps=1e-2)
            assert report.violation <= feasibility_tol(prob.b())
            assert report.objective - fstar <= 1e-2

    def test_smoothed_marginals_keep_mass_budget(self, rng):
        for _ in range(50):
            prob = random_problem(rng, n_lo=2, n_hi=10)
            _, smoothed = smoothed_marginals(prob, eps=float(rng.uniform(1e-3, 1.0)))
            assert smoothed.r.sum() >= prob.s - 1e-12
            assert smoothed.c.sum() >= prob.s - 1e-12
            assert np.all(smoothed.r > 0)
            assert np.all(smoothed.c > 0)

    def test_trace_gap_uses_rounded_plan(self, rng):
        prob = random_problem(rng, n=4)
        fstar = solve_exact(prob).value
        report = approx_pot_apdagd(prob, eps=0.05, fstar=fstar, trace_every=50)
        assert report.trace
        # rounded plans are feasible, so their gap is bounded below by ~0
        assert all(rec.primal_gap >= -1e-9 for rec in report.trace)

    def test_report_objective_matches_plan(self, rng):
        prob = random_problem(rng, n=4)
        report = approx_pot_apdagd(prob, eps=0.1)
        assert report.objective == pytest.approx(
            pot_objective(report.plan.X, prob.C), rel=1e-12
        )


class TestderivedProperties:
    def test_strong_convexity_of_entropic_primal(self, rng):
        # inner product of gradient differences dominates gamma/D times the
        # squared l1 distance on the mass-D ball
        prob = random_problem(rng, n=3)
        gamma = 0.3
        D = prob.r.sum() + prob.c.sum() - prob.s
        d = np.concatenate([prob.C.reshape(-1), np.zeros(6)])
        N = d.shape[0]
        for _ in range(50):
            x = rng.uniform(1e-3, 1.0, N)
            x *= rng.uniform(0.2, 1.0) * D / x.sum()
            y = rng.uniform(1e-3, 1.0, N)
            y *= rng.uniform(0.2, 1.0) * D / y.sum()
            gx = d + gamma * (np.log(x) + 1.0)
            gy = d + gamma * (np.log(y) + 1.0)
            lhs = float((gx - gy) @ (x - y))
            rhs = gamma / D * float(np.abs(x - y).sum()) ** 2
            assert lhs >= rhs - 1e-10

    def test_converged_dual_satisfies_infinity_bound(self, rng):
        prob = random_problem(rng, n=3)
        eps = 0.05
        config, smoothed = smoothed_marginals(prob, eps)
        _, eta, _ = apdagd_loop(
            smoothed, config.gamma, eps_f=1e-6, eps_eq=1e-6, max_iter=200_000
        )
        gamma = config.gamma
        u = -eta.y / gamma - 1.0
        v = -eta.z / gamma - 1.0
        w = -eta.t / gamma + 1.0
        mass = max(smoothed.r.sum(), smoothed.c.sum())
        bound = prob.C.max() * mass / (gamma * (mass - prob.s)) - math.log(
            min(smoothed.r.min(), smoothed.c.min())
        )
        assert max(np.abs(u).max(), np.abs(v).max(), abs(w)) <= bound
