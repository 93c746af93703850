"""Accelerated primal-dual descent on the smooth entropic dual.

Dualizing the entropy-regularized problem gives an unconstrained smooth
objective over the multipliers ``(y, z, t)`` of the three equality blocks;
the maximizing primal point has closed form ``X_ij = exp(-(C_ij + y_i +
z_j + t)/gamma - 1)`` with analogous expressions for the slacks, and the
dual gradient is ``b - A x(lambda)``.  The loop below runs accelerated
steps with a doubling/halving search for the local smoothness constant and
aggregates a primal average whose duality-gap surrogate and constraint
residual drive termination.  The wrapper smooths the marginals, solves at
a derived tolerance, and repairs the average onto the original feasible
set, giving an additive-error approximation of the unregularized optimum.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .core import (
    IterationRecord,
    PotProblem,
    PrimalPoint,
    SolveReport,
    apply_A_vec,
    constraint_violation,
    pot_objective,
)
from .errors import LineSearchStall, NonFinite, NotConverged
from .rounding import round_pot

__all__ = [
    "DualPoint",
    "EntropicConfig",
    "ApdagdState",
    "primal_from_dual",
    "dual_value_grad",
    "apdagd_loop",
    "approx_pot_apdagd",
]

_EXP_CLAMP = 700.0
_M_CAP = 1e30
_M_FLOOR = 1e-12
_GAMMA_FLOOR = 1e-9


@dataclass
class DualPoint:
    """Multipliers (y, z, t) for the row, column and mass constraints."""

    y: np.ndarray
    z: np.ndarray
    t: float

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.y, self.z, [self.t]])

    @classmethod
    def from_vector(cls, lam: np.ndarray, n: int) -> "DualPoint":
        return cls(y=lam[:n].copy(), z=lam[n : 2 * n].copy(), t=float(lam[2 * n]))


@dataclass
class EntropicConfig:
    gamma: float
    eps: float
    eps_tilde: float


@dataclass
class ApdagdState:
    lambda_: DualPoint
    eta: DualPoint
    zeta: DualPoint
    alpha: float
    beta: float
    M: float
    x_hat: PrimalPoint


class _DualObjective:
    """Value, gradient and maximizing primal of the entropic dual."""

    def __init__(self, problem: PotProblem, gamma: float, clamp: bool = True):
        self.n = problem.n
        self.gamma = gamma
        self.clamp = clamp
        self.b = problem.b()
        self.r, self.c, self.s = problem.r, problem.c, problem.s
        self.K = -problem.C / gamma  # reused across evaluations

    def _exponents(self, lam):
        n, g = self.n, self.gamma
        ay = -lam[:n] / g
        az = -lam[n : 2 * n] / g
        at = -lam[2 * n] / g
        EX = self.K + ay[:, None] + az[None, :] + (at - 1.0)
        Ep = ay - 1.0
        Eq = az - 1.0
        if self.clamp:
            np.minimum(EX, _EXP_CLAMP, out=EX)
            Ep = np.minimum(Ep, _EXP_CLAMP)
            Eq = np.minimum(Eq, _EXP_CLAMP)
        elif max(EX.max(), Ep.max(), Eq.max()) > _EXP_CLAMP:
            raise NonFinite("dual exponent exceeds the overflow threshold")
        return EX, Ep, Eq

    def primal(self, lam):
        EX, Ep, Eq = self._exponents(lam)
        with np.errstate(over="ignore", under="ignore"):
            return np.exp(EX), np.exp(Ep), np.exp(Eq)

    def value_grad_primal(self, lam):
        X, p, q = self.primal(lam)
        with np.errstate(over="ignore", invalid="ignore"):
            total = float(X.sum() + p.sum() + q.sum())
            phi = float(lam @ self.b) + self.gamma * total
            grad = np.concatenate([
                self.r - (X.sum(axis=1) + p),
                self.c - (X.sum(axis=0) + q),
                [self.s - X.sum()],
            ])
        x_vec = np.concatenate([X.reshape(-1), p, q])
        return phi, grad, x_vec

    def value(self, lam):
        X, p, q = self.primal(lam)
        with np.errstate(over="ignore", invalid="ignore"):
            return float(lam @ self.b) + self.gamma * float(
                X.sum() + p.sum() + q.sum()
            )


def primal_from_dual(lambda_: DualPoint, problem: PotProblem, gamma: float,
                     clamp: bool = True) -> PrimalPoint:
    """Closed-form maximizer x(lambda), evaluated in the log domain."""
    obj = _DualObjective(problem, gamma, clamp=clamp)
    X, p, q = obj.primal(lambda_.to_vector())
    return PrimalPoint(X=X, p=p, q=q)


def dual_value_grad(lambda_: DualPoint, problem: PotProblem, gamma: float,
                    clamp: bool = True):
    """Dual value <lambda, b> + gamma |x(lambda)|_1 and gradient b - A x."""
    obj = _DualObjective(problem, gamma, clamp=clamp)
    phi, grad, _ = obj.value_grad_primal(lambda_.to_vector())
    n = problem.n
    return phi, DualPoint.from_vector(grad, n)


def _entropic_value(x_vec, d, gamma):
    pos = x_vec > 0
    ent = float(np.sum(x_vec[pos] * np.log(x_vec[pos])))
    return float(d @ x_vec) + gamma * ent


def apdagd_loop(problem: PotProblem, gamma: float, eps_f: float, eps_eq: float,
                L0: float = 1.0, max_iter: int = 100_000, eq_norm: str = "l2",
                callback=None, trace_every: int = 0):
    """Accelerated dual descent with adaptive local smoothness search.

    Stops once the duality-gap surrogate f(x_hat) + phi(eta) falls below
    ``eps_f`` and the residual ``|A x_hat - b|`` (in ``eq_norm``) below
    ``eps_eq``.  Each outer step retries with doubled M until the local
    descent inequality holds, then starts the next step at M/2.  Returns
    (x_hat, eta, trace); trace rows are dicts carrying both residual norms.
    Raises NotConverged at max_iter and LineSearchStall if M blows past
    its cap.
    """
    if L0 <= 0 or eps_f <= 0 or eps_eq <= 0:
        raise ValueError("L0, eps_f and eps_eq must be positive")
    if eq_norm not in ("l1", "l2"):
        raise ValueError("eq_norm must be 'l1' or 'l2'")
    n = problem.n
    obj = _DualObjective(problem, gamma)
    d = np.concatenate([problem.C.reshape(-1), np.zeros(2 * n)])
    b = problem.b()

    dim = 2 * n + 1
    eta = np.zeros(dim)
    zeta = np.zeros(dim)
    lam = np.zeros(dim)
    x_hat = np.zeros(n * n + 2 * n)
    beta = 0.0
    M_prev = L0
    trace: list[dict] = []
    start = time.perf_counter()

    for k in range(1, max_iter + 1):
        M = max(M_prev / 2.0, _M_FLOOR)
        while True:
            alpha = (1.0 + math.sqrt(1.0 + 4.0 * M * beta)) / (2.0 * M)
            beta_new = beta + alpha
            tau = alpha / beta_new
            lam = tau * zeta + (1.0 - tau) * eta
            phi_l, grad_l, x_l = obj.value_grad_primal(lam)
            zeta_try = zeta - alpha * grad_l
            eta_try = tau * zeta_try + (1.0 - tau) * eta
            phi_e = obj.value(eta_try)
            step = eta_try - lam
            rhs = phi_l + float(grad_l @ step) + 0.5 * M * float(step @ step)
            if math.isfinite(phi_e) and math.isfinite(rhs) and phi_e <= rhs:
                break
            M *= 2.0
            if M > _M_CAP:
                raise LineSearchStall(f"smoothness estimate exceeded {_M_CAP}")
        x_hat = tau * x_l + (1.0 - tau) * x_hat
        beta, zeta, eta = beta_new, zeta_try, eta_try
        M_prev = M

        surrogate = _entropic_value(x_hat, d, gamma) + phi_e
        res = apply_A_vec(x_hat, n) - b
        res_l1 = float(np.abs(res).sum())
        res_l2 = float(np.sqrt(res @ res))
        res_used = res_l1 if eq_norm == "l1" else res_l2
        if trace_every and k % trace_every == 0:
            trace.append({
                "iter": k, "surrogate": surrogate, "res_l1": res_l1,
                "res_l2": res_l2, "objective": float(d @ x_hat),
                "M": M, "beta": beta, "tau": tau,
                "elapsed": time.perf_counter() - start,
            })
        if callback is not None and trace_every and k % trace_every == 0:
            callback(k, x_hat, eta, surrogate, res_l1, res_l2,
                     time.perf_counter() - start)
        if surrogate <= eps_f and res_used <= eps_eq:
            if not trace or trace[-1]["iter"] != k:
                trace.append({
                    "iter": k, "surrogate": surrogate, "res_l1": res_l1,
                    "res_l2": res_l2, "objective": float(d @ x_hat),
                    "M": M, "beta": beta, "tau": tau,
                    "elapsed": time.perf_counter() - start,
                })
            return (
                PrimalPoint.from_vector(x_hat, n),
                DualPoint.from_vector(eta, n),
                trace,
            )
    raise NotConverged(
        f"termination criteria not met after {max_iter} iterations "
        f"(surrogate={surrogate:.3e}, residual={res_used:.3e})",
        iterate=ApdagdState(
            lambda_=DualPoint.from_vector(lam, n),
            eta=DualPoint.from_vector(eta, n),
            zeta=DualPoint.from_vector(zeta, n),
            alpha=alpha, beta=beta, M=M_prev,
            x_hat=PrimalPoint.from_vector(x_hat, n),
        ),
        marginal_error=res_l1,
    )


def smoothed_marginals(problem: PotProblem, eps: float):
    """Config and interior-shifted marginals for the approximation wrapper."""
    n = problem.n
    cmax = float(problem.C.max()) if problem.C.size else 0.0
    gamma = max(eps / (4.0 * math.log(max(n, 2))), _GAMMA_FLOOR)
    eps_tilde = eps / (8.0 * cmax) if cmax > 0 else 4.0
    r_sum, c_sum = float(problem.r.sum()), float(problem.c.sum())
    if r_sum > 1.0:
        eps_tilde = min(eps_tilde, 8.0 * (r_sum - problem.s) / (r_sum - 1.0))
    if c_sum > 1.0:
        eps_tilde = min(eps_tilde, 8.0 * (c_sum - problem.s) / (c_sum - 1.0))
    # The caps hit zero only when s equals a marginal mass; keep a sliver of
    # smoothing so the dual stays bounded.
    eps_tilde = min(max(eps_tilde, 1e-12), 4.0)
    r_t = (1.0 - eps_tilde / 8.0) * problem.r + eps_tilde / (8.0 * n)
    c_t = (1.0 - eps_tilde / 8.0) * problem.c + eps_tilde / (8.0 * n)
    config = EntropicConfig(gamma=gamma, eps=eps, eps_tilde=eps_tilde)
    return config, PotProblem(r=r_t, c=c_t, s=problem.s, C=problem.C)


def approx_pot_apdagd(problem: PotProblem, eps: float, max_iter: int = 10_000,
                      fstar: float | None = None, trace_every: int = 0) -> SolveReport:
    """Additive eps-approximation: smooth, solve the dual, repair feasibility.

    The accelerated loop runs on interior-shifted marginals at tolerance
    eps_tilde/2 (l1 residual) and the averaged primal is projected onto the
    original feasible set, so the output is exactly feasible and, at small
    n, within eps of the optimum.
    """
    config, smoothed = smoothed_marginals(problem, eps)
    start = time.perf_counter()
    records: list[IterationRecord] = []

    def on_iteration(k, x_hat, _eta, surrogate, res_l1, res_l2, _elapsed):
        plan = PrimalPoint.from_vector(x_hat, problem.n)
        gap = None
        if fstar is not None:
            rounded = round_pot(plan, problem).rounded
            gap = pot_objective(rounded.X, problem.C) - fstar
        records.append(IterationRecord(
            iter=k,
            objective=pot_objective(plan.X, problem.C),
            violation=constraint_violation(plan, problem),
            elapsed=time.perf_counter() - start,
            primal_gap=gap,
        ))

    def finish(plan_point, iterations, loop_trace):
        outcome = round_pot(plan_point, problem)
        plan = outcome.rounded
        return SolveReport(
            plan=plan,
            objective=pot_objective(plan.X, problem.C),
            violation=constraint_violation(plan, problem),
            iterations=iterations,
            trace=records,
            meta={
                "algo": "apdagd",
                "gamma": config.gamma, "eps": eps,
                "eps_tilde": config.eps_tilde,
                "eps_f": eps / 2.0, "eps_eq": config.eps_tilde / 2.0,
                "f_star": fstar,
                "loop_trace": loop_trace,
                "round_moved_l1": outcome.moved_l1,
            },
        )

    try:
        x_point, _eta, loop_trace = apdagd_loop(
            smoothed, config.gamma,
            eps_f=eps / 2.0, eps_eq=config.eps_tilde / 2.0,
            L0=1.0, max_iter=max_iter, eq_norm="l1",
            callback=on_iteration if trace_every else None,
            trace_every=trace_every,
        )
    except NotConverged as exc:
        iterations = max_iter
        exc.report = finish(exc.iterate.x_hat, iterations, [])
        raise
    iterations = loop_trace[-1]["iter"] if loop_trace else max_iter
    return finish(x_point, iterations, loop_trace)
