"""Spectral diagnostics for row-stochastic mixing matrices.

Computes the stationary (Perron) vector pi, the contraction factor beta
(the operator norm of A - 1 pi^T in the pi-weighted norm), the equilibrium
skewness kappa = max(pi)/min(pi), the power-deviation constant
M = max_k ||A^k - A_inf||_2, the rolling-sum constant s, and a certified
upper bound theta on the inverse diagonals of all matrix powers. Also
provides numerical verifiers for the three linear-algebra inequalities the
optimizer's stability rests on: the rolling-sum bound, the convergence of
inverse diagonals, and the diagonal floor after enough mixing rounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import config
from .errors import ConvergenceError, InvalidWeightError
from .topology import MixingMatrix


def _as_weights(m):
    if isinstance(m, MixingMatrix):
        return m.weights
    return np.asarray(m, dtype=float)


def perron_residual(a, pi):
    """Stationarity defect max_j |(pi^T A - pi^T)_j|."""
    return float(np.abs(pi @ a - pi).max())


def perron_vector(m, tol=None, max_iter=None):
    """Stationary probability vector of a primitive row-stochastic matrix.

    Runs power iteration on the transpose map ``v <- A^T v`` with
    renormalization each step, stopping when the stationarity residual
    (infinity norm of ``pi^T A - pi^T``) drops to ``tol``. A crude
    contraction estimate from 10 warmup steps sizes the default iteration
    budget at ``100 * n * ceil(1 / (1 - beta_hat))``.

    Doubly stochastic input (column sums equal to 1 within 1e-13) is
    detected up front and returns the exact uniform vector, whose residual
    is provably below the column-sum defect; this exactness matters for the
    optimizer's conservation probes.

    Raises
    ------
    ConvergenceError
        If the residual is still above ``tol`` after the iteration budget.
    """
    a = _as_weights(m)
    n = a.shape[0]
    tol = config.PERRON_TOL if tol is None else tol
    uniform = np.full(n, 1.0 / n)
    if n == 1:
        return np.ones(1)
    if np.abs(a.sum(axis=0) - 1.0).max() <= 1e-13:
        return uniform

    at = np.ascontiguousarray(a.T)
    v = uniform.copy()
    prev_diff = None
    beta_hat = 0.5
    for _ in range(10):
        w = at @ v
        w /= w.sum()
        diff = float(np.abs(w - v).max())
        if prev_diff is not None and prev_diff > 0:
            beta_hat = min(max(diff / prev_diff, 0.0), 0.999)
        prev_diff = diff
        v = w
    if max_iter is None:
        max_iter = 100 * n * math.ceil(1.0 / (1.0 - beta_hat))

    best_v, best_res = v, perron_residual(a, v)
    for _ in range(max_iter):
        if best_res <= tol:
            break
        v = at @ v
        v /= v.sum()
        res = perron_residual(a, v)
        if res < best_res:
            best_v, best_res = v, res
    if best_res > tol:
        raise ConvergenceError(
            f"stationary vector residual {best_res:.3e} above tol {tol:.1e} "
            f"after {max_iter} iterations",
            residual=best_res,
        )
    return best_v


def spectral_norm(w, tol=None, max_iter=20000, seed=0):
    """Largest singular value via power iteration on the Gram map W^T W."""
    w = np.asarray(w, dtype=float)
    if w.size == 0 or not np.any(w):
        return 0.0
    tol = config.NORM_TOL if tol is None else tol
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(w.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    stall = 0
    for _ in range(max_iter):
        u = w @ v
        g = w.T @ u
        gn = np.linalg.norm(g)
        if gn == 0.0:
            return 0.0
        v = g / gn
        sigma_new = float(np.linalg.norm(w @ v))
        if abs(sigma_new - sigma) <= tol * max(sigma_new, 1e-300):
            stall += 1
            if stall >= 3:
                return sigma_new
        else:
            stall = 0
        sigma = sigma_new
    return sigma


def pi_operator_norm(w, pi, tol=None):
    """Operator norm of W under the pi-weighted metric.

    Equals the largest singular value of ``diag(pi)^(1/2) W diag(pi)^(-1/2)``.
    ``pi`` must be strictly positive.
    """
    pi = np.asarray(pi, dtype=float)
    if np.any(pi <= 0.0):
        raise InvalidWeightError("weight vector must be strictly positive")
    s = np.sqrt(pi)
    return spectral_norm((s[:, None] * np.asarray(w, dtype=float)) / s[None, :], tol=tol)


def diag_floor_threshold(beta, kappa, n):
    """Smallest round count after which inverse diagonals stay below 2 n kappa."""
    if n == 1:
        return 0
    return math.ceil((2.0 * math.log(kappa) + 2.0 * math.log(n)) / (1.0 - beta))


@dataclass
class NetworkMetrics:
    """Spectral diagnostics of one mixing matrix.

    ``theta`` is a certified upper bound on ``[A^k]_ii^(-1)`` over all
    k >= 1: the measured maximum over the computed horizon (which always
    reaches the diagonal-floor threshold) combined with the floor bound
    ``2 n kappa`` that holds beyond it. ``theta_horizon`` is the measured
    part alone, including the limiting value ``1 / min(pi)``.
    """

    n: int
    pi: np.ndarray
    beta: float
    kappa: float
    m_a: float
    s_a: float
    s_a_mg: float
    theta: float
    theta_horizon: float
    horizon: int
    perron_residual: float

    def check(self, a=None):
        """Assert the defining invariants; returns self for chaining."""
        assert abs(self.pi.sum() - 1.0) <= 1e-12
        assert np.all(self.pi > 0.0)
        if a is not None:
            assert perron_residual(_as_weights(a), self.pi) <= 1e-10
        assert 0.0 <= self.beta < 1.0
        assert self.kappa >= 1.0 - 1e-12
        assert self.theta >= self.theta_horizon - 1e-12
        return self

    def as_dict(self):
        return {
            "n": self.n,
            "beta": self.beta,
            "kappa": self.kappa,
            "theta": self.theta,
            "m_a": self.m_a,
            "s_a": self.s_a,
            "perron_residual": self.perron_residual,
        }


def compute_metrics(m, k_max=None, perron_tol=None):
    """Compute all spectral diagnostics of a mixing matrix.

    The power horizon defaults to ``10 * ceil(1 / (1 - beta))`` and is
    extended to the diagonal-floor threshold when that is larger, so the
    reported ``theta`` is always a certified bound. ``m_a`` is maximized
    over ``k <= k_max`` only, which equals the true supremum once the
    geometric envelope ``sqrt(kappa) * beta^k`` has dropped below the k = 1
    deviation.
    """
    a = _as_weights(m)
    n = a.shape[0]
    pi = perron_vector(a, tol=perron_tol)
    residual = perron_residual(a, pi)
    a_inf = np.outer(np.ones(n), pi)
    beta = 0.0 if n == 1 else pi_operator_norm(a - a_inf, pi, tol=config.BETA_NORM_TOL)
    kappa = float(pi.max() / pi.min())
    if k_max is None:
        k_max = max(1, 10 * math.ceil(1.0 / max(1.0 - beta, 1e-12)))
    threshold = diag_floor_threshold(beta, kappa, n)
    horizon = max(k_max, threshold, 1)

    m_a = 0.0
    min_diag_inv = 1.0 / np.diag(a).min()
    power = a.copy()
    for k in range(1, horizon + 1):
        if k > 1:
            power = power @ a
        if k <= k_max:
            m_a = max(m_a, spectral_norm(power - a_inf))
        dmin = np.diag(power).min()
        if dmin > 0.0:
            min_diag_inv = max(min_diag_inv, 1.0 / dmin)

    theta_horizon = max(min_diag_inv, 1.0 / pi.min())
    theta = theta_horizon if n == 1 else max(theta_horizon, 2.0 * n * kappa)
    gap = max(1.0 - beta, 1e-300)
    s_a = m_a * (1.0 + 0.5 * math.log(kappa)) / gap
    s_a_mg = m_a * 2.0 * (1.0 + math.log(kappa)) / gap
    return NetworkMetrics(
        n=n,
        pi=pi,
        beta=beta,
        kappa=kappa,
        m_a=m_a,
        s_a=s_a,
        s_a_mg=s_a_mg,
        theta=theta,
        theta_horizon=theta_horizon,
        horizon=horizon,
        perron_residual=residual,
    )


def verify_rolling_sum(m, deltas, metrics=None):
    """Check the rolling-sum inequality on a concrete perturbation sequence.

    Evaluates ``lhs = sum_k || sum_{i<=k} (A^(k+1-i) - A_inf) D_i ||_F^2``
    against ``rhs = s^2 * sum_i ||D_i||_F^2`` and reports whether
    ``lhs <= rhs`` up to rounding slack. Uses the identity
    ``A^j - A_inf = (A - A_inf)^j`` to build the inner sums incrementally.
    """
    a = _as_weights(m)
    n = a.shape[0]
    deltas = [np.asarray(d, dtype=float) for d in deltas]
    for d in deltas:
        if d.shape[0] != n:
            raise ValueError(f"perturbation has {d.shape[0]} rows, matrix has {n}")
    if metrics is None:
        metrics = compute_metrics(m)
    a_inf = np.outer(np.ones(n), metrics.pi)
    contraction = a - a_inf

    lhs = 0.0
    rhs_sum = 0.0
    running = np.zeros_like(deltas[0]) if deltas else None
    for d in deltas:
        running = contraction @ (running + d)
        lhs += float(np.sum(running**2))
        rhs_sum += float(np.sum(d**2))
    rhs = metrics.s_a**2 * rhs_sum
    return {
        "lhs": lhs,
        "rhs": rhs,
        "holds": lhs <= rhs * (1.0 + config.INEQ_SLACK),
    }


def verify_diag_convergence(m, k_max, metrics=None):
    """Measure the three inverse-diagonal convergence bounds for k <= k_max.

    For each k compares, against their geometric envelopes,
    ``||pi^T D_k^-1 - 1^T||``, ``||D_k^-1 - Pi^-1||_2`` and
    ``||D_k^-1 - D_{k+1}^-1||_2`` where ``D_k = Diag(A^k)``. Returns a dict
    with per-k rows and an overall ``holds`` flag. A non-positive diagonal
    entry is reported as the offending ``(k, i)`` pair instead of being
    inverted.
    """
    a = _as_weights(m)
    n = a.shape[0]
    if metrics is None:
        metrics = compute_metrics(m)
    pi, beta, kappa, theta = metrics.pi, metrics.beta, metrics.kappa, metrics.theta
    envelope1 = theta * math.sqrt(n * kappa)
    envelope23 = theta * math.sqrt(kappa**3 * n**3)

    rows = []
    holds = True
    power = a.copy()
    diag_k = np.diag(power).copy()
    for k in range(1, k_max + 1):
        power = power @ a
        diag_next = np.diag(power).copy()
        bad = int(np.argmin(diag_k))
        if diag_k[bad] <= 0.0:
            return {"holds": False, "zero_diagonal": (k, bad), "rows": rows}
        inv_k = 1.0 / diag_k
        inv_next = 1.0 / diag_next if np.all(diag_next > 0.0) else None
        decay = beta**k
        row = {
            "k": k,
            "stationary_defect": float(np.linalg.norm(pi * inv_k - 1.0)),
            "stationary_bound": envelope1 * decay,
            "limit_gap": float(np.abs(inv_k - 1.0 / pi).max()),
            "limit_bound": envelope23 * decay,
            "step_gap": float(np.abs(inv_k - inv_next).max()) if inv_next is not None else np.inf,
            "step_bound": 2.0 * envelope23 * decay,
        }
        row["holds"] = (
            row["stationary_defect"] <= row["stationary_bound"] * (1.0 + config.INEQ_SLACK)
            and row["limit_gap"] <= row["limit_bound"] * (1.0 + config.INEQ_SLACK)
            and row["step_gap"] <= row["step_bound"] * (1.0 + config.INEQ_SLACK)
        )
        holds = holds and row["holds"]
        rows.append(row)
        diag_k = diag_next
    return {"holds": holds, "rows": rows}


def check_diag_floor(m, k, metrics=None):
    """Check that min_i [A^k]_ii >= 1 / (2 n kappa) at a post-threshold k.

    Raises
    ------
    ValueError
        If ``k`` is below the mixing threshold
        ``ceil((2 ln kappa + 2 ln n) / (1 - beta))``; the message names it.
    """
    a = _as_weights(m)
    n = a.shape[0]
    if metrics is None:
        metrics = compute_metrics(m)
    threshold = diag_floor_threshold(metrics.beta, metrics.kappa, n)
    if k < max(threshold, 1):
        raise ValueError(f"k={k} is below the diagonal-floor threshold {max(threshold, 1)}")
    min_diag = float(np.diag(np.linalg.matrix_power(a, k)).min())
    bound = 1.0 / (2.0 * n * metrics.kappa)
    return {
        "holds": min_diag >= bound * (1.0 - config.INEQ_SLACK),
        "min_diag": min_diag,
        "bound": bound,
        "threshold": max(threshold, 1),
    }
