"""Gradient tracking over row-stochastic networks, with optional multi-round
gossip per iteration.

The tracker state y follows the running gradient, but because the mixing
matrix is only row-stochastic each node also maintains a basis-row estimate
of the matrix powers (its row of V_k = A^k) and rescales its fresh gradient
by the inverse of its own diagonal entry. Two exact identities govern the
dynamics and are checked by the optional probes:

* centroid recursion: pi^T x advances by exactly -alpha * pi^T y,
* tracker conservation: pi^T y always equals pi^T D_k^{-1} g, where D_k is
  the per-node diagonal of V_k.

The multi-gossip variant applies R consecutive gossip rounds per iteration
and averages R gradient samples, so one iteration costs R communication
rounds and R samples per node, the same budget per round as the vanilla
method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import config
from .errors import ConvergenceError, ProbeError, RowGossipError, RunAborted, SmallDiagonalError
from .gossip import a_step
from .spectral import compute_metrics, perron_vector


@dataclass
class StepReport:
    """Metrics of one optimizer iteration, evaluated at the new state.

    ``grad_norm`` is the norm of the node-averaged exact gradient (full
    local batches, no noise), ``objective`` the global objective at the
    weighted centroid when the problem exposes one (else nan). The two
    ``*_residual`` fields hold relative probe deviations when probes ran.
    """

    iter: int
    comm_rounds: int
    samples: int
    grad_norm: float
    consensus_error: float
    descent_deviation: float
    objective: float
    centroid_residual: float | None = None
    tracker_residual: float | None = None

    CSV_HEADER = "comm_rounds,samples,grad_norm,consensus_err,descent_dev,objective"

    def csv_row(self):
        return (
            f"{self.comm_rounds},{self.samples},{self.grad_norm:.17g},"
            f"{self.consensus_error:.17g},{self.descent_deviation:.17g},"
            f"{self.objective:.17g}"
        )


@dataclass
class GtState:
    """Per-node optimizer state, stacked row-wise.

    ``v`` stacks the nodes' Perron-estimate rows (row i of A^(k R) for node
    i), ``d_prev`` the diagonal entries of ``v`` as of the previous
    iteration. ``rngs`` holds one generator per node; each node consumes
    its stream in (iteration, sample) order, so trajectories are pure
    functions of the seed regardless of evaluation scheduling.
    """

    x: np.ndarray
    y: np.ndarray
    g: np.ndarray
    v: np.ndarray
    d_prev: np.ndarray
    iter: int
    alpha: float
    oracle: object
    rngs: list
    pi: np.ndarray = None
    rounds: int = 1
    tracker_scale: float = 0.0

    def diag(self):
        return np.diag(self.v).copy()


def _node_rngs(seed, n):
    return [np.random.default_rng(ss) for ss in np.random.SeedSequence(seed).spawn(n)]


def _minibatch(oracle, xs, rngs, samples):
    g = oracle.stoch_grad_stack(xs, rngs)
    for _ in range(samples - 1):
        g = g + oracle.stoch_grad_stack(xs, rngs)
    return g / samples


def stationary_for_run(m, tol_ladder=(1e-13, None)):
    """Stationary vector at probe-grade accuracy, relaxing the target if needed.

    The conservation probes compare pi-weighted aggregates across many
    rounds, so residual error in pi enters multiplied by the state
    magnitude; ask for more than the default accuracy when reachable.
    """
    last = None
    for tol in tol_ladder:
        try:
            return perron_vector(m, tol=tol)
        except ConvergenceError as exc:
            last = exc
    raise last


def init_mg(m, x0, oracle, alpha, rounds, seed, pi=None):
    """Common-start state with an R-sample minibatch as first gradient."""
    if alpha <= 0:
        raise ValueError(f"step size must be positive, got {alpha}")
    if rounds < 1:
        raise ValueError(f"gossip rounds per iteration must be >= 1, got {rounds}")
    n = oracle.n
    if m is not None and getattr(m, "n", n) != n:
        raise ValueError(f"matrix has {m.n} nodes, oracle has {n}")
    x0 = np.asarray(x0, dtype=float)
    x = np.tile(x0, (n, 1))
    rngs = _node_rngs(seed, n)
    g = _minibatch(oracle, x, rngs, rounds)
    return GtState(
        x=x,
        y=g.copy(),
        g=g,
        v=np.eye(n),
        d_prev=np.ones(n),
        iter=0,
        alpha=float(alpha),
        oracle=oracle,
        rngs=rngs,
        pi=pi,
        rounds=rounds,
    )


def init_gt(m, x0, oracle, alpha, seed, pi=None):
    """Vanilla initialization: one stochastic sample per node."""
    return init_mg(m, x0, oracle, alpha, 1, seed, pi=pi)


def _relative(diff, *scales):
    return float(diff / max(*scales, 1e-300))


def _step(state, m, rounds, probes=False, report=True, probe_tols=None):
    """Advance one iteration of R gossip rounds; returns (state, report)."""
    alpha, oracle = state.alpha, state.oracle
    if np.any(state.d_prev <= config.DIAG_FLOOR):
        node = int(np.argmin(state.d_prev))
        raise SmallDiagonalError(node, state.iter, float(state.d_prev[node]))

    # communication phase: model and Perron-estimate rows share the rounds
    phi = state.x - alpha * state.y
    v = state.v
    for _ in range(rounds):
        phi = a_step(m, phi)
        v = a_step(m, v)
    x_new = phi
    d_new = np.diag(v).copy()
    worst = int(np.argmin(d_new))
    if d_new[worst] <= config.DIAG_FLOOR:
        raise SmallDiagonalError(worst, state.iter + 1, float(d_new[worst]))

    # sampling phase: R fresh samples at the new point
    g_new = _minibatch(oracle, x_new, state.rngs, rounds)

    # tracker phase: correct by old and new inverse diagonals, then mix
    psi = state.y + g_new / d_new[:, None] - state.g / state.d_prev[:, None]
    y_new = psi
    for _ in range(rounds):
        y_new = a_step(m, y_new)

    new_state = GtState(
        x=x_new,
        y=y_new,
        g=g_new,
        v=v,
        d_prev=d_new,
        iter=state.iter + 1,
        alpha=alpha,
        oracle=oracle,
        rngs=state.rngs,
        pi=state.pi,
        rounds=rounds,
        tracker_scale=state.tracker_scale,
    )

    centroid_res = tracker_res = None
    if probes or report:
        pi = state.pi
        if pi is None:
            pi = stationary_for_run(m)
            new_state.pi = pi
    if probes:
        tol_centroid, tol_tracker = probe_tols or (
            config.CENTROID_PROBE_TOL,
            config.TRACKER_PROBE_TOL,
        )
        lhs = pi @ x_new
        step_term = alpha * (pi @ state.y)
        rhs = pi @ state.x - step_term
        centroid_res = _relative(
            np.linalg.norm(lhs - rhs),
            np.linalg.norm(lhs),
            np.linalg.norm(pi @ state.x),
            np.linalg.norm(step_term),
        )
        # the tracker identity is telescoped over the whole run, so float
        # drift scales with the largest aggregate that ever entered it, not
        # with the current (possibly decayed) value; measure against that
        tracked = pi @ y_new
        corrected = pi @ (g_new / d_new[:, None])
        new_state.tracker_scale = max(
            state.tracker_scale, float(np.linalg.norm(tracked)), float(np.linalg.norm(corrected))
        )
        tracker_res = _relative(
            np.linalg.norm(tracked - corrected),
            new_state.tracker_scale,
        )
        if centroid_res > tol_centroid:
            raise ProbeError(
                f"centroid recursion off by {centroid_res:.3e} (tol {tol_centroid:.1e}) "
                f"at iteration {new_state.iter}"
            )
        if tracker_res > tol_tracker:
            raise ProbeError(
                f"tracker conservation off by {tracker_res:.3e} (tol {tol_tracker:.1e}) "
                f"at iteration {new_state.iter}"
            )

    rep = None
    if report:
        exact = oracle.exact_grad_stack(x_new)
        centroid = pi @ x_new
        objective = oracle.objective(centroid)
        rep = StepReport(
            iter=new_state.iter,
            comm_rounds=new_state.iter * rounds,
            samples=new_state.iter * rounds,
            grad_norm=float(np.linalg.norm(exact.mean(axis=0))),
            consensus_error=float(np.linalg.norm(x_new - np.outer(np.ones(oracle.n), centroid))),
            descent_deviation=float(np.linalg.norm(pi @ y_new - g_new.sum(axis=0))),
            objective=float("nan") if objective is None else float(objective),
            centroid_residual=centroid_res,
            tracker_residual=tracker_res,
        )
    return new_state, rep


def gt_step(state, m, probes=False, report=True):
    """One vanilla iteration: single gossip round, single sample per node."""
    return _step(state, m, 1, probes=probes, report=report)


def mg_step(state, m, rounds, probes=False, report=True):
    """One multi-gossip iteration: R rounds and an R-sample minibatch."""
    return _step(state, m, rounds, probes=probes, report=report)


def recommended_rounds(metrics, n):
    """Gossip rounds per iteration that certify stable diagonal inversion.

    ceil(3 (1 + ln kappa + ln n) / (1 - beta)), always >= 1. After this
    many rounds every diagonal estimate stays above 1 / (2 n kappa).
    """
    r = math.ceil(3.0 * (1.0 + math.log(metrics.kappa) + math.log(n)) / (1.0 - metrics.beta))
    return max(r, 1)


def recommended_rounds_alt(metrics, n):
    """Alternative rule weighting the logs instead of the whole numerator:
    ceil((1 + 3 ln kappa + 3 ln n) / (1 - beta)). Exposed for comparison runs."""
    r = math.ceil((1.0 + 3.0 * math.log(metrics.kappa) + 3.0 * math.log(n)) / (1.0 - metrics.beta))
    return max(r, 1)


def run(
    algorithm,
    m,
    oracle,
    alpha,
    total_rounds,
    rounds=1,
    seed=0,
    probes=False,
    record_every=1,
    metrics=None,
    x0=None,
):
    """Execute a budgeted run and return its step reports.

    ``total_rounds`` is the communication budget; the run performs
    ``total_rounds // R`` iterations (R = 1 for ``algorithm="gt"``), so
    vanilla and multi-gossip runs with equal budgets use the same number of
    rounds and samples. Reports carry cumulative round counts so runs with
    different R align. ``rounds="auto"`` uses :func:`recommended_rounds`.

    Raises
    ------
    RunAborted
        On numerical failure mid-run; carries the reports produced so far.
    """
    if algorithm not in ("gt", "mg"):
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if algorithm == "gt":
        r_per_iter = 1
    elif rounds == "auto":
        if metrics is None:
            metrics = compute_metrics(m)
        r_per_iter = recommended_rounds(metrics, oracle.n)
    else:
        r_per_iter = int(rounds)
        if r_per_iter < 1:
            raise ValueError(f"gossip rounds per iteration must be >= 1, got {rounds}")
    if total_rounds < 0:
        raise ValueError(f"round budget must be >= 0, got {total_rounds}")

    pi = metrics.pi if metrics is not None else stationary_for_run(m)
    x0 = np.zeros(oracle.d) if x0 is None else np.asarray(x0, dtype=float)
    state = init_mg(m, x0, oracle, alpha, r_per_iter, seed, pi=pi)
    iterations = total_rounds // r_per_iter
    records = []
    try:
        for t in range(iterations):
            want = ((t + 1) % record_every == 0) or (t + 1 == iterations)
            state, rep = _step(state, m, r_per_iter, probes=probes, report=want)
            if rep is not None:
                records.append(rep)
    except RowGossipError as exc:
        raise RunAborted(f"run stopped at iteration {state.iter}: {exc}", records, cause=exc)
    return records
