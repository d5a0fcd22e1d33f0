"""Synchronous gossip steps and the diagonal-corrected averaging protocol.

States are stacked row-wise: an ``(n, d)`` array whose row i is the local
vector held by node i. One gossip round maps the stack z to A z, so each
node only combines values received from its in-neighbors. Because the
mixing matrix is merely row-stochastic, plain gossip converges to the
pi-weighted average; the diagonal-corrected protocol estimates pi through
the diagonal entries of the matrix powers and rescales so the limit is the
true unweighted mean.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from . import config
from .errors import SmallDiagonalError
from .topology import MixingMatrix

_LOCALITY_CHECKS = False


@contextmanager
def locality_checks(enabled=True):
    """Recompute every gossip round from in-neighbor data only and compare.

    Inside the context each :func:`a_step` call re-evaluates its result row
    by row, reading only entries on the matrix support, and fails if that
    disagrees with the dense product. Costs an extra Python loop per round;
    meant for tests.
    """
    global _LOCALITY_CHECKS
    prev = _LOCALITY_CHECKS
    _LOCALITY_CHECKS = enabled
    try:
        yield
    finally:
        _LOCALITY_CHECKS = prev


def _gather_rows(weights, supports, z):
    """Per-row product using only supported entries; locality by construction."""
    out = np.empty((weights.shape[0], z.shape[1]), dtype=float)
    for i, nbrs in enumerate(supports):
        out[i] = weights[i, nbrs] @ z[nbrs]
    return out


def a_step(m, z):
    """One synchronous partial-averaging round: returns A z.

    Row i of the result depends only on rows j with a positive weight
    ``a[i, j]``; under :func:`locality_checks` this is asserted by
    recomputing the round from the support alone.
    """
    a = m.weights if isinstance(m, MixingMatrix) else np.asarray(m, dtype=float)
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if z.shape[0] != a.shape[0]:
        raise ValueError(f"state has {z.shape[0]} rows, matrix is {a.shape[0]}x{a.shape[1]}")
    out = a @ z
    if _LOCALITY_CHECKS:
        supports = (
            m.in_neighbors
            if isinstance(m, MixingMatrix)
            else [np.flatnonzero(row > 0.0) for row in a]
        )
        local = _gather_rows(a, supports, z)
        err = np.abs(out - local).max()
        scale = max(np.abs(out).max(), 1.0)
        if err > 1e-12 * scale:
            raise AssertionError(f"locality violation: dense and local rounds differ by {err:.3e}")
    return out


def multi_gossip(m, z, rounds):
    """Apply ``rounds`` sequential gossip rounds (A^R z, never forming A^R)."""
    if rounds < 0:
        raise ValueError(f"round count must be >= 0, got {rounds}")
    z = np.asarray(z, dtype=float)
    out = z.copy()
    for _ in range(rounds):
        out = a_step(m, out)
    return out


def _diag_after(m, rounds, diag_floor):
    """Gossip the stacked basis rows and return (matrix, diagonal) after K rounds."""
    n = m.n if isinstance(m, MixingMatrix) else np.asarray(m).shape[0]
    v = np.eye(n)
    for _ in range(rounds):
        v = a_step(m, v)
    d = np.diag(v).copy()
    worst = int(np.argmin(d))
    if d[worst] <= diag_floor:
        raise SmallDiagonalError(worst, rounds, float(d[worst]))
    return v, d


def pull_diag_average(m, z, rounds, mode="two_phase", diag_floor=None):
    """Estimate the global (unweighted) mean by diagonal-corrected gossip.

    In ``two_phase`` mode each node first gossips its basis row for
    ``rounds`` rounds, rescales its value by ``1 / (n * v_ii)``, then
    gossips the rescaled values for another ``rounds`` rounds. As the round
    count grows the result converges geometrically to the exact mean
    replicated on every node.

    ``interleaved`` mode instead returns the power-iteration form
    ``V_K D_K^{-1} z`` with ``D_K = Diag(n V_K)``, which is the quantity
    whose per-round trajectory :func:`pull_diag_trace` records.

    Raises
    ------
    SmallDiagonalError
        If any node's diagonal estimate falls to ``diag_floor`` or below.
    """
    if rounds < 1:
        raise ValueError(f"round count must be >= 1, got {rounds}")
    floor = config.DIAG_FLOOR if diag_floor is None else diag_floor
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    n = z.shape[0]
    v, d = _diag_after(m, rounds, floor)
    if mode == "two_phase":
        rescaled = z / (n * d)[:, None]
        return multi_gossip(m, rescaled, rounds)
    if mode == "interleaved":
        return v @ (z / (n * d)[:, None])
    raise ValueError(f"unknown mode {mode!r}")


def pull_diag_trace(m, z, rounds, diag_floor=None):
    """Per-round iterates of the interleaved correction, rounds 1..K.

    Returns an array of shape ``(rounds, n, d)``; slice k-1 holds
    ``V_k D_k^{-1} z``. Useful for plotting how fast the corrected state
    approaches the true mean.
    """
    if rounds < 1:
        raise ValueError(f"round count must be >= 1, got {rounds}")
    floor = config.DIAG_FLOOR if diag_floor is None else diag_floor
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    n = z.shape[0]
    v = np.eye(n)
    out = np.empty((rounds, n, z.shape[1]))
    for k in range(1, rounds + 1):
        v = a_step(m, v)
        d = np.diag(v).copy()
        worst = int(np.argmin(d))
        if d[worst] <= floor:
            raise SmallDiagonalError(worst, k, float(d[worst]))
        out[k - 1] = v @ (z / (n * d)[:, None])
    return out


def consensus_error(z, reference):
    """Frobenius distance between a stack and a reference row on every node."""
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    ref = np.atleast_1d(np.asarray(reference, dtype=float))
    if ref.shape[0] != z.shape[1]:
        raise ValueError(f"reference has {ref.shape[0]} entries, state rows have {z.shape[1]}")
    return float(np.linalg.norm(z - ref[None, :]))
