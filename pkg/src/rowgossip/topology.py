"""Network topologies and row-stochastic weight assignment.

Graphs are directed: an edge ``(j, i)`` means node ``j`` sends to node ``i``,
so ``j`` is an in-neighbor of ``i``. Every node always has an implicit
self-loop; generators never store it explicitly. Mixing weights are assigned
from in-degree information only, which is what a node can observe by
counting received messages: ``a[i, j] = 1 / (1 + indeg(i))`` for every
in-neighbor ``j`` of ``i`` and for ``j = i``.

All random generators take explicit seeds and use numpy's PCG64 generator
(`numpy.random.default_rng`), so instances regenerate bit-identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import config
from .errors import GenerationError, InvalidGraphError, InvalidMatrixError


@dataclass(frozen=True)
class DirectedGraph:
    """Directed graph with implicit self-loops on every node.

    Parameters
    ----------
    n : int
        Node count, >= 1.
    edges : frozenset of (int, int)
        Ordered pairs ``(sender, receiver)``. Self-loops are implicit and
        must not be listed.
    """

    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 1:
            raise InvalidGraphError(f"node count must be >= 1, got {self.n}")
        object.__setattr__(self, "edges", frozenset(self.edges))
        for j, i in self.edges:
            if not (0 <= j < self.n and 0 <= i < self.n):
                raise InvalidGraphError(f"edge ({j}, {i}) out of range for n={self.n}")
            if j == i:
                raise InvalidGraphError("self-loops are implicit; do not list them")

    def in_neighbors(self, i):
        """Senders to node ``i``, excluding ``i`` itself."""
        return sorted(j for (j, k) in self.edges if k == i)

    def in_degree(self, i):
        """Number of in-neighbors of ``i``, excluding the self-loop."""
        return sum(1 for (_, k) in self.edges if k == i)

    def is_strongly_connected(self):
        fwd = [[] for _ in range(self.n)]
        rev = [[] for _ in range(self.n)]
        for j, i in self.edges:
            fwd[j].append(i)
            rev[i].append(j)
        return _reaches_all(fwd, self.n) and _reaches_all(rev, self.n)


def _reaches_all(adj, n):
    seen = [False] * n
    seen[0] = True
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    return all(seen)


class MixingMatrix:
    """Dense row-stochastic mixing matrix with cached support structure.

    Wraps an ``(n, n)`` array of non-negative weights whose rows sum to one.
    ``weights[i, j] > 0`` exactly when ``j`` is an in-neighbor of ``i``
    (including ``j == i``). Use :func:`weights_from_indegree` to build one
    from a graph, or :meth:`from_array` for an existing array; both validate.
    """

    def __init__(self, weights, validate=True):
        self.weights = np.ascontiguousarray(weights, dtype=float)
        if self.weights.ndim != 2 or self.weights.shape[0] != self.weights.shape[1]:
            raise InvalidMatrixError(f"expected a square matrix, got shape {self.weights.shape}")
        self.n = self.weights.shape[0]
        self._in_neighbors = None
        if validate:
            self.validate()

    @classmethod
    def from_array(cls, weights):
        return cls(weights, validate=True)

    @property
    def in_neighbors(self):
        """Per-row index arrays of the support, self included."""
        if self._in_neighbors is None:
            self._in_neighbors = [np.flatnonzero(row > 0.0) for row in self.weights]
        return self._in_neighbors

    def validate(self, row_sum_tol=None):
        """Check row-stochasticity, non-negativity and primitivity.

        Raises
        ------
        InvalidMatrixError
            If any row sum deviates from 1 beyond ``row_sum_tol``, any entry
            is negative, or no power up to n**2 is entrywise positive.
        """
        tol = config.ROW_SUM_TOL if row_sum_tol is None else row_sum_tol
        a = self.weights
        if np.any(a < 0.0):
            raise InvalidMatrixError("negative entries in mixing matrix")
        row_err = np.abs(a.sum(axis=1) - 1.0).max()
        if row_err > tol:
            raise InvalidMatrixError(f"row sums deviate from 1 by {row_err:.3e} (tol {tol:.1e})")
        if not np.isfinite(a).all():
            raise InvalidMatrixError("non-finite entries in mixing matrix")
        if not _is_primitive(a):
            raise InvalidMatrixError("matrix is not primitive: no power up to n^2 is positive")
        return self


def _is_primitive(a):
    """Boolean matrix powering: some power <= n^2 must be entrywise positive."""
    n = a.shape[0]
    b = (a > 0.0).astype(float)
    power = 1
    while power <= n * n:
        if np.all(b > 0.0):
            return True
        b = np.minimum(b @ b, 1.0)
        power *= 2
    return bool(np.all(b > 0.0))


# ---------------------------------------------------------------------------
# generators


def build_exponential(n):
    """Directed exponential graph: node i receives from i - 2**j mod n.

    Offsets are ``{2**j : 2**j < n}``, so for power-of-two n each node has
    log2(n) in-neighbors besides itself. n = 1 degenerates to the single
    node with its self-loop.
    """
    if n < 1:
        raise InvalidGraphError(f"node count must be >= 1, got {n}")
    edges = set()
    offset = 1
    while offset < n:
        for i in range(n):
            edges.add(((i - offset) % n, i))
        offset *= 2
    return DirectedGraph(n, frozenset(edges))


def build_directed_ring(n):
    """Directed cycle 0 -> 1 -> ... -> n-1 -> 0 plus self-loops."""
    if n < 2:
        raise InvalidGraphError(f"directed ring needs n >= 2, got {n}")
    return DirectedGraph(n, frozenset((i, (i + 1) % n) for i in range(n)))


def build_complete(n):
    """All-to-all graph; with in-degree weights this is exact averaging."""
    if n < 1:
        raise InvalidGraphError(f"node count must be >= 1, got {n}")
    return DirectedGraph(n, frozenset((j, i) for j in range(n) for i in range(n) if j != i))


def build_grid(rows, cols):
    """Undirected 2D lattice stored as a symmetric edge set."""
    if rows < 1 or cols < 1:
        raise InvalidGraphError(f"grid sizes must be >= 1, got {rows}x{cols}")
    n = rows * cols
    edges = set()
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols:
                edges |= {(i, i + 1), (i + 1, i)}
            if r + 1 < rows:
                edges |= {(i, i + cols), (i + cols, i)}
    return DirectedGraph(n, frozenset(edges))


def build_geometric(n, radius, seed):
    """Random geometric graph on the unit square.

    Nodes are placed uniformly at random; pairs within ``radius`` are
    connected in both directions. If the result is disconnected the radius
    is escalated by 10% (same point set) up to ``config.MAX_RADIUS_RETRIES``
    times before raising :class:`GenerationError`.
    """
    if n < 1:
        raise InvalidGraphError(f"node count must be >= 1, got {n}")
    if not (0.0 < radius <= np.sqrt(2.0)):
        raise InvalidGraphError(f"radius must lie in (0, sqrt(2)], got {radius}")
    rng = np.random.default_rng(seed)
    points = rng.uniform(0.0, 1.0, size=(n, 2))
    r = float(radius)
    for _ in range(config.MAX_RADIUS_RETRIES + 1):
        g = _connect_within(points, r)
        if g.is_strongly_connected():
            return g
        r *= 1.1
    raise GenerationError(
        f"geometric graph with n={n}, radius={radius}, seed={seed} stayed "
        f"disconnected after {config.MAX_RADIUS_RETRIES} radius escalations"
    )


def _connect_within(points, radius):
    n = len(points)
    d2 = np.sum((points[:, None, :] - points[None, :, :]) ** 2, axis=-1)
    edges = set()
    for i in range(n):
        for j in range(i + 1, n):
            if d2[i, j] <= radius * radius:
                edges |= {(i, j), (j, i)}
    return DirectedGraph(n, frozenset(edges))


def build_nearest_neighbor(n, k, seed):
    """k-nearest-neighbor graph on uniform random points, symmetrized."""
    if n < 1:
        raise InvalidGraphError(f"node count must be >= 1, got {n}")
    if not (0 <= k < n):
        raise InvalidGraphError(f"need 0 <= k < n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    points = rng.uniform(0.0, 1.0, size=(n, 2))
    d2 = np.sum((points[:, None, :] - points[None, :, :]) ** 2, axis=-1)
    np.fill_diagonal(d2, np.inf)
    edges = set()
    for i in range(n):
        for j in np.argsort(d2[i])[:k]:
            edges |= {(i, int(j)), (int(j), i)}
    g = DirectedGraph(n, frozenset(edges))
    if not g.is_strongly_connected():
        raise GenerationError(
            f"nearest-neighbor graph with n={n}, k={k}, seed={seed} is "
            f"disconnected; pick a larger k or another seed"
        )
    return g


# ---------------------------------------------------------------------------
# weights


def weights_from_indegree(g):
    """Row-stochastic weights from in-degree counts.

    Every node spreads weight uniformly over its in-neighbors and itself:
    ``a[i, j] = 1 / (1 + indeg(i))``. The graph must be strongly connected;
    together with the self-loops this makes the matrix primitive.
    """
    if not g.is_strongly_connected():
        raise InvalidGraphError("graph is not strongly connected")
    a = np.zeros((g.n, g.n))
    for i in range(g.n):
        nbrs = g.in_neighbors(i)
        w = 1.0 / (1.0 + len(nbrs))
        a[i, i] = w
        for j in nbrs:
            a[i, j] = w
    return MixingMatrix(a)


# ---------------------------------------------------------------------------
# plain-text round-trip formats


def save_matrix_csv(m, path):
    """Write a matrix as text: one line with n, then n comma-separated rows.

    Values are printed with 17 significant digits so the round-trip is
    bit-exact for doubles.
    """
    a = m.weights if isinstance(m, MixingMatrix) else np.asarray(m, dtype=float)
    with open(path, "w") as fh:
        fh.write(f"{a.shape[0]}\n")
        for row in a:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def load_matrix_csv(path, validate=True):
    """Read a matrix written by :func:`save_matrix_csv`."""
    with open(path) as fh:
        header = fh.readline().strip()
        try:
            n = int(header)
        except ValueError:
            raise InvalidMatrixError(f"bad header line {header!r} in {path}") from None
        rows = [[float(v) for v in line.strip().split(",")] for line in fh if line.strip()]
    a = np.array(rows, dtype=float)
    if a.shape != (n, n):
        raise InvalidMatrixError(f"expected {n}x{n} matrix in {path}, got shape {a.shape}")
    return MixingMatrix(a, validate=validate)


def save_edge_list(g, path):
    """Write one ``sender receiver`` pair per line (self-loops stay implicit)."""
    with open(path, "w") as fh:
        for j, i in sorted(g.edges):
            fh.write(f"{j} {i}\n")


def load_edge_list(path, n=None):
    """Read an edge list; infers n from the largest index unless given."""
    edges = set()
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            j, i = (int(tok) for tok in line.split())
            if j != i:
                edges.add((j, i))
    if n is None:
        n = 1 + max((max(j, i) for j, i in edges), default=0)
    return DirectedGraph(n, frozenset(edges))
