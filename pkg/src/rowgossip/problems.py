"""Gradient oracles: quadratic smoke tests, the synthetic nonconvex
logistic benchmark, and zero-chain hard instances.

An oracle owns per-node loss functions. It answers exact gradient queries
(used for reported metrics) and stochastic gradient queries (used by the
optimizers), the latter through an explicit numpy Generator handle so that
concurrent evaluation stays race-free and runs stay reproducible.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf, expit

from .errors import InvalidWeightError


class GradientOracle:
    """Base interface shared by all problems.

    Attributes
    ----------
    n : int
        Number of nodes.
    d : int
        Parameter dimension.
    sigma : float
        Injected gradient-noise level (trace of the added covariance); 0
        for oracles whose only randomness is data subsampling.
    """

    n = 0
    d = 0
    sigma = 0.0

    def exact_grad(self, node, x):
        raise NotImplementedError

    def stoch_grad(self, node, x, rng):
        """One stochastic gradient sample at ``x`` for ``node``."""
        raise NotImplementedError

    def objective(self, x):
        """Global objective value at a single point, or None if unknown."""
        return None

    def exact_grad_stack(self, xs):
        """Row i of the result is node i's exact gradient at row i of xs."""
        xs = np.asarray(xs, dtype=float)
        return np.stack([self.exact_grad(i, xs[i]) for i in range(self.n)])

    def stoch_grad_stack(self, xs, rngs):
        """One stochastic sample per node, drawn from per-node generators."""
        xs = np.asarray(xs, dtype=float)
        return np.stack([self.stoch_grad(i, xs[i], rngs[i]) for i in range(self.n)])


class QuadraticOracle(GradientOracle):
    """f_i(x) = 0.5 ||x - c_i||^2 with known global minimizer mean(c_i)."""

    def __init__(self, centers):
        self.centers = np.asarray(centers, dtype=float)
        self.n, self.d = self.centers.shape
        self.sigma = 0.0
        self.x_min = self.centers.mean(axis=0)
        self.f_min = self.objective(self.x_min)

    def exact_grad(self, node, x):
        return np.asarray(x, dtype=float) - self.centers[node]

    def stoch_grad(self, node, x, rng):
        return self.exact_grad(node, x)

    def exact_grad_stack(self, xs):
        return np.asarray(xs, dtype=float) - self.centers

    def stoch_grad_stack(self, xs, rngs):
        return self.exact_grad_stack(xs)

    def objective(self, x):
        diff = np.asarray(x, dtype=float)[None, :] - self.centers
        return float(0.5 * np.mean(np.sum(diff**2, axis=1)))


def make_quadratic(n, d, spread, seed):
    """Quadratic consensus problem with centers drawn from spread * N(0, I)."""
    if spread < 0:
        raise ValueError(f"spread must be >= 0, got {spread}")
    rng = np.random.default_rng(seed)
    centers = spread * rng.standard_normal((n, d))
    return QuadraticOracle(centers)


# ---------------------------------------------------------------------------
# synthetic nonconvex logistic regression


class SyntheticDataset:
    """Synthetic binary-classification data split evenly across nodes.

    Built from a planted parameter: features are standard Gaussian and each
    label is +1 with probability sigmoid(h^T x_opt), realized by the
    randomized threshold ``1/z > 1 + exp(-h^T x_opt)`` with uniform z.
    Regeneration from the same ``(seed, total_rows, dim, n)`` is
    bit-identical; draw order is planted parameter, features, thresholds,
    local perturbation points.
    """

    def __init__(self, n, total_rows, dim, seed, local_spread=10.0):
        if total_rows % n != 0:
            raise ValueError(f"total_rows={total_rows} is not divisible by n={n}")
        self.n = n
        self.total_rows = total_rows
        self.dim = dim
        self.seed = seed
        self.rows_per_node = total_rows // n
        rng = np.random.default_rng(seed)
        self.x_opt = rng.standard_normal(dim)
        self.features = rng.standard_normal((total_rows, dim))
        z = rng.uniform(0.0, 1.0, size=total_rows)
        margin = self.features @ self.x_opt
        self.labels = np.where(1.0 / z > 1.0 + np.exp(-margin), 1.0, -1.0)
        # per-node perturbed copies of the planted parameter; exposed for
        # exploratory runs, the optimizers start from a common point
        self.local_points = self.x_opt[None, :] + local_spread * rng.standard_normal((n, dim))

    def node_slice(self, node):
        m = self.rows_per_node
        return slice(node * m, (node + 1) * m)

    def node_features(self):
        return self.features.reshape(self.n, self.rows_per_node, self.dim)

    def node_labels(self):
        return self.labels.reshape(self.n, self.rows_per_node)

    def export_csv(self, path):
        """Rows of ``node,label,feature_1..feature_d`` for inspection."""
        with open(path, "w") as fh:
            cols = ",".join(f"h{j}" for j in range(self.dim))
            fh.write(f"node,label,{cols}\n")
            for node in range(self.n):
                sl = self.node_slice(node)
                for y, h in zip(self.labels[sl], self.features[sl]):
                    fh.write(f"{node},{int(y)}," + ",".join(f"{v:.17g}" for v in h) + "\n")


class LogisticOracle(GradientOracle):
    """Nonconvex-regularized logistic regression over a SyntheticDataset.

    Stochastic gradients average a without-replacement minibatch of the
    node's rows; the exact gradient is the same formula over the full local
    batch. The regularizer rho * sum_j x_j^2 / (1 + x_j^2) is smooth and
    bounded, keeping the whole objective smooth but nonconvex.
    """

    def __init__(self, dataset, rho, batch):
        if batch < 1 or batch > dataset.rows_per_node:
            raise ValueError(
                f"batch size {batch} not in [1, {dataset.rows_per_node}] "
                f"(rows per node)"
            )
        self.dataset = dataset
        self.rho = float(rho)
        self.batch = int(batch)
        self.n = dataset.n
        self.d = dataset.dim
        self.sigma = 0.0
        self._h = dataset.node_features()
        self._y = dataset.node_labels()

    def _loss_grad(self, h, y, x):
        # -(1/B) sum_b y_b h_b * sigmoid(-y_b h_b^T x)
        margin = y * (h @ x)
        return -(h * (y * expit(-margin))[:, None]).mean(axis=0)

    def _reg_grad(self, x):
        return self.rho * 2.0 * x / (1.0 + x**2) ** 2

    def exact_grad(self, node, x):
        x = np.asarray(x, dtype=float)
        return self._loss_grad(self._h[node], self._y[node], x) + self._reg_grad(x)

    def stoch_grad(self, node, x, rng):
        x = np.asarray(x, dtype=float)
        # sorted so a full-size minibatch reproduces the exact gradient bitwise
        idx = np.sort(rng.choice(self.dataset.rows_per_node, size=self.batch, replace=False))
        return self._loss_grad(self._h[node][idx], self._y[node][idx], x) + self._reg_grad(x)

    def exact_grad_stack(self, xs):
        xs = np.asarray(xs, dtype=float)
        margins = self._y * np.einsum("nmd,nd->nm", self._h, xs)
        loss = -np.einsum("nmd,nm->nd", self._h, self._y * expit(-margins))
        loss /= self.dataset.rows_per_node
        return loss + self.rho * 2.0 * xs / (1.0 + xs**2) ** 2

    def objective(self, x):
        x = np.asarray(x, dtype=float)
        margin = self.dataset.labels * (self.dataset.features @ x)
        loss = float(np.mean(np.logaddexp(0.0, -margin)))
        reg = self.rho * float(np.sum(x**2 / (1.0 + x**2)))
        return loss + reg


def make_synthetic_logistic(n, total_rows, dim, rho, batch, local_spread, seed):
    """Build the synthetic benchmark: dataset plus its oracle."""
    data = SyntheticDataset(n, total_rows, dim, seed, local_spread=local_spread)
    return LogisticOracle(data, rho, batch)


# ---------------------------------------------------------------------------
# zero-chain hard instances

# Constants of the chain construction: objective gap per coordinate,
# smoothness, and gradient sup-norm.
CHAIN_GAP = 12.0
CHAIN_SMOOTHNESS = 152.0
CHAIN_GRAD_SUP = 23.0

_SQRT_E = np.sqrt(np.e)
_SQRT_HALF_PI = np.sqrt(np.pi / 2.0)


def chain_psi(z):
    """Smooth switch: identically 0 for z <= 1/2, exp(1 - 1/(2z-1)^2) above."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    m = z > 0.5
    t = 2.0 * z[m] - 1.0
    out[m] = np.exp(1.0 - 1.0 / t**2)
    return out if out.ndim else float(out)


def chain_psi_prime(z):
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    m = z > 0.5
    t = 2.0 * z[m] - 1.0
    out[m] = np.exp(1.0 - 1.0 / t**2) * 4.0 / t**3
    return out if out.ndim else float(out)


def chain_phi(z):
    """sqrt(e) times the Gaussian integral from -inf to z; via erf, exact to 1e-12."""
    z = np.asarray(z, dtype=float)
    out = _SQRT_E * _SQRT_HALF_PI * (1.0 + erf(z / np.sqrt(2.0)))
    return out if out.ndim else float(out)


def chain_phi_prime(z):
    z = np.asarray(z, dtype=float)
    out = _SQRT_E * np.exp(-0.5 * z**2)
    return out if out.ndim else float(out)


def _chain_value(x, lead, coef):
    x = np.asarray(x, dtype=float)
    a, b = x[:-1], x[1:]
    terms = chain_psi(-a) * chain_phi(-b) - chain_psi(a) * chain_phi(b)
    return float(-lead * chain_psi(1.0) * chain_phi(x[0]) + np.dot(coef, terms))


def _chain_grad(x, lead, coef):
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    g = np.zeros(d)
    g[0] = -lead * chain_psi(1.0) * chain_phi_prime(x[0])
    a, b = x[:-1], x[1:]
    g[:-1] += coef * (-chain_psi_prime(-a) * chain_phi(-b) - chain_psi_prime(a) * chain_phi(b))
    g[1:] += coef * (-chain_psi(-a) * chain_phi_prime(-b) - chain_psi(a) * chain_phi_prime(b))
    return g


def _parity_coef(d, parity):
    # link index j runs 1..d-1 (1-based); keep links with j % 2 == parity
    j = np.arange(1, d)
    return 2.0 * (j % 2 == parity)


def chain_h(x):
    """The zero-chain objective whose gradient activates one coordinate at a time."""
    return _chain_value(x, 1.0, np.ones(len(x) - 1))


def chain_h_grad(x):
    return _chain_grad(x, 1.0, np.ones(len(x) - 1))


def chain_h1(x):
    """Even-link half: advances the chain only from even coordinates."""
    return _chain_value(x, 2.0, _parity_coef(len(x), 0))


def chain_h1_grad(x):
    return _chain_grad(x, 2.0, _parity_coef(len(x), 0))


def chain_h2(x):
    """Odd-link half: advances the chain only from odd coordinates."""
    return _chain_value(x, 0.0, _parity_coef(len(x), 1))


def chain_h2_grad(x):
    return _chain_grad(x, 0.0, _parity_coef(len(x), 1))


def prog(x):
    """Largest 1-based index of a nonzero coordinate; 0 for the zero vector.

    Uses exact zero comparison: the chain gradients produce exact zeros
    past the active prefix because the switch function vanishes identically
    below 1/2.
    """
    nz = np.flatnonzero(np.asarray(x) != 0)
    return int(nz[-1] + 1) if nz.size else 0


class HardInstanceOracle(GradientOracle):
    """Noise-free hard instance splitting the chain across two node groups.

    The first third of the nodes holds the even-link half, the last third
    the odd-link half, and the middle third holds the zero function, so the
    network average is the full chain scaled to smoothness L. Making the
    chain progress therefore forces information to travel between the two
    groups through the network.
    """

    def __init__(self, n, d, smoothness, scale):
        if n % 3 != 0:
            raise ValueError(f"node count must be divisible by 3, got {n}")
        if d < 2:
            raise ValueError(f"chain length must be >= 2, got {d}")
        self.n = n
        self.d = d
        self.sigma = 0.0
        self.smoothness = float(smoothness)
        self.scale = float(scale)
        self._value_factor = self.smoothness * self.scale**2 / CHAIN_SMOOTHNESS
        self._grad_factor = self.smoothness * self.scale / CHAIN_SMOOTHNESS
        third = n // 3
        self._group = np.zeros(n, dtype=int)  # 0: even half, 1: zero, 2: odd half
        self._group[third : 2 * third] = 1
        self._group[2 * third :] = 2

    def node_value(self, node, x):
        group = self._group[node]
        if group == 1:
            return 0.0
        fn = chain_h1 if group == 0 else chain_h2
        return self._value_factor * fn(np.asarray(x, dtype=float) / self.scale)

    def exact_grad(self, node, x):
        group = self._group[node]
        x = np.asarray(x, dtype=float)
        if group == 1:
            return np.zeros(self.d)
        fn = chain_h1_grad if group == 0 else chain_h2_grad
        return self._grad_factor * fn(x / self.scale)

    def stoch_grad(self, node, x, rng):
        return self.exact_grad(node, x)

    def objective(self, x):
        x = np.asarray(x, dtype=float)
        return 2.0 * self._value_factor * chain_h(x / self.scale) / 3.0


def make_hard_instance(n, d, smoothness, scale, seed=None):
    """Hard-instance oracle; the seed is accepted for interface uniformity
    but unused, the construction is deterministic."""
    return HardInstanceOracle(n, d, smoothness, scale)


# ---------------------------------------------------------------------------
# noise injection


class NoisyOracle(GradientOracle):
    """Adds isotropic Gaussian noise with total variance sigma^2 per sample.

    Per-coordinate variance is sigma^2 / d so the covariance trace equals
    sigma^2; draws are independent across nodes, iterations and samples
    because each call consumes the caller-provided generator.
    """

    def __init__(self, base, sigma):
        if sigma < 0:
            raise InvalidWeightError(f"noise level must be >= 0, got {sigma}")
        self.base = base
        self.n = base.n
        self.d = base.d
        self.sigma = float(sigma)
        self._coord_std = self.sigma / np.sqrt(self.d)

    def exact_grad(self, node, x):
        return self.base.exact_grad(node, x)

    def exact_grad_stack(self, xs):
        return self.base.exact_grad_stack(xs)

    def stoch_grad(self, node, x, rng):
        g = self.base.stoch_grad(node, x, rng)
        if self.sigma == 0.0:
            return g
        return g + self._coord_std * rng.standard_normal(self.d)

    def objective(self, x):
        return self.base.objective(x)


def noisy(oracle, sigma):
    """Wrap any oracle with additive Gaussian gradient noise of trace sigma^2."""
    if sigma == 0.0:
        return oracle
    return NoisyOracle(oracle, sigma)
