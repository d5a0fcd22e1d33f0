import math

import numpy as np
import pytest

from rowgossip import (
    ConvergenceError,
    InvalidWeightError,
    MixingMatrix,
    build_directed_ring,
    build_exponential,
    build_geometric,
    build_grid,
    check_diag_floor,
    compute_metrics,
    diag_floor_threshold,
    perron_vector,
    pi_operator_norm,
    spectral_norm,
    verify_diag_convergence,
    verify_rolling_sum,
    weights_from_indegree,
)

TWO_BY_TWO = np.array([[0.9, 0.1], [0.5, 0.5]])


class TestPerronVector:
    def test_single_node(self):
        assert perron_vector(np.array([[1.0]])) == pytest.approx([1.0])

    def test_two_by_two_analytic(self):
        # stationary equation: pi0 * 0.1 = pi1 * 0.5 with pi0 + pi1 = 1
        pi = perron_vector(MixingMatrix(TWO_BY_TWO))
        assert pi == pytest.approx([5.0 / 6.0, 1.0 / 6.0], abs=1e-11)

    def test_doubly_stochastic_exact_uniform(self, exp8):
        pi = perron_vector(exp8)
        assert np.array_equal(pi, np.full(8, 0.125))

    def test_residual_contract(self):
        a = weights_from_indegree(build_grid(3, 3))
        pi = perron_vector(a, tol=1e-12)
        assert np.abs(pi @ a.weights - pi).max() <= 1e-12
        assert pi.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(pi > 0)

    def test_nonconvergence_error_carries_residual(self):
        with pytest.raises(ConvergenceError) as err:
            perron_vector(MixingMatrix(TWO_BY_TWO), tol=1e-15, max_iter=1)
        assert err.value.residual > 1e-15


class TestOperatorNorm:
    def test_zero_matrix(self):
        assert pi_operator_norm(np.zeros((3, 3)), np.array([0.2, 0.3, 0.5])) == 0.0

    def test_identity_any_weights(self):
        rng = np.random.default_rng(0)
        pi = rng.uniform(0.1, 1.0, size=5)
        assert pi_operator_norm(np.eye(5), pi) == pytest.approx(1.0, abs=1e-9)

    def test_nonpositive_weights_rejected(self):
        with pytest.raises(InvalidWeightError):
            pi_operator_norm(np.eye(2), np.array([1.0, 0.0]))

    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_against_svd_oracle(self, seed):
        rng = np.random.default_rng(seed)
        w = rng.standard_normal((6, 6))
        pi = rng.uniform(0.05, 1.0, size=6)
        s = np.sqrt(pi)
        reference = np.linalg.svd(s[:, None] * w / s[None, :], compute_uv=False)[0]
        assert pi_operator_norm(w, pi) == pytest.approx(reference, rel=1e-8)

    def test_spectral_norm_rectangular(self):
        rng = np.random.default_rng(9)
        w = rng.standard_normal((4, 7))
        assert spectral_norm(w) == pytest.approx(
            np.linalg.svd(w, compute_uv=False)[0], rel=1e-8
        )

    def test_exponential_contraction_value(self, exp8):
        # reported network metric for the 8-node exponential family
        pi = perron_vector(exp8)
        dev = exp8.weights - np.outer(np.ones(8), pi)
        assert pi_operator_norm(dev, pi) == pytest.approx(0.5, abs=1e-6)


class TestMetrics:
    def test_single_node(self):
        met = compute_metrics(np.array([[1.0]]))
        assert met.beta == 0.0
        assert met.kappa == 1.0
        assert met.theta == 1.0

    def test_exponential_8(self, exp8_metrics):
        assert exp8_metrics.beta == pytest.approx(0.5, abs=1e-6)
        assert exp8_metrics.kappa == pytest.approx(1.0, abs=1e-8)

    def test_exponential_16(self, exp16_metrics):
        assert exp16_metrics.beta == pytest.approx(0.6, abs=1e-6)
        assert exp16_metrics.kappa == pytest.approx(1.0, abs=1e-8)

    def test_two_by_two_kappa(self):
        met = compute_metrics(MixingMatrix(TWO_BY_TWO))
        assert met.kappa == pytest.approx(5.0, abs=1e-9)

    def test_ring_closed_form(self, ring16_metrics):
        # circulant (I + P)/2: eigenvalue moduli |(1 + exp(2 pi i k/16))/2|,
        # the largest below 1 being cos(pi/16)
        assert ring16_metrics.beta == pytest.approx(math.cos(math.pi / 16.0), abs=1e-9)
        assert ring16_metrics.kappa == pytest.approx(1.0, abs=1e-10)

    def test_beta_permutation_invariant(self):
        a = weights_from_indegree(build_grid(3, 3))
        met = compute_metrics(a)
        perm = np.random.default_rng(4).permutation(9)
        shuffled = MixingMatrix(a.weights[np.ix_(perm, perm)])
        met_shuffled = compute_metrics(shuffled)
        assert met_shuffled.beta == pytest.approx(met.beta, abs=1e-9)

    def test_theta_dominates_first_power(self):
        for build in (build_grid(3, 3), build_exponential(8)):
            a = weights_from_indegree(build) if not isinstance(build, MixingMatrix) else build
            met = compute_metrics(a)
            assert met.theta >= 1.0 / np.diag(a.weights).min() - 1e-12

    def test_power_decay_envelope(self):
        a = weights_from_indegree(build_geometric(12, 0.5, seed=5))
        met = compute_metrics(a)
        a_inf = np.outer(np.ones(12), met.pi)
        power = a.weights.copy()
        for k in range(1, 25):
            dev = spectral_norm(power - a_inf)
            assert dev <= math.sqrt(met.kappa) * met.beta**k * (1 + 1e-9) + 1e-15
            power = power @ a.weights

    def test_deterministic(self, exp8):
        first = compute_metrics(exp8)
        second = compute_metrics(exp8)
        assert first.beta == second.beta
        assert first.theta == second.theta
        assert np.array_equal(first.pi, second.pi)

    def test_metrics_check_passes(self, ring16, ring16_metrics):
        ring16_metrics.check(ring16)


class TestRollingSum:
    def test_all_zero(self, exp8, exp8_metrics):
        report = verify_rolling_sum(exp8, [np.zeros((8, 2))] * 5, metrics=exp8_metrics)
        assert report["lhs"] == 0.0
        assert report["holds"]

    def test_single_term_direct(self, exp8, exp8_metrics):
        rng = np.random.default_rng(11)
        delta = rng.standard_normal((8, 3))
        report = verify_rolling_sum(exp8, [delta], metrics=exp8_metrics)
        a_inf = np.outer(np.ones(8), exp8_metrics.pi)
        direct = np.sum(((exp8.weights - a_inf) @ delta) ** 2)
        assert report["lhs"] == pytest.approx(direct, rel=1e-12)
        assert report["holds"]

    def test_incremental_matches_explicit_powers(self, exp8, exp8_metrics):
        # oracle: evaluate the double sum literally from matrix powers
        rng = np.random.default_rng(12)
        deltas = [rng.standard_normal((8, 2)) for _ in range(6)]
        a = exp8.weights
        a_inf = np.outer(np.ones(8), exp8_metrics.pi)
        powers = {j: np.linalg.matrix_power(a, j) - a_inf for j in range(1, 8)}
        lhs = 0.0
        for k in range(len(deltas)):
            inner = sum(powers[k + 1 - i] @ deltas[i] for i in range(k + 1))
            lhs += np.sum(inner**2)
        report = verify_rolling_sum(exp8, deltas, metrics=exp8_metrics)
        assert report["lhs"] == pytest.approx(lhs, rel=1e-10)

    def test_gaussian_sequences(self, exp8, exp8_metrics):
        rng = np.random.default_rng(13)
        for _ in range(20):
            deltas = [rng.standard_normal((8, 3)) for _ in range(15)]
            assert verify_rolling_sum(exp8, deltas, metrics=exp8_metrics)["holds"]

    def test_shape_mismatch(self, exp8):
        with pytest.raises(ValueError):
            verify_rolling_sum(exp8, [np.zeros((5, 2))])


class TestDiagConvergence:
    def test_single_node(self):
        report = verify_diag_convergence(np.array([[1.0]]), 5)
        assert report["holds"]
        assert all(row["stationary_defect"] == 0.0 for row in report["rows"])

    def test_exponential_8(self, exp8, exp8_metrics):
        report = verify_diag_convergence(exp8, 20, metrics=exp8_metrics)
        assert report["holds"]

    def test_ring_5(self):
        a = weights_from_indegree(build_directed_ring(5))
        assert verify_diag_convergence(a, 30)["holds"]


class TestDiagFloor:
    def test_single_node(self):
        report = check_diag_floor(np.array([[1.0]]), 1)
        assert report["holds"]
        assert report["min_diag"] == 1.0

    def test_exponential_at_threshold(self, exp8, exp8_metrics):
        k = diag_floor_threshold(exp8_metrics.beta, exp8_metrics.kappa, 8)
        report = check_diag_floor(exp8, k, metrics=exp8_metrics)
        assert report["holds"]

    def test_ring16_at_threshold(self, ring16, ring16_metrics):
        k = diag_floor_threshold(ring16_metrics.beta, ring16_metrics.kappa, 16)
        report = check_diag_floor(ring16, k, metrics=ring16_metrics)
        assert report["holds"]

    def test_below_threshold_names_it(self, ring16, ring16_metrics):
        threshold = diag_floor_threshold(ring16_metrics.beta, ring16_metrics.kappa, 16)
        with pytest.raises(ValueError, match=str(threshold)):
            check_diag_floor(ring16, threshold - 1, metrics=ring16_metrics)
