import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rowgossip import (
    DirectedGraph,
    InvalidGraphError,
    InvalidMatrixError,
    MixingMatrix,
    build_complete,
    build_directed_ring,
    build_exponential,
    build_geometric,
    build_grid,
    build_nearest_neighbor,
    load_edge_list,
    load_matrix_csv,
    perron_vector,
    save_edge_list,
    save_matrix_csv,
    weights_from_indegree,
)


class TestExponential:
    def test_single_node(self):
        g = build_exponential(1)
        assert g.n == 1
        assert g.edges == frozenset()
        a = weights_from_indegree(g)
        assert a.weights == pytest.approx(np.array([[1.0]]))

    def test_n8_offsets(self):
        # offsets {1, 2, 4}: every node has exactly the predecessors i - 2^j
        g = build_exponential(8)
        for i in range(8):
            expected = sorted({(i - o) % 8 for o in (1, 2, 4)})
            assert g.in_neighbors(i) == expected
            assert g.in_degree(i) == 3

    def test_n8_weights_quarter(self):
        a = weights_from_indegree(build_exponential(8))
        on_support = a.weights[a.weights > 0]
        assert np.all(on_support == 0.25)

    def test_n2_matches_ring(self):
        assert build_exponential(2).edges == build_directed_ring(2).edges

    def test_bad_size(self):
        with pytest.raises(InvalidGraphError):
            build_exponential(0)


class TestRing:
    def test_smallest(self):
        g = build_directed_ring(2)
        assert g.edges == frozenset({(0, 1), (1, 0)})

    def test_cycle_edges(self):
        g = build_directed_ring(5)
        assert g.edges == frozenset({(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)})

    def test_too_small(self):
        with pytest.raises(InvalidGraphError):
            build_directed_ring(1)

    def test_weights_two_halves(self):
        a = weights_from_indegree(build_directed_ring(3))
        for i in range(3):
            row = a.weights[i]
            assert row[i] == 0.5
            assert row[(i - 1) % 3] == 0.5
            assert row.sum() == 1.0


class TestUndirectedFamilies:
    def test_grid_degenerate(self):
        g = build_grid(1, 1)
        assert g.n == 1 and g.edges == frozenset()

    def test_grid_4x4_interior_degree(self):
        g = build_grid(4, 4)
        assert g.n == 16
        # node (1,1) = index 5 is interior: neighbors above/below/left/right
        assert g.in_neighbors(5) == [1, 4, 6, 9]
        # corners have two neighbors
        assert g.in_degree(0) == 2

    def test_grid_symmetric(self):
        g = build_grid(3, 2)
        for j, i in g.edges:
            assert (i, j) in g.edges

    def test_geometric_deterministic(self):
        g1 = build_geometric(16, 0.4, seed=7)
        g2 = build_geometric(16, 0.4, seed=7)
        assert g1.edges == g2.edges
        assert g1.is_strongly_connected()

    def test_geometric_radius_validated(self):
        with pytest.raises(InvalidGraphError):
            build_geometric(8, 0.0, seed=1)
        with pytest.raises(InvalidGraphError):
            build_geometric(8, 2.0, seed=1)

    def test_nearest_neighbor_symmetric(self):
        g = build_nearest_neighbor(16, 3, seed=7)
        for j, i in g.edges:
            assert (i, j) in g.edges
        assert g.is_strongly_connected()

    def test_nearest_neighbor_k_validated(self):
        with pytest.raises(InvalidGraphError):
            build_nearest_neighbor(4, 4, seed=0)


class TestValidation:
    def test_row_sum_violation(self):
        a = weights_from_indegree(build_exponential(8)).weights.copy()
        a[0, 0] += 0.1
        with pytest.raises(InvalidMatrixError, match="row sums"):
            MixingMatrix(a)

    def test_negative_entry(self):
        a = np.array([[1.2, -0.2], [0.5, 0.5]])
        with pytest.raises(InvalidMatrixError, match="negative"):
            MixingMatrix(a)

    def test_not_primitive(self):
        # a 2-cycle without self-loops is irreducible but periodic
        a = np.array([[0.0, 1.0], [1.0, 0.0]])
        with pytest.raises(InvalidMatrixError, match="primitive"):
            MixingMatrix(a)

    def test_disconnected_graph_rejected(self):
        g = DirectedGraph(4, frozenset({(0, 1), (1, 0), (2, 3), (3, 2)}))
        assert not g.is_strongly_connected()
        with pytest.raises(InvalidGraphError, match="strongly connected"):
            weights_from_indegree(g)

    def test_explicit_self_loop_rejected(self):
        with pytest.raises(InvalidGraphError, match="implicit"):
            DirectedGraph(2, frozenset({(0, 0), (0, 1), (1, 0)}))

    def test_support_cache(self):
        a = weights_from_indegree(build_directed_ring(4))
        assert [list(nbrs) for nbrs in a.in_neighbors] == [
            [0, 3],
            [0, 1],
            [1, 2],
            [2, 3],
        ]


class TestCirculantEquilibrium:
    @pytest.mark.parametrize("n", [4, 8, 16])
    def test_exponential_uniform(self, n):
        a = weights_from_indegree(build_exponential(n))
        pi = perron_vector(a)
        assert np.abs(pi - 1.0 / n).max() < 1e-10
        assert pi.max() / pi.min() == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("n", [3, 5, 16])
    def test_ring_uniform(self, n):
        a = weights_from_indegree(build_directed_ring(n))
        pi = perron_vector(a)
        assert np.abs(pi - 1.0 / n).max() < 1e-10

    def test_complete_is_exact_averaging(self):
        a = weights_from_indegree(build_complete(4))
        assert a.weights == pytest.approx(np.full((4, 4), 0.25))


@settings(max_examples=25, deadline=None)
@given(n=st.integers(min_value=1, max_value=12))
def test_generated_matrices_validate(n):
    builders = [build_exponential(n)]
    if n >= 2:
        builders.append(build_directed_ring(n))
    for g in builders:
        a = weights_from_indegree(g)
        assert np.abs(a.weights.sum(axis=1) - 1.0).max() <= 1e-12
        assert g.is_strongly_connected()


class TestRoundTrips:
    def test_matrix_csv_bit_exact(self, tmp_path):
        a = weights_from_indegree(build_geometric(9, 0.5, seed=3))
        path = tmp_path / "matrix.csv"
        save_matrix_csv(a, path)
        back = load_matrix_csv(path)
        assert np.array_equal(back.weights, a.weights)

    def test_matrix_csv_header(self, tmp_path):
        a = weights_from_indegree(build_exponential(4))
        path = tmp_path / "m.csv"
        save_matrix_csv(a, path)
        first = path.read_text().splitlines()[0]
        assert first == "4"

    def test_matrix_csv_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("nope\n1,0\n0,1\n")
        with pytest.raises(InvalidMatrixError, match="header"):
            load_matrix_csv(path)

    def test_edge_list_round_trip(self, tmp_path):
        g = build_grid(3, 3)
        path = tmp_path / "edges.txt"
        save_edge_list(g, path)
        back = load_edge_list(path)
        assert back.n == g.n
        assert back.edges == g.edges
