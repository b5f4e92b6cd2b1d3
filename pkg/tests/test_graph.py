from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from advis.graph import (DisconnectedGraphError, build_knn, build_operator,
                         load_operator, operator_cache_key,
                         pairwise_diffusion_distances, save_operator)
from oracles import dense_transition, diffusion_distance_power, knn_bruteforce


class TestBuildKnn:
    def test_three_point_line(self):
        graph = build_knn(np.array([[0.0], [1.0], [3.0]]), 1)
        np.testing.assert_array_equal(graph.neighbors.ravel(), [1, 0, 1])
        np.testing.assert_array_equal(graph.distances.ravel(), [1.0, 1.0, 2.0])

    def test_duplicate_points(self):
        graph = build_knn(np.array([[2.0, 2.0], [2.0, 2.0]]), 1)
        np.testing.assert_array_equal(graph.neighbors.ravel(), [1, 0])
        np.testing.assert_array_equal(graph.distances.ravel(), [0.0, 0.0])

    def test_tie_breaks_by_index(self):
        # Points 1, 2, 3 are all at distance 1 from point 0.
        X = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])
        graph = build_knn(X, 2)
        np.testing.assert_array_equal(graph.neighbors[0], [1, 2])

    def test_matches_bruteforce(self, rng):
        X = rng.random((50, 5))
        graph = build_knn(X, 7)
        nbr, dist = knn_bruteforce(X, 7)
        np.testing.assert_array_equal(graph.neighbors, nbr)
        np.testing.assert_allclose(graph.distances, dist, rtol=1e-12)

    def test_rejects_bad_k(self):
        X = np.zeros((4, 2))
        with pytest.raises(ValueError):
            build_knn(X, 4)
        with pytest.raises(ValueError):
            build_knn(X, 0)

    def test_blocking_is_invisible(self, rng):
        X = rng.random((40, 3))
        a = build_knn(X, 6, block_size=7)
        b = build_knn(X, 6, block_size=400)
        np.testing.assert_array_equal(a.neighbors, b.neighbors)
        np.testing.assert_array_equal(a.distances, b.distances)


class TestBuildOperator:
    def test_three_chain(self):
        graph = build_knn(np.array([[0.0], [1.0], [3.0]]), 1)
        op = build_operator(graph)
        np.testing.assert_allclose(op.stationary, [0.25, 0.5, 0.25])
        np.testing.assert_allclose(sorted(op.eigenvalues), [-1.0, 0.0, 1.0],
                                   atol=1e-12)
        # lambda_1 = 1 with constant eigenvector
        assert op.eigenvalues[0] == pytest.approx(1.0, abs=1e-12)
        psi1 = op.eigenvectors[:, 0]
        assert np.ptp(psi1) == pytest.approx(0.0, abs=1e-10)

    def test_complete_graph_uniform_pi(self):
        X = np.array([[0.0], [1.0], [2.0]])
        op = build_operator(build_knn(X, 2))
        np.testing.assert_allclose(op.stationary, np.full(3, 1 / 3))

    def test_row_stochastic_and_stationary(self, rng):
        from conftest import random_connected_operator

        X, graph, op = random_connected_operator(rng, 30)
        P = dense_transition(graph)
        np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
        assert np.abs(op.stationary @ P - op.stationary).max() < 1e-10
        assert op.stationary.min() > 0
        assert op.stationary.sum() == pytest.approx(1.0, abs=1e-12)

    def test_disconnected_graph_reports_components(self):
        X = np.array([[0.0], [0.1], [5.0], [5.1]])
        with pytest.raises(DisconnectedGraphError, match="2 connected components"):
            build_operator(build_knn(X, 1))

    def test_spectral_radius(self, small_operator):
        assert np.abs(small_operator.eigenvalues).max() <= 1 + 1e-12

    @pytest.mark.parametrize("t", [0, 1, 2, 4, 8, 16])
    def test_distance_matches_matrix_power(self, rng, t):
        from conftest import random_connected_operator

        X, graph, op = random_connected_operator(rng, 25)
        P = dense_transition(graph)
        for i, j in [(0, 1), (3, 17), (9, 9), (24, 2)]:
            expected = diffusion_distance_power(P, op.stationary, t, i, j)
            actual = op.diffusion_distance(t, i, j)
            assert actual == pytest.approx(expected, rel=1e-8, abs=1e-10)

    def test_distance_symmetry_and_identity(self, small_operator):
        op = small_operator
        assert op.diffusion_distance(3, 7, 7) == 0.0
        assert op.diffusion_distance(3, 2, 9) == op.diffusion_distance(3, 9, 2)

    def test_t0_identity_distance(self, rng):
        from conftest import random_connected_operator

        X, graph, op = random_connected_operator(rng, 20)
        pi = op.stationary
        for i, j in [(0, 5), (3, 11)]:
            expected = np.sqrt(1 / pi[i] + 1 / pi[j])
            assert op.diffusion_distance(0, i, j) == pytest.approx(expected,
                                                                   rel=1e-10)

    def test_truncation_monotone(self, small_operator):
        op = small_operator
        full = op.diffusion_distance(2, 1, 14)
        from advis.graph import DiffusionOperator

        shorter = DiffusionOperator(
            eigenvalues=op.eigenvalues[:10],
            eigenvectors=op.eigenvectors[:, :10],
            stationary=op.stationary,
            degrees=op.degrees,
            symmetrize=op.symmetrize,
        )
        assert shorter.diffusion_distance(2, 1, 14) <= full + 1e-15

    def test_directed_mode(self):
        graph = op = None
        for seed in range(40):
            X = np.random.default_rng(seed).random((20, 2))
            graph = build_knn(X, 4)
            try:
                op = build_operator(graph, symmetrize="directed")
                break
            except DisconnectedGraphError:
                op = None
        assert op is not None, "no strongly connected sample in 40 seeds"
        P = np.zeros((20, 20))
        for i in range(20):
            P[i, graph.neighbors[i]] = 1.0 / graph.n_neighbors
        assert np.abs(op.stationary @ P - op.stationary).max() < 1e-11
        assert op.stationary.min() > 0


class TestEmbed:
    def test_embedding_distances_match(self, rng):
        from conftest import random_connected_operator

        X, graph, op = random_connected_operator(rng, 20)
        E = op.embed(3)
        for i in range(0, 20, 3):
            for j in range(0, 20, 5):
                d = np.sqrt(((E[i] - E[j]) ** 2).sum())
                assert d == op.diffusion_distance(3, i, j)

    def test_large_t_collapses(self, small_operator):
        op = small_operator
        lam2 = np.abs(op.eigenvalues[1])
        t = 1 if lam2 == 0 else int(np.ceil(np.log(1e-15) / np.log(lam2)))
        E = op.embed(t)
        spread = np.sqrt(((E - E[0]) ** 2).sum(axis=1)).max()
        assert spread < 1e-7

    def test_single_pair_all_zero(self, small_operator):
        op = small_operator
        from advis.graph import DiffusionOperator

        only_top = DiffusionOperator(
            eigenvalues=op.eigenvalues[:1],
            eigenvectors=op.eigenvectors[:, :1],
            stationary=op.stationary,
            degrees=op.degrees,
            symmetrize=op.symmetrize,
        )
        E = only_top.embed(2)
        assert np.sqrt(((E - E[0]) ** 2).sum(axis=1)).max() < 1e-10

    def test_pairwise_matrix_matches_single_queries(self, small_operator):
        op = small_operator
        D = pairwise_diffusion_distances(op, 4)
        for i, j in [(0, 1), (5, 20), (29, 3)]:
            assert D[i, j] == op.diffusion_distance(4, i, j)
        np.testing.assert_array_equal(D, D.T)


class TestOperatorCache:
    def test_roundtrip(self, tmp_path, small_operator):
        path = tmp_path / "op.npz"
        save_operator(path, small_operator)
        again = load_operator(path)
        np.testing.assert_array_equal(again.eigenvalues,
                                      small_operator.eigenvalues)
        np.testing.assert_array_equal(again.eigenvectors,
                                      small_operator.eigenvectors)
        assert again.symmetrize == small_operator.symmetrize

    def test_key_sensitivity(self, rng):
        X = rng.random((10, 2))
        base = operator_cache_key(X, 3, "mutual-or")
        assert operator_cache_key(X, 4, "mutual-or") != base
        assert operator_cache_key(X, 3, "directed") != base
        Y = X.copy()
        Y[0, 0] += 1e-9
        assert operator_cache_key(Y, 3, "mutual-or") != base


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=6), st.data())
def test_distance_nonnegative_and_symmetric(t, data):
    rng = np.random.default_rng(data.draw(st.integers(0, 10_000)))
    X = rng.random((12, 2))
    graph = build_knn(X, 4)
    try:
        op = build_operator(graph)
    except DisconnectedGraphError:
        return
    i = data.draw(st.integers(0, 11))
    j = data.draw(st.integers(0, 11))
    d = op.diffusion_distance(t, i, j)
    assert d >= 0.0
    assert d == op.diffusion_distance(t, j, i)
