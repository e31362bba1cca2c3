import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from faultsync.errors import DimensionMismatch, NotSimpleZero
from faultsync.graph import (
    RowStochasticConfig,
    WeightedDigraph,
    block_decomposition,
    in_degrees,
    laplacian,
    normalized_laplacian,
    relabel,
)
from faultsync.sync import (
    WeightMatrix,
    beta_weights,
    left_eigenvector,
    predict_nonbasic,
    sync_initial,
    sync_initials,
)

from .conftest import beta_via_nullspace, graphs, random_faulted_graph

TWO_BASIC = WeightedDigraph(3, [(1, 3, 1.0), (2, 3, 3.0)])
FOUR = WeightedDigraph(4, [(1, 3, 1.0), (2, 3, 1.0), (3, 4, 1.0)])
CHAIN = WeightedDigraph(3, [(1, 2, 1.0), (2, 3, 1.0)])


class TestLeftEigenvector:
    def test_symmetric_pair(self):
        np.testing.assert_allclose(left_eigenvector([[1, -1], [-1, 1]]), [0.5, 0.5], atol=1e-12)

    def test_asymmetric_pair(self):
        alpha = left_eigenvector([[1, -1], [-3, 3]])
        np.testing.assert_allclose(alpha, [0.75, 0.25], atol=1e-12)

    def test_singleton(self):
        np.testing.assert_array_equal(left_eigenvector([[0.0]]), [1.0])

    def test_not_simple(self):
        with pytest.raises(NotSimpleZero):
            left_eigenvector(np.zeros((2, 2)))

    def test_bad_shape(self):
        with pytest.raises(DimensionMismatch):
            left_eigenvector(np.zeros((2, 3)))

    def test_random_strongly_connected(self, rng):
        for _ in range(30):
            n = int(rng.integers(2, 9))
            g = random_faulted_graph(rng, sizes=(n,), n_extra=0)
            lap = laplacian(g)
            alpha = left_eigenvector(lap)
            assert np.all(alpha >= 0)
            assert abs(alpha.sum() - 1) <= 1e-12
            assert np.linalg.norm(alpha @ lap, np.inf) <= 1e-9


class TestBeta:
    def test_three_node(self):
        beta = beta_weights(block_decomposition(TWO_BASIC))
        assert beta.nodes == (3,)
        np.testing.assert_allclose(beta.row(3), [0.25, 0.75], atol=1e-12)

    def test_four_node(self):
        beta = beta_weights(block_decomposition(FOUR))
        np.testing.assert_allclose(beta.row(3), [0.5, 0.5], atol=1e-12)
        np.testing.assert_allclose(beta.row(4), [0.5, 0.5], atol=1e-12)

    def test_chain_is_all_ones(self):
        beta = beta_weights(block_decomposition(CHAIN))
        np.testing.assert_allclose(beta.beta, [[1.0], [1.0]], atol=1e-12)

    def test_no_nonbasic_nodes(self):
        beta = beta_weights(block_decomposition(WeightedDigraph(2)))
        assert beta.beta.shape == (0, 2)

    def test_json_roundtrip(self):
        beta = beta_weights(block_decomposition(FOUR))
        d = beta.to_dict()
        assert set(d) == {"nodes", "bicomponents", "beta"}
        back = WeightMatrix.from_dict(d)
        assert back.nodes == beta.nodes and back.bicomponents == beta.bicomponents
        np.testing.assert_array_equal(back.beta, beta.beta)

    @settings(max_examples=200)
    @given(graphs())
    def test_rows_are_convex_and_match_nullspace(self, g):
        b = block_decomposition(g)
        beta = beta_weights(b)
        assert np.all(beta.beta >= 0)
        assert not np.any(np.signbit(beta.beta))
        if b.k0:
            assert np.max(np.abs(beta.beta.sum(axis=1) - 1)) <= 1e-10
            oracle = beta_via_nullspace(laplacian(g), b.basic_components, b.nonbasic_nodes)
            np.testing.assert_allclose(beta.beta, oracle, atol=1e-8)

    @settings(max_examples=100)
    @given(graphs(), st.randoms(use_true_random=False))
    def test_relabel_invariance(self, g, r):
        perm = list(range(1, g.n + 1))
        r.shuffle(perm)
        mapping = {old: new for old, new in zip(range(1, g.n + 1), perm)}
        inverse = {new: old for old, new in mapping.items()}
        ref = beta_weights(block_decomposition(g))
        moved = beta_weights(block_decomposition(relabel(g, perm)))
        # pair up basic bicomponents and non-basic nodes through the relabeling
        comp_key = {frozenset(c): i for i, c in enumerate(ref.bicomponents)}
        cols = [comp_key[frozenset(inverse[v] for v in c)] for c in moved.bicomponents]
        for j, v in enumerate(moved.nodes):
            expect = ref.row(inverse[v])[cols]
            assert np.max(np.abs(moved.beta[j] - expect), initial=0) <= 1e-12

    def test_continuous_equals_discrete(self, rng):
        for _ in range(120):
            sizes = tuple(int(s) for s in rng.integers(1, 4, size=int(rng.integers(1, 4))))
            g = random_faulted_graph(rng, sizes=sizes, n_extra=int(rng.integers(1, 5)))
            q = in_degrees(g) + rng.uniform(0, 10, g.n)
            ref = beta_weights(block_decomposition(g)).beta
            disc = beta_weights(block_decomposition(g, normalized_laplacian(g, RowStochasticConfig(tuple(q))))).beta
            assert np.max(np.abs(ref - disc)) <= 1e-10


class TestSyncInitial:
    def test_singleton(self):
        b = block_decomposition(TWO_BASIC)
        x0 = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        np.testing.assert_array_equal(sync_initial(b, 1, x0), [1.0, 2.0])
        np.testing.assert_array_equal(sync_initial(b, 2, x0), [3.0, 4.0])

    def test_symmetric_pair_average(self):
        g = WeightedDigraph(2, [(1, 2, 1.0), (2, 1, 1.0)])
        w0 = sync_initial(block_decomposition(g), 1, [[2.0, -1.0], [4.0, 3.0]])
        np.testing.assert_allclose(w0, [3.0, 1.0], atol=1e-12)

    def test_weighted_pair(self):
        # L = [[1,-1],[-3,3]]: node 1 listens to 2 with weight 1, node 2 to 1 with weight 3
        g = WeightedDigraph(2, [(2, 1, 1.0), (1, 2, 3.0)])
        np.testing.assert_array_equal(laplacian(g), [[1, -1], [-3, 3]])
        w0 = sync_initial(block_decomposition(g), 1, [[4.0, 0.0], [0.0, 4.0]])
        np.testing.assert_allclose(w0, [3.0, 1.0], atol=1e-12)

    def test_bad_index_and_shape(self):
        b = block_decomposition(TWO_BASIC)
        with pytest.raises(DimensionMismatch):
            sync_initial(b, 3, np.zeros((3, 1)))
        with pytest.raises(DimensionMismatch):
            sync_initial(b, 1, np.zeros((2, 1)))

    def test_stacked(self):
        b = block_decomposition(TWO_BASIC)
        x0 = np.arange(6.0).reshape(3, 2)
        np.testing.assert_array_equal(sync_initials(b, x0), x0[:2])


class TestPredictNonbasic:
    def test_three_node(self):
        b = block_decomposition(TWO_BASIC)
        s = np.array([[4.0, -2.0], [0.0, 2.0]])
        np.testing.assert_allclose(predict_nonbasic(b, s), [[1.0, 1.0]], atol=1e-12)

    def test_single_bicomponent(self):
        b = block_decomposition(CHAIN)
        s = np.array([[0.3, -0.7]])
        np.testing.assert_allclose(predict_nonbasic(b, s), np.tile(s, (2, 1)), atol=1e-12)

    def test_zero(self):
        b = block_decomposition(FOUR)
        assert np.all(predict_nonbasic(b, np.zeros((2, 3))) == 0)

    def test_trajectory_shape(self):
        b = block_decomposition(FOUR)
        out = predict_nonbasic(b, np.ones((7, 2, 3)))
        assert out.shape == (7, 2, 3)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            predict_nonbasic(block_decomposition(FOUR), np.zeros((3, 2)))

    def test_superposition(self, rng):
        for _ in range(50):
            g = random_faulted_graph(rng, sizes=(2, 1, 3), n_extra=4)
            b = block_decomposition(g)
            s1, s2 = rng.normal(size=(2, b.k, 4))
            a1, a2 = rng.normal(size=2)
            lhs = predict_nonbasic(b, a1 * s1 + a2 * s2)
            rhs = a1 * predict_nonbasic(b, s1) + a2 * predict_nonbasic(b, s2)
            assert np.max(np.abs(lhs - rhs)) <= 1e-12

    def test_agrees_with_beta(self, rng):
        g = random_faulted_graph(rng, sizes=(2, 3), n_extra=5)
        b = block_decomposition(g)
        s = rng.normal(size=(b.k, 3))
        np.testing.assert_allclose(predict_nonbasic(b, s), beta_weights(b).beta @ s, atol=1e-12)
