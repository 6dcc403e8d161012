import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from ftcm import (
    DensityResult,
    InvalidInput,
    distance_score,
    dpc_fknn,
    dpc_knn_density,
    fuzzy_kernel,
    knn_graph,
    local_density,
    pairwise_distances,
    select_centers,
)
from ftcm.clustering import n_centers


class TestFuzzyKernel:
    def test_zero_distance(self):
        assert fuzzy_kernel(0.0, True, 3.0) == 1.0

    def test_knn_branch(self):
        assert fuzzy_kernel(1.0, True, 2.0) == pytest.approx(math.exp(-1) / 4, abs=1e-15)
        assert fuzzy_kernel(1.0, True, 2.0) == pytest.approx(0.091970, abs=1e-6)

    def test_non_knn_branch(self):
        assert fuzzy_kernel(1.0, False, 2.0) == pytest.approx(0.004579, abs=1e-6)

    def test_negative_distance(self):
        with pytest.raises(InvalidInput):
            fuzzy_kernel(-0.5, True, 1.0)

    @given(st.floats(0, 50), st.booleans(), st.floats(0, 10))
    def test_range(self, d, in_knn, phi):
        v = fuzzy_kernel(d, in_knn, phi)
        assert 0 <= v <= 1


def _rho(X, k):
    return local_density(knn_graph(pairwise_distances(X), k), k)


class TestLocalDensity:
    def test_identical_tokens(self):
        rho = _rho(np.zeros((5, 3)), 2)
        assert np.all(rho == rho[0])

    def test_two_tokens(self):
        rho = _rho([[0.0], [1.0]], 1)
        expected = math.exp(-1) / 4 + 0.5 * (1 + math.exp(-1) / 4)
        np.testing.assert_allclose(rho, [expected, expected], rtol=0, atol=1e-15)
        assert expected == pytest.approx(0.637955, abs=1e-6)

    def test_matches_loop_oracle(self, rng):
        X = rng.normal(size=(20, 5))
        D = pairwise_distances(X)
        ref = oracles.rho(D.tolist(), oracles.knn(D.tolist(), 4))
        np.testing.assert_allclose(_rho(X, 4), ref, rtol=0, atol=1e-12)

    def test_k_mismatch(self, rng):
        g = knn_graph(pairwise_distances(rng.normal(size=(6, 2))), 2)
        with pytest.raises(InvalidInput):
            local_density(g, 3)

    def test_permutation_equivariant(self, rng):
        X = rng.normal(size=(25, 3))
        perm = rng.permutation(25)
        np.testing.assert_allclose(_rho(X[perm], 5), _rho(X, 5)[perm], rtol=0, atol=1e-12)


class TestDistanceScore:
    def test_two_tokens(self):
        D = np.array([[0.0, 5.0], [5.0, 0.0]])
        assert distance_score(D, [1.0, 2.0]).tolist() == [5.0, 5.0]

    def test_all_equal_rho(self, rng):
        D = pairwise_distances(rng.normal(size=(7, 2)))
        np.testing.assert_array_equal(distance_score(D, np.ones(7)), D.max(axis=1))

    def test_single_token(self):
        assert distance_score([[0.0]], [1.0]).tolist() == [0.0]

    def test_matches_oracle_exactly(self, rng):
        X = rng.normal(size=(30, 4))
        D = pairwise_distances(X)
        rho = _rho(X, 5)
        assert distance_score(D, rho).tolist() == oracles.delta(D.tolist(), rho.tolist())


class TestSelectCenters:
    def test_quarter(self):
        res = DensityResult.from_parts(np.ones(16), np.arange(16.0))
        assert select_centers(res, 4, 16).centers.tolist() == [12, 13, 14, 15]

    def test_minimum_one(self):
        assert n_centers(3, 4) == 1

    def test_dense_triple(self):
        X = [[0.0], [0.1], [0.2], [10.0]]
        _, result, sel = dpc_fknn(X, k=2, ratio=4)
        r, d, cents, _ = oracles.dpc_fknn(X, 2, 2, 4)
        assert cents == [1]
        assert sel.centers.tolist() == cents
        np.testing.assert_allclose(result.rho, r, rtol=0, atol=1e-12)

    def test_zero_tokens(self):
        with pytest.raises(InvalidInput):
            select_centers(DensityResult.from_parts([], []), 4, 0)

    def test_rescaling_rho(self, rng):
        X = rng.normal(size=(32, 3))
        _, res, sel = dpc_fknn(X, k=5)
        scaled = DensityResult.from_parts(res.rho * 3.7, res.delta)
        assert select_centers(scaled, 4).centers.tolist() == sel.centers.tolist()


class TestDpcKnn:
    def test_zero_distance(self):
        g = knn_graph(np.zeros((3, 3)), 2)
        np.testing.assert_array_equal(dpc_knn_density(g), [1.0, 1.0, 1.0])

    def test_single_neighbor(self):
        g = knn_graph(pairwise_distances([[0.0], [1.0]]), 1)
        np.testing.assert_allclose(dpc_knn_density(g), [math.exp(-1)] * 2, rtol=0, atol=1e-15)

    def test_matches_oracle(self, rng):
        X = rng.normal(size=(15, 3))
        D = pairwise_distances(X).tolist()
        nb = oracles.knn(D, 3)
        ref = [math.exp(-sum(D[i][j] ** 2 for j in nb[i]) / 3) for i in range(15)]
        g = knn_graph(np.array(D), 3)
        np.testing.assert_allclose(dpc_knn_density(g), ref, rtol=0, atol=1e-12)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_translation_invariance(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(int(rng.integers(8, 30)), 3))
    shift = rng.normal(size=3) * 10
    _, a, sa = dpc_fknn(X, k=5)
    _, b, sb = dpc_fknn(X + shift, k=5)
    np.testing.assert_allclose(a.rho, b.rho, rtol=0, atol=1e-9)
    np.testing.assert_allclose(a.delta, b.delta, rtol=0, atol=1e-9)
    assert sa.centers.tolist() == sb.centers.tolist()


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_max_branch_only_for_density_argmax(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(int(rng.integers(4, 30)), 2))
    D = pairwise_distances(X)
    rho = _rho(X, 3)
    delta = distance_score(D, rho)
    top = rho.max()
    for i in range(len(rho)):
        if rho[i] == top:
            assert delta[i] == D[i].max()
        else:
            denser = np.flatnonzero(rho > rho[i])
            assert delta[i] == D[i, denser].min()
