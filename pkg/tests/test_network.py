"""Tests for interaction matrices, ergodicity coefficients and graph sampling."""

import numpy as np
import pytest

from bisectnet.errors import SamplingError, SearchExhaustedError
from bisectnet.network import (
    GraphSpec,
    InteractionMatrix,
    complete_adjacency,
    contraction_power,
    is_closed_component_union,
    is_strongly_connected,
    left_perron,
    sample_er_irreducible,
    tau1,
    validate,
    weights_from_graph,
)


def five_node_directed() -> InteractionMatrix:
    """Strongly connected 5-node matrix with sparse directed reads."""
    a = np.zeros((5, 5))
    links = [(0, 3), (1, 0), (1, 3), (2, 1), (2, 3), (3, 4), (4, 2)]
    for i, j in links:
        a[i, j] = 0.2
    np.fill_diagonal(a, 0.0)
    a += np.diag(1.0 - a.sum(axis=1))
    return InteractionMatrix(a)


def uniform_offdiag(m: int, alpha: float) -> InteractionMatrix:
    a = np.full((m, m), (1.0 - alpha) / (m - 1))
    np.fill_diagonal(a, alpha)
    return InteractionMatrix(a)


class TestValidate:
    def test_identity_valid(self):
        assert validate(InteractionMatrix(np.eye(3)))

    def test_row_sum_violation(self):
        a = np.eye(3)
        a[1, 1] = 0.9
        assert not validate(InteractionMatrix(a))

    def test_negative_entry(self):
        a = np.eye(2)
        a[0, 0], a[0, 1] = 1.1, -0.1
        assert not validate(InteractionMatrix(a))


class TestStrongConnectivity:
    def test_identity_disconnected(self):
        assert not is_strongly_connected(InteractionMatrix(np.eye(2)))

    def test_single_agent(self):
        assert is_strongly_connected(InteractionMatrix(np.array([[1.0]])))

    def test_five_node_example(self):
        assert is_strongly_connected(five_node_directed())

    def test_all_positive(self):
        assert is_strongly_connected(uniform_offdiag(4, 0.4))

    def test_one_way_chain_not_strong(self):
        a = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.0, 0.0, 1.0]])
        assert not is_strongly_connected(InteractionMatrix(a))

    def test_closed_component_union(self):
        block = np.array([[0.5, 0.5], [0.5, 0.5]])
        a = np.zeros((4, 4))
        a[:2, :2] = block
        a[2:, 2:] = block
        assert is_closed_component_union(InteractionMatrix(a))
        assert not is_strongly_connected(InteractionMatrix(a))
        leaky = a.copy()
        leaky[0, 0], leaky[0, 2] = 0.25, 0.25
        assert not is_closed_component_union(InteractionMatrix(leaky))


class TestTau1:
    @pytest.mark.parametrize("m", [2, 3, 7])
    def test_identity_is_one(self, m):
        assert tau1(InteractionMatrix(np.eye(m))) == pytest.approx(1.0, abs=1e-15)

    def test_uniform_offdiagonal_formula(self):
        # alpha=0.6, M=5: |alpha - (1-alpha)/(M-1)| = |0.6 - 0.1|
        assert tau1(uniform_offdiag(5, 0.6)) == pytest.approx(0.5, abs=1e-12)

    def test_identical_rows_is_zero(self):
        row = np.array([0.2, 0.3, 0.5])
        a = InteractionMatrix(np.tile(row, (3, 1)))
        assert tau1(a) == pytest.approx(0.0, abs=1e-15)

    def test_single_agent_zero(self):
        assert tau1(InteractionMatrix(np.array([[1.0]]))) == 0.0

    def test_range(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            m = int(rng.integers(2, 7))
            a = InteractionMatrix(rng.dirichlet(np.ones(m), size=m))
            t = tau1(a)
            assert -1e-15 <= t <= 1.0 + 1e-15


class TestContractionPower:
    def test_positive_matrix_contracts_immediately(self):
        r, t = contraction_power(uniform_offdiag(4, 0.5), 10)
        assert r == 1 and t < 1.0

    def test_uniform_offdiagonal_value(self):
        r, t = contraction_power(uniform_offdiag(5, 0.6), 10)
        assert r == 1
        assert t == pytest.approx(0.5, abs=1e-12)

    def test_five_node_example_contracts(self):
        r, t = contraction_power(five_node_directed(), 16)
        assert t < 1.0
        # oracle: first power whose tau1 dips below one, by direct search
        entries = five_node_directed().entries
        power = entries.copy()
        expected_r = None
        for k in range(1, 17):
            if tau1(InteractionMatrix(power)) < 1.0:
                expected_r = k
                break
            power = power @ entries
        assert r == expected_r

    def test_exhaustion_raises(self):
        block = np.zeros((4, 4))
        block[:2, :2] = [[0.5, 0.5], [0.5, 0.5]]
        block[2:, 2:] = [[0.5, 0.5], [0.5, 0.5]]
        with pytest.raises(SearchExhaustedError):
            contraction_power(InteractionMatrix(block), 8)


class TestLeftPerron:
    def test_doubly_stochastic_uniform(self):
        a = uniform_offdiag(4, 0.7)
        assert np.allclose(left_perron(a), 0.25, atol=1e-10)

    def test_two_agent_example(self):
        # solve v A = v with A=[[0.9,0.1],[0.2,0.8]]: 0.1 v1 = 0.2 v2
        a = InteractionMatrix(np.array([[0.9, 0.1], [0.2, 0.8]]))
        v = left_perron(a)
        assert np.allclose(v, [2.0 / 3.0, 1.0 / 3.0], atol=1e-10)

    def test_residual_contract(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            m = int(rng.integers(2, 8))
            entries = rng.dirichlet(np.ones(m), size=m) * 0.5 + 0.5 * np.eye(m)
            entries /= entries.sum(axis=1, keepdims=True)
            a = InteractionMatrix(entries)
            v = left_perron(a, tol=1e-12)
            assert np.max(np.abs(v @ a.entries - v)) <= 1e-12
            assert np.all(v > 0)
            assert v.sum() == pytest.approx(1.0, abs=1e-12)


class TestErdosRenyi:
    def test_dense_regime_connected(self):
        adj = sample_er_irreducible(GraphSpec(5, 0.999, 3))
        assert adj.shape == (5, 5)
        assert not adj.diagonal().any()
        assert np.array_equal(adj, adj.T)

    def test_deterministic(self):
        a = sample_er_irreducible(GraphSpec(20, 0.2, 123))
        b = sample_er_irreducible(GraphSpec(20, 0.2, 123))
        assert np.array_equal(a, b)
        c = sample_er_irreducible(GraphSpec(20, 0.2, 124))
        assert not np.array_equal(a, c)

    def test_mean_degree_oracle(self):
        # E[degree] = (M-1) p = 4.95; conditioning on connectivity adds little
        degs = [
            sample_er_irreducible(GraphSpec(100, 0.05, 1000 + s)).sum() / 100
            for s in range(100)
        ]
        assert abs(float(np.mean(degs)) - 4.95) < 0.5

    def test_sparse_rejection_exhausts(self):
        with pytest.raises(SamplingError):
            sample_er_irreducible(GraphSpec(40, 0.001, 5))


class TestWeightsFromGraph:
    def test_two_node_path(self):
        adj = np.array([[False, True], [True, False]])
        a = weights_from_graph(adj, [0.95, 0.6])
        assert np.allclose(a.entries, [[0.95, 0.05], [0.4, 0.6]], atol=1e-15)

    def test_complete_graph_uniform(self):
        a = weights_from_graph(complete_adjacency(5), [0.6] * 5)
        assert tau1(a) == pytest.approx(0.5, abs=1e-12)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(2)
        for s in range(20):
            adj = sample_er_irreducible(GraphSpec(12, 0.3, s))
            a = weights_from_graph(adj, rng.uniform(0.1, 0.9, size=12))
            assert np.max(np.abs(a.entries.sum(axis=1) - 1.0)) <= 1e-12
            assert validate(a)
            assert is_strongly_connected(a)

    def test_isolated_node_rejected(self):
        adj = np.zeros((3, 3), dtype=bool)
        adj[0, 1] = adj[1, 0] = True
        with pytest.raises(ValueError, match="solated"):
            weights_from_graph(adj, [0.5, 0.5, 0.5])

    def test_self_reliance_bounds(self):
        with pytest.raises(ValueError):
            weights_from_graph(complete_adjacency(3), [1.0, 0.5, 0.5])


class TestContractionProperty:
    def test_row_averaging_contracts_spread(self):
        rng = np.random.default_rng(17)
        for _ in range(1000):
            m = int(rng.integers(2, 9))
            a = InteractionMatrix(rng.dirichlet(np.ones(m), size=m))
            x = rng.uniform(0.0, 3.0, size=m)
            ax = a.entries @ x
            assert ax.max() - ax.min() <= tau1(a) * (x.max() - x.min()) + 1e-12
