"""Graph construction, Laplacian and algebraic connectivity.

Eigenvalue expectations are derived independently: K2 from the
characteristic polynomial of [[1,-1],[-1,1]], the ring from the circulant
formula 2 - 2cos(2 pi k / n), and K_n from its known flat nonzero spectrum.
"""

import math

import numpy as np
import pytest

from tvalloc.errors import DisconnectedGraph, InvariantViolation
from tvalloc.graph import CommGraph, algebraic_connectivity, complete, is_connected, laplacian, ring


class TestConstruction:
    def test_rejects_single_node(self):
        with pytest.raises(InvariantViolation):
            CommGraph(1, [])

    def test_rejects_self_loop(self):
        with pytest.raises(InvariantViolation):
            CommGraph(3, [(0, 1), (1, 1), (1, 2)])

    def test_rejects_out_of_range(self):
        with pytest.raises(InvariantViolation):
            CommGraph(3, [(0, 3)])

    def test_rejects_disconnected(self):
        with pytest.raises(DisconnectedGraph):
            CommGraph(3, [])
        with pytest.raises(DisconnectedGraph):
            CommGraph(4, [(0, 1), (2, 3)])

    def test_edges_deduplicated_and_normalized(self):
        g = CommGraph(3, [(0, 1), (1, 0), (2, 1)])
        assert g.sorted_edges() == [(0, 1), (1, 2)]


class TestConnectivityCheck:
    def test_ring_connected(self):
        assert is_connected(6, [(i, (i + 1) % 6) for i in range(6)])

    def test_two_disjoint_edges(self):
        assert not is_connected(4, [(0, 1), (2, 3)])


class TestLaplacian:
    def test_k2(self):
        g = CommGraph(2, [(0, 1)])
        assert laplacian(g).tolist() == [[1.0, -1.0], [-1.0, 1.0]]

    def test_c6_circulant(self):
        lap = laplacian(ring(6))
        assert np.allclose(np.diag(lap), 2.0)
        for i in range(6):
            assert lap[i, (i + 1) % 6] == -1.0
            assert lap[i, (i - 1) % 6] == -1.0
        assert np.allclose(lap, lap.T)
        assert np.allclose(lap.sum(axis=1), 0.0)

    def test_psd_with_single_null_direction(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            g = _random_connected(rng, n=int(rng.integers(3, 9)))
            eig = np.linalg.eigvalsh(laplacian(g))
            assert eig.min() > -1e-10
            assert np.count_nonzero(np.abs(eig) < 1e-9) == 1


class TestAlgebraicConnectivity:
    def test_k2(self):
        assert algebraic_connectivity(CommGraph(2, [(0, 1)])) == pytest.approx(2.0, abs=1e-12)

    def test_c6(self):
        # circulant eigenvalues 2 - 2cos(2 pi k/6); smallest nonzero at k=1
        expected = 2.0 - 2.0 * math.cos(2.0 * math.pi / 6.0)
        assert expected == pytest.approx(1.0, abs=1e-12)
        assert algebraic_connectivity(ring(6)) == pytest.approx(1.0, abs=1e-9)

    def test_k6(self):
        assert algebraic_connectivity(complete(6)) == pytest.approx(6.0, abs=1e-9)

    def test_bounded_by_n_with_equality_iff_complete(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            n = int(rng.integers(3, 8))
            g = _random_connected(rng, n)
            eta2 = algebraic_connectivity(g)
            assert eta2 <= n + 1e-9
            if len(g.edges) < n * (n - 1) // 2:
                assert eta2 < n - 1e-9
        assert algebraic_connectivity(complete(5)) == pytest.approx(5.0, abs=1e-9)

    def test_adding_edge_never_decreases(self):
        rng = np.random.default_rng(23)
        for _ in range(25):
            n = int(rng.integers(3, 9))
            g = _random_connected(rng, n)
            missing = [(i, j) for i in range(n) for j in range(i + 1, n)
                       if (i, j) not in g.edges]
            if not missing:
                continue
            extra = missing[int(rng.integers(len(missing)))]
            g2 = CommGraph(n, list(g.edges) + [extra])
            assert algebraic_connectivity(g2) >= algebraic_connectivity(g) - 1e-9


def _random_connected(rng, n: int) -> CommGraph:
    # random spanning tree plus a few extra edges
    edges = [(int(rng.integers(0, k)), k) for k in range(1, n)]
    for _ in range(int(rng.integers(0, n))):
        i, j = int(rng.integers(n)), int(rng.integers(n))
        if i != j:
            edges.append((min(i, j), max(i, j)))
    return CommGraph(n, edges)
