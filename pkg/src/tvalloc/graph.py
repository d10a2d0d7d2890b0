"""Undirected communication graph and the spectral quantity the settling
bounds need (algebraic connectivity, the second-smallest Laplacian eigenvalue).

Edge weights are restricted to {0, 1}; graphs must be connected and have
at least two nodes, both checked at construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DisconnectedGraph, InvariantViolation

_ZERO_EIG_TOL = 1e-9


def _normalize_edges(n: int, edges) -> frozenset:
    out = set()
    for e in edges:
        i, j = int(e[0]), int(e[1])
        if i == j:
            raise InvariantViolation(f"self-loop at node {i}")
        if not (0 <= i < n and 0 <= j < n):
            raise InvariantViolation(f"edge ({i},{j}) out of range for n={n}")
        out.add((min(i, j), max(i, j)))
    return frozenset(out)


def is_connected(n: int, edges) -> bool:
    """True iff one traversal from node 0 reaches all n nodes."""
    adj: list[list[int]] = [[] for _ in range(n)]
    for i, j in _normalize_edges(n, edges):
        adj[i].append(j)
        adj[j].append(i)
    seen = [False] * n
    stack = [0]
    seen[0] = True
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    return all(seen)


@dataclass(frozen=True)
class CommGraph:
    """Fixed, connected, undirected communication network on n >= 2 agents."""

    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __init__(self, n: int, edges):
        if n < 2:
            raise InvariantViolation(f"need at least 2 agents, got n={n}")
        norm = _normalize_edges(n, edges)
        if not is_connected(n, norm):
            raise DisconnectedGraph(f"graph on {n} nodes is not connected")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "edges", norm)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1.0
        return a

    def neighbor_lists(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return [sorted(nb) for nb in adj]

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """(indptr, indices) neighbor layout for the jit core."""
        nb = self.neighbor_lists()
        indptr = np.zeros(self.n + 1, dtype=np.int32)
        for i, lst in enumerate(nb):
            indptr[i + 1] = indptr[i] + len(lst)
        indices = np.concatenate([np.asarray(lst, dtype=np.int32) for lst in nb]) if self.n else np.zeros(0, np.int32)
        return indptr, indices

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


def ring(n: int) -> CommGraph:
    """Cycle graph 0-1-...-(n-1)-0."""
    return CommGraph(n, [(i, (i + 1) % n) for i in range(n)])


def complete(n: int) -> CommGraph:
    return CommGraph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def laplacian(g: CommGraph) -> np.ndarray:
    """L = D - A; symmetric, rows sum to zero."""
    a = g.adjacency()
    return np.diag(a.sum(axis=1)) - a


def algebraic_connectivity(g: CommGraph) -> float:
    """Second-smallest Laplacian eigenvalue (strictly positive when connected)."""
    eig = np.linalg.eigvalsh(laplacian(g))
    eig.sort()
    if np.count_nonzero(np.abs(eig) < _ZERO_EIG_TOL) > 1:
        raise DisconnectedGraph("zero Laplacian eigenvalue has multiplicity > 1")
    return float(eig[1])
