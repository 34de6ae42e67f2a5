"""Sparse communication topology shared by the household agents.

The network is an undirected graph with a uniform coupling gain on every
edge. Consensus updates read the weighted adjacency and graph Laplacian,
so both are cached on the graph object. A connected topology is a hard
precondition for every consensus routine in this package.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np

Edge = tuple[int, int]


@dataclass(frozen=True)
class CommGraph:
    """Undirected communication graph with uniform edge weight alpha."""

    n: int
    edges: frozenset[Edge]
    alpha: float

    @cached_property
    def neighbor_lists(self) -> tuple[tuple[int, ...], ...]:
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            nbrs[u].append(v)
            nbrs[v].append(u)
        return tuple(tuple(sorted(b)) for b in nbrs)

    @cached_property
    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for u, v in self.edges:
            a[u, v] = self.alpha
            a[v, u] = self.alpha
        return a

    @cached_property
    def csr_neighbors(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened neighbor table (offsets, indices) for tight loops."""
        lists = self.neighbor_lists
        ptr = np.zeros(self.n + 1, dtype=np.int64)
        for i, b in enumerate(lists):
            ptr[i + 1] = ptr[i] + len(b)
        idx = np.fromiter(
            (l for b in lists for l in b), dtype=np.int64, count=int(ptr[-1])
        )
        return ptr, idx

    @property
    def max_degree(self) -> int:
        return max((len(b) for b in self.neighbor_lists), default=0)


def build_graph(n: int, edges: Iterable[Edge], alpha: float) -> CommGraph:
    """Validate and construct a CommGraph.

    Duplicate edges and reversed duplicates collapse to a single
    undirected edge. Self-loops and out-of-range endpoints are rejected.
    """
    if n < 1:
        raise ValueError(f"graph needs at least one node, got n={n}")
    if not alpha > 0.0:
        raise ValueError(f"coupling gain must be positive, got alpha={alpha}")
    normalized: set[Edge] = set()
    for u, v in edges:
        if u == v:
            raise ValueError(f"self-loop on node {u} is not allowed")
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"edge ({u}, {v}) out of range for n={n}")
        normalized.add((min(u, v), max(u, v)))
    return CommGraph(n=n, edges=frozenset(normalized), alpha=float(alpha))


def laplacian(g: CommGraph) -> np.ndarray:
    """Weighted graph Laplacian, degree matrix minus adjacency."""
    a = g.adjacency
    return np.diag(a.sum(axis=1)) - a


def is_connected(g: CommGraph) -> bool:
    """Breadth-first reachability from node 0. A single node is connected."""
    if g.n == 1:
        return True
    seen = [False] * g.n
    seen[0] = True
    queue = deque([0])
    count = 1
    nbrs = g.neighbor_lists
    while queue:
        u = queue.popleft()
        for v in nbrs[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                queue.append(v)
    return count == g.n


def ring_edges(n: int) -> list[Edge]:
    if n < 3:
        return path_edges(n)
    return [(i, (i + 1) % n) for i in range(n)]


def path_edges(n: int) -> list[Edge]:
    return [(i, i + 1) for i in range(n - 1)]


def full_edges(n: int) -> list[Edge]:
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


_TOPOLOGIES = {"ring": ring_edges, "path": path_edges, "full": full_edges}


def topology_edges(name: str, n: int) -> list[Edge]:
    """Edge list for a named topology (ring, path or full)."""
    try:
        builder = _TOPOLOGIES[name]
    except KeyError:
        known = ", ".join(sorted(_TOPOLOGIES))
        raise ValueError(f"unknown topology {name!r}, expected one of: {known}")
    return builder(n)
