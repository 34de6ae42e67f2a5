"""Shared helpers for building random but well-posed test topologies."""
from __future__ import annotations

import numpy as np

from phasebal.graph import CommGraph, build_graph


def random_connected_graph(
    rng: np.random.Generator, n: int, alpha: float = 1.0, extra_edge_prob: float = 0.2
) -> CommGraph:
    """Random spanning tree plus a sprinkle of extra edges."""
    edges = set()
    for i in range(1, n):
        j = int(rng.integers(0, i))
        edges.add((j, i))
    for i in range(n):
        for j in range(i + 1, n):
            if (i, j) not in edges and rng.random() < extra_edge_prob:
                edges.add((i, j))
    return build_graph(n, edges, alpha)


def grown_partition(rng: np.random.Generator, g: CommGraph, m: int) -> np.ndarray:
    """Partition nodes into m nonempty groups, each connected in g.

    Groups grow one frontier node at a time from random seeds, so every
    group's induced subgraph stays connected by construction.
    """
    if g.n < m:
        raise ValueError("cannot grow more groups than nodes")
    labels = np.full(g.n, -1, dtype=np.int64)
    seeds = rng.choice(g.n, size=m, replace=False)
    for k, s in enumerate(seeds):
        labels[s] = k
    nbrs = g.neighbor_lists
    while np.any(labels < 0):
        frontier = [
            i for i in range(g.n) if labels[i] >= 0 and any(labels[l] < 0 for l in nbrs[i])
        ]
        i = frontier[int(rng.integers(len(frontier)))]
        unassigned = [l for l in nbrs[i] if labels[l] < 0]
        labels[unassigned[int(rng.integers(len(unassigned)))]] = labels[i]
    return labels


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per executed acceptance check."""
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance checks")
    for label, ok in results:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {label}")
