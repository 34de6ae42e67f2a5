"""Independent cross-checks for the solvers in this package.

Nothing here shares code with the routines it checks. The dispatch
oracle searches a dense grid of candidate targets instead of using the
closed form, and the clustering oracle averages with global knowledge
that no distributed agent has. Both are deliberately slow and simple;
they back the ``--verify`` run mode and the test suite.
"""
from __future__ import annotations

import numpy as np

from .balancing import GridExchange

# direction agreement slack when screening grid candidates
_SIGN_TOL = 1e-12


def brute_force_reference(gx: GridExchange, step: float = 1e-3) -> tuple[float, float]:
    """Grid-search the common exchange target with the smallest L1 effort.

    Candidates sweep [min(p_g) - 1, max(p_g) + 1] at the given
    resolution, with both extreme phase exchanges always included
    because the constrained optimum sits on one of them. A candidate is
    feasible when no two battery powers oppose each other in sign.
    Returns (target, total dispatched battery power).
    """
    if not step > 0.0:
        raise ValueError("grid step must be positive")
    lo = float(np.min(gx.p_g))
    hi = float(np.max(gx.p_g))
    grid = np.arange(lo - 1.0, hi + 1.0, step)
    candidates = np.unique(np.concatenate([grid, [lo, hi, hi + 1.0]]))
    p_b = candidates[:, None] - gx.p_g[None, :]
    feasible = ~(
        np.any(p_b > _SIGN_TOL, axis=1) & np.any(p_b < -_SIGN_TOL, axis=1)
    )
    objectives = np.sum(np.abs(p_b), axis=1)
    objectives[~feasible] = np.inf
    best = int(np.argmin(objectives))
    return float(candidates[best]), float(objectives[best])


def centralized_cluster_means(
    x: np.ndarray, z: np.ndarray, assignment: np.ndarray, m: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact per-cluster means computed with global knowledge.

    Returns (feature means, auxiliary means, member counts) indexed by
    cluster; empty clusters yield NaN means and a zero count.
    """
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    assignment = np.asarray(assignment)
    if m < 1:
        raise ValueError("need at least one cluster")
    x_means = np.full(m, np.nan)
    z_means = np.full(m, np.nan)
    counts = np.zeros(m, dtype=np.int64)
    for j in range(m):
        members = assignment == j
        counts[j] = int(np.count_nonzero(members))
        if counts[j]:
            x_means[j] = float(np.mean(x[members]))
            z_means[j] = float(np.mean(z[members]))
    return x_means, z_means, counts
