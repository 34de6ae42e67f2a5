"""Distributed online clustering with in-network averaging.

Every agent keeps one estimate vector per cluster for the feature being
clustered (phase angle, degrees) and one per cluster for an auxiliary
payload (net power, kW), plus an indicator average used to recover
cluster sizes. Agents belong to the cluster whose feature estimate is
closest to their own measurement and re-evaluate that choice after every
update.

Three discrete update rules coexist, all explicit Euler steps computed
synchronously from the pre-step snapshot:

* own-cluster channels diffuse only through neighbors of the same
  cluster and carry the agent's own drift, so the sum of member
  estimates is conserved and the channel settles on the exact member
  mean, provided the cluster members form a connected subgraph;
* foreign-cluster channels relay: they diffuse through all neighbors
  and additionally track the neighbors' previous-step estimate motion,
  so converged relays interpolate the member consensus across the rest
  of the network;
* the indicator channel diffuses through all neighbors with the
  membership flag (1 for the own cluster, 0 elsewhere) injected on
  every assignment change, conserving the network sum, so it settles on
  cluster size over network size everywhere.

When an agent changes cluster it reseeds the new own-cluster channel
with its current feature and auxiliary values and moves its indicator
mass, which keeps all three conservation budgets aligned with the new
membership.

The relay motion-tracking term narrows the stable step-size region well
below the plain diffusion bound; ``dt_inner * alpha * lambda_max`` of
the Laplacian should stay under roughly one half. The conservative
default step obeys this on any topology of modest degree.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .graph import CommGraph, is_connected

_METRICS = ("circular-angle", "euclidean")
_INITS = ("priors", "random")


@dataclass(frozen=True)
class ClusterConfig:
    """Knobs of the clustering estimator."""

    m: int = 3
    dt_inner: float = 0.01
    tol: float = 1e-6
    max_iter: int = 5000
    metric: str = "circular-angle"
    init: str = "priors"
    priors_deg: tuple[float, ...] = (0.0, -120.0, 120.0)
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError("need at least one cluster")
        if not self.dt_inner > 0.0:
            raise ValueError("inner step must be positive")
        if not self.tol > 0.0:
            raise ValueError("tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("need at least one iteration")
        if self.metric not in _METRICS:
            raise ValueError(f"metric must be one of {_METRICS}")
        if self.init not in _INITS:
            raise ValueError(f"init must be one of {_INITS}")


@dataclass
class EstimatorState:
    """Per-network snapshot of all agents' estimates.

    Rows index agents, columns index clusters. ``prev_delta_*`` hold the
    previous step's estimate increments that neighbors read as discrete
    time derivatives. ``x_feat`` and ``z_aux`` remember the last seen
    inputs so that input changes can be injected as drift.
    """

    x_feat: np.ndarray
    z_aux: np.ndarray
    xbar: np.ndarray
    zbar: np.ndarray
    zbar_ind: np.ndarray
    assignment: np.ndarray
    prev_delta_x: np.ndarray
    prev_delta_z: np.ndarray

    def copy(self) -> "EstimatorState":
        return EstimatorState(
            x_feat=self.x_feat.copy(),
            z_aux=self.z_aux.copy(),
            xbar=self.xbar.copy(),
            zbar=self.zbar.copy(),
            zbar_ind=self.zbar_ind.copy(),
            assignment=self.assignment.copy(),
            prev_delta_x=self.prev_delta_x.copy(),
            prev_delta_z=self.prev_delta_z.copy(),
        )


@dataclass(frozen=True)
class ClusterResults:
    """Readout of a converged estimator.

    ``cluster_totals[i, j]`` is agent i's estimate of the summed
    auxiliary value over cluster j, the mean estimate scaled by the
    estimated member count.
    """

    assignment: np.ndarray
    xbar: np.ndarray
    zbar: np.ndarray
    cluster_totals: np.ndarray


def _distance(x: np.ndarray, centroids: np.ndarray, metric: str) -> np.ndarray:
    diff = np.asarray(x)[..., None] - np.asarray(centroids)
    if metric == "circular-angle":
        diff = (diff + 180.0) % 360.0 - 180.0
    return np.abs(diff)


def assign_cluster(x_i: float, xbar_i: np.ndarray, metric: str, m: int) -> int:
    """Index of the cluster whose estimate is nearest, lowest index on ties."""
    xbar_i = np.asarray(xbar_i, dtype=float)
    if xbar_i.shape != (m,) or m < 1:
        raise ValueError(f"expected {m} cluster estimates, got shape {xbar_i.shape}")
    if metric not in _METRICS:
        raise ValueError(f"metric must be one of {_METRICS}")
    return int(np.argmin(_distance(float(x_i), xbar_i, metric)))


def _assign_all(x: np.ndarray, xbar: np.ndarray, metric: str) -> np.ndarray:
    return np.argmin(_distance(x, xbar, metric), axis=1).astype(np.int64)


def init_estimator(
    x: np.ndarray, z: np.ndarray, g: CommGraph, cfg: ClusterConfig
) -> EstimatorState:
    """Seed estimates, take the first assignment and plant own-channel values."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape != (g.n,) or z.shape != (g.n,):
        raise ValueError("feature and auxiliary vectors must have one entry per agent")
    if cfg.init == "priors":
        if len(cfg.priors_deg) != cfg.m:
            raise ValueError("need exactly one prior per cluster")
        xbar = np.tile(np.asarray(cfg.priors_deg, dtype=float), (g.n, 1))
    else:
        rng = np.random.default_rng(cfg.seed)
        xbar = rng.uniform(-180.0, 180.0, size=(g.n, cfg.m))
    zbar = np.zeros((g.n, cfg.m))
    ind = np.zeros((g.n, cfg.m))
    assignment = _assign_all(x, xbar, cfg.metric)
    rows = np.arange(g.n)
    xbar[rows, assignment] = x
    zbar[rows, assignment] = z
    ind[rows, assignment] = 1.0
    return EstimatorState(
        x_feat=x.copy(),
        z_aux=z.copy(),
        xbar=xbar,
        zbar=zbar,
        zbar_ind=ind,
        assignment=assignment,
        prev_delta_x=np.zeros((g.n, cfg.m)),
        prev_delta_z=np.zeros((g.n, cfg.m)),
    )


def _value_channel_step(
    value: np.ndarray,
    prev_delta: np.ndarray,
    drift_own: np.ndarray,
    onehot: np.ndarray,
    g: CommGraph,
    dt: float,
) -> np.ndarray:
    """One Euler step of a value channel group from a snapshot."""
    a = g.adjacency
    cnt = (a > 0.0).astype(float)
    deg_w = a.sum(axis=1)
    deg_cnt = cnt.sum(axis=1)
    coup_own = a @ (onehot * value) - (a @ onehot) * value
    coup_all = a @ value - deg_w[:, None] * value
    with np.errstate(invalid="ignore"):
        relay_drift = np.where(
            deg_cnt[:, None] > 0.0, (cnt @ prev_delta) / deg_cnt[:, None], 0.0
        )
    own = value + dt * (drift_own[:, None] + coup_own)
    other = value + relay_drift + dt * coup_all
    return np.where(onehot > 0.0, own, other)


def _onehot(assignment: np.ndarray, m: int) -> np.ndarray:
    o = np.zeros((assignment.shape[0], m))
    o[np.arange(assignment.shape[0]), assignment] = 1.0
    return o


def _check_step_inputs(state: EstimatorState, g: CommGraph, cfg: ClusterConfig) -> None:
    if not is_connected(g):
        raise ValueError("communication graph must be connected")
    if state.xbar.shape != (g.n, cfg.m):
        raise ValueError(
            f"estimator holds {state.xbar.shape[0]} agents, graph has {g.n}"
        )


def step_feature_consensus(
    state: EstimatorState, g: CommGraph, cfg: ClusterConfig, xdot: np.ndarray
) -> EstimatorState:
    """Advance all feature channels one step, then re-evaluate memberships.

    Args:
        state: pre-step snapshot; not modified.
        g: communication graph.
        cfg: estimator configuration.
        xdot: per-agent feature drift injected into the own channel.

    Returns the post-step state. Agents whose nearest estimate moved to a
    different cluster are reassigned, with own-channel reseeds and an
    indicator mass transfer recorded against the new membership.
    """
    _check_step_inputs(state, g, cfg)
    xdot = np.asarray(xdot, dtype=float)
    onehot = _onehot(state.assignment, cfg.m)
    new_xbar = _value_channel_step(
        state.xbar, state.prev_delta_x, xdot, onehot, g, cfg.dt_inner
    )
    new_pdx = new_xbar - state.xbar

    new_assignment = _assign_all(state.x_feat, new_xbar, cfg.metric)
    changed = np.flatnonzero(new_assignment != state.assignment)

    new_zbar = state.zbar
    new_pdz = state.prev_delta_z
    new_ind = state.zbar_ind
    if changed.size:
        new_zbar = state.zbar.copy()
        new_pdz = state.prev_delta_z.copy()
        new_ind = state.zbar_ind.copy()
        old = state.assignment[changed]
        new = new_assignment[changed]
        # a reseed is a re-initialization, not motion seen by neighbors
        new_xbar[changed, new] = state.x_feat[changed]
        new_pdx[changed, new] = 0.0
        new_zbar[changed, new] = state.z_aux[changed]
        new_pdz[changed, new] = 0.0
        new_ind[changed, new] += 1.0
        new_ind[changed, old] -= 1.0

    return replace(
        state,
        xbar=new_xbar,
        zbar=new_zbar,
        zbar_ind=new_ind,
        assignment=new_assignment,
        prev_delta_x=new_pdx,
        prev_delta_z=new_pdz,
    )


def step_aux_consensus(
    state: EstimatorState, g: CommGraph, cfg: ClusterConfig, z: np.ndarray, zdot: np.ndarray
) -> EstimatorState:
    """Advance auxiliary and indicator channels under the current memberships.

    Args:
        state: pre-step snapshot; not modified.
        g: communication graph.
        cfg: estimator configuration.
        z: current per-agent auxiliary values, remembered for reseeds.
        zdot: per-agent auxiliary drift injected into the own channel.
    """
    _check_step_inputs(state, g, cfg)
    z = np.asarray(z, dtype=float)
    zdot = np.asarray(zdot, dtype=float)
    onehot = _onehot(state.assignment, cfg.m)
    new_zbar = _value_channel_step(
        state.zbar, state.prev_delta_z, zdot, onehot, g, cfg.dt_inner
    )
    a = g.adjacency
    ind = state.zbar_ind
    new_ind = ind + cfg.dt_inner * (a @ ind - a.sum(axis=1)[:, None] * ind)
    return replace(
        state,
        z_aux=z.copy(),
        zbar=new_zbar,
        zbar_ind=new_ind,
        prev_delta_z=new_zbar - state.zbar,
    )


@njit(cache=True)
def _converge_loop(  # pragma: no cover - exercised through run_until_converged
    xbar, zbar, ind, pdx, pdz, assignment, x, z, nptr, nidx, alpha, dt, tol, max_iter, circular
):
    n, m = xbar.shape
    xb0 = np.empty((n, m))
    zb0 = np.empty((n, m))
    z_start = np.empty((n, m))
    i_start = np.empty((n, m))
    i0 = np.empty((n, m))
    pdx0 = np.empty((n, m))
    pdz0 = np.empty((n, m))
    iterations = 0
    converged = False
    for _ in range(max_iter):
        iterations += 1
        xb0[:] = xbar
        z_start[:] = zbar
        i_start[:] = ind
        pdx0[:] = pdx
        k0 = assignment.copy()

        # feature channels from the pre-step snapshot
        for i in range(n):
            deg = nptr[i + 1] - nptr[i]
            for j in range(m):
                coup_all = 0.0
                coup_own = 0.0
                drift = 0.0
                for p in range(nptr[i], nptr[i + 1]):
                    l = nidx[p]
                    d = xb0[l, j] - xb0[i, j]
                    coup_all += d
                    drift += pdx0[l, j]
                    if k0[l] == j:
                        coup_own += d
                if k0[i] == j:
                    xbar[i, j] = xb0[i, j] + dt * alpha * coup_own
                elif deg > 0:
                    xbar[i, j] = xb0[i, j] + drift / deg + dt * alpha * coup_all
                pdx[i, j] = xbar[i, j] - xb0[i, j]

        # re-evaluate memberships against the fresh feature estimates
        for i in range(n):
            best = 0
            best_d = 1.0e300
            for j in range(m):
                d = x[i] - xbar[i, j]
                if circular:
                    d = (d + 180.0) % 360.0 - 180.0
                d = abs(d)
                if d < best_d:
                    best_d = d
                    best = j
            if best != k0[i]:
                assignment[i] = best
                xbar[i, best] = x[i]
                pdx[i, best] = 0.0
                zbar[i, best] = z[i]
                pdz[i, best] = 0.0
                ind[i, best] += 1.0
                ind[i, k0[i]] -= 1.0

        # auxiliary channels under the fresh memberships
        zb0[:] = zbar
        i0[:] = ind
        pdz0[:] = pdz
        for i in range(n):
            deg = nptr[i + 1] - nptr[i]
            for j in range(m):
                coup_all = 0.0
                coup_own = 0.0
                drift = 0.0
                coup_ind = 0.0
                for p in range(nptr[i], nptr[i + 1]):
                    l = nidx[p]
                    d = zb0[l, j] - zb0[i, j]
                    coup_all += d
                    drift += pdz0[l, j]
                    coup_ind += i0[l, j] - i0[i, j]
                    if assignment[l] == j:
                        coup_own += d
                if assignment[i] == j:
                    zbar[i, j] = zb0[i, j] + dt * alpha * coup_own
                elif deg > 0:
                    zbar[i, j] = zb0[i, j] + drift / deg + dt * alpha * coup_all
                pdz[i, j] = zbar[i, j] - zb0[i, j]
                ind[i, j] = i0[i, j] + dt * alpha * coup_ind

        delta = 0.0
        for i in range(n):
            for j in range(m):
                d = abs(xbar[i, j] - xb0[i, j])
                if d > delta:
                    delta = d
                d = abs(zbar[i, j] - z_start[i, j])
                if d > delta:
                    delta = d
                d = abs(ind[i, j] - i_start[i, j])
                if d > delta:
                    delta = d
        if delta < tol:
            converged = True
            break
    return iterations, converged


def run_until_converged(
    state: EstimatorState, g: CommGraph, cfg: ClusterConfig, x: np.ndarray, z: np.ndarray
) -> tuple[EstimatorState, int, bool]:
    """Iterate assignment and both consensus steps to a fixed point.

    Changes in the inputs since the last call enter as one-shot drift on
    the own channels before iterating, so a warm-started estimator only
    has to absorb the increment. Convergence means the largest estimate
    change over one full iteration fell below ``cfg.tol``.

    Returns (new state, iterations used, converged flag).
    """
    _check_step_inputs(state, g, cfg)
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape != (g.n,) or z.shape != (g.n,):
        raise ValueError("feature and auxiliary vectors must have one entry per agent")

    out = state.copy()
    rows = np.arange(g.n)
    out.xbar[rows, out.assignment] += x - out.x_feat
    out.zbar[rows, out.assignment] += z - out.z_aux
    out.x_feat = x.copy()
    out.z_aux = z.copy()

    nptr, nidx = g.csr_neighbors
    iterations, converged = _converge_loop(
        out.xbar,
        out.zbar,
        out.zbar_ind,
        out.prev_delta_x,
        out.prev_delta_z,
        out.assignment,
        x,
        z,
        nptr,
        nidx,
        g.alpha,
        cfg.dt_inner,
        cfg.tol,
        cfg.max_iter,
        cfg.metric == "circular-angle",
    )
    return out, iterations, bool(converged)


def cluster_results(state: EstimatorState, n_total: int) -> ClusterResults:
    """Readout: memberships, estimates and per-cluster auxiliary totals."""
    if n_total < 1:
        raise ValueError("total agent count must be positive")
    return ClusterResults(
        assignment=state.assignment.copy(),
        xbar=state.xbar.copy(),
        zbar=state.zbar.copy(),
        cluster_totals=state.zbar * state.zbar_ind * float(n_total),
    )
