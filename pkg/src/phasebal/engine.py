"""Outer simulation loop tying clustering, dispatch and metrics together.

Each outer step runs the distributed estimator to convergence on the
households' phase-angle features and net-power auxiliaries, reads the
per-phase totals off the first member's converged estimates, decides a
battery dispatch per bus, splits it across eligible cluster members,
advances every battery and records physical unbalance metrics before
and after.

Control quantities (estimated totals, dispatch, allocations) live in
cluster coordinates; the cluster index doubles as the phase label
because the estimator is seeded with the nominal phase-angle priors.
Physical metrics always aggregate by the household's true phase, which
control never reads, so a misassignment shows up as degraded balancing
rather than as silently wrong physics.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import balancing, storage
from .balancing import GridExchange, MemberShare, Scenario
from .clustering import (
    ClusterConfig,
    EstimatorState,
    cluster_results,
    init_estimator,
    run_until_converged,
)
from .errors import ConfigError, DataError, VerificationError
from .graph import CommGraph, build_graph, is_connected, topology_edges
from .oracles import brute_force_reference, centralized_cluster_means
from .records import (
    BusStepRecord,
    HouseholdStepRecord,
    RunSummary,
    StepRecord,
    read_profiles,
)
from .threephase import bus_metrics, phase_powers

PHASES = ("a", "b", "c")

_NOMINAL_ANGLE_DEG = {"a": 0.0, "b": -120.0, "c": 120.0}

# objective agreement demanded of the dispatch solver in verify mode
_VERIFY_OBJ_TOL = 1e-6
# relative agreement demanded of converged estimates in verify mode
_VERIFY_MEAN_TOL = 1e-4


def nominal_angle_deg(phase: str) -> float:
    try:
        return _NOMINAL_ANGLE_DEG[phase]
    except KeyError:
        raise ConfigError(f"unknown phase {phase!r}, expected one of {PHASES}")


def phase_index(phase: str) -> int:
    nominal_angle_deg(phase)
    return PHASES.index(phase)


@dataclass(frozen=True)
class Household:
    """One agent: its grid attachment, sensing, profiles and battery."""

    id: str
    bus: int
    true_phase: str
    measured_angle_deg: float
    load_profile: np.ndarray
    pv_profile: np.ndarray
    battery: storage.BatteryParams = field(default_factory=storage.BatteryParams)
    initial_soc: float = 0.5
    willing: bool = True


@dataclass(frozen=True)
class GraphSpec:
    """Named communication topology applied to each bus's members."""

    topology: str = "ring"
    alpha: float = 1.0


@dataclass(frozen=True)
class SimConfig:
    """Run-wide settings of the outer loop."""

    horizon: int
    dt_outer_s: float = 60.0
    vm_volts: float = 230.0
    z_n_ohms: complex = 0.05 + 0j
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    graph: GraphSpec = field(default_factory=GraphSpec)
    seed: int = 0
    balancing: bool = True

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ConfigError(f"horizon must be at least 1 step, got {self.horizon}")
        if not self.dt_outer_s > 0.0:
            raise ConfigError("outer step length must be positive")
        if not self.vm_volts > 0.0:
            raise ConfigError("nominal voltage must be positive")
        if self.cluster.m != len(PHASES):
            raise ConfigError("phase balancing requires exactly three clusters")


@dataclass
class BusRuntime:
    """Mutable per-bus solver state carried across outer steps."""

    bus: int
    member_idx: list[int]
    graph: CommGraph
    est: EstimatorState


@dataclass
class World:
    """Full mutable simulation state."""

    cfg: SimConfig
    households: tuple[Household, ...]
    states: list[storage.BatteryState]
    buses: list[BusRuntime]


def build_world(cfg: SimConfig, households: list[Household]) -> World:
    """Validate inputs and assemble runtime state for every bus."""
    if not households:
        raise ConfigError("need at least one household")
    ids = [h.id for h in households]
    if len(set(ids)) != len(ids):
        raise ConfigError("household ids must be unique")
    ordered = tuple(sorted(households, key=lambda h: h.id))
    for h in ordered:
        phase_index(h.true_phase)
        if len(h.load_profile) < cfg.horizon or len(h.pv_profile) < cfg.horizon:
            raise DataError(
                f"household {h.id!r} profiles cover {len(h.load_profile)} steps, "
                f"horizon needs {cfg.horizon}"
            )
        if np.any(np.asarray(h.pv_profile) < 0.0):
            raise DataError(f"household {h.id!r} has negative PV power")
        if not h.battery.soc_min <= h.initial_soc <= h.battery.soc_max:
            raise ConfigError(f"household {h.id!r} initial SoC outside hard bounds")

    states = [storage.battery_state(h.initial_soc, h.battery) for h in ordered]
    buses: list[BusRuntime] = []
    for bus in sorted({h.bus for h in ordered}):
        member_idx = [i for i, h in enumerate(ordered) if h.bus == bus]
        n = len(member_idx)
        g = build_graph(n, topology_edges(cfg.graph.topology, n), cfg.graph.alpha)
        if not is_connected(g):
            raise ConfigError(f"bus {bus} communication graph is not connected")
        x = np.array([ordered[i].measured_angle_deg for i in member_idx])
        est = init_estimator(x, np.zeros(n), g, cfg.cluster)
        buses.append(BusRuntime(bus=bus, member_idx=member_idx, graph=g, est=est))
    return World(cfg=cfg, households=ordered, states=states, buses=buses)


def _verify_bus(
    bus: BusRuntime,
    x: np.ndarray,
    z: np.ndarray,
    assignment: np.ndarray,
    res_xbar: np.ndarray,
    res_zbar: np.ndarray,
    decision: balancing.BalancingDecision | None,
    m: int,
) -> None:
    """Cross-check converged estimates and the dispatch against oracles."""
    problems: list[str] = []
    x_means, z_means, _ = centralized_cluster_means(x, z, assignment, m)
    for i, k in enumerate(assignment):
        for name, est, mean in (
            ("feature", res_xbar[i, k], x_means[k]),
            ("auxiliary", res_zbar[i, k], z_means[k]),
        ):
            if abs(est - mean) > _VERIFY_MEAN_TOL * max(1.0, abs(mean)):
                problems.append(
                    f"bus {bus.bus} member {i} {name} estimate {est!r} "
                    f"vs centralized mean {mean!r}"
                )
    if decision is not None and decision.scenario is Scenario.MIXED:
        p_g = decision.p_ref - decision.p_b
        _, oracle_obj = brute_force_reference(GridExchange(p_g))
        if abs(decision.objective - oracle_obj) > _VERIFY_OBJ_TOL:
            problems.append(
                f"bus {bus.bus} dispatch objective {decision.objective!r} "
                f"vs brute-force {oracle_obj!r} for exchanges {p_g.tolist()}"
            )
    if problems:
        raise VerificationError(
            "oracle disagreement:\n  " + "\n  ".join(problems)
        )


def step(world: World, t: int, verify: bool = False) -> tuple[World, StepRecord]:
    """Advance the world one outer step and record what happened."""
    cfg = world.cfg
    dt_h = cfg.dt_outer_s / 3600.0
    bus_records: list[BusStepRecord] = []
    hh_records: list[HouseholdStepRecord] = []

    for bus in world.buses:
        members = [world.households[i] for i in bus.member_idx]
        n = len(members)
        for h in members:
            if t >= len(h.load_profile) or t >= len(h.pv_profile):
                raise DataError(f"household {h.id!r} has no profile data at step {t}")
        p_l = np.array([float(h.load_profile[t]) for h in members])
        p_pv = np.array([float(h.pv_profile[t]) for h in members])
        x = np.array([h.measured_angle_deg for h in members])
        z = p_pv - p_l

        bus.est, iterations, converged = run_until_converged(
            bus.est, bus.graph, cfg.cluster, x, z
        )
        res = cluster_results(bus.est, n)
        assignment = res.assignment
        totals = res.cluster_totals
        p_g_est = totals[0].copy()
        est_spread = float(np.max(np.abs(totals - totals[0]))) if n > 1 else 0.0

        if cfg.balancing:
            decision = balancing.decide(GridExchange(p_g_est))
            scenario = decision.scenario
            p_ref = decision.p_ref
            p_b = decision.p_b
        else:
            decision = None
            scenario = balancing.classify_scenario(GridExchange(p_g_est))
            p_ref = 0.0
            p_b = np.zeros(3)

        if verify:
            _verify_bus(bus, x, z, assignment, res.xbar, res.zbar, decision, cfg.cluster.m)

        elig = [storage.eligibility(world.states[i], world.households[i].willing,
                                    world.households[i].battery, dt_h)
                for i in bus.member_idx]
        alloc = {members[j].id: 0.0 for j in range(n)}
        shortfall = 0.0
        for k in range(cfg.cluster.m):
            in_cluster = [j for j in range(n) if assignment[j] == k]
            shares = [
                MemberShare(
                    household_id=members[j].id,
                    eligible=elig[j][0],
                    headroom_kw=elig[j][2] if p_b[k] > 0.0 else elig[j][1],
                )
                for j in in_cluster
            ]
            cluster_alloc, cluster_short = balancing.allocate_cluster_power(
                float(p_b[k]), shares
            )
            alloc.update(cluster_alloc)
            shortfall += cluster_short

        p_act = np.zeros(n)
        deficits = np.zeros(n)
        for j, i in enumerate(bus.member_idx):
            new_state, p_act[j], deficits[j] = storage.apply_power(
                world.states[i], alloc[members[j].id], dt_h, world.households[i].battery
            )
            world.states[i] = new_state

        p_act_cluster = np.zeros(3)
        for j in range(n):
            p_act_cluster[assignment[j]] += p_act[j]

        true_idx = np.array([phase_index(h.true_phase) for h in members])
        p_load_phase = np.zeros(3)
        p_pv_phase = np.zeros(3)
        p_act_phase = np.zeros(3)
        for j in range(n):
            p_load_phase[true_idx[j]] += p_l[j]
            p_pv_phase[true_idx[j]] += p_pv[j]
            p_act_phase[true_idx[j]] += p_act[j]

        # battery power folds into the load side so PV stays nonnegative
        pre = bus_metrics(
            phase_powers(p_load=p_load_phase, p_pv=p_pv_phase), cfg.vm_volts, cfg.z_n_ohms
        )
        post = bus_metrics(
            phase_powers(p_load=p_load_phase - p_act_phase, p_pv=p_pv_phase),
            cfg.vm_volts,
            cfg.z_n_ohms,
        )
        p_g_pre = p_pv_phase - p_load_phase
        p_g_post = p_g_pre + p_act_phase
        misassigned = int(np.count_nonzero(assignment != true_idx))

        bus_records.append(
            BusStepRecord(
                step=t,
                bus=bus.bus,
                scenario=scenario.value,
                p_g_pre=p_g_pre,
                p_g_post=p_g_post,
                p_ref_kw=float(p_ref),
                p_b=np.asarray(p_b, dtype=float),
                p_act=p_act_cluster,
                shortfall_kw=float(shortfall),
                deficit_kw=float(np.sum(deficits)),
                i_n_pre_amps=abs(pre.i_neutral),
                i_n_post_amps=abs(post.i_neutral),
                cuf_pre_pct=pre.cuf_percent,
                cuf_post_pct=post.cuf_percent,
                ngv_pre_volts=abs(pre.ngv_volts),
                ngv_post_volts=abs(post.ngv_volts),
                cluster_iterations=iterations,
                cluster_converged=converged,
                misassigned=misassigned,
                est_spread_kw=est_spread,
            )
        )
        for j, i in enumerate(bus.member_idx):
            hh_records.append(
                HouseholdStepRecord(
                    step=t,
                    household_id=members[j].id,
                    bus=bus.bus,
                    cluster=int(assignment[j]),
                    true_phase=members[j].true_phase,
                    alloc_kw=float(alloc[members[j].id]),
                    p_act_kw=float(p_act[j]),
                    deficit_kw=float(deficits[j]),
                    soc=world.states[i].soc,
                    eligible=bool(elig[j][0]),
                )
            )

    record = StepRecord(step=t, buses=tuple(bus_records), households=tuple(hh_records))
    return world, record


def _nan_aware_max(values: np.ndarray) -> float:
    finite = values[np.isfinite(values)]
    return float(np.max(finite)) if finite.size else float("nan")


def summarize(records: list[StepRecord], cfg: SimConfig) -> RunSummary:
    """Aggregate per-step records into the run summary."""
    bus_rows = [b for r in records for b in r.buses]
    hh_rows = [h for r in records for h in r.households]
    dt_h = cfg.dt_outer_s / 3600.0
    i_n_pre = np.array([b.i_n_pre_amps for b in bus_rows])
    i_n_post = np.array([b.i_n_post_amps for b in bus_rows])
    agent_steps = len(hh_rows)
    misassigned = sum(b.misassigned for b in bus_rows)
    return RunSummary(
        steps=len(records),
        n_buses=len({b.bus for b in bus_rows}),
        n_households=len({h.household_id for h in hh_rows}),
        max_i_n_pre_amps=float(np.max(i_n_pre)),
        mean_i_n_pre_amps=float(np.mean(i_n_pre)),
        max_i_n_post_amps=float(np.max(i_n_post)),
        mean_i_n_post_amps=float(np.mean(i_n_post)),
        max_cuf_pre_pct=_nan_aware_max(np.array([b.cuf_pre_pct for b in bus_rows])),
        max_cuf_post_pct=_nan_aware_max(np.array([b.cuf_post_pct for b in bus_rows])),
        max_ngv_pre_volts=float(np.max([b.ngv_pre_volts for b in bus_rows])),
        max_ngv_post_volts=float(np.max([b.ngv_post_volts for b in bus_rows])),
        battery_throughput_kwh=float(sum(abs(h.p_act_kw) for h in hh_rows) * dt_h),
        total_deficit_kwh=float(sum(b.deficit_kw for b in bus_rows) * dt_h),
        total_shortfall_kwh=float(sum(b.shortfall_kw for b in bus_rows) * dt_h),
        clustering_accuracy=1.0 - misassigned / agent_steps if agent_steps else 1.0,
        all_steps_converged=all(b.cluster_converged for b in bus_rows),
    )


def run(
    cfg: SimConfig, households: list[Household], verify: bool = False
) -> tuple[RunSummary, list[StepRecord]]:
    """Simulate the full horizon. Returns the summary and all step records."""
    world = build_world(cfg, households)
    records: list[StepRecord] = []
    for t in range(cfg.horizon):
        world, record = step(world, t, verify=verify)
        records.append(record)
    return summarize(records, cfg), records


def load_profiles(path) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Read per-household (load, pv) series from a profiles CSV."""
    return read_profiles(path)


def attach_profiles(
    households: list[Household], profiles: dict[str, tuple[np.ndarray, np.ndarray]]
) -> list[Household]:
    """Return households with their profile series filled in from a table."""
    out = []
    for h in households:
        try:
            load, pv = profiles[h.id]
        except KeyError:
            raise DataError(f"profiles table lacks household {h.id!r}")
        out.append(replace(h, load_profile=load, pv_profile=pv))
    return out
