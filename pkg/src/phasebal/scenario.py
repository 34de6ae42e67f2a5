"""Scenario configuration: TOML parsing, emission and templates.

A scenario file fully describes a run except for the profile time
series, which live in a separate CSV so the config stays reviewable.
``effective_config`` re-emits a loaded or generated scenario with every
default filled in, in a fixed key order with round-trip float
formatting, so the emitted file reproduces the run byte for byte.
"""
from __future__ import annotations

from dataclasses import fields

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import numpy as np

from .clustering import ClusterConfig
from .engine import PHASES, GraphSpec, Household, SimConfig, nominal_angle_deg
from .errors import ConfigError
from .storage import BatteryParams

_RUN_KEYS = {"horizon", "dt_outer_s", "seed", "balancing"}
_GRID_KEYS = {"vm_volts", "z_n_ohms"}
_GRAPH_KEYS = {"topology", "alpha"}
_CLUSTER_KEYS = {"m", "dt_inner", "tol", "max_iter", "metric", "init", "priors_deg", "seed"}
_HOUSEHOLD_KEYS = {
    "id",
    "bus",
    "true_phase",
    "measured_angle_deg",
    "initial_soc",
    "willing",
    "battery",
}
_SECTIONS = {"run", "grid", "graph", "cluster", "household"}

_BATTERY_FIELDS = tuple(f.name for f in fields(BatteryParams))


def _check_keys(table: dict, allowed: set, where: str) -> None:
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def _require(table: dict, key: str, where: str):
    try:
        return table[key]
    except KeyError:
        raise ConfigError(f"missing required key {key!r} in {where}")


def load_scenario(path) -> tuple[SimConfig, list[Household]]:
    """Parse a scenario file. Households come back without profile data."""
    try:
        with open(path, "rb") as f:
            doc = tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"scenario file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}")

    _check_keys(doc, _SECTIONS, str(path))
    run = doc.get("run", {})
    grid = doc.get("grid", {})
    graph = doc.get("graph", {})
    cluster = doc.get("cluster", {})
    _check_keys(run, _RUN_KEYS, "[run]")
    _check_keys(grid, _GRID_KEYS, "[grid]")
    _check_keys(graph, _GRAPH_KEYS, "[graph]")
    _check_keys(cluster, _CLUSTER_KEYS, "[cluster]")

    z_n = grid.get("z_n_ohms", [0.05, 0.0])
    if not (isinstance(z_n, list) and len(z_n) == 2):
        raise ConfigError("[grid] z_n_ohms must be a [real, imaginary] pair")
    seed = int(run.get("seed", 0))

    defaults = ClusterConfig()
    try:
        cluster_cfg = ClusterConfig(
            m=int(cluster.get("m", defaults.m)),
            dt_inner=float(cluster.get("dt_inner", defaults.dt_inner)),
            tol=float(cluster.get("tol", defaults.tol)),
            max_iter=int(cluster.get("max_iter", defaults.max_iter)),
            metric=cluster.get("metric", defaults.metric),
            init=cluster.get("init", defaults.init),
            priors_deg=tuple(float(p) for p in cluster.get("priors_deg", defaults.priors_deg)),
            seed=int(cluster.get("seed", seed)),
        )
        cfg = SimConfig(
            horizon=int(_require(run, "horizon", "[run]")),
            dt_outer_s=float(run.get("dt_outer_s", 60.0)),
            vm_volts=float(grid.get("vm_volts", 230.0)),
            z_n_ohms=complex(float(z_n[0]), float(z_n[1])),
            cluster=cluster_cfg,
            graph=GraphSpec(
                topology=graph.get("topology", "ring"),
                alpha=float(graph.get("alpha", 1.0)),
            ),
            seed=seed,
            balancing=bool(run.get("balancing", True)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}")

    raw_households = doc.get("household", [])
    if not raw_households:
        raise ConfigError(f"{path}: scenario defines no households")
    households = []
    for idx, h in enumerate(raw_households):
        where = f"[[household]] #{idx}"
        _check_keys(h, _HOUSEHOLD_KEYS, where)
        battery_tbl = h.get("battery", {})
        _check_keys(battery_tbl, set(_BATTERY_FIELDS), f"{where}.battery")
        phase = str(_require(h, "true_phase", where))
        if phase not in PHASES:
            raise ConfigError(f"{where}: true_phase must be one of {PHASES}, got {phase!r}")
        try:
            battery = BatteryParams(**{k: float(v) for k, v in battery_tbl.items()})
            households.append(
                Household(
                    id=str(_require(h, "id", where)),
                    bus=int(_require(h, "bus", where)),
                    true_phase=phase,
                    measured_angle_deg=float(_require(h, "measured_angle_deg", where)),
                    load_profile=np.empty(0),
                    pv_profile=np.empty(0),
                    battery=battery,
                    initial_soc=float(h.get("initial_soc", 0.5)),
                    willing=bool(h.get("willing", True)),
                )
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path} {where}: {exc}")
    return cfg, households


def _toml_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_scalar(v) for v in value) + "]"
    raise TypeError(f"cannot emit {type(value).__name__} as TOML")


def effective_config(cfg: SimConfig, households: list[Household]) -> str:
    """Emit the fully resolved scenario as deterministic TOML text."""
    lines = ["[run]"]
    lines += [
        f"horizon = {_toml_scalar(cfg.horizon)}",
        f"dt_outer_s = {_toml_scalar(cfg.dt_outer_s)}",
        f"seed = {_toml_scalar(cfg.seed)}",
        f"balancing = {_toml_scalar(cfg.balancing)}",
        "",
        "[grid]",
        f"vm_volts = {_toml_scalar(cfg.vm_volts)}",
        f"z_n_ohms = {_toml_scalar([cfg.z_n_ohms.real, cfg.z_n_ohms.imag])}",
        "",
        "[graph]",
        f"topology = {_toml_scalar(cfg.graph.topology)}",
        f"alpha = {_toml_scalar(cfg.graph.alpha)}",
        "",
        "[cluster]",
        f"m = {_toml_scalar(cfg.cluster.m)}",
        f"dt_inner = {_toml_scalar(cfg.cluster.dt_inner)}",
        f"tol = {_toml_scalar(cfg.cluster.tol)}",
        f"max_iter = {_toml_scalar(cfg.cluster.max_iter)}",
        f"metric = {_toml_scalar(cfg.cluster.metric)}",
        f"init = {_toml_scalar(cfg.cluster.init)}",
        f"priors_deg = {_toml_scalar(list(cfg.cluster.priors_deg))}",
        f"seed = {_toml_scalar(cfg.cluster.seed if cfg.cluster.seed is not None else cfg.seed)}",
    ]
    for h in sorted(households, key=lambda h: h.id):
        lines += [
            "",
            "[[household]]",
            f"id = {_toml_scalar(h.id)}",
            f"bus = {_toml_scalar(h.bus)}",
            f"true_phase = {_toml_scalar(h.true_phase)}",
            f"measured_angle_deg = {_toml_scalar(h.measured_angle_deg)}",
            f"initial_soc = {_toml_scalar(h.initial_soc)}",
            f"willing = {_toml_scalar(h.willing)}",
            "",
            "[household.battery]",
        ]
        lines += [
            f"{name} = {_toml_scalar(getattr(h.battery, name))}" for name in _BATTERY_FIELDS
        ]
    return "\n".join(lines) + "\n"


def nine_house_template(
    seed: int = 0,
    n_households: int = 9,
    horizon: int = 1440,
    noise_sigma_deg: float = 2.0,
) -> tuple[SimConfig, list[Household], dict[str, tuple[np.ndarray, np.ndarray]]]:
    """Canonical desk-scale scenario: one bus, a ring, PV stacked on phase a.

    Households split into three contiguous blocks along the ring, one
    per phase, so each phase group is a connected stretch of the
    communication graph. Only phase-a households carry PV, which drives
    the bus from uniform consumption at night into opposing signs around
    midday. Returns the config, ready-to-run households and the profile
    table keyed by household id.
    """
    if n_households < 3:
        raise ConfigError("template needs at least one household per phase")
    rng = np.random.default_rng(seed)
    # day fraction in [0, 1); the horizon always maps onto one 24 h cycle
    u = np.arange(horizon) / horizon

    block = n_households // 3
    extra = n_households % 3
    sizes = [block + (1 if k < extra else 0) for k in range(3)]
    phase_of: list[str] = []
    for k, size in enumerate(sizes):
        phase_of += [PHASES[k]] * size

    households = []
    profiles: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for i in range(n_households):
        phase = phase_of[i]
        angle = nominal_angle_deg(phase) + noise_sigma_deg * rng.standard_normal()
        base = rng.uniform(0.3, 0.8)
        phase_shift = rng.uniform(0.0, 2.0 * np.pi)
        load = base * (1.0 + 0.5 * np.sin(2.0 * np.pi * u + phase_shift))
        load = np.maximum(load, 0.05)
        if phase == "a":
            # sun up from 06:00 to 18:00 on the normalized clock
            peak = rng.uniform(2.5, 3.5)
            pv = peak * np.clip(np.sin(2.0 * np.pi * (u - 0.25)), 0.0, None)
        else:
            pv = np.zeros(horizon)
        hid = f"h{i}"
        profiles[hid] = (load, pv)
        households.append(
            Household(
                id=hid,
                bus=0,
                true_phase=phase,
                measured_angle_deg=float(angle),
                load_profile=load,
                pv_profile=pv,
            )
        )

    cfg = SimConfig(
        horizon=horizon,
        dt_outer_s=60.0,
        cluster=ClusterConfig(dt_inner=0.05, tol=1e-10, seed=seed),
        graph=GraphSpec(topology="ring", alpha=1.0),
        seed=seed,
    )
    return cfg, households, profiles


TEMPLATES = {"nine-house": nine_house_template}


def generate(template: str, seed: int, n_households: int):
    """Instantiate a named template; unknown names list what exists."""
    try:
        builder = TEMPLATES[template]
    except KeyError:
        known = ", ".join(sorted(TEMPLATES))
        raise ConfigError(f"unknown template {template!r}, available: {known}")
    return builder(seed=seed, n_households=n_households)
