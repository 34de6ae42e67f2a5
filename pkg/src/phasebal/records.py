"""Record types and file schemas produced by a simulation run.

Every artifact is plain text: two CSV tables (per-bus and per-household,
one row per step and entity), a profiles CSV for input time series and a
JSON run summary. Each CSV starts with a versioned comment line that
also carries the outer step length, so a records file is interpretable
on its own. Floats are written with shortest round-trip formatting,
which makes repeated runs byte-comparable.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, fields
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

from .errors import DataError

_BUS_SCHEMA = "phasebal-bus-records v1"
_HOUSEHOLD_SCHEMA = "phasebal-household-records v1"
_PROFILES_SCHEMA = "phasebal-profiles v1"

_BUS_COLUMNS = (
    "step",
    "bus",
    "scenario",
    "p_g_pre_a_kw",
    "p_g_pre_b_kw",
    "p_g_pre_c_kw",
    "p_g_post_a_kw",
    "p_g_post_b_kw",
    "p_g_post_c_kw",
    "p_ref_kw",
    "p_b_a_kw",
    "p_b_b_kw",
    "p_b_c_kw",
    "p_act_a_kw",
    "p_act_b_kw",
    "p_act_c_kw",
    "shortfall_kw",
    "deficit_kw",
    "i_n_pre_amps",
    "i_n_post_amps",
    "cuf_pre_pct",
    "cuf_post_pct",
    "ngv_pre_volts",
    "ngv_post_volts",
    "cluster_iterations",
    "cluster_converged",
    "misassigned",
    "est_spread_kw",
)

_HOUSEHOLD_COLUMNS = (
    "step",
    "household_id",
    "bus",
    "cluster",
    "true_phase",
    "alloc_kw",
    "p_act_kw",
    "deficit_kw",
    "soc",
    "eligible",
)


@dataclass(frozen=True, eq=False)
class BusStepRecord:
    """One bus at one outer step: dispatch decision and unbalance metrics."""

    step: int
    bus: int
    scenario: str
    p_g_pre: np.ndarray
    p_g_post: np.ndarray
    p_ref_kw: float
    p_b: np.ndarray
    p_act: np.ndarray
    shortfall_kw: float
    deficit_kw: float
    i_n_pre_amps: float
    i_n_post_amps: float
    cuf_pre_pct: float
    cuf_post_pct: float
    ngv_pre_volts: float
    ngv_post_volts: float
    cluster_iterations: int
    cluster_converged: bool
    misassigned: int
    est_spread_kw: float


@dataclass(frozen=True)
class HouseholdStepRecord:
    """One household at one outer step: allocation outcome and battery state."""

    step: int
    household_id: str
    bus: int
    cluster: int
    true_phase: str
    alloc_kw: float
    p_act_kw: float
    deficit_kw: float
    soc: float
    eligible: bool


@dataclass(frozen=True)
class StepRecord:
    """Everything recorded for one outer step."""

    step: int
    buses: tuple[BusStepRecord, ...]
    households: tuple[HouseholdStepRecord, ...]


@dataclass(frozen=True)
class RunSummary:
    """Aggregates over a whole run, ready for JSON serialization."""

    steps: int
    n_buses: int
    n_households: int
    max_i_n_pre_amps: float
    mean_i_n_pre_amps: float
    max_i_n_post_amps: float
    mean_i_n_post_amps: float
    max_cuf_pre_pct: float
    max_cuf_post_pct: float
    max_ngv_pre_volts: float
    max_ngv_post_volts: float
    battery_throughput_kwh: float
    total_deficit_kwh: float
    total_shortfall_kwh: float
    clustering_accuracy: float
    all_steps_converged: bool


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _parse_bool(token: str) -> bool:
    if token == "true":
        return True
    if token == "false":
        return False
    raise DataError(f"expected boolean literal, got {token!r}")


def _bus_row(r: BusStepRecord) -> list[str]:
    vals = (
        [r.step, r.bus, r.scenario]
        + list(r.p_g_pre)
        + list(r.p_g_post)
        + [r.p_ref_kw]
        + list(r.p_b)
        + list(r.p_act)
        + [
            r.shortfall_kw,
            r.deficit_kw,
            r.i_n_pre_amps,
            r.i_n_post_amps,
            r.cuf_pre_pct,
            r.cuf_post_pct,
            r.ngv_pre_volts,
            r.ngv_post_volts,
            r.cluster_iterations,
            r.cluster_converged,
            r.misassigned,
            r.est_spread_kw,
        ]
    )
    return [_fmt(v) for v in vals]


def _write_table(
    f: TextIO, schema: str, dt_outer_s: float, columns: Sequence[str], rows: Iterable[list[str]]
) -> None:
    f.write(f"# {schema}; dt_outer_s={_fmt(float(dt_outer_s))}\n")
    writer = csv.writer(f, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)


def write_bus_records(
    path, records: Iterable[BusStepRecord], dt_outer_s: float
) -> None:
    with open(path, "w", newline="") as f:
        _write_table(f, _BUS_SCHEMA, dt_outer_s, _BUS_COLUMNS, map(_bus_row, records))


def write_household_records(
    path, records: Iterable[HouseholdStepRecord], dt_outer_s: float
) -> None:
    rows = (
        [_fmt(getattr(r, name)) for name in (f.name for f in fields(HouseholdStepRecord))]
        for r in records
    )
    with open(path, "w", newline="") as f:
        _write_table(f, _HOUSEHOLD_SCHEMA, dt_outer_s, _HOUSEHOLD_COLUMNS, rows)


def _read_header(f: TextIO, schema: str, path) -> float:
    first = f.readline()
    if not first:
        raise DataError(f"{path}: empty file")
    if not first.startswith(f"# {schema};"):
        raise DataError(f"{path}: missing or wrong schema line, expected {schema!r}")
    try:
        return float(first.rsplit("dt_outer_s=", 1)[1])
    except (IndexError, ValueError):
        raise DataError(f"{path}: schema line lacks a readable dt_outer_s")


def read_bus_records(path) -> tuple[list[BusStepRecord], float]:
    """Parse a bus records file back into record objects."""
    out: list[BusStepRecord] = []
    with open(path, newline="") as f:
        dt = _read_header(f, _BUS_SCHEMA, path)
        reader = csv.reader(f)
        header = next(reader, None)
        if header != list(_BUS_COLUMNS):
            raise DataError(f"{path}: unexpected column header")
        for lineno, row in enumerate(reader, start=3):
            if len(row) != len(_BUS_COLUMNS):
                raise DataError(f"{path}:{lineno}: expected {len(_BUS_COLUMNS)} fields")
            try:
                out.append(
                    BusStepRecord(
                        step=int(row[0]),
                        bus=int(row[1]),
                        scenario=row[2],
                        p_g_pre=np.array([float(x) for x in row[3:6]]),
                        p_g_post=np.array([float(x) for x in row[6:9]]),
                        p_ref_kw=float(row[9]),
                        p_b=np.array([float(x) for x in row[10:13]]),
                        p_act=np.array([float(x) for x in row[13:16]]),
                        shortfall_kw=float(row[16]),
                        deficit_kw=float(row[17]),
                        i_n_pre_amps=float(row[18]),
                        i_n_post_amps=float(row[19]),
                        cuf_pre_pct=float(row[20]),
                        cuf_post_pct=float(row[21]),
                        ngv_pre_volts=float(row[22]),
                        ngv_post_volts=float(row[23]),
                        cluster_iterations=int(row[24]),
                        cluster_converged=_parse_bool(row[25]),
                        misassigned=int(row[26]),
                        est_spread_kw=float(row[27]),
                    )
                )
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}")
    return out, dt


def write_profiles(
    path, profiles: Mapping[str, tuple[np.ndarray, np.ndarray]]
) -> None:
    """Write per-household load and PV series, one row per step and household."""
    with open(path, "w", newline="") as f:
        f.write(f"# {_PROFILES_SCHEMA}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(("step", "household_id", "p_load_kw", "p_pv_kw"))
        horizons = {hid: len(load) for hid, (load, _) in profiles.items()}
        steps = max(horizons.values(), default=0)
        for t in range(steps):
            for hid in sorted(profiles):
                load, pv = profiles[hid]
                writer.writerow((t, hid, _fmt(float(load[t])), _fmt(float(pv[t]))))


def read_profiles(path) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Parse a profiles file into per-household (load, pv) arrays.

    Every household must cover every step from 0 to the maximum step
    seen, exactly once; gaps, duplicates, malformed rows and negative PV
    are data errors.
    """
    cells: dict[tuple[int, str], tuple[float, float]] = {}
    with open(path, newline="") as f:
        first = f.readline()
        if not first:
            raise DataError(f"{path}: empty file")
        if not first.startswith(f"# {_PROFILES_SCHEMA}"):
            raise DataError(f"{path}: missing or wrong schema line")
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["step", "household_id", "p_load_kw", "p_pv_kw"]:
            raise DataError(f"{path}: unexpected column header")
        for lineno, row in enumerate(reader, start=3):
            if len(row) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 fields")
            try:
                t = int(row[0])
                load = float(row[2])
                pv = float(row[3])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}")
            if t < 0:
                raise DataError(f"{path}:{lineno}: negative step index")
            if not (np.isfinite(load) and np.isfinite(pv)):
                raise DataError(f"{path}:{lineno}: non-finite power value")
            if pv < 0.0:
                raise DataError(f"{path}:{lineno}: negative PV power")
            key = (t, row[1])
            if key in cells:
                raise DataError(f"{path}:{lineno}: duplicate entry for {key}")
            cells[key] = (load, pv)
    if not cells:
        raise DataError(f"{path}: no profile rows")
    ids = sorted({hid for _, hid in cells})
    steps = max(t for t, _ in cells) + 1
    out: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for hid in ids:
        load = np.empty(steps)
        pv = np.empty(steps)
        for t in range(steps):
            try:
                load[t], pv[t] = cells[(t, hid)]
            except KeyError:
                raise DataError(f"{path}: household {hid!r} missing step {t}")
        out[hid] = (load, pv)
    return out


def summary_to_json(summary: RunSummary) -> str:
    data = {f.name: getattr(summary, f.name) for f in fields(RunSummary)}
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def write_summary(path, summary: RunSummary) -> None:
    with open(path, "w") as f:
        f.write(summary_to_json(summary))


def read_summary(path) -> dict:
    with open(path) as f:
        return json.load(f)
