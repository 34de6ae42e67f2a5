"""Command-line front end: scenario generation, runs and reporting.

Exit codes separate failure families so shell pipelines can react:
0 success, 2 configuration problem, 3 input data problem, 4 runtime or
verification failure.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import engine, records, scenario
from .errors import ConfigError, DataError, VerificationError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phasebal",
        description="Distributed phase clustering and battery-based phase balancing",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a scenario and write records")
    p_run.add_argument("--config", required=True, type=Path, help="scenario TOML")
    p_run.add_argument("--profiles", required=True, type=Path, help="profiles CSV")
    p_run.add_argument("--out", required=True, type=Path, help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override scenario seed")
    p_run.add_argument(
        "--no-balancing", action="store_true", help="freeze all batteries at zero power"
    )
    p_run.add_argument(
        "--emit-per-household",
        action="store_true",
        help="also write the per-household records table",
    )
    p_run.add_argument(
        "--verify",
        action="store_true",
        help="re-check every dispatch and convergence against brute-force oracles",
    )
    p_run.set_defaults(func=cmd_run)

    p_gen = sub.add_parser("gen", help="write a ready-to-run template scenario")
    p_gen.add_argument("--template", required=True, help="template name")
    p_gen.add_argument("--out", required=True, type=Path, help="output directory")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--n", type=int, default=9, help="number of households")
    p_gen.set_defaults(func=cmd_gen)

    p_rep = sub.add_parser("report", help="summarize a bus records file")
    p_rep.add_argument("--records", required=True, type=Path, help="bus records CSV")
    p_rep.set_defaults(func=cmd_report)
    return parser


def cmd_run(args: argparse.Namespace) -> int:
    cfg, households = scenario.load_scenario(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed, cluster=replace(cfg.cluster, seed=args.seed))
    if args.no_balancing:
        cfg = replace(cfg, balancing=False)

    try:
        profiles = engine.load_profiles(args.profiles)
    except FileNotFoundError:
        raise DataError(f"profiles file not found: {args.profiles}")
    households = engine.attach_profiles(households, profiles)

    summary, step_records = engine.run(cfg, households, verify=args.verify)

    args.out.mkdir(parents=True, exist_ok=True)
    bus_rows = [b for r in step_records for b in r.buses]
    records.write_bus_records(args.out / "records_bus.csv", bus_rows, cfg.dt_outer_s)
    records.write_summary(args.out / "summary.json", summary)
    (args.out / "effective_config.toml").write_text(
        scenario.effective_config(cfg, households)
    )
    written = ["records_bus.csv", "summary.json", "effective_config.toml"]
    if args.emit_per_household:
        hh_rows = [h for r in step_records for h in r.households]
        records.write_household_records(
            args.out / "records_household.csv", hh_rows, cfg.dt_outer_s
        )
        written.append("records_household.csv")

    print(f"simulated {summary.steps} steps over {summary.n_buses} bus(es)")
    print(
        f"|I_N| max pre {summary.max_i_n_pre_amps:.3f} A, "
        f"post {summary.max_i_n_post_amps:.3f} A"
    )
    print(f"wrote {', '.join(written)} to {args.out}")
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    cfg, households, profiles = scenario.generate(args.template, args.seed, args.n)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "scenario.toml").write_text(scenario.effective_config(cfg, households))
    records.write_profiles(args.out / "profiles.csv", profiles)
    print(f"wrote scenario.toml and profiles.csv to {args.out}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    try:
        rows, dt_outer_s = records.read_bus_records(args.records)
    except FileNotFoundError:
        raise DataError(f"records file not found: {args.records}")
    if not rows:
        raise DataError(f"{args.records}: no record rows")
    dt_h = dt_outer_s / 3600.0
    i_n_pre = np.array([b.i_n_pre_amps for b in rows])
    i_n_post = np.array([b.i_n_post_amps for b in rows])
    cuf_pre = np.array([b.cuf_pre_pct for b in rows])
    cuf_post = np.array([b.cuf_post_pct for b in rows])

    def nmax(v: np.ndarray) -> float:
        finite = v[np.isfinite(v)]
        return float(np.max(finite)) if finite.size else float("nan")

    throughput = sum(float(np.sum(np.abs(b.p_act))) for b in rows) * dt_h
    print(f"steps x buses:        {len(rows)}")
    print(f"|I_N| pre  max/mean:  {np.max(i_n_pre):.4f} / {np.mean(i_n_pre):.4f} A")
    print(f"|I_N| post max/mean:  {np.max(i_n_post):.4f} / {np.mean(i_n_post):.4f} A")
    print(f"CUF pre/post max:     {nmax(cuf_pre):.4f} / {nmax(cuf_post):.4f} %")
    print(
        f"NGV pre/post max:     {max(b.ngv_pre_volts for b in rows):.4f} / "
        f"{max(b.ngv_post_volts for b in rows):.4f} V"
    )
    print(f"battery throughput:   {throughput:.4f} kWh")
    print(f"deficit / shortfall:  {sum(b.deficit_kw for b in rows) * dt_h:.6f} / "
          f"{sum(b.shortfall_kw for b in rows) * dt_h:.6f} kWh")
    print(f"misassigned agent-steps: {sum(b.misassigned for b in rows)}")
    print(f"all steps converged:  {all(b.cluster_converged for b in rows)}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except VerificationError as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except RuntimeError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
