"""Quasi-static feeder simulation with distributed phase clustering.

Households on a shared low-voltage bus identify their phase through an
in-network clustering estimator, agree on per-phase power totals and
dispatch their batteries so all three phases exchange the same power
with the grid, suppressing neutral current and unbalance.
"""
from .balancing import BalancingDecision, GridExchange, Scenario, decide
from .clustering import ClusterConfig, EstimatorState, init_estimator, run_until_converged
from .engine import GraphSpec, Household, SimConfig, build_world, run, step
from .errors import ConfigError, DataError, VerificationError
from .graph import CommGraph, build_graph, topology_edges
from .records import RunSummary, StepRecord
from .scenario import load_scenario, nine_house_template
from .storage import BatteryParams, BatteryState
from .threephase import PhasePowers, UnbalanceMetrics, bus_metrics

__version__ = "0.1.0"

__all__ = [
    "BalancingDecision",
    "BatteryParams",
    "BatteryState",
    "ClusterConfig",
    "CommGraph",
    "ConfigError",
    "DataError",
    "EstimatorState",
    "GraphSpec",
    "GridExchange",
    "Household",
    "PhasePowers",
    "RunSummary",
    "Scenario",
    "SimConfig",
    "StepRecord",
    "UnbalanceMetrics",
    "VerificationError",
    "build_graph",
    "build_world",
    "bus_metrics",
    "decide",
    "init_estimator",
    "load_scenario",
    "nine_house_template",
    "run",
    "run_until_converged",
    "step",
    "topology_edges",
    "__version__",
]
