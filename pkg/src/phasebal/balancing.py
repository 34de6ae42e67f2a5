"""Per-bus battery dispatch that equalizes the three phase powers.

Inputs are net per-phase grid exchanges in kW, positive when the phase
injects into the upstream grid. The goal is a common exchange on all
three phases, reached by charging or discharging the phase-attached
batteries. When every phase points the same way, the common target is
the smallest magnitude among the three, so the least-loaded phase keeps
its exchange and the others are pulled down to it. When signs disagree,
the target is chosen to minimize the total dispatched battery power
subject to two restrictions: the final exchange must be equal across
phases, and no two batteries may work against each other with opposite
signs. That restriction collapses the feasible targets onto two rays,
all-discharge at or above the maximum phase exchange and all-charge at
or below the minimum, where the L1 objective is piecewise linear and
attains its minimum at the respective ray endpoint.

The solver is closed form; a brute-force grid search over the target
lives in :mod:`phasebal.oracles` and backs the ``--verify`` run mode.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np


class Scenario(enum.Enum):
    """Qualitative bus state derived from phase exchange signs."""

    ALL_INJECT = "AllInject"
    ALL_CONSUME = "AllConsume"
    MIXED = "Mixed"
    IDLE = "Idle"


@dataclass(frozen=True, eq=False)
class GridExchange:
    """Net grid power per phase (kW), ordered (a, b, c), + is injection."""

    p_g: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.p_g, dtype=float)
        if arr.shape != (3,):
            raise ValueError(f"expected three phase powers, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("phase powers must be finite")
        object.__setattr__(self, "p_g", arr)


@dataclass(frozen=True, eq=False)
class BalancingDecision:
    """Target exchange and per-phase battery powers (+ is discharge)."""

    p_ref: float
    p_b: np.ndarray
    scenario: Scenario
    objective: float


def classify_scenario(gx: GridExchange) -> Scenario:
    """Classify by sign pattern; zeros side with a uniform remainder."""
    pos = bool(np.any(gx.p_g > 0.0))
    neg = bool(np.any(gx.p_g < 0.0))
    if pos and neg:
        return Scenario.MIXED
    if pos:
        return Scenario.ALL_INJECT
    if neg:
        return Scenario.ALL_CONSUME
    return Scenario.IDLE


def same_sign_reference(gx: GridExchange) -> float:
    """Common target when all phases share a sign: min magnitude, signed."""
    scenario = classify_scenario(gx)
    if scenario is Scenario.ALL_INJECT:
        sign = 1.0
    elif scenario is Scenario.ALL_CONSUME:
        sign = -1.0
    else:
        raise ValueError(f"reference undefined for {scenario.value} exchange")
    return sign * float(np.min(np.abs(gx.p_g)))


def battery_powers(gx: GridExchange, p_ref: float) -> np.ndarray:
    """Battery power that moves each phase exchange onto the target."""
    return p_ref - gx.p_g


def solve_mixed_sign(gx: GridExchange) -> BalancingDecision:
    """Closed-form minimum-L1 dispatch for mixed-sign exchanges.

    Candidate targets are the two ray endpoints max(p_g) (discharge-only)
    and min(p_g) (charge-only); a tie goes to the charge-only branch.
    """
    if classify_scenario(gx) is not Scenario.MIXED:
        raise ValueError("solver requires phases with opposing signs")
    hi = float(np.max(gx.p_g))
    lo = float(np.min(gx.p_g))
    total = float(np.sum(gx.p_g))
    obj_discharge = 3.0 * hi - total
    obj_charge = total - 3.0 * lo
    if obj_discharge < obj_charge:
        p_ref, objective = hi, obj_discharge
    else:
        p_ref, objective = lo, obj_charge
    return BalancingDecision(
        p_ref=p_ref,
        p_b=battery_powers(gx, p_ref),
        scenario=Scenario.MIXED,
        objective=objective,
    )


def decide(gx: GridExchange) -> BalancingDecision:
    """Dispatch decision for any exchange pattern."""
    scenario = classify_scenario(gx)
    if scenario is Scenario.IDLE:
        return BalancingDecision(
            p_ref=0.0, p_b=np.zeros(3), scenario=scenario, objective=0.0
        )
    if scenario is Scenario.MIXED:
        return solve_mixed_sign(gx)
    p_ref = same_sign_reference(gx)
    p_b = battery_powers(gx, p_ref)
    return BalancingDecision(
        p_ref=p_ref, p_b=p_b, scenario=scenario, objective=float(np.sum(np.abs(p_b)))
    )


@dataclass(frozen=True)
class MemberShare:
    """One cluster member's standing in the allocation round."""

    household_id: str
    eligible: bool
    headroom_kw: float


def allocate_cluster_power(
    p_b_phase: float, members: Sequence[MemberShare]
) -> tuple[Mapping[str, float], float]:
    """Split one phase's battery power across its cluster members.

    Eligible members receive shares proportional to their headroom and
    capped by it; ineligible members receive zero. Returns the signed
    per-household allocations and the unservable shortfall magnitude.
    """
    if any(m.headroom_kw < 0.0 for m in members):
        raise ValueError("headroom cannot be negative")
    target = abs(p_b_phase)
    sign = 1.0 if p_b_phase > 0.0 else -1.0
    rooms = {m.household_id: (m.headroom_kw if m.eligible else 0.0) for m in members}
    total_room = sum(rooms.values())
    if target == 0.0 or total_room == 0.0:
        return {m.household_id: 0.0 for m in members}, target
    served = min(target, total_room)
    alloc = {hid: sign * served * room / total_room for hid, room in rooms.items()}
    return alloc, target - served
