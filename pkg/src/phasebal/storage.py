"""Single-phase battery model with power limits and SoC gating.

The open-circuit voltage rises linearly with state of charge. Round-trip
losses are split into a charge and a discharge efficiency applied on the
battery side, so a discharge drains more internal energy than it delivers
and a charge stores less than it draws. Sign convention: positive power
discharges into the feeder, negative power charges from it.

Hard SoC bounds are never crossed; a narrower participation band decides
whether the unit volunteers for balancing duty at all.
"""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class BatteryParams:
    """Static ratings of one household battery."""

    e_cap_kwh: float = 10.0
    v_min: float = 44.0
    v_max: float = 54.0
    p_max_charge_kw: float = 5.0
    p_max_discharge_kw: float = 5.0
    soc_min: float = 0.1
    soc_max: float = 0.95
    soc_low_part: float = 0.25
    soc_high_part: float = 0.85
    eta_c: float = 0.95
    eta_d: float = 0.95

    def __post_init__(self) -> None:
        if not self.e_cap_kwh > 0.0:
            raise ValueError("capacity must be positive")
        if not 0.0 < self.v_min < self.v_max:
            raise ValueError("voltage range must satisfy 0 < v_min < v_max")
        if self.p_max_charge_kw < 0.0 or self.p_max_discharge_kw < 0.0:
            raise ValueError("power limits cannot be negative")
        if not 0.0 <= self.soc_min < self.soc_max <= 1.0:
            raise ValueError("hard SoC bounds must satisfy 0 <= min < max <= 1")
        if not self.soc_min <= self.soc_low_part < self.soc_high_part <= self.soc_max:
            raise ValueError("participation band must sit inside the hard bounds")
        if not (0.0 < self.eta_c <= 1.0 and 0.0 < self.eta_d <= 1.0):
            raise ValueError("efficiencies must lie in (0, 1]")


@dataclass(frozen=True)
class BatteryState:
    """Dynamic battery state; v_b always tracks the SoC."""

    soc: float
    v_b: float


def terminal_voltage(soc: float, params: BatteryParams) -> float:
    """Linear open-circuit voltage between v_min (empty) and v_max (full)."""
    if not 0.0 <= soc <= 1.0:
        raise ValueError(f"state of charge {soc} outside [0, 1]")
    return params.v_min + (params.v_max - params.v_min) * soc


def battery_state(soc: float, params: BatteryParams) -> BatteryState:
    return BatteryState(soc=soc, v_b=terminal_voltage(soc, params))


def current_reference(p_b_kw: float, state: BatteryState, params: BatteryParams) -> float:
    """DC current in amperes that realizes the power command.

    Logged for diagnostics only; the SoC integration below works directly
    in power. Positive means discharge current.
    """
    if not state.v_b > 0.0:
        raise ValueError("terminal voltage must be positive")
    return 1000.0 * p_b_kw / state.v_b


def apply_power(
    state: BatteryState, p_cmd_kw: float, dt_h: float, params: BatteryParams
) -> tuple[BatteryState, float, float]:
    """Advance the SoC one step under a power command.

    The command is clamped first to the converter power limits, then to
    whatever the SoC head/foot room can sustain for dt_h hours. When a
    SoC bound binds, the new SoC is pinned to the bound exactly so that
    rounding can never push it outside.

    Returns (new state, achieved power in kW, unserved remainder in kW).
    """
    if not dt_h > 0.0:
        raise ValueError("step length must be positive")
    if not params.soc_min <= state.soc <= params.soc_max:
        raise ValueError(f"state of charge {state.soc} outside hard bounds")

    p = min(max(p_cmd_kw, -params.p_max_charge_kw), params.p_max_discharge_kw)
    if p > 0.0:
        # discharge: delivered energy is eta_d times the internal draw
        p_room = max((state.soc - params.soc_min) * params.e_cap_kwh * params.eta_d / dt_h, 0.0)
        if p >= p_room:
            p_act = p_room
            soc = params.soc_min
        else:
            p_act = p
            soc = state.soc - (p_act * dt_h / params.e_cap_kwh) / params.eta_d
    elif p < 0.0:
        p_room = max((params.soc_max - state.soc) * params.e_cap_kwh / (params.eta_c * dt_h), 0.0)
        if -p >= p_room:
            p_act = -p_room
            soc = params.soc_max
        else:
            p_act = p
            soc = state.soc - (p_act * dt_h * params.eta_c) / params.e_cap_kwh
    else:
        p_act = 0.0
        soc = state.soc

    deficit = abs(p_cmd_kw) - abs(p_act)
    return battery_state(soc, params), p_act, max(deficit, 0.0)


def eligibility(
    state: BatteryState, willing: bool, params: BatteryParams, dt_h: float
) -> tuple[bool, float, float]:
    """Participation decision plus sustainable powers for one step.

    Returns (eligible, charge headroom kW, discharge headroom kW), both
    headrooms as magnitudes against the hard SoC bounds and converter
    limits. An unwilling or out-of-band unit reports zero headroom.
    """
    if not dt_h > 0.0:
        raise ValueError("step length must be positive")
    eligible = willing and params.soc_low_part <= state.soc <= params.soc_high_part
    if not eligible:
        return False, 0.0, 0.0
    h_charge = min(
        params.p_max_charge_kw,
        max((params.soc_max - state.soc) * params.e_cap_kwh / (params.eta_c * dt_h), 0.0),
    )
    h_discharge = min(
        params.p_max_discharge_kw,
        max((state.soc - params.soc_min) * params.e_cap_kwh * params.eta_d / dt_h, 0.0),
    )
    return True, h_charge, h_discharge
