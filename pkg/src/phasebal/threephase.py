"""Three-phase four-wire quantities at a single bus.

All voltages are RMS phasors referenced to phase a at zero degrees, with
phase b lagging 120 degrees and phase c leading 120 degrees. The neutral
is the return path; its current is the negated sum of the phase currents
and its local ground potential rise is modelled through a lumped
neutral-to-ground impedance.

Powers travel in kilowatts and kilovars at the API surface and are
converted to watts internally.
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

Phasor = complex

# rotation operator, one third of a turn
_A = cmath.exp(2j * cmath.pi / 3)

# below this positive-sequence magnitude the unbalance factor is undefined
_PS_FLOOR = 1e-12

_PHASE_ANGLES_DEG = (0.0, -120.0, 120.0)


@dataclass(frozen=True, eq=False)
class PhasePowers:
    """Aggregated per-phase powers at one bus, ordered (a, b, c)."""

    p_load: np.ndarray
    q_load: np.ndarray
    p_pv: np.ndarray
    q_pv: np.ndarray

    def __post_init__(self) -> None:
        for name in ("p_load", "q_load", "p_pv", "q_pv"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (3,):
                raise ValueError(f"{name} must have shape (3,), got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
            object.__setattr__(self, name, arr)
        if np.any(self.p_pv < 0.0):
            raise ValueError("photovoltaic active power cannot be negative")


def phase_powers(
    p_load=(0.0, 0.0, 0.0),
    q_load=(0.0, 0.0, 0.0),
    p_pv=(0.0, 0.0, 0.0),
    q_pv=(0.0, 0.0, 0.0),
) -> PhasePowers:
    return PhasePowers(
        p_load=np.asarray(p_load, dtype=float),
        q_load=np.asarray(q_load, dtype=float),
        p_pv=np.asarray(p_pv, dtype=float),
        q_pv=np.asarray(q_pv, dtype=float),
    )


@dataclass(frozen=True)
class UnbalanceMetrics:
    """Snapshot of bus unbalance indicators."""

    i_phase: tuple[Phasor, Phasor, Phasor]
    i_neutral: Phasor
    cuf_percent: float
    ngv_volts: Phasor


def phase_voltages(vm: float) -> np.ndarray:
    """Balanced phase-to-neutral voltage set for RMS magnitude vm."""
    if not vm > 0.0:
        raise ValueError(f"voltage magnitude must be positive, got {vm}")
    return np.array(
        [vm * cmath.exp(1j * cmath.pi * deg / 180.0) for deg in _PHASE_ANGLES_DEG]
    )


def net_phase_currents(pp: PhasePowers, v: np.ndarray, vn: Phasor = 0j) -> np.ndarray:
    """Per-phase net current drawn from the grid.

    Consumption counts positive: each phase current is the conjugated net
    apparent power (load minus generation, in watts) over the conjugated
    phase-to-neutral voltage difference.
    """
    v = np.asarray(v, dtype=complex)
    denom = np.conj(v) - np.conj(vn)
    if np.any(np.abs(denom) < _PS_FLOOR):
        raise ValueError("phase voltage equals neutral voltage, cannot form currents")
    s_load = (pp.p_load + 1j * pp.q_load) * 1e3
    s_pv = (pp.p_pv + 1j * pp.q_pv) * 1e3
    return (np.conj(s_load) - np.conj(s_pv)) / denom


def neutral_current(i_phase: np.ndarray) -> Phasor:
    """Return conductor current, the negated sum of the phase currents."""
    i = np.asarray(i_phase, dtype=complex)
    return complex(-(i[0] + i[1] + i[2]))


def symmetrical_components(i_phase: np.ndarray) -> tuple[Phasor, Phasor, Phasor]:
    """Positive, negative and zero sequence components of a current set."""
    ia, ib, ic = (complex(c) for c in np.asarray(i_phase, dtype=complex))
    ps = (ia + _A * ib + _A**2 * ic) / 3.0
    ns = (ia + _A**2 * ib + _A * ic) / 3.0
    zs = (ia + ib + ic) / 3.0
    return ps, ns, zs


def current_unbalance_factor(i_phase: np.ndarray) -> float:
    """Current unbalance factor in percent.

    Raises ValueError when the positive-sequence magnitude is too small
    to normalize against.
    """
    ps, ns, zs = symmetrical_components(i_phase)
    if abs(ps) < _PS_FLOOR:
        raise ValueError("positive-sequence current is zero, unbalance undefined")
    return _cuf_from_components(ps, ns, zs)


def _cuf_from_components(ps: Phasor, ns: Phasor, zs: Phasor) -> float:
    return float(np.hypot(abs(ns), abs(zs)) / abs(ps) * 100.0)


def neutral_ground_voltage(i_neutral: Phasor, z_n: Phasor) -> Phasor:
    """Neutral-to-ground voltage rise over a lumped grounding impedance."""
    return complex(i_neutral) * complex(z_n)


def bus_metrics(pp: PhasePowers, vm: float, z_n: Phasor) -> UnbalanceMetrics:
    """Compute all unbalance indicators for one bus state.

    The unbalance factor degenerates to NaN when every phase is quiet,
    because there is no positive-sequence current to normalize against.
    """
    i = net_phase_currents(pp, phase_voltages(vm))
    i_n = neutral_current(i)
    ps, ns, zs = symmetrical_components(i)
    cuf = _cuf_from_components(ps, ns, zs) if abs(ps) >= _PS_FLOOR else float("nan")
    return UnbalanceMetrics(
        i_phase=(complex(i[0]), complex(i[1]), complex(i[2])),
        i_neutral=i_n,
        cuf_percent=cuf,
        ngv_volts=neutral_ground_voltage(i_n, z_n),
    )
