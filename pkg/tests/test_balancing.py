import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from phasebal.balancing import (
    BalancingDecision,
    GridExchange,
    MemberShare,
    Scenario,
    allocate_cluster_power,
    battery_powers,
    classify_scenario,
    decide,
    same_sign_reference,
    solve_mixed_sign,
)
from phasebal.oracles import brute_force_reference

_triple = st.tuples(
    st.floats(-10, 10, allow_nan=False),
    st.floats(-10, 10, allow_nan=False),
    st.floats(-10, 10, allow_nan=False),
)


def _gx(*p) -> GridExchange:
    return GridExchange(np.array(p, dtype=float))


def test_classify_all_positive_is_inject():
    assert classify_scenario(_gx(2, 5, 3)) is Scenario.ALL_INJECT


def test_classify_all_negative_is_consume():
    assert classify_scenario(_gx(-2, -5, -3)) is Scenario.ALL_CONSUME


def test_classify_opposing_signs_is_mixed():
    assert classify_scenario(_gx(2, -1, 3)) is Scenario.MIXED


def test_classify_zeros_side_with_the_uniform_sign():
    assert classify_scenario(_gx(2, 0, 3)) is Scenario.ALL_INJECT
    assert classify_scenario(_gx(0, -1, 0)) is Scenario.ALL_CONSUME


def test_classify_all_zero_is_idle():
    assert classify_scenario(_gx(0, 0, 0)) is Scenario.IDLE


def test_grid_exchange_validation():
    with pytest.raises(ValueError, match="three"):
        GridExchange(np.array([1.0, 2.0]))
    with pytest.raises(ValueError, match="finite"):
        GridExchange(np.array([1.0, np.inf, 0.0]))


def test_same_sign_reference_injecting():
    assert same_sign_reference(_gx(2, 5, 3)) == 2.0


def test_same_sign_reference_consuming():
    assert same_sign_reference(_gx(-2, -5, -3)) == -2.0


def test_same_sign_reference_balanced_input_is_identity():
    gx = _gx(4, 4, 4)
    p_ref = same_sign_reference(gx)
    assert p_ref == 4.0
    assert np.array_equal(battery_powers(gx, p_ref), np.zeros(3))


def test_same_sign_reference_rejects_mixed_and_idle():
    with pytest.raises(ValueError, match="Mixed"):
        same_sign_reference(_gx(1, -1, 0))
    with pytest.raises(ValueError, match="Idle"):
        same_sign_reference(_gx(0, 0, 0))


def test_battery_powers_examples():
    assert np.allclose(battery_powers(_gx(2, 5, 3), 2.0), [0, -3, -1])
    assert np.allclose(battery_powers(_gx(-2, -5, -3), -2.0), [0, 3, 1])
    assert np.allclose(battery_powers(_gx(4, 4, 4), 4.0), [0, 0, 0])


def test_mixed_solver_prefers_discharge_when_cheaper():
    d = solve_mixed_sign(_gx(2, -1, 3))
    assert d.p_ref == 3.0
    assert np.allclose(d.p_b, [1, 4, 0])
    assert d.objective == pytest.approx(5.0)
    assert np.all(d.p_b >= 0.0)


def test_mixed_solver_prefers_charge_when_cheaper():
    d = solve_mixed_sign(_gx(-2, 1, -3))
    assert d.p_ref == -3.0
    assert np.allclose(d.p_b, [-1, -4, 0])
    assert d.objective == pytest.approx(5.0)
    assert np.all(d.p_b <= 0.0)


def test_mixed_solver_tie_goes_to_charging():
    d = solve_mixed_sign(_gx(-1, 0, 1))
    assert d.p_ref == -1.0
    assert np.allclose(d.p_b, [0, -1, -2])
    assert d.objective == pytest.approx(3.0)


def test_mixed_solver_rejects_uniform_signs():
    with pytest.raises(ValueError, match="opposing"):
        solve_mixed_sign(_gx(1, 2, 3))


def test_decide_idle_does_nothing():
    d = decide(_gx(0, 0, 0))
    assert d.scenario is Scenario.IDLE
    assert d.p_ref == 0.0
    assert np.array_equal(d.p_b, np.zeros(3))
    assert d.objective == 0.0


def test_decide_routes_each_scenario():
    assert decide(_gx(2, 5, 3)).scenario is Scenario.ALL_INJECT
    assert decide(_gx(-2, -5, -3)).scenario is Scenario.ALL_CONSUME
    assert decide(_gx(2, -1, 3)).scenario is Scenario.MIXED


@given(_triple)
def test_decision_reaches_common_exchange(p):
    d = decide(_gx(*p))
    post = np.asarray(p) + d.p_b
    assert np.all(np.abs(post - d.p_ref) < 1e-9)


@given(_triple)
def test_decision_never_opposes_battery_signs(p):
    d = decide(_gx(*p))
    a, b, c = d.p_b
    assert a * b >= -1e-9 and b * c >= -1e-9 and a * c >= -1e-9


@given(_triple)
def test_decision_objective_is_total_battery_power(p):
    d = decide(_gx(*p))
    assert d.objective == pytest.approx(float(np.sum(np.abs(d.p_b))), abs=1e-12)


@given(_triple.filter(lambda p: min(p) < 0 < max(p)))
def test_mixed_solver_matches_brute_force_objective(p):
    gx = _gx(*p)
    d = solve_mixed_sign(gx)
    _, oracle_obj = brute_force_reference(gx, step=1e-3)
    assert abs(d.objective - oracle_obj) <= 1e-6


@given(_triple.filter(lambda p: all(v > 0 for v in p) or all(v < 0 for v in p)))
def test_same_sign_minimizing_phase_rests(p):
    gx = _gx(*p)
    d = decide(gx)
    k = int(np.argmin(np.abs(gx.p_g)))
    assert d.p_b[k] == 0.0
    assert d.p_ref == gx.p_g[k]


def _members(*rooms, eligible=None):
    eligible = eligible or [True] * len(rooms)
    return [
        MemberShare(household_id=f"h{i}", eligible=e, headroom_kw=r)
        for i, (r, e) in enumerate(zip(rooms, eligible))
    ]


def test_allocation_equal_rooms_split_evenly():
    alloc, short = allocate_cluster_power(3.0, _members(2.0, 2.0, 2.0))
    assert alloc == {"h0": 1.0, "h1": 1.0, "h2": 1.0}
    assert short == 0.0


def test_allocation_proportional_to_headroom():
    alloc, short = allocate_cluster_power(3.0, _members(4.0, 1.0, 1.0))
    assert alloc == {"h0": 2.0, "h1": 0.5, "h2": 0.5}
    assert short == 0.0


def test_allocation_saturates_and_reports_shortfall():
    alloc, short = allocate_cluster_power(
        5.0, _members(2.0, 1.0, 3.0, eligible=[True, True, False])
    )
    assert alloc == {"h0": 2.0, "h1": 1.0, "h2": 0.0}
    assert short == pytest.approx(2.0)


def test_allocation_carries_the_command_sign():
    alloc, short = allocate_cluster_power(-3.0, _members(4.0, 1.0, 1.0))
    assert alloc == {"h0": -2.0, "h1": -0.5, "h2": -0.5}
    assert short == 0.0


def test_allocation_zero_target_is_free():
    alloc, short = allocate_cluster_power(0.0, _members(4.0, 1.0))
    assert alloc == {"h0": 0.0, "h1": 0.0}
    assert short == 0.0


def test_allocation_without_any_headroom_is_all_shortfall():
    alloc, short = allocate_cluster_power(2.0, _members(0.0, 0.0))
    assert alloc == {"h0": 0.0, "h1": 0.0}
    assert short == 2.0


def test_allocation_no_members_is_all_shortfall():
    alloc, short = allocate_cluster_power(1.5, [])
    assert alloc == {}
    assert short == 1.5


def test_allocation_rejects_negative_headroom():
    with pytest.raises(ValueError, match="headroom"):
        allocate_cluster_power(1.0, _members(-0.1))


@given(
    st.floats(-8, 8, allow_nan=False),
    st.lists(st.floats(0, 5, allow_nan=False), min_size=1, max_size=6),
)
def test_allocation_conserves_power(target, rooms):
    members = _members(*rooms)
    alloc, short = allocate_cluster_power(target, members)
    assert sum(abs(v) for v in alloc.values()) + short == pytest.approx(
        abs(target), abs=1e-9
    )
    for m in members:
        assert abs(alloc[m.household_id]) <= m.headroom_kw + 1e-12
        if target:
            assert alloc[m.household_id] * target >= 0.0
