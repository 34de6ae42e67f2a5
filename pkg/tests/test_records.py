import numpy as np
import pytest

from phasebal.errors import DataError
from phasebal.records import (
    BusStepRecord,
    HouseholdStepRecord,
    RunSummary,
    read_bus_records,
    read_profiles,
    read_summary,
    summary_to_json,
    write_bus_records,
    write_household_records,
    write_profiles,
    write_summary,
)


def _bus_record(step=0, bus=0):
    return BusStepRecord(
        step=step,
        bus=bus,
        scenario="mixed",
        p_g_pre=np.array([2.0, -1.0, 3.0]),
        p_g_post=np.array([3.0, 3.0, 3.0]),
        p_ref_kw=3.0,
        p_b=np.array([1.0, 4.0, 0.0]),
        p_act=np.array([1.0, 4.0, 0.0]),
        shortfall_kw=0.0,
        deficit_kw=0.125,
        i_n_pre_amps=13.043478260869565,
        i_n_post_amps=1e-09,
        cuf_pre_pct=141.4213562373095,
        cuf_post_pct=0.0,
        ngv_pre_volts=0.652173913043478,
        ngv_post_volts=5e-11,
        cluster_iterations=812,
        cluster_converged=True,
        misassigned=0,
        est_spread_kw=3.2e-07,
    )


def test_bus_records_round_trip_exactly(tmp_path):
    path = tmp_path / "bus.csv"
    records = [_bus_record(step=0), _bus_record(step=1, bus=2)]
    write_bus_records(path, records, dt_outer_s=60.0)
    back, dt = read_bus_records(path)
    assert dt == 60.0
    assert len(back) == 2
    for orig, rt in zip(records, back):
        for arr in ("p_g_pre", "p_g_post", "p_b", "p_act"):
            assert np.array_equal(getattr(orig, arr), getattr(rt, arr))
        assert rt.scenario == orig.scenario
        assert rt.i_n_pre_amps == orig.i_n_pre_amps
        assert rt.est_spread_kw == orig.est_spread_kw
        assert rt.cluster_converged is orig.cluster_converged


def test_bus_records_writing_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_bus_records(a, [_bus_record()], dt_outer_s=60.0)
    write_bus_records(b, [_bus_record()], dt_outer_s=60.0)
    assert a.read_bytes() == b.read_bytes()


def test_bus_records_header_carries_step_length(tmp_path):
    path = tmp_path / "bus.csv"
    write_bus_records(path, [], dt_outer_s=1.5)
    assert path.read_text().splitlines()[0] == "# phasebal-bus-records v1; dt_outer_s=1.5"
    _, dt = read_bus_records(path)
    assert dt == 1.5


@pytest.mark.parametrize(
    "content,fragment",
    [
        ("", "empty"),
        ("step,bus\n", "schema"),
        ("# phasebal-bus-records v1; dt_outer_s=60.0\nstep,bus\n", "header"),
        ("# phasebal-bus-records v1; dt=60\nx\n", "dt_outer_s"),
    ],
)
def test_bus_records_reader_rejects_bad_files(tmp_path, content, fragment):
    path = tmp_path / "bad.csv"
    path.write_text(content)
    with pytest.raises(DataError, match=fragment):
        read_bus_records(path)


def test_bus_records_reader_rejects_short_rows(tmp_path):
    path = tmp_path / "bus.csv"
    write_bus_records(path, [_bus_record()], dt_outer_s=60.0)
    lines = path.read_text().splitlines()
    lines[2] = ",".join(lines[2].split(",")[:5])
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DataError, match="fields"):
        read_bus_records(path)


def test_bus_records_reader_rejects_bad_boolean(tmp_path):
    path = tmp_path / "bus.csv"
    write_bus_records(path, [_bus_record()], dt_outer_s=60.0)
    path.write_text(path.read_text().replace(",true,", ",yes,"))
    with pytest.raises(DataError, match="boolean"):
        read_bus_records(path)


def test_household_records_have_one_row_per_entry(tmp_path):
    path = tmp_path / "households.csv"
    records = [
        HouseholdStepRecord(
            step=0, household_id="h1", bus=0, cluster=1, true_phase="b",
            alloc_kw=1.5, p_act_kw=1.5, deficit_kw=0.0, soc=0.5, eligible=True,
        ),
        HouseholdStepRecord(
            step=0, household_id="h2", bus=0, cluster=0, true_phase="a",
            alloc_kw=0.0, p_act_kw=0.0, deficit_kw=0.0, soc=0.2, eligible=False,
        ),
    ]
    write_household_records(path, records, dt_outer_s=60.0)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# phasebal-household-records v1")
    assert lines[1].split(",")[:3] == ["step", "household_id", "bus"]
    assert len(lines) == 4
    assert lines[2] == "0,h1,0,1,b,1.5,1.5,0.0,0.5,true"


def test_profiles_round_trip(tmp_path):
    path = tmp_path / "profiles.csv"
    profiles = {
        "h2": (np.array([0.5, 0.625]), np.array([0.0, 1.25])),
        "h1": (np.array([0.1, 0.2]), np.array([0.0, 0.0])),
    }
    write_profiles(path, profiles)
    back = read_profiles(path)
    assert sorted(back) == ["h1", "h2"]
    for hid in profiles:
        assert np.array_equal(back[hid][0], profiles[hid][0])
        assert np.array_equal(back[hid][1], profiles[hid][1])


def test_profiles_rows_are_sorted_by_step_then_id(tmp_path):
    path = tmp_path / "profiles.csv"
    write_profiles(path, {"b": (np.ones(2), np.zeros(2)), "a": (np.ones(2), np.zeros(2))})
    rows = [line.split(",")[:2] for line in path.read_text().splitlines()[2:]]
    assert rows == [["0", "a"], ["0", "b"], ["1", "a"], ["1", "b"]]


@pytest.mark.parametrize(
    "rows,fragment",
    [
        (["0,h1,1.0,0.0", "0,h1,2.0,0.0"], "duplicate"),
        (["0,h1,1.0,0.0", "1,h2,1.0,0.0"], "missing step"),
        (["0,h1,1.0,-0.5"], "negative PV"),
        (["0,h1,nan,0.0"], "non-finite"),
        (["-1,h1,1.0,0.0"], "negative step"),
        (["0,h1,oops,0.0"], "could not convert"),
        (["0,h1,1.0"], "fields"),
    ],
)
def test_profiles_reader_rejects_bad_rows(tmp_path, rows, fragment):
    path = tmp_path / "profiles.csv"
    body = "\n".join(rows)
    path.write_text(f"# phasebal-profiles v1\nstep,household_id,p_load_kw,p_pv_kw\n{body}\n")
    with pytest.raises(DataError, match=fragment):
        read_profiles(path)


def test_profiles_reader_rejects_empty_and_unversioned_files(tmp_path):
    path = tmp_path / "profiles.csv"
    path.write_text("")
    with pytest.raises(DataError, match="empty"):
        read_profiles(path)
    path.write_text("step,household_id,p_load_kw,p_pv_kw\n")
    with pytest.raises(DataError, match="schema"):
        read_profiles(path)
    path.write_text("# phasebal-profiles v1\nstep,household_id,p_load_kw,p_pv_kw\n")
    with pytest.raises(DataError, match="no profile rows"):
        read_profiles(path)


def _summary():
    return RunSummary(
        steps=10,
        n_buses=1,
        n_households=9,
        max_i_n_pre_amps=13.04,
        mean_i_n_pre_amps=6.5,
        max_i_n_post_amps=0.002,
        mean_i_n_post_amps=0.001,
        max_cuf_pre_pct=141.4,
        max_cuf_post_pct=0.01,
        max_ngv_pre_volts=0.65,
        max_ngv_post_volts=0.0001,
        battery_throughput_kwh=4.25,
        total_deficit_kwh=0.0,
        total_shortfall_kwh=0.5,
        clustering_accuracy=1.0,
        all_steps_converged=True,
    )


def test_summary_json_is_sorted_and_stable(tmp_path):
    text = summary_to_json(_summary())
    assert text == summary_to_json(_summary())
    keys = [line.split('"')[1] for line in text.splitlines() if '"' in line]
    assert keys == sorted(keys)
    assert text.endswith("\n")

    path = tmp_path / "summary.json"
    write_summary(path, _summary())
    data = read_summary(path)
    assert data["steps"] == 10
    assert data["battery_throughput_kwh"] == 4.25
    assert data["all_steps_converged"] is True
