from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from merroute.scenario import (
    ScenarioError,
    TimeGrid,
    compute_travel_times,
    load_scenario,
    make_scenario,
    scenario_from_dict,
    scenario_to_dict,
)


def minimal_dict():
    return {
        "time_grid": {"span_minutes": 10, "num_spans": 1},
        "nodes": [{"id": 5, "island": None, "load_kw": 0, "weight": 1}],
        "distances": {"matrix": [[0]]},
        "islands": [],
        "fleet": [{"id": "M", "initial_node": 5, "travel_cost_kwh_per_span": 0.3, "speed": 1000}],
    }


def test_minimal_file(tmp_path):
    path = tmp_path / "min.json"
    path.write_text(json.dumps(minimal_dict()))
    sc = load_scenario(path)
    assert (sc.num_nodes, sc.num_mers, sc.num_spans) == (1, 1, 1)
    assert sc.travel_times(0).tolist() == [[0]]


def test_feeder_parameters(feeder):
    assert (feeder.num_nodes, feeder.num_mers, feeder.num_spans) == (37, 2, 36)
    assert feeder.grid.horizon_minutes == 360
    assert [isl.repair_span for isl in feeder.islands] == [7, 13, 23, 32]
    assert all(m.travel_cost_per_span_kwh == 0.3 for m in feeder.fleet)
    assert all(m.speed == 1000 for m in feeder.fleet)


def test_duplicate_node_id():
    data = minimal_dict()
    data["nodes"].append({"id": 5, "island": None, "load_kw": 0})
    data["distances"]["matrix"] = [[0, 1], [1, 0]]
    with pytest.raises(ScenarioError) as exc:
        scenario_from_dict(data)
    assert any("duplicate" in e for e in exc.value.errors)


def test_errors_carry_field_paths():
    data = minimal_dict()
    data["fleet"][0]["initial_node"] = 99
    data["time_grid"]["num_spans"] = 1
    with pytest.raises(ScenarioError) as exc:
        scenario_from_dict(data)
    assert any(e.startswith("fleet[0]") for e in exc.value.errors)

    del data["time_grid"]
    with pytest.raises(ScenarioError) as exc:
        scenario_from_dict(data)
    assert any("time_grid" in e for e in exc.value.errors)


def test_malformed_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{ nope")
    with pytest.raises(ScenarioError):
        load_scenario(path)


@pytest.mark.parametrize(
    "dist, expected",
    [(0, 0), (15000, 2), (100, 1), (10000, 1), (10001, 2), (30000, 3)],
)
def test_travel_time_rounding(dist, expected):
    mat = np.array([[0.0, dist], [dist, 0.0]])
    tt = compute_travel_times(mat, 1000, TimeGrid(10, 6))
    assert tt[0, 0] == 0
    if dist:
        assert tt[0, 1] == expected


def test_edges_use_shortest_paths():
    data = minimal_dict()
    data["nodes"] = [{"id": k} for k in (1, 2, 3)]
    data["fleet"][0]["initial_node"] = 1
    data["distances"] = {"edges": [[1, 2, 8000], [2, 3, 8000], [1, 3, 25000]]}
    sc = scenario_from_dict(data)
    assert sc.distances[0, 2] == 16000
    assert sc.travel_times(0)[0, 2] == 2


def test_disconnected_graph_is_rejected():
    data = minimal_dict()
    data["nodes"] = [{"id": k} for k in (1, 2, 3)]
    data["fleet"][0]["initial_node"] = 1
    data["distances"] = {"edges": [[1, 2, 100]]}
    with pytest.raises(ScenarioError, match="not connected"):
        scenario_from_dict(data)


def test_round_trip_dict(tiny):
    again = scenario_from_dict(scenario_to_dict(tiny))
    assert np.array_equal(again.travel_times(0), tiny.travel_times(0))
    assert np.array_equal(again.island_value(), tiny.island_value())


def test_interrupted_load_follows_repair(tiny):
    # node position 1 is island A (repair span 4), position 2 island B (never)
    assert [tiny.interrupted_load(1, t) for t in (0, 3, 4, 8)] == [100, 100, 0, 0]
    assert tiny.interrupted_load(2, 8) == 60
    assert tiny.interrupted_load(0, 0) == 0


def test_island_value_units():
    sc = make_scenario([[0, 1], [1, 0]], num_spans=6, islands=[([1], None)], loads=[0, 100])
    val = sc.island_value()
    assert val.shape == (1, 7)
    assert np.allclose(val, 100 / 6)


def test_span_override(feeder):
    sc = feeder.with_span(30)
    assert sc.num_spans == 12
    assert [isl.repair_span for isl in sc.islands] == [3, 5, 8, 11]
    assert sc.fleet[0].travel_cost_per_span_kwh == pytest.approx(0.9)
    assert sc.grid.horizon_minutes == 360


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(0, 1e5, allow_nan=False), min_size=2, max_size=2),
    st.floats(10, 5000),
    st.integers(1, 60),
)
def test_travel_time_monotone_in_distance(ds, speed, span):
    lo, hi = sorted(ds)
    mats = [np.array([[0.0, d], [d, 0.0]]) for d in (lo, hi)]
    a, b = (compute_travel_times(m, speed, span) for m in mats)
    assert a[0, 1] <= b[0, 1]
    assert a[0, 1] >= 1


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 1e5, allow_nan=False), st.floats(10, 5000), st.integers(1, 60))
def test_halving_span_never_shrinks_travel_time(d, speed, span):
    mat = np.array([[0.0, d], [d, 0.0]])
    coarse = compute_travel_times(mat, speed, 2 * span)
    fine = compute_travel_times(mat, speed, span)
    assert fine[0, 1] >= coarse[0, 1]
    assert np.all(np.diag(fine) == 0)
