from __future__ import annotations

import numpy as np
import pytest

from merroute.milp import SolveConfig, solve
from merroute.oracle import best_itinerary, encode_itinerary
from merroute.restoration import (
    breakdown_from_assignment,
    build_restoration,
    decode_itineraries,
    objective_breakdown,
    validate_solution,
)
from merroute.scenario import make_scenario

from conftest import random_scenario


def stationary_scenario():
    return make_scenario(
        [[0, 1], [1, 0]], num_spans=6, islands=[([0], None)], loads=[100, 0], travel_cost=0.3
    )


def test_model_structure(tiny):
    rm = build_restoration(tiny)
    d = tiny.num_spans
    assert len(rm.y) == len(tiny.islands)
    assert all(len(row) == d + 1 for row in rm.y)
    assert rm.model.objective.sense == "max"
    mob = rm.block.counts()
    n_isl = len(tiny.islands) * (d + 1)
    assert rm.model.num_binary == mob["binary"] + n_isl
    assert rm.model.num_constraints == mob["constraints"] + 2 * n_isl
    assert rm.model.meta["restoration"] is rm


def test_no_faults_objective_zero():
    sc = make_scenario([[0, 1, 2], [1, 0, 1], [2, 1, 0]], num_spans=5, islands=[([2], 0)], loads=[0, 0, 50], travel_cost=0.3)
    rm = build_restoration(sc)
    sol = solve(rm.model)
    assert sol.objective_value == pytest.approx(0.0)
    assert decode_itineraries(sol, rm)[0].legs == ()


def test_stationary_mer_inside_island():
    rm = build_restoration(stationary_scenario())
    sol = solve(rm.model)
    assert sol.objective_value == pytest.approx(700 / 6, abs=1e-6)
    br = objective_breakdown(sol, rm)
    assert br.restored_kwh == pytest.approx(116.67, abs=5e-3)
    assert br.travel_cost_kwh == 0.0
    assert [sol[y] for y in rm.y[0]] == [1.0] * 7


def test_zero_load_breakdown():
    sc = make_scenario([[0, 1], [1, 0]], num_spans=4, islands=[([1], None)], travel_cost=0.3)
    rm = build_restoration(sc)
    br = objective_breakdown(solve(rm.model), rm)
    assert (br.restored_kwh, br.travel_cost_kwh) == (0.0, 0.0)


def test_travel_cost_is_per_traveling_span(tiny):
    rm = build_restoration(tiny)
    sol = solve(rm.model)
    br = objective_breakdown(sol, rm)
    spans = sum(it.travel_spans() for it in decode_itineraries(sol, rm))
    assert br.travel_cost_kwh == pytest.approx(0.3 * spans)
    assert br.net_kwh == pytest.approx(sol.objective_value, abs=1e-6)


def test_breakdown_detects_mismatch(tiny):
    from merroute.milp import Solution

    rm = build_restoration(tiny)
    sol = solve(rm.model)
    forged = Solution(sol.status, sol.objective_value + 5.0, sol.values, sol.gap)
    with pytest.raises(ValueError):
        objective_breakdown(forged, rm)


@pytest.mark.parametrize("seed", range(6))
def test_indicator_correctness(seed):
    sc = random_scenario(100 + seed)
    rm = build_restoration(sc)
    sol = solve(rm.model, SolveConfig(mip_gap=0.0))
    a = rm.assignment(sol).snapped()
    value = sc.island_value()
    for l, nodes in enumerate(sc.island_members()):
        occupied = a.x[:, :, nodes].sum(axis=(0, 2)) >= 1
        for t in range(sc.num_spans + 1):
            if value[l, t] > 0:
                assert round(sol[rm.y[l][t]]) == int(occupied[t])


@pytest.mark.parametrize("seed", range(6))
def test_milp_matches_oracle(seed):
    sc = random_scenario(200 + seed)
    rm = build_restoration(sc)
    sol = solve(rm.model, SolveConfig(mip_gap=0.0))
    _, best = best_itinerary(sc)
    assert sol.objective_value == pytest.approx(best, abs=1e-6)
    assert validate_solution(sol, rm).ok


def test_exact_backend(tiny):
    rm = build_restoration(tiny)
    sol = solve(rm.model, SolveConfig(backend="exact-enumeration"))
    assert sol.status == "optimal" and sol.gap == 0.0
    assert sol.objective_value == pytest.approx(solve(rm.model).objective_value, abs=1e-6)


def test_encoding_breakdown_matches_simulation():
    sc = random_scenario(5)
    joint, value = best_itinerary(sc)
    enc = encode_itinerary(joint, sc)
    assert breakdown_from_assignment(enc.mobility, sc).net_kwh == pytest.approx(value, abs=1e-9)


def test_island_without_load_gets_zero_coefficient():
    sc = make_scenario([[0, 1], [1, 0]], num_spans=3, islands=[([1], None)], loads=[0, 0])
    rm = build_restoration(sc)
    assert rm.model.objective.terms == ()
    assert len(rm.y[0]) == 4
