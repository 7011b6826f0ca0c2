"""Service-restoration test program built on the mobility block.

maximise   sum_t sum_l y[l,t] * (sum_{i in l} w_i P_i(t)) * dt  -  sum_j C_j * sum_t sum_i v[j,t,i]
subject to the mobility rows and, per island and span,
           sum_j sum_{i in l} x[j,t,i] / M  <=  y[l,t]  <=  sum_j sum_{i in l} x[j,t,i]
with M the fleet size.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .itinerary import Itinerary, itinerary_from_labels, labels_from_arrays
from .milp.model import MilpModel, Solution, Var, snap_binaries
from .mobility import (
    PUBLISHED_COEFFICIENTS,
    MobilityAssignment,
    MobilityBlock,
    TransitionCoefficients,
    build_mobility_block,
    validate_assignment,
)
from .scenario import Scenario

log = logging.getLogger(__name__)


@dataclass
class RestorationModel:
    model: MilpModel
    block: MobilityBlock
    y: list[list[Var]]  # [l][t]
    scenario: Scenario
    coefficients: TransitionCoefficients

    def values_from_encoding(self, encoding) -> dict[str, float]:
        values = self.block.values(encoding.mobility)
        for l, row in enumerate(self.y):
            for t, var in enumerate(row):
                values[var.name] = float(encoding.y[l, t])
        return values

    def assignment(self, solution: Solution | dict) -> MobilityAssignment:
        return self.block.extract(solution)


def build_restoration(
    scenario: Scenario, coeffs: TransitionCoefficients = PUBLISHED_COEFFICIENTS
) -> RestorationModel:
    model = MilpModel(f"restoration_{scenario.name}")
    d = scenario.num_spans
    m = scenario.num_mers
    block = build_mobility_block(
        model,
        scenario.initial_positions(),
        [scenario.travel_times(j) for j in range(m)],
        d,
        coeffs,
    )
    if not scenario.islands:
        log.warning("scenario %s has no islands; the restoration term is empty", scenario.name)

    value = scenario.island_value()
    members = scenario.island_members()
    ys: list[list[Var]] = []
    objective: list[tuple[float, Var]] = []
    for l, nodes in enumerate(members):
        row = []
        for t in range(d + 1):
            y = model.add_binary(f"y_l{l}_t{t}")
            parked = [block.x[j][t][i] for j in range(m) for i in nodes]
            model.add_constraint([(1.0 / m, var) for var in parked] + [(-1.0, y)], "<=", 0.0, f"isl_lo_l{l}_t{t}")
            model.add_constraint([(1.0, y)] + [(-1.0, var) for var in parked], "<=", 0.0, f"isl_up_l{l}_t{t}")
            if value[l, t] != 0.0:
                objective.append((float(value[l, t]), y))
            row.append(y)
        ys.append(row)
    for j, mer in enumerate(scenario.fleet):
        if mer.travel_cost_per_span_kwh:
            for t in range(d + 1):
                objective += [(-mer.travel_cost_per_span_kwh, var) for var in block.v[j][t]]
    model.set_objective(objective, "max")

    rm = RestorationModel(model, block, ys, scenario, coeffs)
    model.meta["restoration"] = rm
    return rm


@dataclass(frozen=True)
class ObjectiveBreakdown:
    restored_kwh: float
    travel_cost_kwh: float

    @property
    def net_kwh(self) -> float:
        return self.restored_kwh - self.travel_cost_kwh


def breakdown_from_assignment(assignment: MobilityAssignment, scenario: Scenario) -> ObjectiveBreakdown:
    value = scenario.island_value()
    restored = []
    for l, nodes in enumerate(scenario.island_members()):
        occupied = assignment.x[:, :, nodes].sum(axis=(0, 2)) > 0.5
        restored += [value[l, t] for t in np.flatnonzero(occupied)]
    travel = [
        mer.travel_cost_per_span_kwh * float(np.round(assignment.v[j]).sum())
        for j, mer in enumerate(scenario.fleet)
    ]
    return ObjectiveBreakdown(math.fsum(restored), math.fsum(travel))


def objective_breakdown(solution: Solution, rm: RestorationModel, tol: float = 1e-6) -> ObjectiveBreakdown:
    """Recompute restored energy and travel cost from the solution's x and v values."""
    if not solution.has_values:
        raise ValueError(f"solution has status {solution.status!r} and no values")
    values = snap_binaries(rm.model, solution.values)
    out = breakdown_from_assignment(rm.assignment(values), rm.scenario)
    if abs(out.net_kwh - solution.objective_value) > tol * max(1.0, abs(solution.objective_value)):
        raise ValueError(
            f"objective {solution.objective_value} does not match recomputed terms "
            f"{out.restored_kwh} - {out.travel_cost_kwh}"
        )
    return out


def decode_itineraries(solution: Solution | dict, rm: RestorationModel) -> list[Itinerary]:
    """Per-MER itineraries read from the parking and traveling labels of a solution."""
    if isinstance(solution, Solution) and not solution.has_values:
        raise ValueError(f"solution has status {solution.status!r} and no values")
    values = solution.values if isinstance(solution, Solution) else solution
    a = rm.assignment(snap_binaries(rm.model, values))
    starts = rm.scenario.initial_positions()
    out = []
    for j, mer in enumerate(rm.scenario.fleet):
        labels = labels_from_arrays(a.x[j], a.v[j])
        out.append(itinerary_from_labels(j, labels, starts[j], mer.id))
    return out


def validate_solution(solution: Solution | dict, rm: RestorationModel):
    values = solution.values if isinstance(solution, Solution) else solution
    a = rm.assignment(values)
    sc = rm.scenario
    return validate_assignment(
        a,
        [sc.travel_times(j) for j in range(sc.num_mers)],
        sc.initial_positions(),
        rm.coefficients,
        rm.block.epsilon,
    )
