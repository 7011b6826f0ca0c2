from __future__ import annotations

import math
import sys
import textwrap

import numpy as np
import pytest

from merroute.milp import (
    MilpModel,
    ModelError,
    Sense,
    Solution,
    SolveConfig,
    SolverUnavailable,
    emit_model,
    parse_lp,
    parse_mps,
    parse_solution_text,
    read_model,
    snap_binaries,
    solve,
    to_lp,
    to_mps,
)
from merroute.restoration import build_restoration
from merroute.scenario import make_scenario


def small_model() -> MilpModel:
    m = MilpModel("small")
    x = m.add_binary("x_j1_i3_t0")
    y = m.add_binary("y")
    s = m.add_var("S_j1_t5", lb=0.0)
    r = m.add_var("r", lb=-2.5, ub=7.0)
    m.add_constraint([(1, x), (1, y)], "<=", 1, "pick")
    m.add_constraint([(2, s), (-1, x), (0.125, r)], ">=", -1.5, "mix")
    m.add_constraint([(1, s), (1, r)], "=", 3, "fix")
    m.set_objective([(3, x), (2, y), (-1, s), (0.5, r)], "max")
    return m


def model_signature(m: MilpModel):
    # LP files carry no column order, so variables compare as a sorted list.
    vars_ = sorted((v.name, v.kind, v.lb, v.ub) for v in m.variables)
    rows = [
        (c.name, c.sense, c.rhs, sorted((v.name, coef) for coef, v in c.terms)) for c in m.constraints
    ]
    obj = (m.objective.sense, sorted((v.name, coef) for coef, v in m.objective.terms))
    return vars_, rows, obj


def test_add_var_kinds_and_bounds():
    m = MilpModel()
    x = m.add_binary("x_j1_i3_t0")
    s = m.add_var("S_j1_t5", lb=0.0, ub=math.inf)
    assert x.is_binary and (x.lb, x.ub) == (0.0, 1.0)
    assert not s.is_binary and s.lb == 0.0 and s.ub == math.inf
    with pytest.raises(ModelError):
        m.add_binary("x_j1_i3_t0")
    assert (m.num_binary, m.num_continuous) == (1, 1)


def test_constraint_validation():
    m = MilpModel()
    x = m.add_binary("x")
    with pytest.raises(ModelError):
        m.add_constraint([], "<=", 1, "empty")
    with pytest.raises(ModelError):
        m.add_constraint([(0.0, x)], "<=", 1, "zero")
    with pytest.raises(ModelError):
        m.add_constraint([(math.nan, x)], "<=", 1, "nan")
    other = MilpModel().add_binary("x")
    with pytest.raises(ModelError):
        m.add_constraint([(1, other)], "<=", 1, "foreign")
    con = m.add_constraint([(1, x), (2, x)], "<=", 3, "merged")
    assert len(con.terms) == 1 and con.terms[0][0] == 3
    with pytest.raises(ModelError):
        m.add_constraint([(1, x)], "<=", 1, "merged")


def test_counts_equal_add_calls():
    m = small_model()
    assert (m.num_vars, m.num_binary, m.num_continuous, m.num_constraints) == (4, 2, 2, 3)


@pytest.mark.parametrize("fmt", ["mps", "lp"])
def test_round_trip(tmp_path, fmt):
    m = small_model()
    path = emit_model(m, tmp_path / f"m.{fmt}")
    back = read_model(path)
    assert model_signature(back) == model_signature(m)


@pytest.mark.parametrize("fmt", ["mps", "lp"])
def test_round_trip_restoration_model(fmt, tiny):
    m = build_restoration(tiny).model
    text = to_mps(m) if fmt == "mps" else to_lp(m)
    back = parse_mps(text) if fmt == "mps" else parse_lp(text)
    assert model_signature(back) == model_signature(m)


def test_one_row_file_lists_exactly_its_entries():
    m = MilpModel("one")
    x = m.add_var("z", lb=0.0, ub=4.0)
    m.add_constraint([(1, x)], "<=", 3, "c0")
    m.set_objective([(1, x)], "max")
    mps = to_mps(m)
    rows = mps.split("ROWS")[1].split("COLUMNS")[0].split()
    assert rows == ["N", "obj", "L", "c0"]
    lp = to_lp(m)
    assert "c0: + z <= 3" in lp and "obj: + z" in lp


def test_empty_model_is_rejected(tmp_path):
    with pytest.raises(ModelError):
        emit_model(MilpModel(), tmp_path / "e.lp")
    with pytest.raises(ModelError):
        solve(MilpModel())


def test_highs_solves_small_model():
    m = small_model()
    sol = solve(m)
    assert sol.status == "optimal"
    vec = m.value_vector(sol.values)
    assert not m.violations(vec)
    # x=1, y=0; S + r = 3 with -S + 0.5 r maximised at r=7 clipped by S>=0 -> r=3
    assert sol.objective_value == pytest.approx(3 + 1.5)


def test_infeasible_model():
    m = MilpModel()
    x = m.add_binary("x")
    m.add_constraint([(1, x)], ">=", 2, "impossible")
    m.set_objective([(1, x)], "max")
    sol = solve(m)
    assert sol.status == "infeasible" and not sol.has_values


def test_zero_load_restoration_stays_put():
    sc = make_scenario([[0, 1, 2], [1, 0, 1], [2, 1, 0]], num_spans=5, islands=[([1], 3)], travel_cost=0.3)
    rm = build_restoration(sc)
    sol = solve(rm.model)
    assert sol.status == "optimal"
    assert sol.objective_value == pytest.approx(0.0)
    assert all(sol[var] < 0.5 for mer in rm.block.v for row in mer for var in row)


def test_unknown_backend():
    with pytest.raises(SolverUnavailable):
        solve(small_model(), SolveConfig(backend="nope"))


def test_exact_backend_needs_restoration_model():
    with pytest.raises(ModelError):
        solve(small_model(), SolveConfig(backend="exact-enumeration"))


def test_solution_getitem_and_snap():
    m = small_model()
    sol = Solution("optimal", 1.0, {"x_j1_i3_t0": 0.9999999, "y": 2e-7, "S_j1_t5": 0.3})
    assert sol["r"] == 0.0
    assert sol[m.var("S_j1_t5")] == 0.3
    snapped = snap_binaries(m, sol.values)
    assert snapped["x_j1_i3_t0"] == 1.0 and snapped["y"] == 0.0 and snapped["S_j1_t5"] == 0.3
    with pytest.raises(ValueError):
        Solution("weird", 0.0)


@pytest.mark.parametrize(
    "text, status, objective",
    [
        ("Optimal - objective value 4.5\n      0 x_j1_i3_t0  1  3\n      2 S_j1_t5 0 -1\n      3 r 3 0\n", "optimal", 4.5),
        ("Stopped on time - objective value 2\n0 x_j1_i3_t0 1 0\n", "time-limit", 2.0),
        ("Infeasible - objective value 0\n", "infeasible", 0.0),
        ("x_j1_i3_t0 1\nr 3\n", None, None),
        ("status: optimal\nobjective: 4.5\nx_j1_i3_t0,1\nr,3\n", "optimal", 4.5),
    ],
)
def test_parse_solution_text(text, status, objective):
    got_status, got_obj, values = parse_solution_text(text, small_model())
    assert got_status == status
    assert got_obj == objective
    if status != "infeasible":
        assert values["x_j1_i3_t0"] == 1.0


FAKE_SOLVER = textwrap.dedent(
    """
    import sys
    from merroute.milp import read_model, solve
    model = read_model(sys.argv[1])
    sol = solve(model)
    with open(sys.argv[2], "w") as fh:
        fh.write("optimal\\n")
        for name, val in sol.values.items():
            fh.write(f"{name} {val!r}\\n")
    """
)


@pytest.mark.parametrize("fmt", ["lp", "mps"])
def test_external_backend_contract(tmp_path, fmt, tiny, monkeypatch):
    """Any executable that reads the model file and writes `name value` lines works."""
    script = tmp_path / "fake_solver.py"
    script.write_text(FAKE_SOLVER)
    monkeypatch.setenv("MER_SOLVER_CMD", f"{sys.executable} {script} {{model}} {{solution}}")
    rm = build_restoration(tiny)
    ext = solve(rm.model, SolveConfig(backend="external", file_format=fmt))
    ref = solve(rm.model, SolveConfig(backend="exact-enumeration"))
    assert ext.status == "optimal"
    assert ext.objective_value == pytest.approx(ref.objective_value, abs=1e-6)


def test_external_backend_with_cbc(cbc_exe, tiny):
    from merroute.milp.solve import CBC_TEMPLATE

    rm = build_restoration(tiny)
    cmd = CBC_TEMPLATE.replace("{exe}", cbc_exe)
    for fmt in ("lp", "mps"):
        sol = solve(rm.model, SolveConfig(backend="external", solver_cmd=cmd, file_format=fmt))
        assert sol.status == "optimal"
        assert sol.objective_value == pytest.approx(119.4, abs=1e-6)


def test_external_missing_executable(tiny):
    rm = build_restoration(tiny)
    cfg = SolveConfig(backend="external", solver_cmd="/nonexistent/solver {model} {solution}")
    with pytest.raises(SolverUnavailable):
        solve(rm.model, cfg)


def test_to_arrays_shapes():
    arr = small_model().to_arrays()
    assert arr["A"].shape == (3, 4)
    assert np.array_equal(arr["integrality"], [1, 1, 0, 0])
    assert arr["row_lb"][0] == -np.inf and arr["row_ub"][1] == np.inf
    assert arr["row_lb"][2] == arr["row_ub"][2] == 3
