"""Solver backends behind a single ``solve(model, config) -> Solution`` contract.

Backends
--------
``highs``
    In-process HiGHS branch-and-cut via :func:`scipy.optimize.milp`.
``external``
    Writes the model to disk, runs a solver executable and parses the
    solution file it leaves behind.  The command line is a template taken
    from ``SolveConfig.solver_cmd`` or the ``MER_SOLVER_CMD`` environment
    variable, with placeholders ``{model}``, ``{solution}``, ``{gap}``,
    ``{time_limit}`` and ``{sense}`` (``-max`` / ``-min``).  Without a
    template, a ``cbc`` executable on ``PATH`` is used.
``exact-enumeration``
    Only for restoration models on tiny scenarios: the brute-force itinerary
    oracle supplies a globally optimal point.
"""

from __future__ import annotations

import logging
import math
import os
import shlex
import shutil
import subprocess
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .io import emit_model, parse_solution_text
from .model import MilpModel, ModelError, Solution

log = logging.getLogger(__name__)

DEFAULT_MIP_GAP = 1e-5
BACKENDS = ("highs", "external", "exact-enumeration")
CBC_TEMPLATE = "{exe} {model} {sense} -ratio {gap} -sec {time_limit} -solve -solu {solution}"


class SolverUnavailable(RuntimeError):
    pass


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolveConfig:
    mip_gap: float = DEFAULT_MIP_GAP
    time_limit_s: float | None = None
    backend: str = "highs"
    solver_cmd: str | None = None
    file_format: str = "lp"
    keep_files: Path | None = None


def solve(model: MilpModel, config: SolveConfig | None = None) -> Solution:
    config = config or SolveConfig()
    if config.backend not in BACKENDS:
        raise SolverUnavailable(f"unknown backend {config.backend!r}; choose from {BACKENDS}")
    if model.is_empty():
        raise ModelError("cannot solve an empty model")
    start = time.perf_counter()
    if config.backend == "highs":
        sol = _solve_highs(model, config)
    elif config.backend == "external":
        sol = _solve_external(model, config)
    else:
        sol = _solve_exact(model, config)
    elapsed = time.perf_counter() - start
    log.info("%s backend: status=%s objective=%s in %.2fs", config.backend, sol.status, sol.objective_value, elapsed)
    return Solution(sol.status, sol.objective_value, sol.values, sol.gap, config.backend, elapsed)


def _solve_highs(model: MilpModel, config: SolveConfig) -> Solution:
    from scipy.optimize import Bounds, LinearConstraint, milp

    arr = model.to_arrays()
    sign = -1.0 if model.objective.sense == "max" else 1.0
    options = {"mip_rel_gap": config.mip_gap, "disp": False}
    if config.time_limit_s is not None:
        options["time_limit"] = config.time_limit_s
    constraints = []
    if model.num_constraints:
        constraints.append(LinearConstraint(arr["A"], arr["row_lb"], arr["row_ub"]))
    res = milp(
        sign * arr["c"],
        constraints=constraints,
        integrality=arr["integrality"],
        bounds=Bounds(arr["lb"], arr["ub"]),
        options=options,
    )
    # scipy: 0 optimal (within gap), 1 iteration/time limit, 2 infeasible, 3 unbounded, 4 other
    if res.status == 2 or res.status == 3:
        return Solution("infeasible", math.nan)
    if res.x is None:
        if res.status == 1:
            return Solution("time-limit", math.nan)
        raise SolverError(f"HiGHS failed: {res.message}")
    values = {v.name: float(x) for v, x in zip(model.variables, res.x)}
    gap = float(getattr(res, "mip_gap", 0.0) or 0.0)
    status = "optimal" if res.status == 0 else "time-limit"
    if status == "optimal" and gap > config.mip_gap:
        status = "gap-limit"
    return Solution(status, model.evaluate_objective(values), values, gap)


def _resolve_command(config: SolveConfig) -> str:
    template = config.solver_cmd or os.environ.get("MER_SOLVER_CMD")
    if template:
        return template
    exe = shutil.which("cbc")
    if exe is None:
        raise SolverUnavailable(
            "external backend needs a solver command: pass --solver-cmd or set MER_SOLVER_CMD"
        )
    return CBC_TEMPLATE.replace("{exe}", shlex.quote(exe))


def _solve_external(model: MilpModel, config: SolveConfig) -> Solution:
    template = _resolve_command(config)
    fmt = config.file_format
    with tempfile.TemporaryDirectory(prefix="merroute-") as tmp:
        workdir = Path(config.keep_files or tmp)
        workdir.mkdir(parents=True, exist_ok=True)
        model_path = emit_model(model, workdir / f"model.{fmt}", fmt)
        sol_path = workdir / "model.sol"
        if sol_path.exists():
            sol_path.unlink()
        time_limit = config.time_limit_s if config.time_limit_s is not None else 1e9
        cmd = template.format(
            model=shlex.quote(str(model_path)),
            solution=shlex.quote(str(sol_path)),
            gap=repr(float(config.mip_gap)),
            time_limit=repr(float(time_limit)),
            sense="-max" if model.objective.sense == "max" else "-min",
        )
        log.debug("running %s", cmd)
        try:
            proc = subprocess.run(shlex.split(cmd), capture_output=True, text=True, check=False)
        except FileNotFoundError as exc:
            raise SolverUnavailable(f"solver executable not found: {exc}") from exc
        if not sol_path.exists():
            raise SolverError(
                f"solver produced no solution file (exit {proc.returncode}): {proc.stdout[-500:]}{proc.stderr[-500:]}"
            )
        status, _, values = parse_solution_text(sol_path.read_text(), model)
    if status is None:
        status = "optimal" if values else "infeasible"
    if status == "infeasible":
        return Solution("infeasible", math.nan)
    full = {v.name: values.get(v.name, 0.0) for v in model.variables}
    # The executable does not report the final gap; an optimal stop certifies the configured one.
    gap = config.mip_gap if status == "optimal" else math.nan
    return Solution(status, model.evaluate_objective(full), full, gap)


def _solve_exact(model: MilpModel, config: SolveConfig) -> Solution:
    rm = model.meta.get("restoration")
    if rm is None:
        raise ModelError("exact-enumeration backend only accepts models built by build_restoration")
    from .. import oracle

    oracle.check_size_guard(rm.scenario)
    joint, _ = oracle.best_itinerary(rm.scenario)
    encoding = oracle.encode_itinerary(joint, rm.scenario)
    values = rm.values_from_encoding(encoding)
    vec = model.value_vector(values)
    bad = model.violations(vec)
    if bad:
        raise SolverError(f"oracle optimum violates model rows: {bad[:5]}")
    return Solution("optimal", model.evaluate_objective(vec), values, 0.0)


def values_array(model: MilpModel, solution: Solution) -> np.ndarray:
    return model.value_vector(solution.values)
