"""Command-line entry point: ``merroute {solve,oracle,sizes,coeffs,validate}``.

Exit codes: 0 success, 1 scenario parse/validation error, 2 solver failure
or non-optimal termination, 3 post-solve validation failure, 4 oracle
size guard.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from dataclasses import dataclass, field
from importlib.resources import files
from pathlib import Path

from . import oracle, sizing
from .itinerary import Itinerary, ItineraryError, Parking
from .milp import DEFAULT_MIP_GAP, BACKENDS, ModelError, SolveConfig, SolverError, SolverUnavailable, solve
from .mobility import (
    PUBLISHED_COEFFICIENTS,
    TransitionCoefficients,
    check_coefficients,
    coefficient_margins,
    derive_transition_coefficients,
    replay_transition_table,
)
from .restoration import (
    ObjectiveBreakdown,
    build_restoration,
    decode_itineraries,
    objective_breakdown,
    validate_solution,
)
from .scenario import Scenario, ScenarioError, load_scenario

log = logging.getLogger("merroute")

EXIT_OK, EXIT_SCENARIO, EXIT_SOLVER, EXIT_INVALID, EXIT_GUARD = 0, 1, 2, 3, 4


def resolve_scenario(ref: str, span: int | None = None) -> Scenario:
    """Load a scenario file, or a bundled one via ``builtin:<name>``."""
    if ref.startswith("builtin:"):
        path = files("merroute") / "data" / f"{ref.split(':', 1)[1]}.json"
        if not path.is_file():
            raise ScenarioError(f"{ref}: no such bundled scenario")
    else:
        path = Path(ref)
    sc = load_scenario(path)
    if span is not None:
        sc = sc.with_span(span)
    return sc


# ----------------------------------------------------------------- reporting


@dataclass
class RunReport:
    scenario: dict
    status: str
    backend: str
    objective_kwh: float
    breakdown: ObjectiveBreakdown | None
    itineraries: list[Itinerary]
    sizes: list[sizing.SizeReport]
    model_size: dict
    validation: str
    valid: bool
    num_spans: int
    node_ids: list
    wall_time_s: float = 0.0
    warnings: list[str] = field(default_factory=list)

    def to_text(self, include_timing: bool = False) -> str:
        sc = self.scenario
        out = [
            f"scenario        {sc['name']}: {sc['nodes']} nodes, {sc['mers']} MERs, {sc['islands']} islands",
            f"time grid       {sc['num_spans']} spans of {sc['span_minutes']} min ({sc['horizon_minutes']} min)",
            f"backend         {self.backend}",
            f"status          {self.status}",
            f"objective       {self.objective_kwh:.6f} kWh",
        ]
        if self.breakdown is not None:
            out.append(f"  restored      {self.breakdown.restored_kwh:.6f} kWh")
            out.append(f"  travel cost   {self.breakdown.travel_cost_kwh:.6f} kWh")
        if include_timing:
            out.append(f"solve time      {self.wall_time_s:.3f} s")
        ms = self.model_size
        out.append(f"model size      {ms['binary']} binary, {ms['continuous']} continuous, {ms['constraints']} rows")
        out.append(f"validation      {self.validation}")
        for w in self.warnings:
            out.append(f"  warning: {w}")
        out.append("itineraries")
        for it in self.itineraries:
            out.append(f"  {it.mer_id}:")
            for seg in it.segments(self.num_spans):
                if isinstance(seg, Parking):
                    out.append(f"    park   at {self.node_ids[seg.node]:>6}  spans {seg.first_span:>3}-{seg.last_span:<3}")
                else:
                    out.append(
                        f"    travel {self.node_ids[seg.origin]:>6} -> {self.node_ids[seg.destination]:<6} "
                        f"spans {seg.depart_span:>3}-{seg.arrive_span:<3}"
                    )
        out.append("model sizes (mobility part; formula vs measured)")
        for rep in self.sizes:
            cont = "-" if rep.continuous_vars is None else rep.continuous_vars
            out.append(f"  {rep.model_name:<18} binary {rep.binary_vars:>8}  continuous {cont!s:>6}  rows {rep.constraints:>8}")
        return "\n".join(out) + "\n"

    def write(self, out_dir: Path, solution_values: dict[str, float]) -> None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.txt").write_text(self.to_text())
        write_solution_csv(out_dir / "solution.csv", solution_values)
        write_itineraries_csv(out_dir / "itineraries.csv", self.itineraries, self.num_spans, self.node_ids)
        (out_dir / "sizes.csv").write_text(sizing.to_csv(self.sizes))


def write_solution_csv(path: Path, values: dict[str, float]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["var", "value"])
        for name, val in values.items():
            writer.writerow([name, repr(float(val))])


def read_solution_csv(path: Path) -> dict[str, float]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or reader.fieldnames[:2] != ["var", "value"]:
            raise ValueError(f"{path}: expected header 'var,value'")
        return {row["var"]: float(row["value"]) for row in reader}


ITINERARY_FIELDS = ("mer", "kind", "origin", "destination", "start", "end")


def write_itineraries_csv(path: Path, itineraries: list[Itinerary], num_spans: int, node_ids: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ITINERARY_FIELDS)
        for it in itineraries:
            for seg in it.segments(num_spans):
                if isinstance(seg, Parking):
                    writer.writerow([it.mer_id, "park", node_ids[seg.node], "", seg.first_span, seg.last_span])
                else:
                    writer.writerow(
                        [it.mer_id, "travel", node_ids[seg.origin], node_ids[seg.destination], seg.depart_span, seg.arrive_span]
                    )


def read_itineraries_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = []
        for row in csv.DictReader(fh):
            rows.append(
                {
                    "mer": row["mer"],
                    "kind": row["kind"],
                    "origin": int(row["origin"]),
                    "destination": int(row["destination"]) if row["destination"] else None,
                    "start": int(row["start"]),
                    "end": int(row["end"]),
                }
            )
        return rows


def _sizes_for(sc: Scenario) -> list[sizing.SizeReport]:
    n, m, d = sc.num_nodes, sc.num_mers, sc.num_spans
    tt = sc.travel_times(0)
    return sizing.all_sizes(n, m, d, tt) + [sizing.measured_proposed(n, m, d, tt)]


# ------------------------------------------------------------------- commands


def run_solve(sc: Scenario, config: SolveConfig) -> tuple[RunReport, dict[str, float]]:
    """Build, solve, decode and validate; raise on solver failure."""
    rm = build_restoration(sc)
    sol = solve(rm.model, config)
    if not sol.has_values or sol.status not in ("optimal", "gap-limit"):
        raise SolverError(f"solver finished with status {sol.status!r}")
    verdict = validate_solution(sol, rm)
    valid = verdict.ok
    validation = "valid" if valid else "\n".join(
        [f"INVALID ({len(verdict.violations)} violations)"] + [f"  {v}" for v in verdict.violations[:50]]
    )
    itineraries, breakdown = [], None
    if valid:
        try:
            itineraries = decode_itineraries(sol, rm)
            breakdown = objective_breakdown(sol, rm)
        except (ItineraryError, ValueError) as exc:
            valid, validation = False, f"INVALID ({exc})"
    report = RunReport(
        scenario=sc.summary(),
        status=sol.status,
        backend=config.backend,
        objective_kwh=sol.objective_value,
        breakdown=breakdown,
        itineraries=itineraries,
        sizes=_sizes_for(sc),
        model_size=rm.model.summary(),
        validation=validation,
        valid=valid,
        num_spans=sc.num_spans,
        node_ids=[nd.id for nd in sc.nodes],
        wall_time_s=sol.wall_time_s,
        warnings=list(verdict.warnings),
    )
    return report, dict(sol.values)


def cmd_solve(args) -> int:
    sc = resolve_scenario(args.scenario, args.span)
    config = SolveConfig(
        mip_gap=args.mip_gap,
        time_limit_s=args.time_limit,
        backend=args.backend,
        solver_cmd=args.solver_cmd,
        file_format=args.format,
    )
    if args.emit_model:
        from .milp import emit_model

        emit_model(build_restoration(sc).model, args.emit_model)
    try:
        report, values = run_solve(sc, config)
    except oracle.OracleSizeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (SolverError, SolverUnavailable, ModelError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(report.to_text(include_timing=True), end="")
    if args.out:
        report.write(Path(args.out), values)
        print(f"outputs written to {args.out}")
    return EXIT_OK if report.valid else EXIT_INVALID


def cmd_oracle(args) -> int:
    sc = resolve_scenario(args.scenario, args.span)
    try:
        joint, value = oracle.best_itinerary(sc)
    except oracle.OracleSizeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    ids = [nd.id for nd in sc.nodes]
    print(f"objective {value:.6f} kWh")
    for it in joint:
        print(f"{it.mer_id}:")
        for seg in it.segments(sc.num_spans):
            if isinstance(seg, Parking):
                print(f"  park   at {ids[seg.node]} spans {seg.first_span}-{seg.last_span}")
            else:
                print(f"  travel {ids[seg.origin]} -> {ids[seg.destination]} spans {seg.depart_span}-{seg.arrive_span}")
    return EXIT_OK


def cmd_sizes(args) -> int:
    if args.scenario:
        sc = resolve_scenario(args.scenario, args.span)
        reports = _sizes_for(sc)
    else:
        if None in (args.N, args.M, args.D):
            print("error: give --N, --M and --D, or a scenario", file=sys.stderr)
            return EXIT_SCENARIO
        import numpy as np

        tt = np.ones((args.N, args.N), dtype=int) - np.eye(args.N, dtype=int)
        reports = sizing.all_sizes(args.N, args.M, args.D, tt) + [sizing.measured_proposed(args.N, args.M, args.D, tt)]
    text = sizing.to_csv(reports)
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_coeffs(args) -> int:
    if args.check is not None:
        candidates = [("given", TransitionCoefficients(*args.check))]
    else:
        candidates = [("published", PUBLISHED_COEFFICIENTS), ("LP-derived", derive_transition_coefficients())]
    status = EXIT_OK
    for label, c in candidates:
        bad = check_coefficients(c)
        table = replay_transition_table(c)
        margins = coefficient_margins(c)
        print(f"{label}: a1={c.a1:g} b1={c.b1:g} c1={c.c1:g}  a2={c.a2:g} b2={c.b2:g} c2={c.c2:g}")
        print(f"  inequalities: {'pass' if not bad else 'FAIL ' + ', '.join(bad)} (min margin {min(margins.values()):.3g})")
        print(f"  transition table: {'pass' if not table else 'FAIL ' + ', '.join(table)}")
        if bad or table:
            status = EXIT_INVALID
    return status


def cmd_validate(args) -> int:
    sc = resolve_scenario(args.scenario, args.span)
    rm = build_restoration(sc)
    values = read_solution_csv(Path(args.solution))
    unknown = [k for k in values if k not in rm.model]
    if unknown:
        print(f"error: solution names unknown variables, e.g. {unknown[:3]}", file=sys.stderr)
        return EXIT_SCENARIO
    verdict = validate_solution(values, rm)
    print(verdict)
    return EXIT_OK if verdict.ok else EXIT_INVALID


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="merroute", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="build, solve, decode and validate the restoration program")
    s.add_argument("scenario", help="scenario JSON path or builtin:<name>")
    s.add_argument("--span", type=int, help="override the span length in minutes")
    s.add_argument("--mip-gap", type=float, default=DEFAULT_MIP_GAP)
    s.add_argument("--time-limit", type=float, default=None, help="seconds")
    s.add_argument("--backend", choices=BACKENDS, default="highs")
    s.add_argument("--solver-cmd", help="external solver command template (default: $MER_SOLVER_CMD or cbc)")
    s.add_argument("--format", choices=("lp", "mps"), default="lp", help="model file format for the external backend")
    s.add_argument("--emit-model", help="also write the model to this .lp/.mps path")
    s.add_argument("--out", help="directory for report.txt, solution.csv, itineraries.csv, sizes.csv")
    s.set_defaults(func=cmd_solve)

    o = sub.add_parser("oracle", help="brute-force best itinerary (tiny scenarios only)")
    o.add_argument("scenario")
    o.add_argument("--span", type=int)
    o.set_defaults(func=cmd_oracle)

    z = sub.add_parser("sizes", help="model-size formulas as CSV")
    z.add_argument("--N", type=int)
    z.add_argument("--M", type=int)
    z.add_argument("--D", type=int)
    z.add_argument("--scenario")
    z.add_argument("--span", type=int)
    z.add_argument("--out")
    z.set_defaults(func=cmd_sizes)

    c = sub.add_parser("coeffs", help="derive and check the transition coefficients")
    c.add_argument("--check", type=float, nargs=6, metavar=("A1", "B1", "C1", "A2", "B2", "C2"), help="check this tuple instead")
    c.set_defaults(func=cmd_coeffs)

    v = sub.add_parser("validate", help="check a solution.csv against a scenario")
    v.add_argument("scenario")
    v.add_argument("solution")
    v.add_argument("--span", type=int)
    v.set_defaults(func=cmd_validate)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ScenarioError as exc:
        for err in exc.errors:
            print(f"scenario error: {err}", file=sys.stderr)
        return EXIT_SCENARIO


if __name__ == "__main__":
    sys.exit(main())
