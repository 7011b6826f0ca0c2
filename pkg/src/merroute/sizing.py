"""Closed-form model sizes for the proposed mobility model and three baselines.

All arithmetic is on Python integers.  Baselines are formulas only; their
continuous-variable counts are not part of the published comparison and are
reported as ``None``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

CSV_FIELDS = ("model", "N", "M", "D", "binary", "continuous", "constraints")


@dataclass(frozen=True)
class SizeReport:
    model_name: str
    n: int
    m: int
    d: int
    binary_vars: int
    continuous_vars: int | None
    constraints: int
    parameters: dict = field(default_factory=dict, compare=False)

    def csv_row(self) -> dict:
        return {
            "model": self.model_name,
            "N": self.n,
            "M": self.m,
            "D": self.d,
            "binary": self.binary_vars,
            "continuous": "" if self.continuous_vars is None else self.continuous_vars,
            "constraints": self.constraints,
        }


def _check(n: int, m: int, d: int) -> None:
    for label, val in (("N", n), ("M", m), ("D", d)):
        if int(val) != val or val < 1:
            raise ValueError(f"{label} must be a positive integer, got {val!r}")


def _int_matrix(tt, n: int) -> list[list[int]]:
    arr = np.asarray(tt)
    if arr.shape != (n, n):
        raise ValueError(f"travel-time matrix must be {n}x{n}, got {arr.shape}")
    if np.any(arr != np.round(arr)) or np.any(arr < 0):
        raise ValueError("travel-time matrix must hold non-negative integers")
    return [[int(v) for v in row] for row in arr]


def _summary(t: list[list[int]]) -> dict:
    flat = [v for row in t for v in row]
    return {"sum_T": sum(flat), "sum_T2": sum(v * v for v in flat), "max_T": max(flat)}


def size_proposed(n: int, m: int, d: int) -> SizeReport:
    _check(n, m, d)
    return SizeReport(
        "proposed",
        n, m, d,
        binary_vars=m * (d + 1) * (2 * n + 1),
        continuous_vars=2 * m * (d + 1),
        constraints=m * d * (5 * n + 6) + 7 * m,
    )


def virtual_nodes(t: list[list[int]]) -> int:
    n = len(t)
    upper = sum(t[i][k] for i in range(n - 1) for k in range(i + 1, n))
    return upper - n * (n - 1) // 2


def size_tsn(n: int, m: int, d: int, tt) -> SizeReport:
    _check(n, m, d)
    t = _int_matrix(tt, n)
    nv = virtual_nodes(t)
    return SizeReport(
        "tsn",
        n, m, d,
        binary_vars=d * m * (n * n + 2 * nv),
        continuous_vars=None,
        constraints=d * m * (n * n + 3 * nv + 1) - m * (n * n - n + 2 * nv),
        parameters={**_summary(t), "N_v": nv},
    )


def size_modified_tsn(n: int, m: int, d: int, tt) -> SizeReport:
    _check(n, m, d)
    t = _int_matrix(tt, n)
    s = _summary(t)
    return SizeReport(
        "modified_tsn",
        n, m, d,
        binary_vars=m * (n * n * (d + 1) - s["sum_T"] - n),
        continuous_vars=None,
        constraints=m * d * (n + 1),
        parameters=s,
    )


def size_swbm(n: int, m: int, d: int, tt) -> SizeReport:
    _check(n, m, d)
    t = _int_matrix(tt, n)
    s = _summary(t)
    numer = (2 * d + 1) * s["sum_T"] - s["sum_T2"] + 4 * d + 4
    # (2D+1)ΣT - ΣT² = 2DΣT + Σ T(1-T) is always even, so the halving is exact.
    assert numer % 2 == 0
    return SizeReport(
        "swbm",
        n, m, d,
        binary_vars=m * (d + 1) * (n + 1),
        continuous_vars=None,
        constraints=m * numer // 2,
        parameters=s,
    )


def swbm_min_constraints(n: int, m: int, d: int) -> int:
    """SWBM constraint count when every off-diagonal travel time is one span."""
    return m * (d * (n * n - n) + 2 * d + 2)


def all_sizes(n: int, m: int, d: int, tt) -> list[SizeReport]:
    return [size_proposed(n, m, d), size_tsn(n, m, d, tt), size_modified_tsn(n, m, d, tt), size_swbm(n, m, d, tt)]


def measured_proposed(n: int, m: int, d: int, tt=None) -> SizeReport:
    """Counts taken from an actually generated mobility block."""
    from .milp.model import MilpModel
    from .mobility import build_mobility_block

    if tt is None:
        tt = np.ones((n, n), dtype=int) - np.eye(n, dtype=int)
    model = MilpModel("sizing")
    build_mobility_block(model, [0] * m, np.asarray(tt), d)
    return SizeReport(
        "proposed_measured", n, m, d, model.num_binary, model.num_continuous, model.num_constraints
    )


def to_csv(reports: Iterable[SizeReport]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for rep in reports:
        writer.writerow(rep.csv_row())
    return buf.getvalue()


def from_csv(text: str) -> list[dict]:
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        rows.append(
            {
                "model": row["model"],
                **{k: int(row[k]) for k in ("N", "M", "D", "binary", "constraints")},
                "continuous": int(row["continuous"]) if row["continuous"] else None,
            }
        )
    return rows
