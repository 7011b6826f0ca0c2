"""In-memory representation of a mixed-integer linear program.

The model is deliberately plain: an ordered variable registry, a list of
linear rows and a linear objective.  Builders register everything through
:meth:`MilpModel.add_var` and :meth:`MilpModel.add_constraint`, so the
counts reported here are exactly the number of registrations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse

BINARY_TOL = 1e-6


class ModelError(ValueError):
    """Raised for malformed model construction requests."""


class VarKind(str, Enum):
    BINARY = "binary"
    CONTINUOUS = "continuous"


class Sense(str, Enum):
    LE = "<="
    GE = ">="
    EQ = "="


@dataclass(frozen=True)
class Var:
    index: int
    name: str
    kind: VarKind
    lb: float
    ub: float

    @property
    def is_binary(self) -> bool:
        return self.kind is VarKind.BINARY

    def __repr__(self) -> str:
        return f"Var({self.name!r})"


@dataclass(frozen=True)
class LinConstraint:
    name: str
    terms: tuple[tuple[float, Var], ...]
    sense: Sense
    rhs: float

    def activity(self, values: np.ndarray) -> float:
        return math.fsum(c * values[v.index] for c, v in self.terms)

    def slack(self, values: np.ndarray) -> float:
        """Signed slack; negative means violated."""
        act = self.activity(values)
        if self.sense is Sense.LE:
            return self.rhs - act
        if self.sense is Sense.GE:
            return act - self.rhs
        return -abs(act - self.rhs)


@dataclass
class Objective:
    sense: str = "max"
    terms: tuple[tuple[float, Var], ...] = ()


def _merge_terms(terms: Iterable[tuple[float, Var]]) -> tuple[tuple[float, Var], ...]:
    # Same variable may enter a row several times (e.g. v_{i,t} in both deltas).
    merged: dict[int, list] = {}
    for coef, var in terms:
        coef = float(coef)
        if not math.isfinite(coef):
            raise ModelError(f"non-finite coefficient {coef} on {var.name}")
        if var.index in merged:
            merged[var.index][0] += coef
        else:
            merged[var.index] = [coef, var]
    return tuple((c, v) for c, v in merged.values() if c != 0.0)


class MilpModel:
    """Variable registry, linear constraints and a linear objective."""

    def __init__(self, name: str = "model") -> None:
        self.name = name
        self.variables: list[Var] = []
        self.constraints: list[LinConstraint] = []
        self.objective = Objective()
        self.meta: dict[str, Any] = {}
        self._by_name: dict[str, Var] = {}
        self._row_names: set[str] = set()

    # -- registration -------------------------------------------------------

    def add_var(
        self,
        name: str,
        kind: VarKind | str = VarKind.CONTINUOUS,
        lb: float = 0.0,
        ub: float = math.inf,
    ) -> Var:
        kind = VarKind(kind)
        if name in self._by_name:
            raise ModelError(f"duplicate variable name {name!r}")
        if not name or any(ch.isspace() for ch in name):
            raise ModelError(f"invalid variable name {name!r}")
        if kind is VarKind.BINARY:
            lb, ub = 0.0, 1.0
        lb, ub = float(lb), float(ub)
        if math.isnan(lb) or math.isnan(ub):
            raise ModelError(f"NaN bound on {name!r}")
        var = Var(len(self.variables), name, kind, lb, ub)
        self.variables.append(var)
        self._by_name[name] = var
        return var

    def add_binary(self, name: str) -> Var:
        return self.add_var(name, VarKind.BINARY)

    def add_constraint(
        self,
        terms: Iterable[tuple[float, Var]],
        sense: Sense | str,
        rhs: float,
        name: str,
    ) -> LinConstraint:
        sense = Sense(sense)
        if name in self._row_names:
            raise ModelError(f"duplicate constraint name {name!r}")
        merged = _merge_terms(terms)
        for _, var in merged:
            if self._by_name.get(var.name) is not var:
                raise ModelError(f"{name}: variable {var.name!r} is not registered in this model")
        if not merged:
            raise ModelError(f"constraint {name!r} has no terms")
        rhs = float(rhs)
        if not math.isfinite(rhs):
            raise ModelError(f"constraint {name!r} has non-finite rhs")
        row = LinConstraint(name, merged, sense, rhs)
        self.constraints.append(row)
        self._row_names.add(name)
        return row

    def set_objective(self, terms: Iterable[tuple[float, Var]], sense: str = "max") -> None:
        if sense not in ("max", "min"):
            raise ModelError(f"objective sense must be 'max' or 'min', got {sense!r}")
        merged = _merge_terms(terms)
        for _, var in merged:
            if self._by_name.get(var.name) is not var:
                raise ModelError(f"objective: variable {var.name!r} is not registered")
        self.objective = Objective(sense, merged)

    # -- queries ------------------------------------------------------------

    def var(self, name: str) -> Var:
        return self._by_name[name]

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    @property
    def num_vars(self) -> int:
        return len(self.variables)

    @property
    def num_binary(self) -> int:
        return sum(1 for v in self.variables if v.is_binary)

    @property
    def num_continuous(self) -> int:
        return sum(1 for v in self.variables if not v.is_binary)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def is_empty(self) -> bool:
        return not self.variables

    # -- evaluation ---------------------------------------------------------

    def value_vector(self, values: Mapping[str, float] | np.ndarray) -> np.ndarray:
        """Dense value vector; names missing from a mapping default to 0."""
        if isinstance(values, np.ndarray):
            if values.shape != (self.num_vars,):
                raise ModelError(f"value vector has shape {values.shape}, expected ({self.num_vars},)")
            return values.astype(float)
        vec = np.zeros(self.num_vars)
        for name, val in values.items():
            vec[self._by_name[name].index] = val
        return vec

    def evaluate_objective(self, values: Mapping[str, float] | np.ndarray) -> float:
        vec = self.value_vector(values)
        return math.fsum(c * vec[v.index] for c, v in self.objective.terms)

    def violations(
        self, values: Mapping[str, float] | np.ndarray, tol: float = 1e-6
    ) -> list[str]:
        """Names of rows and bounds violated by ``values`` beyond ``tol``.

        Integrality of binaries is checked too (reported as ``int:<name>``).
        """
        vec = self.value_vector(values)
        bad = [row.name for row in self.constraints if row.slack(vec) < -tol]
        for var in self.variables:
            val = vec[var.index]
            if val < var.lb - tol or val > var.ub + tol:
                bad.append(f"bound:{var.name}")
            if var.is_binary and min(abs(val), abs(val - 1.0)) > tol:
                bad.append(f"int:{var.name}")
        return bad

    # -- matrix form ----------------------------------------------------------

    def to_arrays(self) -> dict[str, Any]:
        """Column-indexed arrays for matrix-based backends.

        Row bounds follow the ``row_lb <= A x <= row_ub`` convention.
        """
        n = self.num_vars
        rows, cols, data = [], [], []
        row_lb = np.empty(len(self.constraints))
        row_ub = np.empty(len(self.constraints))
        for r, con in enumerate(self.constraints):
            for coef, var in con.terms:
                rows.append(r)
                cols.append(var.index)
                data.append(coef)
            if con.sense is Sense.LE:
                row_lb[r], row_ub[r] = -np.inf, con.rhs
            elif con.sense is Sense.GE:
                row_lb[r], row_ub[r] = con.rhs, np.inf
            else:
                row_lb[r] = row_ub[r] = con.rhs
        a = sparse.csr_matrix((data, (rows, cols)), shape=(len(self.constraints), n))
        c = np.zeros(n)
        for coef, var in self.objective.terms:
            c[var.index] = coef
        return {
            "c": c,
            "A": a,
            "row_lb": row_lb,
            "row_ub": row_ub,
            "lb": np.array([v.lb for v in self.variables]),
            "ub": np.array([v.ub for v in self.variables]),
            "integrality": np.array([1 if v.is_binary else 0 for v in self.variables]),
        }

    def summary(self) -> dict[str, int]:
        return {
            "binary": self.num_binary,
            "continuous": self.num_continuous,
            "constraints": self.num_constraints,
        }


@dataclass(frozen=True)
class Solution:
    """Result of a solve.  ``values`` maps variable names to values."""

    status: str
    objective_value: float
    values: Mapping[str, float] = field(default_factory=dict)
    gap: float = 0.0
    backend: str = ""
    wall_time_s: float = 0.0

    STATUSES = ("optimal", "infeasible", "gap-limit", "time-limit")

    def __post_init__(self) -> None:
        if self.status not in self.STATUSES:
            raise ValueError(f"unknown status {self.status!r}")

    def __getitem__(self, key: Var | str) -> float:
        name = key.name if isinstance(key, Var) else key
        return self.values.get(name, 0.0)

    @property
    def has_values(self) -> bool:
        return self.status in ("optimal", "gap-limit") or (
            self.status == "time-limit" and bool(self.values)
        )


def snap_binaries(model: MilpModel, values: Mapping[str, float], tol: float = BINARY_TOL) -> dict[str, float]:
    """Round binaries to {0, 1}; raise if any is further than ``tol`` away."""
    out = dict(values)
    for var in model.variables:
        if not var.is_binary:
            continue
        val = out.get(var.name, 0.0)
        nearest = round(val)
        if abs(val - nearest) > tol or nearest not in (0, 1):
            raise ModelError(f"binary {var.name} has non-integral value {val!r}")
        out[var.name] = float(nearest)
    return out


def terms_sum(vars_: Sequence[Var], coef: float = 1.0) -> list[tuple[float, Var]]:
    return [(coef, v) for v in vars_]
