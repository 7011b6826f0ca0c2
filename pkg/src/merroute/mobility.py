"""Linear mobility constraints for mobile energy resources.

Per MER ``j``, node ``i`` and span ``t`` the block uses

* ``x[j,t,i]`` binary, parked at node i;
* ``v[j,t,i]`` binary, traveling toward node i;
* ``S[j,t]`` travel time injected when a leg starts ("fuel");
* ``R[j,t]`` residual travel spans;
* ``w[j,t]`` binary direction lock while traveling on consecutive spans.

Parking labels move only through the transition pair driven by the
travel-label deltas ``d1 = v[i,t] - v[i,t+1]`` and ``d2 = sum v[t] - sum v[t+1]``:
``x[i,t] - D <= x[i,t+1] <= x[i,t] + U`` with ``D = a1 d1 + b1 d2 + c1`` and
``U = a2 d1 + b2 d2 + c2``.  The travel time of a leg is injected through
row bounds on ``S`` and burnt down one span at a time through ``R``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .itinerary import ItineraryError, itinerary_from_labels, labels_from_arrays
from .milp.model import BINARY_TOL, LinConstraint, MilpModel, Solution, Var

log = logging.getLogger(__name__)

DEFAULT_EPSILON = 1.0


# ------------------------------------------------------------------ coefficients


@dataclass(frozen=True)
class TransitionCoefficients:
    a1: float
    b1: float
    c1: float
    a2: float
    b2: float
    c2: float

    def down(self, d1: float, d2: float) -> float:
        return self.a1 * d1 + self.b1 * d2 + self.c1

    def up(self, d1: float, d2: float) -> float:
        return self.a2 * d1 + self.b2 * d2 + self.c2

    def as_tuple(self) -> tuple[float, ...]:
        return (self.a1, self.b1, self.c1, self.a2, self.b2, self.c2)


PUBLISHED_COEFFICIENTS = TransitionCoefficients(-1.2, -0.4, 0.8, 1.0, -0.5, 0.7)

# (name, lhs, kind, bound); kind ">=" means lhs >= bound, "<=" means lhs <= bound.
# Two-sided rows appear as two entries.  Strict upper bounds are closed.
_Ineq = tuple[str, Callable[[TransitionCoefficients], float], str, float]
COEFFICIENT_INEQUALITIES: tuple[_Ineq, ...] = (
    ("-b1+c1 >= 1.2", lambda c: -c.b1 + c.c1, ">=", 1.2),
    ("-a1-b1+c1 >= 0.2", lambda c: -c.a1 - c.b1 + c.c1, ">=", 0.2),
    ("-0.8 <= a1+b1+c1", lambda c: c.a1 + c.b1 + c.c1, ">=", -0.8),
    ("a1+b1+c1 <= -0.2", lambda c: c.a1 + c.b1 + c.c1, "<=", -0.2),
    ("b1+c1 >= 0.2", lambda c: c.b1 + c.c1, ">=", 0.2),
    ("0.2 <= c1", lambda c: c.c1, ">=", 0.2),
    ("c1 <= 0.8", lambda c: c.c1, "<=", 0.8),
    ("-b2+c2 >= 0.2", lambda c: -c.b2 + c.c2, ">=", 0.2),
    ("-a2-b2+c2 >= 0.2", lambda c: -c.a2 - c.b2 + c.c2, ">=", 0.2),
    ("a2+b2+c2 >= 1.2", lambda c: c.a2 + c.b2 + c.c2, ">=", 1.2),
    ("0.2 <= b2+c2", lambda c: c.b2 + c.c2, ">=", 0.2),
    ("b2+c2 <= 0.8", lambda c: c.b2 + c.c2, "<=", 0.8),
    ("0.2 <= c2", lambda c: c.c2, ">=", 0.2),
    ("c2 <= 0.8", lambda c: c.c2, "<=", 0.8),
)


def coefficient_margins(c: TransitionCoefficients) -> dict[str, float]:
    """Signed margin of every inequality (>= 0 means satisfied).

    Margins are rounded to 12 decimals so that binding rows read as exactly 0
    instead of binary-float noise such as -5.55e-17.
    """
    out = {}
    for name, lhs, kind, bound in COEFFICIENT_INEQUALITIES:
        val = lhs(c)
        out[name] = round(val - bound if kind == ">=" else bound - val, 12) + 0.0
    return out


def check_coefficients(c: TransitionCoefficients, tol: float = 1e-9) -> list[str]:
    """Names of violated inequalities; an empty list means the tuple passes."""
    return [name for name, margin in coefficient_margins(c).items() if margin < -tol]


def derive_transition_coefficients(
    objective: tuple[Sequence[float], Sequence[float]] | None = None,
) -> TransitionCoefficients:
    """Solve the two 3-variable LPs for (a1, b1, c1) and (a2, b2, c2).

    ``objective`` holds the cost vectors of the down and up problems; the
    default minimises ``a1+b1+c1`` and ``a2+b2+c2``.
    """
    from scipy.optimize import linprog

    cost_d, cost_u = objective or ((1.0, 1.0, 1.0), (1.0, 1.0, 1.0))
    solved = []
    for block, cost in ((0, cost_d), (1, cost_u)):
        a_ub, b_ub = [], []
        for name, lhs, kind, bound in COEFFICIENT_INEQUALITIES[block * 7 : block * 7 + 7]:
            # Recover the row coefficients by probing the linear lhs.
            base = lhs(_embed(block, (0.0, 0.0, 0.0)))
            row = [lhs(_embed(block, e)) - base for e in ((1, 0, 0), (0, 1, 0), (0, 0, 1))]
            if kind == ">=":
                a_ub.append([-r for r in row])
                b_ub.append(-(bound - base))
            else:
                a_ub.append(row)
                b_ub.append(bound - base)
        res = linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=[(None, None)] * 3, method="highs")
        if res.status != 0:
            raise RuntimeError(f"coefficient LP failed: {res.message}")
        solved += [float(round(v, 12)) for v in res.x]
    coeffs = TransitionCoefficients(*solved)
    bad = check_coefficients(coeffs)
    if bad:
        raise RuntimeError(f"LP solution violates {bad}")
    return coeffs


def _embed(block: int, abc) -> TransitionCoefficients:
    z = (0.0, 0.0, 0.0)
    return TransitionCoefficients(*(tuple(abc) + z if block == 0 else z + tuple(abc)))


# Expected (D, U) intervals per travel-label transition class (d1, d2).
# Each interval is (low, high, high_is_open); high None = unbounded.
TRANSITION_CLASSES: dict[tuple[int, int], tuple[tuple, tuple]] = {
    (0, -1): ((1.0, None, False), (0.0, None, False)),   # departure, rows other than destination
    (-1, -1): ((0.0, None, False), (0.0, None, False)),  # departure, destination row
    (1, 1): ((-1.0, 0.0, True), (1.0, None, False)),     # arrival, destination row
    (0, 1): ((0.0, None, False), (0.0, 1.0, True)),      # arrival, other rows
    (0, 0): ((0.0, 1.0, True), (0.0, 1.0, True)),        # no change in travel labels
}


def _inside(val: float, interval: tuple) -> bool:
    lo, hi, open_hi = interval
    if val < lo - 1e-12:
        return False
    if hi is None:
        return True
    return val < hi if open_hi else val <= hi


def replay_transition_table(c: TransitionCoefficients) -> list[str]:
    """Evaluate D and U on every transition class; return the failing ones."""
    bad = []
    for (d1, d2), (d_int, u_int) in TRANSITION_CLASSES.items():
        if not _inside(c.down(d1, d2), d_int):
            bad.append(f"D({d1},{d2})={c.down(d1, d2):g}")
        if not _inside(c.up(d1, d2), u_int):
            bad.append(f"U({d1},{d2})={c.up(d1, d2):g}")
    return bad


# ------------------------------------------------------------------------- block


@dataclass
class MobilityBlock:
    """Handles to the mobility variables and rows of a model, per MER."""

    x: list[list[list[Var]]]  # [j][t][i]
    v: list[list[list[Var]]]
    S: list[list[Var]]  # [j][t]
    R: list[list[Var]]
    w: list[list[Var]]
    constraints: list[LinConstraint]
    big_m: list[float]
    epsilon: float
    travel_times: list[np.ndarray]
    initial_nodes: list[int]
    num_spans: int
    coefficients: TransitionCoefficients

    @property
    def num_mers(self) -> int:
        return len(self.x)

    @property
    def num_nodes(self) -> int:
        return len(self.x[0][0])

    def counts(self) -> dict[str, int]:
        """Measured registrations (not the closed form)."""
        labels = [var for grid in (self.x, self.v) for mer in grid for row in mer for var in row]
        binary = len(labels) + sum(len(mer) for mer in self.w)
        continuous = sum(len(mer) for mer in self.S) + sum(len(mer) for mer in self.R)
        return {"binary": binary, "continuous": continuous, "constraints": len(self.constraints)}

    def extract(self, solution: Solution | dict) -> "MobilityAssignment":
        get = solution.__getitem__ if isinstance(solution, Solution) else (lambda k: solution.get(k.name, 0.0))
        return MobilityAssignment(
            x=np.array([[[get(var) for var in row] for row in mer] for mer in self.x], dtype=float),
            v=np.array([[[get(var) for var in row] for row in mer] for mer in self.v], dtype=float),
            S=np.array([[get(var) for var in mer] for mer in self.S], dtype=float),
            R=np.array([[get(var) for var in mer] for mer in self.R], dtype=float),
            w=np.array([[get(var) for var in mer] for mer in self.w], dtype=float),
        )

    def values(self, a: "MobilityAssignment") -> dict[str, float]:
        out: dict[str, float] = {}
        for j in range(self.num_mers):
            for t in range(self.num_spans + 1):
                for i in range(self.num_nodes):
                    out[self.x[j][t][i].name] = float(a.x[j, t, i])
                    out[self.v[j][t][i].name] = float(a.v[j, t, i])
                out[self.S[j][t].name] = float(a.S[j, t])
                out[self.R[j][t].name] = float(a.R[j, t])
                out[self.w[j][t].name] = float(a.w[j, t])
        return out


@dataclass
class MobilityAssignment:
    """Dense values of a mobility block: x, v of shape (M, D+1, N); S, R, w of shape (M, D+1)."""

    x: np.ndarray
    v: np.ndarray
    S: np.ndarray
    R: np.ndarray
    w: np.ndarray

    @property
    def shape(self) -> tuple[int, int, int]:
        m, t, n = self.x.shape
        return m, n, t - 1

    def snapped(self, tol: float = BINARY_TOL) -> "MobilityAssignment":
        for arr, label in ((self.x, "x"), (self.v, "v"), (self.w, "w")):
            if np.any(np.minimum(np.abs(arr), np.abs(arr - 1)) > tol):
                raise ItineraryError(f"non-integral {label} values")
        return MobilityAssignment(np.round(self.x), np.round(self.v), self.S.copy(), self.R.copy(), np.round(self.w))


def _as_matrices(travel_times, num_mers: int) -> list[np.ndarray]:
    if isinstance(travel_times, np.ndarray) and travel_times.ndim == 2:
        return [travel_times] * num_mers
    mats = [np.asarray(t) for t in travel_times]
    if len(mats) != num_mers:
        raise ValueError(f"got {len(mats)} travel-time matrices for {num_mers} MERs")
    return mats


def build_mobility_block(
    model: MilpModel,
    initial_nodes: Sequence[int],
    travel_times: np.ndarray | Sequence[np.ndarray],
    num_spans: int,
    coeffs: TransitionCoefficients = PUBLISHED_COEFFICIENTS,
    epsilon: float = DEFAULT_EPSILON,
) -> MobilityBlock:
    """Register the mobility variables and rows for every MER in ``model``.

    ``travel_times`` is one integer matrix shared by the fleet or one per
    MER.  Rows are added in a fixed order so rebuilding gives identical lists.
    """
    bad = check_coefficients(coeffs)
    if bad:
        raise ValueError(f"transition coefficients violate {bad}")
    if not 0 < epsilon <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    num_mers = len(initial_nodes)
    if num_mers < 1 or num_spans < 1:
        raise ValueError("need at least one MER and one span")
    mats = _as_matrices(travel_times, num_mers)
    n = mats[0].shape[0]
    for k, tt in enumerate(mats):
        if tt.shape != (n, n):
            raise ValueError(f"travel-time matrix {k} has shape {tt.shape}, expected ({n}, {n})")
        if np.any(np.diag(tt) != 0) or np.any(tt < 0):
            raise ValueError(f"travel-time matrix {k} must be non-negative with a zero diagonal")
    for j, i0 in enumerate(initial_nodes):
        if not 0 <= i0 < n:
            raise ValueError(f"MER {j}: initial node {i0} outside 0..{n - 1}")

    d = num_spans
    spans = range(d + 1)
    first_row = len(model.constraints)
    X, V, S, R, W, big_m = [], [], [], [], [], []
    for j in range(num_mers):
        X.append([[model.add_binary(f"x_j{j}_i{i}_t{t}") for i in range(n)] for t in spans])
        V.append([[model.add_binary(f"v_j{j}_i{i}_t{t}") for i in range(n)] for t in spans])
        W.append([model.add_binary(f"w_j{j}_t{t}") for t in spans])
        S.append([model.add_var(f"S_j{j}_t{t}") for t in spans])
        R.append([model.add_var(f"R_j{j}_t{t}") for t in spans])

    add = model.add_constraint
    for j in range(num_mers):
        x, v, s, r, w = X[j], V[j], S[j], R[j], W[j]
        tt = mats[j]
        row_sum = tt.sum(axis=1)
        big = float(tt.max()) + 1.0
        big_m.append(big)

        # one label per span
        for t in spans:
            add([(1.0, var) for var in x[t] + v[t]], "=", 1.0, f"label_j{j}_t{t}")

        # parking-label transitions
        c = coeffs
        for t in range(d):
            for i in range(n):
                lo = [(1.0, x[t + 1][i]), (-1.0, x[t][i]), (c.a1, v[t][i]), (-c.a1, v[t + 1][i])]
                lo += [(c.b1, var) for var in v[t]] + [(-c.b1, var) for var in v[t + 1]]
                add(lo, ">=", -c.c1, f"trans_lo_j{j}_i{i}_t{t}")
                up = [(1.0, x[t + 1][i]), (-1.0, x[t][i]), (-c.a2, v[t][i]), (c.a2, v[t + 1][i])]
                up += [(-c.b2, var) for var in v[t]] + [(c.b2, var) for var in v[t + 1]]
                add(up, "<=", c.c2, f"trans_up_j{j}_i{i}_t{t}")

        # travel time injected at the first span of a leg (row sums of A_{t-1} + B_t - T)
        for t in range(1, d + 1):
            for i in range(n):
                terms = [(1.0, s[t]), (-float(row_sum[i]), x[t - 1][i])]
                terms += [(-float(tt[i, k]), v[t][k]) for k in range(n)]
                add(terms, ">=", -float(row_sum[i]), f"fuel_j{j}_i{i}_t{t}")
            add([(1.0, s[t])], ">=", 0.0, f"fuel_nonneg_j{j}_t{t}")

        # residual travel spans
        for t in range(1, d + 1):
            terms = [(1.0, r[t]), (-1.0, r[t - 1]), (-1.0, s[t])] + [(1.0, var) for var in v[t - 1]]
            add(terms, "=", 0.0, f"resid_j{j}_t{t}")

        # keep traveling while residual remains
        for t in spans:
            add([(1.0 / big, r[t])] + [(-1.0, var) for var in v[t]], "<=", 0.0, f"hold_lo_j{j}_t{t}")
            add([(1.0, var) for var in v[t]] + [(-1.0, r[t])], "<=", 0.0, f"hold_up_j{j}_t{t}")

        # direction lock
        for t in range(1, d + 1):
            terms = [(1.0, w[t])] + [(-1.0, var) for var in v[t - 1]] + [(-1.0, var) for var in v[t]]
            add(terms, ">=", epsilon - 2.0, f"lock_j{j}_t{t}")
            for i in range(n):
                add([(1.0, v[t][i]), (-1.0, v[t - 1][i]), (1.0, w[t])], "<=", 1.0, f"dir_up_j{j}_i{i}_t{t}")
                add([(1.0, v[t][i]), (-1.0, v[t - 1][i]), (-1.0, w[t])], ">=", -1.0, f"dir_lo_j{j}_i{i}_t{t}")

        # initial conditions
        add([(1.0, x[0][initial_nodes[j]])], "=", 1.0, f"init_x_j{j}")
        add([(1.0, s[0])], "=", 0.0, f"init_S_j{j}")
        add([(1.0, r[0])], "=", 0.0, f"init_R_j{j}")
        add([(1.0, w[0])], "=", 0.0, f"init_w_j{j}")

    return MobilityBlock(
        X, V, S, R, W,
        constraints=model.constraints[first_row:],
        big_m=big_m,
        epsilon=epsilon,
        travel_times=mats,
        initial_nodes=list(initial_nodes),
        num_spans=d,
        coefficients=coeffs,
    )


def mobility_size_formula(n: int, m: int, d: int) -> dict[str, int]:
    """Closed-form block size; equals the registration counts of :func:`build_mobility_block`."""
    return {
        "binary": m * (d + 1) * (2 * n + 1),
        "continuous": 2 * m * (d + 1),
        "constraints": m * d * (5 * n + 6) + 7 * m,
    }


# ---------------------------------------------------------------- exact checking


def exact_fuel(x: np.ndarray, v: np.ndarray, travel_times: np.ndarray) -> np.ndarray:
    """Injected travel time per span: the max of 0 and the row sums of A_{t-1} + B_t - T.

    ``x``, ``v`` have shape (D+1, N) for one MER; S[0] is 0.
    """
    tt = np.asarray(travel_times, dtype=float)
    row_sum = tt.sum(axis=1)
    s = np.zeros(x.shape[0])
    for t in range(1, x.shape[0]):
        rows = x[t - 1] * row_sum + tt @ v[t] - row_sum
        s[t] = max(0.0, float(rows.max()))
    return s


def exact_residual(s: np.ndarray, v: np.ndarray) -> np.ndarray:
    r = np.zeros(len(s))
    for t in range(1, len(s)):
        r[t] = r[t - 1] + s[t] - v[t - 1].sum()
    return r


def minimal_lock(v: np.ndarray, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Smallest binary w satisfying the lock lower bound (w[0] = 0)."""
    tot = v.sum(axis=1)
    w = np.zeros(len(tot))
    w[1:] = (tot[:-1] + tot[1:] - 2 + epsilon > 1e-9).astype(float)
    return w


@dataclass(frozen=True)
class Violation:
    mer: int
    span: int | None
    family: str
    detail: str

    def __str__(self) -> str:
        at = "" if self.span is None else f" t={self.span}"
        return f"MER {self.mer}{at} [{self.family}] {self.detail}"


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def families(self) -> set[str]:
        return {v.family for v in self.violations}

    def __str__(self) -> str:
        if self.ok:
            head = "valid"
        else:
            head = f"INVALID ({len(self.violations)} violations)"
        lines = [head] + [f"  {v}" for v in self.violations[:50]] + [f"  warning: {w}" for w in self.warnings]
        return "\n".join(lines)


def validate_assignment(
    assignment: MobilityAssignment,
    travel_times: np.ndarray | Sequence[np.ndarray],
    initial_nodes: Sequence[int],
    coeffs: TransitionCoefficients = PUBLISHED_COEFFICIENTS,
    epsilon: float = DEFAULT_EPSILON,
    tol: float = 1e-6,
) -> ValidationReport:
    """Check an assignment against the mobility rules with S and R recomputed exactly.

    S comes from the max-row-sum rule (not the relaxed lower bounds) and R
    from its recursion, so over-long travel shows up as a hold violation.
    Supplied S and R values are ignored; supplied w values are checked.
    Each complete leg must last exactly its travel-time entry; legs cut by
    the horizon are reported as warnings.
    """
    rep = ValidationReport()
    m = assignment.x.shape[0]
    mats = _as_matrices(travel_times, m)
    for j in range(m):
        x, v = assignment.x[j], assignment.v[j]
        w = assignment.w[j] if assignment.w is not None else minimal_lock(v, epsilon)
        tt = mats[j]
        d = x.shape[0] - 1
        n = x.shape[1]

        def bad(t, fam, msg):
            rep.violations.append(Violation(j, t, fam, msg))

        frac = np.concatenate([x.ravel(), v.ravel(), w.ravel()])
        if np.any(np.minimum(np.abs(frac), np.abs(frac - 1)) > tol):
            bad(None, "integrality", "binary values are not integral")
            continue
        x, v, w = np.round(x), np.round(v), np.round(w)

        for t in range(d + 1):
            if abs(x[t].sum() + v[t].sum() - 1) > tol:
                bad(t, "label", f"{int(x[t].sum())} parking + {int(v[t].sum())} traveling labels")

        tot = v.sum(axis=1)
        for t in range(d):
            d2 = tot[t] - tot[t + 1]
            for i in range(n):
                d1 = v[t, i] - v[t + 1, i]
                if x[t + 1, i] < x[t, i] - coeffs.down(d1, d2) - tol:
                    bad(t, "transition", f"node {i}: parking label dropped without departure")
                if x[t + 1, i] > x[t, i] + coeffs.up(d1, d2) + tol:
                    bad(t + 1, "transition", f"node {i}: parking label appeared without arrival")

        s = exact_fuel(x, v, tt)
        r = exact_residual(s, v)
        big = float(tt.max()) + 1.0
        for t in range(d + 1):
            if r[t] / big > tot[t] + tol:
                bad(t, "hold", f"residual {r[t]:g} left but MER is not traveling")
            if tot[t] > r[t] + tol:
                bad(t, "hold", f"traveling with residual {r[t]:g}")

        if abs(w[0]) > tol:
            bad(0, "init", "w[0] must be 0")
        for t in range(1, d + 1):
            if w[t] < tot[t - 1] + tot[t] - 2 + epsilon - tol:
                bad(t, "direction", "lock not engaged on consecutive traveling spans")
            if np.any(np.abs(v[t] - v[t - 1]) > 1 - w[t] + tol):
                bad(t, "direction", "destination changed while locked")

        i0 = initial_nodes[j]
        if abs(x[0, i0] - 1) > tol:
            bad(0, "init", f"not parked at initial node {i0}")

        try:
            labels = labels_from_arrays(x, v)
            it = itinerary_from_labels(j, labels)
        except ItineraryError as exc:
            if not any(vv.mer == j for vv in rep.violations):
                bad(None, "itinerary", str(exc))
            continue
        for leg in it.legs:
            need = int(tt[leg.origin, leg.destination])
            if leg.duration == need:
                continue
            if leg.arrive_span == d and leg.duration < need:
                rep.warnings.append(
                    f"MER {j}: leg {leg.origin}->{leg.destination} departing at span {leg.depart_span} "
                    f"is cut by the horizon after {leg.duration} of {need} spans"
                )
            else:
                bad(leg.depart_span, "duration", f"leg {leg.origin}->{leg.destination} lasts {leg.duration} spans, needs {need}")
    return rep
