"""Ground-truth itinerary engine for tiny scenarios.

Every MER itinerary is a sequence of "stay k spans, then travel to another
node" decisions.  Departures are allowed at every span, including ones whose
legs the horizon cuts short, which mirrors what the mobility rows permit.
MERs interact only through the shared island indicators, so joint
itineraries are the cross product of per-MER sets.

``best_itinerary`` scans the cross product directly when it is small and
otherwise runs an exact backward recursion over joint (parked / en-route)
states.  Both use exact rational objective values, so ties are broken
identically: highest objective, then fewest traveling spans, then the
lexicographically smallest chronological list of
``(depart_span, mer, origin, destination)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .itinerary import Itinerary, Leg
from .mobility import MobilityAssignment
from .scenario import Scenario

MAX_NODES = 6
MAX_SPANS = 14
MAX_MERS = 2
BRUTE_FORCE_LIMIT = 50_000


class OracleSizeError(ValueError):
    pass


def check_size_guard(scenario: Scenario) -> None:
    n, d, m = scenario.num_nodes, scenario.num_spans, scenario.num_mers
    if n > MAX_NODES or d > MAX_SPANS or m > MAX_MERS:
        raise OracleSizeError(
            f"oracle accepts N<={MAX_NODES}, D<={MAX_SPANS}, M<={MAX_MERS}; got N={n}, D={d}, M={m}"
        )


# ---------------------------------------------------------------- enumeration


def enumerate_mer_itineraries(scenario: Scenario, mer: int) -> Iterator[Itinerary]:
    """Every itinerary of one MER, each exactly once."""
    check_size_guard(scenario)
    tt = scenario.travel_times(mer)
    d = scenario.num_spans
    n = scenario.num_nodes
    i0 = scenario.initial_positions()[mer]
    mer_id = scenario.fleet[mer].id

    def walk(node: int, parked_from: int, legs: tuple[Leg, ...]):
        # Parked at `node` at span `parked_from`; departures start at parked_from + 1 or later.
        yield legs
        for depart in range(parked_from + 1, d + 1):
            for dest in range(n):
                if dest == node:
                    continue
                arrive = depart + int(tt[node, dest]) - 1
                if arrive >= d:
                    yield legs + (Leg(node, dest, depart, min(arrive, d)),)
                else:
                    yield from walk(dest, arrive + 1, legs + (Leg(node, dest, depart, arrive),))

    for legs in walk(i0, 0, ()):
        yield Itinerary(mer, i0, legs, mer_id)


def enumerate_itineraries(scenario: Scenario) -> Iterator[tuple[Itinerary, ...]]:
    per_mer = [list(enumerate_mer_itineraries(scenario, j)) for j in range(scenario.num_mers)]
    return itertools.product(*per_mer)


def count_itineraries(scenario: Scenario, mer: int) -> int:
    """Itinerary count by recursion over (parked node, span) states, memoised."""
    tt = scenario.travel_times(mer)
    d = scenario.num_spans
    n = scenario.num_nodes

    @lru_cache(maxsize=None)
    def count(node: int, span: int) -> int:
        # Parked at `node` during `span`; choose what happens from span + 1 on.
        if span >= d:
            return 1
        total = count(node, span + 1)  # still parked at span + 1
        depart = span + 1
        for dest in range(n):
            if dest != node:
                arrive = depart + int(tt[node, dest]) - 1
                total += 1 if arrive >= d else count(dest, arrive + 1)
        return total

    # Staying parked shifts the decision point, so "stay" and "depart later"
    # both go through count(node, span + 1); departing now is counted here.
    return count(scenario.initial_positions()[mer], 0)


# ------------------------------------------------------------------- objective


def _scaled_coefficients(scenario: Scenario) -> tuple[np.ndarray, list[int], int]:
    """Island values and travel costs as integers over a common denominator."""
    values = scenario.island_value()
    fracs = [[Fraction(float(v)) for v in row] for row in values]
    costs = [Fraction(float(m.travel_cost_per_span_kwh)) for m in scenario.fleet]
    denom = 1
    for f in itertools.chain(itertools.chain.from_iterable(fracs), costs):
        denom = math.lcm(denom, f.denominator)
    ints = np.array(
        [[int(f * denom) for f in row] for row in fracs], dtype=object
    ).reshape(values.shape)
    return ints, [int(c * denom) for c in costs], denom


def _island_track(it: Itinerary, scenario: Scenario) -> tuple[list[int], int]:
    """Island index parked in at each span (-1 if none) and the count of traveling spans."""
    island_of = scenario._island_of_pos
    track, travel = [], 0
    for kind, node in it.labels(scenario.num_spans):
        if kind == "park":
            track.append(island_of.get(node, -1))
        else:
            track.append(-1)
            travel += 1
    return track, travel


def _exact_objective(joint: Sequence[Itinerary], scenario: Scenario) -> Fraction:
    ints, costs, denom = _scaled_coefficients(scenario)
    tracks = [_island_track(it, scenario) for it in joint]
    total = 0
    for t in range(scenario.num_spans + 1):
        for l in {tr[t] for tr, _ in tracks if tr[t] >= 0}:
            total += ints[l, t]
    for it, (_, travel) in zip(joint, tracks):
        total -= costs[it.mer] * travel
    return Fraction(total, denom)


def _check_joint(joint: Sequence[Itinerary], scenario: Scenario) -> None:
    if len(joint) != scenario.num_mers:
        raise ValueError(f"expected {scenario.num_mers} itineraries, got {len(joint)}")
    starts = scenario.initial_positions()
    for j, it in enumerate(joint):
        if it.mer != j or it.initial_node != starts[j]:
            raise ValueError(f"itinerary {j} does not belong to MER {j} starting at node {starts[j]}")
        it.check(scenario.travel_times(j), scenario.num_spans)


def simulate_objective(joint: Sequence[Itinerary], scenario: Scenario) -> float:
    """Restored energy minus travel cost (kWh) of a joint itinerary."""
    _check_joint(joint, scenario)
    return float(_exact_objective(joint, scenario))


def legs_key(joint: Sequence[Itinerary]) -> tuple:
    return tuple(sorted((leg.depart_span, it.mer, leg.origin, leg.destination) for it in joint for leg in it.legs))


# ------------------------------------------------------------------ optimisation


def best_itinerary(scenario: Scenario, method: str = "auto") -> tuple[tuple[Itinerary, ...], float]:
    """Optimal joint itinerary and its objective, with deterministic tie-breaking.

    ``method`` is ``"brute"`` (scan the cross product), ``"dp"`` (exact
    recursion over joint states) or ``"auto"``.
    """
    check_size_guard(scenario)
    if method == "auto":
        size = 1
        for j in range(scenario.num_mers):
            size *= count_itineraries(scenario, j)
        method = "brute" if size <= BRUTE_FORCE_LIMIT else "dp"
    if method == "brute":
        joint, value = _best_brute(scenario)
    elif method == "dp":
        joint, value = _best_dp(scenario)
    else:
        raise ValueError(f"unknown method {method!r}")
    return joint, float(value)


def _best_brute(scenario: Scenario) -> tuple[tuple[Itinerary, ...], Fraction]:
    ints, costs, denom = _scaled_coefficients(scenario)
    d = scenario.num_spans
    per_mer = []
    for j in range(scenario.num_mers):
        rows = []
        for it in enumerate_mer_itineraries(scenario, j):
            track, travel = _island_track(it, scenario)
            rows.append((it, track, travel))
        per_mer.append(rows)

    best_key, best = None, None
    for combo in itertools.product(*per_mer):
        total = 0
        for t in range(d + 1):
            seen = set()
            for _, track, _ in combo:
                l = track[t]
                if l >= 0 and l not in seen:
                    seen.add(l)
                    total += ints[l, t]
        travel = 0
        for it, _, tr in combo:
            total -= costs[it.mer] * tr
            travel += tr
        joint = tuple(c[0] for c in combo)
        key = (-total, travel, legs_key(joint))
        if best_key is None or key < best_key:
            best_key, best = key, joint
    return best, Fraction(-best_key[0], denom)


def _best_dp(scenario: Scenario) -> tuple[tuple[Itinerary, ...], Fraction]:
    ints, costs, denom = _scaled_coefficients(scenario)
    d = scenario.num_spans
    n = scenario.num_nodes
    m = scenario.num_mers
    mats = [scenario.travel_times(j) for j in range(m)]
    island_of = scenario._island_of_pos

    # Per-MER state: (0, node, 0) parked, (1, dest, remaining spans after this one) traveling.
    def successors(j: int, state: tuple[int, int, int], t_next: int):
        kind, node, rem = state
        if kind == 0:
            yield (0, node, 0), None
            for dest in range(n):
                if dest != node:
                    dur = int(mats[j][node, dest])
                    yield (1, dest, dur - 1), (t_next, j, node, dest)
        elif rem > 0:
            yield (1, node, rem - 1), None
        else:
            yield (0, node, 0), None

    def span_value(t: int, joint) -> tuple[int, int]:
        total, travel = 0, 0
        seen = set()
        for j, (kind, node, _) in enumerate(joint):
            if kind == 0:
                l = island_of.get(node, -1)
                if l >= 0 and l not in seen:
                    seen.add(l)
                    total += ints[l, t]
            else:
                total -= costs[j]
                travel += 1
        return total, travel

    @lru_cache(maxsize=None)
    def best_from(t: int, joint: tuple) -> tuple[int, int, tuple, tuple | None]:
        """(value, travel, legs, next joint) for spans t..D given the joint state at t."""
        val, trav = span_value(t, joint)
        if t == d:
            return val, trav, (), None
        best = None
        options = [list(successors(j, s, t + 1)) for j, s in enumerate(joint)]
        for combo in itertools.product(*options):
            nxt = tuple(c[0] for c in combo)
            new_legs = tuple(c[1] for c in combo if c[1] is not None)
            fv, ft, fl, _ = best_from(t + 1, nxt)
            cand = (val + fv, trav + ft, new_legs + fl, nxt)
            if best is None or (-cand[0], cand[1], cand[2]) < (-best[0], best[1], best[2]):
                best = cand
        return best

    start = tuple((0, i0, 0) for i0 in scenario.initial_positions())
    value, _, legs, _ = best_from(0, start)
    best_from.cache_clear()

    joint = []
    for j in range(m):
        mine = []
        for depart, jj, origin, dest in legs:
            if jj == j:
                arrive = min(depart + int(mats[j][origin, dest]) - 1, d)
                mine.append(Leg(origin, dest, depart, arrive))
        joint.append(Itinerary(j, start[j][1], tuple(mine), scenario.fleet[j].id))
    return tuple(joint), Fraction(value, denom)


# --------------------------------------------------------------------- encoding


@dataclass
class Encoding:
    mobility: MobilityAssignment
    y: np.ndarray  # (L, D+1) island restored indicators


def encode_itinerary(joint: Sequence[Itinerary], scenario: Scenario) -> Encoding:
    """Full variable assignment induced by a joint itinerary.

    S carries the whole travel time at a leg's first span, R counts the
    remaining spans down, and w is 1 exactly on spans traveled after a
    traveled span.
    """
    _check_joint(joint, scenario)
    m, n, d = scenario.num_mers, scenario.num_nodes, scenario.num_spans
    x = np.zeros((m, d + 1, n))
    v = np.zeros((m, d + 1, n))
    s = np.zeros((m, d + 1))
    r = np.zeros((m, d + 1))
    w = np.zeros((m, d + 1))
    y = np.zeros((len(scenario.islands), d + 1))
    island_of = scenario._island_of_pos
    for j, it in enumerate(joint):
        tt = scenario.travel_times(j)
        for t, (kind, node) in enumerate(it.labels(d)):
            if kind == "park":
                x[j, t, node] = 1
                if node in island_of:
                    y[island_of[node], t] = 1
            else:
                v[j, t, node] = 1
        for leg in it.legs:
            s[j, leg.depart_span] = tt[leg.origin, leg.destination]
        for t in range(1, d + 1):
            r[j, t] = r[j, t - 1] + s[j, t] - v[j, t - 1].sum()
            w[j, t] = float(v[j, t - 1].sum() == 1 and v[j, t].sum() == 1)
    return Encoding(MobilityAssignment(x, v, s, r, w), y)


# ------------------------------------------------------- exhaustive MILP side

EXHAUSTIVE_LIMIT = 2_000_000


def mobility_feasible_labels(
    travel_times: np.ndarray,
    initial_node: int,
    num_spans: int,
    coeffs=None,
    tol: float = 1e-9,
    chunk: int = 40_000,
) -> set[tuple[tuple[str, int], ...]]:
    """Label sequences of one MER that satisfy the generated mobility rows.

    Every one of the ``(2N)^(D+1)`` parking/traveling label sequences is
    tested against the rows of a freshly built single-MER block.  S and R
    are fixed by the exact fuel rule and the residual recursion; w is
    existentially quantified, which is exact because each row involves at
    most one w variable, so w can be chosen span by span.
    """
    from .milp.model import MilpModel
    from .mobility import PUBLISHED_COEFFICIENTS, build_mobility_block

    tt = np.asarray(travel_times, dtype=float)
    n, d = tt.shape[0], num_spans
    total = (2 * n) ** (d + 1)
    if total > EXHAUSTIVE_LIMIT:
        raise OracleSizeError(f"{total} label sequences exceed the exhaustive limit {EXHAUSTIVE_LIMIT}")

    model = MilpModel("exhaustive")
    blk = build_mobility_block(model, [initial_node], tt, d, coeffs or PUBLISHED_COEFFICIENTS)
    arr = model.to_arrays()
    a, lo, hi = arr["A"], arr["row_lb"], arr["row_ub"]
    x_idx = np.array([[var.index for var in row] for row in blk.x[0]])
    v_idx = np.array([[var.index for var in row] for row in blk.v[0]])
    s_idx = np.array([var.index for var in blk.S[0]])
    r_idx = np.array([var.index for var in blk.R[0]])
    w_idx = np.array([var.index for var in blk.w[0]])

    # Rows grouped by the (single) w variable they touch; -1 means none.
    w_pos = {int(col): t for t, col in enumerate(w_idx)}
    row_group = np.full(a.shape[0], -1)
    coo = a.tocoo()
    for r, col in zip(coo.row, coo.col):
        t = w_pos.get(int(col))
        if t is not None:
            assert row_group[r] in (-1, t), "a row touches two w variables"
            row_group[r] = t
    groups = [np.flatnonzero(row_group == t) for t in range(d + 1)]
    free_rows = np.flatnonzero(row_group == -1)

    row_sum = tt.sum(axis=1)
    out: set[tuple[tuple[str, int], ...]] = set()
    codes_all = itertools.product(range(2 * n), repeat=d + 1)
    while True:
        codes = np.array(list(itertools.islice(codes_all, chunk)), dtype=int)
        if codes.size == 0:
            break
        k = len(codes)
        parked = codes < n
        node = np.where(parked, codes, codes - n)
        x = np.zeros((k, d + 1, n))
        v = np.zeros((k, d + 1, n))
        kk, tt_ = np.nonzero(parked)
        x[kk, tt_, node[kk, tt_]] = 1
        kk, tt_ = np.nonzero(~parked)
        v[kk, tt_, node[kk, tt_]] = 1
        s = np.zeros((k, d + 1))
        rows = x[:, :-1, :] * row_sum + v[:, 1:, :] @ tt.T - row_sum
        s[:, 1:] = np.maximum(0.0, rows.max(axis=2))
        r = np.zeros((k, d + 1))
        tot = v.sum(axis=2)
        for t in range(1, d + 1):
            r[:, t] = r[:, t - 1] + s[:, t] - tot[:, t - 1]

        vals = np.zeros((k, model.num_vars))
        vals[:, x_idx.ravel()] = x.reshape(k, -1)
        vals[:, v_idx.ravel()] = v.reshape(k, -1)
        vals[:, s_idx] = s
        vals[:, r_idx] = r
        ok = []
        for w_val in (0.0, 1.0):
            vals[:, w_idx] = w_val
            act = (a @ vals.T).T
            ok.append((act >= lo - tol) & (act <= hi + tol))
        feasible = ok[0][:, free_rows].all(axis=1)
        for g in groups:
            feasible &= ok[0][:, g].all(axis=1) | ok[1][:, g].all(axis=1)
        for c in codes[feasible]:
            out.add(tuple(("park", int(z)) if z < n else ("travel", int(z) - n) for z in c))
    return out


def oracle_label_set(scenario: Scenario, mer: int = 0) -> set[tuple[tuple[str, int], ...]]:
    d = scenario.num_spans
    return {tuple(it.labels(d)) for it in enumerate_mer_itineraries(scenario, mer)}
