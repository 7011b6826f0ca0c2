"""Routing scenarios: time grid, nodes, road distances, islands and fleet.

Scenarios are read from JSON::

    {
      "name": "tiny",
      "units": "ft",
      "time_grid": {"span_minutes": 10, "num_spans": 6},
      "nodes": [{"id": 1, "island": "A", "load_kw": 100, "weight": 1}, ...],
      "distances": {"matrix": [[0, 500], [500, 0]]}      # or {"edges": [[1, 2, 500], ...]}
      "islands": [{"id": "A", "nodes": [1], "repair_span": 7}],
      "fleet": [{"id": "MER1", "initial_node": 1, "travel_cost_kwh_per_span": 0.3, "speed": 1000}]
    }

``repair_span`` may be ``"never"``; ``repair_minutes`` may be given instead
(or as well) so the fault time survives a change of span length.
Distances and speeds share the length unit named by ``units``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path


class ScenarioError(ValueError):
    """Parse or validation failure; ``errors`` holds ``field.path: message`` strings."""

    def __init__(self, errors: list[str] | str):
        self.errors = [errors] if isinstance(errors, str) else list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class TimeGrid:
    span_minutes: int
    num_spans: int

    def __post_init__(self) -> None:
        if int(self.span_minutes) != self.span_minutes or self.span_minutes < 1:
            raise ScenarioError(f"time_grid.span_minutes: must be a positive integer, got {self.span_minutes!r}")
        if int(self.num_spans) != self.num_spans or self.num_spans < 1:
            raise ScenarioError(f"time_grid.num_spans: must be a positive integer, got {self.num_spans!r}")

    @property
    def horizon_minutes(self) -> int:
        return self.span_minutes * self.num_spans

    @property
    def span_hours(self) -> float:
        return self.span_minutes / 60.0

    @property
    def spans(self) -> range:
        """The index set {0, 1, ..., D}."""
        return range(self.num_spans + 1)


@dataclass(frozen=True)
class Node:
    id: int
    island_id: Any = None
    interrupted_load_kw: float = 0.0
    weight: float = 1.0


@dataclass(frozen=True)
class Island:
    id: Any
    node_ids: tuple[int, ...]
    repair_span: int | None  # None means never repaired within the horizon
    repair_minutes: float | None = None

    def is_out(self, t: int) -> bool:
        return self.repair_span is None or t < self.repair_span


@dataclass(frozen=True)
class MerSpec:
    id: Any
    initial_node: int
    travel_cost_per_span_kwh: float = 0.0
    speed: float = 1000.0


def compute_travel_times(distances: np.ndarray, speed: float, grid: TimeGrid | int) -> np.ndarray:
    """Integer travel spans: ``ceil(d / (speed * span))``, at least 1 between distinct nodes."""
    if not speed > 0:
        raise ValueError(f"speed must be positive, got {speed!r}")
    span = grid.span_minutes if isinstance(grid, TimeGrid) else int(grid)
    d = np.asarray(distances, dtype=float)
    reach = speed * span
    # Exact multiples must not be pushed up a span by float noise.
    spans = np.ceil(np.round(d / reach, 9)).astype(np.int64)
    spans = np.maximum(spans, 1)
    np.fill_diagonal(spans, 0)
    return spans


@dataclass(frozen=True, eq=False)
class Scenario:
    grid: TimeGrid
    nodes: tuple[Node, ...]
    distances: np.ndarray
    islands: tuple[Island, ...]
    fleet: tuple[MerSpec, ...]
    name: str = "scenario"
    units: str = "ft"
    _tt_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.validate()

    # -- validation -----------------------------------------------------------

    def validate(self) -> None:
        errs: list[str] = []
        if not self.nodes:
            errs.append("nodes: at least one node is required")
        if not self.fleet:
            errs.append("fleet: at least one MER is required")
        seen: dict[int, int] = {}
        for k, node in enumerate(self.nodes):
            if node.id in seen:
                errs.append(f"nodes[{k}].id: duplicate id {node.id!r} (first at nodes[{seen[node.id]}])")
            seen.setdefault(node.id, k)
            if not (node.interrupted_load_kw >= 0):
                errs.append(f"nodes[{k}].load_kw: must be >= 0, got {node.interrupted_load_kw!r}")
            if not (node.weight >= 0):
                errs.append(f"nodes[{k}].weight: must be >= 0, got {node.weight!r}")
        n = len(self.nodes)
        d = self.distances
        if d.shape != (n, n):
            errs.append(f"distances: expected a {n}x{n} matrix, got shape {d.shape}")
        else:
            if not np.all(np.isfinite(d)) or np.any(d < 0):
                errs.append("distances: entries must be finite and >= 0")
            if np.any(np.diag(d) != 0):
                errs.append("distances: diagonal must be exactly 0")
        owner: dict[int, Any] = {}
        island_ids = set()
        for k, isl in enumerate(self.islands):
            if isl.id in island_ids:
                errs.append(f"islands[{k}].id: duplicate island id {isl.id!r}")
            island_ids.add(isl.id)
            if not isl.node_ids:
                errs.append(f"islands[{k}].nodes: must be non-empty")
            for nid in isl.node_ids:
                if nid not in seen:
                    errs.append(f"islands[{k}].nodes: unknown node {nid!r}")
                elif nid in owner:
                    errs.append(f"islands[{k}].nodes: node {nid!r} already belongs to island {owner[nid]!r}")
                owner[nid] = isl.id
            if isl.repair_span is not None and not (0 <= isl.repair_span <= self.grid.num_spans):
                errs.append(
                    f"islands[{k}].repair_span: must lie in [0, {self.grid.num_spans}] or be 'never', got {isl.repair_span!r}"
                )
        for k, node in enumerate(self.nodes):
            if node.island_id is not None and owner.get(node.id) != node.island_id:
                errs.append(f"nodes[{k}].island: {node.island_id!r} disagrees with islands membership")
        fleet_ids = set()
        for k, mer in enumerate(self.fleet):
            if mer.id in fleet_ids:
                errs.append(f"fleet[{k}].id: duplicate MER id {mer.id!r}")
            fleet_ids.add(mer.id)
            if mer.initial_node not in seen:
                errs.append(f"fleet[{k}].initial_node: unknown node {mer.initial_node!r}")
            if not (mer.travel_cost_per_span_kwh >= 0):
                errs.append(f"fleet[{k}].travel_cost_kwh_per_span: must be >= 0")
            if not (mer.speed > 0):
                errs.append(f"fleet[{k}].speed: must be > 0")
        if errs:
            raise ScenarioError(errs)

    # -- derived quantities ----------------------------------------------------

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_mers(self) -> int:
        return len(self.fleet)

    @property
    def num_spans(self) -> int:
        return self.grid.num_spans

    @cached_property
    def node_index(self) -> dict[int, int]:
        return {node.id: k for k, node in enumerate(self.nodes)}

    def travel_times(self, mer: int = 0) -> np.ndarray:
        speed = self.fleet[mer].speed
        key = (speed, self.grid.span_minutes)
        if key not in self._tt_cache:
            tt = compute_travel_times(self.distances, speed, self.grid)
            tt.setflags(write=False)
            self._tt_cache[key] = tt
        return self._tt_cache[key]

    def initial_positions(self) -> list[int]:
        return [self.node_index[m.initial_node] for m in self.fleet]

    def island_members(self) -> list[list[int]]:
        """Node positions of each island, in island order."""
        return [[self.node_index[nid] for nid in isl.node_ids] for isl in self.islands]

    def interrupted_load(self, node_pos: int, t: int) -> float:
        """P_i(t): nominal interrupted load while the node's island is still faulted."""
        node = self.nodes[node_pos]
        isl = self._island_of_pos.get(node_pos)
        if isl is None or not self.islands[isl].is_out(t):
            return 0.0
        return node.interrupted_load_kw

    @cached_property
    def _island_of_pos(self) -> dict[int, int]:
        return {pos: l for l, members in enumerate(self.island_members()) for pos in members}

    def island_value(self) -> np.ndarray:
        """(L, D+1) array of weighted restorable energy (kWh) per island and span."""
        dt = self.grid.span_hours
        members = self.island_members()
        out = np.zeros((len(self.islands), self.grid.num_spans + 1))
        for l, nodes in enumerate(members):
            for t in self.grid.spans:
                out[l, t] = sum(self.nodes[i].weight * self.interrupted_load(i, t) for i in nodes) * dt
        return out

    def with_span(self, span_minutes: int) -> "Scenario":
        """Re-discretise: same horizon and repair times, new span length (both rounded up).

        Per-span travel costs scale with the span length.
        """
        old = self.grid
        grid = TimeGrid(span_minutes, math.ceil(old.horizon_minutes / span_minutes))
        islands = []
        for isl in self.islands:
            minutes = isl.repair_minutes
            if minutes is None and isl.repair_span is not None:
                minutes = isl.repair_span * old.span_minutes
            if minutes is None:
                repair = None
            else:
                repair = math.ceil(round(minutes / span_minutes, 9))
                if repair > grid.num_spans:
                    repair = None
            islands.append(replace(isl, repair_span=repair, repair_minutes=minutes))
        ratio = span_minutes / old.span_minutes
        fleet = tuple(replace(m, travel_cost_per_span_kwh=m.travel_cost_per_span_kwh * ratio) for m in self.fleet)
        return Scenario(grid, self.nodes, self.distances, tuple(islands), fleet, self.name, self.units)

    def summary(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "nodes": self.num_nodes,
            "mers": self.num_mers,
            "islands": len(self.islands),
            "span_minutes": self.grid.span_minutes,
            "num_spans": self.grid.num_spans,
            "horizon_minutes": self.grid.horizon_minutes,
        }


# ------------------------------------------------------------------------ I/O


def _require(obj: dict, key: str, path: str, errs: list[str]):
    if not isinstance(obj, dict) or key not in obj:
        errs.append(f"{path}.{key}: missing" if path else f"{key}: missing")
        return None
    return obj[key]


def _as_number(val, path: str, errs: list[str], default=None):
    if val is None:
        return default
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        errs.append(f"{path}: expected a number, got {val!r}")
        return default
    return val


def _distance_matrix(spec: dict, ids: list[int], errs: list[str]) -> np.ndarray | None:
    n = len(ids)
    if not isinstance(spec, dict):
        errs.append("distances: expected an object with 'matrix' or 'edges'")
        return None
    if "matrix" in spec:
        try:
            mat = np.array(spec["matrix"], dtype=float)
        except (TypeError, ValueError):
            errs.append("distances.matrix: not a numeric matrix")
            return None
        if mat.shape != (n, n):
            errs.append(f"distances.matrix: expected {n}x{n}, got shape {mat.shape}")
            return None
        return mat
    if "edges" in spec:
        pos = {nid: k for k, nid in enumerate(ids)}
        rows, cols, data = [], [], []
        for k, edge in enumerate(spec["edges"]):
            if isinstance(edge, dict):
                u, v, length = edge.get("from"), edge.get("to"), edge.get("length")
            elif isinstance(edge, (list, tuple)) and len(edge) == 3:
                u, v, length = edge
            else:
                errs.append(f"distances.edges[{k}]: expected [from, to, length]")
                continue
            if u not in pos or v not in pos:
                errs.append(f"distances.edges[{k}]: unknown node in edge ({u!r}, {v!r})")
                continue
            if not isinstance(length, (int, float)) or length < 0:
                errs.append(f"distances.edges[{k}]: length must be >= 0")
                continue
            rows += [pos[u], pos[v]]
            cols += [pos[v], pos[u]]
            # csgraph treats explicit zeros as missing edges.
            data += [max(float(length), 1e-12)] * 2
        if errs:
            return None
        graph = csr_matrix((data, (rows, cols)), shape=(n, n))
        mat = shortest_path(graph, method="D", directed=False)
        if np.any(~np.isfinite(mat)):
            errs.append("distances.edges: road graph is not connected")
            return None
        mat[mat < 1e-9] = 0.0
        return mat
    errs.append("distances: expected 'matrix' or 'edges'")
    return None


def scenario_from_dict(data: dict, name: str | None = None) -> Scenario:
    errs: list[str] = []
    if not isinstance(data, dict):
        raise ScenarioError("scenario: top level must be an object")
    tg = _require(data, "time_grid", "", errs) or {}
    span = _require(tg, "span_minutes", "time_grid", errs)
    nspans = _require(tg, "num_spans", "time_grid", errs)
    raw_nodes = _require(data, "nodes", "", errs) or []
    raw_islands = data.get("islands", [])
    raw_fleet = _require(data, "fleet", "", errs) or []
    if errs:
        raise ScenarioError(errs)
    try:
        grid = TimeGrid(span, nspans)
    except ScenarioError as exc:
        raise ScenarioError(exc.errors) from None

    nodes = []
    for k, rn in enumerate(raw_nodes):
        if not isinstance(rn, dict) or "id" not in rn:
            errs.append(f"nodes[{k}].id: missing")
            continue
        if isinstance(rn["id"], bool) or not isinstance(rn["id"], int):
            errs.append(f"nodes[{k}].id: must be an integer, got {rn['id']!r}")
            continue
        nodes.append(
            Node(
                rn["id"],
                rn.get("island"),
                _as_number(rn.get("load_kw"), f"nodes[{k}].load_kw", errs, 0.0),
                _as_number(rn.get("weight"), f"nodes[{k}].weight", errs, 1.0),
            )
        )
    ids = [nd.id for nd in nodes]

    islands = []
    by_island: dict[Any, list[int]] = {}
    for nd in nodes:
        if nd.island_id is not None:
            by_island.setdefault(nd.island_id, []).append(nd.id)
    for k, ri in enumerate(raw_islands):
        if not isinstance(ri, dict) or "id" not in ri:
            errs.append(f"islands[{k}].id: missing")
            continue
        members = ri.get("nodes")
        if members is None:
            members = by_island.get(ri["id"], [])
        rs = ri.get("repair_span")
        rm = _as_number(ri.get("repair_minutes"), f"islands[{k}].repair_minutes", errs)
        if rs == "never":
            repair = None
        elif rs is None:
            if rm is None:
                errs.append(f"islands[{k}].repair_span: missing (give repair_span or repair_minutes)")
                continue
            repair = math.ceil(round(rm / grid.span_minutes, 9))
            if repair > grid.num_spans:
                repair = None
        elif isinstance(rs, int) and not isinstance(rs, bool):
            repair = rs
        else:
            errs.append(f"islands[{k}].repair_span: expected an integer or 'never', got {rs!r}")
            continue
        islands.append(Island(ri["id"], tuple(members), repair, rm))

    fleet = []
    for k, rf in enumerate(raw_fleet):
        if not isinstance(rf, dict):
            errs.append(f"fleet[{k}]: expected an object")
            continue
        init = _require(rf, "initial_node", f"fleet[{k}]", errs)
        fleet.append(
            MerSpec(
                rf.get("id", f"MER{k + 1}"),
                init,
                _as_number(rf.get("travel_cost_kwh_per_span"), f"fleet[{k}].travel_cost_kwh_per_span", errs, 0.0),
                _as_number(rf.get("speed"), f"fleet[{k}].speed", errs, 1000.0),
            )
        )
    dist = _distance_matrix(_require(data, "distances", "", errs) or {}, ids, errs) if nodes else np.zeros((0, 0))
    if errs:
        raise ScenarioError(errs)
    return Scenario(
        grid,
        tuple(nodes),
        dist,
        tuple(islands),
        tuple(fleet),
        name or data.get("name", "scenario"),
        data.get("units", "ft"),
    )


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: malformed JSON at line {exc.lineno}: {exc.msg}") from None
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror}") from None
    return scenario_from_dict(data, data.get("name", path.stem) if isinstance(data, dict) else None)


def scenario_to_dict(sc: Scenario) -> dict:
    return {
        "name": sc.name,
        "units": sc.units,
        "time_grid": {"span_minutes": sc.grid.span_minutes, "num_spans": sc.grid.num_spans},
        "nodes": [
            {"id": n.id, "island": n.island_id, "load_kw": n.interrupted_load_kw, "weight": n.weight}
            for n in sc.nodes
        ],
        "distances": {"matrix": sc.distances.tolist()},
        "islands": [
            {
                "id": isl.id,
                "nodes": list(isl.node_ids),
                "repair_span": "never" if isl.repair_span is None else isl.repair_span,
                **({"repair_minutes": isl.repair_minutes} if isl.repair_minutes is not None else {}),
            }
            for isl in sc.islands
        ],
        "fleet": [
            {
                "id": m.id,
                "initial_node": m.initial_node,
                "travel_cost_kwh_per_span": m.travel_cost_per_span_kwh,
                "speed": m.speed,
            }
            for m in sc.fleet
        ],
    }


def make_scenario(
    travel_times: np.ndarray | list,
    *,
    num_spans: int,
    span_minutes: int = 10,
    islands: list[tuple[list[int], int | None]] = (),
    loads: list[float] | None = None,
    weights: list[float] | None = None,
    initial_nodes: list[int] = (0,),
    travel_cost: float | list[float] = 0.0,
    name: str = "synthetic",
) -> Scenario:
    """Build a scenario whose travel-time matrix equals ``travel_times`` exactly.

    Node ids are ``0..N-1``.  Distances are chosen as ``T * speed * span``
    with unit speed so that :func:`compute_travel_times` reproduces ``T``.
    """
    tt = np.asarray(travel_times, dtype=float)
    n = tt.shape[0]
    loads = list(loads) if loads is not None else [0.0] * n
    weights = list(weights) if weights is not None else [1.0] * n
    owner = {i: l for l, (members, _) in enumerate(islands) for i in members}
    nodes = tuple(Node(i, owner.get(i), float(loads[i]), float(weights[i])) for i in range(n))
    isl = tuple(Island(l, tuple(members), repair) for l, (members, repair) in enumerate(islands))
    costs = travel_cost if isinstance(travel_cost, (list, tuple)) else [travel_cost] * len(initial_nodes)
    fleet = tuple(MerSpec(f"MER{j + 1}", init, float(costs[j]), 1.0) for j, init in enumerate(initial_nodes))
    return Scenario(TimeGrid(span_minutes, num_spans), nodes, tt * span_minutes, isl, fleet, name)
