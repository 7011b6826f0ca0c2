"""Per-MER itineraries: parking intervals separated by travel legs.

A leg's ``depart_span`` is its first traveling span and ``arrive_span`` its
last one, so a complete leg spans ``T[origin][destination]`` spans and the
MER is parked at the destination from ``arrive_span + 1``.  A leg cut off
by the end of the horizon has ``arrive_span == D`` and fewer spans.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterator, NamedTuple, Sequence

import numpy as np


class ItineraryError(ValueError):
    pass


class Leg(NamedTuple):
    origin: int
    destination: int
    depart_span: int
    arrive_span: int

    @property
    def duration(self) -> int:
        return self.arrive_span - self.depart_span + 1


class Parking(NamedTuple):
    node: int
    first_span: int
    last_span: int


@dataclass(frozen=True)
class Itinerary:
    """Movements of one MER; node references are positions (0..N-1)."""

    mer: int
    initial_node: int
    legs: tuple[Leg, ...] = ()
    mer_id: Any = None

    def labels(self, num_spans: int) -> list[tuple[str, int]]:
        """``("park", node)`` or ``("travel", destination)`` for every span 0..D."""
        out: list[tuple[str, int]] = []
        here = self.initial_node
        t = 0
        for leg in self.legs:
            out += [("park", here)] * (leg.depart_span - t)
            out += [("travel", leg.destination)] * leg.duration
            here = leg.destination
            t = leg.arrive_span + 1
        out += [("park", here)] * (num_spans + 1 - t)
        return out

    def segments(self, num_spans: int) -> list[Parking | Leg]:
        """Chronological parking intervals and legs covering 0..D exactly once."""
        out: list[Parking | Leg] = []
        here = self.initial_node
        t = 0
        for leg in self.legs:
            if leg.depart_span > t:
                out.append(Parking(here, t, leg.depart_span - 1))
            out.append(leg)
            here = leg.destination
            t = leg.arrive_span + 1
        if t <= num_spans:
            out.append(Parking(here, t, num_spans))
        return out

    def travel_spans(self) -> int:
        return sum(leg.duration for leg in self.legs)

    def check(self, travel_times: np.ndarray, num_spans: int) -> None:
        """Raise :class:`ItineraryError` unless the legs are physically consistent."""
        here = self.initial_node
        earliest = 1
        for k, leg in enumerate(self.legs):
            if leg.origin != here:
                raise ItineraryError(f"leg {k} departs from {leg.origin}, MER is at {here}")
            if leg.destination == leg.origin:
                raise ItineraryError(f"leg {k} travels to its own origin")
            if leg.depart_span < earliest:
                raise ItineraryError(f"leg {k} departs at span {leg.depart_span}, earliest is {earliest}")
            if leg.arrive_span > num_spans:
                raise ItineraryError(f"leg {k} arrives after the horizon")
            need = int(travel_times[leg.origin][leg.destination])
            if leg.duration != need:
                truncated = leg.arrive_span == num_spans and leg.duration < need
                if not truncated or k != len(self.legs) - 1:
                    raise ItineraryError(f"leg {k} lasts {leg.duration} spans, travel time is {need}")
            here = leg.destination
            # The arrival span is spent parked; the next leg may start after it.
            earliest = leg.arrive_span + 2


def truncated_legs(it: Itinerary, travel_times: np.ndarray) -> list[Leg]:
    return [leg for leg in it.legs if leg.duration < travel_times[leg.origin][leg.destination]]


def itinerary_from_labels(
    mer: int,
    labels: Sequence[tuple[str, int]],
    initial_node: int | None = None,
    mer_id: Any = None,
) -> Itinerary:
    """Inverse of :meth:`Itinerary.labels`.

    Raises :class:`ItineraryError` for sequences no itinerary produces:
    travel at span 0, a parking label that moves without travel, a
    destination change while traveling, or arrival at a node other than the
    destination.
    """
    if not labels:
        raise ItineraryError("empty label sequence")
    kind0, here = labels[0]
    if kind0 != "park":
        raise ItineraryError("MER is traveling at span 0")
    if initial_node is not None and here != initial_node:
        raise ItineraryError(f"MER starts at node {here}, expected {initial_node}")
    legs: list[Leg] = []
    origin = here
    t = 1
    n = len(labels)
    while t < n:
        kind, node = labels[t]
        if kind == "park":
            if node != here:
                raise ItineraryError(f"span {t}: parking label jumps from node {here} to {node} without travel")
            t += 1
            continue
        start = t
        while t < n and labels[t] == ("travel", node):
            t += 1
        if t < n:
            nkind, nnode = labels[t]
            if nkind == "travel":
                raise ItineraryError(f"span {t}: destination changes from {node} to {nnode} while traveling")
            if nnode != node:
                raise ItineraryError(f"span {t}: arrived at node {nnode}, leg was heading to {node}")
        legs.append(Leg(origin, node, start, t - 1))
        here = origin = node
    return Itinerary(mer, labels[0][1], tuple(legs), mer_id)


def labels_from_arrays(x: np.ndarray, v: np.ndarray, tol: float = 1e-6) -> list[tuple[str, int]]:
    """Read one MER's (D+1, N) parking/travel arrays into labels (exactly one per span)."""
    out = []
    for t in range(x.shape[0]):
        parked = np.flatnonzero(x[t] > 0.5)
        moving = np.flatnonzero(v[t] > 0.5)
        frac = np.concatenate([x[t], v[t]])
        if np.any(np.minimum(np.abs(frac), np.abs(frac - 1)) > tol):
            raise ItineraryError(f"span {t}: non-integral state labels")
        if len(parked) + len(moving) != 1:
            raise ItineraryError(
                f"span {t}: {len(parked)} parking and {len(moving)} traveling labels (exactly one required)"
            )
        out.append(("park", int(parked[0])) if len(parked) else ("travel", int(moving[0])))
    return out


def iter_joint_legs(joint: Sequence[Itinerary]) -> Iterator[tuple[int, Leg]]:
    for it in joint:
        for leg in it.legs:
            yield it.mer, leg
