"""Discrete/continuous time-event sets and the clock functions they induce.

A :class:`TimeEventSet` is a finite disjoint union of instants and closed
intervals. Its clock function maps ``t`` to the next event time at-or-after
``t``; the arrival function derived from an ongoing clock maps ``t`` to the
first instant of the event piece the clock lands in.
"""

from __future__ import annotations

import math
import warnings
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from .errors import DegenerateInterval, OutOfRange, Overlap

INF = math.inf
DEFAULT_EPS = 1e-9


class EventMergeWarning(UserWarning):
    """A point event touching an interval endpoint was absorbed by the interval."""


class EventRef(NamedTuple):
    lo: float
    hi: float
    is_point: bool


@dataclass(frozen=True)
class TimeEventSet:
    points: tuple[float, ...] = ()
    intervals: tuple[tuple[float, float], ...] = ()
    _elements: tuple[EventRef, ...] = field(init=False, repr=False, compare=False)
    _his: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        elems = [EventRef(p, p, True) for p in self.points]
        elems += [EventRef(a, b, False) for a, b in self.intervals]
        elems.sort(key=lambda e: e.lo)
        object.__setattr__(self, "_elements", tuple(elems))
        object.__setattr__(self, "_his", tuple(e.hi for e in elems))

    @property
    def elements(self) -> tuple[EventRef, ...]:
        return self._elements

    def __len__(self) -> int:
        return len(self._elements)

    def __bool__(self) -> bool:
        return bool(self._elements)

    def min(self) -> float:
        if not self._elements:
            raise ValueError("empty event set has no minimum")
        return self._elements[0].lo

    def max(self) -> float:
        if not self._elements:
            raise ValueError("empty event set has no maximum")
        return self._elements[-1].hi

    def piece(self, t: float, eps: float = DEFAULT_EPS) -> EventRef | None:
        """First event element that ends at-or-after ``t``."""
        k = bisect_left(self._his, t - eps)
        if k == len(self._elements):
            return None
        return self._elements[k]

    def contains(self, t: float, eps: float = DEFAULT_EPS) -> bool:
        e = self.piece(t, eps)
        return e is not None and e.lo - eps <= t <= e.hi + eps

    def next_at_or_after(self, t: float, eps: float = DEFAULT_EPS) -> float:
        e = self.piece(t, eps)
        if e is None:
            return INF
        if e.lo <= t + eps:
            if e.is_point:
                return e.lo
            return min(max(t, e.lo), e.hi)
        return e.lo

    def to_dict(self) -> dict:
        return {"points": list(self.points), "intervals": [list(iv) for iv in self.intervals]}


def validate_event_set(points: Iterable[float] = (), intervals: Iterable[Iterable[float]] = (), *,
                       t_start: float = -INF, t_end: float = INF,
                       eps: float = DEFAULT_EPS) -> TimeEventSet:
    """Normalize points and intervals into a :class:`TimeEventSet`.

    Points are sorted and deduplicated. A point equal (within ``eps``) to an
    interval endpoint is merged into the interval with an
    :class:`EventMergeWarning`; a point strictly inside an interval, or two
    intersecting intervals, raise :class:`Overlap`.
    """
    ivs = []
    for k, iv in enumerate(intervals):
        a, b = (float(x) for x in iv)
        if not a < b:
            raise DegenerateInterval(f"interval [{a}, {b}] is degenerate", path=f"intervals[{k}]")
        if a < t_start - eps or b > t_end + eps:
            raise OutOfRange(f"interval [{a}, {b}] outside [{t_start}, {t_end}]", path=f"intervals[{k}]")
        ivs.append((a, b))
    ivs.sort()
    for (a1, b1), (a2, b2) in zip(ivs, ivs[1:]):
        if a2 <= b1 + eps:
            raise Overlap(f"intervals [{a1}, {b1}] and [{a2}, {b2}] intersect")

    pts: list[float] = []
    for k, p in enumerate(sorted(float(x) for x in points)):
        if p < t_start - eps or p > t_end + eps:
            raise OutOfRange(f"point {p} outside [{t_start}, {t_end}]", path=f"points[{k}]")
        if pts and p - pts[-1] <= eps:
            continue
        pts.append(p)

    kept = []
    starts = [a for a, _ in ivs]
    for p in pts:
        k = bisect_left(starts, p + eps) - 1
        # candidates: interval whose start is <= p (k) and the next one (k + 1)
        absorbed = False
        for j in (k, k + 1):
            if 0 <= j < len(ivs):
                a, b = ivs[j]
                if abs(p - a) <= eps or abs(p - b) <= eps:
                    warnings.warn(f"point {p} touches interval [{a}, {b}] and is merged into it",
                                  EventMergeWarning, stacklevel=2)
                    absorbed = True
                    break
                if a < p < b:
                    raise Overlap(f"point {p} lies inside interval [{a}, {b}]")
        if not absorbed:
            kept.append(p)
    return TimeEventSet(tuple(kept), tuple(ivs))


@dataclass(frozen=True)
class ClockFunction:
    """Clock ``tau(t) = inf{s >= t : s in T}`` over ``[t_start, t_end]``."""

    events: TimeEventSet
    t_start: float = -INF
    t_end: float = INF
    eps: float = DEFAULT_EPS

    def __call__(self, t: float) -> float:
        return clock_eval(self, t)


def _events(clock: ClockFunction | TimeEventSet) -> tuple[TimeEventSet, float]:
    if isinstance(clock, ClockFunction):
        return clock.events, clock.eps
    return clock, DEFAULT_EPS


def clock_eval(clock: ClockFunction | TimeEventSet, t: float) -> float:
    """Next event time at-or-after ``t``; ``inf`` when none remains."""
    events, eps = _events(clock)
    return events.next_at_or_after(t, eps)


def arrival_from_ongoing(ongoing: ClockFunction | TimeEventSet, t: float) -> float:
    """Arrival time induced by an ongoing clock.

    The instant itself when the clock lands on a point, the left endpoint when
    it lands inside an interval, ``inf`` when it never fires again.
    """
    events, eps = _events(ongoing)
    e = events.piece(t, eps)
    return INF if e is None else e.lo


def events_between(clock: ClockFunction | TimeEventSet, a: float, b: float) -> list[EventRef]:
    """Points and interval fragments of the event set meeting ``[a, b]``, in order."""
    if a > b:
        raise ValueError(f"empty range [{a}, {b}]")
    events, eps = _events(clock)
    out = []
    k = bisect_left(events._his, a - eps)
    for e in events.elements[k:]:
        if e.lo > b + eps:
            break
        if e.is_point:
            out.append(e)
        else:
            out.append(EventRef(max(e.lo, a), min(e.hi, b), False))
    return out
