import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import clock_laws
from clock_laws import clock_law_violations, random_event_set
from ispace import (ClockFunction, EventMergeWarning, TimeEventSet, arrival_from_ongoing, clock_eval,
                    events_between, validate_event_set)
from ispace.errors import DegenerateInterval, OutOfRange, Overlap

INF = math.inf


def test_finite_cluster_of_points_is_valid():
    pts = [1 + 1 / n for n in range(1, 6)] + [1 - 1 / n for n in range(1, 6)] + [1.0]
    ev = validate_event_set(pts)
    assert len(ev.points) == 11
    assert list(ev.points) == sorted(ev.points)


def test_single_start_point():
    ev = validate_event_set([0.0], [], t_start=0.0, t_end=1.0)
    assert ev.points == (0.0,) and ev.intervals == ()


def test_intersecting_intervals_rejected():
    with pytest.raises(Overlap):
        validate_event_set([], [[0, 1], [0.5, 2]])


def test_touching_intervals_rejected():
    with pytest.raises(Overlap):
        validate_event_set([], [[0, 1], [1, 2]])


def test_point_inside_interval_rejected():
    with pytest.raises(Overlap):
        validate_event_set([1.5], [[1, 2]])


def test_degenerate_and_out_of_range():
    with pytest.raises(DegenerateInterval):
        validate_event_set([], [[2, 2]])
    with pytest.raises(DegenerateInterval):
        validate_event_set([], [[3, 2]])
    with pytest.raises(OutOfRange):
        validate_event_set([5.0], t_start=0, t_end=4)
    with pytest.raises(OutOfRange):
        validate_event_set([], [[-1, 2]], t_start=0, t_end=4)


def test_endpoint_point_is_merged_with_warning():
    with pytest.warns(EventMergeWarning):
        ev = validate_event_set([1.0, 3.0], [[1.0, 2.0]])
    assert ev.points == (3.0,) and ev.intervals == ((1.0, 2.0),)
    with pytest.warns(EventMergeWarning):
        ev = validate_event_set([2.0], [[1.0, 2.0]])
    assert ev.points == ()


def test_duplicate_points_collapse():
    ev = validate_event_set([2.0, 1.0, 2.0, 2.0 + 1e-12])
    assert ev.points == (1.0, 2.0)


def test_clock_of_single_start_point():
    clock = ClockFunction(validate_event_set([0.0]), 0.0, 1.0)
    assert clock_eval(clock, 0.0) == 0.0
    assert clock_eval(clock, 0.5) == INF
    assert clock(1.0) == INF


def test_clock_of_whole_interval_is_identity():
    ev = validate_event_set([], [[0.0, 1.0]])
    for t in np.linspace(0, 1, 11):
        assert clock_eval(ev, t) == t


def test_next_point():
    ev = validate_event_set([3.0])
    assert clock_eval(ev, 1.0) == 3.0
    assert clock_eval(ev, 3.0) == 3.0
    assert clock_eval(ev, 3.5) == INF


def test_clock_tolerance():
    ev = validate_event_set([3.0])
    assert clock_eval(ev, 3.0 + 1e-10) == 3.0


def test_arrival_worked_example():
    with pytest.warns(EventMergeWarning):
        ongoing = validate_event_set([1.0], [[1.0, 2.0]])
    for t in np.linspace(0.0, 2.0, 100):
        assert arrival_from_ongoing(ongoing, t) == 1.0


def test_arrival_whole_interval():
    ev = validate_event_set([], [[0.0, 1.0]])
    assert all(arrival_from_ongoing(ev, t) == 0.0 for t in np.linspace(0, 1, 7))


def test_arrival_empty():
    ev = TimeEventSet()
    assert arrival_from_ongoing(ev, 0.0) == INF
    assert clock_eval(ev, 0.0) == INF


def test_events_between():
    ev = validate_event_set([1, 2, 5])
    assert [(e.lo, e.hi) for e in events_between(ev, 1.5, 4)] == [(2.0, 2.0)]
    iv = validate_event_set([], [[0, 10]])
    got = events_between(iv, 2, 3)
    assert [(e.lo, e.hi, e.is_point) for e in got] == [(2.0, 3.0, False)]
    assert events_between(TimeEventSet(), 0, 1) == []
    with pytest.raises(ValueError):
        events_between(ev, 2, 1)


def test_events_between_mixed_order():
    ev = validate_event_set([0.5, 4.0], [[1, 2], [3, 3.5]])
    got = events_between(ev, 0.0, 3.2)
    assert [(e.lo, e.hi) for e in got] == [(0.5, 0.5), (1.0, 2.0), (3.0, 3.2)]


def test_empty_set_has_no_min():
    with pytest.raises(ValueError):
        TimeEventSet().min()


def test_to_dict():
    ev = validate_event_set([1.0], [[2.0, 3.0]])
    assert ev.to_dict() == {"points": [1.0], "intervals": [[2.0, 3.0]]}


@st.composite
def event_sets(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    size = draw(st.integers(1, 50))
    rng = np.random.default_rng(seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EventMergeWarning)
        pts, ivs, a, b = random_event_set(rng, size)
        return validate_event_set(pts, ivs, t_start=a, t_end=b), a, b


@settings(max_examples=150, deadline=None)
@given(event_sets(), st.lists(st.floats(0, 1), max_size=20))
def test_clock_laws_hold(case, fractions):
    ev, a, b = case
    extra = [a + f * (b - a) for f in fractions]
    assert clock_law_violations(ev, a, b, extra) == []


@settings(max_examples=100, deadline=None)
@given(event_sets())
def test_normalization_is_idempotent(case):
    ev, a, b = case
    again = validate_event_set(ev.points, ev.intervals, t_start=a, t_end=b)
    assert again == ev


def test_law_checker_catches_a_wrong_clock(monkeypatch):
    ev = validate_event_set([1.0], [[2.0, 3.0]])

    def broken(events, t):
        e = events.piece(t)
        return INF if e is None else e.hi  # right end instead of t

    monkeypatch.setattr(clock_laws, "clock_eval", broken)
    assert clock_law_violations(ev, 0.0, 4.0)
