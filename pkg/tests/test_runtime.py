import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ispace import (ClockSpec, Distribution, Fixed, Interaction, NormalGoods, RngStream, RunData, Space,
                    StateVector, ZeroSet, build_model)
from ispace.demos import stone_model
from ispace.errors import BadDistribution, NoGoodsComponent, ValidationError
from ispace.runtime import (active_entities, check_arrival_conditions, check_start_conditions,
                            effective_activation, extract_goods, neighborhood, sample_arrival, sample_ongoing,
                            sample_start)

INF = math.inf


def model_with(rd, *, t_end=10.0, zero=None, goods=1.0, act=None):
    act = {"a": 1.0, "r": 1.0, "p": 1.0, **(act or {})}
    it = Interaction("i", ("a",), "r", "t", "p", Space.scalar(), zero)
    return build_model({
        "entities": {"a": Space(), "r": Space(), "p": Space(), "q": Space()},
        "t_start": 0.0, "t_end": t_end,
        "interactions": {"i": it},
        "run_data": {"i": rd},
        "initial_states": {
            "a": {"activation": {"i": act["a"]}},
            "r": {"activation": {"i": act["r"]}, "goods": {"i": goods}},
            "p": {"activation": {"i": act["p"]}},
            "q": {"activation": {"i": 1.0}},
        },
    })


def stream(index=0, purpose="start", seed=1):
    return RngStream(seed, "i", index, purpose)


def test_rng_stream_is_keyed():
    a = stream().generator().random(3)
    assert np.array_equal(a, stream().generator().random(3))
    assert not np.array_equal(a, stream(index=1).generator().random(3))
    assert not np.array_equal(a, stream(purpose="arrival").generator().random(3))
    assert not np.array_equal(a, stream(seed=2).generator().random(3))
    with pytest.raises(ValueError):
        RngStream(0, "i", 0, "colour")


@pytest.mark.parametrize("kind,params", [("exponential", (0.0,)), ("exponential", (INF,)),
                                         ("uniform", (1.0, 1.0)), ("uniform", (0.0,)),
                                         ("dirac", (INF,)), ("fixed-interval", (-1.0,)),
                                         ("gamma", (1.0,)), ("exponential", (math.nan,))])
def test_bad_distributions(kind, params):
    with pytest.raises(BadDistribution):
        Distribution(kind, params)


def test_history_dependent_parameters_are_checked():
    dist = Distribution("exponential", (1.0,), param_fn=lambda h: (-1.0,))
    with pytest.raises(BadDistribution):
        dist.draw(np.random.default_rng(0))


def test_deterministic_start_samples():
    model = model_with(RunData(start=ClockSpec.fixed([2.0], [(4.0, 5.0)]), ongoing=ClockSpec()))
    assert sample_start(model, "i", 0.0, None, stream()) == 2.0
    assert sample_start(model, "i", 2.0, None, stream()) == 2.0
    assert sample_start(model, "i", 3.0, None, stream()) == (4.0, 5.0)
    assert sample_start(model, "i", 4.5, None, stream()) == (4.5, 5.0)
    assert sample_start(model, "i", 5.5, None, stream()) is None


def test_start_past_the_end_is_none():
    model = model_with(RunData(start=ClockSpec(distribution=Distribution.uniform(5.0, 6.0))), t_end=1.0)
    assert all(sample_start(model, "i", 0.0, None, stream(k)) is None for k in range(20))


def test_dirac_start_is_absolute():
    model = model_with(RunData(start=ClockSpec(distribution=Distribution.dirac(3.0))))
    assert sample_start(model, "i", 1.0, None, stream()) == 3.0
    assert sample_start(model, "i", 3.5, None, stream()) is None


def test_exponential_waiting_time_mean():
    rate = 2.0
    model = model_with(RunData(start=ClockSpec(distribution=Distribution.exponential(rate))), t_end=1e9)
    n = 10_000
    waits = np.array([sample_start(model, "i", 1.0, None, stream(k)) - 1.0 for k in range(n)])
    # mean and sd of an exponential are both 1/rate
    assert abs(waits.mean() - 1 / rate) < 3 * (1 / rate) / math.sqrt(n)
    assert waits.min() >= 0


def test_interval_mode_start():
    spec = ClockSpec(distribution=Distribution.dirac(1.0), mode="interval", length=Distribution.fixed_interval(2.0))
    model = model_with(RunData(start=spec))
    assert sample_start(model, "i", 0.0, None, stream()) == (1.0, 3.0)


def test_replay_is_identical():
    model = model_with(RunData(start=ClockSpec(distribution=Distribution.exponential(1.0)),
                               arrival=Distribution.uniform(0.0, 1.0)), t_end=1e6)
    first = [(sample_start(model, "i", 0.0, None, stream(k)), sample_arrival(model, "i", 1.0, None, stream(k, "arrival")))
             for k in range(50)]
    again = [(sample_start(model, "i", 0.0, None, stream(k)), sample_arrival(model, "i", 1.0, None, stream(k, "arrival")))
             for k in range(50)]
    assert first == again


def test_arrival_from_deterministic_ongoing():
    rd = RunData(start=ClockSpec.fixed([1.0]), ongoing=ClockSpec.fixed([], [(1.0, 2.0)]))
    model = model_with(rd)
    assert sample_arrival(model, "i", 1.0, None, stream(purpose="arrival")) == 1.0
    assert sample_ongoing(model, "i", 1.0, None, stream(purpose="ongoing")) == (1.0, 2.0)
    # an ongoing interval already under way cannot carry a later start
    assert sample_arrival(model, "i", 1.5, None, stream(purpose="arrival")) == INF


def test_arrival_delay_and_cutoff():
    model = model_with(RunData(start=ClockSpec.fixed([1.0]), arrival=Distribution.dirac(0.5)), t_end=2.0)
    assert sample_arrival(model, "i", 1.0, None, stream(purpose="arrival")) == 1.5
    assert sample_arrival(model, "i", 1.8, None, stream(purpose="arrival")) == INF
    assert sample_ongoing(model, "i", 1.5, None, stream(purpose="ongoing")) == 1.5


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.floats(0, 9))
def test_start_never_after_arrival(seed, t):
    rd = RunData(start=ClockSpec(distribution=Distribution.exponential(1.0)), arrival=Distribution.exponential(3.0))
    model = model_with(rd)
    t_s = sample_start(model, "i", t, None, RngStream(seed, "i", 0, "start"))
    if t_s is None:
        return
    t_a = sample_arrival(model, "i", t_s, None, RngStream(seed, "i", 0, "arrival"))
    assert t <= t_s <= t_a
    if t_a != INF:
        on = sample_ongoing(model, "i", t_a, None, RngStream(seed, "i", 0, "ongoing"))
        assert t_a <= (on[0] if isinstance(on, tuple) else on)


def test_negative_arrival_delay_rejected():
    with pytest.raises(ValidationError):
        model_with(RunData(arrival=Distribution.dirac(-1.0)))


def test_start_and_arrival_conditions():
    model = model_with(RunData())
    s = model.initial_states
    assert check_start_conditions(model, "i", 0.0, s)
    assert check_arrival_conditions(model, "i", 0.0, s)
    off_agent = {**s, "a": s["a"].with_activation(i=0.0)}
    assert not check_start_conditions(model, "i", 0.0, off_agent)
    assert check_arrival_conditions(model, "i", 0.0, off_agent)
    off_patient = {**s, "p": s["p"].with_activation(i=0.0)}
    assert check_start_conditions(model, "i", 0.0, off_patient)
    assert not check_arrival_conditions(model, "i", 0.0, off_patient)


def test_no_agents_only_needs_the_propagator():
    it = Interaction("j", (), "r", "t", "p")
    model = build_model({
        "entities": ["r", "p"], "t_start": 0, "t_end": 1, "interactions": {"j": it},
        "initial_states": {"r": {"activation": {"j": 1.0}, "goods": {"j": None}}, "p": {}},
    })
    assert check_start_conditions(model, "j", 0.0, model.initial_states)
    off = {**model.initial_states, "r": model.initial_states["r"].with_activation(j=0.0)}
    assert not check_start_conditions(model, "j", 0.0, off)


def test_zero_resources_silence_the_patient():
    model = model_with(RunData(), zero=ZeroSet("equals", 0.0), goods=1.0)
    s = dict(model.initial_states)
    s["r"] = s["r"].with_goods(i=0.0)
    assert effective_activation(model, s, "i", "p") == 0.0
    assert effective_activation(model, s, "i", "r") == 1.0
    assert not check_arrival_conditions(model, "i", 0.0, s)
    assert "p" not in active_entities(model, s)


def test_neighborhood_is_clamped():
    rd = RunData(neighborhood=Fixed(("q",)))
    model = model_with(rd, act={"a": 0.0})
    nb = neighborhood(model, "i", 0.0, model.initial_states)
    # active roles always included, inactive agent left out, extra entity kept
    assert nb == frozenset({"r", "p", "q"})
    s = {**model.initial_states, "q": StateVector({"i": 0.0})}
    assert "q" not in neighborhood(model, "i", 0.0, s)


def test_extract_goods():
    model = model_with(RunData(), goods=7.0)
    assert extract_goods(model, "i", 0.0, model.initial_states, stream(purpose="goods")) == 7.0
    broken = {**model.initial_states, "r": StateVector({"i": 1.0}, {}, None)}
    with pytest.raises(NoGoodsComponent):
        extract_goods(model, "i", 0.0, broken, stream(purpose="goods"))


def test_normal_goods_are_reproducible():
    cov = tuple(tuple(0.01 if r == c else 0.0 for c in range(6)) for r in range(6))
    model = stone_model(spread=cov)
    s = model.initial_states
    a = extract_goods(model, "throw", 0.0, s, RngStream(5, "throw", 0, "goods"))
    b = extract_goods(model, "throw", 0.0, s, RngStream(5, "throw", 0, "goods"))
    c = extract_goods(model, "throw", 0.0, s, RngStream(6, "throw", 0, "goods"))
    assert a == b != c
    assert len(a) == 6
    with pytest.raises(ValidationError):
        NormalGoods((0.0, 0.0), ((1.0,),))
