"""Occurrence machinery: clock specs, seeded streams, condition checks, goods.

Everything here is a pure function of a :class:`~ispace.core.Model`, a state
map ``{entity: StateVector}`` and explicitly passed :class:`RngStream` keys,
so the engine can call it in any order without changing results.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Callable, Iterable, Mapping

import numpy as np

from .clocks import DEFAULT_EPS, INF, TimeEventSet, arrival_from_ongoing, validate_event_set
from .errors import BadDistribution, NoGoodsComponent, OutOfRange, ValidationError

if TYPE_CHECKING:
    from .core import Model, StateVector

PURPOSES = ("start", "arrival", "ongoing", "goods", "evolution")


def _stable_hash(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "little")


@dataclass(frozen=True)
class RngStream:
    """Key of an independent random stream.

    ``owner`` is an interaction id (or a patient id for the ``evolution``
    purpose). Two streams with the same key produce the same numbers.
    """

    seed: int
    owner: str
    index: int
    purpose: str

    def __post_init__(self):
        if self.purpose not in PURPOSES:
            raise ValueError(f"unknown stream purpose {self.purpose!r}")

    def generator(self) -> np.random.Generator:
        key = (_stable_hash(self.owner), int(self.index), PURPOSES.index(self.purpose))
        return np.random.default_rng(np.random.SeedSequence(entropy=int(self.seed), spawn_key=key))


# -- distributions ----------------------------------------------------------

_ARITY = {"exponential": 1, "uniform": 2, "dirac": 1, "fixed-interval": 1}


def _check_params(kind: str, params: tuple) -> None:
    if kind not in _ARITY:
        raise BadDistribution(f"unknown distribution {kind!r}")
    if len(params) != _ARITY[kind]:
        raise BadDistribution(f"{kind} takes {_ARITY[kind]} parameter(s), got {len(params)}")
    if any(math.isnan(p) for p in params):
        raise BadDistribution(f"{kind} parameters contain NaN")
    if kind == "exponential" and not (0 < params[0] < INF):
        raise BadDistribution(f"exponential rate must be positive and finite, got {params[0]}")
    if kind == "uniform" and not (-INF < params[0] < params[1] < INF):
        raise BadDistribution(f"uniform needs a < b finite, got {params}")
    if kind == "dirac" and not math.isfinite(params[0]):
        raise BadDistribution(f"dirac location must be finite, got {params[0]}")
    if kind == "fixed-interval" and not params[0] > 0:
        raise BadDistribution(f"fixed-interval length must be positive, got {params[0]}")


@dataclass(frozen=True)
class Distribution:
    """One of ``exponential(rate)``, ``uniform(a, b)``, ``dirac(t0)``,
    ``fixed-interval(length)``.

    ``param_fn``, when given, maps the history accessor to fresh parameters
    at every draw.
    """

    kind: str
    params: tuple[float, ...]
    param_fn: Callable[[Any], Iterable[float]] | None = None

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        _check_params(self.kind, self.params)

    @classmethod
    def exponential(cls, rate: float) -> "Distribution":
        return cls("exponential", (rate,))

    @classmethod
    def uniform(cls, a: float, b: float) -> "Distribution":
        return cls("uniform", (a, b))

    @classmethod
    def dirac(cls, t0: float) -> "Distribution":
        return cls("dirac", (t0,))

    @classmethod
    def fixed_interval(cls, length: float) -> "Distribution":
        return cls("fixed-interval", (length,))

    def resolve(self, history=None) -> tuple[float, ...]:
        if self.param_fn is None:
            return self.params
        try:
            params = tuple(float(p) for p in self.param_fn(history))
        except BadDistribution:
            raise
        except Exception as exc:
            raise BadDistribution(f"parameter function failed: {exc}") from exc
        _check_params(self.kind, params)
        return params

    def draw(self, rng: np.random.Generator, history=None) -> float:
        params = self.resolve(history)
        if self.kind == "exponential":
            return float(rng.exponential(1.0 / params[0]))
        if self.kind == "uniform":
            return float(rng.uniform(params[0], params[1]))
        return params[0]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": [_num(p) for p in self.params]}


def _num(x: float):
    return "inf" if x == INF else x


# -- clock specs and run data -----------------------------------------------

@dataclass(frozen=True)
class ClockSpec:
    """Deterministic (``events``) or stochastic (``distribution``) clock.

    In ``interval`` mode a stochastic sample is widened to an interval whose
    length is drawn from ``length``. A stochastic ongoing clock takes no
    distribution: it is anchored at the arrival time.
    """

    events: TimeEventSet | None = None
    distribution: Distribution | None = None
    mode: str = "instant"
    length: Distribution | None = None

    def __post_init__(self):
        if self.mode not in ("instant", "interval"):
            raise ValidationError(f"unknown clock mode {self.mode!r}")
        if self.events is not None and self.distribution is not None:
            raise ValidationError("a clock is either deterministic or stochastic, not both")
        if self.events is None and self.mode == "interval" and self.length is None:
            raise ValidationError("stochastic interval clocks need a length distribution")

    @property
    def deterministic(self) -> bool:
        return self.events is not None

    @classmethod
    def fixed(cls, points=(), intervals=(), **bounds) -> "ClockSpec":
        return cls(events=validate_event_set(points, intervals, **bounds))

    @classmethod
    def never(cls) -> "ClockSpec":
        return cls(events=TimeEventSet())

    def to_dict(self) -> dict:
        if self.events is not None:
            return {"events": self.events.to_dict()}
        d: dict[str, Any] = {"mode": self.mode}
        if self.distribution is not None:
            d["distribution"] = self.distribution.to_dict()
        if self.length is not None:
            d["length"] = self.length.to_dict()
        return d


class Roles:
    """Neighborhood made of the entities playing a role in the interaction."""

    def __call__(self, model: "Model", iid: str, t: float, states) -> Iterable[str]:
        return model.interactions[iid].entities

    def __eq__(self, other):
        return isinstance(other, Roles)

    def __hash__(self):
        return hash(Roles)

    def __repr__(self):
        return "Roles()"


@dataclass(frozen=True)
class Fixed:
    """Neighborhood given by a constant set of entities."""

    entities: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "entities", tuple(sorted(self.entities)))

    def __call__(self, model, iid, t, states) -> Iterable[str]:
        return self.entities


@dataclass(frozen=True)
class NormalGoods:
    """Resamples goods from a multivariate normal at every start."""

    mean: tuple[float, ...]
    cov: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "mean", tuple(float(m) for m in self.mean))
        object.__setattr__(self, "cov", tuple(tuple(float(c) for c in row) for row in self.cov))
        n = len(self.mean)
        if len(self.cov) != n or any(len(row) != n for row in self.cov):
            raise ValidationError("covariance must be square and match the mean")

    def __call__(self, value, rng: np.random.Generator):
        sample = rng.multivariate_normal(np.array(self.mean), np.array(self.cov))
        return tuple(float(x) for x in sample)


@dataclass(frozen=True)
class RunData:
    """What it takes to run one interaction.

    With a deterministic ongoing clock the arrival is derived from it;
    otherwise ``arrival`` is a delay added to the start time.
    """

    start: ClockSpec = ClockSpec.never()
    ongoing: ClockSpec = ClockSpec()
    arrival: Distribution = Distribution("dirac", (0.0,))
    neighborhood: Callable = Roles()
    goods: Callable | None = None


def check_run_data(rd: RunData, t_start: float, t_end: float, *, path: str = "run_data") -> None:
    """Build-time checks on one interaction's run data."""
    from .core import _check_start_arrival

    if not isinstance(rd, RunData):
        raise ValidationError(f"expected RunData, got {type(rd).__name__}", path=path)
    for name in ("start", "ongoing"):
        spec = getattr(rd, name)
        if not isinstance(spec, ClockSpec):
            raise ValidationError(f"{name} must be a ClockSpec", path=f"{path}.{name}")
        if spec.deterministic and spec.events:
            lo, hi = spec.events.min(), spec.events.max()
            if lo < t_start - DEFAULT_EPS or hi > t_end + DEFAULT_EPS:
                raise OutOfRange(f"{name} events [{lo}, {hi}] outside [{t_start}, {t_end}]", path=f"{path}.{name}")
    if not rd.start.deterministic and rd.start.distribution is None:
        raise ValidationError("a stochastic start clock needs a distribution", path=f"{path}.start")
    if rd.arrival.kind not in ("dirac", "exponential", "uniform", "fixed-interval"):
        raise ValidationError("bad arrival distribution", path=f"{path}.arrival")
    if rd.arrival.param_fn is None and rd.arrival.kind in ("dirac", "uniform") and rd.arrival.params[0] < 0:
        raise ValidationError("arrival delays must be non-negative", path=f"{path}.arrival",
                              code="bad-distribution")
    if not callable(rd.neighborhood):
        raise ValidationError("neighborhood rule must be callable", path=f"{path}.neighborhood")
    if rd.start.deterministic and rd.ongoing.deterministic:
        _check_start_arrival(rd.start.events, rd.ongoing.events, path)


# -- occurrences ------------------------------------------------------------

@dataclass(frozen=True)
class OccurrenceRecord:
    interaction: str
    index: int
    t_s: float
    t_a: float
    ongoing: float | tuple[float, float]
    goods: Any

    @property
    def ongoing_start(self) -> float:
        return self.ongoing[0] if isinstance(self.ongoing, tuple) else self.ongoing

    def to_dict(self) -> dict:
        from .core import _thaw

        ongoing = list(self.ongoing) if isinstance(self.ongoing, tuple) else self.ongoing
        return {"interaction": self.interaction, "index": self.index, "t_s": self.t_s,
                "t_a": self.t_a, "ongoing": ongoing, "goods": _thaw(self.goods)}


def sample_start(model: "Model", iid: str, t: float, history, rng: RngStream,
                 eps: float = DEFAULT_EPS) -> float | tuple[float, float] | None:
    """Next start event at-or-after ``t``.

    Returns a point, an interval ``(lo, hi)`` or ``None`` when the clock
    never fires again before ``t_end``. Exponential and uniform starts are
    waiting times counted from ``t``; ``dirac(t0)`` is the absolute instant
    ``t0``; ``fixed-interval(l)`` fires every ``l`` time units.
    """
    spec = model.run_data[iid].start
    if spec.deterministic:
        e = spec.events.piece(t, eps)
        if e is None:
            return None
        if e.is_point:
            return e.lo
        return (max(e.lo, t), e.hi) if e.hi - max(e.lo, t) > eps else max(e.lo, t)
    dist = spec.distribution
    gen = rng.generator()
    if dist.kind == "dirac":
        lo = dist.resolve(history)[0]
        if lo < t - eps:
            return None
    else:
        lo = t + dist.draw(gen, history)
    if lo > model.t_end + eps:
        return None
    lo = min(lo, model.t_end)
    if spec.mode == "instant":
        return lo
    length = spec.length.draw(gen, history)
    hi = min(lo + length, model.t_end)
    return (lo, hi) if hi - lo > eps else lo


def sample_arrival(model: "Model", iid: str, t_s: float, history, rng: RngStream,
                   eps: float = DEFAULT_EPS) -> float:
    """Arrival time for a start at ``t_s``; ``inf`` when it falls past ``t_end``."""
    rd = model.run_data[iid]
    if rd.ongoing.deterministic:
        t_a = arrival_from_ongoing(rd.ongoing.events, t_s)
        # an ongoing interval that began before t_s cannot carry this start
        return t_a if t_a >= t_s - eps else INF
    delay = rd.arrival.draw(rng.generator(), history)
    if delay < 0:
        raise BadDistribution(f"negative arrival delay {delay}")
    t_a = t_s + delay
    return INF if t_a > model.t_end + eps else min(t_a, model.t_end)


def sample_ongoing(model: "Model", iid: str, t_a: float, history, rng: RngStream,
                   eps: float = DEFAULT_EPS) -> float | tuple[float, float]:
    """Ongoing event anchored at ``t_a``: a point, or ``(t_a, hi)`` clipped to ``t_end``."""
    spec = model.run_data[iid].ongoing
    if spec.deterministic:
        e = spec.events.piece(t_a, eps)
        if e is None or e.is_point:
            return t_a
        return (t_a, e.hi) if e.hi - t_a > eps else t_a
    if spec.mode == "instant":
        return t_a
    length = spec.length.draw(rng.generator(), history)
    hi = min(t_a + length, model.t_end)
    return (t_a, hi) if hi - t_a > eps else t_a


def zero_resources_hit(model: "Model", states: Mapping[str, "StateVector"], iid: str) -> bool:
    """Whether the propagator of ``iid`` currently carries zero resources."""
    it = model.interactions[iid]
    if it.zero_set is None:
        return False
    return bool(it.zero_set(states[it.propagator].goods[iid]))


def effective_activation(model: "Model", states: Mapping[str, "StateVector"], iid: str, e: str) -> float:
    """Activation of ``e`` for ``iid`` after the zero-resource law."""
    it = model.interactions[iid]
    if e == it.patient and zero_resources_hit(model, states, iid):
        return 0.0
    return states[e].activation.get(iid, 0.0)


def active_entities(model: "Model", states: Mapping[str, "StateVector"]) -> frozenset:
    """Entities active for at least one interaction."""
    hit = {iid for iid, it in model.interactions.items()
           if it.zero_set is not None and zero_resources_hit(model, states, iid)}
    out = set()
    for e, sv in states.items():
        for iid, v in sv.activation.items():
            if v != 0 and not (iid in hit and model.interactions[iid].patient == e):
                out.add(e)
                break
    return frozenset(out)


def check_start_conditions(model: "Model", iid: str, t_s: float, states) -> bool:
    """Some agent (vacuous with no agents) and the propagator are active."""
    it = model.interaction(iid)
    if it.agents and not any(effective_activation(model, states, iid, a) != 0 for a in it.agents):
        return False
    return effective_activation(model, states, iid, it.propagator) != 0


def check_arrival_conditions(model: "Model", iid: str, t_a: float, states) -> bool:
    """Propagator and patient active, goods outside the zero resources."""
    it = model.interaction(iid)
    if zero_resources_hit(model, states, iid):
        return False
    return (effective_activation(model, states, iid, it.propagator) != 0
            and effective_activation(model, states, iid, it.patient) != 0)


def neighborhood(model: "Model", iid: str, t: float, states, *, active: frozenset | None = None) -> frozenset:
    """Evaluate the interaction's neighborhood rule and clamp it between the
    active role entities and the globally active entities."""
    it = model.interaction(iid)
    if active is None:
        active = active_entities(model, states)
    raw = set(model.run_data[iid].neighborhood(model, iid, t, states))
    lower = {e for e in it.entities if effective_activation(model, states, iid, e) != 0}
    return frozenset((raw | lower) & active)


def extract_goods(model: "Model", iid: str, t_s: float, states, rng: RngStream):
    """Goods carried by the propagator at ``t_s``, optionally resampled."""
    it = model.interaction(iid)
    prop = states[it.propagator]
    if iid not in prop.goods:
        raise NoGoodsComponent(f"propagator {it.propagator!r} has no goods for {iid!r}")
    value = prop.goods[iid]
    spec = model.run_data[iid].goods
    if spec is not None:
        value = spec(value, rng.generator())
    return value
