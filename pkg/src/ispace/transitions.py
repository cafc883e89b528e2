"""Named library of transition functions.

A transition is any callable ``f(s, ctx)`` returning the patient's state at
time ``s`` (a :class:`~ispace.core.StateVector`, or just the proper value when
activations and goods stay put). ``ctx`` is the engine's evolution context:
it exposes the window start ``ctx.t1``, the pre-window state ``ctx.state``,
the occurrences being applied, the history accessor ``ctx.hist(tau, e)``, a
seeded generator ``ctx.rng()`` and a per-window scratch ``ctx.cache``.

Library entries are frozen dataclasses so models built from them compare
structurally and serialize by name.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from typing import Any, Callable, Mapping

from .core import StateVector
from .errors import UndefinedAt, ValidationError

REGISTRY: dict[str, type] = {}


def register(cls):
    REGISTRY[cls.name] = cls
    return cls


def _tuplify(x):
    if isinstance(x, (list, tuple)):
        return tuple(_tuplify(v) for v in x)
    return x


def _listify(x):
    if isinstance(x, tuple):
        return [_listify(v) for v in x]
    if hasattr(x, "to_dict"):
        return x.to_dict()
    return x


class Named:
    """Mixin giving dataclass transitions a ``{"name", "params"}`` form."""

    name = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "params": {f.name: _listify(getattr(self, f.name)) for f in fields(self)}}

    @classmethod
    def from_params(cls, params: Mapping[str, Any]):
        return cls(**{k: _tuplify(v) for k, v in params.items()})


def transition_from_dict(d: Mapping[str, Any]):
    name = d.get("name")
    if name not in REGISTRY:
        raise ValidationError(f"unknown transition {name!r}; known: {sorted(REGISTRY)}", code="unknown-transition")
    try:
        return REGISTRY[name].from_params(d.get("params", {}))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"bad parameters for transition {name!r}: {exc}") from None


def _applied(s: float, ctx, lag: float) -> bool:
    return s >= ctx.t1 + lag - 1e-9


# -- right-hand sides and maps ----------------------------------------------

@dataclass(frozen=True)
class Linear(Named):
    """``x -> A x + b`` (used both as an ODE right-hand side and as a map)."""

    name = "linear"
    A: tuple[tuple[float, ...], ...]
    b: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "A", tuple(tuple(float(a) for a in row) for row in self.A))
        b = tuple(float(v) for v in self.b) or (0.0,) * len(self.A)
        if len(b) != len(self.A) or any(len(row) != len(self.A) for row in self.A):
            raise ValueError("A must be square and match b")
        object.__setattr__(self, "b", b)

    def __call__(self, t, x):
        out = []
        for row, bi in zip(self.A, self.b):
            acc = 0.0
            for a, xi in zip(row, x):
                acc += a * xi
            out.append(acc + bi)
        return tuple(out)


@dataclass(frozen=True)
class Logistic(Named):
    """Componentwise ``x -> r x (1 - x)``."""

    name = "logistic"
    r: float

    def __call__(self, k, x):
        return tuple(self.r * v * (1.0 - v) for v in x)


FUNCTIONS: dict[str, type] = {"linear": Linear, "logistic": Logistic}


def function_from_dict(d: Mapping[str, Any]):
    kind = d.get("name")
    if kind not in FUNCTIONS:
        raise ValidationError(f"unknown function {kind!r}; known: {sorted(FUNCTIONS)}")
    return FUNCTIONS[kind].from_params(d.get("params", {}))


def _fn_to_dict(fn):
    if not hasattr(fn, "to_dict"):
        raise TypeError(f"{fn!r} is not a library function and cannot be serialized")
    return fn.to_dict()


# -- transitions ------------------------------------------------------------

@register
@dataclass(frozen=True)
class Constant(Named):
    """Keeps the state the patient had when the window opened."""

    name = "constant"

    def __call__(self, s, ctx):
        return ctx.state


def rk4_advance(F: Callable, t0: float, y0: tuple, s: float, h: float, start: tuple[int, tuple] | None = None):
    """Fixed-step classical Runge-Kutta from ``t0`` to ``s``.

    Full steps land on ``t0 + k*h``; a last partial step reaches ``s``.
    ``start=(k, y_k)`` resumes from a grid point already computed. Returns
    ``(y(s), (k_last, y_k_last))``.
    """
    n_full = int(math.floor((s - t0) / h + 1e-9))
    k, y = start if start is not None and start[0] <= n_full else (0, tuple(y0))
    while k < n_full:
        y = _rk4_step(F, t0 + k * h, y, h)
        k += 1
    grid = (k, y)
    rest = s - (t0 + k * h)
    if rest > 1e-12:
        y = _rk4_step(F, t0 + k * h, y, rest)
    return y, grid


def _rk4_step(F, t, y, h):
    k1 = F(t, y)
    k2 = F(t + h / 2, tuple(yi + h / 2 * ki for yi, ki in zip(y, k1)))
    k3 = F(t + h / 2, tuple(yi + h / 2 * ki for yi, ki in zip(y, k2)))
    k4 = F(t + h, tuple(yi + h * ki for yi, ki in zip(y, k3)))
    return tuple(yi + h / 6 * (a + 2 * b + 2 * c + d) for yi, a, b, c, d in zip(y, k1, k2, k3, k4))


@register
@dataclass(frozen=True)
class Ode(Named):
    """Integral form of ``x' = F(t, x)`` from the window start, by RK4 with step ``h``.

    The proper state is the real vector ``x``. Evaluations at increasing
    ``s`` inside one window resume from the last grid point.
    """

    name = "ode"
    rhs: Any
    h: float

    def __post_init__(self):
        if isinstance(self.rhs, Mapping):
            object.__setattr__(self, "rhs", function_from_dict(self.rhs))
        if not self.h > 0:
            raise ValueError(f"step must be positive, got {self.h}")

    def to_dict(self) -> dict:
        return {"name": self.name, "params": {"rhs": _fn_to_dict(self.rhs), "h": self.h}}

    @classmethod
    def from_params(cls, params):
        return cls(function_from_dict(params["rhs"]), float(params["h"]))

    def __call__(self, s, ctx):
        y0 = ctx.hist(ctx.t1, ctx.patient).proper
        y, grid = rk4_advance(self.rhs, ctx.t1, y0, s, self.h, ctx.cache.get("rk4"))
        ctx.cache["rk4"] = grid
        return y


@register
@dataclass(frozen=True)
class MapStep(Named):
    """One iteration ``x(k+1) = F(k, x(k))`` applied ``lag`` after the window opens."""

    name = "map"
    fn: Any
    lag: float = 1.0

    def __post_init__(self):
        if isinstance(self.fn, Mapping):
            object.__setattr__(self, "fn", function_from_dict(self.fn))

    def to_dict(self) -> dict:
        return {"name": self.name, "params": {"fn": _fn_to_dict(self.fn), "lag": self.lag}}

    @classmethod
    def from_params(cls, params):
        return cls(function_from_dict(params["fn"]), float(params.get("lag", 1.0)))

    def __call__(self, s, ctx):
        x = ctx.hist(ctx.t1, ctx.patient).proper
        if not _applied(s, ctx, self.lag):
            return x
        k = int(round(ctx.t1 - ctx.model.t_start))
        return tuple(float(v) for v in self.fn(k, x))


def parse_life_rule(rule: str) -> tuple[frozenset, frozenset]:
    """``"B3/S23"`` -> (birth counts, survival counts)."""
    try:
        b, s = rule.upper().split("/")
        if not (b.startswith("B") and s.startswith("S")):
            raise ValueError
        return frozenset(int(c) for c in b[1:]), frozenset(int(c) for c in s[1:])
    except ValueError:
        raise ValueError(f"rule must look like 'B3/S23', got {rule!r}") from None


@register
@dataclass(frozen=True)
class LifeLike(Named):
    """Outer-totalistic binary CA rule read off the cell's interaction agents."""

    name = "ca-rule"
    rule: str = "B3/S23"
    lag: float = 1.0

    def __post_init__(self):
        parse_life_rule(self.rule)

    def __call__(self, s, ctx):
        x = ctx.hist(ctx.t1, ctx.patient).proper
        if not _applied(s, ctx, self.lag):
            return x
        new = ctx.cache.get("life")
        if new is None:
            born, survive = parse_life_rule(self.rule)
            agents = ctx.model.interactions[ctx.occurrences[0].interaction].agents
            alive = sum(1 for a in agents if ctx.hist(ctx.t1, a).proper == 1)
            new = ctx.cache["life"] = int(alive in (survive if x == 1 else born))
        return new


@register
@dataclass(frozen=True)
class Consensus(Named):
    """Average of present, adjacent neighbours; unchanged when there are none.

    ``links`` pairs every potential neighbour with the entity holding the
    adjacency bit for that edge. ``presence`` lists ``(time, present)``
    changes for the node; ``toggled`` names the interactions whose activation
    follows presence.
    """

    name = "network-update"
    links: tuple[tuple[str, str], ...] = ()
    interaction: str = ""
    lag: float = 1.0
    presence: tuple[tuple[float, int], ...] = ()
    toggled: tuple[str, ...] = ()

    def _present(self, s: float) -> int | None:
        value = None
        for t, flag in self.presence:
            if t <= s + 1e-9:
                value = int(flag)
        return value

    def __call__(self, s, ctx):
        pre = ctx.hist(ctx.t1, ctx.patient)
        x = pre.proper
        if _applied(s, ctx, self.lag) and any(o.interaction == self.interaction for o in ctx.occurrences):
            vals = []
            for u, pair in self.links:
                try:
                    adjacent = ctx.hist(ctx.t1, pair).proper == 1
                    nb = ctx.hist(ctx.t1, u)
                except UndefinedAt:
                    continue
                # an absent neighbour is inactive as an agent of this update
                if adjacent and nb.activation.get(self.interaction, 0.0) != 0:
                    vals.append(nb.proper)
            if vals:
                x = math.fsum(vals) / len(vals)
        flag = self._present(s)
        if flag is None or not self.toggled:
            return x
        return StateVector({**pre.activation, **{i: float(flag) for i in self.toggled}}, pre.goods, x)


@register
@dataclass(frozen=True)
class EdgeIndicator(Named):
    """Adjacency bit ``1`` iff the edge is present at ``s``.

    ``changes`` lists ``(time, present)`` pairs; before the first change the
    bit keeps its value from the window start.
    """

    name = "matr"
    changes: tuple[tuple[float, int], ...] = ()

    def __call__(self, s, ctx):
        value = ctx.hist(ctx.t1, ctx.patient).proper
        for t, flag in self.changes:
            if t <= s + 1e-9:
                value = int(flag)
        return value


@register
@dataclass(frozen=True)
class Table(Named):
    """Lookup table from the pre-window proper value to the next one."""

    name = "table"
    entries: tuple[tuple[Any, Any], ...] = ()
    lag: float = 0.0

    def __call__(self, s, ctx):
        x = ctx.hist(ctx.t1, ctx.patient).proper
        if not _applied(s, ctx, self.lag):
            return x
        key = json.dumps(_listify(x), sort_keys=True)
        for k, v in self.entries:
            if json.dumps(_listify(k), sort_keys=True) == key:
                return v
        return x


@register
@dataclass(frozen=True)
class Ballistic(Named):
    """Free flight under constant acceleration ``g``.

    Goods of the arriving occurrence carry ``(position, velocity)``; the
    proper state is the position at ``s`` measured from the start time.
    """

    name = "ballistic"
    g: tuple[float, ...] = (0.0, 0.0, -9.81)

    def __call__(self, s, ctx):
        occ = ctx.occurrences[0]
        d = len(self.g)
        x0, v0 = occ.goods[:d], occ.goods[d:]
        dt = s - occ.t_s
        return tuple(x + v * dt + 0.5 * g * dt * dt for x, v, g in zip(x0, v0, self.g))


@register
@dataclass(frozen=True)
class RandomWalk(Named):
    """Adds one normal increment with standard deviation ``sigma`` per window."""

    name = "random-walk"
    sigma: float = 1.0

    def __call__(self, s, ctx):
        x = ctx.hist(ctx.t1, ctx.patient).proper
        step = ctx.cache.get("step")
        if step is None:
            step = ctx.cache["step"] = float(ctx.rng().normal(0.0, self.sigma))
        return x + step if s > ctx.t1 or ctx.end == ctx.t1 else x
