"""Constructors turning classical models into interaction spaces.

* :func:`embed_ode`: one self-interacting entity whose transition integrates
  the ODE from the start time.
* :func:`embed_discrete_map`: the same layout with unit windows at integer
  times, applying one iteration per window.
* :func:`embed_ca`: one entity and one local interaction per cell.
* :func:`embed_network`: node entities, adjacency-bit entities for every pair
  that is ever an edge, and a trivial shared propagator driving the bits.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping

from .core import Interaction, Model, Space, StateVector, build_model
from .runtime import ClockSpec, Distribution, RunData
from .transitions import (Consensus, EdgeIndicator, LifeLike, MapStep, Ode, _applied,
                          parse_life_rule)

SELF = "i"
PATIENT = "p"
SHARED = "one"


@dataclass(frozen=True)
class OdeSystem:
    """``x'(t) = F(t, x)`` with ``x(t_start) = x0``."""

    F: Callable
    x0: tuple[float, ...]

    def __post_init__(self):
        x0 = self.x0 if isinstance(self.x0, (tuple, list)) else (self.x0,)
        object.__setattr__(self, "x0", tuple(float(v) for v in x0))

    @property
    def dim(self) -> int:
        return len(self.x0)


@dataclass(frozen=True)
class DiscreteMap:
    """``x(k+1) = F(k, x(k))`` for ``k < N``."""

    F: Callable
    x0: tuple[float, ...]
    N: int

    def __post_init__(self):
        x0 = self.x0 if isinstance(self.x0, (tuple, list)) else (self.x0,)
        object.__setattr__(self, "x0", tuple(float(v) for v in x0))
        if self.N < 1:
            raise ValueError(f"need at least one step, got N={self.N}")


MOORE = tuple((dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0))
VON_NEUMANN = ((-1, 0), (0, -1), (0, 1), (1, 0))


@dataclass(frozen=True)
class CaSpec:
    """Two-dimensional cellular automaton.

    ``rule`` is a life-like ``"B3/S23"`` string or a callable
    ``(state, neighbour_states) -> state``. ``mode="async"`` replaces the
    synchronous integer clocks with independent exponential clocks of
    ``rate`` per cell.
    """

    grid: tuple[tuple[Any, ...], ...]
    rule: Any = "B3/S23"
    generations: int = 1
    neighborhood: tuple[tuple[int, int], ...] = MOORE
    torus: bool = True
    states: tuple = (0, 1)
    mode: str = "sync"
    rate: float = 1.0
    t_start: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(tuple(row) for row in self.grid))
        if isinstance(self.neighborhood, str):
            table = {"moore": MOORE, "von-neumann": VON_NEUMANN}
            object.__setattr__(self, "neighborhood", table[self.neighborhood])
        if self.mode not in ("sync", "async"):
            raise ValueError(f"mode must be 'sync' or 'async', got {self.mode!r}")
        if not self.grid or len({len(r) for r in self.grid}) != 1:
            raise ValueError("grid must be a non-empty rectangle")

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.grid), len(self.grid[0])


@dataclass(frozen=True)
class NetworkSpec:
    """Consensus dynamics on an undirected graph whose edges may change.

    ``edges`` are present from the start; ``edge_changes`` lists
    ``(step, u, v, present)``. ``presence`` maps a node to ``(step, present)``
    changes of its membership in the active node set.
    """

    nodes: tuple[str, ...]
    x0: Mapping[str, float]
    edges: tuple[tuple[str, str], ...] = ()
    steps: int = 1
    edge_changes: tuple[tuple[int, str, str, int], ...] = ()
    presence: Mapping[str, tuple[tuple[int, int], ...]] = field(default_factory=dict)
    schedule: str = "sync"
    rate: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(str(v) for v in self.nodes))
        known = set(self.nodes)
        for pair in list(self.edges) + [c[1:3] for c in self.edge_changes]:
            u, v = pair
            if u not in known or v not in known or u == v:
                raise ValueError(f"edge {pair} must join two distinct declared nodes")
        if self.schedule not in ("sync", "async"):
            raise ValueError(f"schedule must be 'sync' or 'async', got {self.schedule!r}")


def pair_id(u: str, v: str) -> str:
    a, b = sorted((u, v))
    return f"{a}~{b}"


def cell_id(r: int, c: int) -> str:
    return f"c{r}_{c}"


def _integer_clocks(t0: float, n: int) -> ClockSpec:
    return ClockSpec.fixed([t0 + k for k in range(n)])


def embed_ode(ode: OdeSystem, t_span: tuple[float, float] = (0.0, 1.0), h: float = 1e-3) -> Model:
    if not h > 0:
        raise ValueError(f"step must be positive, got {h}")
    t0, t1 = float(t_span[0]), float(t_span[1])
    inter = Interaction(SELF, (PATIENT,), PATIENT, "ds", PATIENT, Space.scalar())
    return build_model({
        "entities": {PATIENT: Space.real(ode.dim)},
        "t_start": t0, "t_end": t1, "types": {"ds"},
        "interactions": {SELF: inter},
        "run_data": {SELF: RunData(start=ClockSpec.fixed([t0]), ongoing=ClockSpec.fixed(intervals=[(t0, t1)]))},
        "delta": t1 - t0,
        "transitions": {PATIENT: Ode(ode.F, h)},
        "initial_states": {PATIENT: StateVector({SELF: 1.0}, {SELF: 0.0}, ode.x0)},
    })


def embed_discrete_map(dmap: DiscreteMap) -> Model:
    clocks = _integer_clocks(0.0, dmap.N)
    inter = Interaction(SELF, (PATIENT,), PATIENT, "ds", PATIENT, Space.scalar())
    return build_model({
        "entities": {PATIENT: Space.real(len(dmap.x0))},
        "t_start": 0.0, "t_end": float(dmap.N), "types": {"ds"},
        "interactions": {SELF: inter},
        "run_data": {SELF: RunData(start=clocks, ongoing=clocks)},
        "delta": 1.0,
        "transitions": {PATIENT: MapStep(dmap.F, 1.0)},
        "initial_states": {PATIENT: StateVector({SELF: 1.0}, {SELF: 0.0}, dmap.x0)},
    })


@dataclass(frozen=True)
class LocalRule:
    """Arbitrary CA rule ``(state, neighbour_states) -> state`` (not serializable)."""

    fn: Callable
    lag: float = 1.0

    def __call__(self, s, ctx):
        x = ctx.hist(ctx.t1, ctx.patient).proper
        if not _applied(s, ctx, self.lag):
            return x
        agents = ctx.model.interactions[ctx.occurrences[0].interaction].agents
        return self.fn(x, tuple(ctx.hist(ctx.t1, a).proper for a in agents))


def embed_ca(spec: CaSpec) -> Model:
    rows, cols = spec.shape
    sync = spec.mode == "sync"
    lag = 1.0 if sync else 0.0
    if isinstance(spec.rule, str):
        parse_life_rule(spec.rule)
        make_rule = lambda: LifeLike(spec.rule, lag)
    else:
        make_rule = lambda: LocalRule(spec.rule, lag)

    entities, interactions, transitions = {}, {}, {}
    activation: dict[str, dict[str, float]] = {}
    space = Space.of_labels(*spec.states)
    for r in range(rows):
        for c in range(cols):
            e = cell_id(r, c)
            entities[e] = space
            transitions[e] = make_rule()
            activation.setdefault(e, {})[f"u{r}_{c}"] = 1.0
    for r in range(rows):
        for c in range(cols):
            agents = []
            for dr, dc in spec.neighborhood:
                rr, cc = r + dr, c + dc
                if spec.torus:
                    rr, cc = rr % rows, cc % cols
                elif not (0 <= rr < rows and 0 <= cc < cols):
                    continue
                agents.append(cell_id(rr, cc))
            iid = f"u{r}_{c}"
            e = cell_id(r, c)
            interactions[iid] = Interaction(iid, tuple(agents), e, "ca", e)
            for a in agents:
                activation[a][iid] = 1.0

    t0, t_end = float(spec.t_start), float(spec.t_start) + spec.generations
    if sync:
        clocks = _integer_clocks(t0, spec.generations)
        rd = RunData(start=clocks, ongoing=clocks)
    else:
        rd = RunData(start=ClockSpec(distribution=Distribution.exponential(spec.rate)), ongoing=ClockSpec())
    initial = {}
    for r in range(rows):
        for c in range(cols):
            e = cell_id(r, c)
            initial[e] = StateVector(activation[e], {f"u{r}_{c}": 0}, spec.grid[r][c])
    return build_model({
        "entities": entities, "t_start": t0, "t_end": t_end, "types": {"ca"},
        "interactions": interactions,
        "run_data": {iid: rd for iid in interactions},
        "delta": 1.0 if sync else 0.0,
        "transitions": transitions,
        "initial_states": initial,
    })


def _edge_history(spec: NetworkSpec) -> dict[str, tuple[int, tuple[tuple[float, int], ...]]]:
    """Initial bit and change list for every pair that is ever an edge."""
    out: dict[str, list] = {}
    for u, v in spec.edges:
        out[pair_id(u, v)] = [1, []]
    for step, u, v, present in sorted(spec.edge_changes, key=lambda c: c[0]):
        out.setdefault(pair_id(u, v), [0, []])[1].append((float(step), int(bool(present))))
    return {k: (v[0], tuple(v[1])) for k, v in sorted(out.items())}


def embed_network(spec: NetworkSpec) -> Model:
    sync = spec.schedule == "sync"
    lag = 1.0 if sync else 0.0
    edges = _edge_history(spec)
    neighbours: dict[str, list[tuple[str, str]]] = {v: [] for v in spec.nodes}
    for pid in edges:
        u, v = pid.split("~")
        neighbours[u].append((v, pid))
        neighbours[v].append((u, pid))

    def present_at_start(v: str) -> int:
        flag = 1
        for step, p in spec.presence.get(v, ()):
            if step <= 0:
                flag = int(bool(p))
        return flag

    entities: dict[str, Space] = {SHARED: Space()}
    interactions: dict[str, Interaction] = {}
    activation: dict[str, dict[str, float]] = {SHARED: {}}
    goods: dict[str, dict[str, Any]] = {SHARED: {}}
    transitions: dict[str, Any] = {}
    for v in spec.nodes:
        entities[v] = Space.scalar()
        activation[v] = {}
        goods[v] = {}
    for pid, (bit, changes) in edges.items():
        entities[pid] = Space.of_labels(0, 1)
        iid = f"m:{pid}"
        interactions[iid] = Interaction(iid, (pid,), SHARED, "matr", pid, Space.scalar())
        activation[pid] = {iid: 1.0}
        goods[pid] = {}
        activation[SHARED][iid] = 1.0
        goods[SHARED][iid] = 1.0
        transitions[pid] = EdgeIndicator(changes)

    for v in spec.nodes:
        links = tuple(sorted(neighbours[v]))
        iid = f"n:{v}"
        agents = tuple(u for u, _ in links) + tuple(pid for _, pid in links)
        interactions[iid] = Interaction(iid, agents, v, "node", v, Space.scalar())
        flag = float(present_at_start(v))
        activation[v][iid] = flag
        goods[v][iid] = 0.0
        for u, pid in links:
            activation[u][iid] = float(present_at_start(u))
            activation[pid][iid] = 1.0
        toggled: tuple[str, ...] = ()
        presence = tuple((float(s), int(bool(p))) for s, p in spec.presence.get(v, ()))
        if v in spec.presence:
            pres = f"pres:{v}"
            interactions[pres] = Interaction(pres, (), SHARED, "presence", v, Space.scalar())
            activation[SHARED][pres] = 1.0
            goods[SHARED][pres] = 1.0
            activation[v][pres] = 1.0
            toggled = (iid,) + tuple(f"n:{u}" for u, _ in links)
        transitions[v] = Consensus(links, iid, lag, presence, toggled)
    transitions[SHARED] = None

    t_end = float(spec.steps)
    clocks = _integer_clocks(0.0, spec.steps)
    run_data = {}
    for iid in interactions:
        if iid.startswith("n:") and not sync:
            run_data[iid] = RunData(start=ClockSpec(distribution=Distribution.exponential(spec.rate)),
                                    ongoing=ClockSpec())
        else:
            run_data[iid] = RunData(start=clocks, ongoing=clocks)
    initial = {}
    for e in entities:
        if e == SHARED:
            proper = None
        elif e in edges:
            proper = edges[e][0]
        else:
            proper = float(spec.x0[e])
        initial[e] = StateVector(activation[e], goods[e], proper)
    return build_model({
        "entities": entities, "t_start": 0.0, "t_end": t_end,
        "types": {"matr", "node", "presence"},
        "interactions": interactions, "run_data": run_data,
        "delta": 1.0 if sync else 0.0,
        "transitions": {e: f for e, f in transitions.items() if f is not None},
        "initial_states": initial,
    })
