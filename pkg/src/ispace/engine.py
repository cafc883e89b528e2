"""Event loop driving an interaction space forward in time.

Each :meth:`SimRun.step` processes the starts due at the current time, finds
the earliest pending arrival ``t1``, gathers every arrival in the closed
window ``[t1, t1 + delta]``, and lets each affected patient's transition
function write its state over the window. Transitions read the states from
before the window, so patients in one batch never see each other's updates.
"""

from __future__ import annotations

import heapq
import logging
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from typing import Any, Iterator, Mapping, NamedTuple

from .clocks import DEFAULT_EPS, INF, EventRef
from .core import Model, StateVector
from .errors import ISpaceError, TransitionFailure, UndefinedAt
from .runtime import (OccurrenceRecord, RngStream, active_entities, check_arrival_conditions,
                      check_start_conditions, extract_goods, neighborhood, sample_arrival,
                      sample_ongoing, sample_start, zero_resources_hit)

log = logging.getLogger(__name__)


@dataclass
class EngineConfig:
    eps_t: float = DEFAULT_EPS
    micro_step: float | None = None  # None: window length / 1000
    horizon: float | None = None

    def to_dict(self) -> dict:
        return {"eps_t": self.eps_t, "micro_step": self.micro_step, "horizon": self.horizon}


class Trajectory:
    """Append-only, per-entity sample path.

    Every sample gets a global sequence number so a verifier can rebuild the
    states the engine saw at any point of the run.
    """

    def __init__(self):
        self._times: dict[str, list[float]] = {}
        self._states: dict[str, list[StateVector]] = {}
        self._seqs: dict[str, list[int]] = {}
        self.seq = 0

    def append(self, e: str, t: float, sv: StateVector) -> bool:
        times = self._times.setdefault(e, [])
        states = self._states.setdefault(e, [])
        if times:
            if t < times[-1]:
                raise ValueError(f"sample for {e!r} at {t} precedes {times[-1]}")
            if t == times[-1] and sv == states[-1]:
                return False
        times.append(t)
        states.append(sv)
        self._seqs.setdefault(e, []).append(self.seq)
        self.seq += 1
        return True

    @property
    def entities(self) -> list[str]:
        return sorted(self._times)

    def samples(self, e: str) -> list[tuple[float, StateVector]]:
        return list(zip(self._times[e], self._states[e]))

    def at(self, e: str, t: float, eps: float = DEFAULT_EPS, *, before_seq: int | None = None) -> StateVector:
        """Last sample of ``e`` at-or-before ``t`` (optionally only among samples
        recorded before sequence number ``before_seq``)."""
        times = self._times[e]
        k = bisect_right(times, t + eps) - 1
        if before_seq is not None:
            k = min(k, bisect_left(self._seqs[e], before_seq) - 1)
        if k < 0:
            raise UndefinedAt(f"no sample of {e!r} at-or-before {t}")
        return self._states[e][k]

    def last(self, e: str) -> StateVector:
        return self._states[e][-1]

    def records(self) -> Iterator[tuple[float, str, StateVector]]:
        """All samples ordered by time, then by recording order."""
        rows = [(t, q, e, sv) for e in self._times
                for t, q, sv in zip(self._times[e], self._seqs[e], self._states[e])]
        rows.sort(key=lambda r: (r[0], r[1]))
        for t, _, e, sv in rows:
            yield t, e, sv

    def __len__(self) -> int:
        return self.seq


@dataclass(frozen=True)
class TraceEntry:
    record: OccurrenceRecord
    start_neighborhood: frozenset
    arrival_neighborhood: frozenset
    patients: tuple[str, ...]
    seq_start: int
    seq_arrival: int
    deferred: bool = False


class Window(NamedTuple):
    """Evolution window ``[t1, end]`` and the trajectory samples it wrote."""

    t1: float
    end: float
    patients: tuple[str, ...]
    seq_lo: int
    seq_hi: int


@dataclass
class CausalTrace:
    entries: list[TraceEntry] = field(default_factory=list)
    windows: list["Window"] = field(default_factory=list)
    diagnostics: list[dict] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


class HistoryView:
    """Read access to past neighbour states, restricted to a domain.

    ``domain`` maps each readable entity to the earliest time it may be read
    from; reads after ``upper`` are refused too.
    """

    def __init__(self, trajectory: Trajectory, domain: Mapping[str, float], upper: float,
                 eps: float = DEFAULT_EPS):
        self.trajectory = trajectory
        self.domain = dict(domain)
        self.upper = upper
        self.eps = eps

    def __call__(self, tau: float, e: str) -> StateVector:
        lo = self.domain.get(e)
        if lo is None:
            raise UndefinedAt(f"{e!r} is not in the neighborhood history")
        if not lo - self.eps <= tau <= self.upper + self.eps:
            raise UndefinedAt(f"{e!r} is readable on [{lo}, {self.upper}], not at {tau}")
        return self.trajectory.at(e, tau, self.eps)


@dataclass
class EvolutionContext:
    """Everything a transition function may look at while evaluating ``x_p(s)``."""

    model: Model
    patient: str
    t1: float
    end: float
    state: StateVector
    occurrences: tuple[OccurrenceRecord, ...]
    history: HistoryView
    omega: RngStream
    cache: dict = field(default_factory=dict)

    @property
    def s(self) -> float:
        return self.history.upper

    def hist(self, tau: float, e: str | None = None) -> StateVector:
        return self.history(tau, self.patient if e is None else e)

    def rng(self):
        return self.omega.generator()

    def arrived(self, s: float) -> tuple[OccurrenceRecord, ...]:
        return tuple(o for o in self.occurrences if o.t_a <= s + DEFAULT_EPS)


class _StartProcess:
    """Lazily enumerated start events of one interaction."""

    def __init__(self, run: "SimRun", iid: str):
        self.run = run
        self.iid = iid
        spec = run.model.run_data[iid].start
        self.deterministic = spec.deterministic
        self.dirac = not spec.deterministic and spec.distribution.kind == "dirac"
        self.k = 0
        self.sampled = 0
        self.visited = False
        if self.deterministic:
            self.elements = spec.events.elements
            self.current = self.elements[0] if self.elements else None
        else:
            self.current = self._sample(run.model.t_start)

    def _sample(self, t: float) -> EventRef | None:
        run = self.run
        key = RngStream(run.seed, self.iid, self.sampled, "start")
        self.sampled += 1
        got = sample_start(run.model, self.iid, t, run._sampling_history(self.iid), key, run.eps)
        if got is None:
            return None
        if isinstance(got, tuple):
            return EventRef(got[0], got[1], False)
        return EventRef(got, got, True)

    def advance(self) -> None:
        cur = self.current
        self.visited = False
        if self.deterministic:
            self.k += 1
            self.current = self.elements[self.k] if self.k < len(self.elements) else None
        elif self.dirac:
            self.current = None
        else:
            self.current = self._sample(cur.hi)

    def forced_after(self, now: float, eps: float) -> float:
        cur = self.current
        if cur is None:
            return INF
        if cur.lo > now + eps:
            return cur.lo
        if cur.hi > now + eps:
            return cur.hi
        return INF


class SimRun:
    """Mutable simulation of one model under one seed."""

    def __init__(self, model: Model, seed: int = 0, config: EngineConfig | None = None, *,
                 horizon: float | None = None):
        self.model = model
        self.seed = int(seed)
        self.config = config or EngineConfig()
        self.eps = self.config.eps_t
        limit = horizon if horizon is not None else self.config.horizon
        limit = model.t_end if limit is None else min(float(limit), model.t_end)
        if not math.isfinite(limit):
            raise ValueError("a finite horizon is required when t_end is infinite")
        if limit < model.t_start:
            raise ValueError(f"horizon {limit} precedes t_start {model.t_start}")
        self.horizon = limit
        self.now = model.t_start
        self.states: dict[str, StateVector] = dict(model.initial_states)
        self.trajectory = Trajectory()
        for e in sorted(model.entities):
            self.trajectory.append(e, model.t_start, self.states[e])
        self.trace = CausalTrace()
        self.finished = False
        self.pending: list[tuple[float, str, int]] = []
        self._pending_info: dict[tuple[str, int], tuple] = {}
        self._pending_times: dict[str, list[float]] = {}
        self._counts: dict[str, int] = {iid: 0 for iid in model.interactions}
        self._evolutions: dict[str, int] = {}
        self._last_start: dict[str, float] = {}
        self._domain: dict[str, dict[str, float]] = {}
        self._order = sorted(model.interactions)
        self._starts = {iid: _StartProcess(self, iid) for iid in self._order}

    # -- bookkeeping ---------------------------------------------------------

    def _diag(self, kind: str, **info) -> None:
        entry = {"kind": kind, **info}
        self.trace.diagnostics.append(entry)
        log.debug("%s %s", kind, info)

    def _sampling_history(self, iid: str) -> HistoryView:
        nb = neighborhood(self.model, iid, self.now, self.states)
        return HistoryView(self.trajectory, {e: self.model.t_start for e in nb}, self.now, self.eps)

    def _process_starts(self) -> None:
        now, eps = self.now, self.eps
        for iid in self._order:
            proc = self._starts[iid]
            deferred = False
            while proc.current is not None and proc.current.hi < now - eps:
                deferred = True
                self._diag("deferred-start", interaction=iid, time=proc.current.lo, to=now)
                proc.advance()
            cur = proc.current
            fire = deferred
            if cur is not None and cur.lo <= now + eps:
                if cur.lo < now - eps and not proc.visited:
                    deferred = True
                    self._diag("deferred-start", interaction=iid, time=cur.lo, to=now)
                fire = True
                proc.visited = True
                if cur.is_point or cur.hi <= now + eps:
                    proc.advance()
            if fire and self._last_start.get(iid) != now:
                self._start(iid, now, deferred)

    def _start(self, iid: str, t: float, deferred: bool) -> None:
        model, eps = self.model, self.eps
        idx = self._counts[iid]
        self._counts[iid] += 1
        self._last_start[iid] = t
        if not check_start_conditions(model, iid, t, self.states):
            self._diag("start-cancelled", interaction=iid, time=t)
            return
        history = self._sampling_history(iid)
        t_a = sample_arrival(model, iid, t, history, RngStream(self.seed, iid, idx, "arrival"), eps)
        if t_a == INF:
            self._diag("never-arrives", interaction=iid, time=t)
            return
        if any(abs(t_a - other) <= eps for other in self._pending_times.get(iid, ())):
            self._diag("merged-arrival", interaction=iid, time=t, arrival=t_a)
            return
        goods = extract_goods(model, iid, t, self.states, RngStream(self.seed, iid, idx, "goods"))
        ongoing = sample_ongoing(model, iid, t_a, history, RngStream(self.seed, iid, idx, "ongoing"), eps)
        nb = neighborhood(model, iid, t, self.states)
        rec = OccurrenceRecord(iid, idx, t, t_a, ongoing, goods)
        heapq.heappush(self.pending, (t_a, iid, idx))
        self._pending_info[(iid, idx)] = (rec, nb, self.trajectory.seq, deferred)
        self._pending_times.setdefault(iid, []).append(t_a)

    def _next_forced_start(self) -> float:
        return min((p.forced_after(self.now, self.eps) for p in self._starts.values()), default=INF)

    def _window_end(self, t1: float) -> float:
        return min(t1 + self.model.delta, self.model.t_end, self.horizon)

    # -- operations ------------------------------------------------------------

    def first_arrival(self, t: float | None = None) -> float:
        """Earliest pending arrival among occurrences started at-or-before ``t``."""
        if t is None:
            return self.pending[0][0] if self.pending else INF
        return min((ta for ta, iid, idx in self.pending if self._pending_info[(iid, idx)][0].t_s <= t + self.eps),
                   default=INF)

    def patients_batch(self, t1: float) -> dict[str, set[str]]:
        """Interactions whose arrival lands in ``[t1, t1 + delta]``, by patient,
        keeping only those whose arrival conditions hold."""
        end = self._window_end(t1)
        out: dict[str, set[str]] = {}
        for t_a, iid, _ in sorted(self.pending):
            if t1 - self.eps <= t_a <= end + self.eps and \
                    check_arrival_conditions(self.model, iid, t_a, self.states):
                out.setdefault(self.model.interactions[iid].patient, set()).add(iid)
        return out

    def neighborhood_state(self, p: str, t: float) -> HistoryView:
        """History accessor for patient ``p`` up to time ``t``."""
        return HistoryView(self.trajectory, self._domain.get(p, {}), t, self.eps)

    def _sample_times(self, t1: float, end: float, occurrences) -> list[float]:
        eps = self.eps
        if end - t1 <= eps:
            return [t1]
        times = {t1, end}
        times.update(o.t_a for o in occurrences if o.t_a <= end + eps)
        h = self.config.micro_step or (end - t1) / 1000
        for o in occurrences:
            if isinstance(o.ongoing, tuple):
                a, b = max(o.ongoing[0], t1), min(o.ongoing[1], end)
                n = int(math.ceil((b - a) / h - 1e-9))
                times.update(a + k * h for k in range(n))
                times.add(b)
        out: list[float] = []
        for s in sorted(times):
            if not out or s - out[-1] > eps:
                out.append(s)
        return out

    def apply_evolution(self, p: str, window: tuple[float, float], omega: RngStream,
                        occurrences: tuple[OccurrenceRecord, ...]) -> list[tuple[float, StateVector]]:
        """Evaluate ``f_p`` at the window's sample times.

        Returns the samples without recording them; :meth:`step` records all
        patients of a batch only after every one of them has been evaluated.
        """
        t1, end = window
        model = self.model
        pre = self.trajectory.at(p, t1, self.eps)
        ctx = EvolutionContext(model, p, t1, end, pre, occurrences, self.neighborhood_state(p, t1), omega)
        f = model.transitions[p]
        out = []
        for s in self._sample_times(t1, end, occurrences):
            ctx.history.upper = s
            try:
                value = f(s, ctx)
            except ISpaceError as exc:
                if isinstance(exc, TransitionFailure):
                    raise
                raise TransitionFailure(f"transition of {p!r} failed at {s}: {exc}", path=p) from exc
            except Exception as exc:
                raise TransitionFailure(f"transition of {p!r} failed at {s}: {exc!r}", path=p) from exc
            out.append((s, self._normalize(p, s, value, pre)))
        return out

    def _normalize(self, p: str, s: float, value: Any, pre: StateVector) -> StateVector:
        model = self.model
        sv = value if isinstance(value, StateVector) else StateVector(pre.activation, pre.goods, value)
        activation = {}
        for iid, a in sorted(sv.activation.items()):
            if iid not in model.interactions:
                raise TransitionFailure(f"{p!r} reports activation for unknown interaction {iid!r}", path=p)
            a = float(a)
            if not 0.0 <= a <= 1.0:
                raise TransitionFailure(f"activation {a} of {p!r} for {iid!r} at {s} outside [0, 1]", path=p)
            activation[iid] = a
        if set(sv.goods) != set(model.propagated_by[p]):
            raise TransitionFailure(f"goods of {p!r} must cover exactly {sorted(model.propagated_by[p])}", path=p)
        try:
            goods = {iid: model.interactions[iid].resource_space.coerce(sv.goods[iid]) for iid in sorted(sv.goods)}
            proper = model.entities[p].coerce(sv.proper)
        except (TypeError, ValueError) as exc:
            raise TransitionFailure(f"state of {p!r} at {s} left its space: {exc}", path=p) from None
        return StateVector(activation, goods, proper)

    def step(self) -> "SimRun":
        """Process due starts and, if an arrival is due before the horizon, one batch."""
        if self.finished:
            return self
        eps = self.eps
        self._process_starts()
        while True:
            t1 = self.first_arrival()
            s = self._next_forced_start()
            if s <= t1 + eps and s <= self.horizon + eps:
                self.now = min(s, self.horizon)
                self._process_starts()
                continue
            break
        if t1 > self.horizon + eps:
            self.now = self.horizon
            self.finished = True
            return self
        self._batch(t1)
        if self.now >= self.horizon - eps and not self.pending and self._next_forced_start() > self.horizon + eps:
            self.now = self.horizon
            self.finished = True
        return self

    def _batch(self, t1: float) -> None:
        model, eps = self.model, self.eps
        end = self._window_end(t1)
        self.now = t1
        popped = []
        while self.pending and self.pending[0][0] <= end + eps:
            t_a, iid, idx = heapq.heappop(self.pending)
            self._pending_times[iid].remove(t_a)
            popped.append(self._pending_info.pop((iid, idx)))
        pre = dict(self.states)
        active = active_entities(model, pre)
        committed: dict[str, list] = {}
        for rec, nb_start, seq_start, deferred in popped:
            if not check_arrival_conditions(model, rec.interaction, rec.t_a, pre):
                self._diag("arrival-dropped", interaction=rec.interaction, time=rec.t_a)
                continue
            nb_arr = neighborhood(model, rec.interaction, rec.t_a, pre, active=active)
            p = model.interactions[rec.interaction].patient
            committed.setdefault(p, []).append((rec, nb_start, nb_arr, seq_start, deferred))
        if not committed:
            return

        for p, items in committed.items():
            dom = self._domain.setdefault(p, {})
            for rec, _, nb_arr, _, _ in items:
                for e in nb_arr:
                    dom[e] = min(dom.get(e, INF), rec.t_a)

        seq_arrival = self.trajectory.seq
        results: dict[str, list[tuple[float, StateVector]]] = {}
        for p in sorted(committed):
            occs = tuple(sorted((it[0] for it in committed[p]), key=lambda r: (r.t_a, r.interaction, r.index)))
            n = self._evolutions.get(p, 0)
            self._evolutions[p] = n + 1
            results[p] = self.apply_evolution(p, (t1, end), RngStream(self.seed, p, n, "evolution"), occs)

        self._write(results, pre)
        for p in sorted(committed):
            for rec, nb_start, nb_arr, seq_start, deferred in sorted(
                    committed[p], key=lambda it: (it[0].t_a, it[0].interaction, it[0].index)):
                self.trace.entries.append(TraceEntry(rec, nb_start, nb_arr, (p,), seq_start, seq_arrival, deferred))
        self.trace.windows.append(Window(t1, end, tuple(sorted(committed)), seq_arrival, self.trajectory.seq))
        self.now = end

    def _write(self, results: dict[str, list[tuple[float, StateVector]]], pre: dict[str, StateVector]) -> None:
        """Record a batch, deactivating patients whose propagator holds zero resources."""
        model = self.model
        times = {p: [s for s, _ in samples] for p, samples in results.items()}

        def state_at(e: str, s: float) -> StateVector:
            if e in results:
                k = bisect_right(times[e], s + self.eps) - 1
                return results[e][max(k, 0)][1]
            return pre[e]

        rows = []
        for p, samples in results.items():
            for s, sv in samples:
                for iid in model.acting_on[p]:
                    it = model.interactions[iid]
                    if it.zero_set is None or sv.activation.get(iid, 0.0) == 0.0:
                        continue
                    if it.zero_set(state_at(it.propagator, s).goods[iid]):
                        sv = sv.with_activation(**{iid: 0.0})
                rows.append((s, p, sv))
        rows.sort(key=lambda r: (r[0], r[1]))
        for s, p, sv in rows:
            self.trajectory.append(p, s, sv)
            self.states[p] = sv


def run(model: Model, seed: int = 0, horizon: float | None = None,
        config: EngineConfig | None = None) -> tuple[Trajectory, CausalTrace]:
    """Simulate ``model`` up to ``horizon`` and return its trajectory and trace."""
    sim = SimRun(model, seed, config, horizon=horizon)
    while not sim.finished:
        sim.step()
    return sim.trajectory, sim.trace
