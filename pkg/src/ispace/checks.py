"""Post-hoc verification of a run from its raw trajectory and trace.

The verifier rebuilds the states the engine saw from trajectory sequence
numbers and re-derives every condition itself; it does not call the runtime
predicates, so a bug there cannot hide from it.
"""

from __future__ import annotations

from .clocks import DEFAULT_EPS
from .core import Model
from .engine import CausalTrace, Trajectory


def _snapshot(model: Model, traj: Trajectory, seq: int) -> dict:
    return {e: traj.at(e, float("inf"), before_seq=seq) for e in model.entities}


def _zero(model: Model, states: dict, iid: str) -> bool:
    it = model.interactions[iid]
    return it.zero_set is not None and bool(it.zero_set(states[it.propagator].goods[iid]))


def _act(model: Model, states: dict, iid: str, e: str) -> float:
    if e == model.interactions[iid].patient and _zero(model, states, iid):
        return 0.0
    return states[e].activation.get(iid, 0.0)


def _globally_active(model: Model, states: dict) -> set:
    return {e for e, sv in states.items() if any(_act(model, states, iid, e) != 0 for iid in sv.activation)}


def verify_run(model: Model, traj: Trajectory, trace: CausalTrace, eps: float = DEFAULT_EPS) -> list[str]:
    """Every law violated by the run, as human-readable strings (empty when clean)."""
    bad: list[str] = []
    seen = set()
    for entry in trace.entries:
        r = entry.record
        it = model.interactions[r.interaction]
        tag = f"{r.interaction}#{r.index}"
        if (r.interaction, r.index) in seen:
            bad.append(f"{tag}: committed twice")
        seen.add((r.interaction, r.index))

        # started once: the start is a start event inside the run, before the arrival
        clock = model.run_data[r.interaction].start
        if r.t_s < model.t_start - eps:
            bad.append(f"{tag}: start {r.t_s} before the run begins")
        if clock.deterministic and not entry.deferred and not clock.events.contains(r.t_s, eps):
            bad.append(f"{tag}: start {r.t_s} is not a start event")
        if not r.t_s <= r.t_a + eps:
            bad.append(f"{tag}: arrival {r.t_a} before start {r.t_s}")
        if not r.t_a <= r.ongoing_start + eps:
            bad.append(f"{tag}: ongoing {r.ongoing} begins before arrival {r.t_a}")

        s_states = _snapshot(model, traj, entry.seq_start)
        a_states = _snapshot(model, traj, entry.seq_arrival)
        agents_on = [a for a in it.agents if _act(model, s_states, r.interaction, a) != 0]
        if it.agents and not agents_on:
            bad.append(f"{tag}: no active agent at start {r.t_s}")
        if _act(model, s_states, r.interaction, it.propagator) == 0:
            bad.append(f"{tag}: propagator inactive at start {r.t_s}")
        if _act(model, a_states, r.interaction, it.propagator) == 0:
            bad.append(f"{tag}: propagator inactive at arrival {r.t_a}")
        if _act(model, a_states, r.interaction, it.patient) == 0:
            bad.append(f"{tag}: patient inactive at arrival {r.t_a}")
        if _zero(model, a_states, r.interaction):
            bad.append(f"{tag}: goods are zero resources at arrival {r.t_a}")

        for label, states, nb in (("start", s_states, entry.start_neighborhood),
                                  ("arrival", a_states, entry.arrival_neighborhood)):
            lower = {e for e in it.entities if _act(model, states, r.interaction, e) != 0}
            upper = _globally_active(model, states)
            if not lower <= nb:
                bad.append(f"{tag}: {label} neighborhood misses active roles {sorted(lower - nb)}")
            if not nb <= upper:
                bad.append(f"{tag}: {label} neighborhood holds inactive entities {sorted(nb - upper)}")
        if it.agents and not any(a in entry.start_neighborhood for a in agents_on):
            bad.append(f"{tag}: no agent in the start neighborhood")
        if it.propagator not in entry.start_neighborhood:
            bad.append(f"{tag}: propagator missing from the start neighborhood")
        if not {it.propagator, it.patient} <= entry.arrival_neighborhood:
            bad.append(f"{tag}: propagator or patient missing from the arrival neighborhood")
        if entry.patients != (it.patient,):
            bad.append(f"{tag}: updated {entry.patients}, expected {(it.patient,)}")

    bad.extend(_check_windows(model, traj, trace, eps))
    return bad


def _check_windows(model: Model, traj: Trajectory, trace: CausalTrace, eps: float) -> list[str]:
    """State changes happen only inside windows where the entity is a patient,
    and evolving patients obey the zero-resource law."""
    bad = []
    for e in model.entities:
        samples = traj.samples(e)
        seqs = traj._seqs[e]
        for k in range(1, len(samples)):
            (t0, v0), (t, v) = samples[k - 1], samples[k]
            q = seqs[k]
            win = next((w for w in trace.windows if w.seq_lo <= q < w.seq_hi), None)
            if win is None or e not in win.patients or not win.t1 - eps <= t <= win.end + eps:
                bad.append(f"{e}: state recorded at {t} outside any window updating it")
                continue
            if v == v0:
                continue
            for iid in model.acting_on[e]:
                it = model.interactions[iid]
                if it.zero_set is None or v.activation.get(iid, 0.0) == 0.0:
                    continue
                prop = traj.at(it.propagator, t, eps, before_seq=win.seq_hi)
                if it.zero_set(prop.goods[iid]):
                    bad.append(f"{e}: active for {iid} at {t} while its goods are zero resources")
    return bad


def patients_of_commits(trace: CausalTrace) -> set:
    return {p for entry in trace.entries for p in entry.patients}


def quiescence_violations(model: Model, traj: Trajectory, trace: CausalTrace) -> list[str]:
    """Entities never reached by a committed arrival must keep their initial state."""
    touched = patients_of_commits(trace)
    bad = []
    for e in model.entities:
        if e in touched:
            continue
        first = model.initial_states[e]
        for t, sv in traj.samples(e):
            if sv != first:
                bad.append(f"{e}: changed at {t} without being a patient")
                break
    return bad
