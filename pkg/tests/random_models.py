"""Generator of small random interaction spaces for law-checking tests."""

from __future__ import annotations

import numpy as np

from ispace import (ClockSpec, Distribution, Interaction, RunData, Space, StateVector, ZeroSet,
                    build_model)
from ispace.errors import UndefinedAt

T_END = 10.0
GOODS = (0.0, 1.0, 2.0)


class RandomToggle:
    """Test transition: perturbs activations, goods and proper state at random,
    reading every neighbour it is allowed to see."""

    def __call__(self, s, ctx):
        pre = ctx.state
        seen = 0.0
        for e in sorted(ctx.history.domain):
            try:
                seen += float(ctx.hist(ctx.t1, e).proper)
            except UndefinedAt:
                pass
        cached = ctx.cache.get("draw")
        if cached is None:
            g = ctx.rng()
            act = {i: (float(g.choice([0.0, 0.5, 1.0])) if g.random() < 0.3 else a)
                   for i, a in pre.activation.items()}
            goods = {i: (float(g.choice(GOODS)) if g.random() < 0.4 else v) for i, v in pre.goods.items()}
            cached = ctx.cache["draw"] = (act, goods, float(g.normal()) + 1e-3 * seen)
        act, goods, dx = cached
        if s <= ctx.t1:
            return pre
        return StateVector(act, goods, pre.proper + dx)


def random_model(seed: int):
    """Model with at most 5 entities and 6 interactions, mixed clocks."""
    g = np.random.default_rng(10_000 + seed)
    n_ent = int(g.integers(2, 6))
    n_int = int(g.integers(1, 7))
    ents = [f"e{k}" for k in range(n_ent)]
    interactions, run_data = {}, {}
    for k in range(n_int):
        iid = f"i{k}"
        agents = tuple(str(a) for a in g.choice(ents, size=int(g.integers(0, 3)), replace=False))
        prop, pat = str(g.choice(ents)), str(g.choice(ents))
        zs = ZeroSet("equals", 0.0) if g.random() < 0.5 else None
        interactions[iid] = Interaction(iid, agents, prop, "t", pat, Space.scalar(), zs)
        if g.random() < 0.5:
            pts = sorted({round(float(x), 3) for x in g.uniform(0, T_END, size=int(g.integers(1, 5)))})
            start = ClockSpec.fixed(pts)
            if g.random() < 0.4:
                ongoing = ClockSpec.fixed(pts)
            else:
                ongoing = ClockSpec(mode="interval", length=Distribution.fixed_interval(float(g.uniform(0.1, 2))))
        else:
            start = ClockSpec(distribution=Distribution.exponential(float(g.uniform(0.3, 2.0))))
            ongoing = ClockSpec() if g.random() < 0.5 else \
                ClockSpec(mode="interval", length=Distribution.fixed_interval(float(g.uniform(0.1, 2))))
        arrival = [Distribution.dirac(0.0), Distribution.dirac(float(g.uniform(0, 1))),
                   Distribution.exponential(2.0), Distribution.uniform(0.0, 1.5)][int(g.integers(0, 4))]
        run_data[iid] = RunData(start=start, ongoing=ongoing, arrival=arrival)

    init = {}
    for e in ents:
        act = {}
        for iid, it in interactions.items():
            if e in it.entities or g.random() < 0.1:
                act[iid] = float(g.choice([0.0, 0.5, 1.0], p=[0.15, 0.25, 0.6]))
        goods = {iid: float(g.choice(GOODS)) for iid, it in interactions.items() if it.propagator == e}
        init[e] = {"activation": act, "goods": goods, "proper": float(g.normal())}
    for iid, it in interactions.items():
        if it.zero_set is not None and init[it.propagator]["goods"][iid] == 0.0:
            init[it.patient]["activation"][iid] = 0.0
    # some entities stay passive so the constant-parameter law is exercised
    return build_model({
        "entities": {e: Space.scalar() for e in ents},
        "t_start": 0.0, "t_end": T_END,
        "interactions": interactions, "run_data": run_data,
        "delta": float(g.choice([0.0, 0.5, 1.0])),
        "transitions": {e: RandomToggle() for e in ents},
        "initial_states": init,
    })
