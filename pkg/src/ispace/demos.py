"""Small hand-built models exercising the native modelling API."""

from __future__ import annotations

from .core import Interaction, Model, Space, StateVector, build_model
from .runtime import ClockSpec, NormalGoods, RunData
from .transitions import Ballistic


def stone_model(x0=(0.0, 0.0, 0.0), v0=(1.0, 0.0, 5.0), g=(0.0, 0.0, -9.81), t_span=(0.0, 1.0),
                spread: tuple[tuple[float, ...], ...] | None = None) -> Model:
    """A thrower ``a`` launches stone ``p``; the stone carries its own launch data.

    The stone is both propagator and patient of the throw, its goods hold
    ``(position, velocity)`` and its proper state is the position. With
    ``spread`` (a 6x6 covariance) the launch data are drawn from a normal
    distribution centred on ``(x0, v0)`` at the start.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    launch = tuple(float(v) for v in (*x0, *v0))
    throw = Interaction("throw", ("a",), "p", "t", "p", Space.real(len(launch)))
    rd = RunData(start=ClockSpec.fixed([t0]), ongoing=ClockSpec.fixed(intervals=[(t0, t1)]),
                 goods=None if spread is None else NormalGoods(launch, spread))
    return build_model({
        "entities": {"a": Space(), "p": Space.real(len(x0))},
        "t_start": t0, "t_end": t1,
        "interactions": {"throw": throw},
        "run_data": {"throw": rd},
        "delta": t1 - t0,
        "transitions": {"p": Ballistic(tuple(float(v) for v in g))},
        "initial_states": {
            "a": StateVector({"throw": 1.0}, {}, None),
            "p": StateVector({"throw": 1.0}, {"throw": launch}, tuple(float(v) for v in x0)),
        },
    })
