import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ispace import run
from ispace.checks import verify_run
from ispace.cli import make_grid
from ispace.embeddings import (CaSpec, DiscreteMap, NetworkSpec, OdeSystem, cell_id, embed_ca,
                               embed_discrete_map, embed_network, embed_ode, pair_id)
from ispace.io import write_trajectory
from ispace.oracles import (oracle_ca_run, oracle_ca_step, oracle_integrate, oracle_map_iterate,
                            oracle_network_run, oracle_network_step)
from ispace.transitions import Linear, Logistic


# -- ODE ---------------------------------------------------------------------

def test_oracle_integrator_reference_value():
    # the oracle on its own, against the analytic solution
    assert oracle_integrate(lambda t, x: (-x[0],), 1.0, (0.0, 1.0), 1e-3)[0] == pytest.approx(math.exp(-1), abs=1e-12)


def test_constant_solution():
    traj, _ = run(embed_ode(OdeSystem(Linear([[0.0]]), (2.5,)), (0.0, 3.0), 0.01))
    assert all(sv.proper == (2.5,) for _, sv in traj.samples("p"))


def test_engine_matches_oracle_with_the_same_step():
    F = Linear([[0.0, 1.0], [-1.0, 0.0]])
    model = embed_ode(OdeSystem(F, (1.0, 0.0)), (0.0, 2.0), 0.01)
    traj, _ = run(model)
    times = [t for t, _ in traj.samples("p")]
    want = oracle_integrate(F, (1.0, 0.0), (0.0, 2.0), 0.01, times)
    got = [sv.proper for _, sv in traj.samples("p")]
    assert max(abs(a - b) for g, w in zip(got, want) for a, b in zip(g, w)) == 0.0


def test_fourth_order_convergence():
    def err(h):
        traj, _ = run(embed_ode(OdeSystem(Linear([[-1.0]]), (1.0,)), (0.0, 1.0), h))
        return abs(traj.last("p").proper[0] - math.exp(-1))

    for h in (0.2, 0.1):
        assert err(h) / err(h / 2) >= 8


def test_time_dependent_right_hand_side():
    F = lambda t, x: (math.cos(t),)
    traj, _ = run(embed_ode(OdeSystem(F, (0.0,)), (0.0, 1.0), 1e-3))
    assert traj.last("p").proper[0] == pytest.approx(math.sin(1.0), abs=1e-12)


def test_ode_model_shape():
    model = embed_ode(OdeSystem(Linear([[-1.0]]), 1.0), (0.0, 2.0), 0.1)
    assert set(model.entities) == {"p"} and model.types == frozenset({"ds"})
    it = model.interactions["i"]
    assert (it.agents, it.propagator, it.itype, it.patient) == (("p",), "p", "ds", "p")
    assert model.delta == 2.0
    with pytest.raises(ValueError):
        embed_ode(OdeSystem(Linear([[-1.0]]), 1.0), (0.0, 1.0), 0.0)


# -- discrete maps -------------------------------------------------------------

def test_doubling_map():
    traj, _ = run(embed_discrete_map(DiscreteMap(Linear([[2.0]]), (1.0,), 3)))
    assert [traj.at("p", float(k)).proper for k in range(4)] == [(1.0,), (2.0,), (4.0,), (8.0,)]
    assert oracle_map_iterate(lambda k, x: 2 * x, 1, 3)[-1] == 8


def test_single_step_map():
    traj, _ = run(embed_discrete_map(DiscreteMap(Logistic(3.0), (0.5,), 1)))
    assert traj.last("p").proper == (0.75,)
    with pytest.raises(ValueError):
        DiscreteMap(Logistic(3.0), (0.5,), 0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 4.0), st.floats(0.0, 1.0), st.integers(1, 40))
def test_logistic_orbits_are_exact(r, x0, n):
    traj, _ = run(embed_discrete_map(DiscreteMap(Logistic(r), (x0,), n)))
    want = oracle_map_iterate(lambda k, x: r * x * (1.0 - x), x0, n)
    assert [traj.at("p", float(k)).proper[0] for k in range(n + 1)] == want


def test_time_dependent_map():
    # x(k+1) = x(k) + k, a map that reads the step index
    class AddIndex:
        def __call__(self, k, x):
            return tuple(v + k for v in x)

    traj, _ = run(embed_discrete_map(DiscreteMap(AddIndex(), (0.0,), 5)))
    assert [traj.at("p", float(k)).proper[0] for k in range(6)] == [0, 0, 1, 3, 6, 10]


def test_distinct_maps_give_distinct_trajectories():
    a = write_trajectory(run(embed_discrete_map(DiscreteMap(Logistic(3.7), (0.4,), 10)))[0])
    b = write_trajectory(run(embed_discrete_map(DiscreteMap(Logistic(3.71), (0.4,), 10)))[0])
    assert a != b


# -- cellular automata -----------------------------------------------------------

def grids(traj, rows, cols, generations):
    return [tuple(tuple(int(traj.at(cell_id(r, c), float(k)).proper) for c in range(cols)) for r in range(rows))
            for k in range(generations + 1)]


def test_oracle_rotates_the_blinker():
    grid = make_grid(5, 5, "blinker")
    turned = oracle_ca_step(grid)
    assert [row[2] for row in turned] == [0, 1, 1, 1, 0]
    assert sum(map(sum, turned)) == 3


def test_dead_grid_is_a_fixed_point():
    grid = make_grid(6, 6, "empty")
    traj, trace = run(embed_ca(CaSpec(grid, "B3/S23", 5)))
    assert set(grids(traj, 6, 6, 5)) == {tuple(tuple(r) for r in grid)}


def test_block_is_still_life_without_torus():
    grid = make_grid(6, 6, "block")
    traj, _ = run(embed_ca(CaSpec(grid, "B3/S23", 4, torus=False)))
    assert grids(traj, 6, 6, 4) == oracle_ca_run(grid, 4, torus=False)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["B3/S23", "B36/S23", "B2/S"]))
def test_random_grids_match_the_oracle(seed, rule):
    grid = make_grid(6, 7, "random", 0.4, seed)
    traj, _ = run(embed_ca(CaSpec(grid, rule, 4)))
    assert grids(traj, 6, 7, 4) == oracle_ca_run(grid, 4, rule)


def test_callable_rule_and_von_neumann():
    def majority(x, nbrs):
        return int(sum(nbrs) * 2 > len(nbrs))

    grid = make_grid(5, 5, "random", 0.5, 3)
    traj, _ = run(embed_ca(CaSpec(grid, majority, 1, neighborhood="von-neumann")))
    want = [[majority(grid[r][c], [grid[(r + dr) % 5][(c + dc) % 5] for dr, dc in ((-1, 0), (0, -1), (0, 1), (1, 0))])
             for c in range(5)] for r in range(5)]
    assert grids(traj, 5, 5, 1)[1] == tuple(tuple(r) for r in want)


def test_async_mode_is_seeded_and_lawful():
    grid = make_grid(5, 5, "random", 0.4, 1)
    model = embed_ca(CaSpec(grid, "B3/S23", 3, mode="async", rate=2.0))
    a, trace = run(model, 11)
    b, _ = run(model, 11)
    assert write_trajectory(a) == write_trajectory(b)
    assert len(trace) > 0
    assert verify_run(model, a, trace) == []
    assert model.delta == 0.0


# -- networks --------------------------------------------------------------------

def path(n):
    nodes = [str(i) for i in range(n)]
    return nodes, tuple((nodes[i], nodes[i + 1]) for i in range(n - 1))


def test_ring_consensus_matches_oracle():
    nodes = [str(i) for i in range(6)]
    edges = tuple((nodes[i], nodes[(i + 1) % 6]) for i in range(6))
    x0 = {v: float(i) for i, v in enumerate(nodes)}
    traj, _ = run(embed_network(NetworkSpec(nodes, x0, edges, 20)))
    want = oracle_network_run(x0, edges, 20)
    assert max(abs(traj.at(v, float(k)).proper - want[k][v]) for k in range(21) for v in nodes) <= 1e-12


def test_edge_bit_flips_when_removed():
    nodes, edges = path(4)
    x0 = {v: float(i) for i, v in enumerate(nodes)}
    traj, _ = run(embed_network(NetworkSpec(nodes, x0, edges, 6, ((3, "1", "2", 0),))))
    pid = pair_id("1", "2")
    assert [traj.at(pid, float(k)).proper for k in range(7)] == [1, 1, 1, 0, 0, 0, 0]


def test_added_edge_reaches_the_oracle():
    nodes, edges = path(5)
    x0 = {v: float(i * i) for i, v in enumerate(nodes)}
    changes = ((2, "0", "4", 1),)
    traj, _ = run(embed_network(NetworkSpec(nodes, x0, edges, 8, changes)))
    want = oracle_network_run(x0, edges, 8, changes)
    assert max(abs(traj.at(v, float(k)).proper - want[k][v]) for k in range(9) for v in nodes) <= 1e-12


def test_absent_node_never_fires():
    nodes, edges = path(4)
    x0 = {v: float(i) for i, v in enumerate(nodes)}
    model = embed_network(NetworkSpec(nodes, x0, edges, 5, presence={"1": ((0, 0),)}))
    traj, trace = run(model)
    assert not any(e.record.interaction == "n:1" for e in trace.entries)
    assert {sv.proper for _, sv in traj.samples("1")} == {1.0}
    x = dict(x0)
    for k in range(5):
        x = oracle_network_step(x, edges, present=set(nodes) - {"1"})
        assert all(abs(traj.at(v, float(k + 1)).proper - x[v]) <= 1e-12 for v in nodes)
    assert verify_run(model, traj, trace) == []


def test_network_model_shape():
    nodes, edges = path(3)
    model = embed_network(NetworkSpec(nodes, {v: 0.0 for v in nodes}, edges, 2))
    assert set(model.entities) == {"one", "0", "1", "2", "0~1", "1~2"}
    m = model.interactions["m:0~1"]
    assert (m.agents, m.propagator, m.itype, m.patient) == (("0~1",), "one", "matr", "0~1")
    with pytest.raises(ValueError):
        NetworkSpec(nodes, {}, (("0", "9"),))


def test_async_network_is_reproducible():
    nodes, edges = path(5)
    x0 = {v: float(np.sin(i)) for i, v in enumerate(nodes)}
    model = embed_network(NetworkSpec(nodes, x0, edges, 5, schedule="async", rate=1.5))
    a, trace = run(model, 2)
    b, _ = run(model, 2)
    assert write_trajectory(a) == write_trajectory(b)
    assert verify_run(model, a, trace) == []


def test_node_leaving_and_returning():
    nodes, edges = path(4)
    x0 = {v: float(i) for i, v in enumerate(nodes)}
    presence = {"2": ((2, 0), (4, 1))}
    traj, trace = run(embed_network(NetworkSpec(nodes, x0, edges, 6, presence=presence)))
    x = dict(x0)
    for k in range(6):
        present = set(nodes) - ({"2"} if 2 <= k < 4 else set())
        x = oracle_network_step(x, edges, present=present)
        assert all(abs(traj.at(v, float(k + 1)).proper - x[v]) <= 1e-12 for v in nodes), k
    fired = sorted(e.record.t_s for e in trace.entries if e.record.interaction == "n:2")
    assert fired == [0.0, 1.0, 4.0, 5.0]
