"""Direct reference implementations of the classical models.

These are deliberately written from scratch, without touching the engine or
the transition library, so that agreement between the two is evidence and
not tautology.
"""

from __future__ import annotations

import math


def oracle_integrate(F, x0, t_span, h, times=None):
    """Classical RK4 with fixed step ``h`` from ``t_span[0]``.

    Returns the state at ``t_span[1]``, or a list of states at ``times``.
    Each requested time is reached by whole steps on the grid ``t0 + k*h``
    followed by one shorter step when needed.
    """
    t0 = float(t_span[0])
    y0 = [float(v) for v in (x0 if isinstance(x0, (list, tuple)) else [x0])]
    targets = [float(t_span[1])] if times is None else [float(t) for t in times]
    out = []
    for target in targets:
        y = list(y0)
        n = int(math.floor((target - t0) / h + 1e-9))
        for k in range(n):
            y = _step(F, t0 + k * h, y, h)
        tail = target - (t0 + n * h)
        if tail > 1e-12:
            y = _step(F, t0 + n * h, y, tail)
        out.append(tuple(y))
    return out[0] if times is None else out


def _step(F, t, y, h):
    a = list(F(t, tuple(y)))
    b = list(F(t + h / 2, tuple(y[j] + h / 2 * a[j] for j in range(len(y)))))
    c = list(F(t + h / 2, tuple(y[j] + h / 2 * b[j] for j in range(len(y)))))
    d = list(F(t + h, tuple(y[j] + h * c[j] for j in range(len(y)))))
    return [y[j] + h / 6 * (a[j] + 2 * b[j] + 2 * c[j] + d[j]) for j in range(len(y))]


def oracle_map_iterate(F, x0, N):
    """Orbit ``[x(0), ..., x(N)]`` of ``x(k+1) = F(k, x(k))``."""
    orbit = [x0]
    x = x0
    for k in range(N):
        x = F(k, x)
        orbit.append(x)
    return orbit


def _life_counts(rule):
    born, survive = rule.upper().split("/")
    return {int(ch) for ch in born[1:]}, {int(ch) for ch in survive[1:]}


def oracle_ca_step(grid, rule="B3/S23", torus=True):
    """One synchronous generation of a life-like rule on a 0/1 grid."""
    born, survive = _life_counts(rule)
    rows, cols = len(grid), len(grid[0])
    new = []
    for r in range(rows):
        line = []
        for c in range(cols):
            alive = 0
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    if dr == 0 and dc == 0:
                        continue
                    rr, cc = r + dr, c + dc
                    if torus:
                        rr %= rows
                        cc %= cols
                    elif rr < 0 or rr >= rows or cc < 0 or cc >= cols:
                        continue
                    alive += grid[rr][cc]
            keep = survive if grid[r][c] == 1 else born
            line.append(1 if alive in keep else 0)
        new.append(tuple(line))
    return tuple(new)


def oracle_ca_run(grid, generations, rule="B3/S23", torus=True):
    """Grids for generations ``0..generations``."""
    out = [tuple(tuple(row) for row in grid)]
    for _ in range(generations):
        out.append(oracle_ca_step(out[-1], rule, torus))
    return out


def oracle_network_step(x, edges, present=None):
    """Synchronous consensus: each present node takes the mean of its present
    neighbours and keeps its value when it has none."""
    nodes = sorted(x)
    present = set(nodes) if present is None else set(present)
    adj = {v: [] for v in nodes}
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    new = {}
    for v in nodes:
        vals = [x[u] for u in sorted(adj[v]) if u in present]
        new[v] = sum(vals) / len(vals) if v in present and vals else x[v]
    return new


def oracle_network_run(x0, edges, steps, changes=()):
    """States ``0..steps``; ``changes`` holds ``(step, u, v, present)`` edge toggles."""
    current = {frozenset(e) for e in edges}
    x = dict(x0)
    out = [dict(x)]
    for k in range(steps):
        for step, u, v, flag in changes:
            if step == k:
                if flag:
                    current.add(frozenset((u, v)))
                else:
                    current.discard(frozenset((u, v)))
        x = oracle_network_step(x, [tuple(sorted(e)) for e in current])
        out.append(dict(x))
    return out
