"""Random case construction for property tests."""

from __future__ import annotations

import numpy as np

from gridstab.flowgraph import build_flow_graph
from gridstab.netmodel import Bus, BusKind, Line, NetworkCase
from gridstab.powerflow import Equilibrium
from gridstab.stability import assemble_jacobian, inertia

from .oracles import net_injection, quadratic_roots, spectrum_distance


def random_lines(rng, n: int, extra: int, lossless: bool, rx_max: float = 1.0) -> list[Line]:
    """A random spanning tree plus up to ``extra`` chords, R/X below ``rx_max``."""
    order = rng.permutation(n) + 1
    pairs = []
    for pos in range(1, n):
        parent = order[rng.integers(0, pos)]
        pairs.append((int(parent), int(order[pos])))
    seen = {frozenset(p) for p in pairs}
    for _ in range(extra):
        a, b = (int(v) for v in rng.choice(n, size=2, replace=False) + 1)
        if frozenset((a, b)) not in seen:
            seen.add(frozenset((a, b)))
            pairs.append((a, b))
    lines = []
    for a, b in pairs:
        x = float(rng.uniform(0.05, 1.0))
        r = 0.0 if lossless else x * float(rng.uniform(0.0, rx_max))
        lines.append(Line(a, b, r, x))
    return lines


def case_at_angles(rng, n: int, angles, lines, kinds=None, d_droop=None, t_filter=None,
                   d_load=None, v_mag=None) -> tuple[NetworkCase, Equilibrium]:
    """Build a case for which ``angles`` is an exact equilibrium.

    Inverter buses get the generation the flows require; other buses absorb
    it as load.
    """
    kinds = kinds or [BusKind.A] * n
    v = np.ones(n) if v_mag is None else np.asarray(v_mag, float)
    dr = rng.uniform(0.5, 5.0, n) if d_droop is None else np.broadcast_to(d_droop, (n,))
    td = rng.uniform(0.05, 5.0, n) if t_filter is None else np.broadcast_to(t_filter, (n,))
    dl = rng.uniform(0.1, 3.0, n) if d_load is None else np.broadcast_to(d_load, (n,))

    def buses(q):
        out = []
        for i, kind in enumerate(kinds):
            pg, pl = (q[i], 0.0) if kind is BusKind.A else (0.0, -q[i])
            if kind is BusKind.A:
                drv, dlv, tdv = float(dr[i]), (float(dl[i]) if d_load is not None else 0.0), float(td[i])
            elif kind is BusKind.B:
                drv, dlv, tdv = 0.0, float(dl[i]), 0.0
            else:
                drv, dlv, tdv = 0.0, 0.0, 0.0
            out.append(Bus(i + 1, kind, float(pg), float(pl), float(v[i]), drv, dlv, tdv))
        return out

    draft = NetworkCase(tuple(buses(np.zeros(n))), tuple(lines))
    q = net_injection(draft, angles)
    case = NetworkCase(tuple(buses(q)), tuple(lines), name="random")
    angles = np.asarray(angles, float) - angles[n - 1]
    return case, Equilibrium(angles, n, 0.0, 0)


def random_case(rng, n: int | None = None, lossless: bool = False, extra: int | None = None,
                spread: float = 0.3, mixed: bool = False, rx_max: float = 1.0, **kw):
    n = n if n is not None else int(rng.integers(2, 8))
    extra = extra if extra is not None else int(rng.integers(0, n))
    lines = random_lines(rng, n, extra, lossless, rx_max)
    angles = rng.uniform(-spread, spread, n)
    kinds = None
    if mixed:
        kinds = [BusKind.A] + [BusKind(k) for k in rng.choice(["A", "B", "C"], size=n - 1)]
    return case_at_angles(rng, n, angles, lines, kinds=kinds, **kw)


def inertia_instance(rng, n=5):
    """(A, H, r) with sym(A H) PSD of rank r, built as A = (S + K) H^-1."""
    r = int(rng.integers(0, n + 1))
    b = rng.normal(size=(n, r))
    s = b @ b.T
    k = rng.normal(size=(n, n))
    k = k - k.T
    q = rng.normal(size=(n, n))
    h = q + q.T
    while abs(np.linalg.det(h)) < 1e-3:
        q = rng.normal(size=(n, n))
        h = q + q.T
    a = (s + k) @ np.linalg.inv(h)
    return a, h, r


def inertia_bound_violations(seeds) -> int:
    bad = 0
    for seed in seeds:
        a, h, r = inertia_instance(np.random.default_rng(seed))
        sym = (a @ h + (a @ h).T) / 2
        lam = np.linalg.eigvalsh(sym)
        assert lam.min() > -1e-8 and int(np.sum(lam > 1e-8)) == r
        if r - inertia(a).n_plus > inertia(h).n_minus:
            bad += 1
    return bad


def homogeneous_case(rng):
    d = float(rng.uniform(0.1, 5.0))
    r = float(rng.uniform(0.05, 5.0))
    case, eq = random_case(rng, d_droop=d, t_filter=r, spread=0.5)
    return case, eq, d, r


def homogeneous_gap(seed) -> float:
    rng = np.random.default_rng(seed)
    case, eq, d, r = homogeneous_case(rng)
    g = build_flow_graph(case, eq)
    vals = np.linalg.eigvals(assemble_jacobian(case, g))
    return spectrum_distance(vals, quadratic_roots(g.laplacian, r * d, d))
