"""Active power-flow equilibria: Newton-Raphson and leaf recursion for trees."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    CaseFormatError,
    InputError,
    NoFeasibleBranch,
    NonConvergence,
    NotRadial,
    SingularJacobian,
    UnbalancedCase,
)
from .netmodel import NetworkCase, edge_arrays, effective_injection, is_radial


@dataclass(frozen=True)
class SolveOptions:
    seed: np.ndarray | None = None
    tol: float = 1e-10
    max_iter: int = 50
    auto_balance: int | None = None
    ref_bus: int | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True)
class Equilibrium:
    angles: np.ndarray
    ref_bus: int
    max_residual: float
    iterations: int
    balance_bus: int | None = None
    balance_value: float | None = None


def default_ref_bus(case: NetworkCase) -> int:
    return max(case.bus_ids)


def line_flows(case: NetworkCase, angles: np.ndarray, edges=None) -> np.ndarray:
    """Power leaving each bus over its lines, ``C B_l cos(E^T theta - phi)``."""
    e = edges or edge_arrays(case)
    terms = e.b_mag * np.cos(angles[e.tails] - angles[e.heads] - e.phase)
    return np.bincount(e.tails, weights=terms, minlength=case.n)


def edge_weights(angles: np.ndarray, edges) -> np.ndarray:
    """``w_(i,k) = -B_ik sin(theta_i - theta_k - phi_ik)`` per directed edge."""
    return -edges.b_mag * np.sin(angles[edges.tails] - angles[edges.heads] - edges.phase)


def flow_jacobian(n: int, angles: np.ndarray, edges) -> np.ndarray:
    """Derivative of :func:`line_flows` w.r.t. the angles: the Laplacian ``C W E^T``."""
    w = edge_weights(angles, edges)
    lap = np.zeros((n, n))
    np.add.at(lap, (edges.tails, edges.heads), -w)
    lap[np.diag_indices(n)] = np.bincount(edges.tails, weights=w, minlength=n)
    return lap


def residual(case: NetworkCase, angles) -> np.ndarray:
    angles = np.asarray(angles, dtype=float)
    if angles.shape != (case.n,):
        raise ValueError(f"expected {case.n} angles, got shape {angles.shape}")
    return effective_injection(case) - line_flows(case, angles)


def _solve_linear(jac: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    if jac.size and np.linalg.cond(jac) > 1e13:
        raise SingularJacobian("Newton matrix is rank-deficient")
    try:
        return np.linalg.solve(jac, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularJacobian(str(exc)) from None


def solve_equilibrium(case: NetworkCase, opts: SolveOptions | None = None) -> Equilibrium:
    """Newton-Raphson on the non-reference angles (plus one generation unknown
    when ``opts.auto_balance`` names a bus)."""
    opts = opts or SolveOptions()
    n = case.n
    ref_bus = opts.ref_bus if opts.ref_bus is not None else default_ref_bus(case)
    ref = case.index(ref_bus)
    free = np.array([i for i in range(n) if i != ref], dtype=int)
    edges = edge_arrays(case)
    p = effective_injection(case)
    bal = case.index(opts.auto_balance) if opts.auto_balance is not None else None
    p_gen_bal = case.buses[bal].p_gen0 if bal is not None else 0.0

    theta = np.zeros(n) if opts.seed is None else np.array(opts.seed, dtype=float)
    if theta.shape != (n,):
        raise InputError(f"seed must have {n} entries")
    theta = theta - theta[ref]

    eq_rows = np.arange(n) if bal is not None else free

    def mismatch(th, pg):
        pp = p.copy()
        if bal is not None:
            pp[bal] += pg - case.buses[bal].p_gen0
        return pp - line_flows(case, th, edges)

    it = 0
    best = None
    while True:
        f = mismatch(theta, p_gen_bal)
        err = float(np.max(np.abs(f[eq_rows]))) if eq_rows.size else 0.0
        if best is not None:
            if best[0] < err:
                err, theta, p_gen_bal = best
            break
        if err == 0.0:
            break
        if err <= opts.tol:
            # one more step costs little and keeps the reference-bus
            # mismatch, which is not iterated on, inside tol as well
            best = (err, theta.copy(), p_gen_bal)
        if it >= opts.max_iter:
            raise NonConvergence(f"Newton power flow hit {opts.max_iter} iterations", err)
        # d(mismatch)/d(theta) = -L(theta)
        jac = -flow_jacobian(n, theta, edges)[np.ix_(eq_rows, free)]
        if bal is not None:
            col = np.zeros((n, 1))
            col[bal, 0] = 1.0
            jac = np.hstack([jac, col])
        step = _solve_linear(jac, -f[eq_rows])
        theta[free] += step[: free.size]
        if bal is not None:
            p_gen_bal += step[-1]
        if not np.all(np.isfinite(theta)):
            raise NonConvergence("Newton iterate became non-finite", err)
        it += 1

    full = mismatch(theta, p_gen_bal)
    if bal is None and abs(full[ref]) > opts.tol:
        raise UnbalancedCase(
            f"reference bus {ref_bus} mismatch {full[ref]:.3e} exceeds tol; "
            "injections do not balance the network (use auto_balance)",
            float(full[ref]),
        )
    return Equilibrium(
        angles=theta,
        ref_bus=ref_bus,
        max_residual=float(np.max(np.abs(full))),
        iterations=it,
        balance_bus=opts.auto_balance,
        balance_value=float(p_gen_bal) if bal is not None else None,
    )


def solve_radial(case: NetworkCase, opts: SolveOptions | None = None) -> Equilibrium:
    """Leaf-inward recursion on a tree, keeping every line non-critical."""
    opts = opts or SolveOptions()
    if not is_radial(case):
        raise NotRadial(f"case has {len(case.lines)} lines for {case.n} buses")
    n = case.n
    ref_bus = opts.ref_bus if opts.ref_bus is not None else default_ref_bus(case)
    root_bus = opts.auto_balance if opts.auto_balance is not None else ref_bus
    root = case.index(root_bus)
    edges = edge_arrays(case)
    const = {}
    for t, h, b, ph in zip(edges.tails, edges.heads, edges.b_mag, edges.phase):
        const[(int(t), int(h))] = (float(b), float(ph))
    adj = defaultdict(set)
    for t, h in const:
        adj[t].add(h)

    remaining = effective_injection(case).copy()
    degree = {i: len(adj[i]) for i in range(n)}
    parent = {}
    delta = {}  # theta_child - theta_parent
    leaves = [i for i in range(n) if degree[i] == 1 and i != root]
    done = set()
    while leaves:
        i = leaves.pop()
        (k,) = [v for v in adj[i] if v not in done]
        b, ph = const[(i, k)]
        c = remaining[i] / b
        if abs(c) > 1:
            raise NoFeasibleBranch(
                f"line ({case.buses[i].id},{case.buses[k].id}) cannot carry "
                f"{remaining[i]:.4f} p.u. (capacity {b:.4f})"
            )
        d = ph - math.acos(c)
        # second directed weight B sin(phi + d) must also be positive
        if not math.sin(ph + d) > 0:
            raise NoFeasibleBranch(
                f"line ({case.buses[i].id},{case.buses[k].id}) has no non-critical angle"
            )
        d = math.remainder(d, 2 * math.pi)
        parent[i] = k
        delta[i] = d
        bk, phk = const[(k, i)]
        remaining[k] -= bk * math.cos(-d - phk)
        done.add(i)
        degree[k] -= 1
        if degree[k] == 1 and k != root:
            leaves.append(k)

    theta = np.zeros(n)
    order = [root]
    children = defaultdict(list)
    for c_, p_ in parent.items():
        children[p_].append(c_)
    while order:
        u = order.pop()
        for c_ in children[u]:
            theta[c_] = theta[u] + delta[c_]
            order.append(c_)
    theta -= theta[case.index(ref_bus)]

    balance_value = None
    if opts.auto_balance is not None:
        balance_value = case.buses[root].p_gen0 - remaining[root]
        case = case.with_generation(root_bus, balance_value)
    res = residual(case, theta)
    if opts.auto_balance is None and abs(res[root]) > opts.tol:
        raise UnbalancedCase(
            f"root bus {root_bus} mismatch {res[root]:.3e} exceeds tol", float(res[root])
        )
    return Equilibrium(
        angles=theta,
        ref_bus=ref_bus,
        max_residual=float(np.max(np.abs(res))),
        iterations=0,
        balance_bus=opts.auto_balance,
        balance_value=balance_value,
    )


def auto_balance_value(case: NetworkCase, eq: Equilibrium) -> float:
    if eq.balance_bus is None:
        raise ValueError("equilibrium was not solved with auto_balance")
    return eq.balance_value


def balanced_case(case: NetworkCase, eq: Equilibrium) -> NetworkCase:
    """The case with the balance bus generation replaced by the solved value."""
    if eq.balance_bus is None:
        return case
    return case.with_generation(eq.balance_bus, eq.balance_value)


# -- reporting -------------------------------------------------------------


def display_diff_deg(diff_rad: float) -> float:
    """Degrees, shifted by whole turns only when outside (-180, 360]."""
    d = math.degrees(diff_rad)
    while d <= -180:
        d += 360
    while d > 360:
        d -= 360
    return d


def line_angle_diffs(case: NetworkCase, eq: Equilibrium) -> list[tuple[int, int, float]]:
    out = []
    for ln in case.lines:
        d = eq.angles[case.index(ln.from_bus)] - eq.angles[case.index(ln.to_bus)]
        out.append((ln.from_bus, ln.to_bus, display_diff_deg(d)))
    return out


def angles_from_diffs(case: NetworkCase, diffs: dict[tuple[int, int], float], ref_bus: int) -> np.ndarray:
    """Absolute angles (rad) from per-line differences in degrees via a spanning tree."""
    known = {ref_bus: 0.0}
    changed = True
    while changed:
        changed = False
        for (a, b), d in diffs.items():
            if a in known and b not in known:
                known[b] = known[a] - math.radians(d)
                changed = True
            elif b in known and a not in known:
                known[a] = known[b] + math.radians(d)
                changed = True
    missing = set(case.bus_ids) - set(known)
    if missing:
        raise CaseFormatError(f"seed diffs do not reach buses {sorted(missing)}")
    return np.array([known[i] for i in case.bus_ids])


def read_seed(path: str | Path, case: NetworkCase, ref_bus: int | None = None) -> np.ndarray:
    """Read ``bus,angle_deg`` or ``from,to,diff_deg`` (detected by header)."""
    path = Path(path)
    if not path.is_file():
        raise CaseFormatError(f"seed not found: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CaseFormatError(f"{path.name}: empty seed file", row=1)
    header = [h.strip() for h in rows[0]]
    body = [(n_, r) for n_, r in enumerate(rows[1:], start=2) if r and any(c.strip() for c in r)]
    try:
        if header == ["bus", "angle_deg"]:
            ang = {int(r[0]): math.radians(float(r[1])) for _, r in body}
            missing = set(case.bus_ids) - set(ang)
            if missing:
                raise CaseFormatError(f"{path.name}: no angle for buses {sorted(missing)}")
            return np.array([ang[i] for i in case.bus_ids])
        if header == ["from", "to", "diff_deg"]:
            diffs = {(int(r[0]), int(r[1])): float(r[2]) for _, r in body}
            ref = ref_bus if ref_bus is not None else default_ref_bus(case)
            return angles_from_diffs(case, diffs, ref)
    except (ValueError, IndexError) as exc:
        if isinstance(exc, CaseFormatError):
            raise
        raise CaseFormatError(f"{path.name}: malformed seed row ({exc})") from None
    raise CaseFormatError(f"{path.name}: header must be bus,angle_deg or from,to,diff_deg", row=1)


def write_equilibrium(case: NetworkCase, eq: Equilibrium, out_dir: Path) -> None:
    with (out_dir / "equilibrium.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bus", "angle_deg"])
        for bus_id, a in zip(case.bus_ids, eq.angles):
            w.writerow([bus_id, f"{math.degrees(a):.12g}"])
    with (out_dir / "line_angles.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["from", "to", "diff_deg"])
        for a, b, d in line_angle_diffs(case, eq):
            w.writerow([a, b, f"{d:.12g}"])
