"""Transient simulation of the swing models and transient metrics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import NewtonStageFailure
from .netmodel import BusKind, NetworkCase, edge_arrays
from .powerflow import Equilibrium, balanced_case, flow_jacobian, line_flows, residual
from .stability import DEFAULT_EPS1, DEFAULT_EPS2, swing_matrices

METHODS = ("implicit_trapezoidal", "explicit_rk4")
MODELS = ("second_order", "first_order", "linear")


@dataclass(frozen=True)
class Disturbance:
    angle_offsets: dict[int, float] = field(default_factory=dict)
    freq_offsets: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        for v in list(self.angle_offsets.values()) + list(self.freq_offsets.values()):
            if not math.isfinite(v):
                raise ValueError("disturbance offsets must be finite")

    def vectors(self, bus_ids) -> tuple[np.ndarray, np.ndarray]:
        pos = {b: i for i, b in enumerate(bus_ids)}
        dth = np.zeros(len(pos))
        dw = np.zeros(len(pos))
        for target, src in ((dth, self.angle_offsets), (dw, self.freq_offsets)):
            for b, v in src.items():
                if b not in pos:
                    raise KeyError(f"disturbance on unknown bus {b}")
                target[pos[b]] += v
        return dth, dw


def default_disturbance(case: NetworkCase, magnitude: float = 0.01) -> Disturbance:
    inverters = [b.id for b in case.buses if b.kind is BusKind.A]
    target = min(inverters) if inverters else min(case.bus_ids)
    return Disturbance({target: magnitude})


@dataclass(frozen=True)
class SimOptions:
    t_end: float = 10.0
    h: float = 1e-3
    method: str = "implicit_trapezoidal"
    eps1: float = DEFAULT_EPS1
    eps2: float = DEFAULT_EPS2
    td_override: float | None = None
    blowup: float = 10.0
    sample_stride: int = 1
    newton_tol: float = 1e-11
    newton_max_iter: int = 12

    def __post_init__(self):
        if not (self.t_end > 0 and self.h > 0 and self.blowup > 0):
            raise ValueError("t_end, h and blowup must be positive")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    angles: np.ndarray  # (samples, n), absolute, radians
    freqs: np.ndarray  # (samples, n), rad/s
    model: str
    diverged: bool
    bus_ids: tuple[int, ...]
    ref_bus: int
    base_angles: np.ndarray

    def relative_angles(self, relative_to: int | None = None) -> np.ndarray:
        j = self.bus_ids.index(self.ref_bus if relative_to is None else relative_to)
        return self.angles - self.angles[:, [j]]

    def deviations(self, relative_to: int | None = None, base=None) -> np.ndarray:
        j = self.bus_ids.index(self.ref_bus if relative_to is None else relative_to)
        base = self.base_angles if base is None else np.asarray(base, dtype=float)
        return self.relative_angles(relative_to) - (base - base[j])


# -- integrators -------------------------------------------------------------


class _Stepper:
    """Fixed-step implicit trapezoidal rule with a Newton stage solve.

    The iteration matrix ``I - h/2 J`` is factored once and reused across
    steps (simplified Newton). A stage that fails to contract is retried with
    full Newton, then by splitting the step in halves; failure after
    ``max_split`` halvings is fatal.
    """

    max_split = 10

    def __init__(self, f, jac, dim, h, tol, max_iter):
        self.f, self.jac, self.h = f, jac, h
        self.tol, self.max_iter = tol, max_iter
        self.eye = np.eye(dim)
        self.lu = None

    def _factor(self, x, h):
        return lu_factor(self.eye - 0.5 * h * self.jac(x))

    def _stage(self, x, fx, h, lu=None):
        """Solve ``y = x + h/2 (f(x) + f(y))``; ``lu=None`` means full Newton."""
        y = x.copy()
        base = x + 0.5 * h * fx
        prev = math.inf
        for it in range(self.max_iter):
            g = y - base - 0.5 * h * self.f(y)
            dy = lu_solve(lu if lu is not None else self._factor(y, h), -g)
            y += dy
            size = float(np.max(np.abs(dy)))
            if not math.isfinite(size):
                return None
            if size <= self.tol * max(1.0, float(np.max(np.abs(y)))):
                return y
            if it > 0 and size > 0.9 * prev:
                return None
            prev = size
        return None

    def _robust(self, x, fx, h, depth):
        y = self._stage(x, fx, h)
        if y is not None:
            return y
        if depth >= self.max_split:
            raise NewtonStageFailure(f"trapezoidal stage did not converge (step {h:.3g})")
        mid = self._robust(x, fx, h / 2, depth + 1)
        return self._robust(mid, self.f(mid), h / 2, depth + 1)

    def step(self, x, fx):
        if self.lu is None:
            self.lu = self._factor(x, self.h)
        y = self._stage(x, fx, self.h, self.lu)
        if y is None:
            self.lu = self._factor(x, self.h)
            y = self._stage(x, fx, self.h, self.lu)
        if y is None:
            y = self._robust(x, fx, self.h, 0)
        return y


def _rk4_step(f, x, fx, h):
    k1 = fx
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _integrate(f, jac, x0, opts: SimOptions, deviation):
    """March to ``t_end``; ``deviation(x)`` gives the blow-up monitor value.

    Returns ``(times, states, diverged)``. On blow-up the last sample is moved
    back along the final step to where the monitor equals ``opts.blowup``.
    """
    steps = max(1, int(round(opts.t_end / opts.h)))
    h = opts.t_end / steps
    stride = opts.sample_stride
    n_samples = steps // stride + 2
    times = np.empty(n_samples)
    states = np.empty((n_samples, x0.size))
    times[0], states[0] = 0.0, x0
    count = 1
    stepper = None
    if opts.method == "implicit_trapezoidal":
        stepper = _Stepper(f, jac, x0.size, h, opts.newton_tol, opts.newton_max_iter)
    x = x0.copy()
    fx = f(x)
    diverged = False
    for k in range(1, steps + 1):
        if stepper is not None:
            y = stepper.step(x, fx)
        else:
            y = _rk4_step(f, x, fx, h)
        if not np.all(np.isfinite(y)) or deviation(y) > opts.blowup:
            lo, hi = 0.0, 1.0
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                z = x + mid * (y - x) if np.all(np.isfinite(y)) else x
                if deviation(z) > opts.blowup:
                    hi = mid
                else:
                    lo = mid
            z = x + hi * (y - x) if np.all(np.isfinite(y)) else x
            times[count], states[count] = (k - 1 + hi) * h, z
            count += 1
            diverged = True
            break
        x = y
        fx = f(x)
        if k % stride == 0 or k == steps:
            times[count], states[count] = k * h, x
            count += 1
    return times[:count], states[:count], diverged


# -- models ------------------------------------------------------------------


def _prepare(case, eq):
    case = balanced_case(case, eq)
    return case, edge_arrays(case)


def _monitor(n, ref, base, split):
    rel0 = base - base[ref]

    def deviation(x):
        th = x[:split] if split else x
        return float(np.max(np.abs(th - th[ref] - rel0)))

    return deviation


def simulate_second_order(case: NetworkCase, eq: Equilibrium, dist: Disturbance | None = None,
                          opts: SimOptions | None = None) -> Trajectory:
    """Integrate ``M theta'' = P - D theta' - flows(theta)``."""
    opts = opts or SimOptions()
    case, edges = _prepare(case, eq)
    dist = dist if dist is not None else default_disturbance(case)
    sw = swing_matrices(case, opts.td_override, opts.eps1, opts.eps2)
    n = case.n
    minv = 1.0 / sw.m_diag
    p, dd = sw.p_vec, sw.d_diag

    def f(x):
        th, w = x[:n], x[n:]
        return np.concatenate([w, minv * (p - dd * w - line_flows(case, th, edges))])

    def jac(x):
        j = np.zeros((2 * n, 2 * n))
        j[:n, n:] = np.eye(n)
        j[n:, :n] = -minv[:, None] * flow_jacobian(n, x[:n], edges)
        j[n:, n:] = np.diag(-minv * dd)
        return j

    dth, dw = dist.vectors(case.bus_ids)
    x0 = np.concatenate([eq.angles + dth, dw])
    ref = case.index(eq.ref_bus)
    t, xs, div = _integrate(f, jac, x0, opts, _monitor(n, ref, eq.angles, n))
    return Trajectory(t, xs[:, :n], xs[:, n:], "second_order", div, tuple(case.bus_ids),
                      eq.ref_bus, np.asarray(eq.angles, float).copy())


def simulate_first_order(case: NetworkCase, eq: Equilibrium, dist: Disturbance | None = None,
                         opts: SimOptions | None = None) -> Trajectory:
    """Integrate the no-filter model ``D theta' = P - flows(theta)``."""
    opts = opts or SimOptions()
    case, edges = _prepare(case, eq)
    dist = dist if dist is not None else default_disturbance(case)
    sw = swing_matrices(case, opts.td_override, opts.eps1, opts.eps2, require_mass=False)
    n = case.n
    dinv = 1.0 / sw.d_diag
    p = sw.p_vec

    def f(th):
        return dinv * (p - line_flows(case, th, edges))

    def jac(th):
        return -dinv[:, None] * flow_jacobian(n, th, edges)

    dth, _ = dist.vectors(case.bus_ids)
    x0 = eq.angles + dth
    ref = case.index(eq.ref_bus)
    t, xs, div = _integrate(f, jac, x0, opts, _monitor(n, ref, eq.angles, 0))
    freqs = np.array([f(x) for x in xs])
    return Trajectory(t, xs, freqs, "first_order", div, tuple(case.bus_ids),
                      eq.ref_bus, np.asarray(eq.angles, float).copy())


def simulate_linear(j, dist: Disturbance | None = None, opts: SimOptions | None = None,
                    bus_ids=None, ref_bus: int | None = None, base_angles=None) -> Trajectory:
    """Integrate ``dx' = J dx``; angles are reported as ``base + dtheta``."""
    opts = opts or SimOptions()
    j = np.asarray(j, dtype=float)
    n = j.shape[0] // 2
    bus_ids = tuple(bus_ids) if bus_ids is not None else tuple(range(1, n + 1))
    ref_bus = ref_bus if ref_bus is not None else max(bus_ids)
    base = np.zeros(n) if base_angles is None else np.asarray(base_angles, dtype=float)
    if dist is None:
        dist = Disturbance({min(bus_ids): 0.01})
    dth, dw = dist.vectors(bus_ids)
    x0 = np.concatenate([dth, dw])

    def f(x):
        return j @ x

    def jac(x):
        return j

    ref = bus_ids.index(ref_bus)
    t, xs, div = _integrate(f, jac, x0, opts, _monitor(n, ref, np.zeros(n), n))
    return Trajectory(t, base + xs[:, :n], xs[:, n:], "linear", div, bus_ids, ref_bus, base.copy())


# -- metrics -----------------------------------------------------------------


def overshoot(traj: Trajectory, eq: Equilibrium | None = None, relative_to: int | None = None) -> np.ndarray:
    base = None if eq is None else eq.angles
    return np.max(np.abs(traj.deviations(relative_to, base)), axis=0)


def settling_time(traj: Trajectory, eq: Equilibrium | None = None, band_fraction: float = 0.02,
                  relative_to: int | None = None) -> np.ndarray:
    """Per-bus time after which the deviation stays inside ``band_fraction``
    of its peak; ``inf`` when the band is still being left at the horizon."""
    if traj.diverged:
        raise ValueError("settling time is undefined for a diverged trajectory")
    base = None if eq is None else eq.angles
    dev = np.abs(traj.deviations(relative_to, base))
    peak = dev.max(axis=0)
    out = np.zeros(dev.shape[1])
    for i in range(dev.shape[1]):
        if peak[i] == 0:
            continue
        outside = np.flatnonzero(dev[:, i] > band_fraction * peak[i])
        last = outside[-1]
        out[i] = math.inf if last == dev.shape[0] - 1 else traj.times[last + 1]
    return out


def residual_history(case: NetworkCase, eq: Equilibrium, traj: Trajectory) -> np.ndarray:
    """Max power mismatch at each sample (no-filter model diagnostics)."""
    case = balanced_case(case, eq)
    return np.array([np.max(np.abs(residual(case, th))) for th in traj.angles])


# -- files -------------------------------------------------------------------


def write_trajectory(traj: Trajectory, path: Path) -> None:
    rel = traj.relative_angles()
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"theta_{b}" for b in traj.bus_ids] + [f"freq_{b}" for b in traj.bus_ids])
        for t, th, fr in zip(traj.times, rel, traj.freqs):
            w.writerow([f"{t:.12g}"] + [f"{v:.12g}" for v in th] + [f"{v:.12g}" for v in fr])


def write_metrics(traj: Trajectory, eq: Equilibrium, path: Path) -> None:
    over = overshoot(traj, eq)
    settle = settling_time(traj, eq) if not traj.diverged else np.full(over.size, math.nan)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bus", "settling_s", "overshoot_rad"])
        for b, s, o in zip(traj.bus_ids, settle, over):
            w.writerow([b, f"{s:.12g}", f"{o:.12g}"])
        w.writerow(["diverged", str(traj.diverged).lower(), ""])
