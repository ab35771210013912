"""Independent reference computations used to freeze expected values.

Nothing here imports the package's flow or Laplacian code; power flows come
from complex nodal arithmetic ``S = V conj(Y V)`` and derivatives from
central differences.
"""

from __future__ import annotations

import cmath
import math

import numpy as np
from scipy.optimize import linear_sum_assignment


def ybus(case) -> np.ndarray:
    """Complex bus admittance matrix with series lines only."""
    pos = {b.id: i for i, b in enumerate(case.buses)}
    y = np.zeros((case.n, case.n), dtype=complex)
    for ln in case.lines:
        i, k = pos[ln.from_bus], pos[ln.to_bus]
        ys = 1.0 / complex(ln.r, ln.x)
        y[i, i] += ys
        y[k, k] += ys
        y[i, k] -= ys
        y[k, i] -= ys
    return y


def net_injection(case, angles) -> np.ndarray:
    """Real power leaving each bus, diagonal (shunt-like) term included."""
    v = np.array([b.v_mag for b in case.buses]) * np.exp(1j * np.asarray(angles, float))
    return (v * np.conj(ybus(case) @ v)).real


def mismatch(case, angles) -> np.ndarray:
    pg = np.array([b.p_gen0 for b in case.buses])
    pl = np.array([b.p_load0 for b in case.buses])
    return pg - pl - net_injection(case, angles)


def fd_laplacian(case, angles, h: float = 1e-6) -> np.ndarray:
    """``d(net_injection)/d(theta)`` by central differences."""
    angles = np.asarray(angles, float)
    n = case.n
    out = np.empty((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        out[:, k] = (net_injection(case, angles + e) - net_injection(case, angles - e)) / (2 * h)
    return out


def admittance_polar(r: float, x: float) -> tuple[float, float]:
    """Magnitude and angle (deg) of ``-1/(r + jx)`` by hand."""
    y = -1.0 / complex(r, x)
    return abs(y), math.degrees(cmath.phase(y))


def quadratic_roots(lap, m: float, d: float) -> np.ndarray:
    """Roots of ``m lam^2 + d lam + mu = 0`` for every eigenvalue ``mu`` of ``lap``."""
    out = []
    for mu in np.linalg.eigvals(np.asarray(lap, float)):
        disc = cmath.sqrt(d * d - 4 * m * mu)
        out += [(-d + disc) / (2 * m), (-d - disc) / (2 * m)]
    return np.array(out)


def spectrum_distance(a, b) -> float:
    """Largest gap after optimally pairing two multisets of complex numbers."""
    a, b = np.asarray(a, complex), np.asarray(b, complex)
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def wrap_deg(d: float) -> float:
    """Map an angle difference to (-180, 180]."""
    return -((-d + 180.0) % 360.0 - 180.0)


def two_bus_angle_deg(p: float, b: float) -> float:
    """Lossless 2-bus transfer: ``p = b sin(delta)``."""
    return math.degrees(math.asin(p / b))
