"""Active power flow graph at an operating point and its Laplacian."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .netmodel import NetworkCase, edge_arrays, is_lossless
from .powerflow import Equilibrium, edge_weights


@dataclass(frozen=True)
class FlowGraph:
    """Directed graph with two edges per line, ordered by sorted line key.

    ``incidence`` is ``E`` (+1 at tail, -1 at head), ``orientation`` is ``C``;
    ``laplacian`` is ``C W E^T``. Zero-weight edges stay in the graph and are
    listed in ``zero_weight``.
    """

    bus_ids: tuple[int, ...]
    lines: tuple[tuple[int, int], ...]
    edges: tuple[tuple[int, int], ...]
    incidence: np.ndarray
    orientation: np.ndarray
    b_mag: np.ndarray
    phase: np.ndarray
    weights: np.ndarray
    laplacian: np.ndarray
    angles: np.ndarray
    ref_bus: int
    lossless: bool
    zero_weight: tuple[tuple[int, int], ...]

    @property
    def n(self) -> int:
        return len(self.bus_ids)

    @property
    def weight_matrix(self) -> np.ndarray:
        return np.diag(self.weights)

    def index(self, bus_id: int) -> int:
        return self.bus_ids.index(bus_id)


def build_flow_graph(case: NetworkCase, eq: Equilibrium) -> FlowGraph:
    e = edge_arrays(case)
    n, m = case.n, e.tails.size
    inc = np.zeros((n, m))
    inc[e.tails, np.arange(m)] = 1.0
    inc[e.heads, np.arange(m)] = -1.0
    ori = (inc == 1.0).astype(float)
    w = edge_weights(eq.angles, e)
    lap = ori @ np.diag(w) @ inc.T
    ids = tuple(case.bus_ids)
    edges = tuple((ids[t], ids[h]) for t, h in zip(e.tails, e.heads))
    zero = tuple(edge for edge, wk in zip(edges, w) if wk == 0.0)
    return FlowGraph(
        bus_ids=ids,
        lines=e.lines,
        edges=edges,
        incidence=inc,
        orientation=ori,
        b_mag=e.b_mag,
        phase=e.phase,
        weights=w,
        laplacian=lap,
        angles=np.asarray(eq.angles, dtype=float).copy(),
        ref_bus=eq.ref_bus,
        lossless=is_lossless(case),
        zero_weight=zero,
    )


def laplacian_from_offdiagonals(graph: FlowGraph) -> np.ndarray:
    """Assemble the Laplacian entry by entry (cross-check for ``C W E^T``)."""
    lap = np.zeros((graph.n, graph.n))
    for (a, b), w in zip(graph.edges, graph.weights):
        lap[graph.index(a), graph.index(b)] = -w
    lap[np.diag_indices(graph.n)] = -lap.sum(axis=1)
    return lap


def laplacian_symmetric_part(graph_or_matrix) -> np.ndarray:
    lap = graph_or_matrix.laplacian if isinstance(graph_or_matrix, FlowGraph) else np.asarray(graph_or_matrix, float)
    return (lap + lap.T) / 2


@dataclass(frozen=True)
class LineStatus:
    from_bus: int
    to_bus: int
    delta_deg: float
    is_critical: bool
    lossless_margin_deg: float
    lossy_conditions_deg: tuple[float, float]
    margin_deg: float
    weights: tuple[float, float]


@dataclass(frozen=True)
class CriticalLineReport:
    lines: tuple[LineStatus, ...]

    @property
    def critical(self) -> list[tuple[int, int]]:
        return [(s.from_bus, s.to_bus) for s in self.lines if s.is_critical]

    @property
    def any_critical(self) -> bool:
        return any(s.is_critical for s in self.lines)


def _fold_deg(a: float) -> float:
    """|a| mod 360 folded onto [0, 180]."""
    r = math.fmod(abs(a), 360.0)
    return 360.0 - r if r > 180.0 else r


def critical_lines(graph: FlowGraph) -> CriticalLineReport:
    out = []
    for j, (a, b) in enumerate(graph.lines):
        w_fwd, w_rev = graph.weights[2 * j], graph.weights[2 * j + 1]
        delta = graph.angles[graph.index(a)] - graph.angles[graph.index(b)]
        d_deg = math.degrees(delta)
        phi = math.degrees(graph.phase[2 * j])
        conds = tuple(math.fmod(phi + s * abs(d_deg), 360.0) % 360.0 for s in (1, -1))
        # signed distance of each condition to the boundary of (0, 180)
        margin = min(90.0 - abs(((c - 90.0 + 180.0) % 360.0) - 180.0) for c in conds)
        out.append(
            LineStatus(
                from_bus=a,
                to_bus=b,
                delta_deg=d_deg,
                is_critical=not (w_fwd > 0 and w_rev > 0),
                lossless_margin_deg=90.0 - _fold_deg(d_deg),
                lossy_conditions_deg=conds,
                margin_deg=margin,
                weights=(float(w_fwd), float(w_rev)),
            )
        )
    return CriticalLineReport(tuple(out))


def write_laplacian(graph: FlowGraph, path: Path) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in graph.laplacian:
            w.writerow([f"{v:.12g}" for v in row])


def write_critical_lines(report: CriticalLineReport, path: Path) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["from", "to", "is_critical", "margin_deg"])
        for s in report.lines:
            w.writerow([s.from_bus, s.to_bus, str(s.is_critical).lower(), f"{s.margin_deg:.12g}"])
