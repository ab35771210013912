"""Small-signal certificates and spectral tests for the swing model."""

from __future__ import annotations

import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidMass, NonHomogeneousCase, NotRadial, ZeroWeightEdge
from .flowgraph import (
    CriticalLineReport,
    FlowGraph,
    build_flow_graph,
    critical_lines,
    laplacian_symmetric_part,
)
from .netmodel import BusKind, NetworkCase, effective_injection
from .powerflow import Equilibrium, balanced_case

DEFAULT_EPS1 = 1e-4
DEFAULT_EPS2 = 1e-2


def default_tau(a: np.ndarray) -> float:
    return 1e-8 * max(1.0, float(np.max(np.abs(a))) if a.size else 1.0)


def jacobian_tau(j: np.ndarray) -> float:
    # eigenvalue round-off scales like eps * ||J||; the 1e-8 rule is far too
    # coarse once eps1 pushes ||J|| to ~1e5 while slow modes sit near 1e-4
    return 1e3 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(j))) if j.size else 1.0)


@dataclass(frozen=True)
class InertiaTriple:
    n_plus: int
    n_minus: int
    n_zero: int

    def __iter__(self):
        return iter((self.n_plus, self.n_minus, self.n_zero))


def _classify(vals: np.ndarray, tau: float) -> InertiaTriple:
    re = np.real(vals)
    return InertiaTriple(int(np.sum(re > tau)), int(np.sum(re < -tau)), int(np.sum(np.abs(re) <= tau)))


def inertia(a, tau: float | None = None) -> InertiaTriple:
    a = np.asarray(a, dtype=float)
    tau = default_tau(a) if tau is None else tau
    if tau < 0:
        raise ValueError("tau must be >= 0")
    return _classify(np.linalg.eigvals(a), tau)


@dataclass(frozen=True)
class PsdVerdict:
    psd: bool
    simple_zero: bool
    eigenvalues: np.ndarray

    @property
    def ok(self) -> bool:
        return self.psd and self.simple_zero


def check_psd_simple_zero(s, tau: float | None = None) -> PsdVerdict:
    s = np.asarray(s, dtype=float)
    scale = max(1.0, float(np.max(np.abs(s)))) if s.size else 1.0
    if np.max(np.abs(s - s.T), initial=0.0) > 1e-10 * scale:
        raise ValueError("matrix is not symmetric")
    tau = default_tau(s) if tau is None else tau
    lam = np.linalg.eigvalsh((s + s.T) / 2)
    psd = bool(lam[0] >= -tau)
    second = lam[1] if lam.size > 1 else math.inf
    simple = bool(abs(lam[0]) <= tau < second)
    return PsdVerdict(psd, simple, lam)


@dataclass(frozen=True)
class LosslessCertificate:
    stable_for_all_td: bool
    by_corollary1: bool
    laplacian_psd: PsdVerdict


def certificate_lossless(graph: FlowGraph, tau: float | None = None) -> LosslessCertificate:
    """PSD with a simple zero is necessary and sufficient for every T_D;
    all-positive weights is sufficient only."""
    if not graph.lossless:
        raise ValueError("certificate_lossless requires a lossless graph")
    verdict = check_psd_simple_zero(graph.laplacian, tau)
    return LosslessCertificate(verdict.ok, bool(np.all(graph.weights > 0)), verdict)


@dataclass(frozen=True)
class LossyNoFilterCertificate:
    theorem3: bool
    lemma2: bool
    sym_psd: PsdVerdict

    @property
    def stable(self) -> bool | None:
        """True when either sufficient test passes, None when inconclusive."""
        return True if (self.theorem3 or self.lemma2) else None


def certificate_lossy_nofilter(graph_or_laplacian, tau: float | None = None) -> LossyNoFilterCertificate:
    """Sufficient tests for ``D theta' = P - flows``: sym(L) PSD with simple
    zero, or every directed edge weight positive."""
    if isinstance(graph_or_laplacian, FlowGraph):
        lap = graph_or_laplacian.laplacian
        weights = graph_or_laplacian.weights
    else:
        lap = np.asarray(graph_or_laplacian, dtype=float)
        off = lap[~np.eye(lap.shape[0], dtype=bool)]
        # laplacian-only input: edges are the nonzero off-diagonal entries
        weights = -off[off != 0]
    verdict = check_psd_simple_zero(laplacian_symmetric_part(lap), tau)
    return LossyNoFilterCertificate(verdict.ok, bool(weights.size and np.all(weights > 0)), verdict)


@dataclass(frozen=True)
class CriticalTimeResult:
    r_star: float
    witness: complex | None
    d: float


def lemma3_critical_time_constant(lap, d: float, imag_tol: float | None = None) -> CriticalTimeResult:
    """Smallest filter constant above which a homogeneous network is unstable.

    ``r* = min d Re(mu) / Im(mu)^2`` over Laplacian eigenvalues with nonzero
    imaginary part; infinite for a real spectrum. Below ``r*`` the test says
    nothing.
    """
    if not d > 0:
        raise ValueError("d must be positive")
    lap = np.asarray(lap, dtype=float)
    mu = np.linalg.eigvals(lap)
    tol = default_tau(lap) if imag_tol is None else imag_tol
    best, witness = math.inf, None
    for m in mu:
        if abs(m.imag) > tol:
            r = d * m.real / m.imag**2
            if r < best:
                best, witness = r, complex(m)
    return CriticalTimeResult(best, witness, d)


def homogeneous_droop(case: NetworkCase) -> tuple[float, float]:
    """Common ``(D_R, T_D)`` when every bus is an identical inverter."""
    if any(b.kind is not BusKind.A for b in case.buses):
        raise NonHomogeneousCase("every bus must be an inverter (kind A)")
    dr = {b.d_droop for b in case.buses}
    td = {b.t_filter for b in case.buses}
    dl = {b.d_load for b in case.buses}
    if len(dr) != 1 or len(td) != 1 or dl != {0.0}:
        raise NonHomogeneousCase("droop gains, filter constants or load coefficients differ")
    return dr.pop(), td.pop()


def is_homogeneous(case: NetworkCase) -> bool:
    try:
        homogeneous_droop(case)
    except NonHomogeneousCase:
        return False
    return True


@dataclass(frozen=True)
class TreeSymmetrizer:
    k_diag: np.ndarray
    l_sym: np.ndarray
    exists: bool
    psd: PsdVerdict | None

    @property
    def k_matrix(self) -> np.ndarray:
        return np.diag(self.k_diag)


def tree_symmetrizer(graph_or_laplacian, root_bus: int | None = None) -> TreeSymmetrizer:
    """Diagonal ``K`` with ``K L K^-1`` symmetric, for a radial graph.

    ``K`` is fixed up to scale; the root (reference bus by default) gets 1.
    Along each tree edge ``k_child = k_parent * sqrt(L[p, c] / L[c, p])``.
    A bare matrix is read as a graph on buses ``1..n`` whose lines are the
    nonzero off-diagonal pairs, rooted at bus ``n``.
    """
    if isinstance(graph_or_laplacian, FlowGraph):
        graph = graph_or_laplacian
        lap = graph.laplacian
        pairs = [(graph.index(a), graph.index(b)) for a, b in graph.lines]
        if graph.zero_weight:
            raise ZeroWeightEdge(f"zero-weight edges {list(graph.zero_weight)}")
        root = graph.index(graph.ref_bus if root_bus is None else root_bus)
    else:
        lap = np.asarray(graph_or_laplacian, dtype=float)
        nz = (lap != 0) | (lap.T != 0)
        pairs = [(i, k) for i in range(lap.shape[0]) for k in range(i + 1, lap.shape[0]) if nz[i, k]]
        zero = [(i + 1, k + 1) for i, k in pairs if lap[i, k] == 0 or lap[k, i] == 0]
        if zero:
            raise ZeroWeightEdge(f"zero-weight edges {zero}")
        root = lap.shape[0] - 1 if root_bus is None else root_bus - 1
    n = lap.shape[0]
    if len(pairs) != n - 1:
        raise NotRadial(f"graph has {len(pairs)} lines for {n} buses")
    adj = defaultdict(list)
    for i, k in pairs:
        adj[i].append(k)
        adj[k].append(i)
    k_diag = np.ones(n)
    exists = True
    seen = {root}
    stack = [root]
    while stack:
        p = stack.pop()
        for c in adj[p]:
            if c in seen:
                continue
            seen.add(c)
            stack.append(c)
            ratio = lap[p, c] / lap[c, p]
            if not ratio > 0:
                exists = False
                continue
            k_diag[c] = k_diag[p] * math.sqrt(ratio)
    if not exists:
        return TreeSymmetrizer(k_diag, lap.copy(), False, None)
    l_sym = (k_diag[:, None] * lap) / k_diag[None, :]
    l_sym_sym = (l_sym + l_sym.T) / 2
    return TreeSymmetrizer(k_diag, l_sym, True, check_psd_simple_zero(l_sym_sym))


@dataclass(frozen=True)
class SwingMatrices:
    m_diag: np.ndarray
    d_diag: np.ndarray
    p_vec: np.ndarray
    eps1: float
    eps2: float


def swing_matrices(
    case: NetworkCase,
    td_override: float | None = None,
    eps1: float = DEFAULT_EPS1,
    eps2: float = DEFAULT_EPS2,
    require_mass: bool = True,
) -> SwingMatrices:
    """Inertia ``M`` and damping ``D`` diagonals with the small-parameter
    substitutions for non-inverter buses."""
    if not (eps1 > 0 and eps2 > 0):
        raise ValueError("eps1 and eps2 must be positive")
    if not (eps2**2 / 10 <= eps1 <= eps2**2 * 10):
        warnings.warn(f"eps1={eps1:g} is not within a decade of eps2^2={eps2**2:g}", stacklevel=2)
    m = np.empty(case.n)
    d = np.empty(case.n)
    for i, b in enumerate(case.buses):
        if b.kind is BusKind.A:
            td = b.t_filter if td_override is None else td_override
            m[i] = b.d_droop * td
            d[i] = b.d_load + b.d_droop
        else:
            m[i] = eps1
            d[i] = eps2 if b.kind is BusKind.C else b.d_load
    if require_mass and np.any(m <= 0):
        bad = [case.buses[i].id for i in np.flatnonzero(m <= 0)]
        raise InvalidMass(f"non-positive inertia at buses {bad} (set t_filter or td_override)")
    if np.any(d <= 0):
        raise InvalidMass("non-positive damping")
    return SwingMatrices(m, d, effective_injection(case), eps1, eps2)


def jacobian_from_parts(lap: np.ndarray, m_diag: np.ndarray, d_diag: np.ndarray) -> np.ndarray:
    n = lap.shape[0]
    j = np.zeros((2 * n, 2 * n))
    j[:n, n:] = np.eye(n)
    j[n:, :n] = -lap / m_diag[:, None]
    j[n:, n:] = -np.diag(d_diag / m_diag)
    return j


def assemble_jacobian(
    case: NetworkCase,
    graph: FlowGraph,
    td_override: float | None = None,
    eps1: float = DEFAULT_EPS1,
    eps2: float = DEFAULT_EPS2,
) -> np.ndarray:
    sw = swing_matrices(case, td_override, eps1, eps2)
    return jacobian_from_parts(graph.laplacian, sw.m_diag, sw.d_diag)


@dataclass(frozen=True)
class JacobianVerdict:
    eigenvalues: np.ndarray
    stable: bool
    unstable_modes: np.ndarray
    tau: float
    inertia: InertiaTriple
    trivial_index: int
    max_real: float  # largest real part excluding the synchronisation mode


def _trivial_mode(j: np.ndarray, vals: np.ndarray, vecs: np.ndarray) -> int:
    n2 = j.shape[0]
    v0 = np.zeros(n2)
    v0[: n2 // 2] = 1.0
    v0 /= np.linalg.norm(v0)
    align = np.abs(vecs.conj().T @ v0) / np.linalg.norm(vecs, axis=0)
    best = int(np.argmax(align))
    if align[best] > 0.99:
        return best
    return int(np.argmin(np.abs(vals)))


def jacobian_verdict(j, tau: float | None = None) -> JacobianVerdict:
    """Stable iff the only eigenvalue not in the open left half plane is the
    synchronisation mode at zero."""
    j = np.asarray(j, dtype=float)
    tau = jacobian_tau(j) if tau is None else tau
    vals, vecs = np.linalg.eig(j)
    triple = _classify(vals, tau)
    triv = _trivial_mode(j, vals, vecs)
    others = np.delete(vals, triv)
    stable = triple.n_plus == 0 and triple.n_zero == 1 and abs(vals[triv].real) <= tau
    return JacobianVerdict(
        eigenvalues=vals,
        stable=bool(stable),
        unstable_modes=vals[np.real(vals) > tau],
        tau=tau,
        inertia=triple,
        trivial_index=triv,
        max_real=float(np.max(others.real)) if others.size else -math.inf,
    )


@dataclass(frozen=True)
class StabilityReport:
    case_name: str
    ref_bus: int
    lossless: bool
    radial: bool
    critical: CriticalLineReport
    laplacian: np.ndarray
    lossless_cert: LosslessCertificate | None
    nofilter_cert: LossyNoFilterCertificate
    lemma3: CriticalTimeResult | None
    symmetrizer: TreeSymmetrizer | None
    verdicts: dict = field(default_factory=dict)  # T_D -> JacobianVerdict
    eps1: float = DEFAULT_EPS1
    eps2: float = DEFAULT_EPS2
    balance_bus: int | None = None
    balance_value: float | None = None


def full_report(
    case: NetworkCase,
    eq: Equilibrium,
    td_list,
    eps1: float = DEFAULT_EPS1,
    eps2: float = DEFAULT_EPS2,
) -> StabilityReport:
    case = balanced_case(case, eq)
    graph = build_flow_graph(case, eq)
    radial = len(case.lines) == case.n - 1
    lemma3 = None
    if is_homogeneous(case):
        dr, _ = homogeneous_droop(case)
        lemma3 = lemma3_critical_time_constant(graph.laplacian, dr)
    sym = None
    if radial and not graph.zero_weight:
        sym = tree_symmetrizer(graph)
    verdicts = {}
    for td in td_list:
        verdicts[float(td)] = jacobian_verdict(assemble_jacobian(case, graph, td, eps1, eps2))
    return StabilityReport(
        case_name=case.name,
        ref_bus=eq.ref_bus,
        lossless=graph.lossless,
        radial=radial,
        critical=critical_lines(graph),
        laplacian=graph.laplacian,
        lossless_cert=certificate_lossless(graph) if graph.lossless else None,
        nofilter_cert=certificate_lossy_nofilter(graph),
        lemma3=lemma3,
        symmetrizer=sym,
        verdicts=verdicts,
        eps1=eps1,
        eps2=eps2,
        balance_bus=eq.balance_bus,
        balance_value=eq.balance_value,
    )
