"""Microgrid case data: buses, lines, case files and bus admittances."""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import CaseFormatError

BUS_HEADER = ["bus", "kind", "p_gen", "p_load", "v_mag", "d_droop", "d_load", "t_filter"]
LINE_HEADER = ["from", "to", "r", "x"]

BUILTIN_PREFIX = "builtin:"
BUILTIN_CASES = ("ieee9-lossless", "lossy3", "ieee9-radial-lossy")
# Bus whose generation is solved for when a builtin is loaded without an
# explicit balance choice; the published injections are rounded and do not
# absorb the ohmic losses exactly.
BUILTIN_BALANCE = {"lossy3": 1, "ieee9-radial-lossy": 1}


class BusKind(str, Enum):
    A = "A"  # inverter with droop control
    B = "B"  # frequency-dependent load, no inverter
    C = "C"  # neither


@dataclass(frozen=True)
class Bus:
    id: int
    kind: BusKind
    p_gen0: float
    p_load0: float
    v_mag: float
    d_droop: float
    d_load: float
    t_filter: float

    def __post_init__(self):
        object.__setattr__(self, "kind", BusKind(self.kind))
        for name in ("p_gen0", "p_load0", "v_mag", "d_droop", "d_load", "t_filter"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise CaseFormatError(f"bus {self.id}: {name} is not finite", field=name)
        if self.v_mag <= 0:
            raise CaseFormatError(f"bus {self.id}: v_mag must be positive", field="v_mag")
        for name in ("d_droop", "d_load", "t_filter"):
            if getattr(self, name) < 0:
                raise CaseFormatError(f"bus {self.id}: {name} must be >= 0", field=name)
        expected = classify(self.d_droop, self.d_load)
        if expected is not self.kind:
            raise CaseFormatError(
                f"bus {self.id}: kind {self.kind.value} inconsistent with "
                f"d_droop={self.d_droop}, d_load={self.d_load} (expected {expected.value})",
                field="kind",
            )
        if self.kind is not BusKind.A and self.p_gen0 != 0:
            raise CaseFormatError(
                f"bus {self.id}: kind {self.kind.value} bus cannot generate (p_gen must be 0)",
                field="p_gen",
            )


def classify(d_droop: float, d_load: float) -> BusKind:
    if d_droop > 0:
        return BusKind.A
    if d_load > 0:
        return BusKind.B
    return BusKind.C


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    r: float
    x: float

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise CaseFormatError(f"self-loop at bus {self.from_bus}", field="to")
        if not (math.isfinite(self.r) and self.r >= 0):
            raise CaseFormatError("r must be finite and >= 0", field="r")
        if not (math.isfinite(self.x) and self.x > 0):
            raise CaseFormatError("x must be finite and > 0", field="x")

    @property
    def key(self) -> tuple[int, int]:
        return (self.from_bus, self.to_bus)


@dataclass(frozen=True)
class NetworkCase:
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    name: str = ""
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "lines", tuple(self.lines))
        index = {}
        for pos, bus in enumerate(self.buses):
            if bus.id in index:
                raise CaseFormatError(f"duplicate bus id {bus.id}", field="bus")
            index[bus.id] = pos
        object.__setattr__(self, "_index", index)
        pairs = set()
        for line in self.lines:
            for end in line.key:
                if end not in index:
                    raise CaseFormatError(f"line {line.key} references unknown bus {end}", field="from")
            pair = frozenset(line.key)
            if pair in pairs:
                raise CaseFormatError(f"duplicate line between buses {line.key}", field="to")
            pairs.add(pair)
        if self.buses and not _connected(self):
            raise CaseFormatError("line graph is disconnected", field="lines")

    @property
    def n(self) -> int:
        return len(self.buses)

    @property
    def bus_ids(self) -> list[int]:
        return [b.id for b in self.buses]

    def index(self, bus_id: int) -> int:
        try:
            return self._index[bus_id]
        except KeyError:
            raise KeyError(f"unknown bus {bus_id}") from None

    def bus(self, bus_id: int) -> Bus:
        return self.buses[self.index(bus_id)]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(b, name) for b in self.buses], dtype=float)

    def kinds(self) -> list[BusKind]:
        return [b.kind for b in self.buses]

    def with_generation(self, bus_id: int, p_gen: float) -> "NetworkCase":
        buses = list(self.buses)
        pos = self.index(bus_id)
        buses[pos] = replace(buses[pos], p_gen0=float(p_gen))
        return replace(self, buses=tuple(buses))

    def without_line(self, a: int, b: int) -> "NetworkCase":
        lines = [ln for ln in self.lines if frozenset(ln.key) != frozenset((a, b))]
        if len(lines) == len(self.lines):
            raise KeyError(f"no line between {a} and {b}")
        return replace(self, lines=tuple(lines))


def _connected(case: NetworkCase) -> bool:
    adj = {b.id: [] for b in case.buses}
    for ln in case.lines:
        adj[ln.from_bus].append(ln.to_bus)
        adj[ln.to_bus].append(ln.from_bus)
    start = case.buses[0].id
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return len(seen) == case.n


@dataclass(frozen=True)
class AdmittanceMatrix:
    """Off-diagonal bus admittances ``Y_ik∠φ_ik = G_ik + jB_ik`` and ``G_ii``.

    Dense ``n x n`` arrays indexed by bus position; entries without a line
    are zero.
    """

    y_mag: np.ndarray
    y_ang: np.ndarray
    g: np.ndarray
    b: np.ndarray
    g_self: np.ndarray


def line_admittance(r: float, x: float) -> tuple[float, float, float, float]:
    """Return ``(Y, phi, G, B)`` of the off-diagonal entry ``-1/(r + jx)``."""
    if r == 0:
        # exact pi/2; atan2 on a computed zero could land on either side
        return 1.0 / x, math.pi / 2, 0.0, 1.0 / x
    y = -1.0 / complex(r, x)
    return abs(y), math.atan2(y.imag, y.real), y.real, y.imag


def bus_admittance(case: NetworkCase) -> AdmittanceMatrix:
    n = case.n
    y_mag = np.zeros((n, n))
    y_ang = np.zeros((n, n))
    g = np.zeros((n, n))
    b = np.zeros((n, n))
    for ln in case.lines:
        i, k = case.index(ln.from_bus), case.index(ln.to_bus)
        mag, ang, gik, bik = line_admittance(ln.r, ln.x)
        for p, q in ((i, k), (k, i)):
            y_mag[p, q], y_ang[p, q], g[p, q], b[p, q] = mag, ang, gik, bik
    g_self = -g.sum(axis=1)
    return AdmittanceMatrix(y_mag, y_ang, g, b, g_self)


@dataclass(frozen=True)
class EdgeArrays:
    """Directed edges in canonical order with per-edge flow constants.

    Lines are sorted by ``(from, to)``; each contributes its forward edge
    followed immediately by the reverse edge.
    """

    lines: tuple[tuple[int, int], ...]
    tails: np.ndarray
    heads: np.ndarray
    b_mag: np.ndarray
    phase: np.ndarray


def edge_arrays(case: NetworkCase) -> EdgeArrays:
    adm = bus_admittance(case)
    v = case.column("v_mag")
    keys = sorted(ln.key for ln in case.lines)
    tails, heads = [], []
    for a, bb in keys:
        i, k = case.index(a), case.index(bb)
        tails += [i, k]
        heads += [k, i]
    tails = np.array(tails, dtype=int)
    heads = np.array(heads, dtype=int)
    b_mag = v[tails] * v[heads] * adm.y_mag[tails, heads]
    phase = adm.y_ang[tails, heads]
    return EdgeArrays(tuple(keys), tails, heads, b_mag, phase)


def effective_injection(case: NetworkCase) -> np.ndarray:
    """``P_i = P_G - P_L - V_i^2 G_ii`` per bus."""
    adm = bus_admittance(case)
    v = case.column("v_mag")
    return case.column("p_gen0") - case.column("p_load0") - v**2 * adm.g_self


def is_lossless(case: NetworkCase) -> bool:
    return all(ln.r == 0 for ln in case.lines)


def is_radial(case: NetworkCase) -> bool:
    return len(case.lines) == case.n - 1


# -- files -----------------------------------------------------------------


def _read_rows(path: Path, header: list[str]) -> list[tuple[int, dict]]:
    if not path.is_file():
        raise CaseFormatError(f"case not found: missing {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            got = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CaseFormatError(f"{path.name}: empty file", row=1) from None
        if got != header:
            raise CaseFormatError(f"{path.name}: header must be {','.join(header)}", row=1)
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) != len(header):
                raise CaseFormatError(
                    f"{path.name}: expected {len(header)} fields, got {len(raw)}", row=lineno
                )
            rows.append((lineno, dict(zip(header, (c.strip() for c in raw)))))
    return rows


def _parse(value: str, kind, fname: str, row: int, field_name: str):
    try:
        return kind(value)
    except ValueError:
        raise CaseFormatError(f"{fname}: cannot parse {value!r}", row=row, field=field_name) from None


def load_case(path: str | Path) -> NetworkCase:
    """Read ``buses.csv`` and ``lines.csv`` from a directory or a builtin name."""
    if isinstance(path, str) and path.startswith(BUILTIN_PREFIX):
        return load_builtin(path[len(BUILTIN_PREFIX):])
    path = Path(path)
    if not path.is_dir():
        raise CaseFormatError(f"case not found: {path}")
    buses = []
    for row, rec in _read_rows(path / "buses.csv", BUS_HEADER):
        vals = {}
        vals["id"] = _parse(rec["bus"], int, "buses.csv", row, "bus")
        if rec["kind"] not in ("A", "B", "C"):
            raise CaseFormatError(f"buses.csv: bad kind {rec['kind']!r}", row=row, field="kind")
        csv_to_attr = {"p_gen": "p_gen0", "p_load": "p_load0"}
        for col in BUS_HEADER[2:]:
            vals[csv_to_attr.get(col, col)] = _parse(rec[col], float, "buses.csv", row, col)
        try:
            buses.append(Bus(kind=BusKind(rec["kind"]), **vals))
        except CaseFormatError as exc:
            raise CaseFormatError(f"buses.csv: {exc.message}", row=row, field=exc.field) from None
    lines = []
    for row, rec in _read_rows(path / "lines.csv", LINE_HEADER):
        a = _parse(rec["from"], int, "lines.csv", row, "from")
        b = _parse(rec["to"], int, "lines.csv", row, "to")
        r = _parse(rec["r"], float, "lines.csv", row, "r")
        x = _parse(rec["x"], float, "lines.csv", row, "x")
        if a == b:
            raise CaseFormatError(f"lines.csv: self-loop at row {row}", row=row, field="to")
        try:
            lines.append(Line(a, b, r, x))
        except CaseFormatError as exc:
            raise CaseFormatError(f"lines.csv: {exc.message}", row=row, field=exc.field) from None
    try:
        return NetworkCase(tuple(buses), tuple(lines), name=path.name)
    except CaseFormatError as exc:
        raise CaseFormatError(f"{path.name}: {exc.message}", field=exc.field) from None


def _num(x: float) -> str:
    return repr(float(x))


def save_case(case: NetworkCase, path: str | Path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    with (path / "buses.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BUS_HEADER)
        for b in case.buses:
            w.writerow([b.id, b.kind.value] + [_num(getattr(b, a)) for a in
                       ("p_gen0", "p_load0", "v_mag", "d_droop", "d_load", "t_filter")])
    with (path / "lines.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LINE_HEADER)
        for ln in case.lines:
            w.writerow([ln.from_bus, ln.to_bus, _num(ln.r), _num(ln.x)])
    return path


def builtin_dir(name: str):
    if name not in BUILTIN_CASES:
        raise CaseFormatError(
            f"case not found: unknown builtin {name!r} (choose from {', '.join(BUILTIN_CASES)})"
        )
    return resources.files("gridstab") / "cases" / name


def load_builtin(name: str) -> NetworkCase:
    with resources.as_file(builtin_dir(name)) as d:
        case = load_case(Path(d))
    return replace(case, name=name)
