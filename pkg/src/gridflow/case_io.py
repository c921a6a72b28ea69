"""MATPOWER-style case files: parsing, emitting, and nodal admittance assembly.

Only the numeric-matrix subset of the format is understood: ``mpc.baseMVA``,
``mpc.bus``, ``mpc.gen`` and ``mpc.branch`` assignments, ``%`` comments, rows
separated by newlines or semicolons. Anything else in the file is ignored.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import (
    DuplicateBusId,
    MalformedRow,
    MissingBlock,
    MultipleSlackBuses,
    NoSlackBus,
    ZeroImpedanceBranch,
)

BUNDLED_CASES = Path(__file__).parent / "cases"

BUS_COLS = 13
GEN_COLS = 6
BRANCH_COLS = 11


class BusKind(IntEnum):
    PQ = 1
    PV = 2
    SLACK = 3


@dataclass(frozen=True)
class Bus:
    id: int
    type: int  # raw bus-type column; the effective kind lives on Network
    pd: float  # MW
    qd: float  # MVAr
    gs: float  # MW at V = 1 p.u.
    bs: float  # MVAr at V = 1 p.u.
    area: int
    vm: float
    va_deg: float
    base_kv: float
    zone: int
    vmax: float
    vmin: float

    @property
    def va(self) -> float:
        return math.radians(self.va_deg)


@dataclass(frozen=True)
class Generator:
    bus: int  # internal 0-based bus index
    pg: float  # MW
    qg: float
    qmax: float
    qmin: float
    vg: float
    mbase: float = 100.0
    status: int = 1


@dataclass(frozen=True)
class Branch:
    f: int  # internal 0-based bus indices
    t: int
    r: float
    x: float
    b: float  # total line charging, p.u.
    rate_a: float  # MVA, 0 = unlimited
    rate_b: float = 0.0
    rate_c: float = 0.0
    tap: float = 1.0
    shift_deg: float = 0.0
    status: int = 1

    @property
    def shift(self) -> float:
        return math.radians(self.shift_deg)


@dataclass(frozen=True, eq=False)
class Network:
    """Parsed grid with 0-based contiguous bus indexing.

    ``pv`` and ``pq`` are ascending internal bus indices; together with
    ``slack`` they partition ``range(n_bus)``. Per-unit injection data are
    exposed as read-only arrays.
    """

    base_mva: float
    buses: tuple[Bus, ...]
    gens: tuple[Generator, ...]
    branches: tuple[Branch, ...]
    slack: int
    pv: np.ndarray
    pq: np.ndarray
    Y: np.ndarray
    Bprime: np.ndarray
    bprime_mode: str = "series"
    name: str = "case"
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def n_pv(self) -> int:
        return len(self.pv)

    @property
    def n_pq(self) -> int:
        return len(self.pq)

    @property
    def dim(self) -> int:
        """Length of the injection / unknown vectors, 2N - Ng - 2."""
        return 2 * self.n_bus - self.n_pv - 2

    @property
    def pvpq(self) -> np.ndarray:
        return np.concatenate([self.pv, self.pq])

    @property
    def kinds(self) -> np.ndarray:
        k = np.full(self.n_bus, BusKind.PQ, dtype=int)
        k[self.pv] = BusKind.PV
        k[self.slack] = BusKind.SLACK
        return k

    @property
    def bus_ids(self) -> np.ndarray:
        return self._cached("bus_ids", lambda: np.array([b.id for b in self.buses]))

    @property
    def pd(self) -> np.ndarray:
        return self._cached("pd", lambda: np.array([b.pd for b in self.buses]) / self.base_mva)

    @property
    def qd(self) -> np.ndarray:
        return self._cached("qd", lambda: np.array([b.qd for b in self.buses]) / self.base_mva)

    @property
    def online_gens(self) -> list[int]:
        return [k for k, g in enumerate(self.gens) if g.status > 0]

    @property
    def pg(self) -> np.ndarray:
        """Scheduled generation aggregated per bus, p.u."""
        def build():
            out = np.zeros(self.n_bus)
            for k in self.online_gens:
                out[self.gens[k].bus] += self.gens[k].pg
            return out / self.base_mva
        return self._cached("pg", build)

    @property
    def qg(self) -> np.ndarray:
        def build():
            out = np.zeros(self.n_bus)
            for k in self.online_gens:
                out[self.gens[k].bus] += self.gens[k].qg
            return out / self.base_mva
        return self._cached("qg", build)

    @property
    def vm_set(self) -> np.ndarray:
        """Voltage magnitude set points: first online Vg at slack/PV buses, case Vm elsewhere."""
        def build():
            vm = np.array([b.vm for b in self.buses], dtype=float)
            seen = set()
            for k in self.online_gens:
                g = self.gens[k]
                if g.bus not in seen:
                    vm[g.bus] = g.vg
                    seen.add(g.bus)
            return vm
        return self._cached("vm_set", build)

    @property
    def va_slack(self) -> float:
        return self.buses[self.slack].va

    @property
    def rate_a(self) -> np.ndarray:
        return np.array([br.rate_a for br in self.branches if br.status > 0], dtype=float)

    def index_of(self, bus_id: int) -> int:
        return self._cached("lookup", lambda: {b.id: i for i, b in enumerate(self.buses)})[bus_id]

    def _cached(self, key, fn):
        if key not in self._cache:
            value = fn()
            if isinstance(value, np.ndarray):
                value.setflags(write=False)
            self._cache[key] = value
        return self._cache[key]


def _in_service(branches):
    return [br for br in branches if br.status > 0]


def branch_admittances(branches, n_bus: int, *, charging: bool = True,
                       bprime_mode: str | None = None):
    """Per-branch two-port admittances (yff, yft, ytf, ytt) of in-service branches.

    ``bprime_mode`` switches to the reduced model used for B': ``"series"``
    keeps ``1/(r + jx)``, ``"reactance"`` uses ``1/(jx)``.
    """
    live = _in_service(branches)
    yff = np.empty(len(live), dtype=complex)
    yft = np.empty_like(yff)
    ytf = np.empty_like(yff)
    ytt = np.empty_like(yff)
    for k, br in enumerate(live):
        if br.r == 0.0 and br.x == 0.0:
            raise ZeroImpedanceBranch(k)
        if bprime_mode == "reactance":
            if br.x == 0.0:
                raise ZeroImpedanceBranch(k)
            ys = 1.0 / complex(0.0, br.x)
        else:
            ys = 1.0 / complex(br.r, br.x)
        half_b = 0.5j * br.b if charging else 0.0
        ratio = br.tap * np.exp(1j * br.shift)
        ytt[k] = ys + half_b
        yff[k] = ytt[k] / (br.tap * br.tap)
        yft[k] = -ys / np.conj(ratio)
        ytf[k] = -ys / ratio
    f = np.array([br.f for br in live], dtype=int)
    t = np.array([br.t for br in live], dtype=int)
    return f, t, yff, yft, ytf, ytt


def build_admittance(buses, branches, base_mva: float, bprime_mode: str = "series"):
    """Assemble the full admittance matrix Y and the shunt-free, charging-free B'."""
    if bprime_mode not in ("series", "reactance"):
        raise ValueError(f"unknown bprime_mode {bprime_mode!r}")
    n = len(buses)
    Y = np.zeros((n, n), dtype=complex)
    f, t, yff, yft, ytf, ytt = branch_admittances(branches, n)
    np.add.at(Y, (f, f), yff)
    np.add.at(Y, (f, t), yft)
    np.add.at(Y, (t, f), ytf)
    np.add.at(Y, (t, t), ytt)
    shunt = np.array([complex(b.gs, b.bs) for b in buses]) / base_mva
    Y[np.arange(n), np.arange(n)] += shunt

    Yb = np.zeros((n, n), dtype=complex)
    f, t, yff, yft, ytf, ytt = branch_admittances(branches, n, charging=False,
                                                  bprime_mode=bprime_mode)
    np.add.at(Yb, (f, f), yff)
    np.add.at(Yb, (f, t), yft)
    np.add.at(Yb, (t, f), ytf)
    np.add.at(Yb, (t, t), ytt)
    Y.setflags(write=False)
    Bprime = np.ascontiguousarray(Yb.imag)
    Bprime.setflags(write=False)
    return Y, Bprime


def make_network(base_mva, buses, gens, branches, *, bprime_mode="series", name="case"):
    buses = tuple(buses)
    gens = tuple(gens)
    branches = tuple(branches)
    slacks = [i for i, b in enumerate(buses) if b.type == BusKind.SLACK]
    if not slacks:
        raise NoSlackBus()
    if len(slacks) > 1:
        raise MultipleSlackBuses(buses[i].id for i in slacks)
    slack = slacks[0]
    with_gen = {g.bus for g in gens if g.status > 0}
    # a type-2 bus without an online unit behaves as PQ
    pv = np.array([i for i, b in enumerate(buses)
                   if b.type == BusKind.PV and i in with_gen], dtype=int)
    pv_set = set(pv.tolist())
    pq = np.array([i for i in range(len(buses)) if i != slack and i not in pv_set], dtype=int)
    pv.setflags(write=False)
    pq.setflags(write=False)
    Y, Bprime = build_admittance(buses, branches, base_mva, bprime_mode)
    return Network(float(base_mva), buses, gens, branches, slack, pv, pq, Y, Bprime,
                   bprime_mode=bprime_mode, name=name)


_ASSIGN = re.compile(r"mpc\.(\w+)\s*=\s*(.*)$")


def _blocks(text: str):
    """Yield (name, [(line_no, row_text)]) for each ``mpc.<name> = ...`` assignment."""
    out = {}
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        raw = lines[i].split("%", 1)[0].strip()
        m = _ASSIGN.match(raw)
        if not m:
            i += 1
            continue
        name, rhs = m.group(1), m.group(2).strip()
        if not rhs.startswith("["):
            out[name] = (i + 1, rhs.rstrip(";").strip())
            i += 1
            continue
        rows = []
        body = rhs[1:]
        line_no = i + 1
        while True:
            closed = "]" in body
            if closed:
                body = body.split("]", 1)[0]
            for chunk in body.split(";"):
                if chunk.strip():
                    rows.append((line_no, chunk.strip()))
            if closed:
                break
            i += 1
            if i >= len(lines):
                raise MalformedRow(line_no, f"unterminated matrix for mpc.{name}")
            line_no = i + 1
            body = lines[i].split("%", 1)[0]
        out[name] = rows
        i += 1
    return out


def _numbers(line_no: int, row: str, min_cols: int, what: str) -> list[float]:
    try:
        vals = [float(tok) for tok in row.replace(",", " ").split()]
    except ValueError:
        raise MalformedRow(line_no, f"non-numeric entry in {what} row: {row!r}") from None
    if len(vals) < min_cols:
        raise MalformedRow(line_no, f"{what} row has {len(vals)} columns, need {min_cols}")
    if not all(math.isfinite(v) for v in vals):
        raise MalformedRow(line_no, f"non-finite entry in {what} row")
    return vals


def parse_case(text: str, *, bprime_mode: str = "series", name: str = "case") -> Network:
    """Parse MATPOWER case text into a :class:`Network`."""
    blocks = _blocks(text)
    for req in ("baseMVA", "bus", "gen", "branch"):
        if req not in blocks:
            raise MissingBlock(req)
    line_no, base_txt = blocks["baseMVA"]
    try:
        base_mva = float(base_txt)
    except ValueError:
        raise MalformedRow(line_no, f"baseMVA is not a number: {base_txt!r}") from None

    buses = []
    lookup = {}
    for line_no, row in blocks["bus"]:
        v = _numbers(line_no, row, BUS_COLS, "bus")
        bus_id, btype = int(v[0]), int(v[1])
        if btype not in (1, 2, 3):
            raise MalformedRow(line_no, f"unsupported bus type {btype}")
        if bus_id in lookup:
            raise DuplicateBusId(bus_id)
        lookup[bus_id] = len(buses)
        buses.append(Bus(bus_id, btype, v[2], v[3], v[4], v[5], int(v[6]), v[7], v[8],
                         v[9], int(v[10]), v[11], v[12]))

    def bus_index(line_no, bus_id):
        try:
            return lookup[int(bus_id)]
        except KeyError:
            raise MalformedRow(line_no, f"unknown bus id {int(bus_id)}") from None

    gens = []
    for line_no, row in blocks["gen"]:
        v = _numbers(line_no, row, GEN_COLS, "gen")
        mbase = v[6] if len(v) > 6 else base_mva
        status = int(v[7]) if len(v) > 7 else 1
        gens.append(Generator(bus_index(line_no, v[0]), v[1], v[2], v[3], v[4], v[5],
                              mbase, status))

    branches = []
    for line_no, row in blocks["branch"]:
        v = _numbers(line_no, row, BRANCH_COLS, "branch")
        tap = v[8] if v[8] != 0.0 else 1.0
        if tap < 0:
            raise MalformedRow(line_no, f"negative tap ratio {tap}")
        branches.append(Branch(bus_index(line_no, v[0]), bus_index(line_no, v[1]),
                               v[2], v[3], v[4], v[5], v[6], v[7], tap, v[9], int(v[10])))

    return make_network(base_mva, buses, gens, branches, bprime_mode=bprime_mode, name=name)


def resolve_case_path(case: str | Path) -> Path:
    """Return ``case`` itself if it exists, else the bundled case of that name."""
    p = Path(case)
    if p.exists():
        return p
    stem = p.name if p.suffix == ".m" else f"{p.name}.m"
    bundled = BUNDLED_CASES / stem
    if bundled.exists():
        return bundled
    raise FileNotFoundError(f"no case file {case!s} (and no bundled case {stem})")


def load_case(case: str | Path, *, bprime_mode: str = "series") -> Network:
    path = resolve_case_path(case)
    return parse_case(path.read_text(), bprime_mode=bprime_mode, name=path.stem)


def _fmt(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def format_case(net: Network) -> str:
    """Emit ``net`` as MATPOWER case text that parses back to an identical network."""
    ids = [b.id for b in net.buses]
    out = [f"function mpc = {net.name}", "mpc.version = '2';", "",
           f"mpc.baseMVA = {_fmt(net.base_mva)};", "",
           "%% bus data",
           "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin",
           "mpc.bus = ["]
    for b in net.buses:
        vals = [b.id, b.type, b.pd, b.qd, b.gs, b.bs, b.area, b.vm, b.va_deg, b.base_kv,
                b.zone, b.vmax, b.vmin]
        out.append("\t" + "\t".join(_fmt(v) for v in vals) + ";")
    out += ["];", "", "%% generator data",
            "%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus", "mpc.gen = ["]
    for g in net.gens:
        vals = [ids[g.bus], g.pg, g.qg, g.qmax, g.qmin, g.vg, g.mbase, g.status]
        out.append("\t" + "\t".join(_fmt(v) for v in vals) + ";")
    out += ["];", "", "%% branch data",
            "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus",
            "mpc.branch = ["]
    for br in net.branches:
        vals = [ids[br.f], ids[br.t], br.r, br.x, br.b, br.rate_a, br.rate_b, br.rate_c,
                br.tap, br.shift_deg, br.status]
        out.append("\t" + "\t".join(_fmt(v) for v in vals) + ";")
    out += ["];", ""]
    return "\n".join(out)
