"""Radial feeder data model, file parser and per-unit conversion.

Unit conventions: bus ``nominal_voltage`` is line-to-neutral kV, loads,
capacitors and ``s_base`` are three-phase totals (kW / kVar / kVA). The
balanced per-phase impedance base is therefore ``3 * V_ln**2 / S_3ph``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .textfmt import FormatError, parse_sections

DEFAULT_S_BASE = 3490.0  # kVA


@dataclass(frozen=True)
class Bus:
    id: str
    nominal_voltage: float  # kV, line-to-neutral


@dataclass(frozen=True)
class Line:
    from_bus: str
    to_bus: str
    resistance: float  # ohm
    reactance: float  # ohm


@dataclass(frozen=True)
class Load:
    bus: str
    p_base: float  # kW
    q_base: float  # kVar


@dataclass(frozen=True)
class ShuntCapacitor:
    bus: str
    q_rated: float  # kVar at 1.0 p.u.


@dataclass(frozen=True)
class FeederModel:
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    loads: tuple[Load, ...]
    capacitors: tuple[ShuntCapacitor, ...]
    slack_bus: str
    s_base: float = DEFAULT_S_BASE
    slack_voltage: float = 1.0  # p.u. setpoint

    def __post_init__(self):
        validate_feeder(self)

    def bus(self, bus_id: str) -> Bus:
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise KeyError(f"unknown bus {bus_id!r}")

    @property
    def total_load(self) -> tuple[float, float]:
        return (sum(l.p_base for l in self.loads), sum(l.q_base for l in self.loads))


class TopologyError(FormatError):
    pass


def validate_feeder(feeder: FeederModel) -> None:
    ids = [b.id for b in feeder.buses]
    seen: set[str] = set()
    for b in feeder.buses:
        if b.id in seen:
            raise FormatError(f"duplicate bus id {b.id!r}")
        seen.add(b.id)
        if not b.nominal_voltage > 0 or not math.isfinite(b.nominal_voltage):
            raise FormatError(f"bus {b.id!r}: nominal voltage must be positive")
    if not feeder.s_base > 0:
        raise FormatError("s_base must be positive")
    if not feeder.slack_voltage > 0:
        raise FormatError("slack voltage setpoint must be positive")
    if feeder.slack_bus not in seen:
        raise FormatError(f"slack bus {feeder.slack_bus!r} is not a declared bus")
    for ln in feeder.lines:
        for end in (ln.from_bus, ln.to_bus):
            if end not in seen:
                raise TopologyError(f"line {ln.from_bus}-{ln.to_bus}: dangling endpoint {end!r}")
        if ln.from_bus == ln.to_bus:
            raise TopologyError(f"line {ln.from_bus}-{ln.to_bus}: self loop")
        if not ln.resistance >= 0:
            raise FormatError(f"line {ln.from_bus}-{ln.to_bus}: negative resistance")
        if not (math.isfinite(ln.reactance) and ln.reactance != 0):
            raise FormatError(f"line {ln.from_bus}-{ln.to_bus}: reactance must be finite and nonzero")
        vf = feeder.bus(ln.from_bus).nominal_voltage
        vt = feeder.bus(ln.to_bus).nominal_voltage
        if not math.isclose(vf, vt, rel_tol=1e-12):
            raise FormatError(f"line {ln.from_bus}-{ln.to_bus}: joins different voltage levels")
    for ld in feeder.loads:
        if ld.bus not in seen:
            raise FormatError(f"load at unknown bus {ld.bus!r}")
        if not ld.p_base >= 0:
            raise FormatError(f"load at {ld.bus!r}: negative p")
    for cap in feeder.capacitors:
        if cap.bus not in seen:
            raise FormatError(f"capacitor at unknown bus {cap.bus!r}")
        if not cap.q_rated >= 0:
            raise FormatError(f"capacitor at {cap.bus!r}: negative rating")

    if len(feeder.lines) != len(ids) - 1:
        raise TopologyError(
            f"non-radial topology: {len(feeder.lines)} lines for {len(ids)} buses"
        )
    adj: dict[str, list[str]] = {i: [] for i in ids}
    for ln in feeder.lines:
        adj[ln.from_bus].append(ln.to_bus)
        adj[ln.to_bus].append(ln.from_bus)
    reached = {feeder.slack_bus}
    queue = deque([feeder.slack_bus])
    while queue:
        for nxt in adj[queue.popleft()]:
            if nxt not in reached:
                reached.add(nxt)
                queue.append(nxt)
    if len(reached) != len(ids):
        # with |L| = |B| - 1 a disconnected graph necessarily holds a cycle
        raise TopologyError("non-radial topology: feeder is disconnected or contains a cycle")


# --------------------------------------------------------------------------
# parsing

_SECTIONS = {"buses", "lines", "loads", "capacitors", "slack", "bases"}


def parse_feeder(text: str) -> FeederModel:
    """Parse a feeder definition document into a validated :class:`FeederModel`."""
    sec = parse_sections(text, known=_SECTIONS)

    s_base = DEFAULT_S_BASE
    default_kv = None
    for rec in sec.get("bases", []):
        rec.check_keys({"s_base", "kv"})
        s_base = rec.number("s_base", s_base)
        if "kv" in rec.fields:
            default_kv = rec.number("kv")

    slack_recs = sec.get("slack", [])
    if len(slack_recs) != 1:
        raise FormatError("exactly one [slack] record is required")
    srec = slack_recs[0]
    srec.check_keys({"bus", "voltage"})
    slack_bus = srec.text("bus")
    slack_voltage = srec.number("voltage", 1.0)

    buses = []
    seen: set[str] = set()
    for rec in sec.get("buses", []):
        rec.check_keys({"id", "kv"})
        bid = rec.text("id")
        if bid in seen:
            raise FormatError(f"duplicate bus id {bid!r}", rec.line, "id")
        seen.add(bid)
        kv = rec.number("kv", default_kv) if default_kv is not None else rec.number("kv")
        if not kv > 0:
            raise FormatError("nominal voltage must be positive", rec.line, "kv")
        buses.append(Bus(bid, kv))

    lines = []
    for rec in sec.get("lines", []):
        rec.check_keys({"from", "to", "r", "x"})
        ln = Line(rec.text("from"), rec.text("to"), rec.number("r"), rec.number("x"))
        for end, key in ((ln.from_bus, "from"), (ln.to_bus, "to")):
            if end not in seen:
                raise TopologyError(f"dangling line endpoint {end!r}", rec.line, key)
        lines.append(ln)

    loads = []
    for rec in sec.get("loads", []):
        rec.check_keys({"bus", "p", "q"})
        loads.append(Load(rec.text("bus"), rec.number("p"), rec.number("q", 0.0)))

    caps = []
    for rec in sec.get("capacitors", []):
        rec.check_keys({"bus", "q"})
        caps.append(ShuntCapacitor(rec.text("bus"), rec.number("q")))

    return FeederModel(
        buses=tuple(buses),
        lines=tuple(lines),
        loads=tuple(loads),
        capacitors=tuple(caps),
        slack_bus=slack_bus,
        s_base=s_base,
        slack_voltage=slack_voltage,
    )


def load_feeder(path: str | Path) -> FeederModel:
    return parse_feeder(Path(path).read_text())


def format_feeder(feeder: FeederModel) -> str:
    """Serialize a feeder back into the text format (``repr`` floats round-trip)."""
    out = ["[bases]", f"s_base={feeder.s_base!r}", "", "[slack]",
           f"bus={feeder.slack_bus} voltage={feeder.slack_voltage!r}", "", "[buses]"]
    out += [f"id={b.id} kv={b.nominal_voltage!r}" for b in feeder.buses]
    out += ["", "[lines]"]
    out += [f"from={l.from_bus} to={l.to_bus} r={l.resistance!r} x={l.reactance!r}" for l in feeder.lines]
    out += ["", "[loads]"]
    out += [f"bus={l.bus} p={l.p_base!r} q={l.q_base!r}" for l in feeder.loads]
    out += ["", "[capacitors]"]
    out += [f"bus={c.bus} q={c.q_rated!r}" for c in feeder.capacitors]
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# per-unit


def z_base(kv_ln: float, s_base_kva: float) -> float:
    """Per-phase impedance base in ohms."""
    return 3000.0 * kv_ln**2 / s_base_kva


def self_susceptance(feeder: FeederModel, bus: str) -> float:
    """Sum of the per-unit susceptances Im(1/z) of every line incident to ``bus``.

    Series-inductive lines give a negative value.
    """
    nominal = feeder.bus(bus).nominal_voltage
    zb = z_base(nominal, feeder.s_base)
    total = 0.0
    for ln in feeder.lines:
        if bus in (ln.from_bus, ln.to_bus):
            total += (1.0 / complex(ln.resistance / zb, ln.reactance / zb)).imag
    return total


@dataclass(frozen=True, eq=False)
class NormalizedFeeder:
    """Per-unit arrays of a feeder, ordered slack-first in breadth-first order.

    Bus ``k > 0`` is fed by the branch ``k - 1`` from ``parent[k]``; this
    orientation is independent of how the lines were written in the file.
    """

    bus_ids: tuple[str, ...]
    v_base_kv: np.ndarray
    parent: np.ndarray  # parent[0] == -1
    z: np.ndarray  # branch impedance, p.u., indexed by receiving bus - 1
    line_order: np.ndarray  # branch index -> position in FeederModel.lines
    line_flipped: np.ndarray  # branch was written to -> from
    z_base: np.ndarray  # ohm, per branch
    p_load: np.ndarray  # p.u.
    q_load: np.ndarray
    q_cap: np.ndarray
    s_base: float
    slack_voltage: float
    source: FeederModel

    @property
    def n(self) -> int:
        return len(self.bus_ids)

    def index(self, bus_id: str) -> int:
        return self.bus_ids.index(bus_id)

    def downstream(self) -> np.ndarray:
        """Incidence ``T[b, k] = 1`` when bus ``k + 1`` lies at or below branch ``b``."""
        n = self.n
        T = np.zeros((n - 1, n - 1))
        for k in range(1, n):
            j = k
            while j > 0:
                T[j - 1, k - 1] = 1.0
                j = self.parent[j]
        return T

    def ybus(self) -> np.ndarray:
        Y = np.zeros((self.n, self.n), dtype=complex)
        for k in range(1, self.n):
            y = 1.0 / self.z[k - 1]
            i = self.parent[k]
            Y[i, i] += y
            Y[k, k] += y
            Y[i, k] -= y
            Y[k, i] -= y
        return Y


def to_per_unit(feeder: FeederModel) -> NormalizedFeeder:
    adj: dict[str, list[tuple[str, int]]] = {b.id: [] for b in feeder.buses}
    for i, ln in enumerate(feeder.lines):
        adj[ln.from_bus].append((ln.to_bus, i))
        adj[ln.to_bus].append((ln.from_bus, i))
    order = [feeder.slack_bus]
    pos = {feeder.slack_bus: 0}
    parent = [-1]
    via = [-1]
    queue = deque([feeder.slack_bus])
    while queue:
        cur = queue.popleft()
        for nxt, li in adj[cur]:
            if nxt not in pos:
                pos[nxt] = len(order)
                order.append(nxt)
                parent.append(pos[cur])
                via.append(li)
                queue.append(nxt)

    kv = np.array([feeder.bus(b).nominal_voltage for b in order])
    n = len(order)
    z = np.zeros(n - 1, dtype=complex)
    zb = np.zeros(n - 1)
    flipped = np.zeros(n - 1, dtype=bool)
    for k in range(1, n):
        ln = feeder.lines[via[k]]
        zb[k - 1] = z_base(kv[k], feeder.s_base)
        z[k - 1] = complex(ln.resistance, ln.reactance) / zb[k - 1]
        flipped[k - 1] = ln.from_bus == order[k]

    p = np.zeros(n)
    q = np.zeros(n)
    for ld in feeder.loads:
        p[pos[ld.bus]] += ld.p_base / feeder.s_base
        q[pos[ld.bus]] += ld.q_base / feeder.s_base
    qc = np.zeros(n)
    for cap in feeder.capacitors:
        qc[pos[cap.bus]] += cap.q_rated / feeder.s_base

    return NormalizedFeeder(
        bus_ids=tuple(order),
        v_base_kv=kv,
        parent=np.array(parent),
        z=z,
        line_order=np.array(via[1:]),
        line_flipped=flipped,
        z_base=zb,
        p_load=p,
        q_load=q,
        q_cap=qc,
        s_base=feeder.s_base,
        slack_voltage=feeder.slack_voltage,
        source=feeder,
    )


def to_physical(norm: NormalizedFeeder) -> FeederModel:
    """Inverse of :func:`to_per_unit`.

    Lines keep their file orientation and order; loads and capacitors are
    aggregated per bus in the original bus order.
    """
    src = norm.source
    lines: list[Line | None] = [None] * (norm.n - 1)
    for b in range(norm.n - 1):
        k = b + 1
        a, c = norm.bus_ids[norm.parent[k]], norm.bus_ids[k]
        if norm.line_flipped[b]:
            a, c = c, a
        zohm = norm.z[b] * norm.z_base[b]
        lines[norm.line_order[b]] = Line(a, c, float(zohm.real), float(zohm.imag))
    buses = tuple(Bus(b, float(norm.v_base_kv[norm.index(b)])) for b in (x.id for x in src.buses))
    loads = []
    caps = []
    for b in buses:
        i = norm.index(b.id)
        if any(l.bus == b.id for l in src.loads):
            loads.append(Load(b.id, float(norm.p_load[i] * norm.s_base), float(norm.q_load[i] * norm.s_base)))
        if any(c.bus == b.id for c in src.capacitors):
            caps.append(ShuntCapacitor(b.id, float(norm.q_cap[i] * norm.s_base)))
    return FeederModel(
        buses=buses,
        lines=tuple(lines),
        loads=tuple(loads),
        capacitors=tuple(caps),
        slack_bus=src.slack_bus,
        s_base=norm.s_base,
        slack_voltage=norm.slack_voltage,
    )
