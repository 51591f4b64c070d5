"""
Netlist data model for flattened Xilinx 7-series LUT netlists.

A netlist is a set of primitive gates connected by single-bit nets.  Every
signal net has exactly one driver (a gate output pin or a primary input bit);
the two constant nets ``$0`` and ``$1`` are always present.  The model is
immutable once constructed: analyses only read it.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Mapping, NamedTuple, Optional

CONST0 = "$0"
CONST1 = "$1"
CONSTANTS = (CONST0, CONST1)

FF_PRIMS = ("FDRE", "FDSE", "FDCE", "FDPE")
LUT_PRIMS = tuple(f"LUT{k}" for k in range(1, 7))
MUX_PRIMS = ("MUXF7", "MUXF8")
PRIMITIVES = LUT_PRIMS + ("CARRY4",) + FF_PRIMS + MUX_PRIMS + ("GND", "VCC", "RAMB")

# reset pin, reset value and whether the reset is asynchronous
FF_RESET = {
    "FDRE": ("R", 0, False),
    "FDSE": ("S", 1, False),
    "FDCE": ("CLR", 0, True),
    "FDPE": ("PRE", 1, True),
}

CARRY_IN = ("CI", "CYINIT") + tuple(f"DI[{i}]" for i in range(4)) + tuple(f"S[{i}]" for i in range(4))
CARRY_OUT = tuple(f"O[{i}]" for i in range(4)) + tuple(f"CO[{i}]" for i in range(4))


class NetlistError(Exception):
    """Malformed netlist input.  ``line``/``col`` are set for syntax errors."""

    def __init__(self, message: str, line: Optional[int] = None, col: Optional[int] = None):
        self.message = message
        self.line = line
        self.col = col
        where = f" (line {line}, column {col})" if line is not None else ""
        super().__init__(message + where)


class PinRef(NamedTuple):
    gate: str
    pin: str


def lut_size(prim: str) -> int:
    return int(prim[3]) if prim in LUT_PRIMS else 0


def is_ff(prim: str) -> bool:
    return prim in FF_PRIMS


def is_comb(prim: str) -> bool:
    return prim in LUT_PRIMS or prim == "CARRY4" or prim in MUX_PRIMS


def pin_directions(prim: str, pins: Iterable[str] = ()) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Return (input pins, output pins) declared for a primitive."""
    if prim in LUT_PRIMS:
        return tuple(f"I{i}" for i in range(lut_size(prim))), ("O",)
    if prim == "CARRY4":
        return CARRY_IN, CARRY_OUT
    if prim in FF_PRIMS:
        return ("C", "CE", "D", FF_RESET[prim][0]), ("Q",)
    if prim in MUX_PRIMS:
        return ("I0", "I1", "S"), ("O",)
    if prim == "GND":
        return (), ("G",)
    if prim == "VCC":
        return (), ("P",)
    if prim == "RAMB":
        # opaque block: output pins are the DO* data/parity outputs
        pins = sorted(pins)
        return tuple(p for p in pins if not p.startswith("DO")), tuple(p for p in pins if p.startswith("DO"))
    raise NetlistError(f"unknown primitive {prim!r}")


@dataclass(frozen=True)
class Gate:
    id: str
    prim: str
    init: int = 0
    pins: Mapping[str, Optional[str]] = field(default_factory=dict)

    @property
    def inputs(self) -> tuple[str, ...]:
        return pin_directions(self.prim, self.pins)[0]

    @property
    def outputs(self) -> tuple[str, ...]:
        return pin_directions(self.prim, self.pins)[1]

    def net(self, pin: str) -> Optional[str]:
        return self.pins.get(pin)

    def input_nets(self) -> list[str]:
        return [self.pins[p] for p in self.inputs if self.pins.get(p) is not None]

    def output_nets(self) -> list[str]:
        return [self.pins[p] for p in self.outputs if self.pins.get(p) is not None]


@dataclass(frozen=True)
class Port:
    name: str
    dir: str
    bits: tuple[str, ...]

    @property
    def width(self) -> int:
        return len(self.bits)


@dataclass(frozen=True)
class Cone:
    """Combinational fan-in (or fan-out) region of a pin, bounded at module boundaries."""
    root: PinRef
    gates: tuple[str, ...]
    frontier: tuple[str, ...]


def default_boundary(gate: Gate) -> bool:
    return gate.prim in FF_PRIMS or gate.prim == "RAMB" or gate.prim == "CARRY4"


class Netlist:
    """Immutable gate/net graph.  Construction validates all structural invariants."""

    def __init__(self, name: str, ports: Iterable[Port], gates: Iterable[Gate]):
        self.name = name
        self.ports: tuple[Port, ...] = tuple(ports)
        gates = list(gates)
        self.gates: dict[str, Gate] = {}
        for g in gates:
            if g.id in self.gates:
                raise NetlistError(f"duplicate gate id {g.id!r}")
            self.gates[g.id] = g
        self._index()

    # construction ------------------------------------------------------

    def _index(self) -> None:
        seen_ports = set()
        self.driver: dict[str, object] = {}
        self.loads: dict[str, list[PinRef]] = {}
        self.port_of_bit: dict[str, tuple[str, int]] = {}

        def drive(net: str, src: object) -> None:
            if net in CONSTANTS:
                raise NetlistError(f"constant net {net} cannot be driven by {src}")
            if net in self.driver:
                raise NetlistError(f"multiple drivers on net {net!r}")
            self.driver[net] = src

        for p in self.ports:
            if p.name in seen_ports:
                raise NetlistError(f"duplicate port {p.name!r}")
            seen_ports.add(p.name)
            if p.dir not in ("in", "out"):
                raise NetlistError(f"port {p.name!r} has bad direction {p.dir!r}")
            for i, b in enumerate(p.bits):
                if p.dir == "in":
                    drive(b, ("port", p.name, i))
                    self.port_of_bit[b] = (p.name, i)
                else:
                    self.port_of_bit.setdefault(b, (p.name, i))

        for g in self.gates.values():
            if g.prim not in PRIMITIVES or g.prim in ("GND", "VCC"):
                raise NetlistError(f"unknown primitive {g.prim!r} on gate {g.id!r}")
            ins, outs = g.inputs, g.outputs
            for pin in g.pins:
                if pin not in ins and pin not in outs:
                    raise NetlistError(f"gate {g.id!r} ({g.prim}) has no pin {pin!r}")
            for pin in ins:
                net = g.pins.get(pin)
                if net is None:
                    raise NetlistError(f"unconnected required pin {g.id}.{pin}")
                self.loads.setdefault(net, []).append(PinRef(g.id, pin))
            for pin in outs:
                net = g.pins.get(pin)
                if net is not None:
                    drive(net, PinRef(g.id, pin))
            if g.prim in LUT_PRIMS and g.init >> (1 << lut_size(g.prim)):
                raise NetlistError(f"INIT of {g.id!r} wider than {1 << lut_size(g.prim)} bits")

        for net in self.loads:
            if net not in CONSTANTS and net not in self.driver:
                raise NetlistError(f"net {net!r} has loads but no driver")
        for p in self.ports:
            if p.dir == "out":
                for b in p.bits:
                    if b not in CONSTANTS and b not in self.driver:
                        raise NetlistError(f"output {p.name!r} bit {b!r} is undriven")
        self.po_bits = frozenset(b for p in self.ports if p.dir == "out" for b in p.bits)
        self.comb_order  # raises on combinational cycles

    # structure ---------------------------------------------------------

    @cached_property
    def nets(self) -> tuple[str, ...]:
        names = set(self.driver) | set(self.loads) | self.po_bits
        names.discard(CONST0)
        names.discard(CONST1)
        return (CONST0, CONST1) + tuple(sorted(names))

    def net_kind(self, net: str) -> str:
        return {CONST0: "const0", CONST1: "const1"}.get(net, "signal")

    @cached_property
    def comb_order(self) -> tuple[str, ...]:
        """Topological order of combinational gates (flip-flop Q->D paths cut)."""
        comb = [gid for gid, g in self.gates.items() if is_comb(g.prim)]
        indeg = {gid: 0 for gid in comb}
        succ: dict[str, list[str]] = {gid: [] for gid in comb}
        for gid in comb:
            for net in set(self.gates[gid].input_nets()):
                src = self.driver.get(net)
                if isinstance(src, PinRef) and src.gate in indeg:
                    indeg[gid] += 1
                    succ[src.gate].append(gid)
        ready = deque(sorted(g for g, d in indeg.items() if d == 0))
        order = []
        while ready:
            gid = ready.popleft()
            order.append(gid)
            for s in succ[gid]:
                indeg[s] -= 1
                if indeg[s] == 0:
                    ready.append(s)
        if len(order) != len(comb):
            stuck = sorted(g for g, d in indeg.items() if d > 0)
            raise NetlistError(f"combinational cycle through gates {stuck[:5]}")
        return tuple(order)

    @cached_property
    def comb_rank(self) -> dict[str, int]:
        return {g: i for i, g in enumerate(self.comb_order)}

    def port(self, name: str) -> Port:
        for p in self.ports:
            if p.name == name:
                return p
        raise KeyError(name)

    @property
    def inputs(self) -> list[Port]:
        return [p for p in self.ports if p.dir == "in"]

    @property
    def outputs(self) -> list[Port]:
        return [p for p in self.ports if p.dir == "out"]

    def driver_gate(self, net: str) -> Optional[Gate]:
        src = self.driver.get(net)
        return self.gates[src.gate] if isinstance(src, PinRef) else None

    def is_primary_input(self, net: str) -> bool:
        src = self.driver.get(net)
        return isinstance(src, tuple) and not isinstance(src, PinRef) and src[0] == "port"

    def _by_prim(self, pred: Callable[[str], bool]) -> list[Gate]:
        return [self.gates[g] for g in sorted(self.gates) if pred(self.gates[g].prim)]

    def carry_gates(self) -> list[Gate]:
        return self._by_prim(lambda p: p == "CARRY4")

    def flipflops(self) -> list[Gate]:
        return self._by_prim(is_ff)

    def luts(self) -> list[Gate]:
        return self._by_prim(lambda p: p in LUT_PRIMS)

    def rams(self) -> list[Gate]:
        return self._by_prim(lambda p: p == "RAMB")

    def __len__(self) -> int:
        return len(self.gates)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Netlist):
            return NotImplemented
        return (self.name == other.name and self.ports == other.ports
                and {k: (g.prim, g.init, dict(g.pins)) for k, g in self.gates.items()}
                == {k: (g.prim, g.init, dict(g.pins)) for k, g in other.gates.items()})

    def __repr__(self) -> str:
        return f"<Netlist {self.name!r}: {len(self.gates)} gates, {len(self.ports)} ports>"

    # traversal ---------------------------------------------------------

    def extract_cone(self, root: PinRef, direction: str = "reverse",
                     boundary: Callable[[Gate], bool] = default_boundary) -> Cone:
        """Breadth-first cone from a pin, stopping at gates for which ``boundary`` holds.

        Reverse cones start at the net on an input pin; the frontier is the list
        of support nets (primary inputs, boundary outputs) in discovery order.
        Forward cones start at the net on an output pin; the frontier lists the
        nets entering boundary gates or primary outputs.
        """
        start = self.gates[root.gate].pins.get(root.pin)
        if start is None:
            return Cone(root, (), ())
        if direction == "reverse":
            return self._reverse_cone(root, [start], boundary)
        if direction == "forward":
            return self._forward_cone(root, [start], boundary)
        raise ValueError(f"direction must be 'reverse' or 'forward', not {direction!r}")

    def _reverse_cone(self, root, starts, boundary) -> Cone:
        gates, frontier = [], []
        seen_nets, seen_gates = set(), set()
        queue = deque(starts)
        while queue:
            net = queue.popleft()
            if net in seen_nets or net in CONSTANTS:
                continue
            seen_nets.add(net)
            g = self.driver_gate(net)
            if g is None or boundary(g) or not is_comb(g.prim):
                frontier.append(net)
                continue
            if g.id in seen_gates:
                continue
            seen_gates.add(g.id)
            gates.append(g.id)
            queue.extend(g.input_nets())
        return Cone(root, tuple(sorted(gates, key=self.comb_rank.__getitem__)), tuple(frontier))

    def _forward_cone(self, root, starts, boundary) -> Cone:
        gates, frontier = [], []
        seen_nets, seen_gates = set(), set()
        queue = deque(starts)
        while queue:
            net = queue.popleft()
            if net in seen_nets:
                continue
            seen_nets.add(net)
            stop = net in self.po_bits
            for load in self.loads.get(net, ()):
                g = self.gates[load.gate]
                if boundary(g) or not is_comb(g.prim):
                    stop = True
                    continue
                if g.id not in seen_gates:
                    seen_gates.add(g.id)
                    gates.append(g.id)
                    queue.extend(g.output_nets())
            if stop:
                frontier.append(net)
        return Cone(root, tuple(sorted(gates, key=self.comb_rank.__getitem__)), tuple(frontier))

    def reverse_region(self, nets: Iterable[str], boundary: Callable[[Gate], bool] = default_boundary) -> Cone:
        """Reverse cone of several nets at once (root is a placeholder)."""
        return self._reverse_cone(PinRef("", ""), list(nets), boundary)

    def forward_region(self, nets: Iterable[str], boundary: Callable[[Gate], bool] = default_boundary) -> Cone:
        return self._forward_cone(PinRef("", ""), list(nets), boundary)


# JSON format ---------------------------------------------------------------

def _parse_init(prim: str, text, gid: str) -> int:
    if text is None or text == "":
        return 0
    s = str(text).strip().lower().replace("_", "")
    if "'" in s:
        s = s.split("'", 1)[1]
        if s.startswith("h"):
            s = s[1:]
        elif s.startswith("b"):
            return int(s[1:], 2)
    if s.startswith("0x"):
        s = s[2:]
    try:
        value = int(s, 16)
    except ValueError:
        raise NetlistError(f"bad INIT {text!r} on gate {gid!r}") from None
    if prim in FF_PRIMS and value > 1:
        raise NetlistError(f"flip-flop {gid!r} INIT must be 0 or 1")
    return value


def build_netlist(name: str, ports: list[Port], raw_gates: list[tuple[str, str, int, dict]]) -> Netlist:
    """Build a Netlist from raw gate tuples, folding GND/VCC into constant nets
    and normalizing an unconnected CARRY4 CI to const0."""
    const_of: dict[str, str] = {}
    for gid, prim, _, conns in raw_gates:
        if prim == "GND":
            const_of.update({n: CONST0 for n in conns.values() if n is not None})
        elif prim == "VCC":
            const_of.update({n: CONST1 for n in conns.values() if n is not None})
    gates = []
    for gid, prim, init, conns in raw_gates:
        if prim in ("GND", "VCC"):
            continue
        if prim not in PRIMITIVES:
            raise NetlistError(f"unknown primitive {prim!r} on gate {gid!r}")
        pins = {p: (const_of.get(n, n) if n is not None else None) for p, n in conns.items()}
        if prim == "CARRY4" and pins.get("CI") is None:
            pins["CI"] = CONST0
        gates.append(Gate(gid, prim, init, pins))
    ports = [Port(p.name, p.dir, tuple(const_of.get(b, b) for b in p.bits)) for p in ports]
    return Netlist(name, ports, gates)


def from_json(text: str) -> Netlist:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise NetlistError(f"JSON syntax error: {e.msg}", e.lineno, e.colno) from None
    if not isinstance(doc, dict):
        raise NetlistError("top-level JSON value must be an object")
    try:
        ports = [Port(str(p["name"]), p["dir"], tuple(str(b) for b in p["bits"])) for p in doc.get("ports", [])]
        raw = []
        for g in doc.get("gates", []):
            gid, prim = str(g["id"]), str(g["type"])
            if prim not in PRIMITIVES:
                raise NetlistError(f"unknown primitive {prim!r} on gate {gid!r}")
            conns = {str(k): (None if v is None else str(v)) for k, v in g.get("conns", {}).items()}
            raw.append((gid, prim, _parse_init(prim, g.get("init"), gid), conns))
    except (KeyError, TypeError) as e:
        raise NetlistError(f"malformed netlist JSON: missing or bad field {e}") from None
    return build_netlist(str(doc.get("name", "top")), ports, raw)


def init_hex(gate: Gate) -> str:
    if gate.prim in LUT_PRIMS:
        digits = max(1, (1 << lut_size(gate.prim)) // 4)
        return f"{gate.init:0{digits}X}"
    if gate.prim in FF_PRIMS:
        return str(gate.init)
    return ""


def to_dict(netlist: Netlist) -> dict:
    gates = []
    for g in netlist.gates.values():
        entry = {"id": g.id, "type": g.prim}
        if g.prim in LUT_PRIMS or g.prim in FF_PRIMS:
            entry["init"] = init_hex(g)
        entry["conns"] = {p: n for p, n in g.pins.items() if n is not None}
        gates.append(entry)
    return {
        "name": netlist.name,
        "ports": [{"name": p.name, "dir": p.dir, "bits": list(p.bits)} for p in netlist.ports],
        "gates": gates,
    }


def to_json(netlist: Netlist) -> str:
    return json.dumps(to_dict(netlist), indent=1)


def parse_netlist(source: str, format: str = "json") -> Netlist:
    """Parse netlist text in ``json`` or ``verilog`` (flat structural subset) form."""
    if format == "json":
        return from_json(source)
    if format in ("verilog", "verilog-subset"):
        from .verilog import netlist_from_verilog
        return netlist_from_verilog(source)
    raise ValueError(f"unknown netlist format {format!r}")


def load_netlist(path: str, format: Optional[str] = None) -> Netlist:
    with open(path) as f:
        text = f.read()
    if format is None:
        format = "verilog" if path.endswith((".v", ".sv")) else "json"
    return parse_netlist(text, format)
