"""
Sequential module recovery.

Flip-flops are grouped by control key (clock, enable, reset kind and net).  For
each group a flip-flop connectivity graph (FFCG) is built by walking forward
from every Q through combinational logic; the graph is matched against
reference counter and shift-register graphs of the same size.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional

import networkx as nx
import numpy as np
from networkx.algorithms.isomorphism import DiGraphMatcher

from .boolfn import miter
from .model import Config, InferredModule
from .netlist import CONSTANTS, Gate, Netlist, NetlistError, PinRef, is_comb, is_ff
from .sim import RegionFunction, ff_control_nets


@dataclass(frozen=True)
class FFGroup:
    ffs: tuple[str, ...]
    control_key: tuple[str, str, str, str]

    @property
    def clock(self) -> str:
        return self.control_key[0]

    @property
    def enable(self) -> str:
        return self.control_key[1]

    @property
    def reset_kind(self) -> str:
        return self.control_key[2]

    @property
    def reset(self) -> str:
        return self.control_key[3]


@dataclass
class FFCG:
    graph: nx.DiGraph
    external: set[tuple[str, str]]
    po_hits: set[str]

    @property
    def edges(self) -> set[tuple[str, str]]:
        return set(self.graph.edges)


def group_flipflops(netlist: Netlist) -> list[FFGroup]:
    """Partition flip-flops by control key, groups ordered by their smallest member id."""
    by_key: dict[tuple, list[str]] = {}
    for ff in netlist.flipflops():
        by_key.setdefault(ff_control_nets(ff), []).append(ff.id)
    groups = [FFGroup(tuple(sorted(ids)), key) for key, ids in by_key.items()]
    return sorted(groups, key=lambda g: g.ffs[0])


class SourceIndex:
    """Where word bits come from: a primary-input port, a flip-flop group or another driver.

    ``group(net)`` is a hashable group key, ``rank(net)`` orders groups by
    source order (ports in declaration order, then FF groups by smallest id).
    """

    def __init__(self, netlist: Netlist, groups: Optional[list[FFGroup]] = None):
        self.netlist = netlist
        self.groups = groups if groups is not None else group_flipflops(netlist)
        self._ff_group = {ff: i for i, g in enumerate(self.groups) for ff in g.ffs}
        self._port_rank = {p.name: i for i, p in enumerate(netlist.ports)}

    def group(self, net: str) -> Optional[tuple]:
        if net in CONSTANTS:
            return None
        src = self.netlist.driver.get(net)
        if isinstance(src, PinRef):
            g = self.netlist.gates[src.gate]
            if is_ff(g.prim):
                return ("ff", self._ff_group[g.id])
            return ("gate", g.id)
        if src is not None:
            return ("port", src[1])
        return ("net", net)

    def rank(self, net: str) -> tuple:
        g = self.group(net)
        if g is None:
            return (3, "")
        if g[0] == "port":
            return (0, self._port_rank[g[1]])
        if g[0] == "ff":
            return (1, g[1])
        return (2, g[1])

    def position(self, net: str) -> tuple:
        """Rank plus bit index inside the port or FF group, for stable bit ordering."""
        src = self.netlist.driver.get(net)
        if isinstance(src, PinRef):
            g = self.netlist.gates[src.gate]
            if is_ff(g.prim):
                return self.rank(net) + (self.groups[self._ff_group[g.id]].ffs.index(g.id),)
            return self.rank(net) + (0,)
        if src is not None:
            return self.rank(net) + (src[2],)
        return self.rank(net) + (0,)


def build_ffcg(group: FFGroup, netlist: Netlist) -> FFCG:
    """Forward walk from every member Q through combinational gates to flip-flop D pins."""
    members = set(group.ffs)
    graph = nx.DiGraph()
    graph.add_nodes_from(group.ffs)
    external: set[tuple[str, str]] = set()
    po_hits: set[str] = set()
    for ff in group.ffs:
        q = netlist.gates[ff].pins.get("Q")
        if q is None:
            continue
        seen = set()
        queue = deque([q])
        while queue:
            net = queue.popleft()
            if net in seen:
                continue
            seen.add(net)
            if net in netlist.po_bits:
                po_hits.add(ff)
            for load in netlist.loads.get(net, ()):
                g = netlist.gates[load.gate]
                if is_ff(g.prim):
                    if load.pin == "D":
                        if g.id in members:
                            graph.add_edge(ff, g.id)
                        else:
                            external.add((ff, g.id))
                elif is_comb(g.prim):
                    queue.extend(g.output_nets())
    return FFCG(graph, external, po_hits)


def reference_counter(n: int) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(range(n))
    g.add_edges_from((i, j) for i in range(n) for j in range(i, n))
    return g


def reference_shifter(n: int) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(range(n))
    g.add_edges_from((i, i + 1) for i in range(n - 1))
    return g


def _iso_order(ffcg: nx.DiGraph, ref: nx.DiGraph) -> Optional[list[str]]:
    """FF ids in reference node order, or None when the graphs differ."""
    if ffcg.number_of_nodes() != ref.number_of_nodes() or ffcg.number_of_edges() != ref.number_of_edges():
        return None
    gm = DiGraphMatcher(ffcg, ref)
    for mapping in gm.isomorphisms_iter():
        inv = {v: k for k, v in mapping.items()}
        return [inv[i] for i in range(ref.number_of_nodes())]
    return None


def extract_boundary(group: FFGroup, netlist: Netlist, claimed: Iterable[str] = ()) -> set[str]:
    """Combinational gates lying only on Q->D paths that stay inside the group."""
    claimed = set(claimed)
    members = set(group.ffs)
    qs = [netlist.gates[f].pins["Q"] for f in group.ffs if netlist.gates[f].pins.get("Q")]
    ds = [netlist.gates[f].pins["D"] for f in group.ffs]

    def comb(g: Gate) -> bool:
        return is_comb(g.prim) and g.id not in claimed

    fwd = _walk(netlist, qs, comb, forward=True)
    back = _walk(netlist, ds, comb, forward=False)
    inside = fwd & back
    keep = set()
    for gid in inside:
        if _escapes(netlist, gid, members):
            continue
        keep.add(gid)
    return keep


def _walk(netlist: Netlist, nets: list[str], ok, forward: bool) -> set[str]:
    seen_nets, gates = set(), set()
    queue = deque(nets)
    while queue:
        net = queue.popleft()
        if net in seen_nets:
            continue
        seen_nets.add(net)
        if forward:
            for load in netlist.loads.get(net, ()):
                g = netlist.gates[load.gate]
                if ok(g) and g.id not in gates:
                    gates.add(g.id)
                    queue.extend(g.output_nets())
        else:
            g = netlist.driver_gate(net)
            if g is not None and ok(g) and g.id not in gates:
                gates.add(g.id)
                queue.extend(g.input_nets())
    return gates


def _escapes(netlist: Netlist, gid: str, members: set[str]) -> bool:
    """True when some output of the gate reaches a PO, a non-member FF or a non-D pin."""
    seen = set()
    queue = deque(netlist.gates[gid].output_nets())
    while queue:
        net = queue.popleft()
        if net in seen:
            continue
        seen.add(net)
        if net in netlist.po_bits:
            return True
        for load in netlist.loads.get(net, ()):
            g = netlist.gates[load.gate]
            if is_ff(g.prim):
                if g.id not in members or load.pin != "D":
                    return True
            elif is_comb(g.prim):
                queue.extend(g.output_nets())
            else:
                return True
    return False


def _counter_direction(netlist: Netlist, order: list[str], gates: set[str], cfg: Config) -> Optional[str]:
    q = [netlist.gates[f].pins["Q"] for f in order]
    d = [netlist.gates[f].pins["D"] for f in order]
    try:
        region = RegionFunction(netlist, [q], d, gates=gates)
    except NetlistError:
        return None
    n = len(order)
    mask = np.uint64((1 << n) - 1) if n < 64 else np.uint64(0xFFFFFFFFFFFFFFFF)
    for name, fn in (("up", lambda w: (w[0] + np.uint64(1)) & mask), ("down", lambda w: (w[0] - np.uint64(1)) & mask)):
        if miter(region, fn, [n], cfg.equiv_exhaustive_bits, cfg.equiv_samples, cfg.seed).equivalent:
            return name
    return None


def _is_shift(netlist: Netlist, order: list[str], gates: set[str]) -> bool:
    """Each D (after the first) is a buffered copy of the previous Q."""
    for prev, cur in zip(order, order[1:]):
        q = netlist.gates[prev].pins["Q"]
        d = netlist.gates[cur].pins["D"]
        if d == q:
            continue
        try:
            region = RegionFunction(netlist, [[q]], [d], gates=gates)
        except NetlistError:
            return False
        if not miter(region, lambda w: w[0], [1]).equivalent:
            return False
    return True


def classify_group(group: FFGroup, ffcg: FFCG, netlist: Netlist, boundary: set[str],
                   cfg: Config = Config()) -> tuple[str, list[str], Optional[str]]:
    """(kind, bit order, op) for a group: Counter, ShiftRegister or Register."""
    n = len(group.ffs)
    if n >= 2:
        order = _iso_order(ffcg.graph, reference_counter(n))
        if order is not None:
            direction = _counter_direction(netlist, order, boundary, cfg)
            if direction is not None:
                return "Counter", order, direction
        order = _iso_order(ffcg.graph, reference_shifter(n))
        if order is not None and _is_shift(netlist, order, boundary):
            return "ShiftRegister", order, None
    return "Register", _register_order(group, netlist), None


def _register_order(group: FFGroup, netlist: Netlist) -> list[str]:
    """Bit order of a plain register: by the port bit each Q drives, else by D source, else id."""
    def key(fid):
        g = netlist.gates[fid]
        q = g.pins.get("Q")
        if q in netlist.port_of_bit and not netlist.is_primary_input(q):
            name, i = netlist.port_of_bit[q]
            return (0, [p.name for p in netlist.ports].index(name), i, fid)
        d = g.pins["D"]
        if d in netlist.port_of_bit:
            name, i = netlist.port_of_bit[d]
            return (1, [p.name for p in netlist.ports].index(name), i, fid)
        return (2, 0, 0, fid)
    return sorted(group.ffs, key=key)


def identify_sequential(netlist: Netlist, claimed: Iterable[str] = (), groups: Optional[list[FFGroup]] = None,
                        cfg: Config = Config()) -> list[InferredModule]:
    """Classify every flip-flop group (minus already-claimed FFs) into a module."""
    claimed = set(claimed)
    groups = groups if groups is not None else group_flipflops(netlist)
    modules = []
    for g in groups:
        ffs = tuple(f for f in g.ffs if f not in claimed)
        if not ffs:
            continue
        sub = FFGroup(ffs, g.control_key)
        boundary = extract_boundary(sub, netlist, claimed)
        ffcg = build_ffcg(sub, netlist)
        kind, order, op = classify_group(sub, ffcg, netlist, boundary, cfg)
        clk, ce, prim, rst = g.control_key
        q = [netlist.gates[f].pins.get("Q") for f in order]
        d = [netlist.gates[f].pins["D"] for f in order]
        init = sum(netlist.gates[f].init << i for i, f in enumerate(order))
        details = {"ffs": list(order), "reset_kind": prim, "init": init, "d": d}
        if kind == "Counter":
            gates = frozenset(ffs) | _needed(netlist, d, set(q), boundary)
            inputs = []
        elif kind == "ShiftRegister":
            gates = frozenset(ffs) | _needed(netlist, d[1:], set(q), boundary)
            inputs = [[d[0]]]
        else:
            gates = frozenset(ffs)
            inputs = [d]
        modules.append(InferredModule(kind, gates, inputs, q, {"clk": clk, "ce": ce, "rst": rst}, "seq", op,
                                      details=details))
    return modules


def _needed(netlist: Netlist, targets: list[str], cut: set[str], allowed: set[str]) -> frozenset[str]:
    """Gates of ``allowed`` actually evaluated to compute ``targets`` from ``cut``."""
    need, stack = set(), list(targets)
    while stack:
        net = stack.pop()
        if net in cut or net in CONSTANTS:
            continue
        g = netlist.driver_gate(net)
        if g is None or g.id not in allowed or g.id in need:
            continue
        need.add(g.id)
        stack.extend(g.input_nets())
    return frozenset(need)
