"""
K-cut enumeration and bit-slice matching.

Cuts are enumerated bottom-up: the cut set of a net is the trivial cut plus
every union of one cut per fan-in whose size stays within k, keeping only cuts
not dominated by (strict supersets of) another.  A bit-slice is a net feeding
a register or output port together with its smallest cut made of register
outputs and primary inputs; slices with the same function, the same source
groups and the same destination group are merged into one word operator.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Iterable, Optional

from .boolfn import SupportOverflow, TruthTable, npn_key, region_function
from .model import Config, InferredModule
from .netlist import CONSTANTS, LUT_PRIMS, MUX_PRIMS, Netlist, PinRef, is_ff
from .seqid import SourceIndex

SLICE_PRIMS = LUT_PRIMS + MUX_PRIMS

# two-role tables (bit m: A = bit 0 of m, B = bit 1 of m) with conventional names
NAMED_2 = {0x8: "and", 0xE: "or", 0x6: "xor", 0x7: "nand", 0x1: "nor", 0x9: "xnor", 0x2: "andn", 0xB: "orn",
           0x4: "nandb", 0xD: "ornb"}
NAMED_1 = {0x2: "buf", 0x1: "not"}


@dataclass(frozen=True)
class Cut:
    root: str
    leaves: frozenset[str]


@dataclass(frozen=True)
class BitSlice:
    root: str
    cut: Cut
    fn: TruthTable
    gates: frozenset[str]
    dest: tuple
    dest_pos: tuple


def _mux3() -> tuple[int, int]:
    return npn_key(TruthTable.from_function(("s", "a", "b"), lambda s, a, b: b if s else a))


@lru_cache(maxsize=1)
def slice_classes() -> frozenset[tuple[int, int]]:
    """All one- and two-input NPN classes (non-degenerate) plus the 2:1 multiplexer."""
    keys = set()
    for n in (1, 2):
        for bits in range(1 << (1 << n)):
            tt = TruthTable(tuple(f"x{j}" for j in range(n)), bits)
            if tt.minimized().n == n:
                keys.add(npn_key(tt))
    keys.add(_mux3())
    return frozenset(keys)


class CutEnumerator:
    """Memoized bottom-up k-feasible cut enumeration over a gate subset."""

    def __init__(self, netlist: Netlist, k: int = 6, gates: Optional[Iterable[str]] = None,
                 max_cuts: Optional[int] = None):
        if not 2 <= k <= 6:
            raise ValueError("k must be between 2 and 6")
        self.netlist = netlist
        self.k = k
        self.allowed = None if gates is None else set(gates)
        self.max_cuts = max_cuts
        self._memo: dict[str, list[frozenset[str]]] = {}

    def _expandable(self, net: str):
        g = self.netlist.driver_gate(net)
        if g is None or g.prim not in SLICE_PRIMS:
            return None
        if self.allowed is not None and g.id not in self.allowed:
            return None
        return g

    def cuts(self, net: str) -> list[frozenset[str]]:
        order = self._postorder(net)
        for n in order:
            if n not in self._memo:
                self._memo[n] = self._compute(n)
        return self._memo[net]

    def _postorder(self, net: str) -> list[str]:
        out, seen = [], set()
        stack = [(net, False)]
        while stack:
            n, done = stack.pop()
            if done:
                out.append(n)
                continue
            if n in seen or n in self._memo:
                continue
            seen.add(n)
            stack.append((n, True))
            g = self._expandable(n)
            if g is not None:
                for i in g.input_nets():
                    if i not in CONSTANTS:
                        stack.append((i, False))
        return out

    def _compute(self, net: str) -> list[frozenset[str]]:
        trivial = frozenset([net])
        g = self._expandable(net)
        if g is None:
            return [trivial]
        fanins = list(dict.fromkeys(n for n in g.input_nets() if n not in CONSTANTS))
        merged: set[frozenset[str]] = set()
        for combo in product(*(self._memo[f] for f in fanins)):
            u = frozenset().union(*combo)
            if len(u) <= self.k:
                merged.add(u)
        merged.add(trivial)
        cuts = _irredundant(merged)
        cuts.sort(key=lambda c: (len(c), sorted(c)))
        if self.max_cuts is not None:
            cuts = cuts[:self.max_cuts]
            if trivial not in cuts:
                cuts[-1:] = [trivial]
        return cuts


def _irredundant(cuts: set[frozenset[str]]) -> list[frozenset[str]]:
    ordered = sorted(cuts, key=len)
    keep: list[frozenset[str]] = []
    for c in ordered:
        if not any(k < c for k in keep):
            keep.append(c)
    return keep


def enumerate_kcuts(netlist: Netlist, root: str, k: int = 6, gates: Optional[Iterable[str]] = None,
                    max_cuts: Optional[int] = None) -> list[Cut]:
    return [Cut(root, c) for c in CutEnumerator(netlist, k, gates, max_cuts).cuts(root)]


def _cone_gates(netlist: Netlist, root: str, leaves: frozenset[str]) -> frozenset[str]:
    need, stack = set(), [root]
    while stack:
        net = stack.pop()
        if net in leaves or net in CONSTANTS:
            continue
        g = netlist.driver_gate(net)
        if g is None or g.id in need:
            continue
        need.add(g.id)
        stack.extend(g.input_nets())
    return frozenset(need)


def _destinations(netlist: Netlist, net: str, src: SourceIndex) -> list[tuple]:
    """(group key, bit position) of every register D pin and output port bit fed by ``net``."""
    dests = []
    for load in netlist.loads.get(net, ()):
        g = netlist.gates[load.gate]
        if is_ff(g.prim) and load.pin == "D" and g.pins.get("Q"):
            dests.append((src.group(g.pins["Q"]), src.position(g.pins["Q"])))
    for p in netlist.outputs:
        for i, b in enumerate(p.bits):
            if b == net:
                dests.append((("port", p.name), (0, [q.name for q in netlist.ports].index(p.name), i)))
    return dests


def find_slices(netlist: Netlist, unclaimed: Iterable[str], src: SourceIndex, k: int = 6,
                max_cuts: Optional[int] = None) -> list[BitSlice]:
    unclaimed = set(unclaimed)
    enum = CutEnumerator(netlist, k, unclaimed, max_cuts)
    roots = []
    for gid in sorted(unclaimed, key=netlist.comb_rank.get):
        g = netlist.gates[gid]
        if g.prim not in SLICE_PRIMS:
            continue
        for net in g.output_nets():
            if _destinations(netlist, net, src):
                roots.append(net)
    classes = slice_classes()
    slices = []
    for root in roots:
        dests = _destinations(netlist, root, src)
        if len({d[0] for d in dests}) != 1:
            continue
        for leaves in enum.cuts(root):
            if root in leaves or not all(_is_source(netlist, n) for n in leaves):
                continue
            ordered = sorted(leaves, key=lambda n: (src.position(n), n))
            try:
                tt = region_function(netlist, ordered, root, k)
            except SupportOverflow:
                continue
            if tt.n == 0 or npn_key(tt) not in classes:
                break
            slices.append(BitSlice(root, Cut(root, leaves), tt, _cone_gates(netlist, root, leaves), dests[0][0],
                                   min(d[1] for d in dests)))
            break
    return slices


def _is_source(netlist: Netlist, net: str) -> bool:
    if netlist.is_primary_input(net):
        return True
    g = netlist.driver_gate(net)
    return g is not None and is_ff(g.prim)


def op_name(tt: TruthTable) -> str:
    if tt.n == 2 and tt.bits in NAMED_2:
        return NAMED_2[tt.bits]
    if tt.n == 1 and tt.bits in NAMED_1:
        return NAMED_1[tt.bits]
    return f"fn{tt.n}_{tt.bits:x}"


def detect_bitwise_words(netlist: Netlist, unclaimed: Iterable[str], src: Optional[SourceIndex] = None,
                         cfg: Config = Config()) -> list[InferredModule]:
    """Merge slices with matching function, sources and destination into BitwiseOp words."""
    src = src or SourceIndex(netlist)
    slices = find_slices(netlist, unclaimed, src, cfg.k, cfg.max_cuts)
    buckets: dict[tuple, list[tuple[BitSlice, tuple[str, ...]]]] = {}
    for s in slices:
        roles = tuple(s.fn.support)
        groups = tuple(src.group(n) for n in roles)
        key = (npn_key(s.fn), s.fn.bits, groups, s.dest)
        buckets.setdefault(key, []).append((s, roles))
    modules = []
    used: set[str] = set()
    for key in sorted(buckets, key=lambda k: min(s.dest_pos for s, _ in buckets[k])):
        members = sorted(buckets[key], key=lambda x: x[0].dest_pos)
        picked = []
        for s, roles in members:
            if s.gates & used or any(s.gates & p.gates for p, _ in picked):
                continue
            picked.append((s, roles))
        if len(picked) < 2:
            continue
        n = len(picked[0][1])
        words = [[roles[j] for _, roles in picked] for j in range(n)]
        flat = [x for w in words for x in w]
        if len(set(flat)) != len(flat):
            continue
        gates = frozenset().union(*(s.gates for s, _ in picked))
        used |= gates
        tt = TruthTable(tuple(f"x{j}" for j in range(n)), picked[0][0].fn.bits)
        modules.append(InferredModule("BitwiseOp", gates, words, [s.root for s, _ in picked], {}, "kcut",
                                      op_name(tt), details={"table": tt.bits, "arity": n,
                                                            "dest": list(map(str, picked[0][0].dest))}))
    return modules
