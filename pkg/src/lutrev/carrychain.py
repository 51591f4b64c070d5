"""
Carry-chain analysis: chain detection, pure-operation inference from the S/DI
fan-in functions, select-line (cross-optimized add/sub) detection and operand
word recovery from the CARRY4 bit positions.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass
from itertools import permutations
from typing import Optional, Sequence

from .boolfn import (EVALUATORS, CarryOp, FunctionLibrary, SupportOverflow, TruthTable, miter, npn_key,
                     region_function)
from .model import CARRY_KIND, Config, InferredModule
from .netlist import CONSTANTS, Cone, Netlist, NetlistError, PinRef, is_ff
from .seqid import SourceIndex
from .sim import RegionFunction, ff_control_nets


@dataclass(frozen=True)
class CarryChain:
    """Cascaded CARRY4 gates, head first."""
    gates: tuple[str, ...]
    diagnostics: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.gates)

    def pin(self, netlist: Netlist, name: str, p: int) -> Optional[str]:
        """Net on pin ``name`` (S, DI, O, CO) at chain bit position ``p``."""
        return netlist.gates[self.gates[p // 4]].pins.get(f"{name}[{p % 4}]")

    def pinref(self, name: str, p: int) -> PinRef:
        return PinRef(self.gates[p // 4], f"{name}[{p % 4}]")


def detect_carry_chains(netlist: Netlist) -> list[CarryChain]:
    """Follow CO[3] -> CI links from every CARRY4 not fed by another CARRY4's CO[3]."""
    carries = {g.id: g for g in netlist.carry_gates()}

    def fed_by_carry(g) -> bool:
        src = netlist.driver.get(g.pins["CI"])
        return isinstance(src, PinRef) and src.gate in carries and src.pin == "CO[3]"

    queue = deque(sorted(gid for gid, g in carries.items() if not fed_by_carry(g)))
    used: set[str] = set()
    chains = []
    while queue:
        head = queue.popleft()
        if head in used:
            continue
        gates, diags = [], []
        cur: Optional[str] = head
        while cur is not None and cur not in used:
            used.add(cur)
            gates.append(cur)
            co3 = carries[cur].pins.get("CO[3]")
            nxt = sorted(l.gate for l in netlist.loads.get(co3, ()) if l.pin == "CI" and l.gate in carries)
            if len(nxt) > 1:
                diags.append(f"CO[3] of {cur} drives {len(nxt)} carry inputs; following {nxt[0]}")
                queue.extend(nxt[1:])
            cur = nxt[0] if nxt else None
        chains.append(CarryChain(tuple(gates), tuple(diags)))
    # a CO[3] fan-out leaves orphaned followers; they start chains of their own
    for gid in sorted(set(carries) - used):
        chains.append(CarryChain((gid,), ("orphaned carry element",)))
    return chains


@dataclass
class ChainView:
    """Per-position cones of a chain up to its used width."""
    chain: CarryChain
    width: int
    site: Optional[str]
    s_cones: list[Cone]
    di_cones: list[Cone]
    gates: set[str]
    outputs: list[Optional[str]]


def chain_site(netlist: Netlist, chain: CarryChain) -> tuple[Optional[str], int]:
    """Used output site and width: O pins (arithmetic) or a single tail CO (comparison)."""
    n = 4 * len(chain)
    loaded = [p for p in range(n) if _used(netlist, chain.pin(netlist, "O", p))]
    if loaded:
        return "O", max(loaded) + 1
    internal = set(chain.gates)
    co = []
    for p in range(n):
        net = chain.pin(netlist, "CO", p)
        if net is None:
            continue
        ext = [l for l in netlist.loads.get(net, ()) if not (l.pin == "CI" and l.gate in internal)]
        if ext or net in netlist.po_bits:
            co.append(p)
    if len(co) == 1:
        return "CO", co[0] + 1
    return None, n


def _used(netlist: Netlist, net: Optional[str]) -> bool:
    return net is not None and (bool(netlist.loads.get(net)) or net in netlist.po_bits)


def chain_view(netlist: Netlist, chain: CarryChain) -> ChainView:
    site, width = chain_site(netlist, chain)
    s_cones = [netlist.extract_cone(chain.pinref("S", p)) for p in range(width)]
    di_cones = [netlist.extract_cone(chain.pinref("DI", p)) for p in range(width)]
    head = netlist.gates[chain.gates[0]]
    cin = netlist.reverse_region([head.pins["CI"], head.pins["CYINIT"]])
    gates = set(chain.gates) | set(cin.gates)
    for c in s_cones + di_cones:
        gates.update(c.gates)
    if site == "O":
        outputs = [chain.pin(netlist, "O", p) for p in range(width)]
    elif site == "CO":
        outputs = [chain.pin(netlist, "CO", width - 1)]
    else:
        outputs = []
    return ChainView(chain, width, site, s_cones, di_cones, gates, outputs)


def _cone_fn(netlist: Netlist, cone: Cone, net: Optional[str], max_support: int,
             fixed: Optional[dict] = None) -> Optional[TruthTable]:
    try:
        return region_function(netlist, cone.frontier, net, max_support, fixed)
    except SupportOverflow:
        return None


def position_functions(netlist: Netlist, view: ChainView, max_support: int, fixed: Optional[dict] = None):
    """Minimized S and DI functions per bit position (None when support exceeds the bound)."""
    ch = view.chain
    s = [_cone_fn(netlist, c, ch.pin(netlist, "S", p), max_support, fixed) for p, c in enumerate(view.s_cones)]
    di = [_cone_fn(netlist, c, ch.pin(netlist, "DI", p), max_support, fixed) for p, c in enumerate(view.di_cones)]
    return s, di


def carry_in_value(netlist: Netlist, chain: CarryChain, fixed: Optional[dict] = None) -> Optional[int]:
    """Constant value of CI | CYINIT at the head, or None when it is not constant."""
    head = netlist.gates[chain.gates[0]]
    value = 0
    for pin in ("CI", "CYINIT"):
        net = head.pins[pin]
        cone = netlist.reverse_region([net])
        try:
            tt = region_function(netlist, cone.frontier, net, 8, fixed)
        except (SupportOverflow, NetlistError):
            return None
        if tt.n:
            return None
        value |= tt.bits & 1
    return value


def _lookup(lib: FunctionLibrary, s_fns, di_fns, cyinit, site) -> list[CarryOp]:
    if cyinit is None or site is None or not s_fns:
        return []
    if any(f is None for f in s_fns) or any(f is None for f in di_fns):
        return []
    s_keys = {npn_key(f) for f in s_fns}
    di_keys = {npn_key(f) for f in di_fns}
    if len(s_keys) != 1 or len(di_keys) != 1:
        return []
    return lib.lookup(s_keys.pop(), di_keys.pop(), cyinit, site)


def _matches(tt: TruthTable, template: TruthTable, mapping: dict[str, str]) -> bool:
    nets = [mapping[r] for r in template.support]
    if sorted(nets) != sorted(tt.support):
        return False
    return tt.reorder(nets).bits == template.bits


def role_assignments(s: TruthTable, di: TruthTable, op: CarryOp) -> list[dict[str, str]]:
    """Role -> net maps under which both the S and DI functions equal the op's templates."""
    roles = op.s_template.support
    if s.n != len(roles):
        return []
    out = []
    for nets in permutations(s.support):
        mapping = dict(zip(roles, nets))
        if _matches(s, op.s_template, mapping) and _matches(di, op.di_template, mapping):
            out.append(mapping)
    return out


@dataclass
class WordChoice:
    op: CarryOp
    words: list[list[str]]
    resolved: bool
    order_score: int


def recover_words(op: CarryOp, s_fns, di_fns, src: SourceIndex, commutative: bool) -> Optional[WordChoice]:
    """Assign each bit position's support nets to operand roles.

    Exact template matching decides most positions (DI pins operand A of an
    adder).  Symmetric positions follow the flip-flop group / port that the
    decided positions put A in, then source order.
    """
    roles = op.s_template.support
    per_pos = [role_assignments(s, d, op) for s, d in zip(s_fns, di_fns)]
    if not per_pos or any(not m for m in per_pos):
        return None
    votes = Counter(src.group(m[0][roles[0]]) for m in per_pos if len(m) == 1)
    resolved = True
    chosen = []
    for opts in per_pos:
        if len(opts) == 1:
            chosen.append(opts[0])
            continue
        pick = None
        if votes:
            top = votes.most_common(1)[0][0]
            hits = [m for m in opts if src.group(m[roles[0]]) == top]
            if len(hits) == 1:
                pick = hits[0]
        if pick is None:
            opts = sorted(opts, key=lambda m: [src.position(m[r]) for r in roles])
            pick = opts[0]
            if src.group(pick[roles[0]]) == src.group(pick[roles[-1]]) and not commutative:
                resolved = False
        chosen.append(pick)
    words = [[m[r] for m in chosen] for r in roles]
    flat = [n for w in words for n in w]
    if len(set(flat)) != len(flat):
        resolved = False
    score = sum(1 if src.position(m[roles[0]]) < src.position(m[roles[-1]]) else -1 for m in chosen) \
        if len(roles) > 1 else 0
    return WordChoice(op, words, resolved, score)


def choose_op(ops: Sequence[CarryOp], s_fns, di_fns, src: SourceIndex, lib: FunctionLibrary) -> Optional[WordChoice]:
    """Among mirror entries (e.g. gt/lt) pick the one whose operand A comes first in source order."""
    choices = []
    for op in ops:
        commutative = _commutative(lib, op.name)
        wc = recover_words(op, s_fns, di_fns, src, commutative)
        if wc is not None:
            choices.append(wc)
    if not choices:
        return None
    return max(choices, key=lambda c: (c.resolved, c.order_score))


def _commutative(lib: FunctionLibrary, name: str) -> bool:
    try:
        return lib.reference(name).commutative
    except KeyError:
        return False


def detect_select_lines(netlist: Netlist, view: ChainView, src: SourceIndex, max_select: int = 2,
                        max_support: int = 6) -> list[str]:
    """Nets in the support of every S cone that are not operand bits."""
    if view.width < 2:
        return []
    supports = []
    for p, cone in enumerate(view.s_cones):
        tt = _cone_fn(netlist, cone, view.chain.pin(netlist, "S", p), max_support)
        supports.append(set(tt.support) if tt is not None else set(cone.frontier))
    shared = set.intersection(*supports) - set(CONSTANTS)
    di_count = Counter(n for c in view.di_cones for n in set(c.frontier))
    shared = {n for n in shared if di_count[n] != 1}
    return sorted(shared, key=lambda n: (src.position(n), n))[:max_select]


def output_ffs(netlist: Netlist, nets: Sequence[str]) -> Optional[list[str]]:
    """Flip-flops fed directly and exclusively by every output net, sharing one control key."""
    ffs = []
    for n in nets:
        loads = netlist.loads.get(n, ())
        if n in netlist.po_bits or len(loads) != 1 or loads[0].pin != "D":
            return None
        g = netlist.gates[loads[0].gate]
        if not is_ff(g.prim):
            return None
        ffs.append(g.id)
    if not ffs or len({ff_control_nets(netlist.gates[f]) for f in ffs}) != 1:
        return None
    return ffs


def _module(netlist: Netlist, view: ChainView, kind: str, words, op=None, op_map=None, controls=None,
            resolved=True) -> InferredModule:
    outputs = list(view.outputs)
    ffs = output_ffs(netlist, outputs) if kind != "Unknown" and outputs else None
    gates = set(view.gates)
    out_word = outputs
    if ffs:
        gates.update(ffs)
        out_word = [netlist.gates[f].pins["Q"] for f in ffs]
        if any(q is None for q in out_word):
            ffs, out_word, gates = None, outputs, set(view.gates)
    return InferredModule(kind, frozenset(gates), [list(w) for w in words], list(out_word),
                          dict(controls or {}), "carry", op, dict(op_map or {}), outputs, list(ffs or []),
                          resolved, details={"chain": list(view.chain.gates), "site": view.site,
                                             "chain_width": view.width})


def unknown_module(netlist: Netlist, view: ChainView, reason: str) -> InferredModule:
    m = _module(netlist, view, "Unknown", [])
    m.details["reason"] = reason
    return m


def identify_pure_operation(chain: CarryChain, netlist: Netlist, lib: FunctionLibrary, cfg: Config = Config(),
                            src: Optional[SourceIndex] = None, view: Optional[ChainView] = None) -> InferredModule:
    src = src or SourceIndex(netlist)
    view = view or chain_view(netlist, chain)
    if view.site is None:
        return unknown_module(netlist, view, "no used output site")
    s_fns, di_fns = position_functions(netlist, view, cfg.pure_op_max_support)
    ops = _lookup(lib, s_fns, di_fns, carry_in_value(netlist, chain), view.site)
    if not ops:
        return unknown_module(netlist, view, "no library match")
    wc = choose_op(ops, s_fns, di_fns, src, lib)
    if wc is None:
        m = _module(netlist, view, CARRY_KIND[ops[0].name], [], ops[0].name, resolved=False)
        return m
    return _module(netlist, view, CARRY_KIND[wc.op.name], wc.words, wc.op.name, resolved=wc.resolved)


def identify_cross_optimized(chain: CarryChain, selects: Sequence[str], netlist: Netlist, lib: FunctionLibrary,
                             cfg: Config = Config(), src: Optional[SourceIndex] = None,
                             view: Optional[ChainView] = None) -> InferredModule:
    """Cofactor the S/DI functions per select assignment and look each one up."""
    src = src or SourceIndex(netlist)
    view = view or chain_view(netlist, chain)
    if not 1 <= len(selects) <= max(1, cfg.max_select_nets) or view.site is None:
        return unknown_module(netlist, view, "no select lines")
    k = len(selects)
    per: dict[str, WordChoice] = {}
    for v in range(1 << k):
        fixed = {selects[j]: (v >> j) & 1 for j in range(k)}
        s_fns, di_fns = position_functions(netlist, view, cfg.pure_op_max_support, fixed)
        ops = _lookup(lib, s_fns, di_fns, carry_in_value(netlist, chain, fixed), view.site)
        wc = choose_op(ops, s_fns, di_fns, src, lib) if ops else None
        if wc is None:
            return unknown_module(netlist, view, f"select value {v} has no library match")
        per[format(v, f"0{k}b")] = wc
    names = {wc.op.name for wc in per.values()}
    first = next(iter(per.values()))
    resolved = all(wc.resolved and wc.words == first.words for wc in per.values())
    if len(names) == 1:
        return _module(netlist, view, CARRY_KIND[first.op.name], first.words, first.op.name, resolved=resolved)
    kind = "AddSub" if names <= {"add", "sub"} else "ALU"
    controls = {f"sel{j}": n for j, n in enumerate(selects)}
    return _module(netlist, view, kind, first.words, None, {c: wc.op.name for c, wc in per.items()}, controls,
                   resolved)


def verify_module(netlist: Netlist, m: InferredModule, cfg: Config = Config()) -> bool:
    """Miter the module's combinational region against the reference evaluators."""
    if not m.known or not m.words_resolved or not m.input_words:
        return False
    comb = set(m.gates) - set(m.output_ffs)
    controls = list(m.control_nets.values())
    cases = m.op_map.items() if m.op_map else [("", m.op)]
    w = len(m.input_words[0])
    exact = True
    for code, name in cases:
        fixed = {controls[j]: int(code[len(code) - 1 - j]) for j in range(len(controls))}
        try:
            region = RegionFunction(netlist, m.input_words, m.comb_output, fixed, comb)
        except NetlistError:
            return False
        ev = EVALUATORS[name]
        r = miter(region, lambda words: ev(words[0], words[1], w), region.widths, cfg.equiv_exhaustive_bits,
                  cfg.equiv_samples, cfg.seed)
        if not r.equivalent:
            return False
        exact = exact and r.exhaustive
    m.verified = "exhaustive" if exact else "sampled"
    return True


def analyze_chain(chain: CarryChain, netlist: Netlist, lib: FunctionLibrary, cfg: Config = Config(),
                  src: Optional[SourceIndex] = None) -> InferredModule:
    """Pure operation first, then select-line cofactoring; every known result is verified."""
    src = src or SourceIndex(netlist)
    view = chain_view(netlist, chain)
    m = identify_pure_operation(chain, netlist, lib, cfg, src, view)
    if not m.known:
        selects = detect_select_lines(netlist, view, src, cfg.max_select_nets)
        if selects:
            m = identify_cross_optimized(chain, selects, netlist, lib, cfg, src, view)
    # unresolved operand words keep their kind but stay unverified (flagged in the report)
    if m.known and m.words_resolved and m.input_words and not verify_module(netlist, m, cfg):
        m = unknown_module(netlist, view, f"{m.kind} candidate failed equivalence check")
    return m
