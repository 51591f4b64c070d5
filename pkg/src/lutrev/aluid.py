"""
ALU recovery around carry chains.

The region of a chain is closed by a reverse walk from its inputs, a forward
walk from its sum outputs to the next register/port boundary and a final
reverse walk from the collected gates.  Region inputs that feed exactly one bit
position are operand bits; the few remaining inputs are opcode candidates.
Opcodes are discovered by enumerating every opcode assignment against every
reference operator with a miter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .boolfn import EVALUATORS, FunctionLibrary, miter
from .carrychain import CarryChain, ChainView, chain_view, output_ffs
from .model import Config, InferredModule
from .netlist import CONSTANTS, Netlist, NetlistError
from .seqid import SourceIndex
from .sim import RegionFunction


@dataclass
class AluCandidate:
    region: frozenset[str]
    input_words: list[list[str]]
    opcode_nets: list[str]
    output_word: list[str]
    chain: tuple[str, ...] = ()


@dataclass
class OpcodeMap:
    entries: dict[str, str] = field(default_factory=dict)
    matches: dict[str, list[str]] = field(default_factory=dict)
    exhaustive: bool = True

    @property
    def complete(self) -> bool:
        return bool(self.matches) and all(self.matches.values())


def _region_inputs(netlist: Netlist, gates: set[str]) -> list[str]:
    driven = {n for g in gates for n in netlist.gates[g].output_nets()}
    seen = {}
    for g in sorted(gates, key=netlist.comb_rank.get):
        for n in netlist.gates[g].input_nets():
            if n not in driven and n not in CONSTANTS:
                seen.setdefault(n, None)
    return list(seen)


def extract_alu_candidate(chain: CarryChain, netlist: Netlist, cfg: Config = Config(),
                          src: Optional[SourceIndex] = None,
                          view: Optional[ChainView] = None) -> tuple[Optional[AluCandidate], str]:
    """Candidate plus a reason string (empty on success)."""
    src = src or SourceIndex(netlist)
    view = view or chain_view(netlist, chain)
    if view.site != "O":
        return None, "chain has no sum outputs"
    outs = [n for n in view.outputs if n is not None]
    fwd = netlist.forward_region(outs)
    if not fwd.gates:
        return None, "no logic between chain and register boundary"
    if any(n in outs for n in fwd.frontier):
        return None, "chain outputs reach the boundary directly"
    feed = [n for g in fwd.gates for n in netlist.gates[g].input_nets()]
    closure = netlist.reverse_region(feed)
    region = set(view.gates) | set(fwd.gates) | set(closure.gates)
    inputs = _region_inputs(netlist, region)

    per_pos = []
    for p in range(view.width):
        per_pos.append(set(view.s_cones[p].frontier) | set(view.di_cones[p].frontier))
    count: dict[str, int] = {}
    for s in per_pos:
        for n in s:
            count[n] = count.get(n, 0) + 1
    data = {n for n, c in count.items() if c == 1}
    side = sorted((n for n in inputs if n not in data), key=lambda n: (src.position(n), n))
    if not side:
        return None, "no side inputs"
    if len(side) > cfg.alu_max_side_inputs:
        return None, f"{len(side)} side inputs exceed {cfg.alu_max_side_inputs}"

    words: dict[tuple, list[Optional[str]]] = {}
    for p, s in enumerate(per_pos):
        bits = [n for n in s if n in data]
        for n in bits:
            slot = words.setdefault(src.group(n), [None] * view.width)
            if slot[p] is not None:
                return None, f"two operand bits of one source at position {p}"
            slot[p] = n
    if len(words) != 2 or any(None in w for w in words.values()):
        return None, f"{len(words)} operand words instead of two"
    a, b = sorted(words.values(), key=lambda w: src.position(w[0]))

    reach: dict[str, set[int]] = {}
    for p, n in enumerate(view.outputs):
        for f in netlist.forward_region([n]).frontier:
            reach.setdefault(f, set()).add(p)
    if any(len(ps) != 1 for ps in reach.values()):
        return None, "outputs depend on several chain positions"
    ordered = sorted(reach, key=lambda n: next(iter(reach[n])))
    if len(ordered) != view.width or sorted(next(iter(reach[n])) for n in ordered) != list(range(view.width)):
        return None, "output word does not match chain width"
    return AluCandidate(frozenset(region), [a, b], side, ordered, chain.gates), ""


def discover_opcodes(cand: AluCandidate, lib: FunctionLibrary, netlist: Netlist,
                     cfg: Config = Config()) -> OpcodeMap:
    """Every (opcode value, reference operation) pair that passes the miter."""
    k = len(cand.opcode_nets)
    if k > 8:
        raise ValueError("opcode space larger than 2^8")
    w = len(cand.input_words[0])
    result = OpcodeMap()
    for v in range(1 << k):
        code = format(v, f"0{k}b") if k else ""
        fixed = {cand.opcode_nets[j]: (v >> j) & 1 for j in range(k)}
        try:
            region = RegionFunction(netlist, cand.input_words, cand.output_word, fixed, cand.region)
        except NetlistError:
            result.matches[code] = []
            continue
        hits = []
        for ref in lib.reference_ops:
            ev = EVALUATORS[ref.evaluator]
            r = miter(region, lambda words, ev=ev: ev(words[0], words[1], w), region.widths,
                      cfg.equiv_exhaustive_bits, cfg.equiv_samples, cfg.seed)
            if r.equivalent:
                hits.append(ref.name)
                result.exhaustive = result.exhaustive and r.exhaustive
        result.matches[code] = hits
        if hits:
            result.entries[code] = hits[0]
    return result


def identify_alu(chain: CarryChain, netlist: Netlist, lib: FunctionLibrary, cfg: Config = Config(),
                 src: Optional[SourceIndex] = None) -> tuple[Optional[InferredModule], str]:
    cand, reason = extract_alu_candidate(chain, netlist, cfg, src)
    if cand is None:
        return None, reason
    opmap = discover_opcodes(cand, lib, netlist, cfg)
    if not opmap.complete:
        missing = sorted(c for c, h in opmap.matches.items() if not h)
        return None, f"opcodes {missing} match no reference operation"
    controls = {f"op{j}": n for j, n in enumerate(cand.opcode_nets)}
    gates, out = set(cand.region), list(cand.output_word)
    ffs = output_ffs(netlist, out) or []
    if ffs and all(netlist.gates[f].pins.get("Q") for f in ffs):
        gates.update(ffs)
        out = [netlist.gates[f].pins["Q"] for f in ffs]
    else:
        ffs = []
    m = InferredModule("ALU", frozenset(gates), cand.input_words, out, controls, "alu", None,
                       dict(opmap.entries), list(cand.output_word), ffs,
                       verified="exhaustive" if opmap.exhaustive else "sampled",
                       details={"chain": list(chain.gates), "matches": opmap.matches})
    return m, ""
