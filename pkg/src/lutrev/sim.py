"""
Bit-parallel evaluation of netlists.

Every net value is a numpy bool array with one entry per *lane*; lanes are
independent stimulus vectors evaluated side by side.  ``CombEvaluator``
computes a combinational region from assigned cut nets and is the workhorse
behind cone functions, equivalence checks and word recovery.  ``Simulator``
steps the whole netlist cycle by cycle.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .netlist import (CONST0, CONST1, FF_RESET, LUT_PRIMS, MUX_PRIMS, Gate, Netlist, NetlistError,
                      PinRef, is_comb, is_ff, lut_size)


def lut_table(gate: Gate) -> np.ndarray:
    k = lut_size(gate.prim)
    return np.array([(gate.init >> b) & 1 for b in range(1 << k)], dtype=bool)


def _gate_step(gate: Gate):
    """Compile one combinational gate into ``f(values) -> None`` writing its outputs."""
    pins = gate.pins
    if gate.prim in LUT_PRIMS:
        table = lut_table(gate)
        ins = [pins[f"I{i}"] for i in range(lut_size(gate.prim))]
        out = pins.get("O")

        def lut(v):
            idx = v[ins[0]].astype(np.uint8)
            for j in range(1, len(ins)):
                idx |= v[ins[j]].astype(np.uint8) << j
            v[out] = table[idx]
        return lut if out is not None else (lambda v: None)
    if gate.prim in MUX_PRIMS:
        i0, i1, s, out = pins["I0"], pins["I1"], pins["S"], pins.get("O")

        def mux(v):
            v[out] = np.where(v[s], v[i1], v[i0])
        return mux if out is not None else (lambda v: None)
    if gate.prim == "CARRY4":
        ci, cyinit = pins["CI"], pins["CYINIT"]
        s = [pins[f"S[{i}]"] for i in range(4)]
        di = [pins[f"DI[{i}]"] for i in range(4)]
        o = [pins.get(f"O[{i}]") for i in range(4)]
        co = [pins.get(f"CO[{i}]") for i in range(4)]

        def carry4(v):
            c = v[ci] | v[cyinit]
            for i in range(4):
                si = v[s[i]]
                if o[i] is not None:
                    v[o[i]] = si ^ c
                c = np.where(si, c, v[di[i]])
                if co[i] is not None:
                    v[co[i]] = c
        return carry4
    raise NetlistError(f"gate {gate.id!r} ({gate.prim}) is not combinational")


def carry_in(v: Mapping[str, np.ndarray], gate: Gate) -> np.ndarray:
    """Effective stage-0 carry of a CARRY4: CI or CYINIT."""
    return v[gate.pins["CI"]] | v[gate.pins["CYINIT"]]


class Values(dict):
    """Net value map with implicit constant nets."""

    def __init__(self, lanes: int):
        super().__init__()
        self.lanes = lanes
        self[CONST0] = np.zeros(lanes, dtype=bool)
        self[CONST1] = np.ones(lanes, dtype=bool)


class CombEvaluator:
    """Evaluate ``targets`` from values assigned to ``inputs``.

    Only combinational gates between the inputs and the targets are evaluated;
    reaching a primary input, flip-flop or RAM output that is not among the
    inputs raises ``NetlistError``.
    """

    def __init__(self, netlist: Netlist, inputs: Sequence[str], targets: Sequence[str],
                 gates: Optional[Iterable[str]] = None):
        self.netlist = netlist
        self.inputs = list(inputs)
        self.targets = list(targets)
        allowed = None if gates is None else set(gates)
        cut = set(self.inputs) | {CONST0, CONST1}
        need: set[str] = set()
        stack = [t for t in self.targets if t not in cut]
        seen = set()
        while stack:
            net = stack.pop()
            if net in seen or net in cut:
                continue
            seen.add(net)
            g = netlist.driver_gate(net)
            if g is None or not is_comb(g.prim) or (allowed is not None and g.id not in allowed):
                raise NetlistError(f"net {net!r} is outside the evaluated region")
            if g.id not in need:
                need.add(g.id)
                stack.extend(g.input_nets())
        rank = netlist.comb_rank
        self.gates = sorted(need, key=rank.__getitem__)
        self._steps = [_gate_step(netlist.gates[g]) for g in self.gates]

    def values(self, assignment: Sequence[np.ndarray]) -> Values:
        lanes = len(assignment[0]) if len(assignment) else 1
        v = Values(lanes)
        for net, arr in zip(self.inputs, assignment):
            v[net] = np.asarray(arr, dtype=bool)
        for step in self._steps:
            step(v)
        return v

    def __call__(self, assignment: Sequence[np.ndarray]) -> list[np.ndarray]:
        v = self.values(assignment)
        return [v[t] for t in self.targets]


def words_to_bits(word: np.ndarray, width: int) -> list[np.ndarray]:
    word = np.asarray(word, dtype=np.uint64)
    return [((word >> np.uint64(i)) & np.uint64(1)).astype(bool) for i in range(width)]


def bits_to_word(bits: Sequence[np.ndarray]) -> np.ndarray:
    out = np.zeros(len(bits[0]) if len(bits) else 1, dtype=np.uint64)
    for i, b in enumerate(bits):
        out |= np.asarray(b, dtype=np.uint64) << np.uint64(i)
    return out


class RegionFunction:
    """Word-level view of a combinational region: input words -> output word.

    ``fixed`` pins additional nets (e.g. select or opcode bits) to constants.
    """

    def __init__(self, netlist: Netlist, input_words: Sequence[Sequence[str]], output_word: Sequence[str],
                 fixed: Optional[Mapping[str, int]] = None, gates: Optional[Iterable[str]] = None):
        self.input_words = [list(w) for w in input_words]
        self.output_word = list(output_word)
        self.fixed = dict(fixed or {})
        flat = [n for w in self.input_words for n in w]
        self._eval = CombEvaluator(netlist, flat + list(self.fixed), self.output_word, gates)

    @property
    def widths(self) -> list[int]:
        return [len(w) for w in self.input_words]

    def __call__(self, words: Sequence[np.ndarray]) -> np.ndarray:
        lanes = len(words[0]) if words else 1
        bits = []
        for w, word in zip(self.input_words, words):
            bits.extend(words_to_bits(word, len(w)))
        for value in self.fixed.values():
            bits.append(np.full(lanes, bool(value)))
        return bits_to_word(self._eval(bits))


class Simulator:
    """Cycle-based simulation with an implicit global clock.

    Each ``step`` applies primary inputs, settles combinational logic, samples
    the outputs and then clocks every flip-flop.  Resets (synchronous or not)
    are sampled at the clock edge with priority over CE.  RAM outputs read 0.
    """

    def __init__(self, netlist: Netlist, lanes: int = 1):
        self.netlist = netlist
        self.lanes = lanes
        self._steps = [_gate_step(netlist.gates[g]) for g in netlist.comb_order]
        self.ffs = netlist.flipflops()
        self._rams = [n for r in netlist.rams() for n in r.output_nets()]
        self.reset()

    def reset(self) -> None:
        self.state = {ff.id: np.full(self.lanes, bool(ff.init)) for ff in self.ffs}

    def settle(self, inputs: Mapping[str, object]) -> Values:
        v = Values(self.lanes)
        for p in self.netlist.inputs:
            word = inputs.get(p.name, 0)
            if isinstance(word, (list, tuple)) and len(word) == p.width and p.width > 0 \
                    and isinstance(word[0], np.ndarray):
                bits = word
            else:
                bits = words_to_bits(np.broadcast_to(np.asarray(word, dtype=np.uint64), (self.lanes,)), p.width)
            for net, b in zip(p.bits, bits):
                v[net] = b
        for ff in self.ffs:
            q = ff.pins.get("Q")
            if q is not None:
                v[q] = self.state[ff.id]
        for n in self._rams:
            v[n] = np.zeros(self.lanes, dtype=bool)
        for step in self._steps:
            step(v)
        return v

    def clock(self, v: Mapping[str, np.ndarray]) -> None:
        new = {}
        for ff in self.ffs:
            rpin, rval, _ = FF_RESET[ff.prim]
            q = self.state[ff.id]
            nxt = np.where(v[ff.pins["CE"]], v[ff.pins["D"]], q)
            new[ff.id] = np.where(v[ff.pins[rpin]], bool(rval), nxt)
        self.state = new

    def outputs(self, v: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
        return {p.name: bits_to_word([v[b] for b in p.bits]) if p.width else np.zeros(self.lanes, np.uint64)
                for p in self.netlist.outputs}

    def step(self, inputs: Mapping[str, object]) -> dict[str, np.ndarray]:
        v = self.settle(inputs)
        out = self.outputs(v)
        self.clock(v)
        return out


def simulate(netlist: Netlist, stimulus: Sequence[Mapping[str, int]]) -> list[dict[str, int]]:
    """Single-lane simulation: one dict of input port words per cycle in,
    one dict of output port words per cycle out."""
    sim = Simulator(netlist, lanes=1)
    return [{k: int(v[0]) for k, v in sim.step(cycle).items()} for cycle in stimulus]


def ff_control_nets(ff: Gate) -> tuple[str, str, str, str]:
    """(clock, enable, reset kind, reset net) of a flip-flop."""
    rpin = FF_RESET[ff.prim][0]
    return ff.pins["C"], ff.pins["CE"], ff.prim, ff.pins[rpin]


__all__ = ["CombEvaluator", "RegionFunction", "Simulator", "simulate", "words_to_bits", "bits_to_word",
           "lut_table", "carry_in", "ff_control_nets", "PinRef", "is_ff"]
