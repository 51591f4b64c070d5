"""
Ground-truth design generator.

Builds LUT/CARRY4/flip-flop netlists the way 7-series synthesis maps common
word-level operators (XOR on S, an operand on DI, CYINIT 0 for add and 1 for
subtract) and records machine-readable labels for every generated module.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import ceil, log2
from typing import Callable, Optional, Sequence

import numpy as np

from .netlist import CONST0, CONST1, FF_PRIMS, FF_RESET, Netlist, Port, build_netlist
from .boolfn import EVALUATORS

RESET_PRIM = {"R": "FDRE", "S": "FDSE", "CLR": "FDCE", "PRE": "FDPE"}
CMP_OPS = ("gt", "ge", "lt", "le", "eq")
BITWISE_FNS: dict[str, Callable[[int, int], int]] = {
    "and": lambda a, b: a & b,
    "or": lambda a, b: a | b,
    "xor": lambda a, b: a ^ b,
    "nand": lambda a, b: 1 - (a & b),
    "nor": lambda a, b: 1 - (a | b),
    "xnor": lambda a, b: 1 - (a ^ b),
    "andn": lambda a, b: a & (1 - b),
    "orn": lambda a, b: a | (1 - b),
}
KINDS = ("adder", "subtractor", "addsub", "comparator", "counter", "shiftreg", "register", "bitwise", "alu",
         "random")


class Builder:
    """Accumulates gates and ports; hands out sequential opaque ids."""

    def __init__(self, name: str = "top", seed: int = 0, shared_control: bool = False):
        self.name = name
        self.ports: list[Port] = []
        self.raw: list[tuple[str, str, int, dict]] = []
        self._n = 0
        self._g = 0
        self.rng = np.random.default_rng(seed)
        self.shared_control = shared_control
        self._clk: Optional[str] = None
        self._shared: Optional[tuple[str, str]] = None

    def net(self) -> str:
        self._n += 1
        return f"n{self._n:05d}"

    def gid(self) -> str:
        self._g += 1
        return f"g{self._g:05d}"

    def input(self, name: str, width: int) -> list[str]:
        bits = [self.net() for _ in range(width)]
        self.ports.append(Port(name, "in", tuple(bits)))
        return bits

    def output(self, name: str, bits: Sequence[str]) -> None:
        self.ports.append(Port(name, "out", tuple(bits)))

    def clk(self) -> str:
        if self._clk is None:
            self._clk = self.input("clk", 1)[0]
        return self._clk

    def shared(self) -> tuple[str, str]:
        if self._shared is None:
            self._shared = (self.input("ce", 1)[0], self.input("rst", 1)[0])
        return self._shared

    def lut(self, inputs: Sequence[str], fn: Callable[..., int], permute: bool = False) -> tuple[str, str]:
        """LUT computing fn(*inputs); with ``permute`` the pin order is shuffled."""
        k = len(inputs)
        order = list(self.rng.permutation(k)) if permute and k > 1 else list(range(k))
        init = 0
        for m in range(1 << k):
            args = [0] * k
            for j in range(k):
                args[order[j]] = (m >> j) & 1
            if fn(*args) & 1:
                init |= 1 << m
        out = self.net()
        g = self.gid()
        conns = {f"I{j}": inputs[order[j]] for j in range(k)}
        conns["O"] = out
        self.raw.append((g, f"LUT{k}", init, conns))
        return g, out

    def carry4(self, ci: str, cyinit: str, di: Sequence[str], s: Sequence[str], used: int) -> tuple[str, list, list]:
        g = self.gid()
        conns = {"CI": ci, "CYINIT": cyinit}
        o, co = [], []
        for i in range(4):
            conns[f"DI[{i}]"] = di[i]
            conns[f"S[{i}]"] = s[i]
            if i < used:
                o.append(self.net())
                co.append(self.net())
                conns[f"O[{i}]"] = o[-1]
                conns[f"CO[{i}]"] = co[-1]
        self.raw.append((g, "CARRY4", 0, conns))
        return g, o, co

    def ff(self, d: str, ce: str, rst: str, reset: str = "R", init: int = 0) -> tuple[str, str]:
        if self.shared_control:
            ce, rst = self.shared()
            reset = "R"
        prim = RESET_PRIM[reset]
        q = self.net()
        g = self.gid()
        self.raw.append((g, prim, init, {"C": self.clk(), "CE": ce, "D": d, FF_RESET[prim][0]: rst, "Q": q}))
        return g, q

    def build(self) -> Netlist:
        return build_netlist(self.name, self.ports, self.raw)


def carry_chain(b: Builder, s: Sequence[str], di: Sequence[str], cyinit: str) -> tuple[list, list, list]:
    """ceil(w/4) cascaded CARRY4s; unused top positions get S=DI=0."""
    w = len(s)
    gates, o, co = [], [], []
    ci = CONST0
    for k in range(ceil(w / 4)):
        lo = 4 * k
        used = min(4, w - lo)
        ss = list(s[lo:lo + used]) + [CONST0] * (4 - used)
        dd = list(di[lo:lo + used]) + [CONST0] * (4 - used)
        g, oo, cc = b.carry4(ci, cyinit if k == 0 else CONST0, dd, ss, used)
        gates.append(g)
        o.extend(oo)
        co.extend(cc)
        ci = cc[3] if used == 4 else None
    return gates, o, co


@dataclass
class GroundTruth:
    modules: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({"modules": self.modules}, indent=1, sort_keys=True)

    def claimed(self) -> set[str]:
        return {g for m in self.modules if m.get("claimed", True) for g in m["gates"]}

    def of_kind(self, kind: str) -> list[dict]:
        return [m for m in self.modules if m["kind"] == kind]


class _Ctx:
    def __init__(self, b: Builder, prefix: str, opts: dict):
        self.b = b
        self.p = prefix
        self.opts = opts
        self.permute = bool(opts.get("permuted", False))
        self.registered = bool(opts.get("registered", False))
        self.labels: list[dict] = []
        self._rst: Optional[str] = None

    def rst(self) -> str:
        if self.b.shared_control:
            return self.b.shared()[1]
        if self._rst is None:
            self._rst = self.b.input(self.p + "rst", 1)[0]
        return self._rst

    def ce(self, name: str = "ce") -> str:
        if self.b.shared_control:
            return self.b.shared()[0]
        return self.b.input(self.p + name, 1)[0]

    def input_word(self, name: str, width: int) -> list[str]:
        bits = self.b.input(self.p + name, width)
        if not self.registered:
            return bits
        ce = self.ce("ce_" + name)
        gates, qs = [], []
        for d in bits:
            g, q = self.b.ff(d, ce, self.rst())
            gates.append(g)
            qs.append(q)
        self.labels.append(_label("Register", gates, [bits], qs, controls=self._controls(ce)))
        return qs

    def output_word(self, name: str, nets: Sequence[str]) -> tuple[list[str], list[str]]:
        """Drive an output port, through a register when registered-io; returns (port nets, FF ids)."""
        if not self.registered:
            self.b.output(self.p + name, nets)
            return list(nets), []
        ce = self.ce("ce_" + name)
        gates, qs = [], []
        for d in nets:
            g, q = self.b.ff(d, ce, self.rst())
            gates.append(g)
            qs.append(q)
        self.b.output(self.p + name, qs)
        return qs, gates

    def _controls(self, ce: str) -> dict:
        return {"clk": self.b.clk(), "ce": ce, "rst": self.rst()}


def _label(kind: str, gates, input_words, output_word, op=None, **extra) -> dict:
    d = {"kind": kind, "gates": sorted(gates), "input_words": [list(w) for w in input_words],
         "output_word": list(output_word), "op": op, "width": len(output_word), "claimed": True}
    d.update(extra)
    return d


# generators -------------------------------------------------------------------

def _arith(c: _Ctx, width: int, op: str) -> None:
    b = c.b
    a = c.input_word("a", width)
    bb = c.input_word("b", width)
    controls = {}
    luts = []
    if op == "addsub":
        sel = c.input_word("sel", 1)[0]
        controls["sel"] = sel
        s = []
        for i in range(width):
            g, n = b.lut([a[i], bb[i], sel], lambda x, y, z: x ^ y ^ z, c.permute)
            luts.append(g)
            s.append(n)
        cyinit = sel
    else:
        fn = (lambda x, y: x ^ y) if op == "add" else (lambda x, y: 1 - (x ^ y))
        s = []
        for i in range(width):
            g, n = b.lut([a[i], bb[i]], fn, c.permute)
            luts.append(g)
            s.append(n)
        cyinit = CONST0 if op == "add" else CONST1
    carries, o, _ = carry_chain(b, s, a, cyinit)
    out, ffs = c.output_word("o", o)
    kind = {"add": "Adder", "sub": "Subtractor", "addsub": "AddSub"}[op]
    extra = {"op_map": {"0": "add", "1": "sub"}} if op == "addsub" else {}
    c.labels.append(_label(kind, luts + carries + ffs, [a, bb], out, op=op if op != "addsub" else None,
                           comb_output=o, controls=controls, **extra))


def _comparator(c: _Ctx, width: int, op: str) -> None:
    if op not in CMP_OPS:
        raise ValueError(f"unsupported comparator {op!r}")
    b = c.b
    a = c.input_word("a", width)
    bb = c.input_word("b", width)
    luts, s, di = [], [], []
    for i in range(width):
        g, n = b.lut([a[i], bb[i]], lambda x, y: 1 - (x ^ y), c.permute)
        luts.append(g)
        s.append(n)
        if op == "eq":
            di.append(CONST0)
            continue
        fn = (lambda x, y: x & (1 - y)) if op in ("gt", "ge") else (lambda x, y: (1 - x) & y)
        g, n = b.lut([a[i], bb[i]], fn, c.permute)
        luts.append(g)
        di.append(n)
    cyinit = CONST0 if op in ("gt", "lt") else CONST1
    carries, _, co = carry_chain(b, s, di, cyinit)
    res = [co[width - 1]]
    out, ffs = c.output_word("o", res)
    c.labels.append(_label("Comparator", luts + carries + ffs, [a, bb], out, op=op, comb_output=res))


def _alu(c: _Ctx, width: int, ops: Sequence[str]) -> None:
    b = c.b
    nsel = max(1, ceil(log2(len(ops))))
    arith = {"add", "sub"}
    if not set(ops) & arith:
        raise ValueError("an ALU needs at least one carry-chain operation (add or sub)")
    for o in ops:
        if o not in arith and o not in BITWISE_FNS:
            raise ValueError(f"unsupported ALU operation {o!r}")
    a = c.input_word("a", width)
    bb = c.input_word("b", width)
    opn = c.input_word("op", nsel)
    luts = []

    def opval(bits):
        v = sum(x << j for j, x in enumerate(bits))
        return ops[v] if v < len(ops) else ops[-1]

    if "sub" in ops:
        g, is_sub = b.lut(opn, lambda *o: int(opval(o) == "sub"))
        luts.append(g)
        s = []
        for i in range(width):
            g, n = b.lut([a[i], bb[i]] + opn, lambda x, y, *o: x ^ y ^ int(opval(o) == "sub"),
                         c.permute)
            luts.append(g)
            s.append(n)
        cyinit = is_sub
    else:
        s = []
        for i in range(width):
            g, n = b.lut([a[i], bb[i]], lambda x, y: x ^ y, c.permute)
            luts.append(g)
            s.append(n)
        cyinit = CONST0
    carries, o, _ = carry_chain(b, s, a, cyinit)
    res = []
    for i in range(width):
        def fn(x, y, r, *obits):
            name = opval(obits)
            return r if name in arith else BITWISE_FNS[name](x, y)
        g, n = b.lut([a[i], bb[i], o[i]] + opn, fn, c.permute)
        luts.append(g)
        res.append(n)
    out, ffs = c.output_word("o", res)
    op_map = {format(v, f"0{nsel}b"): (ops[v] if v < len(ops) else ops[-1]) for v in range(1 << nsel)}
    c.labels.append(_label("ALU", luts + carries + ffs, [a, bb], out, comb_output=res, op_map=op_map,
                           controls={f"op{j}": n for j, n in enumerate(opn)}))


def _counter(c: _Ctx, width: int) -> None:
    b = c.b
    reset = "R" if b.shared_control else c.opts.get("reset", "R")
    init = int(c.opts.get("init", 0))
    up = c.opts.get("direction", "up") == "up"
    ce = c.ce()
    rst = c.rst()
    m = 1 if up else 0
    luts = []
    # FFs are created first so the D logic can reference their Q nets
    ff_ids, qs, d_nets = [], [], []
    for i in range(width):
        d_nets.append(b.net())
    for i in range(width):
        g, q = b.ff(d_nets[i], ce, rst, reset, (init >> i) & 1)
        ff_ids.append(g)
        qs.append(q)
    rename = {}
    g, n = b.lut([qs[0]], lambda x: 1 - x)
    luts.append(g)
    rename[d_nets[0]] = n
    match = None
    for i in range(1, width):
        if i == 1:
            g, n = b.lut([qs[1], qs[0]], lambda x, y: x ^ int(y == m), c.permute)
        else:
            if i == 2:
                g2, match = b.lut([qs[0], qs[1]], lambda x, y: int(x == m and y == m), c.permute)
            else:
                g2, match = b.lut([match, qs[i - 1]], lambda x, y: x & int(y == m), c.permute)
            luts.append(g2)
            g, n = b.lut([qs[i], match], lambda x, y: x ^ y, c.permute)
        luts.append(g)
        rename[d_nets[i]] = n
    _rename_d(b, rename)
    b.output(c.p + "q", qs)
    c.labels.append(_label("Counter", ff_ids + luts, [], qs, op="up" if up else "down", init=init,
                           controls={"clk": b.clk(), "ce": ce, "rst": rst},
                           reset=reset))


def _rename_d(b: Builder, rename: dict) -> None:
    for k, (g, prim, init, conns) in enumerate(b.raw):
        if prim in FF_PRIMS and conns["D"] in rename:
            conns = dict(conns)
            conns["D"] = rename[conns["D"]]
            b.raw[k] = (g, prim, init, conns)


def _shiftreg(c: _Ctx, width: int) -> None:
    b = c.b
    reset = "R" if b.shared_control else c.opts.get("reset", "R")
    ce = c.ce()
    sin = b.input(c.p + "sin", 1)[0]
    rst = c.rst()
    ffs, qs = [], []
    d = sin
    for i in range(width):
        g, q = b.ff(d, ce, rst, reset)
        ffs.append(g)
        qs.append(q)
        d = q
    b.output(c.p + "q", qs)
    c.labels.append(_label("ShiftRegister", ffs, [[sin]], qs, controls={"clk": b.clk(), "ce": ce, "rst": rst},
                           reset=reset))


def _register(c: _Ctx, width: int) -> None:
    b = c.b
    reset = "R" if b.shared_control else c.opts.get("reset", "R")
    coupled = bool(c.opts.get("coupled", False))
    ce = c.ce()
    d = b.input(c.p + "d", width)
    rst = c.rst()
    ffs, qs, luts = [], [], []
    if not coupled:
        for i in range(width):
            g, q = b.ff(d[i], ce, rst, reset)
            ffs.append(g)
            qs.append(q)
    else:
        dn = [b.net() for _ in range(width)]
        for i in range(width):
            g, q = b.ff(dn[i], ce, rst, reset)
            ffs.append(g)
            qs.append(q)
        rename = {}
        for i in range(width):
            others = [j for j in range(width) if j != i]
            j1, j2 = (int(x) for x in b.rng.choice(others, 2, replace=False))
            table = _dependent_table(b.rng, 3)
            g, n = b.lut([d[i], qs[j1], qs[j2]], lambda *x, t=table: (t >> sum(v << k for k, v in enumerate(x))) & 1)
            luts.append(g)
            rename[dn[i]] = n
        _rename_d(b, rename)
    b.output(c.p + "q", qs)
    c.labels.append(_label("Register", ffs, [d], qs, controls={"clk": b.clk(), "ce": ce, "rst": rst},
                           coupled=coupled))
    if luts:
        # cross-coupling logic is not part of any recognizable word operator
        c.labels.append(_label("Unknown", luts, [], [], claimed=False))


def _dependent_table(rng, k: int) -> int:
    """Random k-input table that depends on every input."""
    from .boolfn import TruthTable
    while True:
        bits = int.from_bytes(rng.bytes(max(1, (1 << k) // 8)), "little") & ((1 << (1 << k)) - 1)
        tt = TruthTable(tuple(f"x{j}" for j in range(k)), bits)
        if all(tt.depends_on(j) for j in range(k)):
            return bits


def _bitwise(c: _Ctx, width: int) -> None:
    b = c.b
    fname = c.opts.get("fn", "and")
    fn = BITWISE_FNS[fname]
    a = c.input_word("a", width)
    bb = c.input_word("b", width)
    luts, res = [], []
    for i in range(width):
        g, n = b.lut([a[i], bb[i]], fn, c.permute)
        luts.append(g)
        res.append(n)
    out, ffs = c.output_word("o", res)
    # registered outputs belong to their own register group, not the bitwise word
    if ffs:
        c.labels.append(_label("Register", ffs, [res], out))
    c.labels.append(_label("BitwiseOp", luts, [a, bb], res, op=fname))


def _random(c: _Ctx, width: int) -> None:
    """Unstructured glue: every output depends on 12 inputs through two LUT6 levels."""
    b = c.b
    nin = max(12, width)
    x = b.input(c.p + "x", nin)
    luts, outs = [], []
    for i in range(width):
        pick = [int(v) for v in b.rng.permutation(nin)[:12]]
        t1, t2 = _dependent_table(b.rng, 6), _dependent_table(b.rng, 6)
        g1, h1 = b.lut([x[j] for j in pick[:6]], lambda *v, t=t1: (t >> sum(u << k for k, u in enumerate(v))) & 1)
        g2, h2 = b.lut([x[j] for j in pick[6:]], lambda *v, t=t2: (t >> sum(u << k for k, u in enumerate(v))) & 1)
        g3, o = b.lut([h1, h2], lambda p, q: p ^ q)
        luts += [g1, g2, g3]
        outs.append(o)
    b.output(c.p + "y", outs)
    c.labels.append(_label("Unknown", luts, [x], outs, claimed=False))


def _emit(b: Builder, kind: str, width: int, opts: dict, prefix: str) -> list[dict]:
    if not 2 <= width <= 64 and kind not in ("register", "random"):
        raise ValueError(f"width {width} outside 2..64")
    c = _Ctx(b, prefix, opts)
    if kind in ("adder", "subtractor", "addsub"):
        _arith(c, width, {"adder": "add", "subtractor": "sub", "addsub": "addsub"}[kind])
    elif kind == "comparator":
        _comparator(c, width, opts.get("cmp", "ge"))
    elif kind == "alu":
        _alu(c, width, list(opts.get("ops", ("add", "sub", "and", "xor"))))
    elif kind == "counter":
        _counter(c, width)
    elif kind == "shiftreg":
        _shiftreg(c, width)
    elif kind == "register":
        _register(c, width)
    elif kind == "bitwise":
        _bitwise(c, width)
    elif kind == "random":
        _random(c, width)
    else:
        raise ValueError(f"unsupported kind {kind!r}")
    return c.labels


def gen(kind: str, width: int, permuted: bool = False, registered: bool = False, seed: int = 0,
        **options) -> tuple[Netlist, GroundTruth]:
    """Generate one labeled design.  ``kind`` may carry a variant after a colon,
    e.g. ``comparator:lt``, ``bitwise:xor``, ``alu:add,sub,and,xor``."""
    kind, options = _split_kind(kind, options)
    b = Builder(f"{kind}{width}", seed)
    opts = dict(options, permuted=permuted, registered=registered)
    labels = _emit(b, kind, width, opts, "")
    return b.build(), GroundTruth(labels)


def _split_kind(kind: str, options: dict) -> tuple[str, dict]:
    options = dict(options)
    if ":" in kind:
        kind, variant = kind.split(":", 1)
        if kind == "comparator":
            options.setdefault("cmp", variant)
        elif kind == "bitwise":
            options.setdefault("fn", variant)
        elif kind == "alu":
            options.setdefault("ops", variant.split(","))
        elif kind == "counter":
            options.setdefault("direction", variant)
    if kind in CMP_OPS:
        options.setdefault("cmp", kind)
        kind = "comparator"
    if kind not in KINDS:
        raise ValueError(f"unsupported kind {kind!r}")
    return kind, options


def compose(designs: Sequence[tuple], shared_control: bool = False, seed: int = 0,
            name: str = "composite") -> tuple[Netlist, GroundTruth]:
    """Merge disjoint designs under one port list sharing a single clock.

    Each item is ``(kind, width)`` or ``(kind, width, options)``.  With
    ``shared_control`` every flip-flop uses the same CE and reset nets.
    """
    if not designs:
        raise ValueError("compose needs at least one design")
    b = Builder(name, seed, shared_control)
    labels = []
    for i, d in enumerate(designs):
        kind, width = d[0], d[1]
        opts = dict(d[2]) if len(d) > 2 else {}
        kind, opts = _split_kind(kind, opts)
        for lab in _emit(b, kind, width, opts, f"d{i}_"):
            lab["design"] = i
            labels.append(lab)
    return b.build(), GroundTruth(labels)


def _bitwise_word(fn, a: np.ndarray, b: np.ndarray, w: int) -> np.ndarray:
    table = np.array([[fn(0, 0), fn(0, 1)], [fn(1, 0), fn(1, 1)]], dtype=np.uint64)
    out = np.zeros_like(a)
    for i in range(w):
        x = ((a >> np.uint64(i)) & np.uint64(1)).astype(np.intp)
        y = ((b >> np.uint64(i)) & np.uint64(1)).astype(np.intp)
        out |= table[x, y] << np.uint64(i)
    return out


def oracle(label: dict) -> Callable[[Sequence[np.ndarray]], np.ndarray]:
    """Behavioral evaluator of a combinational label: input words -> output word."""
    kind = label["kind"]
    w = len(label["input_words"][0]) if label["input_words"] else label["width"]
    if kind == "BitwiseOp":
        fn = BITWISE_FNS[label["op"]]
        return lambda words: _bitwise_word(fn, words[0], words[1], w)
    if kind in ("Adder", "Subtractor", "Comparator"):
        ev = EVALUATORS[label["op"]]
        return lambda words: ev(words[0], words[1], w)
    if kind == "AddSub":
        def addsub(words):
            a, b, sel = words
            return np.where(sel & np.uint64(1), EVALUATORS["sub"](a, b, w), EVALUATORS["add"](a, b, w))
        return addsub
    if kind == "ALU":
        def alu(words):
            a, b, op = words
            out = np.zeros_like(a)
            for code, name in label["op_map"].items():
                if name in BITWISE_FNS:
                    ref = _bitwise_word(BITWISE_FNS[name], a, b, w)
                else:
                    ref = EVALUATORS[name](a, b, w)
                out = np.where(op == np.uint64(int(code, 2)), ref, out)
            return out
        return alu
    raise ValueError(f"no combinational oracle for kind {kind!r}")


def _preset_designs(name: str) -> list[tuple]:
    if name == "aes":
        # carry-free datapath of registered bitwise words, each with its own controls
        fns = list(BITWISE_FNS)
        return [(f"bitwise:{fns[i % len(fns)]}", 8, {"registered": True}) for i in range(20)]
    if name == "hilbert":
        return [("adder", 16, {"registered": True})] * 5 + [("subtractor", 16, {"registered": True})] * 10
    if name == "composite":
        return [("adder", 32, {"registered": True}), ("addsub", 24, {"registered": True}), ("counter", 12, {}),
                ("shiftreg", 24, {}), ("bitwise:xor", 24, {"registered": True}), ("adder", 48, {"permuted": True}),
                ("counter:down", 8, {"reset": "CLR"}), ("bitwise:andn", 12, {}), ("random", 6, {}),
                ("register", 8, {"coupled": True})]
    raise ValueError(f"unknown preset {name!r}")


PRESETS = ("aes", "hilbert", "composite")


def preset(name: str, seed: int = 0) -> tuple[Netlist, GroundTruth]:
    """Named analog designs: ``aes`` (20 registered 8-bit bitwise words, no carries),
    ``hilbert`` (5 adders and 10 subtractors) and ``composite`` (mixed datapath)."""
    return compose(_preset_designs(name), seed=seed, name=f"{name}_analog")
