"""
Cycle simulator for the emitted word-level Verilog subset.

The top module's instances are flattened into one signal space.  Expressions
are compiled once into closures over ``uint64`` lane arrays (so words are at
most 64 bits wide).  Continuous assigns and ``always @(*)`` blocks are settled
in strongly-connected-component order, iterating inside a component until it
is stable; clocked blocks fire on every cycle with non-blocking semantics,
matching the single-clock model of the netlist simulator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional

import networkx as nx
import numpy as np

from .netlist import NetlistError
from .verilog import (Always, Assign, Binary, Block, Blocking, Case, Concat, Cond, Ident, If, Index, Module,
                      NonBlocking, Num, Slice, Unary, parse_modules)

U64 = np.uint64
ALL = U64(0xFFFFFFFFFFFFFFFF)


def _mask(w: int) -> U64:
    return ALL if w >= 64 else U64((1 << w) - 1)


Env = dict  # signal name -> uint64 lane array
Compiled = Callable[[Env], tuple[np.ndarray, int]]


@dataclass
class Unit:
    """One settle step: writes ``targets`` from ``reads``."""
    run: Callable[[Env], None]
    reads: set[str]
    targets: set[str]


class Design:
    def __init__(self, text: str, top: Optional[str] = None):
        mods = {m.name: m for m in parse_modules(text)}
        if not mods:
            raise NetlistError("no modules in RTL text")
        self.top = mods[top] if top else list(mods.values())[-1]
        self.widths: dict[str, int] = {}
        self.inits: dict[str, int] = {}
        self.units: list[Unit] = []
        self.seq: list[Callable[[Env, dict], None]] = []
        self._flatten(self.top, "", mods)
        self._order = self._schedule()

    # elaboration ----------------------------------------------------------

    def _flatten(self, mod: Module, prefix: str, mods: dict) -> None:
        for name, d in mod.decls.items():
            self.widths[prefix + name] = d.width
            if d.init is not None:
                v, _ = self._compile(d.init, prefix)(None)
                self.inits[prefix + name] = int(v)
        for a in mod.assigns:
            self.units.append(self._assign_unit(a.lhs, a.rhs, prefix, prefix))
        for al in mod.always:
            if al.sens == ["*"] or all(s[0] == "level" for s in al.sens):
                self.units.append(self._comb_block(al.body, prefix))
            else:
                self.seq.append(self._seq_block(al.body, prefix))
        for inst in mod.instances:
            sub = mods.get(inst.module)
            if sub is None:
                raise NetlistError(f"unknown module {inst.module!r} instantiated as {inst.name!r}")
            ip = prefix + inst.name + "."
            self._flatten(sub, ip, mods)
            for pin, expr in inst.conns.items():
                if expr is None:
                    continue
                d = sub.decls.get(pin)
                if d is None:
                    raise NetlistError(f"module {sub.name!r} has no port {pin!r}")
                if d.kind == "input":
                    self.units.append(self._assign_unit(Ident(pin), expr, ip, prefix))
                else:
                    self.units.append(self._assign_unit(expr, Ident(pin), prefix, ip))

    def _width(self, name: str) -> int:
        if name not in self.widths:
            raise NetlistError(f"undeclared signal {name!r}")
        return self.widths[name]

    def _compile(self, e, p: str) -> Compiled:
        if isinstance(e, Num):
            v, w = U64(e.value & ((1 << 64) - 1)), e.width or 0
            return lambda env: (v, w)
        if isinstance(e, Ident):
            name = p + e.name
            w = self._width(name)
            return lambda env: (env[name], w)
        if isinstance(e, Index):
            name, i = p + e.name, U64(e.index)
            self._width(name)
            return lambda env: ((env[name] >> i) & U64(1), 1)
        if isinstance(e, Slice):
            name, lo, w = p + e.name, U64(e.lsb), e.msb - e.lsb + 1
            m = _mask(w)
            self._width(name)
            return lambda env: ((env[name] >> lo) & m, w)
        if isinstance(e, Concat):
            parts = [self._compile(x, p) for x in e.parts]

            def concat(env):
                acc, total = U64(0), 0
                for f in parts:
                    v, w = f(env)
                    if not w:
                        raise NetlistError("unsized constant inside concatenation")
                    acc = (acc << U64(w)) | (v & _mask(w)) if total else v & _mask(w)
                    total += w
                return acc, total
            return concat
        if isinstance(e, Unary):
            f = self._compile(e.arg, p)
            op = e.op
            if op == "~":
                return lambda env: ((lambda v, w: (~v & _mask(w or 64), w))(*f(env)))
            if op == "!":
                return lambda env: (_u(f(env)[0] == 0), 1)
            if op == "&":
                return lambda env: (lambda v, w: (_u(v == _mask(w)), 1))(*f(env))
            if op == "|":
                return lambda env: (_u(f(env)[0] != 0), 1)
            if op == "^":
                return lambda env: (lambda v, w: (_parity(v, w), 1))(*f(env))
            if op == "-":
                return lambda env: (lambda v, w: ((U64(0) - v) & _mask(w or 64), w))(*f(env))
            raise NetlistError(f"unsupported unary operator {op!r}")
        if isinstance(e, Binary):
            fa, fb = self._compile(e.left, p), self._compile(e.right, p)
            return _binary(e.op, fa, fb)
        if isinstance(e, Cond):
            fc, ft, fe = self._compile(e.cond, p), self._compile(e.then, p), self._compile(e.other, p)

            def cond(env):
                c, _ = fc(env)
                t, wt = ft(env)
                o, wo = fe(env)
                return np.where(c != 0, t, o), max(wt, wo)
            return cond
        raise NetlistError(f"unsupported expression {e!r}")

    def _targets(self, lhs, p: str) -> list[tuple[str, int, int]]:
        """(signal, lsb, width) pieces of an assignment target, LSB piece first."""
        if isinstance(lhs, Ident):
            return [(p + lhs.name, 0, self._width(p + lhs.name))]
        if isinstance(lhs, Index):
            self._width(p + lhs.name)
            return [(p + lhs.name, lhs.index, 1)]
        if isinstance(lhs, Slice):
            self._width(p + lhs.name)
            return [(p + lhs.name, lhs.lsb, lhs.msb - lhs.lsb + 1)]
        if isinstance(lhs, Concat):
            out = []
            for part in reversed(lhs.parts):
                out.extend(self._targets(part, p))
            return out
        raise NetlistError(f"unsupported assignment target {lhs!r}")

    def _writer(self, lhs, p: str) -> tuple[Callable, set[str]]:
        pieces = self._targets(lhs, p)

        def write(env, value, sel=None):
            """Store ``value`` into the target, only on lanes in ``sel`` when given."""
            shift = 0
            for name, lo, w in pieces:
                part = (value >> U64(shift)) & _mask(w) if shift < 64 else U64(0)
                if lo == 0 and w == self.widths[name]:
                    new = part
                else:
                    m = _mask(w) << U64(lo)
                    new = (env[name] & ~m) | ((part << U64(lo)) & m)
                if sel is not None:
                    new = np.where(sel, new, env[name])
                elif np.ndim(new) == 0:
                    new = np.full(env["__lanes__"].shape, new, dtype=U64)
                env[name] = new
                shift += w
        return write, {t[0] for t in pieces}

    def _assign_unit(self, lhs, rhs, lp: str, rp: str) -> Unit:
        f = self._compile(rhs, rp)
        write, targets = self._writer(lhs, lp)
        return Unit(lambda env: write(env, f(env)[0]), _reads(rhs, rp), targets)

    def _stmt(self, s, p: str):
        """Compile a statement into run(env, pending, sel) plus (reads, writes).

        ``sel`` is the boolean lane mask under which the statement executes
        (None for all lanes); non-blocking writes are queued in ``pending``.
        """
        if isinstance(s, Block):
            parts = [self._stmt(x, p) for x in s.stmts]

            def block(env, pend, sel):
                for r, _, _ in parts:
                    r(env, pend, sel)
            reads = set().union(*(x[1] for x in parts)) if parts else set()
            return block, reads, set().union(*(x[2] for x in parts)) if parts else set()
        if isinstance(s, If):
            fc = self._compile(s.cond, p)
            t = self._stmt(s.then, p)
            o = self._stmt(s.other, p) if s.other is not None else None

            def run_if(env, pend, sel):
                c = np.broadcast_to(fc(env)[0] != 0, env["__lanes__"].shape)
                _branch(env, pend, sel, c, t[0])
                if o is not None:
                    _branch(env, pend, sel, ~c, o[0])
            reads = _reads(s.cond, p) | t[1] | (o[1] if o else set())
            return run_if, reads, t[2] | (o[2] if o else set())
        if isinstance(s, Case):
            fs = self._compile(s.expr, p)
            arms = []
            for labels, body in s.items:
                fl = [self._compile(x, p) for x in labels] if labels is not None else None
                arms.append((fl, self._stmt(body, p)))

            def run_case(env, pend, sel):
                v = np.broadcast_to(fs(env)[0], env["__lanes__"].shape)
                taken = np.zeros(v.shape, dtype=bool)
                default = None
                for fl, st in arms:
                    if fl is None:
                        default = st
                        continue
                    hit = np.zeros(v.shape, dtype=bool)
                    for f in fl:
                        hit |= v == f(env)[0]
                    hit &= ~taken
                    taken |= hit
                    _branch(env, pend, sel, hit, st[0])
                if default is not None:
                    _branch(env, pend, sel, ~taken, default[0])
            reads = _reads(s.expr, p)
            writes = set()
            for fl, st in arms:
                reads |= st[1]
                writes |= st[2]
            for labels, _ in s.items:
                for x in labels or []:
                    reads |= _reads(x, p)
            return run_case, reads, writes
        if isinstance(s, (Blocking, NonBlocking)):
            f = self._compile(s.rhs, p)
            write, targets = self._writer(s.lhs, p)
            if isinstance(s, NonBlocking):
                def nb(env, pend, sel):
                    pend.append((write, f(env)[0], sel))
                return nb, _reads(s.rhs, p), targets

            def bl(env, pend, sel):
                write(env, f(env)[0], sel)
            return bl, _reads(s.rhs, p), targets
        raise NetlistError(f"unsupported statement {s!r}")

    def _comb_block(self, body, p: str) -> Unit:
        run, reads, writes = self._stmt(body, p)
        return Unit(lambda env: run(env, [], None), reads - writes, writes)

    def _seq_block(self, body, p: str):
        run, _, _ = self._stmt(body, p)
        return run

    def _schedule(self) -> list[list[Unit]]:
        g = nx.DiGraph()
        writers: dict[str, list[int]] = {}
        for i, u in enumerate(self.units):
            g.add_node(i)
            for t in u.targets:
                writers.setdefault(t, []).append(i)
        for i, u in enumerate(self.units):
            for r in u.reads:
                for w in writers.get(r, ()):
                    g.add_edge(w, i)
        cond = nx.condensation(g)
        order = []
        for c in nx.lexicographical_topological_sort(cond, key=lambda c: min(cond.nodes[c]["members"])):
            members = sorted(cond.nodes[c]["members"])
            cyclic = len(members) > 1 or g.has_edge(members[0], members[0])
            order.append(([self.units[i] for i in members], cyclic))
        return order

    # simulation -----------------------------------------------------------

    def new_state(self, lanes: int) -> Env:
        env: Env = {"__lanes__": np.zeros(lanes, dtype=U64)}
        for name, w in self.widths.items():
            env[name] = np.full(lanes, U64(self.inits.get(name, 0)), dtype=U64)
        return env

    def settle(self, env: Env) -> None:
        for units, cyclic in self._order:
            if not cyclic:
                units[0].run(env)
                continue
            for _ in range(len(units) * 64 + 2):
                before = {t: env[t].copy() for u in units for t in u.targets}
                for u in units:
                    u.run(env)
                if all(np.array_equal(before[t], env[t]) for t in before):
                    break
            else:
                raise NetlistError("combinational logic in emitted RTL does not settle")

    def clock(self, env: Env) -> None:
        pend: list = []
        for run in self.seq:
            run(env, pend, None)
        for write, value, sel in pend:
            write(env, value, sel)


def _branch(env: Env, pend: list, sel, cond: np.ndarray, run) -> None:
    """Run a branch on the lanes where both the enclosing mask and ``cond`` hold."""
    lanes = cond if sel is None else sel & cond
    if not lanes.any():
        return
    run(env, pend, None if lanes.all() else lanes)


def _u(b) -> np.ndarray:
    return np.asarray(b).astype(U64)


def _parity(v, w: int):
    acc = U64(0) * v
    for i in range(w or 64):
        acc = acc ^ ((v >> U64(i)) & U64(1))
    return acc


def _binary(op: str, fa: Compiled, fb: Compiled) -> Compiled:
    def sized(env):
        a, wa = fa(env)
        b, wb = fb(env)
        return a, b, max(wa, wb) or 64

    if op in ("+", "-", "*", "&", "|", "^", "~^"):
        fn = {"+": lambda a, b: a + b, "-": lambda a, b: a - b, "*": lambda a, b: a * b,
              "&": lambda a, b: a & b, "|": lambda a, b: a | b, "^": lambda a, b: a ^ b,
              "~^": lambda a, b: ~(a ^ b)}[op]

        def arith(env):
            a, b, w = sized(env)
            with np.errstate(over="ignore"):
                return fn(U64(0) + a, b) & _mask(w), w
        return arith
    if op in ("==", "!=", "<", "<=", ">", ">="):
        fn = {"==": np.equal, "!=": np.not_equal, "<": np.less, "<=": np.less_equal, ">": np.greater,
              ">=": np.greater_equal}[op]
        return lambda env: (lambda a, b, w: (_u(fn(a, b)), 1))(*sized(env))
    if op in ("&&", "||"):
        fn = np.logical_and if op == "&&" else np.logical_or
        return lambda env: (lambda a, b, w: (_u(fn(a != 0, b != 0)), 1))(*sized(env))
    if op in ("<<", ">>"):
        def shift(env):
            a, wa = fa(env)
            b, _ = fb(env)
            w = wa or 64
            b = np.minimum(np.asarray(b, dtype=U64), U64(63))
            r = (a << b) if op == "<<" else (a >> b)
            return r & _mask(w), w
        return shift
    raise NetlistError(f"unsupported binary operator {op!r}")


def _reads(e, p: str) -> set[str]:
    if isinstance(e, (Ident, Index, Slice)):
        return {p + e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, Concat):
        return set().union(*(_reads(x, p) for x in e.parts)) if e.parts else set()
    if isinstance(e, Unary):
        return _reads(e.arg, p)
    if isinstance(e, Binary):
        return _reads(e.left, p) | _reads(e.right, p)
    if isinstance(e, Cond):
        return _reads(e.cond, p) | _reads(e.then, p) | _reads(e.other, p)
    return set()


class RtlSimulator:
    """Drive the emitted top module with port words, one step per clock cycle."""

    def __init__(self, text: str, lanes: int = 1, top: Optional[str] = None):
        self.design = Design(text, top)
        self.lanes = lanes
        top_mod = self.design.top
        self.inputs = [n for n in top_mod.ports if top_mod.decls[n].kind == "input"]
        self.outputs = [n for n in top_mod.ports if top_mod.decls[n].kind == "output"]
        self.reset()

    def reset(self) -> None:
        self.env = self.design.new_state(self.lanes)

    def step(self, inputs: Mapping[str, object]) -> dict[str, np.ndarray]:
        env = self.env
        for name in self.inputs:
            w = self.design.widths[name]
            v = np.broadcast_to(np.asarray(inputs.get(name, 0), dtype=U64), (self.lanes,))
            env[name] = (v & _mask(w)).copy()
        self.design.settle(env)
        out = {name: env[name].copy() for name in self.outputs}
        self.design.clock(env)
        return out


@dataclass
class Comparison:
    cycles: int
    lanes: int
    mismatches: int
    first: Optional[tuple[int, str]] = None


def compare(netlist, text: str, cycles: int = 250, lanes: int = 40, seed: int = 0) -> Comparison:
    """Run the netlist and its emitted RTL side by side from reset on random inputs."""
    from .sim import Simulator
    from .verilog import vname
    rng = np.random.default_rng(seed)
    ref, dut = Simulator(netlist, lanes), RtlSimulator(text, lanes)
    bad, first = 0, None
    for t in range(cycles):
        stim = {}
        for p in netlist.inputs:
            hi = np.iinfo(np.uint64).max if p.width >= 64 else (1 << p.width) - 1
            stim[p.name] = rng.integers(0, hi, size=lanes, dtype=np.uint64, endpoint=True)
        want = ref.step(stim)
        got = dut.step({vname(k): v for k, v in stim.items()})
        for p in netlist.outputs:
            diff = int(np.count_nonzero(np.asarray(want[p.name], dtype=U64) != got[vname(p.name)]))
            if diff and first is None:
                first = (t, p.name)
            bad += diff
    return Comparison(cycles, lanes, bad, first)
