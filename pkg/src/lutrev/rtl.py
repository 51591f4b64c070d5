"""
Word-level Verilog emission.

Every inferred module becomes a module definition with word ports and a
behavioral body.  Gates no stage could explain are transcribed one assign (or
register) per primitive into a fallback module with one scalar port per
boundary net.  The top level keeps the original port list and instantiates
everything, connecting word ports through concatenations of bit wires.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

from .model import InferredModule
from .netlist import (CONST0, CONST1, CONSTANTS, FF_RESET, LUT_PRIMS, MUX_PRIMS, Gate, Netlist, is_ff,
                      lut_size)
from .verilog import vname

LETTERS = ("a", "b", "c", "d", "e", "f")
KIND_NAMES = {"Adder": "adder", "Subtractor": "subtractor", "AddSub": "addsub", "Comparator": "comparator",
              "ALU": "alu", "Counter": "counter", "ShiftRegister": "shiftreg", "Register": "register",
              "BitwiseOp": "bitwise", "Unknown": "unknown", "Fallback": "fallback"}
RELATIONAL = {"gt": ">", "ge": ">=", "lt": "<", "le": "<=", "eq": "=="}
ARITH = {"add": "a + b", "sub": "a - b", "and": "a & b", "or": "a | b", "xor": "a ^ b", "nand": "~(a & b)",
         "nor": "~(a | b)", "xnor": "~(a ^ b)", "shl1": "a << 1", "shr1": "a >> 1"}
BITWISE = {"and": "a & b", "or": "a | b", "xor": "a ^ b", "nand": "~(a & b)", "nor": "~(a | b)",
           "xnor": "~(a ^ b)", "andn": "a & ~b", "orn": "a | ~b", "nandb": "~a & b", "ornb": "~a | b",
           "buf": "a", "not": "~a"}


class NameMap:
    """Deterministic, collision-free Verilog identifiers for nets."""

    def __init__(self, nets: Iterable[str]):
        self._names: dict[str, str] = {}
        used: set[str] = set()
        for net in sorted(set(nets) - set(CONSTANTS)):
            base = "n_" + re.sub(r"[^A-Za-z0-9_]", "_", net)
            name, k = base, 1
            while name in used:
                name = f"{base}_{k}"
                k += 1
            used.add(name)
            self._names[net] = name

    def __call__(self, net: Optional[str]) -> str:
        if net == CONST0 or net is None:
            return "1'b0"
        if net == CONST1:
            return "1'b1"
        return self._names[net]


def _concat(refs: Sequence[str]) -> str:
    """LSB-first list of bit expressions as a Verilog concatenation."""
    if len(refs) == 1:
        return refs[0]
    return "{" + ", ".join(reversed(refs)) + "}"


def _rng(w: int) -> str:
    return f"[{w - 1}:0] " if w > 1 else ""


def _lit(width: int, value: int) -> str:
    return f"{width}'b{value:0{width}b}"


def lut_expr(gate: Gate, ins: Sequence[str]) -> str:
    """Sum of products reproducing every INIT bit (complemented off-set when shorter)."""
    k = lut_size(gate.prim)
    ones = [m for m in range(1 << k) if (gate.init >> m) & 1]
    if not ones:
        return "1'b0"
    if len(ones) == 1 << k:
        return "1'b1"
    zeros = [m for m in range(1 << k) if not (gate.init >> m) & 1]
    terms, neg = (ones, False) if len(ones) <= len(zeros) else (zeros, True)

    def term(m):
        lits = [ins[j] if (m >> j) & 1 else f"~{ins[j]}" for j in range(k)]
        return "(" + " & ".join(lits) + ")" if k > 1 else lits[0]

    body = " | ".join(term(m) for m in terms)
    return f"~({body})" if neg else body


@dataclass
class Body:
    decls: list[str] = field(default_factory=list)
    stmts: list[str] = field(default_factory=list)


def transcribe(netlist: Netlist, gates: Iterable[str], ref: Callable[[str], str], body: Body,
               out_ref: Optional[Callable[[str], str]] = None) -> None:
    """Gate-by-gate transcription: LUT -> SOP assign, CARRY4 -> ripple assigns, FF -> clocked reg.

    ``ref`` names nets that are read, ``out_ref`` (default ``ref``) nets that are driven.
    """
    out_ref = out_ref or ref
    gates = set(gates)
    comb = [g for g in netlist.comb_order if g in gates]
    seq = sorted(g for g in gates if g not in set(comb))
    for gid in comb:
        g = netlist.gates[gid]
        if g.prim in LUT_PRIMS:
            out = g.pins.get("O")
            if out is not None:
                ins = [ref(g.pins[f"I{j}"]) for j in range(lut_size(g.prim))]
                body.stmts.append(f"  assign {out_ref(out)} = {lut_expr(g, ins)};")
        elif g.prim in MUX_PRIMS:
            out = g.pins.get("O")
            if out is not None:
                body.stmts.append(f"  assign {out_ref(out)} = {ref(g.pins['S'])} ? {ref(g.pins['I1'])} : "
                                  f"{ref(g.pins['I0'])};")
        elif g.prim == "CARRY4":
            c = [f"c_{_ident(gid)}_{i}" for i in range(5)]
            body.decls.append(f"  wire {', '.join(c)};")
            body.stmts.append(f"  assign {c[0]} = {ref(g.pins['CI'])} | {ref(g.pins['CYINIT'])};")
            for i in range(4):
                s, di = ref(g.pins[f"S[{i}]"]), ref(g.pins[f"DI[{i}]"])
                body.stmts.append(f"  assign {c[i + 1]} = {s} ? {c[i]} : {di};")
                if g.pins.get(f"O[{i}]") is not None:
                    body.stmts.append(f"  assign {out_ref(g.pins[f'O[{i}]'])} = {s} ^ {c[i]};")
                if g.pins.get(f"CO[{i}]") is not None:
                    body.stmts.append(f"  assign {out_ref(g.pins[f'CO[{i}]'])} = {c[i + 1]};")
    for gid in seq:
        g = netlist.gates[gid]
        if is_ff(g.prim):
            q = g.pins.get("Q")
            if q is None:
                continue
            rpin, rval, asynch = FF_RESET[g.prim]
            rst = ref(g.pins[rpin])
            sens = f"posedge {ref(g.pins['C'])}" + (f" or posedge {rst}" if asynch and rst[0] != "1" else "")
            body.stmts.append(f"  always @({sens})\n    if ({rst}) {out_ref(q)} <= 1'b{rval};\n"
                              f"    else if ({ref(g.pins['CE'])}) {out_ref(q)} <= {ref(g.pins['D'])};")
        else:
            # RAM contents are opaque: outputs read as zero, matching the netlist simulator
            for net in g.output_nets():
                body.stmts.append(f"  assign {out_ref(net)} = 1'b0;")


def _ident(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_]", "_", name)


def region_io(netlist: Netlist, gates: Iterable[str]) -> tuple[list[str], list[str]]:
    """(external inputs, exported outputs) of a gate set, in deterministic order."""
    gates = set(gates)
    driven: dict[str, None] = {}
    for gid in sorted(gates):
        for n in netlist.gates[gid].output_nets():
            driven[n] = None
    ins: dict[str, None] = {}
    for gid in sorted(gates):
        for n in netlist.gates[gid].input_nets():
            if n not in driven and n not in CONSTANTS:
                ins[n] = None
    outs = [n for n in driven
            if n in netlist.po_bits or any(l.gate not in gates for l in netlist.loads.get(n, ()))]
    return list(ins), outs


@dataclass
class Emitted:
    name: str
    text: str
    conns: dict[str, str]
    kind: str
    nets: tuple[str, ...] = ()


class Emitter:
    def __init__(self, netlist: Netlist):
        self.netlist = netlist
        self.names = NameMap(netlist.nets)

    # ------------------------------------------------------------------ gate level

    def gate_module(self, name: str, kind: str, gates: Iterable[str]) -> Emitted:
        """Scalar-port transcription of a gate set (fallback and unexplained regions)."""
        gates = set(gates)
        ins, outs = region_io(self.netlist, gates)
        nm = self.names
        body = Body()
        internal = set()
        for gid in gates:
            internal.update(self.netlist.gates[gid].output_nets())
        ports = [nm(n) for n in ins] + [nm(n) for n in outs]
        decl = [f"  input {nm(n)};" for n in ins] + [f"  output {nm(n)};" for n in outs]
        regs = {self.netlist.gates[g].pins.get("Q") for g in gates if is_ff(self.netlist.gates[g].prim)}
        for n in sorted(internal, key=nm):
            if n in regs:
                decl.append(f"  reg {nm(n)} = 1'b{self.netlist.driver_gate(n).init};")
            elif n not in outs:
                decl.append(f"  wire {nm(n)};")
        transcribe(self.netlist, gates, nm, body)
        text = self._module_text(name, ports, decl + body.decls, body.stmts)
        conns = {nm(n): nm(n) for n in ins + outs}
        return Emitted(name, text, conns, kind, tuple(ins + outs))

    @staticmethod
    def _module_text(name: str, ports: list[str], decls: list[str], stmts: list[str]) -> str:
        head = f"module {name} ({', '.join(ports)});"
        return "\n".join([head] + decls + stmts + ["endmodule"]) + "\n"

    # ------------------------------------------------------------------ word level

    def word_module(self, name: str, m: InferredModule) -> Emitted:
        nl, nm = self.netlist, self.names
        ins, outs = region_io(nl, m.gates)
        ports: list[str] = []
        decl: list[str] = []
        conns: dict[str, str] = {}
        local: dict[str, str] = {}
        used: list[str] = []

        def port(pname: str, direction: str, nets: Sequence[str], reg: bool = False, init: str = ""):
            w = len(nets)
            ports.append(pname)
            decl.append(f"  {direction} {_rng(w)}{pname};")
            if reg:
                decl.append(f"  reg {_rng(w)}{pname}{init};")
            conns[pname] = _concat([nm(n) for n in nets])
            used.extend(nets)
            for i, n in enumerate(nets):
                if n not in CONSTANTS:
                    local.setdefault(n, f"{pname}[{i}]" if w > 1 else pname)

        word_names = {"ShiftRegister": ["sin"], "Register": ["d"]}.get(m.kind, list(LETTERS))
        for pname, word in zip(word_names, m.input_words):
            port(pname, "input", word)
        ctl = list(m.control_nets.values())
        sel_name = None
        if m.kind in ("AddSub", "ALU") and ctl:
            sel_name = "sel" if m.kind == "AddSub" else "op"
            port(sel_name, "input", ctl)
        regs = _register_controls(nl, m)
        if regs is not None:
            for pname in ("clk", "ce", "rst"):
                port(pname, "input", [regs[pname]])

        w = len(m.output_word)
        stmts: list[str] = []
        body = Body()
        if m.kind in ("Counter", "ShiftRegister", "Register"):
            init = _lit(w, m.details.get("init", 0))
            port("y", "output", m.output_word, reg=True, init=f" = {init}")
            nxt = {"Counter": "y + 1'b1" if m.op == "up" else "y - 1'b1",
                   "ShiftRegister": f"{{y[{w - 2}:0], sin}}" if w > 1 else "sin",
                   "Register": "d"}[m.kind]
            stmts.append(_reg_always(regs, "y", w, nxt))
        else:
            core = self._core(m, sel_name, len(m.input_words[0]) if m.input_words else w)
            if m.output_ffs:
                init = sum(nl.gates[f].init << i for i, f in enumerate(m.output_ffs))
                port("y", "output", m.output_word, reg=True, init=f" = {_lit(w, init)}")
                decl.append(f"  wire {_rng(len(m.comb_output))}r;")
                stmts.extend(_core_assign("r", len(m.comb_output), core))
                stmts.append(_reg_always(regs, "y", w, "r"))
                for i, n in enumerate(m.comb_output):
                    local.setdefault(n, f"r[{i}]" if len(m.comb_output) > 1 else "r")
            else:
                port("y", "output", m.output_word)
                stmts.extend(_core_assign("y", w, core))

        # exported nets outside the output word are transcribed at gate level
        extra_out = [n for n in outs if n not in local]
        if extra_out:
            need = _needed_gates(nl, extra_out, set(local), m.gates)
            extra_in = [n for n in ins if n not in local and _reads(nl, need, n)]
            for n in extra_in:
                port(nm(n), "input", [n])
            for n in extra_out:
                port(nm(n), "output", [n])
            for gid in need:
                for n in nl.gates[gid].output_nets():
                    if n not in extra_out:
                        body.decls.append(f"  wire {nm(n)};")
            # nets already produced by the behavioral core are re-derived into shadow wires
            transcribe(nl, need, lambda n: local.get(n) or nm(n), body, out_ref=nm)
        text = self._module_text(name, ports, decl + body.decls, stmts + body.stmts)
        return Emitted(name, text, conns, m.kind, tuple(used))

    def _core(self, m: InferredModule, sel: Optional[str], w: int) -> dict:
        """Combinational core as {'expr': ...} or {'case': (sel, [(code, expr)])}."""
        if m.kind in ("Adder", "Subtractor"):
            return {"expr": ARITH[m.op]}
        if m.kind == "Comparator":
            return {"expr": f"a {RELATIONAL[m.op]} b"}
        if m.kind == "BitwiseOp":
            return {"expr": BITWISE.get(m.op) or _sop_words(m.details["table"], m.details["arity"])}
        if m.kind in ("AddSub", "ALU"):
            arms = []
            for code, op in sorted(m.op_map.items()):
                if op in RELATIONAL:
                    expr = f"{{{w - 1}'b0, a {RELATIONAL[op]} b}}" if w > 1 else f"a {RELATIONAL[op]} b"
                else:
                    expr = ARITH[op]
                arms.append((code, expr))
            return {"case": (sel, arms)}
        raise ValueError(f"no behavioral template for {m.kind}")

    # ------------------------------------------------------------------ top level

    def emit(self, modules: Sequence[InferredModule], fallback: Iterable[str]) -> str:
        nl, nm = self.netlist, self.names
        fallback = set(fallback)
        claimed = set()
        for m in modules:
            if m.gates & claimed:
                raise AssertionError("overlapping gate claims reached the emitter")
            claimed |= m.gates
        missing = set(nl.gates) - claimed - fallback
        if missing:
            raise AssertionError(f"unclaimed gates not routed to fallback: {sorted(missing)[:5]}")
        parts: list[Emitted] = []
        for i, m in enumerate(modules):
            kname = KIND_NAMES.get(m.kind, "unknown")
            name = f"{kname}_{i}"
            if behavioral(m):
                parts.append(self.word_module(name, m))
            else:
                parts.append(self.gate_module(name, m.kind, m.gates))
        if fallback:
            parts.append(self.gate_module(f"fallback_{len(modules)}", "Fallback", fallback))

        top = vname(nl.name or "top")
        lines = [f"module {top} ({', '.join(vname(p.name) for p in nl.ports)});"]
        for p in nl.ports:
            lines.append(f"  {'input' if p.dir == 'in' else 'output'} {_rng(p.width)}{vname(p.name)};")
        aliases = []
        declared = set()
        for p in nl.inputs:
            for i, b in enumerate(p.bits):
                declared.add(b)
                src = f"{vname(p.name)}[{i}]" if p.width > 1 else vname(p.name)
                lines.append(f"  wire {nm(b)};")
                aliases.append(f"  assign {nm(b)} = {src};")
        wired = {n for e in parts for n in e.nets} | {b for p in nl.outputs for b in p.bits}
        for net in nl.nets:
            if net in wired and net not in CONSTANTS and net not in declared:
                lines.append(f"  wire {nm(net)};")
        lines.extend(aliases)
        for e in parts:
            idx = e.name.rsplit("_", 1)[1]
            inst = f"u_{KIND_NAMES.get(e.kind, 'unknown')}{idx}"
            conns = ", ".join(f".{p}({c})" for p, c in e.conns.items())
            lines.append(f"  {e.name} {inst} ({conns});")
        for p in nl.outputs:
            if p.width:
                lines.append(f"  assign {vname(p.name)} = {_concat([nm(b) for b in p.bits])};")
        lines.append("endmodule")
        header = f"// word-level model of {nl.name}: {len(modules)} modules, {len(fallback)} fallback gates\n"
        return header + "\n".join(e.text for e in parts) + ("\n" if parts else "") + "\n".join(lines) + "\n"


def behavioral(m: InferredModule) -> bool:
    """Whether a module gets a behavioral body (known kind with resolved words)."""
    if not m.known or not m.words_resolved:
        return False
    if m.kind in ("Counter", "ShiftRegister", "Register", "BitwiseOp"):
        return True
    return bool(m.input_words) and m.verified is not None


def _register_controls(netlist: Netlist, m: InferredModule) -> Optional[dict]:
    if m.kind in ("Counter", "ShiftRegister", "Register"):
        ff = netlist.gates[m.details["ffs"][0]]
    elif m.output_ffs:
        ff = netlist.gates[m.output_ffs[0]]
    else:
        return None
    rpin, rval, asynch = FF_RESET[ff.prim]
    return {"clk": ff.pins["C"], "ce": ff.pins["CE"], "rst": ff.pins[rpin], "value": rval, "async": asynch}


def _reg_always(regs: dict, q: str, w: int, nxt: str) -> str:
    sens = "posedge clk" + (" or posedge rst" if regs["async"] else "")
    rv = _lit(w, (1 << w) - 1 if regs["value"] else 0)
    return f"  always @({sens})\n    if (rst) {q} <= {rv};\n    else if (ce) {q} <= {nxt};"


def _core_assign(target: str, w: int, core: dict) -> list[str]:
    if "expr" in core:
        return [f"  assign {target} = {core['expr']};"]
    sel, arms = core["case"]
    k = len(arms[0][0])
    lines = [f"  reg {_rng(w)}{target}_c;", "  always @(*)", f"    case ({sel})"]
    for code, expr in arms:
        lines.append(f"      {k}'b{code}: {target}_c = {expr};")
    lines.append(f"      default: {target}_c = {arms[-1][1]};")
    lines.append("    endcase")
    lines.append(f"  assign {target} = {target}_c;")
    return lines


def _sop_words(table: int, n: int) -> str:
    names = LETTERS[:n]
    terms = []
    for m in range(1 << n):
        if (table >> m) & 1:
            terms.append("(" + " & ".join(names[j] if (m >> j) & 1 else f"~{names[j]}" for j in range(n)) + ")")
    return " | ".join(terms) if terms else "0"


def _needed_gates(netlist: Netlist, targets: Iterable[str], cut: set[str], allowed: Iterable[str]) -> list[str]:
    allowed = set(allowed)
    need, stack = set(), list(targets)
    while stack:
        net = stack.pop()
        if net in cut or net in CONSTANTS:
            continue
        g = netlist.driver_gate(net)
        if g is None or g.id not in allowed or g.id in need:
            continue
        need.add(g.id)
        if not is_ff(g.prim):
            stack.extend(g.input_nets())
    return sorted(need)


def _reads(netlist: Netlist, gates: Iterable[str], net: str) -> bool:
    return any(net in netlist.gates[g].input_nets() for g in gates)


def emit_rtl(netlist: Netlist, modules: Sequence[InferredModule], fallback: Iterable[str]) -> str:
    return Emitter(netlist).emit(modules, fallback)
