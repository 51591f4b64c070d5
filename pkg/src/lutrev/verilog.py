"""
Parser for the Verilog subset used on both ends of the tool: flat structural
netlists of Xilinx primitives (input) and the behavioral word-level models
the emitter writes (output).

Supported: non-ANSI and simple ANSI module headers, input/output/wire/reg
declarations with optional initializers, continuous assigns, ``always``
blocks with if/else, case and (non)blocking assignments, module and
primitive instances with named connections and ``#(.P(v))`` parameters.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

from .netlist import CONST0, CONST1, Netlist, NetlistError, Port, build_netlist, PRIMITIVES, \
    init_hex, LUT_PRIMS, FF_PRIMS, lut_size

# AST --------------------------------------------------------------------------


@dataclass
class Ident:
    name: str


@dataclass
class Num:
    value: int
    width: Optional[int] = None


@dataclass
class Index:
    name: str
    index: int


@dataclass
class Slice:
    name: str
    msb: int
    lsb: int


@dataclass
class Concat:
    parts: list


@dataclass
class Unary:
    op: str
    arg: object


@dataclass
class Binary:
    op: str
    left: object
    right: object


@dataclass
class Cond:
    cond: object
    then: object
    other: object


Expr = Union[Ident, Num, Index, Slice, Concat, Unary, Binary, Cond]


@dataclass
class Decl:
    kind: str                 # input | output | wire | reg
    name: str
    msb: int = 0
    lsb: int = 0
    init: Optional[object] = None
    reg: bool = False

    @property
    def width(self) -> int:
        return abs(self.msb - self.lsb) + 1


@dataclass
class Assign:
    lhs: object
    rhs: object


@dataclass
class Block:
    stmts: list


@dataclass
class If:
    cond: object
    then: object
    other: Optional[object] = None


@dataclass
class NonBlocking:
    lhs: object
    rhs: object


@dataclass
class Blocking:
    lhs: object
    rhs: object


@dataclass
class Case:
    expr: object
    items: list               # [(labels or None for default, stmt)]


@dataclass
class Always:
    sens: list                # [(edge, name)] or ["*"]
    body: object


@dataclass
class Instance:
    module: str
    name: str
    params: dict
    conns: dict
    line: int = 0


@dataclass
class Module:
    name: str
    ports: list
    decls: dict = field(default_factory=dict)
    ranged: set = field(default_factory=set)
    assigns: list = field(default_factory=list)
    always: list = field(default_factory=list)
    instances: list = field(default_factory=list)

    def is_vector(self, name: str) -> bool:
        return name in self.ranged


# Lexer ------------------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<attr>\(\*(?!\))(?:(?!\*\)|;).)*\*\))
  | (?P<directive>`[^\n]*)
  | (?P<num>\d*\s*'\s*[sS]?[bBhHdDoO]\s*[0-9a-fA-FxXzZ_?]+|\d[\d_]*)
  | (?P<escaped>\\\S+)
  | (?P<ident>[A-Za-z_$][A-Za-z0-9_$]*)
  | (?P<op><=|>=|==|!=|<<|>>|~\^|\^~|&&|\|\||[()\[\]{},;:.#=@?+\-&|^~!<>*])
""", re.VERBOSE | re.DOTALL)


@dataclass
class Tok:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Tok]:
    toks, pos, line, line_start = [], 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise NetlistError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        s = m.group()
        if kind == "escaped":
            toks.append(Tok("ident", s[1:], line, pos - line_start + 1))
        elif kind in ("num", "ident", "op"):
            toks.append(Tok(kind, s, line, pos - line_start + 1))
        nl = s.count("\n")
        if nl:
            line += nl
            line_start = pos + s.rfind("\n") + 1
        pos = m.end()
    toks.append(Tok("eof", "", line, pos - line_start + 1))
    return toks


def parse_number(text: str) -> Num:
    t = text.replace("_", "").replace(" ", "")
    if "'" not in t:
        return Num(int(t))
    size, rest = t.split("'", 1)
    rest = rest.lstrip("sS")
    base = {"b": 2, "h": 16, "d": 10, "o": 8}[rest[0].lower()]
    digits = rest[1:]
    if re.search(r"[xXzZ?]", digits):
        digits = re.sub(r"[xXzZ?]", "0", digits)
    return Num(int(digits, base), int(size) if size else None)


# Parser -----------------------------------------------------------------------

_BINARY_LEVELS = [
    ("||",), ("&&",), ("|",), ("^", "~^", "^~"), ("&",), ("==", "!="),
    ("<", "<=", ">", ">="), ("<<", ">>"), ("+", "-"), ("*",),
]


class Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # helpers
    @property
    def tok(self) -> Tok:
        return self.toks[self.i]

    def error(self, msg: str):
        t = self.tok
        raise NetlistError(f"syntax error: {msg} near {t.text!r}", t.line, t.col)

    def next(self) -> Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def at(self, text: str) -> bool:
        return self.tok.text == text and self.tok.kind in ("op", "ident")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Tok:
        if not self.at(text):
            self.error(f"expected {text!r}")
        return self.next()

    def ident(self) -> str:
        if self.tok.kind != "ident":
            self.error("expected identifier")
        return self.next().text

    def const_int(self) -> int:
        e = self.expr()
        if not isinstance(e, Num):
            self.error("expected constant")
        return e.value

    # top level
    def modules(self) -> list[Module]:
        mods = []
        while self.tok.kind != "eof":
            if self.at("module"):
                mods.append(self.module())
            else:
                self.error("expected 'module'")
        return mods

    def module(self) -> Module:
        self.expect("module")
        mod = Module(self.ident(), [])
        if self.accept("#"):
            self._skip_parens()
        if self.accept("("):
            while not self.at(")"):
                if self.tok.text in ("input", "output", "inout"):
                    kind = self.next().text
                    self.accept("wire")
                    msb, lsb, ranged = self._range()
                    name = self.ident()
                    self._declare(mod, kind, name, msb, lsb, ranged)
                    mod.ports.append(name)
                else:
                    mod.ports.append(self.ident())
                if not self.accept(","):
                    break
            self.expect(")")
        self.expect(";")
        while not self.accept("endmodule"):
            if self.tok.kind == "eof":
                self.error("missing 'endmodule'")
            self.item(mod)
        return mod

    def _skip_parens(self) -> None:
        self.expect("(")
        depth = 1
        while depth:
            t = self.next()
            if t.kind == "eof":
                self.error("unbalanced parentheses")
            if t.text == "(":
                depth += 1
            elif t.text == ")":
                depth -= 1

    def _range(self):
        if self.accept("["):
            msb = self.const_int()
            self.expect(":")
            lsb = self.const_int()
            self.expect("]")
            return msb, lsb, True
        return 0, 0, False

    def _declare(self, mod, kind, name, msb, lsb, ranged, init=None):
        old = mod.decls.get(name)
        if old is not None and kind in ("wire", "reg") and old.kind in ("input", "output"):
            old.reg = old.reg or kind == "reg"
            if init is not None:
                old.init = init
            return
        d = Decl(kind, name, msb, lsb, init, reg=(kind == "reg"))
        mod.decls[name] = d
        if ranged:
            mod.ranged.add(name)

    def item(self, mod: Module) -> None:
        t = self.tok.text
        if t in ("input", "output", "inout", "wire", "reg", "tri"):
            kind = self.next().text
            if kind == "tri":
                kind = "wire"
            is_reg = kind == "reg"
            if self.accept("reg"):
                is_reg = True
            else:
                self.accept("wire")
            self.accept("signed")
            msb, lsb, ranged = self._range()
            while True:
                name = self.ident()
                init = self.expr() if self.accept("=") else None
                self._declare(mod, kind, name, msb, lsb, ranged)
                mod.decls[name].reg = mod.decls[name].reg or is_reg
                if init is not None:
                    if is_reg:
                        mod.decls[name].init = init
                    else:
                        mod.assigns.append(Assign(Ident(name), init))
                if not self.accept(","):
                    break
            self.expect(";")
        elif t in ("parameter", "localparam", "genvar", "integer"):
            while not self.accept(";"):
                self.next()
        elif t == "assign":
            self.next()
            while True:
                lhs = self.primary()
                self.expect("=")
                mod.assigns.append(Assign(lhs, self.expr()))
                if not self.accept(","):
                    break
            self.expect(";")
        elif t == "always":
            self.next()
            self.expect("@")
            sens = []
            if self.accept("*"):
                sens = ["*"]
            else:
                self.expect("(")
                if self.accept("*"):
                    sens = ["*"]
                else:
                    while True:
                        edge = self.next().text if self.tok.text in ("posedge", "negedge") else "level"
                        sens.append((edge, self.ident()))
                        if not (self.accept("or") or self.accept(",")):
                            break
                self.expect(")")
            mod.always.append(Always(sens, self.stmt()))
        elif t == "initial":
            self.next()
            self.stmt()
        elif self.tok.kind == "ident":
            mod.instances.append(self.instance())
        else:
            self.error("unexpected token")

    def instance(self) -> Instance:
        line = self.tok.line
        mtype = self.ident()
        params = {}
        if self.accept("#"):
            self.expect("(")
            while not self.at(")"):
                self.expect(".")
                pname = self.ident()
                self.expect("(")
                params[pname] = self.expr()
                self.expect(")")
                if not self.accept(","):
                    break
            self.expect(")")
        name = self.ident()
        conns = {}
        self.expect("(")
        while not self.at(")"):
            self.expect(".")
            pin = self.ident()
            self.expect("(")
            conns[pin] = None if self.at(")") else self.expr()
            self.expect(")")
            if not self.accept(","):
                break
        self.expect(")")
        self.expect(";")
        return Instance(mtype, name, params, conns, line)

    def stmt(self):
        if self.accept("begin"):
            if self.accept(":"):
                self.ident()
            stmts = []
            while not self.accept("end"):
                if self.tok.kind == "eof":
                    self.error("missing 'end'")
                stmts.append(self.stmt())
            return Block(stmts)
        if self.accept("if"):
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            then = self.stmt()
            other = self.stmt() if self.accept("else") else None
            return If(cond, then, other)
        if self.at("case") or self.at("casez") or self.at("casex"):
            self.next()
            self.expect("(")
            sel = self.expr()
            self.expect(")")
            items = []
            while not self.accept("endcase"):
                if self.accept("default"):
                    self.accept(":")
                    items.append((None, self.stmt()))
                else:
                    labels = [self.expr()]
                    while self.accept(","):
                        labels.append(self.expr())
                    self.expect(":")
                    items.append((labels, self.stmt()))
            return Case(sel, items)
        if self.accept(";"):
            return Block([])
        lhs = self.primary()
        if self.accept("<="):
            node = NonBlocking(lhs, self.expr())
        else:
            self.expect("=")
            node = Blocking(lhs, self.expr())
        self.expect(";")
        return node

    # expressions
    def expr(self):
        c = self.binary(0)
        if self.accept("?"):
            a = self.expr()
            self.expect(":")
            b = self.expr()
            return Cond(c, a, b)
        return c

    def binary(self, level: int):
        if level == len(_BINARY_LEVELS):
            return self.unary()
        left = self.binary(level + 1)
        while self.tok.kind == "op" and self.tok.text in _BINARY_LEVELS[level]:
            op = self.next().text
            if op == "^~":
                op = "~^"
            left = Binary(op, left, self.binary(level + 1))
        return left

    def unary(self):
        if self.tok.kind == "op" and self.tok.text in ("~", "!", "-", "&", "|", "^"):
            op = self.next().text
            return Unary(op, self.unary())
        return self.primary()

    def primary(self):
        t = self.tok
        if t.kind == "num":
            self.next()
            return parse_number(t.text)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if self.accept("{"):
            first = self.expr()
            if self.accept("{"):
                # replication {n{x}}
                inner = self.expr()
                self.expect("}")
                self.expect("}")
                if not isinstance(first, Num):
                    self.error("replication count must be constant")
                return Concat([inner] * first.value)
            parts = [first]
            while self.accept(","):
                parts.append(self.expr())
            self.expect("}")
            return Concat(parts)
        if t.kind == "ident":
            name = self.next().text
            if self.accept("["):
                hi = self.const_int()
                if self.accept(":"):
                    lo = self.const_int()
                    self.expect("]")
                    return Slice(name, hi, lo)
                self.expect("]")
                return Index(name, hi)
            return Ident(name)
        self.error("expected expression")


def parse_modules(text: str) -> list[Module]:
    return Parser(text).modules()


# Structural netlist frontend -----------------------------------------------------

def _is_unconnected(name: str) -> bool:
    return name.startswith("NLW_") and name.endswith("_UNCONNECTED")


def _bit_name(mod: Module, name: str, idx: int) -> str:
    return f"{name}[{idx}]" if mod.is_vector(name) else name


def _decl_bits(mod: Module, name: str) -> list[str]:
    """Bit net names of a declared signal, LSB first."""
    d = mod.decls.get(name)
    if d is None or not mod.is_vector(name):
        return [name]
    step = 1 if d.msb >= d.lsb else -1
    return [f"{name}[{i}]" for i in range(d.lsb, d.msb + step, step)]


def _expr_bits(mod: Module, e, width_hint: Optional[int] = None) -> list[str]:
    """Nets of a connection expression, LSB first."""
    if isinstance(e, Ident):
        return _decl_bits(mod, e.name)
    if isinstance(e, Index):
        return [_bit_name(mod, e.name, e.index)]
    if isinstance(e, Slice):
        step = 1 if e.msb >= e.lsb else -1
        return [_bit_name(mod, e.name, i) for i in range(e.lsb, e.msb + step, step)]
    if isinstance(e, Num):
        width = e.width or width_hint or 1
        return [CONST1 if (e.value >> i) & 1 else CONST0 for i in range(width)]
    if isinstance(e, Concat):
        bits = []
        for part in reversed(e.parts):
            bits.extend(_expr_bits(mod, part))
        return bits
    raise NetlistError(f"unsupported expression in structural netlist: {type(e).__name__}")


_BUS_PINS = {"DI": 4, "S": 4, "O": 4, "CO": 4}


def netlist_from_verilog(text: str) -> Netlist:
    mods = parse_modules(text)
    if len(mods) != 1:
        raise NetlistError(f"expected exactly one flat module, found {len(mods)}")
    mod = mods[0]
    if mod.always:
        raise NetlistError("behavioral constructs are not allowed in a structural netlist")

    alias: dict[str, str] = {}

    def find(n: str) -> str:
        while n in alias:
            n = alias[n]
        return n

    port_bits = {}
    for name in mod.ports:
        d = mod.decls.get(name)
        if d is None or d.kind not in ("input", "output"):
            raise NetlistError(f"port {name!r} lacks an input/output declaration")
        port_bits[name] = _decl_bits(mod, name)
    is_port_bit = {b for bits in port_bits.values() for b in bits}

    for a in mod.assigns:
        lhs = _expr_bits(mod, a.lhs)
        rhs = _expr_bits(mod, a.rhs, len(lhs))
        if len(lhs) != len(rhs):
            raise NetlistError("assign width mismatch in structural netlist")
        for l, r in zip(lhs, rhs):
            l, r = find(l), find(r)
            if l == r:
                continue
            if r in (CONST0, CONST1):
                alias[l] = r
            elif l in is_port_bit and r not in is_port_bit:
                alias[l] = r
            elif r in is_port_bit and l not in is_port_bit:
                alias[r] = l
            else:
                alias[l] = r

    raw = []
    for inst in mod.instances:
        if inst.module not in PRIMITIVES:
            raise NetlistError(f"unknown primitive {inst.module!r}", inst.line, 1)
        init = 0
        if "INIT" in inst.params:
            p = inst.params["INIT"]
            if not isinstance(p, Num):
                raise NetlistError(f"INIT of {inst.name!r} must be a constant", inst.line, 1)
            init = p.value
        conns = {}
        for pin, e in inst.conns.items():
            if e is None:
                continue
            if inst.module == "CARRY4" and pin in _BUS_PINS:
                bits = _expr_bits(mod, e, 4)
                if len(bits) != 4:
                    raise NetlistError(f"{inst.name}.{pin} must be 4 bits wide", inst.line, 1)
                for i, b in enumerate(bits):
                    conns[f"{pin}[{i}]"] = None if _is_unconnected(b) else find(b)
            else:
                bits = _expr_bits(mod, e, 1)
                if len(bits) != 1:
                    raise NetlistError(f"{inst.name}.{pin} must be 1 bit wide", inst.line, 1)
                conns[pin] = None if _is_unconnected(bits[0]) else find(bits[0])
        raw.append((inst.name, inst.module, init, conns))

    ports = []
    for name in mod.ports:
        d = mod.decls[name]
        ports.append(Port(name, "in" if d.kind == "input" else "out",
                          tuple(find(b) for b in port_bits[name])))
    return build_netlist(mod.name, ports, raw)


# Structural writer -------------------------------------------------------------

_SIMPLE = re.compile(r"^[A-Za-z_][A-Za-z0-9_$]*$")
_KEYWORDS = {"module", "endmodule", "input", "output", "wire", "reg", "assign", "always", "begin", "end",
             "if", "else", "case", "endcase", "default", "posedge", "negedge", "or", "initial", "inout"}


def vname(name: str) -> str:
    """A net or instance name as a Verilog identifier (escaped when needed)."""
    if _SIMPLE.match(name) and name not in _KEYWORDS:
        return name
    return "\\" + name + " "


def _net_ref(net: Optional[str], gate: str, pin: str) -> str:
    if net is None:
        return vname(f"NLW_{gate}_{pin}_UNCONNECTED")
    if net == CONST0:
        return "1'b0"
    if net == CONST1:
        return "1'b1"
    return vname(net)


def netlist_to_verilog(netlist: Netlist) -> str:
    out = [f"module {vname(netlist.name)} ({', '.join(vname(p.name) for p in netlist.ports)});"]
    declared = set()
    aliases = []
    for p in netlist.ports:
        kind = "input" if p.dir == "in" else "output"
        vec = p.width != 1
        rng = f"[{p.width - 1}:0] " if vec else ""
        out.append(f"  {kind} {rng}{vname(p.name)};")
        for i, b in enumerate(p.bits):
            default = f"{p.name}[{i}]" if vec else p.name
            declared.add(default)
            if b == default:
                continue
            bit = f"{vname(p.name)}[{i}]" if vec else vname(p.name)
            if p.dir == "in":
                aliases.append(f"  assign {vname(b)} = {bit};")
            else:
                src = "1'b0" if b == CONST0 else "1'b1" if b == CONST1 else vname(b)
                aliases.append(f"  assign {bit} = {src};")
    for net in netlist.nets:
        if net not in (CONST0, CONST1) and net not in declared:
            out.append(f"  wire {vname(net)};")
    out.extend(aliases)
    for g in netlist.gates.values():
        params = ""
        if g.prim in LUT_PRIMS:
            params = f" #(.INIT({1 << lut_size(g.prim)}'h{init_hex(g)}))"
        elif g.prim in FF_PRIMS:
            params = f" #(.INIT(1'b{g.init}))"
        conns = []
        if g.prim == "CARRY4":
            for pin in ("CI", "CYINIT"):
                conns.append(f".{pin}({_net_ref(g.pins.get(pin), g.id, pin)})")
            for bus in ("DI", "S", "O", "CO"):
                bits = [_net_ref(g.pins.get(f"{bus}[{i}]"), g.id, f"{bus}{i}") for i in range(3, -1, -1)]
                conns.append(f".{bus}({{{', '.join(bits)}}})")
        else:
            for pin, net in g.pins.items():
                if net is not None:
                    conns.append(f".{pin}({_net_ref(net, g.id, pin)})")
        out.append(f"  {g.prim}{params} {vname(g.id)} ({', '.join(conns)});")
    out.append("endmodule")
    return "\n".join(out) + "\n"
