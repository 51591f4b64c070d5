"""
Truth tables over at most six named support nets, exhaustive NPN
canonicalization, the S/DI function library, and miter equivalence.

Bit ``m`` of a table is the function value when support variable ``j``
takes the value of bit ``j`` of ``m``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from itertools import permutations
from math import log2
from typing import Callable, Iterable, Mapping, NamedTuple, Optional, Sequence

import numpy as np

from .netlist import Cone, Netlist, NetlistError
from .sim import CombEvaluator

MAX_SUPPORT = 6


class SupportOverflow(NetlistError):
    pass


def _mask(n: int) -> int:
    return (1 << (1 << n)) - 1


def _var_pattern(j: int, n: int) -> int:
    """Table of the projection onto variable j."""
    return sum(1 << m for m in range(1 << n) if (m >> j) & 1)


@dataclass(frozen=True)
class TruthTable:
    support: tuple[str, ...]
    bits: int

    def __post_init__(self):
        if len(set(self.support)) != len(self.support):
            raise ValueError("support nets must be distinct")
        if self.bits >> (1 << len(self.support)):
            raise ValueError("table wider than 2^|support| bits")

    @property
    def n(self) -> int:
        return len(self.support)

    @classmethod
    def from_function(cls, support: Sequence[str], fn: Callable[..., int]) -> "TruthTable":
        n = len(support)
        bits = 0
        for m in range(1 << n):
            if fn(*[(m >> j) & 1 for j in range(n)]):
                bits |= 1 << m
        return cls(tuple(support), bits)

    def __call__(self, *values: int) -> int:
        m = sum((v & 1) << j for j, v in enumerate(values))
        return (self.bits >> m) & 1

    def depends_on(self, j: int) -> bool:
        n = self.n
        p = _var_pattern(j, n)
        hi = self.bits & p
        lo = self.bits & ~p & _mask(n)
        return (hi >> (1 << j)) != lo

    def cofactor(self, var: str, value: int) -> "TruthTable":
        """Fix ``var`` and drop it from the support (Shannon cofactor)."""
        if var not in self.support:
            raise KeyError(f"{var!r} not in support")
        j = self.support.index(var)
        n = self.n
        out = 0
        k = 0
        for m in range(1 << n):
            if ((m >> j) & 1) == value:
                out |= ((self.bits >> m) & 1) << k
                k += 1
        return TruthTable(self.support[:j] + self.support[j + 1:], out)

    def minimized(self) -> "TruthTable":
        tt = self
        j = 0
        while j < tt.n:
            if tt.depends_on(j):
                j += 1
            else:
                tt = tt.cofactor(tt.support[j], 0)
        return tt

    def reorder(self, support: Sequence[str]) -> "TruthTable":
        """Same function over a permuted support order."""
        if sorted(support) != sorted(self.support):
            raise ValueError("reorder needs the same support set")
        pos = [self.support.index(s) for s in support]
        out = 0
        for m in range(1 << self.n):
            src = sum(((m >> k) & 1) << pos[k] for k in range(self.n))
            out |= ((self.bits >> src) & 1) << m
        return TruthTable(tuple(support), out)

    def hex(self) -> str:
        return f"{self.bits:X}"


class Transform(NamedTuple):
    """NPN transform: variable j of the result reads variable perm[j] of the
    source, complemented when bit j of ``neg`` is set; ``out`` complements the output."""
    perm: tuple[int, ...]
    neg: int
    out: int


def apply_transform(bits: int, n: int, t: Transform) -> int:
    out = 0
    for m in range(1 << n):
        src = 0
        for j in range(n):
            src |= (((m >> j) & 1) ^ ((t.neg >> j) & 1)) << t.perm[j]
        out |= (((bits >> src) & 1) ^ t.out) << m
    return out


@lru_cache(maxsize=None)
def _transform_tables(n: int) -> tuple[list[tuple[tuple[int, ...], int]], np.ndarray]:
    """All (perm, neg) pairs for n variables and their index maps g[m] = f[idx[m]]."""
    perms = list(permutations(range(n)))
    m = np.arange(1 << n, dtype=np.int64)
    mbits = [(m >> j) & 1 for j in range(n)]
    keys, rows = [], []
    for perm in perms:
        for neg in range(1 << n):
            idx = np.zeros(1 << n, dtype=np.int64)
            for j in range(n):
                idx |= (mbits[j] ^ ((neg >> j) & 1)) << perm[j]
            keys.append((perm, neg))
            rows.append(idx)
    return keys, np.array(rows, dtype=np.uint8)


@dataclass(frozen=True)
class NpnClass:
    n: int
    canonical: int
    transform: Transform
    support: tuple[str, ...] = ()

    @property
    def key(self) -> tuple[int, int]:
        return (self.n, self.canonical)


@lru_cache(maxsize=1 << 16)
def _canonical(n: int, bits: int) -> tuple[int, Transform]:
    if n == 0:
        return min(bits, bits ^ 1), Transform((), 0, bits & 1)
    keys, idx = _transform_tables(n)
    f = np.array([(bits >> m) & 1 for m in range(1 << n)], dtype=np.uint8)
    g = f[idx]
    if g.shape[1] < 64:
        g = np.pad(g, ((0, 0), (0, 64 - g.shape[1])))
    vals = np.packbits(g, axis=1, bitorder="little").view("<u8").ravel()
    comp = vals ^ np.uint64(_mask(n))
    i0, i1 = int(vals.argmin()), int(comp.argmin())
    if int(vals[i0]) <= int(comp[i1]):
        perm, neg = keys[i0]
        return int(vals[i0]), Transform(perm, neg, 0)
    perm, neg = keys[i1]
    return int(comp[i1]), Transform(perm, neg, 1)


def npn_canonical(tt: TruthTable) -> NpnClass:
    """Lexicographically smallest table over all n!*2^(n+1) NPN transforms."""
    if tt.n > MAX_SUPPORT:
        raise SupportOverflow(f"support {tt.n} exceeds {MAX_SUPPORT}")
    canon, t = _canonical(tt.n, tt.bits)
    return NpnClass(tt.n, canon, t, tt.support)


def npn_key(tt: TruthTable) -> tuple[int, int]:
    return npn_canonical(tt).key


def cofactor(tt: TruthTable, var: str, value: int) -> TruthTable:
    return tt.cofactor(var, value)


def cone_to_function(cone: Cone, netlist: Netlist, max_support: int = MAX_SUPPORT) -> TruthTable:
    """Function of the cone root over its frontier nets, reduced to minimal support."""
    root_net = netlist.gates[cone.root.gate].pins.get(cone.root.pin) if cone.root.gate else None
    return region_function(netlist, cone.frontier, root_net, max_support)


def region_function(netlist: Netlist, frontier: Sequence[str], root_net: Optional[str],
                    max_support: int = MAX_SUPPORT, fixed: Optional[Mapping[str, int]] = None) -> TruthTable:
    if root_net is None:
        return TruthTable((), 0)
    if root_net in ("$0", "$1"):
        return TruthTable((), 1 if root_net == "$1" else 0)
    frontier = list(dict.fromkeys(frontier))
    fixed = dict(fixed or {})
    free = [n for n in frontier if n not in fixed]
    if len(free) > max_support:
        raise SupportOverflow(f"cone of {root_net!r} has {len(free)} support nets (> {max_support})")
    ev = CombEvaluator(netlist, free + list(fixed), [root_net])
    n = len(free)
    m = np.arange(1 << n)
    assign = [((m >> j) & 1).astype(bool) for j in range(n)]
    assign += [np.full(1 << n, bool(v)) for v in fixed.values()]
    out = np.broadcast_to(ev(assign)[0], (1 << n,))
    bits = int(sum(1 << i for i in np.flatnonzero(out)))
    return TruthTable(tuple(free), bits).minimized()


# Function library -----------------------------------------------------------------

@dataclass(frozen=True)
class CarryOp:
    """Library entry for a carry-chain operation.

    ``s_template``/``di_template`` are the exact per-bit S and DI functions over
    operand roles (e.g. ("A", "B")); the NPN classes are derived from them.
    """
    name: str
    kind: str
    s_template: TruthTable
    di_template: TruthTable
    cyinit: int
    site: str
    s_class: tuple[int, int]
    di_class: tuple[int, int]
    mirror: Optional[str] = None

    @property
    def s_operands(self) -> tuple[tuple[int, str], ...]:
        return tuple((i + 1, r) for i, r in enumerate(self.s_template.support))

    @property
    def di_operands(self) -> tuple[tuple[int, str], ...]:
        return tuple((i + 1, r) for i, r in enumerate(self.di_template.support))


@dataclass(frozen=True)
class ReferenceOp:
    name: str
    evaluator: str
    commutative: bool = True


def _bitmask(w: int) -> np.uint64:
    return np.uint64((1 << w) - 1) if w < 64 else np.uint64(0xFFFFFFFFFFFFFFFF)


def _u(x) -> np.ndarray:
    return np.asarray(x, dtype=np.uint64)


EVALUATORS: dict[str, Callable[[np.ndarray, np.ndarray, int], np.ndarray]] = {
    "add": lambda a, b, w: (a + b) & _bitmask(w),
    "sub": lambda a, b, w: (a - b) & _bitmask(w),
    "and": lambda a, b, w: a & b,
    "or": lambda a, b, w: a | b,
    "xor": lambda a, b, w: a ^ b,
    "nand": lambda a, b, w: ~(a & b) & _bitmask(w),
    "nor": lambda a, b, w: ~(a | b) & _bitmask(w),
    "xnor": lambda a, b, w: ~(a ^ b) & _bitmask(w),
    "eq": lambda a, b, w: _u(a == b),
    "lt": lambda a, b, w: _u(a < b),
    "le": lambda a, b, w: _u(a <= b),
    "gt": lambda a, b, w: _u(a > b),
    "ge": lambda a, b, w: _u(a >= b),
    "shl1": lambda a, b, w: (a << np.uint64(1)) & _bitmask(w),
    "shr1": lambda a, b, w: a >> np.uint64(1),
}


class FunctionLibrary:
    def __init__(self, carry_ops: Iterable[CarryOp], reference_ops: Iterable[ReferenceOp] = ()):
        self.carry_ops = list(carry_ops)
        self.reference_ops = list(reference_ops)
        self.by_name = {op.name: op for op in self.carry_ops}
        self._index: dict[tuple, list[CarryOp]] = {}
        for op in self.carry_ops:
            self._index.setdefault((op.s_class, op.di_class), []).append(op)
        self._check_injective()

    def _check_injective(self) -> None:
        """Entries may share an (S, DI) class pair only when CYINIT or output
        site separates them, or when they are declared operand mirrors."""
        full: dict[tuple, list[CarryOp]] = {}
        for op in self.carry_ops:
            full.setdefault((op.s_class, op.di_class, op.cyinit, op.site), []).append(op)
        for key, ops in full.items():
            if len(ops) < 2:
                continue
            names = {o.name for o in ops}
            for o in ops:
                if o.mirror is None or o.mirror not in names:
                    raise ValueError(f"library entries {sorted(names)} share S/DI/CYINIT/site {key}")

    def lookup(self, s_class, di_class, cyinit: Optional[int] = None,
               site: Optional[str] = None) -> list[CarryOp]:
        ops = self._index.get((_key(s_class), _key(di_class)), [])
        return [o for o in ops if (cyinit is None or o.cyinit == cyinit) and (site is None or o.site == site)]

    def reference(self, name: str) -> ReferenceOp:
        for r in self.reference_ops:
            if r.name == name:
                return r
        raise KeyError(name)


def _key(c) -> tuple[int, int]:
    return c.key if isinstance(c, NpnClass) else tuple(c)


def library_lookup(s_class, di_class, lib: FunctionLibrary, cyinit: Optional[int] = None,
                   site: Optional[str] = None) -> Optional[str]:
    ops = lib.lookup(s_class, di_class, cyinit, site)
    return ops[0].name if ops else None


def _template(entry: Mapping) -> TruthTable:
    return TruthTable(tuple(entry["roles"]), int(entry["bits"], 16))


def load_library(path: Optional[str] = None) -> FunctionLibrary:
    if path is None:
        text = resources.files("lutrev").joinpath("data/library.json").read_text()
    else:
        with open(path) as f:
            text = f.read()
    doc = json.loads(text)
    ops = []
    for e in doc["carry_ops"]:
        s_t, di_t = _template(e["s_template"]), _template(e["di_template"])
        s_c = (int(e["s_class"]["n"]), int(e["s_class"]["bits"], 16))
        di_c = (int(e["di_class"]["n"]), int(e["di_class"]["bits"], 16))
        if npn_key(s_t) != s_c or npn_key(di_t) != di_c:
            raise ValueError(f"library entry {e['name']!r}: declared classes disagree with templates")
        ops.append(CarryOp(e["name"], e["kind"], s_t, di_t, int(e["cyinit"]), e["site"], s_c, di_c,
                           e.get("mirror")))
    refs = []
    for r in doc.get("reference_ops", []):
        if r["evaluator"] not in EVALUATORS:
            raise ValueError(f"unknown evaluator {r['evaluator']!r}")
        refs.append(ReferenceOp(r["name"], r["evaluator"], bool(r.get("commutative", True))))
    return FunctionLibrary(ops, refs)


@lru_cache(maxsize=1)
def default_library() -> FunctionLibrary:
    return load_library()


# Equivalence ---------------------------------------------------------------------

WordFunction = Callable[[Sequence[np.ndarray]], np.ndarray]


@dataclass
class MiterResult:
    equivalent: bool
    exhaustive: bool
    vectors: int
    witness: Optional[list[int]] = None


def _stimulus(widths: Sequence[int], exhaustive_bits: int, samples: int, seed: int, chunk: int = 1 << 16):
    total = sum(widths)
    if total <= exhaustive_bits:
        for start in range(0, 1 << total, chunk):
            v = np.arange(start, min(start + chunk, 1 << total), dtype=np.uint64)
            words, shift = [], 0
            for w in widths:
                words.append((v >> np.uint64(shift)) & _bitmask(w))
                shift += w
            yield words
        return
    # corner vectors: all zeros, all ones, each single bit of the concatenated input
    corners = [[np.uint64(0)] * len(widths), [_bitmask(w) for w in widths]]
    for k, w in enumerate(widths):
        for i in range(w):
            vec = [np.uint64(0)] * len(widths)
            vec[k] = np.uint64(1 << i)
            corners.append(vec)
    yield [np.array([c[k] for c in corners], dtype=np.uint64) for k in range(len(widths))]
    rng = np.random.default_rng(seed)
    left = samples
    while left > 0:
        n = min(chunk, left)
        yield [rng.integers(0, 1 << 64, n, dtype=np.uint64) & _bitmask(w) for w in widths]
        left -= n


def miter(fa: WordFunction, fb: WordFunction, widths: Sequence[int], exhaustive_bits: int = 20,
          samples: int = 100_000, seed: int = 0) -> MiterResult:
    """Compare two word functions on shared inputs.

    Exhaustive when the total input width is at most ``exhaustive_bits``;
    otherwise ``samples`` random vectors plus corner vectors (a probabilistic
    acceptance).  Stops at the first mismatching batch and reports a witness.
    """
    for f in (fa, fb):
        w = getattr(f, "widths", None)
        if w is not None and list(w) != list(widths):
            raise ValueError(f"input shape mismatch: {list(w)} vs {list(widths)}")
    exhaustive = sum(widths) <= exhaustive_bits
    count = 0
    for words in _stimulus(widths, exhaustive_bits, samples, seed):
        a = np.asarray(fa(words), dtype=np.uint64)
        b = np.asarray(fb(words), dtype=np.uint64)
        bad = np.flatnonzero(a != b)
        count += len(words[0]) if len(words) else 1
        if len(bad):
            i = int(bad[0])
            return MiterResult(False, exhaustive, count, [int(w[i]) for w in words])
    return MiterResult(True, exhaustive, count)


def equivalent(fa: WordFunction, fb: WordFunction, widths: Sequence[int], exhaustive_limit: int = 1 << 20,
               samples: int = 100_000, seed: int = 0) -> bool:
    return miter(fa, fb, widths, int(log2(exhaustive_limit)), samples, seed).equivalent
