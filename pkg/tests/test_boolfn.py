from dataclasses import replace
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lutrev.boolfn import (EVALUATORS, FunctionLibrary, SupportOverflow, Transform, TruthTable, apply_transform,
                           default_library, load_library, miter, npn_canonical, npn_key, region_function)
from lutrev.netlist import Port, build_netlist


def brute_force_classes(n):
    """Orbits of all 2^(2^n) functions under explicitly enumerated NPN transforms."""
    size = 1 << n
    seen, classes = set(), 0
    for f in range(1 << size):
        if f in seen:
            continue
        classes += 1
        for perm in permutations(range(n)):
            for neg in range(1 << n):
                for out in (0, 1):
                    g = 0
                    for m in range(size):
                        src = sum((((m >> j) & 1) ^ ((neg >> j) & 1)) << perm[j] for j in range(n))
                        g |= (((f >> src) & 1) ^ out) << m
                    seen.add(g)
    return classes


@pytest.mark.parametrize("n", [1, 2, 3])
def test_npn_class_count_matches_brute_force(n):
    keys = {npn_key(TruthTable(tuple(f"x{j}" for j in range(n)), f)) for f in range(1 << (1 << n))}
    assert len(keys) == brute_force_classes(n)


def test_three_input_class_count_is_fourteen():
    assert len({npn_key(TruthTable(("a", "b", "c"), f)) for f in range(256)}) == 14


transforms = st.integers(1, 6).flatmap(lambda n: st.tuples(
    st.just(n), st.integers(0, (1 << (1 << n)) - 1), st.permutations(list(range(n))),
    st.integers(0, (1 << n) - 1), st.integers(0, 1)))


@settings(max_examples=300, deadline=None)
@given(transforms)
def test_canonical_form_is_transform_invariant(case):
    n, bits, perm, neg, out = case
    moved = apply_transform(bits, n, Transform(tuple(perm), neg, out))
    sup = tuple(f"x{j}" for j in range(n))
    assert npn_key(TruthTable(sup, bits)) == npn_key(TruthTable(sup, moved))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 5).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, (1 << (1 << n)) - 1))))
def test_canonical_transform_reproduces_canonical_table(case):
    n, bits = case
    c = npn_canonical(TruthTable(tuple(f"x{j}" for j in range(n)), bits))
    assert apply_transform(bits, n, c.transform) == c.canonical


def test_support_overflow_raises():
    with pytest.raises(SupportOverflow):
        npn_canonical(TruthTable(tuple(f"x{j}" for j in range(7)), 1))


def test_truth_table_cofactor_and_minimize():
    tt = TruthTable.from_function(("s", "a", "b"), lambda s, a, b: b if s else a)
    assert tt.cofactor("s", 0).minimized() == TruthTable(("a",), 0b10)
    assert tt.cofactor("s", 1).minimized() == TruthTable(("b",), 0b10)
    assert TruthTable(("a", "b"), 0b1010).minimized().support == ("a",)


def test_reorder_is_consistent_with_evaluation():
    tt = TruthTable.from_function(("a", "b", "c"), lambda a, b, c: (a & ~b) ^ c)
    r = tt.reorder(("c", "a", "b"))
    for v in range(8):
        c, a, b = v & 1, (v >> 1) & 1, (v >> 2) & 1
        assert r(c, a, b) == tt(a, b, c)


def test_region_function_of_lut_chain():
    ports = [Port("x", "in", ("a", "b", "c")), Port("y", "out", ("y",))]
    raw = [("g1", "LUT2", 0x8, {"I0": "a", "I1": "b", "O": "t"}), ("g2", "LUT2", 0x6, {"I0": "t", "I1": "c", "O": "y"})]
    nl = build_netlist("r", ports, raw)
    tt = region_function(nl, ["a", "b", "c"], "y")
    assert tt == TruthTable.from_function(("a", "b", "c"), lambda a, b, c: (a & b) ^ c)


def test_library_lookup_is_injective_and_has_mirrors():
    lib = default_library()
    add = lib.by_name["add"]
    hits = lib.lookup(add.s_class, add.di_class, add.cyinit, add.site)
    assert [h.name for h in hits] == ["add"]
    gt = lib.by_name["gt"]
    assert {h.name for h in lib.lookup(gt.s_class, gt.di_class, gt.cyinit, gt.site)} == {"gt", "lt"}


def test_library_rejects_ambiguous_entries():
    lib = default_library()
    add = lib.by_name["add"]
    with pytest.raises(ValueError, match="share"):
        FunctionLibrary(list(lib.carry_ops) + [replace(add, name="other", mirror=None)])


def test_library_loads_from_file(tmp_path):
    import json
    from importlib.resources import files
    text = files("lutrev").joinpath("data/library.json").read_text()
    path = tmp_path / "lib.json"
    path.write_text(text)
    assert {op.name for op in load_library(str(path)).carry_ops} == {op.name for op in default_library().carry_ops}
    assert json.loads(text)


def test_miter_exhaustive_and_sampled():
    add = EVALUATORS["add"]
    same = miter(lambda w: add(w[0], w[1], 8), lambda w: (w[0] + w[1]) & np.uint64(255), [8, 8])
    assert same.equivalent and same.exhaustive and same.vectors == 1 << 16
    off = miter(lambda w: add(w[0], w[1], 12), lambda w: (w[0] + w[1] + (w[0] == 77)) & np.uint64(4095),
                [12, 12], exhaustive_bits=16, samples=20000)
    assert not off.equivalent and not off.exhaustive
    assert off.witness[0] == 77


def test_miter_rejects_shape_mismatch():
    class F:
        widths = [4, 4]

        def __call__(self, w):
            return w[0]
    with pytest.raises(ValueError):
        miter(F(), lambda w: w[0], [4, 5])
