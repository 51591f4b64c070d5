from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lutrev.kcut import CutEnumerator, detect_bitwise_words, find_slices, op_name, slice_classes
from lutrev.boolfn import TruthTable
from lutrev.netlist import Port, build_netlist
from lutrev.seqid import SourceIndex
from lutrev.synthgen import BITWISE_FNS, compose, gen


def random_dag(seed, n_in=4, n_lut=7):
    rng = np.random.default_rng(seed)
    nets = [f"i{j}" for j in range(n_in)]
    raw = []
    for g in range(n_lut):
        k = int(rng.integers(1, 4))
        ins = [nets[int(x)] for x in rng.choice(len(nets), size=min(k, len(nets)), replace=False)]
        conns = {f"I{j}": n for j, n in enumerate(ins)}
        conns["O"] = f"w{g}"
        raw.append((f"g{g}", f"LUT{len(ins)}", int(rng.integers(0, 1 << (1 << len(ins)))), conns))
        nets.append(f"w{g}")
    ports = [Port("i", "in", tuple(nets[:n_in])), Port("y", "out", (nets[-1],))]
    return build_netlist("dag", ports, raw)


def brute_force_cuts(nl, root, k):
    """Minimal structural cuts: every path from a source to the root crosses the set."""
    fanin = {}
    stack, cone = [root], set()
    while stack:
        n = stack.pop()
        if n in cone:
            continue
        cone.add(n)
        g = nl.driver_gate(n)
        fanin[n] = list(dict.fromkeys(g.input_nets())) if g is not None else []
        stack.extend(fanin[n])

    def is_cut(s):
        seen, todo = set(), [root]
        while todo:
            n = todo.pop()
            if n in s or n in seen:
                continue
            seen.add(n)
            if not fanin[n]:
                return False
            todo.extend(fanin[n])
        return True

    cuts = set()
    for size in range(1, k + 1):
        for s in combinations(sorted(cone), size):
            s = frozenset(s)
            if is_cut(s) and all(not is_cut(s - {x}) for x in s):
                cuts.add(s)
    return cuts


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 4))
def test_cut_enumeration_matches_brute_force(seed, k):
    nl = random_dag(seed)
    enum = CutEnumerator(nl, k)
    for g in nl.luts():
        root = g.pins["O"]
        assert set(enum.cuts(root)) == brute_force_cuts(nl, root, k)


def test_cuts_respect_size_and_max_cuts():
    nl = random_dag(5, n_in=6, n_lut=12)
    root = nl.luts()[-1].pins["O"]
    all_cuts = CutEnumerator(nl, 6).cuts(root)
    assert all(len(c) <= 6 for c in all_cuts)
    capped = CutEnumerator(nl, 6, max_cuts=2).cuts(root)
    assert len(capped) <= 2 and frozenset([root]) in capped


def test_bad_k_is_rejected():
    with pytest.raises(ValueError):
        CutEnumerator(random_dag(1), 7)


def test_slice_classes():
    # one buffer class, the AND and XOR two-input classes, and the 2:1 mux
    assert len(slice_classes()) == 4


@pytest.mark.parametrize("fn", sorted(BITWISE_FNS))
def test_op_names_round_trip(fn):
    tt = TruthTable.from_function(("a", "b"), BITWISE_FNS[fn])
    assert op_name(tt) == fn


@pytest.mark.parametrize("fn", ["and", "xor", "andn", "nor"])
@pytest.mark.parametrize("permuted,registered", [(False, False), (True, False), (False, True)])
def test_bitwise_word_detection(fn, permuted, registered):
    nl, truth = gen(f"bitwise:{fn}", 8, permuted=permuted, registered=registered, seed=2)
    lab = truth.of_kind("BitwiseOp")[0]
    claimed = {g for m in truth.modules if m["kind"] == "Register" for g in m["gates"]}
    unclaimed = [g for g in nl.gates if g not in claimed]
    (m,) = detect_bitwise_words(nl, unclaimed)
    assert m.op == fn
    assert m.input_words == lab["input_words"]
    assert m.output_word == lab["output_word"]
    assert m.gates == frozenset(lab["gates"])


def test_random_logic_yields_no_words():
    nl, _ = gen("random", 6, seed=9)
    assert detect_bitwise_words(nl, list(nl.gates)) == []


def test_words_split_by_destination():
    nl, truth = compose([("bitwise:and", 4, {"registered": True}), ("bitwise:and", 4, {"registered": True})])
    claimed = {g for m in truth.of_kind("Register") for g in m["gates"]}
    words = detect_bitwise_words(nl, [g for g in nl.gates if g not in claimed])
    assert sorted(len(m.output_word) for m in words) == [4, 4]


def test_slices_need_a_destination():
    nl, _ = gen("bitwise:xor", 4)
    src = SourceIndex(nl)
    assert len(find_slices(nl, list(nl.gates), src)) == 4
