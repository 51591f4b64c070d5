import pytest

from lutrev.boolfn import default_library
from lutrev.carrychain import (analyze_chain, chain_site, chain_view, detect_carry_chains, detect_select_lines,
                               identify_pure_operation)
from lutrev.model import Config
from lutrev.netlist import Port, build_netlist
from lutrev.seqid import SourceIndex
from lutrev.synthgen import compose, gen

LIB = default_library()
FAST = Config(equiv_samples=2000)


def only_chain(nl):
    chains = detect_carry_chains(nl)
    assert len(chains) == 1
    return chains[0]


def carry_label(truth):
    return [m for m in truth.modules if m["kind"] != "Register"][0]


@pytest.mark.parametrize("width,expect", [(4, 1), (5, 2), (13, 4), (64, 16)])
def test_chain_length_is_ceil_width_over_four(width, expect):
    nl, _ = gen("adder", width)
    assert len(only_chain(nl)) == expect


def test_multiple_chains_are_separated_and_ordered():
    nl, _ = compose([("adder", 8), ("subtractor", 12), ("comparator:eq", 4)])
    chains = detect_carry_chains(nl)
    assert [len(c) for c in chains] == [2, 3, 1]
    assert not set(chains[0].gates) & set(chains[1].gates)


def test_fanout_from_middle_of_chain_is_reported():
    ports = [Port("x", "in", ("x",)), Port("y", "out", ("y0", "y1"))]
    c0 = {"CI": "x", "CYINIT": "$0", "CO[3]": "k"}
    c1 = {"CI": "k", "CYINIT": "$0", "O[0]": "y0"}
    c2 = {"CI": "k", "CYINIT": "$0", "O[0]": "y1"}
    for c in (c0, c1, c2):
        for i in range(4):
            c.setdefault(f"S[{i}]", "x")
            c.setdefault(f"DI[{i}]", "x")
    nl = build_netlist("f", ports, [("a", "CARRY4", 0, c0), ("b", "CARRY4", 0, c1), ("c", "CARRY4", 0, c2)])
    chains = detect_carry_chains(nl)
    assert sorted(len(c) for c in chains) == [1, 2]
    assert any("drives 2 carry inputs" in d for c in chains for d in c.diagnostics)


@pytest.mark.parametrize("kind,site", [("adder", "O"), ("ge", "CO"), ("eq", "CO")])
def test_output_site(kind, site):
    nl, _ = gen(kind, 8)
    assert chain_site(nl, only_chain(nl))[0] == site


@pytest.mark.parametrize("kind", ["adder", "subtractor", "gt", "ge", "lt", "le", "eq"])
@pytest.mark.parametrize("permuted", [False, True])
@pytest.mark.parametrize("registered", [False, True])
def test_pure_operation_matches_label(kind, permuted, registered):
    nl, truth = gen(kind, 13, permuted=permuted, registered=registered, seed=7)
    lab = carry_label(truth)
    m = analyze_chain(only_chain(nl), nl, LIB, FAST)
    assert (m.kind, m.op) == (lab["kind"], lab["op"])
    assert m.input_words == lab["input_words"]
    assert m.verified is not None
    comb = m.comb_output or m.output_word
    assert comb == lab.get("comb_output", lab["output_word"])


def test_unlisted_operation_is_unknown():
    # S = a AND b is not an add/sub/compare S function
    ports = [Port("a", "in", ("a0", "a1", "a2", "a3")), Port("b", "in", ("b0", "b1", "b2", "b3")),
             Port("y", "out", ("y0", "y1", "y2", "y3"))]
    raw = []
    conns = {"CI": "$0", "CYINIT": "$0"}
    for i in range(4):
        raw.append((f"l{i}", "LUT2", 0x8, {"I0": f"a{i}", "I1": f"b{i}", "O": f"s{i}"}))
        conns.update({f"S[{i}]": f"s{i}", f"DI[{i}]": f"a{i}", f"O[{i}]": f"y{i}"})
    raw.append(("c", "CARRY4", 0, conns))
    nl = build_netlist("odd", ports, raw)
    m = identify_pure_operation(only_chain(nl), nl, LIB, FAST)
    assert m.kind == "Unknown"
    assert m.gates == frozenset({"c", "l0", "l1", "l2", "l3"})


def test_addsub_select_line_and_map():
    nl, truth = gen("addsub", 8)
    chain = only_chain(nl)
    view = chain_view(nl, chain)
    sel = detect_select_lines(nl, view, SourceIndex(nl))
    lab = truth.modules[0]
    assert sel == [lab["controls"]["sel"]]
    m = analyze_chain(chain, nl, LIB, Config())
    assert m.kind == "AddSub"
    assert m.op_map == {"0": "add", "1": "sub"}
    assert m.verified == "exhaustive"
