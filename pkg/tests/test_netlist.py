import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lutrev.netlist import (CONST0, CONST1, NetlistError, PinRef, Port, build_netlist, from_json, parse_netlist,
                            to_json)
from lutrev.sim import Simulator, simulate
from lutrev.synthgen import gen
from lutrev.verilog import netlist_to_verilog


def carry4_oracle(ci, cyinit, s, di):
    """Bit-level reference of one CARRY4: returns (O, CO) lists."""
    c = ci | cyinit
    o, co = [], []
    for i in range(4):
        o.append(s[i] ^ c)
        c = c if s[i] else di[i]
        co.append(c)
    return o, co


def single_carry4():
    ports = [Port("ci", "in", ("ci",)), Port("cy", "in", ("cy",)), Port("s", "in", tuple(f"s{i}" for i in range(4))),
             Port("di", "in", tuple(f"d{i}" for i in range(4))), Port("o", "out", tuple(f"o{i}" for i in range(4))),
             Port("co", "out", tuple(f"c{i}" for i in range(4)))]
    conns = {"CI": "ci", "CYINIT": "cy"}
    for i in range(4):
        conns.update({f"S[{i}]": f"s{i}", f"DI[{i}]": f"d{i}", f"O[{i}]": f"o{i}", f"CO[{i}]": f"c{i}"})
    return build_netlist("c4", ports, [("u", "CARRY4", 0, conns)])


def test_carry4_exhaustive_against_bit_oracle():
    nl = single_carry4()
    v = np.arange(1 << 10, dtype=np.uint64)
    ins = {"ci": v & 1, "cy": (v >> 1) & 1, "s": (v >> 2) & 15, "di": (v >> 6) & 15}
    out = Simulator(nl, len(v)).step(ins)
    for k in range(1 << 10):
        bits = [(k >> j) & 1 for j in range(10)]
        o, co = carry4_oracle(bits[0], bits[1], bits[2:6], bits[6:10])
        assert int(out["o"][k]) == sum(b << i for i, b in enumerate(o))
        assert int(out["co"][k]) == sum(b << i for i, b in enumerate(co))


def lut_and_ff(prim="FDRE", init=0):
    ports = [Port("a", "in", ("a",)), Port("b", "in", ("b",)), Port("clk", "in", ("clk",)),
             Port("ce", "in", ("ce",)), Port("r", "in", ("r",)), Port("q", "out", ("q",))]
    rpin = {"FDRE": "R", "FDSE": "S", "FDCE": "CLR", "FDPE": "PRE"}[prim]
    raw = [("l", "LUT2", 0x6, {"I0": "a", "I1": "b", "O": "x"}),
           ("f", prim, init, {"D": "x", "C": "clk", "CE": "ce", rpin: "r", "Q": "q"})]
    return build_netlist("t", ports, raw)


@pytest.mark.parametrize("prim,rval", [("FDRE", 0), ("FDSE", 1), ("FDCE", 0), ("FDPE", 1)])
def test_flipflop_reset_beats_enable(prim, rval):
    nl = lut_and_ff(prim, init=1 - rval)
    trace = simulate(nl, [{"a": 1, "b": 0, "ce": 0, "r": 0}, {"a": 1, "b": 0, "ce": 1, "r": 1},
                          {"a": 1, "b": 0, "ce": 0, "r": 0}, {"a": 1, "b": 1, "ce": 1, "r": 0},
                          {"a": 0, "b": 0, "ce": 0, "r": 0}])
    assert [t["q"] for t in trace] == [1 - rval, 1 - rval, rval, rval, 0]


def test_json_round_trip_preserves_structure():
    nl, _ = gen("adder", 13, permuted=True, registered=True, seed=4)
    again = from_json(to_json(nl))
    assert again == nl
    assert to_json(again) == to_json(nl)


def test_verilog_round_trip_simulates_identically():
    nl, _ = gen("counter", 6, seed=2)
    again = parse_netlist(netlist_to_verilog(nl), "verilog")
    stim = [{"ce": 1, "rst": int(t == 3)} for t in range(20)]
    assert simulate(again, stim) == simulate(nl, stim)


def test_constants_fold_into_const_nets():
    ports = [Port("y", "out", ("y",))]
    raw = [("g", "GND", 0, {"G": "z"}), ("v", "VCC", 0, {"P": "o"}),
           ("l", "LUT2", 0x8, {"I0": "z", "I1": "o", "O": "y"})]
    nl = build_netlist("k", ports, raw)
    assert nl.gates["l"].pins["I0"] == CONST0 and nl.gates["l"].pins["I1"] == CONST1
    assert simulate(nl, [{}]) == [{"y": 0}]


@pytest.mark.parametrize("doc,msg", [
    ({"ports": [], "gates": [{"id": "a", "type": "LUT9", "conns": {}}]}, "unknown primitive"),
    ({"ports": [{"name": "y", "dir": "out", "bits": ["y"]}], "gates": [
        {"id": "a", "type": "LUT1", "init": "1", "conns": {"I0": "y", "O": "y"}}]}, "combinational cycle"),
    ({"ports": [{"name": "y", "dir": "out", "bits": ["y"]}], "gates": [
        {"id": "a", "type": "LUT1", "init": "1", "conns": {"I0": "p", "O": "y"}}]}, "no driver"),
    ({"ports": [{"name": "i", "dir": "in", "bits": ["i"]}, {"name": "y", "dir": "out", "bits": ["y"]}], "gates": [
        {"id": "a", "type": "LUT1", "init": "1", "conns": {"I0": "i", "O": "y"}},
        {"id": "b", "type": "LUT1", "init": "2", "conns": {"I0": "i", "O": "y"}}]}, "multiple drivers"),
    ({"ports": [], "gates": [{"id": "a", "type": "LUT1", "init": "1F", "conns": {"I0": "x", "O": "y"}}]}, "INIT"),
])
def test_malformed_netlists_are_rejected(doc, msg):
    with pytest.raises(NetlistError, match=msg):
        from_json(json.dumps(doc))


def test_json_syntax_error_reports_position():
    with pytest.raises(NetlistError) as info:
        from_json('{"ports": [}')
    assert info.value.line == 1


def test_cones_stop_at_boundaries():
    nl, truth = gen("adder", 8, registered=True)
    chain = nl.carry_gates()[0]
    cone = nl.extract_cone(PinRef(chain.id, "S[0]"))
    assert len(cone.gates) == 1
    for net in cone.frontier:
        assert nl.driver_gate(net).prim.startswith("FD")


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 24), st.integers(0, 2**32 - 1), st.booleans())
def test_adder_simulation_matches_arithmetic(width, seed, permuted):
    nl, _ = gen("adder", width, permuted=permuted, seed=seed)
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 1 << width, 64, dtype=np.uint64)
    b = rng.integers(0, 1 << width, 64, dtype=np.uint64)
    out = Simulator(nl, 64).step({"a": a, "b": b})
    port = [p for p in nl.outputs][0].name
    assert np.array_equal(out[port], (a + b) & np.uint64((1 << width) - 1))
