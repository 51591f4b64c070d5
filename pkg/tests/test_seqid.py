import networkx as nx
import pytest

from lutrev.model import Config
from lutrev.netlist import Port, build_netlist
from lutrev.seqid import (build_ffcg, group_flipflops, identify_sequential, reference_counter, reference_shifter)
from lutrev.sim import Simulator
from lutrev.synthgen import compose, gen

RESETS = ["R", "S", "CLR", "PRE"]


def seq_module(nl):
    mods = identify_sequential(nl, cfg=Config())
    assert len(mods) == 1
    return mods[0]


@pytest.mark.parametrize("width", [4, 8, 12])
@pytest.mark.parametrize("reset", RESETS)
@pytest.mark.parametrize("direction", ["up", "down"])
def test_counter_kind_order_and_direction(width, reset, direction):
    nl, truth = gen(f"counter:{direction}", width, reset=reset, seed=width)
    lab = truth.modules[0]
    m = seq_module(nl)
    assert (m.kind, m.op) == ("Counter", direction)
    assert m.output_word == lab["output_word"]
    assert m.gates == frozenset(lab["gates"])
    assert m.details["reset_kind"] == {"R": "FDRE", "S": "FDSE", "CLR": "FDCE", "PRE": "FDPE"}[reset]


@pytest.mark.parametrize("width", [4, 8, 12])
@pytest.mark.parametrize("reset", RESETS)
def test_shift_register_order(width, reset):
    nl, truth = gen("shiftreg", width, reset=reset, seed=3)
    lab = truth.modules[0]
    m = seq_module(nl)
    assert m.kind == "ShiftRegister"
    assert m.output_word == lab["output_word"]
    assert m.input_words == lab["input_words"]


def test_plain_register_has_no_cycle_edges():
    nl, truth = gen("register", 8)
    (group,) = group_flipflops(nl)
    assert not build_ffcg(group, nl).graph.edges
    m = seq_module(nl)
    assert m.kind == "Register" and m.output_word == truth.modules[0]["output_word"]


def test_coupled_register_leaves_logic_unclaimed():
    nl, truth = gen("register", 6, coupled=True)
    m = seq_module(nl)
    assert m.kind == "Register"
    assert m.gates == frozenset(truth.of_kind("Register")[0]["gates"])


def test_groups_split_on_control_nets():
    nl, _ = compose([("counter", 4), ("counter", 4), ("register", 4)])
    groups = group_flipflops(nl)
    assert [len(g.ffs) for g in groups] == [4, 4, 4]
    assert len({g.control_key for g in groups}) == 3


def test_shared_control_merges_groups():
    nl, _ = compose([("register", 4), ("register", 4)], shared_control=True)
    assert [len(g.ffs) for g in group_flipflops(nl)] == [8]


@pytest.mark.parametrize("n", [1, 2, 5])
def test_reference_graphs(n):
    c = reference_counter(n)
    assert all(c.has_edge(i, i) for i in range(n))
    assert c.number_of_edges() == n + n * (n - 1) // 2
    s = reference_shifter(n)
    assert nx.is_isomorphic(s, nx.path_graph(n, create_using=nx.DiGraph))


@pytest.mark.parametrize("width", [4, 8])
def test_counter_sequence_is_init_plus_t(width):
    nl, truth = gen("counter", width, init=5, seed=1)
    lab = truth.modules[0]
    sim = Simulator(nl, 1)
    port = [p for p in nl.outputs][0].name
    seen = [int(sim.step({"ce": 1, "rst": 0})[port][0]) for _ in range((1 << width) + 1)]
    assert seen == [(lab["init"] + t) % (1 << width) for t in range((1 << width) + 1)]


def test_non_counter_cycle_is_register():
    # two FFs swapping values form a cycle that is neither a counter nor a shifter
    ports = [Port("clk", "in", ("clk",)), Port("q", "out", ("q0", "q1"))]
    raw = [("f0", "FDRE", 1, {"D": "q1", "C": "clk", "CE": "$1", "R": "$0", "Q": "q0"}),
           ("f1", "FDRE", 0, {"D": "x", "C": "clk", "CE": "$1", "R": "$0", "Q": "q1"}),
           ("l", "LUT1", 0x1, {"I0": "q0", "O": "x"})]
    nl = build_netlist("swap", ports, raw)
    m = seq_module(nl)
    assert m.kind == "Register"
    out = Simulator(nl, 1)
    # twisted ring: (q0, q1) goes (1, 0) -> (0, 0) -> (0, 1) -> (1, 1)
    assert [int(out.step({})["q"][0]) for _ in range(4)] == [1, 0, 2, 3]
