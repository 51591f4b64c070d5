import numpy as np
import pytest

from lutrev.boolfn import miter
from lutrev.sim import RegionFunction, Simulator
from lutrev.synthgen import compose, gen, oracle, preset

COMB = ["adder", "subtractor", "addsub", "gt", "ge", "lt", "le", "eq", "bitwise:xor", "bitwise:orn",
        "alu:add,sub,and,xor"]


def comb_labels(truth):
    return [m for m in truth.modules if m["kind"] not in ("Register", "Unknown", "Counter", "ShiftRegister")]


@pytest.mark.parametrize("kind", COMB)
@pytest.mark.parametrize("width", [4, 8, 17])
@pytest.mark.parametrize("permuted", [False, True])
def test_labels_agree_with_oracle(kind, width, permuted):
    nl, truth = gen(kind, width, permuted=permuted, seed=width)
    (lab,) = comb_labels(truth)
    words = list(lab["input_words"])
    if lab.get("controls") and lab["kind"] in ("AddSub", "ALU"):
        words.append(list(lab["controls"].values()))
    region = RegionFunction(nl, words, lab.get("comb_output", lab["output_word"]))
    # exhaustive up to 16 input bits, otherwise 10^4 random vectors
    r = miter(region, oracle(lab), region.widths, exhaustive_bits=16, samples=10_000, seed=1)
    assert r.equivalent, r.witness
    assert r.exhaustive == (sum(region.widths) <= 16)


@pytest.mark.parametrize("kind", ["adder", "subtractor", "ge"])
@pytest.mark.parametrize("width", [4, 9, 16])
def test_carry_kinds_use_ceil_width_over_four_carry4(kind, width):
    nl, _ = gen(kind, width)
    assert len(nl.carry_gates()) == -(-width // 4)


def test_labels_partition_gates():
    nl, truth = preset("composite")
    seen = []
    for m in truth.modules:
        seen.extend(m["gates"])
    assert sorted(seen) == sorted(nl.gates)


def test_counter_counts_enabled_cycles():
    nl, _ = gen("counter", 8)
    sim = Simulator(nl, 1)
    en = [1, 0, 1, 1, 0, 1] * 50
    vals = [int(sim.step({"ce": e, "rst": 0})["q"][0]) for e in en]
    assert vals == [sum(en[:t]) % 256 for t in range(len(en))]


def test_registered_variant_wraps_io_in_registers():
    nl, truth = gen("adder", 8, registered=True)
    assert len(truth.of_kind("Register")) == 2
    assert len(nl.flipflops()) == 24


def test_shared_control_uses_single_ce_and_reset():
    nl, _ = compose([("counter", 4), ("register", 4)], shared_control=True)
    ctl = {(g.pins["CE"], g.pins["R"]) for g in nl.flipflops()}
    assert len(ctl) == 1


@pytest.mark.parametrize("kind,width", [("adder", 1), ("adder", 65), ("teleporter", 8)])
def test_bad_requests(kind, width):
    with pytest.raises(ValueError):
        gen(kind, width)


def test_generation_is_seed_deterministic():
    from lutrev.netlist import to_json
    a, _ = gen("random", 5, seed=3)
    b, _ = gen("random", 5, seed=3)
    c, _ = gen("random", 5, seed=4)
    assert to_json(a) == to_json(b) != to_json(c)


def test_alu_oracle_picks_each_opcode():
    _, truth = gen("alu:add,sub,and,xor", 4)
    f = oracle(truth.of_kind("ALU")[0])
    a, b = np.uint64(9), np.uint64(5)
    got = [int(f([np.array([a]), np.array([b]), np.array([np.uint64(c)])])[0]) for c in range(4)]
    assert got == [14, 4, 1, 12]
