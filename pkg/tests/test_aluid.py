import pytest

from lutrev.aluid import discover_opcodes, extract_alu_candidate, identify_alu
from lutrev.boolfn import default_library
from lutrev.carrychain import detect_carry_chains
from lutrev.model import Config
from lutrev.synthgen import gen

LIB = default_library()


def alu_label(truth):
    return truth.of_kind("ALU")[0]


@pytest.mark.parametrize("ops", [("add", "sub", "and", "xor"), ("add", "sub"), ("sub", "or", "add", "and"),
                                 ("add", "xor", "sub")])
@pytest.mark.parametrize("permuted,registered", [(False, False), (True, False), (False, True)])
def test_opcode_map_matches_label(ops, permuted, registered):
    nl, truth = gen("alu:" + ",".join(ops), 6, permuted=permuted, registered=registered, seed=11)
    lab = alu_label(truth)
    m, reason = identify_alu(detect_carry_chains(nl)[0], nl, LIB, Config())
    assert m is not None, reason
    assert m.op_map == lab["op_map"]
    assert m.input_words == lab["input_words"]
    assert m.output_word == lab["output_word"]
    assert m.gates == frozenset(lab["gates"])
    assert m.verified == "exhaustive"


def test_opcode_nets_are_side_inputs():
    nl, truth = gen("alu:add,sub,and,xor", 8)
    cand, _ = extract_alu_candidate(detect_carry_chains(nl)[0], nl)
    lab = alu_label(truth)
    assert cand.opcode_nets == [lab["controls"]["op0"], lab["controls"]["op1"]]


def test_every_opcode_is_checked_against_every_reference():
    nl, _ = gen("alu:add,sub,and,xor", 4)
    cand, _ = extract_alu_candidate(detect_carry_chains(nl)[0], nl)
    opmap = discover_opcodes(cand, LIB, nl)
    assert opmap.complete and opmap.exhaustive
    assert opmap.matches == {"00": ["add"], "01": ["sub"], "10": ["and"], "11": ["xor"]}


@pytest.mark.parametrize("kind,reason", [("adder", "no logic between chain"), ("ge", "no sum outputs")])
def test_non_alu_chains_are_rejected_with_reason(kind, reason):
    nl, _ = gen(kind, 8)
    m, why = identify_alu(detect_carry_chains(nl)[0], nl, LIB)
    assert m is None and reason in why


def test_side_input_limit():
    nl, _ = gen("alu:add,sub,and,xor", 4)
    cand, why = extract_alu_candidate(detect_carry_chains(nl)[0], nl, Config(alu_max_side_inputs=1))
    assert cand is None and "exceed" in why
