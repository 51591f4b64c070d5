import json
from fractions import Fraction

import pytest

from lutrev import Config, analyze
from lutrev import pipeline
from lutrev.model import InferredModule
from lutrev.netlist import Gate, Netlist, Port, build_netlist
from lutrev.pipeline import coverage, coverage_from_manifest, pct
from lutrev.synthgen import compose, gen, preset


def fake_netlist(n):
    gates = [Gate(f"g{i}", "LUT1", 2, {"I0": "a", "O": f"y{i}"}) for i in range(n)]
    return Netlist("f", [Port("a", "in", ("a",)), Port("y", "out", tuple(f"y{i}" for i in range(n)))], gates)


def test_coverage_arithmetic():
    nl = fake_netlist(133)
    known = InferredModule("Adder", frozenset(f"g{i}" for i in range(80)))
    cov = coverage(nl, [known])
    assert cov.known_component == Fraction(80, 133)
    assert pct(cov.known_component) == 60.15


def test_half_known_full_claim():
    nl = fake_netlist(10)
    mods = [InferredModule("Counter", frozenset(f"g{i}" for i in range(5))),
            InferredModule("Unknown", frozenset(f"g{i}" for i in range(5, 10)))]
    cov = coverage(nl, mods)
    assert (pct(cov.module), pct(cov.known_component)) == (100.0, 50.0)


def test_overlapping_claims_rejected():
    nl = fake_netlist(4)
    m = InferredModule("Adder", frozenset({"g0", "g1"}))
    with pytest.raises(AssertionError):
        coverage(nl, [m, m])


@pytest.mark.parametrize("x,expect", [(Fraction(1, 3), 33.33), (Fraction(2, 3), 66.67), (Fraction(1, 8), 12.5),
                                      (Fraction(0), 0.0), (Fraction(1), 100.0)])
def test_percent_rounding(x, expect):
    assert pct(x) == expect


def test_empty_netlist():
    nl = build_netlist("empty", [], [])
    res = analyze(nl)
    assert res.report["gate_coverage"]["module_pct"] == 0.0
    assert res.modules == [] and "module empty" in res.rtl


def test_report_recomputes_from_manifest():
    nl, _ = preset("composite")
    res = analyze(nl)
    mod, known = coverage_from_manifest(json.loads(res.manifest_json()))
    cov = res.report["gate_coverage"]
    assert (pct(mod), pct(known)) == (cov["module_pct"], cov["known_component_pct"])
    assert known <= mod <= 1


def test_claims_are_disjoint_and_partition_with_fallback():
    nl, _ = preset("composite")
    res = analyze(nl)
    seen = set()
    for m in res.modules:
        assert not m.gates & seen
        seen |= m.gates
    assert seen | set(res.fallback) == set(nl.gates)
    assert not seen & set(res.fallback)


def test_stage_ablation_routes_everything_to_fallback():
    nl, _ = gen("adder", 8)
    res = analyze(nl, Config(stages=("seq", "kcut")))
    assert res.modules == [] and len(res.fallback) == len(nl.gates)
    assert res.report["carry_operations"]["chains"] == 0


def test_failed_stage_is_isolated(monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("synthetic")
    monkeypatch.setattr(pipeline, "detect_bitwise_words", boom)
    nl, _ = compose([("adder", 4), ("bitwise:and", 4)])
    res = analyze(nl)
    assert any("kcut: stage failed" in d for d in res.diagnostics)
    assert [m.kind for m in res.modules] == ["Adder"]


def test_unknown_stage_name():
    with pytest.raises(ValueError):
        analyze(build_netlist("e", [], []), Config(stages=("carry", "magic")))


def test_hilbert_analog_detects_every_chain():
    nl, _ = preset("hilbert")
    table = analyze(nl).report["carry_operations"]
    assert (table["chains"], table["add"], table["sub"]) == (15, 5, 10)
    assert table["detected_operations_pct"] == 100.0


def test_sequential_table_counts():
    nl, _ = compose([("counter", 4), ("counter", 6), ("shiftreg", 5), ("register", 3)])
    table = analyze(nl).report["sequential"]
    assert (table["counters"], table["shifters"], table["registers"], table["ffs"]) == (2, 1, 1, 18)


def test_timing_only_on_request():
    nl, _ = gen("adder", 4)
    assert "timing_s" not in analyze(nl).report
    assert set(analyze(nl, include_timing=True).report["timing_s"]) == {"carry", "seq", "kcut", "emit"}
