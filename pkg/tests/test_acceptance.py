"""Acceptance criteria 1-9: each test records one PASS/FAIL line (see conftest)."""

import json
import time
from fractions import Fraction
from itertools import permutations

import numpy as np
import pytest

from conftest import record
from lutrev import Config, analyze
from lutrev.boolfn import TruthTable, miter, npn_key
from lutrev.cli import main
from lutrev.model import KNOWN_KINDS
from lutrev.netlist import to_json
from lutrev.pipeline import pct
from lutrev.rtlsim import RtlSimulator, compare
from lutrev.sim import RegionFunction
from lutrev.synthgen import gen, oracle, preset

WIDTHS = (4, 8, 13, 16, 32, 64)
PURE = ("adder", "subtractor", "gt", "ge", "lt", "le", "eq")
VARIANTS = {"plain": {}, "permuted": {"permuted": True}, "registered": {"registered": True}}
RESETS = ("R", "S", "CLR", "PRE")


def non_register(modules):
    return [m for m in modules if m.kind != "Register"]


def label_of(truth):
    return [m for m in truth.modules if m["kind"] != "Register"][0]


def module_vs_oracle(nl, m, lab, extra_words=(), exhaustive_bits=20, samples=100_000):
    """Independent miter of the recovered module region against the label's behavioral oracle."""
    words = list(m.input_words) + list(extra_words)
    region = RegionFunction(nl, words, m.comb_output or m.output_word)
    return miter(region, oracle(lab), region.widths, exhaustive_bits, samples, seed=1)


def test_criterion_1_pure_operations():
    failures, t_pipeline = [], 0.0
    for width in WIDTHS:
        for kind in PURE:
            for variant, opts in VARIANTS.items():
                nl, truth = gen(kind, width, seed=width, **opts)
                lab = label_of(truth)
                t0 = time.perf_counter()
                res = analyze(nl)
                t_pipeline += time.perf_counter() - t0
                found = non_register(res.modules)
                tag = f"{kind}/{width}/{variant}"
                if len(found) != 1:
                    failures.append(f"{tag}: {len(found)} modules")
                    continue
                m = found[0]
                if (m.kind, m.op) != (lab["kind"], lab["op"]) or [len(w) for w in m.input_words] != [width] * 2:
                    failures.append(f"{tag}: got {m.kind}/{m.op}")
                    continue
                if not module_vs_oracle(nl, m, lab).equivalent:
                    failures.append(f"{tag}: oracle mismatch")
    ok = not failures and t_pipeline < 60
    record(1, ok, f"{len(WIDTHS) * len(PURE) * len(VARIANTS)} designs, {len(failures)} failures, "
                  f"pipeline {t_pipeline:.1f}s (< 60s) {failures[:3]}")
    assert ok


def test_criterion_2_addsub():
    failures = []
    for width in (8, 16, 32):
        nl, truth = gen("addsub", width, seed=width)
        lab = truth.modules[0]
        (m,) = analyze(nl).modules
        if m.kind != "AddSub" or m.op_map != {"0": "add", "1": "sub"}:
            failures.append(f"{width}: {m.kind} {m.op_map}")
            continue
        r = module_vs_oracle(nl, m, lab, [list(m.control_nets.values())], exhaustive_bits=17, samples=10_000)
        if not r.equivalent or r.exhaustive != (width == 8) or (width == 8 and r.vectors != 1 << 17):
            failures.append(f"{width}: equivalence {r}")
    record(2, not failures, f"widths 8/16/32, exhaustive 2^17 at 8, 10^4 samples above {failures}")
    assert not failures


def test_criterion_3_alu():
    t0 = time.perf_counter()
    nl, truth = gen("alu:add,sub,and,xor", 8, seed=3)
    lab = truth.of_kind("ALU")[0]
    res = analyze(nl)
    alus = [m for m in res.modules if m.kind == "ALU"]
    ok = len(alus) == 1 and alus[0].op_map == lab["op_map"]
    detail = f"op_map {alus[0].op_map if alus else None}"
    if ok:
        m = alus[0]
        ctl = list(m.control_nets.values())
        for code, op in m.op_map.items():
            fixed = {ctl[j]: int(code[len(code) - 1 - j]) for j in range(len(ctl))}
            region = RegionFunction(nl, m.input_words, m.comb_output, fixed)
            ref = oracle({"kind": "ALU", "input_words": m.input_words, "op_map": {"0": op}, "width": 8})
            r = miter(region, lambda w, ref=ref: ref([w[0], w[1], np.zeros_like(w[0])]), [8, 8], 16)
            ok = ok and r.equivalent and r.exhaustive and r.vectors == 1 << 16
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 120
    record(3, ok, f"{detail}, each entry exhaustive over 2^16, {elapsed:.1f}s (< 120s)")
    assert ok


def _sequence(text, port, cycles):
    sim = RtlSimulator(text, lanes=1)
    return [int(sim.step({"ce": 1, "rst": 0})[port][0]) for _ in range(cycles)]


def test_criterion_4_sequential():
    failures = []
    for width in (4, 8, 12):
        for reset in RESETS:
            init = (width * 5 + 3) % (1 << width)
            for kind in ("counter", "shiftreg"):
                nl, truth = gen(kind, width, reset=reset, init=init, seed=width)
                lab = truth.modules[0]
                res = analyze(nl)
                tag = f"{kind}/{width}/{reset}"
                if len(res.modules) != 1:
                    failures.append(f"{tag}: {len(res.modules)} modules")
                    continue
                m = res.modules[0]
                if m.kind != lab["kind"] or m.output_word != lab["output_word"]:
                    failures.append(f"{tag}: {m.kind}")
                    continue
                if kind == "counter":
                    port = nl.outputs[0].name
                    n = (1 << width) + 1
                    want = [(lab["init"] + t) % (1 << width) for t in range(n)]
                    if _sequence(res.rtl, port, n) != want:
                        failures.append(f"{tag}: sequence")
    record(4, not failures, f"24 designs (CE, resets {'/'.join(RESETS)}), counter runs 2^w+1 cycles {failures}")
    assert not failures


def test_criterion_5_aes_analog():
    nl, truth = preset("aes")
    res = analyze(nl)
    words = [m for m in res.modules if m.kind == "BitwiseOp"]
    carry = res.report["carry_operations"]["chains"]
    seq_kinds = {m.kind for m in res.modules if m.source_stage == "seq"}
    labels = {tuple(map(tuple, l["input_words"])): l["op"] for l in truth.of_kind("BitwiseOp")}
    got = {tuple(map(tuple, m.input_words)): m.op for m in words}
    without_kcut = analyze(nl, Config(stages=("carry", "seq")))
    ok = (carry == 0 and len(words) == 20 and all(m.source_stage == "kcut" and m.width == 8 for m in words)
          and seq_kinds == {"Register"} and got == labels
          and not any(m.kind == "BitwiseOp" for m in without_kcut.modules))
    record(5, ok, f"chains {carry}, bitwise words {len(words)} (k-cut), seq kinds {sorted(seq_kinds)}, "
                  f"without k-cut {sum(m.kind == 'BitwiseOp' for m in without_kcut.modules)}")
    assert ok


def _transform(f, n, perm, neg, out):
    """Input j of the result reads input perm[j] of f, complemented by neg; out flips the output."""
    g = 0
    for m in range(1 << n):
        src = sum((((m >> j) & 1) ^ ((neg >> j) & 1)) << perm[j] for j in range(n))
        g |= (((f >> src) & 1) ^ out) << m
    return g


def _brute_force_class_count(n):
    seen, classes = set(), 0
    for f in range(1 << (1 << n)):
        if f in seen:
            continue
        classes += 1
        for perm in permutations(range(n)):
            for neg in range(1 << n):
                for out in (0, 1):
                    seen.add(_transform(f, n, perm, neg, out))
    return classes


def test_criterion_6_npn():
    t0 = time.perf_counter()
    sup3 = ("a", "b", "c")
    classes = len({npn_key(TruthTable(sup3, f)) for f in range(256)})
    oracle_count = _brute_force_class_count(3)
    rng = np.random.default_rng(6)
    bad = 0
    for _ in range(10_000):
        n = int(rng.integers(1, 7))
        bits = int.from_bytes(rng.bytes(8), "little") & ((1 << (1 << n)) - 1)
        perm = [int(x) for x in rng.permutation(n)]
        moved = _transform(bits, n, perm, int(rng.integers(0, 1 << n)), int(rng.integers(2)))
        sup = tuple(f"x{j}" for j in range(n))
        bad += npn_key(TruthTable(sup, bits)) != npn_key(TruthTable(sup, moved))
    elapsed = time.perf_counter() - t0
    ok = classes == oracle_count == 14 and bad == 0 and elapsed < 60
    record(6, ok, f"{classes} classes (oracle {oracle_count}), {bad} invariance failures in 10^4 pairs, "
                  f"{elapsed:.1f}s (< 60s)")
    assert ok


def test_criterion_7_end_to_end():
    nl, truth = preset("composite")
    kinds = {m["kind"] for m in truth.modules}
    res = analyze(nl)
    cmp = compare(nl, res.rtl, cycles=500, lanes=20, seed=7)
    ok = (len(nl.gates) >= 500 and {"Adder", "AddSub", "Counter", "ShiftRegister", "BitwiseOp"} <= kinds
          and cmp.cycles * cmp.lanes >= 10_000 and cmp.mismatches == 0)
    record(7, ok, f"{len(nl.gates)} gates, {cmp.lanes}x{cmp.cycles} random cycles from reset, "
                  f"{cmp.mismatches} mismatches")
    assert ok


def test_criterion_8_coverage():
    checks = []
    for name in ("composite", "aes", "hilbert"):
        nl, truth = preset(name)
        cov = analyze(nl).report["gate_coverage"]
        total = len(nl.gates)
        claimed = Fraction(len(truth.claimed()), total)
        known = Fraction(sum(len(m["gates"]) for m in truth.modules
                             if m.get("claimed", True) and m["kind"] in KNOWN_KINDS), total)
        checks.append((name, cov["module_pct"] == pct(claimed) and cov["known_component_pct"] == pct(known)
                       and cov["known_component_pct"] <= cov["module_pct"] <= 100, cov["module_pct"],
                       cov["known_component_pct"]))
    ok = all(c[1] for c in checks)
    record(8, ok, ", ".join(f"{n} module {m:.2f}% known {k:.2f}%" for n, _, m, k in checks))
    assert ok


def test_criterion_9_determinism(tmp_path):
    nl, _ = preset("composite")
    src = tmp_path / "composite.json"
    src.write_text(to_json(nl))
    blobs = []
    for i in range(2):
        rtl, rep = tmp_path / f"run{i}.v", tmp_path / f"run{i}.json"
        assert main(["analyze", "--in", str(src), "--out-rtl", str(rtl), "--out-report", str(rep),
                     "--seed", "11"]) == 0
        blobs.append((rtl.read_bytes(), rep.read_bytes(), (tmp_path / f"run{i}.manifest.json").read_bytes()))
    ok = blobs[0] == blobs[1]
    record(9, ok, f"RTL {len(blobs[0][0])} B, report {len(blobs[0][1])} B, manifest identical across runs")
    assert ok
    assert json.loads(blobs[0][1])


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
