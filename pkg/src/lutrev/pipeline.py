"""
Stage orchestration, coverage accounting and report assembly.

Stages run in a fixed order (carry chains with ALU upgrade, sequential
groups, k-cut bitwise words); each sees only gates left unclaimed by the
previous ones.  Whatever is still unclaimed at the end is emitted as
behavioral fallback.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .aluid import identify_alu
from .boolfn import FunctionLibrary, default_library
from .carrychain import analyze_chain, chain_view, detect_carry_chains
from .kcut import detect_bitwise_words
from .model import Config, InferredModule
from .netlist import LUT_PRIMS, Netlist, is_ff
from .rtl import KIND_NAMES, behavioral, emit_rtl
from .seqid import SourceIndex, group_flipflops, identify_sequential

STAGES = ("carry", "seq", "kcut")
REPORT_VERSION = 1


@dataclass
class Coverage:
    total: int
    claimed: int
    known: int

    @property
    def module(self) -> Fraction:
        return Fraction(self.claimed, self.total) if self.total else Fraction(0)

    @property
    def known_component(self) -> Fraction:
        return Fraction(self.known, self.total) if self.total else Fraction(0)


@dataclass
class AnalysisResult:
    netlist: Netlist
    modules: list[InferredModule]
    fallback: list[str]
    rtl: str
    report: dict
    diagnostics: list[str] = field(default_factory=list)

    def report_json(self) -> str:
        return json.dumps(self.report, indent=2, sort_keys=True) + "\n"

    def manifest(self) -> dict:
        return manifest(self.netlist, self.modules, self.fallback)

    def manifest_json(self) -> str:
        return json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n"


def pct(x: Fraction) -> float:
    """Percentage rounded to two decimals (exact half-up on the rational)."""
    scaled = x * 10000
    return int(scaled + Fraction(1, 2)) / 100


def coverage(netlist: Netlist, modules: Sequence[InferredModule]) -> Coverage:
    claimed: set[str] = set()
    known = 0
    for m in modules:
        if m.gates & claimed:
            raise AssertionError("overlapping gate claims")
        claimed |= m.gates
        if m.known:
            known += len(m.gates)
    return Coverage(len(netlist.gates), len(claimed), known)


def _carry_stage(netlist: Netlist, lib: FunctionLibrary, cfg: Config, src: SourceIndex,
                 diags: list[str]) -> tuple[list[InferredModule], int]:
    chains = detect_carry_chains(netlist)
    for c in chains:
        diags.extend(c.diagnostics)
    modules = []
    for chain in chains:
        m = analyze_chain(chain, netlist, lib, cfg, src)
        if chain_view(netlist, chain).site == "O":
            alu, reason = identify_alu(chain, netlist, lib, cfg, src)
            if alu is not None:
                m = alu
            elif m.kind == "Unknown":
                diags.append(f"chain {chain.gates[0]}: no ALU ({reason})")
        modules.append(m)
    return modules, len(chains)


def analyze(netlist: Netlist, cfg: Config = Config(), lib: Optional[FunctionLibrary] = None,
            include_timing: bool = False) -> AnalysisResult:
    lib = lib or default_library()
    for s in cfg.stages:
        if s not in STAGES:
            raise ValueError(f"unknown stage {s!r}")
    diags: list[str] = []
    groups = group_flipflops(netlist)
    src = SourceIndex(netlist, groups)
    modules: list[InferredModule] = []
    claimed: set[str] = set()
    timing: dict[str, float] = {}
    n_chains = 0

    def accept(found: list[InferredModule], stage: str) -> None:
        for m in found:
            if m.gates & claimed:
                diags.append(f"{stage}: dropped {m.kind} overlapping earlier claims")
                continue
            claimed.update(m.gates)
            modules.append(m)

    for stage in STAGES:
        if stage not in cfg.stages:
            continue
        t0 = time.perf_counter()
        try:
            if stage == "carry":
                found, n_chains = _carry_stage(netlist, lib, cfg, src, diags)
            elif stage == "seq":
                found = identify_sequential(netlist, claimed, groups, cfg)
            else:
                unclaimed = [g for g in netlist.gates if g not in claimed]
                found = detect_bitwise_words(netlist, unclaimed, src, cfg)
        except Exception as exc:  # a failing stage is skipped, the run goes on
            diags.append(f"{stage}: stage failed ({type(exc).__name__}: {exc})")
            found = []
        accept(found, stage)
        timing[stage] = time.perf_counter() - t0

    fallback = sorted(g for g in netlist.gates if g not in claimed)
    t0 = time.perf_counter()
    rtl = emit_rtl(netlist, modules, fallback)
    timing["emit"] = time.perf_counter() - t0
    report = build_report(netlist, modules, fallback, n_chains, cfg, diags)
    if include_timing:
        report["timing_s"] = {k: round(v, 4) for k, v in timing.items()}
    return AnalysisResult(netlist, modules, fallback, rtl, report, diags)


def _instance_names(modules: Sequence[InferredModule]) -> list[str]:
    return [f"u_{KIND_NAMES.get(m.kind, 'unknown')}{i}" for i, m in enumerate(modules)]


def carry_table(netlist: Netlist, modules: Sequence[InferredModule], n_chains: int) -> dict:
    carry = [m for m in modules if m.source_stage in ("carry", "alu")]
    count = {k: sum(m.kind == k for m in carry) for k in ("Adder", "Subtractor", "Comparator", "ALU", "AddSub")}
    known = [m for m in carry if m.known]
    frac = lambda n, d: Fraction(n, d) if d else Fraction(0)
    total = len(netlist.gates)
    return {
        "gates": total, "chains": n_chains, "add": count["Adder"], "sub": count["Subtractor"],
        "comp": count["Comparator"], "alu": count["ALU"], "add_sub": count["AddSub"],
        "detected_operations_pct": pct(frac(len(known), n_chains)),
        "converted_to_rtl_pct": pct(frac(sum(behavioral(m) for m in carry), n_chains)),
        "module_coverage_pct": pct(frac(sum(len(m.gates) for m in carry), total)),
        "known_operation_coverage_pct": pct(frac(sum(len(m.gates) for m in known), total)),
    }


def sequential_table(netlist: Netlist, modules: Sequence[InferredModule]) -> dict:
    seq = [m for m in modules if m.source_stage == "seq"]
    pool = [g for g in netlist.gates.values() if is_ff(g.prim) or g.prim in LUT_PRIMS]
    pool_ids = {g.id for g in pool}
    covered = sum(len(m.gates & pool_ids) for m in seq if m.known)
    frac = Fraction(covered, len(pool)) if pool else Fraction(0)
    return {
        "ffs": len(netlist.flipflops()),
        "registers": sum(m.kind == "Register" for m in seq),
        "counters": sum(m.kind == "Counter" for m in seq),
        "shifters": sum(m.kind == "ShiftRegister" for m in seq),
        "known_seq_coverage_pct": pct(frac),
    }


def build_report(netlist: Netlist, modules: Sequence[InferredModule], fallback: Sequence[str], n_chains: int,
                 cfg: Config, diags: Sequence[str]) -> dict:
    cov = coverage(netlist, modules)
    stages = {s: [] for s in ("carry", "alu", "seq", "kcut")}
    for name, m in zip(_instance_names(modules), modules):
        stages.setdefault(m.source_stage, []).append(dict(m.summary(), instance=name))
    reg_stages = sorted({d for m in modules if m.source_stage == "kcut" for d in [tuple(m.details.get("dest", []))]})
    return {
        "version": REPORT_VERSION,
        "design": netlist.name,
        "config": {"k": cfg.k, "pure_op_max_support": cfg.pure_op_max_support,
                   "max_select_nets": cfg.max_select_nets, "equiv_exhaustive_bits": cfg.equiv_exhaustive_bits,
                   "equiv_samples": cfg.equiv_samples, "seed": cfg.seed, "stages": list(cfg.stages)},
        "stages": stages,
        "carry_operations": carry_table(netlist, modules, n_chains),
        "sequential": sequential_table(netlist, modules),
        "gate_coverage": {"gates": cov.total, "claimed": cov.claimed, "known": cov.known,
                          "module_pct": pct(cov.module), "known_component_pct": pct(cov.known_component)},
        "kcut_register_stages": [list(s) for s in reg_stages],
        "fallback_gates": len(fallback),
        "diagnostics": list(diags),
    }


def manifest(netlist: Netlist, modules: Sequence[InferredModule], fallback: Sequence[str]) -> dict:
    entries = []
    for name, m in zip(_instance_names(modules), modules):
        entries.append({"instance": name, "kind": m.kind, "op": m.op, "stage": m.source_stage,
                        "input_widths": [len(w) for w in m.input_words], "width": m.width,
                        "behavioral": behavioral(m), "gates": sorted(m.gates)})
    return {"design": netlist.name, "total_gates": len(netlist.gates), "modules": entries,
            "fallback": sorted(fallback)}


def coverage_from_manifest(man: dict) -> tuple[Fraction, Fraction]:
    """Recompute (module, known-component) coverage from a manifest."""
    from .model import KNOWN_KINDS
    total = man["total_gates"]
    if not total:
        return Fraction(0), Fraction(0)
    claimed = sum(len(e["gates"]) for e in man["modules"])
    known = sum(len(e["gates"]) for e in man["modules"] if e["kind"] in KNOWN_KINDS)
    return Fraction(claimed, total), Fraction(known, total)
