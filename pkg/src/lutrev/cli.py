"""Command-line front end: ``lutrev analyze`` and ``lutrev gen``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .boolfn import default_library, load_library
from .model import Config
from .netlist import NetlistError, load_netlist, to_json
from .pipeline import STAGES, analyze

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2


def _stages(text: str) -> tuple[str, ...]:
    stages = tuple(s.strip() for s in text.split(",") if s.strip())
    bad = [s for s in stages if s not in STAGES]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown stage(s) {bad}; choose from {list(STAGES)}")
    return stages


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lutrev", description="Recover word-level RTL from LUT-level netlists.")
    sub = p.add_subparsers(dest="cmd", required=True)

    a = sub.add_parser("analyze", help="analyze a netlist and emit RTL plus a report")
    a.add_argument("--in", dest="input", required=True, help="netlist file")
    a.add_argument("--format", choices=("json", "verilog"), help="input format (default: by extension)")
    a.add_argument("--out-rtl", help="emitted Verilog (default: stdout)")
    a.add_argument("--out-report", help="report JSON")
    a.add_argument("--out-manifest", help="module manifest JSON (default: next to --out-rtl)")
    a.add_argument("--out-figures", help="directory for CSV tables and PNG figures")
    a.add_argument("--stages", type=_stages, default=STAGES, help="comma list of carry,seq,kcut")
    a.add_argument("--k", type=int, default=6)
    a.add_argument("--pure-op-max-support", type=int, default=5)
    a.add_argument("--max-select-nets", type=int, default=2)
    a.add_argument("--max-cuts", type=int)
    a.add_argument("--equiv-exhaustive-bits", type=int, default=20)
    a.add_argument("--equiv-samples", type=int, default=100_000)
    a.add_argument("--lib", help="carry-function library JSON")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--include-timing", action="store_true", help="add per-stage wall time to the report")

    g = sub.add_parser("gen", help="generate a labeled netlist")
    g.add_argument("--kind", required=True,
                   help="adder, subtractor, addsub, comparator:<op>, counter[:down], shiftreg, register, "
                        "bitwise:<fn>, alu:<op,...>, random, or a preset (aes, hilbert, composite)")
    g.add_argument("--width", type=int, default=8)
    g.add_argument("--permuted", action="store_true")
    g.add_argument("--registered", action="store_true")
    g.add_argument("--reset", choices=("R", "S", "CLR", "PRE"))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="netlist JSON")
    g.add_argument("--labels", help="ground-truth labels JSON")
    return p


def _analyze(args) -> int:
    if not 2 <= args.k <= 6:
        raise ValueError("--k must be between 2 and 6")
    cfg = Config(k=args.k, pure_op_max_support=args.pure_op_max_support, max_select_nets=args.max_select_nets,
                 equiv_exhaustive_bits=args.equiv_exhaustive_bits, equiv_samples=args.equiv_samples,
                 max_cuts=args.max_cuts, seed=args.seed, stages=args.stages)
    netlist = load_netlist(args.input, args.format)
    lib = load_library(args.lib) if args.lib else default_library()
    result = analyze(netlist, cfg, lib, include_timing=args.include_timing)
    if args.out_rtl:
        Path(args.out_rtl).write_text(result.rtl)
        manifest = args.out_manifest or str(Path(args.out_rtl).with_suffix(".manifest.json"))
    else:
        sys.stdout.write(result.rtl)
        manifest = args.out_manifest
    if manifest:
        Path(manifest).write_text(result.manifest_json())
    if args.out_report:
        Path(args.out_report).write_text(result.report_json())
    if args.out_figures:
        from .plots import write_figures
        write_figures(result.report, Path(args.out_figures))
    cov = result.report["gate_coverage"]
    print(f"{netlist.name}: {len(result.modules)} modules, module {cov['module_pct']:.2f}%, "
          f"known {cov['known_component_pct']:.2f}%", file=sys.stderr)
    for d in result.diagnostics:
        print(f"note: {d}", file=sys.stderr)
    return EXIT_OK


def _gen(args) -> int:
    from .synthgen import PRESETS, gen, preset
    if args.kind in PRESETS:
        netlist, truth = preset(args.kind, args.seed)
    else:
        opts = {"reset": args.reset} if args.reset else {}
        netlist, truth = gen(args.kind, args.width, args.permuted, args.registered, args.seed, **opts)
    Path(args.out).write_text(to_json(netlist))
    if args.labels:
        Path(args.labels).write_text(truth.to_json() + "\n")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _analyze(args) if args.cmd == "analyze" else _gen(args)
    except (NetlistError, OSError, ValueError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # invariant failures and bugs
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
