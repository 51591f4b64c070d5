"""CSV tables and PNG figures rendered from an analysis report."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

CARRY_COLUMNS = ("gates", "chains", "add", "sub", "comp", "alu", "add_sub", "detected_operations_pct",
                 "converted_to_rtl_pct", "module_coverage_pct", "known_operation_coverage_pct")
SEQ_COLUMNS = ("ffs", "registers", "counters", "shifters", "known_seq_coverage_pct")
COVERAGE_COLUMNS = ("gates", "claimed", "known", "module_pct", "known_component_pct")
MODULE_COLUMNS = ("instance", "stage", "kind", "op", "width", "gates", "verified")


def _write_row(path: Path, columns, row: dict, design: str) -> None:
    with path.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(("design",) + tuple(columns))
        w.writerow([design] + [row[c] for c in columns])


def write_tables(report: dict, out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    design = report["design"]
    paths = [out_dir / "carry_operations.csv", out_dir / "sequential.csv", out_dir / "gate_coverage.csv",
             out_dir / "modules.csv"]
    _write_row(paths[0], CARRY_COLUMNS, report["carry_operations"], design)
    _write_row(paths[1], SEQ_COLUMNS, report["sequential"], design)
    _write_row(paths[2], COVERAGE_COLUMNS, report["gate_coverage"], design)
    with paths[3].open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(MODULE_COLUMNS)
        for stage in ("carry", "alu", "seq", "kcut"):
            for m in report["stages"].get(stage, []):
                w.writerow([m["instance"], m["stage"], m["kind"], m["op"] or "", m["width"], m["gates"],
                            m.get("verified", "")])
    return paths


def _save(fig, path: Path) -> None:
    # fixed metadata keeps the PNG bytes reproducible across runs
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)


def plot_coverage(report: dict, path: Path) -> Path:
    cov = report["gate_coverage"]
    carry = report["carry_operations"]
    labels = ["carry module", "carry known", "module", "known component"]
    values = [carry["module_coverage_pct"], carry["known_operation_coverage_pct"], cov["module_pct"],
              cov["known_component_pct"]]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    bars = ax.bar(labels, values, color=["#9ecae1", "#3182bd", "#a1d99b", "#31a354"])
    ax.bar_label(bars, fmt="%.2f")
    ax.set_ylim(0, 110)
    ax.set_ylabel("gate coverage (%)")
    ax.set_title(f"{report['design']}: {cov['gates']} gates")
    fig.tight_layout()
    _save(fig, path)
    return path


def plot_kinds(report: dict, path: Path) -> Path:
    counts: dict[str, int] = {}
    gates: dict[str, int] = {}
    for stage in ("carry", "alu", "seq", "kcut"):
        for m in report["stages"].get(stage, []):
            counts[m["kind"]] = counts.get(m["kind"], 0) + 1
            gates[m["kind"]] = gates.get(m["kind"], 0) + m["gates"]
    kinds = sorted(counts)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    if kinds:
        bars = ax.barh(kinds, [gates[k] for k in kinds], color="#6baed6")
        ax.bar_label(bars, labels=[f"{counts[k]} mod." for k in kinds], padding=3)
    ax.set_xlabel("claimed gates")
    ax.set_title("recovered modules by kind")
    fig.tight_layout()
    _save(fig, path)
    return path


def write_figures(report: dict, out_dir: Path) -> list[Path]:
    """Write all CSV tables and PNG figures for one report; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = write_tables(report, out_dir)
    paths.append(plot_coverage(report, out_dir / "coverage.png"))
    paths.append(plot_kinds(report, out_dir / "module_kinds.png"))
    return paths
