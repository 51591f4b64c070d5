"""Shared records: analysis configuration and the inferred-module record."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

KNOWN_KINDS = ("Adder", "Subtractor", "AddSub", "Comparator", "ALU", "Counter", "ShiftRegister", "Register",
               "BitwiseOp")
CARRY_KIND = {"add": "Adder", "sub": "Subtractor", "gt": "Comparator", "ge": "Comparator", "lt": "Comparator",
              "le": "Comparator", "eq": "Comparator"}


@dataclass(frozen=True)
class Config:
    k: int = 6
    pure_op_max_support: int = 5
    max_select_nets: int = 2
    alu_max_side_inputs: int = 8
    equiv_exhaustive_bits: int = 20
    equiv_samples: int = 100_000
    max_cuts: Optional[int] = None
    seed: int = 0
    stages: tuple[str, ...] = ("carry", "seq", "kcut")


@dataclass
class InferredModule:
    """One recovered word-level operator.

    ``input_words`` and ``output_word`` are LSB-first net lists.  ``comb_output``
    is the combinational result before any absorbed output register; it equals
    ``output_word`` when there is none.  ``op`` names the operation of pure
    kinds, ``op_map`` maps opcode/select values (MSB-first binary strings over
    ``control_nets``) to operations.
    """
    kind: str
    gates: frozenset[str]
    input_words: list[list[str]] = field(default_factory=list)
    output_word: list[str] = field(default_factory=list)
    control_nets: dict[str, str] = field(default_factory=dict)
    source_stage: str = ""
    op: Optional[str] = None
    op_map: dict[str, str] = field(default_factory=dict)
    comb_output: list[str] = field(default_factory=list)
    output_ffs: list[str] = field(default_factory=list)
    words_resolved: bool = True
    verified: Optional[str] = None
    details: dict = field(default_factory=dict)

    @property
    def known(self) -> bool:
        return self.kind in KNOWN_KINDS

    @property
    def width(self) -> int:
        return len(self.output_word)

    def summary(self) -> dict:
        """JSON-friendly view used in reports."""
        d = {"kind": self.kind, "op": self.op, "stage": self.source_stage, "gates": len(self.gates),
             "width": self.width, "input_widths": [len(w) for w in self.input_words],
             "words_resolved": self.words_resolved}
        if self.op_map:
            d["op_map"] = dict(sorted(self.op_map.items()))
        if self.control_nets:
            d["controls"] = dict(self.control_nets)
        if self.verified:
            d["verified"] = self.verified
        return d
