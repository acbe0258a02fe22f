"""Functional-unit graph parsing and motion-node statistics.

The file grammar is line oriented: ``O<TAB>label`` starts an object node,
optional ``S<TAB>state`` lines attach states to it, ``M<TAB>label`` is the
unit's single motion node, and a line of ``//`` terminates the unit. Object
lines before the motion line are the unit's inputs, lines after it are the
outputs.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .taxonomy import MotionCode, MotionLexicon, UnknownLabelError, normalize_label

__all__ = [
    "ObjectNode",
    "MotionNode",
    "FunctionalUnit",
    "FoonGraph",
    "NodeCounts",
    "FrequencyRow",
    "FrequencyReport",
    "FoonParseError",
    "parse_foon",
    "node_counts",
    "motion_frequency",
    "top_k_coverage",
    "annotate_motions",
]


class FoonParseError(ValueError):
    """Malformed graph text; the message carries the line or unit location."""


@dataclass(frozen=True)
class ObjectNode:
    label: str
    states: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.label:
            raise ValueError("object node label must be non-empty")


@dataclass(frozen=True)
class MotionNode:
    label: str
    code: MotionCode | None = None

    def __post_init__(self) -> None:
        if not self.label:
            raise ValueError("motion node label must be non-empty")


@dataclass(frozen=True)
class FunctionalUnit:
    inputs: tuple[ObjectNode, ...]
    motion: MotionNode
    outputs: tuple[ObjectNode, ...]


@dataclass(frozen=True)
class FoonGraph:
    units: tuple[FunctionalUnit, ...] = ()


class NodeCounts(NamedTuple):
    objects: int
    motions: int
    total: int


class FrequencyRow(NamedTuple):
    label: str
    count: int
    share: float


@dataclass(frozen=True)
class FrequencyReport:
    """Motion labels ranked by instance count (ties broken lexicographically)."""

    rows: tuple[FrequencyRow, ...]
    total_motion_nodes: int


def parse_foon(text: str) -> FoonGraph:
    """Parse graph text into a :class:`FoonGraph`.

    Strict: any unrecognized line is an error naming the line number; a unit
    without exactly one motion line, or without input and output objects, is
    an error naming the unit index (1-based). Labels are case-folded and
    whitespace-collapsed.
    """
    units: list[FunctionalUnit] = []
    pending: list[list] = []   # [label, [states]] per object in current unit
    motion_label: str | None = None
    split_at: int | None = None   # number of pending objects that are inputs
    open_unit = False

    def finalize() -> None:
        nonlocal pending, motion_label, split_at, open_unit
        index = len(units) + 1
        if motion_label is None:
            raise FoonParseError(f"unit {index} has no motion line")
        objects = [ObjectNode(label, tuple(states)) for label, states in pending]
        inputs = tuple(objects[:split_at])
        outputs = tuple(objects[split_at:])
        if not inputs:
            raise FoonParseError(f"unit {index} has no input object nodes")
        if not outputs:
            raise FoonParseError(f"unit {index} has no output object nodes")
        units.append(FunctionalUnit(inputs=inputs, motion=MotionNode(motion_label), outputs=outputs))
        pending, motion_label, split_at, open_unit = [], None, None, False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line == "//":
            finalize()
            continue
        open_unit = True
        tag, sep, rest = raw.partition("\t")
        if not sep:
            raise FoonParseError(f"line {lineno}: expected '<tag><TAB><label>' or '//', got {raw!r}")
        tag = tag.strip()
        label = normalize_label(rest)
        if tag == "O":
            if not label:
                raise FoonParseError(f"line {lineno}: object node needs a label")
            pending.append([label, []])
        elif tag == "S":
            if not pending or (split_at is not None and len(pending) == split_at):
                raise FoonParseError(f"line {lineno}: state line without a preceding object node")
            if not label:
                raise FoonParseError(f"line {lineno}: state line needs a value")
            pending[-1][1].append(label)
        elif tag == "M":
            if motion_label is not None:
                raise FoonParseError(f"line {lineno}: unit {len(units) + 1} has more than one motion line")
            if not label:
                raise FoonParseError(f"line {lineno}: motion node needs a label")
            motion_label = label
            split_at = len(pending)
        else:
            raise FoonParseError(f"line {lineno}: unknown node tag {tag!r}")

    if open_unit:
        raise FoonParseError(f"unit {len(units) + 1} is truncated (missing '//' terminator)")
    return FoonGraph(units=tuple(units))


def node_counts(g: FoonGraph) -> NodeCounts:
    """Object / motion node instance counts; the same label counts once per occurrence."""
    objects = sum(len(u.inputs) + len(u.outputs) for u in g.units)
    motions = len(g.units)
    return NodeCounts(objects=objects, motions=motions, total=objects + motions)


def motion_frequency(g: FoonGraph) -> FrequencyReport:
    """Per-label motion instance counts, ranked by count then label."""
    if not g.units:
        raise ValueError("cannot compute motion frequency of an empty graph")
    counts = Counter(u.motion.label for u in g.units)
    total = len(g.units)
    rows = tuple(
        FrequencyRow(label=label, count=count, share=count / total)
        for label, count in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    )
    return FrequencyReport(rows=rows, total_motion_nodes=total)


def top_k_coverage(report: FrequencyReport, k: int) -> float:
    """Fraction of motion nodes covered by the k most frequent labels."""
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    return float(sum(row.share for row in report.rows[:k]))


def annotate_motions(g: FoonGraph, lex: MotionLexicon) -> tuple[FoonGraph, list[str]]:
    """Attach manipulation codes to every motion node the lexicon resolves.

    Returns the annotated graph plus the unresolved labels, once each in
    first-appearance order. Unit structure and counts are untouched.
    """
    unknowns: list[str] = []
    seen: set[str] = set()
    annotated: list[FunctionalUnit] = []
    for unit in g.units:
        label = unit.motion.label
        try:
            code = lex.lookup(label)
        except UnknownLabelError:
            code = None
            if label not in seen:
                seen.add(label)
                unknowns.append(label)
        annotated.append(
            FunctionalUnit(inputs=unit.inputs, motion=MotionNode(label, code), outputs=unit.outputs)
        )
    return FoonGraph(units=tuple(annotated)), unknowns
