"""8-bit manipulation codes: parsing, validation, distances, and the motion lexicon.

A manipulation code packs five motion attributes into eight bits, left to
right: contact (1 bit), engagement (1 bit), engagement subclass (2 bits),
prismatic (1 bit), revolute (1 bit), contact duration (1 bit) and manual
operation (1 bit). The lexicon maps motion labels and their aliases onto
codes, so differently-worded labels for the same mechanical motion
consolidate to one group.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Iterator, Mapping

__all__ = [
    "MotionCode",
    "ValidationResult",
    "CodeDistanceWeights",
    "LexiconEntry",
    "MotionLexicon",
    "ConsolidationResult",
    "CodeFormatError",
    "UnknownLabelError",
    "AmbiguousLabelError",
    "parse_code",
    "render_code",
    "validate",
    "enumerate_legal_codes",
    "code_distance",
    "lookup",
    "consolidate",
    "describe_code",
    "load_lexicon",
    "normalize_label",
    "strip_qualifier",
    "LEXICON_VARIANTS",
]

# Subclass bit pairs that are defined for each engagement type. Rigid
# engagement admits only "stationary" (00) and "moving" (11); soft engagement
# admits "admitting/penetrative" (00) plus the two deforming kinds (10, 11).
RIGID_SUBCLASSES = {0b00: "stationary", 0b11: "moving"}
SOFT_SUBCLASSES = {
    0b00: "admitting/penetrative",
    0b10: "manipulator-deforming",
    0b11: "manipulatee-deforming",
}

LEXICON_VARIANTS = ("verbatim", "prose-corrected")

_SEED_RESOURCE = "data/table_lexicon.json"
_WS_RE = re.compile(r"\s+")
_QUALIFIER_RE = re.compile(r"\s*\([^)]*\)")


class CodeFormatError(ValueError):
    """Raised for inputs that are not 8-character binary strings."""


class UnknownLabelError(LookupError):
    """Raised when a label resolves to no lexicon entry.

    Carries the nearest known labels (by edit distance) as suggestions.
    """

    def __init__(self, label: str, suggestions: Iterable[str] = ()):
        self.label = label
        self.suggestions = tuple(suggestions)
        msg = f"unknown motion label {label!r}"
        if self.suggestions:
            msg += "; nearest known labels: " + ", ".join(self.suggestions)
        super().__init__(msg)


class AmbiguousLabelError(UnknownLabelError):
    """Raised when a qualifier-stripped label matches entries with different codes."""

    def __init__(self, label: str, candidates: Iterable[str]):
        self.label = label
        self.suggestions = tuple(candidates)
        LookupError.__init__(
            self,
            f"label {label!r} is ambiguous; qualify it as one of: "
            + ", ".join(self.suggestions),
        )


@dataclass(frozen=True, order=True)
class MotionCode:
    """Structured view of one 8-bit manipulation code.

    Fields hold small ints so that illegal-but-parseable codes are still
    representable; legality is a separate concern (see :func:`validate`).
    The dataclass ordering coincides with ascending bit-string order.
    """

    contact: int = 0      # 0 non-contact, 1 contact
    engagement: int = 0   # 0 rigid, 1 soft
    subclass: int = 0     # 2-bit field, 0..3
    prismatic: int = 0
    revolute: int = 0
    duration: int = 0     # 0 discontinuous, 1 continuous
    manual: int = 0       # 0 unimanual, 1 bimanual

    def __post_init__(self) -> None:
        for name in ("contact", "engagement", "prismatic", "revolute", "duration", "manual"):
            if getattr(self, name) not in (0, 1):
                raise ValueError(f"{name} must be 0 or 1, got {getattr(self, name)!r}")
        if self.subclass not in (0, 1, 2, 3):
            raise ValueError(f"subclass must be a 2-bit value 0..3, got {self.subclass!r}")

    def bits(self) -> tuple[int, ...]:
        """The eight bits in wire order."""
        return (
            self.contact,
            self.engagement,
            (self.subclass >> 1) & 1,
            self.subclass & 1,
            self.prismatic,
            self.revolute,
            self.duration,
            self.manual,
        )

    def __str__(self) -> str:
        return render_code(self)


def parse_code(text: str) -> MotionCode:
    """Parse an 8-character binary string into a :class:`MotionCode`.

    Purely structural: does not check legality of the bit combination.
    Raises :class:`CodeFormatError` for wrong length or non-binary characters.
    """
    if len(text) != 8:
        raise CodeFormatError(f"manipulation code must be exactly 8 characters, got {text!r}")
    if any(ch not in "01" for ch in text):
        raise CodeFormatError(f"manipulation code must contain only 0 and 1, got {text!r}")
    b = [int(ch) for ch in text]
    return MotionCode(
        contact=b[0],
        engagement=b[1],
        subclass=(b[2] << 1) | b[3],
        prismatic=b[4],
        revolute=b[5],
        duration=b[6],
        manual=b[7],
    )


def render_code(code: MotionCode) -> str:
    """Render a code back to its 8-character binary string."""
    return "".join(str(b) for b in code.bits())


@dataclass(frozen=True)
class ValidationResult:
    """Outcome of a legality check: violations make a code illegal, warnings do not."""

    ok: bool
    violations: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.ok


def validate(code: MotionCode) -> ValidationResult:
    """Check a code against the attribute rules.

    Non-contact codes must zero the engagement, subclass and duration bits.
    Contact codes must use a defined subclass for their engagement type.
    A 00 trajectory (neither prismatic nor revolute) is legal but flagged.
    """
    violations: list[str] = []
    warnings: list[str] = []
    if code.contact == 0:
        if code.engagement:
            violations.append("engagement: non-contact codes must leave the engagement bit 0")
        if code.subclass:
            violations.append("subclass: non-contact codes must leave both subclass bits 0")
        if code.duration:
            violations.append("duration: contact duration is undefined for non-contact codes")
    elif code.engagement == 0:
        if code.subclass not in RIGID_SUBCLASSES:
            violations.append(
                f"subclass: {code.subclass:02b} is not a rigid engagement subclass (expected 00 or 11)"
            )
    else:
        if code.subclass not in SOFT_SUBCLASSES:
            violations.append(
                f"subclass: {code.subclass:02b} is not a soft engagement subclass (expected 00, 10 or 11)"
            )
    if code.prismatic == 0 and code.revolute == 0:
        warnings.append("trajectory: neither prismatic nor revolute bit is set")
    return ValidationResult(ok=not violations, violations=tuple(violations), warnings=tuple(warnings))


def enumerate_legal_codes() -> tuple[MotionCode, ...]:
    """Every code accepted by :func:`validate`, in ascending bit-string order."""
    out = []
    for value in range(256):
        code = parse_code(format(value, "08b"))
        if validate(code).ok:
            out.append(code)
    return tuple(out)


def describe_code(code: MotionCode) -> dict[str, str]:
    """Human-readable value of each attribute, keyed by attribute name."""
    if code.contact == 0:
        subclass = "not applicable (non-contact)" if code.subclass == 0 else f"{code.subclass:02b} (illegal for non-contact)"
        engagement = "not applicable (non-contact)" if code.engagement == 0 else "soft (illegal for non-contact)"
        duration = "not applicable (non-contact)" if code.duration == 0 else "continuous (illegal for non-contact)"
    else:
        table = SOFT_SUBCLASSES if code.engagement else RIGID_SUBCLASSES
        subclass = table.get(code.subclass, f"{code.subclass:02b} (not a defined subclass)")
        engagement = "soft" if code.engagement else "rigid"
        duration = "continuous" if code.duration else "discontinuous"
    return {
        "contact": "contact" if code.contact else "non-contact",
        "engagement": engagement,
        "subclass": subclass,
        "prismatic": "prismatic" if code.prismatic else "non-prismatic",
        "revolute": "revolute" if code.revolute else "non-revolute",
        "duration": duration,
        "manual": "bimanual" if code.manual else "unimanual",
    }


@dataclass(frozen=True)
class CodeDistanceWeights:
    """Nonnegative per-bit weights for the weighted Hamming distance."""

    weights: tuple[float, ...] = (1.0,) * 8

    def __post_init__(self) -> None:
        if len(self.weights) != 8:
            raise ValueError(f"expected 8 weights, got {len(self.weights)}")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be nonnegative")
        if not any(w > 0 for w in self.weights):
            raise ValueError("at least one weight must be positive")


UNIT_WEIGHTS = CodeDistanceWeights()


def code_distance(a: MotionCode, b: MotionCode, weights: CodeDistanceWeights | None = None) -> float:
    """Weighted Hamming distance over the 8 bit positions (default unit weights)."""
    w = (weights or UNIT_WEIGHTS).weights
    return float(sum(wi for wi, ai, bi in zip(w, a.bits(), b.bits()) if ai != bi))


def normalize_label(label: str) -> str:
    """Case-fold, trim and collapse internal whitespace."""
    return _WS_RE.sub(" ", label.casefold().strip())


def strip_qualifier(label: str) -> str:
    """Drop parenthetical qualifiers, e.g. 'roll (bimanual)' -> 'roll'."""
    return _WS_RE.sub(" ", _QUALIFIER_RE.sub("", label)).strip()


def _edit_distance(a: str, b: str) -> int:
    # Small Levenshtein DP; labels are short so O(len(a)*len(b)) is fine.
    if a == b:
        return 0
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


@dataclass(frozen=True)
class LexiconEntry:
    """One lexicon row: a primary label, its aliases, and their shared code."""

    label: str
    aliases: tuple[str, ...]
    code: MotionCode
    source: str = "user"  # "builtin" for the bundled seed

    def names(self) -> tuple[str, ...]:
        return (self.label, *self.aliases)


class MotionLexicon:
    """Label/alias to code mapping with normalized and qualifier-stripped lookup.

    Every normalized label or alias must resolve to exactly one code. A
    qualifier-stripped form ("twist" for "twist (open/close container)")
    resolves too, but only when unambiguous.
    """

    def __init__(self, entries: Iterable[LexiconEntry]):
        self.entries: tuple[LexiconEntry, ...] = tuple(entries)
        if not self.entries:
            raise ValueError("a lexicon needs at least one entry")
        self._exact: dict[str, LexiconEntry] = {}
        self._stripped: dict[str, list[LexiconEntry]] = {}
        for entry in self.entries:
            for name in entry.names():
                key = normalize_label(name)
                if not key:
                    raise ValueError("lexicon labels must be non-empty")
                if key in self._exact:
                    raise ValueError(f"label {name!r} appears more than once in the lexicon")
                self._exact[key] = entry
                stripped = strip_qualifier(key)
                if stripped and stripped != key:
                    self._stripped.setdefault(stripped, []).append(entry)

    def __iter__(self) -> Iterator[LexiconEntry]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def codes(self) -> tuple[MotionCode, ...]:
        """Distinct codes in entry order."""
        seen: dict[MotionCode, None] = {}
        for entry in self.entries:
            seen.setdefault(entry.code, None)
        return tuple(seen)

    def known_names(self) -> tuple[str, ...]:
        return tuple(sorted(self._exact))

    def lookup(self, label: str) -> MotionCode:
        """Resolve a label or alias to its code.

        Raises :class:`UnknownLabelError` (with nearest-label suggestions) when
        nothing matches, or :class:`AmbiguousLabelError` when only a stripped
        qualifier matches several differently-coded entries.
        """
        key = normalize_label(label)
        entry = self._exact.get(key)
        if entry is not None:
            return entry.code
        stripped = strip_qualifier(key)
        candidates = self._stripped.get(stripped or key, [])
        codes = {c.code for c in candidates}
        if len(codes) == 1:
            return candidates[0].code
        if len(codes) > 1:
            names = sorted(n for c in candidates for n in c.names() if strip_qualifier(normalize_label(n)) == stripped)
            raise AmbiguousLabelError(label, names)
        ranked = sorted(self._exact, key=lambda name: (_edit_distance(key, name), name))
        raise UnknownLabelError(label, ranked[:3])


def lookup(label: str, lex: MotionLexicon) -> MotionCode:
    """Resolve a motion label (or alias) to its manipulation code."""
    return lex.lookup(label)


@dataclass(frozen=True)
class ConsolidationResult:
    """Input labels partitioned into per-code groups, plus unresolvable labels."""

    groups: dict[str, tuple[str, ...]] = field(default_factory=dict)  # code string -> labels
    unknowns: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "groups": {code: list(labels) for code, labels in self.groups.items()},
            "unknowns": list(self.unknowns),
        }


def consolidate(labels: Iterable[str], lex: MotionLexicon) -> ConsolidationResult:
    """Group labels by manipulation code, consolidating aliases.

    Labels are deduplicated after normalization; the first-seen spelling is
    kept. Unknown or ambiguous labels land in ``unknowns``.
    """
    groups: dict[str, list[str]] = {}
    unknowns: list[str] = []
    seen: set[str] = set()
    for label in labels:
        key = normalize_label(label)
        if key in seen:
            continue
        seen.add(key)
        try:
            code = lex.lookup(label)
        except UnknownLabelError:
            unknowns.append(label)
            continue
        groups.setdefault(render_code(code), []).append(label)
    return ConsolidationResult(
        groups={code: tuple(ls) for code, ls in groups.items()},
        unknowns=tuple(unknowns),
    )


def _entry_from_json(obj: Mapping, source: str) -> LexiconEntry:
    try:
        label = obj["label"]
        code = obj["code"]
    except KeyError as exc:
        raise ValueError(f"lexicon entry missing required field {exc}") from exc
    aliases = tuple(obj.get("aliases", ()))
    return LexiconEntry(label=label, aliases=aliases, code=parse_code(code), source=source)


def _swap_trajectory(code: MotionCode) -> MotionCode:
    return MotionCode(
        contact=code.contact,
        engagement=code.engagement,
        subclass=code.subclass,
        prismatic=code.revolute,
        revolute=code.prismatic,
        duration=code.duration,
        manual=code.manual,
    )


def _apply_variant(entries: list[LexiconEntry], variant: str) -> list[LexiconEntry]:
    if variant == "verbatim":
        return entries
    if variant != "prose-corrected":
        raise ValueError(f"unknown lexicon variant {variant!r}; expected one of {LEXICON_VARIANTS}")
    # The two non-contact rows carry exactly one trajectory bit each; the
    # alternative reading exchanges prismatic and revolute on those rows.
    out = []
    for entry in entries:
        code = entry.code
        if code.contact == 0 and code.prismatic != code.revolute:
            code = _swap_trajectory(code)
        out.append(LexiconEntry(entry.label, entry.aliases, code, entry.source))
    return out


def load_lexicon(path=None, variant: str = "verbatim") -> MotionLexicon:
    """Load a lexicon from a JSON file, or the bundled seed when ``path`` is None.

    ``variant`` selects how the two non-contact rows are read: "verbatim"
    keeps the codes as stored, "prose-corrected" swaps their prismatic and
    revolute bits (the alternative reading; see README).
    """
    if path is None:
        text = resources.files(__package__).joinpath(_SEED_RESOURCE).read_text(encoding="utf-8")
        source = "builtin"
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        source = "user"
    raw = json.loads(text)
    if not isinstance(raw, list):
        raise ValueError("lexicon JSON must be an array of entries")
    entries = [_entry_from_json(obj, source) for obj in raw]
    bad = [e.label for e in entries if not validate(e.code).ok]
    if bad:
        raise ValueError(f"lexicon entries with illegal codes: {', '.join(bad)}")
    return MotionLexicon(_apply_variant(entries, variant))


def save_lexicon(lex: MotionLexicon, path) -> None:
    """Write a lexicon as the interchange JSON array."""
    payload = [
        {"label": e.label, "aliases": list(e.aliases), "code": render_code(e.code)}
        for e in lex.entries
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
