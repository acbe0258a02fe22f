"""Force/torque trial ingestion, sample pooling, standardization, and
synthetic sample generation from known mixtures (the oracle data path).

Trial CSVs carry the header ``t,fx,fy,fz,tx,ty,tz``; the motion label and
recording variant come from the ``<label>_<variant>.csv`` filename
convention, or from an optional leading ``# label=... variant=...`` comment.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .gmm import GaussianMixture, sample_mixture

__all__ = [
    "CHANNELS",
    "FORCE_CHANNELS",
    "ForceTrial",
    "SampleMatrix",
    "StandardizeTransform",
    "TrialFormatError",
    "load_trials",
    "pool_samples",
    "standardize",
    "synth_generate",
    "default_channel_names",
    "write_samples_csv",
    "load_sample_csv",
]

CHANNELS = ("fx", "fy", "fz", "tx", "ty", "tz")
FORCE_CHANNELS = ("fx", "fy", "fz")
_HEADER = ("t",) + CHANNELS


class TrialFormatError(ValueError):
    """Malformed trial CSV; the message carries the file and data row."""


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ForceTrial:
    """One recorded demonstration: timestamps plus 6-axis force/torque rows."""

    motion_label: str
    variant: str
    t: np.ndarray            # (n,), strictly increasing seconds
    values: np.ndarray       # (n, 6) in CHANNELS order

    def __post_init__(self) -> None:
        t = _frozen(self.t)
        values = _frozen(self.values)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", values)
        if not self.motion_label:
            raise ValueError("trial needs a motion label")
        if t.ndim != 1 or values.shape != (t.shape[0], len(CHANNELS)):
            raise ValueError("trial arrays must be t (n,) and values (n, 6)")
        if t.shape[0] < 2:
            raise ValueError("a trial needs at least 2 samples")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(values))):
            raise ValueError("trial samples must be finite")
        if np.any(np.diff(t) <= 0):
            raise ValueError("trial timestamps must be strictly increasing")

    def __len__(self) -> int:
        return self.t.shape[0]


@dataclass(frozen=True)
class SampleMatrix:
    """Pooled samples: an (n, d) matrix with named channels."""

    rows: np.ndarray
    channels: tuple[str, ...]

    def __post_init__(self) -> None:
        rows = _frozen(self.rows)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "channels", tuple(self.channels))
        if rows.ndim != 2 or rows.shape[0] < 1:
            raise ValueError("sample matrix must be 2-D with at least one row")
        if rows.shape[1] != len(self.channels):
            raise ValueError(
                f"{rows.shape[1]} columns but {len(self.channels)} channel names"
            )
        if len(self.channels) < 1:
            raise ValueError("sample matrix needs at least one channel")
        if not np.all(np.isfinite(rows)):
            raise ValueError("sample matrix entries must be finite")

    @property
    def dims(self) -> int:
        return self.rows.shape[1]

    def __len__(self) -> int:
        return self.rows.shape[0]


def _parse_metadata(line: str) -> dict[str, str]:
    meta = {}
    for token in line.lstrip("#").split():
        key, sep, value = token.partition("=")
        if sep:
            meta[key.strip()] = value.strip()
    return meta


def _label_variant_from_name(path: Path) -> tuple[str, str]:
    stem = path.stem
    if "_" in stem:
        label, _, variant = stem.rpartition("_")
        return label, variant
    return stem, "v0"


def _load_trial_file(path: Path) -> ForceTrial:
    label, variant = _label_variant_from_name(path)
    with open(path, encoding="utf-8", newline="") as fh:
        first = fh.readline()
        if first.startswith("#"):
            meta = _parse_metadata(first)
            label = meta.get("label", label)
            variant = meta.get("variant", variant)
            first = fh.readline()
        header = tuple(h.strip() for h in first.strip().split(","))
        if header != _HEADER:
            missing = [c for c in _HEADER if c not in header]
            if missing:
                raise TrialFormatError(f"{path}: missing column(s) {', '.join(missing)}")
            raise TrialFormatError(f"{path}: header must be {','.join(_HEADER)}")
        t: list[float] = []
        rows: list[list[float]] = []
        for rownum, record in enumerate(csv.reader(fh), start=1):
            if not record or (len(record) == 1 and not record[0].strip()):
                continue
            if len(record) != len(_HEADER):
                raise TrialFormatError(
                    f"{path}: data row {rownum} has {len(record)} fields, expected {len(_HEADER)}"
                )
            try:
                values = [float(v) for v in record]
            except ValueError as exc:
                raise TrialFormatError(f"{path}: data row {rownum}: {exc}") from exc
            for name, v in zip(_HEADER, values):
                if not math.isfinite(v):
                    raise TrialFormatError(
                        f"{path}: non-finite value at data row {rownum}, column {name}"
                    )
            if t and values[0] <= t[-1]:
                raise TrialFormatError(
                    f"{path}: non-monotone timestamp at data row {rownum}"
                )
            t.append(values[0])
            rows.append(values[1:])
    if len(rows) < 2:
        raise TrialFormatError(f"{path}: a trial needs at least 2 data rows")
    return ForceTrial(motion_label=label, variant=variant, t=np.array(t), values=np.array(rows))


def load_trials(path) -> list[ForceTrial]:
    """Load one trial per CSV file; ``path`` may be a file or a directory."""
    p = Path(path)
    if p.is_dir():
        files = sorted(p.glob("*.csv"))
        if not files:
            raise TrialFormatError(f"no trial CSV files under {p}")
    else:
        files = [p]
    return [_load_trial_file(f) for f in files]


def pool_samples(
    trials: Sequence[ForceTrial],
    channels: Sequence[str] = FORCE_CHANNELS,
    allow_mixed_labels: bool = False,
) -> SampleMatrix:
    """Stack trial samples into one matrix, trial order then time order.

    All trials must share a motion label unless ``allow_mixed_labels``; the
    channel subset must come from the 6-axis channel set.
    """
    if not trials:
        raise ValueError("need at least one trial to pool")
    channels = tuple(channels)
    unknown = [c for c in channels if c not in CHANNELS]
    if unknown:
        raise ValueError(f"unknown channels: {', '.join(unknown)}")
    if not channels:
        raise ValueError("need at least one channel")
    labels = {tr.motion_label for tr in trials}
    if len(labels) > 1 and not allow_mixed_labels:
        raise ValueError(
            f"trials span multiple motion labels ({', '.join(sorted(labels))}); "
            "pass allow_mixed_labels=True to pool across labels"
        )
    idx = [CHANNELS.index(c) for c in channels]
    rows = np.vstack([tr.values[:, idx] for tr in trials])
    return SampleMatrix(rows=rows, channels=channels)


@dataclass(frozen=True)
class StandardizeTransform:
    """Applied per-channel affine transform; invertible via :meth:`invert`."""

    policy: str
    means: np.ndarray
    scales: np.ndarray
    constant_channels: tuple[str, ...] = ()

    def apply(self, m: SampleMatrix) -> SampleMatrix:
        return SampleMatrix((m.rows - self.means) / self.scales, m.channels)

    def invert(self, m: SampleMatrix) -> SampleMatrix:
        return SampleMatrix(m.rows * self.scales + self.means, m.channels)


def standardize(m: SampleMatrix, policy: str = "none") -> tuple[SampleMatrix, StandardizeTransform]:
    """Standardize samples per channel.

    Policy "none" is the identity. Policy "zscore" centers and scales each
    channel to mean 0 / variance 1; constant channels are left untouched and
    flagged in the returned transform.
    """
    if policy == "none":
        transform = StandardizeTransform(
            policy="none", means=np.zeros(m.dims), scales=np.ones(m.dims)
        )
        return m, transform
    if policy != "zscore":
        raise ValueError(f"unknown standardization policy {policy!r}")
    if len(m) < 2:
        raise ValueError("z-score standardization needs at least 2 rows")
    means = m.rows.mean(axis=0)
    sds = m.rows.std(axis=0)
    constant = sds == 0.0
    means = np.where(constant, 0.0, means)
    scales = np.where(constant, 1.0, sds)
    transform = StandardizeTransform(
        policy="zscore",
        means=means,
        scales=scales,
        constant_channels=tuple(c for c, flag in zip(m.channels, constant) if flag),
    )
    return transform.apply(m), transform


def default_channel_names(d: int) -> tuple[str, ...]:
    """Force channels for d=3, the full 6-axis set for d=6, generic names otherwise."""
    if d == 3:
        return FORCE_CHANNELS
    if d == 6:
        return CHANNELS
    return tuple(f"x{i}" for i in range(d))


def synth_generate(
    mixture: GaussianMixture, n: int, seed: int, return_assignments: bool = False
):
    """Draw n samples from a known mixture into a :class:`SampleMatrix`.

    Deterministic for a fixed seed. ``return_assignments`` additionally
    yields the generating component index per row (for oracle checks).
    """
    X, assignments = sample_mixture(mixture, n, seed)
    m = SampleMatrix(rows=X, channels=default_channel_names(mixture.dims))
    if return_assignments:
        return m, assignments
    return m


def write_samples_csv(m: SampleMatrix, path, rate_hz: float = 100.0) -> None:
    """Write samples as a trial-shaped CSV with synthetic timestamps."""
    if rate_hz <= 0:
        raise ValueError("sample rate must be positive")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(("t",) + m.channels) + "\n")
        for i, row in enumerate(m.rows):
            cells = [repr(i / rate_hz)] + [repr(float(v)) for v in row]
            fh.write(",".join(cells) + "\n")


def load_sample_csv(path, channels: Sequence[str] | None = None) -> SampleMatrix:
    """Read a samples CSV (any header; a ``t`` column is dropped).

    ``channels`` selects a named subset; default keeps every non-time column.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        first = fh.readline()
        if first.startswith("#"):
            first = fh.readline()
        header = [h.strip() for h in first.strip().split(",")]
        if not header or not any(header):
            raise TrialFormatError(f"{path}: missing header row")
        keep_names = [h for h in header if h != "t"]
        if channels is not None:
            missing = [c for c in channels if c not in header]
            if missing:
                raise TrialFormatError(f"{path}: missing column(s) {', '.join(missing)}")
            keep_names = list(channels)
        keep_idx = [header.index(name) for name in keep_names]
        rows: list[list[float]] = []
        for rownum, record in enumerate(csv.reader(fh), start=1):
            if not record or (len(record) == 1 and not record[0].strip()):
                continue
            if len(record) != len(header):
                raise TrialFormatError(
                    f"{path}: data row {rownum} has {len(record)} fields, expected {len(header)}"
                )
            try:
                values = [float(record[i]) for i in keep_idx]
            except ValueError as exc:
                raise TrialFormatError(f"{path}: data row {rownum}: {exc}") from exc
            if not all(math.isfinite(v) for v in values):
                raise TrialFormatError(f"{path}: non-finite value at data row {rownum}")
            rows.append(values)
    if not rows:
        raise TrialFormatError(f"{path}: no data rows")
    return SampleMatrix(rows=np.array(rows), channels=tuple(keep_names))
