"""Pairwise motion divergence matrices, cluster-consistency metrics against
the code taxonomy, and CSV/PGM export."""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from scipy.stats import rankdata

from .gmm import GaussianMixture, symmetric_divergence_flagged
from .taxonomy import MotionCode, code_distance

__all__ = [
    "DivergenceMatrix",
    "PairRecord",
    "ConsistencyReport",
    "divergence_matrix",
    "cluster_consistency",
    "rank_correlation",
    "export_matrix_csv",
    "import_matrix_csv",
    "export_heatmap",
]


@dataclass(frozen=True)
class DivergenceMatrix:
    """Symmetric nonnegative label-by-label divergence values, zero diagonal."""

    labels: tuple[str, ...]
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        labels = tuple(self.labels)
        values = np.array(self.values, dtype=np.float64)
        values.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "values", values)
        n = len(labels)
        if len(set(labels)) != n:
            raise ValueError("matrix labels must be distinct")
        if values.shape != (n, n):
            raise ValueError(f"values must be {n}x{n}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("divergence values must be finite")
        if np.any(values < 0):
            raise ValueError("divergence values must be nonnegative")
        if not np.array_equal(values, values.T):
            raise ValueError("divergence matrix must be exactly symmetric")
        if np.any(np.diagonal(values) != 0.0):
            raise ValueError("divergence matrix diagonal must be exactly zero")

    def __len__(self) -> int:
        return len(self.labels)

    def value(self, a: str, b: str) -> float:
        return float(self.values[self.labels.index(a), self.labels.index(b)])


def divergence_matrix(
    models: Mapping[str, Sequence[GaussianMixture]],
    threads: int = 1,
    metadata: dict | None = None,
) -> DivergenceMatrix:
    """Mean symmetric divergence between every pair of motion labels.

    ``models`` maps each label to the mixtures fitted to its recording
    variants; an off-diagonal entry averages the symmetrized divergence over
    all variant pairs of the two labels. Pairs are independent, so they may
    be computed on ``threads`` workers without changing the result.
    """
    labels = tuple(models)
    if len(labels) < 2:
        raise ValueError("need at least 2 motion labels")
    groups = {label: tuple(models[label]) for label in labels}
    for label, mixtures in groups.items():
        if not mixtures:
            raise ValueError(f"label {label!r} has no fitted models")
    dims = {g.dims for ms in groups.values() for g in ms}
    if len(dims) != 1:
        raise ValueError(f"all models must share dimensionality, got {sorted(dims)}")

    n = len(labels)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]

    def entry(pair: tuple[int, int]) -> tuple[float, bool]:
        i, j = pair
        vals = []
        clamped = False
        for f in groups[labels[i]]:
            for g in groups[labels[j]]:
                v, flag = symmetric_divergence_flagged(f, g)
                vals.append(v)
                clamped = clamped or flag
        return float(np.mean(vals)), clamped

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(entry, pairs))
    else:
        results = [entry(p) for p in pairs]

    values = np.zeros((n, n))
    clamped_pairs: list[list[str]] = []
    for (i, j), (v, clamped) in zip(pairs, results):
        values[i, j] = v
        values[j, i] = v
        if clamped:
            clamped_pairs.append([labels[i], labels[j]])
    meta = dict(metadata or {})
    meta["variant_counts"] = {label: len(ms) for label, ms in groups.items()}
    if clamped_pairs:
        meta["clamped_pairs"] = clamped_pairs
    return DivergenceMatrix(labels=labels, values=values, metadata=meta)


class PairRecord(NamedTuple):
    label_a: str
    label_b: str
    divergence: float
    same_code: bool


@dataclass(frozen=True)
class ConsistencyReport:
    """How well equal-code groups line up with low pairwise divergence."""

    pairs: tuple[PairRecord, ...]
    intra_mean: float | None
    inter_mean: float | None
    ratio: float | None
    nn_agreement: float
    rank_correlation: float | None

    def to_json(self) -> dict:
        return {
            "intra_mean": self.intra_mean,
            "inter_mean": self.inter_mean,
            "ratio": self.ratio,
            "nn_agreement": self.nn_agreement,
            "rank_correlation": self.rank_correlation,
            "pairs": [
                {
                    "label_a": p.label_a,
                    "label_b": p.label_b,
                    "divergence": p.divergence,
                    "same_code": p.same_code,
                }
                for p in self.pairs
            ],
        }


def rank_correlation(code_dist: Sequence[float], divergences: Sequence[float]) -> float | None:
    """Spearman correlation over paired lists, average ranks for ties.

    Returns None when either list has zero variance; raises for fewer than
    3 pairs or mismatched lengths.
    """
    xs = np.asarray(code_dist, dtype=np.float64)
    ys = np.asarray(divergences, dtype=np.float64)
    if xs.ndim != 1 or xs.shape != ys.shape:
        raise ValueError("pair lists must be 1-D and the same length")
    if xs.size < 3:
        raise ValueError(f"need at least 3 pairs, got {xs.size}")
    rx = rankdata(xs)
    ry = rankdata(ys)
    if np.ptp(rx) == 0 or np.ptp(ry) == 0:
        return None
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    return float((rx @ ry) / np.sqrt((rx @ rx) * (ry @ ry)))


def cluster_consistency(m: DivergenceMatrix, codes: Mapping[str, MotionCode]) -> ConsistencyReport:
    """Score taxonomy clusters (equal codes) against the divergence matrix.

    intra/inter means split the label pairs by code equality; nearest
    neighbors are per-label divergence minima with lexicographic tie-breaks.
    """
    missing = [label for label in m.labels if label not in codes]
    if missing:
        raise ValueError(f"labels without codes: {', '.join(missing)}")
    n = len(m.labels)
    if n < 2:
        raise ValueError("need at least 2 labels")

    pairs: list[PairRecord] = []
    intra: list[float] = []
    inter: list[float] = []
    dist_list: list[float] = []
    div_list: list[float] = []
    for i in range(n):
        for j in range(i + 1, n):
            value = float(m.values[i, j])
            same = codes[m.labels[i]] == codes[m.labels[j]]
            pairs.append(PairRecord(m.labels[i], m.labels[j], value, same))
            (intra if same else inter).append(value)
            dist_list.append(code_distance(codes[m.labels[i]], codes[m.labels[j]]))
            div_list.append(value)

    intra_mean = float(np.mean(intra)) if intra else None
    inter_mean = float(np.mean(inter)) if inter else None
    ratio = None
    if intra_mean is not None and inter_mean is not None and inter_mean > 0:
        ratio = intra_mean / inter_mean

    agreements = 0
    for i in range(n):
        best = None
        for j in range(n):
            if j == i:
                continue
            key = (float(m.values[i, j]), m.labels[j])
            if best is None or key < best:
                best = key
        assert best is not None
        if codes[m.labels[i]] == codes[best[1]]:
            agreements += 1
    nn_agreement = agreements / n

    corr = None
    if len(pairs) >= 3:
        corr = rank_correlation(dist_list, div_list)

    return ConsistencyReport(
        pairs=tuple(pairs),
        intra_mean=intra_mean,
        inter_mean=inter_mean,
        ratio=ratio,
        nn_agreement=nn_agreement,
        rank_correlation=corr,
    )


def export_matrix_csv(m: DivergenceMatrix, path) -> None:
    """Write the full square matrix: header of labels, 9 significant digits."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["label", *m.labels])
        for i, label in enumerate(m.labels):
            writer.writerow([label, *(format(v, ".9g") for v in m.values[i])])


def import_matrix_csv(path) -> DivergenceMatrix:
    """Reload a matrix written by :func:`export_matrix_csv`."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty matrix file") from None
        if not header or header[0] != "label":
            raise ValueError(f"{path}: first header cell must be 'label'")
        labels = tuple(header[1:])
        rows = []
        for record in reader:
            if not record:
                continue
            if len(record) != len(labels) + 1:
                raise ValueError(f"{path}: row {len(rows) + 1} has wrong field count")
            if record[0] != labels[len(rows)]:
                raise ValueError(
                    f"{path}: row label {record[0]!r} does not match header order"
                )
            rows.append([float(v) for v in record[1:]])
        if len(rows) != len(labels):
            raise ValueError(f"{path}: expected {len(labels)} rows, got {len(rows)}")
    return DivergenceMatrix(labels=labels, values=np.array(rows))


def export_heatmap(m: DivergenceMatrix, path) -> None:
    """Render the matrix as a binary 8-bit PGM, one pixel per cell.

    Inverse mapping: the minimum divergence (most similar) is lightest (255),
    the maximum darkest (0); a constant matrix renders uniformly light.
    """
    v = m.values
    lo = float(v.min())
    hi = float(v.max())
    if hi > lo:
        pixels = np.rint(255.0 * (hi - v) / (hi - lo)).astype(np.uint8)
    else:
        pixels = np.full(v.shape, 255, dtype=np.uint8)
    n = len(m.labels)
    header = f"P5\n# divergence heatmap: min -> 255 (light, similar), max -> 0 (dark)\n{n} {n}\n255\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(pixels.tobytes())
