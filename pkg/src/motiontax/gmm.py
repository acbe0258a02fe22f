"""Gaussian mixtures: EM fitting, closed-form Gaussian KL, the variational
KL approximation between mixtures, a Monte Carlo KL oracle, and the
symmetrized divergence used for pairwise motion comparison.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from . import _kernels

__all__ = [
    "GaussianComponent",
    "GaussianMixture",
    "EmConfig",
    "FitReport",
    "McKlResult",
    "DimensionMismatchError",
    "NotPositiveDefiniteError",
    "fit_em",
    "fit_best_bic",
    "bic_score",
    "log_pdf",
    "log_pdf_many",
    "gauss_kl",
    "variational_kl",
    "variational_kl_raw",
    "variational_kl_flagged",
    "mc_kl",
    "symmetric_divergence",
    "symmetric_divergence_flagged",
    "sample_mixture",
    "mixture_to_json",
    "mixture_from_json",
    "load_mixture",
    "save_mixture",
]

COV_SYMMETRY_TOL = 1e-12
WEIGHT_SUM_TOL = 1e-9


class DimensionMismatchError(ValueError):
    """Operands do not share the same dimensionality."""


class NotPositiveDefiniteError(ValueError):
    """Covariance matrix is not symmetric positive-definite."""


def _frozen_array(value, dtype=np.float64) -> np.ndarray:
    arr = np.array(value, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GaussianComponent:
    """One weighted multivariate normal: weight in (0, 1], SPD covariance."""

    weight: float
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "weight", float(self.weight))
        mean = _frozen_array(self.mean)
        cov = _frozen_array(self.cov)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        if not 0.0 < self.weight <= 1.0:
            raise ValueError(f"component weight must be in (0, 1], got {self.weight}")
        if mean.ndim != 1:
            raise ValueError("component mean must be a vector")
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise ValueError(f"covariance must be {d}x{d}, got {cov.shape}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValueError("component parameters must be finite")
        if np.max(np.abs(cov - cov.T)) > COV_SYMMETRY_TOL:
            raise NotPositiveDefiniteError("covariance is not symmetric")
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError("covariance is not positive definite") from exc

    @property
    def dims(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class GaussianMixture:
    """Weighted Gaussian components of a shared dimensionality; weights sum to 1."""

    components: tuple[GaussianComponent, ...]

    def __post_init__(self) -> None:
        components = tuple(self.components)
        object.__setattr__(self, "components", components)
        if not components:
            raise ValueError("a mixture needs at least one component")
        d = components[0].dims
        if any(c.dims != d for c in components):
            raise DimensionMismatchError("all components must share the same dimensionality")
        total = math.fsum(c.weight for c in components)
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"component weights must sum to 1 (got {total})")

    @property
    def dims(self) -> int:
        return self.components[0].dims

    def __len__(self) -> int:
        return len(self.components)


def _pack(g: GaussianMixture):
    """Weights, means, Cholesky factors and log-determinants as dense arrays."""
    k, d = len(g), g.dims
    weights = np.empty(k)
    means = np.empty((k, d))
    chols = np.empty((k, d, d))
    log_dets = np.empty(k)
    for a, comp in enumerate(g.components):
        weights[a] = comp.weight
        means[a] = comp.mean
        chols[a] = np.linalg.cholesky(comp.cov)
        log_dets[a] = 2.0 * np.sum(np.log(np.diag(chols[a])))
    return weights, means, chols, log_dets


def _as_rows(m) -> np.ndarray:
    """Accept a SampleMatrix or a plain (n, d) array."""
    rows = getattr(m, "rows", m)
    X = np.ascontiguousarray(rows, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError("samples must form a 2-D (n, d) matrix")
    return X


def log_pdf_many(g: GaussianMixture, X) -> np.ndarray:
    """Mixture log-density at each row of X, via log-sum-exp over components."""
    X = _as_rows(X)
    if X.shape[1] != g.dims:
        raise DimensionMismatchError(f"expected {g.dims}-dimensional points, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("points must be finite")
    weights, means, chols, log_dets = _pack(g)
    comp = _kernels.component_log_pdfs(X, means, chols, log_dets)
    return _kernels.logsumexp_rows(comp + np.log(weights)[None, :])


def log_pdf(g: GaussianMixture, x) -> float:
    """Mixture log-density at a single point."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        x = x[None]
    if x.ndim != 1 or x.shape[0] != g.dims:
        raise DimensionMismatchError(f"expected a {g.dims}-vector, got shape {x.shape}")
    return float(log_pdf_many(g, x[None, :])[0])


def gauss_kl(a: GaussianComponent, b: GaussianComponent) -> float:
    """Closed-form KL divergence between two Gaussians.

    0.5 * [tr(Sb^-1 Sa) + (mb-ma)^T Sb^-1 (mb-ma) - d + ln(det Sb / det Sa)];
    exactly 0.0 for identical parameters.
    """
    if a.dims != b.dims:
        raise DimensionMismatchError("components differ in dimensionality")
    d = a.dims
    La = np.linalg.cholesky(a.cov)
    Lb = np.linalg.cholesky(b.cov)
    M = solve_triangular(Lb, La, lower=True, check_finite=False)
    trace_term = float(np.sum(M * M))
    y = solve_triangular(Lb, b.mean - a.mean, lower=True, check_finite=False)
    quad = float(y @ y)
    log_det_ratio = 2.0 * float(np.sum(np.log(np.diag(Lb))) - np.sum(np.log(np.diag(La))))
    return 0.5 * (trace_term + quad - d + log_det_ratio)


def variational_kl_raw(f: GaussianMixture, g: GaussianMixture) -> float:
    """Unclamped variational approximation of KL(f || g).

    sum_a pi_a * log[ sum_a' pi_a' exp(-KL(f_a||f_a'))
                    / sum_b  w_b   exp(-KL(f_a||g_b)) ], in log space.
    Can come out slightly negative for closely matched distinct mixtures.
    """
    if f.dims != g.dims:
        raise DimensionMismatchError("mixtures differ in dimensionality")
    log_pi = np.log([c.weight for c in f.components])
    log_w = np.log([c.weight for c in g.components])
    total = 0.0
    for a, fa in enumerate(f.components):
        self_terms = log_pi + np.array([-gauss_kl(fa, fa2) for fa2 in f.components])
        cross_terms = log_w + np.array([-gauss_kl(fa, gb) for gb in g.components])
        total += fa.weight * (logsumexp(self_terms) - logsumexp(cross_terms))
    return float(total)


def variational_kl_flagged(f: GaussianMixture, g: GaussianMixture) -> tuple[float, bool]:
    """Clamped variational KL plus a flag marking that clamping occurred."""
    raw = variational_kl_raw(f, g)
    if raw < 0.0:
        return 0.0, True
    return raw, False


def variational_kl(f: GaussianMixture, g: GaussianMixture) -> float:
    """Variational KL(f || g), clamped to be nonnegative."""
    return variational_kl_flagged(f, g)[0]


def symmetric_divergence_flagged(f: GaussianMixture, g: GaussianMixture) -> tuple[float, bool]:
    fg, flag_fg = variational_kl_flagged(f, g)
    gf, flag_gf = variational_kl_flagged(g, f)
    return 0.5 * (fg + gf), flag_fg or flag_gf


def symmetric_divergence(f: GaussianMixture, g: GaussianMixture) -> float:
    """Average of the two directed variational KL values; symmetric by construction."""
    return symmetric_divergence_flagged(f, g)[0]


class McKlResult(NamedTuple):
    estimate: float
    std_error: float


def mc_kl(f: GaussianMixture, g: GaussianMixture, n: int, seed: int) -> McKlResult:
    """Monte Carlo estimate of KL(f || g) from n draws of f, with standard error.

    Deterministic for a fixed seed. Serves as the sampling-based oracle the
    variational approximation is checked against.
    """
    if n < 1000:
        raise ValueError(f"Monte Carlo KL needs at least 1000 draws, got {n}")
    if f.dims != g.dims:
        raise DimensionMismatchError("mixtures differ in dimensionality")
    X, _ = sample_mixture(f, n, seed)
    diffs = log_pdf_many(f, X) - log_pdf_many(g, X)
    estimate = float(diffs.mean())
    std_error = float(diffs.std(ddof=1) / math.sqrt(n))
    return McKlResult(estimate=estimate, std_error=std_error)


def sample_mixture(g: GaussianMixture, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw n samples; returns (X of shape (n, d), component assignments of shape (n,))."""
    if n < 1:
        raise ValueError(f"sample count must be at least 1, got {n}")
    rng = np.random.default_rng(seed)
    weights, means, chols, _ = _pack(g)
    k, d = means.shape
    assignments = rng.choice(k, size=n, p=weights / weights.sum())
    z = rng.standard_normal((n, d))
    X = np.empty((n, d))
    for a in range(k):
        idx = assignments == a
        X[idx] = means[a] + z[idx] @ chols[a].T
    return X, assignments


# ---------------------------------------------------------------------------
# EM fitting


@dataclass(frozen=True)
class EmConfig:
    """EM settings. ``cov_floor_scale`` scales the mean per-channel variance to
    a floor on covariance eigenvalues; ``rel_tol`` is the relative
    log-likelihood change that counts as converged."""

    k: int = 3
    max_iters: int = 200
    rel_tol: float = 1e-6
    cov_floor_scale: float = 1e-6
    init: str = "kmeans"  # or "random"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.rel_tol <= 0 or self.cov_floor_scale <= 0:
            raise ValueError("tolerances must be positive")
        if self.init not in ("kmeans", "random"):
            raise ValueError(f"init must be 'kmeans' or 'random', got {self.init!r}")


@dataclass(frozen=True)
class FitReport:
    iterations: int
    final_log_likelihood: float
    log_likelihoods: tuple[float, ...]
    converged: bool
    degenerate: bool = False
    floored: bool = False


def _floor_cov(cov: np.ndarray, floor: float) -> tuple[np.ndarray, bool]:
    """Clip covariance eigenvalues from below; untouched when already above floor."""
    cov = 0.5 * (cov + cov.T)
    vals, vecs = np.linalg.eigh(cov)
    if vals[0] >= floor:
        return cov, False
    vals = np.maximum(vals, floor)
    fixed = (vecs * vals) @ vecs.T
    return 0.5 * (fixed + fixed.T), True


def _kmeans_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding followed by Lloyd iterations until stable (<= 50)."""
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for a in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[a:] = X[rng.choice(n, size=k - a, replace=False)]
            break
        centers[a] = X[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((X - centers[a]) ** 2, axis=1))
    assign = None
    for _ in range(50):
        dist = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_assign = dist.argmin(axis=1)
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for a in range(k):
            members = X[assign == a]
            if len(members):
                centers[a] = members.mean(axis=0)
    return centers


def _initial_params(X: np.ndarray, cfg: EmConfig, floor: float):
    n, d = X.shape
    rng = np.random.default_rng(cfg.seed)
    k = cfg.k
    overall_cov, _ = _floor_cov(np.cov(X, rowvar=False, ddof=0).reshape(d, d), floor)
    if cfg.init == "random":
        means = X[rng.choice(n, size=k, replace=False)].copy()
        covs = np.repeat(overall_cov[None, :, :], k, axis=0)
        weights = np.full(k, 1.0 / k)
        return weights, means, covs
    means = _kmeans_init(X, k, rng)
    dist = np.sum((X[:, None, :] - means[None, :, :]) ** 2, axis=2)
    assign = dist.argmin(axis=1)
    weights = np.empty(k)
    covs = np.empty((k, d, d))
    for a in range(k):
        members = X[assign == a]
        if len(members) > d:
            means[a] = members.mean(axis=0)
            covs[a], _ = _floor_cov(np.cov(members, rowvar=False, ddof=0).reshape(d, d), floor)
            weights[a] = len(members) / n
        else:
            covs[a] = overall_cov
            weights[a] = 1.0 / n
    weights /= weights.sum()
    return weights, means, covs


def fit_em(m, cfg: EmConfig) -> tuple[GaussianMixture, FitReport]:
    """Fit a k-component mixture by expectation-maximization.

    Deterministic for a fixed config; the per-iteration log-likelihood
    sequence is nondecreasing (to floating-point slack). All-identical rows
    short-circuit to a flagged single-component fit with floored covariance.
    """
    X = _as_rows(m)
    n, d = X.shape
    if not np.all(np.isfinite(X)):
        raise ValueError("samples must be finite")
    if n <= cfg.k * d:
        raise ValueError(f"need more than k*d = {cfg.k * d} samples to fit, got {n}")

    channel_var = X.var(axis=0)
    floor = cfg.cov_floor_scale * float(channel_var.mean())
    if floor <= 0.0:
        floor = cfg.cov_floor_scale

    if np.all(X == X[0]):
        cov = np.eye(d) * floor
        mixture = GaussianMixture((GaussianComponent(1.0, X[0].copy(), cov),))
        ll = float(log_pdf_many(mixture, X).sum())
        report = FitReport(
            iterations=0,
            final_log_likelihood=ll,
            log_likelihoods=(ll,),
            converged=True,
            degenerate=True,
            floored=True,
        )
        return mixture, report

    weights, means, covs = _initial_params(X, cfg, floor)
    k = cfg.k
    lls: list[float] = []
    converged = False
    floored = False

    for _ in range(cfg.max_iters):
        chols = np.linalg.cholesky(covs)
        log_dets = 2.0 * np.sum(np.log(np.diagonal(chols, axis1=1, axis2=2)), axis=1)
        weighted = _kernels.component_log_pdfs(X, means, chols, log_dets) + np.log(weights)[None, :]
        row_ls = _kernels.logsumexp_rows(weighted)
        ll = float(row_ls.sum())
        lls.append(ll)
        if len(lls) >= 2 and abs(ll - lls[-2]) <= cfg.rel_tol * max(1.0, abs(lls[-2])):
            converged = True
            break

        resp = np.exp(weighted - row_ls[:, None])
        nk = np.maximum(resp.sum(axis=0), 1e-300)
        weights = nk / nk.sum()
        means = (resp.T @ X) / nk[:, None]
        for a in range(k):
            diff = X - means[a]
            cov = (resp[:, a, None] * diff).T @ diff / nk[a]
            covs[a], clipped = _floor_cov(cov, floor)
            floored = floored or clipped

    mixture = GaussianMixture(
        tuple(GaussianComponent(weights[a], means[a], covs[a]) for a in range(k))
    )
    report = FitReport(
        iterations=len(lls),
        final_log_likelihood=lls[-1],
        log_likelihoods=tuple(lls),
        converged=converged,
        floored=floored,
    )
    return mixture, report


def bic_score(g: GaussianMixture, log_likelihood: float, n: int) -> float:
    """Bayesian information criterion; lower is better."""
    k, d = len(g), g.dims
    params = k * d + k * d * (d + 1) // 2 + (k - 1)
    return params * math.log(n) - 2.0 * log_likelihood


def fit_best_bic(
    m, base_cfg: EmConfig, ks: Sequence[int] = (1, 2, 3, 4, 5)
) -> tuple[GaussianMixture, FitReport, list[tuple[int, float]]]:
    """Fit every k in ``ks`` and keep the lowest-BIC mixture.

    Returns the winner plus the (k, bic) table; k values too large for the
    sample count are skipped.
    """
    X = _as_rows(m)
    n = X.shape[0]
    scored: list[tuple[float, int, GaussianMixture, FitReport]] = []
    table: list[tuple[int, float]] = []
    for k in ks:
        if n <= k * X.shape[1]:
            continue
        mixture, report = fit_em(m, replace(base_cfg, k=k))
        score = bic_score(mixture, report.final_log_likelihood, n)
        scored.append((score, k, mixture, report))
        table.append((k, score))
    if not scored:
        raise ValueError("no candidate k is fittable with this sample count")
    best = min(scored, key=lambda item: (item[0], item[1]))
    return best[2], best[3], table


# ---------------------------------------------------------------------------
# Mixture JSON interchange


def mixture_to_json(g: GaussianMixture) -> dict:
    return {
        "dims": g.dims,
        "components": [
            {
                "weight": c.weight,
                "mean": [float(v) for v in c.mean],
                "cov": [[float(v) for v in row] for row in c.cov],
            }
            for c in g.components
        ],
    }


def mixture_from_json(obj) -> GaussianMixture:
    try:
        dims = obj["dims"]
        raw_components = obj["components"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"mixture JSON missing required field: {exc}") from exc
    components = tuple(
        GaussianComponent(c["weight"], c["mean"], c["cov"]) for c in raw_components
    )
    g = GaussianMixture(components)
    if g.dims != dims:
        raise ValueError(f"declared dims {dims} do not match component dims {g.dims}")
    return g


def load_mixture(path) -> GaussianMixture:
    with open(path, encoding="utf-8") as fh:
        return mixture_from_json(json.load(fh))


def save_mixture(g: GaussianMixture, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(mixture_to_json(g), fh, indent=2, sort_keys=True)
        fh.write("\n")
