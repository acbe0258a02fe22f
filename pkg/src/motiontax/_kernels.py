"""Hot numeric kernels: per-component Gaussian log-densities and row log-sum-exp.

These two loops dominate EM fitting and Monte Carlo divergence estimation,
so they come in two interchangeable backends: numba-compiled loops (default
whenever numba imports) and a vectorized numpy/scipy fallback. Selection:

    MOTIONTAX_BACKEND=auto|numba|numpy   (read once at import)
    set_backend("numpy")                  (runtime override, e.g. benchmarks)

Both backends implement the same math; results agree to floating-point
rounding, not bit-for-bit (summation order differs).
"""

from __future__ import annotations

import os
from typing import Callable, NamedTuple

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp as _scipy_logsumexp

__all__ = [
    "component_log_pdfs",
    "logsumexp_rows",
    "set_backend",
    "active_backend",
    "available_backends",
    "get_backend",
    "HAS_NUMBA",
]

_LOG_2PI = float(np.log(2.0 * np.pi))


def _component_log_pdfs_numpy(X, means, chols, log_dets):
    # X (n,d); means (k,d); chols (k,d,d) lower Cholesky factors; log_dets (k,)
    n, d = X.shape
    k = means.shape[0]
    out = np.empty((n, k), dtype=np.float64)
    norm = d * _LOG_2PI
    for a in range(k):
        sol = solve_triangular(chols[a], (X - means[a]).T, lower=True, check_finite=False)
        out[:, a] = -0.5 * (norm + log_dets[a] + np.einsum("dn,dn->n", sol, sol))
    return out


def _logsumexp_rows_numpy(M):
    return _scipy_logsumexp(M, axis=1)


try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    HAS_NUMBA = False

if HAS_NUMBA:

    @njit(cache=True)
    def _component_log_pdfs_numba(X, means, chols, log_dets):
        n, d = X.shape
        k = means.shape[0]
        out = np.empty((n, k), dtype=np.float64)
        norm = d * _LOG_2PI
        y = np.empty(d, dtype=np.float64)
        for i in range(n):
            for a in range(k):
                # forward substitution: y = L^{-1} (x - mu)
                quad = 0.0
                for r in range(d):
                    s = X[i, r] - means[a, r]
                    for c in range(r):
                        s -= chols[a, r, c] * y[c]
                    y[r] = s / chols[a, r, r]
                    quad += y[r] * y[r]
                out[i, a] = -0.5 * (norm + log_dets[a] + quad)
        return out

    @njit(cache=True)
    def _logsumexp_rows_numba(M):
        n, k = M.shape
        out = np.empty(n, dtype=np.float64)
        for i in range(n):
            m = M[i, 0]
            for a in range(1, k):
                if M[i, a] > m:
                    m = M[i, a]
            s = 0.0
            for a in range(k):
                s += np.exp(M[i, a] - m)
            out[i] = m + np.log(s)
        return out


class Backend(NamedTuple):
    name: str
    component_log_pdfs: Callable
    logsumexp_rows: Callable


_BACKENDS: dict[str, Backend] = {
    "numpy": Backend("numpy", _component_log_pdfs_numpy, _logsumexp_rows_numpy),
}
if HAS_NUMBA:
    _BACKENDS["numba"] = Backend("numba", _component_log_pdfs_numba, _logsumexp_rows_numba)


def available_backends() -> tuple[str, ...]:
    return tuple(_BACKENDS)


def get_backend(name: str) -> Backend:
    if name not in _BACKENDS:
        raise RuntimeError(
            f"kernel backend {name!r} unavailable; have {', '.join(_BACKENDS)}"
        )
    return _BACKENDS[name]


def _resolve(name: str) -> Backend:
    if name == "auto":
        return _BACKENDS["numba"] if HAS_NUMBA else _BACKENDS["numpy"]
    return get_backend(name)


_active: Backend = _resolve(os.environ.get("MOTIONTAX_BACKEND", "auto").strip().lower() or "auto")


def set_backend(name: str) -> None:
    """Switch the active backend ('auto', 'numba' or 'numpy'). Not thread-safe."""
    global _active
    _active = _resolve(name)


def active_backend() -> str:
    return _active.name


def component_log_pdfs(X, means, chols, log_dets):
    """Unweighted log N(x; mu_a, Sigma_a) for every sample/component pair, shape (n, k)."""
    return _active.component_log_pdfs(X, means, chols, log_dets)


def logsumexp_rows(M):
    """Numerically stable log(sum(exp(row))) for each row of a 2-D array."""
    return _active.logsumexp_rows(M)
