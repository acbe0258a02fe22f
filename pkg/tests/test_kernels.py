import os
import subprocess
import sys

import numpy as np
import pytest

from motiontax import _kernels


def make_inputs(seed=0, n=200, d=3, k=3):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    means = rng.normal(scale=3.0, size=(k, d))
    chols = np.zeros((k, d, d))
    log_dets = np.zeros(k)
    for a in range(k):
        A = rng.normal(size=(d, d))
        cov = A @ A.T + np.eye(d)
        chols[a] = np.linalg.cholesky(cov)
        log_dets[a] = 2.0 * np.sum(np.log(np.diag(chols[a])))
    return X, means, chols, log_dets


@pytest.mark.skipif(not _kernels.HAS_NUMBA, reason="numba not installed")
class TestBackendParity:
    @pytest.mark.parametrize("d,k", [(1, 1), (1, 3), (3, 2), (6, 5)])
    def test_component_log_pdfs(self, d, k):
        X, means, chols, log_dets = make_inputs(seed=d * 10 + k, d=d, k=k)
        a = _kernels.get_backend("numpy").component_log_pdfs(X, means, chols, log_dets)
        b = _kernels.get_backend("numba").component_log_pdfs(X, means, chols, log_dets)
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)

    def test_logsumexp_rows(self):
        rng = np.random.default_rng(7)
        M = rng.normal(scale=50.0, size=(300, 4))
        a = _kernels.get_backend("numpy").logsumexp_rows(M)
        b = _kernels.get_backend("numba").logsumexp_rows(M)
        np.testing.assert_allclose(a, b, rtol=1e-12)

    def test_logsumexp_extreme_values(self):
        M = np.array([[-1000.0, -1000.5], [700.0, 690.0]])
        for name in _kernels.available_backends():
            out = _kernels.get_backend(name).logsumexp_rows(M)
            assert np.all(np.isfinite(out))


class TestSelection:
    def test_default_prefers_numba(self):
        if _kernels.HAS_NUMBA:
            _kernels.set_backend("auto")
            assert _kernels.active_backend() == "numba"
        else:
            assert _kernels.active_backend() == "numpy"

    def test_set_backend_numpy(self):
        _kernels.set_backend("numpy")
        try:
            assert _kernels.active_backend() == "numpy"
            X, means, chols, log_dets = make_inputs()
            out = _kernels.component_log_pdfs(X, means, chols, log_dets)
            assert out.shape == (200, 3)
        finally:
            _kernels.set_backend("auto")

    def test_unknown_backend_rejected(self):
        with pytest.raises(RuntimeError):
            _kernels.set_backend("fortran")

    def test_env_flag_selects_numpy(self):
        env = dict(os.environ, MOTIONTAX_BACKEND="numpy")
        out = subprocess.run(
            [sys.executable, "-c", "from motiontax import _kernels; print(_kernels.active_backend())"],
            env=env,
            capture_output=True,
            text=True,
            check=True,
        )
        assert out.stdout.strip() == "numpy"


class TestAgainstScipy:
    def test_numpy_backend_matches_direct_density(self):
        from scipy.stats import multivariate_normal

        X, means, chols, log_dets = make_inputs(seed=5, n=50, d=3, k=2)
        out = _kernels.get_backend("numpy").component_log_pdfs(X, means, chols, log_dets)
        for a in range(2):
            cov = chols[a] @ chols[a].T
            expected = multivariate_normal.logpdf(X, mean=means[a], cov=cov)
            np.testing.assert_allclose(out[:, a], expected, rtol=1e-10)
