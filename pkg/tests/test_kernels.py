import numpy as np
import pytest
import scipy.special
from hypothesis import given, strategies as st

from dickecr import kernels
from dickecr.model import ModelParams, build_dicke_hamiltonian

BACKENDS = kernels.backends()


def test_backend_reported():
    assert kernels.BACKEND in BACKENDS
    assert "python" in BACKENDS


@pytest.mark.parametrize("name", sorted(BACKENDS))
@pytest.mark.parametrize("x", [0.0, 1e-200, 3e-6, 0.3, 5.0, 37.5, 400.0])
def test_bessel_sequence_matches_scipy(name, x):
    n = int(x + 60)
    got = BACKENDS[name].bessel_j_sequence(x, n)
    ref = scipy.special.jv(np.arange(n + 1), x)
    assert np.allclose(got, ref, rtol=0, atol=1e-13)


@given(st.floats(0, 300, allow_subnormal=False))
def test_bessel_sum_rule(x):
    # J_0 + 2 sum_k J_2k = 1
    jk = kernels.bessel_j_sequence(x, int(x + 80))
    assert jk[0] + 2 * jk[2::2].sum() == pytest.approx(1.0, abs=1e-12)


def _csr(p):
    h = build_dicke_hamiltonian(p)
    return (np.ascontiguousarray(h.indptr, dtype=np.int64), np.ascontiguousarray(h.indices, dtype=np.int32),
            np.ascontiguousarray(h.data.real), h)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled extension not built")
def test_chebyshev_series_backends_agree(rng):
    indptr, indices, data, h = _csr(ModelParams(1.0, 0.2, 0.3, 2, 15))
    psi = rng.normal(size=h.shape[0]) + 1j * rng.normal(size=h.shape[0])
    coeffs = rng.normal(size=40) + 1j * rng.normal(size=40)
    a = BACKENDS["cython"].chebyshev_series(indptr, indices, data, psi, coeffs, 12.0, 0.5)
    b = BACKENDS["python"].chebyshev_series(indptr, indices, data, psi, coeffs, 12.0, 0.5)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12 * np.abs(b).max())
    # complex data path
    cdata = data.astype(complex)
    c = BACKENDS["cython"].chebyshev_series(indptr, indices, cdata, psi, coeffs, 12.0, 0.5)
    assert np.allclose(c, b, rtol=1e-12, atol=1e-12 * np.abs(b).max())


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled extension not built")
@pytest.mark.parametrize("driven", [False, True])
def test_rk4_backends_agree(driven):
    y0 = np.array([0.5, 0.0, 0.0, 5.0, 0.0])
    args = (y0, 1.0, 0.01, 0.02, 5.0, 0.0, driven, 0.05, 400, 7)
    a = BACKENDS["cython"].rk4_spin_field(*args)
    b = BACKENDS["python"].rk4_spin_field(*args)
    assert a.shape == b.shape
    assert np.allclose(a, b, rtol=0, atol=1e-12)


def test_chebyshev_series_first_terms(rng):
    indptr, indices, data, h = _csr(ModelParams(1.0, 0.2, 0.3, 1, 5))
    psi = rng.normal(size=h.shape[0]) + 0j
    out = kernels.chebyshev_series(indptr, indices, data, psi, np.array([2.0, 3.0]), 4.0, 1.0)
    ref = 2.0 * psi + 3.0 * ((h @ psi) - psi) / 4.0
    assert np.allclose(out, ref)


def test_pure_python_switch():
    import os
    import subprocess
    import sys

    env = dict(os.environ, DICKECR_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from dickecr import kernels; print(kernels.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "python"
