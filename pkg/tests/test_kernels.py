import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coherelab import _kernels
from coherelab._kernels import reference

from conftest import BACKENDS

from oracles import soft

needs_fast = pytest.mark.skipif(_kernels.fast is None, reason="compiled extension not built")


def _problem(m, n, seed, cplx=False):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    b = rng.standard_normal(m)
    if cplx:
        A = A + 1j * rng.standard_normal((m, n))
        b = b + 1j * rng.standard_normal(m)
    A /= np.linalg.norm(A, axis=0)
    AH = np.ascontiguousarray(A.conj().T)
    L = np.linalg.norm(A, 2) ** 2
    return np.ascontiguousarray(A), AH, b, L


def test_backend_flag():
    assert _kernels.BACKEND in ("cython", "python")
    assert (_kernels.BACKEND == "cython") == (_kernels.fast is not None)


def test_pure_python_switch():
    env = dict(os.environ, COHERELAB_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import coherelab; print(coherelab.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("backend", BACKENDS, ids=lambda m: m.__name__.rsplit(".", 1)[-1])
@given(n=st.integers(1, 8), t=st.floats(0, 3), cplx=st.booleans(), seed=st.integers(0, 10**6))
def test_soft_threshold(backend, n, t, cplx, seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n) + (1j * rng.standard_normal(n) if cplx else 0)
    out = backend.soft_threshold(v, t)
    np.testing.assert_allclose(out, soft(v, t), atol=1e-14)
    # phase preserved, modulus shrunk
    nz = np.abs(out) > 0
    np.testing.assert_allclose(out[nz] / np.abs(out[nz]), v[nz] / np.abs(v[nz]), atol=1e-12)


def test_profile_from_moduli(kernel_backend):
    rng = np.random.default_rng(0)
    M = np.abs(rng.standard_normal((7, 7)))
    M = M + M.T
    np.fill_diagonal(M, 0)
    got = kernel_backend.profile_from_moduli(np.ascontiguousarray(M), 6)
    want = [max(sum(sorted(M[:, i], reverse=True)[:s]) for i in range(7)) for s in range(1, 7)]
    np.testing.assert_allclose(got, want, atol=1e-14)


def test_lasso_kkt_definition(kernel_backend):
    x = np.array([0.0, 2.0, -1.0, 0.0])
    g = np.array([0.5, -1.0, 1.2, -3.0])
    lam = 1.0
    # zero entries: max(0, |g|-lam); nonzero: |g + lam*phase|
    want = max(0.0, abs(-1.0 + 1.0), abs(1.2 - 1.0), 2.0)
    assert kernel_backend.lasso_kkt(x, g, lam) == pytest.approx(want)


@needs_fast
@pytest.mark.parametrize("cplx", [False, True])
def test_fista_backends_agree(cplx):
    A, AH, b, L = _problem(10, 16, 3, cplx)
    x0 = np.zeros(16, dtype=A.dtype)
    # zero tolerance: both run until the objective stalls at rounding level,
    # which may happen one step apart
    args = (A, AH, b, 0.05, 1.0 / L, x0, 3000, 0.0, True)
    r = reference.fista_lasso(*args)
    f = _kernels.fast.fista_lasso(*args)
    assert abs(r[1] - f[1]) <= 1
    np.testing.assert_allclose(np.asarray(f[0]), r[0], atol=1e-10)
    k = min(len(r[4]), len(f[4]))
    np.testing.assert_allclose(np.asarray(f[4])[:k], r[4][:k], rtol=1e-10)
    args = (A, AH, b, 0.05, 1.0 / L, x0, 100, 0.0, True)
    r, f = reference.fista_lasso(*args), _kernels.fast.fista_lasso(*args)
    assert r[1] == f[1] == 100


@needs_fast
@pytest.mark.parametrize("ball,cplx", [(0, False), (1, False), (0, True), (1, True)])
def test_pdhg_backends_agree(ball, cplx):
    A, AH, b, L = _problem(8, 14, 5, cplx)
    if ball == 0:
        K, KH, c = np.ascontiguousarray(AH @ A), None, AH @ b
        K = 0.5 * (K + K.conj().T)
        KH = np.ascontiguousarray(K.conj().T)
        eta = 0.1
        norm = np.linalg.norm(K, 2)
    else:
        K, KH, c, eta, norm = A, AH, b, 0.3, np.sqrt(L)
    x0 = np.zeros(14, dtype=np.result_type(K, c))
    step = 0.99 / norm
    args = (np.ascontiguousarray(K), KH, np.ascontiguousarray(c), eta, ball, step, step, x0,
            400, 0.0, 10)
    r = reference.pdhg_l1(*args)
    f = _kernels.fast.pdhg_l1(*args)
    assert r[1] == f[1]
    np.testing.assert_allclose(np.asarray(f[0]), r[0], atol=1e-9)


def test_fista_objective_monotone(kernel_backend):
    A, AH, b, L = _problem(12, 20, 9)
    out = kernel_backend.fista_lasso(A, AH, b, 0.01, 1.0 / L, np.zeros(20), 500, 1e-14, True)
    trace = np.asarray(out[4])
    assert trace.size > 10
    assert np.all(np.diff(trace) <= 1e-12 * np.abs(trace[:-1]))
