# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: coherence profile, FISTA and Chambolle-Pock.

Mirrors ``_reference`` call for call.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, INFINITY
from libc.stdlib cimport qsort, malloc, free

cnp.import_array()

# relative objective rise tolerated on a zero-momentum step
cdef double ROUNDING = 1e-13

ctypedef fused scalar:
    double
    double complex


cdef int _cmp_desc(const void* a, const void* b) noexcept nogil:
    cdef double x = (<double*>a)[0]
    cdef double y = (<double*>b)[0]
    if x < y:
        return 1
    if x > y:
        return -1
    return 0


def profile_from_moduli(const double[:, ::1] moduli, Py_ssize_t s_max):
    cdef Py_ssize_t n = moduli.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double acc
    out = np.zeros(s_max, dtype=np.float64)
    cdef double[::1] res = out
    cdef double* buf = <double*>malloc((n if n > 1 else 1) * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for i in range(n):
                k = 0
                for j in range(n):
                    if j != i:
                        buf[k] = moduli[i, j]
                        k += 1
                qsort(buf, n - 1, sizeof(double), _cmp_desc)
                acc = 0.0
                for k in range(s_max):
                    acc = acc + buf[k]
                    if acc > res[k]:
                        res[k] = acc
    finally:
        free(buf)
    return out


cdef inline double _abs2(scalar z) noexcept nogil:
    if scalar is double:
        return z * z
    else:
        return z.real * z.real + z.imag * z.imag


cdef inline double _mod(scalar z) noexcept nogil:
    if scalar is double:
        return fabs(z)
    else:
        return sqrt(z.real * z.real + z.imag * z.imag)


cdef inline scalar _shrink(scalar v, double t) noexcept nogil:
    cdef double mag = _mod(v)
    if mag > t:
        return v * ((mag - t) / mag)
    return 0


cdef void _matvec(const scalar[:, ::1] M, scalar[::1] v, scalar[::1] out) noexcept nogil:
    cdef Py_ssize_t r, k
    cdef scalar acc
    for r in range(M.shape[0]):
        acc = 0
        for k in range(M.shape[1]):
            acc = acc + M[r, k] * v[k]
        out[r] = acc


cdef double _kkt(const scalar[::1] x, const scalar[::1] g, double lam) noexcept nogil:
    cdef Py_ssize_t j
    cdef double worst = 0.0, r, mag
    for j in range(x.shape[0]):
        mag = _mod(x[j])
        if mag > 0:
            r = _mod(g[j] + lam * (x[j] / mag))
        else:
            r = _mod(g[j]) - lam
            if r < 0:
                r = 0.0
        if r > worst:
            worst = r
    return worst


def lasso_kkt(x, g, double lam):
    dt = _dtype(x, g)
    return _kkt_py(np.ascontiguousarray(x, dtype=dt), np.ascontiguousarray(g, dtype=dt), lam)


def _kkt_py(const scalar[::1] x, const scalar[::1] g, double lam):
    return _kkt(x, g, lam)


def _dtype(*arrays):
    if any(np.iscomplexobj(a) for a in arrays):
        return np.complex128
    return np.float64


def soft_threshold(v, double t):
    v = np.ascontiguousarray(v, dtype=_dtype(v))
    out = np.empty_like(v)
    _soft_into(v, t, out)
    return out


def _soft_into(const scalar[::1] v, double t, scalar[::1] out):
    cdef Py_ssize_t j
    with nogil:
        for j in range(v.shape[0]):
            out[j] = _shrink(v[j], t)


cdef double _objective(double lam, scalar[::1] x, scalar[::1] r) noexcept nogil:
    cdef Py_ssize_t j
    cdef double l1 = 0.0, ss = 0.0
    for j in range(x.shape[0]):
        l1 += _mod(x[j])
    for j in range(r.shape[0]):
        ss += _abs2(r[j])
    return lam * l1 + 0.5 * ss


def fista_lasso(A, AH, b, double lam, double step, x0, Py_ssize_t max_iters,
                double kkt_tol, bint record_trace):
    dt = _dtype(A, b, x0)
    return _fista(np.ascontiguousarray(A, dtype=dt), np.ascontiguousarray(AH, dtype=dt),
                  np.ascontiguousarray(b, dtype=dt), lam, step, np.array(x0, dtype=dt),
                  max_iters, kkt_tol, record_trace)


def _fista(const scalar[:, ::1] A, const scalar[:, ::1] AH, const scalar[::1] b, double lam, double step,
           const scalar[::1] x0, Py_ssize_t max_iters, double kkt_tol, bint record_trace):
    cdef Py_ssize_t m = A.shape[0], n = A.shape[1], j, it = 0
    dt = np.complex128 if scalar is not double else np.float64
    x_arr = np.array(x0, dtype=dt)
    cdef scalar[::1] x = x_arr
    cdef scalar[::1] xp = np.array(x0, dtype=dt)
    cdef scalar[::1] ax = np.empty(m, dtype=dt)
    cdef scalar[::1] r = np.empty(m, dtype=dt)
    cdef scalar[::1] gx = np.empty(n, dtype=dt)
    cdef scalar[::1] gxp = np.empty(n, dtype=dt)
    cdef scalar[::1] z = np.empty(n, dtype=dt)
    cdef scalar[::1] az = np.empty(m, dtype=dt)
    cdef scalar[::1] rz = np.empty(m, dtype=dt)
    cdef scalar[::1] gz = np.empty(n, dtype=dt)
    cdef double[::1] tr = np.empty(max_iters + 1 if record_trace else 1, dtype=np.float64)
    cdef Py_ssize_t ntr = 0
    cdef double f, fz, t = 1.0, mom = 0.0, t_new, kkt
    cdef scalar yj, gyj

    with nogil:
        _matvec(A, x, ax)
        for j in range(m):
            r[j] = ax[j] - b[j]
        _matvec(AH, r, gx)
        for j in range(n):
            gxp[j] = gx[j]
        f = _objective(lam, x, r)
        if record_trace:
            tr[0] = f
            ntr = 1
        kkt = _kkt(x, gx, lam)
        while it < max_iters and kkt > kkt_tol:
            it += 1
            for j in range(n):
                yj = x[j] + mom * (x[j] - xp[j])
                gyj = gx[j] + mom * (gx[j] - gxp[j])
                z[j] = _shrink(yj - step * gyj, step * lam)
            _matvec(A, z, az)
            for j in range(m):
                rz[j] = az[j] - b[j]
            fz = _objective(lam, z, rz)
            if fz > f and (mom != 0.0 or fz - f > ROUNDING * fabs(f)):
                if mom == 0.0:
                    break
                t = 1.0
                mom = 0.0
                if record_trace:
                    tr[ntr] = f
                    ntr += 1
                continue
            _matvec(AH, rz, gz)
            for j in range(n):
                xp[j] = x[j]
                x[j] = z[j]
                gxp[j] = gx[j]
                gx[j] = gz[j]
            f = fz
            t_new = 0.5 * (1.0 + sqrt(1.0 + 4.0 * t * t))
            mom = (t - 1.0) / t_new
            t = t_new
            kkt = _kkt(x, gx, lam)
            if record_trace:
                tr[ntr] = f
                ntr += 1
    trace = np.asarray(tr)[:ntr].copy() if record_trace else np.empty(0)
    return x_arr, it, kkt, kkt <= kkt_tol, trace


def pdhg_l1(K, KH, c, double eta, int ball, double tau, double sigma, x0,
            Py_ssize_t max_iters, double tol_abs, Py_ssize_t check_every):
    dt = _dtype(K, c, x0)
    return _pdhg(np.ascontiguousarray(K, dtype=dt), np.ascontiguousarray(KH, dtype=dt),
                 np.ascontiguousarray(c, dtype=dt), eta, ball, tau, sigma,
                 np.array(x0, dtype=dt), max_iters, tol_abs, check_every)


cdef void _project_dual(scalar[::1] v, const scalar[::1] c, double eta, int ball, double sigma,
                        scalar[::1] y) noexcept nogil:
    # y = v - sigma * proj_B(v / sigma), B the eta-ball around c
    cdef Py_ssize_t i, p = v.shape[0]
    cdef double mag, nrm = 0.0, scale
    cdef scalar d
    if ball == 0:
        for i in range(p):
            d = v[i] / sigma - c[i]
            mag = _mod(d)
            if mag > eta:
                d = d * (eta / mag)
            y[i] = v[i] - sigma * (c[i] + d)
    else:
        for i in range(p):
            nrm += _abs2(v[i] / sigma - c[i])
        nrm = sqrt(nrm)
        scale = eta / nrm if nrm > eta else 1.0
        for i in range(p):
            d = (v[i] / sigma - c[i]) * scale
            y[i] = v[i] - sigma * (c[i] + d)


cdef void _gap(const scalar[:, ::1] K, const scalar[:, ::1] KH, const scalar[::1] c, double eta, int ball,
               scalar[::1] x, scalar[::1] y, scalar[::1] wp, scalar[::1] wn,
               double* gap, double* feas) noexcept nogil:
    cdef Py_ssize_t i, p = K.shape[0], n = K.shape[1]
    cdef double res = 0.0, mag, w = 0.0, l1 = 0.0, dn = 0.0, lin = 0.0, scale
    _matvec(K, x, wp)
    for i in range(p):
        mag = _mod(wp[i] - c[i])
        if ball == 0:
            if mag > res:
                res = mag
        else:
            res += mag * mag
    if ball != 0:
        res = sqrt(res)
    feas[0] = res - eta if res > eta else 0.0
    _matvec(KH, y, wn)
    for i in range(n):
        mag = _mod(wn[i])
        if mag > w:
            w = mag
        l1 += _mod(x[i])
    scale = 1.0 / w if w > 1.0 else 1.0
    for i in range(p):
        if scalar is double:
            lin += y[i] * c[i]
        else:
            lin += y[i].real * c[i].real + y[i].imag * c[i].imag
        if ball == 0:
            dn += _mod(y[i])
        else:
            dn += _abs2(y[i])
    if ball != 0:
        dn = sqrt(dn)
    gap[0] = l1 + scale * lin + eta * scale * dn


def _pdhg(const scalar[:, ::1] K, const scalar[:, ::1] KH, const scalar[::1] c, double eta, int ball,
          double tau, double sigma, const scalar[::1] x0, Py_ssize_t max_iters, double tol_abs,
          Py_ssize_t check_every):
    cdef Py_ssize_t p = K.shape[0], n = K.shape[1], j, it = 0
    dt = np.complex128 if scalar is not double else np.float64
    cdef scalar[::1] x = np.array(x0, dtype=dt)
    cdef scalar[::1] xbar = np.array(x0, dtype=dt)
    best_arr = np.array(x0, dtype=dt)
    cdef scalar[::1] xbest = best_arr
    cdef scalar[::1] y = np.zeros(p, dtype=dt)
    cdef scalar[::1] v = np.empty(p, dtype=dt)
    cdef scalar[::1] kx = np.empty(p, dtype=dt)
    cdef scalar[::1] khy = np.empty(n, dtype=dt)
    cdef scalar[::1] wn = np.empty(n, dtype=dt)
    cdef double gap = INFINITY, feas = INFINITY, bgap = INFINITY, bfeas = INFINITY
    cdef double score, bscore = INFINITY
    cdef bint converged = False
    cdef scalar xn

    with nogil:
        while it < max_iters:
            it += 1
            _matvec(K, xbar, kx)
            for j in range(p):
                v[j] = y[j] + sigma * kx[j]
            _project_dual(v, c, eta, ball, sigma, y)
            _matvec(KH, y, khy)
            for j in range(n):
                xn = _shrink(x[j] - tau * khy[j], tau)
                xbar[j] = 2.0 * xn - x[j]
                x[j] = xn
            if it % check_every == 0 or it == max_iters:
                _gap(K, KH, c, eta, ball, x, y, kx, wn, &gap, &feas)
                score = fabs(gap) if fabs(gap) > feas else feas
                if score < bscore:
                    bscore = score
                    bgap = gap
                    bfeas = feas
                    for j in range(n):
                        xbest[j] = x[j]
                if fabs(gap) <= tol_abs and feas <= tol_abs:
                    converged = True
                    break
    return best_arr, it, bgap, bfeas, converged
