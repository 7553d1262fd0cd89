"""Pure numpy implementations of the hot loops.

Same call signatures as the compiled module; used when the extension is
unavailable or ``COHERELAB_PURE_PYTHON=1`` is set.
"""
import numpy as np

# relative objective rise tolerated on a zero-momentum step
ROUNDING = 1e-13


def profile_from_moduli(moduli, s_max):
    """Max over columns of prefix sums of descending off-diagonal moduli.

    Parameters
    ----------
    moduli : ndarray, shape (n, n)
        ``|G|`` with the diagonal entries ignored.
    s_max : int

    Returns
    -------
    ndarray, shape (s_max,)
    """
    n = moduli.shape[0]
    off = moduli[~np.eye(n, dtype=bool)].reshape(n, n - 1)
    # rows of ``off`` are the other columns' moduli; symmetric so rows == cols
    top = -np.sort(-off, axis=1)[:, :s_max]
    return np.cumsum(top, axis=1).max(axis=0)


def soft_threshold(v, t):
    """Shrink moduli by ``t`` and keep the phase."""
    mag = np.abs(v)
    scale = np.maximum(mag - t, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(mag > t, v * (scale / np.where(mag > 0, mag, 1.0)), 0.0)
    return out.astype(v.dtype, copy=False)


def lasso_kkt(x, g, lam):
    """Sup-norm violation of ``0 in g + lam * d|x|``."""
    ax = np.abs(x)
    nz = ax > 0
    r = np.maximum(np.abs(g) - lam, 0.0)
    if np.any(nz):
        phase = x[nz] / ax[nz]
        r[nz] = np.abs(g[nz] + lam * phase)
    return float(r.max()) if r.size else 0.0


def _objective(lam, x, r):
    return lam * float(np.abs(x).sum()) + 0.5 * float(np.vdot(r, r).real)


def fista_lasso(A, AH, b, lam, step, x0, max_iters, kkt_tol, record_trace):
    """FISTA with monotone restart.

    A step whose objective exceeds the current one is rejected and the
    momentum reset. A plain proximal-gradient step (zero momentum) cannot
    raise the objective in exact arithmetic, so it is accepted when the rise
    is within ``ROUNDING`` relative; a larger rise ends the loop.

    Returns
    -------
    x, iterations, kkt, converged, trace
    """
    x = np.array(x0, dtype=A.dtype, copy=True)
    ax = A @ x
    gx = AH @ (ax - b)
    x_prev, ax_prev, gx_prev = x.copy(), ax.copy(), gx.copy()
    f = _objective(lam, x, ax - b)
    t = 1.0
    mom = 0.0
    trace = [f] if record_trace else None
    kkt = lasso_kkt(x, gx, lam)
    it = 0
    while it < max_iters and kkt > kkt_tol:
        it += 1
        y = x + mom * (x - x_prev)
        gy = gx + mom * (gx - gx_prev)
        z = soft_threshold(y - step * gy, step * lam)
        az = A @ z
        rz = az - b
        fz = _objective(lam, z, rz)
        if fz > f and (mom != 0.0 or fz - f > ROUNDING * abs(f)):
            if mom == 0.0:
                break
            t, mom = 1.0, 0.0
            if record_trace:
                trace.append(f)
            continue
        x_prev, ax_prev, gx_prev = x, ax, gx
        x, ax, gx, f = z, az, AH @ rz, fz
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        mom = (t - 1.0) / t_new
        t = t_new
        kkt = lasso_kkt(x, gx, lam)
        if record_trace:
            trace.append(f)
    trace = np.array(trace) if record_trace else np.empty(0)
    return x, it, kkt, kkt <= kkt_tol, trace


def _project(u, c, eta, ball):
    d = u - c
    if ball == 0:
        mag = np.abs(d)
        over = mag > eta
        if np.any(over):
            d = d.copy()
            d[over] *= eta / mag[over]
        return c + d
    nrm = np.linalg.norm(d)
    if nrm > eta:
        d = d * (eta / nrm)
    return c + d


def _dual_norm(y, ball):
    # dual of l_inf is l_1 and l_2 is self dual
    return float(np.abs(y).sum()) if ball == 0 else float(np.linalg.norm(y))


def _residual_norm(u, ball):
    return float(np.abs(u).max()) if ball == 0 else float(np.linalg.norm(u))


def pdhg_l1(K, KH, c, eta, ball, tau, sigma, x0, max_iters, tol_abs, check_every):
    """Chambolle-Pock for ``min |x|_1  s.t.  |Kx - c| <= eta``.

    ``ball`` selects the constraint norm: 0 for sup-norm, 1 for Euclidean.

    Returns
    -------
    x, iterations, gap, feasibility, converged
        The returned ``x`` is the best checked iterate.
    """
    x = np.array(x0, dtype=K.dtype, copy=True)
    xbar = x.copy()
    y = np.zeros(K.shape[0], dtype=K.dtype)
    best = (np.inf, x.copy(), np.inf, np.inf)
    it = 0
    converged = False
    while it < max_iters:
        it += 1
        v = y + sigma * (K @ xbar)
        y = v - sigma * _project(v / sigma, c, eta, ball)
        x_new = soft_threshold(x - tau * (KH @ y), tau)
        xbar = 2.0 * x_new - x
        x = x_new
        if it % check_every == 0 or it == max_iters:
            gap, feas = _gap(K, KH, c, eta, ball, x, y)
            score = max(abs(gap), feas)
            if score < best[0]:
                best = (score, x.copy(), gap, feas)
            if abs(gap) <= tol_abs and feas <= tol_abs:
                converged = True
                break
    _, xb, gap, feas = best
    return xb, it, gap, feas, converged


def _gap(K, KH, c, eta, ball, x, y):
    feas = max(0.0, _residual_norm(K @ x - c, ball) - eta)
    w = np.abs(KH @ y).max() if y.size else 0.0
    yh = y / max(1.0, w)
    dual = -float(np.vdot(yh, c).real) - eta * _dual_norm(yh, ball)
    return float(np.abs(x).sum()) - dual, feas
