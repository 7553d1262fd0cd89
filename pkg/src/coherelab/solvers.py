"""l1 recovery programs: Lasso, quadratically constrained basis pursuit (QCBP),
the Dantzig selector (DS) and basis pursuit (BP).

Lasso      min  lam |x|_1 + 0.5 |Ax - b|_2^2
QCBP       min  |x|_1   s.t.  |b - Ax|_2 <= eta
DS         min  |x|_1   s.t.  |A^H (b - Ax)|_inf <= eta
BP         QCBP with eta at rounding level

Lasso is solved by FISTA (:func:`lasso`) or by iteratively reweighted least
squares (:func:`lasso_irls`); QCBP and DS by the Chambolle-Pock primal-dual
method. Complex dictionaries are supported throughout: the l1 norm is the sum
of moduli and soft-thresholding shrinks the modulus and keeps the phase.
"""
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConditionError, ContractError, DomainError, NumericalError

POWER_ITERS = 100
POWER_TOL = 1e-10
PDHG_SCALE = 0.99
CHECK_EVERY = 10
IRLS_EPS_START = 1.0
IRLS_EPS_FLOOR = 1e-12
IRLS_EPS_RATE = 0.1
IRLS_SETTLE = 1e-2
FINISH_ITERS = 200
FINAL_FINISH_ITERS = 20_000
FINISH_EPS = 1e-6
BP_ETA_REL = 1e-12


class StepRule(enum.Enum):
    FIXED = "fixed"
    BACKTRACKING = "backtracking"


@dataclass(frozen=True)
class SolveOptions:
    """Iteration budget and tolerances shared by all solvers."""

    max_iters: int = 500
    tol: float = 1e-9
    step_rule: StepRule = StepRule.FIXED
    record_trace: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise DomainError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.tol > 0:
            raise DomainError(f"tol must be positive, got {self.tol}")
        if not isinstance(self.step_rule, StepRule):
            object.__setattr__(self, "step_rule", StepRule(self.step_rule))


@dataclass
class SolverResult:
    """Solution and diagnostics of one solve.

    ``kkt_residual`` is the Lasso optimality violation for Lasso programs and
    the final primal-dual gap estimate for the constrained programs.
    """

    x_hat: np.ndarray
    objective: float
    kkt_residual: float
    feasibility_residual: float
    iterations: int
    converged: bool
    program: str = ""
    trace: np.ndarray = field(default_factory=lambda: np.empty(0))

    def to_dict(self):
        x = self.x_hat
        out = {
            "program": self.program,
            "objective": self.objective,
            "kkt_residual": self.kkt_residual,
            "feasibility_residual": self.feasibility_residual,
            "iterations": self.iterations,
            "converged": self.converged,
        }
        if np.iscomplexobj(x):
            out["x_hat_re"] = x.real.tolist()
            out["x_hat_im"] = x.imag.tolist()
        else:
            out["x_hat"] = x.tolist()
        return out


# -- helpers ----------------------------------------------------------------------

def _operands(D, b):
    A = D.matrix
    b = np.asarray(b)
    if b.ndim != 1 or b.shape[0] != D.m:
        raise ContractError(f"b must be a vector of length m={D.m}, got shape {b.shape}")
    if np.iscomplexobj(b) and np.any(b.imag != 0):
        A = D.entries
        b = b.astype(np.complex128)
    else:
        b = np.ascontiguousarray(b.real if np.iscomplexobj(b) else b, dtype=A.dtype)
    AH = np.ascontiguousarray(A.conj().T)
    return np.ascontiguousarray(A), AH, b


def _opts(opts):
    return SolveOptions() if opts is None else opts


def l1_norm(x):
    return float(np.abs(x).sum())


def lipschitz(A, iters=POWER_ITERS, tol=POWER_TOL):
    """Largest eigenvalue of ``A^H A`` by power iteration.

    Falls back to the exact spectral norm if the iteration has not settled to
    ``tol`` relative change within ``iters`` steps.
    """
    n = A.shape[1]
    v = np.random.default_rng(0).standard_normal(n).astype(A.dtype)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = A.conj().T @ (A @ v)
        new = float(np.linalg.norm(w))
        if new == 0.0:
            return 0.0
        v = w / new
        if abs(new - est) <= tol * new:
            return new
        est = new
    return float(np.linalg.norm(A, 2) ** 2)


def lasso_objective(A, b, lam, x):
    r = A @ x - b
    return lam * l1_norm(x) + 0.5 * float(np.vdot(r, r).real)


def lasso_kkt_residual(A, b, lam, x):
    """Sup-norm violation of the Lasso subgradient condition at ``x``."""
    g = A.conj().T @ (A @ x - b)
    return float(_kernels.reference.lasso_kkt(np.asarray(x), g, lam))


def _kkt_threshold(tol, lam, n):
    return max(tol, 1e-9 * lam * math.sqrt(n))


def _check_lam(lam):
    if not lam >= 0 or not math.isfinite(lam):
        raise DomainError(f"lambda must be a finite value >= 0, got {lam}")


def _check_eta(eta):
    if not eta >= 0 or not math.isfinite(eta):
        raise DomainError(f"eta must be a finite value >= 0, got {eta}")


# -- Lasso ------------------------------------------------------------------------

def lasso(D, b, lam, opts=None):
    """Solve the Lasso by FISTA with step ``1/L`` and monotone restart.

    Parameters
    ----------
    D : Dictionary
    b : ndarray, shape (m,)
    lam : float
        Regularization weight, ``>= 0``.
    opts : SolveOptions, optional

    Returns
    -------
    SolverResult
        ``converged`` means the KKT residual is at most
        ``max(tol, 1e-9 * lam * sqrt(n))``.
    """
    _check_lam(lam)
    opts = _opts(opts)
    A, AH, b = _operands(D, b)
    n = A.shape[1]
    thr = _kkt_threshold(opts.tol, lam, n)
    x0 = np.zeros(n, dtype=A.dtype)
    if not np.any(b):
        return SolverResult(x0, 0.0, 0.0, 0.0, 0, True, "lasso",
                            np.zeros(1) if opts.record_trace else np.empty(0))
    L = lipschitz(A)
    if opts.step_rule is StepRule.BACKTRACKING:
        x, it, kkt, conv, trace = _fista_backtracking(A, AH, b, lam, L, x0, opts.max_iters,
                                                      thr, opts.record_trace)
    else:
        x, it, kkt, conv, trace = _kernels.fista_lasso(A, AH, b, lam, 1.0 / L, x0,
                                                       opts.max_iters, thr, opts.record_trace)
    x = np.asarray(x)
    return SolverResult(x, lasso_objective(A, b, lam, x), float(kkt), 0.0, int(it),
                        bool(conv), "lasso", np.asarray(trace))


def _fista_backtracking(A, AH, b, lam, L_upper, x, max_iters, kkt_tol, record_trace):
    """FISTA with Beck-Teboulle backtracking, started from ``L_upper / 64``.

    The estimate never exceeds ``2 * L_upper``; the same monotone restart as
    the fixed-step loop keeps the objective trace non-increasing up to rounding.
    """
    soft = _kernels.reference.soft_threshold
    kkt_fn = _kernels.reference.lasso_kkt
    L = max(L_upper / 64.0, np.finfo(float).tiny)
    x_prev = x.copy()
    r = A @ x - b
    f = lam * l1_norm(x) + 0.5 * float(np.vdot(r, r).real)
    g = AH @ r
    kkt = kkt_fn(x, g, lam)
    trace = [f]
    t, mom, it = 1.0, 0.0, 0
    while it < max_iters and kkt > kkt_tol:
        it += 1
        y = x + mom * (x - x_prev)
        ry = A @ y - b
        fy = 0.5 * float(np.vdot(ry, ry).real)
        gy = AH @ ry
        while True:
            z = soft(y - gy / L, lam / L)
            d = z - y
            rz = A @ z - b
            smooth = 0.5 * float(np.vdot(rz, rz).real)
            if smooth <= fy + float(np.vdot(d, gy).real) + 0.5 * L * float(np.vdot(d, d).real) \
                    or L >= 2.0 * L_upper:
                break
            L *= 2.0
        fz = smooth + lam * l1_norm(z)
        if fz > f and (mom != 0.0 or fz - f > _kernels.reference.ROUNDING * abs(f)):
            if mom == 0.0:
                break
            t, mom = 1.0, 0.0
            trace.append(f)
            continue
        x_prev, x, f = x, z, fz
        g = AH @ rz
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        mom = (t - 1.0) / t_new
        t = t_new
        kkt = kkt_fn(x, g, lam)
        trace.append(f)
    return x, it, kkt, kkt <= kkt_tol, np.array(trace) if record_trace else np.empty(0)


def lasso_irls(D, b, lam, opts=None):
    """Solve the Lasso by iteratively reweighted least squares.

    Each step solves ``(lam W + A^H A) x = A^H b`` with
    ``W = diag(1 / sqrt(|x_j|^2 + eps^2))``. When ``m < n`` the equivalent
    system ``x = W^-1 A^H (lam I + A W^-1 A^H)^-1 b`` of size ``m`` is solved
    instead. ``eps`` starts at 1 and drops tenfold, down to a floor of 1e-12,
    whenever the iterate has settled for the current ``eps``.

    At every drop of ``eps``, and once more at the end, the iterate is
    finished off: its numerical support is refined by an active-set pass on
    the exact stationarity equations, followed by a short warm-started run of
    the FISTA loop, which is longer after the last step. The finished point
    is kept when it lowers the objective.

    Raises
    ------
    NumericalError
        If a reweighted system is singular or produces non-finite values.
    """
    _check_lam(lam)
    opts = _opts(opts)
    A, AH, b = _operands(D, b)
    m, n = A.shape
    thr = _kkt_threshold(opts.tol, lam, n)
    zero = np.zeros(n, dtype=A.dtype)
    if not np.any(b):
        return SolverResult(zero, 0.0, 0.0, 0.0, 0, True, "lasso_irls",
                            np.zeros(1) if opts.record_trace else np.empty(0))
    AHb = AH @ b
    G = AH @ A if m >= n else None
    step = 1.0 / lipschitz(A)
    best = _Best(A, b, lam, zero)
    x = zero
    eps = IRLS_EPS_START
    trace = []
    it = 0
    extra = 0
    while it < opts.max_iters:
        it += 1
        winv = np.sqrt(np.abs(x) ** 2 + eps * eps)
        try:
            if G is None:
                M = (A * winv) @ AH
                M[np.diag_indices(m)] += lam
                x_new = winv * (AH @ np.linalg.solve(M, b))
            else:
                M = G.copy()
                M[np.diag_indices(n)] += lam / winv
                x_new = np.linalg.solve(M, AHb)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                f"IRLS linear system singular at iteration {it} "
                f"(eps={eps:.3e}, lambda={lam:.3e}): {exc}"
            ) from None
        if not np.all(np.isfinite(x_new)):
            raise NumericalError(f"IRLS produced a non-finite iterate at iteration {it} (eps={eps:.3e})")
        change = np.linalg.norm(x_new - x) / max(np.linalg.norm(x_new), np.finfo(float).tiny)
        x = x_new
        best.offer(x)
        if opts.record_trace:
            trace.append(best.f)
        at_floor = eps <= IRLS_EPS_FLOOR
        last = it == opts.max_iters or (at_floor and change <= opts.tol)
        settled = change < IRLS_SETTLE or change < math.sqrt(eps) / 100.0
        if last or (settled and not at_floor):
            extra += _finish(A, AH, b, lam, x, step, thr, best,
                             polish=last or eps <= FINISH_EPS,
                             iters=FINAL_FINISH_ITERS if last else FINISH_ITERS)
            if best.kkt <= thr or last:
                break
            eps = max(eps * IRLS_EPS_RATE, IRLS_EPS_FLOOR)
    return SolverResult(best.x, best.f, best.kkt, 0.0, it + extra, bool(best.kkt <= thr),
                        "lasso_irls", np.array(trace))


class _Best:
    """Lowest-objective point seen so far, with its KKT residual."""

    def __init__(self, A, b, lam, x):
        self.A, self.b, self.lam = A, b, lam
        self.x, self.f = x, lasso_objective(A, b, lam, x)
        self.kkt = lasso_kkt_residual(A, b, lam, x)

    def offer(self, x):
        if x is None:
            return False
        f = lasso_objective(self.A, self.b, self.lam, x)
        if f < self.f or (f == self.f and lasso_kkt_residual(self.A, self.b, self.lam, x) < self.kkt):
            self.x, self.f = x, f
            self.kkt = lasso_kkt_residual(self.A, self.b, self.lam, x)
            return True
        return False


def _finish(A, AH, b, lam, x, step, thr, best, polish=True, iters=FINISH_ITERS):
    """Active-set refinement, then optionally a short FISTA run; returns gradient steps used."""
    best.offer(_active_set(A, AH, b, lam, x, thr))
    if best.kkt <= thr or not polish:
        return 0
    out = _kernels.fista_lasso(A, AH, b, lam, step, best.x, iters, thr, False)
    best.offer(np.asarray(out[0]))
    return int(out[1])


def _active_set(A, AH, b, lam, x, thr, rel=1e-3):
    """Exact Lasso stationary point grown from the large entries of ``x``.

    On a support ``S`` with phases ``p`` the stationarity equations read
    ``A_S^H A_S x_S = A_S^H b - lam * p``. Entries whose solution turns
    against their phase are dropped; the most violating outside coordinate is
    added. For real data at most ``m`` of the largest entries seed the support. Stops when the KKT residual is at most ``thr``, when an index
    would be re-added right after being dropped, or after ``m`` changes.
    """
    mag = np.abs(x)
    top = mag.max()
    if top == 0:
        return None
    m, n = A.shape
    S = [int(j) for j in np.flatnonzero(mag > rel * top)]
    if len(S) > m and not np.iscomplexobj(A):
        S = [int(j) for j in np.argsort(-mag, kind="stable")[:m]]
    ph = {j: x[j] / mag[j] for j in S}
    AHb = AH @ b
    out = None
    dropped = None
    for _ in range(m):
        if not S or len(S) > m:
            break
        idx = np.array(S)
        P = np.array([ph[j] for j in S])
        Gs = AH[idx] @ A[:, idx]
        try:
            for _ in range(8):
                xs = np.linalg.solve(Gs, AHb[idx] - lam * P)
                ms = np.abs(xs)
                align = (np.conj(P) * xs).real
                Pn = np.where(ms > 0, xs / np.where(ms > 0, ms, 1.0), P)
                moved = np.abs(Pn - P).max()
                P = Pn
                if moved < 1e-13:
                    break
        except np.linalg.LinAlgError:
            break
        bad = np.flatnonzero(align <= 0)
        if bad.size:
            k = int(bad[np.argmin(align[bad])])
            dropped = S.pop(k)
            del ph[dropped]
            continue
        ph.update(zip(S, P))
        out = np.zeros(n, dtype=np.result_type(A, b))
        out[idx] = xs
        g = AH @ (A @ out - b)
        viol = np.abs(g) - lam
        viol[idx] = -np.inf
        j = int(np.argmax(viol))
        if viol[j] <= thr or j == dropped:
            break
        S.append(j)
        ph[j] = -g[j] / abs(g[j])
    return out


# -- constrained programs ---------------------------------------------------------------

def _pdhg_result(x, it, gap, conv, program, extra_feas):
    x = np.asarray(x)
    return SolverResult(x, l1_norm(x), float(abs(gap)), float(extra_feas(x)), int(it),
                        bool(conv), program)


def qcbp(D, b, eta, opts=None):
    """Quadratically constrained basis pursuit by Chambolle-Pock.

    Steps ``sigma = tau = 0.99 / |A|_2``. Convergence requires the primal-dual
    gap and the feasibility residual ``max(0, |Ax - b|_2 - eta)`` both to be at
    most ``tol * (1 + |b|_2)``; otherwise the best checked iterate is returned
    with ``converged=False``.

    Raises
    ------
    ConditionError
        If ``eta`` is below the least-squares residual, so no feasible point exists.
    """
    _check_eta(eta)
    opts = _opts(opts)
    A, AH, b = _operands(D, b)
    n = A.shape[1]
    bn = float(np.linalg.norm(b))

    def feas(x):
        return max(0.0, float(np.linalg.norm(A @ x - b)) - eta)

    if eta >= bn:
        return SolverResult(np.zeros(n, dtype=A.dtype), 0.0, 0.0, 0.0, 0, True, "qcbp")
    xls = np.linalg.lstsq(A, b, rcond=None)[0]
    rmin = float(np.linalg.norm(A @ xls - b))
    if eta < rmin * (1.0 - 1e-9) - 1e-15:
        raise ConditionError(
            f"QCBP infeasible: eta={eta:.6g} is below the least-squares residual {rmin:.6g}"
        )
    step = PDHG_SCALE / math.sqrt(lipschitz(A))
    tol_abs = opts.tol * (1.0 + bn)
    x, it, gap, _feas, conv = _kernels.pdhg_l1(A, AH, b, float(eta), 1, step, step,
                                           np.zeros(n, dtype=A.dtype), opts.max_iters,
                                           tol_abs, CHECK_EVERY)
    return _pdhg_result(x, it, gap, conv, "qcbp", feas)


def dantzig(D, b, eta, opts=None):
    """Dantzig selector by Chambolle-Pock with ``K = A^H A`` and a sup-norm ball.

    The feasibility residual is ``max(0, |A^H (b - Ax)|_inf - eta)``; the
    convergence rule is that of :func:`qcbp`.
    """
    _check_eta(eta)
    opts = _opts(opts)
    A, AH, b = _operands(D, b)
    n = A.shape[1]
    bn = float(np.linalg.norm(b))
    c = AH @ b
    K = np.ascontiguousarray(AH @ A)
    K = 0.5 * (K + K.conj().T)
    KH = np.ascontiguousarray(K.conj().T)

    def feas(x):
        return max(0.0, float(np.abs(c - K @ x).max()) - eta)

    if eta >= float(np.abs(c).max()):
        return SolverResult(np.zeros(n, dtype=A.dtype), 0.0, 0.0, 0.0, 0, True, "dantzig")
    step = PDHG_SCALE / float(np.linalg.norm(K, 2))
    tol_abs = opts.tol * (1.0 + bn)
    x, it, gap, _feas, conv = _kernels.pdhg_l1(K, KH, c, float(eta), 0, step, step,
                                           np.zeros(n, dtype=A.dtype), opts.max_iters,
                                           tol_abs, CHECK_EVERY)
    return _pdhg_result(x, it, gap, conv, "dantzig", feas)


def basis_pursuit(D, b, opts=None):
    """Noiseless limit: :func:`qcbp` with ``eta = 1e-12 (1 + |b|_2)``."""
    b = np.asarray(b)
    eta = BP_ETA_REL * (1.0 + float(np.linalg.norm(b)))
    res = qcbp(D, b, eta, opts)
    res.program = "bp"
    return res


PROGRAMS = {
    "lasso": lasso,
    "lasso_irls": lasso_irls,
    "qcbp": qcbp,
    "ds": dantzig,
    "dantzig": dantzig,
}


# -- diagnostics -----------------------------------------------------------------------

def top_s_indices(v, s):
    """Indices of the ``s`` largest moduli; ties broken by ascending index."""
    order = np.lexsort((np.arange(len(v)), -np.abs(v)))
    return order[:s]


def split_max(v, s):
    """``(v_max(s), v_-max(s))``."""
    v = np.asarray(v)
    head = np.zeros_like(v)
    idx = top_s_indices(v, s)
    head[idx] = v[idx]
    return head, v - head


def tail_norm(x, s):
    """``|x_-max(s)|_1``."""
    return l1_norm(split_max(x, s)[1])


@dataclass(frozen=True)
class ConeResiduals:
    """Slacks of the cone inequalities for ``h = x_hat - x0``.

    ``cone_slack_ds``: ``|h_max|_1 + 2|x0_-max|_1 - |h_-max|_1``.
    ``cone_slack_lasso``: ``3|h_max|_1 + 4|x0_-max|_1 - |h_-max|_1``.
    ``tube``: ``|A^H A h|_inf`` when a dictionary is supplied, else NaN.
    """

    tube: float
    cone_slack_ds: float
    cone_slack_lasso: float

    def cone_slack(self, form="ds"):
        return self.cone_slack_lasso if form == "lasso" else self.cone_slack_ds


def cone_residuals(x_hat, x0, s, D=None):
    """Cone-constraint slacks of the error ``x_hat - x0`` at sparsity ``s``."""
    x_hat = np.asarray(x_hat)
    x0 = np.asarray(x0)
    if x_hat.shape != x0.shape or x_hat.ndim != 1:
        raise ContractError(f"shape mismatch: {x_hat.shape} vs {x0.shape}")
    if not 1 <= s <= x0.size:
        raise DomainError(f"s must lie in [1, {x0.size}], got {s}")
    h = x_hat - x0
    head, rest = split_max(h, s)
    hm, hr = l1_norm(head), l1_norm(rest)
    xt = tail_norm(x0, s)
    tube = float("nan")
    if D is not None:
        A = D.entries
        tube = float(np.abs(A.conj().T @ (A @ h)).max())
    return ConeResiduals(tube, hm + 2.0 * xt - hr, 3.0 * hm + 4.0 * xt - hr)
