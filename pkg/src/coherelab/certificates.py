"""Recovery certificates and a-priori error bounds from cumulative coherence.

Every condition is evaluated on a :class:`~coherelab.coherence.CoherenceProfile`
with the convention ``mu1(0) = 0``. "log" is the natural logarithm.

Dantzig selector / QCBP, ``1 <= a <= s``, ``C = sqrt((2s - a)/a)``::

    mu1(a-1) + C mu1(2s-1) < 1

Lasso, ``D = sqrt((4s - a)/a)``, noise with ``|A^H z|_inf <= lam/2``::

    mu1(a-1) + mu1(4s-1) < 1/D

Restricted eigenvalue constant ``K(s, tau)`` (basic and shifted forms)::

    K >= (1 - mu1(s-1) - tau sqrt(s) mu1(s)) / sqrt(1 + mu1(s-1))
    K >= (1 - mu1(s+a-1) - tau sqrt(s/b) mu1(s+a+b-1)) / sqrt(1 + mu1(s+a-1)),  1 <= b <= 4a
"""
import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (ConditionError, ContractError, DegenerateBoundError, DomainError,
                     RangeError)


class CertificateKind(enum.Enum):
    DS_QCBP = "ds_qcbp"
    LASSO = "lasso"
    MIP_DS = "mip_ds"
    MIP_LASSO = "mip_lasso"
    RE = "re"


@dataclass(frozen=True)
class Certificate:
    """A sufficient condition evaluated on a profile.

    ``holds`` is ``margin > 0``; ``bound`` is set only when the condition holds
    and the certificate implies a number (the RE lower bound on ``K``).
    """

    kind: CertificateKind
    params: dict
    holds: bool
    margin: float
    bound: float = None

    def __post_init__(self):
        if self.holds != (self.margin > 0):
            raise ContractError("certificate flag disagrees with its margin")
        if self.bound is not None and not self.holds:
            raise ContractError("a failing certificate cannot carry a bound")


def _mu1(P, k):
    if k > P.s_max:
        raise RangeError(f"profile stops at s_max={P.s_max}; mu1({k}) is needed")
    return P.mu1(k)


def _check_as(s, a):
    if not (isinstance(s, (int, np.integer)) and isinstance(a, (int, np.integer))):
        raise DomainError(f"s and a must be integers, got s={s!r}, a={a!r}")
    if not 1 <= a <= s:
        raise DomainError(f"need 1 <= a <= s, got a={a}, s={s}")


def c_const(s, a):
    """``sqrt((2s - a)/a)``."""
    return math.sqrt((2 * s - a) / a)


def d_const(s, a):
    """``sqrt((4s - a)/a)``."""
    return math.sqrt((4 * s - a) / a)


# -- Dantzig selector and QCBP --------------------------------------------------------

def ds_qcbp_condition(P, s, a=None):
    """Certificate ``mu1(a-1) + C mu1(2s-1) < 1``; ``a`` defaults to ``s``."""
    a = s if a is None else a
    _check_as(s, a)
    margin = 1.0 - _mu1(P, a - 1) - c_const(s, a) * _mu1(P, 2 * s - 1)
    return Certificate(CertificateKind.DS_QCBP, {"s": s, "a": a}, margin > 0, margin)


def _ds_qcbp_terms(P, s, a, tail):
    cert = ds_qcbp_condition(P, s, a)
    if not cert.holds:
        raise ConditionError(
            f"condition not satisfied: mu1(a-1) + C mu1(2s-1) < 1 fails (margin {cert.margin:.6g}, s={s}, a={a})"
        )
    if tail < 0:
        raise DomainError(f"tail must be >= 0, got {tail}")
    a = cert.params["a"]
    delta = cert.margin
    c = c_const(s, a)
    tail_coef = (math.sqrt(2.0) * s * _mu1(P, 2 * s - 1) / a) / (delta * c) + 1.0
    return delta, tail_coef * 2.0 * tail / math.sqrt(s)


def ds_error_bound(P, s, a, eta, tail):
    """Error bound for the Dantzig selector at noise level ``eta``.

    ``tail`` is ``|x_-max(s)|_1`` of the target vector.
    """
    delta, tail_term = _ds_qcbp_terms(P, s, a, tail)
    return 2.0 * math.sqrt(2.0) * math.sqrt(s) / delta * eta + tail_term


def qcbp_error_bound(P, s, a, eta, tail):
    """Error bound for QCBP with ``|z|_2 <= eta``."""
    a = s if a is None else a
    delta, tail_term = _ds_qcbp_terms(P, s, a, tail)
    return 2.0 * math.sqrt(2.0) * math.sqrt(1.0 + _mu1(P, a - 1)) / delta * eta + tail_term


# -- Lasso ---------------------------------------------------------------------------

def lasso_condition(P, s, a=None):
    """Certificate ``mu1(a-1) + mu1(4s-1) < 1/D``; ``a`` defaults to ``s``."""
    a = s if a is None else a
    _check_as(s, a)
    margin = 1.0 / d_const(s, a) - _mu1(P, a - 1) - _mu1(P, 4 * s - 1)
    return Certificate(CertificateKind.LASSO, {"s": s, "a": a}, margin > 0, margin)


def lasso_error_bound(P, s, a, lam, tail):
    """Error bound for the Lasso when ``|A^H z|_inf <= lam/2``.

    Raises
    ------
    ConditionError
        If the Lasso condition fails.
    DegenerateBoundError
        If ``mu1(a-1) = 0``, where the leading coefficient has a zero
        denominator (always the case for ``a = 1``).
    """
    a = s if a is None else a
    cert = lasso_condition(P, s, a)
    if not cert.holds:
        raise ConditionError(
            f"condition not satisfied: mu1(a-1) + mu1(4s-1) < 1/D fails (margin {cert.margin:.6g}, s={s}, a={a})"
        )
    if tail < 0:
        raise DomainError(f"tail must be >= 0, got {tail}")
    mu_a = _mu1(P, a - 1)
    if mu_a == 0.0:
        raise DegenerateBoundError(
            f"degenerate denominator: mu1(a-1) = 0 at a={a}; the Lasso bound is unavailable"
        )
    d = d_const(s, a)
    q = 1.0 - d * (_mu1(P, 4 * s - 1) + mu_a)
    lead = 9.0 * (1.0 + mu_a) / (4.0 * q * mu_a) * math.sqrt(s) * lam
    return lead + (8.0 / (3.0 * q * d) + 0.5) * 2.0 * tail / math.sqrt(s)


# -- MIP thresholds ------------------------------------------------------------------

def mip_thresholds(mu, program):
    """Largest ``s`` certified by coherence alone.

    ``program`` is ``"ds"``/``"qcbp"`` (``mu < 1/(3s - 2)``) or ``"lasso"``
    (``mu < 1/(sqrt(3)(5s - 2))``). Returns 0 when no ``s >= 1`` qualifies and
    ``math.inf`` when ``mu <= 0``.
    """
    if program in ("ds", "qcbp", "bp"):
        def ok(s):
            return mu < 1.0 / (3 * s - 2)
        guess = (1.0 / mu + 2.0) / 3.0 if mu > 0 else math.inf
    elif program == "lasso":
        def ok(s):
            return mu < 1.0 / (math.sqrt(3.0) * (5 * s - 2))
        guess = (1.0 / (math.sqrt(3.0) * mu) + 2.0) / 5.0 if mu > 0 else math.inf
    else:
        raise DomainError(f"unknown program {program!r}")
    if mu <= 0:
        return math.inf
    s = max(int(math.floor(guess)) + 2, 1)
    while s >= 1 and not ok(s):
        s -= 1
    return s


def max_certified_sparsity(P, kind="ds"):
    """Largest ``s`` (with ``a = s``) whose certificate holds within the profile length."""
    if kind in ("ds", "qcbp", "bp"):
        cond, order = ds_qcbp_condition, 2
    elif kind == "lasso":
        cond, order = lasso_condition, 4
    else:
        raise DomainError(f"unknown certificate kind {kind!r}")
    best = 0
    s = 1
    while order * s - 1 <= P.s_max:
        if cond(P, s).holds:
            best = s
        s += 1
    return best


# -- prediction loss (Lasso vs Dantzig selector) ---------------------------------------

def theory_lambda(sigma, n):
    """``2 sigma sqrt(2 log n)``, the Lasso weight paired with ``eta = lambda``."""
    return 2.0 * sigma * math.sqrt(2.0 * math.log(n))


def gaussian_event_probability(n):
    """``1 - 1/(2 sqrt(pi log n))``."""
    return 1.0 - 1.0 / (2.0 * math.sqrt(math.pi * math.log(n)))


@dataclass(frozen=True)
class PredictionGapBound:
    bound: float
    prob: float


def prediction_gap_bound(P, s, n, sigma, lasso_tail):
    """Bound on ``| |A x_ds - Ax|^2 - |A x_lasso - Ax|^2 |``.

    ``8 (9/(1 - mu1(s-1)) + 9/4) log(n) s sigma^2 + (2 lasso_tail / sqrt(s))^2``,
    valid with probability at least ``1 - 1/(2 sqrt(pi log n))`` when
    ``lam = 2 sigma sqrt(2 log n)`` and ``eta = lam``.
    """
    if s < 1:
        raise DomainError(f"s must be >= 1, got {s}")
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    if n < 2:
        raise DomainError(f"n must be >= 2, got {n}")
    mu = _mu1(P, s - 1)
    if not mu < 1.0:
        raise ConditionError(f"condition not satisfied: mu1(s-1) = {mu:.6g} >= 1")
    ln = math.log(n)
    bound = 8.0 * (9.0 / (1.0 - mu) + 2.25) * ln * s * sigma ** 2 \
        + (2.0 * lasso_tail / math.sqrt(s)) ** 2
    return PredictionGapBound(bound, gaussian_event_probability(n))


# -- oracle inequality -----------------------------------------------------------------

@dataclass(frozen=True)
class OracleTerms:
    """Constants of the oracle inequality for the Dantzig selector.

    ``lambda_ = sigma sqrt(2 log n)``, ``eta_star = 3 lambda_/2``,
    ``iota = lambda_^2 / 8`` and ``S0 = {j : |x_j| >= sigma}``.
    """

    sigma: float
    n: int
    lambda_: float
    eta_star: float
    iota: float
    S0: tuple = field(default_factory=tuple)

    @classmethod
    def build(cls, sigma, n, x=None):
        if not sigma >= 0:
            raise DomainError(f"sigma must be >= 0, got {sigma}")
        lam = sigma * math.sqrt(2.0 * math.log(n))
        S0 = () if x is None else tuple(int(j) for j in np.flatnonzero(np.abs(x) >= sigma))
        return cls(sigma, n, lam, 1.5 * lam, lam * lam / 8.0, S0)


def g_value(xi, x, sigma):
    """``sigma^2 |xi|_0 + |x - xi|_2^2``."""
    xi, x = _pair(xi, x)
    d = x - xi
    return sigma ** 2 * np.count_nonzero(xi) + float(np.vdot(d, d).real)


def h_value(xi, x, D, iota):
    """``iota |xi|_0 + |Ax - A xi|_2^2``."""
    xi, x = _pair(xi, x)
    if x.size != D.n:
        raise ContractError(f"vectors have length {x.size}, dictionary has n={D.n}")
    r = D.entries @ (x - xi)
    return iota * np.count_nonzero(xi) + float(np.vdot(r, r).real)


def _pair(xi, x):
    xi = np.asarray(xi)
    x = np.asarray(x)
    if xi.shape != x.shape or x.ndim != 1:
        raise ContractError(f"shape mismatch: {xi.shape} vs {x.shape}")
    return xi, x


@dataclass(frozen=True)
class HMinimizer:
    xi_bar: np.ndarray
    H_min: float
    lemma_lhs: float
    lemma_rhs: float
    exhaustive: bool

    @property
    def lemma_ok(self):
        return self.lemma_lhs <= self.lemma_rhs + 1e-8


BRUTEFORCE_MAX_N = 20
BRUTEFORCE_MAX_CAP = 12


def h_minimizer_bruteforce(x, D, iota, support_cap=None):
    """Minimize ``H(., x)`` over all ``xi`` with at most ``support_cap`` nonzeros.

    Every support up to the cap is enumerated and ``xi`` is the least-squares
    fit of ``Ax`` on it. Supports larger than ``rank(A)`` never lower ``H``
    (their span is reached by a subset), so the enumeration stops at
    ``min(support_cap, rank(A))`` without loss.

    Also evaluates ``|A^H (A xi_bar - Ax)|_inf`` against ``lambda/2`` with
    ``lambda = sqrt(8 iota)``; when the enumeration is exhaustive this is a
    theorem and a violation raises.
    """
    x = np.asarray(x)
    n = D.n
    if x.shape != (n,):
        raise ContractError(f"x must have length n={n}, got shape {x.shape}")
    cap = n if support_cap is None else int(support_cap)
    if not (n <= BRUTEFORCE_MAX_N or cap <= BRUTEFORCE_MAX_CAP):
        raise DomainError(
            f"brute force refused: n={n} > {BRUTEFORCE_MAX_N} and support_cap={cap} > {BRUTEFORCE_MAX_CAP}"
        )
    A = D.entries
    rank = int(np.linalg.matrix_rank(A))
    kmax = min(cap, rank)
    y = A @ x
    best_H = float(np.vdot(y, y).real)
    best = np.zeros(n, dtype=np.result_type(A, x))
    for k in range(1, kmax + 1):
        supports = np.array(list(itertools.combinations(range(n), k)))
        AT = A[:, supports].transpose(1, 0, 2)  # (batch, m, k)
        coef = np.linalg.pinv(AT) @ y
        res = y[None, :] - np.einsum("bmk,bk->bm", AT, coef)
        H = iota * k + np.einsum("bm,bm->b", res.conj(), res).real
        i = int(np.argmin(H))
        if H[i] < best_H:
            best_H = float(H[i])
            best = np.zeros(n, dtype=best.dtype)
            best[supports[i]] = coef[i]
    best_H = h_value(best, x, D, iota)
    lam = math.sqrt(8.0 * iota)
    lhs = float(np.abs(A.conj().T @ (A @ best - y)).max())
    exhaustive = cap >= rank
    out = HMinimizer(best, best_H, lhs, lam / 2.0, exhaustive)
    if exhaustive and not out.lemma_ok:
        raise ConditionError(
            f"feasibility of the H-minimizer violated: {lhs:.6g} > lambda/2 = {lam / 2:.6g}"
        )
    return out


def oracle_rhs(P, s, n, sigma, x):
    """``72 (5 + log n) / (1 - mu1(s-1) - mu1(2s-1))^2 * sum_j max(sigma^2, |x_j|^2)``.

    The sum runs over every coordinate, zeros included.
    """
    x = np.asarray(x)
    if x.shape != (n,):
        raise ContractError(f"x must have length n={n}, got shape {x.shape}")
    if np.count_nonzero(x) > s:
        raise ContractError(f"x has {np.count_nonzero(x)} nonzeros but s={s}")
    delta = 1.0 - _mu1(P, s - 1) - _mu1(P, 2 * s - 1)
    if not delta > 0:
        raise ConditionError(f"condition not satisfied: mu1(s-1) + mu1(2s-1) = {1 - delta:.6g} >= 1")
    total = float(np.maximum(sigma ** 2, np.abs(x) ** 2).sum())
    return 72.0 * (5.0 + math.log(n)) / delta ** 2 * total


# -- restricted eigenvalue -------------------------------------------------------------

def re_lower_bound(P, s, tau, a=None, b=None):
    """Lower bound on the RE constant ``K(s, tau)``.

    With ``a`` and ``b`` omitted the basic form is used; otherwise the shifted
    form with ``a >= 1`` and ``1 <= b <= 4a``.
    """
    if s < 1:
        raise RangeError(f"s must be >= 1, got {s}")
    if tau < 0:
        raise DomainError(f"tau must be >= 0, got {tau}")
    if a is None and b is None:
        mu_lo = _mu1(P, s - 1)
        lhs = mu_lo + tau * math.sqrt(s) * _mu1(P, s)
        params = {"s": s, "tau": tau, "variant": "basic"}
    else:
        if a is None or b is None or a < 1 or not 1 <= b <= 4 * a:
            raise RangeError(f"shifted form needs a >= 1 and 1 <= b <= 4a, got a={a}, b={b}")
        mu_lo = _mu1(P, s + a - 1)
        lhs = mu_lo + tau * math.sqrt(s / b) * _mu1(P, s + a + b - 1)
        params = {"s": s, "tau": tau, "variant": "shifted", "a": a, "b": b}
    margin = 1.0 - lhs
    holds = margin > 0
    bound = margin / math.sqrt(1.0 + mu_lo) if holds else None
    return Certificate(CertificateKind.RE, params, holds, margin, bound)


def re_empirical_upper(D, s, tau, samples, seed):
    """Smallest ``|Ax|_2 / |x_S|_2`` over random ``x`` in the cone
    ``|x_{S^c}|_1 <= tau |x_S|_1`` with random supports ``|S| <= s``.

    An upper estimate of ``K(s, tau)``.
    """
    if samples < 1:
        raise DomainError(f"samples must be >= 1, got {samples}")
    if not 1 <= s <= D.n:
        raise RangeError(f"s must lie in [1, {D.n}], got {s}")
    rng = np.random.default_rng(seed)
    A = D.matrix
    n = D.n
    cplx = not D.is_real
    worst = math.inf
    for _ in range(samples):
        k = int(rng.integers(1, s + 1))
        perm = rng.permutation(n)
        S, rest = perm[:k], perm[k:]
        x = np.zeros(n, dtype=A.dtype)
        x[S] = _draw(rng, k, cplx)
        if tau > 0 and rest.size:
            width = int(rng.integers(1, rest.size + 1))
            idx = rest[:width]
            v = _draw(rng, width, cplx)
            budget = tau * float(np.abs(x[S]).sum()) * rng.random() ** 0.25
            x[idx] = v * (budget / float(np.abs(v).sum()))
        ratio = float(np.linalg.norm(A @ x)) / float(np.linalg.norm(x[S]))
        worst = min(worst, ratio)
    return worst


def _draw(rng, k, cplx):
    v = rng.standard_normal(k)
    if cplx:
        v = v + 1j * rng.standard_normal(k)
    return v


# -- sweeps ----------------------------------------------------------------------------

def certify_rows(P, program, s_values, tau=1.0, eta=None, lam=None, tail=0.0):
    """Rows ``(s, holds, margin, bound)`` with ``a = s``.

    ``bound`` is the error bound when ``eta`` (DS/QCBP) or ``lam`` (Lasso) is
    given and the condition holds, the RE lower bound for ``re``, else None.
    """
    rows = []
    for s in s_values:
        if program in ("ds", "qcbp"):
            cert = ds_qcbp_condition(P, s)
            bound = None
            if cert.holds and eta is not None:
                fn = ds_error_bound if program == "ds" else qcbp_error_bound
                bound = fn(P, s, s, eta, tail)
        elif program == "lasso":
            cert = lasso_condition(P, s)
            bound = None
            if cert.holds and lam is not None:
                try:
                    bound = lasso_error_bound(P, s, s, lam, tail)
                except DegenerateBoundError:
                    bound = None
        elif program == "re":
            cert = re_lower_bound(P, s, tau)
            bound = cert.bound
        else:
            raise DomainError(f"unknown program {program!r}")
        rows.append((s, cert.holds, cert.margin, bound))
    return rows


def max_s_for(P, program):
    """Largest ``s`` for which ``program``'s condition can be evaluated on ``P``."""
    order = {"ds": 2, "qcbp": 2, "lasso": 4, "re": 1}[program]
    return (P.s_max + 1) // order if order > 1 else P.s_max
