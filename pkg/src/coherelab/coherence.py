"""Gram data, coherence, cumulative coherence and sampled inequality checks.

The cumulative coherence of order ``s`` is the largest total modulus of
correlation between one column and any ``s`` other columns,

    mu1(s) = max_i  max_{|S| <= s, i not in S}  sum_{j in S} |<A_i, A_j>|,

which equals the sum of the ``s`` largest off-diagonal moduli in column ``i``
of the Gram matrix, maximized over ``i``. By convention ``mu1(0) = 0``.
"""
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ContractError, DomainError, RangeError

VIOLATION_TOL = 1e-10


def _require_normalized(D):
    if not D.normalized:
        raise ContractError("dictionary columns are not unit-norm; normalize it first")


def gram(D):
    """``A^H A`` (float64 for real dictionaries)."""
    _require_normalized(D)
    A = D.matrix
    G = A.conj().T @ A
    # exact Hermitian symmetry and unit diagonal for downstream consumers
    G = 0.5 * (G + G.conj().T)
    return G


def _offdiag_moduli(D):
    M = np.abs(gram(D))
    np.fill_diagonal(M, 0.0)
    return np.ascontiguousarray(M)


def coherence(D):
    """Largest modulus of an off-diagonal Gram entry."""
    if D.n < 2:
        raise DomainError("coherence needs at least two columns")
    return float(_offdiag_moduli(D).max())


@dataclass(frozen=True)
class CoherenceProfile:
    """Cumulative coherence values ``mu1(0..s_max)``.

    ``values[s]`` is ``mu1(s)``; ``values[0]`` is the empty-sum 0.
    """

    n: int
    mu: float
    values: tuple
    s_max: int

    def mu1(self, s):
        if not 0 <= s <= self.s_max:
            raise RangeError(f"mu1({s}) requested but the profile stops at s_max={self.s_max}")
        return self.values[s]

    def __getitem__(self, s):
        return self.mu1(s)

    def scaled(self, factor):
        """Profile with every value multiplied by ``factor`` (for sensitivity studies)."""
        vals = tuple(factor * v for v in self.values)
        return CoherenceProfile(self.n, vals[1] if self.s_max >= 1 else 0.0, vals, self.s_max)

    @classmethod
    def from_values(cls, n, values):
        """Build from ``mu1(1..s_max)``, e.g. a closed form."""
        vals = (0.0,) + tuple(float(v) for v in values)
        return cls(n, vals[1] if len(vals) > 1 else 0.0, vals, len(vals) - 1)


def profile(D, s_max):
    """Cumulative coherence profile up to ``s_max``."""
    if D.n < 2:
        raise DomainError("profile needs at least two columns")
    if not 1 <= s_max <= D.n - 1:
        raise RangeError(f"s_max must lie in [1, {D.n - 1}], got {s_max}")
    vals = _kernels.profile_from_moduli(_offdiag_moduli(D), int(s_max))
    # prefix sums of nonnegative terms are monotone; guard the last ulp
    vals = np.maximum.accumulate(vals)
    values = (0.0,) + tuple(float(v) for v in vals)
    return CoherenceProfile(D.n, values[1], values, int(s_max))


def cumulative_coherence(D, s):
    """``mu1(s)`` for ``1 <= s <= n-1``."""
    if not isinstance(s, (int, np.integer)) or not 1 <= s <= D.n - 1:
        raise RangeError(f"s must lie in [1, {D.n - 1}], got {s!r}")
    return profile(D, s).mu1(s)


def ric_upper_bound(P, s):
    """``mu1(s-1)``, an upper bound on the restricted isometry constant ``delta_s``."""
    if not 2 <= s <= P.s_max + 1:
        raise RangeError(f"s must lie in [2, {P.s_max + 1}], got {s}")
    return P.mu1(s - 1)


# -- sampled verifiers ----------------------------------------------------------

@dataclass(frozen=True)
class VerificationReport:
    """Outcome of a sampled inequality check.

    ``max_violation`` is the largest ``lhs - rhs`` seen on unit-normalized
    samples (negative when every sample holds strictly).
    """

    name: str
    trials: int
    max_violation: float
    violations: int
    tol: float = VIOLATION_TOL

    @property
    def ok(self):
        return self.violations == 0


def _report(name, excess, tol=VIOLATION_TOL):
    excess = np.asarray(excess, dtype=float)
    return VerificationReport(name, int(excess.size), float(excess.max()),
                              int(np.count_nonzero(excess > tol)), tol)


def _values(rng, shape, complex_):
    v = rng.standard_normal(shape)
    if complex_:
        v = v + 1j * rng.standard_normal(shape)
    return v


def _supports(rng, n, k, trials):
    return np.argsort(rng.random((trials, n)), axis=1)[:, :k]


def _check_trials(trials):
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")


def _profile_for(D, order, P=None):
    if order <= 0:
        return 0.0
    if P is not None and order <= P.s_max:
        return P.mu1(order)
    return profile(D, order).mu1(order)


def verify_quasi_isometry(D, s, trials, seed, P=None):
    """Check ``(1 - mu1(s-1))|x|^2 <= |Ax|^2 <= (1 + mu1(s-1))|x|^2`` on random s-sparse x."""
    _check_trials(trials)
    if not 1 <= s <= D.n:
        raise RangeError(f"s must lie in [1, {D.n}], got {s}")
    mu = _profile_for(D, s - 1, P)
    rng = np.random.default_rng(seed)
    A = D.matrix
    supp = _supports(rng, D.n, s, trials)
    X = np.zeros((trials, D.n), dtype=A.dtype)
    np.put_along_axis(X, supp, _values(rng, (trials, s), not D.is_real), axis=1)
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    e = np.linalg.norm(X @ A.T, axis=1) ** 2
    excess = np.maximum((1.0 - mu) - e, e - (1.0 + mu))
    return _report("quasi_isometry", excess)


def verify_restricted_orthogonality(D, s, t, trials, seed, P=None):
    """Check ``|<Ax, Ay>| <= mu1(s+t-1)|x||y|`` for disjoint supports, and
    ``|<Ax, Ay> - <x, y>| <= mu1(s+t-1)|x||y|`` for independently drawn supports."""
    _check_trials(trials)
    if s < 1 or t < 1 or s + t > D.n:
        raise RangeError(f"need s, t >= 1 and s + t <= {D.n}, got s={s}, t={t}")
    mu = _profile_for(D, s + t - 1, P)
    rng = np.random.default_rng(seed)
    A = D.matrix
    cplx = not D.is_real

    supp = _supports(rng, D.n, s + t, trials)
    X = np.zeros((trials, D.n), dtype=A.dtype)
    Y = np.zeros_like(X)
    np.put_along_axis(X, supp[:, :s], _values(rng, (trials, s), cplx), axis=1)
    np.put_along_axis(Y, supp[:, s:], _values(rng, (trials, t), cplx), axis=1)
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    Y /= np.linalg.norm(Y, axis=1, keepdims=True)
    disjoint = np.abs(np.einsum("ti,ti->t", (X @ A.T).conj(), Y @ A.T)) - mu

    sx = _supports(rng, D.n, s, trials)
    sy = _supports(rng, D.n, t, trials)
    X = np.zeros((trials, D.n), dtype=A.dtype)
    Y = np.zeros_like(X)
    np.put_along_axis(X, sx, _values(rng, (trials, s), cplx), axis=1)
    np.put_along_axis(Y, sy, _values(rng, (trials, t), cplx), axis=1)
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    Y /= np.linalg.norm(Y, axis=1, keepdims=True)
    inner_a = np.einsum("ti,ti->t", (X @ A.T).conj(), Y @ A.T)
    inner = np.einsum("ti,ti->t", X.conj(), Y)
    general = np.abs(inner_a - inner) - mu
    return _report("restricted_orthogonality", np.concatenate([disjoint, general]))


def verify_polytope_bound(D, s1, s2, alpha, trials, seed, P=None):
    """Check ``|<Ax, Ay>| <= alpha sqrt(s2) mu1(s1+s2-1)|x|`` when ``y`` is
    supported off ``supp(x)`` with ``|y|_1 <= alpha s2`` and ``|y|_inf <= alpha``.

    Samples alternate between three kinds of ``y``: exactly ``s2``-sparse with
    entries of modulus ``alpha``, sparse with smaller entries, and dense over
    the whole complement of ``supp(x)`` scaled onto the constraint set.
    """
    _check_trials(trials)
    if s1 < 1 or s2 < 1 or s1 + s2 > D.n:
        raise RangeError(f"need s1, s2 >= 1 and s1 + s2 <= {D.n}, got s1={s1}, s2={s2}")
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    mu = _profile_for(D, s1 + s2 - 1, P)
    rng = np.random.default_rng(seed)
    A = D.matrix
    cplx = not D.is_real
    n = D.n
    excess = np.empty(trials)
    for k in range(trials):
        perm = rng.permutation(n)
        sx, rest = perm[:s1], perm[s1:]
        x = np.zeros(n, dtype=A.dtype)
        x[sx] = _values(rng, s1, cplx)
        x /= np.linalg.norm(x)
        y = np.zeros(n, dtype=A.dtype)
        kind = k % 3
        if kind == 2:
            supp = rest
        else:
            supp = rest[:s2]
        ph = _values(rng, supp.size, cplx)
        ph /= np.abs(ph)
        if kind == 0:
            mag = np.full(supp.size, alpha)
        else:
            mag = rng.random(supp.size)
            mag *= min(alpha / mag.max(), alpha * s2 / mag.sum())
        y[supp] = ph * mag
        lhs = abs(np.vdot(A @ x, A @ y))
        excess[k] = lhs - alpha * np.sqrt(s2) * mu
    return _report("polytope_bound", excess)


def verify_norm_gap(n, trials, seed):
    """Check ``|x|_2 - |x|_1/sqrt(n) <= (sqrt(n)/4)(max|x_j| - min|x_j|)`` on random real x.

    Samples are unit-normalized; a third of them are two-level vectors, which
    are the near-extremal case of the inequality.
    """
    _check_trials(trials)
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((trials, n))
    two_level = np.arange(trials) % 3 == 2
    if n > 1 and np.any(two_level):
        k = two_level.sum()
        hi = rng.random((k, 1)) + 0.5
        lo = rng.random((k, 1)) * hi
        split = rng.integers(1, n, size=(k, 1))
        X[two_level] = np.where(np.arange(n)[None, :] < split, hi, lo)
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    ax = np.abs(X)
    lhs = np.linalg.norm(X, axis=1) - ax.sum(axis=1) / np.sqrt(n)
    rhs = np.sqrt(n) / 4.0 * (ax.max(axis=1) - ax.min(axis=1))
    return _report("norm_gap", lhs - rhs)
