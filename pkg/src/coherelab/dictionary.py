"""Measurement matrices ("dictionaries") with unit-norm columns.

Builders for the decaying, Dirac-Hadamard and Dirac-Fourier dictionaries,
seeded Gaussian test matrices, and a plain-text CSV reader/writer.
"""
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import hadamard

from .errors import ContractError, DomainError, MatrixParseError

NORM_TOL = 1e-12

# Exit point for the twin-atom scheme in :func:`decaying`.
_MAX_REDUNDANCY = 2


class Kind(enum.Enum):
    DECAYING = "decaying"
    DIRAC_HADAMARD = "dirac_hadamard"
    DIRAC_FOURIER = "dirac_fourier"
    GAUSSIAN = "gaussian"
    EXTERNAL = "external"


@dataclass(frozen=True, eq=False)
class Dictionary:
    """An ``m x n`` measurement matrix.

    Entries are always stored as ``complex128``; ``is_real`` records that every
    imaginary part is zero, so callers can take the real fast path through
    :attr:`matrix`.
    """

    entries: np.ndarray
    kind: Kind
    params: dict = field(default_factory=dict)
    normalized: bool = True
    is_real: bool = True

    def __post_init__(self):
        a = self.entries
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ContractError(f"dictionary must be a non-empty 2-D array, got shape {a.shape}")
        if a.dtype != np.complex128:
            raise ContractError("entries must be complex128; use from_array()")
        if self.is_real != bool(np.all(a.imag == 0)):
            raise ContractError("is_real flag disagrees with the entries")
        a.setflags(write=False)

    @property
    def m(self):
        return self.entries.shape[0]

    @property
    def n(self):
        return self.entries.shape[1]

    @property
    def shape(self):
        return self.entries.shape

    @property
    def matrix(self):
        """The entries as float64 for real dictionaries, complex128 otherwise."""
        if self.is_real:
            return self.entries.real
        return self.entries

    def column_norms(self):
        return np.linalg.norm(self.entries, axis=0)

    def __eq__(self, other):
        if not isinstance(other, Dictionary):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.entries, other.entries))

    __hash__ = None

    def __repr__(self):
        return f"Dictionary({self.m}x{self.n}, kind={self.kind.value}, params={self.params})"


def from_array(a, kind=Kind.EXTERNAL, params=None, normalize=True):
    """Wrap an array as a :class:`Dictionary`, optionally normalizing columns.

    With ``normalize=False`` the ``normalized`` flag is set by inspecting the
    column norms.
    """
    a = np.array(a, dtype=np.complex128, copy=True)
    if a.ndim != 2 or a.size == 0:
        raise ContractError(f"expected a non-empty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ContractError("matrix contains non-finite entries")
    norms = np.linalg.norm(a, axis=0)
    if normalize:
        zero = np.flatnonzero(norms == 0)
        if zero.size:
            raise ContractError(f"column {int(zero[0])} is identically zero and cannot be normalized")
        a /= norms
        normalized = True
    else:
        normalized = bool(np.all(np.abs(norms - 1.0) <= NORM_TOL))
    return Dictionary(a, kind, dict(params or {}), normalized, bool(np.all(a.imag == 0)))


def identity(m):
    return from_array(np.eye(m), Kind.EXTERNAL, {"identity": m})


def _decay_column(m, start, beta, upward=False):
    col = np.zeros(m)
    if upward:
        col[: start + 1] = beta ** np.arange(start, -1, -1)
    else:
        col[start:] = beta ** np.arange(m - start)
    return col * math.sqrt(1.0 - beta * beta)


def decaying(m, n, beta):
    """Decaying dictionary with atoms ``beta**(j - r_i) * sqrt(1 - beta**2)``.

    Atom ``i`` starts at row ``r_i = floor(i*m/n)``. When ``n > m`` two atoms
    share a start row; the second of each pair decays toward row 0 instead of
    toward row ``m-1`` so that no two columns coincide. Truncated atoms are
    renormalized.

    Parameters
    ----------
    m, n : int
        Rows and columns; ``n <= 2*m``.
    beta : float
        Decay rate in (0, 1).
    """
    _check_dims(m, n)
    if not 0.0 < beta < 1.0:
        raise DomainError(f"beta must lie in (0, 1), got {beta}")
    if n > _MAX_REDUNDANCY * m:
        raise DomainError(f"decaying dictionary supports n <= 2m, got m={m}, n={n}")
    a = np.empty((m, n))
    used = set()
    for i in range(n):
        r = (i * m) // n
        a[:, i] = _decay_column(m, r, beta, upward=r in used)
        used.add(r)
    return from_array(a, Kind.DECAYING, {"m": m, "n": n, "beta": beta})


def dirac_hadamard(m):
    """``[I_m, H_m / sqrt(m)]`` with the Sylvester Hadamard matrix ``H_m``."""
    if not isinstance(m, (int, np.integer)) or m < 1 or (m & (m - 1)) != 0:
        raise DomainError(f"m must be a power of 2, got {m}")
    a = np.hstack([np.eye(m), hadamard(m) / math.sqrt(m)])
    return from_array(a, Kind.DIRAC_HADAMARD, {"m": m})


def dirac_fourier(m):
    """``[I_m, F_m / sqrt(m)]`` where ``F_m[j, k] = exp(-2 pi i j k / m)``."""
    _check_dims(m, 1)
    jk = np.outer(np.arange(m), np.arange(m)) % m
    f = np.exp(-2j * np.pi * jk / m) / math.sqrt(m)
    return from_array(np.hstack([np.eye(m), f]), Kind.DIRAC_FOURIER, {"m": m})


def gaussian(m, n, seed):
    """I.i.d. standard normal entries from ``numpy.random.default_rng(seed)``, columns normalized."""
    _check_dims(m, n)
    rng = np.random.default_rng(seed)
    return from_array(rng.standard_normal((m, n)), Kind.GAUSSIAN, {"m": m, "n": n, "seed": seed})


def _check_dims(m, n):
    for name, v in (("m", m), ("n", n)):
        if not isinstance(v, (int, np.integer)) or v < 1:
            raise DomainError(f"{name} must be a positive integer, got {v!r}")


# -- CSV IO -------------------------------------------------------------------

def format_cell(z):
    """17 significant digits; complex cells as ``<re><sign><im>j``."""
    z = complex(z)
    if z.imag == 0:
        return f"{z.real:.17g}"
    return f"{z.real:.17g}{z.imag:+.17g}j"


def parse_cell(text, row=None, col=None):
    t = text.strip()
    if not t or " " in t:
        raise MatrixParseError(f"malformed cell {text!r}", row, col)
    try:
        if t.endswith("j"):
            return complex(t)
        return complex(float(t))
    except ValueError:
        raise MatrixParseError(f"malformed cell {text!r}", row, col) from None


def read_csv_matrix(path):
    """Parse a CSV matrix file into a complex128 array."""
    lines = Path(path).read_text().splitlines()
    rows = []
    width = None
    for lineno, line in enumerate(lines, start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise MatrixParseError(
                f"ragged row: expected {width} cells, found {len(cells)}", row=len(rows) + 1
            )
        rows.append([parse_cell(c, len(rows) + 1, k) for k, c in enumerate(cells, start=1)])
    if not rows:
        raise MatrixParseError("empty matrix file")
    return np.array(rows, dtype=np.complex128)


def write_csv_matrix(a, path):
    a = np.atleast_2d(np.asarray(a))
    with open(path, "w") as fh:
        for row in a:
            fh.write(",".join(format_cell(v) for v in row) + "\n")


def save_matrix(d, path):
    write_csv_matrix(d.entries, path)


def load_matrix(path, normalize=False):
    """Load a dictionary saved by :func:`save_matrix`; ``kind`` is EXTERNAL.

    Entries are reproduced exactly. Pass ``normalize=True`` to rescale columns.
    """
    a = read_csv_matrix(path)
    return from_array(a, Kind.EXTERNAL, {"path": str(path)}, normalize=normalize)


def read_vector(path):
    """A vector stored as a single CSV row or a single CSV column."""
    a = read_csv_matrix(path)
    if a.shape[0] != 1 and a.shape[1] != 1:
        raise MatrixParseError(f"expected a single row or column, got shape {a.shape}")
    v = a.ravel()
    return v.real.copy() if np.all(v.imag == 0) else v


# -- builder specs ("hadamard:64", "decaying:64,128,0.126", ...) ---------------

def parse_builder_spec(spec):
    """Build a dictionary from a textual spec.

    Accepted forms: ``decaying:m,n,beta``, ``hadamard:m``, ``fourier:m``,
    ``gaussian:m,n,seed``, ``identity:m``, ``file:<path>``.
    """
    name, sep, rest = spec.partition(":")
    if not sep:
        raise DomainError(f"builder spec {spec!r} is missing ':'")
    if name == "file":
        if not rest:
            raise DomainError("file: spec needs a path")
        return load_matrix(rest, normalize=True)
    args = rest.split(",") if rest else []

    def ints(k):
        if len(args) != k:
            raise DomainError(f"{name}: expected {k} argument(s), got {len(args)} in {spec!r}")
        out = []
        for tok in args:
            try:
                out.append(int(tok))
            except ValueError:
                raise DomainError(f"{name}: bad integer token {tok!r}") from None
        return out

    if name == "hadamard":
        return dirac_hadamard(*ints(1))
    if name == "fourier":
        return dirac_fourier(*ints(1))
    if name == "identity":
        return identity(*ints(1))
    if name == "gaussian":
        return gaussian(*ints(3))
    if name == "decaying":
        if len(args) != 3:
            raise DomainError(f"decaying: expected m,n,beta in {spec!r}")
        m, n = (int(t) if t.strip().lstrip("-").isdigit() else _bad(name, t) for t in args[:2])
        try:
            beta = float(args[2])
        except ValueError:
            raise DomainError(f"decaying: bad beta token {args[2]!r}") from None
        return decaying(m, n, beta)
    raise DomainError(f"unknown builder {name!r} in {spec!r}")


def _bad(name, tok):
    raise DomainError(f"{name}: bad integer token {tok!r}")
