"""Seeded recovery experiments: success rates, SNR curves and bound checks.

The default configuration is the standard benchmark: ``m = 64``, ``n = 128``,
``s = 2, 4, ..., 32``, 50 trials, ``lam = 1e-6``, 500 iterations and success
when the relative error is at most ``1e-3``, on the decaying, Dirac-Hadamard
and Dirac-Fourier dictionaries.

Every trial draws from its own generator seeded by
``(master_seed, crc32(dictionary), s, trial)``, so results do not depend on
execution order, thread count or which other dictionaries are in the run.
"""
import json
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import certificates as cert
from . import dictionary as dct
from .coherence import profile
from .errors import ConditionError, ContractError, DegenerateBoundError, DomainError
from .solvers import PROGRAMS, SolveOptions, basis_pursuit, dantzig, lasso, qcbp, tail_norm

SCHEMA_VERSION = 1
SNR_FLOOR_DB = -320.0
DEFAULT_BETA = 1.0 / (4.0 * math.sqrt(3.0) + 1.0)
KNOWN_DICTIONARIES = ("decaying", "dirac_hadamard", "dirac_fourier", "gaussian")


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of a success-rate or SNR run.

    ``lam`` may be the string ``"theory"`` for ``2 sigma sqrt(2 log n)``.
    Dictionary entries are names from ``KNOWN_DICTIONARIES`` or builder specs
    such as ``"hadamard:64"``.
    """

    m: int = 64
    n: int = 128
    s_list: tuple = tuple(range(2, 33, 2))
    trials: int = 50
    lam: object = 1e-6
    sigma: float = 0.0
    max_iters: int = 500
    success_tol: float = 1e-3
    program: str = "lasso_irls"
    dictionaries: tuple = ("decaying", "dirac_hadamard", "dirac_fourier")
    decay_beta: float = DEFAULT_BETA
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "s_list", tuple(int(s) for s in self.s_list))
        object.__setattr__(self, "dictionaries", tuple(self.dictionaries))
        self.validate()

    def validate(self):
        if self.m < 1 or self.n < 1:
            raise DomainError(f"m and n must be positive, got m={self.m}, n={self.n}")
        if self.trials < 1:
            raise DomainError(f"trials must be >= 1, got {self.trials}")
        if not self.success_tol > 0:
            raise DomainError(f"success_tol must be positive, got {self.success_tol}")
        if self.max_iters < 1:
            raise DomainError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.sigma < 0:
            raise DomainError(f"sigma must be >= 0, got {self.sigma}")
        bad = [s for s in self.s_list if not 1 <= s <= self.n]
        if bad:
            raise DomainError(f"sparsity levels must lie in [1, n={self.n}], got {bad}")
        if self.program not in PROGRAMS and self.program != "bp":
            raise DomainError(f"unknown program {self.program!r}")
        if not (self.lam == "theory" or (isinstance(self.lam, (int, float)) and self.lam >= 0)):
            raise DomainError(f"lam must be a number >= 0 or 'theory', got {self.lam!r}")
        for d in self.dictionaries:
            if d not in KNOWN_DICTIONARIES and ":" not in d:
                raise DomainError(f"unknown dictionary {d!r}")

    @property
    def lam_value(self):
        if self.lam == "theory":
            return cert.theory_lambda(self.sigma, self.n)
        return float(self.lam)

    def to_json(self):
        d = asdict(self)
        d["s_list"] = list(self.s_list)
        d["dictionaries"] = list(self.dictionaries)
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise DomainError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def build_dictionary(name, config):
    """The dictionary called ``name`` at the configured size."""
    m, n = config.m, config.n
    if ":" in name:
        D = dct.parse_builder_spec(name)
    elif name == "decaying":
        D = dct.decaying(m, n, config.decay_beta)
    elif name == "dirac_hadamard":
        D = dct.dirac_hadamard(m)
    elif name == "dirac_fourier":
        D = dct.dirac_fourier(m)
    elif name == "gaussian":
        D = dct.gaussian(m, n, config.master_seed)
    else:
        raise DomainError(f"unknown dictionary {name!r}")
    if D.shape != (m, n):
        raise DomainError(f"dictionary {name!r} has shape {D.shape}, config asks for {(m, n)}")
    return D


# -- signals and seeds -----------------------------------------------------------------

def trial_seed(master_seed, dictionary, s, trial):
    """64-bit seed derived from ``(master_seed, crc32(dictionary), s, trial)``."""
    ss = np.random.SeedSequence([int(master_seed), zlib.crc32(dictionary.encode()), int(s), int(trial)])
    lo, hi = ss.generate_state(2, np.uint32)
    return int(lo) | (int(hi) << 32)


def gen_sparse_signal(n, s, seed):
    """``s``-sparse vector with a uniformly random support and N(0, 1) nonzeros."""
    if not 1 <= s <= n:
        raise DomainError(f"need 1 <= s <= n, got s={s}, n={n}")
    return _sparse_signal(np.random.default_rng(seed), n, s)


def _sparse_signal(rng, n, s):
    x = np.zeros(n)
    support = rng.permutation(n)[:s]
    x[support] = rng.standard_normal(s)
    return x


def relative_error(x_r, x0):
    return float(np.linalg.norm(x_r - x0) / np.linalg.norm(x0))


def snr_db(x_r, x0):
    """``10 log10(|x_r - x0|_2 / |x0|_2)``, floored at -320 dB (lower is better)."""
    e = relative_error(x_r, x0)
    if e <= 0.0:
        return SNR_FLOOR_DB
    return max(10.0 * math.log10(e), SNR_FLOOR_DB)


@dataclass(frozen=True)
class Admissibility:
    ok: bool
    lhs: float


def noise_admissibility(D, z, lam):
    """Whether ``|A^H z|_inf <= lam/2``."""
    z = np.asarray(z)
    if z.shape != (D.m,):
        raise ContractError(f"z must have length m={D.m}, got shape {z.shape}")
    lhs = float(np.abs(D.entries.conj().T @ z).max())
    return Admissibility(lhs <= lam / 2.0, lhs)


# -- runs ------------------------------------------------------------------------------

@dataclass(frozen=True)
class TrialRecord:
    seed: int
    error: float
    iterations: int
    converged: bool
    value: float


@dataclass
class CellResult:
    dictionary: str
    s: int
    metric: str
    trials: int
    mean: float
    stddev: float
    records: list = field(default_factory=list)

    @property
    def success_rate(self):
        if self.metric != "success_rate":
            raise AttributeError("not a success-rate cell")
        return self.mean


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    mode: str
    cells: list

    def cell(self, dictionary, s):
        for c in self.cells:
            if c.dictionary == dictionary and c.s == s:
                return c
        raise KeyError((dictionary, s))

    def curve(self, dictionary):
        cs = sorted((c for c in self.cells if c.dictionary == dictionary), key=lambda c: c.s)
        return [c.s for c in cs], [c.mean for c in cs]


def _solve(program, D, b, lam, opts):
    if program == "bp":
        return basis_pursuit(D, b, opts)
    return PROGRAMS[program](D, b, lam, opts)


def _run_trial(config, D, name, s, trial, mode):
    seed = trial_seed(config.master_seed, name, s, trial)
    rng = np.random.default_rng(seed)
    x0 = _sparse_signal(rng, config.n, s)
    b = D.entries @ x0 if not D.is_real else D.matrix @ x0
    if config.sigma > 0:
        b = b + config.sigma * rng.standard_normal(config.m)
    opts = SolveOptions(max_iters=config.max_iters)
    res = _solve(config.program, D, b, config.lam_value, opts)
    err = relative_error(res.x_hat, x0)
    if mode == "success":
        value = float(res.converged and err <= config.success_tol)
    else:
        value = snr_db(res.x_hat, x0)
    return TrialRecord(seed, err, res.iterations, res.converged, value)


def _run(config, mode, threads):
    dicts = {name: build_dictionary(name, config) for name in config.dictionaries}
    tasks = [(name, s, t) for name in config.dictionaries for s in config.s_list
             for t in range(config.trials)]

    def work(task):
        name, s, t = task
        return task, _run_trial(config, dicts[name], name, s, t, mode)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = dict(pool.map(work, tasks))
    else:
        results = dict(map(work, tasks))
    metric = "success_rate" if mode == "success" else "snr_db"
    cells = []
    for name in sorted(config.dictionaries):
        for s in sorted(set(config.s_list)):
            recs = [results[(name, s, t)] for t in range(config.trials)]
            vals = np.array([r.value for r in recs])
            if mode == "success":
                mean = sum(1 for r in recs if r.value == 1.0) / config.trials
            else:
                mean = float(vals.mean())
            cells.append(CellResult(name, s, metric, config.trials, mean, float(vals.std()), recs))
    return ExperimentReport(config, mode, cells)


def run_success(config, threads=1):
    """Noiseless success rates per (dictionary, s).

    A trial succeeds when the solver reports convergence and the relative
    error is at most ``success_tol``; non-converged trials count as failures.
    """
    if config.sigma != 0:
        raise ContractError("run_success is the noiseless protocol; set sigma = 0")
    return _run(config, "success", threads)


def run_snr(config, threads=1):
    """Mean SNR in dB per (dictionary, s) with N(0, sigma^2) measurement noise."""
    if not config.sigma > 0:
        raise ContractError("run_snr needs sigma > 0")
    return _run(config, "snr", threads)


# -- output ----------------------------------------------------------------------------

def _fmt(v):
    return f"{v:.17g}"


def emit_report(report, path, fmt="csv"):
    """Write ``report`` as CSV or as gnuplot-style blocks, byte-deterministically."""
    if fmt == "csv":
        text = report_csv(report)
    elif fmt == "plotdata":
        text = report_plotdata(report)
    else:
        raise DomainError(f"unknown format {fmt!r}")
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def report_csv(report):
    snr = report.mode == "snr"
    lines = [f"# coherelab report schema={SCHEMA_VERSION} mode={report.mode}"]
    header = "dictionary,s,metric,trials,mean,stddev"
    lines.append(header + (",neg_mean" if snr else ""))
    for c in report.cells:
        row = [c.dictionary, str(c.s), c.metric, str(c.trials), _fmt(c.mean), _fmt(c.stddev)]
        if snr:
            row.append(_fmt(-c.mean))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def report_plotdata(report):
    out = [f"# coherelab plotdata schema={SCHEMA_VERSION} mode={report.mode}"]
    names = sorted({c.dictionary for c in report.cells})
    for k, name in enumerate(names):
        if k:
            out.extend(["", ""])
        out.append(f"# dictionary {name}")
        out.append("# s mean stddev")
        for c in sorted((c for c in report.cells if c.dictionary == name), key=lambda c: c.s):
            out.append(f"{c.s} {_fmt(c.mean)} {_fmt(c.stddev)}")
    return "\n".join(out) + "\n"


def parse_report_csv(path):
    """Rows of an emitted CSV report as dicts with numeric fields converted."""
    rows = []
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    if not lines:
        return rows
    header = lines[0].split(",")
    for ln in lines[1:]:
        rec = dict(zip(header, ln.split(",")))
        rec["s"] = int(rec["s"])
        rec["trials"] = int(rec["trials"])
        for k in ("mean", "stddev", "neg_mean"):
            if k in rec:
                rec[k] = float(rec[k])
        rows.append(rec)
    return rows


# -- theory checks on noisy instances ---------------------------------------------------

@dataclass(frozen=True)
class BoundRecord:
    program: str
    s: int
    seed: int
    error: float
    bound: float
    certified: bool
    converged: bool

    @property
    def holds(self):
        return (not self.certified) or self.error <= self.bound + 1e-6


def _noisy_signal(rng, n, s, tail_scale):
    x = _sparse_signal(rng, n, s)
    if tail_scale > 0:
        x = x + tail_scale * rng.standard_normal(n) * (x == 0)
    return x


def bound_suite(D, program, s_values, trials, sigma, master_seed=0, eta=None, lam=None,
                tail_scale=1e-3, opts=None, max_redraws=1000):
    """Solve seeded noisy instances and compare errors to the a-priori bounds.

    Noise is N(0, sigma^2) and only admissible draws are used: ``|A^H z|_inf
    <= eta`` for ``ds``, ``|z|_2 <= eta`` for ``qcbp`` and
    ``|A^H z|_inf <= lam/2`` for ``lasso``; an inadmissible draw is replaced by
    the next one from the same stream. Odd trials add a dense tail of scale
    ``tail_scale`` off the support. Bounds use ``a = s``.

    Defaults: ``eta = 2 sigma sqrt(2 log n)`` for ``ds``,
    ``eta = sigma sqrt(m + 4 sqrt(m))`` for ``qcbp`` and
    ``lam = 2 sigma sqrt(2 log n)`` for ``lasso``.
    """
    m, n = D.shape
    A = D.entries
    AH = A.conj().T
    if program == "ds":
        eta = 2.0 * sigma * math.sqrt(2.0 * math.log(n)) if eta is None else eta
    elif program == "qcbp":
        eta = sigma * math.sqrt(m + 4.0 * math.sqrt(m)) if eta is None else eta
    elif program == "lasso":
        lam = cert.theory_lambda(sigma, n) if lam is None else lam
    else:
        raise DomainError(f"unknown program {program!r}")
    opts = opts or SolveOptions(max_iters=50000, tol=1e-10)
    P = profile(D, min(n - 1, 4 * max(s_values)))
    out = []
    for s in s_values:
        for t in range(trials):
            seed = trial_seed(master_seed, f"bound:{program}", s, t)
            rng = np.random.default_rng(seed)
            x0 = _noisy_signal(rng, n, s, tail_scale if t % 2 else 0.0)
            for _ in range(max_redraws):
                z = sigma * rng.standard_normal(m)
                if program == "ds" and np.abs(AH @ z).max() <= eta:
                    break
                if program == "qcbp" and np.linalg.norm(z) <= eta:
                    break
                if program == "lasso" and np.abs(AH @ z).max() <= lam / 2.0:
                    break
            else:
                raise ConditionError(f"no admissible noise draw in {max_redraws} attempts")
            b = A @ x0 + z
            if D.is_real:
                b = b.real
            tail = tail_norm(x0, s)
            if program == "ds":
                res = dantzig(D, b, eta, opts)
                c = cert.ds_qcbp_condition(P, s)
                bound = cert.ds_error_bound(P, s, s, eta, tail) if c.holds else math.inf
                certified = c.holds
            elif program == "qcbp":
                res = qcbp(D, b, eta, opts)
                c = cert.ds_qcbp_condition(P, s)
                bound = cert.qcbp_error_bound(P, s, s, eta, tail) if c.holds else math.inf
                certified = c.holds
            else:
                res = lasso(D, b, lam, opts)
                c = cert.lasso_condition(P, s)
                certified = c.holds
                try:
                    bound = cert.lasso_error_bound(P, s, s, lam, tail) if c.holds else math.inf
                except DegenerateBoundError:
                    certified, bound = False, math.inf
            err = float(np.linalg.norm(res.x_hat - x0))
            out.append(BoundRecord(program, s, seed, err, bound, certified, res.converged))
    return out


@dataclass(frozen=True)
class GapRecord:
    seed: int
    lhs: float
    bound: float
    event: bool

    @property
    def holds(self):
        return self.lhs <= self.bound


def prediction_gap_trials(D, s, sigma, trials, master_seed=0, opts=None):
    """Compare ``| |A x_ds - Ax|^2 - |A x_lasso - Ax|^2 |`` with its bound.

    Uses ``lam = 2 sigma sqrt(2 log n)`` and ``eta = lam``; ``event`` records
    whether ``|A^H z|_inf <= lam/2`` held for the draw.
    """
    m, n = D.shape
    lam = cert.theory_lambda(sigma, n)
    opts = opts or SolveOptions(max_iters=50000, tol=1e-10)
    P = profile(D, max(1, s))
    A = D.entries
    out = []
    for t in range(trials):
        seed = trial_seed(master_seed, "prediction_gap", s, t)
        rng = np.random.default_rng(seed)
        x0 = _sparse_signal(rng, n, s)
        z = sigma * rng.standard_normal(m)
        b = A @ x0 + z
        if D.is_real:
            b = b.real
        xl = lasso(D, b, lam, opts).x_hat
        xd = dantzig(D, b, lam, opts).x_hat
        ax = A @ x0
        lhs = abs(float(np.linalg.norm(A @ xd - ax) ** 2 - np.linalg.norm(A @ xl - ax) ** 2))
        bound = cert.prediction_gap_bound(P, s, n, sigma, tail_norm(xl, s)).bound
        event = bool(np.abs(A.conj().T @ z).max() <= lam / 2.0)
        out.append(GapRecord(seed, lhs, bound, event))
    return out


@dataclass(frozen=True)
class OracleRecord:
    seed: int
    admissible: bool
    lhs: float
    rhs: float
    lemma_lhs: float = float("nan")
    lemma_rhs: float = float("nan")
    H_min: float = float("nan")
    xi_bar: tuple = ()

    @property
    def holds(self):
        return (not self.admissible) or self.lhs <= self.rhs


def oracle_trials(D, s, sigma, draws, master_seed=0, bruteforce=False, opts=None):
    """Dantzig selector at ``eta* = 3 sigma sqrt(2 log n)/2`` against the oracle bound.

    A draw is admissible when ``|A^H z|_inf <= sigma sqrt(2 log n)``. With
    ``bruteforce`` the exact H-minimizer of each signal is computed and its
    feasibility inequality recorded.
    """
    m, n = D.shape
    P = profile(D, min(n - 1, max(1, 2 * s - 1)))
    terms = cert.OracleTerms.build(sigma, n)
    opts = opts or SolveOptions(max_iters=50000, tol=1e-10)
    A = D.entries
    out = []
    for t in range(draws):
        seed = trial_seed(master_seed, "oracle", s, t)
        rng = np.random.default_rng(seed)
        x0 = _sparse_signal(rng, n, s)
        z = sigma * rng.standard_normal(m)
        b = A @ x0 + z
        if D.is_real:
            b = b.real
        admissible = bool(np.abs(A.conj().T @ z).max() <= terms.lambda_)
        rhs = cert.oracle_rhs(P, s, n, sigma, x0)
        res = dantzig(D, b, terms.eta_star, opts)
        lhs = float(np.linalg.norm(res.x_hat - x0) ** 2)
        extra = ()
        if bruteforce:
            h = cert.h_minimizer_bruteforce(x0, D, terms.iota)
            extra = (h.lemma_lhs, h.lemma_rhs, h.H_min, tuple(h.xi_bar.tolist()))
        out.append(OracleRecord(seed, admissible, lhs, rhs, *extra))
    return out
