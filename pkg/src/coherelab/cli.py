"""Command-line interface: ``coherelab {analyze,solve,certify,experiment,oracle}``.

Exit codes: 0 success, 2 usage or input error, 3 a mathematical condition
fails, 4 a solver did not converge. Diagnostics go to standard error; data
goes to ``--out`` or standard output.
"""
import argparse
import json
import math
import sys

import numpy as np

from . import certificates as cert
from . import experiments as ex
from .coherence import profile
from .dictionary import parse_builder_spec, read_vector
from .errors import CoherelabError, ConditionError, NumericalError
from .solvers import PROGRAMS, SolveOptions, StepRule, basis_pursuit

SCHEMA_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_CONDITION, EXIT_NONCONVERGED = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _write(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)


def _num(v):
    return "" if v is None else f"{v:.17g}"


def _vector(name, v):
    v = np.asarray(v)
    if np.iscomplexobj(v) and np.any(v.imag != 0):
        return {f"{name}_re": v.real.tolist(), f"{name}_im": v.imag.tolist()}
    return {name: v.real.tolist()}


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


# -- subcommands -----------------------------------------------------------------------

def cmd_analyze(args):
    D = parse_builder_spec(args.matrix)
    P = profile(D, args.smax)
    lines = [f"# coherelab analyze schema={SCHEMA_VERSION}",
             f"# matrix={args.matrix} mu={P.mu:.17g} n={P.n}",
             "s,mu1"]
    lines += [f"{s},{P.mu1(s):.17g}" for s in range(1, P.s_max + 1)]
    _write("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_solve(args):
    D = parse_builder_spec(args.matrix)
    b = read_vector(args.b)
    opts = SolveOptions(max_iters=args.max_iters, tol=args.tol, step_rule=StepRule(args.step_rule))
    prog = args.program
    if prog == "bp":
        res = basis_pursuit(D, b, opts)
    elif prog in ("lasso", "lasso_irls"):
        if args.lam is None:
            raise _usage(f"--lambda is required for {prog}")
        res = PROGRAMS[prog](D, b, args.lam, opts)
    else:
        if args.eta is None:
            raise _usage(f"--eta is required for {prog}")
        res = PROGRAMS[prog](D, b, args.eta, opts)
    out = {"schema": SCHEMA_VERSION, "matrix": args.matrix}
    out.update({k: _json_safe(v) for k, v in res.to_dict().items()})
    _write(json.dumps(out, indent=2) + "\n", args.out)
    if not res.converged:
        print(f"coherelab solve: {prog} did not converge in {res.iterations} iterations",
              file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_certify(args):
    D = parse_builder_spec(args.matrix)
    order = {"ds": 2, "qcbp": 2, "lasso": 4, "re": 1}[args.program]
    need = order * args.smax - 1 if order > 1 else args.smax
    P = profile(D, max(1, min(D.n - 1, need)))
    smax = min(args.smax, cert.max_s_for(P, args.program))
    if smax < args.smax:
        print(f"coherelab certify: n={D.n} only supports s <= {smax} for {args.program}",
              file=sys.stderr)
    rows = cert.certify_rows(P, args.program, range(1, smax + 1), tau=args.tau,
                             eta=args.eta, lam=args.lam, tail=args.tail)
    lines = [f"# coherelab certify schema={SCHEMA_VERSION}",
             f"# matrix={args.matrix} program={args.program} tau={args.tau:.17g}",
             "s,holds,margin,bound"]
    for s, holds, margin, bound in rows:
        lines.append(f"{s},{'true' if holds else 'false'},{margin:.17g},{_num(bound)}")
    _write("\n".join(lines) + "\n", args.out)
    if args.strict and not all(r[1] for r in rows):
        print("coherelab certify: condition fails for some s", file=sys.stderr)
        return EXIT_CONDITION
    return EXIT_OK


def load_config(path, mode="success"):
    """Read an ExperimentConfig from JSON; ``lambda`` is accepted for ``lam``.

    Without an explicit ``sigma`` the noise level is 0 in success mode and
    0.01 in SNR mode.
    """
    d = {}
    if path is not None:
        with open(path) as fh:
            d = json.load(fh)
        if not isinstance(d, dict):
            raise _usage("config JSON must be an object")
    if "lambda" in d:
        d["lam"] = d.pop("lambda")
    if mode == "snr":
        d.setdefault("sigma", 0.01)
    return ex.ExperimentConfig.from_dict(d)


def cmd_experiment(args):
    cfg = load_config(args.config, args.mode)
    run = ex.run_success if args.mode == "success" else ex.run_snr
    report = run(cfg, threads=args.threads)
    ex.emit_report(report, args.out, "csv")
    if args.plotdata:
        ex.emit_report(report, args.plotdata, "plotdata")
    return EXIT_OK


def cmd_oracle(args):
    D = parse_builder_spec(args.matrix)
    recs = ex.oracle_trials(D, args.s, args.sigma, args.draws, master_seed=args.seed,
                            bruteforce=args.bruteforce)
    terms = cert.OracleTerms.build(args.sigma, D.n)
    draws = []
    for r in recs:
        d = {"seed": r.seed, "admissible": r.admissible, "lhs": r.lhs, "rhs": r.rhs,
             "ratio": r.lhs / r.rhs}
        if args.bruteforce:
            d.update({**_vector("xi_bar", r.xi_bar), "H_min": r.H_min,
                      "lemma_lhs": r.lemma_lhs, "lemma_rhs": r.lemma_rhs,
                      "lemma_ok": r.lemma_lhs <= r.lemma_rhs + 1e-8})
        draws.append(d)
    adm = [d for d in draws if d["admissible"]]
    worst = max(adm, key=lambda d: d["ratio"]) if adm else None
    ok = all(d["lhs"] <= d["rhs"] for d in adm)
    if args.bruteforce:
        ok = ok and all(d["lemma_ok"] for d in draws)
    out = {
        "schema": SCHEMA_VERSION, "matrix": args.matrix, "s": args.s, "sigma": args.sigma,
        "lambda": terms.lambda_, "eta_star": terms.eta_star, "iota": terms.iota,
        "admissible_draws": len(adm), "holds": ok,
        "lhs": worst["lhs"] if worst else None,
        "rhs": worst["rhs"] if worst else None,
        "ratio": worst["ratio"] if worst else None,
        "draws": draws,
    }
    _write(json.dumps(out, indent=2) + "\n", args.out)
    if not ok:
        print("coherelab oracle: inequality violated on an admissible draw", file=sys.stderr)
        return EXIT_CONDITION
    return EXIT_OK


class _UsageError(Exception):
    pass


def _usage(msg):
    return _UsageError(msg)


# -- parser ----------------------------------------------------------------------------

def build_parser():
    p = _Parser(prog="coherelab", description="Cumulative-coherence analysis and l1 recovery.")
    sub = p.add_subparsers(dest="command", metavar="{analyze,solve,certify,experiment,oracle}",
                           parser_class=_Parser)
    sub.required = True

    a = sub.add_parser("analyze", help="cumulative coherence profile of a matrix")
    a.add_argument("--matrix", required=True, help="builder spec or file:<path>")
    a.add_argument("--smax", type=int, required=True, help="largest order s")
    a.add_argument("--out", help="output CSV (default: stdout)")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("solve", help="solve one l1 recovery program")
    s.add_argument("--program", required=True, choices=["lasso", "lasso_irls", "qcbp", "ds", "bp"])
    s.add_argument("--matrix", required=True, help="builder spec or file:<path>")
    s.add_argument("--b", required=True, help="CSV file with the measurement vector")
    s.add_argument("--lambda", dest="lam", type=float, help="Lasso weight")
    s.add_argument("--eta", type=float, help="noise level for qcbp / ds")
    s.add_argument("--max-iters", type=int, default=500)
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--step-rule", choices=[r.value for r in StepRule], default="fixed")
    s.add_argument("--out", help="output JSON (default: stdout)")
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("certify", help="evaluate recovery conditions and bounds over s")
    c.add_argument("--matrix", required=True, help="builder spec or file:<path>")
    c.add_argument("--program", required=True, choices=["ds", "qcbp", "lasso", "re"])
    c.add_argument("--smax", type=int, required=True)
    c.add_argument("--tau", type=float, default=1.0, help="cone parameter for re")
    c.add_argument("--eta", type=float, help="noise level; adds ds/qcbp error bounds")
    c.add_argument("--lambda", dest="lam", type=float, help="Lasso weight; adds lasso error bounds")
    c.add_argument("--tail", type=float, default=0.0, help="best s-term approximation error")
    c.add_argument("--strict", action="store_true", help="exit 3 if any row fails")
    c.add_argument("--out", help="output CSV (default: stdout)")
    c.set_defaults(func=cmd_certify)

    e = sub.add_parser("experiment", help="seeded success-rate or SNR experiment")
    e.add_argument("--mode", required=True, choices=["success", "snr"])
    e.add_argument("--config", help="JSON with ExperimentConfig fields (default: built-in)")
    e.add_argument("--out", required=True, help="output CSV")
    e.add_argument("--plotdata", help="also write plot blocks here")
    e.add_argument("--threads", type=int, default=1, help="worker threads (output is unaffected)")
    e.set_defaults(func=cmd_experiment)

    o = sub.add_parser("oracle", help="Dantzig selector against the oracle inequality")
    o.add_argument("--matrix", default="hadamard:8", help="builder spec or file:<path>")
    o.add_argument("--s", type=int, default=1)
    o.add_argument("--sigma", type=float, default=0.05)
    o.add_argument("--draws", type=int, default=20)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--bruteforce", action="store_true", help="also compute the exact H-minimizer")
    o.add_argument("--out", help="output JSON (default: stdout)")
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"coherelab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConditionError as exc:
        print(f"coherelab {args.command}: condition failure: {exc}", file=sys.stderr)
        return EXIT_CONDITION
    except NumericalError as exc:
        print(f"coherelab {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (CoherelabError, ValueError, OSError) as exc:
        print(f"coherelab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
