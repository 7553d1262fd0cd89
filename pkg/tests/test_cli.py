import json
import subprocess
import sys

import numpy as np
import pytest

from coherelab.cli import build_parser, main


def _lines(path):
    return [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]


def test_analyze_hadamard(tmp_path):
    out = tmp_path / "a.csv"
    assert main(["analyze", "--matrix", "hadamard:64", "--smax", "32", "--out", str(out)]) == 0
    text = out.read_text().splitlines()
    assert text[0].startswith("# coherelab analyze schema=")
    assert "mu=0.125" in text[1] and "n=128" in text[1]
    rows = _lines(out)
    assert rows[0] == "s,mu1"
    for row in rows[1:]:
        s, v = row.split(",")
        assert abs(float(v) - int(s) / 8) <= 1e-12


def test_analyze_stdout(capsys):
    assert main(["analyze", "--matrix", "fourier:4", "--smax", "2"]) == 0
    assert "s,mu1" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [["bogus"], [], ["analyze"], ["analyze", "--matrix", "hadamard:7", "--smax", "2"],
                                  ["analyze", "--matrix", "hadamard:8", "--smax", "99"],
                                  ["certify", "--matrix", "hadamard:8", "--program", "xx", "--smax", "2"]])
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert capsys.readouterr().err


def test_unknown_subcommand_prints_usage(capsys):
    assert main(["frobnicate"]) == 2
    assert "usage" in capsys.readouterr().err


def test_certify_lasso_hadamard(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["certify", "--program", "lasso", "--matrix", "hadamard:64", "--smax", "8",
                 "--out", str(out)]) == 0
    rows = [r.split(",") for r in _lines(out)[1:]]
    assert len(rows) == 8
    assert [r[1] for r in rows] == ["true"] + ["false"] * 7
    assert all(r[3] == "" for r in rows)


def test_certify_ds_with_bounds_and_strict(tmp_path):
    out = tmp_path / "c.csv"
    argv = ["certify", "--program", "ds", "--matrix", "hadamard:64", "--smax", "5", "--eta", "0.1",
            "--out", str(out)]
    assert main(argv) == 0
    rows = [r.split(",") for r in _lines(out)[1:]]
    assert [r[1] for r in rows] == ["true"] * 3 + ["false"] * 2
    assert rows[0][3] and not rows[4][3]
    assert main(argv + ["--strict"]) == 3


def test_certify_re(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["certify", "--program", "re", "--matrix", "fourier:16", "--smax", "3", "--tau", "0.5",
                 "--out", str(out)]) == 0
    assert len(_lines(out)) == 4


def test_solve_bp_and_json(tmp_path):
    b = tmp_path / "b.csv"
    np.savetxt(b, np.r_[1.0, np.zeros(7)], delimiter=",")
    out = tmp_path / "x.json"
    assert main(["solve", "--program", "bp", "--matrix", "hadamard:8", "--b", str(b),
                 "--max-iters", "100000", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["converged"] and d["program"] == "bp"
    assert abs(d["x_hat"][0] - 1.0) < 1e-6
    assert {"kkt_residual", "feasibility_residual", "iterations"} <= set(d)


def test_solve_exit_codes(tmp_path, capsys):
    b = tmp_path / "b.csv"
    np.savetxt(b, np.r_[1.0, 0.5, np.zeros(6)], delimiter=",")
    base = ["solve", "--matrix", "hadamard:8", "--b", str(b), "--out", str(tmp_path / "o.json")]
    assert main(base + ["--program", "lasso", "--lambda", "0.01", "--max-iters", "1"]) == 4
    assert main(base + ["--program", "lasso"]) == 2
    assert main(base + ["--program", "ds"]) == 2
    assert main(base + ["--program", "qcbp", "--eta", "-1"]) == 2
    assert main(base + ["--program", "lasso_irls", "--lambda", "0.01"]) == 0
    over = tmp_path / "b2.csv"
    np.savetxt(over, np.arange(1.0, 9.0), delimiter=",")
    capsys.readouterr()
    assert main(["solve", "--matrix", "gaussian:8,3,1", "--b", str(over), "--program", "qcbp",
                 "--eta", "1e-9"]) == 3
    assert "condition" in capsys.readouterr().err


def test_solve_complex_output(tmp_path):
    b = tmp_path / "b.csv"
    b.write_text("0.5+0.5j\n0\n0\n0\n")
    out = tmp_path / "x.json"
    main(["solve", "--program", "lasso", "--matrix", "fourier:4", "--b", str(b), "--lambda", "0.01",
          "--max-iters", "10000", "--out", str(out)])
    d = json.loads(out.read_text())
    assert "x_hat_re" in d and "x_hat_im" in d


def test_experiment_deterministic_across_threads(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"s_list": [2, 4], "trials": 3, "lambda": 1e-6}))
    outs = []
    for k, threads in enumerate(("1", "1", "4")):
        o, p = tmp_path / f"o{k}.csv", tmp_path / f"p{k}.dat"
        assert main(["experiment", "--mode", "success", "--config", str(cfg), "--out", str(o),
                     "--plotdata", str(p), "--threads", threads]) == 0
        outs.append((o.read_bytes(), p.read_bytes()))
    assert outs[0] == outs[1] == outs[2]


def test_experiment_snr_default_sigma(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"s_list": [2], "trials": 2}))
    o = tmp_path / "o.csv"
    assert main(["experiment", "--mode", "snr", "--config", str(cfg), "--out", str(o)]) == 0
    assert "neg_mean" in o.read_text()


def test_experiment_bad_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"trials": 0}))
    assert main(["experiment", "--mode", "success", "--config", str(cfg), "--out",
                 str(tmp_path / "o.csv")]) == 2
    cfg.write_text("[1, 2]")
    assert main(["experiment", "--mode", "success", "--config", str(cfg), "--out",
                 str(tmp_path / "o.csv")]) == 2


def test_oracle_bruteforce(tmp_path):
    out = tmp_path / "o.json"
    assert main(["oracle", "--matrix", "hadamard:8", "--s", "1", "--sigma", "0.05", "--draws", "4",
                 "--bruteforce", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["holds"] and {"lhs", "rhs", "ratio"} <= set(d)
    assert all(dr["lemma_ok"] for dr in d["draws"])
    assert "xi_bar" in d["draws"][0]


def test_oracle_condition_failure():
    assert main(["oracle", "--matrix", "hadamard:4", "--s", "3", "--draws", "1"]) == 3


def test_oracle_noiseless(tmp_path):
    out = tmp_path / "o.json"
    assert main(["oracle", "--sigma", "0", "--draws", "2", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["lhs"] <= 1e-10 <= d["rhs"]


def _flags(parser):
    return {a.dest for a in parser._actions}


def test_help_round_trips_documented_flags():
    parser = build_parser()
    sub = next(a for a in parser._actions if hasattr(a, "choices") and isinstance(a.choices, dict))
    documented = {
        "analyze": ["--matrix", "--smax", "--out"],
        "solve": ["--program", "--matrix", "--b", "--lambda", "--eta", "--max-iters", "--out"],
        "certify": ["--matrix", "--program", "--smax", "--tau", "--out"],
        "experiment": ["--mode", "--config", "--out", "--plotdata", "--threads"],
        "oracle": ["--bruteforce"],
    }
    for name, flags in documented.items():
        p = sub.choices[name]
        text = p.format_help()
        for f in flags:
            assert f in text
        with pytest.raises(SystemExit) as exc:
            p.parse_args(["--help"])
        assert exc.value.code == 0


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "coherelab", "analyze", "--matrix", "hadamard:4",
                        "--smax", "1"], capture_output=True, text=True)
    assert r.returncode == 0 and "s,mu1" in r.stdout
    r = subprocess.run([sys.executable, "-m", "coherelab", "nope"], capture_output=True, text=True)
    assert r.returncode == 2
