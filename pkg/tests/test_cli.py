"""End-to-end runs of the config-driven command line."""

import json
import textwrap

import numpy as np
import pytest

from mfbsde import BlowUpError, case_zero, compute_ledger
from mfbsde.cli import _fmt, main


def write_cfg(tmp_path, body, name="run.ini"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(body))
    return str(path)


ZERO_FAST = """
    [case]
    name = zero

    [grid]
    m = 10

    [ensemble]
    n = 200
    seed = 1

    [checks]
    samples = 500
"""


# ---------------------------------------------------------------- constants


def test_constants_emits_ledger_json(tmp_path, capsys):
    cfg = write_cfg(tmp_path, ZERO_FAST)
    assert main(["constants", "--config", cfg]) == 0
    doc = json.loads(capsys.readouterr().out)
    expect = compute_ledger(case_zero().params).to_dict()
    for key in ("c_dkn", "k1", "k2", "eps0", "c3", "lambda", "t_lambda"):
        assert doc[key] == expect[key]
    assert set(doc["formulas"]) == set(expect)
    assert any("proxies" in c for c in doc["caveats"])
    assert "degenerate_fields" not in doc


def test_constants_reports_degenerate_step(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "[case]\nname = loggrowth\n")
    assert main(["constants", "--config", cfg]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["t_lambda"] == 0.0
    assert doc["degenerate_fields"] == ["t_lambda"]


# -------------------------------------------------------------------- check


def test_check_passes_catalog_case(tmp_path, capsys):
    cfg = write_cfg(tmp_path, ZERO_FAST)
    assert main(["check", "--config", cfg]) == 0
    out = capsys.readouterr().out
    for label in ("H1", "H2", "H4"):
        assert label in out
    assert "all structural checks passed" in out


# -------------------------------------------------------------------- solve


def test_solve_writes_report_csv_and_state(tmp_path, capsys):
    cfg = write_cfg(tmp_path, ZERO_FAST)
    out = tmp_path / "runs"
    rc = main(["solve", "--config", cfg, "--out", str(out), "--save-state"])
    assert rc == 0
    text = capsys.readouterr().out
    assert "apriori_sup: pass" in text and "bmo_membership: pass" in text
    assert "-> pass" in text

    report = json.loads((out / "zero_report.json").read_text())
    assert report["case"] == "zero"
    assert report["grid"] == {"M": 10, "T": 1.0, "dt": 0.1}
    assert report["ensemble"]["seed"] == 1
    assert report["oracle"]["y0_abs_err"] == 0.0
    assert all(v["passed"] for v in report["structural_checks"].values())
    assert report["solve"]["converged"] is True
    assert any("proxies" in c for c in report["caveats"])

    lines = (out / "zero_solution.csv").read_text().splitlines()
    assert lines[0] == "t,mean_Y1,sup_abs_Y,bmo_to_go,oracle_err_Y,oracle_err_Z"
    assert len(lines) == 12
    first = lines[1].split(",")
    assert first == ["0.0", "1.0", "1.0", "0.0", "0.0", "0.0"]
    assert lines[-1].split(",")[-1] == "nan"      # no Z at the terminal node

    with np.load(out / "zero_state.npz") as state:
        assert state["Y"].shape == (200, 11, 1)
        assert state["Z"].shape == (200, 10, 1, 1)
        assert int(state["seed"]) == 1
        assert np.array_equal(state["Y"], np.ones((200, 11, 1)))


def test_solve_is_byte_deterministic(tmp_path):
    cfg = write_cfg(
        tmp_path,
        """
        [case]
        name = colehopf

        [grid]
        m = 10

        [ensemble]
        n = 500
        seed = 3

        [checks]
        samples = 500
        """,
    )
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["solve", "--config", cfg, "--out", str(a)]) == 0
    assert main(["solve", "--config", cfg, "--out", str(b)]) == 0
    csv_a = (a / "colehopf_solution.csv").read_bytes()
    assert csv_a == (b / "colehopf_solution.csv").read_bytes()

    # a different seed must actually change the numbers
    c = tmp_path / "c"
    assert main(["solve", "--config", cfg, "--out", str(c), "--seed", "4"]) == 0
    assert csv_a != (c / "colehopf_solution.csv").read_bytes()


def test_solve_debug_hook_forces_bound_failure(tmp_path, capsys):
    cfg = write_cfg(tmp_path, ZERO_FAST + "\n[debug]\nforce_apriori_violation = true\n")
    rc = main(["solve", "--config", cfg, "--out", str(tmp_path / "r")])
    assert rc == 1
    out = capsys.readouterr().out
    assert "apriori_sup: FAIL" in out and "-> FAIL" in out
    report = json.loads((tmp_path / "r" / "zero_report.json").read_text())
    checks = {c["name"]: c for c in report["solve"]["checks"]}
    assert checks["apriori_sup"]["passed"] is False


def test_solve_blowup_exits_3_with_partial_report(tmp_path, monkeypatch, capsys):
    import mfbsde.cli as cli

    def explode(*args, **kwargs):
        raise BlowUpError(node=3, value=1e9, guard=10.0)

    monkeypatch.setattr(cli, "solve_auto", explode)
    cfg = write_cfg(tmp_path, ZERO_FAST)
    rc = main(["solve", "--config", cfg, "--out", str(tmp_path / "r")])
    assert rc == 3
    assert "blow-up" in capsys.readouterr().err
    partial = json.loads((tmp_path / "r" / "zero_report.json").read_text())
    assert partial["node"] == 3 and partial["guard"] == 10.0


# -------------------------------------------------------------- bad configs


@pytest.mark.parametrize(
    "body",
    [
        "[grid]\nm = 10\n",                                  # no case section
        "[case]\nname = not_a_case\n",                       # unknown case
        "[case]\nname = zero\nwhatever = 1\n",               # unknown parameter
        "[case]\nname = zero\nc = hello\n",                  # uncastable value
        "[case]\nname = zero\n\n[solver]\ninit = sideways\n",
        "[case]\nname = zero\n\n[basis]\nkind = fourier\n",
        "[case]\nname = loggrowth\nkappa = -1\n",            # factory rejects
    ],
)
def test_config_errors_exit_2(tmp_path, body, capsys):
    cfg = write_cfg(tmp_path, body)
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "r")]) == 2
    assert "config error" in capsys.readouterr().err


def test_missing_config_file_exits_2(tmp_path, capsys):
    assert main(["solve", "--config", str(tmp_path / "nope.ini")]) == 2
    assert "not found" in capsys.readouterr().err


def test_unknown_subcommand_rejected():
    with pytest.raises(SystemExit):
        main(["frobnicate", "--config", "x.ini"])


# -------------------------------------------------------------------- bench


def test_bench_covers_catalog(tmp_path, capsys):
    cfg = write_cfg(
        tmp_path,
        """
        [grid]
        m = 10

        [ensemble]
        n = 300
        seed = 2

        [checks]
        samples = 500
        """,
    )
    out = tmp_path / "b"
    assert main(["bench", "--config", cfg, "--out", str(out)]) == 0
    text = capsys.readouterr().out
    for name in ("zero", "meanfield_linear", "colehopf", "loggrowth"):
        assert f"bench {name}:" in text
        assert (out / f"bench_{name}_report.json").exists()
        assert (out / f"bench_{name}_solution.csv").exists()
    # the two-component case writes both mean columns
    header = (out / "bench_loggrowth_solution.csv").read_text().splitlines()[0]
    assert header.startswith("t,mean_Y1,mean_Y2,")


# -------------------------------------------------------------------- sweep


def test_sweep_writes_refinement_table(tmp_path, capsys):
    cfg = write_cfg(
        tmp_path,
        """
        [case]
        name = meanfield_linear

        [ensemble]
        seed = 1

        [checks]
        samples = 500

        [sweep]
        pairs = 5:100, 10:200
        """,
    )
    out = tmp_path / "s"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == 0
    rows = (out / "sweep_meanfield_linear.csv").read_text().splitlines()
    assert rows[0] == "M,N,y0_mean,y0_abs_err,mean_node_err_Y,mean_node_err_Z"
    assert len(rows) == 3
    m5 = rows[1].split(",")
    m10 = rows[2].split(",")
    assert (m5[0], m5[1]) == ("5", "100") and (m10[0], m10[1]) == ("10", "200")
    # the deterministic linear case must refine under a finer grid
    assert float(m10[3]) < float(m5[3])
    assert "sweep meanfield_linear M=5 N=100" in capsys.readouterr().out


def test_sweep_rejects_malformed_pairs(tmp_path, capsys):
    cfg = write_cfg(
        tmp_path,
        "[case]\nname = zero\n\n[sweep]\npairs = 5-100\n",
    )
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "s")]) == 2
    assert "expected M:N" in capsys.readouterr().err


# ------------------------------------------------------------------ helpers


def test_fmt_round_trips_floats():
    for x in (0.1, 1.0, np.float64(2.5e-17), 3.0):
        assert float(_fmt(x)) == float(x)
    assert _fmt(1.0) == "1.0"
