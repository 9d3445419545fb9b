"""Command-line driver: config validation, exit codes, and report files."""

import os

import numpy as np
import pytest

import ymeps.functionals as functionals
from ymeps.functionals import EstimateReport, QuantityRow
from ymeps.harness import (
    CSV_HEADER,
    ConfigError,
    SweepConfig,
    emit_outputs,
    fit_slope,
    load_config,
    main,
    parse_eps_list,
    report_csv,
    report_svg,
    run_command,
)


def test_fit_slope_reexported():
    assert fit_slope is functionals.fit_slope


# ---------------------------------------------------------------------------
# configuration


def test_sweep_config_defaults():
    cfg = SweepConfig()
    assert len(cfg.eps_list) == 6
    assert cfg.eps_list[0] == 2.0 ** -4
    assert cfg.D == 1.0
    qs = cfg.points()
    assert [q.eps for q in qs] == list(cfg.eps_list)


@pytest.mark.parametrize("kw,msg", [
    (dict(eps_list=(0.0625, 0.03125, 0.015625)), "at least 4"),
    (dict(eps_list=(0.0625, 0.03125, 0.04, 0.01)), "strictly decreasing"),
    (dict(eps_list=(0.0625, 0.03125, 0.0, -0.01)), "positive"),
    (dict(D=2.5), "outside"),
    (dict(D=0.5), "outside"),
    (dict(tol=-1.0), "tol"),
    (dict(n_test=0), "n_test"),
    (dict(pi2="bogus"), "strategy"),
])
def test_sweep_config_rejects(kw, msg):
    with pytest.raises(ConfigError, match=msg):
        SweepConfig(**kw)


def test_parse_eps_list_forms():
    assert parse_eps_list("0.0625, 0.03125") == [0.0625, 0.03125]
    assert parse_eps_list("2^-4 2^-5") == [2.0 ** -4, 2.0 ** -5]
    with pytest.raises(ConfigError, match="cannot parse"):
        parse_eps_list("0.1, zebra")
    with pytest.raises(ConfigError, match="empty"):
        parse_eps_list("  ")


def test_load_config_round_trip(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(
        "[sweep]\n"
        "eps_list = 2^-4, 2^-5, 2^-6, 2^-7  # four points\n"
        "ratio_d = 1.25\n"
        "seed = 7\n"
        "n_test = 8\n"
        "[output]\n"
        "dir = results\n",
        encoding="utf-8")
    kw = load_config(str(path))
    cfg = SweepConfig(**kw)
    assert cfg.eps_list == (2.0 ** -4, 2.0 ** -5, 2.0 ** -6, 2.0 ** -7)
    assert cfg.D == 1.25
    assert cfg.seed == 7
    assert cfg.n_test == 8
    assert cfg.out_dir == "results"


def test_load_config_rejects_unknown(tmp_path):
    bad_key = tmp_path / "a.ini"
    bad_key.write_text("[sweep]\nepz_list = 1\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="unknown key"):
        load_config(str(bad_key))
    bad_section = tmp_path / "b.ini"
    bad_section.write_text("[swoop]\neps_list = 1\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="unknown config section"):
        load_config(str(bad_section))
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(str(tmp_path / "missing.ini"))


# ---------------------------------------------------------------------------
# report emission


def _toy_reports():
    row1 = QuantityRow("norm_p1", [0.0625, 0.03125, 0.015625],
                       [64.0, 181.02, 512.0], -1.5, "slope-window",
                       slope=-1.5, residual=0.0004, verdict="pass",
                       note="window [-1.6, -1.4]")
    row2 = QuantityRow("pair_p1_p2", [0.0625, 0.03125, 0.015625],
                       [0.0, 0.0, 0.0], -1.5, "bounded",
                       verdict="pass", note="null within precision")
    return [EstimateReport("5.7", [row1, row2])]


def test_report_csv_layout():
    text = report_csv(_toy_reports())
    lines = text.splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 7
    assert lines[1] == "5.7,norm_p1,0.0625,64,-1.5,-1.5,0.0004,pass"
    assert lines[4] == "5.7,pair_p1_p2,0.0625,0,-1.5,,,pass"
    assert text.endswith("\n")


def test_report_csv_empty_is_header_only():
    assert report_csv([]) == CSV_HEADER + "\n"
    assert report_csv([EstimateReport("5.8", [])]) == CSV_HEADER + "\n"


def test_report_svg_content():
    svg = report_svg(_toy_reports(), "toy")
    assert svg.startswith("<svg ")
    assert 'width="1000" height="700"' in svg
    assert "polyline" in svg
    assert "stroke-dasharray" in svg      # fitted line for the slope row
    assert "norm_p1" in svg
    # the all-zero series cannot appear on a log plot
    assert "pair_p1_p2" not in svg
    assert svg == report_svg(_toy_reports(), "toy")


def test_report_svg_empty():
    svg = report_svg([], "empty")
    assert "no data" in svg
    assert svg.startswith("<svg ")


def test_emit_outputs_deterministic(tmp_path):
    d = str(tmp_path / "out")
    c1, s1 = emit_outputs(_toy_reports(), d, "case")
    blob_c = open(c1, "rb").read()
    blob_s = open(s1, "rb").read()
    c2, s2 = emit_outputs(_toy_reports(), d, "case")
    assert (c1, s1) == (c2, s2)
    assert open(c2, "rb").read() == blob_c
    assert open(s2, "rb").read() == blob_s
    assert os.path.basename(c1) == "case.csv"


# ---------------------------------------------------------------------------
# command-line behavior


def test_unknown_flag_exits_2(capsys):
    rc = run_command(["charge", "--frobnicate"])
    assert rc == 2
    assert "usage" in capsys.readouterr().err


def test_unknown_command_exits_2(capsys):
    assert run_command(["transcend"]) == 2


def test_bad_lemma_tag_exits_2(capsys):
    assert run_command(["verify-lemma", "9.9"]) == 2


def test_bad_sweep_flag_value_exits_2(capsys):
    rc = run_command(["verify-lemma", "5.7",
                      "--eps-list", "0.0625,0.03125,0.04,0.01"])
    assert rc == 2
    assert "config error" in capsys.readouterr().err


def test_inadmissible_single_eps_exits_2(capsys):
    # eps so large that lam = sqrt(eps) leaves the admissible box
    rc = run_command(["charge", "--eps", "0.25"])
    assert rc == 2


def test_help_exits_0(capsys):
    assert run_command(["--help"]) == 0
    assert "verify-lemma" in capsys.readouterr().out


def test_main_propagates_exit(monkeypatch, capsys):
    monkeypatch.setattr("sys.argv", ["ymeps", "charge", "--frobnicate"])
    with pytest.raises(SystemExit) as exc:
        main()
    assert exc.value.code == 2


def test_too_tight_tolerance_exits_3(capsys):
    rc = run_command(["charge", "--tol", "1e-15"])
    assert rc == 3
    assert "numerical failure" in capsys.readouterr().err


def test_charge_command_passes(capsys):
    rc = run_command(["charge"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "charge" in out and "pass" in out


def test_dump_field_writes_grid(tmp_path, capsys):
    rc = run_command(["dump-field", "--field", "b", "--out", str(tmp_path)])
    assert rc == 0
    files = list(tmp_path.glob("field_b_*.csv"))
    assert len(files) == 1
    lines = files[0].read_text().splitlines()
    assert len(lines) == 1 + 4 * 41 * 41
    assert lines[0] == "x0,x1,x2,x3,component-index,e1,e2,e3"
    # each grid point contributes one row per dx^mu component
    first = lines[1].split(",")
    assert len(first) == 8 and first[4] == "0"


def test_verify_lemma_58_cli(tmp_path, capsys):
    rc = run_command(["verify-lemma", "5.8", "--eps-list",
                      "2^-4,2^-5,2^-6,2^-7", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert rc == 0
    assert "check 5.8: pass" in out
    csv_file = tmp_path / "lemma_5_8.csv"
    svg_file = tmp_path / "lemma_5_8.svg"
    assert csv_file.exists() and svg_file.exists()
    body = csv_file.read_text().splitlines()
    assert body[0] == CSV_HEADER
    data = np.array([ln.split(",")[2] for ln in body[1:]], dtype=float)
    assert data.max() == 0.0625
