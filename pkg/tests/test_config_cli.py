import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skewprod.cli import EXIT_CONFIG, EXIT_OK, EXIT_PRECONDITION, SCHEMA, emit_plot_data, main
from skewprod.config import ConfigError, parse_config, serialize
from skewprod.experiments import ExperimentRecord
from skewprod.lyapunov import Regime, classify_regime

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

WALK = """\
[family.f1]
kind = moebius
log_multiplier = -1

[family.f2]
kind = moebius
log_multiplier = 1
"""


def _logistic(r1, r2, extra=""):
    return f"""\
[family.f1]
kind = logistic
r = {r1}

[family.f2]
kind = logistic
r = {r2}
{extra}"""


def test_minimal_walk_config():
    cfg = parse_config(WALK)
    assert cfg.p1 == 0.5 and cfg.seed == 0 and cfg.experiment == "classify"
    assert classify_regime(cfg.family).regime is Regime.DOUBLE_NEUTRAL


def test_r_above_one_rejected():
    with pytest.raises(ConfigError, match="f1 not increasing"):
        parse_config(_logistic(1.5, 0.5))


@pytest.mark.parametrize("p1", ["0", "1", "-0.2"])
def test_probability_range(p1):
    with pytest.raises(ConfigError, match="probabilities"):
        parse_config(WALK + f"\n[base]\np1 = {p1}\n")


def test_unknown_key_reports_line():
    text = WALK + "\n[base]\np1 = 0.5\nsede = 3\n"
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert "sede" in str(exc.value)
    assert exc.value.line == text.splitlines().index("sede = 3") + 1


def test_unknown_section_and_experiment():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config(WALK + "\n[extras]\na = 1\n")
    with pytest.raises(ConfigError, match="unknown experiment"):
        parse_config(WALK + "\n[experiment]\nname = nope\n")
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config(WALK + "\n[experiment]\nname = sync\nhorizn = 5\n")


def test_expr_maps():
    text = """\
[family.f1]
kind = expr
expr = inverse(logistic(coef=0.5))

[family.f2]
kind = expr
expr = inverse(logistic(coef=-0.5))
"""
    cfg = parse_config(text)
    assert classify_regime(cfg.family).regime is Regime.SYNCHRONIZATION


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.ini")), ids=lambda p: p.stem)
def test_shipped_configs_round_trip(path):
    cfg = parse_config(path.read_text())
    again = parse_config(serialize(cfg))
    assert again == cfg


@settings(max_examples=30, deadline=None)
@given(r1=st.floats(0.01, 0.99), r2=st.floats(0.01, 0.99), p1=st.floats(0.01, 0.99), seed=st.integers(0, 2**31))
def test_round_trip_property(r1, r2, p1, seed):
    cfg = parse_config(_logistic(r1, r2, f"\n[base]\np1 = {p1!r}\nseed = {seed}\n"))
    assert parse_config(serialize(cfg)) == cfg


# -- CLI ----------------------------------------------------------------------


def test_classify_run_writes_report(tmp_path):
    cfg = tmp_path / "walk.ini"
    cfg.write_text(WALK)
    out = tmp_path / "out"
    assert main(["classify", "--config", str(cfg), "--outdir", str(out)]) == EXIT_OK
    rep = json.loads((out / "report.json").read_text())
    assert rep["schema"] == SCHEMA
    assert rep["regime"]["regime"] == "DoubleNeutral"
    assert rep["regime"]["L0"] == 0.0 and rep["regime"]["L1"] == 0.0
    assert rep["regime"]["minimality"]["verdict"] == "Inconclusive"
    assert (out / "classify.csv").read_text().splitlines()[0] == "L0,L1,regime"


def _small_onoff(tmp_path, workers=None):
    text = (CONFIGS / "onoff_occupation.ini").read_text()
    text = text.replace("name = onoff", "name = onoff\norbits = 3\nhorizon = 20000\ncheckpoints = 100, 1000, 20000")
    path = tmp_path / "onoff.ini"
    path.write_text(text)
    return path


def test_onoff_run_is_deterministic(tmp_path):
    cfg = _small_onoff(tmp_path)
    outs = []
    for k, w in enumerate(("1", "2", "1")):
        out = tmp_path / f"o{k}"
        assert main(["onoff", "--config", str(cfg), "--outdir", str(out), "--workers", w]) == EXIT_OK
        outs.append((out / "onoff.csv").read_bytes())
    assert outs[0] == outs[1] == outs[2]
    lines = outs[0].decode().splitlines()
    assert lines[0] == "n,mean_fraction,min_fraction,max_fraction"
    assert [int(l.split(",")[0]) for l in lines[1:]] == [100, 1000, 20000]


def test_precondition_mismatch_exit(tmp_path, capsys):
    cfg = tmp_path / "walk.ini"
    cfg.write_text(WALK)
    status = main(["sync", "--config", str(cfg), "--outdir", str(tmp_path / "o")])
    assert status == EXIT_PRECONDITION
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "precondition"
    assert json.loads((tmp_path / "o" / "error.json").read_text())["status"] == EXIT_PRECONDITION


def test_config_error_exit(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text(WALK + "\n[base]\nseeed = 1\n")
    assert main(["classify", "--config", str(cfg)]) == EXIT_CONFIG
    err = json.loads(capsys.readouterr().err.strip())
    assert err["line"] == 10


def test_subcommand_must_match_config(tmp_path):
    cfg = tmp_path / "walk.ini"
    cfg.write_text(WALK + "\n[experiment]\nname = classify\n")
    assert main(["drift", "--config", str(cfg), "--outdir", str(tmp_path)]) == EXIT_CONFIG


def test_timeseries_plot_data(tmp_path):
    cfg = tmp_path / "ts.ini"
    cfg.write_text(WALK + "\n[experiment]\nname = timeseries\nsteps = 50\n")
    assert main(["timeseries", "--config", str(cfg), "--outdir", str(tmp_path)]) == EXIT_OK
    lines = (tmp_path / "timeseries_timeseries.csv").read_text().splitlines()
    assert lines[0] == "step,x" and len(lines) == 52


def test_emit_plot_data_errors(tmp_path):
    with pytest.raises(ValueError, match="empty"):
        emit_plot_data(ExperimentRecord("x", {}, ("step", "value"), []), "timeseries", tmp_path)
    rec = ExperimentRecord("x", {}, ("a", "b"), [(1, 2)])
    with pytest.raises(ValueError):
        emit_plot_data(rec, "histogram", tmp_path)
    with pytest.raises(ValueError):
        emit_plot_data(rec, "violin", tmp_path)


def test_histogram_plot_data(tmp_path):
    rec = ExperimentRecord("m", {}, ("cell_kind", "left", "right", "mass"),
                           [("atom0", 0.0, 0.0, 0.5), ("bin_0", 0.0, 0.5, 0.25), ("bin_1", 0.5, 1.0, 0.25),
                            ("atom1", 1.0, 1.0, 0.0)])
    path = emit_plot_data(rec, "histogram", tmp_path)
    assert path.read_text().splitlines() == ["bin_left,bin_right,density", "0.0,0.5,0.5", "0.5,1.0,0.5"]
