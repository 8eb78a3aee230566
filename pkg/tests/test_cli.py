import filecmp
import math

import numpy as np
import pytest

from dickecr import cli
from dickecr.scenario import (
    PRESETS, ConfigError, load_preset, load_text, parse_text, resolve, to_text, with_overrides,
)
from dickecr.timeseries import TimeSeries

SMALL = """
name = small
j = 1/2
omega = 0.1
lam = 0.05
n_max = 40
theta0 = pi/2
alpha0 = 2, 0
t_max = 2*Tf
n_samples = 161
methods = exact, pert, sca, driven
outputs = jx, jz, entropy, norm, energy
"""


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL)
    return path


def _dir_files(d):
    return sorted(p.name for p in d.iterdir())


def test_parse_and_symbols():
    sc = load_text(SMALL)
    assert sc.t_max == pytest.approx(2 * 2 * math.pi / 0.1)
    assert sc.theta0 == pytest.approx(math.pi / 2)
    assert sc.alpha0 == 2 + 0j
    assert sc.methods == ("exact", "pert", "sca", "driven")
    assert sc.spin_j == 0.5


def test_comments_and_blank_lines():
    raw = parse_text("# comment\n\nomega = 0.1  # trailing\n")
    assert raw == {"omega": "0.1"}


@pytest.mark.parametrize("edit", [
    ("methods = exact, pert, sca, driven", "methods ="),
    ("methods = exact, pert, sca, driven", "methods = exact, quantum"),
    ("outputs = jx", "outputs = colour, jx"),
    ("n_max = 40", "n_max = forty"),
    ("t_max = 2*Tf", "t_max = -1"),
    ("j = 1/2", "j = 0.3"),
])
def test_config_errors(edit):
    with pytest.raises(ConfigError):
        load_text(SMALL.replace(*edit))


def test_unknown_key_and_preset():
    with pytest.raises(ConfigError):
        load_text(SMALL + "colour = blue\n")
    with pytest.raises(ConfigError):
        load_preset("fig3")


def test_husimi_grid_must_fit_cutoff():
    with pytest.raises(ConfigError):
        load_text(SMALL.replace("outputs = jx", "outputs = husimi_field, jx") + "husimi_times = Tf\n")


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_roundtrip(name):
    sc = load_preset(name)
    assert load_text(to_text(sc)) == sc


def test_preset_with_overrides():
    sc = load_text("preset = fig9\nn_max = 120\n")
    assert sc.n_max == 120 and sc.name == "fig9"
    with pytest.raises(ConfigError):
        with_overrides(sc, methods=())


def test_simulate_outputs(small_cfg, tmp_path):
    out = tmp_path / "run"
    assert cli.main(["simulate", "--config", str(small_cfg), "--out", str(out)]) == 0
    files = _dir_files(out)
    for m in ("exact", "pert"):
        for ch in ("jx", "jz", "entropy", "norm", "energy"):
            assert f"{m}_{ch}.dat" in files
    assert "sca_jz.dat" in files and "driven_jx.dat" in files and "sca_entropy.dat" not in files
    assert "summary.txt" in files and "manifest.cfg" in files
    ts = TimeSeries.load(out / "exact_jz.dat")
    assert ts.times.size == 161
    head = (out / "exact_jz.dat").read_text().splitlines()
    assert any(ln.startswith("# columns: t t_field_periods t_atomic_periods jz") for ln in head)
    summary = (out / "summary.txt").read_text()
    assert "T_E = " in summary and "delta_theta = " in summary and "exact.norm_drift_max" in summary


def test_repeat_and_manifest_runs_identical(small_cfg, tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert cli.main(["simulate", "--config", str(small_cfg), "--out", str(a)]) == 0
    assert cli.main(["simulate", "--config", str(small_cfg), "--out", str(b), "--parallel"]) == 0
    assert cli.main(["simulate", "--config", str(a / "manifest.cfg"), "--out", str(c)]) == 0
    names = _dir_files(a)
    assert names == _dir_files(b) == _dir_files(c)
    for d in (b, c):
        match, mismatch, errors = filecmp.cmpfiles(a, d, names, shallow=False)
        assert mismatch == [] and errors == []


def test_compare_report(small_cfg, tmp_path):
    out = tmp_path / "cmp"
    assert cli.main(["compare", "--config", str(small_cfg), "--out", str(out)]) == 0
    text = (out / "compare.txt").read_text()
    assert "exact-pert jz" in text and "sca-driven jz" in text


def test_compare_self_is_zero():
    sc = load_text(SMALL.replace("methods = exact, pert, sca, driven", "methods = exact"))
    rr = cli.run(sc)
    diffs = cli.compare_series(rr.results["exact"].series, rr.results["exact"].series)
    assert all(v == (0.0, 0.0) for v in diffs.values())
    with pytest.raises(ConfigError):
        cli.compare(sc)


def test_strict_truncation(tmp_path):
    cfg = tmp_path / "trunc.cfg"
    cfg.write_text(SMALL.replace("n_max = 40", "n_max = 20").replace("methods = exact, pert, sca, driven",
                                                                       "methods = exact"))
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "x")]) == 0
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "y"), "--strict"]) == 3


def test_cutoff_failure_exit_code(tmp_path):
    cfg = tmp_path / "cut.cfg"
    cfg.write_text(SMALL.replace("n_max = 40", "n_max = 10"))
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "z")]) == 3


def test_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(SMALL.replace("methods = exact, pert, sca, driven", "methods ="))
    assert cli.main(["simulate", "--config", str(cfg)]) == 2
    assert "config error" in capsys.readouterr().err
    assert cli.main(["simulate", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_output_dir_from_environment(small_cfg, tmp_path, monkeypatch):
    monkeypatch.setenv("DICKECR_OUT", str(tmp_path / "envout"))
    assert cli.main(["simulate", "--config", str(small_cfg)]) == 0
    assert (tmp_path / "envout" / "small" / "exact_jz.dat").exists()


def test_windowed_sampling_times():
    sc = load_preset("fig9")
    t = cli.sample_times(sc)
    assert t.size % sc.window_samples == 0
    assert np.all(np.diff(t) > 0)
    assert t[-1] <= sc.t_max
