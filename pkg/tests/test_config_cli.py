import json
import logging

import numpy as np
import pytest
import yaml

from danse import io
from danse.cli import main
from danse.config import PRESETS, apply_scale, cell_seed, parse_config, preset
from danse.errors import ConfigError, InvalidParameterError


def write(tmp_path, text, name="run.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_minimal_file_echoes_defaults(tmp_path):
    m = parse_config(write(tmp_path, "W: 4\ng: 0\n"))
    echo = yaml.safe_load(m.echo())
    assert echo["L"] == 101 and echo["absorber"]["n_abs"] == 10
    assert echo["absorber"]["amplitude"] == 1.0
    assert echo["W"] == 4.0 and echo["g"] == 0.0
    for key in ("L0", "gamma", "t_max", "dt_max", "integrator", "seed", "n_realizations"):
        assert key in echo
    assert m.n_cells == 1


def test_even_L0_rejected_with_line(tmp_path):
    with pytest.raises(ConfigError, match="L0 must be odd") as err:
        parse_config(write(tmp_path, "W: 4\nL0: 4\n"))
    assert ":2" in str(err.value) and "L0" in str(err.value)


def test_unknown_key_and_bad_values(tmp_path):
    with pytest.raises(ConfigError, match="colour") as err:
        parse_config(write(tmp_path, "W: 4\n\ncolour: red\n"))
    assert ":3" in str(err.value)
    with pytest.raises(ConfigError):
        parse_config(write(tmp_path, "W: -1\n"))
    with pytest.raises(ConfigError):
        parse_config(write(tmp_path, "W: [1, 2\n"))
    with pytest.raises(ConfigError):
        parse_config(write(tmp_path, "sweep:\n  W: []\n"))
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "missing.yaml")


def test_flag_wins_and_conflict_logged(tmp_path, caplog):
    conflicts = []
    with caplog.at_level(logging.WARNING, logger="danse"):
        m = parse_config(write(tmp_path, "W: 4\nseed: 5\n"), {"seed": 9}, conflicts=conflicts)
    assert m.master_seed == 9
    assert len(conflicts) == 1 and "seed" in conflicts[0]
    assert "seed" in caplog.text


def test_sweep_cells_and_seeds(tmp_path):
    m = parse_config(write(tmp_path, "sweep:\n  W: [2, 4]\n  gamma: [0, 1.0e-4, 1.0e-3]\n"))
    cells = m.cells()
    assert m.n_cells == len(cells) == 6
    seeds = {s for _, _, s in cells}
    assert len(seeds) == 6
    coords, cfg, s = cells[0]
    assert cfg.W == coords["W"] and cfg.gamma == coords["gamma"]
    assert s == cell_seed(m.master_seed, coords)


def test_zip_axes(tmp_path):
    text = "sweep:\n  W: [4, 1]\n  gamma: [1.0e-5, 1.0e-3]\n  L0: [3, 5]\nzip: [W, gamma]\n"
    m = parse_config(write(tmp_path, text))
    assert m.n_cells == 4
    pairs = {(c["W"], c["gamma"]) for c, _, _ in m.cells()}
    assert pairs == {(4.0, 1e-5), (1.0, 1e-3)}
    with pytest.raises(ConfigError):
        parse_config(write(tmp_path, "sweep:\n  W: [4, 1]\n  gamma: [1.0e-5]\nzip: [W, gamma]\n"))


def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    cols = {"t": rng.random(50) * 1e4, "p_mean": rng.random(50),
            "x2_mean": np.r_[np.nan, rng.random(49) * 1e-300]}
    meta = {"W": 4.0, "seed": 2**64 - 1, "name": "a b"}
    io.write_csv(tmp_path / "x.csv", cols, meta)
    back, m2 = io.read_csv(tmp_path / "x.csv")
    for k, v in cols.items():
        assert np.array_equal(back[k], v, equal_nan=True)
    assert m2 == meta
    io.write_json(tmp_path / "x.json", cols, meta)
    back, m3 = io.read_json(tmp_path / "x.json")
    assert np.array_equal(back["p_mean"], cols["p_mean"]) and m3 == meta


RUN = """name: demo
W: 4
g: 1
L: 31
L0: 3
t_max: 50
gamma: 0.01
n_realizations: 3
snapshot_times: [t_max]
"""


def run_cli(args):
    return main([str(a) for a in args])


def data_files(d):
    return sorted(p.name for p in d.iterdir() if p.suffix in (".csv", ".json")
                  and not p.name.endswith(".meta.json"))


def test_single_cell_run(tmp_path):
    cfg = write(tmp_path, RUN)
    out = tmp_path / "o"
    assert run_cli(["run", "--config", cfg, "--out", out, "--threads", 1]) == 0
    assert (out / "demo.csv").exists()
    sidecars = list(out.glob("*.meta.json"))
    assert len(sidecars) == 1
    side = json.loads(sidecars[0].read_text())
    for key in ("manifest", "master_seed", "n_realizations", "runtime"):
        assert key in side
    assert side["runtime"]["version"] and side["runtime"]["wall_time_s"] >= 0
    cols, meta = io.read_csv(out / "demo.csv")
    assert cols["t"][-1] == 50.0 and meta["n_realizations"] == 3
    assert np.all(np.diff(cols["p_mean"]) <= 1e-12)


def test_sweep_run_files_and_reproducibility(tmp_path):
    cfg = write(tmp_path, RUN.replace("n_realizations: 3", "n_realizations: 2")
                + "sweep:\n  W: [2, 4]\n  gamma: [0, 0.01, 0.1]\n")
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert run_cli(["run", "--config", cfg, "--out", a, "--threads", 1]) == 0
    curves = [n for n in data_files(a) if "__rho" not in n]
    assert len(curves) == 6
    assert all("W=" in n and "gamma=" in n for n in curves)
    assert run_cli(["run", "--config", cfg, "--out", b, "--threads", 2]) == 0
    assert data_files(a) == data_files(b)
    for n in data_files(a):
        assert (a / n).read_bytes() == (b / n).read_bytes()
    # a sidecar alone reproduces its cell
    side = sorted(a.glob("*.meta.json"))[3]
    assert run_cli(["run", "--config", side, "--out", c, "--threads", 1]) == 0
    stem = side.name[:-len(".meta.json")]
    assert (c / f"{stem}.csv").read_bytes() == (a / f"{stem}.csv").read_bytes()


def test_g_sweep_writes_curve_files(tmp_path):
    cfg = write(tmp_path, RUN.replace("n_realizations: 3", "n_realizations: 1")
                + "sweep:\n  g: [0.5, 5]\n  L0: [3, 5]\n")
    out = tmp_path / "o"
    assert run_cli(["run", "--config", cfg, "--out", out, "--threads", 1]) == 0
    curves = sorted(out.glob("demo__curve*"))
    assert len(curves) == 2
    cols, meta = io.read_csv(curves[0])
    assert list(cols) == ["g", "p", "p_sem"] and meta["L0"] == 3
    assert np.array_equal(cols["g"], [0.5, 5.0])


def test_json_format_and_dry_run(tmp_path, capsys):
    cfg = write(tmp_path, RUN)
    out = tmp_path / "o"
    assert run_cli(["run", "--config", cfg, "--out", out, "--dry-run"]) == 0
    assert not out.exists()
    assert "n_realizations" in capsys.readouterr().err
    assert run_cli(["run", "--config", cfg, "--out", out, "--format", "json", "--threads", 1]) == 0
    cols, meta = io.read_table(out / "demo.json")
    assert meta["L0"] == 3 and cols["p_mean"].size == cols["t"].size


def test_cli_usage_errors(tmp_path, capsys):
    assert run_cli(["run", "--config", write(tmp_path, "L0: 4\n")]) == 2
    assert "L0 must be odd" in capsys.readouterr().err
    assert run_cli(["run"]) == 2


def test_ensemble_failure_exit_code(tmp_path, monkeypatch):
    from danse import cli
    from danse.errors import EnsembleFailedError

    def boom(*a, **k):
        raise EnsembleFailedError(3, 3)
    monkeypatch.setattr(cli, "run_ensemble", boom)
    assert run_cli(["run", "--config", write(tmp_path, RUN), "--out", tmp_path / "o"]) == 1


def test_presets():
    f1 = preset("fig1", scale=1.0)
    assert f1.sweep["W"] == (2.0, 3.0, 4.0, 6.0, 8.0)
    assert f1.config.g == 0.0 and f1.config.L0 == 21 and f1.config.t_max == 1e5
    assert len(f1.sweep["gamma"]) == 11
    assert np.allclose(f1.sweep["gamma"], np.geomspace(1e-6, 1e-1, 11))
    f3 = preset("fig3", scale=1.0)
    assert f3.config.W == 4.0 and f3.config.L0 == 3
    assert f3.sweep["gamma"] == (0.0, 1e-5, 1e-4, 1e-3)
    assert max(f3.sweep["g"]) >= 320
    f4 = preset("fig4", scale=1.0)
    assert f4.config.W == 1.0 and f4.config.gamma == 1e-5
    assert f4.sweep["L0"] == (3, 7, 13, 21, 31, 41)
    f5 = preset("fig5", scale=1.0)
    assert {(c["W"], c["gamma"]) for c, _, _ in f5.cells()} == {(4.0, 1e-5), (1.0, 1e-3)}
    for name in PRESETS:
        m = preset(name)
        assert m.config.t_max == 1e4 and m.n_realizations == 50
    with pytest.raises(InvalidParameterError):
        preset("fig9")


def test_scale_preserves_expected_se_events():
    m = preset("fig2", scale=1.0)
    s = apply_scale(m, 0.1)
    assert s.config.t_max == pytest.approx(1e4)
    for g0, g1 in zip(m.sweep["gamma"], s.sweep["gamma"]):
        assert g1 * s.config.t_max == pytest.approx(g0 * m.config.t_max)
    with pytest.raises(InvalidParameterError):
        apply_scale(m, 0.0)


def test_preset_cli_emit(tmp_path):
    emit = tmp_path / "fig4.yaml"
    assert run_cli(["preset", "fig4", "--emit", emit]) == 0
    m = parse_config(emit)
    assert m.n_cells == 6 * 17 and m.config.t_max == pytest.approx(1e4)


def _planted_files(tmp_path, s=0.6, L0s=(3, 7, 13, 21)):
    paths = []
    for L0 in L0s:
        g = np.geomspace(0.1, 1000, 25)
        p = 1.0 / (1.0 + (g * L0 ** -s / 5.0) ** 2)
        path = tmp_path / f"c{L0}.csv"
        io.write_csv(path, {"g": g, "p": p}, {"L0": L0})
        paths.append(path)
    return paths


def test_collapse_cli(tmp_path, capsys):
    paths = _planted_files(tmp_path)
    assert run_cli(["collapse", paths[0], "--out", tmp_path]) == 2
    assert "need ≥ 2 distinct L0" in capsys.readouterr().err
    assert run_cli(["collapse", *paths, "--n-boot", 20, "--out", tmp_path]) == 0
    report = json.loads((tmp_path / "collapse_g.json").read_text())
    assert report["exponent"] == pytest.approx(0.6, abs=0.01)
    assert report["objective"] < report["objective_at_zero"]
    cols, meta = io.read_csv(tmp_path / "collapse_g_curves.csv")
    assert cols["g_tilde"].size == 4 * 25 and meta["s"] == report["exponent"]


def test_collapse_no_overlap(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    io.write_csv(a, {"g": [0.1, 0.2, 0.3], "p": [1.0, 0.9, 0.8]}, {"L0": 3})
    io.write_csv(b, {"g": [1e5, 2e5, 3e5], "p": [0.1, 0.05, 0.0]}, {"L0": 41})
    assert run_cli(["collapse", a, b, "--search", 0, 0.1, "--n-boot", 0, "--out", tmp_path]) == 3


def test_units_cli(capsys):
    assert run_cli(["units", "depth", "--omega", 2.0, "--delta", 1.0]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(0.5)
    assert run_cli(["units", "reduced-gamma", "--gamma-se", 1.0, "--t-over-hbar", 1e3]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(1e-3)
