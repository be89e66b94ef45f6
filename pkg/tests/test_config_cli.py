import csv
import json
import warnings

import pytest

from bukhgeim.cli import ERROR_COLUMNS, EXIT_CONFIG, EXIT_NOT_CONTRACTIVE, EXIT_OK, EXIT_PARTIAL, main
from bukhgeim.config import ExperimentConfig, load_config
from bukhgeim.exceptions import ConfigError

SMALL = {
    "points_per_side": 64,
    "annulus_R": 20.0,
    "n_r": 1,
    "n_theta": 4,
    "w_stride": 4,
    "w_radius": 0.7,
    "test_radius": 0.3,
    "test_center": [0.0, 0.1],
}


def write_cfg(path, **over):
    d = {**SMALL, **over}
    path.write_text(json.dumps(d))
    return str(path)


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


@pytest.fixture(scope="module")
def forward_run(tmp_path_factory):
    base = tmp_path_factory.mktemp("fwd")
    cfg = write_cfg(base / "cfg.json")
    codes = [main(["forward", "--config", cfg, "--out", str(base / name)]) for name in ("a", "b")]
    return base, codes


# -- config ------------------------------------------------------------------------

def test_config_json_roundtrip():
    c = ExperimentConfig(**{**SMALL, "preset_amplitude": [0.5, 0.2]})
    back = ExperimentConfig.from_json(c.to_json())
    assert back == c
    assert back.conductivity().amplitude == 0.5 + 0.2j
    assert back.annulus().r_outer == 40.0
    assert back.presets() == ["complex_bump"] and back.radii() == [20.0]


@pytest.mark.parametrize("bad", [
    {"nonsense": 1},
    {"preset": "square"},
    {"w_stride": 3},
    {"conj_mode": "both"},
    {"points_per_side": 7},
    {"annulus_R": -1},
    {"tol": 0},
    {"diag_p": 1},
    {"n_theta": "eight"},
])
def test_config_rejects(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({**SMALL, **bad})


def test_config_warns_on_non_power_of_two():
    with pytest.warns(UserWarning):
        ExperimentConfig(points_per_side=96, w_stride=8)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(p)


# -- CLI -----------------------------------------------------------------------------

def test_forward_outputs(forward_run):
    base, codes = forward_run
    assert codes == [EXIT_OK, EXIT_OK]
    out = base / "a"
    m = manifest(out)
    assert m["command"] == "forward" and m["status"] == "ok"
    assert {o["path"] for o in m["outputs"]} == {"dataset.bksd", "dataset.csv"}
    assert m["config"]["points_per_side"] == 64
    assert m["conj_mode"]["winning_mode"] == "conjugated"
    assert m["failures"] == []
    assert set(m["timings_s"]) >= {"potential", "dataset", "write"}


def test_forward_is_bitwise_reproducible(forward_run):
    base, _ = forward_run
    for name in ("dataset.bksd", "dataset.csv"):
        assert (base / "a" / name).read_bytes() == (base / "b" / name).read_bytes()
    sha = [{o["path"]: o["sha1"] for o in manifest(base / d)["outputs"]} for d in ("a", "b")]
    assert sha[0] == sha[1]


def test_reconstruct_from_dataset_and_manifest(forward_run, tmp_path):
    base, _ = forward_run
    cfg = str(base / "cfg.json")
    code = main(["reconstruct", "--config", cfg, "--dataset", str(base / "a" / "dataset.bksd"),
                 "--out", str(tmp_path / "r1")])
    assert code == EXIT_OK
    code = main(["reconstruct", "--manifest", str(base / "a" / "manifest.json"),
                 "--out", str(tmp_path / "r2")])
    assert code == EXIT_OK
    t1 = (tmp_path / "r1" / "errors.csv").read_bytes()
    assert t1 == (tmp_path / "r2" / "errors.csv").read_bytes()
    rows = list(csv.reader((tmp_path / "r1" / "errors.csv").read_text().splitlines()))
    assert rows[0] == ERROR_COLUMNS
    row = dict(zip(rows[0], rows[1]))
    assert row["preset"] == "complex_bump" and row["N"] == "64"
    assert float(row["relL2_Q"]) > 0 and float(row["relL2_gamma"]) > 0
    assert row["weak_rel_error"] != ""
    for col in ERROR_COLUMNS[5:]:
        float(row[col])
    for name in ("recon_Q.Q12.cfld", "recon_Q.Q21.cfld", "recon_Q.json", "recon_gamma.cfld"):
        assert (tmp_path / "r1" / name).exists()


def test_reconstruct_needs_input(tmp_path):
    assert main(["reconstruct", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_threads_resolution(forward_run, tmp_path, monkeypatch):
    base, _ = forward_run
    cfg = write_cfg(tmp_path / "c.json", n_theta=2, w_radius=0.2)
    monkeypatch.setenv("BUKHGEIM_THREADS", "2")
    assert main(["forward", "--config", cfg, "--out", str(tmp_path / "e")]) == EXIT_OK
    assert manifest(tmp_path / "e")["config"]["parallel_width"] == 2
    assert main(["forward", "--config", cfg, "--out", str(tmp_path / "f"), "--threads", "3"]) == EXIT_OK
    assert manifest(tmp_path / "f")["config"]["parallel_width"] == 3
    a = (tmp_path / "e" / "dataset.bksd").read_bytes()
    assert a == (tmp_path / "f" / "dataset.bksd").read_bytes()
    monkeypatch.setenv("BUKHGEIM_THREADS", "many")
    assert main(["forward", "--config", cfg, "--out", str(tmp_path / "g")]) == EXIT_CONFIG


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"preset": "square"}))
    assert main(["forward", "--config", str(bad), "--out", str(tmp_path / "x")]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err

    cfg = write_cfg(tmp_path / "p.json", max_iter=2, n_theta=2, w_radius=0.2)
    assert main(["forward", "--config", cfg, "--out", str(tmp_path / "p")]) == EXIT_PARTIAL
    m = manifest(tmp_path / "p")
    assert m["status"] == "partial" and m["failures"]

    cfg = write_cfg(tmp_path / "n.json", preset="real_bump", preset_amplitude=[8.0, 0.0],
                    annulus_R=1.0, n_theta=2, w_radius=0.0)
    assert main(["forward", "--config", cfg, "--out", str(tmp_path / "n")]) == EXIT_NOT_CONTRACTIVE
    assert manifest(tmp_path / "n")["failures"][0]["status"] == "not_contractive"


def test_roundtrip_and_diagnostics(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", sweep_presets=["real_bump", "two_bump"],
                    diag_shells=[[10, 20], [20, 40]], diag_z=[[0.1, 0.0]], diag_w=[[0.0, 0.0]],
                    stationary_lambdas=[16, 32, 64, 128])
    assert main(["roundtrip", "--config", cfg, "--out", str(tmp_path / "rt")]) == EXIT_OK
    rows = (tmp_path / "rt" / "summary.csv").read_text().splitlines()
    assert len(rows) == 3 and rows[1].startswith("real_bump,64,20.0")
    m = manifest(tmp_path / "rt")
    assert m["conj_mode"]["winning_mode"] == "conjugated"
    assert set(m["conj_mode"]["per_dataset"]) == {"real_bump_R20", "two_bump_R20"}

    assert main(["diagnostics", "--config", cfg, "--out", str(tmp_path / "d")]) == EXIT_OK
    decay = (tmp_path / "d" / "decay.csv").read_text().splitlines()
    assert decay[0] == "shell_R,quantity,norm" and len(decay) == 1 + 2 * 3
    sp = (tmp_path / "d" / "stationary_phase.csv").read_text().splitlines()
    assert len(sp) == 1 + 4 + 1
    m = manifest(tmp_path / "d")
    assert m["stationary_phase_slope"] <= -1.0
    assert m["decay"]["strictly_decreasing"]["M1"]


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert "0.1.0" in capsys.readouterr().out


def test_no_warnings_for_default_config():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ExperimentConfig()
