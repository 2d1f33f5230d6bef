"""End-to-end CLI behaviour: exit codes, CSV formats, manifests, determinism."""

import numpy as np
import pytest
import yaml

from eivreg import cli
from eivreg.csvio import read_matrix_csv, write_matrix_csv
from eivreg.model import generate, make_restricted_b
from eivreg.config import parse_config


def _write_config(path, **model_overrides):
    doc = {
        "model": {"n": 400, "p": 2, "q": 2, "sigma_eps2": 2.0,
                  "sigma_delta2": 0.5, "sigma_psi2": 0.5,
                  "error_family": "gaussian",
                  "M": {"kind": "uniform", "low": -4.0, "high": 4.0,
                        "seed": 1848}},
        "restriction": {"R1": [[1.0, -0.5]], "R2": [[1.0], [0.8]],
                        "theta": [[0.3]], "theta0": [[0.9]]},
        "simulation": {"master_seed": 314, "reps": 300,
                       "B_seed": [[1.6, 0.8], [-0.5, 1.3]],
                       "estimators": ["UE", "B2", "B3", "B4"]},
        "score_cov": {"n": 400, "reps": 300},
        "risk": {"weight": "identity", "q0": "B2", "grid": 20},
    }
    doc["model"].update(model_overrides)
    path.write_text(yaml.safe_dump(doc), encoding="utf-8")
    return doc


@pytest.fixture()
def config_path(tmp_path):
    path = tmp_path / "cfg.yaml"
    _write_config(path)
    return path


def _noiseless_fixture(tmp_path):
    cfg_path = tmp_path / "noiseless.yaml"
    doc = _write_config(cfg_path, sigma_eps2=0.0, sigma_delta2=0.0,
                        sigma_psi2=0.0)
    # exact restriction: the projected truth satisfies the same theta the
    # restricted estimators enforce, so every estimator recovers it
    doc["restriction"]["theta0"] = [[0.0]]
    cfg_path.write_text(yaml.safe_dump(doc), encoding="utf-8")
    run = parse_config(doc)
    B = make_restricted_b(run.model, run.restriction, run.b_truth_seed())
    ds = generate(run.model, B, np.random.default_rng(0))
    write_matrix_csv(tmp_path / "z.csv", ds.Z)
    write_matrix_csv(tmp_path / "x.csv", ds.X)
    return cfg_path, tmp_path / "z.csv", tmp_path / "x.csv", B


def test_estimate_recovers_noiseless_truth(tmp_path, capsys):
    cfg_path, z_csv, x_csv, B = _noiseless_fixture(tmp_path)
    out = tmp_path / "out"
    code = cli.main(["estimate", "--config", str(cfg_path), "--z", str(z_csv),
                     "--x", str(x_csv), "--out", str(out)])
    assert code == 0
    for name in ("b_lse", "b1", "b2", "b3", "b4"):
        got = read_matrix_csv(out / f"{name}.csv")
        assert np.linalg.norm(got - B) <= 1e-8
    manifest = (out / "manifest.txt").read_text()
    assert "command=estimate" in manifest
    assert "config_digest=" in manifest


def test_estimate_outputs_byte_identical(tmp_path):
    cfg_path, z_csv, x_csv, _ = _noiseless_fixture(tmp_path)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert cli.main(["estimate", "--config", str(cfg_path), "--z", str(z_csv),
                     "--x", str(x_csv), "--out", str(out1)]) == 0
    assert cli.main(["estimate", "--config", str(cfg_path), "--z", str(z_csv),
                     "--x", str(x_csv), "--out", str(out2)]) == 0
    for f in sorted(out1.glob("*.csv")):
        assert f.read_bytes() == (out2 / f.name).read_bytes()


def test_estimate_malformed_csv_exit_2(tmp_path, capsys):
    cfg_path, z_csv, x_csv, _ = _noiseless_fixture(tmp_path)
    bad = tmp_path / "bad.csv"
    lines = (tmp_path / "z.csv").read_text().splitlines()
    lines[3] = lines[3].replace(",", ",abc", 1)
    bad.write_text("\n".join(lines) + "\n", encoding="utf-8")
    code = cli.main(["estimate", "--config", str(cfg_path), "--z", str(bad),
                     "--x", str(x_csv), "--out", str(tmp_path / "o")])
    assert code == 2
    err = capsys.readouterr().err
    assert "row 4" in err


def test_estimate_shape_mismatch_exit_2(tmp_path, capsys):
    cfg_path, z_csv, x_csv, _ = _noiseless_fixture(tmp_path)
    short = tmp_path / "short.csv"
    write_matrix_csv(short, np.zeros((10, 2)))
    code = cli.main(["estimate", "--config", str(cfg_path), "--z", str(short),
                     "--x", str(x_csv), "--out", str(tmp_path / "o")])
    assert code == 2


def test_config_error_exit_2(tmp_path, capsys):
    path = tmp_path / "broken.yaml"
    path.write_text("model: {n: 100}\n", encoding="utf-8")
    code = cli.main(["law", "--config", str(path), "--out",
                     str(tmp_path / "o")])
    assert code == 2


def test_numerical_failure_exit_3(tmp_path, capsys):
    path = tmp_path / "hopeless.yaml"
    # flat design with no latent variance: the attenuation correction is at
    # its breakdown point and the replication engine trips the exclusion cap
    _write_config(path, n=120, sigma_delta2=1.0, sigma_psi2=0.0,
                  M={"kind": "uniform", "low": -0.05, "high": 0.05, "seed": 3})
    code = cli.main(["simulate", "--config", str(path), "--out",
                     str(tmp_path / "o"), "--reps", "60", "--workers", "1"])
    assert code == 3


def test_efficiency_grid_rows_and_header(tmp_path, config_path):
    out = tmp_path / "eff"
    code = cli.main(["efficiency", "--config", str(config_path), "--out",
                     str(out), "--reps", "200", "--workers", "1"])
    assert code == 0
    lines = (out / "efficiency.csv").read_text().splitlines()
    assert lines[0] == "scale,theta0_norm2,adr_ue,adr_re,relative_efficiency,verdict"
    assert len(lines) == 21  # header + exactly the configured 20 grid rows


def test_adr_zero_direction_verdict(tmp_path):
    path = tmp_path / "cfg0.yaml"
    doc = _write_config(path)
    doc["restriction"]["theta0"] = [[0.0]]
    path.write_text(yaml.safe_dump(doc), encoding="utf-8")
    out = tmp_path / "adr"
    code = cli.main(["adr", "--config", str(path), "--out", str(out),
                     "--reps", "200", "--workers", "1"])
    assert code == 0
    lines = (out / "adr.csv").read_text().splitlines()
    assert lines[0].startswith("estimator,adr_ue,adr_re")
    for line in lines[1:]:
        assert line.endswith("RE-dominates")


def test_simulate_writes_comparison(tmp_path, config_path):
    out = tmp_path / "sim"
    code = cli.main(["simulate", "--config", str(config_path), "--out",
                     str(out), "--workers", "2"])
    assert code == 0
    verdict = (out / "verdict.txt").read_text()
    assert "law_agreement=" in verdict
    assert (out / "cov_empirical.csv").exists()
    assert (out / "compare_cov.csv").exists()
    assert read_matrix_csv(out / "cov_empirical.csv").shape == (16, 16)


def test_seed_override_changes_outputs(tmp_path, config_path):
    out_a, out_b, out_c = (tmp_path / x for x in ("a", "b", "c"))
    for out, seed in ((out_a, None), (out_b, None), (out_c, "555")):
        args = ["simulate", "--config", str(config_path), "--out", str(out),
                "--reps", "100", "--workers", "1"]
        if seed:
            args += ["--seed", seed]
        assert cli.main(args) == 0
    same = (out_a / "cov_empirical.csv").read_bytes()
    assert same == (out_b / "cov_empirical.csv").read_bytes()
    assert same != (out_c / "cov_empirical.csv").read_bytes()


def test_law_outputs_blocks_and_manifest(tmp_path, config_path):
    out = tmp_path / "law"
    code = cli.main(["law", "--config", str(config_path), "--out", str(out),
                     "--reps", "200", "--workers", "1"])
    assert code == 0
    blocks = (out / "blocks.txt").read_text()
    assert "labels=UE;B2;B3;B4" in blocks
    assert (out / "cov_1_4.csv").exists()
    assert (out / "mean_UE.csv").exists()
    mean_ue = read_matrix_csv(out / "mean_UE.csv")
    np.testing.assert_array_equal(mean_ue, np.zeros((2, 2)))
    cov11 = read_matrix_csv(out / "cov_1_1.csv")
    assert cov11.shape == (4, 4)
