import numpy as np
import pytest

from dgnn import cli
from dgnn.datasets import SbmSpec, generate_sbm, read_embeddings, write_dataset
from dgnn.params_io import load_params

FAST = ["--epochs", "6", "--seeds", "2"]


@pytest.fixture(scope="module")
def sbm_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("data") / "sbm"
    write_dataset(generate_sbm(SbmSpec(nodes_per_class=15, classes=3, p_in=0.3, p_out=0.02, dim=6)), d)
    return d


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_validate_without_profile(tiny_dir, capsys):
    assert run("validate", "--dataset", tiny_dir) == 0
    assert "homophily 0.857" in capsys.readouterr().out


def test_validate_profile_mismatch(tiny_dir, capsys):
    assert run("validate", "--dataset", tiny_dir, "--profile", "cora") == 2
    out = capsys.readouterr().out
    assert "mismatch edges: expected 5429, found 9" in out


def test_validate_profile_match(tmp_path, capsys, monkeypatch):
    # stand-in profile matching the fixture
    from dgnn.datasets import PROFILES, DatasetProfile

    monkeypatch.setitem(PROFILES, "tiny", DatasetProfile("tiny", 6, 3, 2, 9, 0.857, 1, 1, 0.01, 2, 0, 0.01))
    assert run("validate", "--dataset", "tests/fixtures/tiny", "--profile", "tiny") == 0


def test_validate_missing_dataset(tmp_path, capsys):
    assert run("validate", "--dataset", tmp_path / "none") == 1
    assert "missing dataset files" in capsys.readouterr().err


def test_train_artifacts(sbm_dir, tmp_path, capsys):
    out = tmp_path / "run"
    assert run("train", "--dataset", sbm_dir, *FAST, "--out", out) == 0
    assert capsys.readouterr().out.startswith("| Sbm | ")
    header = (out / "report.csv").read_text().splitlines()[0]
    assert header == "seed,epoch,objective,loss,train_acc,val_acc,test_acc"
    assert "| Sbm |" in (out / "report.md").read_text()
    params = load_params(out / "params_seed1.bin")
    assert params["W"].shape == (6, 6) and params["Wc"].shape == (18, 3)
    assert "seeds = [0,1]" in (out / "config.txt").read_text()


def test_rerun_from_resolved_config_identical(sbm_dir, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("train", "--dataset", sbm_dir, *FAST, "--lr", "0.05", "--out", a) == 0
    assert run("train", "--config", a / "config.txt", "--out", b) == 0
    assert (a / "config.txt").read_bytes() == (b / "config.txt").read_bytes()
    assert (a / "report.csv").read_bytes() == (b / "report.csv").read_bytes()
    assert (a / "params_seed0.bin").read_bytes() == (b / "params_seed0.bin").read_bytes()


def test_beta_zero_equals_ablation_a3(sbm_dir, tmp_path):
    a, b = tmp_path / "beta0", tmp_path / "a3"
    assert run("train", "--dataset", sbm_dir, *FAST, "--beta", "0", "--out", a) == 0
    assert run("train", "--dataset", sbm_dir, *FAST, "--ablation", "A3", "--out", b) == 0
    assert (a / "config.txt").read_bytes() == (b / "config.txt").read_bytes()
    assert (a / "report.csv").read_bytes() == (b / "report.csv").read_bytes()


def test_precedence(tmp_path):
    cfg = tmp_path / "c.txt"
    cfg.write_text("# run settings\nbeta = 0.5\nlr = 0.1\nseeds = 3\n")
    args = cli.build_parser().parse_args(["train", "--profile", "cora", "--config", str(cfg), "--lr", "0.2"])
    resolved = cli.resolve(args)
    assert resolved["alpha"] == 2.0  # profile
    assert resolved["beta"] == 0.5  # file over profile
    assert resolved["lr"] == 0.2  # flag over file
    assert resolved["seeds"] == [0, 1, 2]
    assert resolved["dropout"] == 0.25


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("learning_rate = 0.1\n")
    assert run("train", "--config", bad) == 2
    assert "unknown key 'learning_rate'" in capsys.readouterr().err
    bad.write_text("lr 0.1\n")
    assert run("train", "--config", bad) == 2
    bad.write_text("lr = fast\n")
    assert run("train", "--config", bad) == 2
    assert run("train", "--epochs", "3") == 2
    assert run("train", "--dataset", "x", "--epsilon", "2", "--seeds", "2") == 1


def test_parse_seeds():
    assert cli.parse_seeds("3") == [0, 1, 2]
    assert cli.parse_seeds("4,9") == [4, 9]
    assert cli.parse_seeds("[7]") == [7]


def test_ablate_table(sbm_dir, tmp_path, capsys):
    out = tmp_path / "abl"
    assert run("ablate", "--dataset", sbm_dir, *FAST, "--out", out) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "| Dataset | full | A1 | A2 | A3 |"
    rows = (out / "ablation.csv").read_text().splitlines()
    assert [r.split(",")[0] for r in rows[1:]] == ["full", "A1", "A2", "A3"]
    assert rows[4].split(",")[3] == "0.0"  # A3 records beta = 0
    assert run("ablate", "--dataset", sbm_dir, *FAST, "--ablation", "A1", "--out", out) == 2


def test_sweep_outputs(sbm_dir, tmp_path):
    out = tmp_path / "sw"
    assert run("sweep", "--dataset", sbm_dir, "--epochs", "2", "--seeds", "2", "--out", out) == 0
    rows = (out / "sweep_epsilon.csv").read_text().splitlines()
    assert rows[0] == "epsilon,mean,std" and len(rows) == 10
    assert [r.split(",")[0] for r in rows[1:]] == [f"0.{i}" for i in range(1, 10)]
    assert run("sweep", "--dataset", sbm_dir, "--epochs", "2", "--seeds", "2", "--axis", "lam_alpha",
               "--lam-values", "1,2", "--alpha-values", "1", "--beta-values", "0.01,0.02", "--out", out) == 0
    for beta in ("0.01", "0.02"):
        assert len((out / f"sweep_beta{beta}.csv").read_text().splitlines()) == 3


def test_gradcheck_default(capsys):
    assert run("gradcheck") == 0
    out = capsys.readouterr().out
    assert out.startswith("PASS rel_err=")
    assert float(out.split("rel_err=")[1].split()[0]) < 1e-4


def test_export(sbm_dir, tmp_path):
    out = tmp_path / "ex"
    assert run("export", "--dataset", sbm_dir, "--epochs", "3", "--seeds", "1", "--out", out) == 0
    lines = (out / "embeddings.csv").read_text().splitlines()
    assert len(lines) == 1 + 45
    assert lines[0].startswith("node_id,label,f_0,")
    labels, f, h, hf = read_embeddings(out / "embeddings.csv")
    assert f.shape == h.shape == hf.shape == (45, 6)
    assert np.all(np.isfinite(f))
