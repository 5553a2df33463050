import json

import numpy as np
import pytest
from PIL import Image

from mmsldl.cli import grid_points, main
from mmsldl.config import GridSpec, RunConfig

SMALL = ["--classes", "3", "--per-class", "6", "--dim", "36", "--rank", "2",
         "--train-per-class", "4", "--max-outer", "2"]


@pytest.fixture(autouse=True)
def one_thread(monkeypatch):
    monkeypatch.setenv("MMSLDL_THREADS", "1")


def run(*args):
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    out = tmp_path_factory.mktemp("train")
    import os
    os.environ["MMSLDL_THREADS"] = "1"
    assert main(["train", "--out", str(out), "--seed", "3", *SMALL]) == 0
    return out


def test_train_outputs(trained):
    assert (trained / "config.json").is_file() and (trained / "model" / "manifest").is_file()
    report = json.loads((trained / "report.json").read_text())
    pairs = [(t["alternation"], t["modality"]) for t in report["traces"]]
    assert pairs == [(a, k) for a in range(report["alternations"]) for k in (1, 2)]
    assert all(t["feas"] and t["zw"] for t in report["traces"])
    assert "runtime_total_s" in report and "all_coding_converged" in report


def test_train_is_deterministic_and_replayable(trained, tmp_path):
    assert run("train", "--out", tmp_path / "again", "--seed", 3, *SMALL) == 0
    assert run("train", "--config", trained / "config.json", "--out", tmp_path / "replay") == 0
    for other in (tmp_path / "again", tmp_path / "replay"):
        for f in sorted((trained / "model").rglob("*")):
            if f.is_file():
                assert f.read_bytes() == (other / "model" / f.relative_to(trained / "model")).read_bytes()


def test_exit_codes(tmp_path, monkeypatch):
    assert run("train", "--dataset", tmp_path / "nowhere", "--out", tmp_path / "o") == 3
    assert run("train", "--alpha", -1, "--out", tmp_path / "o") == 2
    (tmp_path / "bad.json").write_text("{")
    assert run("eval", "--config", tmp_path / "bad.json", "--out", tmp_path / "o") == 2
    assert run("eval", "--model", tmp_path / "no_model", "--out", tmp_path / "o", *SMALL) == 3
    assert run("decompose", "--out", tmp_path / "o", *SMALL) == 2
    monkeypatch.setenv("MMSLDL_THREADS", "zero")
    assert run("eval", "--out", tmp_path / "o", *SMALL) == 2


def test_numerical_failure_exit_code(tmp_path):
    # all-zero training codes make the dictionary normal equations singular
    code = run("train", "--out", tmp_path / "o", "--beta", 1e6, *SMALL)
    assert code == 4


def test_missing_dataset_message(tmp_path, capsys):
    run("train", "--dataset", tmp_path / "nowhere", "--out", tmp_path / "o")
    assert "nowhere" in capsys.readouterr().err


def test_eval_metrics(tmp_path):
    assert run("eval", "--out", tmp_path, "--repeats", 2, *SMALL) == 0
    rows = [json.loads(l) for l in (tmp_path / "metrics.jsonl").read_text().splitlines()]
    table = (tmp_path / "metrics.txt").read_text().splitlines()
    assert len(rows) == 3 and len(table) - 1 == 3
    assert rows[-1]["repeat"] == "mean"
    for r in rows[:-1]:
        conf = np.array(r["confusion"])
        assert np.array_equal(conf.sum(axis=1), [2, 2, 2])
        assert r["recognition_rate"] == 100.0 and len(r["per_class_accuracy"]) == 3
        assert 0 <= r["agreement_rate"] <= 1
    assert rows[-1]["recognition_rate"] == 100.0 and "100.00" in table[-1]


def test_eval_with_saved_model(trained, tmp_path):
    assert run("eval", "--model", trained / "model", "--out", tmp_path, *SMALL) == 0
    rows = (tmp_path / "metrics.jsonl").read_text().splitlines()
    assert len(rows) == 2
    cfg = RunConfig.load(tmp_path / "config.json")
    assert cfg.split.repeats == 1 and cfg.split.seed == 3


def test_decompose_files(trained, tmp_path):
    assert run("decompose", "--model", trained / "model", "--out", tmp_path, "--samples", "0,7", *SMALL) == 0
    pngs = sorted(tmp_path.glob("*.png"))
    assert len(pngs) == 3 * 2 * 2
    assert Image.open(pngs[0]).size == (6, 6)


def test_decompose_clean_sample_has_small_error(tmp_path):
    args = [*SMALL, "--lam", 1e4, "--seed", 1]
    assert run("train", "--out", tmp_path / "t", *args) == 0
    assert run("decompose", "--model", tmp_path / "t" / "model", "--out", tmp_path / "d",
               "--samples", "0,1,2,6,12", *args) == 0
    rows = json.loads((tmp_path / "d" / "decompose.json").read_text())
    assert len(rows) == 10 and max(r["error_energy_fraction"] for r in rows) < 0.01


@pytest.fixture(scope="module")
def image_tree(tmp_path_factory):
    root = tmp_path_factory.mktemp("faces")
    rng = np.random.default_rng(0)
    for c, name in enumerate(["anna", "bert"]):
        (root / name).mkdir()
        base = rng.uniform(0.2, 0.8, size=(8, 8, 3))
        for i in range(4):
            img = np.clip(base * rng.uniform(0.7, 1.1) + 0.03 * rng.standard_normal((8, 8, 3)), 0, 1)
            if c == 0 and i == 0:
                img = np.zeros((8, 8, 3))
            Image.fromarray((img * 255).astype(np.uint8)).save(root / name / f"{i}.png")
    patches = tmp_path_factory.mktemp("patches")
    Image.fromarray((rng.random((5, 5, 3)) * 255).astype(np.uint8)).save(patches / "p.png")
    return root, patches


def test_dataset_train_decompose_zero_sample(image_tree, tmp_path):
    root, patches = image_tree
    common = ["--dataset", root, "--height", 8, "--width", 8, "--train-per-class", 3, "--max-outer", 1]
    assert run("train", "--out", tmp_path / "t", "--occlusion", 0.3, "--patch-dir", patches, *common) == 0
    manifest = json.loads((tmp_path / "t" / "model" / "manifest").read_text())
    assert manifest["label_map"] == ["anna", "bert"]
    assert run("decompose", "--model", tmp_path / "t" / "model", "--out", tmp_path / "d", "--samples", 0, *common) == 0
    for tag in ("lowrank", "error"):
        for k in (1, 2):
            assert not np.any(np.asarray(Image.open(tmp_path / "d" / f"sample0_mod{k}_{tag}.png")))


def test_occlusion_needs_patches(image_tree, tmp_path):
    root, _ = image_tree
    assert run("train", "--dataset", root, "--occlusion", 0.3, "--out", tmp_path, "--train-per-class", 3) == 2


def test_transform_command(image_tree, tmp_path):
    root, _ = image_tree
    assert run("transform", "--input", root / "bert", "--out", tmp_path, "--height", 8, "--width", 8) == 0
    outs = sorted(tmp_path.glob("*_illumination_invariant.png"))
    assert len(outs) == 4 and Image.open(outs[0]).size == (8, 8)


def test_synth_command(tmp_path):
    assert run("synth", "--out", tmp_path, "--classes", 2, "--per-class", 3, "--dim", 9) == 0
    from mmsldl.data_io import load_synthetic
    s = load_synthetic(tmp_path / "synthetic")
    assert s.X1.shape == (9, 6)


def test_grid_order_prefers_small_values():
    pts = grid_points(GridSpec(alpha=[0.5, 0.0], beta=[0.2, 0.1], lam=[1.0]))
    assert pts[0] == (0.0, 0.1, 1.0)


def test_gridsearch_single_point(tmp_path):
    assert run("gridsearch", "--out", tmp_path, "--grid-alpha", 0.2, "--grid-beta", 0.1, "--grid-lam", 0.5,
               "--folds", 2, *SMALL) == 0
    best = json.loads((tmp_path / "best_hyperparams.json").read_text())["hyperparams"]
    assert (best["alpha"], best["beta"], best["lam"]) == (0.2, 0.1, 0.5)
    rows = (tmp_path / "grid_scores.jsonl").read_text().splitlines()
    assert len(rows) == 1 * 2


def test_gridsearch_table_size_and_failures(tmp_path):
    assert run("gridsearch", "--out", tmp_path, "--grid-alpha", "0,0.1", "--grid-beta", "0.1,1e6",
               "--grid-lam", 0.5, *SMALL, "--train-per-class", 5, "--per-class", 6, "--max-outer", 1) == 0
    rows = [json.loads(l) for l in (tmp_path / "grid_scores.jsonl").read_text().splitlines()]
    assert len(rows) == 4 * 5
    assert any(r["status"].startswith("failed") for r in rows)
    best = json.loads((tmp_path / "best_hyperparams.json").read_text())["hyperparams"]
    assert best["beta"] == 0.1



def _selected_alpha(out, seed, overlap):
    assert run("gridsearch", "--out", out, "--seed", seed, "--grid-alpha", "0,0.1", "--grid-beta", 1,
               "--grid-lam", 0.5, "--classes", 5, "--per-class", 20, "--dim", 64, "--rank", 3,
               "--overlap", overlap, "--train-corruption", 0.3, "--train-per-class", 10,
               "--folds", 5, "--max-outer", 3) == 0
    return json.loads((out / "best_hyperparams.json").read_text())["hyperparams"]["alpha"]


@pytest.mark.slow
def test_gridsearch_selects_positive_alpha_with_cross_modal_structure(tmp_path):
    # margins are a validation sample or two, so ask for a majority over seeds
    with_structure = [_selected_alpha(tmp_path / f"s{s}", s, 0.995) for s in range(5)]
    without = [_selected_alpha(tmp_path / f"n{s}", s, 0.0) for s in range(5)]
    assert sum(a > 0 for a in with_structure) >= 3
    assert sum(a > 0 for a in with_structure) > sum(a > 0 for a in without)
