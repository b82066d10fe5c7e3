import csv
import json

import numpy as np
import pytest
from PIL import Image

from comspm import formats
from comspm.cli import main


@pytest.fixture
def images(tmp_path, rng):
    paths = []
    for k in range(3):
        p = tmp_path / "imgs" / f"im{k}.png"
        p.parent.mkdir(exist_ok=True)
        Image.fromarray(rng.integers(0, 256, (40, 36), dtype=np.uint8)).save(p)
        paths.append(str(p))
    return paths


def test_extract_single_lbp(tmp_path, images):
    out = tmp_path / "x"
    assert main(["extract", images[0], "--descriptor", "lbp", "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    entry = manifest["entries"][0]
    assert list(entry["pyramids"]) == ["lbp"]
    p = formats.read_pyramid(out / entry["pyramids"]["lbp"])
    assert p.values.size == 5376
    assert manifest["config"]["pyramid.L"] == 2 and manifest["config"]["prng"]


def test_extract_combined_is_deterministic(tmp_path, images):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["extract", *images, "--out", str(a)]) == 0
    assert main(["extract", *images, "--out", str(b)]) == 0
    files = sorted(f.name for f in a.iterdir())
    assert len(files) == 2 * 3 + 1
    for name in files:
        if name != "manifest.json":
            assert (a / name).read_bytes() == (b / name).read_bytes()


def test_extract_reports_bad_file(tmp_path, images):
    bad = tmp_path / "broken.png"
    bad.write_text("nope")
    out = tmp_path / "x"
    assert main(["extract", images[0], str(bad), "--out", str(out)]) == 1
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["entries"]) == 1 and len(manifest["failures"]) == 1


def test_gram_files(tmp_path, images):
    ext = tmp_path / "x"
    main(["extract", *images, "--out", str(ext)])
    m = str(ext / "manifest.json")
    assert main(["gram", m, "--descriptor", "lbp", "--out", str(tmp_path / "lbp.spmk")]) == 0
    assert main(["gram", m, "--lambda", "1", "--out", str(tmp_path / "c1.spmk"),
                 "--csv", str(tmp_path / "c1.csv")]) == 0
    lbp = formats.read_gram(tmp_path / "lbp.spmk")
    c1 = formats.read_gram(tmp_path / "c1.spmk")
    assert lbp.shape == (3, 3) and lbp.is_symmetric()
    assert np.array_equal(lbp.values, c1.values)
    assert c1.tag == "combined" and c1.lam == 1.0
    side = json.loads((tmp_path / "c1.spmk.json").read_text())
    assert side["stats"]["symmetric"] is True and side["config"]["combine.lam"] == 1.0
    rows = list(csv.reader(open(tmp_path / "c1.csv")))
    assert float(rows[1][2]) == c1.values[1, 2]

    main(["gram", m, "--workers", "1", "--out", str(tmp_path / "w1.spmk")])
    main(["gram", m, "--workers", "8", "--out", str(tmp_path / "w8.spmk")])
    assert (tmp_path / "w1.spmk").read_bytes() == (tmp_path / "w8.spmk").read_bytes()


def test_gram_config_mismatch(tmp_path, images):
    main(["extract", images[0], "--descriptor", "lbp", "--out", str(tmp_path / "a")])
    main(["extract", images[1], "--descriptor", "lbp", "--levels", "1",
          "--out", str(tmp_path / "b")])
    code = main(["gram", str(tmp_path / "a" / "manifest.json"), "--descriptor", "lbp",
                 "--test-manifest", str(tmp_path / "b" / "manifest.json"),
                 "--out", str(tmp_path / "k.spmk")])
    assert code == 2


def test_train_eval_roundtrip(tmp_path, texture_dataset):
    ext = tmp_path / "x"
    assert main(["extract", "--dataset", str(texture_dataset), "--out", str(ext)]) == 0
    manifest = json.loads((ext / "manifest.json").read_text())
    assert manifest["classes"] == ["checker", "noise"]
    # split the manifest in two halves per class
    train_m = dict(manifest, entries=[e for i, e in enumerate(manifest["entries"]) if i % 2 == 0])
    test_m = dict(manifest, entries=[e for i, e in enumerate(manifest["entries"]) if i % 2 == 1])
    (ext / "train.json").write_text(json.dumps(train_m))
    (ext / "test.json").write_text(json.dumps(test_m))
    assert main(["gram", str(ext / "train.json"), "--out", str(tmp_path / "tr.spmk")]) == 0
    assert main(["gram", str(ext / "train.json"), "--test-manifest", str(ext / "test.json"),
                 "--out", str(tmp_path / "te.spmk")]) == 0
    assert main(["train", str(tmp_path / "tr.spmk"), "--svm.c", "10",
                 "--out", str(tmp_path / "m.spmm")]) == 0
    assert main(["eval", str(tmp_path / "m.spmm"), str(tmp_path / "te.spmk"),
                 "--out", str(tmp_path / "r.json")]) == 0
    result = json.loads((tmp_path / "r.json").read_text())
    assert result["accuracy"] >= 95.0
    assert len(result["predictions"]) == 40


def test_experiment_outputs(tmp_path, texture_dataset):
    out = tmp_path / "exp"
    code = main(["experiment", "--dataset", str(texture_dataset), "--train-per-class", "20",
                 "--repetitions", "2", "--seed", "4", "--out", str(out)])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["repetitions"] == 2
    assert " ± " in report["summary"]
    assert report["config"]["split.seed"] == 4 and report["config"]["dataset"]
    for name in ("report.csv", "dataset.json", "confusion.png", "accuracies.png"):
        assert (out / name).stat().st_size > 0


def test_config_file_and_override(tmp_path, texture_dataset):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"descriptor": "lbp", "split.train_per_class": 20,
                               "repetitions": 1, "lambda": 0.5, "pyramid.L": 1}))
    out = tmp_path / "exp"
    assert main(["experiment", "--config", str(cfg), "--dataset", str(texture_dataset),
                 "--levels", "2", "--no-figures", "--out", str(out)]) == 0
    echo = json.loads((out / "report.json").read_text())["config"]
    assert echo["descriptor"] == "lbp" and echo["pyramid.L"] == 2
    assert echo["combine.lam"] == 0.5 and echo["split.repetitions"] == 1
    assert not (out / "confusion.png").exists()


def test_bad_config_key(tmp_path, texture_dataset):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"pyramid.levels": 1}))
    assert main(["experiment", "--config", str(cfg), "--dataset", str(texture_dataset)]) == 2


def test_bench(tmp_path, texture_dataset, capsys):
    out = tmp_path / "bench"
    assert main(["bench", "--dataset", str(texture_dataset), "--limit", "12",
                 "--out", str(out)]) == 0
    rows = list(csv.reader(open(out / "bench.csv")))
    assert [r[0] for r in rows[1:4]] == ["lbp", "tplbp", "combined"]
    assert all(float(r[1]) > 0 for r in rows[1:4])
    assert (out / "timings.png").exists()
    assert "ms/image" in capsys.readouterr().out


def test_bench_needs_images(tmp_path, images):
    assert main(["bench", *images, "--out", str(tmp_path / "b")]) == 2


def test_missing_dataset(tmp_path):
    assert main(["experiment", "--dataset", str(tmp_path / "nothing")]) == 2


@pytest.fixture(scope="module")
def bench_set():
    rng = np.random.default_rng(11)
    return [rng.integers(0, 256, (250, 300), dtype=np.uint8) for _ in range(14)]


def test_bench_repeat_is_stable(bench_set):
    from comspm.cli import bench_images
    from comspm.pipeline import PipelineConfig
    first = bench_images(bench_set, PipelineConfig(), ("tplbp",))["tplbp"]
    second = bench_images(bench_set, PipelineConfig(), ("tplbp",))["tplbp"]
    assert second < 2 * first and first < 2 * second


def test_bench_combined_is_sum_of_parts(bench_set):
    from comspm.cli import bench_images
    from comspm.pipeline import PipelineConfig
    rows = bench_images(bench_set, PipelineConfig())
    parts = rows["lbp"] + rows["tplbp"]
    assert abs(rows["combined"] - parts) <= 0.25 * parts
