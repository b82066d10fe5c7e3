"""Command-line interface: ``comspm <command> [options]``.

Commands: ``extract``, ``gram``, ``train``, ``eval``, ``experiment``, ``bench``.
Configuration comes from defaults, then an optional JSON file of flat dotted
keys (``--config``), then command-line flags.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, formats, imageio
from .classifier import confusion_matrix, decide, train
from .imageio import load_gray, scan_dataset
from .kernels import CombineConfig, combine_grams, gram
from .pipeline import REFERENCE_VALUES, PipelineConfig, evaluate, represent

logger = logging.getLogger("comspm")

# CLI spelling -> configuration key
ALIASES = {
    "lambda": "combine.lam",
    "levels": "pyramid.L",
    "channels": "pyramid.M",
    "normalize": "pyramid.normalize",
    "train_per_class": "split.train_per_class",
    "train-per-class": "split.train_per_class",
    "repetitions": "split.repetitions",
    "seed": "split.seed",
    "svm.c": "svm.C",
}
RUN_KEYS = ("dataset", "out")


class CliError(Exception):
    pass


def _bool(text: str) -> bool:
    low = str(text).lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _config_options(p: argparse.ArgumentParser):
    g = p.add_argument_group("configuration")
    g.add_argument("--config", help="JSON file of flat dotted configuration keys")
    g.add_argument("--dataset", help="dataset root laid out as <root>/<class>/<image>")
    g.add_argument("--descriptor", choices=("lbp", "tplbp", "combined"))
    g.add_argument("--lambda", "--combine.lam", dest="combine.lam", type=float,
                   help="weight of the LBP kernel in the combined kernel (default 0.3)")
    g.add_argument("--levels", "--pyramid.L", dest="pyramid.L", type=int,
                   help="finest pyramid level L (default 2)")
    g.add_argument("--channels", "--pyramid.M", dest="pyramid.M", type=int,
                   help="histogram channels M (default 256)")
    g.add_argument("--pyramid.normalize", dest="pyramid.normalize", type=_bool)
    g.add_argument("--tplbp.S", dest="tplbp.S", type=int)
    g.add_argument("--tplbp.w", dest="tplbp.w", type=int)
    g.add_argument("--tplbp.alpha", dest="tplbp.alpha", type=int)
    g.add_argument("--tplbp.r", dest="tplbp.r", type=int)
    g.add_argument("--tplbp.tau", dest="tplbp.tau", type=float)
    g.add_argument("--train-per-class", "--split.train_per_class",
                   dest="split.train_per_class", type=int)
    g.add_argument("--repetitions", "--split.repetitions", dest="split.repetitions", type=int)
    g.add_argument("--seed", "--split.seed", dest="split.seed", type=int)
    g.add_argument("--svm.c", "--svm.C", dest="svm.C", type=float)
    g.add_argument("--svm.tol", dest="svm.tol", type=float)
    g.add_argument("--svm.max_iter", dest="svm.max_iter", type=int)
    g.add_argument("--workers", type=int)
    g.add_argument("--out", help="output file or directory")


def resolve(args) -> tuple[PipelineConfig, dict]:
    """Merge defaults, config file and flags into ``(config, run options)``."""
    flat: dict = {}
    run = {"dataset": None, "out": None}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            data = json.load(fh)
        for key, value in data.items():
            key = ALIASES.get(key, ALIASES.get(key.lower(), key))
            if key in RUN_KEYS:
                run[key] = value
            else:
                flat[key] = value
    for key, value in vars(args).items():
        if value is None or key in ("command", "func", "config", "verbose"):
            continue
        if key in RUN_KEYS:
            run[key] = value
        elif "." in key or key in ("descriptor", "workers"):
            flat[key] = value
    try:
        cfg = PipelineConfig.from_flat(flat)
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"invalid configuration: {exc}") from None
    return cfg, run


def echo(cfg: PipelineConfig, run: dict) -> dict:
    return {"version": __version__, **cfg.to_flat(), **run,
            "prng": f"{imageio.PRNG_NAME} v{imageio.PRNG_VERSION}"}


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n")


def _require(value, what):
    if value is None:
        raise CliError(f"{what} is required")
    return value


# --- extract ------------------------------------------------------------------

def cmd_extract(args) -> int:
    cfg, run = resolve(args)
    out = Path(_require(run["out"], "--out directory"))
    out.mkdir(parents=True, exist_ok=True)

    classes = None
    if args.images:
        items = [(p, None) for p in args.images]
    else:
        index = scan_dataset(_require(run["dataset"], "--dataset or image paths"))
        classes = list(index.classes)
        items = list(index.samples)

    entries, failures = [], []
    for i, (path, label) in enumerate(items):
        try:
            img = load_gray(path)
            reps = represent(img, cfg)
        except (OSError, ValueError) as exc:
            logger.error("%s: %s", path, exc)
            failures.append({"image": str(path), "error": str(exc)})
            continue
        files = {}
        for name, pyr in reps.items():
            fname = f"{i:05d}_{Path(path).stem}.{name}.spmh"
            formats.write_pyramid(out / fname, pyr)
            files[name] = fname
        entries.append({"image": str(path), "label": label, "pyramids": files})

    _write_json(out / "manifest.json", {
        "config": echo(cfg, run), "classes": classes,
        "entries": entries, "failures": failures})
    logger.info("extracted %d of %d images into %s", len(entries), len(items), out)
    return 1 if failures else 0


# --- gram ---------------------------------------------------------------------

def _load_manifest(path):
    path = Path(path)
    data = json.loads(path.read_text())
    return data, path.parent


def _manifest_pyramids(data, base, name):
    pyrs, labels = [], []
    for e in data["entries"]:
        if name not in e["pyramids"]:
            raise CliError(f"manifest lacks {name} pyramids for {e['image']}")
        pyrs.append(formats.read_pyramid(base / e["pyramids"][name]))
        labels.append(-1 if e.get("label") is None else e["label"])
    if pyrs and any(p.config != pyrs[0].config for p in pyrs):
        raise CliError(f"{name} pyramids in the manifest use different configurations")
    return pyrs, np.array(labels, dtype=np.int64)


def cmd_gram(args) -> int:
    cfg, run = resolve(args)
    out = Path(_require(run["out"], "--out file"))
    train_m, train_base = _load_manifest(args.manifest)
    test = _load_manifest(args.test_manifest) if args.test_manifest else None

    grams = {}
    for name in cfg.descriptor_names:
        a, la = _manifest_pyramids(train_m, train_base, name)
        if not a:
            raise CliError("manifest has no entries")
        if test is None:
            grams[name] = gram(a, workers=cfg.workers, tag=name, labels_a=la)
        else:
            b, lb = _manifest_pyramids(test[0], test[1], name)
            if b and b[0].config != a[0].config:
                raise CliError("pyramid configurations differ between manifests")
            # rows are test samples, columns training samples
            grams[name] = gram(b, a, workers=cfg.workers, tag=name, labels_a=lb, labels_b=la)
    if cfg.descriptor == "combined":
        K = combine_grams(grams["lbp"], grams["tplbp"], cfg.combine)
    else:
        K = grams[cfg.descriptor]

    formats.write_gram(out, K)
    if args.csv:
        Path(args.csv).write_text(formats.gram_to_csv(K))
    symmetric = K.is_symmetric() if K.is_square else None
    stats = {"shape": list(K.shape), "min": float(K.values.min()),
             "max": float(K.values.max()), "symmetric": symmetric}
    logger.info("gram %s: min %.6g max %.6g symmetric %s", K.shape, stats["min"],
                stats["max"], symmetric)
    _write_json(str(out) + ".json", {"config": echo(cfg, run), "stats": stats,
                                     "manifest": str(args.manifest),
                                     "test_manifest": args.test_manifest})
    return 0


# --- train / eval -------------------------------------------------------------

def cmd_train(args) -> int:
    cfg, run = resolve(args)
    out = Path(_require(run["out"], "--out file"))
    K = formats.read_gram(args.gram)
    if K.row_labels is None or np.any(K.row_labels < 0):
        raise CliError("training Gram needs a label for every sample")
    model = train(K, cfg.svm)
    formats.write_model(out, model)
    _write_json(str(out) + ".json", {
        "config": echo(cfg, run), "gram": str(args.gram),
        "support_vectors": {int(c): int(len(s)) for c, s in zip(model.classes, model.support)}})
    logger.info("trained %d one-vs-rest machines on %d samples", len(model.classes), model.n_train)
    return 0


def cmd_eval(args) -> int:
    cfg, run = resolve(args)
    model = formats.read_model(args.model)
    K = formats.read_gram(args.test_gram)
    pred = decide(model, K)
    result = {"config": echo(cfg, run), "predictions": pred.tolist()}
    if K.row_labels is not None and np.all(K.row_labels >= 0):
        n_classes = int(max(model.classes.max(), K.row_labels.max())) + 1
        conf = confusion_matrix(K.row_labels, pred, n_classes)
        present = np.isin(np.arange(n_classes), K.row_labels)
        result["accuracy"] = float(np.mean(np.diag(conf)[present]))
        result["overall_accuracy"] = float(100.0 * np.mean(pred == K.row_labels))
        result["confusion_matrix"] = conf.tolist()
        print(f"accuracy {result['accuracy']:.2f}% "
              f"(overall {result['overall_accuracy']:.2f}%)")
    if run["out"]:
        _write_json(run["out"], result)
    return 0


# --- experiment ---------------------------------------------------------------

def cmd_experiment(args) -> int:
    cfg, run = resolve(args)
    index = scan_dataset(_require(run["dataset"], "--dataset"))
    out = Path(run["out"] or "experiment_out")
    out.mkdir(parents=True, exist_ok=True)
    report = evaluate(index, cfg.split, cfg)

    data = report.to_dict()
    data["config"] = echo(cfg, run)
    (out / "report.json").write_text(json.dumps(data, indent=2, ensure_ascii=False) + "\n")
    (out / "report.csv").write_text(report.to_csv())
    (out / "dataset.json").write_text(index.to_json() + "\n")
    if not args.no_figures:
        from . import plotting
        plotting.plot_confusion(report.confusion, report.classes, out / "confusion.png")
        plotting.plot_accuracies(report.accuracies, out / "accuracies.png")
    print(f"{cfg.descriptor}: {report.summary} over {len(report.accuracies)} repetitions")
    return 0


# --- bench --------------------------------------------------------------------

BENCH_WARMUP = 2


def bench_images(images, cfg: PipelineConfig, descriptors=("lbp", "tplbp", "combined")):
    """Mean seconds per image of descriptor + pyramid, warm-up images excluded."""
    if len(images) < BENCH_WARMUP + 8:
        raise CliError(f"bench needs at least {BENCH_WARMUP + 8} images, got {len(images)}")
    configs = {name: replace(cfg, descriptor=name) for name in descriptors}
    times = {name: [] for name in descriptors}
    # interleaved per image so clock drift and cache state hit every descriptor alike
    for img in images:
        for name, single in configs.items():
            t0 = time.perf_counter()
            represent(img, single)
            times[name].append(time.perf_counter() - t0)
    return {name: float(np.mean(t[BENCH_WARMUP:])) for name, t in times.items()}


def cmd_bench(args) -> int:
    cfg, run = resolve(args)
    if args.images:
        paths = list(args.images)
    else:
        paths = scan_dataset(_require(run["dataset"], "--dataset or image paths")).paths
    if args.limit:
        paths = paths[:args.limit]
    if not paths:
        raise CliError("no images to benchmark")
    images = [load_gray(p) for p in paths]
    descriptors = tuple(args.descriptors.split(","))
    rows = bench_images(images, cfg, descriptors)

    out = Path(run["out"] or "bench_out")
    out.mkdir(parents=True, exist_ok=True)
    reference = {"lbp": REFERENCE_VALUES["scene15"]["LBPSPM"]["seconds_per_image"],
                 "tplbp": REFERENCE_VALUES["scene15"]["TPLBPSPM"]["seconds_per_image"],
                 "combined": REFERENCE_VALUES["scene15"]["ComSPM"]["seconds_per_image"]}
    with open(out / "bench.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["descriptor", "seconds_per_image", "images_timed", "published_seconds"])
        for name, secs in rows.items():
            w.writerow([name, f"{secs:.6f}", len(images) - BENCH_WARMUP, reference.get(name, "")])
        w.writerow(["# SIFTSPM (published, not measured)", "",
                    "", REFERENCE_VALUES["scene15"]["SIFTSPM"]["seconds_per_image"]])
    _write_json(out / "bench.json", {"config": echo(cfg, run), "images": len(images),
                                     "warmup": BENCH_WARMUP, "seconds_per_image": rows})
    if not args.no_figures:
        from . import plotting
        plotting.plot_timings(rows, out / "timings.png", reference)
    for name, secs in rows.items():
        print(f"{name:9s} {secs * 1e3:9.3f} ms/image")
    return 0


# --- entry point --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="comspm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("-v", "--verbose", action="count", default=0)
        _config_options(p)
        p.set_defaults(func=func)
        return p

    p = command("extract", cmd_extract, "write SPMH pyramid files and a manifest")
    p.add_argument("images", nargs="*")

    p = command("gram", cmd_gram, "assemble an SPMK kernel matrix from manifests")
    p.add_argument("manifest")
    p.add_argument("--test-manifest", help="rows of a rectangular test x train kernel")
    p.add_argument("--csv", help="also write the matrix as CSV")

    p = command("train", cmd_train, "train a one-vs-rest SVM on an SPMK Gram")
    p.add_argument("gram")

    p = command("eval", cmd_eval, "classify with an SPMM model and a test SPMK kernel")
    p.add_argument("model")
    p.add_argument("test_gram")

    p = command("experiment", cmd_experiment, "repeated random-split evaluation")
    p.add_argument("--no-figures", action="store_true")

    p = command("bench", cmd_bench, "per-image representation timing")
    p.add_argument("images", nargs="*")
    p.add_argument("--descriptors", default="lbp,tplbp,combined")
    p.add_argument("--limit", type=int, help="time only the first N images")
    p.add_argument("--no-figures", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, imageio.DatasetError, formats.FormatError,
            imageio.ImageFormatError, imageio.ImageDecodeError, OSError) as exc:
        print(f"comspm {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
