"""Command-line front end.

Every run writes its effective ``config.json`` into ``--out`` so the run can
be replayed with ``--config <out>/config.json``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import itertools
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from PIL import Image

from .config import RunConfig, SynthSpec
from .errors import (
    ArchiveError,
    DatasetError,
    InvalidConfigurationError,
    InvalidInputError,
    InvalidParameterError,
    NumericalFailureError,
)
from .data_io import (
    LabeledDataset,
    build_manifest,
    decode_image,
    dump_synthetic,
    load_model,
    occlude,
    plant_sparse_corruption,
    save_model,
    split_indices,
    stratified_folds,
    synth_multimodal,
)
from .trainer import code_samples, predict, train
from .transforms import RawPixels, get_transform, unstack_vector

log = logging.getLogger("mmsldl")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def n_threads():
    raw = os.environ.get("MMSLDL_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise InvalidConfigurationError(f"MMSLDL_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise InvalidConfigurationError("MMSLDL_THREADS must be >= 1")
    return n


def pool_map(fn, items):
    items = list(items)
    workers = min(n_threads(), max(len(items), 1))
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def derived_seed(*parts):
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


# ---------------------------------------------------------------- data


class DataSource:
    """Resolves the configured dataset (image tree or synthetic) into splits."""

    def __init__(self, cfg):
        self.cfg = cfg
        if cfg.dataset:
            m = cfg.modality
            self.manifest = build_manifest(cfg.dataset, (m.height, m.width))
            self.images = load_dataset_parallel(self.manifest)
            self.class_names = self.manifest.class_names
            self.labels = np.concatenate(
                [np.full(len(v), c, dtype=int) for c, v in enumerate(self.images.values())]
            )
            self.flat_images = [img for v in self.images.values() for img in v]
            self.transforms = [RawPixels(), get_transform(m.second)]
            self.patches = _load_patches(cfg.occlusion, m) if cfg.occlusion.fraction > 0 else []
            self.geometry = (m.height, m.width)
        elif cfg.synthetic is not None:
            s = cfg.synthetic
            self.synth = synth_multimodal(s.classes, s.per_class, s.dim, s.rank, s.corruption, s.seed,
                                          cross_modal_overlap=s.cross_modal_overlap)
            self.labels = self.synth.labels
            self.class_names = [str(c) for c in range(s.classes)]
            side = int(round(np.sqrt(s.dim)))
            self.geometry = (side, s.dim // side) if side * (s.dim // side) == s.dim else None
        else:
            raise InvalidConfigurationError("set either a dataset directory or a synthetic spec")

    def _views(self, idx, occluded, seed):
        if not self.cfg.dataset:
            return [self.synth.X1[:, idx], self.synth.X2[:, idx]]
        imgs = [self.flat_images[i] for i in idx]
        if occluded and self.patches:
            frac = self.cfg.occlusion.fraction
            imgs = [
                occlude(img, frac, derived_seed(seed, i), self.patches[derived_seed(seed, i, 1) % len(self.patches)])
                for img, i in zip(imgs, idx)
            ]
        cols = pool_map(lambda img: [t(img) for t in self.transforms], imgs)
        return [np.column_stack([c[k] for c in cols]) for k in range(len(self.transforms))]

    def full(self):
        idx = np.arange(self.labels.size)
        return LabeledDataset(self._views(idx, False, 0), self.labels, self.class_names)

    def split(self, seed):
        tr, ts = split_indices(self.labels, self.cfg.split.train_per_class, seed)
        occ = self.cfg.occlusion
        train_views = self._views(tr, occ.apply_to in ("train", "both"), seed)
        test_views = self._views(ts, occ.apply_to in ("test", "both"), derived_seed(seed, 7))
        if self.cfg.train_corruption > 0:
            rng = np.random.default_rng(derived_seed(seed, 11))
            train_views = [plant_sparse_corruption(X, self.cfg.train_corruption, rng)[0] for X in train_views]
        return (LabeledDataset(train_views, self.labels[tr], self.class_names),
                LabeledDataset(test_views, self.labels[ts], self.class_names))


def load_dataset_parallel(manifest):
    geometry = manifest.geometry
    out = {}
    for name, files in manifest.classes.items():
        out[name] = pool_map(lambda f: decode_image(f, geometry), files)
    return out


def _load_patches(occ, modality):
    if occ.patch_dir is None:
        raise InvalidConfigurationError("occlusion.fraction > 0 needs occlusion.patch_dir")
    root = Path(occ.patch_dir)
    if not root.is_dir():
        raise DatasetError(f"occlusion patch directory not found: {root}")
    files = sorted(p for p in root.iterdir() if p.suffix.lower() in {".png", ".jpg", ".jpeg", ".pgm", ".ppm"})
    if not files:
        raise DatasetError(f"no patch images in {root}")
    return [decode_image(f) for f in files]


# ---------------------------------------------------------------- outputs


def _prepare_out(cfg):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg.dump(out / "config.json")
    return out


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def save_png(plane, path):
    arr = (np.clip(plane, 0.0, 1.0) * 255.0).round().astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)


def metrics_for(pred_labels, true_labels, C, agreement):
    conf = np.zeros((C, C), dtype=int)
    np.add.at(conf, (true_labels, pred_labels), 1)
    per_class = conf.diagonal() / np.maximum(conf.sum(axis=1), 1)
    return {
        "recognition_rate": round(100.0 * float(np.mean(pred_labels == true_labels)), 2),
        "per_class_accuracy": [round(100.0 * float(a), 2) for a in per_class],
        "confusion": conf.tolist(),
        "agreement_rate": float(agreement),
        "n_test": int(true_labels.size),
    }


def write_metrics(out, rows):
    """``metrics.txt`` (table) and ``metrics.jsonl`` (records); one row per repeat plus a mean row."""
    mean = {
        "repeat": "mean",
        "recognition_rate": round(float(np.mean([r["recognition_rate"] for r in rows])), 2),
        "agreement_rate": float(np.mean([r["agreement_rate"] for r in rows])),
        "per_class_accuracy": np.round(np.mean([r["per_class_accuracy"] for r in rows], axis=0), 2).tolist(),
        "confusion": np.sum([r["confusion"] for r in rows], axis=0).tolist(),
        "n_test": int(sum(r["n_test"] for r in rows)),
    }
    allrows = rows + [mean]
    lines = [f"{'repeat':>8} {'seed':>12} {'rate(%)':>8} {'agreement':>10} {'n_test':>7}"]
    for r in allrows:
        lines.append(f"{r['repeat']!s:>8} {r.get('seed', '-')!s:>12} {r['recognition_rate']:>8.2f} "
                     f"{r['agreement_rate']:>10.4f} {r['n_test']:>7d}")
    (out / "metrics.txt").write_text("\n".join(lines) + "\n")
    with open(out / "metrics.jsonl", "w") as fh:
        for r in allrows:
            fh.write(json.dumps(r, sort_keys=True, default=_jsonable) + "\n")
    return mean


# ---------------------------------------------------------------- commands


def run_synth(cfg):
    if cfg.synthetic is None:
        cfg.synthetic = SynthSpec()
    out = _prepare_out(cfg)
    s = cfg.synthetic
    data = synth_multimodal(s.classes, s.per_class, s.dim, s.rank, s.corruption, s.seed,
                            cross_modal_overlap=s.cross_modal_overlap)
    dump_synthetic(data, out / "synthetic", vars(s))
    log.info("wrote synthetic dataset to %s", out / "synthetic")
    return out


def run_train(cfg):
    src = DataSource(cfg)
    out = _prepare_out(cfg)
    train_set, _ = src.split(cfg.split.seed)
    model = train(*train_set.views, train_set.labels, cfg.hyperparams, src.class_names, log.info)
    run_info = {"split_seed": cfg.split.seed, "train_per_class": cfg.split.train_per_class}
    save_model(model, out / "model", extra={"run": run_info})
    diag = model.diagnostics
    _write_json(out / "report.json", {
        "all_coding_converged": diag["all_coding_converged"],
        "runtime_dictionary_s": diag["runtime_dictionary_s"],
        "runtime_total_s": diag["runtime_total_s"],
        "alternations": 1 + max(t["alternation"] for t in diag["traces"]),
        "traces": diag["traces"],
    })
    log.info("model written to %s", out / "model")
    return model


def run_eval(cfg, model_path=None):
    """Mean recognition rate over ``split.repeats`` seeded splits.

    Without ``model_path`` each repeat trains a fresh model on its own split.
    With a saved model only that model's own held-out split is scored, so
    the run has a single repeat.
    """
    src = DataSource(cfg)
    C = len(src.class_names)
    if model_path is not None:
        model = load_model(model_path)
        from .data_io.model_store import model_manifest
        run = model_manifest(model_path).get("run", {})
        cfg.split.seed = int(run.get("split_seed", cfg.split.seed))
        cfg.split.train_per_class = int(run.get("train_per_class", cfg.split.train_per_class))
        cfg.split.repeats = 1
    out = _prepare_out(cfg)

    def one(r):
        seed = cfg.split.seed + r
        tr, ts = src.split(seed)
        m = model if model_path is not None else train(*tr.views, tr.labels, cfg.hyperparams, src.class_names)
        pred = predict(m, *ts.views)
        row = metrics_for(pred.labels, ts.labels, C, pred.agreement_rate)
        row.update(repeat=r, seed=seed)
        log.info("repeat %d: %.2f%%", r, row["recognition_rate"])
        return row

    rows = pool_map(one, range(cfg.split.repeats))
    mean = write_metrics(out, rows)
    log.info("mean recognition rate %.2f%%", mean["recognition_rate"])
    return mean


def _display_plane(v, geometry):
    d = v.size
    if geometry is not None and geometry[0] * geometry[1] == d:
        return unstack_vector(v, *geometry)
    side = int(np.ceil(np.sqrt(d)))
    padded = np.zeros(side * side)
    padded[:d] = v
    return unstack_vector(padded, side, side)


def run_decompose(cfg, model_path, samples):
    """Write original, ``D Z`` and ``|E|`` planes per modality for each sample id."""
    model = load_model(model_path)
    src = DataSource(cfg)
    out = _prepare_out(cfg)
    data = src.full()
    n = data.labels.size
    bad = [s for s in samples if not 0 <= s < n]
    if bad:
        raise DatasetError(f"sample ids {bad} outside 0..{n - 1}")
    written, energy = [], []
    for K, X in enumerate(data.views):
        D = model.dictionaries[K]
        if X.shape[0] != D.atoms.shape[0]:
            raise DatasetError(f"modality {K + 1} has dimension {X.shape[0]}, model expects {D.atoms.shape[0]}")
        Xs = X[:, samples]
        Z, E = code_samples(Xs, D, model.hyperparams)
        R = D.atoms @ Z
        for j, s in enumerate(samples):
            # one shared scale per sample keeps the three planes comparable
            scale = np.max(np.abs(Xs[:, j]))
            scale = scale if scale > 0 else 1.0
            x2 = float(Xs[:, j] @ Xs[:, j])
            energy.append({"sample": s, "modality": K + 1,
                           "error_energy_fraction": float(E[:, j] @ E[:, j]) / x2 if x2 > 0 else 0.0})
            for tag, v in (("original", Xs[:, j]), ("lowrank", R[:, j]), ("error", E[:, j])):
                path = out / f"sample{s}_mod{K + 1}_{tag}.png"
                save_png(_display_plane(np.abs(v) / scale, src.geometry), path)
                written.append(path)
    _write_json(out / "decompose.json", energy)
    return written


def run_transform(cfg, inputs, name):
    out = _prepare_out(cfg)
    t = get_transform(name)
    geometry = (cfg.modality.height, cfg.modality.width)
    written = []
    for p in inputs:
        p = Path(p)
        files = sorted(p.iterdir()) if p.is_dir() else [p]
        for f in files:
            plane = t.plane(decode_image(f, geometry))
            dest = out / f"{f.stem}_{t.name}.png"
            save_png(plane.pixels, dest)
            written.append(dest)
    return written


def grid_points(grid):
    if not (grid.alpha and grid.beta and grid.lam):
        raise InvalidConfigurationError("grid ranges must be non-empty")
    # sorted so that the first best point is the one with smallest alpha, then beta, then lam
    return sorted(itertools.product(sorted(grid.alpha), sorted(grid.beta), sorted(grid.lam)))


def run_gridsearch(cfg):
    src = DataSource(cfg)
    out = _prepare_out(cfg)
    train_set, _ = src.split(cfg.split.seed)
    folds = stratified_folds(train_set.labels, cfg.grid.folds, cfg.split.seed)
    points = grid_points(cfg.grid)

    def one(job):
        (a, b, l), f = job
        tr_idx, va_idx = folds[f]
        row = {"alpha": a, "beta": b, "lam": l, "fold": f}
        try:
            h = cfg.hyperparams.replace(alpha=a, beta=b, lam=l)
            tr, va = train_set.subset(tr_idx), train_set.subset(va_idx)
            m = train(*tr.views, tr.labels, h, src.class_names)
            row["accuracy"] = round(100.0 * float(np.mean(predict(m, *va.views).labels == va.labels)), 2)
            row["status"] = "ok"
        except (NumericalFailureError, InvalidInputError, InvalidParameterError, InvalidConfigurationError) as exc:
            row["accuracy"] = None
            row["status"] = f"failed: {exc}"
        return row

    rows = pool_map(one, [(p, f) for p in points for f in range(len(folds))])
    means = []
    for p in points:
        accs = [r["accuracy"] for r in rows if (r["alpha"], r["beta"], r["lam"]) == p]
        ok = all(a is not None for a in accs)
        means.append(float(np.mean(accs)) if ok else -np.inf)
    best_i = int(np.argmax(means))
    if not np.isfinite(means[best_i]):
        raise NumericalFailureError("every grid point failed", {"rows": rows})
    a, b, l = points[best_i]
    best = cfg.hyperparams.replace(alpha=a, beta=b, lam=l)
    lines = [f"{'alpha':>8} {'beta':>8} {'lam':>8} {'fold':>5} {'acc(%)':>8}  status"]
    for r in rows:
        acc = f"{r['accuracy']:.2f}" if r["accuracy"] is not None else "nan"
        lines.append(f"{r['alpha']:>8g} {r['beta']:>8g} {r['lam']:>8g} {r['fold']:>5d} {acc:>8}  {r['status']}")
    (out / "grid_scores.txt").write_text("\n".join(lines) + "\n")
    with open(out / "grid_scores.jsonl", "w") as fh:
        for r in rows:
            fh.write(json.dumps(r, sort_keys=True) + "\n")
    _write_json(out / "best_hyperparams.json", {"hyperparams": best.to_dict(), "mean_accuracy": means[best_i]})
    log.info("best alpha=%g beta=%g lam=%g (%.2f%%)", a, b, l, means[best_i])
    return best, rows


# ---------------------------------------------------------------- argument parsing

OVERRIDES = {
    # flag: (section, field, type)
    "alpha": ("hyperparams", "alpha", float),
    "beta": ("hyperparams", "beta", float),
    "lam": ("hyperparams", "lam", float),
    "gamma": ("hyperparams", "gamma", float),
    "lambda-ridge": ("hyperparams", "lambda_ridge", float),
    "max-outer": ("hyperparams", "max_outer_alternations", int),
    "max-inner": ("hyperparams", "max_inner_iters", int),
    "train-per-class": ("split", "train_per_class", int),
    "repeats": ("split", "repeats", int),
    "height": ("modality", "height", int),
    "width": ("modality", "width", int),
    "second-modality": ("modality", "second", str),
    "occlusion": ("occlusion", "fraction", float),
    "patch-dir": ("occlusion", "patch_dir", str),
    "occlude": ("occlusion", "apply_to", str),
    "classes": ("synthetic", "classes", int),
    "per-class": ("synthetic", "per_class", int),
    "dim": ("synthetic", "dim", int),
    "rank": ("synthetic", "rank", int),
    "corruption": ("synthetic", "corruption", float),
    "overlap": ("synthetic", "cross_modal_overlap", float),
    "train-corruption": (None, "train_corruption", float),
    "folds": ("grid", "folds", int),
}
GRID_LISTS = ("alpha", "beta", "lam")


def build_parser():
    p = argparse.ArgumentParser(prog="mmsldl", description="Multimodal structured low-rank dictionary learning")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("train", "eval", "decompose", "transform", "synth", "gridsearch"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON run config")
        sp.add_argument("--seed", type=int, help="seed for splits and synthetic data")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--dataset", help="image tree root/<class>/*.png")
        sp.add_argument("--synthetic", action="store_true", help="use the synthetic generator as data source")
        sp.add_argument("--model", help="model archive directory")
        sp.add_argument("-v", "--verbose", action="store_true")
        for flag, (_, _, typ) in OVERRIDES.items():
            sp.add_argument(f"--{flag}", type=typ)
        if name == "gridsearch":
            for g in GRID_LISTS:
                sp.add_argument(f"--grid-{g}", type=lambda s: [float(x) for x in s.split(",")],
                                help="comma separated values")
        if name == "decompose":
            sp.add_argument("--samples", default="0", help="comma separated sample ids")
        if name == "transform":
            sp.add_argument("--input", nargs="+", required=True, help="image files or directories")
            sp.add_argument("--transform", default="illumination_invariant")
    return p


def config_from_args(args):
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    cfg.command = args.command
    if args.out:
        cfg.out = args.out
    if args.dataset:
        cfg.dataset = args.dataset
    if args.synthetic and cfg.synthetic is None:
        cfg.synthetic = SynthSpec()
    if cfg.dataset is None and cfg.synthetic is None and args.command != "transform":
        cfg.synthetic = SynthSpec()
    h = cfg.hyperparams.to_dict()
    for flag, (section, field_name, _) in OVERRIDES.items():
        val = getattr(args, flag.replace("-", "_"))
        if val is None:
            continue
        if section == "hyperparams":
            h[field_name] = val
        elif section is None:
            setattr(cfg, field_name, val)
        else:
            if section == "synthetic" and cfg.synthetic is None:
                cfg.synthetic = SynthSpec()
            setattr(getattr(cfg, section), field_name, val)
    cfg.hyperparams = type(cfg.hyperparams).from_dict(h)
    if args.seed is not None:
        cfg.split.seed = args.seed
        if cfg.synthetic is not None:
            cfg.synthetic.seed = args.seed
    for g in GRID_LISTS:
        val = getattr(args, f"grid_{g}", None)
        if val is not None:
            setattr(cfg.grid, g, val)
    if cfg.occlusion.apply_to not in ("train", "test", "both"):
        raise InvalidConfigurationError("occlusion.apply_to must be train, test or both")
    return cfg


def dispatch(args):
    cfg = config_from_args(args)
    if args.command == "synth":
        run_synth(cfg)
    elif args.command == "train":
        run_train(cfg)
    elif args.command == "eval":
        run_eval(cfg, args.model)
    elif args.command == "gridsearch":
        run_gridsearch(cfg)
    elif args.command == "decompose":
        if not args.model:
            raise InvalidConfigurationError("decompose needs --model")
        try:
            samples = [int(s) for s in args.samples.split(",") if s.strip()]
        except ValueError:
            raise InvalidConfigurationError(f"--samples must be integers, got {args.samples!r}") from None
        run_decompose(cfg, args.model, samples)
    elif args.command == "transform":
        run_transform(cfg, args.input, args.transform)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    t0 = time.perf_counter()
    try:
        dispatch(args)
    except (InvalidConfigurationError, InvalidParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DatasetError, ArchiveError, InvalidInputError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalFailureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    log.info("done in %.1fs", time.perf_counter() - t0)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
