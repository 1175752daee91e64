"""Command-line front end: ``python -m breastpd <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import calibrate_cutoff, read_gold_csv, reference_labels
from .ensemble import FORMAT_VERSION, classify_and_pd, load_ensemble, read_pd_csv, save_ensemble, write_pd_csv
from .exceptions import BreastPDError
from .features import BANK_VERSION, FeatureMatrix, read_feature_csv, write_feature_csv
from .imaging import load_image, preprocess, standardize_orientation, to_uint16, write_raster
from .phantom import PhantomSpec, generate_corpus
from .pipeline import (
    PipelineConfig,
    file_sha256,
    list_images,
    mirror_preprocessed,
    oriented_mask,
    predict_result,
    process_image,
    read_config,
    run_batch,
    train_from_results,
    write_overlay,
)
from .segmentation import write_mask
from .stats import evaluate_measures, read_case_control_csv, spearman, write_report_csv

logger = logging.getLogger("breastpd")

SUBCOMMANDS = ("phantom", "preprocess", "segment", "superpixel", "features", "calibrate", "train", "predict",
               "evaluate", "pipeline")

# flag name -> config key
_CONFIG_FLAGS = {
    "input_dir": "input_dir", "mask_dir": "mask_dir", "output_dir": "output_dir", "model": "model",
    "gold_csv": "gold_csv", "k": "k", "compactness": "compactness", "folds": "folds", "trees": "trees",
    "seed": "seed", "threads": "threads", "overlay": "overlay",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file; flags override it")
    common.add_argument("--input-dir")
    common.add_argument("--mask-dir")
    common.add_argument("--output-dir")
    common.add_argument("--model")
    common.add_argument("--gold-csv")
    common.add_argument("--k", type=int)
    common.add_argument("--compactness", type=float)
    common.add_argument("--folds", type=int)
    common.add_argument("--trees", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--overlay", action="store_true", default=None)
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any configuration key")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="breastpd", description="Breast percent-density pipeline")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BANK_VERSION})")
    sub = parser.add_subparsers(dest="command", required=True)

    ph = sub.add_parser("phantom", parents=[common], help="write a synthetic phantom corpus")
    ph.add_argument("--n", type=int, default=10)
    ph.add_argument("--pd-min", type=float, default=5.0)
    ph.add_argument("--pd-max", type=float, default=40.0)
    ph.add_argument("--size", type=int, default=512)
    ph.add_argument("--bump", action="store_true")
    ph.add_argument("--pectoral", action="store_true")
    ph.add_argument("--format", choices=("pgm", "png"), default="pgm")
    ph.add_argument("--prefix", default="ph")

    sub.add_parser("preprocess", parents=[common], help="log, invert, square and rescale images")
    sub.add_parser("segment", parents=[common], help="write final breast masks")
    sub.add_parser("superpixel", parents=[common], help="write SLIC label maps")
    sub.add_parser("features", parents=[common], help="write the superpixel feature table")
    sub.add_parser("calibrate", parents=[common], help="fit the intensity cutoff against gold PD")
    sub.add_parser("train", parents=[common], help="calibrate, select features and train the ensemble")
    pr = sub.add_parser("predict", parents=[common], help="PD from a feature table or from images")
    pr.add_argument("--features", help="feature CSV written by the features subcommand")
    ev = sub.add_parser("evaluate", parents=[common], help="PD agreement or case-control statistics")
    ev.add_argument("--pd-csv")
    ev.add_argument("--case-control")
    ev.add_argument("--measures", help="comma-separated measure columns (default: all but age, bmi)")
    ev.add_argument("--transforms", default="", help="measure=kind pairs, kind in log, sqrt, none")
    ev.add_argument("--reference")
    ev.add_argument("--covariates", default="age,bmi")
    ev.add_argument("--bootstrap", type=int, default=1000)
    ev.add_argument("--model-kind", choices=("conditional", "logistic"), default="conditional")
    sub.add_parser("pipeline", parents=[common], help="preprocess through predict for every image")
    return parser


def make_config(args) -> PipelineConfig:
    config = PipelineConfig()
    if args.config:
        config.update(read_config(args.config))
    flags = {key: getattr(args, name) for name, key in _CONFIG_FLAGS.items() if getattr(args, name) is not None}
    config.update(flags)
    for item in args.set:
        if "=" not in item:
            raise BreastPDError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        config.update({k.strip(): v.strip()})
    return config.validate()


def _require(value, flag):
    if not value:
        raise BreastPDError(f"{flag} is required for this subcommand")
    return value


class Run:
    """Output directory, failure bookkeeping and the manifest of one invocation."""

    def __init__(self, command, config: PipelineConfig):
        self.command = command
        self.config = config
        self.out = Path(_require(config.output_dir, "--output-dir"))
        self.out.mkdir(parents=True, exist_ok=True)
        self.inputs = {}
        self.outputs = []
        self.failures = []
        self.extra = {}

    def add_input(self, path):
        path = Path(path)
        self.inputs[str(path)] = file_sha256(path)

    def add_inputs(self, paths):
        for p in paths:
            self.add_input(p)

    def path(self, *parts) -> Path:
        p = self.out.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        self.outputs.append(str(p.relative_to(self.out)))
        return p

    def fail(self, image_id, message):
        self.failures.append({"image_id": image_id, "error": message})

    def write_manifest(self):
        cfg = self.config.as_dict()
        manifest = {
            "command": self.command,
            "version": __version__,
            "bank_version": BANK_VERSION,
            "model_format_version": FORMAT_VERSION,
            "config": cfg,
            "config_sha256": self.config.digest(),
            "seeds": {"seed": self.config.seed},
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": sorted(set(self.outputs)),
            "failures": self.failures,
        }
        manifest.update(self.extra)
        with open(self.out / "manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def status(self) -> int:
        for f in self.failures:
            print(f"FAILED {f['image_id']}: {f['error']}", file=sys.stderr)
        if self.failures:
            print(f"{len(self.failures)} image(s) failed", file=sys.stderr)
        return 1 if self.failures else 0


def _images(run: Run):
    paths = list_images(_require(run.config.input_dir, "--input-dir"))
    run.add_inputs(paths)
    if run.config.mask_dir:
        for p in paths:
            for suffix in (".pgm", ".png"):
                m = Path(run.config.mask_dir) / f"{p.stem}{suffix}"
                if m.exists():
                    run.add_input(m)
    return paths


def _process_all(run: Run, paths):
    items = run_batch(paths, lambda p: process_image(p, run.config), run.config.threads)
    for it in items:
        if not it.ok:
            run.fail(it.image_id, it.error)
    return items


# ---------------------------------------------------------------- subcommands


def cmd_phantom(args, config):
    run = Run("phantom", config)
    base = PhantomSpec(height=args.size, width=args.size, bump=args.bump, pectoral=args.pectoral)
    corpus = generate_corpus(args.n, (args.pd_min, args.pd_max), config.seed, run.out, base, args.prefix,
                             args.format)
    for image_id, _ in corpus:
        run.outputs += [f"{image_id}.{args.format}", f"{image_id}.meta", f"masks/{image_id}.{args.format}"]
    run.outputs.append("gold.csv")
    run.extra["phantom"] = {"n": args.n, "pd_range": [args.pd_min, args.pd_max], "size": args.size,
                            "bump": args.bump, "pectoral": args.pectoral}
    run.write_manifest()
    return 0


def cmd_preprocess(args, config):
    run = Run("preprocess", config)
    paths = _images(run)

    def one(path):
        raw = load_image(path)
        raw.validate()
        pre, flipped = standardize_orientation(preprocess(raw))
        return pre, flipped

    rows = []
    for item in run_batch(paths, one, config.threads):
        if not item.ok:
            run.fail(item.image_id, item.error)
            continue
        pre, flipped = item.result
        write_raster(run.path("preprocessed", f"{item.image_id}.pgm"), to_uint16(pre.pixels), 16)
        rows.append([item.image_id, int(flipped), repr(pre.normalization[0]), repr(pre.normalization[1])])
    with open(run.path("orientation.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["image_id", "flipped", "norm_min", "norm_max"])
        w.writerows(rows)
    run.write_manifest()
    return run.status()


def cmd_segment(args, config):
    run = Run("segment", config)
    paths = _images(run)
    rows = []
    for item in _process_all(run, paths):
        if not item.ok:
            continue
        r = item.result
        write_mask(run.path("masks", f"{r.image_id}.pgm"), oriented_mask(r))
        rows.append([r.image_id, r.mask_source, r.mask.breast_area, int(r.flipped)])
    with open(run.path("segmentation.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["image_id", "mask_source", "breast_area", "flipped"])
        w.writerows(rows)
    run.write_manifest()
    return run.status()


def cmd_superpixel(args, config):
    run = Run("superpixel", config)
    paths = _images(run)
    rows = []
    for item in _process_all(run, paths):
        if not item.ok:
            continue
        r = item.result
        lab = r.superpixels.labels + 1  # 0 marks pixels outside the breast
        if r.flipped:
            lab = lab[:, ::-1]
        write_raster(run.path("superpixels", f"{r.image_id}.pgm"), np.ascontiguousarray(lab).astype(np.uint16), 16)
        areas = r.areas
        rows.append([r.image_id, r.superpixels.n_labels, int(areas.min()), int(areas.max()),
                     f"{areas.mean():.3f}"])
    with open(run.path("superpixels.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["image_id", "n_superpixels", "min_area", "max_area", "mean_area"])
        w.writerows(rows)
    run.write_manifest()
    return run.status()


def cmd_features(args, config):
    run = Run("features", config)
    paths = _images(run)
    mats = [item.result.features for item in _process_all(run, paths) if item.ok]
    if mats:
        write_feature_csv(run.path("features.csv"), FeatureMatrix.concat(mats))
        run.outputs.append("features.meta")
    run.write_manifest()
    return run.status()


def _gold(run):
    path = _require(run.config.gold_csv, "--gold-csv")
    run.add_input(path)
    return read_gold_csv(path)


def cmd_calibrate(args, config):
    run = Run("calibrate", config)
    paths = _images(run)
    gold = _gold(run)
    results = {it.image_id: it.result for it in _process_all(run, paths) if it.ok}
    usable = [g for g in gold if g.image_id in results]
    for g in gold:
        if g.image_id not in results and not any(f["image_id"] == g.image_id for f in run.failures):
            run.fail(g.image_id, "listed in the gold CSV but no image was found")
    if usable:
        calib = calibrate_cutoff({g.image_id: (results[g.image_id].means, results[g.image_id].areas)
                                  for g in usable}, usable, config.grid_size, config.pooling)
        with open(run.path("calibration.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["cutoff", "achieved_overall_pd", "gold_overall_pd", "grid_size", "pooling"])
            w.writerow([repr(calib.cutoff), repr(calib.achieved_overall_pd), repr(calib.gold_overall_pd),
                        calib.grid_size, calib.pooling])
        with open(run.path("labels.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["image_id", "superpixel_label", "mean_intensity", "area", "dense"])
            for g in usable:
                r = results[g.image_id]
                lab = reference_labels(r.means, calib)
                for j in range(len(lab)):
                    w.writerow([g.image_id, j, repr(float(r.means[j])), int(r.areas[j]), int(lab[j])])
    run.write_manifest()
    return run.status()


def cmd_train(args, config):
    run = Run("train", config)
    paths = _images(run)
    gold = _gold(run)
    results = {it.image_id: it.result for it in _process_all(run, paths) if it.ok}
    usable = [g for g in gold if g.image_id in results]
    if len(usable) < len(gold):
        logger.warning("%d gold image(s) unavailable for training", len(gold) - len(usable))
    outcome = train_from_results([results[g.image_id] for g in usable], usable, config)
    model_path = Path(config.model) if config.model else run.path("model.dlbr")
    model_path.parent.mkdir(parents=True, exist_ok=True)
    save_ensemble(outcome.model, model_path)
    if config.model:
        run.extra["model_path"] = str(model_path)
    outcome.report.write_csv(run.path("selection.csv"))
    run.path("selection.txt").write_text(outcome.report.summary())
    with open(run.path("folds.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["image_id", "fold"])
        for image_id in sorted(outcome.fold_map):
            w.writerow([image_id, outcome.fold_map[image_id]])
    calib = outcome.model.calibration
    run.extra["calibration"] = {"cutoff": calib.cutoff, "achieved_overall_pd": calib.achieved_overall_pd,
                                "gold_overall_pd": calib.gold_overall_pd}
    run.extra["model_sha256"] = file_sha256(model_path)
    run.write_manifest()
    return run.status()


def _load_model(run):
    path = _require(run.config.model, "--model")
    run.add_input(path)
    model = load_ensemble(path)
    model.check_bank(BANK_VERSION)
    return model


def _predict_images(run, model):
    paths = _images(run)
    results = []
    for item in _process_all(run, paths):
        if not item.ok:
            continue
        try:
            res = predict_result(item.result, model)
        except BreastPDError as exc:
            run.fail(item.image_id, f"{type(exc).__name__}: {exc}")
            continue
        results.append(res)
        if run.config.overlay:
            write_overlay(run.path("overlays", f"{item.image_id}.png"), item.result, res)
    write_pd_csv(run.path("pd.csv"), results)
    return results


def cmd_predict(args, config):
    run = Run("predict", config)
    model = _load_model(run)
    if args.features:
        run.add_input(args.features)
        fm = read_feature_csv(args.features)
        model.check_bank(fm.bank_version)
        results = []
        for image_id in dict.fromkeys(fm.image_ids):
            rows = fm.rows_for(image_id)
            sub = FeatureMatrix(fm.values[rows], fm.columns, [image_id] * rows.size, fm.labels[rows],
                                fm.bank_version)
            try:
                results.append(classify_and_pd(sub, model, image_id=image_id))
            except BreastPDError as exc:
                run.fail(image_id, f"{type(exc).__name__}: {exc}")
        write_pd_csv(run.path("pd.csv"), results)
    else:
        _predict_images(run, model)
    run.write_manifest()
    return run.status()


def cmd_pipeline(args, config):
    run = Run("pipeline", config)
    model = _load_model(run)
    _predict_images(run, model)
    run.write_manifest()
    return run.status()


def _parse_transforms(text):
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        if "=" not in part:
            raise BreastPDError(f"--transforms expects measure=kind, got {part!r}")
        m, k = part.split("=", 1)
        out[m.strip()] = k.strip()
    return out


def cmd_evaluate(args, config):
    run = Run("evaluate", config)
    did = False
    if args.pd_csv:
        run.add_input(args.pd_csv)
        est = read_pd_csv(args.pd_csv)
        gold = {g.image_id: g.gold_pd for g in _gold(run)}
        ids = [i for i in est if i in gold]
        if len(ids) < 3:
            raise BreastPDError("need at least 3 images present in both the PD and gold CSVs")
        e = np.array([est[i] for i in ids])
        g = np.array([gold[i] for i in ids])
        with open(run.path("agreement.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "mean_abs_error", "spearman", "mean_bias"])
            w.writerow([len(ids), f"{np.abs(e - g).mean():.6f}", f"{spearman(e, g):.6f}", f"{(e - g).mean():.6f}"])
        did = True
    if args.case_control:
        run.add_input(args.case_control)
        data = read_case_control_csv(args.case_control)
        covariates = [c for c in (s.strip() for s in args.covariates.split(",")) if c]
        measures = ([m.strip() for m in args.measures.split(",")] if args.measures
                    else [c for c in data.columns if c not in covariates])
        rows = evaluate_measures(data, measures, _parse_transforms(args.transforms), covariates, args.model_kind,
                                 args.bootstrap, config.seed, args.reference)
        write_report_csv(run.path("report.csv"), rows)
        run.extra["evaluate"] = {"bootstrap": args.bootstrap, "model_kind": args.model_kind,
                                 "covariates": covariates, "reference": args.reference,
                                 "weighting": "inverse class frequency, normalized",
                                 "ci": "percentile bootstrap over matched sets"}
        did = True
    if not did:
        raise BreastPDError("evaluate needs --pd-csv with --gold-csv, or --case-control")
    run.write_manifest()
    return run.status()


COMMANDS = {
    "phantom": cmd_phantom, "preprocess": cmd_preprocess, "segment": cmd_segment, "superpixel": cmd_superpixel,
    "features": cmd_features, "calibrate": cmd_calibrate, "train": cmd_train, "predict": cmd_predict,
    "evaluate": cmd_evaluate, "pipeline": cmd_pipeline,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = make_config(args)
        return COMMANDS[args.command](args, config)
    except (BreastPDError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
