"""Per-image processing chain, batch runner and the training chain."""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from PIL import Image

from .calibration import calibrate_cutoff, reference_labels
from .ensemble import assign_folds, classify_and_pd, dense_mask_from, train_ensemble
from .exceptions import BreastPDError
from .features import BANK_VERSION, FeatureMatrix, extract_image_features, extract_superpixel_features
from .imaging import RawImage, load_image, mirror, preprocess, standardize_orientation
from .segmentation import (
    RegionMask,
    finalize_breast_mask,
    ingest_mask,
    remove_abdominal_bump,
    segment_background_classical,
)
from .selection import select_features
from .superpixel import generate_superpixels, superpixel_mean_intensities

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".pgm", ".png")


@dataclass
class PipelineConfig:
    input_dir: str = ""
    mask_dir: str = ""
    output_dir: str = ""
    model: str = ""
    gold_csv: str = ""
    k: int = 512
    compactness: float = 0.1
    slic_iters: int = 10
    grid_size: int = 1024
    pooling: str = "mean"
    C: float = 1.0
    gamma: str = "auto"
    kernel: str = "rbf"
    class_weight: str = "balanced"
    folds: int = 3
    trees: int = 100
    n_features: int = 80
    corr_threshold: float = 0.95
    seed: int = 0
    threads: int = 1
    overlay: bool = False
    bump_window: int = 15
    bank_version: str = BANK_VERSION

    def validate(self):
        checks = [
            (self.k >= 2, "k must be at least 2"),
            (self.compactness > 0, "compactness must be positive"),
            (self.slic_iters >= 1, "slic_iters must be at least 1"),
            (self.grid_size >= 2, "grid_size must be at least 2"),
            (self.pooling in ("mean", "pooled"), "pooling must be mean or pooled"),
            (float(self.C) > 0, "C must be positive"),
            (self.kernel in ("rbf", "linear"), "kernel must be rbf or linear"),
            (self.class_weight in ("balanced", "none"), "class_weight must be balanced or none"),
            (self.folds >= 2, "folds must be at least 2"),
            (self.trees >= 1, "trees must be at least 1"),
            (self.n_features >= 1, "n_features must be at least 1"),
            (0 < self.corr_threshold <= 1, "corr_threshold must lie in (0, 1]"),
            (self.threads >= 1, "threads must be at least 1"),
            (self.bump_window >= 1, "bump_window must be at least 1"),
            (self.bank_version == BANK_VERSION,
             f"bank_version pin {self.bank_version!r} differs from this build ({BANK_VERSION!r})"),
        ]
        if self.gamma != "auto":
            checks.append((float(self.gamma) > 0, "gamma must be positive or auto"))
        for ok, msg in checks:
            if not ok:
                raise BreastPDError(f"invalid configuration: {msg}")
        return self

    def svm_gamma(self):
        return self.gamma if self.gamma == "auto" else float(self.gamma)

    def update(self, values: dict):
        """Apply string (or typed) overrides; unknown keys are errors."""
        types = {f.name: f.type for f in fields(self)}
        for key, value in values.items():
            key = key.replace("-", "_")
            if key not in types:
                raise BreastPDError(f"unknown configuration key {key!r}")
            current = getattr(self, key)
            if isinstance(value, str):
                if isinstance(current, bool):
                    value = value.strip().lower() in ("1", "true", "yes", "on")
                elif isinstance(current, int):
                    value = int(value)
                elif isinstance(current, float):
                    value = float(value)
            setattr(self, key, value)
        return self

    def as_dict(self):
        return asdict(self)

    def digest(self) -> str:
        text = json.dumps(self.as_dict(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()


def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise BreastPDError(f"{path}:{lineno}: expected key = value")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def write_config(path, config: PipelineConfig):
    lines = [f"{k} = {v}" for k, v in sorted(config.as_dict().items())]
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass
class ImageResult:
    image_id: str
    image: object  # PreprocessedImage in standard orientation
    mask: RegionMask
    flipped: bool
    superpixels: object
    features: FeatureMatrix
    means: np.ndarray
    areas: np.ndarray
    mask_source: str = "classical"
    meta: dict = field(default_factory=dict)


def list_images(input_dir) -> list:
    d = Path(input_dir)
    if not d.is_dir():
        raise BreastPDError(f"input directory {input_dir} does not exist")
    return sorted(p for p in d.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file())


def find_mask(mask_dir, image_id):
    if not mask_dir:
        return None
    for suffix in IMAGE_SUFFIXES:
        p = Path(mask_dir) / f"{image_id}{suffix}"
        if p.exists():
            return p
    return None


def segment(pre, flipped, mask_path=None, bump_window=15) -> tuple:
    """External mask (mirrored to match the image) or the classical fallback,
    then bump removal and single-component cleanup."""
    if mask_path is not None:
        mask = ingest_mask(mask_path, pre)
        if flipped:
            mask = RegionMask(np.ascontiguousarray(mask.labels[:, ::-1]))
        source = "external"
    else:
        mask = segment_background_classical(pre)
        source = "classical"
    mask = remove_abdominal_bump(mask, window=bump_window)
    return finalize_breast_mask(mask), source


def process_image(path, config: PipelineConfig, image_id=None, raw: RawImage | None = None) -> ImageResult:
    """Load, preprocess, orient, segment, partition and featurize one image."""
    path = Path(path)
    image_id = image_id or path.stem
    raw = raw if raw is not None else load_image(path)
    raw.validate()
    pre = preprocess(raw)
    pre, flipped = standardize_orientation(pre)
    mask, source = segment(pre, flipped, find_mask(config.mask_dir, image_id), config.bump_window)
    sp = generate_superpixels(pre, mask, k=config.k, compactness=config.compactness, iters=config.slic_iters,
                              seed=config.seed)
    img_feats = extract_image_features(pre, mask)
    fm = extract_superpixel_features(pre, sp, img_feats, mask.breast, image_id)
    means = superpixel_mean_intensities(pre, sp)
    return ImageResult(image_id, pre, mask, flipped, sp, fm, means, sp.areas(), source, dict(raw.meta))


@dataclass
class BatchItem:
    image_id: str
    result: object = None
    error: str = ""

    @property
    def ok(self):
        return not self.error


def run_batch(paths, func, threads=1) -> list:
    """Apply ``func(path)`` to every path; failures are captured per image.

    Results come back in input order whatever the completion order.
    """
    paths = list(paths)

    def guarded(path):
        image_id = Path(path).stem
        try:
            return BatchItem(image_id, func(path))
        except (BreastPDError, OSError) as exc:
            logger.error("%s: %s", image_id, exc)
            return BatchItem(image_id, error=f"{type(exc).__name__}: {exc}")

    if threads <= 1:
        return [guarded(p) for p in paths]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(guarded, paths))


# ---------------------------------------------------------------- training


@dataclass
class TrainingOutcome:
    model: object
    report: object
    labels: np.ndarray
    matrix: FeatureMatrix
    fold_map: dict


def train_from_results(results, gold, config: PipelineConfig) -> TrainingOutcome:
    """Calibrate the cutoff, label superpixels, select features, fit the ensemble."""
    gold = list(gold)
    by_id = {r.image_id: r for r in results}
    missing = [g.image_id for g in gold if g.image_id not in by_id]
    if missing:
        raise BreastPDError(f"gold records without processed images: {missing[:5]}")
    used = [by_id[g.image_id] for g in gold]
    calib = calibrate_cutoff({r.image_id: (r.means, r.areas) for r in used}, gold, config.grid_size,
                             config.pooling)
    labels = np.concatenate([reference_labels(r.means, calib) for r in used])
    matrix = FeatureMatrix.concat([r.features for r in used])
    row_ids = np.array([f"{i}\x00{lab:08d}" for i, lab in zip(matrix.image_ids, matrix.labels)])
    selected, report = select_features(matrix.values, labels, matrix.columns, config.corr_threshold,
                                       config.n_features, config.trees, config.seed, row_ids)
    fold_map = assign_folds([r.image_id for r in used], config.folds, config.seed)
    model = train_ensemble(matrix, labels, fold_map, C=float(config.C), gamma=config.svm_gamma(),
                           seed=config.seed, kernel=config.kernel, feature_names=selected, calibration=calib,
                           class_weight=None if config.class_weight == "none" else "balanced")
    model.meta = {"seed": config.seed, "k": config.k, "compactness": config.compactness,
                  "n_training_images": len(used)}
    return TrainingOutcome(model, report, labels, matrix, fold_map)


def predict_result(result: ImageResult, model):
    return classify_and_pd(result.features, model, areas=result.areas, image_id=result.image_id)


def overlay_image(result: ImageResult, pd_result) -> np.ndarray:
    """RGB rendering of the image with dense superpixels tinted red and the
    breast outline in green, mirrored back to the input orientation."""
    gray = np.clip(np.rint(result.image.pixels * 255.0), 0, 255).astype(np.uint8)
    rgb = np.repeat(gray[:, :, None], 3, axis=2)
    dense = dense_mask_from(result.superpixels.labels, pd_result)
    rgb[dense, 0] = 255
    rgb[dense, 1] = (rgb[dense, 1] * 0.5).astype(np.uint8)
    rgb[dense, 2] = (rgb[dense, 2] * 0.5).astype(np.uint8)
    breast = result.mask.breast
    edge = breast & ~np.pad(breast, 1)[2:, 1:-1] | breast & ~np.pad(breast, 1)[:-2, 1:-1] \
        | breast & ~np.pad(breast, 1)[1:-1, 2:] | breast & ~np.pad(breast, 1)[1:-1, :-2]
    rgb[edge] = (0, 255, 0)
    if result.flipped:
        rgb = rgb[:, ::-1]
    return np.ascontiguousarray(rgb)


def write_overlay(path, result, pd_result):
    Image.fromarray(overlay_image(result, pd_result), mode="RGB").save(path, format="PNG")


def oriented_mask(result: ImageResult) -> RegionMask:
    """Final mask in the input image's orientation."""
    lab = result.mask.labels
    return RegionMask(np.ascontiguousarray(lab[:, ::-1])) if result.flipped else result.mask


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def mirror_preprocessed(result: ImageResult):
    return mirror(result.image) if result.flipped else result.image
