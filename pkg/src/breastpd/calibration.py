"""Global intensity cutoff that turns image-level gold PD into superpixel labels."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import CalibrationError

DENSE = 1
NONDENSE = 0


@dataclass(frozen=True)
class GoldRecord:
    image_id: str
    gold_pd: float

    def __post_init__(self):
        if not 0.0 <= float(self.gold_pd) <= 100.0:
            raise CalibrationError(f"gold PD {self.gold_pd} for {self.image_id!r} outside [0, 100]")


@dataclass(frozen=True)
class CutoffCalibration:
    cutoff: float
    achieved_overall_pd: float
    gold_overall_pd: float
    grid_size: int = 1024
    pooling: str = "mean"


def read_gold_csv(path) -> list:
    records, seen = [], set()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        id_col = "image_id" if "image_id" in reader.fieldnames else "image-id"
        for row in reader:
            rec = GoldRecord(row[id_col], float(row["gold_pd"]))
            if rec.image_id in seen:
                raise CalibrationError(f"{path}: duplicate image id {rec.image_id!r}")
            seen.add(rec.image_id)
            records.append(rec)
    return records


def cutoff_grid(grid_size: int = 1024) -> np.ndarray:
    return np.linspace(0.0, 1.0, grid_size)


def _dense_area_curve(means, areas, grid):
    """Dense pixel area for every grid cutoff (superpixels with mean >= cutoff)."""
    order = np.argsort(means, kind="stable")
    m = np.asarray(means, dtype=np.float64)[order]
    a = np.asarray(areas, dtype=np.int64)[order]
    # suffix sums of integer areas are exact
    suffix = np.concatenate([np.cumsum(a[::-1])[::-1], [0]])
    first = np.searchsorted(m, grid, side="left")
    return suffix[first]


def overall_pd_curve(by_image: dict, image_ids, grid, pooling="mean") -> np.ndarray:
    dense = []
    totals = []
    for image_id in image_ids:
        means, areas = by_image[image_id]
        total = int(np.sum(np.asarray(areas, dtype=np.int64)))
        if total <= 0:
            raise CalibrationError(f"image {image_id!r} has no breast area")
        dense.append(_dense_area_curve(means, areas, grid))
        totals.append(total)
    dense = np.array(dense)
    totals = np.array(totals)
    if pooling == "pooled":
        return 100.0 * dense.sum(axis=0) / totals.sum()
    per_image = 100.0 * dense / totals[:, None]
    return np.array([math.fsum(col) / len(totals) for col in per_image.T])


def calibrate_cutoff(by_image: dict, gold, grid_size: int = 1024, pooling: str = "mean") -> CutoffCalibration:
    """Pick the grid cutoff whose overall PD best matches the overall gold PD.

    ``by_image`` maps image id to ``(superpixel_means, superpixel_areas)``.
    Overall PD is the unweighted mean of per-image PDs (``pooling="mean"``)
    or the pooled dense/breast area ratio (``pooling="pooled"``); ties go to
    the smaller cutoff.
    """
    gold = list(gold)
    if not gold:
        raise CalibrationError("empty gold list")
    if pooling not in ("mean", "pooled"):
        raise CalibrationError(f"unknown pooling {pooling!r}")
    ids = [g.image_id for g in gold]
    unknown = [i for i in ids if i not in by_image]
    if unknown:
        raise CalibrationError(f"gold records reference unknown image ids: {unknown}")
    grid = cutoff_grid(grid_size)
    curve = overall_pd_curve(by_image, ids, grid, pooling)
    if pooling == "pooled":
        totals = np.array([np.sum(by_image[i][1]) for i in ids], dtype=np.float64)
        target = math.fsum(g.gold_pd * t for g, t in zip(gold, totals)) / totals.sum()
    else:
        target = math.fsum(g.gold_pd for g in gold) / len(gold)
    err = np.abs(curve - target)
    best = int(np.argmin(err))  # first minimum is the smallest cutoff
    return CutoffCalibration(float(grid[best]), float(curve[best]), float(target), grid_size, pooling)


def reference_labels(means, calib: CutoffCalibration) -> np.ndarray:
    """DENSE (1) where the superpixel mean reaches the cutoff, else NONDENSE (0)."""
    return (np.asarray(means, dtype=np.float64) >= calib.cutoff).astype(np.int64)


class CutoffCalibrator(BaseEstimator):
    """Estimator wrapper: ``fit(by_image, gold)`` then ``predict(means)``."""

    def __init__(self, grid_size=1024, pooling="mean"):
        self.grid_size = grid_size
        self.pooling = pooling

    def fit(self, by_image, gold):
        self.calibration_ = calibrate_cutoff(by_image, gold, self.grid_size, self.pooling)
        self.cutoff_ = self.calibration_.cutoff
        return self

    def predict(self, means):
        return reference_labels(means, self.calibration_)
