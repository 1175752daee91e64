"""Named texture-feature banks for whole breasts and for superpixels."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.stats import rankdata

from .exceptions import FeatureError
from .imaging import read_meta, write_meta
from .segmentation import trace_contour
from .texture import (
    FIRST_ORDER_NAMES,
    GLCM_NAMES,
    GLRLM_NAMES,
    RUN_OFFSETS,
    first_order_batch,
    glcm_features_batch,
    glrlm_features_batch,
    quantize,
)

logger = logging.getLogger(__name__)

BANK_VERSION = "pdbank-1.0"
IMAGE = "IMAGE"
SUPERPIXEL = "SUPERPIXEL"

MULTISCALE_GLCM = ("contrast", "entropy", "homogeneity", "correlation")
MULTISCALE_FO = ("mean", "std", "entropy", "skewness")
LONG_RANGE_GLCM = ("contrast", "homogeneity", "entropy", "correlation")
COARSE_GLRLM = ("sre", "lre", "rp")


def _image_feature_names():
    names = [f"img_fo_{n}" for n in FIRST_ORDER_NAMES]
    names += [f"img_glcm_d{d}_{n}" for d in (1, 2, 3) for n in GLCM_NAMES]
    names += [f"img_glrlm_{n}" for n in GLRLM_NAMES]
    names += ["img_breast_area_fraction", "img_contour_length", "img_bbox_aspect"]
    for s in (2, 4):
        names += [f"img_s{s}_glcm_{n}" for n in MULTISCALE_GLCM]
        names += [f"img_s{s}_fo_{n}" for n in MULTISCALE_FO]
    names += [f"img_glcm_l{lv}_d{d}_{n}" for lv in (16, 64) for d in (4, 5) for n in LONG_RANGE_GLCM]
    names += [f"img_s2_glrlm_{n}" for n in COARSE_GLRLM]
    return tuple(names)


def _superpixel_feature_names():
    names = [f"sp_fo_{n}" for n in FIRST_ORDER_NAMES]
    names += [f"sp_glcm_{n}" for n in GLCM_NAMES]
    names += [f"sp_glrlm_{n}" for n in GLRLM_NAMES]
    names += [
        "sp_area", "sp_perimeter", "sp_eccentricity", "sp_centroid_row", "sp_centroid_col",
        "sp_intensity_rank", "sp_neighbor_contrast", "sp_chest_wall_distance", "sp_skin_distance",
    ]
    return tuple(names)


IMAGE_FEATURES = _image_feature_names()
SUPERPIXEL_FEATURES = _superpixel_feature_names()
ALL_FEATURES = SUPERPIXEL_FEATURES + IMAGE_FEATURES
assert len(IMAGE_FEATURES) == 101 and len(SUPERPIXEL_FEATURES) == 50


@dataclass
class FeatureVector:
    names: tuple
    values: np.ndarray
    scope: str = IMAGE
    bank_version: str = BANK_VERSION

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if len(set(self.names)) != len(self.names):
            raise FeatureError("feature names must be unique")
        if not np.all(np.isfinite(self.values)):
            bad = [n for n, v in zip(self.names, self.values) if not np.isfinite(v)]
            raise FeatureError(f"non-finite feature values: {bad}")

    def __getitem__(self, name):
        return float(self.values[self.names.index(name)])

    def __len__(self):
        return len(self.names)

    def as_dict(self):
        return dict(zip(self.names, self.values.tolist()))


@dataclass
class FeatureMatrix:
    """Feature rows keyed by ``(image_id, superpixel_label)``; IMAGE rows use label -1."""

    values: np.ndarray
    columns: tuple
    image_ids: list
    labels: np.ndarray
    bank_version: str = BANK_VERSION
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.columns = tuple(self.columns)
        if self.values.shape != (len(self.image_ids), len(self.columns)):
            raise FeatureError(
                f"matrix shape {self.values.shape} does not match "
                f"{len(self.image_ids)} rows x {len(self.columns)} columns"
            )

    @property
    def shape(self):
        return self.values.shape

    def column(self, name) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def select(self, names) -> np.ndarray:
        missing = [n for n in names if n not in self.columns]
        if missing:
            raise FeatureError(f"feature columns missing from matrix: {missing}")
        idx = [self.columns.index(n) for n in names]
        return self.values[:, idx]

    def rows_for(self, image_id) -> np.ndarray:
        return np.array([i for i, x in enumerate(self.image_ids) if x == image_id], dtype=np.int64)

    @classmethod
    def concat(cls, mats):
        mats = list(mats)
        if not mats:
            raise FeatureError("no feature matrices to concatenate")
        cols = mats[0].columns
        for m in mats[1:]:
            if m.columns != cols:
                raise FeatureError("cannot concatenate matrices with different columns")
        return cls(
            np.vstack([m.values for m in mats]),
            cols,
            [i for m in mats for i in m.image_ids],
            np.concatenate([m.labels for m in mats]),
            mats[0].bank_version,
        )


# ---------------------------------------------------------------- single-region API


def _region_labels(image, mask):
    image = np.asarray(image, dtype=np.float64)
    if mask is None:
        mask = np.ones(image.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if image.shape != mask.shape:
        raise FeatureError(f"image shape {image.shape} differs from region shape {mask.shape}")
    return image, np.where(mask, 0, -1)


def first_order_features(values) -> FeatureVector:
    """Nineteen first-order statistics of an intensity multiset."""
    vals = np.asarray(values, dtype=np.float64).ravel()
    if vals.size < 2:
        raise FeatureError(f"first-order features need at least 2 values, got {vals.size}")
    row = first_order_batch(vals[None, :], np.zeros((1, vals.size), dtype=np.int64), 1)[0]
    return FeatureVector(tuple(f"fo_{n}" for n in FIRST_ORDER_NAMES), row, IMAGE)


def glcm_features(image, mask=None, levels=32, distances=(1, 2, 3), angles=(0, 45, 90, 135)) -> FeatureVector:
    """GLCM descriptors of one region, averaged over angles, one block per distance."""
    image, lab = _region_labels(image, mask)
    if np.count_nonzero(lab >= 0) < 2:
        raise FeatureError("region needs at least 2 pixels for GLCM")
    vals, valid = glcm_features_batch(image, lab, levels, distances, angles)
    if not valid.any():
        raise FeatureError("no valid co-occurrence pairs in region")
    names = tuple(f"glcm_d{d}_{n}" for d in distances for n in GLCM_NAMES)
    return FeatureVector(names, vals[0], IMAGE)


def glrlm_features(image, mask=None, levels=32, angles=(0, 45, 90, 135)) -> FeatureVector:
    """Run-length descriptors of one region, averaged over run directions."""
    image, lab = _region_labels(image, mask)
    if not np.any(lab >= 0):
        raise FeatureError("empty region")
    vals = glrlm_features_batch(image, lab, levels, tuple(RUN_OFFSETS[a] for a in angles))
    return FeatureVector(tuple(f"glrlm_{n}" for n in GLRLM_NAMES), vals[0], IMAGE)


# ---------------------------------------------------------------- image bank


def _downsample(image, breast, factor):
    h, w = image.shape
    hh, ww = h // factor, w // factor
    if hh < 2 or ww < 2:
        raise FeatureError(f"image too small for {factor}x downsampling")
    img = image[: hh * factor, : ww * factor].reshape(hh, factor, ww, factor)
    msk = breast[: hh * factor, : ww * factor].reshape(hh, factor, ww, factor)
    weight = msk.sum(axis=(1, 3)).astype(np.float64)
    total = (img * msk).sum(axis=(1, 3))
    small = np.where(weight > 0, total / np.maximum(weight, 1), 0.0)
    small_mask = weight >= 0.5 * factor * factor
    return small, small_mask


def extract_image_features(img, mask) -> FeatureVector:
    """The 101-feature IMAGE bank over the breast region."""
    px = np.asarray(getattr(img, "pixels", img), dtype=np.float64)
    breast = mask.breast if hasattr(mask, "breast") else np.asarray(mask, bool)
    if not breast.any():
        raise FeatureError("empty breast mask")
    lab = np.where(breast, 0, -1)
    values = [first_order_batch(px, lab, 1)[0]]
    q, n = quantize(px, lab, 32)
    glcm, valid = glcm_features_batch(px, lab, 32, (1, 2, 3), q=q, n=n)
    if not valid.all():
        raise FeatureError("breast region has no co-occurrence pairs at some distance")
    values += [glcm[0], glrlm_features_batch(px, lab, 32, q=q, n=n)[0]]

    rows, cols = np.nonzero(breast)
    height = rows.max() - rows.min() + 1
    width = cols.max() - cols.min() + 1
    values.append(np.array([breast.mean(), float(len(trace_contour(breast))), height / width]))

    for factor in (2, 4):
        small, small_mask = _downsample(px, breast, factor)
        slab = np.where(small_mask, 0, -1)
        if np.count_nonzero(slab >= 0) < 2:
            raise FeatureError(f"breast region vanishes at {factor}x downsampling")
        g, _ = glcm_features_batch(small, slab, 32, (1,))
        fo = first_order_batch(small, slab, 1)[0]
        values.append(np.array([g[0, GLCM_NAMES.index(nm)] for nm in MULTISCALE_GLCM]))
        values.append(np.array([fo[FIRST_ORDER_NAMES.index(nm)] for nm in MULTISCALE_FO]))

    for levels in (16, 64):
        g, valid = glcm_features_batch(px, lab, levels, (4, 5))
        if not valid.all():
            raise FeatureError("breast region has no long-range co-occurrence pairs")
        for k, _d in enumerate((4, 5)):
            block = g[0, k * len(GLCM_NAMES) : (k + 1) * len(GLCM_NAMES)]
            values.append(np.array([block[GLCM_NAMES.index(nm)] for nm in LONG_RANGE_GLCM]))

    small, small_mask = _downsample(px, breast, 2)
    rl = glrlm_features_batch(small, np.where(small_mask, 0, -1), 32)[0]
    values.append(np.array([rl[GLRLM_NAMES.index(nm)] for nm in COARSE_GLRLM]))
    return FeatureVector(IMAGE_FEATURES, np.concatenate(values), IMAGE)


# ---------------------------------------------------------------- superpixel bank


def _superpixel_geometry(px, labels, n, breast, means):
    inside = labels >= 0
    lab = labels[inside]
    rows, cols = np.nonzero(inside)
    area = np.bincount(lab, minlength=n).astype(np.float64)
    safe = np.maximum(area, 1)

    # perimeter: pixel edges facing another label, the background or the frame
    padded = np.pad(labels, 1, constant_values=-1)
    core = padded[1:-1, 1:-1]
    perim = np.zeros(n)
    for shifted in (padded[:-2, 1:-1], padded[2:, 1:-1], padded[1:-1, :-2], padded[1:-1, 2:]):
        edge = inside & (shifted != core)
        perim += np.bincount(core[edge], minlength=n)

    cr = np.bincount(lab, rows, n) / safe
    cc = np.bincount(lab, cols, n) / safe
    dr = rows - cr[lab]
    dc = cols - cc[lab]
    srr = np.bincount(lab, dr * dr, n) / safe
    scc = np.bincount(lab, dc * dc, n) / safe
    src = np.bincount(lab, dr * dc, n) / safe
    tr = srr + scc
    disc = np.sqrt(np.maximum((srr - scc) ** 2 / 4.0 + src * src, 0.0))
    lmax = tr / 2.0 + disc
    lmin = np.maximum(tr / 2.0 - disc, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        ecc = np.where(lmax > 1e-12, np.sqrt(np.clip(1.0 - lmin / lmax, 0.0, 1.0)), 0.0)

    brows, bcols = np.nonzero(breast)
    r0, r1 = brows.min(), brows.max()
    c0, c1 = bcols.min(), bcols.max()
    hb = max(r1 - r0, 1)
    wb = max(c1 - c0, 1)
    row_norm = (cr - r0) / hb
    col_norm = (cc - c0) / wb

    rank = rankdata(means, method="average") / n

    # adjacency under 8-connectivity
    pairs = []
    for sl_a, sl_b in (
        ((slice(None), slice(None, -1)), (slice(None), slice(1, None))),
        ((slice(None, -1), slice(None)), (slice(1, None), slice(None))),
        ((slice(None, -1), slice(None, -1)), (slice(1, None), slice(1, None))),
        ((slice(None, -1), slice(1, None)), (slice(1, None), slice(None, -1))),
    ):
        a, b = labels[sl_a], labels[sl_b]
        ok = (a >= 0) & (b >= 0) & (a != b)
        pairs.append(np.column_stack([a[ok], b[ok]]))
    adj = np.vstack(pairs) if pairs else np.zeros((0, 2), dtype=np.int64)
    adj = np.unique(np.vstack([adj, adj[:, ::-1]]), axis=0) if adj.size else adj
    nb_sum = np.bincount(adj[:, 0], means[adj[:, 1]], n) if adj.size else np.zeros(n)
    nb_cnt = np.bincount(adj[:, 0], minlength=n) if adj.size else np.zeros(n)
    with np.errstate(invalid="ignore", divide="ignore"):
        contrast = np.where(nb_cnt > 0, means - nb_sum / np.maximum(nb_cnt, 1), 0.0)

    chest = (cc - c0) / wb
    # distance to the skin line; the chest wall (left edge) is not skin
    pad = np.pad(breast, ((1, 1), (0, 1)), constant_values=False)
    pad = np.pad(pad, ((0, 0), (1, 0)), constant_values=True)
    depth = ndimage.distance_transform_edt(pad)[1:-1, 1:-1]
    depth_max = max(float(depth[breast].max()), 1.0)
    skin = np.bincount(lab, depth[inside], n) / safe / depth_max
    return np.column_stack([area, perim, ecc, row_norm, col_norm, rank, contrast, chest, skin])


def extract_superpixel_features(img, sp, image_features: FeatureVector, breast=None, image_id="") -> FeatureMatrix:
    """Fifty per-superpixel features, each row followed by the 101 image features."""
    px = np.asarray(getattr(img, "pixels", img), dtype=np.float64)
    labels = sp.labels
    n = sp.n_labels
    if breast is None:
        breast = labels >= 0
    if image_features.names != IMAGE_FEATURES:
        raise FeatureError("image feature vector does not match the current bank")
    area = np.bincount(labels[labels >= 0], minlength=n)
    fo = first_order_batch(px, labels, n)
    q, _ = quantize(px, labels, 32)
    glcm, valid = glcm_features_batch(px, labels, 32, (1,), q=q, n=n)
    tiny = (area < 4) | ~valid[:, 0]
    if tiny.any():
        logger.warning("%s: %d superpixel(s) below 4 pixels; GLCM descriptors set to 0",
                       image_id or "image", int(tiny.sum()))
        glcm[tiny] = 0.0
    glrlm = glrlm_features_batch(px, labels, 32, q=q, n=n)
    geom = _superpixel_geometry(px, labels, n, breast, fo[:, 0])
    sp_block = np.hstack([fo, glcm, glrlm, geom])
    values = np.hstack([sp_block, np.repeat(image_features.values[None, :], n, axis=0)])
    if not np.all(np.isfinite(values)):
        raise FeatureError(f"{image_id}: non-finite superpixel features")
    return FeatureMatrix(values, ALL_FEATURES, [image_id] * n, np.arange(n))


# ---------------------------------------------------------------- CSV


def write_feature_csv(path, fm: FeatureMatrix):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["image_id", "superpixel_label", *fm.columns])
        for image_id, label, row in zip(fm.image_ids, fm.labels, fm.values):
            writer.writerow([image_id, int(label), *(repr(float(v)) for v in row)])
    write_meta(path, {"bank_version": fm.bank_version})


def read_feature_csv(path, bank_version=None) -> FeatureMatrix:
    """Read a feature CSV; the bank version comes from its ``.meta`` sidecar when present."""
    if bank_version is None:
        bank_version = read_meta(path).get("bank_version", BANK_VERSION)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["image_id", "superpixel_label"]:
            raise FeatureError(f"{path}: first columns must be image_id, superpixel_label")
        ids, labels, rows = [], [], []
        for line in reader:
            ids.append(line[0])
            labels.append(int(line[1]))
            rows.append([float(v) for v in line[2:]])
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(header) - 2)
    return FeatureMatrix(values, tuple(header[2:]), ids, np.array(labels), bank_version)
