"""Synthetic mammogram-like phantoms with exact ground truth.

Attenuation fields are built in "tissue is bright" units and converted to
raw detector counts as ``background_signal * exp(-attenuation)``, so the
standard preprocessing recovers a monotone image of the attenuation.
"""

from __future__ import annotations

import csv
import heapq
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from .exceptions import BreastPDError
from .imaging import RawImage, save_image, write_meta
from .segmentation import BREAST, PECTORALIS, RegionMask, write_mask


@dataclass(frozen=True)
class PhantomSpec:
    seed: int = 0
    height: int = 512
    width: int = 512
    radius: float | None = None  # defaults to 0.42 * min(height, width)
    center_row: float | None = None  # defaults to the frame's vertical middle
    target_pd: float = 30.0
    dense_base: float = 1.6
    dense_noise: float = 0.05
    dense_corr: int = 5
    fat_base: float = 1.0
    fat_noise: float = 0.05
    fat_corr: int = 9
    n_blobs: int = 4
    pectoral: bool = False
    pectoral_angle: float = 60.0
    bump: bool = False
    bump_size: float = 0.2
    background_signal: float = 60000.0
    mirrored: bool = False

    def validate(self):
        if not 0.0 <= self.target_pd <= 100.0:
            raise BreastPDError(f"target_pd {self.target_pd} outside [0, 100]")
        if self.dense_base <= self.fat_base:
            raise BreastPDError("dense base intensity must exceed fat base intensity")
        if self.height < 8 or self.width < 8:
            raise BreastPDError("phantom frame too small")
        return self


@dataclass
class Phantom:
    image: RawImage
    breast_mask: RegionMask
    tissue_mask: RegionMask  # breast plus any abdominal bump, as a background segmenter sees it
    dense_mask: np.ndarray
    pd: float
    spec: PhantomSpec


def _smoothed_noise(rng, shape, corr, std):
    field = rng.standard_normal(shape)
    if corr > 1:
        field = ndimage.uniform_filter(field, size=corr, mode="reflect")
    sd = field.std()
    if sd > 0:
        field = field / sd
    return field * std


def _grow_dense(rng, breast: np.ndarray, n_target: int, n_blobs: int) -> np.ndarray:
    """Grow ``n_target`` connected pixels from random seeds inside ``breast``.

    Growth is best-first on distance to the owning seed plus jitter, which
    gives compact blobs rather than scattered pixels.
    """
    dense = np.zeros_like(breast)
    if n_target == 0:
        return dense
    coords = np.argwhere(breast)
    h, w = breast.shape
    # seeds away from the skin line so blobs are mostly interior
    depth = ndimage.distance_transform_edt(np.pad(breast, ((1, 1), (0, 1)), constant_values=False))[1:-1, :-1]
    interior = coords[depth[breast] >= np.percentile(depth[breast], 40)]
    pool = interior if len(interior) else coords
    picks = rng.choice(len(pool), size=min(n_blobs, len(pool)), replace=False)
    heap = []
    queued = np.zeros_like(breast)
    for idx in picks:
        r, c = pool[idx]
        heapq.heappush(heap, (0.0, int(rng.integers(1 << 30)), int(r), int(c), int(r), int(c)))
        queued[r, c] = True
    count = 0
    while heap and count < n_target:
        _, _, r, c, sr, sc = heapq.heappop(heap)
        dense[r, c] = True
        count += 1
        for dr, dc in ((0, 1), (1, 0), (0, -1), (-1, 0)):
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and breast[nr, nc] and not queued[nr, nc]:
                queued[nr, nc] = True
                dist = np.hypot(nr - sr, nc - sc) * (1.0 + 0.35 * rng.random())
                heapq.heappush(heap, (dist, int(rng.integers(1 << 30)), nr, nc, sr, sc))
    if count < n_target:
        # disconnected leftovers: fill in raster order so the count is exact
        rest = np.argwhere(breast & ~dense)[: n_target - count]
        dense[rest[:, 0], rest[:, 1]] = True
    return dense


def breast_shape(spec: PhantomSpec):
    h, w = spec.height, spec.width
    radius = spec.radius if spec.radius is not None else 0.42 * min(h, w)
    cy = spec.center_row if spec.center_row is not None else (h - 1) / 2.0
    rr, cc = np.mgrid[0:h, 0:w]
    breast = (rr - cy) ** 2 + cc ** 2 <= radius ** 2
    bump = np.zeros_like(breast)
    if spec.bump:
        # lobe hanging off the lower chest wall, just below the semicircle
        a = spec.bump_size * radius  # horizontal semi-axis
        b = 0.75 * spec.bump_size * radius  # vertical semi-axis
        by = cy + radius + 0.25 * b
        bump = ((rr - by) / b) ** 2 + (cc / a) ** 2 <= 1.0
        bump &= ~breast
    pect = np.zeros_like(breast)
    if spec.pectoral:
        top = cy - radius
        slope = np.tan(np.radians(spec.pectoral_angle))
        pect = breast & (cc < (0.45 * radius - (rr - top) / slope)) & (rr >= top)
    return breast, bump, pect


def generate_phantom(spec: PhantomSpec) -> Phantom:
    """Build a phantom image with exact breast, dense and PD ground truth."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    semicircle, bump, pect = breast_shape(spec)
    tissue = semicircle | bump
    breast = semicircle & ~pect
    area = int(breast.sum())
    if area == 0:
        raise BreastPDError("phantom breast region is empty")
    n_dense = int(round(spec.target_pd * area / 100.0))
    if spec.target_pd > 0 and n_dense == 0:
        raise BreastPDError(f"target_pd {spec.target_pd} unreachable for a {area}-pixel breast")
    dense = _grow_dense(rng, breast, n_dense, spec.n_blobs)

    fat = spec.fat_base + _smoothed_noise(rng, tissue.shape, spec.fat_corr, spec.fat_noise)
    glandular = spec.dense_base + _smoothed_noise(rng, tissue.shape, spec.dense_corr, spec.dense_noise)
    atten = np.zeros(tissue.shape)
    atten[tissue] = fat[tissue]
    atten[dense] = glandular[dense]
    if pect.any():
        atten[pect] = spec.dense_base * 1.15 + _smoothed_noise(rng, tissue.shape, 3, spec.dense_noise)[pect]
    atten = np.clip(atten, 0.0, None)
    raw = np.clip(np.rint(spec.background_signal * np.exp(-atten)), 0, 65535).astype(np.uint16)

    labels = np.zeros(tissue.shape, dtype=np.uint8)
    labels[pect] = PECTORALIS
    labels[breast] = BREAST
    tissue_labels = labels.copy()
    tissue_labels[bump] = BREAST
    if spec.mirrored:
        raw, labels, dense = raw[:, ::-1], labels[:, ::-1], dense[:, ::-1]
        tissue_labels = tissue_labels[:, ::-1]
    meta = {"laterality": "R" if spec.mirrored else "L", "view": "MLO" if spec.pectoral else "CC",
            "source_id": f"phantom-{spec.seed}"}
    pd = 100.0 * int(dense.sum()) / area
    return Phantom(RawImage(np.ascontiguousarray(raw), meta), RegionMask(np.ascontiguousarray(labels)),
                   RegionMask(np.ascontiguousarray(tissue_labels)), np.ascontiguousarray(dense), pd, spec)


def generate_corpus(n: int, pd_range=(5.0, 40.0), seed: int = 0, out_dir=None, base_spec=None,
                    prefix: str = "ph", fmt: str = "pgm"):
    """Draw ``n`` phantoms with target PD uniform on ``pd_range``.

    When ``out_dir`` is given, writes ``<id>.<fmt>`` images, ``<id>.meta``
    sidecars, ground-truth breast masks under ``masks/`` and ``gold.csv``.
    Returns the list of ``(image_id, Phantom)`` pairs.
    """
    if n < 1:
        raise BreastPDError("corpus size must be at least 1")
    base_spec = base_spec or PhantomSpec()
    rng = np.random.default_rng(seed)
    pds = rng.uniform(pd_range[0], pd_range[1], size=n)
    seeds = rng.integers(0, 2**31 - 1, size=n)
    corpus = []
    for i in range(n):
        spec = replace(base_spec, seed=int(seeds[i]), target_pd=float(pds[i]))
        corpus.append((f"{prefix}{i:04d}", generate_phantom(spec)))
    if out_dir is not None:
        write_corpus(corpus, out_dir, fmt=fmt)
    return corpus


def write_corpus(corpus, out_dir, fmt: str = "pgm"):
    out = Path(out_dir)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    for image_id, ph in corpus:
        path = out / f"{image_id}.{fmt}"
        save_image(path, ph.image)
        meta = dict(ph.image.meta)
        meta["source_id"] = image_id
        write_meta(path, meta)
        write_mask(out / "masks" / f"{image_id}.{fmt}", ph.breast_mask)
    write_gold_csv(out / "gold.csv", [(image_id, ph.pd) for image_id, ph in corpus])


def write_gold_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["image_id", "gold_pd"])
        for image_id, pd in rows:
            writer.writerow([image_id, repr(float(pd))])


def spec_dict(spec: PhantomSpec) -> dict:
    return asdict(spec)
