"""SLIC superpixels restricted to the breast mask (single intensity channel)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from skimage.measure import label as label_regions

from .exceptions import SuperpixelError

NONE = -1


@dataclass(frozen=True)
class SuperpixelMap:
    labels: np.ndarray  # int32, NONE outside the breast
    n_requested: int
    centers: np.ndarray  # (n_labels, 3): row, col, mean intensity

    @property
    def n_labels(self) -> int:
        return int(self.centers.shape[0])

    def areas(self) -> np.ndarray:
        lab = self.labels[self.labels >= 0]
        return np.bincount(lab, minlength=self.n_labels)


def _grid_seeds(breast: np.ndarray, spacing: float):
    rows, cols = np.nonzero(breast)
    r0, r1 = rows.min(), rows.max()
    c0, c1 = cols.min(), cols.max()
    seeds = []
    i = 0
    r = r0 + spacing / 2.0
    while r <= r1 + 0.5:
        offset = spacing / 2.0 if i % 2 else 0.0
        c = c0 + spacing / 2.0 + offset
        while c <= c1 + 0.5:
            ri, ci = int(round(r)), int(round(c))
            ri, ci = min(ri, breast.shape[0] - 1), min(ci, breast.shape[1] - 1)
            if breast[ri, ci]:
                seeds.append((ri, ci))
            c += spacing
        r += spacing
        i += 1
    return seeds


def place_seeds(breast: np.ndarray, k: int):
    """Hexagonal-offset grid inside the mask with at most ``k`` seeds.

    Starts from spacing ``sqrt(area / k)`` and widens it (bisection on the
    spacing) until the in-mask seed count no longer exceeds ``k``.
    """
    area = int(breast.sum())
    base = np.sqrt(area / k)
    seeds = _grid_seeds(breast, base)
    if len(seeds) <= k:
        lo = None
        best = seeds
        hi = base
    else:
        lo, hi = base, base * 1.5
        while len(_grid_seeds(breast, hi)) > k:
            lo, hi = hi, hi * 1.5
        best = _grid_seeds(breast, hi)
        for _ in range(30):
            mid = 0.5 * (lo + hi)
            cand = _grid_seeds(breast, mid)
            if len(cand) > k:
                lo = mid
            else:
                hi, best = mid, cand
            if hi - lo < 1e-3:
                break
    if not best:
        rows, cols = np.nonzero(breast)
        mid = len(rows) // 2
        best = [(int(rows[mid]), int(cols[mid]))]
    return np.array(best, dtype=np.float64), base


def _assign(img, breast, centers, spacing, compactness):
    h, w = img.shape
    best = np.full((h, w), np.inf)
    labels = np.full((h, w), NONE, dtype=np.int32)
    win = int(np.ceil(spacing))
    scale = (compactness / spacing) ** 2
    for k, (cr, cc, ci) in enumerate(centers):
        r0, r1 = max(int(cr) - win, 0), min(int(cr) + win + 1, h)
        c0, c1 = max(int(cc) - win, 0), min(int(cc) + win + 1, w)
        rr = np.arange(r0, r1)[:, None] - cr
        cols = np.arange(c0, c1)[None, :] - cc
        d = (img[r0:r1, c0:c1] - ci) ** 2 + scale * (rr * rr + cols * cols)
        sub_best = best[r0:r1, c0:c1]
        closer = (d < sub_best) & breast[r0:r1, c0:c1]
        sub_best[closer] = d[closer]
        labels[r0:r1, c0:c1][closer] = k
    return labels


def _centers_from(img, labels, n):
    inside = labels >= 0
    lab = labels[inside]
    rows, cols = np.nonzero(inside)
    counts = np.bincount(lab, minlength=n).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        cr = np.bincount(lab, rows, n) / counts
        cc = np.bincount(lab, cols, n) / counts
        ci = np.bincount(lab, img[inside], n) / counts
    return np.column_stack([cr, cc, ci]), counts


def _enforce_connectivity(labels: np.ndarray, breast: np.ndarray, min_size: float = 0.0) -> np.ndarray:
    """Keep each label's largest 4-connected piece and merge the rest.

    A largest piece smaller than ``min_size`` pixels is merged as well.
    Fragments (and breast pixels no center reached) join the adjacent label
    with the largest area, ties to the lowest label; merging repeats until
    no fragment is left. Labels are then renumbered 0..n-1 in order.
    """
    work = labels.copy()
    work[~breast] = NONE
    comp = label_regions(work + 1, connectivity=1, background=0)
    n_comp = int(comp.max())
    comp_label = np.full(n_comp + 1, NONE, dtype=np.int64)
    flat_comp, flat_lab = comp.ravel(), work.ravel()
    sel = flat_comp > 0
    comp_label[flat_comp[sel]] = flat_lab[sel]
    comp_size = np.bincount(flat_comp, minlength=n_comp + 1)
    comp_size[0] = 0

    n_labels = int(labels.max()) + 1 if labels.max() >= 0 else 0
    keeper = np.zeros(n_comp + 1, dtype=bool)
    if n_labels:
        best_size = np.zeros(n_labels, dtype=np.int64)
        best_comp = np.zeros(n_labels, dtype=np.int64)
        for cid in range(1, n_comp + 1):
            lab = comp_label[cid]
            if lab >= 0 and comp_size[cid] > best_size[lab]:
                best_size[lab], best_comp[lab] = comp_size[cid], cid
        keeper[best_comp[best_size > 0]] = True
        keeper &= comp_size >= min_size
    # unreached breast pixels form their own orphan components
    orphan_mask = breast & (work == NONE)
    if orphan_mask.any():
        olab, n_orph = ndimage.label(orphan_mask, structure=ndimage.generate_binary_structure(2, 1))
        comp = np.where(olab > 0, olab + n_comp, comp)
        keeper = np.concatenate([keeper, np.zeros(n_orph, dtype=bool)])
        comp_label = np.concatenate([comp_label, np.full(n_orph, NONE)])
        comp_size = np.bincount(comp.ravel(), minlength=n_comp + n_orph + 1)
        comp_size[0] = 0
        n_comp += n_orph

    final = work.copy()
    final[~breast] = NONE
    pending = [cid for cid in range(1, n_comp + 1) if not keeper[cid] and comp_size[cid] > 0]
    if pending:
        objects = ndimage.find_objects(comp)
        h, w = labels.shape
        label_area = np.bincount(final[final >= 0], minlength=max(n_labels, 1)).astype(np.int64)
        while pending:
            progress = []
            for cid in pending:
                sl = objects[cid - 1]
                r0, r1 = max(sl[0].start - 1, 0), min(sl[0].stop + 1, h)
                c0, c1 = max(sl[1].start - 1, 0), min(sl[1].stop + 1, w)
                piece = comp[r0:r1, c0:c1] == cid
                ring = ndimage.binary_dilation(piece, structure=ndimage.generate_binary_structure(2, 1)) & ~piece
                neigh = final[r0:r1, c0:c1][ring]
                neigh_comp = comp[r0:r1, c0:c1][ring]
                # only merge into settled pixels
                ok = (neigh >= 0) & np.isin(neigh_comp, pending, invert=True)
                cands = np.unique(neigh[ok])
                if cands.size == 0:
                    continue
                target = int(cands[np.argmax(label_area[cands])])  # argmax takes the lowest index on ties
                sub = final[r0:r1, c0:c1]
                sub[piece] = target
                old = comp_label[cid]
                if old >= 0:
                    label_area[old] -= int(piece.sum())
                label_area[target] += int(piece.sum())
                progress.append(cid)
            if not progress:
                raise SuperpixelError("could not attach orphaned superpixel fragments")
            done = set(progress)
            pending = [cid for cid in pending if cid not in done]
    # renumber
    used = np.unique(final[final >= 0])
    remap = np.full(int(used.max()) + 2 if used.size else 1, NONE, dtype=np.int32)
    remap[used] = np.arange(used.size, dtype=np.int32)
    out = np.full(labels.shape, NONE, dtype=np.int32)
    out[final >= 0] = remap[final[final >= 0]]
    return out


def generate_superpixels(img, mask, k: int = 512, compactness: float = 0.1, iters: int = 10,
                         seed: int = 0) -> SuperpixelMap:
    """SLIC clustering of the breast pixels into at most ``k`` superpixels.

    Distance is ``sqrt(d_int**2 + (compactness * d_xy / S)**2)`` with
    ``S = sqrt(area / k)``, searched in a 2S x 2S window around each
    center. The seeding grid is deterministic, so ``seed`` does not change
    the result; it is kept so callers can pin it alongside other stages.
    """
    px = np.asarray(getattr(img, "pixels", img), dtype=np.float64)
    breast = mask.breast if hasattr(mask, "breast") else np.asarray(mask, bool)
    area = int(breast.sum())
    if area == 0:
        raise SuperpixelError("empty breast mask")
    if k < 2:
        raise SuperpixelError(f"K={k} must be at least 2")
    if k > area:
        raise SuperpixelError(f"K={k} exceeds breast area of {area} pixels")
    seeds, spacing = place_seeds(breast, k)
    centers = np.column_stack([seeds, px[seeds[:, 0].astype(int), seeds[:, 1].astype(int)]])
    labels = None
    for _ in range(max(iters, 1)):
        labels = _assign(px, breast, centers, spacing, compactness)
        new_centers, counts = _centers_from(px, labels, len(centers))
        empty = counts == 0
        new_centers[empty] = centers[empty]
        centers = new_centers
    labels = _enforce_connectivity(labels, breast, min_size=0.25 * area / k)
    n = int(labels.max()) + 1
    centers, _ = _centers_from(px, labels, n)
    return SuperpixelMap(labels, k, centers)


def superpixel_mean_intensities(img, sp: SuperpixelMap) -> np.ndarray:
    px = np.asarray(getattr(img, "pixels", img), dtype=np.float64)
    inside = sp.labels >= 0
    lab = sp.labels[inside]
    counts = np.bincount(lab, minlength=sp.n_labels)
    return np.bincount(lab, px[inside], sp.n_labels) / counts


def boundary_length(labels: np.ndarray) -> int:
    """Number of 4-neighbour pixel pairs carrying different labels."""
    return int(np.count_nonzero(labels[:, 1:] != labels[:, :-1]) + np.count_nonzero(labels[1:] != labels[:-1]))
