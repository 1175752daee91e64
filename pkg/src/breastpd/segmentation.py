"""Breast region masks: external mask ingestion, a classical background
fallback, abdominal bump removal and final single-component cleanup."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from skimage.filters import threshold_otsu

from .exceptions import MaskError, SegmentationError
from .imaging import read_raster, write_raster

BACKGROUND = 0
PECTORALIS = 128
BREAST = 255
LABEL_VALUES = (BACKGROUND, PECTORALIS, BREAST)

FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True)
class RegionMask:
    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.uint8)
        bad = ~np.isin(lab, LABEL_VALUES)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise MaskError(f"illegal label value {lab[r, c]} at pixel ({r}, {c})")
        lab = lab.copy()
        lab.flags.writeable = False
        object.__setattr__(self, "labels", lab)

    @property
    def shape(self):
        return self.labels.shape

    @property
    def breast(self) -> np.ndarray:
        return self.labels == BREAST

    @property
    def breast_area(self) -> int:
        return int(np.count_nonzero(self.labels == BREAST))

    @classmethod
    def from_breast(cls, breast: np.ndarray, pectoralis=None):
        lab = np.zeros(np.shape(breast), dtype=np.uint8)
        if pectoralis is not None:
            lab[np.asarray(pectoralis, bool)] = PECTORALIS
        lab[np.asarray(breast, bool)] = BREAST
        return cls(lab)


def largest_component(binary: np.ndarray) -> np.ndarray:
    """Largest 4-connected component; ties go to the lowest component index."""
    lab, n = ndimage.label(binary, structure=FOUR_CONNECTED)
    if n == 0:
        return np.zeros_like(binary, dtype=bool)
    sizes = np.bincount(lab.ravel())[1:]
    return lab == (int(np.argmax(sizes)) + 1)


def _touches_border(lab: np.ndarray) -> np.ndarray:
    edge = np.concatenate([lab[0], lab[-1], lab[:, 0], lab[:, -1]])
    return np.unique(edge[edge > 0])


def segment_background_classical(img) -> RegionMask:
    """Otsu foreground plus the boundary-connectivity refinement.

    The threshold is computed on the square root of the [0, 1] intensities:
    squaring during preprocessing pushes fat toward air, and on the squared
    scale Otsu tends to split fat from dense tissue once dense area is large.
    Background candidates not connected to any of the four image edges are
    given back to the foreground; the largest 4-connected foreground
    component becomes the breast.
    """
    px = np.sqrt(np.clip(np.asarray(img.pixels, dtype=np.float64), 0.0, None))
    if px.size == 0 or px.max() == px.min():
        raise SegmentationError("no foreground found")
    t = threshold_otsu(px)
    foreground = px > t
    cand_lab, n = ndimage.label(~foreground, structure=FOUR_CONNECTED)
    keep = np.zeros(n + 1, dtype=bool)
    keep[_touches_border(cand_lab)] = True
    background = keep[cand_lab] & (cand_lab > 0)
    foreground = ~background
    breast = largest_component(foreground)
    if not breast.any():
        raise SegmentationError("no foreground found")
    return RegionMask.from_breast(breast)


def ingest_mask(path, img) -> RegionMask:
    """Map an 8-bit 0/128/255 mask file onto region labels."""
    raw = read_raster(path, bit_depth=8)
    if raw.shape != tuple(img.shape):
        raise MaskError(f"{path}: mask shape {raw.shape} does not match image shape {tuple(img.shape)}")
    bad = ~np.isin(raw, LABEL_VALUES)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise MaskError(f"{path}: illegal mask value {raw[r, c]} at pixel ({r}, {c})")
    return RegionMask(raw)


def write_mask(path, mask: RegionMask):
    write_raster(path, mask.labels, bit_depth=8)


def finalize_breast_mask(mask: RegionMask) -> RegionMask:
    """Keep the largest breast component; everything else becomes background."""
    breast = mask.breast
    if not breast.any():
        raise SegmentationError("empty breast region")
    return RegionMask.from_breast(largest_component(breast))


# ---------------------------------------------------------------- contour

# clockwise from west
_MOORE = ((0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1))


def _moore_trace(binary: np.ndarray):
    padded = np.pad(binary.astype(bool), 1)
    nz = np.flatnonzero(padded)
    if nz.size == 0:
        return []
    start = divmod(int(nz[0]), padded.shape[1])
    contour = [start]
    cur, back = start, 0  # start is the first pixel in raster order: west is empty
    first_move = None
    for _ in range(4 * padded.size):
        nxt = None
        for k in range(1, 9):
            d = (back + k) % 8
            cand = (cur[0] + _MOORE[d][0], cur[1] + _MOORE[d][1])
            if padded[cand]:
                prev_d = (back + k - 1) % 8
                bg = (cur[0] + _MOORE[prev_d][0], cur[1] + _MOORE[prev_d][1])
                nxt = cand
                delta = (bg[0] - cand[0], bg[1] - cand[1])
                back = _MOORE.index(delta)
                break
        if nxt is None:
            break  # isolated pixel
        if first_move is None:
            first_move = (cur, nxt)
        elif (cur, nxt) == first_move:
            contour.pop()
            break
        contour.append(nxt)
        cur = nxt
    return [(r - 1, c - 1) for r, c in contour]


def trace_contour(mask) -> list:
    """Outer boundary of the breast region with the chest wall excluded.

    Returns ``(row, col)`` points in tracing order; consecutive points are
    8-adjacent. Points on the image's left edge (the chest wall after
    orientation standardization) are removed and the longest remaining run
    is returned.
    """
    breast = mask.breast if isinstance(mask, RegionMask) else np.asarray(mask, bool)
    loop = _moore_trace(breast)
    if not loop:
        return []
    wall = [c == 0 for _, c in loop]
    if not any(wall):
        return loop
    if all(wall):
        return []
    n = len(loop)
    # rotate so the loop starts just after a wall point
    first = next(i for i in range(n) if wall[i] and not wall[(i + 1) % n])
    rotated = loop[first + 1 :] + loop[: first + 1]
    flags = wall[first + 1 :] + wall[: first + 1]
    best, run = [], []
    for pt, is_wall in zip(rotated, flags):
        if is_wall:
            if len(run) > len(best):
                best = run
            run = []
        else:
            run.append(pt)
    if len(run) > len(best):
        best = run
    return best


def contour_profile(breast: np.ndarray):
    """Rightmost contour column for each row of the breast's vertical extent."""
    rows = np.flatnonzero(breast.any(axis=1))
    top, bottom = int(rows[0]), int(rows[-1])
    profile = np.full(bottom - top + 1, -1, dtype=np.int64)
    for r, c in trace_contour(breast):
        if top <= r <= bottom and c > profile[r - top]:
            profile[r - top] = c
    missing = profile < 0
    if missing.any():
        # rows whose only boundary pixels sit on the chest wall
        last = breast.shape[1] - 1 - np.argmax(breast[top : bottom + 1, ::-1], axis=1)
        profile[missing] = last[missing]
    return top, profile


def _bump_row(breast: np.ndarray, window: int, bottom_fraction: float):
    top, profile = contour_profile(breast)
    height = profile.size
    if height < 3:
        return None
    smooth = ndimage.uniform_filter1d(profile.astype(np.float64), size=window, mode="nearest")
    diff = np.diff(smooth)
    widest = int(np.argmax(profile))
    start = max(widest, int(np.ceil((1.0 - bottom_fraction) * height)) - 1, 0)
    shrinking = False
    for i in range(start, diff.size):
        if diff[i] < -1e-9:
            shrinking = True
        elif diff[i] > 1e-9 and shrinking:
            return top + i
    return None


def remove_abdominal_bump(mask: RegionMask, window: int = 15, bottom_fraction: float = 0.25,
                          max_passes: int = 25) -> RegionMask:
    """Cut off a paddle-compression bump below the breast.

    The rightmost contour column is smoothed along rows (moving average of
    ``window`` rows) and differenced. In the bottom ``bottom_fraction`` of
    the breast's vertical extent and below its widest row, a switch from
    shrinking to growing marks a bump; breast pixels below that row are
    set to background. Repeats until no bump is found, so the result is a
    fixed point.
    """
    breast = mask.breast.copy()
    if not breast.any():
        return mask
    changed = False
    for _ in range(max_passes):
        row = _bump_row(breast, window, bottom_fraction)
        if row is None:
            break
        breast[row + 1 :, :] = False
        changed = True
    if not changed:
        return mask
    labels = mask.labels.copy()
    labels[(labels == BREAST) & ~breast] = BACKGROUND
    return RegionMask(labels)
