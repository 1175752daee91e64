"""First-order, GLCM and GLRLM texture descriptors.

Every routine works on a label field: pixels with label ``l >= 0`` belong
to region ``l`` and descriptors come back as ``(n_regions,)`` arrays. A
single region is just a label field with one label.
"""

from __future__ import annotations

import numpy as np

FIRST_ORDER_NAMES = (
    "mean", "median", "std", "variance", "skewness", "kurtosis", "min", "max", "range",
    "p10", "p25", "p75", "p90", "iqr", "mad", "rms", "energy", "entropy", "uniformity",
)
GLCM_NAMES = (
    "contrast", "dissimilarity", "homogeneity", "asm", "energy", "entropy", "correlation",
    "cluster_shade", "cluster_prominence", "max_probability", "sum_average",
)
GLRLM_NAMES = (
    "sre", "lre", "gln", "rln", "rp", "lglre", "hglre", "srlgle", "srhgle", "lrlgle", "lrhgle",
)

# (d_row, d_col) per angle in degrees, rows pointing down
ANGLE_OFFSETS = {0: (0, 1), 45: (-1, 1), 90: (-1, 0), 135: (-1, -1)}
# run directions keyed by angle in degrees
RUN_OFFSETS = {0: (0, 1), 45: (-1, 1), 90: (1, 0), 135: (1, 1)}
RUN_DIRECTIONS = tuple(RUN_OFFSETS.values())


def _label_stats(values, lab, n):
    counts = np.bincount(lab, minlength=n).astype(np.float64)
    mn = np.full(n, np.inf)
    mx = np.full(n, -np.inf)
    np.minimum.at(mn, lab, values)
    np.maximum.at(mx, lab, values)
    return counts, mn, mx


def quantize(image, labels, levels):
    """Equal-width gray levels ``0..levels-1`` over each region's min-max.

    Pixels outside every region get -1; constant regions map to level 0.
    """
    image = np.asarray(image, dtype=np.float64)
    labels = np.asarray(labels)
    n = int(labels.max()) + 1 if labels.size and labels.max() >= 0 else 0
    q = np.full(labels.shape, -1, dtype=np.int64)
    inside = labels >= 0
    if n == 0:
        return q, 0
    lab = labels[inside]
    vals = image[inside]
    _, mn, mx = _label_stats(vals, lab, n)
    rng = mx - mn
    span = rng[lab]
    with np.errstate(invalid="ignore", divide="ignore"):
        scaled = np.where(span > 0, (vals - mn[lab]) / span, 0.0)
    q[inside] = np.clip(np.floor(scaled * levels).astype(np.int64), 0, levels - 1)
    return q, n


# ---------------------------------------------------------------- first order


def first_order_batch(image, labels, n=None):
    """Return ``(n_regions, 19)`` first-order statistics in FIRST_ORDER_NAMES order."""
    image = np.asarray(image, dtype=np.float64)
    labels = np.asarray(labels)
    if n is None:
        n = int(labels.max()) + 1
    inside = labels >= 0
    lab = labels[inside]
    vals = image[inside]
    counts, mn, mx = _label_stats(vals, lab, n)
    safe = np.maximum(counts, 1)
    mean = np.bincount(lab, vals, n) / safe
    dev = vals - mean[lab]
    var = np.bincount(lab, dev * dev, n) / safe
    m3 = np.bincount(lab, dev ** 3, n) / safe
    m4 = np.bincount(lab, dev ** 4, n) / safe
    constant = mx <= mn
    var = np.where(constant, 0.0, var)
    std = np.sqrt(var)
    with np.errstate(invalid="ignore", divide="ignore"):
        skew = np.where(var > 0, m3 / var ** 1.5, 0.0)
        kurt = np.where(var > 0, m4 / (var * var) - 3.0, 0.0)
    mad = np.where(constant, 0.0, np.bincount(lab, np.abs(dev), n) / safe)
    energy = np.bincount(lab, vals * vals, n)
    rms = np.sqrt(energy / safe)

    order = np.lexsort((vals, lab))
    sorted_vals = vals[order]
    starts = np.concatenate([[0], np.cumsum(counts.astype(np.int64))[:-1]])
    cnt = counts.astype(np.int64)

    def pct(q):
        pos = q / 100.0 * (np.maximum(cnt, 1) - 1)
        lo = np.floor(pos).astype(np.int64)
        hi = np.minimum(lo + 1, np.maximum(cnt, 1) - 1)
        frac = pos - lo
        idx_lo = np.minimum(starts + lo, len(sorted_vals) - 1)
        idx_hi = np.minimum(starts + hi, len(sorted_vals) - 1)
        a, b = sorted_vals[idx_lo], sorted_vals[idx_hi]
        return a + frac * (b - a)

    p10, p25, p50, p75, p90 = (pct(q) for q in (10, 25, 50, 75, 90))

    span = (mx - mn)[lab]
    with np.errstate(invalid="ignore", divide="ignore"):
        scaled = np.where(span > 0, (vals - mn[lab]) / span, 0.0)
    bins = np.clip(np.floor(scaled * 256).astype(np.int64), 0, 255)
    hist = np.bincount(lab * 256 + bins, minlength=n * 256).reshape(n, 256) / safe[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(hist > 0, hist * np.log2(hist), 0.0)
    entropy = -plogp.sum(axis=1) + 0.0
    uniformity = (hist * hist).sum(axis=1)

    out = np.column_stack([
        mean, p50, std, var, skew, kurt, mn, mx, mx - mn, p10, p25, p75, p90, p75 - p25,
        mad, rms, energy, entropy, uniformity,
    ])
    out[counts == 0] = 0.0
    return out


# ---------------------------------------------------------------- GLCM


def glcm_batch(q, labels, n, levels, distance, angle):
    """Symmetric, normalized co-occurrence matrices ``(n, levels, levels)``.

    Only pairs with both pixels in the same region are counted. Also
    returns the raw pair counts per region so callers can spot regions
    without any valid pair.
    """
    dr, dc = ANGLE_OFFSETS[angle]
    dr, dc = dr * distance, dc * distance
    h, w = q.shape
    r0, r1 = max(0, -dr), min(h, h - dr)
    c0, c1 = max(0, -dc), min(w, w - dc)
    if r1 <= r0 or c1 <= c0:
        return np.zeros((n, levels, levels)), np.zeros(n)
    a_lab = labels[r0:r1, c0:c1]
    b_lab = labels[r0 + dr : r1 + dr, c0 + dc : c1 + dc]
    a_q = q[r0:r1, c0:c1]
    b_q = q[r0 + dr : r1 + dr, c0 + dc : c1 + dc]
    ok = (a_lab >= 0) & (a_lab == b_lab)
    lab = a_lab[ok].astype(np.int64)
    qi, qj = a_q[ok], b_q[ok]
    size = n * levels * levels
    counts = np.bincount(lab * levels * levels + qi * levels + qj, minlength=size).astype(np.float64)
    counts = counts.reshape(n, levels, levels)
    counts = counts + counts.transpose(0, 2, 1)
    pairs = counts.sum(axis=(1, 2))
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(pairs[:, None, None] > 0, counts / pairs[:, None, None], 0.0)
    return p, pairs


def glcm_descriptors(p):
    """Eleven descriptors for a stack of normalized GLCMs ``(n, L, L)``."""
    n, levels, _ = p.shape
    i = np.arange(1, levels + 1, dtype=np.float64)
    ii, jj = np.meshgrid(i, i, indexing="ij")
    diff = ii - jj
    px = p.sum(axis=2)
    py = p.sum(axis=1)
    mux = px @ i
    muy = py @ i
    sx = np.sqrt(np.maximum(px @ (i * i) - mux * mux, 0.0))
    sy = np.sqrt(np.maximum(py @ (i * i) - muy * muy, 0.0))
    contrast = np.einsum("nij,ij->n", p, diff * diff)
    dissim = np.einsum("nij,ij->n", p, np.abs(diff))
    homog = np.einsum("nij,ij->n", p, 1.0 / (1.0 + np.abs(diff)))
    asm = np.einsum("nij,nij->n", p, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        entropy = -np.where(p > 0, p * np.log2(p), 0.0).sum(axis=(1, 2)) + 0.0
    cross = np.einsum("nij,ij->n", p, ii * jj)
    denom = sx * sy
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = np.where(denom > 1e-15, (cross - mux * muy) / denom, 1.0)
    centred = (ii + jj)[None] - (mux + muy)[:, None, None]
    shade = np.einsum("nij,nij->n", p, centred ** 3)
    prom = np.einsum("nij,nij->n", p, centred ** 4)
    maxp = p.reshape(n, -1).max(axis=1) if levels else np.zeros(n)
    sumavg = np.einsum("nij,ij->n", p, ii + jj)
    return np.column_stack([contrast, dissim, homog, asm, np.sqrt(asm), entropy, corr, shade, prom, maxp, sumavg])


def glcm_features_batch(image, labels, levels=32, distances=(1, 2, 3), angles=(0, 45, 90, 135), q=None, n=None):
    """Descriptors averaged over angles, one block of 11 per distance.

    Returns ``(values (n, 11 * len(distances)), valid (n, len(distances)))``
    where ``valid`` marks regions with at least one pair at that distance.
    """
    labels = np.asarray(labels)
    if q is None:
        q, n = quantize(image, labels, levels)
    blocks, valid = [], []
    for d in distances:
        total = np.zeros((n, len(GLCM_NAMES)))
        used = np.zeros(n)
        for a in angles:
            p, pairs = glcm_batch(q, labels, n, levels, d, a)
            has = pairs > 0
            desc = glcm_descriptors(p)
            total[has] += desc[has]
            used += has
        with np.errstate(invalid="ignore", divide="ignore"):
            blocks.append(np.where(used[:, None] > 0, total / np.maximum(used, 1)[:, None], 0.0))
        valid.append(used > 0)
    return np.hstack(blocks), np.column_stack(valid)


# ---------------------------------------------------------------- GLRLM


def run_lengths(q, labels, direction):
    """All maximal runs of equal level inside one region along ``direction``.

    Returns arrays ``(region, level, length)``, one entry per run.
    """
    dr, dc = direction
    rows, cols = np.nonzero(labels >= 0)
    if rows.size == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty
    if (dr, dc) == (0, 1):
        key, pos = rows, cols
    elif (dr, dc) == (1, 0):
        key, pos = cols, rows
    elif (dr, dc) == (1, 1):
        key, pos = cols - rows, rows
    elif (dr, dc) == (-1, 1):
        key, pos = rows + cols, cols
    else:
        raise ValueError(f"unsupported run direction {direction}")
    order = np.lexsort((pos, key))
    key, pos = key[order], pos[order]
    lab = labels[rows[order], cols[order]].astype(np.int64)
    lev = q[rows[order], cols[order]]
    cont = np.zeros(key.size, dtype=bool)
    cont[1:] = (key[1:] == key[:-1]) & (pos[1:] == pos[:-1] + 1) & (lab[1:] == lab[:-1]) & (lev[1:] == lev[:-1])
    starts = np.flatnonzero(~cont)
    lengths = np.diff(np.append(starts, key.size))
    return lab[starts], lev[starts], lengths


def glrlm_batch(q, labels, n, levels, direction):
    region, level, length = run_lengths(q, labels, direction)
    max_len = int(length.max()) if length.size else 1
    idx = (region * levels + level) * max_len + (length - 1)
    mat = np.bincount(idx, minlength=n * levels * max_len).astype(np.float64)
    return mat.reshape(n, levels, max_len)


def glrlm_descriptors(mat, n_pixels):
    n, levels, max_len = mat.shape
    i = np.arange(1, levels + 1, dtype=np.float64)[None, :, None]
    j = np.arange(1, max_len + 1, dtype=np.float64)[None, None, :]
    nr = mat.sum(axis=(1, 2))
    safe = np.maximum(nr, 1e-300)

    def w(weight):
        return (mat * weight).sum(axis=(1, 2)) / safe

    sre = w(1.0 / j ** 2)
    lre = w(j ** 2)
    gln = (mat.sum(axis=2) ** 2).sum(axis=1) / safe
    rln = (mat.sum(axis=1) ** 2).sum(axis=1) / safe
    with np.errstate(invalid="ignore", divide="ignore"):
        rp = np.where(n_pixels > 0, nr / np.maximum(n_pixels, 1), 0.0)
    out = np.column_stack([
        sre, lre, gln, rln, rp, w(1.0 / i ** 2), w(i ** 2), w(1.0 / (i ** 2 * j ** 2)),
        w(i ** 2 / j ** 2), w(j ** 2 / i ** 2), w(i ** 2 * j ** 2),
    ])
    out[nr == 0] = 0.0
    return out


def glrlm_features_batch(image, labels, levels=32, directions=RUN_DIRECTIONS, q=None, n=None):
    labels = np.asarray(labels)
    if q is None:
        q, n = quantize(image, labels, levels)
    n_pixels = np.bincount(labels[labels >= 0], minlength=n).astype(np.float64)
    total = np.zeros((n, len(GLRLM_NAMES)))
    for d in directions:
        total += glrlm_descriptors(glrlm_batch(q, labels, n, levels, d), n_pixels)
    return total / len(directions)
