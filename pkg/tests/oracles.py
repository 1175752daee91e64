"""Slow, loop-based reference implementations used as test oracles.

None of these call into the package; each follows the textbook definition
pixel by pixel or pair by pair.
"""

import itertools
import math

import numpy as np


# ---------------------------------------------------------------- texture

def quantize_region(image, mask, levels):
    vals = [image[r, c] for r in range(image.shape[0]) for c in range(image.shape[1]) if mask[r, c]]
    lo, hi = min(vals), max(vals)
    q = np.full(image.shape, -1, dtype=int)
    for r in range(image.shape[0]):
        for c in range(image.shape[1]):
            if mask[r, c]:
                if hi == lo:
                    q[r, c] = 0
                else:
                    q[r, c] = min(int(math.floor((image[r, c] - lo) / (hi - lo) * levels)), levels - 1)
    return q


def glcm_pairs(q, mask, levels, dr, dc):
    """Symmetric co-occurrence counts by enumerating every ordered pixel pair."""
    m = np.zeros((levels, levels))
    h, w = q.shape
    for r in range(h):
        for c in range(w):
            r2, c2 = r + dr, c + dc
            if 0 <= r2 < h and 0 <= c2 < w and mask[r, c] and mask[r2, c2]:
                m[q[r, c], q[r2, c2]] += 1
                m[q[r2, c2], q[r, c]] += 1
    return m


def glcm_descriptor_dict(m):
    total = m.sum()
    p = m / total
    L = p.shape[0]
    g = range(L)
    px = [sum(p[i, j] for j in g) for i in g]
    mux = sum((i + 1) * px[i] for i in g)
    muy = mux  # symmetric matrix
    varx = sum((i + 1 - mux) ** 2 * px[i] for i in g)
    out = dict(contrast=0.0, dissimilarity=0.0, homogeneity=0.0, asm=0.0, entropy=0.0, cov=0.0,
               cluster_shade=0.0, cluster_prominence=0.0, sum_average=0.0)
    for i in g:
        for j in g:
            v = p[i, j]
            a, b = i + 1, j + 1
            out["contrast"] += v * (a - b) ** 2
            out["dissimilarity"] += v * abs(a - b)
            out["homogeneity"] += v / (1 + abs(a - b))
            out["asm"] += v * v
            if v > 0:
                out["entropy"] -= v * math.log2(v)
            out["cov"] += v * (a - mux) * (b - muy)
            out["cluster_shade"] += v * (a + b - mux - muy) ** 3
            out["cluster_prominence"] += v * (a + b - mux - muy) ** 4
            out["sum_average"] += v * (a + b)
    out["energy"] = math.sqrt(out["asm"])
    out["correlation"] = out.pop("cov") / varx if varx > 1e-15 else 1.0
    out["max_probability"] = p.max()
    return out


def glcm_region_features(image, mask, levels, distances, offsets):
    """Angle-averaged descriptors per distance, like the package's GLCM block."""
    q = quantize_region(image, mask, levels)
    names = ("contrast", "dissimilarity", "homogeneity", "asm", "energy", "entropy", "correlation",
             "cluster_shade", "cluster_prominence", "max_probability", "sum_average")
    out = []
    for d in distances:
        acc = np.zeros(len(names))
        used = 0
        for dr, dc in offsets:
            m = glcm_pairs(q, mask, levels, dr * d, dc * d)
            if m.sum() == 0:
                continue
            desc = glcm_descriptor_dict(m)
            acc += [desc[n] for n in names]
            used += 1
        out.extend(acc / used if used else acc)
    return np.array(out)


def runs_along(q, mask, dr, dc):
    """Every maximal run as (level, length): walk from each run start pixel."""
    runs = []
    h, w = q.shape
    for r in range(h):
        for c in range(w):
            if not mask[r, c]:
                continue
            pr, pc = r - dr, c - dc
            if 0 <= pr < h and 0 <= pc < w and mask[pr, pc] and q[pr, pc] == q[r, c]:
                continue  # not a run start
            length = 0
            rr, cc = r, c
            while 0 <= rr < h and 0 <= cc < w and mask[rr, cc] and q[rr, cc] == q[r, c]:
                length += 1
                rr += dr
                cc += dc
            runs.append((int(q[r, c]), length))
    return runs


def glrlm_region_features(image, mask, levels, directions):
    q = quantize_region(image, mask, levels)
    n_pix = int(mask.sum())
    acc = np.zeros(11)
    for dr, dc in directions:
        runs = runs_along(q, mask, dr, dc)
        nr = len(runs)
        by_level, by_len = {}, {}
        for lev, ln in runs:
            by_level[lev] = by_level.get(lev, 0) + 1
            by_len[ln] = by_len.get(ln, 0) + 1
        s = lambda f: sum(f(lev + 1, ln) for lev, ln in runs) / nr  # noqa: E731
        acc += [
            s(lambda i, j: 1 / j ** 2), s(lambda i, j: j ** 2),
            sum(v * v for v in by_level.values()) / nr, sum(v * v for v in by_len.values()) / nr,
            nr / n_pix, s(lambda i, j: 1 / i ** 2), s(lambda i, j: i ** 2),
            s(lambda i, j: 1 / (i ** 2 * j ** 2)), s(lambda i, j: i ** 2 / j ** 2),
            s(lambda i, j: j ** 2 / i ** 2), s(lambda i, j: i ** 2 * j ** 2),
        ]
    return acc / len(directions)


def first_order_naive(values):
    v = sorted(float(x) for x in values)
    n = len(v)
    mean = sum(v) / n
    var = sum((x - mean) ** 2 for x in v) / n
    std = math.sqrt(var)

    def pct(q):
        pos = q / 100 * (n - 1)
        lo = int(math.floor(pos))
        hi = min(lo + 1, n - 1)
        return v[lo] + (pos - lo) * (v[hi] - v[lo])

    lo, hi = v[0], v[-1]
    counts = [0] * 256
    for x in v:
        b = 0 if hi == lo else min(int(math.floor((x - lo) / (hi - lo) * 256)), 255)
        counts[b] += 1
    probs = [c / n for c in counts if c]
    return {
        "mean": mean, "median": pct(50), "std": std, "variance": var,
        "skewness": (sum((x - mean) ** 3 for x in v) / n) / var ** 1.5 if var > 0 else 0.0,
        "kurtosis": (sum((x - mean) ** 4 for x in v) / n) / var ** 2 - 3 if var > 0 else 0.0,
        "min": lo, "max": hi, "range": hi - lo, "p10": pct(10), "p25": pct(25), "p75": pct(75),
        "p90": pct(90), "iqr": pct(75) - pct(25), "mad": sum(abs(x - mean) for x in v) / n,
        "rms": math.sqrt(sum(x * x for x in v) / n), "energy": sum(x * x for x in v),
        "entropy": -sum(p * math.log2(p) for p in probs), "uniformity": sum(p * p for p in probs),
    }


# ---------------------------------------------------------------- metrics

def dice_count(p, r):
    inter = sp = sr = 0
    for a, b in zip(np.ravel(p), np.ravel(r)):
        inter += bool(a) and bool(b)
        sp += bool(a)
        sr += bool(b)
    return 1.0 if sp + sr == 0 else 2 * inter / (sp + sr)


def sensitivity_count(p, r):
    inter = sr = 0
    for a, b in zip(np.ravel(p), np.ravel(r)):
        inter += bool(a) and bool(b)
        sr += bool(b)
    return 1.0 if sr == 0 else inter / sr


def weighted_count(pred, ref, score):
    """Inverse-frequency weighted score in exact fractions, rounded once at the end."""
    from fractions import Fraction

    flat = list(np.ravel(ref))
    classes = sorted(set(flat))
    n = len(flat)
    inv = {c: Fraction(n, flat.count(c)) for c in classes}
    tot = sum(inv.values())
    total = Fraction(0)
    for c in classes:
        p = np.ravel(np.asarray(pred) == c)
        r = np.ravel(np.asarray(ref) == c)
        inter = sum(1 for a, b in zip(p, r) if a and b)
        total += inv[c] / tot * score(inter, int(p.sum()), int(r.sum()))
    return float(total)


def dice_fraction(inter, n_pred, n_ref):
    from fractions import Fraction

    return Fraction(1) if n_pred + n_ref == 0 else Fraction(2 * inter, n_pred + n_ref)


def sensitivity_fraction(inter, n_pred, n_ref):
    from fractions import Fraction

    return Fraction(1) if n_ref == 0 else Fraction(inter, n_ref)


def trapezoid_auc(scores, labels):
    """Area under the empirical ROC by sweeping distinct thresholds from high to low."""
    scores = list(map(float, scores))
    labels = list(map(int, labels))
    P = sum(labels)
    N = len(labels) - P
    pts = [(0.0, 0.0)]
    for t in sorted(set(scores), reverse=True):
        tp = sum(1 for s, y in zip(scores, labels) if s >= t and y == 1)
        fp = sum(1 for s, y in zip(scores, labels) if s >= t and y == 0)
        pts.append((fp / N, tp / P))
    return sum((x1 - x0) * (y0 + y1) / 2 for (x0, y0), (x1, y1) in zip(pts, pts[1:]))


def mann_whitney_enumeration(a, b):
    """Two-sided exact p by listing every assignment of pooled values to group a."""
    pooled = list(a) + list(b)
    n, na = len(pooled), len(a)

    def u_of(idx):
        chosen = set(idx)
        xa = [pooled[i] for i in idx]
        xb = [pooled[i] for i in range(n) if i not in chosen]
        return sum((x > y) + 0.5 * (x == y) for x in xa for y in xb)

    u_obs = u_of(range(na))
    center = na * (n - na) / 2
    us = [u_of(c) for c in itertools.combinations(range(n), na)]
    extreme = sum(1 for u in us if abs(u - center) >= abs(u_obs - center) - 1e-12)
    return u_obs, extreme / len(us)


def clogit_loglik(beta, x, strata, case):
    ll = 0.0
    for s in sorted(set(strata)):
        idx = [i for i, t in enumerate(strata) if t == s]
        num = sum(beta * x[i] for i in idx if case[i])
        ll += num - math.log(sum(math.exp(beta * x[i]) for i in idx))
    return ll


def clogit_grid(x, strata, case, lo=-6.0, hi=6.0):
    """Maximize the 1-D conditional likelihood by successively finer grids."""
    x = np.asarray(x, float)
    best = 0.0
    width = hi - lo
    center = (lo + hi) / 2
    for _ in range(8):
        grid = np.linspace(center - width / 2, center + width / 2, 201)
        vals = [clogit_loglik(b, x, strata, case) for b in grid]
        best = float(grid[int(np.argmax(vals))])
        center, width = best, width / 20
    return best


def calibration_sweep(by_image, gold, grid_size=1024):
    """Exhaustive cutoff sweep with plain Python sums and the smaller-cutoff tie rule."""
    grid = np.linspace(0.0, 1.0, grid_size)
    target = sum(g for _, g in gold) / len(gold)
    best_c, best_err, best_pd = None, None, None
    for c in grid:
        pds = []
        for image_id, _ in gold:
            means, areas = by_image[image_id]
            dense = sum(int(a) for m, a in zip(means, areas) if m >= c)
            pds.append(100.0 * dense / sum(int(a) for a in areas))
        overall = math.fsum(pds) / len(pds)
        err = abs(overall - target)
        if best_err is None or err < best_err:
            best_c, best_err, best_pd = float(c), err, overall
    return best_c, best_pd


def svm_dual_qp(K, y, Cvec):
    """Dense QP solution of the soft-margin dual with cvxopt."""
    from cvxopt import matrix, solvers

    n = len(y)
    P = matrix(np.outer(y, y) * K)
    q = matrix(-np.ones(n))
    G = matrix(np.vstack([-np.eye(n), np.eye(n)]))
    h = matrix(np.concatenate([np.zeros(n), Cvec]))
    A = matrix(y.astype(float)[None, :])
    solvers.options["show_progress"] = False
    solvers.options["abstol"] = 1e-12
    solvers.options["reltol"] = 1e-12
    solvers.options["feastol"] = 1e-12
    sol = solvers.qp(P, q, G, h, A, matrix(0.0))
    a = np.array(sol["x"]).ravel()
    return a, 0.5 * a @ (np.outer(y, y) * K) @ a - a.sum()
