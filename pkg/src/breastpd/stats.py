"""Segmentation overlap metrics and matched case-control statistics."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog
from scipy.special import comb
from scipy.stats import norm, rankdata

from ._validation import check_same_shape
from .exceptions import BreastPDError, ConvergenceError, DomainError, SeparationError
from .segmentation import RegionMask

CASE = "CASE"
CONTROL = "CONTROL"
EXACT_MW_LIMIT = 16


# ------------------------------------------------------------ overlap metrics

def _labels(m):
    return m.labels if isinstance(m, RegionMask) else np.asarray(m)


def _binary(pred, ref, cls):
    p, r = check_same_shape(_labels(pred), _labels(ref))
    if cls is None:
        return p.astype(bool), r.astype(bool)
    return p == cls, r == cls


def dice(pred, ref, cls=None) -> float:
    """``2|P&R| / (|P|+|R|)``; 1 when both are empty.

    With ``cls`` set, P and R are the pixels carrying that label.
    """
    p, r = _binary(pred, ref, cls)
    denom = int(p.sum()) + int(r.sum())
    if denom == 0:
        return 1.0
    return 2.0 * int((p & r).sum()) / denom


def sensitivity(pred, ref, cls=None) -> float:
    """``|P&R| / |R|``; 1 when R is empty."""
    p, r = _binary(pred, ref, cls)
    nr = int(r.sum())
    if nr == 0:
        return 1.0
    return int((p & r).sum()) / nr


def _class_weight_fractions(r, classes):
    if classes is None:
        classes = np.unique(r).tolist()
    counts = {c: int((r == c).sum()) for c in classes}
    present = {c: n for c, n in counts.items() if n > 0}
    if not present:
        raise BreastPDError("reference mask holds none of the requested classes")
    inv = {c: Fraction(r.size, n) for c, n in present.items()}
    total = sum(inv.values())
    return {c: v / total for c, v in inv.items()}


def class_weights(ref, classes=None) -> dict:
    """Inverse pixel-frequency weights of the classes present in ``ref``, summing to 1."""
    return {c: float(w) for c, w in _class_weight_fractions(_labels(ref), classes).items()}


def _weighted(pred, ref, classes, score):
    # exact rational arithmetic, rounded once, so the result does not depend on summation order
    p, r = check_same_shape(_labels(pred), _labels(ref))
    w = _class_weight_fractions(r, classes)
    return float(sum(wc * score(p == c, r == c) for c, wc in w.items()))


def _dice_fraction(p, r):
    denom = int(p.sum()) + int(r.sum())
    return Fraction(1) if denom == 0 else Fraction(2 * int((p & r).sum()), denom)


def _sensitivity_fraction(p, r):
    nr = int(r.sum())
    return Fraction(1) if nr == 0 else Fraction(int((p & r).sum()), nr)


def weighted_dice(pred, ref, classes=None) -> float:
    return _weighted(pred, ref, classes, _dice_fraction)


def weighted_sensitivity(pred, ref, classes=None) -> float:
    return _weighted(pred, ref, classes, _sensitivity_fraction)


@dataclass(frozen=True)
class SegmentationScore:
    dice: float
    weighted_dice: float
    sensitivity: float
    weighted_sensitivity: float
    weighting: str = "inverse class frequency, normalized"


def segmentation_score(pred, ref, cls=None, classes=None) -> SegmentationScore:
    """All four scores; the plain ones use ``cls`` (default: the BREAST label for RegionMasks)."""
    if cls is None and isinstance(ref, RegionMask):
        cls = 255
    return SegmentationScore(dice(pred, ref, cls), weighted_dice(pred, ref, classes),
                             sensitivity(pred, ref, cls), weighted_sensitivity(pred, ref, classes))


# -------------------------------------------------------------- rank methods

def spearman(x, y) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise BreastPDError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 3:
        raise BreastPDError("spearman needs at least 3 pairs")
    rx, ry = rankdata(x), rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    sxx, syy = float(rx @ rx), float(ry @ ry)
    if sxx == 0 or syy == 0:
        raise DomainError("spearman correlation is undefined for a constant vector")
    return float(np.clip((rx @ ry) / math.sqrt(sxx * syy), -1.0, 1.0))


@dataclass(frozen=True)
class MannWhitneyResult:
    u: float
    p: float
    method: str


def _rank_sum_counts(doubled_ranks, n_a):
    """Number of size-``n_a`` subsets for every value of the doubled rank sum."""
    total = int(doubled_ranks.sum())
    # table[k][s]: subsets of size k with doubled sum s
    table = np.zeros((n_a + 1, total + 1), dtype=object)
    table[0, 0] = 1
    for r in doubled_ranks.astype(int):
        for k in range(n_a, 0, -1):
            table[k, r:] = table[k, r:] + table[k - 1, : total + 1 - r]
    return table[n_a]


def mann_whitney(a, b, method="auto") -> MannWhitneyResult:
    """Two-sided Mann-Whitney U test; ``u`` is the statistic of sample ``a``.

    Exact (enumeration over mid-rank arrangements, ties kept) when the pooled
    size is at most 16; otherwise normal with tie and continuity correction.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    na, nb = a.size, b.size
    if na < 1 or nb < 1:
        raise BreastPDError("both samples must be non-empty")
    pooled = np.concatenate([a, b])
    ranks = rankdata(pooled)
    ra = ranks[:na].sum()
    u = float(ra - na * (na + 1) / 2.0)
    n = na + nb
    if method == "auto":
        method = "exact" if n <= EXACT_MW_LIMIT else "normal"
    if method == "exact":
        doubled = np.rint(2 * ranks).astype(np.int64)
        counts = _rank_sum_counts(doubled, na)
        center2 = na * (n + 1)  # doubled expected rank sum
        obs = abs(int(doubled[:na].sum()) - center2)
        sums = np.arange(counts.size)
        extreme = np.abs(sums - center2) >= obs
        hits = sum(counts[extreme])
        p = float(hits) / float(comb(n, na, exact=True))
        return MannWhitneyResult(u, min(1.0, p), "exact")
    mu = na * nb / 2.0
    _, tcounts = np.unique(pooled, return_counts=True)
    tie = float(((tcounts**3) - tcounts).sum())
    var = na * nb / 12.0 * ((n + 1) - tie / (n * (n - 1)))
    if var <= 0:
        return MannWhitneyResult(u, 1.0, "normal")
    z = max(abs(u - mu) - 0.5, 0.0) / math.sqrt(var)
    return MannWhitneyResult(u, float(min(1.0, 2.0 * norm.sf(z))), "normal")


def auc(scores, outcomes) -> float:
    """Probability a case outscores a control, ties counting one half."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = _binary_outcome(outcomes, s.size)
    n1 = int(y.sum())
    n0 = y.size - n1
    r = rankdata(s)
    return float((r[y == 1].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def _binary_outcome(outcomes, n):
    y = np.asarray(outcomes).ravel()
    if y.dtype.kind in "UO":
        y = (y == CASE).astype(np.int64)
    else:
        y = y.astype(np.int64)
    if y.size != n:
        raise BreastPDError(f"{y.size} outcomes for {n} scores")
    if y.min() == y.max():
        raise BreastPDError("both outcome classes are required")
    return y


def transform_measure(values, kind="none", subject_ids=None) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    ids = list(subject_ids) if subject_ids is not None else [str(i) for i in range(v.size)]
    if kind == "none":
        return v.copy()
    if kind == "log":
        bad = np.flatnonzero(~(v > 0))
        if bad.size:
            raise DomainError(f"log transform needs positive values; subject {ids[bad[0]]!r} has {v[bad[0]]}")
        return np.log(v)
    if kind == "sqrt":
        bad = np.flatnonzero(~(v >= 0))
        if bad.size:
            raise DomainError(f"sqrt transform needs non-negative values; subject {ids[bad[0]]!r} has {v[bad[0]]}")
        return np.sqrt(v)
    raise DomainError(f"unknown transform {kind!r}")


# ---------------------------------------------------------------- model fits

@dataclass
class ModelFit:
    names: list
    coefficients: dict
    std_errors: dict
    measure: str | None
    or_per_sd: float
    or_ci: tuple
    loglik: float
    n_iter: int
    kind: str
    transform: str = "none"
    measure_mean: float = 0.0
    measure_sd: float = 1.0
    dropped: list = field(default_factory=list)
    auc: float = float("nan")
    auc_ci: tuple = (float("nan"), float("nan"))

    def linear_predictor(self, data: dict) -> np.ndarray:
        eta = 0.0
        for name in self.names:
            x = np.asarray(data[name], dtype=np.float64)
            if name == self.measure:
                x = (x - self.measure_mean) / self.measure_sd
            eta = eta + self.coefficients[name] * x
        return np.asarray(eta, dtype=np.float64) + self.coefficients.get("intercept", 0.0)


def _design(data, names, measure, standardize):
    cols = []
    mean, sd = 0.0, 1.0
    for name in names:
        x = np.asarray(data[name], dtype=np.float64)
        if name == measure and standardize:
            mean, sd = float(x.mean()), float(x.std(ddof=1))
            if not sd > 0:
                raise DomainError(f"measure {name!r} is constant")
            x = (x - mean) / sd
        cols.append(x)
    return np.column_stack(cols) if cols else np.zeros((0, 0)), mean, sd


def _wald(beta, info_inv, names, measure):
    se = np.sqrt(np.maximum(np.diag(info_inv), 0.0))
    if measure in names:
        j = names.index(measure)
        b, s = beta[j], se[j]
        return se, math.exp(b), (math.exp(b - 1.959963984540054 * s), math.exp(b + 1.959963984540054 * s))
    return se, float("nan"), (float("nan"), float("nan"))


def _newton(loglik_grad_hess, p, max_iter, what):
    beta = np.zeros(p)
    ll, g, H = loglik_grad_hess(beta)
    for it in range(1, max_iter + 1):
        try:
            step = np.linalg.solve(-H, g)
        except np.linalg.LinAlgError as exc:
            raise BreastPDError(f"{what}: singular information matrix") from exc
        t = 1.0
        while True:
            cand = beta + t * step
            ll_new, g_new, H_new = loglik_grad_hess(cand)
            if ll_new >= ll - 1e-12 or t < 1e-10:
                break
            t *= 0.5
        beta, ll, g, H = cand, ll_new, g_new, H_new
        if np.max(np.abs(g)) < 1e-8:
            return beta, ll, H, it
    raise ConvergenceError(f"{what}: Newton did not converge in {max_iter} iterations",
                           float(np.max(np.abs(g))))


def _check_information(H, what):
    info = -H
    w = np.linalg.eigvalsh(info)
    if w.min() <= 1e-10 * max(1.0, w.max()):
        raise BreastPDError(f"{what}: singular information matrix")
    return np.linalg.inv(info)


def logistic_fit(data: dict, outcome, covariates, measure=None, standardize=True, max_iter=100) -> ModelFit:
    """Unconditional logistic regression by damped Newton.

    ``data`` maps covariate names to columns; ``measure`` (if given) is
    z-scored first so its coefficient exponentiates to OR per SD.
    """
    names = list(covariates)
    X, mean, sd = _design(data, names, measure, standardize)
    y = _binary_outcome(outcome, X.shape[0]).astype(np.float64)
    Z = np.column_stack([np.ones(X.shape[0]), X])

    def llgh(beta):
        eta = Z @ beta
        ll = float(np.sum(y * eta - np.logaddexp(0.0, eta)))
        mu = 0.5 * (1.0 + np.tanh(0.5 * eta))
        g = Z.T @ (y - mu)
        H = -(Z.T * (mu * (1.0 - mu))) @ Z
        return ll, g, H

    _check_separation_logistic(Z, y)
    try:
        beta, ll, H, it = _newton(llgh, Z.shape[1], max_iter, "logistic fit")
    except ConvergenceError as exc:
        raise SeparationError(f"logistic fit diverged (likely quasi-separation): {exc}") from exc
    eta = Z @ beta
    if np.min(np.abs(eta)) > 30 or np.max(np.abs(eta)) > 50:
        raise SeparationError("logistic fit: fitted probabilities reach 0 or 1 (separation)")
    inv = _check_information(H, "logistic fit")
    all_names = ["intercept"] + names
    se, orr, ci = _wald(beta, inv, all_names, measure)
    return ModelFit(names, dict(zip(all_names, beta.tolist())), dict(zip(all_names, se.tolist())),
                    measure, orr, ci, ll, it, "logistic", measure_mean=mean, measure_sd=sd)


def _check_separation_logistic(Z, y):
    """Complete separation test: an exact-fit direction exists iff this LP is feasible."""
    s = np.where(y > 0, 1.0, -1.0)
    # find beta with s * (Z beta) >= 1 for every row
    res = linprog(np.zeros(Z.shape[1]), A_ub=-(s[:, None] * Z), b_ub=-np.ones(Z.shape[0]),
                  bounds=[(None, None)] * Z.shape[1], method="highs")
    if res.status == 0:
        raise SeparationError("logistic fit: outcomes are perfectly separated by the covariates")


def _strata_index(strata):
    _, idx = np.unique(np.asarray(strata, dtype=object).astype(str), return_inverse=True)
    return idx


def conditional_logistic_fit(data: dict, status, strata, covariates, measure=None, standardize=True,
                             max_iter=100) -> ModelFit:
    """Conditional logistic regression for 1:m matched sets.

    Maximizes ``prod_s exp(x_case b) / sum_{j in s} exp(x_j b)``. Covariates
    constant within every stratum cancel from the likelihood; they are
    dropped and reported with coefficient 0.
    """
    names = list(covariates)
    X, mean, sd = _design(data, names, measure, standardize)
    y = _binary_outcome(status, X.shape[0])
    s = _strata_index(strata)
    n_s = s.max() + 1
    cases = np.bincount(s, weights=y, minlength=n_s)
    sizes = np.bincount(s, minlength=n_s)
    if np.any(cases != 1) or np.any(sizes < 2):
        raise BreastPDError("every stratum needs exactly one case and at least one control")
    # within-stratum spread decides which covariates are estimable
    smean = np.stack([np.bincount(s, weights=X[:, j], minlength=n_s) / sizes for j in range(X.shape[1])], 1) \
        if X.shape[1] else np.zeros((n_s, 0))
    varying = np.array([np.any(np.abs(X[:, j] - smean[s, j]) > 1e-12 * (1 + np.abs(X[:, j]).max()))
                        for j in range(X.shape[1])], dtype=bool)
    dropped = [n for n, v in zip(names, varying) if not v]
    keep = [n for n, v in zip(names, varying) if v]
    if not keep:
        raise BreastPDError("no covariate varies within any stratum")
    Xk = X[:, varying]
    # centering within strata leaves the conditional likelihood unchanged and keeps exp() tame
    Xk = Xk - np.stack([np.bincount(s, weights=Xk[:, j], minlength=n_s) / sizes for j in range(Xk.shape[1])],
                       1)[s]
    case_sum = Xk[y == 1].sum(axis=0)

    def llgh(beta):
        eta = Xk @ beta
        mx = np.full(n_s, -np.inf)
        np.maximum.at(mx, s, eta)
        w = np.exp(eta - mx[s])
        den = np.bincount(s, weights=w, minlength=n_s)
        ll = float(eta[y == 1].sum() - np.sum(np.log(den) + mx))
        p = w / den[s]
        xbar = np.stack([np.bincount(s, weights=p * Xk[:, j], minlength=n_s) for j in range(Xk.shape[1])], 1)
        g = case_sum - xbar.sum(axis=0)
        H = -((Xk.T * p) @ Xk - xbar.T @ xbar)
        return ll, g, H

    _check_concordance(Xk, y, s, n_s)
    try:
        beta, ll, H, it = _newton(llgh, Xk.shape[1], max_iter, "conditional logistic fit")
    except ConvergenceError as exc:
        raise SeparationError(f"conditional logistic fit diverged (strata concordant): {exc}") from exc
    if ll > -1e-9:
        raise SeparationError("conditional logistic fit: every stratum is perfectly concordant")
    inv = _check_information(H, "conditional logistic fit")
    se, orr, ci = _wald(beta, inv, keep, measure)
    coefs = dict(zip(keep, beta.tolist()))
    ses = dict(zip(keep, se.tolist()))
    for n in dropped:
        coefs[n] = 0.0
        ses[n] = float("nan")
    if measure in dropped:
        orr, ci = 1.0, (float("nan"), float("nan"))
    return ModelFit(names, coefs, ses, measure, orr, ci, ll, it, "conditional", measure_mean=mean,
                    measure_sd=sd, dropped=dropped)


def _check_concordance(Xk, y, s, n_s):
    """Separation test: some b makes the case strictly top every matched set."""
    case_row = np.zeros(n_s, dtype=np.int64)
    case_row[s[y == 1]] = np.flatnonzero(y == 1)
    ctrl = np.flatnonzero(y == 0)
    D = Xk[case_row[s[ctrl]]] - Xk[ctrl]
    res = linprog(np.zeros(Xk.shape[1]), A_ub=-D, b_ub=-np.ones(D.shape[0]),
                  bounds=[(None, None)] * Xk.shape[1], method="highs")
    if res.status == 0:
        raise SeparationError("conditional logistic fit: cases are perfectly concordant in every stratum")


# ------------------------------------------------------- case-control data

@dataclass
class CaseControlData:
    subject_ids: list
    strata: np.ndarray
    status: np.ndarray
    columns: dict

    def __post_init__(self):
        self.strata = np.asarray(self.strata, dtype=object).astype(str)
        self.status = np.asarray(self.status, dtype=np.int64)
        idx = _strata_index(self.strata)
        cases = np.bincount(idx, weights=self.status)
        sizes = np.bincount(idx)
        bad = np.flatnonzero((cases != 1) | (sizes < 2))
        if bad.size:
            name = np.unique(self.strata)[bad[0]]
            raise BreastPDError(f"stratum {name!r} needs exactly one CASE and at least one CONTROL")

    @property
    def n(self):
        return len(self.subject_ids)

    def take(self, rows, strata=None) -> "CaseControlData":
        rows = np.asarray(rows)
        return CaseControlData([self.subject_ids[i] for i in rows],
                               self.strata[rows] if strata is None else strata,
                               self.status[rows], {k: np.asarray(v)[rows] for k, v in self.columns.items()})


def read_case_control_csv(path) -> CaseControlData:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = [f.strip() for f in reader.fieldnames]
        norm_ = {f: f.replace("-", "_").lower() for f in fields}
        rows = [{norm_[k.strip()]: v.strip() for k, v in row.items()} for row in reader]
    required = ("subject_id", "stratum_id", "status")
    missing = [r for r in required if r not in norm_.values()]
    if missing:
        raise BreastPDError(f"{path}: missing column(s) {missing}")
    ids = [r["subject_id"] for r in rows]
    strata = [r["stratum_id"] for r in rows]
    status = []
    for r in rows:
        st = r["status"].upper()
        if st not in (CASE, CONTROL, "1", "0"):
            raise BreastPDError(f"{path}: subject {r['subject_id']!r} has status {r['status']!r}")
        status.append(1 if st in (CASE, "1") else 0)
    columns = {}
    for f in (norm_[f] for f in fields):
        if f in required:
            continue
        try:
            columns[f] = np.array([float(r[f]) for r in rows])
        except ValueError as exc:
            raise BreastPDError(f"{path}: column {f!r} is not numeric ({exc})") from exc
    return CaseControlData(ids, strata, status, columns)


def write_case_control_csv(path, data: CaseControlData):
    names = list(data.columns)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject_id", "stratum_id", "status"] + names)
        for i, sid in enumerate(data.subject_ids):
            w.writerow([sid, data.strata[i], CASE if data.status[i] else CONTROL]
                       + [repr(float(data.columns[n][i])) for n in names])


# ---------------------------------------------------------------- bootstrap

def matched_bootstrap_indices(strata, B=1000, seed=0):
    """Yield ``(rows, new_strata)`` for ``B`` resamples of whole matched sets.

    Replicate ``b`` draws from its own seed spawned off ``seed``; repeated
    draws of a stratum are relabeled so each copy remains its own set.
    """
    idx = _strata_index(strata)
    n_s = idx.max() + 1
    order = np.argsort(idx, kind="stable")
    bounds = np.searchsorted(idx[order], np.arange(n_s + 1))
    members = [order[bounds[k] : bounds[k + 1]] for k in range(n_s)]
    for child in np.random.SeedSequence(seed).spawn(B):
        draw = np.random.default_rng(child).integers(0, n_s, size=n_s)
        rows = np.concatenate([members[k] for k in draw])
        new = np.repeat(np.arange(n_s), [members[k].size for k in draw])
        yield rows, new.astype(str)


def _fit_model(data: CaseControlData, measure, covariates, kind, transform):
    cols = dict(data.columns)
    cols[measure] = transform_measure(cols[measure], transform, data.subject_ids)
    names = [measure] + [c for c in covariates if c != measure]
    if kind == "conditional":
        fit = conditional_logistic_fit(cols, data.status, data.strata, names, measure=measure)
    else:
        fit = logistic_fit(cols, data.status, names, measure=measure)
    fit.transform = transform
    return fit, fit.linear_predictor(cols)


@dataclass
class BootstrapResult:
    auc: float
    ci: tuple
    p_vs_reference: float
    replicates: np.ndarray
    failures: int


def auc_matched_bootstrap(data: CaseControlData, measure, covariates=(), B=1000, seed=0, kind="conditional",
                          transform="none", reference=None, reference_transform="none") -> BootstrapResult:
    """AUC of the fitted model with a percentile CI from resampled matched sets.

    When ``reference`` names another measure, both models are refit on each
    replicate and ``p_vs_reference`` is ``2 min(k+1, B-k+1) / (B+1)`` where
    ``k`` counts replicates whose AUC difference is at most zero.
    """
    _, eta = _fit_model(data, measure, covariates, kind, transform)
    point = auc(eta, data.status)
    reps, diffs, failures = [], [], 0
    for rows, new_strata in matched_bootstrap_indices(data.strata, B, seed):
        sub = data.take(rows, new_strata)
        try:
            _, e = _fit_model(sub, measure, covariates, kind, transform)
            a = auc(e, sub.status)
            if reference is not None:
                _, er = _fit_model(sub, reference, covariates, kind, reference_transform)
                diffs.append(a - auc(er, sub.status))
        except (BreastPDError, np.linalg.LinAlgError):
            failures += 1
            continue
        reps.append(a)
    reps = np.asarray(reps)
    ci = tuple(np.percentile(reps, [2.5, 97.5]).tolist()) if reps.size else (float("nan"),) * 2
    p = float("nan")
    if reference is not None and diffs:
        d = np.asarray(diffs)
        k = int(np.sum(d <= 0))
        nb = d.size
        p = min(1.0, 2.0 * min(k + 1, nb - k + 1) / (nb + 1))
    return BootstrapResult(point, ci, p, reps, failures)


REPORT_COLUMNS = ("measure", "transform", "OR", "OR_CI_low", "OR_CI_high", "AUC", "AUC_CI_low", "AUC_CI_high",
                  "p_vs_reference")


def evaluate_measures(data: CaseControlData, measures, transforms=None, covariates=("age", "bmi"),
                      kind="conditional", B=1000, seed=0, reference=None) -> list:
    """One report row per density measure: OR per SD with Wald CI, AUC with bootstrap CI."""
    transforms = transforms or {}
    covariates = [c for c in covariates if c in data.columns]
    rows = []
    for m in measures:
        fit, _ = _fit_model(data, m, covariates, kind, transforms.get(m, "none"))
        ref = reference if reference is not None and reference != m else None
        bs = auc_matched_bootstrap(data, m, covariates, B, seed, kind, transforms.get(m, "none"), ref,
                                   transforms.get(ref, "none") if ref else "none")
        fit.auc, fit.auc_ci = bs.auc, bs.ci
        rows.append({"measure": m, "transform": fit.transform, "OR": fit.or_per_sd, "OR_CI_low": fit.or_ci[0],
                     "OR_CI_high": fit.or_ci[1], "AUC": bs.auc, "AUC_CI_low": bs.ci[0], "AUC_CI_high": bs.ci[1],
                     "p_vs_reference": bs.p_vs_reference, "fit": fit})
    return rows


def write_report_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in rows:
            w.writerow([r["measure"], r["transform"]] + [f"{float(r[c]):.6f}" for c in REPORT_COLUMNS[2:]])
