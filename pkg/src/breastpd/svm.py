"""Soft-margin SVM trained with sequential minimal optimization.

Working-set selection uses second-order information (maximal violating
index ``i``, then the ``j`` giving the largest guaranteed decrease), the
same scheme as LIBSVM. Per-sample upper bounds allow class weighting.
"""

from __future__ import annotations

from collections import OrderedDict

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_binary_labels, check_features
from .exceptions import ConvergenceError

TAU = 1e-12


def rbf_kernel(A, B, gamma):
    aa = np.einsum("ij,ij->i", A, A)
    bb = np.einsum("ij,ij->i", B, B)
    d2 = np.maximum(aa[:, None] + bb[None, :] - 2.0 * (A @ B.T), 0.0)
    return np.exp(-gamma * d2)


def linear_kernel(A, B, gamma=None):
    return A @ B.T


KERNELS = {"rbf": rbf_kernel, "linear": linear_kernel}


class _KernelRows:
    """Kernel matrix rows on demand: fully precomputed when small, else LRU-cached."""

    def __init__(self, X, kernel, gamma, full_limit=3000, cache_rows=1500):
        self.X = X
        self.kernel = KERNELS[kernel]
        self.gamma = gamma
        n = X.shape[0]
        self.full = self.kernel(X, X, gamma) if n <= full_limit else None
        if self.full is None:
            if kernel == "rbf":
                self.diag = np.ones(n)
            else:
                self.diag = np.einsum("ij,ij->i", X, X)
        else:
            self.diag = np.diag(self.full).copy()
        self.cache = OrderedDict()
        self.cache_rows = cache_rows

    def row(self, i):
        if self.full is not None:
            return self.full[i]
        r = self.cache.get(i)
        if r is not None:
            self.cache.move_to_end(i)
            return r
        r = self.kernel(self.X[i : i + 1], self.X, self.gamma)[0]
        self.cache[i] = r
        if len(self.cache) > self.cache_rows:
            self.cache.popitem(last=False)
        return r


def smo_solve(K: _KernelRows, y, Cvec, tol=1e-3, max_iter=1_000_000):
    """Solve ``min 0.5 a'Qa - sum(a)`` s.t. ``y'a = 0``, ``0 <= a <= Cvec``.

    ``y`` is +-1. Returns ``(alpha, rho, n_iter, kkt_residual, objective)``;
    the decision function is ``sum(y a K) - rho``.
    """
    n = y.shape[0]
    alpha = np.zeros(n)
    G = -np.ones(n)
    QD = K.diag
    pos = y > 0
    residual = np.inf
    it = 0
    while True:
        yG = -y * G
        up = np.where(pos, alpha < Cvec, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < Cvec)
        if not up.any() or not low.any():
            residual = 0.0
            break
        cand_i = np.where(up, yG, -np.inf)
        i = int(np.argmax(cand_i))
        gmax = cand_i[i]
        gmin = np.min(np.where(low, yG, np.inf))
        residual = gmax - gmin
        if residual < tol:
            break
        if it >= max_iter:
            raise ConvergenceError(
                f"SMO hit the iteration cap ({max_iter}) with KKT residual {residual:.3e}", residual
            )
        Ki = K.row(i)
        b = gmax - yG
        sel = low & (b > 0)
        quad = QD[i] + QD - 2.0 * Ki
        quad = np.where(quad > 0, quad, TAU)
        score = np.where(sel, -(b * b) / quad, np.inf)
        j = int(np.argmin(score))
        Kj = K.row(j)
        yi, yj = y[i], y[j]
        Ci, Cj = Cvec[i], Cvec[j]
        ai_old, aj_old = alpha[i], alpha[j]
        Qij = yi * yj * Ki[j]
        if yi != yj:
            qc = QD[i] + QD[j] + 2.0 * Qij
            qc = qc if qc > 0 else TAU
            delta = (-G[i] - G[j]) / qc
            diff = ai_old - aj_old
            ai, aj = ai_old + delta, aj_old + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > Ci - Cj:
                if ai > Ci:
                    ai, aj = Ci, Ci - diff
            elif aj > Cj:
                aj, ai = Cj, Cj + diff
        else:
            qc = QD[i] + QD[j] - 2.0 * Qij
            qc = qc if qc > 0 else TAU
            delta = (G[i] - G[j]) / qc
            total = ai_old + aj_old
            ai, aj = ai_old - delta, aj_old + delta
            if total > Ci:
                if ai > Ci:
                    ai, aj = Ci, total - Ci
            elif aj < 0:
                aj, ai = 0.0, total
            if total > Cj:
                if aj > Cj:
                    aj, ai = Cj, total - Cj
            elif ai < 0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        dai, daj = ai - ai_old, aj - aj_old
        # Q_i = y_i * y * K_i
        G += (yi * dai) * (y * Ki) + (yj * daj) * (y * Kj)
        it += 1
    rho = _compute_rho(alpha, y, G, Cvec)
    objective = 0.5 * float(alpha @ (G - 1.0))
    return alpha, rho, it, float(residual), objective


def _compute_rho(alpha, y, G, Cvec):
    yG = y * G
    free = (alpha > 0) & (alpha < Cvec)
    if free.any():
        return float(yG[free].mean())
    pos = y > 0
    at_upper = alpha >= Cvec
    at_lower = alpha <= 0
    # bounds from LIBSVM: ub over {y=+1, a=0} U {y=-1, a=C}, lb over the rest
    ub_set = (pos & at_lower) | (~pos & at_upper)
    lb_set = (pos & at_upper) | (~pos & at_lower)
    ub = yG[ub_set].min() if ub_set.any() else np.inf
    lb = yG[lb_set].max() if lb_set.any() else -np.inf
    if np.isfinite(ub) and np.isfinite(lb):
        return float(0.5 * (ub + lb))
    return float(ub if np.isfinite(ub) else lb if np.isfinite(lb) else 0.0)


def dual_objective(alpha, y, Kfull):
    """``0.5 a'Qa - sum(a)`` for a dense kernel matrix."""
    Q = (y[:, None] * y[None, :]) * Kfull
    return 0.5 * float(alpha @ Q @ alpha) - float(alpha.sum())


class SMOClassifier(BaseEstimator, ClassifierMixin):
    """Binary kernel SVM (RBF or linear) solved by SMO.

    Features are z-scored with the training statistics when ``standardize``
    is set; ``gamma="auto"`` means ``1 / (n_features * pooled variance)``
    of the (standardized) training matrix. ``class_weight="balanced"``
    scales each class's C by ``n / (2 * n_class)``.
    """

    def __init__(self, C=1.0, kernel="rbf", gamma="auto", tol=1e-3, max_iter=1_000_000,
                 class_weight="balanced", standardize=True, cache_rows=1500):
        self.C = C
        self.kernel = kernel
        self.gamma = gamma
        self.tol = tol
        self.max_iter = max_iter
        self.class_weight = class_weight
        self.standardize = standardize
        self.cache_rows = cache_rows

    def _scale(self, X):
        return (X - self.mean_) / self.scale_

    def fit(self, X, y):
        X = check_features(X, min_rows=2)
        y01 = check_binary_labels(y, n=X.shape[0])
        raw = np.asarray(y).ravel()
        self.classes_ = np.unique(raw)
        if self.standardize:
            self.mean_ = X.mean(axis=0)
            std = X.std(axis=0)
            self.scale_ = np.where(std > 0, std, 1.0)
        else:
            self.mean_ = np.zeros(X.shape[1])
            self.scale_ = np.ones(X.shape[1])
        Xs = self._scale(X)
        if self.gamma == "auto":
            var = float(Xs.var())
            self.gamma_ = 1.0 / (Xs.shape[1] * var) if var > 0 else 1.0 / Xs.shape[1]
        else:
            self.gamma_ = float(self.gamma)
        ypm = np.where(y01 == 1, 1.0, -1.0)
        Cvec = np.full(X.shape[0], float(self.C))
        if self.class_weight == "balanced":
            n = X.shape[0]
            n_pos = float((y01 == 1).sum())
            n_neg = n - n_pos
            Cvec = np.where(y01 == 1, self.C * n / (2.0 * n_pos), self.C * n / (2.0 * n_neg))
        elif isinstance(self.class_weight, dict):
            Cvec = np.array([self.C * self.class_weight.get(c, 1.0) for c in raw])
        K = _KernelRows(Xs, self.kernel, self.gamma_, cache_rows=self.cache_rows)
        alpha, rho, n_iter, residual, objective = smo_solve(K, ypm, Cvec, self.tol, self.max_iter)
        sv = np.flatnonzero(alpha > 0)
        self.alpha_ = alpha
        self.C_ = Cvec
        self.support_ = sv
        self.support_vectors_ = Xs[sv]
        self.dual_coef_ = (ypm * alpha)[sv]
        self.intercept_ = -rho
        self.n_iter_ = n_iter
        self.kkt_residual_ = residual
        self.objective_ = objective
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "dual_coef_")
        Xs = self._scale(check_features(X))
        if self.support_vectors_.shape[0] == 0:
            return np.full(Xs.shape[0], self.intercept_)
        kern = KERNELS[self.kernel](Xs, self.support_vectors_, self.gamma_)
        return kern @ self.dual_coef_ + self.intercept_

    def predict(self, X):
        d = self.decision_function(X)
        return np.where(d > 0, self.classes_[1], self.classes_[0])
