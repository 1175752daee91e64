"""Correlation pruning and random-forest importance ranking of feature columns."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.tree import DecisionTreeClassifier
from sklearn.utils.validation import check_is_fitted

from .exceptions import SelectionError
from ._validation import check_features, check_binary_labels


@dataclass
class PrunedGroup:
    kept: str
    dropped: list
    max_abs_r: float


@dataclass
class SelectionReport:
    pruned_groups: list = field(default_factory=list)
    importances: dict = field(default_factory=dict)
    selected: list = field(default_factory=list)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["feature", "importance", "selected", "pruned_into"])
            dropped_into = {d: g.kept for g in self.pruned_groups for d in g.dropped}
            names = sorted(set(self.importances) | set(dropped_into))
            chosen = set(self.selected)
            for name in names:
                imp = self.importances.get(name)
                w.writerow([name, "" if imp is None else repr(float(imp)), int(name in chosen),
                            dropped_into.get(name, "")])

    def summary(self) -> str:
        lines = [f"{len(self.pruned_groups)} correlated group(s) pruned"]
        for g in self.pruned_groups:
            lines.append(f"  kept {g.kept} (max |r| {g.max_abs_r:.4f}); dropped {', '.join(g.dropped)}")
        lines.append(f"{len(self.selected)} feature(s) selected by forest importance:")
        for rank, name in enumerate(self.selected, 1):
            lines.append(f"  {rank:3d}. {name}  {self.importances.get(name, 0.0):.6f}")
        return "\n".join(lines) + "\n"


def _iqr(col):
    q75, q25 = np.percentile(col, [75, 25])
    return float(q75 - q25)


def correlation_groups(X, threshold=0.95):
    """Connected components of the graph linking columns with ``|r| > threshold``.

    Zero-variance columns get no edges. Returns ``(component ids, |r| matrix)``.
    """
    X = np.asarray(X, dtype=np.float64)
    std = X.std(axis=0)
    varying = std > 0
    p = X.shape[1]
    absr = np.zeros((p, p))
    if varying.sum() >= 2:
        Z = (X[:, varying] - X[:, varying].mean(axis=0)) / std[varying]
        r = (Z.T @ Z) / X.shape[0]
        idx = np.flatnonzero(varying)
        absr[np.ix_(idx, idx)] = np.abs(np.clip(r, -1.0, 1.0))
    np.fill_diagonal(absr, 0.0)
    adj = csr_matrix(absr > threshold)
    _, comp = connected_components(adj, directed=False)
    return comp, absr


def prune_correlated(X, names, threshold=0.95):
    """Keep one column per correlated group: the largest IQR, ties by name.

    Returns ``(surviving names in input order, list of PrunedGroup)``.
    """
    X = check_features(X, min_rows=2)
    names = list(names)
    if len(names) != X.shape[1]:
        raise SelectionError(f"{len(names)} names for {X.shape[1]} columns")
    comp, absr = correlation_groups(X, threshold)
    iqr = np.array([_iqr(X[:, j]) for j in range(X.shape[1])])
    keep = np.zeros(len(names), dtype=bool)
    groups = []
    for c in np.unique(comp):
        members = np.flatnonzero(comp == c)
        best = min(members, key=lambda j: (-iqr[j], names[j]))
        keep[best] = True
        if members.size > 1:
            sub = absr[np.ix_(members, members)]
            groups.append(PrunedGroup(names[best], sorted(names[j] for j in members if j != best),
                                      float(sub.max())))
    groups.sort(key=lambda g: g.kept)
    return [n for n, k in zip(names, keep) if k], groups


class CorrelationPruner(BaseEstimator, TransformerMixin):
    """Drop all but one column from each group of highly correlated features."""

    def __init__(self, threshold=0.95):
        self.threshold = threshold

    def fit(self, X, y=None, feature_names=None):
        X = check_features(X, min_rows=2)
        names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(X.shape[1])]
        self.feature_names_in_ = np.array(names, dtype=object)
        self.survivors_, self.groups_ = prune_correlated(X, names, self.threshold)
        self.support_ = np.isin(names, self.survivors_)
        return self

    def transform(self, X):
        check_is_fitted(self, "support_")
        return check_features(X)[:, self.support_]

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "support_")
        return np.array(self.survivors_, dtype=object)


def forest_importance(X, y, names, n_trees=100, seed=0, row_ids=None, max_depth=16, min_samples_leaf=5):
    """Gini importance from a bagged forest of CART trees.

    Rows are put in ``row_ids`` order before anything else, so bootstrap
    draws are keyed by row id and do not depend on the order rows arrive
    in. Each tree sees ``sqrt(p)`` candidate features per split and its own
    seed derived from ``seed``. Importance is the impurity decrease summed
    over all trees, normalized to 1.
    """
    X = check_features(X)
    y = check_binary_labels(y, n=X.shape[0])
    if X.shape[0] < 50:
        raise SelectionError(f"forest importance needs at least 50 rows, got {X.shape[0]}")
    if row_ids is None:
        row_ids = np.arange(X.shape[0])
    order = np.argsort(np.asarray(row_ids), kind="stable")
    X, y = X[order], y[order]
    n = X.shape[0]
    seeds = np.random.SeedSequence(seed).spawn(n_trees)
    total = np.zeros(X.shape[1])
    for tree_seed in seeds:
        rng = np.random.default_rng(tree_seed)
        counts = np.bincount(rng.integers(0, n, size=n), minlength=n)
        boot = np.repeat(np.arange(n), counts)
        tree = DecisionTreeClassifier(
            criterion="gini", max_features="sqrt", max_depth=max_depth,
            min_samples_leaf=min_samples_leaf, random_state=int(rng.integers(2**31 - 1)),
        )
        tree.fit(X[boot], y[boot])
        total += tree.tree_.compute_feature_importances(normalize=False)
    s = total.sum()
    imp = total / s if s > 0 else np.full(X.shape[1], 1.0 / X.shape[1])
    return dict(zip(names, imp))


def top_features(importances: dict, k: int = 80):
    return [n for n, _ in sorted(importances.items(), key=lambda kv: (-kv[1], kv[0]))][:k]


class ForestImportanceSelector(BaseEstimator, TransformerMixin):
    """Keep the ``n_features`` columns with the largest forest importance."""

    def __init__(self, n_features=80, n_trees=100, seed=0, max_depth=16, min_samples_leaf=5):
        self.n_features = n_features
        self.n_trees = n_trees
        self.seed = seed
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf

    def fit(self, X, y, feature_names=None, row_ids=None):
        X = check_features(X)
        names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(X.shape[1])]
        self.feature_names_in_ = np.array(names, dtype=object)
        self.importances_ = forest_importance(X, y, names, self.n_trees, self.seed, row_ids,
                                              self.max_depth, self.min_samples_leaf)
        self.selected_ = top_features(self.importances_, self.n_features)
        pos = {n: j for j, n in enumerate(names)}
        self.indices_ = np.array([pos[n] for n in self.selected_], dtype=np.int64)
        return self

    def transform(self, X):
        check_is_fitted(self, "indices_")
        return check_features(X)[:, self.indices_]

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "selected_")
        return np.array(self.selected_, dtype=object)


def select_features(X, y, names, threshold=0.95, n_features=80, n_trees=100, seed=0, row_ids=None):
    """Prune then rank; returns ``(selected names, SelectionReport)``."""
    survivors, groups = prune_correlated(X, names, threshold)
    idx = [list(names).index(n) for n in survivors]
    imps = forest_importance(np.asarray(X)[:, idx], y, survivors, n_trees, seed, row_ids)
    selected = top_features(imps, n_features)
    return selected, SelectionReport(groups, imps, selected)
