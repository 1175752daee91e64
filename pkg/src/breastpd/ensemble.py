"""Three fold-trained SVMs, majority-vote superpixel classification and PD."""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_binary_labels, check_features
from .calibration import CutoffCalibration
from .exceptions import BreastPDError, FeatureError, ModelFormatError, VersionMismatchError
from .features import BANK_VERSION
from .svm import SMOClassifier

MAGIC = b"DLBR"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHQ32s")


def assign_folds(image_ids, n_folds=3, seed=0) -> dict:
    """Shuffle the distinct image ids with ``seed`` and deal them into folds."""
    unique = sorted(set(image_ids))
    if len(unique) < n_folds:
        raise BreastPDError(f"{len(unique)} image(s) cannot fill {n_folds} folds")
    perm = np.random.default_rng(seed).permutation(len(unique))
    return {unique[p]: int(k % n_folds) for k, p in enumerate(perm)}


class DensityEnsemble(BaseEstimator, ClassifierMixin):
    """Majority vote of one SVM per cross-validation fold.

    ``fit(X, y, groups=image_ids)`` trains SVM ``k`` on the rows of every
    image whose fold is not ``k``. All rows of an image share its fold.
    """

    def __init__(self, n_folds=3, C=1.0, kernel="rbf", gamma="auto", tol=1e-3, max_iter=1_000_000,
                 class_weight="balanced", seed=0):
        self.n_folds = n_folds
        self.C = C
        self.kernel = kernel
        self.gamma = gamma
        self.tol = tol
        self.max_iter = max_iter
        self.class_weight = class_weight
        self.seed = seed

    def fit(self, X, y, groups=None, fold_map=None):
        X = check_features(X)
        y = check_binary_labels(y, n=X.shape[0])
        if groups is None:
            groups = [str(i) for i in range(X.shape[0])]
        groups = np.asarray(groups, dtype=object)
        if fold_map is None:
            fold_map = assign_folds(groups.tolist(), self.n_folds, self.seed)
        missing = sorted({g for g in groups.tolist() if g not in fold_map})
        if missing:
            raise BreastPDError(f"images without a fold assignment: {missing[:5]}")
        fold = np.array([fold_map[g] for g in groups.tolist()])
        self.estimators_ = []
        self.training_folds_ = []
        self.training_images_ = []
        for k in range(self.n_folds):
            in_fold = fold == k
            if not in_fold.any():
                raise BreastPDError(f"fold {k} is empty")
            if np.unique(y[in_fold]).size < 2:
                raise BreastPDError(f"fold {k} holds a single class")
            train = ~in_fold
            if np.unique(y[train]).size < 2:
                raise BreastPDError(f"training rows for SVM {k} hold a single class")
            svm = SMOClassifier(C=self.C, kernel=self.kernel, gamma=self.gamma, tol=self.tol,
                                max_iter=self.max_iter, class_weight=self.class_weight)
            svm.fit(X[train], y[train])
            self.estimators_.append(svm)
            self.training_folds_.append(sorted(set(range(self.n_folds)) - {k}))
            self.training_images_.append(sorted(set(groups[train].tolist())))
        self.fold_map_ = dict(fold_map)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return self

    def votes(self, X) -> np.ndarray:
        """``(n_rows, n_folds)`` array of 0/1 votes (1 = dense)."""
        check_is_fitted(self, "estimators_")
        X = check_features(X)
        return np.column_stack([(est.decision_function(X) > 0).astype(np.int64) for est in self.estimators_])

    def decision_values(self, X) -> np.ndarray:
        check_is_fitted(self, "estimators_")
        X = check_features(X)
        return np.column_stack([est.decision_function(X) for est in self.estimators_])

    def predict(self, X):
        v = self.votes(X)
        return (2 * v.sum(axis=1) > v.shape[1]).astype(np.int64)


@dataclass
class DensityModel:
    """Persisted model: calibrated cutoff, selected features and the ensemble."""

    ensemble: DensityEnsemble
    calibration: CutoffCalibration
    feature_names: list
    bank_version: str = BANK_VERSION
    format_version: int = FORMAT_VERSION
    meta: dict = field(default_factory=dict)

    def check_bank(self, bank_version):
        if bank_version != self.bank_version:
            raise VersionMismatchError(
                f"model was trained with feature bank {self.bank_version!r}, "
                f"features were computed with {bank_version!r}"
            )


@dataclass
class PdResult:
    image_id: str
    pd: float
    dense_area: int
    breast_area: int
    votes: np.ndarray

    @property
    def dense_labels(self) -> np.ndarray:
        return (2 * self.votes.sum(axis=1) > self.votes.shape[1]).astype(np.int64)


def train_ensemble(matrix, labels, image_fold_map=None, C=1.0, gamma="auto", seed=0, kernel="rbf",
                   feature_names=None, calibration=None, class_weight="balanced", tol=1e-3,
                   max_iter=1_000_000) -> DensityModel:
    """Fit the fold ensemble on ``matrix`` restricted to ``feature_names``."""
    names = list(feature_names) if feature_names is not None else list(matrix.columns)
    X = matrix.select(names)
    ens = DensityEnsemble(C=C, kernel=kernel, gamma=gamma, tol=tol, max_iter=max_iter,
                          class_weight=class_weight, seed=seed)
    ens.fit(X, labels, groups=matrix.image_ids, fold_map=image_fold_map)
    return DensityModel(ens, calibration or CutoffCalibration(float("nan"), float("nan"), float("nan")),
                        names, matrix.bank_version)


def pd_from_votes(image_id, areas, votes) -> PdResult:
    areas = np.asarray(areas, dtype=np.int64)
    votes = np.asarray(votes, dtype=np.int64)
    dense = 2 * votes.sum(axis=1) > votes.shape[1]
    dense_area = int(areas[dense].sum())
    breast_area = int(areas.sum())
    pd = 100.0 * dense_area / breast_area if breast_area else 0.0
    return PdResult(image_id, pd, dense_area, breast_area, votes)


def classify_and_pd(features, model: DensityModel, areas=None, image_id=None) -> PdResult:
    """Vote on every superpixel row of one image and turn the votes into PD.

    ``areas`` defaults to the ``sp_area`` feature column.
    """
    model.check_bank(features.bank_version)
    missing = [n for n in model.feature_names if n not in features.columns]
    if missing:
        raise FeatureError(f"feature columns missing for this model: {missing}")
    X = features.select(model.feature_names)
    if areas is None:
        areas = np.rint(features.column("sp_area")).astype(np.int64)
    votes = model.ensemble.votes(X)
    if image_id is None:
        image_id = features.image_ids[0] if features.image_ids else ""
    return pd_from_votes(image_id, areas, votes)


def dense_mask_from(sp_labels: np.ndarray, result: PdResult) -> np.ndarray:
    dense = result.dense_labels
    out = np.zeros(sp_labels.shape, dtype=bool)
    inside = sp_labels >= 0
    out[inside] = dense[sp_labels[inside]] == 1
    return out


def write_pd_csv(path, results):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["image_id", "pd", "dense_area", "breast_area"])
        for r in results:
            w.writerow([r.image_id, f"{r.pd:.10f}", r.dense_area, r.breast_area])


def read_pd_csv(path) -> dict:
    with open(path, newline="") as fh:
        return {row["image_id"]: float(row["pd"]) for row in csv.DictReader(fh)}


# ---------------------------------------------------------------- persistence

_SVM_ARRAYS = ("mean_", "scale_", "support_vectors_", "dual_coef_", "support_")


def _pack(model: DensityModel) -> bytes:
    ens = model.ensemble
    check_is_fitted(ens, "estimators_")
    arrays, manifest, offset = [], [], 0
    svms = []
    for k, est in enumerate(ens.estimators_):
        for name in _SVM_ARRAYS:
            arr = np.ascontiguousarray(getattr(est, name))
            arr = arr.astype("<i8" if arr.dtype.kind in "iu" else "<f8")
            raw = arr.tobytes()
            manifest.append({"svm": k, "name": name, "dtype": arr.dtype.str, "shape": list(arr.shape),
                             "offset": offset, "nbytes": len(raw)})
            arrays.append(raw)
            offset += len(raw)
        svms.append({
            "params": est.get_params(),
            "gamma_": est.gamma_,
            "intercept_": est.intercept_,
            "classes_": est.classes_.tolist(),
            "n_iter_": est.n_iter_,
            "kkt_residual_": est.kkt_residual_,
            "objective_": est.objective_,
            "n_features_in_": est.n_features_in_,
            "training_folds": ens.training_folds_[k],
            "training_images": ens.training_images_[k],
        })
    header = {
        "bank_version": model.bank_version,
        "feature_names": list(model.feature_names),
        "calibration": asdict(model.calibration),
        "ensemble_params": ens.get_params(),
        "fold_map": ens.fold_map_,
        "svms": svms,
        "arrays": manifest,
        "meta": model.meta,
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    return struct.pack("<I", len(head)) + head + b"".join(arrays)


def save_ensemble(model: DensityModel, path):
    payload = _pack(model)
    digest = hashlib.sha256(payload).digest()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, model.format_version, len(payload), digest))
        fh.write(payload)


def load_ensemble(path) -> DensityModel:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 or data[:4] != MAGIC:
        raise ModelFormatError(f"{path}: bad magic, not a density model file")
    if len(data) < _HEADER.size:
        raise ModelFormatError(f"{path}: checksum failure (file truncated inside header)")
    magic, version, length, digest = _HEADER.unpack_from(data)
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"{path}: model format version {version}, expected {FORMAT_VERSION}")
    payload = data[_HEADER.size :]
    if len(payload) != length or hashlib.sha256(payload).digest() != digest:
        raise ModelFormatError(f"{path}: checksum failure (payload truncated or corrupted)")
    (hlen,) = struct.unpack_from("<I", payload)
    header = json.loads(payload[4 : 4 + hlen].decode("utf-8"))
    blob = payload[4 + hlen :]
    arrays = {}
    for entry in header["arrays"]:
        raw = blob[entry["offset"] : entry["offset"] + entry["nbytes"]]
        arr = np.frombuffer(raw, dtype=np.dtype(entry["dtype"])).reshape(entry["shape"]).copy()
        arrays[(entry["svm"], entry["name"])] = arr.astype(np.int64 if arr.dtype.kind == "i" else np.float64)
    ens = DensityEnsemble(**header["ensemble_params"])
    ens.estimators_, ens.training_folds_, ens.training_images_ = [], [], []
    for k, info in enumerate(header["svms"]):
        est = SMOClassifier(**info["params"])
        for name in _SVM_ARRAYS:
            setattr(est, name, arrays[(k, name)])
        est.gamma_ = info["gamma_"]
        est.intercept_ = info["intercept_"]
        est.classes_ = np.array(info["classes_"])
        est.n_iter_ = info["n_iter_"]
        est.kkt_residual_ = info["kkt_residual_"]
        est.objective_ = info["objective_"]
        est.n_features_in_ = info["n_features_in_"]
        ens.estimators_.append(est)
        ens.training_folds_.append(info["training_folds"])
        ens.training_images_.append(info["training_images"])
    ens.fold_map_ = header["fold_map"]
    ens.classes_ = np.array([0, 1])
    ens.n_features_in_ = len(header["feature_names"])
    calib = CutoffCalibration(**header["calibration"])
    return DensityModel(ens, calib, header["feature_names"], header["bank_version"], version, header["meta"])
