import struct

import numpy as np
import pytest

from breastpd.calibration import CutoffCalibration
from breastpd.ensemble import (
    FORMAT_VERSION,
    DensityEnsemble,
    assign_folds,
    classify_and_pd,
    dense_mask_from,
    load_ensemble,
    pd_from_votes,
    read_pd_csv,
    save_ensemble,
    train_ensemble,
    write_pd_csv,
)
from breastpd.exceptions import BreastPDError, FeatureError, ModelFormatError, VersionMismatchError
from breastpd.features import FeatureMatrix


def _matrix(n_images=9, rows=20, seed=0, bank="pdbank-1.0"):
    rng = np.random.default_rng(seed)
    n = n_images * rows
    X = rng.normal(size=(n, 4))
    y = (X[:, 0] + 0.3 * rng.normal(size=n) > 0).astype(int)
    area = rng.integers(5, 50, size=n).astype(float)
    ids = [f"im{i}" for i in range(n_images) for _ in range(rows)]
    fm = FeatureMatrix(np.column_stack([X, area]), ("a", "b", "c", "d", "sp_area"), ids,
                       np.tile(np.arange(rows), n_images), bank)
    return fm, y


@pytest.fixture(scope="module")
def model():
    fm, y = _matrix()
    return train_ensemble(fm, y, feature_names=["a", "b", "c", "d"], seed=3,
                          calibration=CutoffCalibration(0.4, 20.0, 20.1)), fm, y


def test_round_trip_identical_decisions(model, tmp_path):
    m, fm, _ = model
    path = tmp_path / "m.dlbr"
    save_ensemble(m, path)
    back = load_ensemble(path)
    X = fm.select(m.feature_names)[:100]
    assert np.array_equal(back.ensemble.decision_values(X), m.ensemble.decision_values(X))
    assert back.feature_names == m.feature_names and back.calibration == m.calibration
    assert back.ensemble.fold_map_ == m.ensemble.fold_map_
    save_ensemble(back, tmp_path / "again.dlbr")
    assert (tmp_path / "again.dlbr").read_bytes() == path.read_bytes()


def test_truncated_and_corrupt_files(model, tmp_path):
    path = tmp_path / "m.dlbr"
    save_ensemble(model[0], path)
    data = path.read_bytes()
    (tmp_path / "t.dlbr").write_bytes(data[:-100])
    with pytest.raises(ModelFormatError, match="checksum failure"):
        load_ensemble(tmp_path / "t.dlbr")
    flipped = bytearray(data)
    flipped[-5] ^= 0xFF
    (tmp_path / "c.dlbr").write_bytes(bytes(flipped))
    with pytest.raises(ModelFormatError, match="checksum failure"):
        load_ensemble(tmp_path / "c.dlbr")
    (tmp_path / "x.dlbr").write_bytes(b"NOPE" + data[4:])
    with pytest.raises(ModelFormatError, match="magic"):
        load_ensemble(tmp_path / "x.dlbr")
    bumped = data[:4] + struct.pack("<H", FORMAT_VERSION + 1) + data[6:]
    (tmp_path / "v.dlbr").write_bytes(bumped)
    with pytest.raises(VersionMismatchError):
        load_ensemble(tmp_path / "v.dlbr")


def test_majority_vote():
    r = pd_from_votes("x", [10, 20, 30], [[1, 1, 0], [0, 0, 1], [1, 0, 0]])
    assert list(r.dense_labels) == [1, 0, 0]
    assert r.dense_area == 10 and r.breast_area == 60 and r.pd == pytest.approx(100 / 6)
    assert pd_from_votes("z", [5, 5], [[0, 0, 0], [1, 0, 0]]).pd == 0.0


def test_fold_hygiene(model):
    m, fm, _ = model
    ens = m.ensemble
    for k in range(3):
        held = {i for i, f in ens.fold_map_.items() if f == k}
        assert held.isdisjoint(ens.training_images_[k])
        assert held | set(ens.training_images_[k]) == set(fm.image_ids)


def test_assign_folds_balanced_and_deterministic():
    ids = [f"i{k}" for k in range(10)]
    a = assign_folds(ids * 3, 3, seed=1)
    assert a == assign_folds(list(reversed(ids)), 3, seed=1)
    counts = np.bincount(list(a.values()))
    assert counts.max() - counts.min() <= 1
    with pytest.raises(BreastPDError):
        assign_folds(["a", "b"], 3)


def test_feature_mismatch_and_bank_version(model):
    m, fm, _ = model
    rows = fm.rows_for("im0")
    sub = FeatureMatrix(fm.values[rows][:, :2], ("a", "b"), ["im0"] * len(rows), fm.labels[rows])
    with pytest.raises(FeatureError, match="'c'"):
        classify_and_pd(sub, m)
    other = FeatureMatrix(fm.values[rows], fm.columns, ["im0"] * len(rows), fm.labels[rows], "pdbank-9")
    with pytest.raises(VersionMismatchError):
        classify_and_pd(other, m)


def test_classify_uses_sp_area_and_dense_mask(model):
    m, fm, _ = model
    rows = fm.rows_for("im1")
    sub = FeatureMatrix(fm.values[rows], fm.columns, ["im1"] * len(rows), fm.labels[rows])
    r = classify_and_pd(sub, m)
    assert r.breast_area == int(fm.column("sp_area")[rows].sum())
    labels = np.full((4, 5), -1)
    labels[0, :] = 0
    labels[1, :] = 1
    mask = dense_mask_from(labels, r)
    assert mask[0].all() == bool(r.dense_labels[0]) and not mask[2:].any()


def test_single_class_fold_rejected():
    X = np.random.default_rng(0).normal(size=(9, 2))
    y = np.array([1, 1, 1, 0, 1, 0, 1, 0, 1])
    groups = ["a", "a", "a", "b", "b", "c", "c", "c", "b"]
    with pytest.raises(BreastPDError, match="single class"):
        DensityEnsemble().fit(X, y, groups, fold_map={"a": 0, "b": 1, "c": 2})


def test_pd_csv_round_trip(tmp_path):
    r = pd_from_votes("q", [3, 4], [[1, 1, 1], [0, 0, 0]])
    write_pd_csv(tmp_path / "pd.csv", [r])
    assert read_pd_csv(tmp_path / "pd.csv")["q"] == pytest.approx(300 / 7, abs=1e-9)
