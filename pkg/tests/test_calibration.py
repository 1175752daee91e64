import numpy as np
import pytest
from oracles import calibration_sweep

from breastpd.calibration import (
    CutoffCalibration,
    CutoffCalibrator,
    GoldRecord,
    calibrate_cutoff,
    read_gold_csv,
    reference_labels,
)
from breastpd.exceptions import CalibrationError


def _random_images(rng, n):
    by_image, gold = {}, []
    for i in range(n):
        k = int(rng.integers(5, 40))
        by_image[f"im{i}"] = (rng.random(k), rng.integers(1, 200, size=k))
        gold.append(GoldRecord(f"im{i}", float(rng.uniform(0, 60))))
    return by_image, gold


@pytest.mark.parametrize("seed", range(10))
def test_cutoff_matches_exhaustive_sweep(seed):
    by_image, gold = _random_images(np.random.default_rng(seed), 8)
    calib = calibrate_cutoff(by_image, gold, grid_size=257)
    c, pd = calibration_sweep(by_image, [(g.image_id, g.gold_pd) for g in gold], 257)
    assert calib.cutoff == c
    assert calib.achieved_overall_pd == pytest.approx(pd, abs=1e-12)


def test_ties_go_to_smaller_cutoff():
    # any cutoff in (0, 0.5] gives 50 %, so the smallest such grid point wins
    by_image = {"a": (np.array([0.0, 0.5]), np.array([1, 1]))}
    calib = calibrate_cutoff(by_image, [GoldRecord("a", 50.0)], grid_size=11)
    assert calib.cutoff == pytest.approx(0.1)


def test_pooled_weights_by_area():
    by_image = {"a": (np.array([0.9]), np.array([10])), "b": (np.array([0.1]), np.array([30]))}
    calib = calibrate_cutoff(by_image, [GoldRecord("a", 100), GoldRecord("b", 0)], pooling="pooled")
    assert calib.gold_overall_pd == pytest.approx(25.0)


def test_unknown_id_and_empty_gold():
    with pytest.raises(CalibrationError, match="unknown"):
        calibrate_cutoff({"a": ([0.1], [3])}, [GoldRecord("zz", 10)])
    with pytest.raises(CalibrationError):
        calibrate_cutoff({}, [])
    with pytest.raises(CalibrationError):
        GoldRecord("a", 101)


def test_mean_equal_to_cutoff_is_dense():
    calib = CutoffCalibration(0.5, 0, 0)
    assert list(reference_labels([0.4999, 0.5, 0.9], calib)) == [0, 1, 1]


def test_estimator_wrapper(tmp_path):
    by_image, gold = _random_images(np.random.default_rng(3), 4)
    est = CutoffCalibrator(grid_size=101).fit(by_image, gold)
    assert est.cutoff_ == calibrate_cutoff(by_image, gold, 101).cutoff
    assert est.get_params() == {"grid_size": 101, "pooling": "mean"}


def test_gold_csv_duplicate(tmp_path):
    path = tmp_path / "g.csv"
    path.write_text("image_id,gold_pd\na,10\na,12\n")
    with pytest.raises(CalibrationError, match="duplicate"):
        read_gold_csv(path)
