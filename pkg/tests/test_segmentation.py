import numpy as np
import pytest
from conftest import disk
from scipy import ndimage

from breastpd.exceptions import MaskError, SegmentationError
from breastpd.imaging import PreprocessedImage, RawImage
from breastpd.phantom import PhantomSpec, generate_phantom
from breastpd.segmentation import (
    BACKGROUND,
    BREAST,
    PECTORALIS,
    RegionMask,
    finalize_breast_mask,
    ingest_mask,
    remove_abdominal_bump,
    segment_background_classical,
    trace_contour,
    write_mask,
)
from breastpd.imaging import write_raster


def _pre(px):
    return PreprocessedImage(np.asarray(px, dtype=np.float64))


def test_disk_on_dark_field_exact():
    d = disk((80, 80), (40, 40), 25)
    mask = segment_background_classical(_pre(np.where(d, 0.8, 0.05)))
    assert np.array_equal(mask.breast, d)


def test_enclosed_hole_returned_to_foreground():
    d = disk((80, 80), (40, 40), 25)
    hole = disk((80, 80), (40, 40), 6)
    mask = segment_background_classical(_pre(np.where(d & ~hole, 0.8, 0.0)))
    assert np.array_equal(mask.breast, d)


def test_all_zero_image_errors():
    with pytest.raises(SegmentationError, match="no foreground found"):
        segment_background_classical(_pre(np.zeros((16, 16))))


def test_retained_background_reaches_border():
    rng = np.random.default_rng(2)
    img = ndimage.uniform_filter(rng.random((60, 60)), 7)
    mask = segment_background_classical(_pre(img))
    bg = ~mask.breast
    lab, _ = ndimage.label(bg, structure=ndimage.generate_binary_structure(2, 1))
    edge = set(np.unique(np.concatenate([lab[0], lab[-1], lab[:, 0], lab[:, -1]]))) - {0}
    assert set(np.unique(lab[bg])) <= edge


def test_classical_segmentation_on_high_density_phantom():
    ph = generate_phantom(PhantomSpec(seed=4, height=256, width=256, target_pd=45))
    from breastpd.imaging import preprocess

    mask = segment_background_classical(preprocess(ph.image))
    agree = np.mean(mask.breast == ph.tissue_mask.breast)
    assert agree > 0.999


def test_ingest_three_labels(tmp_path):
    lab = np.zeros((10, 10), np.uint8)
    lab[:, :3] = PECTORALIS
    lab[:, 3:7] = BREAST
    path = tmp_path / "m.pgm"
    write_raster(path, lab, 8)
    mask = ingest_mask(path, RawImage(np.zeros((10, 10), np.uint16)))
    assert set(np.unique(mask.labels)) == {BACKGROUND, PECTORALIS, BREAST}


def test_ingest_shape_mismatch(tmp_path):
    path = tmp_path / "m.png"
    write_raster(path, np.zeros((100, 100), np.uint8), 8)
    with pytest.raises(MaskError, match="shape"):
        ingest_mask(path, RawImage(np.zeros((200, 200), np.uint16)))


def test_ingest_illegal_value(tmp_path):
    lab = np.zeros((10, 10), np.uint8)
    lab[3, 4] = 7
    path = tmp_path / "m.pgm"
    write_raster(path, lab, 8)
    with pytest.raises(MaskError, match="illegal"):
        ingest_mask(path, RawImage(np.zeros((10, 10), np.uint16)))


def test_mask_round_trip(tmp_path):
    lab = np.zeros((12, 12), np.uint8)
    lab[2:9, 2:9] = BREAST
    path = tmp_path / "r.pgm"
    write_mask(path, RegionMask(lab))
    assert np.array_equal(ingest_mask(path, RawImage(np.zeros((12, 12), np.uint16))).labels, lab)


def test_finalize_keeps_largest_blob():
    lab = np.zeros((60, 60), np.uint8)
    lab[5:45, 5:30] = BREAST  # 1000 pixels
    lab[50:52, 50:55] = BREAST  # 10 pixels
    out = finalize_breast_mask(RegionMask(lab))
    assert out.breast_area == 1000 and not out.breast[50:52, 50:55].any()


def test_finalize_single_component_unchanged_and_empty_errors():
    m = RegionMask.from_breast(disk((30, 30), (15, 0), 10))
    assert np.array_equal(finalize_breast_mask(m).labels, m.labels)
    with pytest.raises(SegmentationError):
        finalize_breast_mask(RegionMask(np.zeros((5, 5), np.uint8)))


def test_finalize_merges_pectoralis_into_background():
    lab = np.zeros((20, 20), np.uint8)
    lab[:, :5] = PECTORALIS
    lab[:, 5:15] = BREAST
    out = finalize_breast_mask(RegionMask(lab))
    assert set(np.unique(out.labels)) == {BACKGROUND, BREAST}


def test_contour_excludes_chest_wall_and_is_8_connected():
    m = RegionMask.from_breast(disk((101, 101), (50, 0), 40))
    pts = trace_contour(m)
    assert all(c > 0 for _, c in pts)
    steps = np.abs(np.diff(np.array(pts), axis=0))
    assert np.all(steps.max(axis=1) == 1)
    assert all(m.breast[r, c] for r, c in pts)


def test_bump_free_semicircle_unchanged():
    ph = generate_phantom(PhantomSpec(seed=1, height=256, width=256))
    assert np.array_equal(remove_abdominal_bump(ph.breast_mask).labels, ph.breast_mask.labels)


def test_bump_removed_area_within_two_percent():
    ph = generate_phantom(PhantomSpec(seed=1, height=512, width=512, bump=True))
    out = remove_abdominal_bump(ph.tissue_mask)
    truth = ph.breast_mask.breast_area
    assert ph.tissue_mask.breast_area > truth
    assert abs(out.breast_area - truth) / truth <= 0.02


def test_bump_removal_absent_breast_unchanged():
    m = RegionMask(np.zeros((10, 10), np.uint8))
    assert remove_abdominal_bump(m) is m


@pytest.mark.parametrize("seed", range(5))
def test_bump_removal_idempotent_and_monotone(seed):
    ph = generate_phantom(PhantomSpec(seed=seed, height=256, width=256, bump=True, bump_size=0.15 + 0.03 * seed))
    once = remove_abdominal_bump(ph.tissue_mask)
    twice = remove_abdominal_bump(once)
    assert once.breast_area <= ph.tissue_mask.breast_area
    assert np.array_equal(once.labels, twice.labels)


def test_region_mask_rejects_bad_labels():
    with pytest.raises(MaskError):
        RegionMask(np.full((3, 3), 5, np.uint8))
