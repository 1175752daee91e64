import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from breastpd.exceptions import ImageFormatError
from breastpd.imaging import (
    RawImage,
    load_image,
    mirror,
    preprocess,
    read_meta,
    save_image,
    standardize_orientation,
    write_pgm,
)


def test_load_4x4_pgm(tmp_path):
    path = tmp_path / "flat.pgm"
    path.write_bytes(b"P5\n4 4\n65535\n" + (100).to_bytes(2, "big") * 16)
    img = load_image(path)
    assert img.shape == (4, 4)
    assert np.all(img.pixels == 100)
    assert img.meta["laterality"] == "L" and img.meta["view"] == "CC"


def test_8bit_pgm_rejected(tmp_path):
    path = tmp_path / "eight.pgm"
    path.write_bytes(b"P5\n4 4\n255\n" + bytes(16))
    with pytest.raises(ImageFormatError, match="unsupported bit depth"):
        load_image(path)


def test_truncated_payload_reports_offset(tmp_path):
    path = tmp_path / "short.pgm"
    path.write_bytes(b"P5\n4 4\n65535\n" + bytes(10))
    with pytest.raises(ImageFormatError, match=r"byte offset \d+") as err:
        load_image(path)
    assert str(path) in str(err.value)


def test_missing_file(tmp_path):
    with pytest.raises(ImageFormatError, match="byte offset 0"):
        load_image(tmp_path / "nope.pgm")


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.pgm"
    path.write_bytes(b"P2\n4 4\n65535\n")
    with pytest.raises(ImageFormatError, match="bad magic"):
        load_image(path)


@pytest.mark.parametrize("suffix", [".pgm", ".png"])
def test_round_trip_50_random(tmp_path, suffix):
    rng = np.random.default_rng(7)
    for i in range(50):
        h, w = rng.integers(1, 40, size=2)
        px = rng.integers(0, 65536, size=(h, w), dtype=np.uint16)
        path = tmp_path / f"img{i}{suffix}"
        save_image(path, RawImage(px))
        first = path.read_bytes()
        back = load_image(path)
        assert np.array_equal(back.pixels, px)
        save_image(path, back)
        assert path.read_bytes() == first


def test_meta_sidecar(tmp_path):
    path = tmp_path / "a.pgm"
    img = RawImage(np.zeros((4, 4), np.uint16), {"laterality": "R", "view": "MLO", "source_id": "a"})
    save_image(path, img, with_meta=True)
    meta = read_meta(path)
    assert meta["laterality"] == "R" and meta["view"] == "MLO"


def test_validate_size_floor():
    with pytest.raises(ImageFormatError, match="64x64"):
        RawImage(np.zeros((10, 80), np.uint16)).validate()
    RawImage(np.zeros((64, 64), np.uint16)).validate()


def test_pixel_range_checked():
    with pytest.raises(ImageFormatError):
        RawImage(np.full((4, 4), 70000))


def test_preprocess_constant_is_zero():
    out = preprocess(RawImage(np.full((8, 8), 500, np.uint16)))
    assert np.all(out.pixels == 0)


def test_preprocess_endpoints():
    px = np.zeros((4, 4), np.uint16)
    px[:, 2:] = 65535
    out = preprocess(RawImage(px)).pixels
    assert np.all(out[:, :2] == 1.0) and np.all(out[:, 2:] == 0.0)


def test_preprocess_matches_scalar_loop():
    rng = np.random.default_rng(3)
    px = rng.integers(0, 65536, size=(64, 64), dtype=np.uint16)
    out = preprocess(RawImage(px)).pixels
    logs = [[math.log(1 + int(v)) for v in row] for row in px]
    top = max(max(r) for r in logs)
    sq = [[(top - v) ** 2 for v in row] for row in logs]
    lo = min(min(r) for r in sq)
    hi = max(max(r) for r in sq)
    ref = np.array([[(v - lo) / (hi - lo) for v in row] for row in sq])
    assert np.max(np.abs(out - ref)) <= 1e-12


@given(arrays(np.uint16, (6, 7)))
def test_preprocess_monotone_decreasing_and_range(px):
    out = preprocess(RawImage(px)).pixels
    flat_in, flat_out = px.ravel().astype(int), out.ravel()
    order = np.argsort(flat_in, kind="stable")
    assert np.all(np.diff(flat_out[order]) <= 1e-15)
    if px.min() != px.max():
        assert out.min() == 0.0 and out.max() == 1.0
    else:
        assert np.all(out == 0)


def test_orientation_bright_right_is_mirrored():
    px = np.zeros((8, 8), np.uint16)
    px[:, 6:] = 1000
    img, flipped = standardize_orientation(RawImage(px))
    assert flipped and img.pixels[:, :2].sum() > 0


def test_orientation_bright_left_unchanged():
    px = np.zeros((8, 8), np.uint16)
    px[:, :2] = 1000
    img, flipped = standardize_orientation(RawImage(px))
    assert not flipped and np.array_equal(img.pixels, px)


def test_orientation_idempotent_and_mirror_invariant():
    rng = np.random.default_rng(11)
    for _ in range(100):
        px = rng.integers(0, 65536, size=(6, int(rng.integers(2, 9))), dtype=np.uint16)
        once, _ = standardize_orientation(RawImage(px))
        twice, flipped = standardize_orientation(once)
        assert np.array_equal(once.pixels, twice.pixels) and not flipped
        again, _ = standardize_orientation(mirror(once))
        assert np.array_equal(again.pixels, once.pixels)


def test_raw_image_is_immutable():
    img = RawImage(np.zeros((4, 4), np.uint16))
    with pytest.raises(ValueError):
        img.pixels[0, 0] = 3


def test_write_pgm_header(tmp_path):
    path = tmp_path / "h.pgm"
    write_pgm(path, np.zeros((2, 3), np.uint16))
    assert path.read_bytes().startswith(b"P5\n3 2\n65535\n")
