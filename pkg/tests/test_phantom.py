import csv

import numpy as np
import pytest

from breastpd.exceptions import BreastPDError
from breastpd.imaging import load_image
from breastpd.phantom import PhantomSpec, generate_corpus, generate_phantom
from breastpd.segmentation import ingest_mask


def test_zero_pd_phantom():
    ph = generate_phantom(PhantomSpec(seed=3, height=128, width=128, target_pd=0))
    assert not ph.dense_mask.any() and ph.pd == 0.0


def test_pd_30_radius_200_exact_within_one_pixel():
    ph = generate_phantom(PhantomSpec(seed=9, height=512, width=512, radius=200, target_pd=30))
    area = ph.breast_mask.breast_area
    assert abs(ph.pd - 30) <= 100.0 / area
    assert ph.pd == 100.0 * ph.dense_mask.sum() / area


def test_same_seed_identical_bytes():
    a = generate_phantom(PhantomSpec(seed=5, height=128, width=128))
    b = generate_phantom(PhantomSpec(seed=5, height=128, width=128))
    assert a.image.pixels.tobytes() == b.image.pixels.tobytes()
    assert np.array_equal(a.dense_mask, b.dense_mask)


def test_dense_within_breast_and_dense_brighter():
    ph = generate_phantom(PhantomSpec(seed=2, height=128, width=128, target_pd=25, pectoral=True))
    breast = ph.breast_mask.breast
    assert not (ph.dense_mask & ~breast).any()
    raw = ph.image.pixels.astype(float)
    # brighter tissue attenuates more, so dense raw counts are lower
    assert raw[ph.dense_mask].mean() < raw[breast & ~ph.dense_mask].mean()


def test_invalid_specs():
    with pytest.raises(BreastPDError):
        generate_phantom(PhantomSpec(target_pd=120))
    with pytest.raises(BreastPDError):
        generate_phantom(PhantomSpec(dense_base=1.0, fat_base=1.0))
    with pytest.raises(BreastPDError, match="unreachable"):
        generate_phantom(PhantomSpec(height=16, width=16, radius=2, target_pd=0.1))


def test_mirrored_phantom_puts_breast_right():
    ph = generate_phantom(PhantomSpec(seed=1, height=64, width=64, mirrored=True))
    assert ph.breast_mask.breast[:, -1].any() and not ph.breast_mask.breast[:, 0].any()


def test_corpus_files_and_gold(tmp_path):
    corpus = generate_corpus(6, (5, 40), seed=4, out_dir=tmp_path, base_spec=PhantomSpec(height=64, width=64))
    with open(tmp_path / "gold.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6 and len(list(tmp_path.glob("*.pgm"))) == 6
    for row, (image_id, ph) in zip(rows, corpus):
        assert row["image_id"] == image_id
        img = load_image(tmp_path / f"{image_id}.pgm")
        mask = ingest_mask(tmp_path / "masks" / f"{image_id}.pgm", img)
        # recount from the written mask and the in-memory dense mask
        recount = 100.0 * ph.dense_mask.sum() / mask.breast_area
        assert float(row["gold_pd"]) == pytest.approx(recount, abs=1e-12)
        assert 5 - 100.0 / mask.breast_area <= float(row["gold_pd"]) <= 40 + 100.0 / mask.breast_area


def test_corpus_regeneration_byte_identical(tmp_path):
    spec = PhantomSpec(height=64, width=64)
    generate_corpus(3, seed=8, out_dir=tmp_path / "a", base_spec=spec)
    generate_corpus(3, seed=8, out_dir=tmp_path / "b", base_spec=spec)
    for f in sorted((tmp_path / "a").rglob("*")):
        if f.is_file():
            assert f.read_bytes() == (tmp_path / "b" / f.relative_to(tmp_path / "a")).read_bytes()


def test_zero_contrast_control():
    ph = generate_phantom(PhantomSpec(seed=3, height=96, width=96, dense_base=1.0 + 1e-9, fat_base=1.0,
                                      dense_noise=0.05, fat_noise=0.05, dense_corr=9))
    raw = ph.image.pixels.astype(float)
    breast = ph.breast_mask.breast
    assert abs(raw[ph.dense_mask].mean() - raw[breast & ~ph.dense_mask].mean()) < 0.05 * raw[breast].mean()
