# Copyright 2026 The tsinpaint Authors
# SPDX-License-Identifier: Apache-2.0

import pathlib

import numpy as np
import pytest

import tsinpaint

DATA = pathlib.Path(__file__).resolve().parents[2] / "tests" / "data"


def test_l1_and_psnr_identities():
    rng = np.random.default_rng(1)
    a = rng.random((1, 3, 16, 16))
    assert tsinpaint.l1_percent(a, a) == 0.0
    assert tsinpaint.psnr(a, a) == tsinpaint.PSNR_CAP
    b = np.clip(a + 0.1, 0, 1)
    assert tsinpaint.l1_percent(a, b) == pytest.approx(100 * np.abs(a - b).mean(), rel=1e-12)
    assert tsinpaint.psnr(a, b) == pytest.approx(10 * np.log10(1 / np.mean((a - b) ** 2)), rel=1e-12)


def test_ssim_matches_scikit_image():
    cv2 = pytest.importorskip("cv2")
    metrics = pytest.importorskip("skimage.metrics")
    a = cv2.imread(str(DATA / "ssim_a.png"))[:, :, ::-1] / 255.0
    b = cv2.imread(str(DATA / "ssim_b.png"))[:, :, ::-1] / 255.0
    expected = metrics.structural_similarity(
        a, b, gaussian_weights=True, sigma=1.5, use_sample_covariance=False, data_range=1.0, channel_axis=2
    )
    got = tsinpaint.ssim(a.transpose(2, 0, 1), b.transpose(2, 0, 1))
    assert got == pytest.approx(expected, abs=1e-6)


def test_masks_land_in_their_bin_and_are_reproducible():
    m = tsinpaint.generate_mask(5, 64, 64, 0.2, 0.3)
    assert m.shape == (1, 1, 64, 64)
    assert set(np.unique(m)) <= {0.0, 1.0}
    assert 0.2 <= tsinpaint.hole_ratio(m) <= 0.3
    np.testing.assert_array_equal(m, tsinpaint.generate_mask(5, 64, 64, 0.2, 0.3))


def test_pyramid_halves_each_level():
    img = np.random.default_rng(2).uniform(-1, 1, (1, 3, 32, 32))
    levels = tsinpaint.build_pyramid(img, 4)
    assert [p.shape[-1] for p in levels] == [32, 16, 8, 4]
    np.testing.assert_allclose(levels[1][0, 0, 0, 0], img[0, 0, :2, :2].mean(), rtol=1e-12)


def test_structure_label_keeps_shape_and_smooths():
    rng = np.random.default_rng(3)
    img = np.clip(rng.normal(0, 0.05, (1, 3, 24, 24)), -1, 1)
    s = tsinpaint.structure_label(img)
    assert s.shape == img.shape
    assert s.std() < img.std()


def test_frechet_distance_of_identical_sets_is_zero():
    f = np.random.default_rng(4).normal(size=(50, 3))
    assert tsinpaint.frechet_distance(f, f) == pytest.approx(0.0, abs=1e-8)
    assert tsinpaint.frechet_distance(f, f + 1.0) == pytest.approx(3.0, rel=1e-8)


def test_errors_map_to_python_exceptions():
    with pytest.raises(tsinpaint.InputError):
        tsinpaint.l1_percent(np.zeros((1, 3, 4, 4)), np.zeros((1, 3, 5, 4)))
    with pytest.raises(tsinpaint.IoError):
        tsinpaint.Model.load("/nonexistent/model.ckpt")
    assert issubclass(tsinpaint.ConfigError, tsinpaint.Error)
