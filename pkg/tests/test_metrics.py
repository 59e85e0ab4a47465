import math

import numpy as np
import pytest

from garmentuv.errors import ValidationError
from garmentuv.metrics import (
    SSIM_C1,
    MetricReport,
    nmse,
    psnr,
    ssim,
)
from garmentuv.model import AnnotationSet, LandmarkPoint


def ann(points, size=(800, 600), visible=None, kind="tshirt"):
    lms = tuple(
        LandmarkPoint(i, float(x), float(y), True if visible is None else visible[i])
        for i, (x, y) in enumerate(points)
    )
    return AnnotationSet("img", size, kind, lms)


BASE_POINTS = [(100 + 40 * i, 80 + 25 * i) for i in range(8)]


class TestNmse:
    def test_identical_sets_zero(self):
        a = ann(BASE_POINTS)
        assert nmse(a, a) == 0.0

    def test_uniform_offset_closed_form(self):
        # (3, 4) offset on an 800x600 image: diagonal is 1000, so each
        # landmark contributes 25 / 10^6.
        gt = ann(BASE_POINTS, size=(800, 600))
        pred = ann([(x + 3, y + 4) for x, y in BASE_POINTS], size=(800, 600))
        assert nmse(pred, gt) == pytest.approx(2.5e-5, abs=1e-12)

    def test_symmetry_and_nonnegativity(self):
        rng = np.random.default_rng(40)
        a = ann(rng.uniform(10, 500, (8, 2)).tolist())
        b = ann(rng.uniform(10, 500, (8, 2)).tolist())
        assert nmse(a, b) == nmse(b, a)
        assert nmse(a, b) >= 0

    def test_joint_translation_invariance(self):
        a = ann(BASE_POINTS)
        b = ann([(x + 11, y - 7) for x, y in BASE_POINTS])
        shift = (25.0, 13.0)
        a2 = ann([(x + shift[0], y + shift[1]) for x, y in BASE_POINTS])
        b2 = ann([(x + 11 + shift[0], y - 7 + shift[1]) for x, y in BASE_POINTS])
        assert nmse(a, b) == pytest.approx(nmse(a2, b2), rel=1e-12)

    def test_only_gt_visible_landmarks_evaluated(self):
        gt = ann(BASE_POINTS, visible=[True] * 7 + [False])
        moved = [(x, y) for x, y in BASE_POINTS]
        moved[7] = (0.0, 0.0)  # hidden in gt; must not count
        pred = ann(moved)
        assert nmse(pred, gt) == 0.0

    def test_size_mismatch_rejected(self):
        with pytest.raises(ValidationError, match="size mismatch"):
            nmse(ann(BASE_POINTS, size=(800, 600)), ann(BASE_POINTS, size=(640, 480)))

    def test_no_visible_landmarks_rejected(self):
        gt = ann(BASE_POINTS, visible=[False] * 8)
        with pytest.raises(ValidationError, match="no visible"):
            nmse(ann(BASE_POINTS), gt)


class TestPsnr:
    def test_identical_is_infinite(self):
        rng = np.random.default_rng(41)
        a = rng.integers(0, 256, (32, 32, 4), dtype=np.uint8)
        assert psnr(a, a) == math.inf

    def test_plus_one_closed_form(self):
        rng = np.random.default_rng(42)
        a = rng.integers(0, 255, (64, 64, 4), dtype=np.uint8)  # max 254: no clipping
        b = a.copy()
        b[:, :, :3] += 1
        assert psnr(a, b) == pytest.approx(20 * math.log10(255), abs=1e-9)

    def test_alpha_ignored(self):
        rng = np.random.default_rng(43)
        a = rng.integers(0, 256, (16, 16, 4), dtype=np.uint8)
        b = a.copy()
        b[:, :, 3] = 0
        assert psnr(a, b) == math.inf

    def test_mask_restricts_comparison(self):
        a = np.zeros((8, 8, 4), dtype=np.uint8)
        b = a.copy()
        b[0, 0, 0] = 200
        mask = np.ones((8, 8), dtype=bool)
        mask[0, 0] = False
        assert psnr(a, b, mask) == math.inf
        assert psnr(a, b) < math.inf

    def test_monotone_in_noise_amplitude(self):
        rng = np.random.default_rng(44)
        a = rng.integers(60, 196, (64, 64, 4), dtype=np.uint8)
        values = []
        for amp in (1, 4, 16):
            noise = rng.integers(-amp, amp + 1, (64, 64, 3))
            b = a.copy().astype(int)
            b[:, :, :3] = np.clip(b[:, :, :3] + noise, 0, 255)
            values.append(psnr(a, b.astype(np.uint8)))
        assert values[0] > values[1] > values[2]

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            psnr(np.zeros((4, 4, 4), np.uint8), np.zeros((5, 4, 4), np.uint8))

    def test_empty_mask_rejected(self):
        a = np.zeros((4, 4, 4), np.uint8)
        with pytest.raises(ValidationError, match="empty mask"):
            psnr(a, a, np.zeros((4, 4), dtype=bool))


class TestSsim:
    def test_self_similarity_is_exactly_one(self):
        rng = np.random.default_rng(45)
        a = rng.integers(0, 256, (48, 40, 4), dtype=np.uint8)
        assert ssim(a, a) == 1.0

    def test_constant_black_vs_white_closed_form(self):
        a = np.zeros((32, 32, 4), dtype=np.uint8)
        b = np.full((32, 32, 4), 255, dtype=np.uint8)
        expected = SSIM_C1 / (255.0**2 + SSIM_C1)
        assert ssim(a, b) == pytest.approx(expected, rel=1e-9)

    def test_symmetric(self):
        rng = np.random.default_rng(46)
        a = rng.integers(0, 256, (32, 32, 4), dtype=np.uint8)
        b = rng.integers(0, 256, (32, 32, 4), dtype=np.uint8)
        assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)

    def test_too_small_image_rejected(self):
        a = np.zeros((8, 8, 4), dtype=np.uint8)
        with pytest.raises(ValidationError, match="window"):
            ssim(a, a)

    def test_degrades_with_noise(self):
        rng = np.random.default_rng(47)
        a = rng.integers(60, 196, (64, 64, 4), dtype=np.uint8)
        noisy = a.copy().astype(int)
        noisy[:, :, :3] = np.clip(
            noisy[:, :, :3] + rng.integers(-40, 41, (64, 64, 3)), 0, 255
        )
        assert ssim(a, noisy.astype(np.uint8)) < ssim(a, a)


class TestMetricReport:
    def test_value_is_mean_of_details(self):
        r = MetricReport("psnr", [30.0, 40.0, 50.0])
        assert r.value == 40.0
        assert r.count == 3

    def test_empty_report_has_no_value(self):
        with pytest.raises(ValidationError):
            MetricReport("nmse").value
