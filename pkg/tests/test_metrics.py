"""PSNR / SSIM / MAE metrics and the evaluation report."""

import numpy as np
import pytest

from resflow.metrics import evaluate_pairs, mae, psnr, ssim


class TestPsnr:
    def test_identical_images_cap(self, rng):
        a = rng.uniform(-1, 1, (1, 16, 16))
        assert psnr(a, a) == 99.0

    def test_uniform_difference(self):
        a = np.zeros((8, 8))
        b = np.full((8, 8), 0.1)
        assert psnr(a, b, max_val=1.0) == pytest.approx(20.0, abs=1e-12)

    def test_symmetry(self, rng):
        a, b = rng.uniform(-1, 1, (2, 8, 8))
        assert psnr(a, b) == psnr(b, a)

    def test_decreases_with_noise_amplitude(self, rng):
        a = rng.uniform(-0.5, 0.5, (16, 16))
        noise = rng.normal(size=(16, 16))
        vals = [psnr(a, a + amp * noise) for amp in (0.01, 0.05, 0.1, 0.3)]
        assert all(x > y for x, y in zip(vals, vals[1:]))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            psnr(np.zeros((4, 4)), np.zeros((5, 5)))

    def test_permutation_invariance(self, rng):
        a, b = rng.uniform(-1, 1, (2, 16, 16))
        perm = rng.permutation(16 * 16)
        assert psnr(a.ravel()[perm], b.ravel()[perm]) == pytest.approx(
            psnr(a, b), abs=1e-12)


class TestMae:
    def test_identical_is_zero(self, rng):
        a = rng.uniform(-1, 1, (8, 8))
        assert mae(a, a) == 0.0

    def test_constant_offset(self, rng):
        a = rng.uniform(-0.4, 0.4, (8, 8))
        assert mae(a, a + 0.25) == pytest.approx(0.25, abs=1e-12)

    def test_matches_loop_oracle(self, rng):
        a, b = rng.uniform(-1, 1, (2, 6, 6))
        total = 0.0
        for i in range(6):
            for j in range(6):
                total += abs(a[i, j] - b[i, j])
        assert mae(a, b) == pytest.approx(total / 36, abs=1e-12)


class TestSsim:
    def test_identical_is_one(self, rng):
        a = rng.uniform(-1, 1, (1, 16, 16))
        assert ssim(a, a) == pytest.approx(1.0, abs=1e-12)

    def test_anticorrelated_nonpositive(self, rng):
        # zero mean within every window, so only the (negative)
        # structure term determines the sign
        a = rng.uniform(-1, 1, (16, 16))
        blocks = a.reshape(2, 8, 2, 8)
        a = (blocks - blocks.mean(axis=(1, 3), keepdims=True)).reshape(16, 16)
        assert ssim(a, -a) <= 0.0

    def test_constant_shift_matches_closed_form(self):
        # constant windows: variance/covariance vanish, only the mean term
        # (2 mu_a mu_b + c1) / (mu_a^2 + mu_b^2 + c1) remains
        a = np.full((8, 8), 0.2)
        b = np.full((8, 8), 0.7)
        c1 = (0.01 * 2.0) ** 2
        expected = (2 * 0.2 * 0.7 + c1) / (0.2 ** 2 + 0.7 ** 2 + c1)
        assert ssim(a, b) == pytest.approx(expected, rel=1e-12)

    def test_too_small_image_rejected(self):
        with pytest.raises(ValueError, match="window"):
            ssim(np.zeros((4, 4)), np.zeros((4, 4)), window=8)

    def test_block_permutation_invariance(self, rng):
        a, b = rng.uniform(-1, 1, (2, 16, 16))
        # swap the two vertical window-aligned halves of both images
        a2 = np.concatenate([a[8:], a[:8]])
        b2 = np.concatenate([b[8:], b[:8]])
        assert ssim(a2, b2) == pytest.approx(ssim(a, b), abs=1e-12)


class TestReport:
    def test_aggregate_is_mean_of_rows(self, rng):
        restored = rng.uniform(-1, 1, (5, 1, 16, 16))
        reference = rng.uniform(-1, 1, (5, 1, 16, 16))
        rep = evaluate_pairs(restored, reference)
        rows = rep.rows()
        assert len(rows) == 6 and rows[-1][0] == "mean"
        assert rows[-1][1] == pytest.approx(np.mean([r[1] for r in rows[:-1]]), abs=1e-9)
        assert rows[-1][2] == pytest.approx(np.mean([r[2] for r in rows[:-1]]), abs=1e-9)
        assert rows[-1][3] == pytest.approx(np.mean([r[3] for r in rows[:-1]]), abs=1e-9)

    def test_count_mismatch_rejected(self):
        with pytest.raises(ValueError, match="mismatch"):
            evaluate_pairs([np.zeros((8, 8))], [])

    def test_identical_pairs_hit_cap(self, rng):
        imgs = rng.uniform(-1, 1, (3, 1, 8, 8))
        rep = evaluate_pairs(imgs, imgs)
        assert rep.mean_psnr == 99.0
        assert rep.mean_ssim == pytest.approx(1.0, abs=1e-12)
        assert rep.mean_mae == 0.0
