"""Stage-one coarse fill: push-pull pyramid, backends, compositing."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hires_inpaint.coarse import (
    BackendError,
    CoarseConfig,
    coarse_fill,
    load_external_coarse,
    pyramid_fill,
)
from hires_inpaint.imagecore import ContractError, Image, Mask, save_image


def push_pull_oracle(img, mask):
    """Direct reimplementation: recursive masked-average pyramid."""
    values = img.data.astype(np.float64) * mask.data[:, :, None]
    weight = mask.data.astype(np.float64)

    def down(v, w):
        h, wd = w.shape
        ph, pw = h + h % 2, wd + wd % 2
        v2 = np.zeros((ph, pw, v.shape[2]))
        w2 = np.zeros((ph, pw))
        v2[:h, :wd], w2[:h, :wd] = v, w
        out_v = np.zeros((ph // 2, pw // 2, v.shape[2]))
        out_w = np.zeros((ph // 2, pw // 2))
        for i in range(ph // 2):
            for j in range(pw // 2):
                ws = w2[2 * i : 2 * i + 2, 2 * j : 2 * j + 2]
                vs = v2[2 * i : 2 * i + 2, 2 * j : 2 * j + 2]
                s = ws.sum()
                if s > 0:
                    out_v[i, j] = (vs * ws[:, :, None]).sum(axis=(0, 1)) / s
                    out_w[i, j] = 1.0
        return out_v, out_w

    levels = [(values, weight)]
    while not levels[-1][1].all() and levels[-1][1].shape != (1, 1):
        levels.append(down(*levels[-1]))
    filled = levels[-1][0]
    if not levels[-1][1].all():
        filled = np.where(levels[-1][1][:, :, None] > 0, filled, 0.5)
    for v, w in reversed(levels[:-1]):
        h, wd = w.shape
        up = np.repeat(np.repeat(filled, 2, axis=0), 2, axis=1)[:h, :wd]
        filled = np.where(w[:, :, None] > 0, v, up)
    return np.clip(filled, 0, 1)


class TestPyramidFill:
    def test_all_valid_returns_input(self):
        rng = np.random.default_rng(0)
        img = Image(rng.random((10, 10, 3), dtype=np.float32))
        out = pyramid_fill(img, Mask(np.ones((10, 10), np.uint8)))
        assert np.array_equal(out.data, img.data)

    def test_single_hole_gets_masked_mean(self):
        # 2x2, hole at (0,0), others {0.2, 0.4, 0.6} -> fill = 0.4
        data = np.array([[[0.0], [0.2]], [[0.4], [0.6]]], np.float32)
        mask = Mask(np.array([[0, 1], [1, 1]], np.uint8))
        out = pyramid_fill(Image(data), mask)
        assert out.data[0, 0, 0] == pytest.approx(0.4, abs=1e-6)
        assert np.array_equal(out.data[mask.data == 1], data[mask.data == 1])

    def test_constant_image_fixed_point(self):
        img = Image(np.full((16, 16, 3), 0.375, np.float32))
        mask_data = np.ones((16, 16), np.uint8)
        mask_data[4:12, 4:12] = 0
        out = pyramid_fill(img, Mask(mask_data))
        np.testing.assert_allclose(out.data, 0.375, atol=1e-6)

    def test_fill_values_within_valid_range(self):
        rng = np.random.default_rng(1)
        img = Image((rng.random((32, 32, 3)) * 0.5 + 0.25).astype(np.float32))
        mask_data = np.ones((32, 32), np.uint8)
        mask_data[8:24, 8:24] = 0
        out = pyramid_fill(img, Mask(mask_data))
        valid = img.data[mask_data == 1]
        assert out.data.min() >= valid.min() - 1e-6
        assert out.data.max() <= valid.max() + 1e-6

    def test_all_invalid_fills_half(self):
        img = Image(np.random.default_rng(2).random((8, 8, 3), dtype=np.float32))
        out = pyramid_fill(img, Mask(np.zeros((8, 8), np.uint8)))
        np.testing.assert_allclose(out.data, 0.5)

    @given(
        h=st.integers(2, 24), w=st.integers(2, 24),
        seed=st.integers(0, 1000),
    )
    @settings(max_examples=20, deadline=None)
    def test_matches_direct_reimplementation(self, h, w, seed):
        rng = np.random.default_rng(seed)
        img = Image(rng.random((h, w, 3), dtype=np.float32))
        mask = Mask((rng.random((h, w)) < 0.6).astype(np.uint8))
        out = pyramid_fill(img, mask)
        oracle = push_pull_oracle(img, mask)
        np.testing.assert_allclose(out.data, oracle, atol=1e-6)

    def test_never_alters_valid_pixels(self):
        rng = np.random.default_rng(3)
        img = Image(rng.random((23, 17, 3), dtype=np.float32))
        mask = Mask((rng.random((23, 17)) < 0.5).astype(np.uint8))
        out = pyramid_fill(img, mask)
        keep = mask.data == 1
        assert np.array_equal(out.data[keep], img.data[keep])


class TestCoarseFill:
    def test_all_ones_mask_returns_input(self):
        rng = np.random.default_rng(4)
        img = Image(rng.random((80, 80, 3), dtype=np.float32))
        res = coarse_fill(img, Mask(np.ones((80, 80), np.uint8)), CoarseConfig())
        assert np.array_equal(res.filled_full.data, img.data)

    def test_uniform_gray_stays_uniform(self):
        img = Image(np.full((64, 64, 3), 0.5, np.float32))
        mask_data = np.ones((64, 64), np.uint8)
        mask_data[20:40, 20:40] = 0
        res = coarse_fill(img, Mask(mask_data), CoarseConfig())
        np.testing.assert_allclose(res.filled_full.data, 0.5, atol=1e-6)

    def test_fill_bounded_by_border_values(self):
        data = np.zeros((64, 64, 3), np.float32)
        data[:, 32:] = 1.0
        mask_data = np.ones((64, 64), np.uint8)
        mask_data[24:40, 24:40] = 0
        res = coarse_fill(Image(data), Mask(mask_data), CoarseConfig())
        hole = res.filled_full.data[mask_data == 0]
        assert hole.min() >= 0.0 and hole.max() <= 1.0

    def test_known_region_bit_exact_with_downscale(self):
        rng = np.random.default_rng(5)
        img = Image(rng.random((160, 120, 3), dtype=np.float32))
        mask = Mask((rng.random((160, 120)) < 0.7).astype(np.uint8))
        res = coarse_fill(img, mask, CoarseConfig(working_size=64))
        keep = mask.data == 1
        assert np.array_equal(res.filled_full.data[keep], img.data[keep])

    def test_output_dims_match_input(self):
        rng = np.random.default_rng(6)
        img = Image(rng.random((130, 70, 3), dtype=np.float32))
        mask = Mask((rng.random((130, 70)) < 0.5).astype(np.uint8))
        res = coarse_fill(img, mask, CoarseConfig(working_size=64))
        assert (res.filled_full.height, res.filled_full.width) == (130, 70)

    def test_nearest_upscale_option(self):
        rng = np.random.default_rng(7)
        img = Image(rng.random((100, 100, 3), dtype=np.float32))
        mask_data = np.ones((100, 100), np.uint8)
        mask_data[40:60, 40:60] = 0
        cfg = CoarseConfig(working_size=64, upscale_method="nearest")
        res = coarse_fill(img, Mask(mask_data), cfg)
        keep = mask_data == 1
        assert np.array_equal(res.filled_full.data[keep], img.data[keep])

    def test_config_validation(self):
        with pytest.raises(ContractError):
            CoarseConfig(working_size=63)
        with pytest.raises(ContractError):
            CoarseConfig(upscale_method="cubic")
        with pytest.raises(ContractError):
            CoarseConfig(backend="diffusion")


class TestExternalBackend:
    def test_round_trip_within_quantization(self, tmp_path):
        rng = np.random.default_rng(8)
        img = Image(rng.random((64, 64, 3), dtype=np.float32))
        mask_data = np.ones((64, 64), np.uint8)
        mask_data[16:48, 16:48] = 0
        builtin = coarse_fill(img, Mask(mask_data), CoarseConfig())
        save_image(builtin.filled_full, tmp_path / "coarse.png")
        loaded = load_external_coarse(tmp_path / "coarse.png", 64, 64)
        assert np.abs(loaded.data - builtin.filled_full.data).max() <= 1 / 255 + 1e-7

    def test_wrong_size_rejected(self, tmp_path):
        rng = np.random.default_rng(9)
        save_image(Image(rng.random((32, 32, 3), dtype=np.float32)), tmp_path / "c.png")
        with pytest.raises(BackendError):
            load_external_coarse(tmp_path / "c.png", 64, 64)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(BackendError):
            load_external_coarse(tmp_path / "nope.png", 64, 64)
        cfg = CoarseConfig(backend="external_file", external_path=tmp_path / "nope.png")
        img = Image(np.zeros((64, 64, 3), np.float32))
        with pytest.raises(BackendError):
            coarse_fill(img, Mask(np.ones((64, 64), np.uint8)), cfg)

    def test_external_full_res_keeps_known_region(self, tmp_path):
        rng = np.random.default_rng(10)
        img = Image(rng.random((72, 72, 3), dtype=np.float32))
        mask = Mask((rng.random((72, 72)) < 0.6).astype(np.uint8))
        external = Image(rng.random((72, 72, 3), dtype=np.float32))
        save_image(external, tmp_path / "ext.png")
        cfg = CoarseConfig(backend="external_file", external_path=tmp_path / "ext.png")
        res = coarse_fill(img, mask, cfg)
        keep = mask.data == 1
        assert np.array_equal(res.filled_full.data[keep], img.data[keep])

    def test_external_working_res_upscaled(self, tmp_path):
        rng = np.random.default_rng(11)
        img = Image(rng.random((128, 128, 3), dtype=np.float32))
        mask = Mask((rng.random((128, 128)) < 0.6).astype(np.uint8))
        external = Image(rng.random((64, 64, 3), dtype=np.float32))
        save_image(external, tmp_path / "ext.png")
        cfg = CoarseConfig(
            working_size=64, backend="external_file", external_path=tmp_path / "ext.png"
        )
        res = coarse_fill(img, mask, cfg)
        keep = mask.data == 1
        assert np.array_equal(res.filled_full.data[keep], img.data[keep])

    def test_external_unrelated_size_rejected(self, tmp_path):
        rng = np.random.default_rng(12)
        img = Image(rng.random((128, 128, 3), dtype=np.float32))
        mask = Mask(np.ones((128, 128), np.uint8))
        save_image(Image(rng.random((48, 48, 3), dtype=np.float32)), tmp_path / "e.png")
        cfg = CoarseConfig(
            working_size=64, backend="external_file", external_path=tmp_path / "e.png"
        )
        with pytest.raises(BackendError):
            coarse_fill(img, mask, cfg)
