"""Shift stacks, irregular masks, dataset prep, patch sampling."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hires_inpaint.imagecore import ContractError, Image, Mask, save_image
from hires_inpaint.shiftstack import (
    MaskGenConfig,
    Manifest,
    PatchSpec,
    SamplingExhaustedError,
    assemble_stack,
    extract_patch,
    generate_irregular_mask,
    load_stack_dir,
    make_shift,
    prepare_dataset,
    sample_patch,
    save_stack_dir,
    shift_amounts,
)


def rand_pair(rng, h, w):
    img = Image(rng.random((h, w, 3), dtype=np.float32))
    mask = Mask((rng.random((h, w)) < 0.6).astype(np.uint8))
    return img, mask


def shift_oracle(img_data, mask_data, dx, dy):
    """Direct per-pixel loop implementing the shift contract."""
    h, w = mask_data.shape
    out_img = np.zeros_like(img_data)
    out_msk = np.zeros_like(mask_data)
    for i in range(h):
        for j in range(w):
            si, sj = i - dy, j - dx
            if 0 <= si < h and 0 <= sj < w:
                out_img[i, j] = img_data[si, sj]
                out_msk[i, j] = mask_data[si, sj]
    return out_img, out_msk


class TestMakeShift:
    def test_zero_shift_is_identity(self):
        rng = np.random.default_rng(0)
        img, mask = rand_pair(rng, 6, 7)
        s_img, s_msk = make_shift(img, mask, 0, 0)
        assert np.array_equal(s_img.data, img.data)
        assert np.array_equal(s_msk.data, mask.data)

    def test_right_shift_invalidates_first_column(self):
        img = Image(np.ones((4, 4, 3), np.float32))
        mask = Mask(np.ones((4, 4), np.uint8))
        _, s_msk = make_shift(img, mask, 1, 0)
        assert (s_msk.data[:, 0] == 0).all()
        assert (s_msk.data[:, 1:] == 1).all()
        assert s_msk.data.sum() == 4 * 3

    def test_shift_then_unshift_restores_center(self):
        rng = np.random.default_rng(1)
        img, mask = rand_pair(rng, 10, 10)
        mask = Mask(np.ones((10, 10), np.uint8))
        fwd_img, fwd_msk = make_shift(img, mask, 2, 0)
        back_img, back_msk = make_shift(fwd_img, fwd_msk, -2, 0)
        # columns with sources under both shifts: 2..7 (10 - 2*2 = 6 wide)
        assert np.array_equal(back_img.data[:, 2:8], img.data[:, 2:8])
        assert (back_msk.data[:, 2:8] == 1).all()

    @given(
        h=st.integers(2, 32), w=st.integers(2, 32),
        dx=st.integers(-31, 31), dy=st.integers(-31, 31),
        seed=st.integers(0, 10_000),
    )
    @settings(max_examples=60, deadline=None)
    def test_matches_brute_force_oracle(self, h, w, dx, dy, seed):
        if abs(dx) >= w or abs(dy) >= h:
            return
        rng = np.random.default_rng(seed)
        img, mask = rand_pair(rng, h, w)
        s_img, s_msk = make_shift(img, mask, dx, dy)
        o_img, o_msk = shift_oracle(img.data, mask.data, dx, dy)
        assert np.array_equal(s_img.data, o_img)
        assert np.array_equal(s_msk.data, o_msk)
        # valid count equals valid source pixels inside the overlap window
        overlap = mask.data[
            max(0, -dy) : h - max(0, dy), max(0, -dx) : w - max(0, dx)
        ]
        assert s_msk.data.sum() == overlap.sum()

    def test_shift_composition(self):
        rng = np.random.default_rng(2)
        img, mask = rand_pair(rng, 12, 12)
        once_img, once_msk = make_shift(img, mask, 3, 0)
        twice_img, twice_msk = make_shift(once_img, once_msk, 2, 0)
        direct_img, direct_msk = make_shift(img, mask, 5, 0)
        # composed mask: valid only where both steps had sources
        assert (twice_msk.data <= direct_msk.data).all()
        both = twice_msk.data.astype(bool)
        assert np.array_equal(twice_img.data[both], direct_img.data[both])

    def test_oversized_shift_rejected(self):
        rng = np.random.default_rng(3)
        img, mask = rand_pair(rng, 4, 4)
        with pytest.raises(ContractError):
            make_shift(img, mask, 4, 0)


class TestAssembleStack:
    def test_paper_shift_amount_512(self):
        # 20% of 512 = 102.4 -> 102
        assert shift_amounts(512, 512, 0.20) == (102, 102)

    def test_per_axis_amounts(self):
        sx, sy = shift_amounts(50, 100, 0.20)
        assert (sx, sy) == (20, 10)

    def test_stack_has_20_channels(self):
        rng = np.random.default_rng(4)
        img, mask = rand_pair(rng, 20, 20)
        stack = assemble_stack(img, mask, 0.2)
        assert stack.channel_count == 20
        assert len(stack.images) == 5 and len(stack.masks) == 5

    def test_slot0_is_unshifted(self):
        rng = np.random.default_rng(5)
        img, mask = rand_pair(rng, 16, 16)
        stack = assemble_stack(img, mask, 0.2)
        assert np.array_equal(stack.images[0].data, img.data)
        assert np.array_equal(stack.masks[0].data, mask.data)

    def test_band_areas_on_fully_valid_mask(self):
        img = Image(np.zeros((30, 40, 3), np.float32))
        mask = Mask(np.ones((30, 40), np.uint8))
        stack = assemble_stack(img, mask, 0.2)
        sx, sy = shift_amounts(30, 40, 0.2)
        # left/right: band is sx wide over full height; down/up: sy x width
        assert (stack.masks[1].data == 0).sum() == sx * 30
        assert (stack.masks[2].data == 0).sum() == sx * 30
        assert (stack.masks[3].data == 0).sum() == sy * 40
        assert (stack.masks[4].data == 0).sum() == sy * 40

    def test_shift_directions(self):
        # single valid pixel at center; check where each slot moves it
        h = w = 11
        img_data = np.zeros((h, w, 3), np.float32)
        img_data[5, 5] = 1.0
        mask = Mask(np.ones((h, w), np.uint8))
        stack = assemble_stack(Image(img_data), mask, 0.2)
        sx, sy = shift_amounts(h, w, 0.2)
        assert stack.images[1].data[5, 5 - sx, 0] == 1.0  # left
        assert stack.images[2].data[5, 5 + sx, 0] == 1.0  # right
        assert stack.images[3].data[5 + sy, 5, 0] == 1.0  # down
        assert stack.images[4].data[5 - sy, 5, 0] == 1.0  # up

    def test_bad_fraction_rejected(self):
        rng = np.random.default_rng(6)
        img, mask = rand_pair(rng, 8, 8)
        with pytest.raises(ContractError):
            assemble_stack(img, mask, 0.0)


class TestPatchSampling:
    def make_stack(self, mask_data):
        h, w = mask_data.shape
        img = Image(np.zeros((h, w, 3), np.float32))
        return assemble_stack(img, Mask(mask_data.astype(np.uint8)), 0.2)

    def test_fully_valid_mask_exhausts(self):
        stack = self.make_stack(np.ones((64, 64)))
        with pytest.raises(SamplingExhaustedError):
            sample_patch(stack, 32, np.random.default_rng(0), max_tries=16)

    def test_half_holed_always_accepted(self):
        mask = np.ones((64, 64))
        mask[:, ::2] = 0  # every window of even width is exactly half holed
        stack = self.make_stack(mask)
        spec = sample_patch(stack, 32, np.random.default_rng(0), max_tries=1)
        assert spec.hole_fraction == 0.5

    def test_windows_overlap_centered_hole(self):
        mask = np.ones((256, 256))
        mask[64:192, 64:192] = 0
        stack = self.make_stack(mask)
        rng = np.random.default_rng(1)
        for _ in range(50):
            spec = sample_patch(stack, 128, rng)
            window = stack.masks[0].data[
                spec.top : spec.top + 128, spec.left : spec.left + 128
            ]
            recount = float((window == 0).mean())
            assert 0.10 <= recount <= 0.90
            assert recount == pytest.approx(spec.hole_fraction)

    def test_too_small_stack_rejected(self):
        stack = self.make_stack(np.ones((32, 32)))
        with pytest.raises(ContractError):
            sample_patch(stack, 64, np.random.default_rng(0))

    def test_patchspec_validates_fraction(self):
        with pytest.raises(ContractError):
            PatchSpec(0, 0, 32, hole_fraction=0.05)


class TestExtractPatch:
    def test_full_window_is_identity(self):
        rng = np.random.default_rng(7)
        img, mask = rand_pair(rng, 24, 24)
        stack = assemble_stack(img, mask, 0.2)
        out = extract_patch(stack, PatchSpec(0, 0, 24))
        for a, b in zip(out.images, stack.images):
            assert np.array_equal(a.data, b.data)
        assert out.shift_fraction == stack.shift_fraction

    def test_crop_of_band_pattern(self):
        img = Image(np.zeros((40, 40, 3), np.float32))
        mask = Mask(np.ones((40, 40), np.uint8))
        stack = assemble_stack(img, mask, 0.2)
        sx, _ = shift_amounts(40, 40, 0.2)
        out = extract_patch(stack, PatchSpec(0, 0, 16))
        # right shift: columns < sx invalid in parent; crop keeps cols 0..15
        expected = stack.masks[2].data[:16, :16]
        assert np.array_equal(out.masks[2].data, expected)
        assert (out.masks[2].data[:, :sx] == 0).all()

    def test_crop_composition(self):
        rng = np.random.default_rng(8)
        img, mask = rand_pair(rng, 32, 32)
        stack = assemble_stack(img, mask, 0.2)
        once = extract_patch(stack, PatchSpec(4, 6, 20))
        twice = extract_patch(once, PatchSpec(2, 3, 10))
        direct = extract_patch(stack, PatchSpec(6, 9, 10))
        for a, b in zip(twice.images, direct.images):
            assert np.array_equal(a.data, b.data)
        for a, b in zip(twice.masks, direct.masks):
            assert np.array_equal(a.data, b.data)

    def test_out_of_bounds_rejected(self):
        rng = np.random.default_rng(9)
        img, mask = rand_pair(rng, 16, 16)
        stack = assemble_stack(img, mask, 0.2)
        with pytest.raises(ContractError):
            extract_patch(stack, PatchSpec(8, 8, 16))


class TestMaskGen:
    def test_zero_strokes_gives_all_ones(self):
        cfg = MaskGenConfig(stroke_count_range=(0, 0), seed=0)
        mask = generate_irregular_mask(64, 64, cfg)
        assert (mask.data == 1).all()

    def test_fixed_seed_is_deterministic(self):
        cfg = MaskGenConfig(seed=42)
        a = generate_irregular_mask(128, 128, cfg)
        b = generate_irregular_mask(128, 128, cfg)
        assert np.array_equal(a.data, b.data)

    def test_different_seeds_differ(self):
        a = generate_irregular_mask(128, 128, MaskGenConfig(seed=1))
        b = generate_irregular_mask(128, 128, MaskGenConfig(seed=2))
        assert not np.array_equal(a.data, b.data)

    def test_calibration_mean_hole_fraction(self):
        # default config on 512x512: empirical mean hole fraction inside [0.05, 0.50]
        fractions = [
            generate_irregular_mask(512, 512, MaskGenConfig(seed=s)).hole_fraction
            for s in range(60)
        ]
        assert 0.05 <= float(np.mean(fractions)) <= 0.50

    def test_too_small_canvas_rejected(self):
        with pytest.raises(ContractError):
            generate_irregular_mask(32, 64, MaskGenConfig())


class TestPrepareDataset:
    def write_sources(self, tmp_path, shapes, seed=0):
        rng = np.random.default_rng(seed)
        src = tmp_path / "src"
        src.mkdir()
        for i, (h, w) in enumerate(shapes):
            save_image(
                Image(rng.random((h, w, 3), dtype=np.float32)), src / f"im{i}.png"
            )
        return src

    def test_square_source_yields_identical_crops(self, tmp_path):
        src = self.write_sources(tmp_path, [(64, 64)])
        manifest = prepare_dataset(src, tmp_path / "out", 3, working_size=64)
        assert len(manifest.entries) == 3
        for e in manifest.entries:
            assert e.offset == (0, 0) and e.side == 64

    def test_rect_source_offsets_in_range(self, tmp_path):
        src = self.write_sources(tmp_path, [(200, 300)])
        manifest = prepare_dataset(
            src, tmp_path / "out", 5, np.random.default_rng(0), working_size=128
        )
        for e in manifest.entries:
            assert e.side == 200
            top, left = e.offset
            assert top == 0 and 0 <= left <= 100

    def test_entry_count_scales(self, tmp_path):
        src = self.write_sources(tmp_path, [(70, 70)] * 10)
        manifest = prepare_dataset(src, tmp_path / "out", 3, working_size=64)
        assert len(manifest.entries) == 30

    def test_manifest_round_trip(self, tmp_path):
        src = self.write_sources(tmp_path, [(64, 80)])
        manifest = prepare_dataset(src, tmp_path / "out", 2, working_size=64)
        loaded = Manifest.from_json((tmp_path / "out" / "manifest.json").read_text())
        assert loaded == manifest

    def test_empty_directory_rejected(self, tmp_path):
        (tmp_path / "empty").mkdir()
        from hires_inpaint.shiftstack import DatasetError

        with pytest.raises(DatasetError):
            prepare_dataset(tmp_path / "empty", tmp_path / "out", 3)

    def test_deterministic_given_rng_seed(self, tmp_path):
        src = self.write_sources(tmp_path, [(90, 120), (100, 70)])
        m1 = prepare_dataset(src, tmp_path / "o1", 3, np.random.default_rng(5), 64)
        m2 = prepare_dataset(src, tmp_path / "o2", 3, np.random.default_rng(5), 64)
        assert [e.offset for e in m1.entries] == [e.offset for e in m2.entries]


def test_stack_dir_round_trip(tmp_path):
    rng = np.random.default_rng(10)
    img = Image(np.round(rng.random((24, 24, 3)) * 255).astype(np.float32) / 255)
    mask = Mask((rng.random((24, 24)) < 0.5).astype(np.uint8))
    stack = assemble_stack(img, mask, 0.25)
    save_stack_dir(stack, tmp_path / "stack")
    meta = json.loads((tmp_path / "stack" / "meta.json").read_text())
    assert meta["shift_fraction"] == 0.25
    back = load_stack_dir(tmp_path / "stack")
    for a, b in zip(back.images, stack.images):
        assert np.abs(a.data - b.data).max() <= 1 / 255 + 1e-7
    for a, b in zip(back.masks, stack.masks):
        assert np.array_equal(a.data, b.data)
