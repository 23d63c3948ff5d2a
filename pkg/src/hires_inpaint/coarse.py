"""Stage one: structural fill at the working resolution.

The coarse network sits behind a backend switch: `builtin_pyramid` is a
deterministic push-pull fill so the pipeline runs self-contained, while
`external_file` consumes a precomputed coarse raster (e.g. the output of a
pretrained network run offline). Either way the known region of the result
is composited bit-exactly from the source image.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imagecore import (
    ContractError,
    Image,
    Mask,
    composite,
    load_image,
    resize_bilinear,
    resize_nearest,
)


class BackendError(RuntimeError):
    """Raised when a coarse backend cannot produce a usable result."""


@dataclass(frozen=True)
class CoarseConfig:
    working_size: int = 512
    upscale_method: str = "bilinear"  # or "nearest"
    backend: str = "builtin_pyramid"  # or "external_file"
    external_path: Path | None = None

    def __post_init__(self):
        if self.working_size < 64 or self.working_size % 2 != 0:
            raise ContractError("working size must be even and >= 64")
        if self.upscale_method not in ("nearest", "bilinear"):
            raise ContractError(f"unknown upscale method {self.upscale_method!r}")
        if self.backend not in ("builtin_pyramid", "external_file"):
            raise ContractError(f"unknown coarse backend {self.backend!r}")


@dataclass(frozen=True)
class CoarseResult:
    filled_full: Image
    mask: Mask


def _downsample_masked(values: np.ndarray, weight: np.ndarray):
    """Masked 2x2 average; a parent pixel is valid if any child is valid."""
    h, w = weight.shape
    ph, pw = h + (h % 2), w + (w % 2)
    if (ph, pw) != (h, w):
        values = np.pad(values, ((0, ph - h), (0, pw - w), (0, 0)))
        weight = np.pad(weight, ((0, ph - h), (0, pw - w)))
    v = values.reshape(ph // 2, 2, pw // 2, 2, -1)
    m = weight.reshape(ph // 2, 2, pw // 2, 2)
    wsum = m.sum(axis=(1, 3))
    vsum = (v * m[:, :, :, :, None]).sum(axis=(1, 3))
    safe = np.maximum(wsum, 1e-12)[:, :, None]
    return vsum / safe, (wsum > 0).astype(np.float64)


def pyramid_fill(img: Image, mask: Mask) -> Image:
    """Push-pull fill: average valid pixels down, push values back into holes.

    Known pixels are returned unchanged; every filled value is a convex
    combination of valid input values. An all-invalid mask fills with 0.5.
    """
    if (mask.height, mask.width) != (img.height, img.width):
        raise ContractError("image and mask must share dimensions")
    if mask.data.all():
        return img
    if not mask.data.any():
        return Image(np.full_like(img.data, 0.5))

    values = img.data.astype(np.float64) * mask.data[:, :, None]
    weight = mask.data.astype(np.float64)
    levels = [(values, weight)]
    while not levels[-1][1].all() and levels[-1][1].shape != (1, 1):
        levels.append(_downsample_masked(*levels[-1]))

    filled = levels[-1][0]
    if not levels[-1][1].all():
        filled = np.where(levels[-1][1][:, :, None] > 0, filled, 0.5)
    for values, weight in reversed(levels[:-1]):
        h, w = weight.shape
        up = np.repeat(np.repeat(filled, 2, axis=0), 2, axis=1)[:h, :w]
        filled = np.where(weight[:, :, None] > 0, values, up)
    return Image(np.clip(filled, 0.0, 1.0).astype(np.float32))


def load_external_coarse(path: str | Path, expected_h: int, expected_w: int) -> Image:
    """Load a precomputed coarse raster, validating its size."""
    path = Path(path)
    if not path.exists():
        raise BackendError(f"external coarse file missing: {path}")
    img = load_image(path)
    if (img.height, img.width) != (expected_h, expected_w):
        raise BackendError(
            f"external coarse {img.height}x{img.width} does not match "
            f"expected {expected_h}x{expected_w}"
        )
    return img


def _upscale(img: Image, out_h: int, out_w: int, method: str) -> Image:
    if method == "nearest":
        return resize_nearest(img, out_h, out_w)
    return resize_bilinear(img, out_h, out_w)


def coarse_fill(img: Image, mask: Mask, cfg: CoarseConfig) -> CoarseResult:
    """Downscale, fill with the selected backend, upscale, composite.

    Inputs smaller than the working size on either axis run at native size.
    The known region of the output is bit-exact from the source image.
    """
    if (mask.height, mask.width) != (img.height, img.width):
        raise ContractError("image and mask must share dimensions")
    h, w = img.height, img.width
    ws = cfg.working_size
    at_native = h <= ws and w <= ws

    if cfg.backend == "external_file":
        if cfg.external_path is None:
            raise BackendError("external_file backend requires external_path")
        ext = Path(cfg.external_path)
        probe = load_image(ext) if ext.exists() else None
        if probe is None:
            raise BackendError(f"external coarse file missing: {ext}")
        if (probe.height, probe.width) == (h, w):
            filled_full = probe
        elif (probe.height, probe.width) == (ws, ws) and not at_native:
            filled_full = _upscale(probe, h, w, cfg.upscale_method)
        else:
            raise BackendError(
                f"external coarse {probe.height}x{probe.width} matches neither "
                f"source {h}x{w} nor working {ws}x{ws}"
            )
    else:
        if at_native:
            filled_full = pyramid_fill(img, mask)
        else:
            small_img = resize_nearest(img, ws, ws)
            small_mask = resize_nearest(mask, ws, ws)
            filled_small = pyramid_fill(small_img, small_mask)
            filled_full = _upscale(filled_small, h, w, cfg.upscale_method)

    return CoarseResult(composite(img, filled_full, mask), mask)
