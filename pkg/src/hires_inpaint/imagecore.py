"""Image and mask primitives shared by the whole pipeline.

Images are float rasters in [0, 1], masks are strictly binary validity maps
(1 = known pixel, 0 = hole). Both wrap read-only numpy arrays so values can
be shared freely between threads; every operation returns a fresh value.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage, UnidentifiedImageError


class ContractError(ValueError):
    """Raised when an operation's preconditions are violated."""


class FormatError(ValueError):
    """Raised for unsupported or undecodable raster files."""


SUPPORTED_SUFFIXES = {".png", ".ppm", ".pgm"}


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Image:
    """H x W x C float raster with samples in [0, 1], C is 1 or 3."""

    data: np.ndarray

    def __post_init__(self):
        d = self.data
        if d.ndim != 3 or d.shape[2] not in (1, 3):
            raise ContractError(f"image data must be (H, W, 1|3), got {d.shape}")
        if d.dtype != np.float32:
            d = d.astype(np.float32)
        if d.size and (d.min() < 0.0 or d.max() > 1.0):
            raise ContractError("image samples must lie in [0, 1]")
        object.__setattr__(self, "data", _freeze(d))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def allclose(self, other: "Image", tol: float = 0.0) -> bool:
        return self.data.shape == other.data.shape and bool(
            np.max(np.abs(self.data - other.data), initial=0.0) <= tol
        )


@dataclass(frozen=True)
class Mask:
    """H x W binary validity map; 1 = known pixel, 0 = hole."""

    data: np.ndarray

    def __post_init__(self):
        d = self.data
        if d.ndim != 2:
            raise ContractError(f"mask data must be (H, W), got {d.shape}")
        if d.size and not np.isin(d, (0, 1)).all():
            raise ContractError("mask values must be exactly 0 or 1")
        if d.dtype != np.uint8:
            d = d.astype(np.uint8)
        object.__setattr__(self, "data", _freeze(d))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def hole_fraction(self) -> float:
        return float(np.mean(self.data == 0))

    def inverted(self) -> "Mask":
        return Mask(1 - self.data)


def image_from_float(arr: np.ndarray) -> Image:
    """Wrap a float array (H, W) or (H, W, C), clipping to [0, 1]."""
    arr = np.asarray(arr, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return Image(np.clip(arr, 0.0, 1.0))


def mask_from_bool(arr: np.ndarray) -> Mask:
    """Wrap a boolean/soft array as a binary mask (threshold 0.5, True = known)."""
    arr = np.asarray(arr)
    if arr.dtype != np.bool_:
        arr = np.asarray(arr, dtype=np.float32) >= 0.5
    return Mask(arr.astype(np.uint8))


def to_rgb(img: Image) -> Image:
    """Replicate a single-channel image to 3 channels; RGB passes through."""
    if img.channels == 3:
        return img
    return Image(np.repeat(img.data, 3, axis=2))


def load_image(path: str | Path) -> Image:
    """Load a PNG/PPM/PGM raster as an Image; 8-bit value v maps to v/255."""
    path = Path(path)
    if path.suffix.lower() not in SUPPORTED_SUFFIXES:
        raise FormatError(f"unsupported raster format: {path.suffix!r}")
    try:
        with PILImage.open(path) as im:
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB" if im.mode not in ("1", "I;16", "LA") else "L")
            arr = np.asarray(im, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise FormatError(f"cannot decode {path}: {exc}") from exc
    except OSError as exc:
        raise IOError(f"cannot read {path}: {exc}") from exc
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return Image(arr.astype(np.float32) / 255.0)


def save_image(img: Image, path: str | Path) -> None:
    """Write an Image as 8-bit PNG/PPM/PGM; sample s maps to round(s*255)."""
    path = Path(path)
    if path.suffix.lower() not in SUPPORTED_SUFFIXES:
        raise FormatError(f"unsupported raster format: {path.suffix!r}")
    arr = np.clip(np.rint(img.data * 255.0), 0, 255).astype(np.uint8)
    pil = PILImage.fromarray(arr[:, :, 0] if img.channels == 1 else arr)
    try:
        pil.save(path)
    except OSError as exc:
        raise IOError(f"cannot write {path}: {exc}") from exc


def load_mask(path: str | Path) -> Mask:
    """Load a mask raster (0 = hole, 255 = known); soft values threshold at 0.5."""
    img = load_image(path)
    gray = img.data.mean(axis=2)
    return mask_from_bool(gray >= 0.5)


def save_mask(mask: Mask, path: str | Path) -> None:
    """Write a mask as single-channel raster, 0 = hole, 255 = known."""
    save_image(Image(mask.data.astype(np.float32)[:, :, None]), path)


def _nearest_indices(out_n: int, in_n: int) -> np.ndarray:
    # pixel-center mapping: floor((i + 0.5) * in/out), clipped for safety
    idx = np.floor((np.arange(out_n) + 0.5) * (in_n / out_n)).astype(np.int64)
    return np.clip(idx, 0, in_n - 1)


def resize_nearest(img, out_h: int, out_w: int):
    """Nearest-neighbor resize of an Image or Mask (pixel-center convention)."""
    if out_h < 1 or out_w < 1:
        raise ContractError("output dimensions must be >= 1")
    rows = _nearest_indices(out_h, img.height)
    cols = _nearest_indices(out_w, img.width)
    data = img.data[np.ix_(rows, cols)]
    return Mask(data) if isinstance(img, Mask) else Image(data)


def resize_bilinear(img: Image, out_h: int, out_w: int) -> Image:
    """Bilinear resize with half-pixel centers; used for the coarse upscale."""
    if out_h < 1 or out_w < 1:
        raise ContractError("output dimensions must be >= 1")
    h, w = img.height, img.width
    ys = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0, h - 1)
    xs = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0, w - 1)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0).astype(np.float32)[:, None, None]
    wx = (xs - x0).astype(np.float32)[None, :, None]
    d = img.data
    top = d[np.ix_(y0, x0)] * (1 - wx) + d[np.ix_(y0, x1)] * wx
    bot = d[np.ix_(y1, x0)] * (1 - wx) + d[np.ix_(y1, x1)] * wx
    return Image(np.clip(top * (1 - wy) + bot * wy, 0.0, 1.0))


def composite(base: Image, patch: Image, mask: Mask) -> Image:
    """mask * base + (1 - mask) * patch, bit-exact copy of base where mask = 1."""
    if (base.height, base.width) != (patch.height, patch.width) or (
        base.height,
        base.width,
    ) != (mask.height, mask.width):
        raise ContractError("composite inputs must share dimensions")
    if base.channels != patch.channels:
        raise ContractError("composite base/patch must share channel count")
    keep = mask.data.astype(bool)[:, :, None]
    return Image(np.where(keep, base.data, patch.data))
