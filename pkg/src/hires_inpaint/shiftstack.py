"""Shift-stack construction, irregular masks, dataset prep, patch sampling.

The refinement network's input is a 20-channel stack: the main RGB image
plus four directional shifts of it, and the five matching validity masks.
Shifts expose a band with no source pixels; that band is marked invalid so
downstream code never trusts the fill value.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .imagecore import (
    ContractError,
    Image,
    Mask,
    load_image,
    load_mask,
    resize_nearest,
    save_image,
    save_mask,
)

SLOT_NAMES = ("main", "left", "right", "down", "up")
# Channel layout contract for checkpoints: 5 RGB images then 5 masks,
# slots ordered main/left/right/down/up.
CHANNEL_ORDER_TAG = "imgs[main,left,right,down,up]+masks[main,left,right,down,up]"

DEFAULT_SHIFT_FRACTION = 0.20


class SamplingExhaustedError(RuntimeError):
    """No qualifying patch window found within the allowed attempts."""


class DatasetError(RuntimeError):
    """Raised for unusable dataset sources."""


@dataclass(frozen=True)
class ShiftStack:
    """Five image/mask pairs (main plus four shifts) sharing one geometry."""

    images: tuple[Image, ...]
    masks: tuple[Mask, ...]
    shift_fraction: float = DEFAULT_SHIFT_FRACTION

    def __post_init__(self):
        if len(self.images) != 5 or len(self.masks) != 5:
            raise ContractError("a shift stack holds exactly 5 image/mask pairs")
        h, w = self.images[0].height, self.images[0].width
        for im in self.images:
            if im.channels != 3 or (im.height, im.width) != (h, w):
                raise ContractError("stack images must be RGB with shared dims")
        for m in self.masks:
            if (m.height, m.width) != (h, w):
                raise ContractError("stack masks must share image dims")

    @property
    def height(self) -> int:
        return self.images[0].height

    @property
    def width(self) -> int:
        return self.images[0].width

    @property
    def channel_count(self) -> int:
        return sum(im.channels for im in self.images) + len(self.masks)


@dataclass(frozen=True)
class PatchSpec:
    """A square training window plus its recounted main-mask hole fraction."""

    top: int
    left: int
    size: int = 512
    hole_fraction: float = 0.5

    def __post_init__(self):
        if not (0.10 <= self.hole_fraction <= 0.90):
            raise ContractError(
                f"patch hole fraction {self.hole_fraction:.4f} outside [0.10, 0.90]"
            )


@dataclass(frozen=True)
class MaskGenConfig:
    """Procedural irregular-mask generator settings (polyline strokes)."""

    stroke_count_range: tuple[int, int] = (3, 6)
    stroke_width_range: tuple[int, int] = (10, 28)
    vertex_count_range: tuple[int, int] = (4, 10)
    seed: int = 0

    def __post_init__(self):
        for lo, hi in (
            self.stroke_count_range,
            self.stroke_width_range,
            self.vertex_count_range,
        ):
            if hi < lo:
                raise ContractError("config ranges must be non-empty")
        if self.stroke_width_range[0] < 1:
            raise ContractError("stroke widths must be >= 1")


def make_shift(img: Image, mask: Mask, dx: int, dy: int) -> tuple[Image, Mask]:
    """Translate image content by (dx, dy); exposed pixels become invalid.

    Output pixel (i, j) copies input pixel (i - dy, j - dx) where that source
    exists; elsewhere the image is 0 and the mask is 0.
    """
    h, w = img.height, img.width
    if (mask.height, mask.width) != (h, w):
        raise ContractError("image and mask must share dimensions")
    if abs(dx) >= w or abs(dy) >= h:
        raise ContractError(f"shift ({dx}, {dy}) must be smaller than image size")
    out_img = np.zeros_like(img.data)
    out_msk = np.zeros_like(mask.data)
    # destination rows i in [max(0, dy), h + min(0, dy)) have a source row
    dst_r = slice(max(0, dy), h + min(0, dy))
    dst_c = slice(max(0, dx), w + min(0, dx))
    src_r = slice(max(0, -dy), h + min(0, -dy))
    src_c = slice(max(0, -dx), w + min(0, -dx))
    out_img[dst_r, dst_c] = img.data[src_r, src_c]
    out_msk[dst_r, dst_c] = mask.data[src_r, src_c]
    return Image(out_img), Mask(out_msk)


def shift_amounts(height: int, width: int, shift_fraction: float) -> tuple[int, int]:
    """Per-axis shift sizes: round(fraction * axis length)."""
    return int(round(shift_fraction * width)), int(round(shift_fraction * height))


def assemble_stack(
    img: Image, mask: Mask, shift_fraction: float = DEFAULT_SHIFT_FRACTION
) -> ShiftStack:
    """Build the 20-channel stack: main pair plus left/right/down/up shifts."""
    if not (0.0 < shift_fraction < 1.0):
        raise ContractError("shift fraction must be in (0, 1)")
    if (mask.height, mask.width) != (img.height, img.width):
        raise ContractError("image and mask must share dimensions")
    if img.channels != 3:
        raise ContractError("stack assembly expects an RGB image")
    sx, sy = shift_amounts(img.height, img.width, shift_fraction)
    offsets = {"left": (-sx, 0), "right": (sx, 0), "down": (0, sy), "up": (0, -sy)}
    images = [img]
    masks = [mask]
    for name in SLOT_NAMES[1:]:
        dx, dy = offsets[name]
        s_img, s_msk = make_shift(img, mask, dx, dy)
        images.append(s_img)
        masks.append(s_msk)
    return ShiftStack(tuple(images), tuple(masks), shift_fraction)


def sample_patch(
    stack: ShiftStack,
    size: int,
    rng: np.random.Generator,
    max_tries: int = 64,
) -> PatchSpec:
    """Rejection-sample a window whose main-mask hole fraction is in [0.10, 0.90]."""
    h, w = stack.height, stack.width
    if h < size or w < size:
        raise ContractError(f"stack {h}x{w} smaller than patch size {size}")
    main = stack.masks[0].data
    for _ in range(max_tries):
        top = int(rng.integers(0, h - size + 1))
        left = int(rng.integers(0, w - size + 1))
        window = main[top : top + size, left : left + size]
        hole = float(np.mean(window == 0))
        if 0.10 <= hole <= 0.90:
            return PatchSpec(top, left, size, hole)
    raise SamplingExhaustedError(
        f"no window with hole fraction in [0.10, 0.90] after {max_tries} tries"
    )


def extract_patch(stack: ShiftStack, spec: PatchSpec) -> ShiftStack:
    """Crop all ten rasters by the same window."""
    h, w = stack.height, stack.width
    if spec.top < 0 or spec.left < 0 or spec.top + spec.size > h or spec.left + spec.size > w:
        raise ContractError("patch window out of bounds")
    rows = slice(spec.top, spec.top + spec.size)
    cols = slice(spec.left, spec.left + spec.size)
    images = tuple(Image(im.data[rows, cols]) for im in stack.images)
    masks = tuple(Mask(m.data[rows, cols]) for m in stack.masks)
    return ShiftStack(images, masks, stack.shift_fraction)


def generate_irregular_mask(h: int, w: int, cfg: MaskGenConfig) -> Mask:
    """Draw random polyline strokes (holes) on a fully-valid canvas.

    Stroke vertices follow a bounded random walk; segments get a random
    thickness and rounded joints. Deterministic for a fixed cfg.seed.
    """
    if h < 64 or w < 64:
        raise ContractError("mask canvas must be at least 64x64")
    rng = np.random.default_rng(cfg.seed)
    canvas = np.full((h, w), 255, dtype=np.uint8)
    n_strokes = int(rng.integers(cfg.stroke_count_range[0], cfg.stroke_count_range[1] + 1))
    max_step = max(min(h, w) // 6, 8)
    for _ in range(n_strokes):
        n_vertices = int(
            rng.integers(cfg.vertex_count_range[0], cfg.vertex_count_range[1] + 1)
        )
        width = int(rng.integers(cfg.stroke_width_range[0], cfg.stroke_width_range[1] + 1))
        x = float(rng.uniform(0, w))
        y = float(rng.uniform(0, h))
        angle = float(rng.uniform(0, 2 * np.pi))
        for _ in range(max(n_vertices - 1, 1)):
            angle += float(rng.uniform(-np.pi / 2, np.pi / 2))
            step = float(rng.uniform(max_step / 4, max_step))
            nx = float(np.clip(x + step * np.cos(angle), 0, w - 1))
            ny = float(np.clip(y + step * np.sin(angle), 0, h - 1))
            cv2.line(canvas, (int(x), int(y)), (int(nx), int(ny)), 0, width)
            cv2.circle(canvas, (int(nx), int(ny)), width // 2, 0, -1)
            x, y = nx, ny
    return Mask((canvas >= 128).astype(np.uint8))


@dataclass(frozen=True)
class ManifestEntry:
    crop_file: str
    source_file: str
    offset: tuple[int, int]
    side: int


@dataclass(frozen=True)
class Manifest:
    working_size: int
    entries: tuple[ManifestEntry, ...] = field(default_factory=tuple)

    def to_json(self) -> str:
        return json.dumps(
            {
                "working_size": self.working_size,
                "entries": [
                    {
                        "crop_file": e.crop_file,
                        "source_file": e.source_file,
                        "offset": list(e.offset),
                        "side": e.side,
                    }
                    for e in self.entries
                ],
            },
            indent=2,
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "Manifest":
        doc = json.loads(text)
        entries = tuple(
            ManifestEntry(
                crop_file=e["crop_file"],
                source_file=e["source_file"],
                offset=(int(e["offset"][0]), int(e["offset"][1])),
                side=int(e["side"]),
            )
            for e in doc["entries"]
        )
        return Manifest(int(doc["working_size"]), entries)


def load_manifest(path: str | Path) -> Manifest:
    return Manifest.from_json(Path(path).read_text())


def prepare_dataset(
    src_dir: str | Path,
    out_dir: str | Path,
    squares_per_image: int = 3,
    rng: np.random.Generator | None = None,
    working_size: int = 512,
) -> Manifest:
    """Cut random largest squares from each source image and resize them.

    Per-file randomness derives from (seed, file index) so output does not
    depend on processing order. Writes crops plus manifest.json to out_dir.
    """
    src_dir = Path(src_dir)
    out_dir = Path(out_dir)
    sources = sorted(
        p for p in src_dir.iterdir() if p.suffix.lower() in (".png", ".ppm", ".pgm")
    )
    if not sources:
        raise DatasetError(f"no readable images in {src_dir}")
    out_dir.mkdir(parents=True, exist_ok=True)
    base_seed = int(rng.integers(0, 2**31 - 1)) if rng is not None else 0
    entries = []
    for idx, src in enumerate(sources):
        file_rng = np.random.default_rng(np.random.SeedSequence([base_seed, idx]))
        img = load_image(src)
        side = min(img.height, img.width)
        for k in range(squares_per_image):
            top = int(file_rng.integers(0, img.height - side + 1))
            left = int(file_rng.integers(0, img.width - side + 1))
            crop = Image(img.data[top : top + side, left : left + side])
            crop = resize_nearest(crop, working_size, working_size)
            name = f"{src.stem}_sq{k}.png"
            save_image(crop, out_dir / name)
            entries.append(ManifestEntry(name, src.name, (top, left), side))
    manifest = Manifest(working_size, tuple(entries))
    (out_dir / "manifest.json").write_text(manifest.to_json())
    return manifest


def save_stack_dir(stack: ShiftStack, out_dir: str | Path) -> None:
    """Serialize a stack as slot{0..4}_{img,mask}.png plus meta.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i in range(5):
        save_image(stack.images[i], out_dir / f"slot{i}_img.png")
        save_mask(stack.masks[i], out_dir / f"slot{i}_mask.png")
    meta = {
        "shift_fraction": stack.shift_fraction,
        "height": stack.height,
        "width": stack.width,
        "channel_order": CHANNEL_ORDER_TAG,
        "slots": list(SLOT_NAMES),
    }
    (out_dir / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def load_stack_dir(in_dir: str | Path) -> ShiftStack:
    in_dir = Path(in_dir)
    meta = json.loads((in_dir / "meta.json").read_text())
    images = tuple(load_image(in_dir / f"slot{i}_img.png") for i in range(5))
    masks = tuple(load_mask(in_dir / f"slot{i}_mask.png") for i in range(5))
    return ShiftStack(images, masks, float(meta["shift_fraction"]))
