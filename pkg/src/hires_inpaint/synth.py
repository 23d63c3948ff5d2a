"""Procedural demo images so training and demos run self-contained.

Smooth low-frequency color fields with a few soft blobs: enough structure
to make losses meaningful, smooth enough that small overfit runs converge.
"""

from __future__ import annotations

import numpy as np

from .imagecore import Image


def make_demo_image(height: int, width: int, seed: int = 0) -> Image:
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(
        np.linspace(0, 1, height), np.linspace(0, 1, width), indexing="ij"
    )
    img = np.zeros((height, width, 3), dtype=np.float64)
    for c in range(3):
        base = rng.uniform(0.15, 0.85)
        gx, gy = rng.uniform(-0.35, 0.35, size=2)
        img[:, :, c] = base + gx * (xx - 0.5) + gy * (yy - 0.5)
        for _ in range(2):
            fx, fy = rng.uniform(0.3, 1.2, size=2)
            phase = rng.uniform(0, 2 * np.pi)
            amp = rng.uniform(0.02, 0.07)
            img[:, :, c] += amp * np.sin(2 * np.pi * (fx * xx + fy * yy) + phase)
    for _ in range(3):
        cy, cx = rng.uniform(0.2, 0.8, size=2)
        ry, rx = rng.uniform(0.12, 0.3, size=2)
        d2 = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2
        blob = np.exp(-d2)
        color = rng.uniform(-0.15, 0.15, size=3)
        img += blob[:, :, None] * color[None, None, :]
    return Image(np.clip(img, 0.0, 1.0).astype(np.float32))


def make_overfit_source(height: int = 300, width: int = 560, seed: int = 42) -> Image:
    """Wide source for the overfit smoke fixture.

    A saturated warm palette over gentle gradients and blobs: statistically
    homogeneous crops (stable batch statistics) that start far from an
    untrained net's output. Cut squares from this with prepare_dataset to
    reproduce the pinned overfit fixture.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(
        np.linspace(0, 1, height), np.linspace(0, 1, width), indexing="ij"
    )
    palette = np.array([0.82, 0.45, 0.22]) + rng.uniform(-0.04, 0.04, 3)
    img = np.zeros((height, width, 3), dtype=np.float64)
    for c in range(3):
        gx, gy = rng.uniform(-0.20, 0.20, size=2)
        img[:, :, c] = palette[c] + gx * (xx - 0.5) + gy * (yy - 0.5)
        fx, fy = rng.uniform(0.3, 1.0, size=2)
        amp = rng.uniform(0.02, 0.035)
        img[:, :, c] += amp * np.sin(2 * np.pi * (fx * xx + fy * yy) + rng.uniform(0, 2 * np.pi))
    for _ in range(3):
        cy, cx = rng.uniform(0.2, 0.8, size=2)
        ry, rx = rng.uniform(0.12, 0.3, size=2)
        d2 = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2
        blob = np.exp(-d2)
        img += blob[:, :, None] * rng.uniform(-0.10, 0.10, size=3)[None, None, :]
    return Image(np.clip(img, 0.0, 1.0).astype(np.float32))


def write_demo_dataset(out_dir, count: int, size: int, seed: int = 0) -> None:
    """Write `count` demo PNGs named demo_###.png into out_dir."""
    from pathlib import Path

    from .imagecore import save_image

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(count):
        save_image(make_demo_image(size, size, seed + i), out / f"demo_{i:03d}.png")
