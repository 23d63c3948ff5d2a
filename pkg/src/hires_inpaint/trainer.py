"""Second-stage training: Adam on sampled shift-stack patches.

Stage-one outputs are computed once per sample and cached on disk, the
feature extractor and coarse backend stay frozen, and a fixed seed plus
single-threaded data order make runs bit-reproducible.
"""

from __future__ import annotations

import dataclasses
import json
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import evalkit
from .coarse import CoarseConfig, coarse_fill
from .imagecore import Image, Mask, load_image, load_mask, save_image, save_mask
from .losses import FeatureExtractor, LossWeights, loss_terms
from .refiner import (
    RefinerModel,
    forward_batch,
    inpaint,
    save_checkpoint,
    stack_to_tensor,
)
from .shiftstack import (
    DatasetError,
    MaskGenConfig,
    SamplingExhaustedError,
    assemble_stack,
    extract_patch,
    generate_irregular_mask,
    load_manifest,
    sample_patch,
)


class TrainingError(RuntimeError):
    """Raised when training cannot continue (e.g. non-finite loss)."""


class ValidationError(RuntimeError):
    """Raised for unusable validation inputs."""


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 4
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    max_steps: int = 300
    validation_interval: int = 100
    seed: int = 0
    patch_size: int = 128
    checkpoint_dir: Path = Path("checkpoints")
    shift_fraction: float = 0.20
    max_patch_tries: int = 64
    recompute_coarse: bool = False
    loss_weights: LossWeights = field(default_factory=LossWeights)
    mask_config: MaskGenConfig = field(default_factory=MaskGenConfig)

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        object.__setattr__(self, "checkpoint_dir", Path(self.checkpoint_dir))

    @staticmethod
    def desk(**overrides) -> "TrainConfig":
        return TrainConfig(**{"batch_size": 4, "patch_size": 128, **overrides})

    @staticmethod
    def paper(**overrides) -> "TrainConfig":
        return TrainConfig(**{"batch_size": 18, "patch_size": 512, **overrides})


@dataclass
class TrainRecord:
    step: int
    l_tv: float
    l_1: float
    l_p: float
    l_s: float
    total: float
    wall_time_s: float
    skipped_samples: int = 0
    validation: dict | None = None

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)


def mask_seed_for(base_seed: int, crop_file: str) -> int:
    """Stable per-sample mask seed; split-agnostic so caches line up."""
    return (base_seed * 0x9E3779B1 + zlib.crc32(crop_file.encode())) % (2**31)


class _SampleStore:
    """Loads crops, derives their fixed masks, and caches coarse results."""

    def __init__(self, manifest_path: Path, cfg: TrainConfig, coarse_cfg: CoarseConfig):
        self.dir = Path(manifest_path).parent
        self.manifest = load_manifest(manifest_path)
        if not self.manifest.entries:
            raise DatasetError(f"empty manifest: {manifest_path}")
        self.cfg = cfg
        self.coarse_cfg = coarse_cfg
        self.cache_dir = self.dir / "coarse_cache"
        self._memo: dict[int, tuple[Image, Mask, Image]] = {}

    def __len__(self) -> int:
        return len(self.manifest.entries)

    def get(self, index: int) -> tuple[Image, Mask, Image]:
        """(ground truth, mask, coarse-filled) for one sample."""
        if index in self._memo:
            return self._memo[index]
        entry = self.manifest.entries[index]
        gt = load_image(self.dir / entry.crop_file)
        seed = mask_seed_for(self.cfg.seed, entry.crop_file)
        mask_cfg = dataclasses.replace(self.cfg.mask_config, seed=seed)
        stem = Path(entry.crop_file).stem
        mask_path = self.cache_dir / f"{stem}_seed{self.cfg.seed}_mask.png"
        coarse_path = self.cache_dir / f"{stem}_seed{self.cfg.seed}_coarse.png"
        if not (
            mask_path.exists() and coarse_path.exists() and not self.cfg.recompute_coarse
        ):
            self.cache_dir.mkdir(parents=True, exist_ok=True)
            mask = generate_irregular_mask(gt.height, gt.width, mask_cfg)
            filled = coarse_fill(gt, mask, self.coarse_cfg).filled_full
            save_mask(mask, mask_path)
            save_image(filled, coarse_path)
        # always read back from disk so cache hits and misses see identical
        # (8-bit quantized) data and training stays bit-reproducible
        mask = load_mask(mask_path)
        filled = load_image(coarse_path)
        self._memo[index] = (gt, mask, filled)
        return gt, mask, filled


def _draw_batch(
    store: _SampleStore, cfg: TrainConfig, rng: np.random.Generator
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, int]:
    """Batch of (stack, reference, mask) patch tensors; returns skip count."""
    inputs, refs, masks = [], [], []
    skipped = 0
    while len(inputs) < cfg.batch_size:
        index = int(rng.integers(0, len(store)))
        gt, mask, filled = store.get(index)
        stack = assemble_stack(filled, mask, cfg.shift_fraction)
        try:
            spec = sample_patch(stack, cfg.patch_size, rng, cfg.max_patch_tries)
        except SamplingExhaustedError:
            skipped += 1
            if skipped > 10 * cfg.batch_size:
                raise TrainingError(
                    "patch sampling keeps failing; check mask hole fractions"
                )
            continue
        patch = extract_patch(stack, spec)
        inputs.append(stack_to_tensor(patch))
        window = (
            slice(spec.top, spec.top + spec.size),
            slice(spec.left, spec.left + spec.size),
        )
        refs.append(torch.from_numpy(gt.data[window].transpose(2, 0, 1).copy()))
        masks.append(torch.from_numpy(mask.data[window][None].astype(np.float32)))
    return torch.stack(inputs), torch.stack(refs), torch.stack(masks), skipped


def make_optimizer(cfg: TrainConfig, model: RefinerModel) -> torch.optim.Adam:
    return torch.optim.Adam(
        model.net.parameters(),
        lr=cfg.learning_rate,
        betas=(cfg.beta1, cfg.beta2),
        eps=cfg.adam_epsilon,
    )


def train(
    cfg: TrainConfig,
    train_manifest: str | Path,
    val_manifest: str | Path | None,
    model: RefinerModel,
    fx: FeatureExtractor | None = None,
    coarse_cfg: CoarseConfig | None = None,
    optimizer_state: dict | None = None,
    start_step: int = 0,
) -> tuple[Path, list[TrainRecord]]:
    """Run Adam steps on sampled patches; returns (final checkpoint, log)."""
    fx = fx if fx is not None else FeatureExtractor()
    coarse_cfg = coarse_cfg or CoarseConfig()
    store = _SampleStore(Path(train_manifest), cfg, coarse_cfg)
    cfg.checkpoint_dir.mkdir(parents=True, exist_ok=True)
    log_path = cfg.checkpoint_dir / "train_log.ndjson"

    optimizer = make_optimizer(cfg, model)
    if optimizer_state is not None:
        optimizer.load_state_dict(optimizer_state)
    rng = np.random.default_rng(cfg.seed)
    torch.manual_seed(cfg.seed)

    records: list[TrainRecord] = []
    with open(log_path, "a") as log:
        for step in range(start_step, start_step + cfg.max_steps):
            t0 = time.perf_counter()
            batch_in, batch_ref, batch_mask, skipped = _draw_batch(store, cfg, rng)
            pred = forward_batch(model, batch_in, "train")
            terms = loss_terms(fx, pred, batch_ref, batch_mask)
            total = cfg.loss_weights.combine(
                terms["l_tv"], terms["l_1"], terms["l_p"], terms["l_s"]
            )
            if not torch.isfinite(total):
                diag = cfg.checkpoint_dir / f"ckpt_nan_step{step:06d}.bin"
                save_checkpoint(model, optimizer.state_dict(), diag, step)
                raise TrainingError(
                    f"non-finite loss at step {step}; diagnostic checkpoint {diag}"
                )
            optimizer.zero_grad()
            total.backward()
            optimizer.step()

            record = TrainRecord(
                step=step,
                l_tv=terms["l_tv"].item(),
                l_1=terms["l_1"].item(),
                l_p=terms["l_p"].item(),
                l_s=terms["l_s"].item(),
                total=total.item(),
                wall_time_s=time.perf_counter() - t0,
                skipped_samples=skipped,
            )
            done = step + 1
            if cfg.validation_interval and done % cfg.validation_interval == 0:
                if val_manifest is not None:
                    record.validation = validate(
                        model,
                        val_manifest,
                        seed=cfg.seed,
                        mask_config=cfg.mask_config,
                        coarse_cfg=coarse_cfg,
                        shift_fraction=cfg.shift_fraction,
                    )
                save_checkpoint(
                    model,
                    optimizer.state_dict(),
                    cfg.checkpoint_dir / f"ckpt_step{done:06d}.bin",
                    done,
                )
            records.append(record)
            log.write(record.to_json() + "\n")

    final_path = cfg.checkpoint_dir / "ckpt_final.bin"
    save_checkpoint(model, optimizer.state_dict(), final_path, start_step + cfg.max_steps)
    return final_path, records


def validate(
    model: RefinerModel,
    val_manifest: str | Path,
    seed: int = 0,
    mask_config: MaskGenConfig = MaskGenConfig(),
    coarse_cfg: CoarseConfig | None = None,
    shift_fraction: float = 0.20,
) -> dict:
    """Full-image inference over a manifest; mean metrics, full and hole-only."""
    manifest_path = Path(val_manifest)
    manifest = load_manifest(manifest_path)
    if not manifest.entries:
        raise ValidationError(f"empty manifest: {manifest_path}")
    coarse_cfg = coarse_cfg or CoarseConfig()
    sums = {k: 0.0 for k in ("l1_8bit", "psnr_db", "ssim", "hole_l1_8bit", "hole_psnr_db", "hole_ssim")}
    for entry in manifest.entries:
        gt = load_image(manifest_path.parent / entry.crop_file)
        mask_cfg = dataclasses.replace(
            mask_config, seed=mask_seed_for(seed, entry.crop_file)
        )
        mask = generate_irregular_mask(gt.height, gt.width, mask_cfg)
        out = inpaint(model, gt, mask, coarse_cfg, shift_fraction)
        sums["l1_8bit"] += evalkit.mean_l1_8bit(out, gt)
        sums["psnr_db"] += evalkit.psnr(out, gt)
        sums["ssim"] += evalkit.ssim(out, gt)
        sums["hole_l1_8bit"] += evalkit.mean_l1_8bit(out, gt, mask)
        sums["hole_psnr_db"] += evalkit.psnr(out, gt, mask)
        sums["hole_ssim"] += evalkit.ssim(out, gt, mask)
    n = len(manifest.entries)
    metrics = {k: v / n for k, v in sums.items()}
    metrics["count"] = n
    return metrics
