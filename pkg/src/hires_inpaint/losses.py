"""Training objective: masked TV, L1, perceptual, and style losses.

The combination weights are fixed at 0.1 / 6.0 / 0.1 / 240.0. Perceptual
and style terms run through a frozen convolutional feature extractor; the
default is a seeded random projection stack, with pretrained weights
loadable through the same contract for quality runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from . import checkpoint as ckpt
from .imagecore import ContractError, Image, Mask

EXTRACTOR_KIND = "feature_extractor"


@dataclass(frozen=True)
class LossWeights:
    w_tv: float = 0.1
    w_l1: float = 6.0
    w_p: float = 0.1
    w_s: float = 240.0

    def __post_init__(self):
        if min(self.w_tv, self.w_l1, self.w_p, self.w_s) < 0:
            raise ContractError("loss weights must be non-negative")

    def combine(self, l_tv, l_1, l_p, l_s):
        return self.w_tv * l_tv + self.w_l1 * l_1 + self.w_p * l_p + self.w_s * l_s


@dataclass(frozen=True)
class LossReport:
    l_tv: float
    l_1: float
    l_p: float
    l_s: float
    total: float


class FeatureExtractor(nn.Module):
    """Frozen strided conv stack producing one feature map per stage.

    Weights are deterministic for a fixed seed and never trained; gradients
    still flow through to the input. Replicate padding keeps feature maps of
    constant images constant, and the smooth activation keeps the losses
    twice differentiable for finite-difference checks.
    """

    def __init__(
        self,
        channels: tuple[int, ...] = (16, 32, 64, 128),
        in_channels: int = 3,
        kernel_size: int = 3,
        seed: int = 77,
        layer_ids: tuple[int, ...] | None = None,
    ):
        super().__init__()
        self.channels = tuple(channels)
        self.in_channels = in_channels
        self.kernel_size = kernel_size
        self.seed = seed
        self.layer_ids = tuple(layer_ids) if layer_ids is not None else tuple(
            range(len(self.channels))
        )
        if any(j < 0 or j >= len(self.channels) for j in self.layer_ids):
            raise ContractError("layer ids must index extractor stages")
        torch.manual_seed(seed)
        stages = []
        prev = in_channels
        for ch in self.channels:
            conv = nn.Conv2d(
                prev,
                ch,
                kernel_size,
                stride=2,
                padding=kernel_size // 2,
                padding_mode="replicate",
                bias=False,
            )
            nn.init.kaiming_normal_(conv.weight, a=0.2, nonlinearity="leaky_relu")
            stages.append(nn.Sequential(conv, nn.SiLU()))
            prev = ch
        self.stages = nn.ModuleList(stages)
        for p in self.parameters():
            p.requires_grad_(False)

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        feats = []
        for stage in self.stages:
            x = stage(x)
            feats.append(x)
        return [feats[j] for j in self.layer_ids]


def save_feature_extractor(fx: FeatureExtractor, path) -> None:
    meta = {
        "channels": list(fx.channels),
        "in_channels": fx.in_channels,
        "kernel_size": fx.kernel_size,
        "seed": fx.seed,
        "layer_ids": list(fx.layer_ids),
    }
    tensors = {k: v.detach().cpu().numpy() for k, v in fx.state_dict().items()}
    ckpt.save_container(path, EXTRACTOR_KIND, meta, tensors)


def load_feature_extractor(path) -> FeatureExtractor:
    kind, meta, tensors = ckpt.load_container(path)
    if kind != EXTRACTOR_KIND:
        raise ckpt.CheckpointError(f"{path}: container kind {kind!r} is not an extractor")
    fx = FeatureExtractor(
        channels=tuple(meta["channels"]),
        in_channels=int(meta["in_channels"]),
        kernel_size=int(meta["kernel_size"]),
        seed=int(meta["seed"]),
        layer_ids=tuple(meta["layer_ids"]),
    )
    fx.load_state_dict({k: torch.from_numpy(v) for k, v in tensors.items()})
    for p in fx.parameters():
        p.requires_grad_(False)
    return fx


def _as_image_tensor(x) -> torch.Tensor:
    if isinstance(x, Image):
        return torch.from_numpy(x.data.transpose(2, 0, 1).copy())
    if isinstance(x, torch.Tensor):
        return x
    raise ContractError(f"expected Image or tensor, got {type(x).__name__}")


def _as_mask_tensor(m, like: torch.Tensor) -> torch.Tensor:
    if isinstance(m, Mask):
        t = torch.from_numpy(m.data[None].astype(np.float32))
    elif isinstance(m, torch.Tensor):
        t = m
    else:
        raise ContractError(f"expected Mask or tensor, got {type(m).__name__}")
    if t.ndim == 2:
        t = t[None]
    if like.ndim == 4 and t.ndim == 3:
        t = t[None]
    return t.to(like.dtype)


def _check_same_shape(pred: torch.Tensor, ref: torch.Tensor) -> None:
    if pred.shape != ref.shape:
        raise ContractError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(ref.shape)}")


def l1_loss(pred, ref) -> torch.Tensor:
    """Mean absolute difference: (1/(C*H*W)) * sum |pred - ref|."""
    p, r = _as_image_tensor(pred), _as_image_tensor(ref)
    _check_same_shape(p, r)
    return (p - r).abs().mean()


def tv_loss(pred, mask) -> torch.Tensor:
    """Mean neighbor difference over pairs touching the hole.

    A horizontal or vertical pixel pair counts when either endpoint has
    mask = 0; the sum of absolute differences over counted pairs and all
    channels is divided by the count (pairs x channels). Zero if no pair
    counts.
    """
    p = _as_image_tensor(pred)
    batched = p.ndim == 4
    if not batched:
        p = p[None]
    m = _as_mask_tensor(mask, p)
    if m.ndim == 3:
        m = m[None]
    hole = m <= 0.5
    pair_h = hole[..., :, :-1] | hole[..., :, 1:]
    pair_v = hole[..., :-1, :] | hole[..., 1:, :]
    channels = p.shape[1]
    count = (pair_h.sum() + pair_v.sum()) * channels
    if count == 0:
        return p.sum() * 0.0
    diff_h = (p[..., :, 1:] - p[..., :, :-1]).abs() * pair_h
    diff_v = (p[..., 1:, :] - p[..., :-1, :]).abs() * pair_v
    return (diff_h.sum() + diff_v.sum()) / count


def extract_features(fx: FeatureExtractor, img) -> list[torch.Tensor]:
    """One feature map per configured layer; deterministic."""
    x = _as_image_tensor(img)
    squeeze = x.ndim == 3
    if squeeze:
        x = x[None]
    if x.dtype != next(fx.parameters()).dtype:
        x = x.to(next(fx.parameters()).dtype)
    feats = fx(x)
    return [f[0] if squeeze else f for f in feats]


def _feature_distance(fp, fr, normalized: bool) -> torch.Tensor:
    total = None
    for a, b in zip(fp, fr):
        term = (a - b).abs()
        term = term.mean() if normalized else term.sum()
        total = term if total is None else total + term
    return total


def _gram_distance(fp, fr, normalized: bool) -> torch.Tensor:
    total = None
    for a, b in zip(fp, fr):
        term = (gram(a) - gram(b)).abs()
        term = term.mean() if normalized else term.sum()
        total = term if total is None else total + term
    return total


def perceptual_loss(fx: FeatureExtractor, pred, ref, normalized: bool = True) -> torch.Tensor:
    """Sum over layers of the L1 feature distance (per-element by default)."""
    p, r = _as_image_tensor(pred), _as_image_tensor(ref)
    _check_same_shape(p, r)
    return _feature_distance(extract_features(fx, p), extract_features(fx, r), normalized)


def gram(features: torch.Tensor) -> torch.Tensor:
    """Channel inner-product matrix: G[a,b] = (1/(C*N)) sum_n f_a(n) f_b(n)."""
    f = features
    if f.ndim == 2:
        f = f[None]
    elif f.ndim == 3:
        f = f.reshape(1, f.shape[0], -1)
    elif f.ndim == 4:
        f = f.reshape(f.shape[0], f.shape[1], -1)
    else:
        raise ContractError(f"gram expects 2-4 dims, got {f.ndim}")
    if f.shape[-1] == 0:
        raise ContractError("gram needs a nonempty feature map")
    c, n = f.shape[1], f.shape[2]
    g = torch.bmm(f, f.transpose(1, 2)) / (c * n)
    return g[0] if features.ndim < 4 else g


def style_loss(fx: FeatureExtractor, pred, ref, normalized: bool = True) -> torch.Tensor:
    """Sum over layers of the L1 Gram-matrix distance (per-element by default)."""
    p, r = _as_image_tensor(pred), _as_image_tensor(ref)
    _check_same_shape(p, r)
    return _gram_distance(extract_features(fx, p), extract_features(fx, r), normalized)


def loss_terms(fx: FeatureExtractor, pred, ref, mask) -> dict[str, torch.Tensor]:
    """Differentiable loss components, shared by total_loss and the trainer."""
    p, r = _as_image_tensor(pred), _as_image_tensor(ref)
    _check_same_shape(p, r)
    fp = extract_features(fx, p)
    fr = extract_features(fx, r)
    return {
        "l_tv": tv_loss(p, mask),
        "l_1": l1_loss(p, r),
        "l_p": _feature_distance(fp, fr, normalized=True),
        "l_s": _gram_distance(fp, fr, normalized=True),
    }


def total_loss(
    fx: FeatureExtractor, pred, ref, mask, weights: LossWeights = LossWeights()
) -> LossReport:
    terms = loss_terms(fx, pred, ref, mask)
    vals = {k: v.item() for k, v in terms.items()}
    total = float(
        weights.combine(vals["l_tv"], vals["l_1"], vals["l_p"], vals["l_s"])
    )
    return LossReport(vals["l_tv"], vals["l_1"], vals["l_p"], vals["l_s"], total)
