"""Stage two: the fully-convolutional shift-channel refinement U-Net.

Takes the 20-channel stack, outputs RGB. Batch normalization follows every
layer except the last; decoder filters are all 3x3. Because no layer bakes
in a spatial size, one set of weights serves any resolution whose sides
divide by 2^(levels-1); `pad_to_grid` handles the rest.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from . import checkpoint as ckpt
from .coarse import CoarseConfig, coarse_fill
from .imagecore import ContractError, Image, Mask, composite
from .shiftstack import CHANNEL_ORDER_TAG, ShiftStack, assemble_stack

CHECKPOINT_KIND = "refiner"


@dataclass(frozen=True)
class RefinerConfig:
    encoder_channels: tuple[int, ...] = (32, 64, 128, 256, 256)
    encoder_kernel_sizes: tuple[int, ...] = (7, 5, 5, 3, 3)
    decoder_kernel_size: int = 3
    input_channels: int = 20
    output_channels: int = 3
    leaky_slope: float = 0.2
    bn_momentum: float = 0.1

    def __post_init__(self):
        if len(self.encoder_channels) != len(self.encoder_kernel_sizes):
            raise ContractError("one kernel size per encoder level")
        if len(self.encoder_channels) < 2:
            raise ContractError("need at least two encoder levels")
        if self.decoder_kernel_size != 3:
            raise ContractError("decoder filters are fixed at 3x3")
        object.__setattr__(self, "encoder_channels", tuple(self.encoder_channels))
        object.__setattr__(
            self, "encoder_kernel_sizes", tuple(self.encoder_kernel_sizes)
        )

    @property
    def levels(self) -> int:
        return len(self.encoder_channels)

    @property
    def grid_multiple(self) -> int:
        return 2 ** (self.levels - 1)


class _RefinerNet(nn.Module):
    def __init__(self, cfg: RefinerConfig):
        super().__init__()
        chs = cfg.encoder_channels
        encoder = []
        in_ch = cfg.input_channels
        for i, (out_ch, k) in enumerate(zip(chs, cfg.encoder_kernel_sizes)):
            stride = 1 if i == 0 else 2
            encoder.append(
                nn.Sequential(
                    nn.Conv2d(in_ch, out_ch, k, stride=stride, padding=k // 2),
                    nn.BatchNorm2d(out_ch, momentum=cfg.bn_momentum),
                    nn.LeakyReLU(cfg.leaky_slope, inplace=True),
                )
            )
            in_ch = out_ch
        self.encoder = nn.ModuleList(encoder)
        dk = cfg.decoder_kernel_size
        decoder = []
        for i in range(len(chs) - 2, -1, -1):
            decoder.append(
                nn.Sequential(
                    nn.Conv2d(chs[i + 1] + chs[i], chs[i], dk, padding=dk // 2),
                    nn.BatchNorm2d(chs[i], momentum=cfg.bn_momentum),
                    nn.LeakyReLU(cfg.leaky_slope, inplace=True),
                )
            )
        self.decoder = nn.ModuleList(decoder)
        self.head = nn.Conv2d(chs[0], cfg.output_channels, dk, padding=dk // 2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        skips = []
        for i, block in enumerate(self.encoder):
            x = block(x)
            if i < len(self.encoder) - 1:
                skips.append(x)
        for block in self.decoder:
            x = F.interpolate(x, scale_factor=2, mode="nearest")
            x = torch.cat([x, skips.pop()], dim=1)
            x = block(x)
        return torch.sigmoid(self.head(x))


@dataclass
class RefinerModel:
    config: RefinerConfig
    net: _RefinerNet = field(repr=False)

    @property
    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.net.parameters())


def init_model(cfg: RefinerConfig, seed: int = 0) -> RefinerModel:
    """Fresh model with fan-in-scaled init; bit-identical for a fixed seed."""
    torch.manual_seed(seed)
    net = _RefinerNet(cfg)
    for m in net.modules():
        if isinstance(m, nn.Conv2d):
            nn.init.kaiming_normal_(
                m.weight, a=cfg.leaky_slope, mode="fan_in", nonlinearity="leaky_relu"
            )
            nn.init.zeros_(m.bias)
        elif isinstance(m, nn.BatchNorm2d):
            nn.init.ones_(m.weight)
            nn.init.zeros_(m.bias)
    return RefinerModel(cfg, net)


def stack_to_tensor(stack: ShiftStack) -> torch.Tensor:
    """(20, H, W) float32 tensor: 15 image channels then 5 mask channels."""
    planes = [im.data.transpose(2, 0, 1) for im in stack.images]
    planes += [m.data[None].astype(np.float32) for m in stack.masks]
    return torch.from_numpy(np.concatenate(planes, axis=0))


def tensor_to_image(t: torch.Tensor) -> Image:
    arr = t.detach().cpu().numpy().transpose(1, 2, 0)
    return Image(np.clip(arr, 0.0, 1.0))


@dataclass(frozen=True)
class CropSpec:
    """Undo record for pad_to_grid: keep the top-left height x width window."""

    height: int
    width: int

    def apply_image(self, img: Image) -> Image:
        return Image(img.data[: self.height, : self.width])

    def apply_mask(self, mask: Mask) -> Mask:
        return Mask(mask.data[: self.height, : self.width])


def _pad_edge_reflect(arr: np.ndarray, pad_h: int, pad_w: int) -> np.ndarray:
    # reflect right/bottom; numpy caps reflect pads at dim-1, so loop for
    # pathologically small rasters
    while pad_h > 0 or pad_w > 0:
        ph = min(pad_h, arr.shape[0] - 1) if pad_h else 0
        pw = min(pad_w, arr.shape[1] - 1) if pad_w else 0
        if ph == 0 and pw == 0:
            ph, pw = pad_h, pad_w
            mode = "edge"
        else:
            mode = "reflect"
        pads = ((0, ph), (0, pw)) + ((0, 0),) * (arr.ndim - 2)
        arr = np.pad(arr, pads, mode=mode)
        pad_h -= ph
        pad_w -= pw
    return arr


def pad_to_grid(stack: ShiftStack, levels: int) -> tuple[ShiftStack, CropSpec]:
    """Reflect-pad right/bottom so both sides divide by 2^(levels-1)."""
    multiple = 2 ** (levels - 1)
    h, w = stack.height, stack.width
    ph = (-h) % multiple
    pw = (-w) % multiple
    crop = CropSpec(h, w)
    if ph == 0 and pw == 0:
        return stack, crop
    images = tuple(Image(_pad_edge_reflect(im.data, ph, pw)) for im in stack.images)
    masks = tuple(Mask(_pad_edge_reflect(m.data, ph, pw)) for m in stack.masks)
    return ShiftStack(images, masks, stack.shift_fraction), crop


def forward_batch(model: RefinerModel, batch: torch.Tensor, mode: str) -> torch.Tensor:
    """Run a (B, 20, H, W) batch; train mode uses batch statistics."""
    if mode not in ("train", "infer"):
        raise ContractError(f"mode must be 'train' or 'infer', got {mode!r}")
    mult = model.config.grid_multiple
    if batch.shape[-2] % mult or batch.shape[-1] % mult:
        raise ContractError(
            f"spatial dims {tuple(batch.shape[-2:])} not divisible by {mult}; "
            "use pad_to_grid first"
        )
    if batch.shape[1] != model.config.input_channels:
        raise ContractError(
            f"expected {model.config.input_channels} input channels, got {batch.shape[1]}"
        )
    if mode == "train":
        model.net.train()
        return model.net(batch)
    model.net.eval()
    with torch.no_grad():
        return model.net(batch)


def forward(model: RefinerModel, stack: ShiftStack, mode: str = "infer") -> Image:
    """Refine one stack into an RGB image of the same height and width."""
    out = forward_batch(model, stack_to_tensor(stack)[None], mode)
    return tensor_to_image(out[0])


def inpaint(
    model: RefinerModel,
    img: Image,
    mask: Mask,
    cfg: CoarseConfig | None = None,
    shift_fraction: float = 0.20,
) -> Image:
    """Full pipeline: coarse fill, shift stack, refine, final composite.

    The output equals the input bit-exactly wherever mask = 1.
    """
    if img.channels != 3:
        raise ContractError("inpaint expects an RGB image (use to_rgb)")
    cfg = cfg or CoarseConfig()
    coarse_res = coarse_fill(img, mask, cfg)
    stack = assemble_stack(coarse_res.filled_full, mask, shift_fraction)
    padded, crop = pad_to_grid(stack, model.config.levels)
    pred = forward(model, padded, "infer")
    return composite(img, crop.apply_image(pred), mask)


def _split_state(net: _RefinerNet) -> tuple[dict[str, np.ndarray], dict[str, int]]:
    tensors: dict[str, np.ndarray] = {}
    int_scalars: dict[str, int] = {}
    for name, tensor in net.state_dict().items():
        if tensor.dtype in (torch.int64, torch.int32):
            int_scalars[name] = int(tensor.item())
        else:
            tensors[f"model.{name}"] = tensor.detach().cpu().numpy()
    return tensors, int_scalars


def _optimizer_to_meta(
    state: dict | None, tensors: dict[str, np.ndarray]
) -> dict | None:
    if state is None:
        return None
    steps: dict[str, float] = {}
    for pid, pstate in state["state"].items():
        for key, value in pstate.items():
            if isinstance(value, torch.Tensor) and value.ndim > 0:
                tensors[f"optim.{pid}.{key}"] = value.detach().cpu().numpy()
            else:
                v = value.item() if isinstance(value, torch.Tensor) else value
                steps[f"{pid}.{key}"] = float(v)
    groups = []
    for group in state["param_groups"]:
        safe = {}
        for key, value in group.items():
            safe[key] = list(value) if isinstance(value, tuple) else value
        groups.append(safe)
    return {"scalars": steps, "param_groups": groups}


def save_checkpoint(
    model: RefinerModel,
    optimizer_state: dict | None,
    path,
    training_step: int = 0,
) -> None:
    """Persist config, weights, and optional optimizer state, losslessly."""
    tensors, int_scalars = _split_state(model.net)
    meta = {
        "config": asdict(model.config),
        "channel_order": CHANNEL_ORDER_TAG,
        "training_step": training_step,
        "int_scalars": int_scalars,
        "optimizer": _optimizer_to_meta(optimizer_state, tensors),
    }
    ckpt.save_container(path, CHECKPOINT_KIND, meta, tensors)


def load_checkpoint(path) -> tuple[RefinerModel, dict | None, int]:
    """Rebuild (model, optimizer_state, training_step) from a container file."""
    kind, meta, tensors = ckpt.load_container(path)
    if kind != CHECKPOINT_KIND:
        raise ckpt.CheckpointError(f"{path}: container kind {kind!r} is not a refiner")
    if meta.get("channel_order") != CHANNEL_ORDER_TAG:
        raise ckpt.CheckpointError(
            f"{path}: channel order {meta.get('channel_order')!r} does not match "
            f"this build ({CHANNEL_ORDER_TAG!r})"
        )
    raw_cfg = dict(meta["config"])
    raw_cfg["encoder_channels"] = tuple(raw_cfg["encoder_channels"])
    raw_cfg["encoder_kernel_sizes"] = tuple(raw_cfg["encoder_kernel_sizes"])
    cfg = RefinerConfig(**raw_cfg)
    net = _RefinerNet(cfg)
    state = {}
    for name, arr in tensors.items():
        if name.startswith("model."):
            state[name[len("model.") :]] = torch.from_numpy(arr)
    for name, value in meta["int_scalars"].items():
        state[name] = torch.tensor(value, dtype=torch.int64)
    try:
        net.load_state_dict(state)
    except RuntimeError as exc:
        raise ckpt.CheckpointError(f"{path}: weight mismatch: {exc}") from exc

    opt_meta = meta.get("optimizer")
    optimizer_state = None
    if opt_meta is not None:
        opt_state: dict[int, dict] = {}
        for name, arr in tensors.items():
            if not name.startswith("optim."):
                continue
            _, pid, key = name.split(".", 2)
            opt_state.setdefault(int(pid), {})[key] = torch.from_numpy(arr)
        for compound, value in opt_meta["scalars"].items():
            pid, key = compound.split(".", 1)
            opt_state.setdefault(int(pid), {})[key] = torch.tensor(value)
        groups = []
        for group in opt_meta["param_groups"]:
            safe = dict(group)
            if "betas" in safe:
                safe["betas"] = tuple(safe["betas"])
            groups.append(safe)
        optimizer_state = {"state": opt_state, "param_groups": groups}
    return RefinerModel(cfg, net), optimizer_state, int(meta.get("training_step", 0))
