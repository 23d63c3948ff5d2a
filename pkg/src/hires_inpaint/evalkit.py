"""Objective metrics and pairwise-vote ranking.

L1 is reported in 8-bit units (mean absolute difference times 255) so
values land on the customary scale; PSNR runs on [0,1] samples and caps at
99 dB for identical images; SSIM uses the standard 11x11 Gaussian window
(sigma 1.5, K1=0.01, K2=0.03) on luma. Subjective votes convert to scores
with a Bradley-Terry maximum-likelihood fit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import correlate1d

from .imagecore import ContractError, Image, Mask, load_image, load_mask, resize_nearest

PSNR_CAP_DB = 99.0

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

# Rec. 601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float64)


class PairingError(RuntimeError):
    """Prediction and reference directories do not line up by filename."""


class RankingError(RuntimeError):
    """Vote matrix cannot be converted to scores."""


@dataclass(frozen=True)
class MetricRow:
    method: str
    l1_8bit: float
    psnr_db: float
    ssim: float
    resolution: int
    region: str = "full"


@dataclass(frozen=True)
class VoteMatrix:
    methods: tuple[str, ...]
    wins: np.ndarray  # wins[a][b] = times a preferred over b

    def __post_init__(self):
        n = len(self.methods)
        w = np.asarray(self.wins, dtype=np.float64)
        if w.shape != (n, n):
            raise ContractError("wins must be n x n for n methods")
        if (w < 0).any() or np.diagonal(w).any():
            raise ContractError("wins must be non-negative with a zero diagonal")
        object.__setattr__(self, "wins", w)

    @staticmethod
    def from_csv(path: str | Path) -> "VoteMatrix":
        """Read `winner_id,loser_id[,count]` lines."""
        votes: list[tuple[str, str, float]] = []
        with open(path, newline="") as f:
            for row in csv.reader(f):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                if len(row) not in (2, 3):
                    raise ContractError(f"bad vote line: {row}")
                count = float(row[2]) if len(row) == 3 else 1.0
                votes.append((row[0].strip(), row[1].strip(), count))
        methods = tuple(sorted({v[0] for v in votes} | {v[1] for v in votes}))
        index = {m: i for i, m in enumerate(methods)}
        wins = np.zeros((len(methods), len(methods)))
        for winner, loser, count in votes:
            if winner == loser:
                raise ContractError(f"self-comparison for {winner!r}")
            wins[index[winner], index[loser]] += count
        return VoteMatrix(methods, wins)


@dataclass(frozen=True)
class ScoreVector:
    methods: tuple[str, ...]
    worths: np.ndarray  # positive, normalized to geometric mean 1
    scores: np.ndarray  # log-worths shifted so the minimum is 0

    def win_probability(self, a: str, b: str) -> float:
        ia, ib = self.methods.index(a), self.methods.index(b)
        return float(self.worths[ia] / (self.worths[ia] + self.worths[ib]))


def _select(arr: np.ndarray, mask: Mask | None) -> np.ndarray:
    if mask is None:
        return arr.reshape(-1)
    return arr[mask.data == 0].reshape(-1)


def _diff64(pred: Image, ref: Image) -> np.ndarray:
    if pred.data.shape != ref.data.shape:
        raise ContractError(
            f"metric inputs must share shape: {pred.data.shape} vs {ref.data.shape}"
        )
    return pred.data.astype(np.float64) - ref.data.astype(np.float64)


def psnr(pred: Image, ref: Image, mask: Mask | None = None) -> float:
    """10*log10(1/MSE) on [0,1] samples, capped at 99 dB; hole-only with a mask."""
    diff = _select(_diff64(pred, ref), mask)
    if diff.size == 0:
        return PSNR_CAP_DB
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * math.log10(1.0 / mse), PSNR_CAP_DB)


def mean_l1_8bit(pred: Image, ref: Image, mask: Mask | None = None) -> float:
    """Mean absolute difference in 8-bit units (255 * mean |pred - ref|)."""
    diff = _select(_diff64(pred, ref), mask)
    if diff.size == 0:
        return 0.0
    return float(255.0 * np.mean(np.abs(diff)))


def _gaussian_kernel_1d(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size, dtype=np.float64) - half
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def _windowed_mean(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    r = (len(k) - 1) // 2
    t = correlate1d(x, k, axis=0, mode="constant")
    t = correlate1d(t, k, axis=1, mode="constant")
    return t[r:-r, r:-r]


def _to_luma(img: Image) -> np.ndarray:
    data = img.data.astype(np.float64)
    if img.channels == 1:
        return data[:, :, 0]
    return data @ _LUMA


def ssim(pred: Image, ref: Image, mask: Mask | None = None) -> float:
    """Mean local SSIM, 11x11 Gaussian window, luma for RGB, range 1.0."""
    if pred.data.shape != ref.data.shape:
        raise ContractError("ssim inputs must share shape")
    if min(pred.height, pred.width) < SSIM_WINDOW:
        raise ContractError(f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    x = _to_luma(pred)
    y = _to_luma(ref)
    k = _gaussian_kernel_1d()
    mu_x = _windowed_mean(x, k)
    mu_y = _windowed_mean(y, k)
    xx = _windowed_mean(x * x, k)
    yy = _windowed_mean(y * y, k)
    xy = _windowed_mean(x * y, k)
    var_x = xx - mu_x * mu_x
    var_y = yy - mu_y * mu_y
    cov = xy - mu_x * mu_y
    c1 = SSIM_K1 * SSIM_K1
    c2 = SSIM_K2 * SSIM_K2
    ssim_map = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / (
        (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    )
    if mask is not None:
        r = (SSIM_WINDOW - 1) // 2
        centers = mask.data[r:-r, r:-r] == 0
        if centers.any():
            return float(np.mean(ssim_map[centers]))
    return float(np.mean(ssim_map))


def _paired_files(pred_dir: Path, ref_dir: Path) -> list[tuple[Path, Path]]:
    exts = (".png", ".ppm", ".pgm")
    preds = sorted(p for p in pred_dir.iterdir() if p.suffix.lower() in exts)
    refs = {p.name: p for p in ref_dir.iterdir() if p.suffix.lower() in exts}
    if not preds:
        raise PairingError(f"no rasters in {pred_dir}")
    missing = [p.name for p in preds if p.name not in refs]
    extra = sorted(set(refs) - {p.name for p in preds})
    if missing or extra:
        raise PairingError(
            f"directory mismatch: missing refs {missing}, unmatched refs {extra}"
        )
    return [(p, refs[p.name]) for p in preds]


def evaluate_pairs(
    pred_dir: str | Path,
    ref_dir: str | Path,
    resolutions: list[int],
    masks_dir: str | Path | None = None,
) -> list[MetricRow]:
    """Metric rows per resolution, averaged over all name-matched pairs.

    Both sides are nearest-neighbor resampled to each square resolution
    (skipped when sizes already match). With masks supplied, hole-only rows
    are emitted alongside the full-image rows.
    """
    pred_dir, ref_dir = Path(pred_dir), Path(ref_dir)
    pairs = _paired_files(pred_dir, ref_dir)
    masks = None
    if masks_dir is not None:
        masks_dir = Path(masks_dir)
        masks = {}
        for p, _ in pairs:
            mp = masks_dir / p.name
            if not mp.exists():
                raise PairingError(f"mask missing for {p.name}")
            masks[p.name] = load_mask(mp)
    method = pred_dir.name
    rows = []
    for res in resolutions:
        full = {"l1": [], "psnr": [], "ssim": []}
        hole = {"l1": [], "psnr": [], "ssim": []}
        for pred_path, ref_path in pairs:
            pred = load_image(pred_path)
            ref = load_image(ref_path)
            if (pred.height, pred.width) != (res, res):
                pred = resize_nearest(pred, res, res)
            if (ref.height, ref.width) != (res, res):
                ref = resize_nearest(ref, res, res)
            full["l1"].append(mean_l1_8bit(pred, ref))
            full["psnr"].append(psnr(pred, ref))
            full["ssim"].append(ssim(pred, ref))
            if masks is not None:
                m = masks[pred_path.name]
                if (m.height, m.width) != (res, res):
                    m = resize_nearest(m, res, res)
                hole["l1"].append(mean_l1_8bit(pred, ref, m))
                hole["psnr"].append(psnr(pred, ref, m))
                hole["ssim"].append(ssim(pred, ref, m))
        rows.append(
            MetricRow(
                method,
                float(np.mean(full["l1"])),
                float(np.mean(full["psnr"])),
                float(np.mean(full["ssim"])),
                res,
            )
        )
        if masks is not None:
            rows.append(
                MetricRow(
                    method,
                    float(np.mean(hole["l1"])),
                    float(np.mean(hole["psnr"])),
                    float(np.mean(hole["ssim"])),
                    res,
                    region="hole",
                )
            )
    return rows


def format_metric_table(rows: list[MetricRow]) -> str:
    """Aligned text table: methods x {L1, PSNR, SSIM} grouped by resolution."""
    header = f"{'Method':<24} {'Region':<6} {'L1':>8} {'PSNR':>8} {'SSIM':>7}"
    lines = []
    for res in sorted({r.resolution for r in rows}):
        lines.append(f"Resolution {res}x{res}")
        lines.append(header)
        for row in rows:
            if row.resolution != res:
                continue
            lines.append(
                f"{row.method:<24} {row.region:<6} {row.l1_8bit:>8.3f} "
                f"{row.psnr_db:>8.3f} {row.ssim:>7.3f}"
            )
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"


def write_metric_csv(rows: list[MetricRow], path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["method", "region", "resolution", "l1_8bit", "psnr_db", "ssim"])
        for r in rows:
            writer.writerow(
                [r.method, r.region, r.resolution, f"{r.l1_8bit:.6f}",
                 f"{r.psnr_db:.6f}", f"{r.ssim:.6f}"]
            )


def _components(methods: tuple[str, ...], counts: np.ndarray) -> list[list[str]]:
    n = len(methods)
    seen = [False] * n
    comps = []
    for start in range(n):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        comp = []
        while stack:
            i = stack.pop()
            comp.append(methods[i])
            for j in range(n):
                if not seen[j] and counts[i, j] > 0:
                    seen[j] = True
                    stack.append(j)
        comps.append(sorted(comp))
    return comps


def bradley_terry(
    votes: VoteMatrix,
    max_iter: int = 2000,
    tol: float = 1e-10,
    epsilon: float = 0.0,
) -> ScoreVector:
    """Maximum-likelihood worths via minorization-maximization.

    Iterates w_i <- W_i / sum_{j != i} n_ij / (w_i + w_j) with the worths
    renormalized to geometric mean 1, until the largest relative change
    drops below tol. Scores are log-worths shifted so the minimum is 0.
    """
    n = len(votes.methods)
    if n < 2:
        raise RankingError("need at least two methods")
    wins = votes.wins.copy()
    if epsilon > 0.0:
        wins = wins + epsilon * (1.0 - np.eye(n))
    counts = wins + wins.T
    comps = _components(votes.methods, counts)
    if len(comps) > 1:
        raise RankingError(f"comparison graph is disconnected: components {comps}")
    totals = wins.sum(axis=1)
    zero = [votes.methods[i] for i in range(n) if totals[i] == 0]
    if zero:
        raise RankingError(
            f"methods with zero wins have no finite worth: {zero} "
            "(enable epsilon smoothing to regularize)"
        )
    w = np.ones(n, dtype=np.float64)
    for _ in range(max_iter):
        denom = np.zeros(n)
        for i in range(n):
            others = np.arange(n) != i
            denom[i] = np.sum(counts[i, others] / (w[i] + w[others]))
        new_w = totals / denom
        new_w = new_w / np.exp(np.mean(np.log(new_w)))
        change = float(np.max(np.abs(new_w - w) / w))
        w = new_w
        if change < tol:
            break
    scores = np.log(w)
    scores = scores - scores.min()
    return ScoreVector(votes.methods, w, scores)
