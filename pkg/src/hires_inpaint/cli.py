"""Command-line entry point: every pipeline stage as a subcommand.

Flags override values from an optional JSON config overlay (--config);
every run prints the resolved configuration. Exit codes: 0 success,
1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np


class _UsageError(SystemExit):
    pass


class CliUsageError(ValueError):
    """Missing or inconsistent command-line arguments."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise _UsageError(1)


def _apply_thread_cap() -> None:
    cap = os.environ.get("HIRES_INPAINT_THREADS")
    if cap:
        import torch

        torch.set_num_threads(max(1, int(cap)))


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """Merge precedence: flag > config file > default."""
    overlay = {}
    if getattr(args, "config", None):
        overlay = json.loads(Path(args.config).read_text())
        unknown = set(overlay) - set(defaults)
        if unknown:
            raise CliUsageError(f"unknown config keys: {sorted(unknown)}")
    resolved = dict(defaults)
    resolved.update(overlay)
    for key in defaults:
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            resolved[key] = value
    print("resolved config:", json.dumps(resolved, sort_keys=True, default=str))
    return resolved


def _add_config_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with defaults for this subcommand")


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def build_parser() -> _Parser:
    parser = _Parser(prog="hires-inpaint", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare-data", help="cut training squares and masks")
    _add_config_flag(p)
    p.add_argument("--src", help="directory of source images")
    p.add_argument("--out", help="output dataset directory")
    p.add_argument("--squares", type=int, help="squares per source image")
    p.add_argument("--working-size", type=int, help="crop resize target")
    p.add_argument("--seed", type=int, help="RNG seed")
    p.add_argument("--emit-masks", action="store_true", default=None,
                   help="also write per-crop irregular masks")

    p = sub.add_parser("coarse", help="stage one only: coarse fill + stack dir")
    _add_config_flag(p)
    p.add_argument("--image", help="input image")
    p.add_argument("--mask", help="input mask (0=hole, 255=known)")
    p.add_argument("--out-dir", help="output directory")
    p.add_argument("--working-size", type=int)
    p.add_argument("--upscale", choices=["nearest", "bilinear"])
    p.add_argument("--backend", choices=["builtin_pyramid", "external_file"])
    p.add_argument("--external-coarse", help="precomputed coarse raster")
    p.add_argument("--shift-fraction", type=float)

    p = sub.add_parser("train", help="train the refinement network")
    _add_config_flag(p)
    p.add_argument("--train-manifest", help="training manifest.json")
    p.add_argument("--val-manifest", help="validation manifest.json")
    p.add_argument("--checkpoint-dir")
    p.add_argument("--preset", choices=["desk", "paper"])
    p.add_argument("--seed", type=int)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--patch-size", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--validation-interval", type=int)
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--recompute-coarse", action="store_true", default=None,
                   help="ignore the on-disk stage-one cache")

    p = sub.add_parser("inpaint", help="full pipeline on one image")
    _add_config_flag(p)
    p.add_argument("--image")
    p.add_argument("--mask")
    p.add_argument("--out")
    p.add_argument("--checkpoint")
    p.add_argument("--coarse-backend", choices=["builtin_pyramid", "external_file"])
    p.add_argument("--external-coarse")
    p.add_argument("--shift-fraction", type=float)
    p.add_argument("--working-size", type=int)
    p.add_argument("--max-side", type=int,
                   help="optional cap: downscale inputs above this size")
    p.add_argument("--seed", type=int,
                   help="seed for a fresh model when no checkpoint is given")

    p = sub.add_parser("evaluate", help="metric tables over paired directories")
    _add_config_flag(p)
    p.add_argument("--pred", help="predictions directory")
    p.add_argument("--ref", help="references directory")
    p.add_argument("--resolutions", type=_int_list, help="e.g. 256,512")
    p.add_argument("--masks", help="optional masks directory for hole-only rows")
    p.add_argument("--csv", help="also write rows to this CSV file")

    p = sub.add_parser("rank-votes", help="Bradley-Terry scores from vote CSV")
    _add_config_flag(p)
    p.add_argument("--votes", help="CSV of winner_id,loser_id[,count]")
    p.add_argument("--max-iter", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--epsilon", type=float,
                   help="smoothing count added to every pair (default: off)")

    p = sub.add_parser("serve", help="run the interactive inpainting service")
    _add_config_flag(p)
    p.add_argument("--addr", help="listen address host:port")
    p.add_argument("--checkpoint")
    p.add_argument("--ui-dir", help="static web UI bundle to host at /")
    p.add_argument("--max-pixels", type=int)
    return parser


def _cmd_prepare_data(args) -> int:
    from .shiftstack import MaskGenConfig, generate_irregular_mask, prepare_dataset
    from .imagecore import save_mask
    from .trainer import mask_seed_for
    import dataclasses

    cfg = _resolve(args, {
        "src": None, "out": None, "squares": 3, "working-size": 512,
        "seed": 0, "emit-masks": True,
    })
    if not cfg["src"] or not cfg["out"]:
        raise CliUsageError("--src and --out are required")
    rng = np.random.default_rng(cfg["seed"])
    manifest = prepare_dataset(
        cfg["src"], cfg["out"], cfg["squares"], rng, cfg["working-size"]
    )
    if cfg["emit-masks"]:
        mask_dir = Path(cfg["out"]) / "masks"
        mask_dir.mkdir(exist_ok=True)
        for entry in manifest.entries:
            mcfg = dataclasses.replace(
                MaskGenConfig(), seed=mask_seed_for(cfg["seed"], entry.crop_file)
            )
            mask = generate_irregular_mask(
                cfg["working-size"], cfg["working-size"], mcfg
            )
            save_mask(mask, mask_dir / entry.crop_file)
    print(f"prepared {len(manifest.entries)} crops in {cfg['out']}")
    return 0


def _cmd_coarse(args) -> int:
    from .coarse import CoarseConfig, coarse_fill
    from .imagecore import load_image, load_mask, save_image, to_rgb
    from .shiftstack import assemble_stack, save_stack_dir

    cfg = _resolve(args, {
        "image": None, "mask": None, "out-dir": None, "working-size": 512,
        "upscale": "bilinear", "backend": "builtin_pyramid",
        "external-coarse": None, "shift-fraction": 0.20,
    })
    if not cfg["image"] or not cfg["mask"] or not cfg["out-dir"]:
        raise CliUsageError("--image, --mask, and --out-dir are required")
    img = to_rgb(load_image(cfg["image"]))
    mask = load_mask(cfg["mask"])
    ccfg = CoarseConfig(
        working_size=cfg["working-size"],
        upscale_method=cfg["upscale"],
        backend=cfg["backend"],
        external_path=Path(cfg["external-coarse"]) if cfg["external-coarse"] else None,
    )
    result = coarse_fill(img, mask, ccfg)
    out_dir = Path(cfg["out-dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    save_image(result.filled_full, out_dir / "coarse.png")
    stack = assemble_stack(result.filled_full, mask, cfg["shift-fraction"])
    save_stack_dir(stack, out_dir / "stack")
    print(f"coarse result and stack written to {out_dir}")
    return 0


def _cmd_train(args) -> int:
    from .refiner import RefinerConfig, init_model, load_checkpoint
    from .trainer import TrainConfig, train

    cfg = _resolve(args, {
        "train-manifest": None, "val-manifest": None, "checkpoint-dir": "checkpoints",
        "preset": "desk", "seed": 0, "max-steps": None, "batch-size": None,
        "patch-size": None, "learning-rate": None, "validation-interval": None,
        "resume": None, "recompute-coarse": False,
    })
    if not cfg["train-manifest"]:
        raise CliUsageError("--train-manifest is required")
    preset = TrainConfig.desk if cfg["preset"] == "desk" else TrainConfig.paper
    overrides = {"seed": cfg["seed"], "checkpoint_dir": Path(cfg["checkpoint-dir"]),
                 "recompute_coarse": cfg["recompute-coarse"]}
    for flag, name in (
        ("max-steps", "max_steps"), ("batch-size", "batch_size"),
        ("patch-size", "patch_size"), ("learning-rate", "learning_rate"),
        ("validation-interval", "validation_interval"),
    ):
        if cfg[flag] is not None:
            overrides[name] = cfg[flag]
    tcfg = preset(**overrides)
    optimizer_state = None
    start_step = 0
    if cfg["resume"]:
        model, optimizer_state, start_step = load_checkpoint(cfg["resume"])
    else:
        model = init_model(RefinerConfig(), seed=tcfg.seed)
    final_path, records = train(
        tcfg, cfg["train-manifest"], cfg["val-manifest"], model,
        optimizer_state=optimizer_state, start_step=start_step,
    )
    last = records[-1] if records else None
    if last is not None:
        print(f"final step {last.step}: total loss {last.total:.5f}")
    print(f"final checkpoint: {final_path}")
    return 0


def _cmd_inpaint(args) -> int:
    from .coarse import CoarseConfig
    from .imagecore import load_image, load_mask, resize_nearest, save_image, to_rgb
    from .refiner import RefinerConfig, init_model, inpaint, load_checkpoint

    cfg = _resolve(args, {
        "image": None, "mask": None, "out": None, "checkpoint": None,
        "coarse-backend": "builtin_pyramid", "external-coarse": None,
        "shift-fraction": 0.20, "working-size": 512, "max-side": None, "seed": 0,
    })
    if not cfg["image"] or not cfg["mask"] or not cfg["out"]:
        raise CliUsageError("--image, --mask, and --out are required")
    img = to_rgb(load_image(cfg["image"]))
    mask = load_mask(cfg["mask"])
    if cfg["max-side"] and max(img.height, img.width) > cfg["max-side"]:
        scale = cfg["max-side"] / max(img.height, img.width)
        h, w = int(img.height * scale), int(img.width * scale)
        img = resize_nearest(img, h, w)
        mask = resize_nearest(mask, h, w)
    if cfg["checkpoint"]:
        model, _, _ = load_checkpoint(cfg["checkpoint"])
    else:
        model = init_model(RefinerConfig(), seed=cfg["seed"])
    ccfg = CoarseConfig(
        working_size=cfg["working-size"],
        backend=cfg["coarse-backend"],
        external_path=Path(cfg["external-coarse"]) if cfg["external-coarse"] else None,
    )
    out = inpaint(model, img, mask, ccfg, cfg["shift-fraction"])
    save_image(out, cfg["out"])
    print(f"wrote {cfg['out']} ({out.width}x{out.height})")
    return 0


def _cmd_evaluate(args) -> int:
    from .evalkit import evaluate_pairs, format_metric_table, write_metric_csv

    cfg = _resolve(args, {
        "pred": None, "ref": None, "resolutions": None, "masks": None, "csv": None,
    })
    if not cfg["pred"] or not cfg["ref"] or not cfg["resolutions"]:
        raise CliUsageError("--pred, --ref, and --resolutions are required")
    rows = evaluate_pairs(cfg["pred"], cfg["ref"], cfg["resolutions"], cfg["masks"])
    print(format_metric_table(rows), end="")
    if cfg["csv"]:
        write_metric_csv(rows, cfg["csv"])
        print(f"rows written to {cfg['csv']}")
    return 0


def _cmd_rank_votes(args) -> int:
    from .evalkit import VoteMatrix, bradley_terry

    cfg = _resolve(args, {
        "votes": None, "max-iter": 2000, "tol": 1e-10, "epsilon": 0.0,
    })
    if not cfg["votes"]:
        raise CliUsageError("--votes is required")
    votes = VoteMatrix.from_csv(cfg["votes"])
    result = bradley_terry(
        votes, max_iter=cfg["max-iter"], tol=cfg["tol"], epsilon=cfg["epsilon"]
    )
    order = np.argsort(-result.scores)
    print(f"{'Method':<24} {'Score':>10} {'Worth':>12}")
    for i in order:
        print(f"{result.methods[i]:<24} {result.scores[i]:>10.4f} {result.worths[i]:>12.6f}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    cfg = _resolve(args, {
        "addr": "127.0.0.1:8000", "checkpoint": None, "ui-dir": None,
        "max-pixels": 32_000_000,
    })
    host, _, port = cfg["addr"].rpartition(":")
    app = create_app(
        checkpoint_path=cfg["checkpoint"],
        ui_dir=cfg["ui-dir"],
        max_pixels=cfg["max-pixels"],
    )
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


_COMMANDS = {
    "prepare-data": _cmd_prepare_data,
    "coarse": _cmd_coarse,
    "train": _cmd_train,
    "inpaint": _cmd_inpaint,
    "evaluate": _cmd_evaluate,
    "rank-votes": _cmd_rank_votes,
    "serve": _cmd_serve,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError:
        return 1
    _apply_thread_cap()
    try:
        return _COMMANDS[args.command](args)
    except CliUsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failures map to exit 2
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
