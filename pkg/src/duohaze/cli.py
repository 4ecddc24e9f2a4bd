"""Command-line entry point.

Subcommands: train, dehaze, eval, ablate, fusion-study, synth, profile.
Every command writes a run manifest (resolved config, inputs, seed,
checksums) into the output directory before doing any work, so crashed
runs stay diagnosable. Exit codes: 0 success, 1 runtime failure,
2 usage or configuration error.
"""

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, is_dataclass, replace

import numpy as np

from . import __version__
from .arch import ModelConfig, TwoBranchDehazer, tiny_model_config
from .data import (
    AugmentationConfig,
    DatasetSpec,
    gamma_correct_pair,
    load_paired_dataset,
    synthetic_pairs,
)
from .errors import ConfigError, PairingError
from .eval import evaluate, dehaze_image, profile, run_ablation, run_fusion_tail_study
from .haze import DEPTH_MODES
from .imgio import load_image, save_image
from .losses import LossWeights, SsimConfig
from .presets import training_preset, with_overrides
from .train import TrainConfig, load_checkpoint, restore_model, train

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, command, args, config=None, inputs=()):
    """Atomically write the run manifest before any real work starts."""
    os.makedirs(out_dir, exist_ok=True)
    manifest = {
        "command": command,
        "argv": sys.argv[1:],
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "seed": getattr(args, "seed", None),
        "out_dir": os.path.abspath(out_dir),
        "inputs": {},
        "config": _to_jsonable(config) if config is not None else None,
    }
    for path in inputs:
        if path and os.path.isfile(path):
            manifest["inputs"][path] = {"sha256": _sha256_file(path)}
        elif path:
            manifest["inputs"][path] = {"sha256": None}
    target = os.path.join(out_dir, "manifest.json")
    tmp = target + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(manifest, fh, indent=2, default=str)
    os.replace(tmp, target)
    return target


def _to_jsonable(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return _to_jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    return obj


def _parse_size(text):
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError as e:
        raise ConfigError(f"--size must look like HxW, got {text!r}") from e


def _config_from_file(path, base):
    """Overlay a JSON config file onto a base TrainConfig."""
    with open(path) as fh:
        raw = json.load(fh)
    nested = {
        "model": ModelConfig,
        "loss_weights": LossWeights,
        "ssim": SsimConfig,
        "augment": AugmentationConfig,
    }
    updates = {}
    for key, value in raw.items():
        if key in nested:
            current = getattr(base, key)
            merged = {**asdict(current), **value}
            updates[key] = nested[key](**merged)
        else:
            updates[key] = value
    return replace(base, **updates)


def _load_train_pairs(args):
    if args.data:
        spec = DatasetSpec(root=args.data, split="train", split_rule=args.split_rule)
        pairs = load_paired_dataset(spec)
    else:
        pairs = synthetic_pairs(count=args.synthetic, size=(160, 160), seed=args.seed)
    if args.extra_data:
        # extra data joins training wholesale, never split
        extra = load_paired_dataset(
            DatasetSpec(root=args.extra_data, split="train", split_rule="all")
        )
        if args.gamma_correct:
            extra = [
                gamma_correct_pair(p, args.gamma_correct, apply_to=args.gamma_apply_to)
                for p in extra
            ]
        pairs = pairs + extra
    elif args.gamma_correct:
        print("warning: --gamma-correct applies to --extra-data only; no extra data given", file=sys.stderr)
    return pairs


def cmd_train(args):
    if args.preset:
        cfg = training_preset(args.preset, seed=args.seed if args.seed is not None else 7)
    else:
        cfg = TrainConfig(model=tiny_model_config() if args.tiny_model else ModelConfig())
    if args.config:
        cfg = _config_from_file(args.config, cfg)
    cfg = with_overrides(
        cfg,
        seed=args.seed,
        max_steps=args.max_steps,
        batch_size=args.batch_size,
        encoder_weights=args.encoder_weights,
        perceptual_weights=args.perceptual_weights,
    )
    if args.encoder_weights:
        cfg = replace(cfg, use_pretrained_encoder=True)
    pairs = _load_train_pairs(args)
    val_pairs = None
    if args.data and args.val:
        val_pairs = load_paired_dataset(
            DatasetSpec(root=args.data, split="val", split_rule=args.split_rule)
        )
    write_manifest(args.out, "train", args, config=cfg, inputs=[args.config, args.encoder_weights])
    ckpt, records = train(cfg, pairs, val_dataset=val_pairs, out_dir=args.out)
    final = os.path.join(args.out, "final.ckpt")
    print(f"trained {ckpt['step']} steps; final checkpoint at {final}")
    return EXIT_OK


def _iter_input_images(path):
    if os.path.isfile(path):
        return [path]
    if os.path.isdir(path):
        names = sorted(
            n for n in os.listdir(path) if os.path.splitext(n)[1].lower() in (".png", ".jpg", ".jpeg", ".bmp")
        )
        return [os.path.join(path, n) for n in names]
    raise FileNotFoundError(f"input path not found: {path}")


def cmd_dehaze(args):
    ckpt = load_checkpoint(args.checkpoint)
    model = restore_model(ckpt)
    inputs = _iter_input_images(args.input)
    if not inputs:
        print(f"error: no images found under {args.input}", file=sys.stderr)
        return EXIT_USAGE
    write_manifest(args.out, "dehaze", args, inputs=[args.checkpoint])
    skipped = 0
    for path in inputs:
        try:
            image = load_image(path)
        except OSError as e:
            print(f"warning: skipping unreadable input {path}: {e}", file=sys.stderr)
            skipped += 1
            continue
        out = dehaze_image(model, image)
        stem = os.path.splitext(os.path.basename(path))[0]
        save_image(os.path.join(args.out, f"{stem}.png"), out)
    print(f"dehazed {len(inputs) - skipped} image(s) into {args.out}")
    return EXIT_RUNTIME if skipped else EXIT_OK


def _load_eval_pairs(args):
    if args.data:
        spec = DatasetSpec(root=args.data, split=args.split, split_rule=args.split_rule)
        return load_paired_dataset(spec)
    rng_seed = args.seed if args.seed is not None else 0
    return synthetic_pairs(count=args.synthetic, size=(160, 160), seed=rng_seed + 1)


def cmd_eval(args):
    ckpt = load_checkpoint(args.checkpoint)
    model = restore_model(ckpt)
    pairs = _load_eval_pairs(args)
    write_manifest(args.out, "eval", args, inputs=[args.checkpoint])
    report = evaluate(model, pairs)
    _write_report(args.out, "report", report)
    print(report.to_table())
    return EXIT_OK


def _write_report(out_dir, stem, report):
    with open(os.path.join(out_dir, f"{stem}.json"), "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, default=str)
    with open(os.path.join(out_dir, f"{stem}.txt"), "w") as fh:
        fh.write(report.to_table() + "\n")


def _study_datasets(args):
    if args.data:
        train_pairs = load_paired_dataset(
            DatasetSpec(root=args.data, split="train", split_rule=args.split_rule)
        )
        eval_pairs = load_paired_dataset(
            DatasetSpec(root=args.data, split="test", split_rule=args.split_rule)
        )
    else:
        seed = args.seed if args.seed is not None else 7
        train_pairs = synthetic_pairs(count=args.synthetic, size=(96, 96), seed=seed)
        eval_pairs = synthetic_pairs(count=max(2, args.synthetic // 4), size=(96, 96), seed=seed + 1)
    return train_pairs, eval_pairs


def cmd_ablate(args):
    train_pairs, eval_pairs = _study_datasets(args)
    write_manifest(args.out, "ablate", args, inputs=[args.encoder_weights])
    report = run_ablation(
        train_pairs,
        eval_pairs,
        budget=args.budget,
        seed=args.seed if args.seed is not None else 7,
        encoder_weights=args.encoder_weights,
        on_row=lambda row: print(f"  {row.label:<12} PSNR {row.psnr_db:.2f}  SSIM {row.ssim:.4f}"),
    )
    _write_report(args.out, "ablation", report)
    print(report.to_table())
    print("trends:", json.dumps(report.trends))
    return EXIT_OK


def cmd_fusion_study(args):
    train_pairs, eval_pairs = _study_datasets(args)
    write_manifest(args.out, "fusion-study", args)
    report = run_fusion_tail_study(
        train_pairs,
        eval_pairs,
        budget=args.budget,
        seed=args.seed if args.seed is not None else 7,
    )
    _write_report(args.out, "fusion_study", report)
    print(report.to_table())
    return EXIT_OK


def cmd_synth(args):
    h, w = _parse_size(args.size)
    write_manifest(args.out, "synth", args)
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    hazy_dir = os.path.join(args.out, "hazy")
    gt_dir = os.path.join(args.out, "GT")
    os.makedirs(hazy_dir, exist_ok=True)
    os.makedirs(gt_dir, exist_ok=True)
    pairs = synthetic_pairs(
        count=args.count, size=(h, w), beta=args.beta, depth_mode=args.mode,
        seed=args.seed if args.seed is not None else 0,
    )
    for pair in pairs:
        save_image(os.path.join(hazy_dir, f"{pair.id}.png"), pair.hazy)
        save_image(os.path.join(gt_dir, f"{pair.id}.png"), pair.clean)
    print(f"wrote {len(pairs)} aligned pairs under {args.out}")
    return EXIT_OK


def cmd_profile(args):
    h, w = _parse_size(args.size)
    if args.checkpoint:
        model = restore_model(load_checkpoint(args.checkpoint))
    else:
        model = TwoBranchDehazer(tiny_model_config() if args.tiny_model else ModelConfig())
    write_manifest(args.out, "profile", args, inputs=[args.checkpoint])
    result = profile(model, height=h, width=w, repeats=args.repeats)
    with open(os.path.join(args.out, "profile.json"), "w") as fh:
        json.dump(result, fh, indent=2)
    print(
        f"params {result['param_count']:,}  median {result['median_seconds']:.3f}s "
        f"for {h}x{w} ({args.repeats} repeats)"
    )
    return EXIT_OK


def _add_common(p, with_data=True):
    p.add_argument("--out", required=True, help="output directory (manifest, artifacts)")
    p.add_argument("--seed", type=int, default=None, help="random seed")
    if with_data:
        p.add_argument("--data", default=None, help="paired dataset root (hazy/, GT/)")
        p.add_argument("--split-rule", default="first20_last5", choices=("official", "first20_last5"))
        p.add_argument("--synthetic", type=int, default=20,
                       help="synthetic pair count when --data is not given")


def build_parser():
    parser = argparse.ArgumentParser(prog="duohaze", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model")
    _add_common(p)
    p.add_argument("--preset", default=None, help="overfit-sanity or nh2021-paper-scale")
    p.add_argument("--config", default=None, help="JSON config overlay")
    p.add_argument("--max-steps", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--tiny-model", action="store_true", help="desk-scale architecture")
    p.add_argument("--encoder-weights", default=None, help="backbone state dict file")
    p.add_argument("--perceptual-weights", default=None, help="vgg16 state dict file")
    p.add_argument("--extra-data", default=None, help="extra paired data root")
    p.add_argument("--gamma-correct", type=float, default=None,
                   help="gamma for the extra data (0.65 aligns the 2020 set)")
    p.add_argument("--gamma-apply-to", default="both", choices=("hazy", "clean", "both"))
    p.add_argument("--val", action="store_true", help="evaluate the val split during training")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("dehaze", help="run inference on images")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="image file or directory")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_dehaze)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a paired dataset")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run the five-preset ablation study")
    _add_common(p)
    p.add_argument("--budget", default="tiny", choices=("tiny", "small", "paper"))
    p.add_argument("--encoder-weights", default=None)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("fusion-study", help="run the fusion-tail depth study")
    _add_common(p)
    p.add_argument("--budget", default="tiny", choices=("tiny", "small", "paper"))
    p.set_defaults(func=cmd_fusion_study)

    p = sub.add_parser("synth", help="generate aligned synthetic haze pairs")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--mode", default="radial", choices=DEPTH_MODES)
    p.add_argument("--beta", type=float, default=1.0, help="scattering coefficient")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--size", default="160x160", help="HxW")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("profile", help="parameter count and runtime")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--size", default="1600x1200", help="HxW")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--tiny-model", action="store_true")
    p.set_defaults(func=cmd_profile)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, PairingError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
