"""Command line interface: ``dnajscc <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments, training
from .bio import bio_report, validate
from .channel import ChannelConfig, pcr_amplify, recombine
from .data import CIFAR_ENV, load_cifar10, load_images, read_image, tile_image, write_image
from .estimator import DNAImageCodec
from .fasta import group_records, read_fasta, records_from_copies, records_from_sequence, write_fasta
from .preprocess import compute_K, pad_and_map


def _load_inputs(path, limit=None) -> np.ndarray:
    """PNG/PPM/JPEG images are tiled into 32x32 blocks; anything else is read as a CIFAR-10 batch."""
    p = Path(path)
    if p.suffix.lower() in (".png", ".ppm", ".pnm", ".jpg", ".jpeg", ".bmp"):
        imgs = tile_image(read_image(p), 0).tiles
    elif p.suffix.lower() == ".npy":
        imgs = np.load(p)
    else:
        imgs = load_cifar10(p, "test")
    return imgs[:limit] if limit else imgs


def cmd_train(args) -> int:
    cfg = training.TrainConfig.from_json(args.config) if args.config else training.TrainConfig()
    overrides = {k: getattr(args, k) for k in ("iterations", "seed") if getattr(args, k) is not None}
    if overrides:
        cfg = training.TrainConfig.from_dict({**cfg.to_dict(), **overrides})
    n = args.n_train
    if n is None and not (args.data or os.environ.get(CIFAR_ENV)):
        n = 2000
    X, label = load_images(n, "train", source=args.data, seed=cfg.seed)
    logging.info("training on %d %s images", len(X), label)
    training.fit(X, cfg, out_dir=args.out)
    print(json.dumps({"checkpoint": str(Path(args.out) / "final.pt"), "images": len(X), "data": label}))
    return 0


def cmd_encode(args) -> int:
    codec = DNAImageCodec.from_checkpoint(args.checkpoint)
    Z = codec.transform(_load_inputs(args.input, args.limit))
    records = []
    for i, z in enumerate(Z):
        records += records_from_sequence(z, codec.config_.s, img_id=i)
    write_fasta(records, args.output)
    print(json.dumps({"images": len(Z), "k": int(Z.shape[1]), "records": len(records)}))
    return 0


def cmd_channel(args) -> int:
    cfg = ChannelConfig(gamma=args.gamma, v=args.v, s=args.s, seed=args.seed)
    out = []
    for img_id, copies in group_records(read_fasta(args.input)).items():
        # a stored sequence is the first copy of each image, reassembled from its strands
        z = recombine(copies[:1])[0]
        out += records_from_copies(pcr_amplify(z, cfg, seq_id=img_id, key=(img_id,)), img_id)
    write_fasta(out, args.output)
    print(json.dumps({"records": len(out)}))
    return 0


def cmd_decode(args) -> int:
    codec = DNAImageCodec.from_checkpoint(args.checkpoint)
    K = compute_K(codec.k_)
    groups = group_records(read_fasta(args.input))
    bundles = []
    for img_id, copies in groups.items():
        seqs = recombine(copies)
        if len(seqs) != codec.config_.v:
            raise SystemExit(f"image {img_id}: {len(seqs)} copies but the model expects v={codec.config_.v}")
        bundles.append(pad_and_map(seqs, K))
    images = codec.decode(np.stack(bundles))
    out = Path(args.output)
    if out.suffix == ".npy":
        np.save(out, images)
    else:
        out.mkdir(parents=True, exist_ok=True)
        for img_id, img in zip(groups, images):
            write_image(img, out / f"{img_id:05d}.png")
    print(json.dumps({"images": len(images), "output": str(out)}))
    return 0


def cmd_eval(args) -> int:
    codec = DNAImageCodec.from_checkpoint(args.checkpoint)
    X, label = load_images(args.n_test, "test", source=args.data, seed=1)
    results = {}
    for gamma in args.gamma_test:
        reps = [codec.evaluate(X, gamma=gamma, seed=r) for r in range(args.repeats)]
        results[str(gamma)] = {key: float(np.mean([r[key] for r in reps]))
                               for key in ("psnr", "ssim", "gc_fraction", "frac_runs_gt5")}
    text = json.dumps({"data": label, "images": len(X), "results": results}, indent=2)
    if args.output:
        Path(args.output).write_text(text)
    print(text)
    return 0


def cmd_bio_stats(args) -> int:
    records = read_fasta(args.input)
    report = bio_report([r.bases for r in records], L=args.threshold, s=args.s)
    verdict = validate(report)
    payload = {**report.to_dict(), "passed": verdict.passed, "desirable": verdict.desirable,
               "reasons": verdict.reasons}
    text = json.dumps(payload, indent=2)
    if args.output:
        Path(args.output).write_text(text)
    print(text)
    if args.plot:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        total = sum(report.run_histogram.values())
        lengths = sorted(report.run_histogram)
        fig, ax = plt.subplots(figsize=(5, 3.4))
        ax.bar(lengths, [report.run_histogram[L] / total for L in lengths])
        ax.axvline(args.threshold + 0.5, color="r", ls=":")
        ax.set_xlabel("homopolymer run length")
        ax.set_ylabel("proportion of nucleotides")
        fig.tight_layout()
        fig.savefig(args.plot, dpi=120)
        plt.close(fig)
    return 0


def cmd_reproduce(args) -> int:
    budget = experiments.Budget(iterations=args.iterations, n_train=args.n_train, n_test=args.n_test,
                                seed=args.seed, data=args.data, checkpoint_dir=args.checkpoints)
    if args.sweep:
        spec = budget.spec(args.sweep, args.values, args.out, args.sweep,
                           base=budget.base(**json.loads(args.base or "{}")))
        rows = experiments.run_experiment(spec)
        print(json.dumps({"rows": len(rows), "out": args.out}))
        return 0
    if args.figure is None:
        raise SystemExit("reproduce needs --figure or --sweep")
    kw = {}
    if args.figure == 12:
        if args.image:
            kw["image"] = read_image(args.image)
        if args.checkpoint:
            kw["checkpoint"] = args.checkpoint
    result = experiments.reproduce(args.figure, args.out, budget, **kw)
    print(json.dumps(result if isinstance(result, dict) else {"rows": len(result)}, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dnajscc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a codec end to end")
    p.add_argument("--config", help="JSON file with TrainConfig fields")
    p.add_argument("--out", default="runs/default")
    p.add_argument("--data", help="CIFAR-10 batch directory (default: $DNAJSCC_CIFAR10 or bundled photos)")
    p.add_argument("--n-train", type=int, default=None,
                   help="number of training images (bundled-photo default: 2000)")
    p.add_argument("--iterations", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("encode", help="images -> FASTA strands")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="PNG/PPM image, .npy batch or CIFAR-10 batch file")
    p.add_argument("--output", required=True)
    p.add_argument("--limit", type=int)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("channel", help="pass FASTA strands through the IDS channel")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--gamma", type=float, default=0.005)
    p.add_argument("--v", type=int, default=2)
    p.add_argument("--s", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_channel)

    p = sub.add_parser("decode", help="noisy FASTA copies -> images")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True, help=".npy file or directory for PNGs")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="PSNR/SSIM and base statistics on test images")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data")
    p.add_argument("--n-test", type=int, default=500)
    p.add_argument("--gamma-test", type=float, nargs="+", default=[0.0, 0.005, 0.01])
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bio-stats", help="GC-content and homopolymer report of a FASTA file")
    p.add_argument("--input", required=True)
    p.add_argument("--threshold", type=int, default=5)
    p.add_argument("--s", type=int, default=None, help="average statistics over strands of this length")
    p.add_argument("--output")
    p.add_argument("--plot")
    p.set_defaults(func=cmd_bio_stats)

    p = sub.add_parser("reproduce", help="run a figure's sweep at desk scale")
    p.add_argument("--figure", type=int, choices=sorted(experiments.FIGURES))
    p.add_argument("--sweep", choices=experiments.SWEEPS)
    p.add_argument("--values", type=float, nargs="+")
    p.add_argument("--base", help="JSON TrainConfig overrides for --sweep")
    p.add_argument("--out", default="results")
    p.add_argument("--checkpoints", default="results/checkpoints")
    p.add_argument("--iterations", type=int, default=5000)
    p.add_argument("--n-train", type=int, default=2000)
    p.add_argument("--n-test", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--data")
    p.add_argument("--image", help="large image for figure 12")
    p.add_argument("--checkpoint", help="trained checkpoint for figure 12")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
