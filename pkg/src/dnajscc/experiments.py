"""Parameter sweeps, figure reproduction and the tiled large-image pipeline."""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .bio import ALPHABET, RUN_DESIRABLE, RUN_LIMIT, bio_report
from .data import load_images, reassemble, tile_image
from .estimator import DNAImageCodec
from .metrics import psnr, ssim
from .training import TrainConfig, load_checkpoint, save_checkpoint
from . import training

logger = logging.getLogger(__name__)

SWEEPS = ("alpha", "R", "gamma_test", "v", "gamma_train")
PIXELS = 3072

#: Nucleotide-per-pixel ratios of the rate sweep; c = 48 R.
RATES = tuple(r / 3 for r in (0.125, 0.5, 0.75, 1.0, 1.25, 1.5))
ALPHAS = (10, 50, 75, 100, 150, 175, 200)
GAMMA_TESTS = (0.001, 0.0025, 0.005, 0.0075, 0.01)


def rate_to_c(rate: float) -> int:
    c = rate * PIXELS / 64
    if abs(c - round(c)) > 1e-9 or round(c) < 1:
        raise ValueError(f"rate {rate} does not give an integer channel count (c = {c})")
    return int(round(c))


@dataclass
class ExperimentSpec:
    """One sweep: ``sweep`` names the varied quantity, ``base`` overrides TrainConfig."""

    sweep: str
    values: list
    base: dict = field(default_factory=dict)
    gamma_tests: tuple = (0.005,)
    repetitions: int = 1
    n_train: int = 2000
    n_test: int = 500
    out_dir: str = "results"
    checkpoint_dir: str | None = None
    data: str | None = None
    train_missing: bool = True
    label: str = ""

    def __post_init__(self):
        if self.sweep not in SWEEPS:
            raise ValueError(f"sweep must be one of {SWEEPS}, got {self.sweep!r}")
        if not self.values:
            raise ValueError("sweep needs at least one value")

    def config_for(self, value) -> TrainConfig:
        cfg = TrainConfig(**{**self.base})
        if self.sweep == "alpha":
            cfg = replace(cfg, alpha=float(value))
        elif self.sweep == "R":
            cfg = replace(cfg, c=rate_to_c(float(value)))
        elif self.sweep == "v":
            cfg = replace(cfg, v=int(value))
        elif self.sweep == "gamma_train":
            cfg = replace(cfg, gamma_train=float(value))
        return cfg

    def tests_for(self, value) -> tuple:
        return (float(value),) if self.sweep == "gamma_test" else tuple(self.gamma_tests)


def config_key(cfg: TrainConfig, data_label: str, n_train: int) -> str:
    blob = json.dumps({"cfg": cfg.to_dict(), "data": data_label, "n": n_train}, sort_keys=True)
    return hashlib.sha1(blob.encode()).hexdigest()[:12]


def obtain_model(cfg: TrainConfig, *, checkpoint_dir=None, n_train: int = 2000, data=None,
                 train_missing: bool = True) -> DNAImageCodec:
    """Load the checkpoint matching ``cfg`` from ``checkpoint_dir``, training it if absent."""
    X, label = load_images(n_train, "train", source=data, seed=cfg.seed)
    path = None
    if checkpoint_dir:
        path = Path(checkpoint_dir) / f"model_{config_key(cfg, label, len(X))}.pt"
        if path.exists():
            return DNAImageCodec.from_checkpoint(path)
    if not train_missing:
        where = path or "<checkpoint dir>"
        raise FileNotFoundError(
            f"no checkpoint for {cfg.to_dict()} at {where}; train one with "
            f"`dnajscc train --config <json>` or rerun with training enabled"
        )
    logger.info("training model for %s", cfg.to_dict())
    model, history = training.fit(X, cfg)
    if path:
        path.parent.mkdir(parents=True, exist_ok=True)
        save_checkpoint(model, cfg, path, iteration=cfg.iterations)
    est = DNAImageCodec(**{k: v for k, v in cfg.to_dict().items() if k != "log_interval"})
    est.model_, est.config_, est.history_ = model, cfg, history
    return est


def run_experiment(spec: ExperimentSpec, plot: bool = True) -> list[dict]:
    """Evaluate every sweep point; writes ``<label>.csv`` (and a PNG) under ``out_dir``."""
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    X_test, data_label = load_images(spec.n_test, "test", source=spec.data, seed=1)
    rows = []
    for value in spec.values:
        cfg = spec.config_for(value)
        est = obtain_model(cfg, checkpoint_dir=spec.checkpoint_dir, n_train=spec.n_train,
                           data=spec.data, train_missing=spec.train_missing)
        for gamma in spec.tests_for(value):
            for rep in range(spec.repetitions):
                res = est.evaluate(X_test, gamma=gamma, seed=rep)
                row = {
                    "sweep": spec.sweep, "value": value, "alpha": cfg.alpha, "c": cfg.c,
                    "R": cfg.k / PIXELS, "v": cfg.v, "gamma_train": cfg.gamma_train,
                    "gamma_test": gamma, "rep": rep, "psnr": res["psnr"], "ssim": res["ssim"],
                    "gc_fraction": res["gc_fraction"], "frac_runs_gt5": res["frac_runs_gt5"],
                    "data": data_label,
                }
                row.update({f"p_{b}": p for b, p in zip(ALPHABET, res["p"])})
                rows.append(row)
    label = spec.label or spec.sweep
    write_csv(rows, out / f"{label}.csv")
    if plot:
        plot_sweep(rows, spec.sweep, out / f"{label}.png")
    return rows


def write_csv(rows: list[dict], path) -> None:
    if not rows:
        return
    with Path(path).open("w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def _mean_by(rows, key, group):
    out: dict = {}
    for r in rows:
        out.setdefault(r[group], {}).setdefault(r["value"], []).append(r[key])
    return {g: sorted((v, float(np.mean(xs))) for v, xs in d.items()) for g, d in out.items()}


def plot_sweep(rows: list[dict], sweep: str, path, metrics=("psnr", "ssim")) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, len(metrics), figsize=(5 * len(metrics), 3.6))
    axes = np.atleast_1d(axes)
    group = "R" if sweep != "R" else "gamma_test"
    for ax, metric in zip(axes, metrics):
        for g, pts in _mean_by(rows, metric, group).items():
            xs, ys = zip(*pts)
            ax.plot(xs, ys, marker="o", label=f"{group}={g:.4g}")
        if metric == "frac_runs_gt5":
            ax.axhline(RUN_LIMIT, color="r", ls=":")
            ax.axhline(RUN_DESIRABLE, color="r", ls=":")
        if metric == "gc_fraction":
            ax.axhline(0.45, color="r", ls=":")
            ax.axhline(0.55, color="r", ls=":")
        ax.set_xlabel(sweep)
        ax.set_ylabel(metric)
        ax.legend(fontsize=8)
        ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


# ------------------------------------------------------------------ figure presets


@dataclass
class Budget:
    """Desk-scale training budget shared by every model of a reproduction."""

    iterations: int = 5000
    n_train: int = 2000
    n_test: int = 500
    seed: int = 0
    data: str | None = None
    checkpoint_dir: str | None = None

    def base(self, **overrides) -> dict:
        return {"iterations": self.iterations, "seed": self.seed, **overrides}

    def spec(self, sweep, values, out_dir, label, **kw) -> ExperimentSpec:
        return ExperimentSpec(sweep=sweep, values=list(values), n_train=self.n_train,
                              n_test=self.n_test, out_dir=str(out_dir),
                              checkpoint_dir=self.checkpoint_dir, data=self.data,
                              label=label, **kw)


def _alpha_rows(budget: Budget, out_dir, alphas) -> list[dict]:
    rows = []
    for c in (2, 8):
        spec = budget.spec("alpha", alphas, out_dir, f"alpha_c{c}", base=budget.base(c=c))
        rows += run_experiment(spec, plot=False)
    return rows


def figure_alpha_quality(out_dir, budget: Budget, alphas=ALPHAS) -> list[dict]:
    rows = _alpha_rows(budget, out_dir, alphas)
    write_csv(rows, Path(out_dir) / "figure6.csv")
    plot_sweep(rows, "alpha", Path(out_dir) / "figure6.png")
    return rows


def figure_alpha_constraints(out_dir, budget: Budget, alphas=ALPHAS) -> list[dict]:
    rows = _alpha_rows(budget, out_dir, alphas)
    write_csv(rows, Path(out_dir) / "figure8.csv")
    plot_sweep(rows, "alpha", Path(out_dir) / "figure8.png", metrics=("frac_runs_gt5", "gc_fraction"))
    return rows


def figure_rate(out_dir, budget: Budget, rates=RATES) -> list[dict]:
    rows = []
    for alpha in (75.0, 175.0):
        spec = budget.spec("R", rates, out_dir, f"rate_alpha{alpha:g}", base=budget.base(alpha=alpha),
                           gamma_tests=(0.0, 0.005))
        rows += run_experiment(spec, plot=False)
    write_csv(rows, Path(out_dir) / "figure7.csv")
    plot_sweep(rows, "R", Path(out_dir) / "figure7.png")
    return rows


def _scheme_models(budget: Budget):
    """The six schemes compared for base balance: two alphas and an unconstrained control, two rates."""
    schemes = []
    for name, alpha in (("proposed-1", 75.0), ("proposed-2", 175.0), ("unconstrained", 0.0)):
        for c in (2, 8):
            cfg = TrainConfig(**budget.base(alpha=alpha, c=c))
            est = obtain_model(cfg, checkpoint_dir=budget.checkpoint_dir, n_train=budget.n_train,
                               data=budget.data)
            schemes.append((f"{name} R={c}/48", est))
    return schemes


def figure_base_balance(out_dir, budget: Budget) -> list[dict]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    X_test, _ = load_images(budget.n_test, "test", source=budget.data, seed=1)
    rows = []
    for name, est in _scheme_models(budget):
        rep = est.bio_report(X_test)
        rows.append({"scheme": name, "gc_fraction": rep.gc_fraction, "frac_runs_gt5": rep.frac_runs_gt,
                     **{f"p_{b}": float(p) for b, p in zip(ALPHABET, rep.p)}})
    write_csv(rows, Path(out_dir) / "figure10.csv")
    fig, ax = plt.subplots(figsize=(8, 3.6))
    idx = np.arange(len(rows))
    bottom = np.zeros(len(rows))
    for b in ALPHABET:
        vals = np.array([r[f"p_{b}"] for r in rows])
        ax.bar(idx, vals, bottom=bottom, label=b)
        bottom += vals
    ax.plot(idx, [r["gc_fraction"] for r in rows], "ko-", label="GC")
    ax.axhline(0.45, color="r", ls=":")
    ax.axhline(0.55, color="r", ls=":")
    ax.set_xticks(idx, [r["scheme"] for r in rows], rotation=30, ha="right", fontsize=7)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(Path(out_dir) / "figure10.png", dpi=120)
    plt.close(fig)
    return rows


def figure_run_lengths(out_dir, budget: Budget, max_len: int = 12) -> list[dict]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    X_test, _ = load_images(budget.n_test, "test", source=budget.data, seed=1)
    rows = []
    fig, ax = plt.subplots(figsize=(6, 3.6))
    for name, est in _scheme_models(budget):
        rep = bio_report(est.transform(X_test), s=est.config_.s)
        total = sum(rep.run_histogram.values())
        props = [rep.run_histogram.get(L, 0) / total for L in range(1, max_len + 1)]
        rows.append({"scheme": name, **{f"L{L}": p for L, p in enumerate(props, 1)},
                     "frac_runs_gt5": rep.frac_runs_gt})
        ax.plot(range(1, max_len + 1), props, marker=".", label=name)
    ax.set_xlabel("homopolymer run length")
    ax.set_ylabel("proportion of nucleotides")
    ax.set_yscale("log")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(Path(out_dir) / "figure11.png", dpi=120)
    plt.close(fig)
    write_csv(rows, Path(out_dir) / "figure11.csv")
    return rows


def big_image_pipeline(img, codec: DNAImageCodec | None = None, *, gamma=None, seed: int = 0,
                       tile_transform: Callable[[np.ndarray], np.ndarray] | None = None,
                       two_pass: bool = True) -> tuple[np.ndarray, dict]:
    """Code a large image tile by tile on two grids offset by 16 pixels and average them.

    ``tile_transform`` maps a ``(T, 32, 32, 3)`` tile batch to its
    reconstruction; by default the codec's full store-and-retrieve pipeline.
    """
    if tile_transform is None:
        if codec is None:
            raise ValueError("either codec or tile_transform is required")

        seeds = itertools.count(seed + 1)

        def tile_transform(tiles):
            return codec.predict(tiles, gamma=gamma, seed=next(seeds))

    g0 = tile_image(img, 0)
    g0 = g0.with_tiles(tile_transform(g0.tiles))
    g1 = None
    if two_pass:
        g1 = tile_image(img, 16)
        g1 = g1.with_tiles(tile_transform(g1.tiles))
    recon = reassemble(g0, g1)
    return recon, {"psnr": psnr(img, recon), "ssim": ssim(img, recon)}


def default_big_image(side: int = 256) -> np.ndarray:
    from PIL import Image
    import skimage.data

    im = Image.fromarray(skimage.data.astronaut()).resize((side, side), Image.LANCZOS)
    return np.asarray(im, dtype=np.uint8)


def figure_big_image(out_dir, budget: Budget, image=None, checkpoint=None, gamma: float = 0.005) -> dict:
    from .data import write_image

    img = default_big_image() if image is None else image
    if checkpoint:
        codec = DNAImageCodec.from_checkpoint(checkpoint)
    else:
        cfg = TrainConfig(**budget.base(c=24, s=128, alpha=75.0))
        codec = obtain_model(cfg, checkpoint_dir=budget.checkpoint_dir, n_train=budget.n_train,
                             data=budget.data)
    recon, m2 = big_image_pipeline(img, codec, gamma=gamma)
    single, m1 = big_image_pipeline(img, codec, gamma=gamma, two_pass=False)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_image(img, out / "figure12_original.png")
    write_image(single, out / "figure12_single_pass.png")
    write_image(recon, out / "figure12_two_pass.png")
    result = {"two_pass": m2, "single_pass": m1, "gamma": gamma}
    (out / "figure12.json").write_text(json.dumps(result, indent=2))
    return result


FIGURES = {
    6: figure_alpha_quality,
    7: figure_rate,
    8: figure_alpha_constraints,
    10: figure_base_balance,
    11: figure_run_lengths,
    12: figure_big_image,
}


def reproduce(figure: int, out_dir, budget: Budget | None = None, **kw):
    if figure not in FIGURES:
        raise ValueError(f"figure must be one of {sorted(FIGURES)}, got {figure}")
    budget = budget or Budget()
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    return FIGURES[figure](out_dir, budget, **kw)


__all__ = [
    "ExperimentSpec", "Budget", "run_experiment", "reproduce", "big_image_pipeline",
    "obtain_model", "rate_to_c", "load_checkpoint",
]
