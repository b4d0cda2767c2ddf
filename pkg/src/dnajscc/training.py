"""End-to-end training: encoder -> IDS channel x v -> padding -> decoder -> loss.

The channel and the padding stage carry no parameters. Gradients cross them
straight-through: each decoder input position passes its gradient to the
encoder output at the same index.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np
import torch

from .channel import ChannelConfig, transmit
from .network import CodecNet, decoder_input, images_to_tensor, nucleotide_map
from .objective import LossWeights, total_loss
from .validation import check_images

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "dnajscc-checkpoint"
CHECKPOINT_VERSION = 1


class TrainingError(RuntimeError):
    pass


class CheckpointError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    iterations: int = 50_000
    lr_initial: float = 5e-3
    lr_final: float = 5e-4
    batch_size: int = 64
    alpha: float = 75.0
    c: int = 8
    v: int = 2
    d: int = 8
    s: int = 256
    gamma_train: float = 0.005
    seed: int = 0
    checkpoint_interval: int = 0
    log_interval: int = 100
    # 0 divides window variances by d, 1 by d - 1
    variance_ddof: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.lr_final > self.lr_initial:
            raise ValueError("lr_final must not exceed lr_initial")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.variance_ddof not in (0, 1):
            raise ValueError("variance_ddof must be 0 or 1")
        # fail early on inconsistent channel settings
        self.channel()

    @property
    def k(self) -> int:
        return 64 * self.c

    def channel(self, gamma: float | None = None) -> ChannelConfig:
        gamma = self.gamma_train if gamma is None else gamma
        return ChannelConfig(gamma=gamma, v=self.v, s=self.s, seed=self.seed)

    def weights(self) -> LossWeights:
        return LossWeights(alpha=self.alpha, d=self.d, ddof=self.variance_ddof)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "TrainConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


class StepLog(NamedTuple):
    iteration: int
    lr: float
    l_rq: float
    l_bc: float
    total: float


def lr_schedule(iteration: int, cfg: TrainConfig) -> float:
    """Initial rate for the first half of training, final rate afterwards."""
    return cfg.lr_initial if iteration < math.ceil(cfg.iterations / 2) else cfg.lr_final


def build_model(cfg: TrainConfig) -> CodecNet:
    torch.manual_seed(cfg.seed)
    return CodecNet(c=cfg.c, v=cfg.v)


def make_optimizer(model: CodecNet, cfg: TrainConfig) -> torch.optim.Adam:
    return torch.optim.Adam(model.parameters(), lr=cfg.lr_initial, betas=(0.9, 0.999), eps=1e-8)


def forward_losses(model: CodecNet, x: torch.Tensor, cfg: TrainConfig,
                   rng: np.random.Generator, gamma: float | None = None):
    """One forward pass through the full pipeline; returns the loss breakdown."""
    z = nucleotide_map(model.encoder(x))
    bundle = transmit(z.detach().to(torch.int8).numpy(), cfg.channel(gamma), rng=rng)
    x_hat = model.decoder(decoder_input(bundle, z, dtype=x.dtype))
    # float64 loss arithmetic keeps total == l_rq + alpha * l_bc exact in the logs
    return total_loss(x.double(), x_hat.double(), z.double(), cfg.weights())


def train_step(batch, model: CodecNet, optimizer: torch.optim.Optimizer, cfg: TrainConfig,
               rng: np.random.Generator, iteration: int = 0) -> StepLog:
    """One Adam update of encoder and decoder on a batch of images."""
    x = batch if isinstance(batch, torch.Tensor) else images_to_tensor(batch)
    lr = lr_schedule(iteration, cfg)
    for group in optimizer.param_groups:
        group["lr"] = lr
    model.train()
    losses = forward_losses(model, x, cfg, rng)
    if not torch.isfinite(losses.total):
        raise TrainingError(
            f"non-finite loss at iteration {iteration}: l_rq={losses.rq.item()}, "
            f"l_bc={losses.bc.item()}, total={losses.total.item()}"
        )
    optimizer.zero_grad()
    losses.total.backward()
    optimizer.step()
    return StepLog(iteration, lr, losses.rq.item(), losses.bc.item(), losses.total.item())


def channel_rng(seed: int, iteration: int) -> np.random.Generator:
    """Fresh, reproducible channel noise for every iteration."""
    return np.random.default_rng([seed, 2, iteration])


def fit(images, cfg: TrainConfig, *, model: CodecNet | None = None, out_dir=None,
        callback: Callable[[StepLog], None] | None = None) -> tuple[CodecNet, list[StepLog]]:
    """Train on ``(N, 32, 32, 3)`` uint8 images for ``cfg.iterations`` steps.

    With ``out_dir`` set, a ``metrics.csv`` log and periodic/final
    checkpoints are written there.
    """
    images = check_images(images)
    if len(images) == 0:
        raise ValueError("no training images")
    model = build_model(cfg) if model is None else model
    optimizer = make_optimizer(model, cfg)
    data = images_to_tensor(images)
    order_rng = np.random.default_rng([cfg.seed, 1])
    bs = min(cfg.batch_size, len(images))

    out = Path(out_dir) if out_dir else None
    writer = log_file = None
    if out:
        out.mkdir(parents=True, exist_ok=True)
        log_file = (out / "metrics.csv").open("w", newline="")
        writer = csv.writer(log_file)
        writer.writerow(["iteration", "lr", "l_rq", "l_bc", "total"])

    history: list[StepLog] = []
    perm, pos = order_rng.permutation(len(images)), 0
    try:
        for it in range(cfg.iterations):
            if pos + bs > len(perm):
                perm, pos = order_rng.permutation(len(images)), 0
            idx = perm[pos:pos + bs]
            pos += bs
            log = train_step(data[idx], model, optimizer, cfg, channel_rng(cfg.seed, it), it)
            history.append(log)
            if writer:
                writer.writerow(list(log))
            if callback:
                callback(log)
            if cfg.log_interval and it % cfg.log_interval == 0:
                logger.info("it=%d lr=%.1e l_rq=%.5f l_bc=%.4f total=%.4f", *log)
            if out and cfg.checkpoint_interval and (it + 1) % cfg.checkpoint_interval == 0:
                save_checkpoint(model, cfg, out / f"checkpoint_{it + 1:06d}.pt", iteration=it + 1)
    finally:
        if log_file:
            log_file.close()
    if out:
        save_checkpoint(model, cfg, out / "final.pt", iteration=cfg.iterations)
    model.eval()
    return model, history


def save_checkpoint(model: CodecNet, cfg: TrainConfig, path, iteration: int | None = None) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": cfg.to_dict(),
        "iteration": iteration,
        "state_dict": {k: v.detach().clone() for k, v in model.state_dict().items()},
    }
    torch.save(payload, Path(path))


def load_checkpoint(path, model: CodecNet | None = None) -> tuple[CodecNet, TrainConfig]:
    """Restore ``(model, config)``; if ``model`` is given it is loaded in place."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as err:
        raise CheckpointError(f"corrupt or truncated checkpoint {path}: {err}") from err
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not a {CHECKPOINT_FORMAT} archive")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path} has checkpoint version {payload.get('version')}, expected {CHECKPOINT_VERSION}"
        )
    cfg = TrainConfig.from_dict(payload["config"])
    if model is None:
        model = CodecNet(c=cfg.c, v=cfg.v)
    elif (model.c, model.v) != (cfg.c, cfg.v):
        raise CheckpointError(
            f"checkpoint has c={cfg.c}, v={cfg.v} but the model has c={model.c}, v={model.v}"
        )
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, cfg
