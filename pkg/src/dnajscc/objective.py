"""Training objective: reconstruction MSE plus a sliding-window base-balance penalty.

The constraint term looks at overlapping windows of ``d`` bases (hop ``d/2``)
and pulls each window's mean towards 1.5 and its variance towards 1.25, the
values of a window holding every base equally often. The mean term steers
GC-content, the variance term discourages homopolymer runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import torch

TARGET_MEAN = 1.5
TARGET_VARIANCE = 1.25
VARIANCE_AMPLIFIER = 10.0
ALPHA_PRESETS = {"proposed-1": 75.0, "proposed-2": 175.0}


@dataclass(frozen=True)
class WindowSpec:
    """Window layout: length ``d``, 1-indexed ``starts``, ``m`` windows."""

    d: int
    starts: np.ndarray
    m: int

    @property
    def hop(self) -> int:
        return self.d // 2


class ConstraintProfile(NamedTuple):
    means: torch.Tensor
    variances: torch.Tensor


class LossBreakdown(NamedTuple):
    rq: torch.Tensor
    bc: torch.Tensor
    total: torch.Tensor


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 75.0
    d: int = 8
    variance_amplifier: float = VARIANCE_AMPLIFIER
    # 0: population variance (target reachable); 1: sample variance
    ddof: int = 0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"alpha must be non-negative, got {self.alpha}")


def target_values() -> tuple[float, float]:
    """Window mean and variance of a sequence with equal base frequencies."""
    p = np.full(4, 0.25)
    mean = float(np.dot(np.arange(4), p))
    var = 0.5**2 * (p[1] + p[2]) + 1.5**2 * (p[0] + p[3])
    return mean, float(var)


def window_starts(k: int, d: int) -> WindowSpec:
    if d < 2 or d % 2:
        raise ValueError(f"window length d must be even and >= 2, got {d}")
    if k < d:
        raise ValueError(f"sequence length k={k} is shorter than window length d={d}")
    if k % (d // 2):
        raise ValueError(f"k={k} is not divisible by the window hop d/2={d // 2}")
    m = math.ceil(2 * k / d) - 1
    starts = 1 + (d // 2) * np.arange(m)
    return WindowSpec(d, starts, m)


def _as_tensor(x) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x
    return torch.as_tensor(np.asarray(x, dtype=np.float64))


def constraint_profile(z, spec: WindowSpec, ddof: int = 0) -> ConstraintProfile:
    """Per-window mean and variance of base values; works on ``(k,)`` or ``(B, k)``."""
    z = _as_tensor(z)
    if not torch.is_floating_point(z):
        z = z.to(torch.float64)
    windows = z.unfold(-1, spec.d, spec.hop)
    if windows.shape[-2] != spec.m:
        raise ValueError(f"window spec expects {spec.m} windows, sequence yields {windows.shape[-2]}")
    means = windows.mean(dim=-1)
    variances = ((windows - means.unsqueeze(-1)) ** 2).sum(dim=-1) / (spec.d - ddof)
    return ConstraintProfile(means, variances)


def l_bc(profile: ConstraintProfile, variance_amplifier: float = VARIANCE_AMPLIFIER) -> torch.Tensor:
    """Constraint loss, averaged over windows and then over any batch dimension."""
    part_gc = ((profile.means - TARGET_MEAN) ** 2).mean(dim=-1)
    part_rll = ((profile.variances - TARGET_VARIANCE) ** 2).mean(dim=-1)
    return (part_gc + variance_amplifier * part_rll).mean()


def l_rq(x, x_hat) -> torch.Tensor:
    """Mean squared error between normalized images."""
    x, x_hat = _as_tensor(x), _as_tensor(x_hat)
    if x.shape != x_hat.shape:
        raise ValueError(f"shape mismatch: {tuple(x.shape)} vs {tuple(x_hat.shape)}")
    return ((x - x_hat) ** 2).mean()


def total_loss(x, x_hat, z, weights: LossWeights) -> LossBreakdown:
    """``l_rq + alpha * l_bc`` with ``z`` the full per-image base sequence(s)."""
    rq = l_rq(x, x_hat)
    z = _as_tensor(z)
    spec = window_starts(z.shape[-1], weights.d)
    bc = l_bc(constraint_profile(z, spec, weights.ddof), weights.variance_amplifier)
    return LossBreakdown(rq, bc, rq + weights.alpha * bc)
