"""Convolutional encoder/decoder mapping 32x32 RGB images to base sequences and back.

The encoder ends in a nucleotide mapper ``round(3 * sigmoid(a))`` whose
rounding is bypassed in the backward pass (straight-through). The decoder
first merges the ``v`` received copies with a kernel-3 1-D convolution, then
inverts the encoder with transposed convolutions.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .preprocess import compute_K
from .validation import check_images

LATENT_SIDE = 8
LATENT_AREA = LATENT_SIDE * LATENT_SIDE
PIXELS = 32 * 32 * 3


class RoundSTE(torch.autograd.Function):
    """Round half away from zero; identity Jacobian in the backward pass."""

    @staticmethod
    def forward(ctx, x):
        return torch.sign(x) * torch.floor(torch.abs(x) + 0.5)

    @staticmethod
    def backward(ctx, grad_output):
        return grad_output


def ste_round(x: torch.Tensor) -> torch.Tensor:
    return RoundSTE.apply(x)


def nucleotide_map(a: torch.Tensor, quantize: bool = True) -> torch.Tensor:
    """Squash latents to (0, 3) and round to base codes {0, 1, 2, 3}.

    With ``quantize=False`` the unrounded surrogate ``3 * sigmoid(a)`` is
    returned, which is what the straight-through gradient differentiates.
    """
    y = 3.0 * torch.sigmoid(a)
    return ste_round(y) if quantize else y


def _conv(cin, cout, stride, bn=True, act=True):
    layers = [nn.Conv2d(cin, cout, 3, stride=stride, padding=1)]
    if bn:
        layers.append(nn.BatchNorm2d(cout))
    if act:
        layers.append(nn.PReLU())
    return layers


def _tconv(cin, cout, kernel, stride, bn=True):
    # kernel 3/stride 1/pad 1 keeps size; kernel 4/stride 2/pad 1 doubles it
    layers = [nn.ConvTranspose2d(cin, cout, kernel, stride=stride, padding=1)]
    if bn:
        layers.append(nn.BatchNorm2d(cout))
    layers.append(nn.PReLU())
    return layers


class Encoder(nn.Module):
    def __init__(self, c: int = 8):
        super().__init__()
        self.c = c
        self.features = nn.Sequential(
            *_conv(3, 16, 2, bn=False),
            *_conv(16, 32, 2),
            *_conv(32, 32, 1),
            *_conv(32, 32, 1),
            *_conv(32, c, 1, bn=False, act=False),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Normalized ``(B, 3, 32, 32)`` images to pre-quantization latents ``(B, 64c)``."""
        return self.features(x).flatten(1)


class Decoder(nn.Module):
    def __init__(self, c: int = 8, v: int = 2):
        super().__init__()
        self.c = c
        self.v = v
        self.merge = nn.Conv1d(v, 1, 3, stride=1, padding=0)
        self.merge_act = nn.PReLU()
        self.cnn = nn.Sequential(
            *_tconv(c, 32, 3, 1, bn=False),
            *_tconv(32, 32, 3, 1),
            *_tconv(32, 32, 3, 1),
            *_tconv(32, 16, 4, 2),
            nn.ConvTranspose2d(16, 3, 4, stride=2, padding=1),
            nn.Sigmoid(),
        )

    @property
    def k(self) -> int:
        return self.c * LATENT_AREA

    def merge_copies(self, u: torch.Tensor) -> torch.Tensor:
        """Fuse ``(B, v, K)`` scaled copies into one ``(B, k)`` vector."""
        if u.ndim != 3 or u.shape[1] != self.v:
            raise ValueError(f"expected decoder input (B, {self.v}, K), got {tuple(u.shape)}")
        if u.shape[2] != compute_K(self.k):
            raise ValueError(f"copy length K={u.shape[2]} but the decoder needs K={compute_K(self.k)}")
        return self.merge_act(self.merge(u)).squeeze(1)

    def forward(self, u: torch.Tensor) -> torch.Tensor:
        b = self.merge_copies(u)
        return self.cnn(b.view(-1, self.c, LATENT_SIDE, LATENT_SIDE))


class CodecNet(nn.Module):
    """Encoder and decoder pair; ``c`` sets the sequence length ``k = 64c``."""

    def __init__(self, c: int = 8, v: int = 2):
        super().__init__()
        if c < 1 or v < 1:
            raise ValueError(f"c and v must be positive, got c={c}, v={v}")
        self.c = c
        self.v = v
        self.encoder = Encoder(c)
        self.decoder = Decoder(c, v)

    @property
    def k(self) -> int:
        return self.c * LATENT_AREA

    @property
    def K(self) -> int:
        return compute_K(self.k)

    @property
    def rate(self) -> float:
        """Nucleotides per pixel."""
        return self.k / PIXELS

    def encode(self, x: torch.Tensor, quantize: bool = True) -> torch.Tensor:
        return nucleotide_map(self.encoder(x), quantize)

    def decode(self, u: torch.Tensor) -> torch.Tensor:
        return self.decoder(u)


def decoder_input(bundle, z: torch.Tensor | None = None, dtype=torch.float32) -> torch.Tensor:
    """Scale a ``(B, v, K)`` bundle from {0..4} into [0, 1].

    When ``z`` (the differentiable encoder output) is given, the result keeps
    the bundle's values but routes gradients position-by-position back to
    ``z``, treating the channel as identity in the backward pass.
    """
    u = torch.as_tensor(np.asarray(bundle), dtype=dtype) / 4.0
    if z is None or not z.requires_grad:
        return u
    k, K = z.shape[-1], u.shape[-1]
    clean = torch.nn.functional.pad((z + 1.0) / 4.0, (0, K - k)).unsqueeze(1).expand_as(u)
    return u + (clean - clean.detach())


def images_to_tensor(X, dtype=torch.float32) -> torch.Tensor:
    """``(N, 32, 32, 3)`` uint8 images to normalized ``(N, 3, 32, 32)`` tensors."""
    X = check_images(X)
    return torch.as_tensor(X.transpose(0, 3, 1, 2).copy(), dtype=dtype) / 255.0


def tensor_to_images(x: torch.Tensor) -> np.ndarray:
    """Decoder output in [0, 1] to ``(N, 32, 32, 3)`` uint8, rounding half away from zero."""
    arr = x.detach().to(torch.float64).clamp(0, 1).cpu().numpy().transpose(0, 2, 3, 1)
    return np.floor(arr * 255.0 + 0.5).astype(np.uint8)


# ----------------------------------------------------------------- functional API


@torch.no_grad()
def encode(img, net: CodecNet) -> np.ndarray:
    """Encode one image ``(32, 32, 3)`` or a batch into int8 base codes of length ``k``."""
    single = np.asarray(img).ndim == 3
    was_training = net.training
    net.eval()
    try:
        dtype = next(net.parameters()).dtype
        z = net.encode(images_to_tensor(img, dtype))
    finally:
        net.train(was_training)
    out = z.to(torch.int8).numpy()
    return out[0] if single else out


@torch.no_grad()
def merge_copies(bundle, net: CodecNet) -> np.ndarray:
    bundle = np.asarray(bundle)
    single = bundle.ndim == 2
    dtype = next(net.parameters()).dtype
    u = decoder_input(bundle[None] if single else bundle, dtype=dtype)
    b = net.decoder.merge_copies(u).numpy()
    return b[0] if single else b


@torch.no_grad()
def decode(bundle, net: CodecNet) -> np.ndarray:
    """Decode a ``(v, K)`` bundle (or a ``(B, v, K)`` batch) into uint8 images."""
    bundle = np.asarray(bundle)
    single = bundle.ndim == 2
    was_training = net.training
    net.eval()
    try:
        dtype = next(net.parameters()).dtype
        x_hat = net.decode(decoder_input(bundle[None] if single else bundle, dtype=dtype))
    finally:
        net.train(was_training)
    out = tensor_to_images(x_hat)
    return out[0] if single else out
