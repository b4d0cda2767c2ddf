"""Input validation helpers shared by the estimator and the functional API."""

from __future__ import annotations

import numpy as np


def check_image(img, *, name: str = "img") -> np.ndarray:
    """Return ``img`` as an ``(H, W, C)`` uint8 array, validating intensities.

    Float input is accepted only if it already holds integral values in
    [0, 255]; anything else is rejected rather than silently rescaled.
    """
    arr = np.asarray(img)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise ValueError(f"{name} must have shape (H, W, C), got {arr.shape}")
    return _as_uint8(arr, name)


def check_images(X, *, shape: tuple[int, int, int] | None = (32, 32, 3), name: str = "X") -> np.ndarray:
    """Validate a batch of images, returning an ``(N, H, W, C)`` uint8 array.

    A single image is promoted to a batch of one.
    """
    arr = np.asarray(X)
    if arr.ndim == 3:
        arr = arr[None]
    if arr.ndim != 4:
        raise ValueError(f"{name} must have shape (N, H, W, C), got {arr.shape}")
    if shape is not None and arr.shape[1:] != tuple(shape):
        raise ValueError(f"{name} images must have shape {tuple(shape)}, got {arr.shape[1:]}")
    return _as_uint8(arr, name)


def check_bases(z, *, name: str = "z", allow_empty: bool = False) -> np.ndarray:
    """Validate a nucleotide vector over {0, 1, 2, 3}; returns a 1-D int8 array."""
    arr = np.asarray(z)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        if not allow_empty:
            raise ValueError(f"{name} is empty")
        return arr.astype(np.int8)
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.mod(arr, 1) == 0):
            raise ValueError(f"{name} must hold integer base codes")
    if arr.min() < 0 or arr.max() > 3:
        raise ValueError(f"{name} entries must lie in {{0, 1, 2, 3}}")
    return arr.astype(np.int8)


def _as_uint8(arr: np.ndarray, name: str) -> np.ndarray:
    if arr.dtype == np.uint8:
        return arr
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise ValueError(f"{name} intensities must lie in [0, 255]")
    if not np.issubdtype(arr.dtype, np.integer) and not np.all(np.mod(arr, 1) == 0):
        raise ValueError(f"{name} must hold integer intensities; got fractional values")
    return arr.astype(np.uint8)
