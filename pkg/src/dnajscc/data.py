"""Image ingestion, normalization and block tiling.

Images are handled as ``(H, W, C)`` uint8 arrays throughout; batches are
``(N, H, W, C)``. The network modules convert to channel-first tensors.
"""

from __future__ import annotations

import functools
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .validation import check_image

TILE = 32
CIFAR_RECORD_BYTES = 1 + 32 * 32 * 3
CIFAR_TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
CIFAR_TEST_FILES = ("test_batch.bin",)

#: Environment variable pointing at an extracted ``cifar-10-batches-bin`` directory.
CIFAR_ENV = "DNAJSCC_CIFAR10"


class DataError(ValueError):
    """Raised for malformed dataset files or incompatible image geometry."""


def round_half_away(x):
    """Round to nearest integer, ties away from zero."""
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


# --------------------------------------------------------------------------- CIFAR-10


def _read_cifar_file(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    n_full, rest = divmod(len(raw), CIFAR_RECORD_BYTES)
    if rest:
        offset = n_full * CIFAR_RECORD_BYTES
        raise DataError(
            f"truncated CIFAR-10 file {path}: incomplete record at byte offset {offset} "
            f"({rest} of {CIFAR_RECORD_BYTES} bytes present)"
        )
    records = np.frombuffer(raw, dtype=np.uint8).reshape(n_full, CIFAR_RECORD_BYTES)
    # drop the label byte; pixels are channel-planar R, G, B, each row-major
    pixels = records[:, 1:].reshape(n_full, 3, 32, 32)
    return np.ascontiguousarray(pixels.transpose(0, 2, 3, 1))


def load_cifar10(path, split: str = "train") -> np.ndarray:
    """Load CIFAR-10 binary batches as an ``(N, 32, 32, 3)`` uint8 array.

    ``path`` is either a single batch file or the extracted
    ``cifar-10-batches-bin`` directory, in which case ``split`` selects the
    five training batches or the test batch. Labels are discarded.
    """
    if split not in ("train", "test"):
        raise ValueError(f"split must be 'train' or 'test', got {split!r}")
    path = Path(path)
    if path.is_dir():
        names = CIFAR_TRAIN_FILES if split == "train" else CIFAR_TEST_FILES
        files = [path / name for name in names]
    else:
        files = [path]
    for f in files:
        if not f.exists():
            raise FileNotFoundError(f"CIFAR-10 batch file not found: {f}")
    arrays = [_read_cifar_file(f) for f in files]
    if not arrays:
        return np.zeros((0, 32, 32, 3), dtype=np.uint8)
    return np.concatenate(arrays, axis=0)


def normalize(img) -> np.ndarray:
    """Map 8-bit intensities to floats in [0, 1]."""
    return np.asarray(img, dtype=np.float64) / 255.0


def denormalize(x) -> np.ndarray:
    """Inverse of :func:`normalize`, rounding to the nearest intensity."""
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
    return round_half_away(x * 255.0).astype(np.uint8)


# --------------------------------------------------------------------------- bundled photos

# RGB/gray photos shipped inside scikit-image and scikit-learn. Held-out test
# sources are disjoint from training sources.
_SKIMAGE_TRAIN = (
    "astronaut.png", "coffee.png", "rocket.jpg", "motorcycle_left.png",
    "hubble_deep_field.jpg", "retina.jpg", "ihc.png", "brick.png",
    "grass.png", "gravel.png", "camera.png", "coins.png",
)
_SKIMAGE_TEST = ("chelsea.png", "motorcycle_right.png")
_SKLEARN_TRAIN = ("flower.jpg",)
_SKLEARN_TEST = ("china.jpg",)
_PYRAMID_SIDES = (48, 64, 96, 128)


def _bundled_sources(split: str) -> list[Path]:
    import skimage.data
    import sklearn.datasets

    sk_dir = Path(skimage.data.__file__).parent
    skl_dir = Path(sklearn.datasets.__file__).parent / "images"
    if split == "train":
        names = [sk_dir / n for n in _SKIMAGE_TRAIN] + [skl_dir / n for n in _SKLEARN_TRAIN]
    else:
        names = [sk_dir / n for n in _SKIMAGE_TEST] + [skl_dir / n for n in _SKLEARN_TEST]
    return [p for p in names if p.exists()]


@functools.lru_cache(maxsize=4)
def _bundled_pyramid(split: str) -> tuple[np.ndarray, ...]:
    from PIL import Image

    levels = []
    for src in _bundled_sources(split):
        im = Image.open(src).convert("RGB")
        w, h = im.size
        for side in _PYRAMID_SIDES:
            scale = side / min(w, h)
            size = (max(TILE, round(w * scale)), max(TILE, round(h * scale)))
            levels.append(np.asarray(im.resize(size, Image.LANCZOS), dtype=np.uint8))
    if not levels:
        raise DataError("no bundled sample photos found (scikit-image / scikit-learn data missing)")
    return tuple(levels)


def bundled_patches(n: int, split: str = "train", seed: int = 0) -> np.ndarray:
    """Sample ``n`` 32x32x3 crops from photos bundled with scikit-image/-learn.

    A stand-in for CIFAR-10 when the dataset is not available locally. Each
    photo is resampled to several scales so that crops range from object
    parts to whole scenes. Deterministic in ``seed``.
    """
    if split not in ("train", "test"):
        raise ValueError(f"split must be 'train' or 'test', got {split!r}")
    levels = _bundled_pyramid(split)
    rng = np.random.default_rng([seed, 0 if split == "train" else 1])
    out = np.empty((n, TILE, TILE, 3), dtype=np.uint8)
    which = rng.integers(0, len(levels), size=n)
    for i, j in enumerate(which):
        lvl = levels[j]
        r = rng.integers(0, lvl.shape[0] - TILE + 1)
        c = rng.integers(0, lvl.shape[1] - TILE + 1)
        out[i] = lvl[r:r + TILE, c:c + TILE]
    return out


def load_images(n: int | None = None, split: str = "train", source=None, seed: int = 0) -> tuple[np.ndarray, str]:
    """Return ``(images, source_label)`` for training or evaluation.

    ``source`` may be a CIFAR-10 directory/file; when omitted the
    ``DNAJSCC_CIFAR10`` environment variable is consulted, and failing that
    the bundled-photo patches are used (``n`` is then required).
    """
    source = source or os.environ.get(CIFAR_ENV)
    if source:
        imgs = load_cifar10(source, split)
        if n is not None:
            imgs = imgs[:n]
        return imgs, "cifar10"
    if n is None:
        raise ValueError("n is required when sampling bundled photo patches")
    return bundled_patches(n, split, seed), "bundled-photos"


def read_image(path) -> np.ndarray:
    """Read a PNG/PPM/JPEG file as an ``(H, W, 3)`` uint8 array."""
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def write_image(img, path) -> None:
    from PIL import Image

    Image.fromarray(check_image(img)).save(path)


# --------------------------------------------------------------------------- tiling


@dataclass
class TileGrid:
    """Non-overlapping 32x32 tiles of one image, optionally on a shifted canvas.

    ``origin_offsets`` are (row, col) positions in the padded canvas; with
    ``pass_shift=16`` the canvas is the source padded by 16 blank pixels on
    every border.
    """

    tiles: np.ndarray
    origin_offsets: list[tuple[int, int]]
    pass_shift: int
    source_shape: tuple[int, int, int]
    grid_shape: tuple[int, int] = field(default=(0, 0))

    def __len__(self) -> int:
        return len(self.tiles)

    def with_tiles(self, tiles) -> "TileGrid":
        """Same geometry, new tile contents (e.g. decoded reconstructions)."""
        tiles = np.asarray(tiles)
        if tiles.shape != self.tiles.shape:
            raise DataError(f"tile array shape {tiles.shape} does not match grid {self.tiles.shape}")
        return TileGrid(tiles, list(self.origin_offsets), self.pass_shift, self.source_shape, self.grid_shape)

    def mosaic(self) -> np.ndarray:
        """Stitch tiles back into the padded canvas (float64)."""
        gr, gc = self.grid_shape
        c = self.source_shape[2]
        canvas = np.zeros((gr * TILE, gc * TILE, c), dtype=np.float64)
        for tile, (r, col) in zip(self.tiles, self.origin_offsets):
            canvas[r:r + TILE, col:col + TILE] = tile
        return canvas


def tile_image(img, shift: int = 0) -> TileGrid:
    """Split an image into 32x32 tiles, after zero-padding by ``shift`` on each border."""
    img = check_image(img)
    if shift not in (0, 16):
        raise DataError(f"shift must be 0 or 16, got {shift}")
    h, w, c = img.shape
    ph, pw = h + 2 * shift, w + 2 * shift
    if ph % TILE or pw % TILE:
        need_h = (-ph) % TILE
        need_w = (-pw) % TILE
        raise DataError(
            f"image {h}x{w} with shift {shift} gives a {ph}x{pw} canvas; "
            f"pad by {need_h} rows and {need_w} columns to reach a multiple of {TILE}"
        )
    canvas = np.pad(img, ((shift, shift), (shift, shift), (0, 0))) if shift else img
    gr, gc = ph // TILE, pw // TILE
    tiles = (
        canvas.reshape(gr, TILE, gc, TILE, c)
        .transpose(0, 2, 1, 3, 4)
        .reshape(gr * gc, TILE, TILE, c)
        .copy()
    )
    offsets = [(i * TILE, j * TILE) for i in range(gr) for j in range(gc)]
    return TileGrid(tiles, offsets, shift, (h, w, c), (gr, gc))


def _crop(grid: TileGrid) -> np.ndarray:
    h, w, _ = grid.source_shape
    s = grid.pass_shift
    return grid.mosaic()[s:s + h, s:s + w]


def reassemble(pass0: TileGrid, pass1: TileGrid | None = None) -> np.ndarray:
    """Average the two stitched passes pixel-wise and crop the padding.

    With ``pass1`` omitted the single-pass mosaic is returned.
    """
    first = _crop(pass0)
    if pass1 is None:
        out = first
    else:
        if pass1.source_shape != pass0.source_shape:
            raise DataError(
                f"pass geometry mismatch: {pass0.source_shape} vs {pass1.source_shape}"
            )
        out = (first + _crop(pass1)) / 2.0
    return np.clip(round_half_away(out), 0, 255).astype(np.uint8)
