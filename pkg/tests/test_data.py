import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dnajscc.data import (
    DataError, TileGrid, bundled_patches, denormalize, load_cifar10, load_images,
    normalize, reassemble, round_half_away, tile_image,
)


def _cifar_bytes(images, labels=None):
    labels = labels if labels is not None else [7] * len(images)
    out = bytearray()
    for lab, img in zip(labels, images):
        out.append(lab)
        out += img.transpose(2, 0, 1).tobytes()  # channel-planar, row-major
    return bytes(out)


def test_cifar_three_records(tmp_path, rng):
    imgs = rng.integers(0, 256, size=(3, 32, 32, 3), dtype=np.uint8)
    f = tmp_path / "batch.bin"
    f.write_bytes(_cifar_bytes(imgs))
    assert f.stat().st_size == 3073 * 3
    out = load_cifar10(f)
    assert out.shape == (3, 32, 32, 3)
    np.testing.assert_array_equal(out, imgs)


def test_cifar_planar_layout(tmp_path):
    rec = bytearray([3]) + bytes([10] * 1024 + [20] * 1024 + [30] * 1024)
    f = tmp_path / "b.bin"
    f.write_bytes(bytes(rec))
    img = load_cifar10(f)[0]
    assert tuple(img[5, 7]) == (10, 20, 30)


def test_cifar_empty_file(tmp_path):
    f = tmp_path / "empty.bin"
    f.write_bytes(b"")
    assert load_cifar10(f).shape == (0, 32, 32, 3)


def test_cifar_truncated_names_offset(tmp_path, rng):
    imgs = rng.integers(0, 256, size=(2, 32, 32, 3), dtype=np.uint8)
    f = tmp_path / "t.bin"
    f.write_bytes(_cifar_bytes(imgs)[:-10])
    with pytest.raises(DataError, match="byte offset 3073"):
        load_cifar10(f)


def test_cifar_missing_path(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_cifar10(tmp_path / "nope.bin")


def test_cifar_directory_splits(tmp_path, rng):
    for i in range(1, 6):
        (tmp_path / f"data_batch_{i}.bin").write_bytes(
            _cifar_bytes(rng.integers(0, 256, size=(2, 32, 32, 3), dtype=np.uint8)))
    (tmp_path / "test_batch.bin").write_bytes(
        _cifar_bytes(rng.integers(0, 256, size=(3, 32, 32, 3), dtype=np.uint8)))
    assert len(load_cifar10(tmp_path, "train")) == 10
    assert len(load_cifar10(tmp_path, "test")) == 3
    X, label = load_images(4, "train", source=tmp_path)
    assert label == "cifar10" and len(X) == 4
    with pytest.raises(ValueError):
        load_cifar10(tmp_path, "validation")


@pytest.mark.parametrize("pixel, expected", [(0, 0.0), (255, 1.0), (51, 0.2)])
def test_normalize_examples(pixel, expected):
    assert normalize(np.uint8(pixel)) == pytest.approx(expected)


def test_normalize_bijection():
    levels = np.arange(256, dtype=np.uint8)
    np.testing.assert_array_equal(denormalize(normalize(levels)), levels)


def test_round_half_away():
    np.testing.assert_array_equal(round_half_away([0.5, 1.5, 2.5, -0.5, 1.49]), [1, 2, 3, -1, 1])


def test_tile_counts():
    img = np.zeros((256, 256, 3), np.uint8)
    assert len(tile_image(img, 0)) == 64
    # enumeration oracle: tile origins on the 288x288 padded canvas
    expected = sum(1 for r in range(0, 288, 32) for c in range(0, 288, 32))
    assert len(tile_image(img, 16)) == expected == 81


def test_tile_identity(rng):
    img = rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8)
    grid = tile_image(img, 0)
    assert len(grid) == 1
    np.testing.assert_array_equal(grid.tiles[0], img)


def test_tile_geometry_error():
    with pytest.raises(DataError, match="pad by 24 rows and 0 columns"):
        tile_image(np.zeros((40, 32, 3), np.uint8), 0)
    with pytest.raises(DataError):
        tile_image(np.zeros((32, 32, 3), np.uint8), 8)


def test_tile_shifted_content(rng):
    img = rng.integers(1, 256, size=(64, 64, 3), dtype=np.uint8)
    grid = tile_image(img, 16)
    # first tile: 16 blank rows/cols then the image's top-left 16x16 corner
    assert np.all(grid.tiles[0][:16] == 0)
    np.testing.assert_array_equal(grid.tiles[0][16:, 16:], img[:16, :16])


def test_reassemble_average_rounding():
    img = np.zeros((32, 32, 3), np.uint8)
    g0 = tile_image(img, 0)
    g1 = tile_image(img, 16)
    a = g0.with_tiles(np.full_like(g0.tiles, 3))
    b = g1.with_tiles(np.full_like(g1.tiles, 4))
    out = reassemble(a, b)
    assert np.all(out == 4)  # (3 + 4) / 2 = 3.5 -> 4


def test_reassemble_single_pass(rng):
    img = rng.integers(0, 256, size=(64, 96, 3), dtype=np.uint8)
    np.testing.assert_array_equal(reassemble(tile_image(img, 0)), img)


def test_reassemble_mismatch():
    g0 = tile_image(np.zeros((32, 32, 3), np.uint8), 0)
    g1 = tile_image(np.zeros((64, 64, 3), np.uint8), 16)
    with pytest.raises(DataError):
        reassemble(g0, g1)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_tile_reassemble_round_trip(gh, gw, seed):
    img = np.random.default_rng(seed).integers(0, 256, size=(32 * gh, 32 * gw, 3), dtype=np.uint8)
    out = reassemble(tile_image(img, 0), tile_image(img, 16))
    np.testing.assert_array_equal(out, img)


def test_bundled_patches_deterministic():
    a = bundled_patches(16, "train", seed=3)
    b = bundled_patches(16, "train", seed=3)
    assert a.shape == (16, 32, 32, 3) and a.dtype == np.uint8
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, bundled_patches(16, "test", seed=3))


def test_with_tiles_shape_check():
    grid = tile_image(np.zeros((64, 64, 3), np.uint8))
    with pytest.raises(DataError):
        grid.with_tiles(np.zeros((3, 32, 32, 3)))
    assert isinstance(grid.with_tiles(grid.tiles), TileGrid)
