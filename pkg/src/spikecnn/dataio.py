"""MNIST-shaped IDX ingestion, image normalization, patch extraction, noise injection.

Images travel through the package as numpy arrays: uint8 grids straight off
disk ("raw"), or float grids in [0, 1] ("intensity") once scaled by 1/255.
All randomized operations take an explicit numpy Generator so callers own
their streams.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadMagicError,
    CountMismatchError,
    DegenerateInputError,
    InvalidGeometryError,
    InvalidParameterError,
    TruncatedFileError,
)

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


@dataclass
class LabeledDataset:
    """Intensity images in [0, 1] with class labels 0-9."""

    images: np.ndarray  # (n, rows, cols) float64 in [0, 1]
    labels: np.ndarray  # (n,) int64

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise CountMismatchError(
                f"{len(self.images)} images vs {len(self.labels)} labels"
            )
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() > 9):
            raise InvalidParameterError("labels must be in 0..9")

    def __len__(self) -> int:
        return len(self.images)

    def subset(self, start: int, stop: int) -> "LabeledDataset":
        return LabeledDataset(self.images[start:stop], self.labels[start:stop])


def _read_be32(buf: bytes, offset: int, path: str) -> int:
    if offset + 4 > len(buf):
        raise TruncatedFileError(f"{path}: header ends after {len(buf)} bytes")
    return struct.unpack_from(">I", buf, offset)[0]


def load_idx_images(path: str) -> np.ndarray:
    """Read an IDX3 image file into a (n, rows, cols) uint8 array."""
    with open(path, "rb") as f:
        buf = f.read()
    magic = _read_be32(buf, 0, path)
    if magic != IMAGE_MAGIC:
        raise BadMagicError(f"{path}: magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}")
    n = _read_be32(buf, 4, path)
    rows = _read_be32(buf, 8, path)
    cols = _read_be32(buf, 12, path)
    need = 16 + n * rows * cols
    if len(buf) < need:
        raise TruncatedFileError(f"{path}: {len(buf)} bytes, need {need}")
    data = np.frombuffer(buf, dtype=np.uint8, count=n * rows * cols, offset=16)
    return data.reshape(n, rows, cols).copy()


def load_idx_labels(path: str) -> np.ndarray:
    """Read an IDX1 label file into a (n,) uint8 array."""
    with open(path, "rb") as f:
        buf = f.read()
    magic = _read_be32(buf, 0, path)
    if magic != LABEL_MAGIC:
        raise BadMagicError(f"{path}: magic {magic:#010x}, expected {LABEL_MAGIC:#010x}")
    n = _read_be32(buf, 4, path)
    if len(buf) < 8 + n:
        raise TruncatedFileError(f"{path}: {len(buf)} bytes, need {8 + n}")
    return np.frombuffer(buf, dtype=np.uint8, count=n, offset=8).copy()


def load_idx(images_path: str, labels_path: str) -> LabeledDataset:
    """Load paired IDX image/label files; pixel bytes become intensities in [0, 1]."""
    raw = load_idx_images(images_path)
    labels = load_idx_labels(labels_path)
    if len(raw) != len(labels):
        raise CountMismatchError(
            f"{images_path} holds {len(raw)} images but "
            f"{labels_path} holds {len(labels)} labels"
        )
    return LabeledDataset(raw.astype(np.float64) / 255.0, labels.astype(np.int64))


def save_idx_images(images: np.ndarray, path: str) -> None:
    """Write a (n, rows, cols) array to IDX3. Float input in [0, 1] is scaled to bytes."""
    arr = np.asarray(images)
    if arr.dtype != np.uint8:
        arr = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    n, rows, cols = arr.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", IMAGE_MAGIC, n, rows, cols))
        f.write(arr.tobytes())


def save_idx_labels(labels: np.ndarray, path: str) -> None:
    arr = np.asarray(labels).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">II", LABEL_MAGIC, len(arr)))
        f.write(arr.tobytes())


def normalize_zero_mean_unit_std(image: np.ndarray) -> np.ndarray:
    """Shift/scale an image to zero mean and unit population standard deviation."""
    img = np.asarray(image, dtype=np.float64)
    std = img.std()
    if std == 0.0:
        raise DegenerateInputError("constant image has zero standard deviation")
    return (img - img.mean()) / std


def extract_patches(
    image: np.ndarray, patch_size: int, stride: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Enumerate overlapped square patches in row-major order, borders ignored.

    Returns (values, origins) with values of shape (n, p, p) and origins the
    (row, col) of each patch's top-left corner in the source image.
    """
    img = np.asarray(image)
    r, c = img.shape
    p = patch_size
    if p < 1 or p > min(r, c):
        raise InvalidGeometryError(f"patch size {p} does not fit a {r}x{c} image")
    if stride < 1:
        raise InvalidParameterError(f"stride must be >= 1, got {stride}")
    rows = range(0, r - p + 1, stride)
    cols = range(0, c - p + 1, stride)
    origins = np.array([(i, j) for i in rows for j in cols], dtype=np.int64)
    windows = np.lib.stride_tricks.sliding_window_view(img, (p, p))
    values = windows[::stride, ::stride].reshape(-1, p, p).copy()
    return values, origins


def patch_count(rows: int, cols: int, patch_size: int, stride: int = 1) -> int:
    """Closed-form patch count for the border-ignoring enumeration above."""
    return ((rows - patch_size) // stride + 1) * ((cols - patch_size) // stride + 1)


def add_gaussian_noise(
    image: np.ndarray, variance: float, rng: np.random.Generator
) -> np.ndarray:
    """Add N(0, variance) per pixel on the [0, 1] intensity scale, then clamp."""
    if variance < 0:
        raise InvalidParameterError(f"variance must be >= 0, got {variance}")
    img = np.asarray(image, dtype=np.float64)
    noisy = img + rng.normal(0.0, np.sqrt(variance), size=img.shape)
    return np.clip(noisy, 0.0, 1.0)


def add_salt_pepper(
    image: np.ndarray, density: float, rng: np.random.Generator
) -> np.ndarray:
    """Corrupt each pixel with probability `density`, half to 1.0 and half to 0.0."""
    if not 0.0 <= density <= 1.0:
        raise InvalidParameterError(f"density must be in [0, 1], got {density}")
    img = np.asarray(image, dtype=np.float64)
    corrupted = rng.random(img.shape) < density
    salt = rng.random(img.shape) < 0.5
    return np.where(corrupted, np.where(salt, 1.0, 0.0), img)
