"""Procedurally generated 28x28 digit corpus for self-contained tests and demos.

Each digit class is a fixed stroke skeleton (polylines and sampled curves in
a unit box). A sample applies a random affine jitter (rotation, anisotropic
scale, shear, translation), rasterizes the strokes with a soft pen profile,
and scales by a random peak intensity. The result is MNIST-shaped data:
grayscale [0, 1] images with ~15% ink coverage, suitable wherever the real
IDX files would be used.
"""

from __future__ import annotations

import numpy as np

from .dataio import LabeledDataset

SIZE = 28


def _circle(cx, cy, rx, ry, n=20, start=0.0, sweep=2 * np.pi):
    a = start + np.linspace(0.0, sweep, n)
    return np.stack([cx + rx * np.cos(a), cy + ry * np.sin(a)], axis=1)


def _bezier(p0, p1, p2, n=12):
    t = np.linspace(0.0, 1.0, n)[:, None]
    p0, p1, p2 = (np.asarray(p, dtype=np.float64) for p in (p0, p1, p2))
    return (1 - t) ** 2 * p0 + 2 * (1 - t) * t * p1 + t ** 2 * p2


def _skeletons() -> dict[int, list[np.ndarray]]:
    return {
        0: [_circle(0.5, 0.5, 0.24, 0.33, n=24)],
        1: [np.array([[0.42, 0.24], [0.56, 0.12], [0.56, 0.88]])],
        2: [
            _bezier([0.3, 0.3], [0.48, 0.02], [0.7, 0.3]),
            _bezier([0.7, 0.3], [0.68, 0.55], [0.3, 0.86]),
            np.array([[0.3, 0.86], [0.72, 0.86]]),
        ],
        3: [
            _bezier([0.32, 0.18], [0.75, 0.12], [0.48, 0.46]),
            _bezier([0.48, 0.46], [0.85, 0.6], [0.32, 0.86]),
        ],
        4: [
            np.array([[0.6, 0.1], [0.27, 0.6], [0.78, 0.6]]),
            np.array([[0.63, 0.34], [0.63, 0.9]]),
        ],
        5: [
            np.array([[0.7, 0.12], [0.33, 0.12], [0.31, 0.46]]),
            _bezier([0.31, 0.46], [0.78, 0.4], [0.62, 0.72]),
            _bezier([0.62, 0.72], [0.5, 0.95], [0.28, 0.8]),
        ],
        6: [
            _bezier([0.66, 0.1], [0.36, 0.3], [0.34, 0.62]),
            _circle(0.5, 0.68, 0.17, 0.17, n=18),
        ],
        7: [np.array([[0.28, 0.14], [0.72, 0.14], [0.45, 0.88]])],
        8: [
            _circle(0.5, 0.3, 0.16, 0.17, n=18),
            _circle(0.5, 0.67, 0.2, 0.2, n=18),
        ],
        9: [
            _circle(0.5, 0.32, 0.18, 0.19, n=18),
            _bezier([0.68, 0.36], [0.68, 0.65], [0.56, 0.88]),
        ],
    }


_SKELETONS = _skeletons()

_PIXELS = np.stack(
    np.meshgrid(np.arange(SIZE), np.arange(SIZE), indexing="ij"), axis=-1
).reshape(-1, 2).astype(np.float64)  # (row, col) centers


def _segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.linalg.norm(points - a, axis=1)
    t = np.clip((points - a) @ ab / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.linalg.norm(points - proj, axis=1)


def render_digit(label: int, rng: np.random.Generator) -> np.ndarray:
    """One jittered sample of the given class as a (28, 28) float image in [0, 1]."""
    angle = rng.uniform(-0.21, 0.21)
    sx, sy = rng.uniform(0.85, 1.12, size=2)
    shear = rng.uniform(-0.1, 0.1)
    tx, ty = rng.uniform(-1.8, 1.8, size=2)
    width = rng.uniform(0.85, 1.25)
    peak = rng.uniform(0.72, 1.0)

    ca, sa = np.cos(angle), np.sin(angle)
    rot = np.array([[ca, -sa], [sa, ca]])
    stretch = np.array([[sx * 20.0, shear * 20.0], [0.0, sy * 20.0]])

    dist = np.full(SIZE * SIZE, np.inf)
    for line in _SKELETONS[label]:
        # unit-box (x, y) -> centered -> pixel (col, row)
        pts = (line - 0.5) @ stretch.T @ rot.T
        cols = pts[:, 0] + 13.5 + tx
        rows = pts[:, 1] + 13.5 + ty
        pix = np.stack([rows, cols], axis=1)
        for k in range(len(pix) - 1):
            dist = np.minimum(dist, _segment_distance(_PIXELS, pix[k], pix[k + 1]))

    img = peak * np.clip(1.5 * np.exp(-((dist / width) ** 2)), 0.0, 1.0)
    img[img < 0.02] = 0.0
    return img.reshape(SIZE, SIZE)


def make_dataset(n: int, rng: np.random.Generator) -> LabeledDataset:
    """n random-class samples, deterministic under the given generator."""
    labels = rng.integers(0, 10, size=n)
    images = np.stack([render_digit(int(c), rng) for c in labels])
    return LabeledDataset(images=images, labels=labels.astype(np.int64))
