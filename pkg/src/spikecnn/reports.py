"""CSV and PGM output for diagnostics and figures."""

from __future__ import annotations

import csv

import numpy as np

from .convnet import PooledMaps
from .discovery import CorrelationReport
from .sailnet import FilterBank, IterationDiagnostics


def write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def write_pgm(path: str, image: np.ndarray, max_value: int = 255) -> None:
    """Binary (P5) PGM from a uint8 array or a [0, 1] float array."""
    arr = np.asarray(image)
    if arr.dtype != np.uint8:
        arr = np.clip(np.rint(arr * max_value), 0, max_value).astype(np.uint8)
    rows, cols = arr.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{cols} {rows}\n{max_value}\n".encode("ascii"))
        f.write(arr.tobytes())


def tile_grid(images: np.ndarray, pad: int = 1, scale: int = 1,
              columns: int | None = None) -> np.ndarray:
    """Tile (n, h, w) arrays into one [0, 1] grid image, each tile
    independently normalized to its own range."""
    n, h, w = images.shape
    cols = columns or int(np.ceil(np.sqrt(n)))
    rows = int(np.ceil(n / cols))
    grid = np.zeros((rows * (h + pad) + pad, cols * (w + pad) + pad))
    for k in range(n):
        tile = images[k].astype(np.float64)
        lo, hi = tile.min(), tile.max()
        if hi > lo:
            tile = (tile - lo) / (hi - lo)
        else:
            tile = np.zeros_like(tile)
        i, j = divmod(k, cols)
        top, left = pad + i * (h + pad), pad + j * (w + pad)
        grid[top:top + h, left:left + w] = tile
    if scale > 1:
        grid = np.kron(grid, np.ones((scale, scale)))
    return grid


def dump_filters_pgm(bank: FilterBank, path: str, scale: int = 8) -> None:
    write_pgm(path, tile_grid(np.asarray(bank.filters), scale=scale))


def dump_pooled_counts_pgm(pooled: PooledMaps, path: str, steps: int,
                           scale: int = 4) -> None:
    """Per-map spike-count images, pixel = count on a fixed 0..steps scale."""
    counts = pooled.spikes.sum(axis=3).astype(np.float64) / steps
    d, pr, pc = counts.shape
    cols = int(np.ceil(np.sqrt(d)))
    rows = int(np.ceil(d / cols))
    canvas = np.zeros((rows * (pr + 1) + 1, cols * (pc + 1) + 1))
    for k in range(d):
        i, j = divmod(k, cols)
        canvas[1 + i * (pr + 1):1 + i * (pr + 1) + pr,
               1 + j * (pc + 1):1 + j * (pc + 1) + pc] = counts[k]
    if scale > 1:
        canvas = np.kron(canvas, np.ones((scale, scale)))
    write_pgm(path, canvas)


def dump_correlation_pgm(report: CorrelationReport, path: str, scale: int = 4) -> None:
    """Correlation matrix rendered 0=black .. 1=white (negatives clip to 0)."""
    img = np.clip(report.matrix, 0.0, 1.0)
    if scale > 1:
        img = np.kron(img, np.ones((scale, scale)))
    write_pgm(path, img)


def write_filter_diagnostics_csv(path: str,
                                 diagnostics: list[IterationDiagnostics]) -> None:
    write_csv(
        path,
        ["iteration", "mean_spikes_per_patch", "mean_unit_rate",
         "mean_inhibitory_weight"],
        [(d.iteration, f"{d.mean_spikes_per_patch:.6f}",
          f"{d.mean_unit_rate:.6f}", f"{d.mean_inhibitory_weight:.6f}")
         for d in diagnostics],
    )


def write_correlation_csv(path: str, reports: list[CorrelationReport]) -> None:
    # average = mean absolute off-diagonal Pearson correlation
    write_csv(
        path,
        ["iteration", "mean_abs_offdiag_correlation"],
        [(r.iteration, f"{r.average:.6f}") for r in reports],
    )


def write_correlation_matrix_csv(path: str, report: CorrelationReport) -> None:
    write_csv(
        path,
        [f"unit_{j}" for j in range(report.matrix.shape[1])],
        [[f"{v:.6f}" for v in row] for row in report.matrix],
    )


def write_confusion_csv(path: str, confusion: np.ndarray) -> None:
    write_csv(
        path,
        ["true\\pred"] + [str(j) for j in range(confusion.shape[1])],
        [[str(i)] + [str(v) for v in row] for i, row in enumerate(confusion)],
    )


def write_sparsity_csv(path: str, features: np.ndarray,
                       labels: np.ndarray) -> None:
    """Per-class mean absolute feature activity, one row per class."""
    h = features.shape[1]
    rows = []
    for digit in range(10):
        mask = labels == digit
        if mask.any():
            mean_act = np.abs(features[mask]).mean(axis=0)
        else:
            mean_act = np.zeros(h)
        rows.append([str(digit)] + [f"{v:.4f}" for v in mean_act])
    write_csv(path, ["class"] + [f"unit_{j}" for j in range(h)], rows)
