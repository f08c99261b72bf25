"""Spiking convolution of frozen filters and spike-rate max pooling.

Each filter slides over the input spike trains; at every step the patch
under a map position injects current W . s(t) into that position's LIF
unit. Negative filter taps inject negative current and potentials may go
negative; the leak pulls them back toward zero. Pooling forwards the whole
spike train of the most active unit in each non-overlapping block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidGeometryError, InvalidParameterError
from .sailnet import FilterBank


@dataclass
class FeatureMapSpikes:
    """Per-filter maps of LIF spike trains: (D, map_rows, map_cols, T) uint8."""

    spikes: np.ndarray
    patch_size: int
    stride: int

    @property
    def n_maps(self) -> int:
        return self.spikes.shape[0]

    @property
    def map_shape(self) -> tuple[int, int]:
        return self.spikes.shape[1], self.spikes.shape[2]


@dataclass
class PooledMaps:
    """Winner spike trains per block: (D, rows, cols, T) uint8.

    winner_index holds each winner's row-major position inside its block
    (ties resolved to the smallest index).
    """

    spikes: np.ndarray
    winner_index: np.ndarray
    block: int

    def flatten(self) -> np.ndarray:
        """(N, T) view with N = D * rows * cols, row-major over (map, row, col)."""
        d, r, c, t = self.spikes.shape
        return self.spikes.reshape(d * r * c, t)


def expected_current(filt: np.ndarray, rates: np.ndarray) -> float:
    """Expected per-step injected current for Poisson inputs: sum of W * rate."""
    f = np.asarray(filt, dtype=np.float64)
    lam = np.asarray(rates, dtype=np.float64)
    if f.shape != lam.shape:
        raise InvalidParameterError(f"shape mismatch {f.shape} vs {lam.shape}")
    if lam.size and (lam.min() < 0.0 or lam.max() > 1.0):
        raise InvalidParameterError("rates must lie in [0, 1]")
    return float(np.sum(f * lam))


def convolve_spiking(
    input_spikes: np.ndarray,
    bank: FilterBank,
    stride: int = 1,
    theta_conv: float = 1.0,
    tau: float = 1.0,
) -> FeatureMapSpikes:
    """Convolve every filter with the input spike trains through LIF units.

    `input_spikes` is (rows, cols, T) uint8. Borders are ignored: with
    stride 1 the maps are (rows - p + 1) x (cols - p + 1).
    """
    spikes = np.asarray(input_spikes)
    if spikes.ndim != 3:
        raise InvalidParameterError("input spikes must be (rows, cols, T)")
    r, c, steps = spikes.shape
    p = bank.patch_size
    if p > min(r, c):
        raise InvalidGeometryError(f"filter size {p} exceeds {r}x{c} input")
    if stride < 1:
        raise InvalidParameterError(f"stride must be >= 1, got {stride}")
    if theta_conv <= 0:
        raise InvalidParameterError(f"theta_conv must be > 0, got {theta_conv}")

    d = bank.n_filters
    w_t = bank.as_matrix().T  # (p*p, D)
    windows = np.lib.stride_tricks.sliding_window_view(spikes, (p, p), axis=(0, 1))
    windows = windows[::stride, ::stride]  # (mr, mc, T, p, p)
    mr, mc = windows.shape[0], windows.shape[1]
    m = mr * mc

    decay = math.exp(-1.0 / tau)
    u = np.zeros((m, d))
    out = np.zeros((steps, m, d), dtype=np.uint8)
    for t in range(steps):
        frame = windows[:, :, t].reshape(m, p * p)
        currents = frame.astype(np.float64) @ w_t
        u = decay * u + currents
        fired = u >= theta_conv
        out[t] = fired
        u[fired] = 0.0

    maps = np.ascontiguousarray(out.transpose(2, 1, 0)).reshape(d, mr, mc, steps)
    return FeatureMapSpikes(spikes=maps, patch_size=p, stride=stride)


def max_pool(maps: FeatureMapSpikes, block: int = 2) -> PooledMaps:
    """Forward the highest-spike-count unit's train from each block.

    Map dimensions must divide evenly by `block`; ties go to the smallest
    row-major index within the block, so pooling is seed-independent.
    """
    spikes = maps.spikes
    d, mr, mc, steps = spikes.shape
    if block < 1:
        raise InvalidParameterError(f"block must be >= 1, got {block}")
    if mr % block or mc % block:
        raise InvalidGeometryError(f"{mr}x{mc} maps not divisible by block {block}")
    pr, pc = mr // block, mc // block

    # (D, pr, pc, block*block, T), block cells in row-major order
    grouped = (
        spikes.reshape(d, pr, block, pc, block, steps)
        .transpose(0, 1, 3, 2, 4, 5)
        .reshape(d, pr, pc, block * block, steps)
    )
    counts = grouped.sum(axis=4)
    winner = counts.argmax(axis=3)  # first max wins: smallest row-major index
    pooled = np.take_along_axis(
        grouped, winner[..., None, None], axis=3
    )[:, :, :, 0, :]
    return PooledMaps(
        spikes=np.ascontiguousarray(pooled),
        winner_index=winner.astype(np.uint8),
        block=block,
    )
