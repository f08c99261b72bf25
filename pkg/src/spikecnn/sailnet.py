"""Sparse-coding trainer for the convolutional filter bank.

A bank of LIF representation units receives a flattened image patch through
excitatory weights and inhibits itself laterally through learned inhibitory
weights. After every 20 ms presentation three local rules run: an
anti-Hebbian update on the lateral weights, a Hebbian update on the
feedforward weights, and a homeostatic threshold adjustment that pins each
unit's mean spike count per presentation to the sparsity target.

Training is an online loop over millions of patches, so presentation and
update are numba-jitted; the public functions wrap the same kernels the
trainer runs, keeping one implementation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import DegenerateInputError, InvalidParameterError


@dataclass(frozen=True)
class SailnetConfig:
    n_filters: int = 32
    patch_size: int = 5
    alpha: float = 0.01    # lateral (anti-Hebbian) rate
    beta: float = 0.0001   # feedforward (Hebbian) rate
    gamma: float = 0.02    # threshold (homeostatic) rate
    rho: float = 0.05      # target mean spikes per unit per presentation
    steps: int = 20
    tau: float = 1.0
    theta_init: float = 5.0

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise InvalidParameterError(f"rho must be in (0, 1), got {self.rho}")
        if min(self.alpha, self.beta, self.gamma) <= 0:
            raise InvalidParameterError("learning rates must be > 0")
        if self.n_filters < 1 or self.patch_size < 1 or self.steps < 1:
            raise InvalidParameterError("n_filters, patch_size, steps must be >= 1")

    @property
    def decay(self) -> float:
        return math.exp(-1.0 / self.tau)


@dataclass
class SailnetState:
    """Adaptive parameters: excitatory weights, lateral weights, thresholds."""

    w_ex: np.ndarray       # (D, p*p) float64
    w_inh: np.ndarray      # (D, D) float64, zero diagonal, entries >= 0
    thresholds: np.ndarray  # (D,) float64

    @classmethod
    def initial(cls, config: SailnetConfig, rng: np.random.Generator) -> "SailnetState":
        d, pp = config.n_filters, config.patch_size ** 2
        return cls(
            w_ex=rng.random((d, pp)),
            w_inh=np.zeros((d, d)),
            thresholds=np.full(d, config.theta_init),
        )


@dataclass(frozen=True)
class FilterBank:
    """Trained excitatory weights, frozen as float32 filters."""

    filters: np.ndarray  # (D, p, p) float32, read-only

    def __post_init__(self):
        object.__setattr__(self, "filters", np.ascontiguousarray(self.filters, dtype=np.float32))
        self.filters.setflags(write=False)

    @property
    def n_filters(self) -> int:
        return self.filters.shape[0]

    @property
    def patch_size(self) -> int:
        return self.filters.shape[1]

    def as_matrix(self) -> np.ndarray:
        """Filters flattened to (D, p*p) float64 for convolution arithmetic."""
        d, p, _ = self.filters.shape
        return self.filters.reshape(d, p * p).astype(np.float64)


@dataclass
class IterationDiagnostics:
    iteration: int
    mean_spikes_per_patch: float
    mean_unit_rate: float
    mean_inhibitory_weight: float


@njit(cache=True)
def _present_kernel(w_ex, w_inh, thresholds, x, steps, decay):
    d = w_ex.shape[0]
    pp = w_ex.shape[1]
    drive = np.zeros(d)
    for i in range(d):
        s = 0.0
        for k in range(pp):
            s += w_ex[i, k] * x[k]
        drive[i] = s
    u = np.zeros(d)
    z_prev = np.zeros(d, dtype=np.uint8)
    z_new = np.zeros(d, dtype=np.uint8)
    counts = np.zeros(d, dtype=np.int64)
    for _ in range(steps):
        any_prev = False
        for m in range(d):
            if z_prev[m]:
                any_prev = True
                break
        for i in range(d):
            cur = drive[i]
            if any_prev:
                for m in range(d):
                    if z_prev[m]:
                        cur -= w_inh[i, m]  # diagonal is zero, self term vanishes
            v = decay * u[i] + cur
            if v >= thresholds[i]:
                z_new[i] = 1
                counts[i] += 1
                u[i] = 0.0
            else:
                z_new[i] = 0
                u[i] = v
        z_prev, z_new = z_new, z_prev
    return counts


@njit(cache=True)
def _update_kernel(w_ex, w_inh, thresholds, x, counts, alpha, beta, gamma, rho):
    d = w_ex.shape[0]
    pp = w_ex.shape[1]
    rho2 = rho * rho
    for i in range(d):
        ni = float(counts[i])
        for m in range(d):
            if m != i:
                v = w_inh[i, m] + alpha * (ni * float(counts[m]) - rho2)
                w_inh[i, m] = v if v > 0.0 else 0.0
        if ni != 0.0:
            for k in range(pp):
                w_ex[i, k] += beta * ni * (x[k] - ni * w_ex[i, k])
        thresholds[i] += gamma * (ni - rho)


@njit(cache=True)
def _train_pass_kernel(w_ex, w_inh, thresholds, patches, order, steps, decay,
                       alpha, beta, gamma, rho):
    total = 0
    for n in range(order.shape[0]):
        x = patches[order[n]]
        counts = _present_kernel(w_ex, w_inh, thresholds, x, steps, decay)
        _update_kernel(w_ex, w_inh, thresholds, x, counts, alpha, beta, gamma, rho)
        for i in range(counts.shape[0]):
            total += counts[i]
    return total


def sailnet_present(
    patch: np.ndarray, state: SailnetState, config: SailnetConfig
) -> np.ndarray:
    """Simulate one presentation; returns per-unit spike counts.

    Inhibition at step t comes from units that spiked at step t-1; potentials
    start from zero, so back-to-back presentations are independent.
    """
    x = np.ascontiguousarray(patch, dtype=np.float64).ravel()
    if x.shape[0] != state.w_ex.shape[1]:
        raise InvalidParameterError(
            f"patch has {x.shape[0]} values, weights expect {state.w_ex.shape[1]}"
        )
    return _present_kernel(
        state.w_ex, state.w_inh, state.thresholds, x, config.steps, config.decay
    )


def sailnet_update(
    state: SailnetState, patch: np.ndarray, counts: np.ndarray, config: SailnetConfig
) -> SailnetState:
    """Apply the three post-presentation learning rules in place."""
    x = np.ascontiguousarray(patch, dtype=np.float64).ravel()
    _update_kernel(
        state.w_ex, state.w_inh, state.thresholds, x,
        np.ascontiguousarray(counts, dtype=np.int64),
        config.alpha, config.beta, config.gamma, config.rho,
    )
    return state


def train_filters(
    patches: np.ndarray,
    config: SailnetConfig,
    iterations: int,
    rng: np.random.Generator,
) -> tuple[FilterBank, list[IterationDiagnostics]]:
    """Online training over all patches, shuffled fresh each iteration.

    `patches` is (n, p*p) float64; weights update after every single patch.
    Returns the frozen filter bank plus per-iteration diagnostics.
    """
    if iterations < 1:
        raise InvalidParameterError(f"iterations must be >= 1, got {iterations}")
    pat = np.ascontiguousarray(patches, dtype=np.float64)
    if pat.ndim != 2 or pat.shape[0] == 0:
        raise DegenerateInputError("patch array is empty")
    if pat.shape[1] != config.patch_size ** 2:
        raise InvalidParameterError(
            f"patches have {pat.shape[1]} values, config expects {config.patch_size ** 2}"
        )
    state = SailnetState.initial(config, rng)
    n = pat.shape[0]
    d = config.n_filters
    diagnostics = []
    for it in range(1, iterations + 1):
        order = rng.permutation(n)
        total = _train_pass_kernel(
            state.w_ex, state.w_inh, state.thresholds, pat, order,
            config.steps, config.decay,
            config.alpha, config.beta, config.gamma, config.rho,
        )
        off_diag = state.w_inh.sum() / (d * (d - 1)) if d > 1 else 0.0
        diagnostics.append(IterationDiagnostics(
            iteration=it,
            mean_spikes_per_patch=total / n,
            mean_unit_rate=total / (n * d),
            mean_inhibitory_weight=float(off_diag),
        ))
    p = config.patch_size
    bank = FilterBank(state.w_ex.reshape(d, p, p).astype(np.float32))
    return bank, diagnostics
