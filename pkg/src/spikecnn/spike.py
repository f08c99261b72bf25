"""Poisson rate encoding and the shared leaky integrate-and-fire kernel.

Spike trains are binary uint8 arrays whose last axis is time: an encoded
image is (rows, cols, T), a flattened layer is (units, T). One step is 1 ms.

The discrete LIF update is U(t) = exp(-dt/tau) * U(t-1) + I(t) with dt = 1 ms;
a unit spikes and resets to zero when U reaches threshold. The exponential
form keeps leaky accumulation across the presentation even at tau = 1 ms
(plain forward Euler at dt = tau would make the neuron memoryless).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError


@dataclass(frozen=True)
class LifParams:
    """Time constant (ms), firing threshold, and reset potential."""

    threshold: float
    tau: float = 1.0
    reset: float = 0.0

    def __post_init__(self):
        if self.tau <= 0:
            raise InvalidParameterError(f"tau must be > 0, got {self.tau}")

    @property
    def decay(self) -> float:
        return math.exp(-1.0 / self.tau)


@dataclass
class LifState:
    potential: float = 0.0
    last_spike_step: int | None = None


def lif_step(
    state: LifState, input_current: float, params: LifParams, step: int
) -> tuple[LifState, bool]:
    """Advance one 1 ms step; returns the new state and whether the unit spiked."""
    u = params.decay * state.potential + input_current
    if u >= params.threshold:
        return LifState(params.reset, step), True
    return LifState(u, state.last_spike_step), False


def lif_run(currents: np.ndarray, params: LifParams) -> np.ndarray:
    """Drive a bank of LIF units with per-step currents.

    `currents` has time on the last axis; the returned uint8 spike array has
    the same shape. Potentials start at zero.
    """
    cur = np.asarray(currents, dtype=np.float64)
    steps = cur.shape[-1]
    u = np.zeros(cur.shape[:-1])
    out = np.zeros(cur.shape, dtype=np.uint8)
    for t in range(steps):
        u = params.decay * u + cur[..., t]
        spiked = u >= params.threshold
        out[..., t] = spiked
        u[spiked] = params.reset
    return out


def encode_poisson(image: np.ndarray, steps: int, rng: np.random.Generator) -> np.ndarray:
    """Encode intensities in [0, 1] as per-step Bernoulli spike trains.

    Unit (i, j) spikes independently at each of `steps` 1 ms steps with
    probability equal to its intensity (clamped to [0, 1]).
    """
    if steps < 1:
        raise InvalidParameterError(f"steps must be >= 1, got {steps}")
    rates = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    draws = rng.random(rates.shape + (steps,))
    return (draws < rates[..., None]).astype(np.uint8)
