"""Feature-discovery layer: probabilistic LIF neurons with timing-based plasticity.

H fully connected output neurons integrate pooled spike trains. A
"probabilistic" neuron fires only when its membrane potential reaches the
threshold AND its softmax firing probability across the layer exceeds a
probability threshold; since probabilities sum to one, at most one neuron
can clear a 0.5 gate per step, which implements implicit winners-take-all
inhibition. A "plain_lif" neuron (control variant) fires on the potential
threshold alone.

When a neuron fires during training, every afferent synapse updates: inputs
that spiked within the LTP window are potentiated by a_plus * exp(-w), all
others are depressed by a_minus (probabilistic rule). The control rule is
the sigmoidal form a_plus * w * (1 - w) / -a_minus * w * (1 - w). Weights
stay clamped to [0, 1]. The weight a synapse settles at encodes the log
odds of its input firing given the neuron fired, offset by ln(a+/a-).

Per-image training is numba-jitted; the step kernel is shared between the
trainer and the public single-step function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DegenerateInputError, InvalidParameterError
from .convnet import PooledMaps

NEURON_MODELS = ("probabilistic", "plain_lif")
STDP_RULES = ("probabilistic", "sigmoidal")


@dataclass
class DiscoveryLayer:
    """Weights plus neuron-model / learning-rule selection."""

    weights: np.ndarray          # (H, N) float64 in [0, 1]
    neuron_model: str = "probabilistic"
    stdp_rule: str = "probabilistic"
    theta_h: float = 0.5         # potential threshold
    theta_p: float = 0.5         # softmax probability threshold
    a_plus: float = 0.001
    a_minus: float = 0.00075
    ltp_window: int = 5          # steps; LTP if presyn spiked in [t - window, t]
    tau: float = 1.0
    stochastic_gate: bool = False
    # Adaptive per-neuron excitability (a learned log-prior added to the
    # softmax argument during training). Without it, the winners-take-all
    # gate hands every step to whichever row starts with the largest weight
    # mass and potentiation locks that monopoly in; the excitability term
    # equalizes participation so rows can specialize. 0 disables.
    balance_rate: float = 0.0

    def __post_init__(self):
        if self.neuron_model not in NEURON_MODELS:
            raise InvalidParameterError(f"unknown neuron model {self.neuron_model!r}")
        if self.stdp_rule not in STDP_RULES:
            raise InvalidParameterError(f"unknown STDP rule {self.stdp_rule!r}")
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise InvalidParameterError("weights must be (H, N)")
        if self.weights.size and (self.weights.min() < 0.0 or self.weights.max() > 1.0):
            raise InvalidParameterError("weights must lie in [0, 1]")

    @classmethod
    def initial(cls, n_neurons: int, n_inputs: int, rng: np.random.Generator,
                **kwargs) -> "DiscoveryLayer":
        """Random uniform (0, 1) weights."""
        return cls(weights=rng.random((n_neurons, n_inputs)), **kwargs)

    @property
    def n_neurons(self) -> int:
        return self.weights.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.weights.shape[1]

    @property
    def decay(self) -> float:
        return math.exp(-1.0 / self.tau)


@dataclass
class DiscoveryState:
    """Dynamic state. Potentials, presynaptic history, and the step counter
    reset between images; the excitability prior persists across a training
    run (pass it to `fresh` when chaining presentations)."""

    potentials: np.ndarray        # (H,) float64
    last_input_spike: np.ndarray  # (N,) int64, -1 = never
    excitability: np.ndarray      # (H,) float64 log-prior for the gate
    step: int = 0

    @classmethod
    def fresh(cls, layer: DiscoveryLayer,
              excitability: np.ndarray | None = None) -> "DiscoveryState":
        return cls(
            potentials=np.zeros(layer.n_neurons),
            last_input_spike=np.full(layer.n_inputs, -1, dtype=np.int64),
            excitability=(np.zeros(layer.n_neurons)
                          if excitability is None else excitability),
        )


@dataclass
class CorrelationReport:
    """Pairwise Pearson correlations between weight rows."""

    matrix: np.ndarray  # (H, H), symmetric, unit diagonal
    average: float      # mean absolute off-diagonal entry
    iteration: int | None = None


def softmax_fire_prob(potentials: np.ndarray) -> np.ndarray:
    """Softmax of membrane potentials, max-subtracted for overflow safety."""
    u = np.asarray(potentials, dtype=np.float64)
    e = np.exp(u - u.max())
    return e / e.sum()


def joint_fire_prob(potentials: np.ndarray, firing_subset) -> float:
    """Probability that exactly the given subset fires together at one step.

    Equals exp(sum of subset potentials) / (sum of exp potentials)^J, the
    product of the per-unit softmax probabilities (units fire conditionally
    independently).
    """
    subset = np.asarray(list(firing_subset), dtype=np.int64)
    if subset.size == 0:
        raise InvalidParameterError("firing subset must be non-empty")
    u = np.asarray(potentials, dtype=np.float64)
    m = u.max()
    log_denom = m + math.log(np.exp(u - m).sum())
    return float(math.exp(u[subset].sum() - subset.size * log_denom))


def ltp_probability(w, a_plus: float = 0.001, a_minus: float = 0.00075):
    """LTP probability implied by a settled weight: sigma(w - ln(a+/a-)).

    Inverts the equilibrium relation w = ln(a+/a-) + ln(P / (1 - P)); for
    a+ = a- this is the logistic sigmoid of the weight itself.
    """
    q = np.asarray(w, dtype=np.float64) - math.log(a_plus / a_minus)
    out = 1.0 / (1.0 + np.exp(-q))
    return float(out) if np.isscalar(w) else out


def stdp_delta(w, potentiated, a_plus: float, a_minus: float, rule: str):
    """Raw (unclamped) weight change for one plasticity event."""
    w = np.asarray(w, dtype=np.float64)
    pot = np.asarray(potentiated, dtype=bool)
    if rule == "probabilistic":
        return np.where(pot, a_plus * np.exp(-w), -a_minus)
    if rule == "sigmoidal":
        g = w * (1.0 - w)
        return np.where(pot, a_plus * g, -a_minus * g)
    raise InvalidParameterError(f"unknown STDP rule {rule!r}")


def apply_stdp(
    layer: DiscoveryLayer, neuron: int, last_input_spike: np.ndarray, step: int
) -> np.ndarray:
    """Update the fired neuron's afferent row; returns the applied change.

    An input is "recent" if it spiked within the closed window
    [step - ltp_window, step]; recent inputs potentiate, all others depress.
    The row is clamped to [0, 1] afterwards.
    """
    recent = (last_input_spike >= 0) & ((step - last_input_spike) <= layer.ltp_window)
    row = layer.weights[neuron]
    new = np.clip(
        row + stdp_delta(row, recent, layer.a_plus, layer.a_minus, layer.stdp_rule),
        0.0, 1.0,
    )
    delta = new - row
    layer.weights[neuron] = new
    return delta


@njit(cache=True)
def _step_kernel(weights, potentials, excitability, last_input_spike, y_t, t,
                 theta_h, theta_p, decay, training, prob_model, prob_rule,
                 a_plus, a_minus, eps, stochastic, balance_rate, u_rand,
                 fired_idx):
    n_neurons, n_inputs = weights.shape
    n_act = 0
    for i in range(n_inputs):
        if y_t[i]:
            n_act += 1
    act = np.empty(n_act, dtype=np.int64)
    k = 0
    for i in range(n_inputs):
        if y_t[i]:
            act[k] = i
            k += 1
            last_input_spike[i] = t

    for h in range(n_neurons):
        cur = 0.0
        for j in range(n_act):
            cur += weights[h, act[j]]
        potentials[h] = decay * potentials[h] + cur

    # Units crossing theta_h reset regardless (the reset is part of the LIF
    # model); the probability gate only decides which crossings emit a spike
    # and trigger learning. This keeps probabilistic fire events an exact
    # subset of plain-LIF fire events on identical trajectories.
    n_fired = 0
    if prob_model:
        m = potentials[0] + excitability[0]
        for h in range(1, n_neurons):
            v = potentials[h] + excitability[h]
            if v > m:
                m = v
        s = 0.0
        for h in range(n_neurons):
            s += math.exp(potentials[h] + excitability[h] - m)
        for h in range(n_neurons):
            if potentials[h] >= theta_h:
                e_h = math.exp(potentials[h] + excitability[h] - m)
                if stochastic:
                    gate = u_rand[h] * s < e_h
                else:
                    gate = e_h > theta_p * s
                if gate:
                    fired_idx[n_fired] = h
                    n_fired += 1
                else:
                    potentials[h] = 0.0
    else:
        for h in range(n_neurons):
            if potentials[h] >= theta_h:
                fired_idx[n_fired] = h
                n_fired += 1

    if training and balance_rate > 0.0 and n_fired > 0:
        gain = balance_rate * n_fired / n_neurons
        for h in range(n_neurons):
            excitability[h] += gain
        for j in range(n_fired):
            excitability[fired_idx[j]] -= balance_rate

    if training and n_fired > 0:
        for j in range(n_fired):
            h = fired_idx[j]
            row = weights[h]
            for i in range(n_inputs):
                ls = last_input_spike[i]
                recent = ls >= 0 and t - ls <= eps
                if prob_rule:
                    if recent:
                        w = row[i] + a_plus * math.exp(-row[i])
                    else:
                        w = row[i] - a_minus
                else:
                    g = row[i] * (1.0 - row[i])
                    if recent:
                        w = row[i] + a_plus * g
                    else:
                        w = row[i] - a_minus * g
                if w > 1.0:
                    row[i] = 1.0
                elif w < 0.0:
                    row[i] = 0.0
                else:
                    row[i] = w

    for j in range(n_fired):
        potentials[fired_idx[j]] = 0.0
    return n_fired


@njit(cache=True)
def _present_kernel(weights, excitability, y, theta_h, theta_p, decay,
                    training, prob_model, prob_rule, a_plus, a_minus, eps,
                    stochastic, balance_rate, u_rand, spikes_out):
    n_neurons, n_inputs = weights.shape
    steps = y.shape[1]
    potentials = np.zeros(n_neurons)
    last_input_spike = np.full(n_inputs, -1, dtype=np.int64)
    fired_idx = np.empty(n_neurons, dtype=np.int64)
    total = 0
    for t in range(steps):
        if stochastic:
            u_t = u_rand[t]
        else:
            u_t = u_rand[0]
        n_fired = _step_kernel(
            weights, potentials, excitability, last_input_spike, y[:, t], t,
            theta_h, theta_p, decay, training, prob_model, prob_rule,
            a_plus, a_minus, eps, stochastic, balance_rate, u_t, fired_idx,
        )
        for j in range(n_fired):
            spikes_out[fired_idx[j], t] = 1
        total += n_fired
    return total


def _kernel_flags(layer: DiscoveryLayer) -> tuple[bool, bool]:
    return layer.neuron_model == "probabilistic", layer.stdp_rule == "probabilistic"


def discovery_step(
    layer: DiscoveryLayer,
    state: DiscoveryState,
    y_t: np.ndarray,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> list[int]:
    """Advance the layer one step on input spike vector y_t; returns fired ids.

    Potentials update by the LIF rule with current W . y_t, the firing gate
    runs on a consistent snapshot of all potentials, then STDP (if training)
    and threshold resets apply. The state's step counter advances.
    """
    y = np.ascontiguousarray(y_t, dtype=np.uint8)
    if y.shape != (layer.n_inputs,):
        raise InvalidParameterError(
            f"input vector has shape {y.shape}, expected ({layer.n_inputs},)"
        )
    prob_model, prob_rule = _kernel_flags(layer)
    if layer.stochastic_gate:
        if rng is None:
            raise InvalidParameterError("stochastic gate requires an rng")
        u_rand = rng.random(layer.n_neurons)
    else:
        u_rand = np.zeros(layer.n_neurons)
    fired_idx = np.empty(layer.n_neurons, dtype=np.int64)
    n_fired = _step_kernel(
        layer.weights, state.potentials, state.excitability,
        state.last_input_spike, y, state.step,
        layer.theta_h, layer.theta_p, layer.decay, training, prob_model,
        prob_rule, layer.a_plus, layer.a_minus, layer.ltp_window,
        layer.stochastic_gate, layer.balance_rate, u_rand, fired_idx,
    )
    state.step += 1
    return [int(h) for h in fired_idx[:n_fired]]


def run_presentation(
    layer: DiscoveryLayer,
    spike_trains: np.ndarray,
    training: bool = False,
    rng: np.random.Generator | None = None,
    excitability: np.ndarray | None = None,
) -> np.ndarray:
    """Present one image's (N, T) spike trains from rest; returns (H, T) output spikes.

    Pass the same `excitability` array across presentations to let the
    participation prior accumulate over a training run.
    """
    y = np.ascontiguousarray(spike_trains, dtype=np.uint8)
    if y.ndim != 2 or y.shape[0] != layer.n_inputs:
        raise InvalidParameterError(
            f"spike trains have shape {y.shape}, expected ({layer.n_inputs}, T)"
        )
    steps = y.shape[1]
    prob_model, prob_rule = _kernel_flags(layer)
    if layer.stochastic_gate:
        if rng is None:
            raise InvalidParameterError("stochastic gate requires an rng")
        u_rand = rng.random((steps, layer.n_neurons))
    else:
        u_rand = np.zeros((1, layer.n_neurons))
    if excitability is None:
        excitability = np.zeros(layer.n_neurons)
    spikes_out = np.zeros((layer.n_neurons, steps), dtype=np.uint8)
    _present_kernel(
        layer.weights, excitability, y, layer.theta_h, layer.theta_p,
        layer.decay, training, prob_model, prob_rule, layer.a_plus,
        layer.a_minus, layer.ltp_window, layer.stochastic_gate,
        layer.balance_rate, u_rand, spikes_out,
    )
    return spikes_out


def extract_features(layer_weights, pooled) -> np.ndarray:
    """Accumulated net input per neuron: v_h = sum_t W_h . y_t.

    No leak, threshold, or reset; weights are untouched. Accepts a
    DiscoveryLayer or a raw (H, N) weight array, and PooledMaps or a raw
    (N, T) spike array.
    """
    w = layer_weights.weights if isinstance(layer_weights, DiscoveryLayer) else layer_weights
    y = pooled.flatten() if isinstance(pooled, PooledMaps) else np.asarray(pooled)
    if y.ndim != 2 or y.shape[0] != w.shape[1]:
        raise InvalidParameterError(
            f"spike trains have shape {y.shape}, weights expect ({w.shape[1]}, T)"
        )
    counts = y.sum(axis=1, dtype=np.float64)
    return np.asarray(w, dtype=np.float64) @ counts


def weight_correlation(layer_weights, iteration: int | None = None) -> CorrelationReport:
    """Pearson correlation between every pair of weight rows.

    Zero-variance rows would make Pearson undefined; their pairs are
    reported as 0 so the average stays total. The average is the mean
    absolute off-diagonal entry.
    """
    w = layer_weights.weights if isinstance(layer_weights, DiscoveryLayer) else layer_weights
    w = np.asarray(w, dtype=np.float64)
    h = w.shape[0]
    if h < 2:
        raise InvalidParameterError("need at least two weight rows")
    centered = w - w.mean(axis=1, keepdims=True)
    norms = np.sqrt((centered ** 2).sum(axis=1))
    safe = np.where(norms > 0, norms, 1.0)
    corr = (centered @ centered.T) / np.outer(safe, safe)
    corr[norms == 0, :] = 0.0
    corr[:, norms == 0] = 0.0
    np.clip(corr, -1.0, 1.0, out=corr)
    np.fill_diagonal(corr, 1.0)
    off = ~np.eye(h, dtype=bool)
    return CorrelationReport(
        matrix=corr, average=float(np.abs(corr[off]).mean()), iteration=iteration
    )


def train_discovery(
    layer: DiscoveryLayer,
    spike_trains,
    iterations: int,
    rng: np.random.Generator,
    n_images: int | None = None,
    report_correlations: bool = True,
) -> list[CorrelationReport]:
    """Online training over the image set, reshuffled each iteration.

    `spike_trains` is either a (n, N, T) uint8 array or a callable
    idx -> (N, T) array (for corpora too large to cache). Potentials and
    presynaptic history are cleared between images. Returns one
    CorrelationReport per iteration.
    """
    if iterations < 1:
        raise InvalidParameterError(f"iterations must be >= 1, got {iterations}")
    provider = spike_trains if callable(spike_trains) else spike_trains.__getitem__
    n = n_images if callable(spike_trains) else len(spike_trains)
    if not n:
        raise DegenerateInputError("empty spike-train stream")
    excitability = np.zeros(layer.n_neurons)
    reports = []
    for it in range(1, iterations + 1):
        for idx in rng.permutation(n):
            run_presentation(layer, provider(int(idx)), training=True, rng=rng,
                             excitability=excitability)
        if report_correlations:
            reports.append(weight_correlation(layer.weights, iteration=it))
    return reports
