"""Poisson encoding statistics and the LIF update kernel."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spikecnn import spike
from spikecnn.errors import InvalidParameterError


class TestPoissonEncoding:
    def test_zero_intensity_silent(self):
        out = spike.encode_poisson(np.zeros((4, 4)), 20, np.random.default_rng(0))
        assert out.shape == (4, 4, 20)
        assert out.sum() == 0

    def test_unit_intensity_every_step(self):
        out = spike.encode_poisson(np.ones((3, 3)), 20, np.random.default_rng(1))
        assert out.all()

    def test_clamps_out_of_range_rates(self):
        img = np.array([[1.7, -0.3]])
        out = spike.encode_poisson(img, 10, np.random.default_rng(2))
        assert out[0, 0].all() and out[0, 1].sum() == 0

    def test_mean_count_monte_carlo(self):
        # 1e5 independent encodings of one 0.3-rate unit over T=20;
        # expected spike count is lambda*T = 6.0
        rng = np.random.default_rng(3)
        counts = spike.encode_poisson(np.full((100_000,), 0.3), 20, rng).sum(axis=1)
        assert abs(counts.mean() - 6.0) < 0.1

    def test_deterministic_under_seed(self):
        img = np.random.default_rng(4).random((28, 28))
        a = spike.encode_poisson(img, 20, np.random.default_rng(5))
        b = spike.encode_poisson(img, 20, np.random.default_rng(5))
        np.testing.assert_array_equal(a, b)

    def test_bad_steps(self):
        with pytest.raises(InvalidParameterError):
            spike.encode_poisson(np.zeros((2, 2)), 0, np.random.default_rng(0))

    @given(lam=st.floats(0.05, 0.95), seed=st.integers(0, 2 ** 31))
    @settings(max_examples=20, deadline=None)
    def test_empirical_rate_within_3_sigma(self, lam, seed):
        n, steps = 2000, 20
        rng = np.random.default_rng(seed)
        counts = spike.encode_poisson(np.full((n,), lam), steps, rng).sum(axis=1)
        bound = 3 * math.sqrt(lam * (1 - lam) / (n * steps))
        assert abs(counts.mean() / steps - lam) < bound + 1e-12

    def test_counts_bounded_by_steps(self):
        rng = np.random.default_rng(6)
        out = spike.encode_poisson(rng.random((10, 10)), 20, rng)
        assert out.sum(axis=-1).max() <= 20


class TestLifStep:
    def test_zero_fixed_point(self):
        params = spike.LifParams(threshold=1.0)
        state, fired = spike.lif_step(spike.LifState(), 0.0, params, 0)
        assert state.potential == 0.0 and not fired

    def test_geometric_series_convergence(self):
        # constant I=1, tau=1 ms, no threshold: U_t = sum_k e^{-k} -> 1/(1-e^-1)
        params = spike.LifParams(threshold=np.inf, tau=1.0)
        state = spike.LifState()
        for t in range(200):
            state, _ = spike.lif_step(state, 1.0, params, t)
        assert state.potential == pytest.approx(1.0 / (1.0 - math.exp(-1.0)), abs=1e-9)
        assert state.potential == pytest.approx(1.58198, abs=1e-5)

    def test_threshold_crossing_resets(self):
        params = spike.LifParams(threshold=1.0)
        state, fired = spike.lif_step(spike.LifState(), 1.0, params, 7)
        assert fired
        assert state.potential == 0.0
        assert state.last_spike_step == 7

    def test_monotone_subthreshold_charging(self):
        params = spike.LifParams(threshold=np.inf, tau=1.0)
        state = spike.LifState()
        previous = -1.0
        for t in range(50):
            state, _ = spike.lif_step(state, 0.5, params, t)
            if t < 10:
                assert state.potential > previous
            else:  # increments underflow once converged to the fixed point
                assert state.potential >= previous
            previous = state.potential
        assert previous < 0.5 / (1.0 - math.exp(-1.0)) + 1e-12

    def test_bad_tau(self):
        with pytest.raises(InvalidParameterError):
            spike.LifParams(threshold=1.0, tau=0.0)


class TestLifRun:
    def test_matches_scalar_steps(self):
        rng = np.random.default_rng(7)
        currents = rng.normal(0.4, 0.5, size=(3, 25))
        params = spike.LifParams(threshold=1.0, tau=1.0)
        vec = spike.lif_run(currents, params)
        for unit in range(3):
            state = spike.LifState()
            for t in range(25):
                state, fired = spike.lif_step(state, currents[unit, t], params, t)
                assert vec[unit, t] == fired

    def test_reset_contract(self):
        # potential is exactly zero on the step after any spike
        params = spike.LifParams(threshold=1.0)
        state = spike.LifState()
        potentials = []
        for t in range(30):
            state, fired = spike.lif_step(state, 0.7, params, t)
            potentials.append((state.potential, fired))
        for (pot, fired) in potentials:
            if fired:
                assert pot == 0.0
