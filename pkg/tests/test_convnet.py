"""Spiking convolution and max pooling: shapes, currents, winner selection."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spikecnn import convnet, sailnet, spike
from spikecnn.errors import InvalidGeometryError, InvalidParameterError


def make_bank(filters):
    arr = np.asarray(filters, dtype=np.float32)
    return sailnet.FilterBank(arr)


def random_bank(rng, d=4, p=5):
    return make_bank(rng.normal(0, 0.4, (d, p, p)))


class TestExpectedCurrent:
    def test_uniform_case(self):
        assert convnet.expected_current(np.ones((5, 5)), np.full((5, 5), 0.5)) == 12.5

    def test_zero_rates(self):
        assert convnet.expected_current(np.ones((5, 5)), np.zeros((5, 5))) == 0.0

    def test_rejects_bad_rates(self):
        with pytest.raises(InvalidParameterError):
            convnet.expected_current(np.ones((2, 2)), np.full((2, 2), 1.5))

    def test_monte_carlo_oracle(self):
        # empirical mean per-step current over Poisson draws matches sum(W * rate)
        rng = np.random.default_rng(0)
        for trial in range(5):
            filt = rng.normal(0, 1, (5, 5))
            rates = rng.random((5, 5))
            expected = convnet.expected_current(filt, rates)
            n = 100_000
            draws = rng.random((n, 5, 5)) < rates
            currents = (draws * filt).sum(axis=(1, 2))
            sigma = currents.std(ddof=1) / np.sqrt(n)
            assert abs(currents.mean() - expected) < 3 * sigma + 1e-12


class TestConvolveSpiking:
    def test_mnist_map_geometry(self):
        rng = np.random.default_rng(1)
        spikes = spike.encode_poisson(rng.random((28, 28)), 20, rng)
        maps = convnet.convolve_spiking(spikes, random_bank(rng, d=3))
        assert maps.spikes.shape == (3, 24, 24, 20)

    def test_zero_input_zero_output(self):
        rng = np.random.default_rng(2)
        spikes = np.zeros((28, 28, 20), dtype=np.uint8)
        maps = convnet.convolve_spiking(spikes, random_bank(rng))
        assert maps.spikes.sum() == 0

    def test_single_tap_alignment(self):
        # one pixel spiking every step + a single-tap filter at (0, 0) with
        # weight above threshold: exactly the aligned unit fires every step
        spikes = np.zeros((10, 10, 20), dtype=np.uint8)
        spikes[6, 7, :] = 1
        filt = np.zeros((3, 3))
        filt[0, 0] = 1.5
        maps = convnet.convolve_spiking(spikes, make_bank([filt]), theta_conv=1.0)
        counts = maps.spikes.sum(axis=3)[0]
        assert counts[6, 7] == 20
        counts[6, 7] = 0
        assert counts.sum() == 0

    def test_oversized_filter(self):
        with pytest.raises(InvalidGeometryError):
            convnet.convolve_spiking(np.zeros((4, 4, 5), dtype=np.uint8),
                                     make_bank(np.zeros((1, 5, 5))))

    def test_stride_two(self):
        rng = np.random.default_rng(3)
        spikes = spike.encode_poisson(rng.random((28, 28)), 10, rng)
        maps = convnet.convolve_spiking(spikes, random_bank(rng, d=2), stride=2)
        assert maps.spikes.shape == (2, 12, 12, 10)

    def test_filter_order_permutes_maps(self):
        rng = np.random.default_rng(4)
        spikes = spike.encode_poisson(rng.random((12, 12)), 10, rng)
        filters = rng.normal(0, 0.5, (3, 5, 5)).astype(np.float32)
        maps = convnet.convolve_spiking(spikes, make_bank(filters))
        perm = [2, 0, 1]
        maps_perm = convnet.convolve_spiking(spikes, make_bank(filters[perm]))
        np.testing.assert_array_equal(maps.spikes[perm], maps_perm.spikes)

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        img = rng.random((16, 16))
        bank = random_bank(rng, d=2)
        a = convnet.convolve_spiking(
            spike.encode_poisson(img, 10, np.random.default_rng(6)), bank)
        b = convnet.convolve_spiking(
            spike.encode_poisson(img, 10, np.random.default_rng(6)), bank)
        np.testing.assert_array_equal(a.spikes, b.spikes)

    def test_rate_monotone_in_expected_current(self):
        # constant-rate inputs: output spike rate never decreases as the
        # uniform input rate (hence expected current) grows
        filt = np.full((3, 3), 0.2)
        bank = make_bank([filt])
        rates = []
        for lam in (0.1, 0.3, 0.5, 0.7, 0.9):
            rng = np.random.default_rng(7)
            spikes = spike.encode_poisson(np.full((10, 10), lam), 1000, rng)
            maps = convnet.convolve_spiking(spikes, bank)
            rates.append(maps.spikes.mean())
        assert all(b >= a for a, b in zip(rates, rates[1:]))

    def test_matches_lif_run_on_expected_path(self):
        # oracle: per-position currents through the shared LIF runner
        rng = np.random.default_rng(8)
        spikes = spike.encode_poisson(rng.random((8, 8)), 15, rng)
        filt = rng.normal(0, 0.5, (3, 3))
        maps = convnet.convolve_spiking(spikes, make_bank([filt]), theta_conv=0.8)
        currents = np.zeros((6, 6, 15))
        for i in range(6):
            for j in range(6):
                for t in range(15):
                    currents[i, j, t] = (
                        spikes[i:i + 3, j:j + 3, t] * filt).sum()
        oracle = spike.lif_run(currents, spike.LifParams(threshold=0.8))
        np.testing.assert_array_equal(maps.spikes[0], oracle)


class TestMaxPool:
    def test_geometry(self):
        rng = np.random.default_rng(9)
        maps = convnet.FeatureMapSpikes(
            spikes=(rng.random((2, 24, 24, 20)) < 0.3).astype(np.uint8),
            patch_size=5, stride=1)
        pooled = convnet.max_pool(maps, 2)
        assert pooled.spikes.shape == (2, 12, 12, 20)
        assert pooled.flatten().shape == (2 * 144, 20)

    def test_indivisible_geometry(self):
        maps = convnet.FeatureMapSpikes(
            spikes=np.zeros((1, 5, 6, 4), dtype=np.uint8), patch_size=3, stride=1)
        with pytest.raises(InvalidGeometryError):
            convnet.max_pool(maps, 2)

    def test_tie_smallest_index(self):
        spikes = np.ones((1, 2, 2, 6), dtype=np.uint8)  # all four trains equal
        maps = convnet.FeatureMapSpikes(spikes=spikes, patch_size=3, stride=1)
        pooled = convnet.max_pool(maps, 2)
        assert pooled.winner_index[0, 0, 0] == 0
        np.testing.assert_array_equal(pooled.spikes[0, 0, 0], spikes[0, 0, 0])

    def test_highest_count_wins(self):
        spikes = np.zeros((1, 2, 2, 8), dtype=np.uint8)
        spikes[0, 0, 0, :3] = 1  # count 3
        spikes[0, 0, 1, :7] = 1  # count 7 <- winner (block index 1)
        spikes[0, 1, 0, :2] = 1  # count 2
        spikes[0, 1, 1, :5] = 1  # count 5
        maps = convnet.FeatureMapSpikes(spikes=spikes, patch_size=3, stride=1)
        pooled = convnet.max_pool(maps, 2)
        assert pooled.winner_index[0, 0, 0] == 1
        np.testing.assert_array_equal(pooled.spikes[0, 0, 0], spikes[0, 0, 1])

    @given(seed=st.integers(0, 2 ** 31))
    @settings(max_examples=25, deadline=None)
    def test_pooled_trains_are_verbatim_copies(self, seed):
        rng = np.random.default_rng(seed)
        spikes = (rng.random((2, 4, 4, 10)) < rng.random()).astype(np.uint8)
        maps = convnet.FeatureMapSpikes(spikes=spikes, patch_size=3, stride=1)
        pooled = convnet.max_pool(maps, 2)
        for d in range(2):
            for i in range(2):
                for j in range(2):
                    block = spikes[d, 2 * i:2 * i + 2, 2 * j:2 * j + 2].reshape(4, 10)
                    w = pooled.winner_index[d, i, j]
                    np.testing.assert_array_equal(pooled.spikes[d, i, j], block[w])
                    # winner really has the maximal count, first-index ties
                    counts = block.sum(axis=1)
                    assert counts[w] == counts.max()
                    assert w == counts.argmax()

    def test_shape_algebra_default_architecture(self):
        # D=32 filters, 24x24 maps, block 2 -> 32 * 144 = 4608 pooled trains
        rng = np.random.default_rng(10)
        maps = convnet.FeatureMapSpikes(
            spikes=(rng.random((32, 24, 24, 4)) < 0.2).astype(np.uint8),
            patch_size=5, stride=1)
        pooled = convnet.max_pool(maps, 2)
        assert pooled.flatten().shape[0] == 4608
