import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from errors import ConfigError
from nonmarkov import fit_decay_laws, find_extrema, i_q, n_q, normalized_n, window_average


class TestFindExtrema:
    def test_monotone_series_has_none(self):
        assert len(find_extrema(np.linspace(1, 0, 50))) == 0

    def test_short_series(self):
        assert len(find_extrema([1.0, 0.2])) == 0
        assert find_extrema([1.0, 0.2]).initial == 1.0

    def test_min_then_max(self):
        extrema = find_extrema([1.0, 0.4, 0.8, 0.3], threshold=0.01)
        assert [(e.index, e.value, e.kind) for e in extrema.events] == [(1, 0.4, 'min'), (2, 0.8, 'max')]

    def test_open_rise_closes_at_last_sample(self):
        extrema = find_extrema([1.0, 0.2, 1.0])
        assert [(e.index, e.kind) for e in extrema.events] == [(1, 'min'), (2, 'max')]

    def test_plateau_collapses_to_midpoint(self):
        extrema = find_extrema([1.0, 0.5, 0.5, 0.5, 0.9, 0.2])
        assert extrema.minima[0].index == 2
        assert extrema.maxima[0].index == 4

    def test_ripple_below_threshold_is_ignored(self):
        assert len(find_extrema([1.0, 0.5, 0.5000001, 0.4], threshold=1e-6)) == 0

    def test_times_are_attached(self):
        times = np.linspace(0, 3, 4)
        extrema = find_extrema([1.0, 0.4, 0.8, 0.3], 0.01, times)
        assert [e.time for e in extrema.events] == [1.0, 2.0]

    def test_kinds_alternate(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            extrema = find_extrema(rng.random(200), threshold=0.05)
            kinds = [e.kind for e in extrema.events]
            assert all(a != b for a, b in zip(kinds, kinds[1:]))
            assert all(a.index < b.index for a, b in zip(extrema.events, extrema.events[1:]))

    def test_rejects_negative_threshold(self):
        with pytest.raises(ConfigError):
            find_extrema([1.0, 0.5, 0.7], threshold=-1.0)


class TestNQ:
    def test_monotone_echo(self):
        assert n_q(np.linspace(1, 0, 20) ** 2) == 0.0

    def test_single_revival(self):
        assert_allclose(n_q(np.array([1.0, 0.2, 0.5, 0.3]) ** 2), 0.3)

    def test_two_revivals(self):
        assert_allclose(n_q(np.array([1.0, 0.3, 0.6, 0.1, 0.2]) ** 2), 0.4)

    def test_time_rescaling_invariance(self):
        root = np.abs(np.cos(np.linspace(0, 10, 201))) * np.exp(-np.linspace(0, 1, 201))
        stretched = np.repeat(root, 3)
        assert_allclose(n_q(stretched ** 2), n_q(root ** 2))


class TestIQ:
    def test_values(self):
        assert i_q(0.0) == 0.0
        assert i_q(1.0) == 0.5
        assert i_q(math.inf) == 1.0

    def test_rejects_negative(self):
        with pytest.raises(ConfigError):
            i_q(-0.1)


class TestNormalizedN:
    def test_monotone_decay(self):
        assert normalized_n(np.linspace(1, 0.1, 30)) == 0.0

    def test_full_recovery(self):
        assert normalized_n([1.0, 0.2, 1.0]) == 1.0

    def test_partial_recovery(self):
        assert_allclose(normalized_n([1.0, 0.4, 0.8]), 2 / 3)

    def test_pairs_minimum_with_later_maxima(self):
        # the largest recovery spans a non-adjacent maximum
        assert_allclose(normalized_n([1.0, 0.2, 0.5, 0.4, 0.9, 0.95]), (0.95 - 0.2) / 0.8)

    def test_bounded_on_random_series(self):
        rng = np.random.default_rng(0)
        for series in rng.random((1000, 40)) + 0.01:
            assert 0.0 <= normalized_n(series) <= 1.0

    def test_scale_invariance(self):
        q = np.array([0.8, 0.3, 0.6, 0.2, 0.5, 0.1])
        assert_allclose(normalized_n(3 * q), normalized_n(q))

    def test_decaying_tail_changes_nothing(self):
        q = np.array([1.0, 0.3, 0.7, 0.5])
        tail = np.concatenate([q, np.linspace(0.45, 0.05, 10)])
        assert_allclose(normalized_n(tail), normalized_n(q))
        assert_allclose(n_q(tail ** 2), n_q(q ** 2))

    def test_rejects_zero_start(self):
        with pytest.raises(ConfigError):
            normalized_n([0.0, 0.2, 0.1])


class TestWindowAverage:
    def test_mean_inside_window(self):
        assert window_average([0, 1, 2, 3, 4], [0, 1, 2, 3, 4], 1, 3) == 2.0

    def test_empty_window(self):
        with pytest.raises(ConfigError):
            window_average([0, 1, 2], [0, 1, 2], 5, 6)


class TestFitDecayLaws:
    sizes = np.arange(100, 1300, 100)

    def test_power_law(self):
        fit = fit_decay_laws(self.sizes, 5 * self.sizes ** -1.5)
        assert fit['preferred'] == 'polynomial'
        assert_allclose(fit['power_exponent'], -1.5)

    def test_exponential_law(self):
        fit = fit_decay_laws(self.sizes, 2 * np.exp(-0.003 * self.sizes))
        assert fit['preferred'] == 'exponential'
        assert_allclose(fit['exp_rate'], -0.003)
        assert fit['residual_ratio'] >= 2

    def test_rejects_nonpositive_values(self):
        with pytest.raises(ConfigError):
            fit_decay_laws([1, 2, 3], [0.1, 0.0, 0.2])
