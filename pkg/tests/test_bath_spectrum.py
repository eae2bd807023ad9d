import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bath_spectrum import (
    BathParams,
    coupling_angle_sine,
    mode_angle,
    mode_data,
    mode_energy,
    mode_grid,
    mode_table,
    spectral_gap,
)
from errors import ConfigError


class TestModeGrid:
    def test_two_spins(self):
        assert_allclose(mode_grid(2), [math.pi / 2])

    def test_four_spins(self):
        assert_allclose(mode_grid(4), [math.pi / 4, 3 * math.pi / 4])

    def test_grid_is_ascending_and_inside_zero_pi(self):
        k = np.array(mode_grid(1200))
        assert len(k) == 600
        assert (np.diff(k) > 0).all()
        assert k[0] > 0 and k[-1] < math.pi

    def test_grid_pairs_k_with_pi_minus_k(self):
        k = np.array(mode_grid(1200))
        assert_allclose(sorted(np.cos(k)), sorted(-np.cos(k)), atol=1e-12)
        assert_allclose(k + k[::-1], math.pi, atol=1e-12)

    @pytest.mark.parametrize('n_spins', [0, -2, 3, 7])
    def test_rejects_odd_or_nonpositive(self, n_spins):
        with pytest.raises(ConfigError):
            mode_grid(n_spins)

    def test_rejects_non_integer(self):
        with pytest.raises(ConfigError):
            mode_grid(4.0)


class TestModeQuantities:
    def test_energy_identity(self):
        k = np.array(mode_grid(50))
        for h in (0.0, 0.5, 1.0, 2.3):
            assert_allclose(mode_energy(k, h) ** 2, 1 + h ** 2 + 2 * h * np.cos(k), rtol=1e-12)

    def test_angle_reproduces_components(self):
        k = np.array(mode_grid(40))
        h = 0.7
        lam = mode_energy(k, h)
        theta = mode_angle(k, h)
        assert_allclose(lam * np.cos(theta), np.cos(k) + h, atol=1e-12)
        assert_allclose(lam * np.sin(theta), np.sin(k), atol=1e-12)

    def test_zero_energy_angle_convention(self):
        assert mode_angle(0.0, -1.0) == 0.0
        assert mode_energy(0.0, -1.0) == 0.0

    def test_mode_data_alpha(self):
        k = mode_grid(10)[3]
        data = mode_data(k, 0.8, 0.85)
        assert_allclose(data.alpha, (data.theta_tilde - data.theta) / 2)
        assert_allclose(data.lam, mode_energy(k, 0.8))

    def test_coupling_angle_sine_matches_angles(self):
        rng = np.random.default_rng(7)
        k = np.array(mode_grid(60))
        for _ in range(10):
            h = rng.uniform(-2, 2)
            h_tilde = h + rng.uniform(-0.5, 0.5)
            alpha = (mode_angle(k, h_tilde) - mode_angle(k, h)) / 2
            assert_allclose(np.sin(2 * alpha), coupling_angle_sine(k, h, h_tilde), atol=1e-12)

    def test_mode_table(self):
        params = BathParams(n_spins=8, h=0.5, epsilon=0.1)
        table = mode_table(params)
        assert list(table.columns) == ['k', 'lambda', 'theta', 'lambda_tilde', 'theta_tilde', 'alpha', 'sin_2alpha']
        assert_allclose(table['sin_2alpha'], np.sin(2 * table['alpha']), atol=1e-12)
        assert len(table) == 4
        assert_allclose(table['lambda_tilde'], mode_energy(table['k'].to_numpy(), 0.6))


class TestBathParams:
    def test_defaults(self):
        params = BathParams(n_spins=4, h=1.0)
        assert params.j == 1.0 and params.f == 0.0 and params.epsilon == 0.0 and params.beta == 0.0

    def test_h_tilde(self):
        params = BathParams(n_spins=4, h=1.0, j=2.0, epsilon=0.5)
        assert_allclose(params.h_tilde, 1.25)

    def test_from_temperature(self):
        params = BathParams.from_temperature(n_spins=4, h=1.0, temperature=0.5)
        assert_allclose(params.beta, 2.0)
        params = BathParams.from_temperature(n_spins=4, h=1.0, temperature=0.5, kappa_b=2.0)
        assert_allclose(params.beta, 1.0)

    @pytest.mark.parametrize('temperature', [0.0, -1.0])
    def test_rejects_nonpositive_temperature(self, temperature):
        with pytest.raises(ConfigError):
            BathParams.from_temperature(n_spins=4, h=1.0, temperature=temperature)

    @pytest.mark.parametrize('kwargs', [
        {'n_spins': 5, 'h': 1.0},
        {'n_spins': 4, 'h': math.nan},
        {'n_spins': 4, 'h': 1.0, 'j': 0.0},
        {'n_spins': 4, 'h': 1.0, 'beta': -1.0},
        {'n_spins': True, 'h': 1.0},
    ])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            BathParams(**kwargs)

    def test_spectral_gap_closes_at_criticality(self):
        assert spectral_gap(BathParams(n_spins=1200, h=1.0)) < 0.01
        assert 1.0 <= spectral_gap(BathParams(n_spins=100, h=2.0)) < 1.01

    @pytest.mark.parametrize('n_spins', [200, 1200])
    @pytest.mark.parametrize('h', [0.3, 0.7, 1.0])
    def test_gap_approaches_distance_from_critical_field(self, n_spins, h):
        gap = spectral_gap(BathParams(n_spins=n_spins, h=h))
        assert -1e-12 <= gap - abs(h - 1) <= 2 * math.pi / n_spins
        k = np.array(mode_grid(n_spins))
        assert np.argmin(mode_energy(k, h)) == len(k) - 1
