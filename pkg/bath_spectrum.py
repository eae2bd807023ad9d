"""
Bath Spectrum - quasiparticle modes of the transverse-field Ising bath

Per-mode energies Λ_k(h) and Bogoliubov angles θ_k(h) on the paired grid
k = π/N, 3π/N, ..., (N-1)π/N, for the bare field h and the shifted field
h̃ = h + ε/J felt by the bath when the qubit is down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List

import numpy as np
import pandas as pd

from errors import ConfigError


@dataclass(frozen=True)
class BathParams:
    """Physical parameters of qubit + Ising bath (energies in units of J)"""
    n_spins: int
    h: float
    j: float = 1.0
    epsilon: float = 0.0
    f: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if isinstance(self.n_spins, bool) or not isinstance(self.n_spins, (int, np.integer)):
            raise ConfigError("n_spins must be an integer", key="n_spins")
        if self.n_spins < 2 or self.n_spins % 2:
            raise ConfigError(f"n_spins must be even and >= 2, got {self.n_spins}", key="n_spins")
        for name in ("h", "j", "epsilon", "f", "beta"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite", key=name)
        if self.j <= 0:
            raise ConfigError(f"j must be positive, got {self.j}", key="j")
        if self.beta < 0:
            raise ConfigError(f"beta must be >= 0, got {self.beta}", key="beta")

    @property
    def h_tilde(self) -> float:
        return self.h + self.epsilon / self.j

    @classmethod
    def from_temperature(cls, n_spins: int, h: float, temperature: float, j: float = 1.0,
                         epsilon: float = 0.0, f: float = 0.0, kappa_b: float = 1.0) -> "BathParams":
        """Build params from a temperature T > 0, β = 1/(κ_B T)"""
        if not temperature > 0:
            raise ConfigError(f"temperature must be > 0, got {temperature}", key="temperature")
        return cls(n_spins=n_spins, h=h, j=j, epsilon=epsilon, f=f, beta=1.0 / (kappa_b * temperature))


@dataclass(frozen=True)
class ModeData:
    """Quantities of a single mode k"""
    k: float
    lam: float
    theta: float
    lam_tilde: float
    theta_tilde: float
    alpha: float


def mode_grid(n_spins: int) -> List[float]:
    """Positive wavenumbers k_m = (2m-1)π/N, m = 1..N/2"""
    if isinstance(n_spins, bool) or not isinstance(n_spins, (int, np.integer)):
        raise ConfigError("n_spins must be an integer", key="n_spins")
    if n_spins < 2 or n_spins % 2:
        raise ConfigError(f"n_spins must be even and >= 2, got {n_spins}", key="n_spins")
    return [(2 * m - 1) * math.pi / n_spins for m in range(1, n_spins // 2 + 1)]


def mode_energy(k, h):
    """Λ_k(h) = sqrt((cos k + h)² + sin²k); works on scalars and arrays"""
    return np.hypot(np.cos(k) + h, np.sin(k))


def mode_angle(k, h):
    """θ_k(h) from a two-argument arctangent; 0 where Λ_k vanishes"""
    y = np.sin(k)
    x = np.cos(k) + h
    theta = np.arctan2(y, x)
    # exactly critical mode: fixed convention instead of an undefined angle
    return np.where((x == 0.0) & (y == 0.0), 0.0, theta)


def mode_data(k: float, h: float, h_tilde: float) -> ModeData:
    """All per-mode quantities for one wavenumber"""
    lam = float(mode_energy(k, h))
    lam_tilde = float(mode_energy(k, h_tilde))
    theta = float(mode_angle(k, h))
    theta_tilde = float(mode_angle(k, h_tilde))
    return ModeData(
        k=k,
        lam=lam,
        theta=theta,
        lam_tilde=lam_tilde,
        theta_tilde=theta_tilde,
        alpha=(theta_tilde - theta) / 2,
    )


def mode_table(params: BathParams) -> pd.DataFrame:
    """
    Mode quantities for the whole grid, one row per k (ascending)

    Columns: k, lambda, theta, lambda_tilde, theta_tilde, alpha, sin_2alpha
    """
    k = np.asarray(mode_grid(params.n_spins))
    df = pd.DataFrame({'k': k})
    df['lambda'] = mode_energy(k, params.h)
    df['theta'] = mode_angle(k, params.h)
    df['lambda_tilde'] = mode_energy(k, params.h_tilde)
    df['theta_tilde'] = mode_angle(k, params.h_tilde)
    df['alpha'] = (df['theta_tilde'] - df['theta']) / 2
    df['sin_2alpha'] = coupling_angle_sine(k, params.h, params.h_tilde)
    return df


def coupling_angle_sine(k, h, h_tilde):
    """sin 2α_k = (h - h̃) sin k / (Λ_k Λ̃_k), the mismatch between both Bogoliubov frames"""
    return (h - h_tilde) * np.sin(k) / (mode_energy(k, h) * mode_energy(k, h_tilde))


def spectral_gap(params: BathParams) -> float:
    """Smallest Λ_k on the finite grid"""
    return float(mode_table(params)['lambda'].min())
