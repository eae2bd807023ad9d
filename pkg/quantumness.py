"""
Quantumness - negativity of quantumness of a system-ancilla qubit pair

Bell-diagonal initial states are dephased through the decoherence factor,
rotated back to Bell-diagonal form by a local unitary, and scored with the
median rule. A trace-norm minimization over projective measurements on S
serves as an independent check of that rule.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np
from scipy.optimize import brentq, minimize

from decoherence import DecoherenceTrajectory
from errors import ConfigError, OracleConvergenceError, StructureError

logger = logging.getLogger(__name__)

PAULI = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)

POSITIVITY_TOLERANCE = 1e-12
PHASE_CUTOFF = 1e-14
X_FORM_TOLERANCE = 1e-10

# measurement-direction grid of the trace-norm oracle
ORACLE_POLAR_POINTS = 48
ORACLE_AZIMUTH_POINTS = 96


@dataclass(frozen=True)
class BellDiagonalState:
    """
    (I + Σ c_i σ^i ⊗ σ^i) / 4

    allow_unphysical admits coefficient triples outside the tetrahedron of
    density matrices; the median rule only sees |c_i| and still applies.
    """
    c1: float
    c2: float
    c3: float
    allow_unphysical: bool = False

    def __post_init__(self):
        for name in ('c1', 'c2', 'c3'):
            value = getattr(self, name)
            if not (math.isfinite(value) and abs(value) <= 1 + POSITIVITY_TOLERANCE):
                raise ConfigError(f"|{name}| must be <= 1, got {value}", key=name)
        if not self.allow_unphysical and not self.is_physical:
            raise ConfigError(f"coefficients {self.coefficients} do not give a positive state", key='state')

    @property
    def is_physical(self) -> bool:
        return min(self.eigenvalues) >= -POSITIVITY_TOLERANCE

    @property
    def coefficients(self) -> tuple:
        return (self.c1, self.c2, self.c3)

    @property
    def eigenvalues(self) -> List[float]:
        c1, c2, c3 = self.coefficients
        return [
            (1 - c1 - c2 - c3) / 4,
            (1 - c1 + c2 + c3) / 4,
            (1 + c1 - c2 + c3) / 4,
            (1 + c1 + c2 - c3) / 4,
        ]

    @property
    def label(self) -> str:
        return f"{self.c1:g},{self.c2:g},{self.c3:g}"


# optimal initial state for non-Markovianity: the Bell state |Φ+>
MAXIMALLY_ENTANGLED = BellDiagonalState(1.0, -1.0, 1.0)


@dataclass
class TwoQubitDensityMatrix:
    """4×4 state in the basis |↑↑>, |↑↓>, |↓↑>, |↓↓> (S first, A second)"""
    data: np.ndarray
    check_positivity: bool = True

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.shape != (4, 4):
            raise StructureError(f"expected a 4x4 matrix, got shape {self.data.shape}")
        if not np.allclose(self.data, self.data.conj().T, rtol=0, atol=1e-12):
            raise StructureError("matrix is not Hermitian")
        if abs(np.trace(self.data) - 1) > 1e-12:
            raise StructureError(f"trace is {np.trace(self.data).real:.15g}, expected 1")
        if self.check_positivity and np.linalg.eigvalsh(self.data).min() < -1e-10:
            raise StructureError("matrix has negative eigenvalues")

    @classmethod
    def from_bell_diagonal(cls, state: BellDiagonalState) -> "TwoQubitDensityMatrix":
        data = np.eye(4, dtype=complex)
        for c, sigma in zip(state.coefficients, PAULI):
            data = data + c * np.kron(sigma, sigma)
        return cls(data / 4, check_positivity=not state.allow_unphysical)


def evolve(state0: BellDiagonalState, F: complex) -> TwoQubitDensityMatrix:
    """X-form state of S and A after dephasing of S with decoherence factor F"""
    magnitude = abs(F)
    if magnitude > 1 + 1e-9:
        raise ConfigError(f"|F| = {magnitude:.12g} exceeds 1", key='F')
    c1, c2, c3 = state0.coefficients
    a = (1 + c3) / 4
    b = (1 - c3) / 4
    z = (c1 + c2) * magnitude / 4
    w = (c1 - c2) * complex(F) / 4

    data = np.zeros((4, 4), dtype=complex)
    data[0, 0] = data[3, 3] = a
    data[1, 1] = data[2, 2] = b
    data[1, 2] = data[2, 1] = z
    data[0, 3] = w.conjugate()
    data[3, 0] = w
    return TwoQubitDensityMatrix(data, check_positivity=not state0.allow_unphysical)


def _x_form_violation(data: np.ndarray) -> float:
    mask = np.ones((4, 4), dtype=bool)
    for i, j in [(0, 0), (1, 1), (2, 2), (3, 3), (0, 3), (3, 0), (1, 2), (2, 1)]:
        mask[i, j] = False
    return float(max(
        np.abs(data[mask]).max(),
        abs(data[0, 0] - data[3, 3]),
        abs(data[1, 1] - data[2, 2]),
        abs(data[1, 2] - data[2, 1]),
        abs(data[1, 2].imag),
    ))


def rotate_to_bell_diagonal(rho: TwoQubitDensityMatrix, F: complex) -> BellDiagonalState:
    """
    Undo the phase of F with the local unitary u⊗u, u = exp(-iφσ^z/4)

    Returns the Bell-diagonal coefficients (c1|F|, c2|F|, c3).
    """
    data = rho.data
    violation = _x_form_violation(data)
    if violation > X_FORM_TOLERANCE:
        raise StructureError(f"matrix is not of X-form (deviation {violation:.3g})")

    phi = math.atan2(F.imag, F.real) if abs(F) >= PHASE_CUTOFF else 0.0
    u = np.diag([np.exp(-0.25j * phi), np.exp(0.25j * phi)])
    v = np.kron(u, u)
    rotated = v.conj().T @ data @ v
    if abs(rotated[3, 0].imag) > X_FORM_TOLERANCE:
        raise StructureError("phase of F does not match the matrix coherences")

    outer = rotated[3, 0].real
    inner = rotated[1, 2].real
    return BellDiagonalState(
        c1=2 * (inner + outer),
        c2=2 * (inner - outer),
        c3=2 * (rotated[0, 0].real - rotated[1, 1].real),
        allow_unphysical=not rho.check_positivity,
    )


def evolve_coefficients(state0: BellDiagonalState, magnitude: float) -> BellDiagonalState:
    """Rotated Bell-diagonal coefficients for a given |F|; c3 is carried unchanged"""
    return BellDiagonalState(state0.c1 * magnitude, state0.c2 * magnitude, state0.c3,
                             allow_unphysical=state0.allow_unphysical)


def negativity_of_quantumness(state: BellDiagonalState) -> float:
    """Intermediate value of |c1|, |c2|, |c3|"""
    return sorted(abs(c) for c in state.coefficients)[1]


def quantumness_series(state0: BellDiagonalState, magnitude: np.ndarray) -> np.ndarray:
    """Q_S(t) for an array of |F(t)| values"""
    magnitude = np.asarray(magnitude, dtype=float)
    stacked = np.stack([
        abs(state0.c1) * magnitude,
        abs(state0.c2) * magnitude,
        np.full_like(magnitude, abs(state0.c3)),
    ])
    return np.sort(stacked, axis=0)[1]


def _measurement_directions(polar: np.ndarray, azimuth: np.ndarray) -> np.ndarray:
    return np.stack([
        np.sin(polar) * np.cos(azimuth),
        np.sin(polar) * np.sin(azimuth),
        np.cos(polar),
    ], axis=-1)


def _distance_to_measured(data: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """||ρ - Σ_± (Π_± ⊗ I) ρ (Π_± ⊗ I)||₁ for a batch of Bloch directions on S"""
    n_sigma = np.einsum('mi,ijk->mjk', directions, PAULI)
    chi = np.zeros((len(directions), 4, 4), dtype=complex)
    for sign in (1, -1):
        proj = (IDENTITY_2 + sign * n_sigma) / 2
        proj_full = np.einsum('mab,cd->macbd', proj, IDENTITY_2).reshape(-1, 4, 4)
        chi += proj_full @ data @ proj_full
    diff = data - chi
    return np.abs(np.linalg.eigvalsh(diff)).sum(axis=-1)


def trace_norm_oracle(rho: TwoQubitDensityMatrix) -> float:
    """
    Q_S as the smallest trace distance (×2) to a state measured projectively on S

    Grid search over Bloch angles, lowest-index cell wins ties, then Nelder-Mead.
    """
    data = rho.data
    polar = np.linspace(0.0, math.pi, ORACLE_POLAR_POINTS)
    azimuth = np.linspace(0.0, 2 * math.pi, ORACLE_AZIMUTH_POINTS, endpoint=False)
    pp, aa = np.meshgrid(polar, azimuth, indexing='ij')
    grid_values = _distance_to_measured(data, _measurement_directions(pp.ravel(), aa.ravel()))
    best = int(np.argmin(grid_values))
    start = np.array([pp.ravel()[best], aa.ravel()[best]])

    def objective(angles: np.ndarray) -> float:
        direction = _measurement_directions(np.array([angles[0]]), np.array([angles[1]]))
        return float(_distance_to_measured(data, direction)[0])

    result = minimize(objective, start, method='Nelder-Mead',
                      options={'xatol': 1e-9, 'fatol': 1e-10, 'maxiter': 4000})
    best_value = min(float(result.fun), float(grid_values[best]))
    if not result.success:
        raise OracleConvergenceError(f"trace-norm refinement failed: {result.message}", best_value)
    return best_value


def _filled_signs(diff: np.ndarray) -> np.ndarray:
    """Signs of diff with exact zeros taking the previous nonzero sign (leading zeros the next one)"""
    signs = np.sign(diff)
    nonzero = np.flatnonzero(signs)
    if len(nonzero) == 0:
        return signs
    filled = signs.copy()
    filled[:nonzero[0]] = signs[nonzero[0]]
    last = signs[nonzero[0]]
    for i in range(nonzero[0], len(signs)):
        if signs[i] == 0:
            filled[i] = last
        else:
            last = signs[i]
    return filled


def detect_sudden_changes(state0: BellDiagonalState, traj: DecoherenceTrajectory,
                          magnitude_at: Optional[Callable[[float], float]] = None) -> List[float]:
    """
    Times at which the active branch of the median switches

    The branches |c_i||F(t)| (i = 1, 2) cross the constant |c3| where
    |F(t)| = |c3|/|c_i|. Brackets come from sign changes on the grid and are
    refined by bisection when magnitude_at is supplied, else interpolated.
    """
    a1, a2, a3 = (abs(c) for c in state0.coefficients)
    # equal |c1|, |c2| keep the median on one branch
    if a1 == a2 or a3 == 0:
        return []

    times = traj.times
    magnitude = np.asarray(traj.magnitude)
    changes = []
    for ai in (a1, a2):
        if ai == 0:
            continue
        level = a3 / ai
        diff = magnitude - level
        filled = _filled_signs(diff)
        for i in np.flatnonzero(filled[1:] != filled[:-1]):
            left, right = times[i], times[i + 1]
            if diff[i] == 0:
                changes.append(float(left))
            elif diff[i + 1] == 0:
                changes.append(float(right))
            elif magnitude_at is not None and (magnitude_at(left) - level) * (magnitude_at(right) - level) < 0:
                root = brentq(lambda t: magnitude_at(t) - level, left, right, xtol=1e-12)
                changes.append(float(root))
            else:
                changes.append(float(left + (right - left) * diff[i] / (diff[i] - diff[i + 1])))

    changes.sort()
    logger.debug(f"Sudden changes for c={state0.coefficients}: {changes}")
    return changes
