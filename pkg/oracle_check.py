#!/usr/bin/env python3
"""
Oracle Check - cross-validation of the closed forms against brute-force evaluations
- Dense suite: decoherence_factor vs per-mode matrix exponentials
- Trace-norm suite: median rule vs direct minimization over measurements on S
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

from bath_spectrum import BathParams
from decoherence import decoherence_factor, dense_mode_oracle
from errors import OracleConvergenceError
from quantumness import (
    BellDiagonalState,
    evolve,
    negativity_of_quantumness,
    rotate_to_bell_diagonal,
    trace_norm_oracle,
)

logger = logging.getLogger(__name__)

DENSE_TOLERANCE = 1e-9
TRACE_NORM_TOLERANCE = 1e-5


@dataclass
class OracleReport:
    name: str
    tolerance: float
    cases: int = 0
    max_error: float = 0.0
    failures: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.cases > 0 and not self.failures

    def record(self, error: float, context: str) -> None:
        self.cases += 1
        self.max_error = max(self.max_error, error)
        if not error <= self.tolerance:
            self.failures.append(f"{context}: error {error:.3g}")


def random_bath(rng: np.random.Generator, n_spins: int) -> BathParams:
    return BathParams(
        n_spins=n_spins,
        h=float(rng.uniform(0.0, 2.5)),
        j=float(rng.uniform(0.5, 2.0)),
        epsilon=float(rng.uniform(-0.5, 0.5)),
        f=float(rng.uniform(-1.0, 1.0)),
        beta=float(rng.uniform(0.0, 5.0)),
    )


def random_bell_diagonal(rng: np.random.Generator) -> BellDiagonalState:
    """Uniform over the tetrahedron of valid Bell-diagonal states"""
    p = rng.dirichlet(np.ones(4))
    return BellDiagonalState(
        c1=float(1 - 2 * (p[0] + p[1])),
        c2=float(1 - 2 * (p[0] + p[2])),
        c3=float(1 - 2 * (p[0] + p[3])),
    )


def dense_suite(seed: int = 0, sizes=(2, 4, 6), parameter_sets: int = 20, times: int = 10,
                jt_max: float = 10.0) -> OracleReport:
    rng = np.random.default_rng(seed)
    report = OracleReport(name='decoherence factor vs dense modes', tolerance=DENSE_TOLERANCE)
    for n_spins in sizes:
        for _ in range(parameter_sets):
            params = random_bath(rng, n_spins)
            for jt in rng.uniform(0.0, jt_max, size=times):
                t = float(jt) / params.j
                error = abs(decoherence_factor(params, t) - dense_mode_oracle(params, t))
                report.record(error, f"{params} t={t:.6g}")
    logger.info(f"Dense suite: {report.cases} cases, max error {report.max_error:.3g}")
    return report


def trace_norm_suite(seed: int = 0, states: int = 100) -> OracleReport:
    rng = np.random.default_rng(seed)
    report = OracleReport(name='median rule vs trace-norm minimization', tolerance=TRACE_NORM_TOLERANCE)
    for _ in range(states):
        state0 = random_bell_diagonal(rng)
        F = complex(rng.uniform(0.0, 1.0) * np.exp(1j * rng.uniform(0.0, 2 * math.pi)))
        rho = evolve(state0, F)
        median = negativity_of_quantumness(rotate_to_bell_diagonal(rho, F))
        try:
            direct = trace_norm_oracle(rho)
        except OracleConvergenceError as e:
            logger.warning(f"Oracle did not converge for c={state0.coefficients}, F={F:.6g}: {e}")
            direct = e.best_value
        report.record(abs(median - direct), f"c={state0.coefficients} F={F:.6g}")
    logger.info(f"Trace-norm suite: {report.cases} cases, max error {report.max_error:.3g}")
    return report


def run_oracle_checks(seed: int = 0) -> List[OracleReport]:
    return [dense_suite(seed), trace_norm_suite(seed)]
