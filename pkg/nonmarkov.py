"""
Non-Markovianity - revivals of quantumness and the measures built on them

- find_extrema: hysteresis turning points of a sampled series
- n_q / i_q: accumulated revivals of √L and their normalized form
- normalized_n: largest recovered fraction of previously lost quantumness
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 1e-6
DENOMINATOR_GUARD = 1e-12


@dataclass(frozen=True)
class Extremum:
    index: int
    time: float
    value: float
    kind: str  # 'min' or 'max'


@dataclass
class ExtremaList:
    initial: float
    events: List[Extremum] = field(default_factory=list)

    @property
    def minima(self) -> List[Extremum]:
        return [e for e in self.events if e.kind == 'min']

    @property
    def maxima(self) -> List[Extremum]:
        return [e for e in self.events if e.kind == 'max']

    def __len__(self) -> int:
        return len(self.events)


def _plateaus(values: np.ndarray):
    """Runs of equal values as (value, first index, last index)"""
    breaks = np.flatnonzero(np.diff(values) != 0) + 1
    starts = np.concatenate(([0], breaks))
    ends = np.concatenate((breaks - 1, [len(values) - 1]))
    return values[starts], starts, ends


def find_extrema(series: Sequence[float], threshold: float = DEFAULT_THRESHOLD,
                 times: Optional[Sequence[float]] = None) -> ExtremaList:
    """
    Alternating local minima and maxima whose swings exceed threshold

    Equal-valued runs count once, located at their midpoint. The first sample
    is never an extremum; the last one only closes a rise that followed a minimum.
    """
    if threshold < 0:
        raise ConfigError(f"threshold must be >= 0, got {threshold}", key="threshold")
    values = np.asarray(series, dtype=float)
    if len(values) == 0:
        return ExtremaList(initial=math.nan)
    result = ExtremaList(initial=float(values[0]))
    if len(values) < 3:
        return result
    times = np.arange(len(values), dtype=float) if times is None else np.asarray(times, dtype=float)

    level, starts, ends = _plateaus(values)
    centers = (starts + ends) // 2

    def record(seg: int, kind: str) -> None:
        i = int(centers[seg])
        result.events.append(Extremum(index=i, time=float(times[i]), value=float(level[seg]), kind=kind))

    trend = 0
    extreme = 0
    for s in range(1, len(level)):
        if trend == 0:
            if level[s] > level[0] + threshold:
                trend, extreme = 1, s
            elif level[s] < level[0] - threshold:
                trend, extreme = -1, s
        elif trend > 0:
            if level[s] > level[extreme]:
                extreme = s
            elif level[extreme] - level[s] > threshold:
                record(extreme, 'max')
                trend, extreme = -1, s
        else:
            if level[s] < level[extreme]:
                extreme = s
            elif level[s] - level[extreme] > threshold:
                record(extreme, 'min')
                trend, extreme = 1, s

    # open rise at the end of the horizon
    if trend > 0 and result.events and result.events[-1].kind == 'min':
        record(extreme, 'max')
    return result


def n_q(echo: Sequence[float], threshold: float = DEFAULT_THRESHOLD) -> float:
    """Σ_i (√L(t_i^max) - √L(t_i^min)) over successive (min, max) pairs"""
    root = np.sqrt(np.clip(np.asarray(echo, dtype=float), 0.0, None))
    events = find_extrema(root, threshold).events
    total = 0.0
    for first, second in zip(events, events[1:]):
        if first.kind == 'min' and second.kind == 'max':
            total += second.value - first.value
    return total


def i_q(nq: float) -> float:
    """N_Q / (N_Q + 1), mapping [0, ∞] onto [0, 1]"""
    if not nq >= 0:
        raise ConfigError(f"N_Q must be >= 0, got {nq}", key="n_q")
    if math.isinf(nq):
        return 1.0
    return nq / (nq + 1)


def normalized_n(q_series: Sequence[float], threshold: float = DEFAULT_THRESHOLD) -> float:
    """
    max over t_j >= t_i of (Q(t_j^max) - Q(t_i^min)) / (Q(0) - Q(t_i^min))

    Every minimum is paired with all later maxima, clamped to [0, 1].
    """
    values = np.asarray(q_series, dtype=float)
    if len(values) == 0 or not values[0] > 0:
        raise ConfigError("quantumness series must start with Q(0) > 0", key="q_series")
    extrema = find_extrema(values, threshold)
    events = extrema.events

    best = 0.0
    later_max = -math.inf
    for event in reversed(events):
        if event.kind == 'max':
            later_max = max(later_max, event.value)
            continue
        lost = extrema.initial - event.value
        if later_max == -math.inf or lost <= DENOMINATOR_GUARD:
            continue
        best = max(best, (later_max - event.value) / lost)
    return min(max(best, 0.0), 1.0)


def window_average(series: Sequence[float], times: Sequence[float], start: float, stop: float) -> float:
    """Mean of the samples with start <= t <= stop (time average on a uniform grid)"""
    values = np.asarray(series, dtype=float)
    times = np.asarray(times, dtype=float)
    inside = (times >= start) & (times <= stop)
    if not inside.any():
        raise ConfigError(f"no samples inside window [{start}, {stop}]", key="window_start")
    return float(values[inside].mean())


def fit_decay_laws(sizes: Sequence[float], values: Sequence[float]) -> Dict:
    """
    Compare a power law and an exponential decay of values versus bath size

    Least-squares lines of log(value) against log(size) and against size;
    residuals are sums of squared deviations in log(value).
    """
    sizes = np.asarray(sizes, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(sizes) != len(values) or len(sizes) < 3:
        raise ConfigError("need at least three (size, value) pairs", key="values")
    if (values <= 0).any() or (sizes <= 0).any():
        raise ConfigError("decay fits need positive sizes and values", key="values")

    log_values = np.log(values)
    fits = {}
    for name, x in (('power', np.log(sizes)), ('exp', sizes)):
        slope, intercept = np.polyfit(x, log_values, 1)
        residual = float(np.sum((log_values - (slope * x + intercept)) ** 2))
        fits[name] = (float(slope), residual)

    power_residual = fits['power'][1]
    exp_residual = fits['exp'][1]
    return {
        'power_exponent': fits['power'][0],
        'power_residual': power_residual,
        'exp_rate': fits['exp'][0],
        'exp_residual': exp_residual,
        'residual_ratio': power_residual / exp_residual if exp_residual > 0 else math.inf,
        'preferred': 'exponential' if exp_residual < power_residual else 'polynomial',
    }
