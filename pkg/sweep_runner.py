#!/usr/bin/env python3
"""
Sweep Runner - evaluates a SweepSpec point by point and writes result tables
- One full trajectory per (axis value, sub-series), points spread over worker threads
- Results land in index-addressed slots, so row order never depends on scheduling
- Per-point failures are recorded in the error column and the run continues
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd

from decoherence import DecoherenceTrajectory, trajectory
from errors import BathSimError, ConfigError
from nonmarkov import i_q, n_q, normalized_n, window_average
from quantumness import quantumness_series
from sweep_config import SeriesVariant, SweepSpec, spec_to_config_text

RESULT_COLUMNS = ['axis', 't', 'observable', 'value', 'error']


@dataclass
class PointResult:
    """Observable of every sub-series at one axis value"""
    axis_value: float
    times: Optional[np.ndarray] = None
    values: Dict[str, Union[np.ndarray, float]] = field(default_factory=dict)
    errors: List[str] = field(default_factory=list)


def value_column(spec: SweepSpec, variant: SeriesVariant) -> str:
    return f"value[{variant.label}]" if spec.has_sub_series else 'value'


def evaluate_observable(spec: SweepSpec, variant: SeriesVariant,
                        traj: DecoherenceTrajectory) -> Union[np.ndarray, float]:
    """Observable of one trajectory"""
    if spec.observable == 'echo':
        return traj.echo
    if spec.observable in ('n_q', 'i_q'):
        nq = n_q(traj.echo, spec.threshold)
        return nq if spec.observable == 'n_q' else i_q(nq)

    q = quantumness_series(spec.tracked_state(variant), traj.magnitude)
    if spec.observable == 'quantumness':
        return q
    if spec.observable == 'normalized_n':
        return normalized_n(q, spec.threshold)
    return window_average(q, traj.times, spec.window_start, spec.window_stop)


class SweepRunner:
    """Run all points of a sweep, optionally in parallel"""

    def __init__(self, spec: SweepSpec, threads: int = 1):
        self.logger = logging.getLogger(__name__)
        if threads < 1:
            raise ConfigError(f"threads must be >= 1, got {threads}", key='threads')
        self.spec = spec
        self.threads = threads

    def _evaluate_point(self, value: float) -> PointResult:
        spec = self.spec
        result = PointResult(axis_value=value)
        grid = spec.time_grid(value)
        if spec.is_series:
            result.times = grid.samples

        # sub-series differing only in the initial state share one trajectory
        cache: Dict[tuple, DecoherenceTrajectory] = {}
        for variant in spec.variants:
            column = value_column(spec, variant)
            try:
                key = (spec.bath_params(value, variant), spec.pulse_config(value, variant))
                if key not in cache:
                    cache[key] = trajectory(key[0], grid, key[1])
                result.values[column] = evaluate_observable(spec, variant, cache[key])
            except BathSimError as e:
                where = f"{variant.label}: " if variant.label else ''
                self.logger.error(f"Error at {spec.axis}={value:g} {where}{e}")
                result.errors.append(f"{where}{e}")
                result.values[column] = np.full(grid.n_points, np.nan) if spec.is_series else math.nan
        return result

    def run(self) -> pd.DataFrame:
        spec = self.spec
        total = len(spec.values)
        self.logger.info(f"Sweeping {spec.axis} over {total} values x {len(spec.variants)} sub-series "
                         f"({spec.observable}, {self.threads} worker(s))")
        slots: List[Optional[PointResult]] = [None] * total

        if self.threads == 1:
            for index, value in enumerate(spec.values):
                slots[index] = self._evaluate_point(value)
                self.logger.debug(f"[{index + 1}/{total}] {spec.axis}={value:g} done")
        else:
            with ThreadPoolExecutor(max_workers=self.threads) as executor:
                future_to_index = {
                    executor.submit(self._evaluate_point, value): index
                    for index, value in enumerate(spec.values)
                }
                for done, future in enumerate(as_completed(future_to_index), start=1):
                    index = future_to_index[future]
                    slots[index] = future.result()
                    self.logger.debug(f"[{done}/{total}] {spec.axis}={spec.values[index]:g} done")

        table = self._assemble(slots)
        failed = sum(1 for point in slots if point.errors)
        if failed:
            self.logger.warning(f"{failed} of {total} points recorded errors")
        return table

    def _assemble(self, slots: List[PointResult]) -> pd.DataFrame:
        spec = self.spec
        columns = [value_column(spec, variant) for variant in spec.variants]
        frames = []
        for point in slots:
            rows = len(point.times) if spec.is_series else 1
            frame = {
                'axis': np.full(rows, point.axis_value, dtype=float),
                't': point.times if spec.is_series else np.full(rows, np.nan),
                'observable': [spec.observable] * rows,
            }
            for column in columns:
                frame[column] = np.broadcast_to(point.values[column], (rows,)).astype(float)
            frame['error'] = ['; '.join(point.errors)] * rows
            frames.append(pd.DataFrame(frame))

        table = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=RESULT_COLUMNS)
        table.attrs['spec'] = spec
        return table


def run_sweep(spec: SweepSpec, threads: int = 1) -> pd.DataFrame:
    """Result table with columns axis, t, observable, value (or value[<label>] per sub-series), error"""
    return SweepRunner(spec, threads).run()


def _json_number(value: float) -> Optional[float]:
    return None if math.isnan(value) else float(value)


def _table_to_json(table: pd.DataFrame, spec: Optional[SweepSpec]) -> Dict:
    value_columns = [c for c in table.columns if c.startswith('value')]
    points = []
    for axis_value, group in table.groupby('axis', sort=False):
        point = {'axis_value': float(axis_value), 'error': str(group['error'].iloc[0])}
        if group['t'].notna().any():
            point['t'] = [float(t) for t in group['t']]
            point['values'] = {c: [_json_number(v) for v in group[c]] for c in value_columns}
        else:
            point['values'] = {c: _json_number(group[c].iloc[0]) for c in value_columns}
        points.append(point)
    return {
        'axis': spec.axis if spec is not None else None,
        'observable': str(table['observable'].iloc[0]) if len(table) else (spec.observable if spec else None),
        'points': points,
    }


def emit(table: pd.DataFrame, fmt: str, destination: Union[str, Path], spec: Optional[SweepSpec] = None) -> None:
    """
    Write a result table and its <destination>.meta.ini sidecar

    Args:
        table: result of run_sweep
        fmt: 'csv' (17 significant digits) or 'json' (nested by axis value)
        destination: output file path
        spec: resolved spec for the sidecar; defaults to the one attached to the table
    """
    logger = logging.getLogger(__name__)
    if fmt not in ('csv', 'json'):
        raise ConfigError(f"format must be csv or json, got {fmt!r}", key='format')
    spec = spec if spec is not None else table.attrs.get('spec')
    if len(table.columns) == 0:
        table = pd.DataFrame(columns=RESULT_COLUMNS)

    destination = Path(destination)
    try:
        if fmt == 'csv':
            table.to_csv(destination, index=False, float_format='%.17g')
        else:
            with open(destination, 'w') as f:
                json.dump(_table_to_json(table, spec), f, indent=2)
                f.write('\n')
        if spec is not None:
            Path(f"{destination}.meta.ini").write_text(spec_to_config_text(spec))
    except OSError as e:
        raise ConfigError(f"cannot write {destination}: {e.strerror or e}", key='out') from e

    logger.info(f"Wrote {len(table)} rows to {destination}")
