#!/usr/bin/env python3
"""
bathsim - qubit dephasing in a thermal transverse-field Ising bath

Commands:
    trajectory    single run: F(t), L(t) and Q_S(t) of the first configured point
    sweep         parameter sweep from a config file or a shipped preset
    oracle-check  cross-check closed forms against brute-force evaluations
"""

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from dotenv import load_dotenv

from decoherence import decoherence_series, trajectory
from errors import BathSimError, ConfigError
from nonmarkov import find_extrema, fit_decay_laws, i_q, n_q, normalized_n
from oracle_check import run_oracle_checks
from quantumness import detect_sudden_changes, quantumness_series
from sweep_config import SweepSpec, load_preset, parse_config, spec_to_config_text
from sweep_runner import emit, run_sweep

load_dotenv()

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_COMPUTATION = 3

LOG_LEVELS = ['DEBUG', 'INFO', 'WARNING', 'ERROR']


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Qubit dephasing in a thermal Ising bath')
    parser.add_argument('command', choices=['trajectory', 'sweep', 'oracle-check'],
                        help='Command to run')
    parser.add_argument('-c', '--config', type=str, help='Run configuration (INI)')
    parser.add_argument('-p', '--preset', type=str, help='Shipped preset, e.g. fig3b')
    parser.add_argument('-o', '--out', type=str, help='Output file (default: $BATHSIM_OUTPUT_DIR/<name>.<format>)')
    parser.add_argument('-f', '--format', choices=['csv', 'json'], default='csv',
                        help='Output format (default: csv)')
    parser.add_argument('-k', '--threads', type=int, default=None,
                        help='Worker threads (default: $BATHSIM_THREADS or 1)')
    parser.add_argument('--t-max', type=float, default=None, help='Time horizon in units of 1/J')
    parser.add_argument('--points', type=int, default=None, help='Samples on the time grid')
    parser.add_argument('--threshold', type=float, default=None, help='Extrema detection threshold')
    parser.add_argument('--seed', type=int, default=0, help='Seed of the oracle suites (default: 0)')
    parser.add_argument('--log-level', choices=LOG_LEVELS, default=None,
                        help='Logging level (default: $BATHSIM_LOG_LEVEL or INFO)')
    return parser


def load_spec(args) -> SweepSpec:
    if bool(args.config) == bool(args.preset):
        raise ConfigError("give exactly one of --config or --preset", key='config')
    if args.preset:
        spec = load_preset(args.preset)
    else:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file {path} not found", key='config')
        spec = parse_config(path.read_text())

    overrides = {}
    if args.t_max is not None:
        overrides['t_max'] = args.t_max
    if args.points is not None:
        overrides['n_points'] = args.points
    if args.threshold is not None:
        overrides['threshold'] = args.threshold
    return dataclasses.replace(spec, **overrides) if overrides else spec


def resolve_threads(args) -> int:
    raw = args.threads if args.threads is not None else os.getenv('BATHSIM_THREADS', '1')
    try:
        threads = int(raw)
    except ValueError:
        raise ConfigError(f"BATHSIM_THREADS must be an integer, got {raw!r}", key='threads')
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}", key='threads')
    return threads


def resolve_output(args, default_name: str) -> Path:
    if args.out:
        return Path(args.out)
    out_dir = Path(os.getenv('BATHSIM_OUTPUT_DIR', '.'))
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir / f"{default_name}.{args.format}"


def run_name(args, fallback: str) -> str:
    if args.preset:
        return args.preset
    return Path(args.config).stem if args.config else fallback


def write_trajectory(table: pd.DataFrame, fmt: str, out: Path, spec: SweepSpec) -> None:
    """Trajectory columns as CSV (17 digits) or JSON (exact floats), plus the .meta.ini sidecar"""
    try:
        if fmt == 'csv':
            table.to_csv(out, index=False, float_format='%.17g')
        else:
            with open(out, 'w') as f:
                json.dump({column: [float(v) for v in table[column]] for column in table.columns}, f, indent=2)
                f.write('\n')
        Path(f"{out}.meta.ini").write_text(spec_to_config_text(spec))
    except OSError as e:
        raise ConfigError(f"cannot write {out}: {e.strerror or e}", key='out') from e


def log_decay_fits(spec: SweepSpec, table: pd.DataFrame) -> None:
    """Power-law vs exponential fit of a scalar measure against bath size, per value column"""
    logger = logging.getLogger(__name__)
    if spec.axis != 'N' or spec.is_series or len(spec.values) < 3:
        return
    for column in (c for c in table.columns if c.startswith('value')):
        try:
            fit = fit_decay_laws(table['axis'], table[column])
        except ConfigError as e:
            logger.info(f"No decay fit for {column}: {e}")
            continue
        logger.info(f"{column}: power exponent {fit['power_exponent']:.4g}, exp rate {fit['exp_rate']:.4g}, "
                    f"residual ratio {fit['residual_ratio']:.4g} ({fit['preferred']})")


def command_trajectory(args) -> int:
    logger = logging.getLogger(__name__)
    spec = load_spec(args)
    value = spec.values[0]
    variant = spec.variants[0]
    if len(spec.values) > 1 or len(spec.variants) > 1:
        logger.warning(f"Config describes {len(spec.values)} x {len(spec.variants)} points; "
                       f"running {spec.axis}={value:g} {variant.label}".rstrip())

    params = spec.bath_params(value, variant)
    pulses = spec.pulse_config(value, variant)
    grid = spec.time_grid(value)

    print(f"\n{'='*80}")
    print(f"TRAJECTORY: N={params.n_spins} h={params.h:g} eps={params.epsilon:g} beta={params.beta:g}"
          + (f" pulses T={pulses.period:g} (dt={pulses.interval:g})" if pulses else ""))
    print(f"{'='*80}\n")

    traj = trajectory(params, grid, pulses, threads=resolve_threads(args))
    table = pd.DataFrame({
        't': traj.times,
        're': traj.values.real,
        'im': traj.values.imag,
        'abs': traj.magnitude,
        'echo': traj.echo,
    })

    state0 = variant.state0 or spec.state0
    tracked = spec.tracked_state(variant)
    q = quantumness_series(tracked, traj.magnitude)
    if state0 is not None:
        table['quantumness'] = q

    extrema = find_extrema(q, spec.threshold, traj.times)
    nq = n_q(traj.echo, spec.threshold)
    logger.info(f"Quantumness extrema: {len(extrema.minima)} minima, {len(extrema.maxima)} maxima")
    # normalized N needs Q_S(0) > 0; classical initial states have none to lose
    measure = f"{normalized_n(q, spec.threshold):.10g}" if q[0] > 0 else 'undefined'
    logger.info(f"N_Q = {nq:.10g}, I_Q = {i_q(nq):.10g}, normalized N = {measure}")
    if state0 is not None:
        def magnitude_at(t: float) -> float:
            return float(abs(decoherence_series(params, np.array([t]), pulses)[0]))

        changes = detect_sudden_changes(state0, traj, magnitude_at)
        logger.info(f"Sudden changes at Jt = {', '.join(f'{t * params.j:.6g}' for t in changes) or 'none'}")

    out = resolve_output(args, run_name(args, 'trajectory'))
    write_trajectory(table, args.format, out, spec)

    print("✅ Trajectory complete")
    print(f"   Samples: {grid.n_points} over Jt <= {grid.t_max * params.j:g}")
    print(f"   min |F|: {traj.magnitude.min():.6g}")
    print(f"   Output: {out}\n")
    return EXIT_OK


def command_sweep(args) -> int:
    spec = load_spec(args)
    threads = resolve_threads(args)

    print(f"\n{'='*80}")
    print(f"SWEEP: {spec.observable} over {spec.axis} ({len(spec.values)} values, "
          f"{len(spec.variants)} sub-series, {threads} worker(s))")
    print(f"{'='*80}\n")

    table = run_sweep(spec, threads=threads)
    out = resolve_output(args, run_name(args, 'sweep'))
    emit(table, args.format, out, spec)
    log_decay_fits(spec, table)

    failed = int((table['error'] != '').groupby(table['axis']).any().sum()) if len(table) else 0
    print("✅ Sweep complete" if not failed else f"❌ Sweep complete with {failed} failed point(s)")
    print(f"   Rows: {len(table)}")
    print(f"   Output: {out} (+ {out}.meta.ini)\n")
    return EXIT_COMPUTATION if failed else EXIT_OK


def command_oracle_check(args) -> int:
    print(f"\n{'='*80}")
    print("ORACLE CHECK")
    print(f"{'='*80}\n")

    reports = run_oracle_checks(seed=args.seed)
    for report in reports:
        mark = '✅' if report.passed else '❌'
        print(f"{mark} {report.name}: {report.cases} cases, max error {report.max_error:.3g} "
              f"(tolerance {report.tolerance:g})")
        for failure in report.failures[:5]:
            print(f"   - {failure}")
    print()
    return EXIT_OK if all(report.passed for report in reports) else EXIT_COMPUTATION


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    level = args.log_level or os.getenv('BATHSIM_LOG_LEVEL', 'INFO').upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format='%(asctime)s - %(levelname)s - %(message)s')
    logger = logging.getLogger(__name__)

    commands = {
        'trajectory': command_trajectory,
        'sweep': command_sweep,
        'oracle-check': command_oracle_check,
    }
    try:
        return commands[args.command](args)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except BathSimError as e:
        logger.error(f"Computation failed: {e}")
        return EXIT_COMPUTATION


if __name__ == "__main__":
    sys.exit(main())
