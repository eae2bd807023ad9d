#!/usr/bin/env python3
"""
Sweep Configuration for the Ising-bath dephasing simulator
Parses INI run documents into validated SweepSpec objects and ships the figure presets
"""

import configparser
import io
import itertools
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from bath_spectrum import BathParams
from decoherence import PulseConfig, TimeGrid
from errors import ConfigError
from quantumness import MAXIMALLY_ENTANGLED, BellDiagonalState

logger = logging.getLogger(__name__)

VERSION = "1.0.0"
PRESET_DIR = Path(__file__).resolve().parent / 'presets'

AXES = ('h', 'T', 'N', 'pulse_period')
SERIES_OBSERVABLES = ('echo', 'quantumness')
SCALAR_OBSERVABLES = ('n_q', 'i_q', 'normalized_n', 'quasi_steady')
OBSERVABLES = SERIES_OBSERVABLES + SCALAR_OBSERVABLES

ALLOWED_KEYS = {
    'bath': ('n_spins', 'h', 'epsilon', 'j', 'f', 'temperature', 'beta', 'kappa_b'),
    'state': ('c1', 'c2', 'c3', 'allow_unphysical'),
    'grid': ('t_max', 'n_points'),
    'pulses': ('enabled', 'period', 'tanh_field'),
    'sweep': ('axis', 'values', 'start', 'stop', 'count', 'observable', 'threshold',
              'series_temperature', 'series_h', 'series_state', 'series_pulse_period',
              'window_start', 'window_stop'),
}

_SECTION_RE = re.compile(r'^\s*\[([^\]]+)\]')
_KEY_RE = re.compile(r'^\s*([^=:\s#;][^=:]*?)\s*[=:]')


@dataclass(frozen=True)
class SeriesVariant:
    """One sub-series of a sweep: a combination of the series_* overrides"""
    label: str = ''
    temperature: Optional[float] = None
    h: Optional[float] = None
    state0: Optional[BellDiagonalState] = None
    # (period,) with None meaning pulses off; empty tuple means no override
    pulse_period: Tuple[Optional[float], ...] = ()


@dataclass(frozen=True)
class SweepSpec:
    """Fully resolved sweep: fixed bath parameters, one axis, optional sub-series"""
    n_spins: Optional[int]
    h: Optional[float]
    epsilon: float
    axis: str
    values: Tuple[float, ...]
    observable: str
    j: float = 1.0
    f: float = 0.0
    temperature: Optional[float] = None
    beta: Optional[float] = None
    kappa_b: float = 1.0
    state0: Optional[BellDiagonalState] = None
    t_max: Optional[float] = None
    n_points: Optional[int] = None
    pulses: Optional[PulseConfig] = None
    threshold: float = 1e-6
    series_temperature: Tuple[float, ...] = ()
    series_h: Tuple[float, ...] = ()
    series_state: Tuple[BellDiagonalState, ...] = ()
    series_pulse_period: Tuple[Optional[float], ...] = ()
    window_start: Optional[float] = None
    window_stop: Optional[float] = None
    variants: Tuple[SeriesVariant, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigError(f"axis must be one of {', '.join(AXES)}, got {self.axis!r}", key='axis')
        if self.observable not in OBSERVABLES:
            raise ConfigError(f"observable must be one of {', '.join(OBSERVABLES)}, got {self.observable!r}",
                              key='observable')
        if not self.values:
            raise ConfigError("sweep needs at least one axis value", key='values')
        if len(set(self.values)) != len(self.values):
            raise ConfigError("axis values must be distinct", key='values')
        if not (math.isfinite(self.threshold) and self.threshold >= 0):
            raise ConfigError(f"threshold must be >= 0, got {self.threshold}", key='threshold')
        if self.temperature is not None and self.beta is not None:
            raise ConfigError("give either temperature or beta, not both", key='beta')
        if not (math.isfinite(self.kappa_b) and self.kappa_b > 0):
            raise ConfigError(f"kappa_b must be > 0, got {self.kappa_b}", key='kappa_b')

        clashes = {'h': self.series_h, 'T': self.series_temperature, 'pulse_period': self.series_pulse_period}
        if clashes.get(self.axis):
            raise ConfigError(f"axis {self.axis} is also given as a sub-series", key='axis')
        if self.observable == 'quantumness' and self.state0 is None and not self.series_state:
            raise ConfigError("observable 'quantumness' needs a [state] section or series_state", key='observable')
        if self.observable == 'quasi_steady' and (self.window_start is None or self.window_stop is None):
            raise ConfigError("observable 'quasi_steady' needs window_start and window_stop", key='window_start')
        if self.window_start is not None and self.window_stop is not None and self.window_start > self.window_stop:
            raise ConfigError("window_start must not exceed window_stop", key='window_start')

        object.__setattr__(self, 'variants', tuple(self._build_variants()))
        # every point must yield valid parameters up front
        for value in self.values:
            grid = self.time_grid(value)
            for variant in self.variants:
                self.bath_params(value, variant)
                self.pulse_config(value, variant)
                if self.window_start is not None and self.window_start > grid.t_max:
                    raise ConfigError(f"window_start {self.window_start} lies beyond t_max {grid.t_max}",
                                      key='window_start')

    @property
    def is_series(self) -> bool:
        return self.observable in SERIES_OBSERVABLES

    @property
    def has_sub_series(self) -> bool:
        return bool(self.series_temperature or self.series_h or self.series_state or self.series_pulse_period)

    def _build_variants(self) -> List[SeriesVariant]:
        temps = [('T=' + f"{t:g}", t) for t in self.series_temperature] or [('', None)]
        fields_h = [('h=' + f"{h:g}", h) for h in self.series_h] or [('', None)]
        states = [('c=' + s.label, s) for s in self.series_state] or [('', None)]
        pulses = [('pulse=' + ('off' if p is None else f"{p:g}"), (p,)) for p in self.series_pulse_period] or [('', ())]

        variants = []
        for (lt, t), (lh, h), (ls, s), (lp, p) in itertools.product(temps, fields_h, states, pulses):
            label = ';'.join(part for part in (lt, lh, ls, lp) if part)
            variants.append(SeriesVariant(label=label, temperature=t, h=h, state0=s, pulse_period=p))
        return variants

    def bath_params(self, value: float, variant: SeriesVariant = SeriesVariant()) -> BathParams:
        """BathParams of one sweep point"""
        n_spins = _as_int(value, 'values') if self.axis == 'N' else self.n_spins
        h = value if self.axis == 'h' else (variant.h if variant.h is not None else self.h)
        if n_spins is None:
            raise ConfigError("n_spins is required", key='n_spins')
        if h is None:
            raise ConfigError("h is required", key='h')

        temperature = value if self.axis == 'T' else variant.temperature
        if temperature is None:
            temperature = self.temperature
        if temperature is not None:
            return BathParams.from_temperature(n_spins=n_spins, h=h, temperature=temperature, j=self.j,
                                               epsilon=self.epsilon, f=self.f, kappa_b=self.kappa_b)
        if self.beta is None:
            raise ConfigError("temperature or beta is required", key='temperature')
        return BathParams(n_spins=n_spins, h=h, j=self.j, epsilon=self.epsilon, f=self.f, beta=self.beta)

    def pulse_config(self, value: float, variant: SeriesVariant = SeriesVariant()) -> Optional[PulseConfig]:
        tanh_field = self.pulses.tanh_field if self.pulses is not None else 'original'
        if self.axis == 'pulse_period':
            return PulseConfig(period=value, enabled=True, tanh_field=tanh_field)
        if variant.pulse_period:
            period = variant.pulse_period[0]
            if period is None:
                return None
            return PulseConfig(period=period, enabled=True, tanh_field=tanh_field)
        if self.pulses is not None and self.pulses.enabled:
            return self.pulses
        return None

    def time_grid(self, value: float) -> TimeGrid:
        """Explicit [grid] values, else two bath traversal times at 20 samples per 1/J"""
        n_spins = _as_int(value, 'values') if self.axis == 'N' else self.n_spins
        default = TimeGrid.for_bath(n_spins, self.j) if n_spins is not None else None
        t_max = self.t_max if self.t_max is not None else default.t_max
        n_points = self.n_points if self.n_points is not None else int(round(20 * t_max)) + 1
        return TimeGrid(t_max=t_max, n_points=n_points)

    def tracked_state(self, variant: SeriesVariant = SeriesVariant()) -> BellDiagonalState:
        """State whose quantumness is tracked; the Bell state |Φ+> when none is configured"""
        if variant.state0 is not None:
            return variant.state0
        return self.state0 if self.state0 is not None else MAXIMALLY_ENTANGLED


def _as_int(value: float, key: str) -> int:
    if not float(value).is_integer():
        raise ConfigError(f"expected an integer, got {value}", key=key)
    return int(value)


def _key_lines(text: str) -> Dict[Tuple[str, str], int]:
    """Line number of every (section, key) in the document"""
    lines = {}
    section = None
    for number, line in enumerate(text.splitlines(), start=1):
        header = _SECTION_RE.match(line)
        if header:
            section = header.group(1).strip()
            continue
        key = _KEY_RE.match(line)
        if key and section is not None and not line.startswith((' ', '\t')):
            lines[(section, key.group(1).strip())] = number
    return lines


class _Reader:
    """Typed access to a parsed document, with errors pointing at key and line"""

    def __init__(self, parser: configparser.ConfigParser, lines: Dict[Tuple[str, str], int]):
        self.parser = parser
        self.lines = lines

    def has(self, section: str, key: str) -> bool:
        return self.parser.has_option(section, key)

    def _fail(self, section: str, key: str, message: str):
        raise ConfigError(message, key=f"{section}.{key}", line=self.lines.get((section, key)))

    def text(self, section: str, key: str, default=None) -> Optional[str]:
        if not self.has(section, key):
            return default
        return self.parser.get(section, key).strip()

    def number(self, section: str, key: str, default=None) -> Optional[float]:
        raw = self.text(section, key)
        if raw is None:
            return default
        try:
            value = float(raw)
        except ValueError:
            self._fail(section, key, f"expected a number, got {raw!r}")
        if not math.isfinite(value):
            self._fail(section, key, f"expected a finite number, got {raw!r}")
        return value

    def integer(self, section: str, key: str, default=None) -> Optional[int]:
        raw = self.text(section, key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            self._fail(section, key, f"expected an integer, got {raw!r}")

    def boolean(self, section: str, key: str, default: bool = False) -> bool:
        if not self.has(section, key):
            return default
        try:
            return self.parser.getboolean(section, key)
        except ValueError:
            self._fail(section, key, f"expected true/false, got {self.text(section, key)!r}")

    def numbers(self, section: str, key: str) -> Tuple[float, ...]:
        raw = self.text(section, key)
        if raw is None:
            return ()
        try:
            return tuple(float(item) for item in raw.split(',') if item.strip())
        except ValueError:
            self._fail(section, key, f"expected a comma-separated list of numbers, got {raw!r}")

    def pulse_periods(self, section: str, key: str) -> Tuple[Optional[float], ...]:
        raw = self.text(section, key)
        if raw is None:
            return ()
        periods = []
        for item in (part.strip() for part in raw.split(',')):
            if not item:
                continue
            if item.lower() == 'off':
                periods.append(None)
                continue
            try:
                periods.append(float(item))
            except ValueError:
                self._fail(section, key, f"expected 'off' or a period, got {item!r}")
        return tuple(periods)

    def states(self, section: str, key: str, allow_unphysical: bool = False) -> Tuple[BellDiagonalState, ...]:
        raw = self.text(section, key)
        if raw is None:
            return ()
        states = []
        for triple in (part.strip() for part in raw.split(';')):
            if not triple:
                continue
            try:
                c = [float(x) for x in triple.split(',')]
            except ValueError:
                self._fail(section, key, f"expected 'c1,c2,c3' triples separated by ';', got {triple!r}")
            if len(c) != 3:
                self._fail(section, key, f"expected three coefficients, got {triple!r}")
            states.append(BellDiagonalState(*c, allow_unphysical=allow_unphysical))
        return tuple(states)


def _read_document(text: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as e:
        raise ConfigError("key outside of any section", line=e.lineno) from e
    except configparser.ParsingError as e:
        raise ConfigError("cannot parse line", line=e.errors[0][0]) from e
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as e:
        raise ConfigError("duplicate entry", key=getattr(e, 'option', None) or e.section, line=e.lineno) from e
    except configparser.Error as e:
        raise ConfigError(f"cannot parse document: {e}") from e
    return parser


def _check_keys(parser: configparser.ConfigParser, lines: Dict[Tuple[str, str], int]) -> None:
    if parser.defaults():
        raise ConfigError("unknown section 'DEFAULT'", key='DEFAULT')
    for section in parser.sections():
        if section not in ALLOWED_KEYS:
            raise ConfigError(f"unknown section '{section}'", key=section)
        for key in parser.options(section):
            if key not in ALLOWED_KEYS[section]:
                raise ConfigError(f"unknown key '{key}' in [{section}]", key=f"{section}.{key}",
                                  line=lines.get((section, key)))


def _missing_keys(reader: _Reader) -> List[str]:
    axis = reader.text('sweep', 'axis')
    missing = []
    if axis != 'N' and not reader.has('bath', 'n_spins'):
        missing.append('bath.n_spins')
    if axis != 'h' and not reader.has('sweep', 'series_h') and not reader.has('bath', 'h'):
        missing.append('bath.h')
    if not reader.has('bath', 'epsilon'):
        missing.append('bath.epsilon')
    if (axis != 'T' and not reader.has('sweep', 'series_temperature')
            and not reader.has('bath', 'temperature') and not reader.has('bath', 'beta')):
        missing.append('bath.temperature')
    if axis is None:
        missing.append('sweep.axis')
    if not reader.has('sweep', 'observable'):
        missing.append('sweep.observable')
    ranged = all(reader.has('sweep', key) for key in ('start', 'stop', 'count'))
    if not reader.has('sweep', 'values') and not ranged:
        missing.append('sweep.values')
    return missing


def parse_config(text: str) -> SweepSpec:
    """
    Parse an INI run document into a validated SweepSpec

    Args:
        text: document with [bath], [state], [grid], [pulses] and [sweep] sections

    Returns:
        SweepSpec with all defaults resolved (j = 1, f = 0, kappa_b = 1, threshold = 1e-6)
    """
    parser = _read_document(text)
    lines = _key_lines(text)
    _check_keys(parser, lines)
    reader = _Reader(parser, lines)

    missing = _missing_keys(reader)
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}", key=missing[0])

    if reader.has('sweep', 'values'):
        if any(reader.has('sweep', key) for key in ('start', 'stop', 'count')):
            raise ConfigError("give either values or start/stop/count", key='sweep.values',
                              line=lines.get(('sweep', 'values')))
        values = reader.numbers('sweep', 'values')
    else:
        count = reader.integer('sweep', 'count')
        if count < 1:
            raise ConfigError(f"count must be >= 1, got {count}", key='sweep.count', line=lines.get(('sweep', 'count')))
        start = reader.number('sweep', 'start')
        stop = reader.number('sweep', 'stop')
        values = tuple(float(v) for v in np.linspace(start, stop, count))

    allow_unphysical = reader.boolean('state', 'allow_unphysical', False)
    state0 = None
    state_keys = [key for key in ('c1', 'c2', 'c3') if reader.has('state', key)]
    if state_keys:
        if len(state_keys) != 3:
            absent = [key for key in ('c1', 'c2', 'c3') if key not in state_keys]
            raise ConfigError("[state] needs all of c1, c2, c3", key=f"state.{absent[0]}")
        state0 = BellDiagonalState(*(reader.number('state', key) for key in ('c1', 'c2', 'c3')),
                                   allow_unphysical=allow_unphysical)

    pulses = None
    if parser.has_section('pulses'):
        enabled = reader.boolean('pulses', 'enabled', False)
        pulses = PulseConfig(period=reader.number('pulses', 'period', 0.0), enabled=enabled,
                             tanh_field=reader.text('pulses', 'tanh_field', 'original'))

    spec = SweepSpec(
        n_spins=reader.integer('bath', 'n_spins'),
        h=reader.number('bath', 'h'),
        epsilon=reader.number('bath', 'epsilon'),
        axis=reader.text('sweep', 'axis'),
        values=tuple(sorted(values)),
        observable=reader.text('sweep', 'observable'),
        j=reader.number('bath', 'j', 1.0),
        f=reader.number('bath', 'f', 0.0),
        temperature=reader.number('bath', 'temperature'),
        beta=reader.number('bath', 'beta'),
        kappa_b=reader.number('bath', 'kappa_b', 1.0),
        state0=state0,
        t_max=reader.number('grid', 't_max'),
        n_points=reader.integer('grid', 'n_points'),
        pulses=pulses,
        threshold=reader.number('sweep', 'threshold', 1e-6),
        series_temperature=reader.numbers('sweep', 'series_temperature'),
        series_h=reader.numbers('sweep', 'series_h'),
        series_state=reader.states('sweep', 'series_state', allow_unphysical),
        series_pulse_period=reader.pulse_periods('sweep', 'series_pulse_period'),
        window_start=reader.number('sweep', 'window_start'),
        window_stop=reader.number('sweep', 'window_stop'),
    )
    logger.debug(f"Parsed sweep: axis={spec.axis} ({len(spec.values)} values), "
                 f"observable={spec.observable}, {len(spec.variants)} sub-series")
    return spec


def _fmt(value: float) -> str:
    return repr(float(value))


def spec_to_config_text(spec: SweepSpec) -> str:
    """Resolved spec as an INI document; parse_config of the result gives back an equal spec"""
    doc = configparser.ConfigParser(interpolation=None)
    doc.optionxform = str

    bath = {'epsilon': _fmt(spec.epsilon), 'j': _fmt(spec.j), 'f': _fmt(spec.f), 'kappa_b': _fmt(spec.kappa_b)}
    if spec.n_spins is not None:
        bath['n_spins'] = str(spec.n_spins)
    if spec.h is not None:
        bath['h'] = _fmt(spec.h)
    if spec.temperature is not None:
        bath['temperature'] = _fmt(spec.temperature)
    if spec.beta is not None:
        bath['beta'] = _fmt(spec.beta)
    doc['bath'] = bath

    state = {}
    if spec.state0 is not None:
        state = {name: _fmt(c) for name, c in zip(('c1', 'c2', 'c3'), spec.state0.coefficients)}
    if any(s.allow_unphysical for s in (spec.state0,) + spec.series_state if s is not None):
        state['allow_unphysical'] = 'true'
    if state:
        doc['state'] = state

    grid = {}
    if spec.t_max is not None:
        grid['t_max'] = _fmt(spec.t_max)
    if spec.n_points is not None:
        grid['n_points'] = str(spec.n_points)
    if grid:
        doc['grid'] = grid

    if spec.pulses is not None:
        doc['pulses'] = {
            'enabled': 'true' if spec.pulses.enabled else 'false',
            'period': _fmt(spec.pulses.period),
            'tanh_field': spec.pulses.tanh_field,
        }

    if spec.axis == 'N':
        values = ', '.join(str(int(v)) for v in spec.values)
    else:
        values = ', '.join(_fmt(v) for v in spec.values)
    sweep = {'axis': spec.axis, 'values': values, 'observable': spec.observable, 'threshold': _fmt(spec.threshold)}
    if spec.series_temperature:
        sweep['series_temperature'] = ', '.join(_fmt(t) for t in spec.series_temperature)
    if spec.series_h:
        sweep['series_h'] = ', '.join(_fmt(h) for h in spec.series_h)
    if spec.series_state:
        sweep['series_state'] = '; '.join(','.join(_fmt(c) for c in s.coefficients) for s in spec.series_state)
    if spec.series_pulse_period:
        sweep['series_pulse_period'] = ', '.join('off' if p is None else _fmt(p) for p in spec.series_pulse_period)
    if spec.window_start is not None:
        sweep['window_start'] = _fmt(spec.window_start)
    if spec.window_stop is not None:
        sweep['window_stop'] = _fmt(spec.window_stop)
    doc['sweep'] = sweep

    buffer = io.StringIO()
    buffer.write(f"# bathsim {VERSION}\n")
    doc.write(buffer)
    return buffer.getvalue()


def available_presets() -> List[str]:
    return sorted(path.stem for path in PRESET_DIR.glob('*.ini'))


def load_preset(name: str) -> SweepSpec:
    """Figure preset shipped in presets/<name>.ini"""
    path = PRESET_DIR / f"{name}.ini"
    if not path.exists():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(available_presets())}", key='preset')
    logger.info(f"Loading preset {name} from {path}")
    return parse_config(path.read_text())
