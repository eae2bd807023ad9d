import dataclasses
import json
import logging

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

import bathsim
import sweep_runner
from errors import ComputationError, ConfigError
from nonmarkov import fit_decay_laws
from sweep_config import available_presets, load_preset, parse_config, spec_to_config_text
from sweep_runner import RESULT_COLUMNS, emit, run_sweep

SMALL = """
[bath]
n_spins = 20
h = 0.9
epsilon = 0.1
temperature = 0.5

[state]
c1 = 0.3
c2 = -0.2
c3 = 0.4

[grid]
t_max = 10
n_points = 101

[sweep]
axis = h
values = 0.5, 0.9, 1.3
observable = quantumness
"""


def small(**overrides):
    return dataclasses.replace(parse_config(SMALL), **overrides)


class TestParseConfig:
    def test_defaults(self):
        spec = parse_config(SMALL)
        assert spec.j == 1.0 and spec.f == 0.0 and spec.kappa_b == 1.0
        assert spec.threshold == 1e-6
        assert spec.values == (0.5, 0.9, 1.3)
        assert spec.state0.coefficients == (0.3, -0.2, 0.4)
        assert spec.bath_params(0.5).beta == 2.0

    def test_empty_document_lists_required_keys(self):
        with pytest.raises(ConfigError) as excinfo:
            parse_config("")
        for key in ('bath.n_spins', 'bath.h', 'bath.epsilon', 'bath.temperature', 'sweep.axis', 'sweep.observable'):
            assert key in str(excinfo.value)

    def test_unknown_key(self):
        with pytest.raises(ConfigError) as excinfo:
            parse_config(SMALL.replace("epsilon = 0.1", "epsilon = 0.1\ngamma = 2"))
        assert excinfo.value.key == 'bath.gamma'
        assert excinfo.value.line == 6

    def test_unknown_section(self):
        with pytest.raises(ConfigError):
            parse_config(SMALL + "\n[plot]\ncolor = red\n")

    def test_syntax_error_line(self):
        with pytest.raises(ConfigError) as excinfo:
            parse_config("[bath]\nn_spins = 4\nthis line has no value\n")
        assert excinfo.value.line == 3

    def test_bad_number_names_key(self):
        with pytest.raises(ConfigError) as excinfo:
            parse_config(SMALL.replace("h = 0.9", "h = abc"))
        assert excinfo.value.key == 'bath.h'
        assert excinfo.value.line == 4

    def test_linear_range(self):
        spec = parse_config(SMALL.replace("values = 0.5, 0.9, 1.3", "start = 0\nstop = 1\ncount = 5"))
        assert_allclose(spec.values, [0.0, 0.25, 0.5, 0.75, 1.0])

    def test_rejects_odd_bath_size_on_axis(self):
        with pytest.raises(ConfigError):
            parse_config(SMALL.replace("axis = h", "axis = N").replace("0.5, 0.9, 1.3", "10, 15"))

    def test_rejects_zero_temperature_on_axis(self):
        with pytest.raises(ConfigError):
            parse_config(SMALL.replace("axis = h", "axis = T").replace("0.5, 0.9, 1.3", "0, 0.5"))

    def test_quantumness_needs_state(self):
        text = SMALL.replace("[state]\nc1 = 0.3\nc2 = -0.2\nc3 = 0.4\n", "")
        with pytest.raises(ConfigError):
            parse_config(text)
        assert parse_config(text.replace("observable = quantumness", "observable = echo")).state0 is None

    def test_partial_state(self):
        with pytest.raises(ConfigError):
            parse_config(SMALL.replace("c3 = 0.4\n", ""))

    def test_unphysical_state_needs_opt_in(self):
        text = SMALL.replace("c1 = 0.3\nc2 = -0.2\nc3 = 0.4", "c1 = 0.5\nc2 = 0.3\nc3 = 0.9")
        with pytest.raises(ConfigError):
            parse_config(text)
        spec = parse_config(text.replace("c3 = 0.9", "c3 = 0.9\nallow_unphysical = true"))
        assert not spec.state0.is_physical

    def test_axis_and_sub_series_clash(self):
        with pytest.raises(ConfigError):
            parse_config(SMALL.replace("observable = quantumness", "observable = quantumness\nseries_h = 1, 2"))


class TestPresets:
    def test_all_presets_ship(self):
        assert available_presets() == ['fig2a', 'fig2b', 'fig3a', 'fig3b', 'fig3c', 'fig5a', 'fig5b']

    def test_fig2a(self):
        spec = load_preset('fig2a')
        assert spec.n_spins == 1200 and spec.epsilon == 0.05
        assert spec.axis == 'h' and len(spec.values) == 101
        assert spec.values[0] == 0.5 and spec.values[-1] == 1.5
        assert spec.series_temperature == (0.001, 0.1, 0.5, 0.9)
        assert spec.observable == 'normalized_n'

    def test_fig2b(self):
        spec = load_preset('fig2b')
        assert spec.axis == 'N' and spec.values == tuple(float(n) for n in range(100, 1300, 100))
        assert spec.temperature == 0.001
        assert spec.bath_params(300.0, spec.variants[0]).n_spins == 300

    def test_fig3b(self):
        spec = load_preset('fig3b')
        assert spec.h == 1.0 and spec.observable == 'quantumness'
        assert [s.coefficients for s in spec.series_state] == [(0.5, 0.3, 0.9), (0.9, 0.3, 0.5), (0.9, 0.5, 0.3)]
        assert spec.bath_params(1.0).beta == 2.0

    def test_fig5a(self):
        spec = load_preset('fig5a')
        assert len(spec.variants) == 4
        pulsed = [v for v in spec.variants if spec.pulse_config(1.0, v) is not None]
        assert len(pulsed) == 2
        assert all(spec.pulse_config(1.0, v).period == 0.1 for v in pulsed)

    @pytest.mark.parametrize('name', ['fig2a', 'fig2b', 'fig3a', 'fig3b', 'fig3c', 'fig5a', 'fig5b'])
    def test_round_trip(self, name):
        spec = load_preset(name)
        assert parse_config(spec_to_config_text(spec)) == spec

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            load_preset('fig9')


class TestRunSweep:
    def test_uncoupled_echo_is_one(self):
        table = run_sweep(small(values=(0.1,), observable='echo', epsilon=0.0))
        assert list(table.columns) == RESULT_COLUMNS
        assert_allclose(table['value'], 1.0, atol=1e-12)
        assert (table['error'] == '').all()

    def test_series_row_count_and_order(self):
        table = run_sweep(small())
        assert len(table) == 3 * 101
        assert table['axis'].is_monotonic_increasing
        assert_allclose(table['t'].iloc[:101], np.linspace(0, 10, 101))

    def test_scalar_row_count(self):
        table = run_sweep(small(observable='normalized_n'))
        assert len(table) == 3
        assert table['t'].isna().all()
        assert table['value'].between(0, 1).all()

    def test_quasi_steady(self):
        table = run_sweep(small(observable='quasi_steady', window_start=2.0, window_stop=8.0))
        assert len(table) == 3
        assert (table['value'] <= 0.3 + 1e-12).all()

    def test_sub_series_columns(self):
        spec = load_preset('fig3b')
        table = run_sweep(dataclasses.replace(spec, t_max=2.0, n_points=21))
        value_columns = [c for c in table.columns if c.startswith('value')]
        assert value_columns == ['value[c=0.5,0.3,0.9]', 'value[c=0.9,0.3,0.5]', 'value[c=0.9,0.5,0.3]']
        assert_allclose(table['value[c=0.9,0.3,0.5]'].iloc[0], 0.5)

    def test_point_errors_are_recorded(self, monkeypatch):
        real = sweep_runner.trajectory

        def flaky(params, grid, pulses=None, threads=1):
            if params.h == 0.9:
                raise ComputationError("non-finite decoherence factor", t=1.0)
            return real(params, grid, pulses, threads)

        monkeypatch.setattr(sweep_runner, 'trajectory', flaky)
        table = run_sweep(small())
        failed = table[table['axis'] == 0.9]
        assert failed['value'].isna().all()
        assert failed['error'].str.contains('non-finite').all()
        assert (table[table['axis'] != 0.9]['error'] == '').all()

    def test_identical_across_worker_counts(self, tmp_path):
        outputs = []
        for threads in (1, 4, 1):
            path = tmp_path / f"run_{threads}_{len(outputs)}.csv"
            emit(run_sweep(small(), threads=threads), 'csv', path)
            outputs.append(path.read_bytes())
        assert outputs[0] == outputs[1] == outputs[2]


class TestEmit:
    def test_empty_table_is_header_only(self, tmp_path):
        path = tmp_path / 'empty.csv'
        emit(pd.DataFrame(), 'csv', path)
        assert path.read_text() == 'axis,t,observable,value,error\n'

    def test_one_row(self, tmp_path):
        path = tmp_path / 'one.csv'
        table = pd.DataFrame({'axis': [0.1], 't': [np.nan], 'observable': ['n_q'], 'value': [0.1], 'error': ['']})
        emit(table, 'csv', path)
        lines = path.read_text().splitlines()
        assert lines == ['axis,t,observable,value,error', '0.10000000000000001,,n_q,0.10000000000000001,']

    def test_values_round_trip(self, tmp_path):
        path = tmp_path / 'run.csv'
        table = run_sweep(small(values=(0.9,)))
        emit(table, 'csv', path)
        assert np.array_equal(pd.read_csv(path, float_precision='round_trip')['value'].to_numpy(), table['value'].to_numpy())

    def test_sidecar_reproduces_spec(self, tmp_path):
        spec = small()
        path = tmp_path / 'run.csv'
        emit(run_sweep(spec), 'csv', path)
        text = (tmp_path / 'run.csv.meta.ini').read_text()
        assert text.startswith('# bathsim ')
        assert parse_config(text) == spec

    def test_json_nests_by_axis_value(self, tmp_path):
        path = tmp_path / 'run.json'
        emit(run_sweep(small(observable='n_q')), 'json', path)
        data = json.loads(path.read_text())
        assert data['axis'] == 'h' and data['observable'] == 'n_q'
        assert [p['axis_value'] for p in data['points']] == [0.5, 0.9, 1.3]
        assert isinstance(data['points'][0]['values']['value'], float)

    def test_unwritable_destination(self, tmp_path):
        with pytest.raises(ConfigError) as excinfo:
            emit(pd.DataFrame(), 'csv', tmp_path / 'missing' / 'out.csv')
        assert 'missing' in str(excinfo.value)


class TestCommandLine:
    def test_sweep(self, tmp_path):
        config = tmp_path / 'small.ini'
        config.write_text(SMALL)
        out = tmp_path / 'out.csv'
        assert bathsim.main(['sweep', '--config', str(config), '--out', str(out), '--threads', '2']) == 0
        assert len(pd.read_csv(out)) == 3 * 101

    def test_grid_overrides(self, tmp_path):
        config = tmp_path / 'small.ini'
        config.write_text(SMALL)
        out = tmp_path / 'out.csv'
        assert bathsim.main(['sweep', '-c', str(config), '-o', str(out), '--t-max', '5', '--points', '11']) == 0
        assert len(pd.read_csv(out)) == 3 * 11

    def test_trajectory(self, tmp_path):
        config = tmp_path / 'small.ini'
        config.write_text(SMALL)
        out = tmp_path / 'traj.csv'
        assert bathsim.main(['trajectory', '--config', str(config), '--out', str(out)]) == 0
        table = pd.read_csv(out)
        assert list(table.columns) == ['t', 're', 'im', 'abs', 'echo', 'quantumness']
        assert len(table) == 101

    def test_trajectory_of_classical_state(self, tmp_path):
        config = tmp_path / 'classical.ini'
        config.write_text(SMALL.replace("c1 = 0.3\nc2 = -0.2\nc3 = 0.4", "c1 = 0\nc2 = 0\nc3 = 0.7"))
        out = tmp_path / 'traj.csv'
        assert bathsim.main(['trajectory', '--config', str(config), '--out', str(out)]) == 0
        assert (pd.read_csv(out)['quantumness'] == 0.0).all()

    def test_trajectory_json_is_exact_and_has_sidecar(self, tmp_path):
        config = tmp_path / 'small.ini'
        config.write_text(SMALL)
        csv_out = tmp_path / 'traj.csv'
        json_out = tmp_path / 'traj.json'
        assert bathsim.main(['trajectory', '-c', str(config), '-o', str(csv_out)]) == 0
        assert bathsim.main(['trajectory', '-c', str(config), '-o', str(json_out), '-f', 'json']) == 0
        table = pd.read_csv(csv_out, float_precision='round_trip')
        data = json.loads(json_out.read_text())
        assert list(data) == list(table.columns)
        for column in table.columns:
            assert np.array_equal(np.array(data[column]), table[column].to_numpy())
        assert parse_config((tmp_path / 'traj.json.meta.ini').read_text()) == parse_config(SMALL)

    def test_failed_points_exit_code(self, tmp_path, monkeypatch):
        def failing(params, grid, pulses=None, threads=1):
            raise ComputationError("non-finite decoherence factor", t=0.5)

        monkeypatch.setattr(sweep_runner, 'trajectory', failing)
        config = tmp_path / 'small.ini'
        config.write_text(SMALL)
        out = tmp_path / 'out.csv'
        assert bathsim.main(['sweep', '--config', str(config), '--out', str(out)]) == 3
        table = pd.read_csv(out, keep_default_na=False)
        assert table['error'].str.contains('non-finite').all()

    def test_decay_fit_is_logged_for_size_sweeps(self, caplog):
        spec = small(axis='N', values=(10.0, 20.0, 40.0, 80.0), observable='n_q')
        table = pd.DataFrame({'axis': [10.0, 20.0, 40.0, 80.0], 'value': [0.5, 0.25, 0.0625, 0.00390625]})
        caplog.set_level(logging.INFO)
        bathsim.log_decay_fits(spec, table)
        assert 'exponential' in caplog.text

    def test_config_error_exit_code(self, tmp_path):
        config = tmp_path / 'bad.ini'
        config.write_text("[bath]\nn_spins = 3\n")
        assert bathsim.main(['sweep', '--config', str(config), '--out', str(tmp_path / 'x.csv')]) == 2

    def test_needs_config_or_preset(self):
        assert bathsim.main(['sweep']) == 2


@pytest.mark.slow
class TestFigures:
    def test_critical_dip(self):
        spec = dataclasses.replace(load_preset('fig2a'), values=(0.7, 1.0, 1.3), series_temperature=(0.001,))
        table = run_sweep(spec, threads=3)
        n = dict(zip(table['axis'], table['value[T=0.001]']))
        assert n[1.0] * 2 <= n[0.7]
        assert n[1.0] * 2 <= n[1.3]

    def test_faster_pulses_keep_more_quantumness(self):
        spec = dataclasses.replace(load_preset('fig5b'), observable='quasi_steady', window_start=5.0, window_stop=30.0)
        row = run_sweep(spec).iloc[0]
        assert row['value[pulse=0.1]'] > row['value[pulse=0.4]'] > row['value[pulse=off]']

    def test_pulse_protection_is_robust_to_temperature(self):
        spec = dataclasses.replace(load_preset('fig5a'), observable='quasi_steady', window_start=5.0, window_stop=30.0)
        row = run_sweep(spec).iloc[0]
        cold = row['value[T=0.001;pulse=0.1]']
        hot = row['value[T=5;pulse=0.1]']
        assert abs(cold - hot) / cold < 0.2

    def test_preset_output_is_deterministic(self, tmp_path):
        outputs = []
        for threads in (1, 4, 8):
            path = tmp_path / f"fig3b_{threads}.csv"
            emit(run_sweep(load_preset('fig3b'), threads=threads), 'csv', path)
            outputs.append(path.read_bytes())
        assert outputs[0] == outputs[1] == outputs[2]

    @pytest.mark.parametrize('name', ['fig3a', 'fig3b', 'fig3c'])
    def test_fig3_has_three_value_columns(self, name):
        spec = dataclasses.replace(load_preset(name), t_max=5.0, n_points=51)
        table = run_sweep(spec)
        assert sum(c.startswith('value[') for c in table.columns) == 3

    def test_size_scaling_is_exponential_only_at_criticality(self):
        table = run_sweep(load_preset('fig2b'), threads=8)
        critical = fit_decay_laws(table['axis'], table['value[h=1]'])
        assert critical['preferred'] == 'exponential'
        assert critical['residual_ratio'] >= 2
        weak = fit_decay_laws(table['axis'], table['value[h=0.5]'])
        assert weak['preferred'] == 'polynomial'
        assert weak['residual_ratio'] <= 0.5
