import json
import os
import pytest

from spar_gw.source.initial_gw import (
    ConfigError, get_all_config_params, get_internal_config_params, load_experiment_config, parse_subsample_size,
    parse_int_list, apply_overrides, default_params)
from spar_gw.source.dense_solvers_gw import PROXIMAL, ENTROPIC

PACKAGE_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'spar_gw')
SETTINGS = os.path.join(PACKAGE_DIR, 'settings.ini')
INTERNAL_SETTINGS = os.path.join(PACKAGE_DIR, 'settings_internal.ini')


def test_packaged_settings_parse():
    params = get_all_config_params(SETTINGS)
    assert params['default']['method'] == 'spar-gw'
    assert params['default']['seeds'] == list(range(10))
    assert params['Dataset']['n'] == 200
    assert params['Solver']['alpha'] is None
    assert params['Sampling']['s'] == '16n'
    internal = get_internal_config_params(INTERNAL_SETTINGS)
    assert internal['Sinkhorn']['floor'] == 1e-300
    assert internal['Sparse']['naive_size_limit'] == 1000
    assert internal['Benchmark']['trace_memory'] is True


def test_invalid_value_names_section_and_key(tmp_path):
    path = tmp_path / 'settings.ini'
    path.write_text('[DEFAULT]\nmethod = spar-gw\n\n[Solver]\nR = many\n')
    with pytest.raises(ConfigError, match=r'\[Solver\] R'):
        get_all_config_params(str(path))


def test_missing_settings_file(tmp_path):
    with pytest.raises(ConfigError):
        get_all_config_params(str(tmp_path / 'nope.ini'))


@pytest.mark.parametrize('value, n, expected', [('16n', 200, 3200), ('16*n', 10, 160), ('0.5n', 10, 5), ('3200', 7, 3200), (25, 7, 25)])
def test_parse_subsample_size(value, n, expected):
    assert parse_subsample_size(value, n) == expected


@pytest.mark.parametrize('value', ['many', '0', '-3n'])
def test_parse_subsample_size_rejects(value):
    with pytest.raises(ConfigError):
        parse_subsample_size(value, 10)


def test_parse_int_list():
    assert parse_int_list('0:3') == [0, 1, 2]
    assert parse_int_list('4, 7,9') == [4, 7, 9]
    assert parse_int_list([1, 2]) == [1, 2]
    assert parse_int_list(5) == [5]


def test_overrides_flat_and_sectioned():
    params = apply_overrides(default_params(), {'eps': '0.1', 'Sampling': {'mode': 'poisson'}, 'lam': None, 'seeds': '0:2'})
    assert params['Solver']['eps'] == 0.1
    assert params['Sampling']['mode'] == 'poisson'
    assert params['default']['seeds'] == [0, 1]
    with pytest.raises(ConfigError):
        apply_overrides(default_params(), {'unknown_key': 1})


def test_json_then_overrides(tmp_path):
    document = tmp_path / 'experiment.json'
    document.write_text(json.dumps({'method': 'pga-ugw', 'Solver': {'lambda': 2.0, 'eps': 0.5}}))
    cfg = load_experiment_config(SETTINGS, INTERNAL_SETTINGS, str(document), {'eps': 0.25})
    assert cfg.method == 'pga-ugw'
    assert cfg.lam == 2.0
    assert cfg.solver['eps'] == 0.25
    assert cfg.unbalanced and not cfg.sparse


def test_bad_json(tmp_path):
    document = tmp_path / 'experiment.json'
    document.write_text('{"method": ')
    with pytest.raises(ConfigError):
        load_experiment_config(experiment_json=str(document))


@pytest.mark.parametrize('overrides', [
    {'method': 'spar-ugw', 'alpha': 0.5},
    {'method': 'spar-gw', 'lam': 1.0},
    {'method': 'fgw', 'alpha': 1.5},
    {'method': 'magic'},
    {'cost': 'huber'},
    {'mode': 'stratified'},
    {'eps': 0.0},
    {'generator': 'files'},
])
def test_incompatible_parameters(overrides):
    with pytest.raises(ConfigError):
        load_experiment_config(overrides=overrides)


def test_solver_config_follows_method():
    cfg = load_experiment_config(overrides={'method': 'egw', 'regularizer': 'proximal'})
    assert cfg.solver_config().regularizer == ENTROPIC
    cfg = load_experiment_config(overrides={'method': 'spar-fgw'})
    solver = cfg.solver_config()
    assert solver.regularizer == PROXIMAL
    assert solver.alpha == 0.6 and solver.lam is None


def test_config_hash_ignores_seeds_and_output():
    cfg = load_experiment_config()
    assert cfg.config_hash() == cfg.replace(seeds='5:9', out_dir='elsewhere').config_hash()
    assert cfg.config_hash() != cfg.replace(eps=0.5).config_hash()
    assert cfg.subsample_size(10) == 160
