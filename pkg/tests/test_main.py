import os
import numpy as np
import pandas as pd
import pytest

from spar_gw.__main__ import main, build_parser, EXIT_OK, EXIT_CONFIG_ERROR, EXIT_PARTIAL_FAILURE
from spar_gw.source.universal_io import ingest_matrix, read_json

FAST = ['--n', '12', '--R', '3', '--H', '10', '--eps', '0.05']


@pytest.fixture(autouse=True)
def single_worker(monkeypatch):
    monkeypatch.setenv('SPARGW_THREADS', '1')


def test_run_writes_tables(tmp_path):
    code = main(['run', '--seeds', '0:2', '--out', str(tmp_path)] + FAST)
    assert code == EXIT_OK
    runs = pd.read_csv(tmp_path / 'runs.csv', keep_default_na=False)
    assert runs['seed'].tolist() == [0, 1]
    assert os.path.isfile(tmp_path / 'summary.csv')
    assert read_json(str(tmp_path / 'run.json'))['command'] == 'run'


def test_incompatible_flags_exit_with_config_error(tmp_path, capsys):
    code = main(['run', '--method', 'spar-ugw', '--alpha', '0.5', '--out', str(tmp_path)] + FAST)
    assert code == EXIT_CONFIG_ERROR
    assert 'alpha' in capsys.readouterr().err
    assert not os.path.exists(tmp_path / 'runs.csv')


def test_missing_settings_file(tmp_path):
    code = main(['run', '--settings', str(tmp_path / 'nope.ini'), '--out', str(tmp_path)])
    assert code == EXIT_CONFIG_ERROR


def test_infeasible_runs_are_partial_failures(tmp_path):
    code = main(['run', '--s', '2', '--max-retries', '0', '--seeds', '0', '--out', str(tmp_path)] + FAST)
    assert code == EXIT_PARTIAL_FAILURE
    runs = pd.read_csv(tmp_path / 'runs.csv', keep_default_na=False)
    assert runs['error'].iloc[0].startswith('InfeasibleKernel')


def test_gen_then_run_from_files(tmp_path):
    data = tmp_path / 'data'
    assert main(['gen', '--generator', 'spiral', '--n', '10', '--out', str(data)]) == EXIT_OK
    for name in ('source_relation.csv', 'target_relation.csv', 'source_weights.csv', 'target_weights.csv', 'dataset.json'):
        assert os.path.isfile(data / name)
    code = main(['run', '--generator', 'files', '--method', 'pga-gw', '--seeds', '0',
                 '--source-relation', str(data / 'source_relation.csv'),
                 '--target-relation', str(data / 'target_relation.csv'),
                 '--out', str(tmp_path / 'run'), '--R', '3', '--H', '10'])
    assert code == EXIT_OK


def test_gen_unbalanced_weights(tmp_path):
    assert main(['gen', '--unbalanced', '--n', '8', '--out', str(tmp_path)]) == EXIT_OK
    weights = pd.read_csv(tmp_path / 'source_weights.csv', header=None)[0]
    assert (weights > 0).all()


def test_sweep(tmp_path):
    code = main(['sweep', '--variable', 's', '--values', '8n,16n', '--seeds', '0', '--out', str(tmp_path)] + FAST)
    assert code == EXIT_OK
    table = pd.read_csv(tmp_path / 'sweep.csv', keep_default_na=False)
    assert table['value'].tolist() == ['8n', '16n']


def test_pairwise_then_similarity(tmp_path):
    code = main(['pairwise', '--generate', '3', '--n', '10', '--method', 'pga-gw', '--seeds', '0',
                 '--R', '3', '--H', '10', '--out', str(tmp_path)])
    assert code == EXIT_OK
    D = ingest_matrix(str(tmp_path / 'distances.csv'), kind='feature')
    assert D.shape == (3, 3)
    np.testing.assert_array_equal(np.diag(D), 0.0)

    code = main(['similarity', '--distances', str(tmp_path / 'distances.csv'), '--gamma', '0.5',
                 '--out', str(tmp_path / 'sim')])
    assert code == EXIT_OK
    S = ingest_matrix(str(tmp_path / 'sim' / 'similarity.csv'), kind='feature')
    np.testing.assert_allclose(S, np.exp(-D / 0.5))


def test_pairwise_needs_a_collection(tmp_path):
    assert main(['pairwise', '--out', str(tmp_path)]) == EXIT_CONFIG_ERROR


def test_similarity_rejects_bad_gamma(tmp_path):
    path = tmp_path / 'D.csv'
    path.write_text('0,1\n1,0\n')
    assert main(['similarity', '--distances', str(path), '--gamma', '0', '--out', str(tmp_path)]) == EXIT_CONFIG_ERROR


def test_parser_rejects_unknown_method():
    with pytest.raises(SystemExit):
        build_parser().parse_args(['run', '--method', 'magic'])


def test_gen_unbalanced_keeps_fused_settings(tmp_path):
    document = tmp_path / 'experiment.json'
    document.write_text('{"method": "spar-fgw", "alpha": 0.5}')
    code = main(['gen', '--unbalanced', '--config', str(document), '--n', '8', '--out', str(tmp_path)])
    assert code == EXIT_OK
    manifest = read_json(str(tmp_path / 'dataset.json'))
    assert manifest['mode'] == 'unbalanced'
    assert os.path.isfile(tmp_path / 'feature_cost.csv')
