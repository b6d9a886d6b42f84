import os
import sys
import argparse
import numpy as np

from spar_gw.source.core_types_gw import GWError, BALANCED, UNBALANCED
from spar_gw.source.initial_gw import ConfigError, ParseError, METHODS, GENERATORS, SWEEP_VARIABLES, load_experiment_config
from spar_gw.source.spar_solvers_gw import SAMPLING_MODES
from spar_gw.source.universal_io import GW_derivative, write_derivatives, ingest_matrix
from spar_gw.spar_gw_pipeline import (
    export_dataset, run_experiment, error_sweep, load_collection, generate_collection, pairwise_distances,
    similarity_matrix)

PACKAGE_DIR = os.path.dirname(os.path.abspath(__file__))
DEFAULT_SETTINGS = os.path.join(PACKAGE_DIR, 'settings.ini')
DEFAULT_INTERNAL_SETTINGS = os.path.join(PACKAGE_DIR, 'settings_internal.ini')

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_PARTIAL_FAILURE = 2


def _add_settings_args(parser):
    parser.add_argument('--settings', default=DEFAULT_SETTINGS, help='settings.ini (default: the packaged one)')
    parser.add_argument('--internal-settings', default=DEFAULT_INTERNAL_SETTINGS, help='settings_internal.ini')
    parser.add_argument('--config', default=None, help='JSON experiment document; overrides settings.ini')
    parser.add_argument('--out', dest='out_dir', default=None, help='Output directory')


def _add_dataset_args(parser):
    parser.add_argument('--generator', choices=GENERATORS, default=None)
    parser.add_argument('--n', type=int, default=None, help='Points or nodes per side')
    parser.add_argument('--data-seed', dest='seed', type=int, default=None, help='Seed of the data generator')
    parser.add_argument('--noise', type=float, default=None, help='Moon noise level')
    parser.add_argument('--weights', choices=('uniform', 'gaussian'), default=None)
    parser.add_argument('--bandwidth', type=float, default=None)
    parser.add_argument('--source-relation', dest='source_relation', default=None)
    parser.add_argument('--target-relation', dest='target_relation', default=None)
    parser.add_argument('--source-weights', dest='source_weights', default=None)
    parser.add_argument('--target-weights', dest='target_weights', default=None)
    parser.add_argument('--feature-cost', dest='feature_cost', default=None)


def _add_solver_args(parser):
    parser.add_argument('--method', choices=list(METHODS), default=None)
    parser.add_argument('--cost', choices=('l1', 'l2', 'kl'), default=None)
    parser.add_argument('--regularizer', choices=('entropic', 'proximal'), default=None)
    parser.add_argument('--eps', type=float, default=None)
    parser.add_argument('--lambda', dest='lam', type=float, default=None)
    parser.add_argument('--alpha', type=float, default=None)
    parser.add_argument('--s', default=None, help="Subsample size, absolute or a multiple of n such as '16n'")
    parser.add_argument('--mode', choices=SAMPLING_MODES, default=None)
    parser.add_argument('--seeds', default=None, help="Comma separated seeds or a range such as '0:10'")
    parser.add_argument('--R', type=int, default=None, help='Outer rounds')
    parser.add_argument('--H', type=int, default=None, help='Sinkhorn rounds per outer round')
    parser.add_argument('--max-retries', dest='max_retries', type=int, default=None)
    parser.add_argument('--verbose', action='store_true', default=None)


OVERRIDE_KEYS = (
    'out_dir', 'generator', 'n', 'seed', 'noise', 'weights', 'bandwidth', 'source_relation', 'target_relation',
    'source_weights', 'target_weights', 'feature_cost', 'method', 'cost', 'regularizer', 'eps', 'lam', 'alpha', 's',
    'mode', 'seeds', 'R', 'H', 'max_retries', 'verbose', 'variable', 'values', 'gamma')


def _overrides(args) -> dict:
    return {key: getattr(args, key) for key in OVERRIDE_KEYS if getattr(args, key, None) is not None}


def _load(args):
    return load_experiment_config(args.settings, args.internal_settings, args.config, _overrides(args))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='spar-gw', description='Sparsified Gromov-Wasserstein solvers and benchmark harness.')
    commands = parser.add_subparsers(dest='command', required=True)

    gen = commands.add_parser('gen', help='Generate a dataset and write it as CSV')
    _add_settings_args(gen)
    _add_dataset_args(gen)
    gen.add_argument('--unbalanced', action='store_true', help='Write unbalanced weights')

    run = commands.add_parser('run', help='Run one method over the seeds')
    _add_settings_args(run)
    _add_dataset_args(run)
    _add_solver_args(run)

    sweep = commands.add_parser('sweep', help='Error against the dense oracle as n, s or eps changes')
    _add_settings_args(sweep)
    _add_dataset_args(sweep)
    _add_solver_args(sweep)
    sweep.add_argument('--variable', choices=SWEEP_VARIABLES, default=None)
    sweep.add_argument('--values', default=None, help="Comma separated grid, e.g. '2n,4n,8n'")

    pairwise = commands.add_parser('pairwise', help='Pairwise distance matrix of a collection')
    _add_settings_args(pairwise)
    _add_solver_args(pairwise)
    pairwise.add_argument('--collection', default=None, help='JSON list of {relation, weights, features} file paths')
    pairwise.add_argument('--generate', type=int, default=None, help='Generate this many random instances instead')
    pairwise.add_argument('--generator', choices=('graph', 'moon', 'gaussian', 'spiral'), default='graph')
    pairwise.add_argument('--n', type=int, default=None)
    pairwise.add_argument('--data-seed', dest='seed', type=int, default=None)

    similarity = commands.add_parser('similarity', help='Similarity matrix exp(-D / gamma) from a distance CSV')
    _add_settings_args(similarity)
    similarity.add_argument('--distances', required=True, help='Distance matrix CSV')
    similarity.add_argument('--gamma', type=float, default=None)
    return parser


def cmd_gen(args) -> int:
    export_dataset(_load(args), unbalanced=True if args.unbalanced else None)
    return EXIT_OK


def cmd_run(args) -> int:
    records, _ = run_experiment(_load(args))
    return EXIT_PARTIAL_FAILURE if (records['error'] != '').any() else EXIT_OK


def cmd_sweep(args) -> int:
    table = error_sweep(_load(args))
    failed = (table['n_failed'] > 0).any() or (table['oracle_error'] != '').any()
    return EXIT_PARTIAL_FAILURE if failed else EXIT_OK


def cmd_pairwise(args) -> int:
    cfg = _load(args)
    mode = UNBALANCED if cfg.unbalanced else BALANCED
    if args.collection:
        collection = load_collection(args.collection, mode)
    elif args.generate:
        collection = generate_collection(args.generate, cfg.dataset['n'], cfg.dataset['seed'], args.generator, mode)
    else:
        raise ConfigError('pairwise needs --collection or --generate.')
    D = pairwise_distances(collection, cfg)
    return EXIT_PARTIAL_FAILURE if np.isnan(D).any() else EXIT_OK


def cmd_similarity(args) -> int:
    cfg = _load(args)
    D = ingest_matrix(args.distances, kind='feature')
    S = similarity_matrix(D, cfg.similarity['gamma'])
    write_derivatives([GW_derivative(S, 'similarity', 'matrix', 'exp(-D / gamma)')], cfg.out_dir)
    return EXIT_PARTIAL_FAILURE if np.isnan(D).any() else EXIT_OK


COMMANDS = {'gen': cmd_gen, 'run': cmd_run, 'sweep': cmd_sweep, 'pairwise': cmd_pairwise, 'similarity': cmd_similarity}


def main(argv=None) -> int:

    args = build_parser().parse_args(argv)
    print('___SPAR GW___: ', 'Running', args.command)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ParseError) as e:
        print('___SPAR GW___: ', 'Configuration error:', e, file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except GWError as e:
        print('___SPAR GW___: ', '%s: %s' % (type(e).__name__, e), file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
