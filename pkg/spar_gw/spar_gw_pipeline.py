import os
import time
import hashlib
import warnings
import tracemalloc
import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from spar_gw.source.core_types_gw import (
    GWError, InfeasibleKernel, InvalidGamma, GWProblem, validate_problem, get_ground_cost, as_array, BALANCED, UNBALANCED)
from spar_gw.source.initial_gw import (
    ConfigError, ExperimentConfig, ORACLES, DEFAULT_SWEEP_VALUES, load_experiment_config, parse_subsample_size)
from spar_gw.source.datagen_gw import (
    gen_moon, gen_powerlaw_graph, gen_gaussian_mixture, gen_spiral, gen_gaussian_features, euclidean_relation,
    feature_relation, uniform_distribution, gaussian_weights)
from spar_gw.source.dense_solvers_gw import solve_gw_dense, solve_fgw_dense, solve_ugw_dense, naive_plan_value
from spar_gw.source.spar_solvers_gw import solve_spar_gw, solve_spar_fgw, solve_spar_ugw
from spar_gw.source.universal_io import GW_derivative, write_derivatives, ingest_matrix, ingest_weights, read_json

RETRY_SEED_STRIDE = 1_000_003
SPARGW_THREADS = 'SPARGW_THREADS'


class Dataset:

    """
    Problem instance as the harness passes it around.

    Attributes
    ----------
    problem : GWProblem
        Distributions and relation matrices.
    M : np.ndarray or None
        Feature cost for fused methods.
    name : str
        Human readable provenance.
    points : tuple or None
        (source, target) coordinates for point-cloud generators.
    info : dict
        Generator parameters, written to the dataset manifest.

    """

    def __init__(self, problem: GWProblem, M: np.ndarray = None, name: str = '', points: tuple = None, info: dict = None):
        self.problem = problem
        self.M = M
        self.name = name
        self.points = points
        self.info = info if info is not None else {}

    @property
    def n(self):
        return max(self.problem.shape)

    def __repr__(self):
        return 'Dataset(%s, shape=%s, fused=%s)' % (self.name, self.problem.shape, self.M is not None)


class RunRecord:

    """
    One row of the run table: result of one (config, seed) cell.

    Attributes
    ----------
    config_hash : str
        ExperimentConfig.config_hash().
    method : str
        Solver name.
    seed : int
        Requested seed.
    effective_seed : int
        Seed of the draw that succeeded (differs after retries).
    retries : int
        Number of re-draws after InfeasibleKernel.
    distance : float
        Estimate, NaN on failure.
    seconds : float
        Wall time of the solver call.
    peak_memory_bytes : int
        Peak traced allocation above the level before the call.
    n_iter : int
        Outer rounds run.
    support_size : int
        Distinct sampled cells (m n for dense methods).
    error : str
        Empty on success, else 'ErrorClass: message'.

    """

    FIELDS = ('config_hash', 'method', 'seed', 'effective_seed', 'retries', 'distance', 'seconds',
              'peak_memory_bytes', 'n_iter', 'support_size', 'error')

    def __init__(self, config_hash: str, method: str, seed: int, effective_seed: int = None, retries: int = 0,
                 distance: float = float('nan'), seconds: float = float('nan'), peak_memory_bytes: int = 0,
                 n_iter: int = 0, support_size: int = 0, error: str = ''):
        self.config_hash = config_hash
        self.method = method
        self.seed = seed
        self.effective_seed = seed if effective_seed is None else effective_seed
        self.retries = retries
        self.distance = distance
        self.seconds = seconds
        self.peak_memory_bytes = peak_memory_bytes
        self.n_iter = n_iter
        self.support_size = support_size
        self.error = error

    @property
    def ok(self):
        return self.error == ''

    def as_dict(self) -> dict:
        return {field: getattr(self, field) for field in self.FIELDS}

    def __repr__(self):
        return 'RunRecord(%s, seed=%d, distance=%.10g%s)' % (self.method, self.seed, self.distance, ', error' if self.error else '')


def n_workers(cfg: ExperimentConfig = None) -> int:

    """Worker count: settings_internal max_workers (-1 = all cores), capped by SPARGW_THREADS."""

    workers = -1 if cfg is None else cfg.internal['Parallel']['max_workers']
    if workers is None or workers < 1:
        workers = os.cpu_count() or 1
    cap = os.environ.get(SPARGW_THREADS, '').strip()
    if cap:
        try:
            workers = min(workers, max(1, int(cap)))
        except ValueError:
            raise ConfigError('%s must be an integer, got %r.' % (SPARGW_THREADS, cap))
    return workers


# Datasets

def _weights(points, cfg: ExperimentConfig, mode: str):
    if cfg.dataset['weights'] == 'gaussian':
        return gaussian_weights(points, cfg.dataset['bandwidth'], mode)
    return uniform_distribution(points.n, mode)


def _feature_cost(cfg: ExperimentConfig, m: int, n: int, seed: int):
    if cfg.dataset['feature_cost']:
        return ingest_matrix(cfg.dataset['feature_cost'], kind='feature')
    X, Y = gen_gaussian_features(max(m, n), seed)
    return feature_relation(X[:m], Y[:n])


def build_dataset(cfg: ExperimentConfig, n: int = None, unbalanced: bool = None) -> Dataset:

    """
    Generate or read the problem instance described by cfg's [Dataset] section.

    Parameters
    ----------
    cfg : ExperimentConfig
        Resolved configuration.
    n : int, optional
        Size override (sweeps over n).
    unbalanced : bool, optional
        Weight mode override; by default it follows cfg's method.

    Returns
    -------
    Dataset

    """

    data = cfg.dataset
    generator = data['generator']
    n = data['n'] if n is None else n
    seed = data['seed']
    if unbalanced is None:
        unbalanced = cfg.unbalanced
    mode = UNBALANCED if unbalanced else BALANCED
    info = {'generator': generator, 'n': n, 'seed': seed, 'weights': data['weights'], 'mode': mode}
    points = None

    if generator == 'files':
        Cx = ingest_matrix(data['source_relation'])
        Cy = ingest_matrix(data['target_relation'])
        a = ingest_weights(data['source_weights'], mode) if data['source_weights'] else uniform_distribution(Cx.n, mode)
        b = ingest_weights(data['target_weights'], mode) if data['target_weights'] else uniform_distribution(Cy.n, mode)
        info.update({'n': [Cx.n, Cy.n], 'source_relation': data['source_relation'], 'target_relation': data['target_relation']})
    elif generator == 'graph':
        source, target = gen_powerlaw_graph(n, seed), gen_powerlaw_graph(n, seed + 1)
        Cx, Cy = source.adjacency, target.adjacency
        a, b = uniform_distribution(n, mode), uniform_distribution(n, mode)
    else:
        if generator == 'moon':
            info['noise'] = data['noise']
            source, target = gen_moon(n, seed, data['noise'])
        elif generator == 'gaussian':
            source, target = gen_gaussian_mixture(n, seed)
        else:
            source, target = gen_spiral(n, seed)
        points = (source.points, target.points)
        Cx, Cy = euclidean_relation(source), euclidean_relation(target)
        a, b = _weights(source, cfg, mode), _weights(target, cfg, mode)

    problem = validate_problem(a, b, Cx, Cy)
    M = _feature_cost(cfg, problem.a.n, problem.b.n, seed) if cfg.fused else None
    return Dataset(problem, M, name='%s-%s' % (generator, info['n']), points=points, info=info)


def export_dataset(cfg: ExperimentConfig, out_dir: str = None, unbalanced: bool = None) -> list:

    """
    Write the dataset of cfg (relations, weights, points, feature cost) and a JSON manifest.

    Returns
    -------
    list of str
        Written file paths.

    """

    out_dir = out_dir or cfg.out_dir
    print('___SPAR GW___: ', 'Generating dataset', cfg.dataset['generator'], 'n =', cfg.dataset['n'])
    dataset = build_dataset(cfg, unbalanced=unbalanced)
    problem = dataset.problem

    derivs = [
        GW_derivative(problem.Cx, 'source_relation', 'matrix', 'Source relation matrix'),
        GW_derivative(problem.Cy, 'target_relation', 'matrix', 'Target relation matrix'),
        GW_derivative(problem.a, 'source_weights', 'weights', 'Source weights'),
        GW_derivative(problem.b, 'target_weights', 'weights', 'Target weights')]
    if dataset.points is not None:
        derivs.append(GW_derivative(dataset.points[0], 'source_points', 'matrix', 'Source point coordinates'))
        derivs.append(GW_derivative(dataset.points[1], 'target_points', 'matrix', 'Target point coordinates'))
    if dataset.M is not None:
        derivs.append(GW_derivative(dataset.M, 'feature_cost', 'matrix', 'Feature cost between source and target nodes'))

    manifest = dict(dataset.info)
    manifest.update({
        'shape': list(problem.shape),
        'files': {d.name: d.name + d.extension for d in derivs},
        'descriptions': {d.name: d.description_for_user for d in derivs}})
    derivs.append(GW_derivative(manifest, 'dataset', 'json', 'Dataset manifest'))
    return write_derivatives(derivs, out_dir)


# Solving

def solve(method: str, dataset: Dataset, cfg: ExperimentConfig, seed: int, s: int = None):

    """Run one method on one dataset with one seed and return the GwResult."""

    problem, M = dataset.problem, dataset.M
    L = get_ground_cost(cfg.cost)
    solver_cfg = cfg.solver_config()
    mode = cfg.sampling['mode']
    if s is None:
        s = cfg.subsample_size(dataset.n)

    if method in ('egw', 'pga-gw'):
        return solve_gw_dense(problem, L, solver_cfg)
    if method == 'fgw':
        return solve_fgw_dense(problem, M, L, solver_cfg)
    if method in ('eugw', 'pga-ugw'):
        return solve_ugw_dense(problem, L, cfg.lam, solver_cfg)
    if method == 'spar-gw':
        return solve_spar_gw(problem, L, solver_cfg, s, mode, seed)
    if method == 'spar-fgw':
        return solve_spar_fgw(problem, M, L, cfg.alpha, solver_cfg, s, mode, seed)
    if method == 'spar-ugw':
        return solve_spar_ugw(problem, L, cfg.lam, solver_cfg, s, mode, seed)
    if method == 'naive':
        return naive_plan_value(problem, L, lam=cfg.lam if cfg.unbalanced else None, M=M, alpha=cfg.alpha if cfg.fused else None,
                                size_limit=solver_cfg.naive_size_limit)
    raise ConfigError('Unknown method %r.' % method)


def _traced_peak(method: str, dataset: Dataset, cfg: ExperimentConfig, seed: int, s: int) -> int:

    """Peak traced allocation of one solver call above the level at its start."""

    started_tracing = not tracemalloc.is_tracing()
    if started_tracing:
        tracemalloc.start()
    tracemalloc.reset_peak()
    initial, _ = tracemalloc.get_traced_memory()
    try:
        solve(method, dataset, cfg, seed, s)
        _, peak = tracemalloc.get_traced_memory()
    finally:
        if started_tracing:
            tracemalloc.stop()
    return max(0, peak - initial)


def _measured(method: str, dataset: Dataset, cfg: ExperimentConfig, seed: int, s: int):

    """
    Solver call with wall time, then peak memory from a second, traced call.

    The timed call always runs untraced.
    """

    start_time = time.perf_counter()
    result = solve(method, dataset, cfg, seed, s)
    seconds = time.perf_counter() - start_time
    peak = _traced_peak(method, dataset, cfg, seed, s) if cfg.internal['Benchmark']['trace_memory'] else 0
    return result, seconds, peak


def run_single(cfg: ExperimentConfig, dataset: Dataset, seed: int, method: str = None, s: int = None) -> RunRecord:

    """
    One (config, seed) cell. Solver errors are caught and recorded, never raised.

    Sampling methods re-draw with seed + k * 1000003 (k = 1..max_retries) after InfeasibleKernel.
    """

    method = method or cfg.method
    record = RunRecord(cfg.config_hash(), method, seed)
    max_retries = cfg.sampling['max_retries'] if cfg.sparse else 0

    for k in range(max_retries + 1):
        effective_seed = seed + k * RETRY_SEED_STRIDE
        try:
            result, seconds, peak = _measured(method, dataset, cfg, effective_seed, s)
        except InfeasibleKernel as e:
            record.error = '%s: %s' % (type(e).__name__, e)
            if k < max_retries:
                warnings.warn('Seed %d left a row or column without kernel mass, re-drawing with seed %d.' % (effective_seed, effective_seed + RETRY_SEED_STRIDE))
            continue
        except GWError as e:
            record.error = '%s: %s' % (type(e).__name__, e)
            break
        except Exception as e:
            # anything else a solver or worker raises fails this seed only
            record.error = '%s: %s' % (type(e).__name__, e)
            break

        record.effective_seed = effective_seed
        record.retries = k
        record.distance = result.distance
        record.seconds = seconds
        record.peak_memory_bytes = int(peak)
        record.n_iter = result.n_iter
        record.support_size = int(result.extras.get('support_size', dataset.problem.shape[0] * dataset.problem.shape[1]))
        record.error = ''
        break

    if record.error:
        print('___SPAR GW___: ', 'Run', method, 'seed', seed, 'failed:', record.error)
    return record


def _records_frame(records: list) -> pd.DataFrame:
    return pd.DataFrame([r.as_dict() for r in records], columns=RunRecord.FIELDS)


def summarize_records(records: pd.DataFrame) -> pd.DataFrame:

    """
    Summary row per (config_hash, method): mean and sample standard deviation of the successful distances.
    """

    rows = []
    for (config_hash, method), group in records.groupby(['config_hash', 'method'], sort=False):
        ok = group[group['error'].fillna('') == '']
        rows.append({
            'config_hash': config_hash,
            'method': method,
            'n_runs': len(group),
            'n_ok': len(ok),
            'mean_distance': ok['distance'].mean(),
            'std_distance': ok['distance'].std(),
            'mean_seconds': ok['seconds'].mean(),
            'max_peak_memory_bytes': ok['peak_memory_bytes'].max() if len(ok) else 0})
    return pd.DataFrame(rows)


def _run_cells(cfg: ExperimentConfig, cells: list, n_jobs: int = None) -> list:

    """Evaluate (cfg, dataset, seed, method, s) cells in parallel; order of the output follows cells."""

    n_jobs = n_workers(cfg) if n_jobs is None else n_jobs
    if n_jobs == 1 or len(cells) == 1:
        return [run_single(*cell) for cell in cells]
    return Parallel(n_jobs=n_jobs)(delayed(run_single)(*cell) for cell in cells)


def _run_manifest(cfg: ExperimentConfig, command: str, extra: dict = None) -> dict:
    manifest = {'command': command, 'config_hash': cfg.config_hash(), 'config': cfg.as_dict(), 'seeds': cfg.seeds}
    if extra:
        manifest.update(extra)
    return manifest


def run_experiment(cfg: ExperimentConfig, dataset: Dataset = None, n_jobs: int = None, write: bool = True):

    """
    Run cfg's method once per seed.

    Parameters
    ----------
    cfg : ExperimentConfig
        Resolved configuration.
    dataset : Dataset, optional
        Instance to use; built from cfg if None.
    n_jobs : int, optional
        Worker count; n_workers(cfg) if None.
    write : bool
        Write runs.csv, summary.csv and run.json into cfg.out_dir.

    Returns
    -------
    records : pd.DataFrame
        One row per seed (RunRecord fields).
    summary : pd.DataFrame
        Mean / std of the distance.

    """

    print('___SPAR GW___: ', 'Starting run:', cfg)
    start_time = time.time()
    if dataset is None:
        dataset = build_dataset(cfg)

    records = _records_frame(_run_cells(cfg, [(cfg, dataset, seed) for seed in cfg.seeds], n_jobs))
    summary = summarize_records(records)
    print('___SPAR GW___: ', "Finished run. --- Execution %s seconds ---" % (time.time() - start_time))

    if write:
        write_derivatives([
            GW_derivative(records, 'runs', 'df', 'One row per seed'),
            GW_derivative(summary, 'summary', 'df', 'Mean and standard deviation over seeds'),
            GW_derivative(_run_manifest(cfg, 'run', {'dataset': dataset.info}), 'run', 'json', 'Resolved configuration')],
            cfg.out_dir)
    return records, summary


def _sweep_override(variable: str, value: str) -> dict:
    if variable == 'n':
        return {'n': int(value)}
    if variable == 'eps':
        return {'eps': float(value)}
    return {'s': value}


def _sort_key(variable: str, value: str, n: int) -> float:
    if variable == 's':
        return parse_subsample_size(value, n)
    return float(value)


def error_sweep(cfg: ExperimentConfig, variable: str = None, values: list = None, n_jobs: int = None, write: bool = True) -> pd.DataFrame:

    """
    Error against the dense proximal oracle as one parameter changes.

    For each value the oracle (pga-gw, fgw or pga-ugw, matching cfg's family) runs once
    and cfg's method runs for every seed.

    Parameters
    ----------
    cfg : ExperimentConfig
        Base configuration.
    variable : str, optional
        'n', 's' or 'eps'; cfg's [Sweep] variable if None.
    values : list, optional
        Grid; cfg's [Sweep] values, else the default grid of the variable.
    n_jobs : int, optional
        Worker count.
    write : bool
        Write sweep.csv, sweep_runs.csv and sweep.json.

    Returns
    -------
    pd.DataFrame
        One row per value: value, oracle_distance, mean_abs_error, std_abs_error, mean_distance, mean_seconds, n_ok, n_failed.

    """

    variable = variable or cfg.sweep['variable']
    values = [str(v) for v in (values or cfg.sweep['values'] or DEFAULT_SWEEP_VALUES[variable])]
    if cfg.family not in ORACLES:
        raise ConfigError('Method %s has no dense oracle to sweep against.' % cfg.method)
    oracle_method = ORACLES[cfg.family]
    values = sorted(values, key=lambda v: _sort_key(variable, v, cfg.dataset['n']))

    print('___SPAR GW___: ', 'Starting sweep over', variable, 'values', values, 'oracle', oracle_method)
    start_time = time.time()

    cells, cell_values, oracle_cells = [], [], []
    for value in values:
        cfg_v = cfg.replace(**_sweep_override(variable, value))
        dataset = build_dataset(cfg_v)
        oracle_cfg = cfg_v.replace(method=oracle_method, seeds=[cfg.seeds[0]])
        oracle_cells.append((oracle_cfg, dataset, cfg.seeds[0]))
        for seed in cfg_v.seeds:
            cells.append((cfg_v, dataset, seed))
            cell_values.append(value)

    oracle_records = _run_cells(cfg, oracle_cells, n_jobs)
    records = _run_cells(cfg, cells, n_jobs)

    runs = _records_frame(records)
    runs.insert(0, 'value', cell_values)
    runs.insert(0, 'variable', variable)

    rows = []
    for value, oracle in zip(values, oracle_records):
        group = runs[runs['value'] == value]
        ok = group[group['error'] == '']
        abs_error = (ok['distance'] - oracle.distance).abs()
        rows.append({
            'variable': variable,
            'value': value,
            'oracle_distance': oracle.distance,
            'oracle_error': oracle.error,
            'mean_abs_error': abs_error.mean(),
            'std_abs_error': abs_error.std(),
            'mean_distance': ok['distance'].mean(),
            'mean_seconds': ok['seconds'].mean(),
            'n_ok': len(ok),
            'n_failed': len(group) - len(ok)})
    table = pd.DataFrame(rows)
    print('___SPAR GW___: ', "Finished sweep. --- Execution %s seconds ---" % (time.time() - start_time))

    if write:
        write_derivatives([
            GW_derivative(table, 'sweep', 'df', 'One row per sweep value'),
            GW_derivative(runs, 'sweep_runs', 'df', 'One row per (value, seed)'),
            GW_derivative(_run_manifest(cfg, 'sweep', {'variable': variable, 'values': values, 'oracle': oracle_method}), 'sweep', 'json', 'Resolved configuration')],
            cfg.out_dir)
    return table


# Collections

def load_collection(path: str, mode: str = BALANCED) -> list:

    """
    Read a collection manifest: a JSON list (or {'items': [...]}) of
    {'relation': path, 'weights': path (optional), 'features': path (optional)}.
    Relative paths are resolved against the manifest's directory.

    Returns
    -------
    list of tuple
        (RelationMatrix, Distribution, features or None).
    """

    document = read_json(path)
    items = document['items'] if isinstance(document, dict) else document
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        return p if os.path.isabs(p) else os.path.join(base, p)

    collection = []
    for item in items:
        C = ingest_matrix(resolve(item['relation']))
        w = ingest_weights(resolve(item['weights']), mode) if item.get('weights') else uniform_distribution(C.n, mode)
        X = ingest_matrix(resolve(item['features']), kind='feature') if item.get('features') else None
        collection.append((C, w, X))
    return collection


def generate_collection(count: int, n: int, seed: int = 0, generator: str = 'graph', mode: str = BALANCED) -> list:

    """count random instances of one generator: power-law graphs or point clouds (source side), seeds seed, seed+1, ..."""

    collection = []
    for k in range(count):
        if generator == 'graph':
            C = gen_powerlaw_graph(n, seed + k).adjacency
        elif generator == 'moon':
            C = euclidean_relation(gen_moon(n, seed + k)[0])
        elif generator == 'gaussian':
            C = euclidean_relation(gen_gaussian_mixture(n, seed + k)[0])
        elif generator == 'spiral':
            C = euclidean_relation(gen_spiral(n, seed + k)[0])
        else:
            raise ConfigError('Unknown collection generator %r.' % generator)
        collection.append((C, uniform_distribution(n, mode), None))
    return collection


def _item_digest(item) -> str:
    C, w, X = item
    digest = hashlib.sha256(as_array(C).tobytes())
    digest.update(as_array(w).tobytes())
    if X is not None:
        digest.update(np.asarray(X, dtype=np.float64).tobytes())
    return digest.hexdigest()


def _pair_dataset(item_i, item_j, cfg: ExperimentConfig, i: int, j: int) -> Dataset:

    """
    Problem for one pair. The two items are put in digest order, so a pair gets
    the same orientation (and the same value) wherever it sits in the collection.
    """

    if _item_digest(item_j) < _item_digest(item_i):
        item_i, item_j = item_j, item_i
    Ci, wi, Xi = item_i
    Cj, wj, Xj = item_j
    M = None
    if cfg.fused:
        if Xi is None or Xj is None:
            raise ConfigError('Fused methods need features for every collection item (items %d, %d).' % (i, j))
        M = feature_relation(Xi, Xj)
    return Dataset(validate_problem(wi, wj, Ci, Cj), M, name='pair-%d-%d' % (i, j))


def pairwise_distances(collection: list, cfg: ExperimentConfig, n_jobs: int = None, write: bool = True) -> np.ndarray:

    """
    Symmetric N x N distance matrix; D_ij computed once for i < j with cfg's method and first seed.

    Failed pairs are NaN and logged.

    Parameters
    ----------
    collection : list of tuple
        (RelationMatrix, Distribution, features or None), N >= 2.
    cfg : ExperimentConfig
        Method configuration.
    n_jobs : int, optional
        Worker count.
    write : bool
        Write distances.csv, pairwise_runs.csv and pairwise.json.

    Returns
    -------
    np.ndarray
        D with zero diagonal.

    """

    N = len(collection)
    if N < 2:
        raise ConfigError('pairwise_distances needs at least 2 items, got %d.' % N)
    print('___SPAR GW___: ', 'Starting pairwise distances for', N, 'items with', cfg.method)
    start_time = time.time()

    seed = cfg.seeds[0]
    pairs = [(i, j) for i in range(N) for j in range(i + 1, N)]
    cells, broken = [], {}
    for k, (i, j) in enumerate(pairs):
        try:
            cells.append((cfg, _pair_dataset(collection[i], collection[j], cfg, i, j), seed))
        except ConfigError:
            raise
        except GWError as e:
            broken[k] = RunRecord(cfg.config_hash(), cfg.method, seed, error='%s: %s' % (type(e).__name__, e))
    solved = iter(_run_cells(cfg, cells, n_jobs) if cells else [])
    records = [broken[k] if k in broken else next(solved) for k in range(len(pairs))]

    D = np.zeros((N, N))
    for (i, j), record in zip(pairs, records):
        if record.error:
            print('___SPAR GW___: ', 'Pair', (i, j), 'failed, distance set to NaN:', record.error)
        D[i, j] = D[j, i] = record.distance
    print('___SPAR GW___: ', "Finished pairwise distances. --- Execution %s seconds ---" % (time.time() - start_time))

    if write:
        runs = _records_frame(records)
        runs.insert(0, 'j', [p[1] for p in pairs])
        runs.insert(0, 'i', [p[0] for p in pairs])
        write_derivatives([
            GW_derivative(D, 'distances', 'matrix', 'Pairwise distance matrix'),
            GW_derivative(runs, 'pairwise_runs', 'df', 'One row per pair'),
            GW_derivative(_run_manifest(cfg, 'pairwise', {'N': N}), 'pairwise', 'json', 'Resolved configuration')],
            cfg.out_dir)
    return D


def similarity_matrix(D, gamma: float) -> np.ndarray:

    """
    S = exp(-D / gamma). NaN distances give similarity 0 with a warning.
    """

    if gamma is None or not np.isfinite(gamma) or gamma <= 0:
        raise InvalidGamma('gamma must be a positive number, got %r.' % gamma)
    D = np.asarray(D, dtype=np.float64)
    S = np.exp(-D / gamma)
    missing = np.isnan(D)
    if missing.any():
        warnings.warn('%d distances are NaN, their similarity is set to 0.' % int(missing.sum()))
        S[missing] = 0.0
    return S


def make_derivative_spar_gw(config_file_path: str, internal_config_file_path: str, experiment_json: str = None, overrides: dict = None):

    """
    Main function of SPAR GW:

    * Parse parameters from settings (and an optional JSON experiment document and overrides)
    * Build or read the dataset
    * Run the configured method for every seed
    * Save derivatives (run table, summary, manifest) into out_dir

    Parameters
    ----------
    config_file_path : str
        Path to settings.ini.
    internal_config_file_path : str
        Path to settings_internal.ini.
    experiment_json : str, optional
        JSON experiment document overriding settings.ini.
    overrides : dict, optional
        Flat overrides on top of everything else.

    Returns
    -------
    records : pd.DataFrame
    summary : pd.DataFrame

    """

    cfg = load_experiment_config(config_file_path, internal_config_file_path, experiment_json, overrides)
    return run_experiment(cfg)
