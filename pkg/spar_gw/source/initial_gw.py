import os
import re
import json
import hashlib
import configparser

from spar_gw.source.core_types_gw import GWError, get_ground_cost, ValidationError
from spar_gw.source.dense_solvers_gw import SolverConfig, ENTROPIC, PROXIMAL
from spar_gw.source.spar_solvers_gw import SAMPLING_MODES


class ConfigError(GWError, ValueError):
    """Invalid or inconsistent settings."""


class ParseError(GWError):
    """A data or settings file could not be read."""


# method name: (family, sparse, fixed regularizer)
METHODS = {
    'egw': ('gw', False, ENTROPIC),
    'pga-gw': ('gw', False, PROXIMAL),
    'spar-gw': ('gw', True, None),
    'fgw': ('fgw', False, None),
    'spar-fgw': ('fgw', True, None),
    'eugw': ('ugw', False, ENTROPIC),
    'pga-ugw': ('ugw', False, PROXIMAL),
    'spar-ugw': ('ugw', True, None),
    'naive': ('naive', False, None),
}

# Dense proximal reference of each family, used as the error oracle in sweeps.
ORACLES = {'gw': 'pga-gw', 'fgw': 'fgw', 'ugw': 'pga-ugw'}

GENERATORS = ('moon', 'graph', 'gaussian', 'spiral', 'files')
SWEEP_VARIABLES = ('n', 's', 'eps')
DEFAULT_SWEEP_VALUES = {
    'eps': ['1', '0.1', '0.01', '0.001'],
    's': ['2n', '4n', '8n', '16n', '32n'],
    'n': ['200', '400', '800'],
}
DEFAULT_ALPHA = 0.6
DEFAULT_LAMBDA = 1.0


def _str(value):
    return str(value).strip()


def _lower(value):
    return _str(value).lower()


def _int(value):
    if isinstance(value, bool):
        raise ValueError('boolean is not an integer')
    if isinstance(value, float) and not value.is_integer():
        raise ValueError('%r is not an integer' % value)
    return int(value) if not isinstance(value, str) else int(value.strip())


def _float(value):
    return float(value)


def _optional_float(value):
    if value is None or _str(value) == '':
        return None
    return float(value)


def _optional_path(value):
    if value is None or _str(value) == '':
        return None
    return _str(value)


def _bool(value):
    if isinstance(value, bool):
        return value
    text = _lower(value)
    if text in ('1', 'yes', 'true', 'on'):
        return True
    if text in ('0', 'no', 'false', 'off'):
        return False
    raise ValueError('%r is not a boolean' % value)


def parse_int_list(value):

    """
    Parse a seed list: '0, 3, 7', '0:10' (range, end excluded), a JSON list or a single int.
    """

    if isinstance(value, (list, tuple)):
        return [_int(v) for v in value]
    if isinstance(value, int) and not isinstance(value, bool):
        return [value]
    out = []
    for part in _str(value).split(','):
        part = part.strip()
        if not part:
            continue
        if ':' in part:
            start, stop = part.split(':', 1)
            out.extend(range(int(start), int(stop)))
        else:
            out.append(int(part))
    if not out:
        raise ValueError('empty list')
    return out


def _str_list(value):
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return [_str(v) for v in value]
    return [v.strip() for v in _str(value).split(',') if v.strip()]


# section -> key -> coercion
SETTINGS_SCHEMA = {
    'default': {'method': _lower, 'cost': _lower, 'seeds': parse_int_list, 'out_dir': _str, 'verbose': _bool},
    'Dataset': {'generator': _lower, 'n': _int, 'seed': _int, 'noise': _float, 'weights': _lower, 'bandwidth': _float,
                'source_relation': _optional_path, 'target_relation': _optional_path,
                'source_weights': _optional_path, 'target_weights': _optional_path, 'feature_cost': _optional_path},
    'Solver': {'regularizer': _lower, 'eps': _float, 'R': _int, 'H': _int, 'alpha': _optional_float, 'lambda': _optional_float},
    'Sampling': {'s': _str, 'mode': _lower, 'dedup_weights': _bool, 'zero_cost_to_inf': _bool,
                 'max_retries': _int, 'allow_large_naive': _bool},
    'Sweep': {'variable': _lower, 'values': _str_list},
    'Similarity': {'gamma': _float},
}

INTERNAL_SCHEMA = {
    'Sinkhorn': {'floor': _float, 'early_exit': _bool, 'tol': _float},
    'Sparse': {'chunk_size': _int, 'naive_size_limit': _int},
    'Parallel': {'max_workers': _int},
    'Benchmark': {'trace_memory': _bool},
}

# Defaults for keys missing from a settings file.
SETTINGS_DEFAULTS = {
    'default': {'method': 'spar-gw', 'cost': 'l2', 'seeds': [0], 'out_dir': 'spar_gw_output', 'verbose': False},
    'Dataset': {'generator': 'moon', 'n': 200, 'seed': 0, 'noise': 0.05, 'weights': 'uniform', 'bandwidth': 1.0,
                'source_relation': None, 'target_relation': None, 'source_weights': None, 'target_weights': None,
                'feature_cost': None},
    'Solver': {'regularizer': PROXIMAL, 'eps': 0.01, 'R': 20, 'H': 50, 'alpha': None, 'lambda': None},
    'Sampling': {'s': '16n', 'mode': 'iid', 'dedup_weights': False, 'zero_cost_to_inf': False,
                 'max_retries': 3, 'allow_large_naive': False},
    'Sweep': {'variable': 's', 'values': []},
    'Similarity': {'gamma': 1.0},
}

INTERNAL_DEFAULTS = {
    'Sinkhorn': {'floor': 1e-300, 'early_exit': False, 'tol': 1e-9},
    'Sparse': {'chunk_size': 256, 'naive_size_limit': 1000},
    'Parallel': {'max_workers': -1},
    'Benchmark': {'trace_memory': True},
}


def _coerce(schema: dict, section: str, key: str, value):
    try:
        return schema[section][key](value)
    except (TypeError, ValueError) as e:
        raise ConfigError('Invalid value %r for [%s] %s: %s' % (value, section, key, e))


def _parse_ini(config_file_name: str, schema: dict, defaults: dict):

    if not os.path.isfile(config_file_name):
        raise ConfigError('Settings file not found: %s' % config_file_name)
    config = configparser.ConfigParser()
    try:
        config.read(config_file_name)
    except configparser.Error as e:
        raise ConfigError('Could not parse settings file %s: %s' % (config_file_name, e))

    params = {}
    for section, keys in schema.items():
        ini_section = config['DEFAULT'] if section == 'default' else (config[section] if config.has_section(section) else None)
        params[section] = {}
        for key in keys:
            if ini_section is not None and key in ini_section:
                params[section][key] = _coerce(schema, section, key, ini_section[key])
            else:
                params[section][key] = defaults[section][key]
    return params


def get_all_config_params(config_file_name: str):

    """
    Parse all the parameters from the settings file and put them into a python dictionary
    divided by sections ('default', 'Dataset', 'Solver', 'Sampling', 'Sweep', 'Similarity').

    Parameters
    ----------
    config_file_name : str
        Path to settings.ini.

    Returns
    -------
    all_params : dict
        Dictionary of section dictionaries with typed values.

    """

    return _parse_ini(config_file_name, SETTINGS_SCHEMA, SETTINGS_DEFAULTS)


def get_internal_config_params(config_file_name: str):

    """
    Parse the internal settings ('Sinkhorn', 'Sparse', 'Parallel', 'Benchmark').
    These are numerical constants, NOT meant to be changed by the user.
    """

    return _parse_ini(config_file_name, INTERNAL_SCHEMA, INTERNAL_DEFAULTS)


def default_params():

    """Settings dictionary holding only built-in defaults."""

    return {section: dict(values) for section, values in SETTINGS_DEFAULTS.items()}


def default_internal_params():
    return {section: dict(values) for section, values in INTERNAL_DEFAULTS.items()}


def _key_index():
    index = {}
    for section, keys in SETTINGS_SCHEMA.items():
        for key in keys:
            index[key] = section
    # CLI spellings
    index['lam'] = 'Solver'
    return index


def apply_overrides(all_params: dict, overrides: dict):

    """
    Return a copy of all_params with overrides applied.

    overrides may be flat ({'eps': 0.1}) or sectioned ({'Solver': {'eps': 0.1}});
    None values are ignored.
    """

    params = {section: dict(values) for section, values in all_params.items()}
    index = _key_index()

    def put(key, value):
        if value is None:
            return
        section = index.get(key)
        if section is None:
            raise ConfigError('Unknown setting %r.' % key)
        key = 'lambda' if key == 'lam' else key
        params[section][key] = _coerce(SETTINGS_SCHEMA, section, key, value)

    for key, value in overrides.items():
        if isinstance(value, dict):
            section = 'default' if key.upper() == 'DEFAULT' else key
            if section not in SETTINGS_SCHEMA:
                raise ConfigError('Unknown settings section %r.' % key)
            for sub_key, sub_value in value.items():
                put(sub_key, sub_value)
        else:
            put(key, value)
    return params


def load_experiment_json(path: str) -> dict:

    """Read a JSON experiment document (flat or sectioned keys)."""

    try:
        with open(path, 'r') as f:
            document = json.load(f)
    except FileNotFoundError:
        raise ConfigError('Experiment file not found: %s' % path)
    except json.JSONDecodeError as e:
        raise ConfigError('Experiment file %s is not valid JSON: line %d, column %d: %s' % (path, e.lineno, e.colno, e.msg))
    if not isinstance(document, dict):
        raise ConfigError('Experiment file %s must hold a JSON object.' % path)
    return document


_S_PATTERN = re.compile(r'^\s*(\d+(?:\.\d+)?)\s*\*?\s*n\s*$', re.IGNORECASE)


def parse_subsample_size(value, n: int) -> int:

    """
    Resolve a subsample size: an absolute integer ('3200', 3200) or a multiple of n ('16n', '16*n').
    """

    text = _str(value)
    match = _S_PATTERN.match(text)
    try:
        if match:
            s = int(round(float(match.group(1)) * n))
        else:
            s = _int(text)
    except ValueError:
        raise ConfigError('Subsample size %r is neither an integer nor a multiple like 16n.' % value)
    if s < 1:
        raise ConfigError('Subsample size must be >= 1, got %r.' % value)
    return s


class ExperimentConfig:

    """
    One fully resolved experiment: dataset, method, solver and sampling parameters, seeds.

    Attributes
    ----------
    method : str
        Solver name, one of METHODS.
    cost : str
        Ground cost name.
    seeds : list of int
        One run per seed.
    out_dir : str
        Output directory.
    dataset : dict
        The 'Dataset' section.
    solver : dict
        The 'Solver' section.
    sampling : dict
        The 'Sampling' section.
    internal : dict
        Parsed settings_internal.ini.
    verbose : bool
        Per-round solver output.

    """

    def __init__(self, all_params: dict, internal_params: dict = None):

        """
        Constructor method

        Parameters
        ----------
        all_params : dict
            Output of get_all_config_params, possibly with overrides applied.
        internal_params : dict
            Output of get_internal_config_params; built-in defaults if None.

        """

        self.params = {section: dict(values) for section, values in all_params.items()}
        self.internal = internal_params if internal_params is not None else default_internal_params()

        default = self.params['default']
        self.method = default['method']
        self.cost = default['cost']
        self.seeds = list(default['seeds'])
        self.out_dir = default['out_dir']
        self.verbose = default['verbose']
        self.dataset = self.params['Dataset']
        self.solver = self.params['Solver']
        self.sampling = self.params['Sampling']
        self.sweep = self.params['Sweep']
        self.similarity = self.params['Similarity']

        self.check()

    @property
    def family(self):
        return METHODS[self.method][0]

    @property
    def sparse(self):
        return METHODS[self.method][1]

    @property
    def unbalanced(self):
        return self.family == 'ugw' or (self.family == 'naive' and self.solver['lambda'] is not None)

    @property
    def fused(self):
        return self.family == 'fgw' or (self.family == 'naive' and self.solver['alpha'] is not None)

    @property
    def regularizer(self):
        return METHODS[self.method][2] or self.solver['regularizer']

    @property
    def alpha(self):
        return DEFAULT_ALPHA if self.solver['alpha'] is None else self.solver['alpha']

    @property
    def lam(self):
        return DEFAULT_LAMBDA if self.solver['lambda'] is None else self.solver['lambda']

    def check(self):

        """Method/parameter compatibility; raises ConfigError before anything runs."""

        if self.method not in METHODS:
            raise ConfigError('Unknown method %r, choose one of: %s.' % (self.method, ', '.join(METHODS)))
        try:
            get_ground_cost(self.cost)
        except ValidationError as e:
            raise ConfigError(str(e))
        family = METHODS[self.method][0]
        if self.solver['alpha'] is not None and family not in ('fgw', 'naive'):
            raise ConfigError('alpha is only used by fused methods (fgw, spar-fgw), not by %s.' % self.method)
        if self.solver['lambda'] is not None and family not in ('ugw', 'naive'):
            raise ConfigError('lambda is only used by unbalanced methods (eugw, pga-ugw, spar-ugw), not by %s.' % self.method)
        if self.solver['alpha'] is not None and self.solver['lambda'] is not None:
            raise ConfigError('alpha and lambda can not be combined.')
        if self.solver['alpha'] is not None and not 0 <= self.solver['alpha'] <= 1:
            raise ConfigError('alpha must lie in [0, 1], got %r.' % self.solver['alpha'])
        if self.solver['lambda'] is not None and not self.solver['lambda'] > 0:
            raise ConfigError('lambda must be > 0, got %r.' % self.solver['lambda'])
        if self.solver['regularizer'] not in (ENTROPIC, PROXIMAL):
            raise ConfigError('regularizer must be entropic or proximal, got %r.' % self.solver['regularizer'])
        if not self.solver['eps'] > 0:
            raise ConfigError('eps must be > 0, got %r.' % self.solver['eps'])
        if self.solver['R'] < 1 or self.solver['H'] < 1:
            raise ConfigError('R and H must be >= 1.')
        if self.sampling['mode'] not in SAMPLING_MODES:
            raise ConfigError('Sampling mode must be one of %s, got %r.' % (', '.join(SAMPLING_MODES), self.sampling['mode']))
        if self.sampling['max_retries'] < 0:
            raise ConfigError('max_retries must be >= 0.')
        parse_subsample_size(self.sampling['s'], 1)
        if not self.seeds:
            raise ConfigError('At least one seed is needed.')
        if self.dataset['generator'] not in GENERATORS:
            raise ConfigError('Unknown generator %r, choose one of: %s.' % (self.dataset['generator'], ', '.join(GENERATORS)))
        if self.dataset['generator'] == 'files' and not (self.dataset['source_relation'] and self.dataset['target_relation']):
            raise ConfigError('generator = files needs source_relation and target_relation.')
        if self.dataset['weights'] not in ('uniform', 'gaussian'):
            raise ConfigError('weights must be uniform or gaussian, got %r.' % self.dataset['weights'])
        if self.dataset['n'] < 1:
            raise ConfigError('n must be >= 1.')
        if self.similarity['gamma'] is not None and not self.similarity['gamma'] > 0:
            raise ConfigError('gamma must be > 0.')
        if self.sweep['variable'] not in SWEEP_VARIABLES:
            raise ConfigError('Sweep variable must be one of %s, got %r.' % (', '.join(SWEEP_VARIABLES), self.sweep['variable']))

    def subsample_size(self, n: int) -> int:
        return parse_subsample_size(self.sampling['s'], n)

    def solver_config(self) -> SolverConfig:

        """SolverConfig for this experiment's method."""

        sinkhorn, sparse = self.internal['Sinkhorn'], self.internal['Sparse']
        return SolverConfig(
            regularizer=self.regularizer,
            eps=self.solver['eps'],
            R=self.solver['R'],
            H=self.solver['H'],
            alpha=self.alpha if self.fused else None,
            lam=self.lam if self.unbalanced else None,
            tol=sinkhorn['tol'] if sinkhorn['early_exit'] else None,
            floor=sinkhorn['floor'],
            dedup_weights=self.sampling['dedup_weights'],
            zero_cost_to_inf=self.sampling['zero_cost_to_inf'],
            allow_large_naive=self.sampling['allow_large_naive'],
            naive_size_limit=sparse['naive_size_limit'],
            chunk_size=sparse['chunk_size'],
            verbose=self.verbose)

    def replace(self, **overrides) -> 'ExperimentConfig':

        """New config with flat overrides applied (e.g. method='pga-gw', seeds=[0])."""

        return ExperimentConfig(apply_overrides(self.params, overrides), self.internal)

    def as_dict(self) -> dict:
        return {section: dict(values) for section, values in self.params.items()}

    def config_hash(self) -> str:

        """Stable short hash of everything except seeds and out_dir."""

        document = self.as_dict()
        document['default'] = {k: v for k, v in document['default'].items() if k not in ('seeds', 'out_dir', 'verbose')}
        text = json.dumps(document, sort_keys=True, default=str)
        return hashlib.sha256(text.encode('utf-8')).hexdigest()[:12]

    def __repr__(self):
        return 'ExperimentConfig(method=%s, cost=%s, dataset=%s, n=%s, seeds=%d)' % (self.method, self.cost, self.dataset['generator'], self.dataset['n'], len(self.seeds))


def load_experiment_config(settings_file: str = None, internal_settings_file: str = None, experiment_json: str = None, overrides: dict = None) -> ExperimentConfig:

    """
    Resolve an ExperimentConfig: settings.ini, then the JSON document, then CLI overrides.

    Parameters
    ----------
    settings_file : str, optional
        settings.ini; built-in defaults if None.
    internal_settings_file : str, optional
        settings_internal.ini; built-in defaults if None.
    experiment_json : str, optional
        JSON experiment document.
    overrides : dict, optional
        Flat overrides (CLI flags); None values are skipped.

    Returns
    -------
    ExperimentConfig

    """

    params = get_all_config_params(settings_file) if settings_file else default_params()
    internal = get_internal_config_params(internal_settings_file) if internal_settings_file else default_internal_params()
    if experiment_json:
        params = apply_overrides(params, load_experiment_json(experiment_json))
    if overrides:
        params = apply_overrides(params, overrides)
    return ExperimentConfig(params, internal)
