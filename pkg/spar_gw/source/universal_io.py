import os
import json
import numpy as np
import pandas as pd

from spar_gw.source.core_types_gw import Distribution, RelationMatrix, SparseMatrix, BALANCED
from spar_gw.source.initial_gw import ParseError

MATRIX_FORMAT = '%.17g'


class GW_derivative:

    """
    One output artifact of a run: a table, a matrix, a weight vector or a JSON document.

    Attributes
    ----------
    content : pd.DataFrame, np.ndarray, SparseMatrix or dict
        The main content of the derivative.
    name : str
        File name without extension.
    content_type : str
        'df' (CSV table), 'matrix' (headerless CSV), 'weights' (one value per line) or 'json'.
        Used to choose the writer.
    description_for_user : str, optional
        Short description, stored in the run manifest.

    """

    def __init__(self, content, name: str, content_type: str, description_for_user: str = ''):

        """
        Constructor method

        Parameters
        ----------
        content : pd.DataFrame, np.ndarray, SparseMatrix or dict
            The main content of the derivative.
        name : str
            File name without extension.
        content_type : str
            'df', 'matrix', 'weights' or 'json'.
        description_for_user : str, optional
            Short description of the derivative.

        """

        self.content = content
        self.name = name
        self.content_type = content_type
        self.description_for_user = description_for_user

    def __repr__(self):
        return 'SPAR GW derivative: \n content: ' + str(type(self.content)) + '\n name: ' + self.name + '\n type: ' + self.content_type + '\n description for user: ' + self.description_for_user + '\n '

    @property
    def extension(self):
        return '.json' if self.content_type == 'json' else '.csv'

    def write(self, out_dir: str) -> str:

        """
        Write the derivative into out_dir and return the file path.
        """

        os.makedirs(out_dir, exist_ok=True)
        file_path = os.path.join(out_dir, self.name + self.extension)

        if self.content_type == 'df':
            self.content.to_csv(file_path, index=False)
        elif self.content_type == 'matrix':
            write_matrix(file_path, self.content)
        elif self.content_type == 'weights':
            write_weights(file_path, self.content)
        elif self.content_type == 'json':
            write_json(file_path, self.content)
        else:
            raise ValueError('Unknown derivative type %r.' % self.content_type)
        return file_path


def write_derivatives(derivs: list, out_dir: str) -> list:

    """Write every derivative, return the written paths in order."""

    paths = []
    for deriv in derivs:
        paths.append(deriv.write(out_dir))
        print('___SPAR GW___: ', 'Wrote', paths[-1])
    return paths


def _dense(matrix) -> np.ndarray:
    if isinstance(matrix, SparseMatrix):
        return matrix.to_scipy().toarray()
    if isinstance(matrix, RelationMatrix):
        return matrix.entries
    return np.atleast_2d(np.asarray(matrix, dtype=np.float64))


def write_matrix(path: str, matrix):

    """Headerless CSV, one row per line, 17 significant digits (exact float round trip)."""

    np.savetxt(path, _dense(matrix), fmt=MATRIX_FORMAT, delimiter=',')


def write_weights(path: str, weights):

    """One weight per line."""

    w = weights.weights if isinstance(weights, Distribution) else np.asarray(weights, dtype=np.float64)
    np.savetxt(path, w.ravel(), fmt=MATRIX_FORMAT)


def write_json(path: str, content: dict):
    with open(path, 'w') as file_wrapper:
        json.dump(content, file_wrapper, indent=4, default=_json_default)


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return str(value)


def read_json(path: str) -> dict:
    try:
        with open(path, 'r') as f:
            return json.load(f)
    except FileNotFoundError:
        raise ParseError('File not found: %s' % path)
    except json.JSONDecodeError as e:
        raise ParseError('%s: line %d, column %d: %s' % (path, e.lineno, e.colno, e.msg))


def _read_numeric_csv(path: str) -> np.ndarray:

    """
    Read a headerless numeric CSV into a float array.

    Raises ParseError naming the first offending line and column.
    """

    if not os.path.isfile(path):
        raise ParseError('File not found: %s' % path)
    try:
        frame = pd.read_csv(path, header=None, dtype=str, skip_blank_lines=True, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise ParseError('%s is empty.' % path)
    except pd.errors.ParserError as e:
        raise ParseError('%s: %s' % (path, e))

    missing = frame.isna().to_numpy()
    if missing.any():
        i, j = np.argwhere(missing)[0]
        raise ParseError('%s: line %d, column %d: missing value (ragged row?).' % (path, i + 1, j + 1))

    cells = frame.to_numpy(dtype=object)
    try:
        # numpy parses each string with correct rounding, so %.17g values come back bit for bit
        return cells.astype(np.float64)
    except (TypeError, ValueError):
        pass

    for i, row in enumerate(cells):
        for j, cell in enumerate(row):
            try:
                float(cell)
            except (TypeError, ValueError):
                if cell is None or str(cell).strip() == '':
                    raise ParseError('%s: line %d, column %d: missing value (ragged row?).' % (path, i + 1, j + 1))
                raise ParseError('%s: line %d, column %d: %r is not a number.' % (path, i + 1, j + 1, cell))
    raise ParseError('%s could not be read as a numeric matrix.' % path)


def ingest_matrix(path: str, kind: str = 'relation'):

    """
    Read a matrix file.

    Parameters
    ----------
    path : str
        Headerless CSV.
    kind : str
        'relation' (validated as a square symmetric RelationMatrix) or 'feature' (any m x n array).

    Returns
    -------
    RelationMatrix or np.ndarray

    """

    values = _read_numeric_csv(path)
    if kind == 'relation':
        return RelationMatrix(values)
    return values


def ingest_weights(path: str, mode: str = BALANCED) -> Distribution:

    """Read a weight file (one float per line, or a single row)."""

    values = _read_numeric_csv(path)
    return Distribution(values.ravel(), mode)
