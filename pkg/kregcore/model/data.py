"""
Weighted point sets, their statistics, and their file formats.

A data item p has explanatory coordinates p_x (d floats, e.g. time or
longitude/latitude), a dependent scalar value p_y, and a positive
multiplicity weight p_w (1 for raw data, a cell count for grid coresets).

Provides the following classes:
    * WeightedPoint: a single (x, y, w) item.
    * Dataset: an immutable, column-stored collection of weighted points.
    * DatasetStats: M (range of y), extent, diameter and
      delta = diameter/sigma.
    * ColumnSchema: how to map CSV columns onto x, y and w.

and the following functions:
    * stats, synth_ar1, load_csv, save_dataset, save_coreset, load_coreset,
    format_dataset
"""
import hashlib
import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.signal import lfilter

from kregcore.model.errors import ContractError, DataError

logger = logging.getLogger(__name__)


class WeightedPoint(NamedTuple):
    """A location x (tuple of d floats), a value y and a weight w."""
    x: Tuple[float, ...]
    y: float
    w: float = 1.0


def _frozen(array):
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


class Dataset:
    """An immutable, nonempty set of weighted points in R^(d+1).

    Points are stored column-wise: x is an (n, d) array, y and w are (n,)
    arrays. All arrays are read-only.

    :param x: (n, d) or (n,) array-like of coordinates.
    :param y: (n,) array-like of dependent values.
    :param w: (n,) array-like of positive weights; all 1 if omitted.
    :param skipped: (int) number of input rows dropped while loading.
    """

    def __init__(self, x, y, w=None, skipped=0):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        y = np.asarray(y, dtype=float).reshape(-1)
        w = np.ones(len(y)) if w is None else np.asarray(w, dtype=float)
        w = w.reshape(-1)
        if x.ndim != 2 or x.shape[0] == 0 or x.shape[1] == 0:
            raise ContractError('a dataset needs at least one point of '
                                'dimension >= 1')
        if not (x.shape[0] == y.shape[0] == w.shape[0]):
            raise ContractError('x, y and w lengths differ: %d, %d, %d'
                                % (x.shape[0], y.shape[0], w.shape[0]))
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))
                and np.all(np.isfinite(w))):
            raise ContractError('all point components must be finite')
        if np.any(w <= 0):
            raise ContractError('weights must be positive')
        self._x = _frozen(x)
        self._y = _frozen(y)
        self._w = _frozen(w)
        self.skipped = int(skipped)
        self._cache = {}

    @classmethod
    def from_points(cls, points):
        """Build a Dataset from an iterable of WeightedPoint (or (x, y[, w])
        tuples)."""
        points = [WeightedPoint(tuple(np.atleast_1d(p[0]).tolist()), *p[1:])
                  for p in points]
        if not points:
            raise ContractError('a dataset needs at least one point')
        dims = {len(p.x) for p in points}
        if len(dims) != 1:
            raise ContractError('points have mixed dimensions %s'
                                % sorted(dims))
        return cls([p.x for p in points], [p.y for p in points],
                   [p.w for p in points])

    @property
    def x(self):
        return self._x

    @property
    def y(self):
        return self._y

    @property
    def w(self):
        return self._w

    @property
    def n(self):
        return self._x.shape[0]

    @property
    def d(self):
        return self._x.shape[1]

    @property
    def total_weight(self):
        return float(np.sum(self._w))

    @property
    def lower(self):
        """Per-coordinate minimum of x."""
        return self._x.min(axis=0)

    @property
    def upper(self):
        """Per-coordinate maximum of x."""
        return self._x.max(axis=0)

    def __len__(self):
        return self.n

    def __iter__(self):
        for i in range(self.n):
            yield self.point(i)

    def point(self, i):
        """Return point i as a WeightedPoint."""
        return WeightedPoint(tuple(self._x[i].tolist()), float(self._y[i]),
                             float(self._w[i]))

    @property
    def points(self):
        return list(self)

    def take(self, indices):
        """Return the sub-dataset of the given point indices, in that order."""
        indices = np.asarray(indices, dtype=np.intp)
        return Dataset(self._x[indices], self._y[indices], self._w[indices])

    def window(self, lo, hi):
        """Return the points with lo <= x <= hi (one-dimensional data), or
        None when the window is empty."""
        if self.d != 1:
            raise ContractError('window() needs one-dimensional data')
        mask = (self._x[:, 0] >= lo) & (self._x[:, 0] <= hi)
        if not np.any(mask):
            return None
        return self.take(np.flatnonzero(mask))

    def source_hash(self):
        """SHA-256 hex digest of the x, y and w bytes."""
        digest = hashlib.sha256()
        for array in (self._x, self._y, self._w):
            digest.update(np.ascontiguousarray(array).tobytes())
        return digest.hexdigest()

    def cached(self, key, factory):
        """Return a value derived from this (immutable) dataset, computing it
        with factory() on first use."""
        if key not in self._cache:
            self._cache[key] = factory()
        return self._cache[key]

    def __repr__(self):
        return 'Dataset(n=%d, d=%d, total_weight=%g)' % (
            self.n, self.d, self.total_weight)


@dataclass(frozen=True)
class DatasetStats:
    """Summary statistics of a dataset.

    :param m_range: M = max y - min y.
    :param lower: per-coordinate minimum of x.
    :param upper: per-coordinate maximum of x.
    :param diameter: diagonal of the x bounding box (exact for d=1, an upper
    bound on the largest pairwise distance otherwise).
    :param sigma: the bandwidth delta is measured against.
    """
    m_range: float
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    diameter: float
    sigma: float

    @property
    def delta(self):
        """Delta = diameter / sigma."""
        return self.diameter / self.sigma

    @property
    def extent(self):
        return tuple(zip(self.lower, self.upper))


def stats(ds, sigma):
    """Return the DatasetStats of ds for bandwidth sigma."""
    if not sigma > 0:
        raise ContractError('sigma must be positive')
    lower, upper = ds.lower, ds.upper
    return DatasetStats(
        m_range=float(ds.y.max() - ds.y.min()),
        lower=tuple(lower.tolist()),
        upper=tuple(upper.tolist()),
        diameter=float(np.linalg.norm(upper - lower)),
        sigma=float(sigma))


def synth_ar1(n, c=0.0, phi=1.0, y0=10.0, noise_sigma=1.0, seed=0):
    """Generate the AR(1) series y_i = c + phi*y_(i-1) + N(0, noise_sigma)
    at x = 0, 1, ..., n-1 with y_0 = y0.

    Noise is drawn from numpy's PCG64 generator seeded with seed, so the
    series is bit-reproducible.

    :return: a Dataset of n unit-weight points.
    """
    if n < 1:
        raise ContractError('n must be at least 1')
    if noise_sigma < 0:
        raise ContractError('noise_sigma must be non-negative')
    rng = np.random.default_rng(seed)
    y = np.empty(n)
    y[0] = y0
    if n > 1:
        drive = c + rng.normal(0.0, noise_sigma, n - 1)
        # y_i = drive_i + phi * y_(i-1), seeded with the y_0 term
        y[1:], _ = lfilter([1.0], [1.0, -phi], drive, zi=[phi * y0])
    x = np.arange(n, dtype=float)
    return Dataset(x, y)


@dataclass(frozen=True)
class ColumnSchema:
    """How CSV columns map onto a Dataset.

    :param x_cols: names of the x columns. Empty means every column except
    the y, weight and date/time columns.
    :param y_col: name of the y column.
    :param w_col: name of the weight column; used when present in the file,
    otherwise all weights are 1.
    :param delimiter: field separator.
    :param missing_token: marker for a missing value (e.g. '?').
    :param date_time_cols: optional (date column, time column) pair. When
    given, the single x is minutes since the first valid record.
    :param date_format: strptime format of the date column.
    :param time_format: strptime format of the time column.
    """
    x_cols: Tuple[str, ...] = ()
    y_col: str = 'y'
    w_col: Optional[str] = 'w'
    delimiter: str = ','
    missing_token: str = '?'
    date_time_cols: Optional[Tuple[str, str]] = None
    date_format: str = '%d/%m/%Y'
    time_format: str = '%H:%M:%S'

    def __post_init__(self):
        if self.date_time_cols is not None and self.x_cols:
            raise ContractError('date/time columns replace the x columns; '
                                'give one or the other')


def _numeric(column):
    if pd.api.types.is_numeric_dtype(column):
        return column.to_numpy(dtype=float)
    return pd.to_numeric(column, errors='coerce').to_numpy(dtype=float)


def load_csv(path, schema=None):
    """Read a delimited text file into a Dataset.

    Rows with a missing or unparseable value in any mapped column, or a
    non-positive weight, are skipped; their number is stored on the result
    as ds.skipped. Lines starting with '#' are comments.

    :param path: file path.
    :param schema: a ColumnSchema (defaults to ColumnSchema()).
    :return: a Dataset.
    """
    schema = schema or ColumnSchema()
    text_cols = {}
    if schema.date_time_cols is not None:
        text_cols = {col: str for col in schema.date_time_cols}
    try:
        frame = pd.read_csv(path, sep=schema.delimiter, comment='#',
                            na_values=[schema.missing_token],
                            keep_default_na=False, skipinitialspace=True,
                            float_precision='round_trip', dtype=text_cols)
    except (OSError, UnicodeDecodeError, pd.errors.ParserError,
            pd.errors.EmptyDataError) as exc:
        raise DataError('cannot read %s: %s' % (path, exc)) from exc
    frame.columns = [str(col).strip() for col in frame.columns]

    w_col = schema.w_col if schema.w_col in frame.columns else None
    if schema.y_col not in frame.columns:
        raise DataError('column %r not found in %s (columns: %s)'
                        % (schema.y_col, path, list(frame.columns)))
    reserved = {schema.y_col, w_col} | set(schema.date_time_cols or ())
    if schema.date_time_cols is None:
        x_cols = list(schema.x_cols) or [c for c in frame.columns
                                         if c not in reserved]
    else:
        x_cols = []
    missing = [c for c in list(x_cols) + list(schema.date_time_cols or ())
               if c not in frame.columns]
    if missing:
        raise DataError('columns %s not found in %s' % (missing, path))
    if schema.date_time_cols is None and not x_cols:
        raise DataError('no x columns in %s' % path)

    n_rows = len(frame)
    y = _numeric(frame[schema.y_col])
    w = _numeric(frame[w_col]) if w_col else np.ones(n_rows)
    if schema.date_time_cols is None:
        x = np.column_stack([_numeric(frame[c]) for c in x_cols])
    else:
        date_col, time_col = schema.date_time_cols
        stamps = pd.to_datetime(
            frame[date_col] + ' ' + frame[time_col],
            format=schema.date_format + ' ' + schema.time_format,
            errors='coerce')
        minutes = (stamps - pd.Timestamp(0)) / pd.Timedelta(minutes=1)
        x = minutes.to_numpy(dtype=float)[:, None]

    valid = (np.all(np.isfinite(x), axis=1) & np.isfinite(y)
             & np.isfinite(w) & (w > 0))
    if schema.date_time_cols is not None and np.any(valid):
        # minutes since the first valid record
        x = x - x[np.flatnonzero(valid)[0]]
    skipped = int(n_rows - np.count_nonzero(valid))
    if not np.any(valid):
        raise DataError('no valid rows in %s (%d skipped)' % (path, skipped))
    if skipped:
        logger.warning('%s: skipped %d of %d rows with missing or invalid '
                       'values', path, skipped, n_rows)
    return Dataset(x[valid], y[valid], w[valid], skipped=skipped)


def format_param(value):
    """Format a metadata value: integral floats without a decimal point,
    other floats with their round-trip representation."""
    if isinstance(value, bool) or value is None:
        return str(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if value.is_integer() and abs(value) < 1e15:
            return str(int(value))
        return repr(value)
    return str(value)


def format_dataset(ds, metadata=()):
    """Return the text of ds in the canonical format: '#'-prefixed metadata
    lines, a header x1,...,xd,y,w, then one row per point with 17 significant
    digits."""
    header = ['x%d' % (j + 1) for j in range(ds.d)] + ['y', 'w']
    frame = pd.DataFrame(np.column_stack([ds.x, ds.y, ds.w]), columns=header)
    comments = ''.join('# %s\n' % line for line in metadata)
    return comments + frame.to_csv(index=False, float_format='%.17g')


def save_dataset(ds, path, metadata=()):
    """Write ds to path in the canonical format (see format_dataset)."""
    if ds is None or len(ds) == 0:
        raise DataError('refusing to write an empty dataset')
    text = format_dataset(ds, metadata)
    try:
        with open(path, 'w', newline='') as fh:
            fh.write(text)
    except OSError as exc:
        raise DataError('cannot write %s: %s' % (path, exc)) from exc


def coreset_metadata(cs):
    """Return the metadata lines recorded for a coreset."""
    params = ' '.join('%s=%s' % (key, format_param(value))
                      for key, value in cs.params.items())
    lines = [('method=%s %s' % (cs.method.label, params)).strip()]
    if cs.seed is not None:
        lines.append('seed=%d' % cs.seed)
    if cs.source_hash:
        lines.append('source=%s' % cs.source_hash)
    return lines


def save_coreset(cs, path):
    """Write a coreset and its provenance (method, parameters, seed, source
    hash) to path."""
    if cs is None or cs.data is None or len(cs.data) == 0:
        raise DataError('refusing to write an empty coreset')
    save_dataset(cs.data, path, coreset_metadata(cs))


def parse_param(text):
    """Inverse of format_param for the value types metadata holds."""
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return {'None': None, 'True': True, 'False': False}.get(text, text)


def read_metadata(path):
    """Return the key=value pairs (values as text) from the leading '#'
    lines of a file."""
    meta = {}
    try:
        with open(path) as fh:
            for line in fh:
                if not line.startswith('#'):
                    break
                for token in line[1:].split():
                    key, sep, value = token.partition('=')
                    if sep:
                        meta[key] = value
    except OSError as exc:
        raise DataError('cannot read %s: %s' % (path, exc)) from exc
    return meta


def load_coreset(path):
    """Read a file written by save_coreset back into a Coreset."""
    from kregcore.model.coreset import Coreset, Method

    meta = read_metadata(path)
    try:
        method = Method.from_label(meta.pop('method'))
    except (KeyError, ValueError) as exc:
        raise DataError('%s has no valid method metadata' % path) from exc
    seed = meta.pop('seed', None)
    source = meta.pop('source', None)
    params = {key: parse_param(value) for key, value in meta.items()}
    return Coreset(load_csv(path), method, params,
                   seed=None if seed is None else int(seed),
                   source_hash=source)
