"""
Weighted kernel density (kde), weighted value density (wkde) and
Nadaraya-Watson kernel regression (reg = wkde / kde).

For a dataset with total weight W:
    kde(q)  = (1/W) * sum_p w_p K(p_x, q)
    wkde(q) = (1/W) * sum_p w_p K(p_x, q) p_y
    reg(q)  = wkde(q) / kde(q)

For unit weights W = |P| and these are the usual unweighted definitions.

Evaluation is either exact (every point contributes) or truncated to the
points within a radius of the query (10 sigma by default), found through a
uniform bucket grid of side equal to the radius. The reduction order for a
query depends only on the dataset, never on how queries are batched or how
many threads run, so results are reproducible.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.spatial.distance import cdist

from kregcore import defaults
from kregcore.model.errors import ContractError, UndefinedAtQuery
from kregcore.model.kernel import GaussianKernel
from kregcore.model.spatial import GridSpec, cell_indices

logger = logging.getLogger(__name__)

# Upper bound on the number of kernel values held in memory per block.
_BLOCK_ENTRIES = 1 << 22


@dataclass(frozen=True)
class EvalContext:
    """How kernel sums are evaluated.

    :param kernel: the GaussianKernel.
    :param truncation_radius: (float or None) only points within this
    distance of a query contribute; None evaluates exactly.
    """
    kernel: GaussianKernel
    truncation_radius: Optional[float] = None

    def __post_init__(self):
        r = self.truncation_radius
        if r is not None and not (np.isfinite(r) and r >= self.kernel.sigma):
            raise ContractError('truncation radius must be finite and at '
                                'least sigma (%g), got %r'
                                % (self.kernel.sigma, r))

    @classmethod
    def exact(cls, kernel):
        return cls(kernel, None)

    @classmethod
    def truncated(cls, kernel, multiple=defaults.TRUNCATION_MULTIPLE):
        """Truncate at multiple * sigma."""
        return cls(kernel, multiple * kernel.sigma)

    @property
    def is_truncated(self):
        return self.truncation_radius is not None


class BucketIndex:
    """Points of a dataset grouped by the cells of a grid of side radius.

    Every point within radius of a query q lies in q's cell or one of its
    3^d - 1 neighbors.

    :param x: (n, d) array of point locations.
    :param radius: (float) the truncation radius (grid side).
    """

    def __init__(self, x, radius):
        self.radius = float(radius)
        self.d = x.shape[1]
        self.spec = GridSpec.anchored(self.radius, self.d)
        if self.d == 1:
            self.order = np.argsort(x[:, 0], kind='stable')
            self.sorted_x = x[self.order, 0]
            return
        cells = cell_indices(self.spec, x)
        self.order = np.lexsort(cells.T[::-1])
        unique, starts, counts = np.unique(cells[self.order], axis=0,
                                           return_index=True,
                                           return_counts=True)
        self._slots = {tuple(cell): (start, start + count)
                       for cell, start, count
                       in zip(unique.tolist(), starts.tolist(),
                              counts.tolist())}
        self._stencil = [tuple(o) for o in
                         np.array(np.meshgrid(*[(-1, 0, 1)] * self.d,
                                              indexing='ij')
                                  ).reshape(self.d, -1).T.tolist()]

    def windows(self, queries):
        """Return (lo, hi) positions into self.order such that the points
        within radius of queries[i] (one-dimensional data) are
        order[lo[i]:hi[i]]."""
        q = queries[:, 0]
        lo = np.searchsorted(self.sorted_x, q - self.radius, side='left')
        hi = np.searchsorted(self.sorted_x, q + self.radius, side='right')
        return lo, hi

    def candidates(self, q):
        """Return the sorted indices of the points in the 3^d cells around
        query q (a superset of the points within radius)."""
        base = cell_indices(self.spec, q[None, :])[0]
        parts = []
        for offset in self._stencil:
            slot = self._slots.get(tuple(int(b) + o
                                         for b, o in zip(base, offset)))
            if slot is not None:
                parts.append(self.order[slot[0]:slot[1]])
        if not parts:
            return np.empty(0, dtype=np.intp)
        return np.sort(np.concatenate(parts))


def bucket_index(ds, radius):
    """Return the (cached) BucketIndex of ds for the given radius."""
    return ds.cached(('bucket', float(radius)),
                     lambda: BucketIndex(ds.x, radius))


class KernelSums(NamedTuple):
    """kde and wkde values at a batch of queries."""
    kde: np.ndarray
    wkde: np.ndarray


class RegressionResult(NamedTuple):
    """reg values at a batch of queries; values[i] is NaN exactly where
    defined[i] is False (kde was zero)."""
    values: np.ndarray
    defined: np.ndarray


def _as_queries(ds, queries):
    queries = np.asarray(queries, dtype=float)
    if queries.ndim == 1:
        queries = queries.reshape(-1, ds.d) if ds.d > 1 or queries.size == 0 \
            else queries[:, None]
    if queries.ndim != 2 or queries.shape[1] != ds.d:
        raise ContractError('dimension mismatch: dataset has d=%d, queries '
                            'have shape %s' % (ds.d, queries.shape))
    return queries


def _exact_sums(ds, kernel, queries):
    wy = ds.w * ds.y
    rows = max(1, _BLOCK_ENTRIES // ds.n)
    mass = np.empty(len(queries))
    value = np.empty(len(queries))
    for start in range(0, len(queries), rows):
        block = queries[start:start + rows]
        k = kernel.from_squared(cdist(block, ds.x, 'sqeuclidean'))
        mass[start:start + rows] = (k * ds.w).sum(axis=1)
        value[start:start + rows] = (k * wy).sum(axis=1)
    return mass, value


def _window_sums(ds, kernel, index, queries):
    """Truncated sums for one-dimensional data: every window of x-sorted
    points is reduced on its own."""
    lo, hi = index.windows(queries)
    lengths = hi - lo
    mass = np.zeros(len(queries))
    value = np.zeros(len(queries))
    nonempty = np.flatnonzero(lengths > 0)
    if nonempty.size == 0:
        return mass, value
    x = index.sorted_x
    w = ds.w[index.order]
    wy = w * ds.y[index.order]
    # process a bounded number of gathered entries at a time
    bounds = np.cumsum(lengths[nonempty])
    start = 0
    while start < nonempty.size:
        limit = (bounds[start - 1] if start else 0) + _BLOCK_ENTRIES
        stop = max(start + 1, int(np.searchsorted(bounds, limit, 'right')))
        rows = nonempty[start:stop]
        seg = lengths[rows]
        offsets = np.concatenate(([0], np.cumsum(seg)[:-1]))
        positions = (np.arange(seg.sum()) - np.repeat(offsets, seg)
                     + np.repeat(lo[rows], seg))
        diff = x[positions] - np.repeat(queries[rows, 0], seg)
        k = kernel.from_squared(diff * diff)
        mass[rows] = np.add.reduceat(k * w[positions], offsets)
        value[rows] = np.add.reduceat(k * wy[positions], offsets)
        start = stop
    return mass, value


def _bucket_sums(ds, kernel, index, queries):
    """Truncated sums for d >= 2, one query at a time."""
    r2 = index.radius ** 2
    mass = np.zeros(len(queries))
    value = np.zeros(len(queries))
    wy = ds.w * ds.y
    for i, q in enumerate(queries):
        idx = index.candidates(q)
        if idx.size == 0:
            continue
        diff = ds.x[idx] - q
        sq = np.einsum('ij,ij->i', diff, diff)
        near = idx[sq <= r2]
        k = kernel.from_squared(sq[sq <= r2])
        mass[i] = np.sum(k * ds.w[near])
        value[i] = np.sum(k * wy[near])
    return mass, value


def _raw_sums(ds, ctx, queries):
    if not ctx.is_truncated:
        return _exact_sums(ds, ctx.kernel, queries)
    index = bucket_index(ds, ctx.truncation_radius)
    if ds.d == 1:
        return _window_sums(ds, ctx.kernel, index, queries)
    return _bucket_sums(ds, ctx.kernel, index, queries)


def kernel_sums(ds, ctx, queries, threads=None):
    """Return KernelSums (kde, wkde) of ds at every query.

    :param ds: a Dataset.
    :param ctx: an EvalContext.
    :param queries: (m, d) array-like of locations.
    :param threads: worker count (see defaults.resolve_threads).
    """
    queries = _as_queries(ds, queries)
    threads = defaults.resolve_threads(threads)
    if ctx.is_truncated:
        bucket_index(ds, ctx.truncation_radius)  # build before fanning out
    if threads == 1 or len(queries) < 2 * threads:
        mass, value = _raw_sums(ds, ctx, queries)
    else:
        chunks = np.array_split(queries, threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: _raw_sums(ds, ctx, c), chunks))
        mass = np.concatenate([p[0] for p in parts])
        value = np.concatenate([p[1] for p in parts])
    total = ds.total_weight
    return KernelSums(mass / total, value / total)


def _single(ds, q):
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if q.shape != (ds.d,):
        raise ContractError('dimension mismatch: dataset has d=%d, query has '
                            '%d coordinates' % (ds.d, q.size))
    return q[None, :]


def kde(ds, ctx, q):
    """Weighted kernel density of ds at location q."""
    return float(kernel_sums(ds, ctx, _single(ds, q), threads=1).kde[0])


def wkde(ds, ctx, q):
    """Weighted value density of ds at location q."""
    return float(kernel_sums(ds, ctx, _single(ds, q), threads=1).wkde[0])


def reg(ds, ctx, q):
    """Nadaraya-Watson regression of ds at q.

    :raises UndefinedAtQuery: when kde(q) is zero (after truncation or
    underflow).
    """
    q = _single(ds, q)
    sums = kernel_sums(ds, ctx, q, threads=1)
    if not sums.kde[0] > 0:
        raise UndefinedAtQuery(q[0])
    return float(sums.wkde[0] / sums.kde[0])


def regression_from_sums(sums):
    """Turn KernelSums into a RegressionResult."""
    defined = sums.kde > 0
    values = np.full(len(sums.kde), np.nan)
    values[defined] = sums.wkde[defined] / sums.kde[defined]
    return RegressionResult(values, defined)


def reg_batch(ds, ctx, queries, threads=None):
    """Evaluate reg at every query; order matches the input.

    :return: a RegressionResult; undefined queries are marked in .defined.
    """
    queries = _as_queries(ds, queries)
    if len(queries) == 0:
        return RegressionResult(np.empty(0), np.empty(0, dtype=bool))
    return regression_from_sums(kernel_sums(ds, ctx, queries, threads))
