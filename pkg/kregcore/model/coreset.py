"""
Coreset constructions for kernel regression.

Every construction takes a Dataset P and returns a Coreset: a smaller
weighted Dataset S whose regression reg_S stays close to reg_P, together with
the method, parameters and seed that produced it.

Provides the following classes:
    * Method: the construction methods, with their file labels and CLI codes
    * Coreset: a coreset and its provenance
    * ProgressiveSpec: region/resolution layout of the progressive grid scheme
    * MethodSpec: a method plus its parameters, buildable against any dataset

and the following construction functions:
    * random_sample, k_center, z_order_select, z_aggregate (size-driven)
    * grid_select, g_aggregate, aggregate_neighbor (grid-driven)
    * progressive_g_aggregate

and the sizing helpers sample_size_bound, grid_gamma_for, gamma_for_size,
grid_cell_bound.
"""
import dataclasses
import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from kregcore import defaults
from kregcore.model.data import Dataset
from kregcore.model.errors import ContractError
from kregcore.model.regress import reg_batch
from kregcore.model.spatial import (GridSpec, cell_center, cell_indices,
                                    empty_adjacent_cell_array, sort_by_zorder)

logger = logging.getLogger(__name__)


class Method(enum.Enum):
    """Construction methods as (CLI code, file label) pairs."""
    RS = ('rs', 'random-sample')
    KCEN = ('kcen', 'k-center')
    Z = ('z', 'z-order')
    ZA = ('za', 'z-aggregate')
    G = ('g', 'grid')
    GA = ('ga', 'g-aggregate')
    AN = ('an', 'aggregate-neighbor')
    PROG_GA = ('prog-ga', 'progressive-g-aggregate')

    def __init__(self, code, label):
        self.code = code
        self.label = label

    @classmethod
    def from_label(cls, text):
        """Look a method up by its file label or its CLI code."""
        for method in cls:
            if text in (method.label, method.code):
                return method
        raise ValueError('unknown coreset method %r' % (text,))

    @property
    def is_grid(self):
        return self in (Method.G, Method.GA, Method.AN)

    @property
    def is_randomized(self):
        return self in (Method.RS, Method.KCEN, Method.Z, Method.G)


@dataclass(frozen=True)
class Coreset:
    """A weighted point set standing in for a dataset.

    :param data: the coreset points (a Dataset).
    :param method: the Method that built it.
    :param params: dict of construction parameters, recorded in files.
    :param seed: the seed of randomized methods, None otherwise.
    :param source_hash: SHA-256 of the dataset the coreset summarizes.
    """
    data: Dataset
    method: Method
    params: dict = field(default_factory=dict)
    seed: Optional[int] = None
    source_hash: Optional[str] = None

    def __post_init__(self):
        if not isinstance(self.data, Dataset):
            raise ContractError('coreset data must be a Dataset')
        if not isinstance(self.method, Method):
            object.__setattr__(self, 'method',
                               Method.from_label(self.method))
        object.__setattr__(self, 'params', dict(self.params))

    @property
    def size(self):
        return self.data.n

    def __len__(self):
        return self.data.n


def _check_count(name, value, n):
    if isinstance(value, bool) or int(value) != value or not 1 <= value <= n:
        raise ContractError('%s must be an integer in [1, %d], got %r'
                            % (name, n, value))
    return int(value)


def _check_unit(**values):
    for name, value in values.items():
        if not 0 < value < 1:
            raise ContractError('%s must lie in (0, 1), got %r'
                                % (name, value))


def _make(P, data, method, params, seed=None):
    coreset = Coreset(data, method, params, seed=seed,
                      source_hash=P.source_hash())
    logger.debug('%s: %d points from %d', method.label, coreset.size, P.n)
    return coreset


def _group_means(P, labels, groups):
    """Weighted means of x and y, and total weight, of every label group.

    Sums run in point index order within a group.

    :return: (x, y, w) arrays with one row per group.
    """
    weight = np.bincount(labels, weights=P.w, minlength=groups)
    x = np.column_stack([np.bincount(labels, weights=P.w * P.x[:, j],
                                     minlength=groups)
                         for j in range(P.d)]) / weight[:, None]
    y = np.bincount(labels, weights=P.w * P.y, minlength=groups) / weight
    return x, y, weight


def random_sample(P, s, seed=None):
    """Uniform random sample of s distinct points, without replacement.

    Sampled points keep their own weights (1 for raw data).
    """
    s = _check_count('sample size', s, P.n)
    rng = np.random.default_rng(seed)
    chosen = rng.choice(P.n, size=s, replace=False)
    return _make(P, P.take(chosen), Method.RS, {'size': s}, seed)


def sample_size_bound(eps, rho, delta, d):
    """Sample size ceil((d ln(1/rho) + ln(2/delta)) / (eps rho)^2) that
    makes a random sample a (rho, eps)-coreset with probability 1 - delta.

    The constant of the asymptotic bound is taken as 1, so the result is an
    order-of-magnitude guide rather than a guarantee.
    """
    _check_unit(eps=eps, rho=rho, delta=delta)
    if d < 1:
        raise ContractError('d must be at least 1')
    bound = (d * math.log(1.0 / rho) + math.log(2.0 / delta)) \
        / (eps * eps * rho * rho)
    return int(math.ceil(bound))


def k_center(P, k, seed=None, first=None):
    """Greedy (Gonzalez) k-center clustering, aggregated per class.

    The first center is drawn with seed unless given as first. Each further
    center is the point farthest from its nearest center, the lowest index
    winning ties. Every point then belongs to its nearest center (lowest
    rank on ties) and each nonempty class becomes one point at its weighted
    mean x and y, weighted by the class's total weight.
    """
    k = _check_count('k', k, P.n)
    if first is None:
        first = int(np.random.default_rng(seed).integers(P.n))
    elif not 0 <= first < P.n:
        raise ContractError('first center %r out of range' % (first,))
    x = P.x
    diff = x - x[first]
    dist = np.einsum('ij,ij->i', diff, diff)
    owner = np.zeros(P.n, dtype=np.intp)
    for rank in range(1, k):
        nxt = int(np.argmax(dist))
        diff = x - x[nxt]
        candidate = np.einsum('ij,ij->i', diff, diff)
        closer = candidate < dist
        owner[closer] = rank
        dist = np.where(closer, candidate, dist)
    ranks, labels = np.unique(owner, return_inverse=True)
    labels = labels.reshape(-1)
    cx, cy, cw = _group_means(P, labels, len(ranks))
    return _make(P, Dataset(cx, cy, cw), Method.KCEN, {'k': k}, seed)


def _blocks(n, s):
    """Start positions of s consecutive blocks of floor(n/s) points; the
    last block absorbs the remainder."""
    return (n // s) * np.arange(s)


def z_order_select(P, s, seed=None, offset=None, per_block=False,
                   bits_per_dim=None):
    """Strided pick along the Z-order curve.

    After Z-sorting, take positions r + h*i for i = 0 .. s-1 with
    h = floor(|P|/s) and one seeded offset r in [0, h-1]. With per_block
    every block of h points gets its own offset.

    :param offset: fix r instead of drawing it.
    """
    s = _check_count('sample size', s, P.n)
    h = P.n // s
    order = sort_by_zorder(P, bits_per_dim)
    rng = np.random.default_rng(seed)
    if per_block:
        shifts = rng.integers(0, h, size=s)
    else:
        if offset is None:
            offset = int(rng.integers(0, h))
        elif not 0 <= offset < h:
            raise ContractError('offset must lie in [0, %d], got %r'
                                % (h - 1, offset))
        shifts = offset
    chosen = order[_blocks(P.n, s) + shifts]
    params = {'size': s}
    if per_block:
        params['per_block'] = True
    return _make(P, P.take(chosen), Method.Z, params, seed)


def z_aggregate(P, s, bits_per_dim=None):
    """Z-sort, cut into s consecutive blocks and replace each block by its
    weighted mean, weighted by the block's total weight."""
    s = _check_count('sample size', s, P.n)
    order = sort_by_zorder(P, bits_per_dim)
    starts = _blocks(P.n, s)
    w = P.w[order]
    weight = np.add.reduceat(w, starts)
    x = np.add.reduceat(P.x[order] * w[:, None], starts, axis=0) \
        / weight[:, None]
    y = np.add.reduceat(P.y[order] * w, starts) / weight
    return _make(P, Dataset(x, y, weight), Method.ZA, {'size': s})


def grid_spec_for(P, gamma, origin=None):
    """Return the GridSpec for P with side gamma.

    :param origin: None or 'zero' (all-zero anchor), 'extent' (the minimum
    corner of P's bounding box) or a sequence of d coordinates.
    """
    if origin is None or (isinstance(origin, str) and origin == 'zero'):
        return GridSpec.anchored(gamma, P.d)
    if isinstance(origin, str):
        if origin != 'extent':
            raise ContractError('unknown grid origin %r' % (origin,))
        return GridSpec.anchored(gamma, P.d, P.lower)
    return GridSpec.anchored(gamma, P.d, origin)


def _grid_params(gamma, origin):
    params = {'gamma': float(gamma)}
    if isinstance(origin, str) and origin == 'extent':
        params['origin'] = 'extent'
    elif origin is not None and not isinstance(origin, str):
        params['origin'] = ';'.join(repr(float(o))
                                    for o in np.atleast_1d(origin))
    return params


def _occupancy(P, spec):
    """Return (cells, labels): the occupied cells in lexicographic order and
    the position of every point's cell in that list."""
    cells, labels = np.unique(cell_indices(spec, P.x), axis=0,
                              return_inverse=True)
    return cells, labels.reshape(-1)


def grid_select(P, gamma, seed=None, origin=None):
    """Keep one uniformly chosen member of every nonempty grid cell,
    weighted by the cell's total weight."""
    spec = grid_spec_for(P, gamma, origin)
    cells, labels = _occupancy(P, spec)
    keys = np.random.default_rng(seed).random(P.n)
    order = np.lexsort((keys, labels))
    sorted_labels = labels[order]
    heads = np.flatnonzero(
        np.r_[True, sorted_labels[1:] != sorted_labels[:-1]])
    chosen = order[heads]
    weight = np.bincount(labels, weights=P.w, minlength=len(cells))
    data = Dataset(P.x[chosen], P.y[chosen], weight)
    return _make(P, data, Method.G, _grid_params(gamma, origin), seed)


def g_aggregate(P, gamma, origin=None):
    """Replace the points of every nonempty grid cell by their weighted mean
    (x and y), weighted by the cell's total weight.

    Output points are in lexicographic cell order. With gamma = 2 and the
    zero origin, {(1,100), (2,40), (3,0), (15,50), (16,50), (17,50)} becomes
    {(1.5,70), (3,0), (15.5,50), (17,50)} with weights (2, 1, 2, 1).
    """
    spec = grid_spec_for(P, gamma, origin)
    cells, labels = _occupancy(P, spec)
    x, y, weight = _group_means(P, labels, len(cells))
    return _make(P, Dataset(x, y, weight), Method.GA,
                 _grid_params(gamma, origin))


def aggregate_neighbor(P, gamma, ctx, origin=None, threads=None):
    """G-Aggregate plus the empty neighbors of occupied cells.

    Every empty cell in the Moore neighborhood of an occupied cell adds one
    point at the cell center, valued by the regression over the full data
    set P, with weight 1. Centers where that regression is undefined are
    skipped.

    :param ctx: the EvalContext used to evaluate reg_P at the centers.
    """
    spec = grid_spec_for(P, gamma, origin)
    cells, labels = _occupancy(P, spec)
    x, y, weight = _group_means(P, labels, len(cells))
    empty = empty_adjacent_cell_array(cells)
    centers = cell_center(spec, empty)
    values = reg_batch(P, ctx, centers, threads)
    skipped = int(np.count_nonzero(~values.defined))
    if skipped:
        logger.warning('aggregate-neighbor: regression undefined at %d of %d '
                       'neighbor centers; skipped', skipped, len(empty))
    keep = values.defined
    data = Dataset(np.vstack([x, centers[keep]]),
                   np.concatenate([y, values.values[keep]]),
                   np.concatenate([weight, np.ones(np.count_nonzero(keep))]))
    params = _grid_params(gamma, origin)
    params['sigma'] = ctx.kernel.sigma
    params['kernel'] = ctx.kernel.form.value
    return _make(P, data, Method.AN, params)


def grid_gamma_for(eps, sigma, rho, d):
    """Grid side eps*sigma*rho/(8 sqrt(d)) for which Grid and G-Aggregate
    give a (rho, eps)-coreset."""
    _check_unit(eps=eps, rho=rho)
    if not sigma > 0:
        raise ContractError('sigma must be positive, got %r' % (sigma,))
    if d < 1:
        raise ContractError('d must be at least 1')
    return eps * sigma * rho / (8.0 * math.sqrt(d))


def _cell_count(P, spec):
    cells = cell_indices(spec, P.x)
    if P.d == 1:
        return len(np.unique(cells[:, 0]))
    return len(np.unique(cells, axis=0))


def gamma_for_size(P, s, origin=None, iterations=60):
    """Find a grid side whose number of nonempty cells is as large as
    possible without exceeding s, by bisection on log(gamma).

    If every distinct location can get a cell of its own, a side that does
    so is returned.
    """
    if isinstance(s, bool) or int(s) != s or s < 1:
        raise ContractError('size must be a positive integer, got %r' % (s,))

    def count(gamma):
        return _cell_count(P, grid_spec_for(P, gamma, origin))

    span = float(np.max(P.upper - P.lower))
    reach = float(np.max(np.abs(np.vstack([P.upper, P.lower])
                                - np.asarray(grid_spec_for(P, 1.0,
                                                           origin).origin))))
    hi = max(span, reach, 1.0)
    for _ in range(200):
        if count(hi) <= s:
            break
        hi *= 2.0
    else:
        raise ContractError('no grid with this origin has at most %d cells'
                            % s)
    distinct = len(np.unique(P.x, axis=0))
    lo = hi
    for _ in range(200):
        lo /= 2.0
        found = count(lo)
        if found > s:
            break
        if found == distinct:
            return lo
    else:
        return lo
    for _ in range(iterations):
        mid = math.sqrt(lo * hi)
        if count(mid) > s:
            lo = mid
        else:
            hi = mid
    return hi


def grid_cell_bound(ds, gamma, origin=None):
    """Number of grid cells covering the bounding box of ds: an upper bound
    on the size of a Grid or G-Aggregate coreset."""
    spec = grid_spec_for(ds, gamma, origin)
    corners = cell_indices(spec, np.vstack([ds.lower, ds.upper]))
    return int(np.prod(corners[1] - corners[0] + 1))


@dataclass(frozen=True)
class ProgressiveSpec:
    """Region layout of the progressive grid scheme for time series.

    Time runs up to "now" at x = 0. Region R_1 is the newest, of width
    width1 and grid side gamma1; region R_i has width a^(i-1) * width1 and
    side a^(i-1) * gamma1, so every region holds width1/gamma1 cells.

    :param gamma1: finest grid side.
    :param width1: width of the newest region; a whole number of gamma1.
    :param a: growth factor, > 1.
    :param region_count: number of regions, or None to cover all the data.
    """
    gamma1: float
    width1: float
    a: float = defaults.PROGRESSIVE_GROWTH
    region_count: Optional[int] = None

    def __post_init__(self):
        if not (self.gamma1 > 0 and self.width1 > 0):
            raise ContractError('gamma1 and width1 must be positive')
        if not self.a > 1:
            raise ContractError('growth factor a must exceed 1, got %r'
                                % (self.a,))
        ratio = self.width1 / self.gamma1
        if round(ratio) < 1 or abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ContractError('width1/gamma1 must be a positive integer, '
                                'got %r' % (ratio,))
        if self.region_count is not None and (
                int(self.region_count) != self.region_count
                or self.region_count < 1):
            raise ContractError('region_count must be a positive integer')

    @classmethod
    def from_error(cls, eps, sigma, rho, width1, a=defaults.PROGRESSIVE_GROWTH,
                   region_count=None):
        """Spec with gamma1 = eps*sigma*rho/8; width1 is rounded up to a
        whole number of cells."""
        _check_unit(eps=eps, rho=rho)
        if not sigma > 0:
            raise ContractError('sigma must be positive')
        gamma1 = eps * sigma * rho / 8.0
        cells = max(1, math.ceil(width1 / gamma1 - 1e-9))
        return cls(gamma1, cells * gamma1, a, region_count)

    @property
    def cells_per_region(self):
        return int(round(self.width1 / self.gamma1))

    def gamma(self, i):
        """Grid side of region i (1-based)."""
        return self.a ** (i - 1) * self.gamma1

    def width(self, i):
        """Width of region i (1-based)."""
        return self.a ** (i - 1) * self.width1

    def edges(self, count):
        """Distances from now to the old edge of regions 1 .. count."""
        return np.cumsum([self.width(i) for i in range(1, count + 1)])

    def regions_for_span(self, span):
        """Smallest number of regions whose total width covers span, i.e.
        ceil(log_a(span/width1 * (a-1) + 1))."""
        if not span >= 0:
            raise ContractError('span must be non-negative')
        count, covered = 1, self.width1
        while covered < span:
            count += 1
            covered += self.width(count)
        return count


def progressive_g_aggregate(P, spec):
    """G-Aggregate with resolution decreasing into the past.

    P must be one-dimensional with every x <= 0 (shift the data so that the
    latest time is 0). A point x belongs to region i when
    -edge(i) <= x < -edge(i-1), with x = 0 in region 1; within region i
    cells of side gamma(i) are anchored at the region's newer edge. Output
    points are in ascending x.
    """
    if P.d != 1:
        raise ContractError('progressive aggregation needs one-dimensional '
                            'data')
    t = -P.x[:, 0]
    if np.any(t < 0):
        raise ContractError('progressive aggregation needs every x <= 0 '
                            '(latest x is %g)' % float(-t.min()))
    count = spec.region_count or spec.regions_for_span(float(t.max()))
    edges = spec.edges(count)
    inside = t <= edges[-1]
    if not np.all(inside):
        logger.info('progressive: dropping %d points older than %g',
                    np.count_nonzero(~inside), edges[-1])
    if not np.any(inside):
        raise ContractError('no points within the %d progressive regions'
                            % count)
    kept = P.take(np.flatnonzero(inside))
    t = t[inside]
    region = np.searchsorted(edges, t, side='left')
    newer = np.r_[0.0, edges[:-1]][region]
    side = spec.gamma(1) * spec.a ** region
    cell = np.ceil((-t + newer) / side) - 1
    cell = np.clip(cell, -spec.cells_per_region, -1).astype(np.int64)
    keys, labels = np.unique(np.column_stack([-region, cell]), axis=0,
                             return_inverse=True)
    x, y, weight = _group_means(kept, labels.reshape(-1), len(keys))
    params = {'gamma1': spec.gamma1, 'width1': spec.width1, 'a': spec.a,
              'regions': count}
    return _make(P, Dataset(x, y, weight), Method.PROG_GA, params)


@dataclass(frozen=True)
class MethodSpec:
    """A construction method with its parameters.

    Size-driven methods (RS, Z, ZA) need size; KCEN takes k (or size);
    grid methods take gamma, or a size converted with gamma_for_size;
    PROG_GA needs a ProgressiveSpec.
    """
    method: Method
    size: Optional[int] = None
    k: Optional[int] = None
    gamma: Optional[float] = None
    progressive: Optional[ProgressiveSpec] = None
    per_block: bool = False
    origin: Optional[object] = None

    def __post_init__(self):
        if not isinstance(self.method, Method):
            object.__setattr__(self, 'method', Method.from_label(self.method))
        method = self.method
        if method in (Method.RS, Method.Z, Method.ZA) and self.size is None:
            raise ContractError('%s needs a size' % method.label)
        if method is Method.KCEN and self.k is None and self.size is None:
            raise ContractError('k-center needs k')
        if method.is_grid and self.gamma is None and self.size is None:
            raise ContractError('%s needs gamma or a size' % method.label)
        if method is Method.PROG_GA and self.progressive is None:
            raise ContractError('progressive aggregation needs a '
                                'ProgressiveSpec')

    @property
    def label(self):
        return self.method.code

    @property
    def target(self):
        """The size-axis value of this spec (size, k or gamma)."""
        for value in (self.size, self.k, self.gamma):
            if value is not None:
                return value
        return None

    def with_size(self, size):
        """Copy of this spec targeting another size; None keeps it."""
        if size is None or self.method is Method.PROG_GA:
            return self
        if self.method is Method.KCEN:
            return dataclasses.replace(self, k=size, size=None)
        return dataclasses.replace(self, size=size, gamma=None)

    def resolved_gamma(self, P):
        if self.gamma is not None:
            return self.gamma
        return gamma_for_size(P, self.size, self.origin)

    def build(self, P, seed=None, ctx=None, threads=None):
        """Build the coreset of P.

        :param seed: seed of the randomized methods.
        :param ctx: EvalContext, required by aggregate-neighbor.
        """
        method = self.method
        if method is Method.RS:
            cs = random_sample(P, self.size, seed)
        elif method is Method.KCEN:
            cs = k_center(P, self.k if self.k is not None else self.size,
                          seed)
        elif method is Method.Z:
            cs = z_order_select(P, self.size, seed, per_block=self.per_block)
        elif method is Method.ZA:
            cs = z_aggregate(P, self.size)
        elif method is Method.G:
            cs = grid_select(P, self.resolved_gamma(P), seed, self.origin)
        elif method is Method.GA:
            cs = g_aggregate(P, self.resolved_gamma(P), self.origin)
        elif method is Method.AN:
            if ctx is None:
                raise ContractError('aggregate-neighbor needs an evaluation '
                                    'context')
            cs = aggregate_neighbor(P, self.resolved_gamma(P), ctx,
                                    self.origin, threads)
        else:
            cs = progressive_g_aggregate(P, self.progressive)
        logger.info('built %s coreset: %d points from %d', method.label,
                    cs.size, P.n)
        return cs
