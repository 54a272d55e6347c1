"""
Grid indexing and Z-order (Morton) keys.

Grid cells are half-open intervals (lo, hi] per coordinate: with side gamma
and origin o, coordinate x_j lies in cell ceil((x_j - o_j)/gamma) - 1. A
point exactly on a cell's lower boundary therefore belongs to the cell
below, so with gamma = 2 the points x = 1 and x = 2 share cell 0 while x = 3
starts cell 1.

Morton keys interleave the bits of d non-negative integers, coordinate 0
contributing the least significant bit of every group of d bits.
"""
import itertools
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from kregcore import defaults
from kregcore.model.errors import ContractError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GridSpec:
    """A uniform grid of side gamma anchored at origin.

    :param gamma: (float) cell side length.
    :param origin: (tuple of d floats) grid anchor.
    """
    gamma: float
    origin: Tuple[float, ...] = (0.0,)

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ContractError('gamma must be positive and finite, got %r'
                                % (self.gamma,))
        origin = tuple(float(o) for o in np.atleast_1d(self.origin))
        if not origin:
            raise ContractError('origin needs at least one coordinate')
        object.__setattr__(self, 'origin', origin)

    @classmethod
    def anchored(cls, gamma, d, origin=None):
        """Return a d-dimensional grid; origin defaults to all zeros."""
        if origin is None:
            origin = (0.0,) * d
        spec = cls(gamma, tuple(np.atleast_1d(origin).tolist()))
        if spec.d != d:
            raise ContractError('origin has %d coordinates, expected %d'
                                % (spec.d, d))
        return spec

    @property
    def d(self):
        return len(self.origin)


def cell_indices(spec, x):
    """Vectorized cell_of: return the (n, d) int64 cell indices of the rows
    of x."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[1] != spec.d:
        raise ContractError('dimension mismatch: points have %d coordinates, '
                            'grid has %d' % (x.shape[1], spec.d))
    origin = np.asarray(spec.origin)
    return (np.ceil((x - origin) / spec.gamma) - 1).astype(np.int64)


def cell_of(spec, x):
    """Return the cell index (tuple of d ints) containing location x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return tuple(cell_indices(spec, x[None, :])[0].tolist())


def cell_center(spec, idx):
    """Return the center of cell idx: origin + (idx + 0.5) * gamma."""
    idx = np.atleast_1d(np.asarray(idx, dtype=float))
    if idx.shape[-1] != spec.d:
        raise ContractError('cell index has %d coordinates, grid has %d'
                            % (idx.shape[-1], spec.d))
    centers = np.asarray(spec.origin) + (idx + 0.5) * spec.gamma
    if centers.ndim == 1:
        return tuple(centers.tolist())
    return centers


def neighbor_offsets(d):
    """Return the 3^d - 1 nonzero offsets of the Moore neighborhood as an
    array, in lexicographic order."""
    offsets = np.array(list(itertools.product((-1, 0, 1), repeat=d)),
                       dtype=np.int64)
    return offsets[np.any(offsets != 0, axis=1)]


def empty_adjacent_cell_array(occupied):
    """Array form of empty_adjacent_cells.

    :param occupied: (m, d) int array of occupied cell indices.
    :return: (k, d) int64 array of unoccupied Moore neighbors, sorted
    lexicographically.
    """
    occupied = np.unique(np.asarray(occupied, dtype=np.int64), axis=0)
    if occupied.size == 0:
        raise ContractError('occupied cell set is empty')
    d = occupied.shape[1]
    candidates = (occupied[:, None, :]
                  + neighbor_offsets(d)[None, :, :]).reshape(-1, d)
    candidates = np.unique(candidates, axis=0)
    taken = {tuple(row) for row in occupied.tolist()}
    keep = [tuple(row) not in taken for row in candidates.tolist()]
    return candidates[np.asarray(keep, dtype=bool)]


def empty_adjacent_cells(spec, occupied):
    """Return the set of empty cells adjacent (3^d - 1 Moore neighborhood)
    to some occupied cell.

    :param spec: the GridSpec the indices belong to.
    :param occupied: a nonempty set of cell indices (tuples of ints).
    :return: a set of cell index tuples, disjoint from occupied.
    """
    occupied = [tuple(np.atleast_1d(c).tolist()) for c in occupied]
    if not occupied:
        raise ContractError('occupied cell set is empty')
    if any(len(c) != spec.d for c in occupied):
        raise ContractError('cell indices must have %d coordinates' % spec.d)
    array = empty_adjacent_cell_array(np.array(occupied, dtype=np.int64))
    return {tuple(row) for row in array.tolist()}


def _check_bits(d, bits_per_dim):
    if bits_per_dim < 1 or d * bits_per_dim > 64:
        raise ContractError('bit budget exceeded: %d dimensions x %d bits > '
                            '64' % (d, bits_per_dim))


def morton_keys(q, bits_per_dim):
    """Vectorized morton_key for an (n, d) array of non-negative integers.

    :return: (n,) uint64 array of interleaved keys.
    """
    q = np.asarray(q)
    if q.ndim == 1:
        q = q[:, None]
    n, d = q.shape
    _check_bits(d, bits_per_dim)
    if np.any(q < 0) or (bits_per_dim < 63
                         and np.any(q >= (1 << bits_per_dim))):
        raise ContractError('coordinates must lie in [0, 2^%d)'
                            % bits_per_dim)
    q = q.astype(np.uint64)
    keys = np.zeros(n, dtype=np.uint64)
    one = np.uint64(1)
    for bit in range(bits_per_dim):
        for j in range(d):
            source = (q[:, j] >> np.uint64(bit)) & one
            keys |= source << np.uint64(bit * d + j)
    return keys


def morton_key(q, bits_per_dim):
    """Interleave the bits of the non-negative integer vector q.

    :param q: sequence of d integers, each < 2^bits_per_dim.
    :param bits_per_dim: bits taken from every coordinate.
    :return: (int) the Morton key.
    """
    q = [int(c) for c in np.atleast_1d(q)]
    _check_bits(len(q), bits_per_dim)
    if any(c < 0 or c >= (1 << bits_per_dim) for c in q):
        raise ContractError('coordinates must lie in [0, 2^%d)'
                            % bits_per_dim)
    d = len(q)
    key = 0
    for bit in range(bits_per_dim):
        for j, c in enumerate(q):
            key |= ((c >> bit) & 1) << (bit * d + j)
    return key


def quantize(x, lower, upper, bits):
    """Affinely map every coordinate of x from [lower, upper] onto the
    integers 0 .. 2^bits - 1. A dimension with zero extent maps to 0.

    :return: (n, d) int64 array.
    """
    x = np.asarray(x, dtype=float)
    lower = np.asarray(lower, dtype=float)
    span = np.asarray(upper, dtype=float) - lower
    top = float((1 << bits) - 1)
    scale = np.where(span > 0, top / np.where(span > 0, span, 1.0), 0.0)
    q = np.floor((x - lower) * scale)
    return np.clip(q, 0, top).astype(np.int64)


def sort_by_zorder(ds, bits_per_dim=None):
    """Return the permutation of point indices that sorts ds in Z-order.

    Coordinates are quantized over the dataset's own extent to
    bits_per_dim bits (defaults.default_bits(d) if not given) and stably
    sorted by Morton key, so equal keys keep their input order. For d = 1 the
    Morton key is the coordinate itself and the points are sorted by x
    directly.
    """
    if ds.d == 1:
        return np.argsort(ds.x[:, 0], kind='stable')
    bits = defaults.default_bits(ds.d) if bits_per_dim is None \
        else bits_per_dim
    _check_bits(ds.d, bits)
    q = quantize(ds.x, ds.lower, ds.upper, bits)
    return np.argsort(morton_keys(q, bits), kind='stable')
