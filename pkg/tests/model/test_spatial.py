import numpy as np
import pytest

from kregcore.model.data import Dataset
from kregcore.model.errors import ContractError
from kregcore.model.spatial import (GridSpec, cell_center, cell_indices,
                                    cell_of, empty_adjacent_cells, morton_key,
                                    morton_keys, neighbor_offsets, quantize,
                                    sort_by_zorder)
from .accepted_data import TOY_EMPTY_NEIGHBORS, TOY_OCCUPIED


def test_cell_of_half_open_cells():
    """Cells are (lo, hi]: a point on a lower boundary belongs below."""
    spec = GridSpec(2.0)
    assert cell_of(spec, 1.0) == (0,)
    assert cell_of(spec, 2.0) == (0,)
    assert cell_of(spec, 3.0) == (1,)
    assert cell_of(spec, 0.0) == (-1,)
    assert cell_of(GridSpec(1.0, (0.0, 0.0)), (0.5, 2.5)) == (0, 2)


def test_cell_indices_matches_cell_of():
    spec = GridSpec.anchored(0.3, 2, (0.1, -0.2))
    x = np.random.default_rng(0).normal(size=(50, 2))
    cells = cell_indices(spec, x)
    assert [tuple(row) for row in cells.tolist()] == [cell_of(spec, p)
                                                      for p in x]


def test_cell_center():
    spec = GridSpec(2.0)
    assert cell_center(spec, 2) == (5.0,)
    assert cell_center(spec, 6) == (13.0,)
    assert cell_center(GridSpec(1.0, (0.0, 0.0)), (0, 0)) == (0.5, 0.5)


def test_cell_center_round_trip():
    spec = GridSpec.anchored(0.25, 3, (1.0, 2.0, -3.0))
    for idx in [(0, 0, 0), (-4, 7, 2), (11, -1, -9)]:
        assert cell_of(spec, cell_center(spec, idx)) == idx


def test_grid_spec_validation():
    with pytest.raises(ContractError):
        GridSpec(0.0)
    with pytest.raises(ContractError):
        GridSpec.anchored(1.0, 2, (0.0,))
    with pytest.raises(ContractError):
        cell_of(GridSpec(1.0), (1.0, 2.0))


def test_neighbor_offsets():
    assert len(neighbor_offsets(1)) == 2
    assert len(neighbor_offsets(2)) == 8
    assert len(neighbor_offsets(3)) == 26


def test_empty_adjacent_cells():
    spec = GridSpec(2.0)
    assert empty_adjacent_cells(spec, TOY_OCCUPIED) == TOY_EMPTY_NEIGHBORS
    assert empty_adjacent_cells(spec, {(0,)}) == {(-1,), (1,)}
    square = GridSpec(1.0, (0.0, 0.0))
    ring = empty_adjacent_cells(square, {(0, 0)})
    assert ring == {(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)} - {(0, 0)}


def test_empty_adjacent_cells_disjoint_from_occupied():
    spec = GridSpec(1.0, (0.0, 0.0))
    rng = np.random.default_rng(5)
    occupied = {tuple(c) for c in rng.integers(0, 6, size=(12, 2)).tolist()}
    empty = empty_adjacent_cells(spec, occupied)
    assert not empty & occupied
    assert len(empty) <= 8 * len(occupied)


def test_empty_adjacent_cells_needs_occupied():
    with pytest.raises(ContractError):
        empty_adjacent_cells(GridSpec(1.0), set())


def test_morton_key():
    assert morton_key((1, 0), 3) == 1
    assert morton_key((0, 1), 3) == 2
    assert morton_key((1, 1), 3) == 3
    assert morton_key((3, 5), 3) == 39
    assert morton_key((12345,), 21) == 12345


def test_morton_key_bit_budget():
    with pytest.raises(ContractError):
        morton_key((1, 1, 1), 22)
    with pytest.raises(ContractError):
        morton_key((8, 0), 3)
    morton_key((0, 0, 0, 0), 16)


def test_morton_keys_match_scalar_form():
    q = np.random.default_rng(1).integers(0, 1 << 10, size=(40, 3))
    keys = morton_keys(q, 10)
    assert keys.tolist() == [morton_key(row, 10) for row in q]


def test_morton_key_monotone_per_axis():
    for y in range(8):
        keys = [morton_key((x, y), 3) for x in range(8)]
        assert keys == sorted(keys)
        assert len(set(keys)) == 8


def test_quantize_degenerate_dimension():
    x = np.array([[0.0, 5.0], [1.0, 5.0], [0.5, 5.0]])
    q = quantize(x, x.min(axis=0), x.max(axis=0), 3)
    assert q[:, 1].tolist() == [0, 0, 0]
    assert q[:, 0].tolist() == [0, 7, 3]


def test_sort_by_zorder_1d_orders_by_x():
    """In one dimension Z-order is plain order by x, ties kept in input
    order."""
    ds = Dataset(np.array([3.0, 1.0, 2.0, 1.0, 0.5, 3.0, -1.0]), np.zeros(7))
    assert sort_by_zorder(ds).tolist() == [6, 4, 1, 3, 2, 0, 5]


def test_sort_by_zorder_2d_brute_force():
    rng = np.random.default_rng(11)
    x = rng.random((16, 2))
    ds = Dataset(x, np.zeros(16))
    q = quantize(x, x.min(axis=0), x.max(axis=0), 21)
    expected = sorted(range(16), key=lambda i: morton_key(q[i], 21))
    assert sort_by_zorder(ds).tolist() == expected


def test_sort_by_zorder_sorted_input_is_identity():
    x = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    ds = Dataset(x, np.zeros(4))
    assert sort_by_zorder(ds).tolist() == [0, 1, 2, 3]
