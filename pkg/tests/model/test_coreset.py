import math

import numpy as np
import pytest
from pytest import approx

from kregcore.model.coreset import (Coreset, Method, MethodSpec,
                                    ProgressiveSpec, aggregate_neighbor,
                                    g_aggregate, gamma_for_size,
                                    grid_cell_bound, grid_gamma_for,
                                    grid_select, k_center,
                                    progressive_g_aggregate, random_sample,
                                    sample_size_bound, z_aggregate,
                                    z_order_select)
from kregcore.model.data import Dataset, synth_ar1
from kregcore.model.errors import ContractError
from kregcore.model.kernel import GaussianKernel
from kregcore.model.regress import EvalContext, reg
from kregcore.model.spatial import GridSpec, cell_indices
from .accepted_data import (SAMPLE_SIZE_BOUND, TOY_G_AGGREGATE,
                            TOY_NEIGHBOR_CENTERS)
from .testdata import random_instance, toy_dataset

CTX = EvalContext.exact(GaussianKernel(1.0))


def rows(cs):
    return sorted(zip(cs.data.x[:, 0].tolist(), cs.data.y.tolist(),
                      cs.data.w.tolist()))


def test_method_labels():
    assert Method.from_label('g-aggregate') is Method.GA
    assert Method.from_label('prog-ga') is Method.PROG_GA
    assert Method.GA.code == 'ga'
    with pytest.raises(ValueError):
        Method.from_label('hilbert')


def test_random_sample():
    ds = synth_ar1(100, seed=1)
    everything = random_sample(ds, 100, seed=3)
    assert sorted(everything.data.x[:, 0].tolist()) == list(range(100))
    one = random_sample(ds, 1, seed=3)
    assert one.size == 1
    assert one.data.x[0, 0] in ds.x[:, 0]
    again = random_sample(ds, 30, seed=4)
    np.testing.assert_array_equal(again.data.x,
                                  random_sample(ds, 30, seed=4).data.x)
    assert again.seed == 4
    assert again.data.total_weight == 30.0


def test_size_out_of_range():
    ds = toy_dataset()
    for build in (random_sample, z_aggregate, z_order_select):
        with pytest.raises(ContractError):
            build(ds, 0)
        with pytest.raises(ContractError):
            build(ds, 7)
    with pytest.raises(ContractError):
        k_center(ds, 7)


def test_sample_size_bound():
    assert sample_size_bound(0.1, 0.1, 0.1, 1) == SAMPLE_SIZE_BOUND
    base = sample_size_bound(0.2, 0.1, 0.1, 2)
    assert sample_size_bound(0.1, 0.1, 0.1, 2) / base == approx(4.0,
                                                                rel=1e-3)
    assert sample_size_bound(0.3, 0.1, 0.1, 2) <= base
    assert sample_size_bound(0.2, 0.2, 0.1, 2) <= base
    assert sample_size_bound(0.2, 0.1, 0.2, 2) <= base
    with pytest.raises(ContractError):
        sample_size_bound(1.0, 0.1, 0.1, 1)


def test_k_center_hand_run():
    ds = Dataset([0.0, 1.0, 10.0], [2.0, 4.0, 9.0])
    cs = k_center(ds, 2, first=0)
    assert rows(cs) == [(0.5, 3.0, 2.0), (10.0, 9.0, 1.0)]


def test_k_center_extremes():
    ds = random_instance(2, n=40, d=2)
    single = k_center(ds, 1, seed=1)
    assert single.size == 1
    assert single.data.w[0] == 40.0
    np.testing.assert_allclose(single.data.x[0], ds.x.mean(axis=0))
    every = k_center(ds, 40, seed=1)
    assert sorted(map(tuple, every.data.x.tolist())) == \
        sorted(map(tuple, ds.x.tolist()))
    assert every.data.total_weight == 40.0


def test_z_order_select_stride():
    ds = Dataset(np.arange(10.0), np.arange(10.0) * 2)
    cs = z_order_select(ds, 5, offset=1)
    assert cs.data.x[:, 0].tolist() == [1.0, 3.0, 5.0, 7.0, 9.0]
    everything = z_order_select(ds, 10, seed=0)
    assert everything.data.x[:, 0].tolist() == list(range(10))


def test_z_order_select_seeded_offset():
    """The drawn offset r gives positions r, r + h, ... of the sorted data."""
    x = np.random.default_rng(3).permutation(12).astype(float)
    ds = Dataset(x, np.zeros(12))
    cs = z_order_select(ds, 4, seed=21)
    r = int(np.random.default_rng(21).integers(0, 3))
    assert cs.data.x[:, 0].tolist() == [r, r + 3.0, r + 6.0, r + 9.0]


def test_z_order_select_per_block():
    ds = Dataset(np.arange(20.0), np.zeros(20))
    cs = z_order_select(ds, 5, seed=2, per_block=True)
    picks = cs.data.x[:, 0]
    assert [int(p // 4) for p in picks] == [0, 1, 2, 3, 4]
    assert cs.params == {'size': 5, 'per_block': True}


def test_z_aggregate_blocks():
    ds = Dataset([0.0, 1.0, 2.0, 3.0], [0.0, 10.0, 20.0, 30.0])
    assert rows(z_aggregate(ds, 2)) == [(0.5, 5.0, 2.0), (2.5, 25.0, 2.0)]
    remainder = z_aggregate(Dataset(np.arange(5.0), np.arange(5.0)), 2)
    assert remainder.data.w.tolist() == [2.0, 3.0]
    assert remainder.data.x[:, 0].tolist() == [0.5, 3.0]
    itself = z_aggregate(ds, 4)
    np.testing.assert_array_equal(itself.data.x, ds.x)


def test_grid_select_toy():
    ds = toy_dataset()
    cs = grid_select(ds, 2.0, seed=5)
    assert cs.data.w.tolist() == [2.0, 1.0, 2.0, 1.0]
    members = [{1.0, 2.0}, {3.0}, {15.0, 16.0}, {17.0}]
    for x, cell in zip(cs.data.x[:, 0], members):
        assert x in cell
    again = grid_select(ds, 2.0, seed=5)
    np.testing.assert_array_equal(cs.data.x, again.data.x)
    whole = grid_select(ds, 100.0, seed=1)
    assert whole.size == 1 and whole.data.w[0] == 6.0


def test_g_aggregate_toy():
    cs = g_aggregate(toy_dataset(), 2.0)
    expected = np.array(TOY_G_AGGREGATE)
    np.testing.assert_allclose(cs.data.x[:, 0], expected[:, 0], atol=1e-12)
    np.testing.assert_allclose(cs.data.y, expected[:, 1], atol=1e-12)
    assert cs.data.w.tolist() == expected[:, 2].tolist()
    assert cs.seed is None
    assert cs.params == {'gamma': 2.0}


def test_g_aggregate_limits():
    ds = toy_dataset()
    fine = g_aggregate(ds, 0.01)
    np.testing.assert_array_equal(fine.data.x, ds.x)
    np.testing.assert_array_equal(fine.data.y, ds.y)
    coarse = g_aggregate(Dataset([0.5, 0.7, 0.9], [1.0, 2.0, 6.0]), 1.0)
    assert rows(coarse) == [(approx(0.7), 3.0, 3.0)]


def test_g_aggregate_idempotent():
    ds = random_instance(8, n=300, d=2)
    once = g_aggregate(ds, 0.4)
    twice = g_aggregate(once.data, 0.4)
    np.testing.assert_array_equal(twice.data.w, once.data.w)
    np.testing.assert_allclose(twice.data.x, once.data.x, rtol=1e-14)
    np.testing.assert_allclose(twice.data.y, once.data.y, rtol=1e-14)


def test_g_aggregate_centroids_stay_in_cells():
    ds = random_instance(9, n=400, d=2)
    spec = GridSpec.anchored(0.35, 2)
    cs = g_aggregate(ds, 0.35)
    occupied = np.unique(cell_indices(spec, ds.x), axis=0)
    np.testing.assert_array_equal(cell_indices(spec, cs.data.x), occupied)


def test_aggregate_neighbor_toy():
    ds = toy_dataset()
    cs = aggregate_neighbor(ds, 2.0, CTX)
    assert cs.size == 8
    added = cs.data.x[4:, 0].tolist()
    assert added == TOY_NEIGHBOR_CENTERS
    assert cs.data.w[4:].tolist() == [1.0] * 4
    assert cs.data.y[6] == approx(50.0, abs=1e-9)
    np.testing.assert_array_equal(cs.data.x[:4],
                                  g_aggregate(ds, 2.0).data.x)
    for x, y in zip(added, cs.data.y[4:]):
        assert y == approx(reg(ds, CTX, x), rel=1e-12)


def test_aggregate_neighbor_skips_undefined_centers():
    ds = Dataset([0.5], [3.0])
    ctx = EvalContext.truncated(GaussianKernel(0.01), 10.0)
    cs = aggregate_neighbor(ds, 1.0, ctx)
    assert cs.size == 1


def test_aggregate_neighbor_dense_1d():
    """Data occupying consecutive cells only gains the two outer cells."""
    ds = Dataset(np.arange(1.0, 11.0), np.arange(10.0))
    cs = aggregate_neighbor(ds, 1.0, CTX)
    assert cs.size == 12
    assert cs.data.x[10:, 0].tolist() == [-0.5, 10.5]


def test_count_preservation_and_range():
    ds = random_instance(10, n=250, d=2)
    for cs in (grid_select(ds, 0.5, seed=1), g_aggregate(ds, 0.5),
               k_center(ds, 17, seed=2)):
        assert cs.data.total_weight == approx(250.0, rel=1e-14)
    an = aggregate_neighbor(ds, 0.5, CTX)
    ga_size = g_aggregate(ds, 0.5).size
    assert an.data.w[:ga_size].sum() == approx(250.0, rel=1e-14)
    for cs in (an, z_aggregate(ds, 20), k_center(ds, 9, seed=0)):
        assert np.all(cs.data.y >= ds.y.min() - 1e-9)
        assert np.all(cs.data.y <= ds.y.max() + 1e-9)


def test_grid_gamma_for():
    assert grid_gamma_for(0.1, 1.0, 0.1, 1) == approx(0.00125)
    assert grid_gamma_for(0.1, 1.0, 0.1, 4) == approx(0.000625)
    with pytest.raises(ContractError):
        grid_gamma_for(0.1, 0.0, 0.1, 1)


def test_grid_cell_bound_tracks_delta():
    """Cells along the data diameter grow like delta/(eps rho)."""
    ds = synth_ar1(1000, seed=2)
    gamma = grid_gamma_for(0.5, 50.0, 0.5, 1)
    bound = grid_cell_bound(ds, gamma)
    assert bound == pytest.approx(999.0 / gamma, abs=2)
    assert g_aggregate(ds, gamma).size <= bound


def test_gamma_for_size():
    ds = synth_ar1(5000, seed=4)
    for size in (10, 100, 1000):
        gamma = gamma_for_size(ds, size)
        cells = g_aggregate(ds, gamma).size
        assert cells <= size
        assert cells >= 0.9 * size
    full = gamma_for_size(ds, 5000)
    assert g_aggregate(ds, full).size == 5000


def test_progressive_spec():
    spec = ProgressiveSpec(1.0, 4.0, a=2.0, region_count=3)
    assert [spec.width(i) for i in (1, 2, 3)] == [4.0, 8.0, 16.0]
    assert [spec.gamma(i) for i in (1, 2, 3)] == [1.0, 2.0, 4.0]
    assert spec.cells_per_region == 4
    with pytest.raises(ContractError):
        ProgressiveSpec(1.5, 4.0)
    with pytest.raises(ContractError):
        ProgressiveSpec(1.0, 4.0, a=1.0)


def test_progressive_spec_from_error():
    spec = ProgressiveSpec.from_error(0.1, 10.0, 0.5, 10.0)
    assert spec.gamma1 == approx(0.0625)
    assert spec.cells_per_region == 160
    rounded = ProgressiveSpec.from_error(0.1, 10.0, 0.5, 10.01)
    assert rounded.cells_per_region == 161


def test_progressive_regions_and_cells():
    spec = ProgressiveSpec(1.0, 4.0, a=2.0, region_count=3)
    ds = Dataset(-np.arange(0.0, 28.5, 0.5), np.ones(57))
    cs = progressive_g_aggregate(ds, spec)
    assert cs.size == 12
    assert cs.data.total_weight == 57.0
    x = cs.data.x[:, 0]
    assert np.all(np.diff(x) > 0)
    assert np.count_nonzero(x >= -4.0) == 4
    assert np.count_nonzero((x < -4.0) & (x >= -12.0)) == 4
    assert np.count_nonzero(x < -12.0) == 4


def test_progressive_single_region_is_g_aggregate():
    ds = Dataset(-np.random.default_rng(1).random(200) * 10.0,
                 np.random.default_rng(2).random(200))
    spec = ProgressiveSpec(0.5, 10.0, region_count=1)
    cs = progressive_g_aggregate(ds, spec)
    plain = g_aggregate(ds, 0.5)
    np.testing.assert_allclose(cs.data.x, plain.data.x, rtol=1e-14)
    np.testing.assert_allclose(cs.data.y, plain.data.y, rtol=1e-14)
    np.testing.assert_array_equal(cs.data.w, plain.data.w)


def test_progressive_drops_old_points():
    ds = Dataset([-30.0, -2.0, 0.0], [1.0, 2.0, 3.0])
    cs = progressive_g_aggregate(ds, ProgressiveSpec(1.0, 4.0, 2.0, 2))
    assert cs.data.total_weight == 2.0


def test_progressive_rejects_future_points():
    with pytest.raises(ContractError):
        progressive_g_aggregate(Dataset([1.0], [1.0]),
                                ProgressiveSpec(1.0, 4.0))


def test_progressive_size_grows_logarithmically():
    """Dense streams over spans T need ceil(log_a(T/width1 (a-1) + 1))
    regions of width1/gamma1 cells each."""
    spec = ProgressiveSpec(2.0, 20.0, a=1.5)
    for span in (1e3, 1e4, 1e5, 1e6):
        expected = math.ceil(math.log(span / 20.0 * 0.5 + 1.0, 1.5))
        assert spec.regions_for_span(span) == expected
        ds = Dataset(-np.arange(0.0, span + 1.0), np.zeros(int(span) + 1))
        cs = progressive_g_aggregate(ds, spec)
        assert cs.params['regions'] == expected
        assert (expected - 1) * 10 < cs.size <= expected * 10
        assert cs.data.total_weight == span + 1.0


def test_method_spec_build():
    ds = toy_dataset()
    ga = MethodSpec(Method.GA, gamma=2.0).build(ds)
    assert rows(ga) == rows(g_aggregate(ds, 2.0))
    sized = MethodSpec('ga', size=4).build(ds)
    assert sized.size <= 4
    an = MethodSpec(Method.AN, gamma=2.0).build(ds, ctx=CTX)
    assert an.size == 8
    rs = MethodSpec(Method.RS, size=3).build(ds, seed=2)
    assert isinstance(rs, Coreset) and rs.seed == 2
    with pytest.raises(ContractError):
        MethodSpec(Method.RS)
    with pytest.raises(ContractError):
        MethodSpec(Method.AN, gamma=2.0).build(ds)
    assert MethodSpec(Method.KCEN, k=2).with_size(3).k == 3
