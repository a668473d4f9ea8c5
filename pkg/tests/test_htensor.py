import numpy as np
import pytest

from h2cqm.assembly import QuadratureConfig, assemble_dense_tensor
from h2cqm.htensor import (
    CompressionParams,
    SizeCapError,
    block_errors,
    build_structure,
    compress,
    expand_dense,
    max_rank,
    rank_histogram,
    relative_error,
    storage_units,
    storage_units_dense,
)
from h2cqm.kernels import CqmScheme, FOUR_PI
from h2cqm.mesh import make_sphere


@pytest.fixture(scope="module")
def setup1():
    mesh = make_sphere(1)
    sch = CqmScheme(8, 8 * 0.5 * mesh.mesh_width(), 10 ** (-5 / 8))
    dense = assemble_dense_tensor(mesh, sch)
    return mesh, sch, dense


def test_single_frequency_rank_one(sphere1):
    sch = CqmScheme(1, 0.5, 1e-5)
    ht = compress(sphere1, sch, CompressionParams(n_min=8, m=2))
    assert ht.max_rank() <= 1


def test_near_only_expansion_equals_maca(tetra):
    sch = CqmScheme(4, 1.0, 10 ** (-5 / 4))
    ht = compress(tetra, sch, CompressionParams(eps=1e-10))
    assert len(ht.partition.blocks) == 1
    (blk,) = ht.blocks.values()
    np.testing.assert_array_equal(ht.expand_dense(), blk.expand())
    dense = assemble_dense_tensor(tetra, sch)
    assert relative_error(ht, dense) <= 1e-9


def test_far_block_m1_is_area_kernel_area(sphere2):
    sch = CqmScheme(4, 1.0, 0.1)
    ht = compress(sphere2, sch, CompressionParams(n_min=16, m=1, eps=1e-12))
    b = ht.partition.far[0]
    dense = ht.block_dense(b)
    cr = ht.row_basis.grids[b.row.id].points[0]
    cc = ht.row_basis.grids[b.col.id].points[0]
    r = np.linalg.norm(cr - cc)
    np.testing.assert_allclose(cr, ht.row_basis.grids[b.row.id].box.mean(axis=0), atol=1e-15)
    kern = np.exp(-sch.frequencies * r) / (FOUR_PI * r)
    expect = np.einsum("i,j,k->ijk", sphere2.areas[b.row.indices], sphere2.areas[b.col.indices], kern)
    np.testing.assert_allclose(dense, expect, rtol=1e-10)


def test_block_errors_aggregate(setup1):
    mesh, sch, dense = setup1
    ht = compress(mesh, sch, CompressionParams(n_min=8, m=3, eps=1e-4))
    errs = block_errors(ht, dense)
    total = np.linalg.norm(ht.expand_dense() - dense)
    assert np.sqrt(sum(e**2 for e in errs.values())) == pytest.approx(total, rel=1e-12)


def test_error_monotone_in_eps(setup1):
    mesh, sch, dense = setup1
    p4 = CompressionParams(n_min=8, m=3, eps=1e-4)
    p6 = CompressionParams(n_min=8, m=3, eps=1e-6)
    a, b = compress(mesh, sch, p4), compress(mesh, sch, p6)
    assert a.partition.structure() == b.partition.structure()
    assert relative_error(b, dense) <= relative_error(a, dense)
    assert relative_error(a, dense) <= 5e-2
    assert max(a.rank_histogram()) == a.max_rank() == max_rank(a) <= 32
    assert rank_histogram(a) == a.rank_histogram()


def test_shared_partition_across_frequencies(sphere2):
    p = CompressionParams(n_min=16, m=2)
    s1 = build_structure(sphere2, p)
    s2 = build_structure(sphere2, p)
    a = compress(sphere2, CqmScheme(4, 1.0, 0.1), p, structure=s1)
    b = compress(sphere2, CqmScheme(6, 3.0, 0.3, "BDF1"), p)
    assert a.partition.structure() == b.partition.structure() == s2.partition.structure()


def test_storage_accounting(setup1):
    mesh, sch, _ = setup1
    ht = compress(mesh, sch, CompressionParams(n_min=8, m=2, eps=1e-4))
    blocks = sum(b.C.size + b.D.size for b in ht.blocks.values())
    assert storage_units(ht) == blocks + ht.row_basis.storage_units()
    assert ht.far_storage_units() <= storage_units(ht)
    assert storage_units_dense(mesh.n_panels, sch.N) == mesh.n_panels**2 * sch.N
    assert storage_units(np.zeros((3, 3, 2))) == 18


def test_identical_tensors_zero_error(setup1):
    _, _, dense = setup1
    assert relative_error(dense, dense) == 0.0


def test_matvec_matches_dense_slice(setup1):
    mesh, sch, _ = setup1
    ht = compress(mesh, sch, CompressionParams(n_min=4, m=3, eps=1e-6))
    assert ht.partition.far
    x = np.random.default_rng(0).standard_normal(mesh.n_panels)
    for k in (0, 3):
        np.testing.assert_allclose(ht.matvec(x, k), ht.slice_dense(k) @ x, rtol=1e-11, atol=1e-14)
    np.testing.assert_allclose(ht.slice_dense(2), expand_dense(ht)[:, :, 2], rtol=1e-12, atol=1e-15)


def test_double_layer_far_field(setup1):
    mesh, sch, _ = setup1
    dense = assemble_dense_tensor(mesh, sch, kind="dlp")
    errs = []
    for m in (3, 5):
        ht = compress(mesh, sch, CompressionParams(n_min=4, m=m, eps=1e-8), kind="dlp")
        assert ht.partition.far and ht.col_basis is not ht.row_basis
        errs.append(relative_error(ht, dense))
    assert errs[1] < errs[0] < 5e-2


def test_threads_give_identical_result(setup1):
    mesh, sch, _ = setup1
    p = CompressionParams(n_min=8, m=2, eps=1e-4)
    a, b = compress(mesh, sch, p, threads=1), compress(mesh, sch, p, threads=3)
    np.testing.assert_array_equal(a.expand_dense(), b.expand_dense())


def test_size_cap(monkeypatch, sphere1):
    import h2cqm.htensor as mod

    ht = compress(sphere1, CqmScheme(4, 1.0, 0.1), CompressionParams(m=1, eps=1e-1))
    monkeypatch.setattr(mod, "DENSE_CAP", 80 * 80 * 4 - 1)
    with pytest.raises(SizeCapError):
        ht.expand_dense()
    monkeypatch.setattr(mod, "DENSE_CAP", 80 * 80 * 4)
    assert ht.expand_dense().shape == (80, 80, 4)


def test_invalid_params():
    for kw in ({"n_min": 0}, {"eta": 0.0}, {"m": 0}, {"eps": -1.0}):
        with pytest.raises(ValueError):
            CompressionParams(**kw)
    with pytest.raises(ValueError):
        compress(make_sphere(0), CqmScheme(2, 1.0, 0.1), kind="hyp")
