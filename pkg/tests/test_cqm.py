import numpy as np
import pytest

from h2cqm import cqm
from h2cqm.assembly import assemble_dense_tensor
from h2cqm.htensor import CompressionParams, compress
from h2cqm.kernels import CqmScheme, default_radius
from h2cqm.maca import LowRankTensorBlock


def test_transform_of_constant():
    out = cqm.weight_transform(np.ones(6), 1.0)
    np.testing.assert_allclose(out, [1, 0, 0, 0, 0, 0, 1], atol=1e-15)


def test_transform_two_point_by_hand():
    a, b, R = 2.0 + 1j, -0.5 + 3j, 0.3
    out = cqm.weight_transform(np.array([[a], [b]]), R)[:, 0]
    np.testing.assert_allclose(out, [(a + b) / 2, (a - b) / (2 * R), (a + b) / (2 * R**2)], rtol=1e-15)


def test_tetra_weights_real(tetra_weights):
    _, sch, out = tetra_weights
    for kind in ("slp", "dlp"):
        wt, _ = out[kind]
        for n in range(sch.N + 1):
            S = wt.slice_dense(n)
            assert np.linalg.norm(S.imag) <= 1e-10 * np.linalg.norm(S)


def test_transform_commutes_with_expansion():
    rng = np.random.default_rng(0)
    C = rng.standard_normal((3, 4, 5)) + 1j * rng.standard_normal((3, 4, 5))
    D = rng.standard_normal((8, 3)) + 1j * rng.standard_normal((8, 3))
    blk = LowRankTensorBlock(C, D)
    R = 10 ** (-5 / 8)
    a = LowRankTensorBlock(C, cqm.weight_transform(D, R)).expand()
    b = cqm.dense_weights(blk.expand(), R)
    assert np.linalg.norm(a - b) <= 1e-12 * np.linalg.norm(b)


@pytest.fixture(scope="module")
def tetra_weights(tetra):
    sch = CqmScheme(8, 4.0, default_radius(8))
    params = CompressionParams(eps=1e-12)
    out = {}
    for kind in ("slp", "dlp"):
        ht = compress(tetra, sch, params, kind)
        out[kind] = (cqm.transform_weights(ht), cqm.dense_weights(assemble_dense_tensor(tetra, sch, kind=kind), sch.R))
    return tetra, sch, out


def test_weight_tensor_shape(tetra_weights):
    _, sch, out = tetra_weights
    wt, _ = out["slp"]
    assert isinstance(wt, cqm.WeightTensor)
    assert wt.n_modes == sch.N + 1


def test_delta_history_gives_column(tetra_weights):
    mesh, sch, out = tetra_weights
    wt, W = out["slp"]
    e1 = np.zeros(mesh.n_panels)
    e1[1] = 1.0
    hist = [e1] + [np.zeros(mesh.n_panels)] * sch.N
    for n in range(sch.N + 1):
        np.testing.assert_allclose(cqm.convolve_rhs(wt, hist[: n + 1], n), wt.slice_dense(n)[:, 1], rtol=1e-13, atol=1e-16)


def test_rank_zero_tensor_convolves_to_zero(tetra_weights):
    mesh, _, out = tetra_weights
    wt, _ = out["slp"]
    empty = wt.replace_blocks({k: LowRankTensorBlock.empty(*b.dims[:2], b.dims[2]) for k, b in wt.blocks.items()})
    f = cqm.convolve_rhs(empty, np.ones((3, mesh.n_panels)), 2)
    assert np.all(f == 0)


def test_convolution_matches_dense(tetra_weights):
    mesh, sch, out = tetra_weights
    rng = np.random.default_rng(1)
    hist = rng.standard_normal((sch.N + 1, mesh.n_panels))
    for kind in ("slp", "dlp"):
        wt, W = out[kind]
        for n in range(sch.N + 1):
            f = cqm.convolve_rhs(wt, hist[: n + 1], n)
            ref = cqm.dense_convolution(W, hist, n)
            assert np.linalg.norm(f - ref) <= 1e-10 * np.linalg.norm(ref)


def test_zero_data_zero_solution(tetra_weights):
    mesh, sch, out = tetra_weights
    res = cqm.mot_solve(out["slp"][0], out["dlp"][0], np.zeros((sch.N + 1, mesh.n_panels)), mesh.areas)
    assert np.all(res.q == 0)
    assert set(res.timings) == {"factorization", "marching"}


def test_single_step_solve(tetra_weights):
    mesh, sch, out = tetra_weights
    g0 = np.array([[1.0, 2.0, -1.0, 0.5]])
    q = cqm.mot_solve(out["slp"][0], out["dlp"][0], g0, mesh.areas).q[0]
    V0, K0 = out["slp"][1][:, :, 0].real, out["dlp"][1][:, :, 0].real
    np.testing.assert_allclose(V0 @ q, -0.5 * mesh.areas * g0[0] + K0 @ g0[0], rtol=1e-10)


def test_fast_and_dense_marching_agree(tetra_weights):
    mesh, sch, out = tetra_weights
    rng = np.random.default_rng(2)
    g = rng.standard_normal((sch.N + 1, mesh.n_panels))
    q = cqm.mot_solve(out["slp"][0], out["dlp"][0], g, mesh.areas).q
    qd = cqm.mot_solve_dense(out["slp"][1], out["dlp"][1], g, mesh.areas)
    for n in range(sch.N + 1):
        assert np.linalg.norm(q[n] - qd[n]) <= 1e-6 * np.linalg.norm(qd[n])


def test_indefinite_system_reported():
    with pytest.raises(np.linalg.LinAlgError, match="positive definite"):
        cqm._factorize(np.diag([1.0, -1.0]))


def test_weights_real_and_decaying(sphere1):
    sch = CqmScheme(16, 16 * 0.5 * sphere1.mesh_width(), default_radius(16))
    W = cqm.dense_weights(assemble_dense_tensor(sphere1, sch), sch.R)
    norms = np.linalg.norm(W, axis=(0, 1))
    # R^-n amplifies round-off, so late (small) weights are only real up to
    # about u R^-n max|V|; measure against the largest weight
    assert np.max(np.linalg.norm(W.imag, axis=(0, 1))[: sch.N]) <= 1e-10 * norms[: sch.N].max()
    # the n = N weight aliases R^-N times the n = 0 weight and is excluded
    body = norms[: sch.N]
    envelope = np.maximum.accumulate(body[::-1])[::-1]
    assert np.all(np.diff(envelope) < 0)
    np.testing.assert_allclose(W[:, :, sch.N], W[:, :, 0] * sch.R ** -sch.N, rtol=1e-10)


def test_wave_profile():
    assert cqm.wave_profile(-0.2) == 0.0
    assert cqm.wave_profile(-0.3) == 0.0
    assert cqm.wave_profile(0.0) == pytest.approx(np.cos(1) - 1)
    assert np.cos(1) - 1 == pytest.approx(-0.4597, abs=1e-4)
    z = np.linspace(-0.19, 1, 7)
    h = 1e-6
    fd = (cqm.wave_profile(z + h) - cqm.wave_profile(z - h)) / (2 * h)
    np.testing.assert_allclose(cqm.wave_profile_derivative(z), fd, atol=1e-6)


def test_spherical_wave_value_and_gradient():
    wave = cqm.SphericalWave(1.0)
    x = np.array([[0.0, 0.0, 1.0]])
    assert wave.value(x, 0.0)[0] == pytest.approx(np.cos(1) - 1)
    rng = np.random.default_rng(3)
    for _ in range(5):
        p = rng.standard_normal(3) * 0.3 + [0, 0, 1.2]
        n = rng.standard_normal(3)
        n /= np.linalg.norm(n)
        t, h = 0.4, 1e-6
        fd = (wave.value(p + h * n, t) - wave.value(p - h * n, t)) / (2 * h)
        assert wave.normal_derivative(p, n, t) == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_closest_distance_exact(sphere1):
    d = cqm._closest_to_origin(sphere1.corners)
    # panel planes of an inscribed polyhedron: closest point is a face interior
    plane = np.abs(np.einsum("ij,ij->i", sphere1.normals, sphere1.corners[:, 0])).min()
    assert d == pytest.approx(plane, rel=1e-14)
    pts = sphere1.corners.reshape(-1, 3)
    assert d < np.linalg.norm(pts, axis=1).min()


def test_dirichlet_data_causal(sphere1):
    sch = CqmScheme(10, 3.0, default_radius(10))
    g = cqm.dirichlet_data(sphere1, sch)
    assert g.shape == (11, 80)
    assert np.all(g[0] == 0.0)
    assert np.any(g[1] != 0.0)
    wave = cqm.SphericalWave.for_mesh(sphere1)
    assert wave.shift == pytest.approx(cqm._closest_to_origin(sphere1.corners) - 0.2)


def test_projection_of_constant_field(sphere1):
    class Const(cqm.SphericalWave):
        def value(self, x, t):
            return np.full(x.shape[:-1], 2.5)

    sch = CqmScheme(2, 1.0, 0.1)
    g = cqm.dirichlet_data(sphere1, sch, Const(0.0))
    np.testing.assert_allclose(g, 2.5, rtol=1e-14)


def test_error_measures():
    assert cqm.time_averaged_error([3.0, 4.0], [6.0, 8.0]) == pytest.approx(0.5)
    r = cqm.deviation_ratios([1.0, 2.0, 0.0], [1.0, 4.0, 0.0])
    assert r[0] == 1.0 and r[1] == 0.5 and np.isnan(r[2])
