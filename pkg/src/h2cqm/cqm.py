"""Convolution quadrature on top of the compressed frequency tensors.

Integration weights are obtained by a scaled DFT of the fibre vectors of
every block; the discrete convolutions of the time-stepping right-hand side
are evaluated block-wise as scalar convolutions followed by one
matrix-vector product per rank-one term.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .htensor import HTensor
from .kernels import CqmScheme
from .maca import LowRankTensorBlock
from .mesh import SurfaceMesh
from .quadrature import map_points, triangle_rule


def weight_transform(d: np.ndarray, R: float) -> np.ndarray:
    """Scaled DFT ``R**-n / N * sum_l exp(-2 pi i n l / N) d[l]`` for ``n = 0..N``.

    ``d`` has the frequency index on axis 0; the result has ``N + 1`` rows.
    """
    d = np.asarray(d, dtype=complex)
    N = d.shape[0]
    out = np.empty((N + 1,) + d.shape[1:], dtype=complex)
    out[:N] = np.fft.fft(d, axis=0) / N
    # n = N: the exponential is 1 for every l
    out[N] = d.sum(axis=0) / N
    scale = R ** -np.arange(N + 1, dtype=float)
    return out * scale.reshape((-1,) + (1,) * (d.ndim - 1))


def dense_weights(tensor: np.ndarray, R: float) -> np.ndarray:
    """Reference weights from a dense ``M x M x N`` tensor (direct sums)."""
    N = tensor.shape[2]
    ell = np.arange(N)
    out = np.empty(tensor.shape[:2] + (N + 1,), dtype=complex)
    for n in range(N + 1):
        phase = np.exp(-2j * np.pi * n * ell / N)
        out[:, :, n] = R ** (-n) / N * np.tensordot(tensor, phase, axes=([2], [0]))
    return out


class WeightTensor(HTensor):
    """:class:`HTensor` whose fibres are CQM weights (``N + 1`` per block)."""


def transform_weights(ht: HTensor) -> WeightTensor:
    R = ht.scheme.R
    blocks = {
        key: LowRankTensorBlock(blk.C, weight_transform(blk.D, R), blk.pivots)
        for key, blk in ht.blocks.items()
    }
    fields = {f: getattr(ht, f) for f in ht.__dataclass_fields__}
    fields["blocks"] = blocks
    fields["timings"] = dict(ht.timings)
    return WeightTensor(**fields)


class Convolver:
    """Incremental evaluation of ``sum_k W_{n-k} h_k`` for a growing history.

    Column-basis transforms of each history vector are cached so every step
    needs one upward pass, block-wise scalar convolutions, and one downward
    pass.
    """

    def __init__(self, wt: HTensor):
        self.wt = wt
        M = wt.mesh.n_panels
        self.M = M
        self.history = np.zeros((0, M), dtype=complex)
        self.xhat: dict[int, list] = {}
        self._far = [(b, wt.blocks[b.key]) for b in wt.partition.far if wt.blocks[b.key].rank]
        self._near = [(b, wt.blocks[b.key]) for b in wt.partition.near if wt.blocks[b.key].rank]
        self._far_cols = {b.col.id for b, _ in self._far}

    def push(self, h: np.ndarray) -> None:
        h = np.asarray(h, dtype=complex).reshape(self.M)
        self.history = np.vstack([self.history, h[None, :]])
        if self._far:
            coeffs = self.wt.col_basis.forward(h)
            for cid in self._far_cols:
                self.xhat.setdefault(cid, []).append(coeffs[cid])

    def __len__(self):
        return len(self.history)

    def apply(self, n: int) -> np.ndarray:
        """``sum_{k=0}^{min(n, len-1)} W_{n-k} h_k``."""
        K = min(n + 1, len(self.history))
        y = np.zeros(self.M, dtype=complex)
        if K == 0:
            return y
        lags = n - np.arange(K)
        for b, blk in self._near:
            w = blk.D[lags]  # (K, r)
            z = w.T @ self.history[:K][:, b.col.indices]  # (r, #c)
            y[b.row.indices] += np.einsum("lij,lj->i", blk.C, z)
        yhat = {}
        for b, blk in self._far:
            w = blk.D[lags]
            xh = np.asarray(self.xhat[b.col.id][:K])  # (K, p)
            z = w.T @ xh
            v = np.einsum("lij,lj->i", blk.C, z)
            yhat[b.row.id] = yhat.get(b.row.id, 0) + v
        if yhat:
            y += self.wt.row_basis.backward(yhat, self.M)
        return y


def convolve_rhs(wt: HTensor, history, upto: int) -> np.ndarray:
    """``f_n = sum_k W_{n-k} q_k`` for ``n = upto`` using the low-rank format."""
    conv = Convolver(wt)
    for h in history:
        conv.push(h)
    return conv.apply(upto)


def dense_convolution(weights: np.ndarray, history, upto: int) -> np.ndarray:
    """Naive ``sum_k W_{n-k} q_k`` with dense weights ``M x M x (N+1)``."""
    f = np.zeros(weights.shape[0], dtype=complex)
    for k, q in enumerate(history[: upto + 1]):
        f += weights[:, :, upto - k] @ q
    return f


@dataclass
class MotResult:
    q: np.ndarray  # (N+1, M)
    timings: dict = field(default_factory=dict)


def _factorize(V0: np.ndarray):
    A = np.real(V0)
    A = 0.5 * (A + A.T)
    try:
        return scipy.linalg.cho_factor(A, lower=True)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "real part of the zeroth single layer weight is not positive definite"
        ) from exc


def mot_solve(wtV: HTensor, wtK: HTensor, g: np.ndarray, mass: np.ndarray) -> MotResult:
    """March in time for the Neumann trace of the exterior Dirichlet problem.

    Solves ``W0 q_n = -1/2 I g_n + sum_{k<=n} K_{n-k} g_k - sum_{k<n} W_{n-k} q_k``.
    """
    if wtV.scheme.N != wtK.scheme.N:
        raise ValueError("operator tensors use different schemes")
    g = np.asarray(g, dtype=float)
    steps = g.shape[0]
    t0 = time.perf_counter()
    factor = _factorize(wtV.slice_dense(0))
    t1 = time.perf_counter()
    convV, convK = Convolver(wtV), Convolver(wtK)
    q = np.zeros_like(g)
    for n in range(steps):
        convK.push(g[n])
        rhs = -0.5 * mass * g[n] + convK.apply(n)
        if n:
            rhs -= convV.apply(n)
        q[n] = scipy.linalg.cho_solve(factor, rhs.real)
        convV.push(q[n])
    t2 = time.perf_counter()
    return MotResult(q, {"factorization": t1 - t0, "marching": t2 - t1})


def mot_solve_dense(Vw: np.ndarray, Kw: np.ndarray, g: np.ndarray, mass: np.ndarray) -> np.ndarray:
    """Reference marching scheme with dense weight tensors."""
    g = np.asarray(g, dtype=float)
    factor = _factorize(Vw[:, :, 0])
    q = np.zeros_like(g)
    for n in range(g.shape[0]):
        rhs = -0.5 * mass * g[n] + dense_convolution(Kw, g, n)
        if n:
            rhs -= dense_convolution(Vw, q, n) - Vw[:, :, 0] @ q[n]
        q[n] = scipy.linalg.cho_solve(factor, rhs.real)
    return q


# spherical wave benchmark


def wave_profile(z):
    """``cos(5 z + 1) - 1`` for ``z > -1/5``, zero before."""
    z = np.asarray(z, dtype=float)
    return np.where(z > -0.2, np.cos(5.0 * z + 1.0) - 1.0, 0.0)


def wave_profile_derivative(z):
    z = np.asarray(z, dtype=float)
    return np.where(z > -0.2, -5.0 * np.sin(5.0 * z + 1.0), 0.0)


def _closest_to_origin(corners):
    """Distance from the origin to each triangle (exact)."""
    best = np.inf
    A, B, C = corners[:, 0], corners[:, 1], corners[:, 2]
    # interior projections
    n = np.cross(B - A, C - A)
    n /= np.linalg.norm(n, axis=1)[:, None]
    d = np.einsum("ij,ij->i", A, n)
    P = d[:, None] * n
    def inside(P):
        c1 = np.einsum("ij,ij->i", np.cross(B - A, P - A), n)
        c2 = np.einsum("ij,ij->i", np.cross(C - B, P - B), n)
        c3 = np.einsum("ij,ij->i", np.cross(A - C, P - C), n)
        return ((c1 >= 0) & (c2 >= 0) & (c3 >= 0)) | ((c1 <= 0) & (c2 <= 0) & (c3 <= 0))
    mask = inside(P)
    if mask.any():
        best = min(best, float(np.abs(d[mask]).min()))
    for X, Y in ((A, B), (B, C), (C, A)):
        e = Y - X
        t = np.clip(-np.einsum("ij,ij->i", X, e) / np.einsum("ij,ij->i", e, e), 0.0, 1.0)
        best = min(best, float(np.linalg.norm(X + t[:, None] * e, axis=1).min()))
    return best


@dataclass(frozen=True)
class SphericalWave:
    """``u(x, t) = f(t + shift - |x|) / |x|`` with the front reaching the
    closest boundary point at ``t = 0``."""

    shift: float

    @classmethod
    def for_mesh(cls, mesh: SurfaceMesh) -> "SphericalWave":
        return cls(_closest_to_origin(mesh.corners) - 0.2)

    def value(self, x, t):
        r = np.linalg.norm(x, axis=-1)
        return wave_profile(t + self.shift - r) / r

    def normal_derivative(self, x, n, t):
        r = np.linalg.norm(x, axis=-1)
        z = t + self.shift - r
        dudr = -wave_profile_derivative(z) / r - wave_profile(z) / r**2
        return dudr * np.sum(x * n, axis=-1) / r


def _panel_rule(mesh, degree):
    ref, w = triangle_rule(degree)
    pts = map_points(mesh.corners, ref)
    return pts, w[None, :] * 2.0 * mesh.areas[:, None]


def dirichlet_data(mesh: SurfaceMesh, scheme: CqmScheme, wave: SphericalWave | None = None, degree: int = 4) -> np.ndarray:
    """L2 projections of the boundary values onto piecewise constants, ``(N+1, M)``."""
    wave = wave or SphericalWave.for_mesh(mesh)
    pts, w = _panel_rule(mesh, degree)
    out = np.empty((scheme.N + 1, mesh.n_panels))
    for n, t in enumerate(scheme.times):
        out[n] = np.sum(w * wave.value(pts, t), axis=1) / mesh.areas
    return out


def neumann_errors(mesh: SurfaceMesh, scheme: CqmScheme, q: np.ndarray, wave: SphericalWave | None = None, degree: int = 4):
    """Per-step ``L2(Gamma)`` error of ``q`` against the exact normal trace and the exact norm."""
    wave = wave or SphericalWave.for_mesh(mesh)
    pts, w = _panel_rule(mesh, degree)
    normals = mesh.normals[:, None, :]
    err = np.empty(len(q))
    ref = np.empty(len(q))
    for n, t in enumerate(scheme.times[: len(q)]):
        exact = wave.normal_derivative(pts, normals, t)
        err[n] = np.sqrt(np.sum(w * (q[n][:, None] - exact) ** 2))
        ref[n] = np.sqrt(np.sum(w * exact**2))
    return err, ref


def time_averaged_error(err, ref) -> float:
    """Relative error accumulated over all steps (l2 in time)."""
    denom = np.sqrt(np.sum(np.square(ref)))
    return float(np.sqrt(np.sum(np.square(err))) / denom) if denom > 0 else float(np.sqrt(np.sum(np.square(err))))


def deviation_ratios(err_fast, err_ref) -> np.ndarray:
    """Per-step ratio of the compressed to the dense-reference error.

    Steps where the reference error vanishes are reported as NaN.
    """
    err_fast = np.asarray(err_fast, dtype=float)
    err_ref = np.asarray(err_ref, dtype=float)
    out = np.full(err_fast.shape, np.nan)
    ok = err_ref > 0
    out[ok] = err_fast[ok] / err_ref[ok]
    return out
