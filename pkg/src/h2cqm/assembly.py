"""Galerkin entries of the single and double layer operators.

Trial and test spaces are piecewise constants on the panels, so an entry is
the double integral of the kernel over a pair of panels. Quadrature geometry
(distances, weights, normal cosines) does not depend on the frequency and is
precomputed once per set of panel pairs; evaluating an additional frequency
then costs one exponential per quadrature node.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import FOUR_PI, CqmScheme, mirror_frequencies
from .mesh import SurfaceMesh
from .quadrature import map_points, sauter_schwab_rule, triangle_rule

KINDS = ("slp", "dlp")


@dataclass(frozen=True)
class QuadratureConfig:
    far_order: int = 4
    singular_order: int = 4
    near_threshold: float = 1.0

    def __post_init__(self):
        if self.far_order < 1 or self.singular_order < 1:
            raise ValueError("quadrature orders must be >= 1")
        if self.near_threshold < 0:
            raise ValueError("near_threshold must be non-negative")


@dataclass
class _Group:
    pairs: np.ndarray  # positions of the pairs in the caller's list
    r: np.ndarray  # (P, q) distances
    w: np.ndarray  # (P, q) weights incl. Jacobians
    cos: np.ndarray  # (P, q) (y - x) . n_y / r


def _shared_corners(ti, tj):
    return [v for v in ti if v in tj]


def _ss_points(corners, ref):
    A, B, C = corners[:, 0, None], corners[:, 1, None], corners[:, 2, None]
    return A + ref[None, :, :1] * (B - A) + ref[None, :, 1:] * (C - B)


class PairQuadrature:
    """Frequency-independent quadrature data for a list of panel pairs.

    ``rows[k]`` is the test panel (variable ``x``) and ``cols[k]`` the trial
    panel (variable ``y``) of pair ``k``.
    """

    def __init__(self, mesh: SurfaceMesh, rows, cols, quad: QuadratureConfig | None = None):
        quad = quad or QuadratureConfig()
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        if rows.shape != cols.shape:
            raise ValueError("rows and cols must have equal length")
        self.rows, self.cols = rows, cols
        self.n_pairs = len(rows)
        self.groups: list[_Group] = []
        self._locate = np.empty((self.n_pairs, 2), dtype=np.int64)
        if self.n_pairs == 0:
            return

        tri = mesh.triangles
        corners = mesh.corners
        diam = mesh.diameters()
        # classify by shared vertices
        shared = (tri[rows][:, :, None] == tri[cols][:, None, :]).any(axis=2).sum(axis=1)
        same = rows == cols
        gap = np.linalg.norm(mesh.centroids[rows] - mesh.centroids[cols], axis=1)
        gap -= 0.5 * (diam[rows] + diam[cols])
        close = gap < quad.near_threshold * np.maximum(diam[rows], diam[cols])

        regular = ~same & (shared == 0)
        far_idx = np.flatnonzero(regular & ~close)
        near_idx = np.flatnonzero(regular & close)
        near_degree = max(quad.far_order, 2 * quad.singular_order)
        self._add_regular(mesh, far_idx, quad.far_order)
        self._add_regular(mesh, near_idx, near_degree)

        for case, mask in (
            ("coincident", same),
            ("edge", ~same & (shared == 2)),
            ("vertex", ~same & (shared == 1)),
        ):
            idx = np.flatnonzero(mask)
            if len(idx) == 0:
                continue
            xc = np.empty((len(idx), 3, 3))
            yc = np.empty((len(idx), 3, 3))
            for n, k in enumerate(idx):
                ti, tj = tri[rows[k]].tolist(), tri[cols[k]].tolist()
                if case == "coincident":
                    oi = oj = ti
                else:
                    common = _shared_corners(ti, tj)
                    oi = common + [v for v in ti if v not in common]
                    oj = common + [v for v in tj if v not in common]
                xc[n] = mesh.vertices[oi]
                yc[n] = mesh.vertices[oj]
            xh, yh, w = sauter_schwab_rule(case, quad.singular_order)
            X = _ss_points(xc, xh)
            Y = _ss_points(yc, yh)
            jac = 4.0 * mesh.areas[rows[idx]] * mesh.areas[cols[idx]]
            self._add_group(idx, X, Y, mesh.normals[cols[idx]], w[None, :] * jac[:, None])

        del corners

    def _add_regular(self, mesh, idx, degree):
        if len(idx) == 0:
            return
        ref, w = triangle_rule(degree)
        q = len(w)
        X = map_points(mesh.corners[self.rows[idx]], ref)  # (P, q, 3)
        Y = map_points(mesh.corners[self.cols[idx]], ref)
        X = np.repeat(X, q, axis=1)
        Y = np.tile(Y, (1, q, 1))
        ww = np.outer(w, w).ravel()
        jac = 4.0 * mesh.areas[self.rows[idx]] * mesh.areas[self.cols[idx]]
        self._add_group(idx, X, Y, mesh.normals[self.cols[idx]], ww[None, :] * jac[:, None])

    def _add_group(self, idx, X, Y, ny, w):
        d = Y - X
        r = np.linalg.norm(d, axis=2)
        cos = np.einsum("pqk,pk->pq", d, ny) / r
        g = len(self.groups)
        self.groups.append(_Group(idx, r, w, cos))
        self._locate[idx, 0] = g
        self._locate[idx, 1] = np.arange(len(idx))

    @property
    def n_nodes(self) -> int:
        return sum(g.r.size for g in self.groups)

    def evaluate(self, s: complex, kind: str = "slp") -> np.ndarray:
        """Entries of all pairs at frequency ``s``."""
        out = np.zeros(self.n_pairs, dtype=complex)
        for g in self.groups:
            out[g.pairs] = np.sum(g.w * _kernel(g.r, g.cos, s, kind), axis=1)
        return out

    def evaluate_pair(self, k: int, s_values, kind: str = "slp") -> np.ndarray:
        """Entry of pair ``k`` at each frequency in ``s_values``."""
        gi, pos = self._locate[k]
        g = self.groups[gi]
        s = np.asarray(s_values)[:, None]
        return np.sum(g.w[pos] * _kernel(g.r[pos], g.cos[pos], s, kind), axis=1)


def _kernel(r, cos, s, kind):
    e = np.exp(-s * r)
    if kind == "slp":
        return e / (FOUR_PI * r)
    if kind == "dlp":
        return -(1.0 + s * r) * e * cos / (FOUR_PI * r * r)
    raise ValueError(f"unknown operator kind {kind!r}")


def near_entry(mesh, i, j, s, quad=None, kind="slp") -> complex:
    """Galerkin entry for test panel ``i`` and trial panel ``j``."""
    if kind == "slp" and i > j:
        i, j = j, i
    return complex(PairQuadrature(mesh, [i], [j], quad).evaluate(s, kind)[0])


def coupling_entry(points_r, points_c, mu, nu, s) -> complex:
    """Kernel between interpolation nodes ``points_r[mu]`` and ``points_c[nu]``."""
    r = float(np.linalg.norm(np.asarray(points_c[nu]) - np.asarray(points_r[mu])))
    if r == 0.0:
        raise ZeroDivisionError("coincident interpolation nodes: partition is broken")
    return complex(np.exp(-s * r) / (FOUR_PI * r))


def _dense(mesh, s_values, quad, kind, chunk=48):
    M = mesh.n_panels
    s_values = np.atleast_1d(s_values)
    out = np.empty((M, M, len(s_values)), dtype=complex)
    for start in range(0, M, chunk):
        stop = min(start + chunk, M)
        rows = np.repeat(np.arange(start, stop), M)
        cols = np.tile(np.arange(M), stop - start)
        if kind == "slp":
            # evaluate each unordered pair with the same point ordering
            lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
            rows, cols = lo, hi
        pq = PairQuadrature(mesh, rows, cols, quad)
        for k, s in enumerate(s_values):
            vals = pq.evaluate(s, kind)
            out[start:stop, :, k] = vals.reshape(stop - start, M)
    return out


def assemble_dense_matrix(mesh: SurfaceMesh, s, quad=None) -> np.ndarray:
    """Dense single layer Galerkin matrix at frequency ``s``."""
    return _dense(mesh, [s], quad, "slp")[:, :, 0]


def assemble_dense_dlp(mesh: SurfaceMesh, s, quad=None) -> np.ndarray:
    """Dense double layer Galerkin matrix at frequency ``s``."""
    return _dense(mesh, [s], quad, "dlp")[:, :, 0]


def assemble_dense_tensor(mesh: SurfaceMesh, scheme: CqmScheme, quad=None, kind="slp") -> np.ndarray:
    """The ``M x M x N`` tensor of Galerkin matrices at all CQM frequencies."""
    half = _dense(mesh, scheme.frequencies[: scheme.n_unique], quad, kind)
    return mirror_frequencies(half, scheme.N, axis=2)


def mass_matrix(mesh: SurfaceMesh) -> np.ndarray:
    """Diagonal of the piecewise-constant Gram matrix (panel areas)."""
    return np.array(mesh.areas)
