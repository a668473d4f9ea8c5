"""Tensor Chebyshev interpolation on boxes and nested cluster bases."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import Cluster
from .mesh import SurfaceMesh
from .quadrature import map_points, triangle_rule


def chebyshev_nodes(a: float, b: float, m: int) -> np.ndarray:
    """First-kind Chebyshev points mapped to ``[a, b]``, in decreasing order."""
    if m < 1:
        raise ValueError("m must be >= 1")
    k = np.arange(m)
    t = np.cos((2 * k + 1) * np.pi / (2 * m))
    if m % 2 == 1:
        t[m // 2] = 0.0
    return 0.5 * (a + b) + 0.5 * (b - a) * t


def _lagrange_1d(nodes: np.ndarray, x: np.ndarray, derivative: bool = False):
    """Values (and optionally derivatives) of all 1D Lagrange polynomials.

    Returns arrays of shape ``x.shape + (m,)``.
    """
    x = np.asarray(x, dtype=float)[..., None]
    m = len(nodes)
    diff = x - nodes  # (..., m)
    denom = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(denom, 1.0)
    wbar = 1.0 / denom.prod(axis=1)
    vals = np.empty(diff.shape)
    ders = np.zeros(diff.shape) if derivative else None
    for mu in range(m):
        others = [k for k in range(m) if k != mu]
        factors = diff[..., others]
        vals[..., mu] = wbar[mu] * factors.prod(axis=-1)
        if derivative:
            for k in range(len(others)):
                ders[..., mu] += wbar[mu] * np.delete(factors, k, axis=-1).prod(axis=-1)
    return (vals, ders) if derivative else vals


@dataclass(frozen=True, eq=False)
class InterpGrid:
    """Tensor-product Chebyshev grid with ``m**3`` nodes on a box.

    Node ``mu`` has per-axis indices ``np.unravel_index(mu, (m, m, m))``.
    """

    box: np.ndarray
    m: int

    def __post_init__(self):
        box = np.array(self.box, dtype=float)
        # widen flat boxes so the 1D Lagrange basis stays defined
        span = box[1] - box[0]
        pad = np.where(span > 0, 0.0, 1e-8 * max(1.0, float(np.abs(box).max())))
        box = np.stack([box[0] - pad, box[1] + pad])
        object.__setattr__(self, "box", box)

    @property
    def p(self) -> int:
        return self.m**3

    def axis_nodes(self, axis: int) -> np.ndarray:
        return chebyshev_nodes(self.box[0, axis], self.box[1, axis], self.m)

    @property
    def points(self) -> np.ndarray:
        gx, gy, gz = np.meshgrid(*(self.axis_nodes(a) for a in range(3)), indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])

    def basis(self, x) -> np.ndarray:
        """All Lagrange polynomials at points ``x`` (n, 3) -> (n, p)."""
        x = np.atleast_2d(x)
        L = [_lagrange_1d(self.axis_nodes(a), x[:, a]) for a in range(3)]
        return np.einsum("ni,nj,nk->nijk", *L).reshape(len(x), -1)

    def gradient(self, x) -> np.ndarray:
        """Gradients of all Lagrange polynomials, shape (n, p, 3)."""
        x = np.atleast_2d(x)
        L, D = zip(*(_lagrange_1d(self.axis_nodes(a), x[:, a], derivative=True) for a in range(3)))
        gx = np.einsum("ni,nj,nk->nijk", D[0], L[1], L[2])
        gy = np.einsum("ni,nj,nk->nijk", L[0], D[1], L[2])
        gz = np.einsum("ni,nj,nk->nijk", L[0], L[1], D[2])
        return np.stack([g.reshape(len(x), -1) for g in (gx, gy, gz)], axis=-1)


def lagrange_eval(grid: InterpGrid, mu: int, x) -> float:
    return float(grid.basis(np.asarray(x, dtype=float)[None, :])[0, mu])


class ClusterBasis:
    """Nested interpolation basis over a cluster tree.

    ``leaf[c.id]`` holds ``U_c`` (#c x p) for leaves, ``transfer[s.id]`` the
    matrix ``E_{s, parent}`` (p x p) for every son ``s``. With
    ``derivative=True`` the leaf matrices integrate normal derivatives of the
    Lagrange polynomials, as needed for the double layer column basis; the
    transfer matrices are unchanged.
    """

    def __init__(self, tree: Cluster, mesh: SurfaceMesh, m: int, derivative: bool = False):
        self.tree = tree
        self.m = m
        self.p = m**3
        self.derivative = derivative
        self.grids: dict[int, InterpGrid] = {}
        self.leaf: dict[int, np.ndarray] = {}
        self.transfer: dict[int, np.ndarray] = {}
        self.clusters: dict[int, Cluster] = {}

        degree = max(2, 3 * (m - 1))
        ref, w = triangle_rule(degree)
        for c in tree.walk():
            self.clusters[c.id] = c
            self.grids[c.id] = InterpGrid(c.bbox, m)
        for c in tree.walk():
            grid = self.grids[c.id]
            if c.is_leaf:
                pts = map_points(mesh.corners[c.indices], ref)  # (n, q, 3)
                n, q = pts.shape[:2]
                jac = 2.0 * mesh.areas[c.indices]
                if derivative:
                    g = grid.gradient(pts.reshape(-1, 3)).reshape(n, q, self.p, 3)
                    vals = np.einsum("nqpk,nk->nqp", g, mesh.normals[c.indices])
                else:
                    vals = grid.basis(pts.reshape(-1, 3)).reshape(n, q, self.p)
                self.leaf[c.id] = np.einsum("q,nqp->np", w, vals) * jac[:, None]
            else:
                for s in c.sons:
                    # E[lambda, mu] = L_{c, mu}(xi_{s, lambda})
                    self.transfer[s.id] = grid.basis(self.grids[s.id].points)

    def matrix(self, c: Cluster) -> np.ndarray:
        """Expanded ``U_c`` assembled from leaves and transfer matrices."""
        if c.is_leaf:
            return self.leaf[c.id]
        return np.vstack([self.matrix(s) @ self.transfer[s.id] for s in c.sons])

    def forward(self, x: np.ndarray) -> dict:
        """``U_c^T x[c]`` for every cluster (upward pass); ``x`` may be (M,) or (M, k)."""
        out = {}

        def up(c):
            if c.is_leaf:
                out[c.id] = self.leaf[c.id].T @ x[c.indices]
            else:
                acc = 0
                for s in c.sons:
                    up(s)
                    acc = acc + self.transfer[s.id].T @ out[s.id]
                out[c.id] = acc
            return out[c.id]

        up(self.tree)
        return out

    def backward(self, coeffs: dict, size: int, dtype=complex) -> np.ndarray:
        """Sum ``U_c y_c`` over all clusters with coefficients (downward pass)."""
        result = np.zeros(size, dtype=dtype)

        def down(c, inherited):
            y = coeffs.get(c.id)
            if y is not None:
                inherited = y if inherited is None else inherited + y
            if inherited is None:
                if not c.is_leaf:
                    for s in c.sons:
                        down(s, None)
                return
            if c.is_leaf:
                result[c.indices] += self.leaf[c.id] @ inherited
            else:
                for s in c.sons:
                    down(s, self.transfer[s.id] @ inherited)

        down(self.tree, None)
        return result

    def storage_units(self) -> int:
        return int(sum(u.size for u in self.leaf.values()) + sum(e.size for e in self.transfer.values()))


def build_cluster_basis(tree: Cluster, mesh: SurfaceMesh, m: int, derivative: bool = False) -> ClusterBasis:
    return ClusterBasis(tree, mesh, m, derivative=derivative)
