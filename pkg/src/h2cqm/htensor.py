"""Hierarchical low-rank approximation of the frequency family of Galerkin
matrices.

Space is handled by an H2 structure (cluster tree, block partition, nested
Chebyshev bases); every block is then compressed along the frequency axis by
MACA. Near-field blocks factor Galerkin entries, far-field blocks factor the
coupling tensors between interpolation nodes.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .assembly import KINDS, PairQuadrature, QuadratureConfig
from .chebyshev import ClusterBasis
from .clustering import BlockPartition, Cluster, build_block_partition, build_cluster_tree
from .kernels import FOUR_PI, CqmScheme, mirror_frequencies
from .maca import LowRankTensorBlock, maca
from .mesh import SurfaceMesh

log = logging.getLogger(__name__)

DENSE_CAP = 2**26


class SizeCapError(ValueError):
    """Raised when a dense expansion would exceed :data:`DENSE_CAP` scalars."""


@dataclass(frozen=True)
class CompressionParams:
    n_min: int = 32
    eta: float = 2.0
    m: int = 4
    eps: float = 1e-4
    eps_near: float | None = None
    eps_far: float | None = None
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)

    def __post_init__(self):
        if self.n_min < 1:
            raise ValueError("n_min must be >= 1")
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        for e in (self.eps, self.eps_near, self.eps_far):
            if e is not None and e <= 0:
                raise ValueError("eps must be positive")

    @property
    def near_eps(self) -> float:
        return self.eps if self.eps_near is None else self.eps_near

    @property
    def far_eps(self) -> float:
        return self.eps if self.eps_far is None else self.eps_far


class NearEntries:
    """Galerkin entries of one near-field block at all CQM frequencies."""

    def __init__(self, mesh, rows, cols, scheme: CqmScheme, quad, kind="slp"):
        self.rows, self.cols = np.asarray(rows), np.asarray(cols)
        self.scheme = scheme
        self.kind = kind
        m, n = len(rows), len(cols)
        self.dims = (m, n, scheme.N)
        rr, cc = np.repeat(self.rows, n), np.tile(self.cols, m)
        if kind == "slp":
            # same point ordering as the dense assembly, so V stays symmetric
            rr, cc = np.minimum(rr, cc), np.maximum(rr, cc)
        self.pq = PairQuadrature(mesh, rr, cc, quad)

    def slice(self, k):
        N = self.scheme.N
        if k <= N // 2:
            vals = self.pq.evaluate(self.scheme.frequencies[k], self.kind)
        else:
            vals = np.conj(self.pq.evaluate(self.scheme.frequencies[N - k], self.kind))
        return vals.reshape(self.dims[:2])

    def fibre(self, i, j):
        sched = self.scheme
        half = self.pq.evaluate_pair(i * self.dims[1] + j, sched.frequencies[: sched.n_unique], self.kind)
        return mirror_frequencies(half, sched.N)


class FarEntries:
    """Kernel values between the interpolation nodes of two boxes."""

    def __init__(self, points_r, points_c, scheme: CqmScheme):
        self.dist = np.linalg.norm(points_r[:, None, :] - points_c[None, :, :], axis=2)
        if np.any(self.dist == 0.0):
            raise ZeroDivisionError("coincident interpolation nodes in an admissible block")
        self.scheme = scheme
        p1, p2 = self.dist.shape
        self.dims = (p1, p2, scheme.N)

    def slice(self, k):
        s = self.scheme.frequencies[k]
        return np.exp(-s * self.dist) / (FOUR_PI * self.dist)

    def fibre(self, i, j):
        r = self.dist[i, j]
        return np.exp(-self.scheme.frequencies * r) / (FOUR_PI * r)


@dataclass(eq=False)
class HTensor:
    """Block-wise low-rank tensor over ``I x J x K``.

    ``blocks`` maps ``(row.id, col.id)`` to a :class:`LowRankTensorBlock`.
    Far blocks factor coupling tensors and are expanded through the bases.
    """

    mesh: SurfaceMesh
    scheme: CqmScheme
    params: CompressionParams
    tree: Cluster
    partition: BlockPartition
    row_basis: ClusterBasis
    col_basis: ClusterBasis
    blocks: dict
    kind: str = "slp"
    timings: dict = field(default_factory=dict)

    @property
    def shape(self):
        M = self.mesh.n_panels
        return (M, M, self.n_modes)

    @property
    def n_modes(self) -> int:
        b = next(iter(self.blocks.values()))
        return b.D.shape[0]

    @property
    def near_blocks(self):
        return {b.key: self.blocks[b.key] for b in self.partition.near}

    @property
    def far_blocks(self):
        return {b.key: self.blocks[b.key] for b in self.partition.far}

    def replace_blocks(self, blocks: dict, **kw) -> "HTensor":
        return replace(self, blocks=blocks, **kw)

    def _check_cap(self, n_modes):
        M = self.mesh.n_panels
        if M * M * n_modes > DENSE_CAP:
            raise SizeCapError(f"dense expansion of {M}x{M}x{n_modes} exceeds the cap of {DENSE_CAP} scalars")

    def expand_dense(self) -> np.ndarray:
        """Materialise the full ``M x M x K`` tensor."""
        self._check_cap(self.n_modes)
        M = self.mesh.n_panels
        out = np.zeros((M, M, self.n_modes), dtype=complex)
        cache = {}
        for b in self.partition.blocks:
            out[np.ix_(b.row.indices, b.col.indices)] = self.block_dense(b, cache)
        return out

    def block_dense(self, b, cache=None) -> np.ndarray:
        blk = self.blocks[b.key]
        core = blk.expand()
        if not b.admissible:
            return core
        cache = {} if cache is None else cache
        U = _cached_matrix(self.row_basis, b.row, cache, "r")
        W = _cached_matrix(self.col_basis, b.col, cache, "c")
        return np.einsum("im,mnk,jn->ijk", U, core, W.conj(), optimize=True)

    def slice_dense(self, k: int) -> np.ndarray:
        """Materialise the ``M x M`` matrix at mode index ``k``."""
        M = self.mesh.n_panels
        out = np.zeros((M, M), dtype=complex)
        cache = {}
        for b in self.partition.blocks:
            S = self.blocks[b.key].slice(k)
            if b.admissible:
                U = _cached_matrix(self.row_basis, b.row, cache, "r")
                W = _cached_matrix(self.col_basis, b.col, cache, "c")
                S = U @ S @ W.conj().T
            out[np.ix_(b.row.indices, b.col.indices)] = S
        return out

    def matvec(self, x: np.ndarray, k: int) -> np.ndarray:
        """``A_k x`` using the H2 structure without expansion."""
        x = np.asarray(x)
        y = np.zeros(self.mesh.n_panels, dtype=complex)
        # bases are real, so W^H x = W^T x
        xhat = self.col_basis.forward(x)
        yhat = {}
        for b in self.partition.blocks:
            S = self.blocks[b.key].slice(k)
            if b.admissible:
                v = S @ xhat[b.col.id]
                yhat[b.row.id] = yhat.get(b.row.id, 0) + v
            else:
                y[b.row.indices] += S @ x[b.col.indices]
        return y + self.row_basis.backward(yhat, self.mesh.n_panels)

    def storage_units(self) -> int:
        """Complex scalars stored: block factors plus cluster bases."""
        total = sum(blk.storage_units() for blk in self.blocks.values())
        total += self.row_basis.storage_units()
        if self.col_basis is not self.row_basis:
            total += self.col_basis.storage_units()
        return int(total)

    def far_storage_units(self) -> int:
        total = sum(self.blocks[b.key].storage_units() for b in self.partition.far)
        total += self.row_basis.storage_units()
        if self.col_basis is not self.row_basis:
            total += self.col_basis.storage_units()
        return int(total)

    def h2_storage_units(self) -> int:
        """Storage of an H2 approximation per frequency without MACA."""
        K = self.n_modes
        total = 0
        for b in self.partition.blocks:
            if b.admissible:
                total += self.row_basis.p * self.col_basis.p * K
            else:
                total += b.row.size * b.col.size * K
        total += self.row_basis.storage_units()
        if self.col_basis is not self.row_basis:
            total += self.col_basis.storage_units()
        return int(total)

    def max_rank(self) -> int:
        return max((blk.rank for blk in self.blocks.values()), default=0)

    def rank_histogram(self) -> dict:
        hist = {}
        for blk in self.blocks.values():
            hist[blk.rank] = hist.get(blk.rank, 0) + 1
        return dict(sorted(hist.items()))


def _cached_matrix(basis, cluster, cache, tag):
    key = (tag, id(basis), cluster.id)
    if key not in cache:
        cache[key] = basis.matrix(cluster)
    return cache[key]


def storage_units_dense(M: int, N: int) -> int:
    return M * M * N


def relative_error(ht, dense_oracle: np.ndarray) -> float:
    approx = ht.expand_dense() if isinstance(ht, HTensor) else np.asarray(ht)
    ref = np.linalg.norm(dense_oracle)
    if ref == 0.0:
        return float(np.linalg.norm(approx))
    return float(np.linalg.norm(approx - dense_oracle) / ref)


def block_errors(ht: HTensor, dense_oracle: np.ndarray) -> dict:
    """Absolute Frobenius error per partition block."""
    cache = {}
    return {
        b.key: float(np.linalg.norm(ht.block_dense(b, cache) - dense_oracle[np.ix_(b.row.indices, b.col.indices)]))
        for b in ht.partition.blocks
    }


def max_rank(ht: HTensor) -> int:
    return ht.max_rank()


def rank_histogram(ht: HTensor) -> dict:
    return ht.rank_histogram()


def storage_units(ht) -> int:
    if isinstance(ht, np.ndarray):
        return int(ht.size)
    return ht.storage_units()


@dataclass
class Structure:
    tree: Cluster
    partition: BlockPartition
    row_basis: ClusterBasis
    col_basis: ClusterBasis


def build_structure(mesh: SurfaceMesh, params: CompressionParams, kind: str = "slp") -> Structure:
    """Frequency-independent part: tree, partition and bases."""
    tree = build_cluster_tree(mesh, n_min=params.n_min)
    partition = build_block_partition(tree, tree, params.eta, params.n_min)
    row_basis = ClusterBasis(tree, mesh, params.m)
    col_basis = row_basis if kind == "slp" else ClusterBasis(tree, mesh, params.m, derivative=True)
    return Structure(tree, partition, row_basis, col_basis)


def compress(
    mesh: SurfaceMesh,
    scheme: CqmScheme,
    params: CompressionParams | None = None,
    kind: str = "slp",
    threads: int | None = 1,
    structure: Structure | None = None,
) -> HTensor:
    """Build the hierarchical tensor approximation of the operator family."""
    if kind not in KINDS:
        raise ValueError(f"unknown operator kind {kind!r}")
    params = params or CompressionParams()
    t0 = time.perf_counter()
    if structure is None:
        structure = build_structure(mesh, params, kind)
    elif kind == "dlp" and structure.col_basis is structure.row_basis:
        structure = replace(structure, col_basis=ClusterBasis(structure.tree, mesh, params.m, derivative=True))
    t1 = time.perf_counter()
    grids = structure.row_basis.grids

    def job(b):
        if b.admissible:
            src = FarEntries(grids[b.row.id].points, grids[b.col.id].points, scheme)
            return maca(src, eps=params.far_eps)
        src = NearEntries(mesh, b.row.indices, b.col.indices, scheme, params.quad, kind)
        return maca(src, eps=params.near_eps)

    blocks_list = structure.partition.blocks
    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, blocks_list))
    else:
        results = [job(b) for b in blocks_list]
    blocks = {b.key: blk for b, blk in zip(blocks_list, results)}
    t2 = time.perf_counter()
    log.info("compressed %d blocks (%s) in %.2fs", len(blocks), kind, t2 - t1)
    return HTensor(
        mesh=mesh,
        scheme=scheme,
        params=params,
        tree=structure.tree,
        partition=structure.partition,
        row_basis=structure.row_basis,
        col_basis=structure.col_basis,
        blocks=blocks,
        kind=kind,
        timings={"structure": t1 - t0, "maca": t2 - t1},
    )


def expand_dense(ht: HTensor) -> np.ndarray:
    return ht.expand_dense()
