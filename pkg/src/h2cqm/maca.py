"""Multivariate adaptive cross approximation of third-order tensors.

A tensor ``G`` of shape ``(m, n, p)`` is approximated by
``sum_l C_l[i, j] * d_l[k]`` using full slices ``G[:, :, k]`` and fibres
``G[i, j, :]`` of the residual. This is ACA with full pivoting in the slice
and partial pivoting along the fibre, applied to the mode-3 unfolding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TINY_PIVOT = 1e-300


@dataclass
class LowRankTensorBlock:
    """``G[i, j, k] ~= sum_l C[l, i, j] * D[k, l]``."""

    C: np.ndarray  # (r, m, n)
    D: np.ndarray  # (p, r)
    pivots: list | None = None

    @classmethod
    def empty(cls, m: int, n: int, p: int) -> "LowRankTensorBlock":
        return cls(np.zeros((0, m, n), dtype=complex), np.zeros((p, 0), dtype=complex), [])

    @property
    def rank(self) -> int:
        return self.C.shape[0]

    @property
    def dims(self):
        return (self.C.shape[1], self.C.shape[2], self.D.shape[0])

    def storage_units(self) -> int:
        return int(self.C.size + self.D.size)

    def slice(self, k: int) -> np.ndarray:
        return lr_slice(self, k)

    def expand(self) -> np.ndarray:
        return np.einsum("lij,kl->ijk", self.C, self.D)

    def with_fibres(self, D: np.ndarray) -> "LowRankTensorBlock":
        return LowRankTensorBlock(self.C, D, self.pivots)


def lr_frobenius_norm(block: LowRankTensorBlock) -> float:
    """Frobenius norm from the Gram matrices of slices and fibres."""
    if block.rank == 0:
        return 0.0
    C = block.C.reshape(block.rank, -1)
    gc = C @ C.conj().T
    gd = block.D.T @ block.D.conj()
    return float(np.sqrt(max(np.sum(gc * gd).real, 0.0)))


def lr_slice(block: LowRankTensorBlock, k: int) -> np.ndarray:
    p = block.dims[2]
    if not 0 <= k < p:
        raise IndexError(f"slice index {k} out of range for p={p}")
    return np.tensordot(block.D[k], block.C, axes=(0, 0)) if block.rank else np.zeros(block.dims[:2], dtype=complex)


class ScalarEntries:
    """Adapter turning a scalar callback ``entry(i, j, k)`` into slices and fibres."""

    def __init__(self, entry, dims):
        self.entry = entry
        self.dims = tuple(dims)

    def slice(self, k):
        m, n, _ = self.dims
        return np.array([[self.entry(i, j, k) for j in range(n)] for i in range(m)], dtype=complex)

    def fibre(self, i, j):
        return np.array([self.entry(i, j, k) for k in range(self.dims[2])], dtype=complex)


class DenseEntries:
    """Entry source backed by a materialised tensor."""

    def __init__(self, tensor):
        self.tensor = np.asarray(tensor)
        self.dims = self.tensor.shape

    def slice(self, k):
        return self.tensor[:, :, k]

    def fibre(self, i, j):
        return self.tensor[i, j, :]


def maca(entries, dims=None, eps: float = 1e-4, max_rank: int | None = None) -> LowRankTensorBlock:
    """Approximate a tensor from on-demand slices and fibres.

    ``entries`` either provides ``slice(k)`` and ``fibre(i, j)`` or is a
    scalar callable ``entry(i, j, k)`` (then ``dims`` is required). Iteration
    stops when the newest update satisfies
    ``||C_l||_F ||d_l||_2 <= eps * ||G^(l)||_F`` or the residual slice at the
    pivot frequency vanishes. The update that meets the tolerance is not
    included in the result.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if callable(entries) and not hasattr(entries, "slice"):
        if dims is None:
            raise ValueError("dims required for a scalar entry callback")
        entries = ScalarEntries(entries, dims)
    if dims is None:
        dims = entries.dims
    m, n, p = dims
    limit = p if max_rank is None else min(p, max_rank)

    Cs: list[np.ndarray] = []
    ds: list[np.ndarray] = []
    pivots = []
    # Gram matrices for the running norm of G^(l)
    gc = np.zeros((0, 0), dtype=complex)
    gd = np.zeros((0, 0), dtype=complex)
    used_k = set()
    k = 0
    while len(Cs) < limit:
        C = np.array(entries.slice(k), dtype=complex).reshape(m, n)
        for Cl, dl in zip(Cs, ds):
            C -= dl[k] * Cl
        flat = np.abs(C).ravel()
        pos = int(np.argmax(flat))
        pivot_val = C.flat[pos]
        if abs(pivot_val) <= TINY_PIVOT:
            break
        i, j = divmod(pos, n)
        d = np.array(entries.fibre(i, j), dtype=complex).reshape(p)
        for Cl, dl in zip(Cs, ds):
            d -= Cl[i, j] * dl
        d /= pivot_val
        d[k] = 1.0
        for kk in used_k:
            d[kk] = 0.0

        cvec = np.array([np.vdot(Cl, C) for Cl in Cs], dtype=complex)
        dvec = np.array([np.vdot(dl, d) for dl in ds], dtype=complex)
        r = len(Cs)
        gc_new = np.empty((r + 1, r + 1), dtype=complex)
        gd_new = np.empty((r + 1, r + 1), dtype=complex)
        gc_new[:r, :r], gd_new[:r, :r] = gc, gd
        # gc[a, b] = <C_a, C_b> = sum C_a * conj(C_b)
        gc_new[:r, r] = cvec.conj()
        gc_new[r, :r] = cvec
        gd_new[:r, r] = dvec.conj()
        gd_new[r, :r] = dvec
        gc_new[r, r] = np.vdot(C, C)
        gd_new[r, r] = np.vdot(d, d)
        gc, gd = gc_new, gd_new

        Cs.append(C)
        ds.append(d)
        pivots.append((i, j, k))
        used_k.add(k)

        norm_g = np.sqrt(max(np.sum(gc * gd).real, 0.0))
        update = np.sqrt(gc[r, r].real * gd[r, r].real)
        if update <= eps * norm_g:
            # the sub-tolerance update is discarded (r = l - 1)
            Cs.pop()
            ds.pop()
            pivots.pop()
            break
        mag = np.abs(d)
        mag[list(used_k)] = -1.0
        k = int(np.argmax(mag))
        if mag[k] < 0:
            break

    if not Cs:
        return LowRankTensorBlock.empty(m, n, p)
    return LowRankTensorBlock(np.stack(Cs), np.stack(ds, axis=1), pivots)


def eps_from_delta(delta: float) -> float:
    """Stopping tolerance giving residual ``<= delta ||G||`` under geometric decay."""
    return delta * (1.0 - delta) / (1.0 + delta)
