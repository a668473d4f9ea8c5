"""Geometric cluster trees and admissible block partitions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import SurfaceMesh


@dataclass(eq=False)
class Cluster:
    """Node of a binary cluster tree.

    ``indices`` is a view into the tree's permutation; ``bbox`` is a (2, 3)
    array of lower and upper corners containing all member panels.
    """

    indices: np.ndarray
    bbox: np.ndarray
    sons: list = field(default_factory=list)
    level: int = 0
    id: int = -1

    @property
    def size(self) -> int:
        return len(self.indices)

    def __len__(self):
        return len(self.indices)

    @property
    def is_leaf(self) -> bool:
        return not self.sons

    def walk(self):
        """Pre-order traversal."""
        stack = [self]
        while stack:
            c = stack.pop()
            yield c
            stack.extend(reversed(c.sons))

    def leaves(self):
        return [c for c in self.walk() if c.is_leaf]

    def depth(self) -> int:
        return max(c.level for c in self.walk())


def _panel_boxes(mesh: SurfaceMesh):
    c = mesh.corners
    return c.min(axis=1), c.max(axis=1)


def build_cluster_tree(mesh: SurfaceMesh, index_set=None, n_min: int = 32) -> Cluster:
    """Bisect bounding boxes along their longest axis until clusters hold
    at most ``n_min`` panels.

    Panels are assigned to a side by centroid. When the midpoint split leaves
    one side empty the median along the same axis is used instead.
    """
    if n_min < 1:
        raise ValueError("n_min must be >= 1")
    if index_set is None:
        index_set = np.arange(mesh.n_panels)
    perm = np.array(index_set, dtype=np.int64)
    if perm.size == 0:
        raise ValueError("index_set must be nonempty")
    lo, hi = _panel_boxes(mesh)
    cent = mesh.centroids
    counter = iter(range(1 << 62))

    def bbox(idx):
        return np.stack([lo[idx].min(axis=0), hi[idx].max(axis=0)])

    def build(start, stop, level):
        idx = perm[start:stop]
        node = Cluster(idx, bbox(idx), level=level, id=next(counter))
        if stop - start <= n_min:
            return node
        ext = cent[idx].max(axis=0) - cent[idx].min(axis=0)
        axis = int(np.argmax(ext))
        coord = cent[idx, axis]
        mid = 0.5 * (coord.max() + coord.min())
        left = coord <= mid
        if left.all() or not left.any():
            order = np.argsort(coord, kind="stable")
            left = np.zeros(len(idx), dtype=bool)
            left[order[: len(idx) // 2]] = True
        # stable partition keeps the ordering deterministic
        perm[start:stop] = np.concatenate([idx[left], idx[~left]])
        split = start + int(left.sum())
        node.indices = perm[start:stop]
        node.sons = [build(start, split, level + 1), build(split, stop, level + 1)]
        return node

    return build(0, len(perm), 0)


def box_diameter(box) -> float:
    box = np.asarray(box)
    return float(np.linalg.norm(box[1] - box[0]))


def box_distance(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    gap = np.maximum(0.0, np.maximum(a[0] - b[1], b[0] - a[1]))
    return float(np.linalg.norm(gap))


def admissible(box_r, box_c, eta: float) -> bool:
    """Bounding-box admissibility ``max(diam) <= eta * dist``."""
    dist = box_distance(box_r, box_c)
    if dist <= 0.0:
        return False
    return max(box_diameter(box_r), box_diameter(box_c)) <= eta * dist


@dataclass(frozen=True)
class Block:
    row: Cluster
    col: Cluster
    admissible: bool

    @property
    def shape(self):
        return (self.row.size, self.col.size)

    @property
    def key(self):
        return (self.row.id, self.col.id)


@dataclass
class BlockPartition:
    blocks: list
    n_min: int
    eta: float

    @property
    def near(self):
        return [b for b in self.blocks if not b.admissible]

    @property
    def far(self):
        return [b for b in self.blocks if b.admissible]

    def stats(self) -> dict:
        near, far = self.near, self.far
        return {
            "blocks": len(self.blocks),
            "near_blocks": len(near),
            "far_blocks": len(far),
            "near_entries": int(sum(b.row.size * b.col.size for b in near)),
            "far_entries": int(sum(b.row.size * b.col.size for b in far)),
        }

    def structure(self):
        """Hashable description used to compare partitions."""
        return tuple(
            (tuple(b.row.indices.tolist()), tuple(b.col.indices.tolist()), b.admissible)
            for b in self.blocks
        )


def build_block_partition(root_r: Cluster, root_c: Cluster, eta: float = 2.0, n_min: int = 32) -> BlockPartition:
    """Leaves of the block cluster tree under the bounding-box condition."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    blocks = []
    stack = [(root_r, root_c)]
    while stack:
        r, c = stack.pop()
        if admissible(r.bbox, c.bbox, eta):
            blocks.append(Block(r, c, True))
        elif r.sons and c.sons:
            stack.extend((rs, cs) for rs in reversed(r.sons) for cs in reversed(c.sons))
        elif r.sons:
            stack.extend((rs, c) for rs in reversed(r.sons))
        elif c.sons:
            stack.extend((r, cs) for cs in reversed(c.sons))
        else:
            blocks.append(Block(r, c, False))
    return BlockPartition(blocks, n_min, eta)


def coverage(partition: BlockPartition, n_rows: int, n_cols: int) -> np.ndarray:
    """Count how often each matrix entry is covered by a block."""
    cov = np.zeros((n_rows, n_cols), dtype=np.int64)
    for b in partition.blocks:
        cov[np.ix_(b.row.indices, b.col.indices)] += 1
    return cov
