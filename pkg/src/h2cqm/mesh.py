"""Closed flat-triangle surface meshes: OFF input/output and icospheres."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    """Raised for malformed or non-closed meshes."""


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    """Triangulated closed surface with per-panel geometry.

    ``normals`` point out of the enclosed solid, i.e. into the exterior
    domain where the wave propagates.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    areas: np.ndarray = field(init=False)
    centroids: np.ndarray = field(init=False)
    normals: np.ndarray = field(init=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshError("vertices must have shape (V, 3)")
        if t.ndim != 2 or t.shape[1] != 3:
            raise MeshError("triangles must have shape (M, 3)")
        if len(t) == 0:
            raise MeshError("mesh has no triangles")
        if t.min() < 0 or t.max() >= len(v):
            raise MeshError("triangle references a missing vertex")
        v.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

        p0, p1, p2 = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
        cross = np.cross(p1 - p0, p2 - p0)
        twice_area = np.linalg.norm(cross, axis=1)
        if np.any(twice_area <= 0.0):
            bad = int(np.argmin(twice_area))
            raise MeshError(f"degenerate triangle {bad}")
        _check_closed(t)
        normals = cross / twice_area[:, None]
        # signed volume by the divergence theorem; negative means inward normals
        if np.einsum("ij,ij->", p0, cross) < 0.0:
            normals = -normals
        for name, arr in (
            ("areas", 0.5 * twice_area),
            ("centroids", (p0 + p1 + p2) / 3.0),
            ("normals", normals),
        ):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n_panels(self) -> int:
        return len(self.triangles)

    def __len__(self) -> int:
        return len(self.triangles)

    @property
    def corners(self) -> np.ndarray:
        """Panel corner coordinates, shape (M, 3, 3)."""
        return self.vertices[self.triangles]

    def volume(self) -> float:
        """Enclosed volume (positive for outward normals)."""
        p0 = self.vertices[self.triangles[:, 0]]
        return float(np.einsum("ij,ij->", p0, self.normals * self.areas[:, None]) / 3.0)

    def mesh_width(self) -> float:
        """Maximum edge length."""
        c = self.corners
        edges = np.concatenate(
            [c[:, 1] - c[:, 0], c[:, 2] - c[:, 1], c[:, 0] - c[:, 2]]
        )
        return float(np.linalg.norm(edges, axis=1).max())

    def diameters(self) -> np.ndarray:
        """Per-panel diameter (longest edge)."""
        c = self.corners
        return np.max(
            np.stack(
                [
                    np.linalg.norm(c[:, 1] - c[:, 0], axis=1),
                    np.linalg.norm(c[:, 2] - c[:, 1], axis=1),
                    np.linalg.norm(c[:, 0] - c[:, 2], axis=1),
                ]
            ),
            axis=0,
        )


def _check_closed(triangles: np.ndarray) -> None:
    directed = Counter()
    for a, b, c in triangles.tolist():
        for e in ((a, b), (b, c), (c, a)):
            directed[e] += 1
    undirected = Counter()
    for (a, b), n in directed.items():
        undirected[(min(a, b), max(a, b))] += n
    for edge, n in undirected.items():
        if n != 2:
            raise MeshError(f"open surface: edge {edge} has {n} incident faces")
    for (a, b), n in directed.items():
        if n != 1 or directed.get((b, a), 0) != 1:
            raise MeshError(f"inconsistent orientation at edge {(a, b)}")


def load_mesh(path) -> SurfaceMesh:
    """Read an ASCII OFF file containing a closed triangle surface."""
    lines = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        text = raw.split("#", 1)[0].strip()
        if text:
            lines.append((lineno, text))
    if not lines:
        raise MeshError("empty OFF file")

    lineno, header = lines[0]
    rest = lines[1:]
    if header.startswith("OFF"):
        header = header[3:].strip()
        if not header:
            if not rest:
                raise MeshError(f"line {lineno}: missing counts line")
            lineno, header = rest[0]
            rest = rest[1:]
    try:
        counts = [int(x) for x in header.split()]
        nv, nf = counts[0], counts[1]
    except (ValueError, IndexError):
        raise MeshError(f"line {lineno}: cannot parse counts line {header!r}") from None
    if len(rest) < nv + nf:
        raise MeshError(f"expected {nv} vertices and {nf} faces, file is truncated")

    vertices = np.empty((nv, 3))
    for k in range(nv):
        lineno, text = rest[k]
        try:
            vertices[k] = [float(x) for x in text.split()[:3]]
        except ValueError:
            raise MeshError(f"line {lineno}: bad vertex {text!r}") from None
    triangles = np.empty((nf, 3), dtype=np.int64)
    for k in range(nf):
        lineno, text = rest[nv + k]
        try:
            fields = [int(x) for x in text.split()]
        except ValueError:
            raise MeshError(f"line {lineno}: bad face {text!r}") from None
        if not fields or fields[0] != 3 or len(fields) < 4:
            raise MeshError(f"line {lineno}: non-triangle face")
        triangles[k] = fields[1:4]
    if triangles.size and (triangles.min() < 0 or triangles.max() >= nv):
        raise MeshError("face references a vertex index out of range")
    return SurfaceMesh(vertices, triangles)


def write_mesh(mesh: SurfaceMesh, path) -> None:
    """Write ``mesh`` as ASCII OFF with round-trip exact coordinates."""
    out = ["OFF", f"{len(mesh.vertices)} {len(mesh.triangles)} 0"]
    out += [" ".join(repr(float(x)) for x in p) for p in mesh.vertices]
    out += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles.tolist()]
    Path(path).write_text("\n".join(out) + "\n")


def _icosahedron():
    phi = (1.0 + 5.0**0.5) / 2.0
    v = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=float,
    )
    f = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    return v / np.linalg.norm(v, axis=1)[:, None], f


def make_sphere(refinement: int) -> SurfaceMesh:
    """Icosphere of radius 1 with ``20 * 4**refinement`` flat panels."""
    if refinement < 0:
        raise ValueError("refinement must be >= 0")
    verts, faces = _icosahedron()
    verts = [tuple(p) for p in verts]
    for _ in range(refinement):
        midpoint = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in midpoint:
                p = np.add(verts[a], verts[b])
                verts.append(tuple(p / np.linalg.norm(p)))
                midpoint[key] = len(verts) - 1
            return midpoint[key]

        refined = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            refined += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = refined
    return SurfaceMesh(np.array(verts), np.array(faces))
