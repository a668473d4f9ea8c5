"""Binary dump of compressed factors.

Layout: 8-byte magic, little-endian uint32 format version, uint32 header
length, UTF-8 JSON header, then every block's slices ``C`` followed by its
fibres ``D`` as little-endian complex128, in partition order. Trees, bases
and the partition are not stored; they are rebuilt from the mesh and the
parameters in the header, which is deterministic.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .assembly import QuadratureConfig
from .htensor import CompressionParams, HTensor, build_structure
from .kernels import CqmScheme
from .maca import LowRankTensorBlock
from .mesh import SurfaceMesh

MAGIC = b"H2CQMFAC"
FORMAT_VERSION = 1
_DTYPE = np.dtype("<c16")


class FormatError(ValueError):
    pass


def _header(ht: HTensor) -> dict:
    p, q, s = ht.params, ht.params.quad, ht.scheme
    return {
        "kind": ht.kind,
        "n_panels": ht.mesh.n_panels,
        "scheme": {"N": s.N, "T": s.T, "R": s.R, "method": s.method},
        "params": {
            "n_min": p.n_min, "eta": p.eta, "m": p.m, "eps": p.eps,
            "eps_near": p.eps_near, "eps_far": p.eps_far,
            "quad": {"far_order": q.far_order, "singular_order": q.singular_order,
                     "near_threshold": q.near_threshold},
        },
        "modes": ht.n_modes,
        "blocks": [[b.row.id, b.col.id, ht.blocks[b.key].rank] + list(ht.blocks[b.key].C.shape[1:])
                   for b in ht.partition.blocks],
    }


def dump_factors(ht: HTensor, path) -> None:
    header = json.dumps(_header(ht), sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(header)))
        fh.write(header)
        for b in ht.partition.blocks:
            blk = ht.blocks[b.key]
            fh.write(np.ascontiguousarray(blk.C, dtype=_DTYPE).tobytes())
            fh.write(np.ascontiguousarray(blk.D, dtype=_DTYPE).tobytes())


def read_header(path) -> dict:
    with open(path, "rb") as fh:
        return _read_header(fh)


def _read_header(fh) -> dict:
    if fh.read(len(MAGIC)) != MAGIC:
        raise FormatError("not a factor dump")
    version, size = struct.unpack("<II", fh.read(8))
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported factor dump version {version}")
    return json.loads(fh.read(size).decode())


def load_factors(path, mesh: SurfaceMesh) -> HTensor:
    """Rebuild an :class:`HTensor` from a dump and the mesh it was made for."""
    with open(path, "rb") as fh:
        hdr = _read_header(fh)
        payload = np.frombuffer(fh.read(), dtype=_DTYPE)
    if hdr["n_panels"] != mesh.n_panels:
        raise FormatError("mesh does not match the dump")
    sd, pd = hdr["scheme"], dict(hdr["params"])
    scheme = CqmScheme(sd["N"], sd["T"], sd["R"], sd["method"])
    pd["quad"] = QuadratureConfig(**pd["quad"])
    params = CompressionParams(**pd)
    structure = build_structure(mesh, params, hdr["kind"])
    K = hdr["modes"]
    blocks, pos = {}, 0
    entries = hdr["blocks"]
    if len(entries) != len(structure.partition.blocks):
        raise FormatError("partition does not match the dump")
    for b, (rid, cid, r, m, n) in zip(structure.partition.blocks, entries):
        if (rid, cid) != b.key:
            raise FormatError("partition does not match the dump")
        nc, nd = r * m * n, K * r
        if pos + nc + nd > payload.size:
            raise FormatError("truncated payload")
        C = payload[pos:pos + nc].reshape(r, m, n).astype(complex)
        D = payload[pos + nc:pos + nc + nd].reshape(K, r).astype(complex)
        pos += nc + nd
        blocks[b.key] = LowRankTensorBlock(C, D, [])
    if pos != payload.size:
        raise FormatError("trailing bytes in payload")
    return HTensor(mesh, scheme, params, structure.tree, structure.partition,
                   structure.row_basis, structure.col_basis, blocks, hdr["kind"])
