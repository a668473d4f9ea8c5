"""Command-line front end: ``compress``, ``solve`` and ``bench``."""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import cqm
from .assembly import QuadratureConfig, assemble_dense_tensor
from .htensor import DENSE_CAP, CompressionParams, build_structure, compress, relative_error, storage_units_dense
from .kernels import CqmScheme, default_radius
from .mesh import MeshError, load_mesh, make_sphere
from .serialize import dump_factors

CSV_SCHEMA = {
    "steps": ("h2cqm-steps", 1, ["n", "t", "norm_q", "l2_error", "rel_error", "deviation"]),
    "bench": (
        "h2cqm-bench",
        1,
        ["M", "N", "T", "h", "m", "eps", "eta", "n_min", "far_blocks", "near_blocks", "max_rank",
         "storage_units", "far_storage_units", "dense_units", "h2_units", "compression_dense",
         "compression_h2", "error", "time_structure", "time_maca", "time_total"],
    ),
}

log = logging.getLogger("h2cqm")


def _write_csv(path, kind, rows):
    name, version, cols = CSV_SCHEMA[kind]
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema={name} version={version}\n")
        w = csv.writer(fh)
        w.writerow(cols)
        for row in rows:
            w.writerow([_fmt(row.get(c)) for c in cols])


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    raise TypeError(type(o))


def _add_common(p: argparse.ArgumentParser, sweep: bool = False):
    many = {"nargs": "*"} if sweep else {}
    src = p.add_mutually_exclusive_group()
    src.add_argument("--mesh", type=Path, help="ASCII OFF surface mesh")
    src.add_argument("--sphere", type=int, default=None if sweep else 2, help="icosphere refinement level", **many)
    p.add_argument("--steps", type=int, default=None if sweep else 32, help="number of time steps N", **many)
    p.add_argument("--final-time", type=float, default=None, help="final time T (default: steps * courant * h)")
    p.add_argument("--courant", type=float, default=0.5, help="dt / h used when --final-time is absent")
    p.add_argument("--radius", type=float, default=None, help="CQM contour radius R (default 10^(-5/N))")
    p.add_argument("--method", choices=("BDF1", "BDF2"), default="BDF2")
    p.add_argument("--order", type=int, default=None if sweep else 4, help="interpolation points per axis m", **many)
    p.add_argument("--eps", type=float, default=None if sweep else 1e-4, help="MACA tolerance", **many)
    p.add_argument("--eta", type=float, default=2.0, help="admissibility parameter")
    p.add_argument("--nmin", type=int, default=32, help="leaf size")
    p.add_argument("--quad-far", type=int, default=4, help="degree of the regular triangle rule")
    p.add_argument("--quad-sing", type=int, default=4, help="Gauss order of the singular transforms")
    p.add_argument("--oracle", action="store_true", help="compare against the dense tensor")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="h2cqm", description="Compressed convolution quadrature BEM")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    pc = sub.add_parser("compress", help="compress the single layer tensor and report metrics")
    _add_common(pc)
    pc.add_argument("--kind", choices=("slp", "dlp"), default="slp")
    pc.add_argument("--dump", type=Path, help="write the factors to this file")

    ps = sub.add_parser("solve", help="Dirichlet spherical wave benchmark")
    _add_common(ps)
    ps.add_argument("--data", choices=("wave", "zero"), default="wave")

    pb = sub.add_parser("bench", help="parameter sweeps, one CSV row per configuration")
    _add_common(pb, sweep=True)
    return parser


def _validate(parser, args, sweep=False):
    def listify(v):
        return v if isinstance(v, list) else [v]

    for N in listify(args.steps) if args.steps is not None else []:
        if N < 1:
            parser.error("--steps must be >= 1")
    for m in listify(args.order) if args.order is not None else []:
        if m < 1:
            parser.error("--order must be >= 1")
    for e in listify(args.eps) if args.eps is not None else []:
        if not e > 0:
            parser.error("--eps must be positive")
    if args.radius is not None and not 0 < args.radius < 1:
        parser.error("--radius must lie in (0, 1)")
    if not args.eta > 0:
        parser.error("--eta must be positive")
    if args.nmin <= 1:
        parser.error("--nmin must be > 1")
    if args.final_time is not None and not args.final_time > 0:
        parser.error("--final-time must be positive")
    if not args.courant > 0:
        parser.error("--courant must be positive")
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    if args.quad_far < 1 or args.quad_sing < 1:
        parser.error("quadrature orders must be >= 1")


def _mesh(args, sphere=None):
    if args.mesh is not None:
        return load_mesh(args.mesh), str(args.mesh)
    level = args.sphere if sphere is None else sphere
    return make_sphere(level), f"sphere:{level}"


def _scheme(args, mesh, N):
    h = mesh.mesh_width()
    T = args.final_time if args.final_time is not None else N * args.courant * h
    R = args.radius if args.radius is not None else default_radius(N)
    return CqmScheme(N, T, R, args.method)


def _params(args, m, eps):
    return CompressionParams(
        n_min=args.nmin, eta=args.eta, m=m, eps=eps,
        quad=QuadratureConfig(far_order=args.quad_far, singular_order=args.quad_sing),
    )


def _refuse_oracle(M, N):
    if M * M * N > DENSE_CAP:
        raise OracleRefused(f"oracle refused: dense tensor {M}x{M}x{N} exceeds the cap of {DENSE_CAP} scalars")


class OracleRefused(RuntimeError):
    pass


def _metrics(ht, mesh, scheme, dense=None):
    M, N = mesh.n_panels, scheme.N
    st = ht.partition.stats()
    storage = ht.storage_units()
    dense_units = storage_units_dense(M, N)
    h2 = ht.h2_storage_units()
    out = {
        "M": M, "N": N, "T": scheme.T, "R": scheme.R, "method": scheme.method, "h": mesh.mesh_width(),
        "m": ht.params.m, "eps": ht.params.eps, "eta": ht.params.eta, "n_min": ht.params.n_min,
        "far_blocks": st["far_blocks"], "near_blocks": st["near_blocks"],
        "max_rank": ht.max_rank(), "rank_histogram": {str(k): v for k, v in ht.rank_histogram().items()},
        "storage_units": storage, "far_storage_units": ht.far_storage_units(),
        "dense_units": dense_units, "h2_units": h2,
        "compression_dense": storage / dense_units, "compression_h2": storage / h2,
        "error": None,
        "time_structure": ht.timings.get("structure", 0.0), "time_maca": ht.timings.get("maca", 0.0),
    }
    if dense is not None:
        out["error"] = relative_error(ht, dense)
    return out


def cmd_compress(args) -> dict:
    mesh, source = _mesh(args)
    scheme = _scheme(args, mesh, args.steps)
    if args.oracle:
        _refuse_oracle(mesh.n_panels, scheme.N)
    params = _params(args, args.order, args.eps)
    t0 = time.perf_counter()
    ht = compress(mesh, scheme, params, args.kind, threads=args.threads)
    wall = time.perf_counter() - t0
    dense = assemble_dense_tensor(mesh, scheme, params.quad, args.kind) if args.oracle else None
    metrics = _metrics(ht, mesh, scheme, dense)
    metrics.update({"mesh": source, "kind": args.kind, "wall_time": wall})
    args.out.mkdir(parents=True, exist_ok=True)
    if args.dump:
        dump_factors(ht, args.dump)
        metrics["dump"] = str(args.dump)
    _write_json(args.out / "compress.json", metrics)
    return metrics


def cmd_solve(args) -> dict:
    wall0 = time.perf_counter()
    mesh, source = _mesh(args)
    scheme = _scheme(args, mesh, args.steps)
    if args.oracle:
        _refuse_oracle(mesh.n_panels, scheme.N)
    params = _params(args, args.order, args.eps)

    t0 = time.perf_counter()
    structure = build_structure(mesh, params, "slp")
    htV = compress(mesh, scheme, params, "slp", threads=args.threads, structure=structure)
    htK = compress(mesh, scheme, params, "dlp", threads=args.threads, structure=structure)
    wV, wK = cqm.transform_weights(htV), cqm.transform_weights(htK)
    t1 = time.perf_counter()

    wave = cqm.SphericalWave.for_mesh(mesh)
    if args.data == "zero":
        g = np.zeros((scheme.N + 1, mesh.n_panels))
    else:
        g = cqm.dirichlet_data(mesh, scheme, wave)
    res = cqm.mot_solve(wV, wK, g, mesh.areas)
    q = res.q

    if args.data == "zero":
        err, ref = np.zeros(len(q)), np.zeros(len(q))
    else:
        err, ref = cqm.neumann_errors(mesh, scheme, q, wave)
    deviation = np.full(len(q), np.nan)
    summary_dev = None
    if args.oracle:
        Vd = cqm.dense_weights(assemble_dense_tensor(mesh, scheme, params.quad, "slp"), scheme.R)
        Kd = cqm.dense_weights(assemble_dense_tensor(mesh, scheme, params.quad, "dlp"), scheme.R)
        qd = cqm.mot_solve_dense(Vd, Kd, g, mesh.areas)
        if args.data == "zero":
            err_d = np.zeros(len(q))
        else:
            err_d, _ = cqm.neumann_errors(mesh, scheme, qd, wave)
        deviation = cqm.deviation_ratios(err, err_d)
        finite = deviation[np.isfinite(deviation)]
        summary_dev = {
            "min": float(finite.min()) if finite.size else None,
            "max": float(finite.max()) if finite.size else None,
            "time_averaged_error_dense": cqm.time_averaged_error(err_d, ref),
        }
    wall = time.perf_counter() - wall0

    areas = mesh.areas
    rows = []
    for n in range(len(q)):
        rows.append({
            "n": n, "t": float(scheme.times[n]), "norm_q": float(np.sqrt(np.sum(areas * q[n] ** 2))),
            "l2_error": float(err[n]), "rel_error": float(err[n] / ref[n]) if ref[n] > 0 else None,
            "deviation": None if not np.isfinite(deviation[n]) else float(deviation[n]),
        })
    args.out.mkdir(parents=True, exist_ok=True)
    _write_csv(args.out / "steps.csv", "steps", rows)
    summary = {
        "mesh": source, "M": mesh.n_panels, "N": scheme.N, "T": scheme.T, "R": scheme.R,
        "dt": scheme.dt, "h": mesh.mesh_width(), "courant": scheme.dt / mesh.mesh_width(),
        "m": params.m, "eps": params.eps, "eta": params.eta, "n_min": params.n_min, "data": args.data,
        "final_error": float(err[-1]), "time_averaged_error": cqm.time_averaged_error(err, ref),
        "max_rank_V": htV.max_rank(), "max_rank_K": htK.max_rank(),
        "storage_units": htV.storage_units() + htK.storage_units(),
        "timings": {
            "assembly": t1 - t0,
            "inversion": res.timings["factorization"],
            "marching": res.timings["marching"],
        },
        "wall_time": wall,
        "deviation": summary_dev,
    }
    _write_json(args.out / "solve.json", summary)
    return summary


def cmd_bench(args) -> list:
    if args.mesh is not None:
        spheres = [None]
    else:
        spheres = args.sphere if args.sphere is not None else [2]
    steps = args.steps if args.steps is not None else [32]
    orders = args.order if args.order is not None else [4]
    epss = args.eps if args.eps is not None else [1e-4]
    rows = []
    for sphere, N, m, eps in itertools.product(spheres, steps, orders, epss):
        mesh, _ = _mesh(args, sphere)
        scheme = _scheme(args, mesh, N)
        if args.oracle:
            _refuse_oracle(mesh.n_panels, N)
        t0 = time.perf_counter()
        ht = compress(mesh, scheme, _params(args, m, eps), "slp", threads=args.threads)
        total = time.perf_counter() - t0
        dense = assemble_dense_tensor(mesh, scheme, ht.params.quad, "slp") if args.oracle else None
        row = _metrics(ht, mesh, scheme, dense)
        row["time_total"] = total
        rows.append(row)
        log.info("M=%d N=%d m=%d eps=%g done in %.1fs", mesh.n_panels, N, m, eps, total)
    args.out.mkdir(parents=True, exist_ok=True)
    _write_csv(args.out / "bench.csv", "bench", rows)
    return rows


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    _validate(parser, args)
    try:
        if args.command == "compress":
            out = cmd_compress(args)
        elif args.command == "solve":
            out = cmd_solve(args)
        else:
            out = {"rows": len(cmd_bench(args))}
    except OracleRefused as exc:
        print(str(exc), file=sys.stderr)
        return 3
    except (MeshError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    json.dump(out, sys.stdout, indent=2, sort_keys=True, default=_json_default)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
