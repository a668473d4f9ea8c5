"""Quadrature rules on triangles and for singular panel pairs.

Reference triangle for single-panel rules: ``{(u, v) : u, v >= 0, u + v <= 1}``
with points mapped as ``A + u (B - A) + v (C - A)``.

The singular rules use the Sauter-Schwab reference element
``{(x1, x2) : 0 <= x2 <= x1 <= 1}`` mapped as ``A + x1 (B - A) + x2 (C - B)``.
In both cases the Jacobian of the map is twice the panel area.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_legendre_01(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _symmetric(orbits):
    pts, wts = [], []
    for bary, w in orbits:
        a, b, c = bary
        perms = {(a, b, c), (b, c, a), (c, a, b), (a, c, b), (b, a, c), (c, b, a)}
        for p in sorted(perms):
            pts.append(p[1:])
            wts.append(w)
    return np.array(pts), np.array(wts)


# symmetric Dunavant rules, weights normalised to sum 1
_SYMMETRIC = {
    1: [((1 / 3, 1 / 3, 1 / 3), 1.0)],
    2: [((2 / 3, 1 / 6, 1 / 6), 1 / 3)],
    4: [
        ((0.108103018168070, 0.445948490915965, 0.445948490915965), 0.223381589678011),
        ((0.816847572980459, 0.091576213509771, 0.091576213509771), 0.109951743655322),
    ],
    5: [
        ((1 / 3, 1 / 3, 1 / 3), 0.225),
        ((0.059715871789770, 0.470142064105115, 0.470142064105115), 0.132394152788506),
        ((0.797426985353087, 0.101286507323456, 0.101286507323456), 0.125939180544827),
    ],
}


@lru_cache(maxsize=None)
def triangle_rule(degree: int):
    """Points ``(n, 2)`` and weights ``(n,)`` on the reference triangle.

    Weights sum to 1/2 (the reference area). Exact for polynomials of total
    degree ``degree``. Symmetric rules are used up to degree 5, collapsed
    Gauss-Legendre products beyond.
    """
    degree = max(int(degree), 1)
    for d in sorted(_SYMMETRIC):
        if d >= degree:
            pts, wts = _symmetric(_SYMMETRIC[d])
            return pts, 0.5 * wts / wts.sum()
    n = degree // 2 + 1
    a, wa = gauss_legendre_01(n + 1)
    b, wb = gauss_legendre_01(n)
    A, B = np.meshgrid(a, b, indexing="ij")
    W = np.outer(wa * (1.0 - a), wb)
    pts = np.column_stack([A.ravel(), (B * (1.0 - A)).ravel()])
    return pts, W.ravel()


def map_points(corners: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Map reference points to panels: corners ``(..., 3, 3)`` -> ``(..., n, 3)``."""
    A, B, C = corners[..., 0, :], corners[..., 1, :], corners[..., 2, :]
    u = ref[:, 0][:, None]
    v = ref[:, 1][:, None]
    return A[..., None, :] + u * (B - A)[..., None, :] + v * (C - A)[..., None, :]


def _cube4(n: int):
    x, w = gauss_legendre_01(n)
    grids = np.meshgrid(x, x, x, x, indexing="ij")
    weight = np.einsum("i,j,k,l->ijkl", w, w, w, w)
    return [g.ravel() for g in grids], weight.ravel()


@lru_cache(maxsize=None)
def sauter_schwab_rule(case: str, n: int):
    """Reference point pairs for singular panel pairs.

    ``case`` is ``"coincident"``, ``"edge"`` or ``"vertex"``. Returns
    ``(xhat, yhat, w)`` with ``xhat, yhat`` of shape ``(q, 2)`` on the
    Sauter-Schwab element and weights summing to 1/4. For ``"edge"`` both
    panels must list the shared edge as their first two corners in the same
    order; for ``"vertex"`` the shared corner must come first in both.
    """
    (xi, e1, e2, e3), w = _cube4(n)
    xs, ys, ws = [], [], []

    def add(x1, x2, y1, y2, jac):
        xs.append(np.column_stack([x1, x2]))
        ys.append(np.column_stack([y1, y2]))
        ws.append(w * jac)

    if case == "coincident":
        jac = xi**3 * e1**2 * e2
        add(xi, xi * (1 - e1 + e1 * e2), xi * (1 - e1 * e2 * e3), xi * (1 - e1), jac)
        add(xi * (1 - e1 * e2 * e3), xi * (1 - e1), xi, xi * (1 - e1 + e1 * e2), jac)
        add(xi, xi * e1 * (1 - e2 + e2 * e3), xi * (1 - e1 * e2), xi * e1 * (1 - e2), jac)
        add(xi * (1 - e1 * e2), xi * e1 * (1 - e2), xi, xi * e1 * (1 - e2 + e2 * e3), jac)
        add(xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3), xi, xi * e1 * (1 - e2), jac)
        add(xi, xi * e1 * (1 - e2), xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3), jac)
    elif case == "edge":
        jac0 = xi**3 * e1**2
        jac = xi**3 * e1**2 * e2
        add(xi, xi * e1 * e3, xi * (1 - e1 * e2), xi * e1 * (1 - e2), jac0)
        add(xi, xi * e1, xi * (1 - e1 * e2 * e3), xi * e1 * e2 * (1 - e3), jac)
        add(xi * (1 - e1 * e2), xi * e1 * (1 - e2), xi, xi * e1 * e2 * e3, jac)
        add(xi * (1 - e1 * e2 * e3), xi * e1 * e2 * (1 - e3), xi, xi * e1, jac)
        add(xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3), xi, xi * e1 * e2, jac)
    elif case == "vertex":
        jac = xi**3 * e2
        add(xi, xi * e1, xi * e2, xi * e2 * e3, jac)
        add(xi * e2, xi * e2 * e3, xi, xi * e1, jac)
    else:
        raise ValueError(f"unknown singular case {case!r}")
    return np.concatenate(xs), np.concatenate(ys), np.concatenate(ws)


def map_ss(corners: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Map Sauter-Schwab reference points to a panel with ``corners`` (3, 3)."""
    A, B, C = corners
    return A + ref[:, :1] * (B - A) + ref[:, 1:2] * (C - B)
