"""Helmholtz kernels at complex frequency and CQM frequency generation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FOUR_PI = 4.0 * np.pi

_CHI = {
    "BDF1": lambda z: 1.0 - z,
    "BDF2": lambda z: 1.5 - 2.0 * z + 0.5 * z * z,
}


def characteristic(method: str, zeta):
    """Characteristic function of the multistep method."""
    try:
        return _CHI[method.upper()](zeta)
    except KeyError:
        raise ValueError(f"unknown multistep method {method!r}") from None


def default_radius(N: int) -> float:
    return 10.0 ** (-5.0 / N)


@dataclass(frozen=True)
class CqmScheme:
    """Time grid and Laplace-domain frequencies of a CQM discretisation."""

    N: int
    T: float
    R: float
    method: str = "BDF2"
    frequencies: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if not 0.0 < self.R < 1.0:
            raise ValueError(f"R must lie in (0, 1), got {self.R}")
        method = self.method.upper()
        if method not in _CHI:
            raise ValueError(f"unknown multistep method {self.method!r}")
        object.__setattr__(self, "method", method)
        ell = np.arange(self.N)
        zeta = self.R * np.exp(2j * np.pi * ell / self.N)
        s = characteristic(method, zeta) / self.dt
        # enforce exact conjugate symmetry s_{N-l} = conj(s_l)
        half = self.N // 2
        s[self.N - ell[1 : (self.N + 1) // 2]] = np.conj(s[ell[1 : (self.N + 1) // 2]])
        if self.N % 2 == 0:
            s[half] = s[half].real
        s[0] = s[0].real
        s.flags.writeable = False
        object.__setattr__(self, "frequencies", s)

    @property
    def dt(self) -> float:
        return self.T / self.N

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.N + 1)

    @property
    def n_unique(self) -> int:
        """Number of frequencies up to conjugation (indices 0..N//2)."""
        return self.N // 2 + 1


def cqm_frequencies(N: int, T: float, R: float | None = None, method: str = "BDF2") -> CqmScheme:
    if R is None:
        R = default_radius(N)
    return CqmScheme(N=N, T=T, R=R, method=method)


def mirror_frequencies(values: np.ndarray, N: int, axis: int = -1) -> np.ndarray:
    """Extend samples at frequency indices ``0..N//2`` to all ``N`` indices.

    Uses ``f(s_{N-l}) = conj(f(s_l))``, valid for kernels with real
    coefficients.
    """
    values = np.moveaxis(np.asarray(values), axis, -1)
    out = np.empty(values.shape[:-1] + (N,), dtype=complex)
    out[..., : N // 2 + 1] = values[..., : N // 2 + 1]
    idx = np.arange(N // 2 + 1, N)
    out[..., idx] = np.conj(values[..., N - idx])
    return np.moveaxis(out, -1, axis)


def slp_kernel(x, y, s):
    """Helmholtz fundamental solution ``exp(-s r) / (4 pi r)``."""
    r = np.linalg.norm(np.asarray(y, dtype=float) - np.asarray(x, dtype=float), axis=-1)
    if np.any(r == 0.0):
        raise ZeroDivisionError("slp_kernel evaluated at coincident points")
    return np.exp(-s * r) / (FOUR_PI * r)


def dlp_kernel(x, y, n_y, s):
    """Normal derivative of :func:`slp_kernel` with respect to ``y``."""
    d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    r = np.linalg.norm(d, axis=-1)
    if np.any(r == 0.0):
        raise ZeroDivisionError("dlp_kernel evaluated at coincident points")
    cos = np.sum(d * n_y, axis=-1) / r
    return -(1.0 + s * r) * np.exp(-s * r) / (FOUR_PI * r * r) * cos


def slp_from_distance(r, s):
    return np.exp(-s * r) / (FOUR_PI * r)


def dlp_from_distance(r, cos, s):
    """DLP kernel from distance and ``(y - x) . n_y / r``."""
    return -(1.0 + s * r) * np.exp(-s * r) / (FOUR_PI * r * r) * cos
