"""Compressed convolution quadrature boundary elements for the wave equation.

Frequency families of Helmholtz Galerkin matrices are compressed with
H2-matrices in space and multivariate adaptive cross approximation across
frequency; the result drives a marching-on-in-time Dirichlet solver.
"""

from .cqm import (
    SphericalWave,
    WeightTensor,
    convolve_rhs,
    dirichlet_data,
    mot_solve,
    transform_weights,
)
from .htensor import CompressionParams, HTensor, compress
from .kernels import CqmScheme, cqm_frequencies
from .maca import LowRankTensorBlock, maca
from .mesh import SurfaceMesh, load_mesh, make_sphere

__version__ = "0.1.0"

__all__ = [
    "CompressionParams",
    "CqmScheme",
    "HTensor",
    "LowRankTensorBlock",
    "SphericalWave",
    "SurfaceMesh",
    "WeightTensor",
    "compress",
    "convolve_rhs",
    "cqm_frequencies",
    "dirichlet_data",
    "load_mesh",
    "maca",
    "make_sphere",
    "mot_solve",
    "transform_weights",
]
