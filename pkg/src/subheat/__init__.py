"""Heat kernels, wave propagation and spectral multipliers for sub-Laplacians on discrete models."""

from .errors import SubheatError
from .geometry import ModelSpec, build_model, cc_distance_matrix
from .operators import assemble_operator, spectral_decompose

__version__ = "0.1.0"

__all__ = ["ModelSpec", "SubheatError", "assemble_operator", "build_model", "cc_distance_matrix", "spectral_decompose"]
