"""Horizontal operators, their spectral decompositions and kernel tables.

Conventions
-----------
All inner products are mu-weighted: <f, g> = sum_x f(x) conj(g(x)) mu(x).
A kernel table K represents (Tf)(x) = sum_y K(x, y) f(y) mu(y), so the matrix
acting on coefficient vectors is ``K * mu[None, :]``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, InvalidMultiIndexError, NumericalFailureError
from .geometry import GENERATORS, DiscreteGeometry

log = logging.getLogger(__name__)

OPERATOR_KINDS = ("sublaplacian", "boxb")


@dataclass(frozen=True, eq=False)
class HorizontalOperator:
    matrix: sp.csr_matrix
    kind: str
    geom: DiscreteGeometry

    def apply(self, f: np.ndarray) -> np.ndarray:
        return self.matrix @ f

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.matrix.data) or not np.any(self.matrix.data.imag)


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Schwartz-kernel table of an operator, measure-weighted."""

    K: np.ndarray
    geom: DiscreteGeometry

    def as_matrix(self) -> np.ndarray:
        """Matrix acting on coefficient vectors."""
        return self.K * self.geom.mu[None, :]

    def apply(self, f: np.ndarray) -> np.ndarray:
        return self.K @ (f * self.geom.mu)

    def compose(self, other: "KernelMatrix") -> "KernelMatrix":
        """Kernel of self o other: integral of K1(x, z) K2(z, y) dz."""
        return KernelMatrix((self.K * self.geom.mu[None, :]) @ other.K, self.geom)

    def row_l2(self) -> np.ndarray:
        """||K(x, .)||_2 for every x."""
        return np.sqrt((np.abs(self.K) ** 2) @ self.geom.mu)

    def col_l2(self) -> np.ndarray:
        """||K(., y)||_2 for every y."""
        return np.sqrt(self.geom.mu @ (np.abs(self.K) ** 2))

    def __add__(self, other):
        return KernelMatrix(self.K + other.K, self.geom)

    def __sub__(self, other):
        return KernelMatrix(self.K - other.K, self.geom)

    def scaled(self, c) -> "KernelMatrix":
        return KernelMatrix(c * self.K, self.geom)


def identity_kernel(geom: DiscreteGeometry) -> KernelMatrix:
    return KernelMatrix(np.diag(1.0 / geom.mu), geom)


def from_matrix(A, geom: DiscreteGeometry) -> KernelMatrix:
    """Kernel table of the operator whose coefficient matrix is ``A``."""
    A = A.toarray() if sp.issparse(A) else np.asarray(A)
    return KernelMatrix(A / geom.mu[None, :], geom)


def mu_adjoint(A, mu: np.ndarray):
    """Adjoint of a coefficient matrix in the mu-weighted inner product."""
    M = sp.diags(mu)
    Minv = sp.diags(1.0 / mu)
    if sp.issparse(A):
        return (Minv @ A.conj().T @ M).tocsr()
    return (A.conj().T * mu[None, :]) / mu[:, None]


def horizontal_field(geom: DiscreteGeometry, g: int) -> sp.csr_matrix:
    """Forward difference X_g = (S_g - I) / h."""
    if g not in GENERATORS:
        raise InvalidMultiIndexError(f"unknown generator id {g!r}")
    n = geom.size
    return ((geom.shift_matrix(g) - sp.identity(n, format="csr")) / geom.h).tocsr()


def complex_field(geom: DiscreteGeometry) -> sp.csr_matrix:
    """Z = X_1 + i X_2."""
    return (horizontal_field(geom, 0) + 1j * horizontal_field(geom, 1)).tocsr()


def assemble_operator(geom: DiscreteGeometry, kind: str = "sublaplacian") -> HorizontalOperator:
    """Assemble L = sum X_i* X_i (``sublaplacian``) or Z* Z (``boxb``)."""
    if kind == "sublaplacian":
        parts = [horizontal_field(geom, g) for g in GENERATORS]
        A = sum(mu_adjoint(X, geom.mu) @ X for X in parts)
        A = A.real.tocsr() if np.iscomplexobj(A.data) else A.tocsr()
    elif kind == "boxb":
        Z = complex_field(geom)
        A = (mu_adjoint(Z, geom.mu) @ Z).tocsr()
    else:
        raise DomainError(f"unknown operator kind {kind!r}; expected one of {OPERATOR_KINDS}")
    A.eliminate_zeros()
    A.sort_indices()
    return HorizontalOperator(A, kind, geom)


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Eigenpairs orthonormal in the mu-weighted inner product.

    ``vectors[:, k]`` is e_k, with sum_x |e_k(x)|^2 mu(x) = 1.
    """

    values: np.ndarray
    vectors: np.ndarray
    eps_ker: float
    geom: DiscreteGeometry
    kind: str = "sublaplacian"

    @property
    def kernel_indices(self) -> np.ndarray:
        return np.flatnonzero(self.values <= self.eps_ker)

    @property
    def nonkernel_mask(self) -> np.ndarray:
        return self.values > self.eps_ker

    @property
    def lambda_max(self) -> float:
        return float(self.values[-1])

    @property
    def lambda_min_nonzero(self) -> float:
        nz = self.values[self.nonkernel_mask]
        return float(nz[0]) if nz.size else 0.0

    @property
    def pi(self) -> KernelMatrix:
        E = self.vectors[:, self.kernel_indices]
        return KernelMatrix(E @ E.conj().T, self.geom)

    def kernel_of(self, weights: np.ndarray) -> KernelMatrix:
        """K = sum_k w_k e_k (x) conj(e_k(y))."""
        V = self.vectors
        if np.iscomplexobj(weights) and not np.iscomplexobj(V):
            K = (V * weights[None, :]) @ V.T
        else:
            K = (V * weights[None, :]) @ V.conj().T
        return KernelMatrix(K, self.geom)

    def apply(self, weights: np.ndarray, f: np.ndarray) -> np.ndarray:
        """Apply sum_k w_k e_k <., e_k> to f without forming the kernel."""
        V = self.vectors
        mu = self.geom.mu if f.ndim == 1 else self.geom.mu[:, None]
        w = weights if f.ndim == 1 else weights[:, None]
        return V @ (w * (V.conj().T @ (f * mu)))


def _normalize_phases(vectors: np.ndarray) -> np.ndarray:
    """Make the first largest-magnitude entry of each column real-positive."""
    idx = np.argmax(np.abs(vectors) > np.abs(vectors).max(axis=0) * (1 - 1e-9), axis=0)
    pivots = vectors[idx, np.arange(vectors.shape[1])]
    phase = pivots / np.abs(pivots)
    return vectors / phase[None, :]


def spectral_decompose(op: HorizontalOperator, eps_ker: float | None = None) -> SpectralData:
    """Dense eigendecomposition of ``op`` in the mu-weighted inner product.

    ``eps_ker`` defaults to 1e-10 * lambda_max.
    """
    mu = op.geom.mu
    s = np.sqrt(mu)
    A = op.matrix.toarray()
    if op.is_real:
        A = A.real
    # M^{1/2} A M^{-1/2} is Hermitian when A is mu-self-adjoint
    B = (A * s[:, None]) / s[None, :]
    B = 0.5 * (B + B.conj().T)
    try:
        values, U = np.linalg.eigh(B)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"eigensolver failed: {exc}") from exc
    lam_max = float(values[-1])
    if eps_ker is None:
        eps_ker = 1e-10 * lam_max
    if eps_ker <= 0:
        raise DomainError("eps_ker must be positive")
    vectors = _normalize_phases(U) / s[:, None]
    if values[0] < -eps_ker:
        raise NumericalFailureError(f"operator is not positive semidefinite: lambda_0 = {values[0]:.3e}")
    # solver round-off can leave kernel eigenvalues slightly negative
    values = np.where(values < 0, 0.0, values)
    resid = _reconstruction_residual(A, values, vectors, mu)
    if not np.isfinite(resid) or resid > 1e-9 * max(lam_max, 1e-300):
        raise NumericalFailureError(f"reconstruction residual {resid:.3e} exceeds 1e-9 * lambda_max", resid)
    spec = SpectralData(values, vectors, float(eps_ker), op.geom, op.kind)
    nz = values[values > eps_ker]
    if nz.size and nz[0] < 100 * eps_ker:
        log.warning("weak spectral gap: first nonkernel eigenvalue %.3e < 100 * eps_ker", nz[0])
    return spec


def _reconstruction_residual(A, values, vectors, mu) -> float:
    """Upper bound (Frobenius) on the mu-weighted norm of A - V diag(values) V* M."""
    s = np.sqrt(mu)
    R = A - (vectors * values[None, :]) @ (vectors.conj().T * mu[None, :])
    Rs = (R * s[:, None]) / s[None, :]
    return float(np.linalg.norm(Rs))


def mu_operator_norm(A: np.ndarray, mu: np.ndarray) -> float:
    """L2(mu) operator norm of a coefficient matrix."""
    s = np.sqrt(mu)
    return float(np.linalg.norm((A * s[:, None]) / s[None, :], 2))


def _parse_alpha(alpha) -> tuple[int, ...]:
    alpha = tuple(alpha)
    for g in alpha:
        if g not in GENERATORS:
            raise InvalidMultiIndexError(f"unknown generator id {g!r} in multi-index {alpha}")
    return alpha


def apply_derivative(geom: DiscreteGeometry, f: np.ndarray, alpha) -> np.ndarray:
    """D^alpha f along the first axis; alpha composes right-to-left."""
    out = f
    for g in reversed(_parse_alpha(alpha)):
        out = (out[geom.shifts[g]] - out) / geom.h
    return out


def horizontal_derivative(K: KernelMatrix, alpha, side: str = "x") -> KernelMatrix:
    """D_x^alpha K (first argument) or D_y^alpha K (second argument)."""
    if side not in ("x", "y"):
        raise DomainError(f"side must be 'x' or 'y', got {side!r}")
    alpha = _parse_alpha(alpha)
    if not alpha:
        return K
    geom = K.geom
    if side == "x":
        return KernelMatrix(apply_derivative(geom, K.K, alpha), geom)
    return KernelMatrix(apply_derivative(geom, K.K.T, alpha).T, geom)
