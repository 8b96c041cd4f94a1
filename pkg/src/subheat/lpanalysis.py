"""Littlewood-Paley frames, square and maximal functions, norms of multipliers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, FrameConstructionError, ResolutionError
from .geometry import DiscreteGeometry, DistanceField, ball_volume_table
from .operators import SpectralData
from .smooth import dyadic_bump, dyadic_cutoff, window


def frame_energy(lam) -> np.ndarray:
    """sum over all j in Z of psi(2^j lambda)^2 (at most three nonzero terms)."""
    lam = np.asarray(lam, dtype=float)
    out = np.zeros_like(lam)
    pos = lam > 0
    j0 = np.floor(-np.log2(lam[pos]))
    acc = np.zeros(j0.shape)
    for dj in (-2, -1, 0, 1, 2):
        acc += dyadic_bump(2.0 ** (j0 + dj) * lam[pos]) ** 2
    out[pos] = acc
    return out


def psi_tilde(lam) -> np.ndarray:
    """psi / sum_j |psi_j|^2."""
    lam = np.asarray(lam, dtype=float)
    p = dyadic_bump(lam)
    e = frame_energy(lam)
    out = np.zeros_like(lam)
    nz = p != 0
    out[nz] = p[nz] / e[nz]
    return out


@dataclass(frozen=True)
class DyadicFrame:
    j_min: int
    j_max: int
    lambda_min: float
    lambda_max: float
    phi = staticmethod(dyadic_cutoff)

    @property
    def j_range(self) -> range:
        return range(self.j_min, self.j_max + 1)

    def psi_j(self, j: int, lam) -> np.ndarray:
        return dyadic_bump(2.0**j * np.asarray(lam, dtype=float))

    def psi_tilde_j(self, j: int, lam) -> np.ndarray:
        return psi_tilde(2.0**j * np.asarray(lam, dtype=float))

    def band(self, j: int) -> tuple[float, float]:
        return 2.0 ** (-j - 1), 2.0 ** (-j + 1)

    def is_active(self, j: int) -> bool:
        lo, hi = self.band(j)
        return hi > self.lambda_min and lo < self.lambda_max

    def rows(self) -> list[tuple[int, float, float, bool]]:
        """(j, lambda_lo, lambda_hi, active) per scale, for the frame CSV."""
        return [(j, *self.band(j), self.is_active(j)) for j in self.j_range]


def dyadic_frame(spec: SpectralData) -> DyadicFrame:
    """Minimal scale range whose pieces partition [lambda_min_nonzero, lambda_max]."""
    lo, hi = spec.lambda_min_nonzero, spec.lambda_max
    if not lo > 0:
        raise FrameConstructionError("spectral gap is zero; cannot build a dyadic frame")
    j_min = math.floor(-math.log2(hi))
    j_max = math.ceil(-math.log2(lo))
    return DyadicFrame(j_min, j_max, lo, hi)


def frame_weights(frame: DyadicFrame, spec: SpectralData, tilde: bool = False) -> np.ndarray:
    """Stack of spectral weights psi_j(lambda_k) (or psi~_j), shape (scales, N).

    Kernel eigenvalues get weight 0, since psi_j(0) = 0.
    """
    fn = frame.psi_tilde_j if tilde else frame.psi_j
    W = np.stack([fn(j, spec.values) for j in frame.j_range])
    W[:, ~spec.nonkernel_mask] = 0.0
    return W


def square_function(frame: DyadicFrame, spec: SpectralData, f: np.ndarray, tilde: bool = False) -> np.ndarray:
    """Lambda(f) = (sum_j |psi_j(L) f|^2)^{1/2}, pointwise."""
    f = np.asarray(f)
    if f.shape[0] != spec.geom.size:
        raise DomainError(f"field has {f.shape[0]} entries, geometry has {spec.geom.size} nodes")
    V = spec.vectors
    coef = V.conj().T @ (f * (spec.geom.mu if f.ndim == 1 else spec.geom.mu[:, None]))
    W = frame_weights(frame, spec, tilde)
    total = 0.0
    for w in W:
        piece = V @ (w * coef if f.ndim == 1 else w[:, None] * coef)
        total = total + np.abs(piece) ** 2
    return np.sqrt(total)


def maximal_function(geom: DiscreteGeometry, dist: DistanceField, f: np.ndarray) -> np.ndarray:
    """Hardy-Littlewood maximal function over the realized radii (k + 1/2) h.

    Works column-wise for 2-D ``f``.
    """
    af = np.abs(np.asarray(f))
    vols = ball_volume_table(geom, dist)
    kmax = vols.shape[1]
    single = af.ndim == 1
    if single:
        af = af[:, None]
    w = af * geom.mu[:, None]
    out = np.zeros_like(af, dtype=float)
    for x in range(geom.size):
        # sphere sums by hop distance, then cumulative ball integrals
        sums = np.zeros((kmax, af.shape[1]))
        np.add.at(sums, dist.hops[x], w)
        out[x] = (np.cumsum(sums, axis=0) / vols[x][:, None]).max(axis=0)
    return out[:, 0] if single else out


def lp_norm(geom: DiscreteGeometry, f: np.ndarray, p: float) -> float:
    """(sum |f|^p mu)^{1/p}; p = inf gives max |f|."""
    if not p > 0:
        raise DomainError(f"p must be > 0, got {p}")
    af = np.abs(np.asarray(f))
    if math.isinf(p):
        return float(af.max())
    return float((af**p @ geom.mu) ** (1.0 / p))


def _sobolev_norm_periodic(u: np.ndarray, dx: float, a: float) -> float:
    """Order-a L^2 Sobolev norm of compactly supported samples via the DFT."""
    M = u.size
    xi = 2.0 * np.pi * np.fft.fftfreq(M, d=dx)
    uhat = dx * np.fft.fft(u)
    # Plancherel: ||u||^2 = (1/2pi) int |u^|^2 dxi, with dxi = 2pi / (M dx)
    return float(np.sqrt(np.sum((1.0 + xi**2) ** a * np.abs(uhat) ** 2) / (M * dx)))


def sloc_sobolev_norm(m, a: float, t_grid, points: int = 2048, window_fn=window) -> float:
    """sup over t in t_grid of ||eta(.) m(t .)||_{L^2_a}.

    eta is supported in (1/2, 2); samples live on the periodized interval [0, 4).
    Raises ResolutionError if two grid refinements disagree by more than 5%.
    """
    if a < 0:
        raise DomainError(f"Sobolev order must be >= 0, got {a}")

    def at_resolution(npts):
        dx = 4.0 / npts
        lam = dx * np.arange(npts)
        eta = window_fn(lam)
        vals = []
        for t in t_grid:
            mt = np.asarray(m(t * lam), dtype=complex)
            mt = np.where(eta != 0, mt, 0.0)
            vals.append(_sobolev_norm_periodic(eta * mt, dx, a))
        return np.array(vals)

    coarse = at_resolution(points)
    fine = at_resolution(2 * points)
    if not np.all(np.isfinite(fine)):
        raise ResolutionError("non-finite Sobolev norm")
    rel = np.abs(fine - coarse) / np.maximum(np.abs(fine), 1e-300)
    if np.any(rel > 0.05):
        raise ResolutionError(f"Sobolev norm not converged between refinements (max rel change {rel.max():.3f})")
    return float(fine.max())


def mihlin_seminorms(m, max_order: int, lam_range: tuple[float, float], points_per_octave: int = 8) -> list[float]:
    """sup |(lambda d/dlambda)^a m| for a = 0..max_order on a log grid.

    The grid spans ``lam_range`` widened by a factor 16 each way and contains
    lambda = 1; derivatives are repeated centered differences in u = log lambda.
    """
    lo, hi = lam_range
    if not 0 < lo <= hi:
        raise DomainError(f"need 0 < lo <= hi, got {lam_range}")
    du = math.log(2.0) / points_per_octave
    k0 = math.floor(math.log(lo / 16.0) / du) - max_order
    k1 = math.ceil(math.log(hi * 16.0) / du) + max_order
    u = du * np.arange(k0, k1 + 1)
    vals = np.asarray(m(np.exp(u)), dtype=complex)
    if not np.all(np.isfinite(vals)):
        raise DomainError("multiplier is not finite on the Mihlin grid")
    out = [float(np.abs(vals[max_order:vals.size - max_order]).max())]
    d = vals
    for a in range(1, max_order + 1):
        d = (d[2:] - d[:-2]) / (2.0 * du)
        trim = max_order - a
        core = d[trim:d.size - trim] if trim else d
        out.append(float(np.abs(core).max()))
    return out
