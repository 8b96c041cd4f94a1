"""Functional calculus on a spectral decomposition.

Heat and wave propagators, general multipliers m(L) / m(L~), the smooth
Gaussian split e^{-lambda^2} = F^_s + R^_s, and synthesis of F(sqrt L) from
wave propagators by Fourier quadrature.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, MultiplierDomainError, QuadratureError, SymmetryError
from .geometry import DistanceField
from .operators import KernelMatrix, SpectralData
from .smooth import split_step, transition

log = logging.getLogger(__name__)

MULTIPLIER_CLASSES = ("smooth_compact", "mihlin", "sobolev_sloc", "entire")


@dataclass(frozen=True)
class MultiplierFunction:
    """A function on [0, inf) used as m in m(L)."""

    eval: Callable[[np.ndarray], np.ndarray]
    support_hint: tuple[float, float] | None = None
    class_hint: str = "entire"
    name: str = ""

    def __call__(self, lam):
        return self.eval(np.asarray(lam, dtype=float))


def heat_multiplier(t: float) -> MultiplierFunction:
    return MultiplierFunction(lambda lam: np.exp(-t * lam), None, "entire", f"heat:t={t!r}")


def wave_multiplier(t: float) -> MultiplierFunction:
    return MultiplierFunction(lambda lam: np.cos(t * np.sqrt(np.maximum(lam, 0.0))), None, "entire", f"wave:t={t!r}")


def log_bump(lo: float, hi: float) -> Callable[[np.ndarray], np.ndarray]:
    """Smooth bump supported in [lo, hi], flat on the middle half in log scale."""
    ul, uh = math.log(lo), math.log(hi)
    w = (uh - ul) / 4.0

    def f(lam):
        lam = np.asarray(lam, dtype=float)
        out = np.zeros_like(lam)
        pos = lam > 0
        u = np.log(lam[pos])
        out[pos] = transition(u, ul, ul + w) * (1.0 - transition(u, uh - w, uh))
        return out

    return f


def bump_multiplier(lo: float = 0.25, hi: float = 4.0) -> MultiplierFunction:
    return MultiplierFunction(log_bump(lo, hi), (lo, hi), "smooth_compact", f"bump:[{lo!r},{hi!r}]")


def riesz_like_multiplier(a: float) -> MultiplierFunction:
    """(lambda / (1 + lambda))^a, a Mihlin multiplier vanishing at 0."""

    def f(lam):
        lam = np.maximum(np.asarray(lam, dtype=float), 0.0)
        return (lam / (1.0 + lam)) ** a

    return MultiplierFunction(f, None, "mihlin", f"riesz_like:a={a!r}")


def log_oscillation(tau: float) -> MultiplierFunction:
    """cos(tau log lambda): Mihlin, oscillating on every dyadic scale, undefined at 0."""

    def f(lam):
        lam = np.asarray(lam, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.cos(tau * np.log(lam))

    return MultiplierFunction(f, None, "mihlin", f"log_oscillation:tau={tau!r}")


_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"


def parse_multiplier(text: str) -> MultiplierFunction:
    """Parse a named built-in: heat:t=.., wave:t=.., bump:[lo,hi], riesz_like:a=.., log_oscillation:tau=.."""
    s = text.strip()
    m = re.fullmatch(rf"(heat|wave)\s*:\s*t\s*=\s*({_NUM})", s)
    if m:
        t = float(m.group(2))
        if m.group(1) == "heat":
            if t < 0:
                raise DomainError(f"heat time must be >= 0, got {t}")
            return heat_multiplier(t)
        return wave_multiplier(t)
    m = re.fullmatch(rf"bump\s*:\s*\[\s*({_NUM})\s*,\s*({_NUM})\s*\]", s)
    if m:
        lo, hi = float(m.group(1)), float(m.group(2))
        if not 0 < lo < hi:
            raise DomainError(f"bump support must satisfy 0 < lo < hi, got [{lo}, {hi}]")
        return bump_multiplier(lo, hi)
    m = re.fullmatch(rf"riesz_like\s*:\s*a\s*=\s*({_NUM})", s)
    if m:
        return riesz_like_multiplier(float(m.group(1)))
    m = re.fullmatch(rf"log_oscillation\s*:\s*tau\s*=\s*({_NUM})", s)
    if m:
        return log_oscillation(float(m.group(1)))
    raise DomainError(f"unknown multiplier spec {text!r}")


def multiplier_weights(spec: SpectralData, m, reduced: bool = False) -> np.ndarray:
    """m evaluated on the spectrum; kernel eigenvalues zeroed when ``reduced``.

    With ``reduced`` m is only evaluated on the non-kernel eigenvalues, so it
    need not be defined at 0.
    """
    lam = spec.values
    if reduced:
        nz = spec.nonkernel_mask
        vals = np.broadcast_to(np.asarray(m(lam[nz])), (int(nz.sum()),))
        w = np.zeros(lam.shape, dtype=vals.dtype if np.iscomplexobj(vals) else float)
        w[nz] = vals
    else:
        w = np.asarray(m(lam))
        if w.shape != lam.shape:
            w = np.broadcast_to(w, lam.shape).copy()
    if not np.all(np.isfinite(w)):
        bad = spec.values[~np.isfinite(w)]
        raise MultiplierDomainError(f"multiplier is not finite at eigenvalue(s) {bad[:5]}")
    if not np.any(np.iscomplex(w)):
        w = w.real.astype(float)
    return w


def multiplier_operator(spec: SpectralData, m, reduced: bool = False) -> KernelMatrix:
    """Kernel of m(L), or of m(L~) = (1 - pi) m(L) when ``reduced``."""
    return spec.kernel_of(multiplier_weights(spec, m, reduced))


def heat_kernel(spec: SpectralData, t: float, reduced: bool = False) -> KernelMatrix:
    """Kernel of e^{-tL} (or e^{-tL~})."""
    if t < 0:
        raise DomainError(f"heat time must be >= 0, got {t}")
    return multiplier_operator(spec, heat_multiplier(t), reduced)


def wave_kernel(spec: SpectralData, t: float) -> KernelMatrix:
    """Kernel of cos(t sqrt L); even in t, identity at t = 0."""
    return multiplier_operator(spec, wave_multiplier(abs(t)))


@dataclass(frozen=True)
class SplitQuadrature:
    """Uniform periodic grid on [-half_width, half_width) with the given step."""

    half_width: float
    step: float

    @classmethod
    def default(cls, s: float) -> "SplitQuadrature":
        return cls(s + 10.0, 1.0 / (32.0 * s))

    @property
    def size(self) -> int:
        return int(round(2.0 * self.half_width / self.step))


@dataclass
class WaveSplit:
    s: float
    lambda_grid: np.ndarray
    Fhat_s: np.ndarray
    Rhat_s: np.ndarray
    x_grid: np.ndarray
    F_s: np.ndarray
    R_s: np.ndarray
    R_reconstructed: np.ndarray
    quadrature: SplitQuadrature
    split_residual: float
    outside_support_residual: float
    tail_constants: dict = field(default_factory=dict)
    psi_cutoff: Callable = split_step

    @property
    def support_edge(self) -> float:
        return self.s - 1.0 / (2.0 * self.s)

    def _transform_at(self, values, lam):
        lam = np.asarray(lam, dtype=float)
        dx = self.quadrature.step
        out = np.empty(lam.shape, dtype=complex)
        flat = lam.ravel()
        res = out.ravel()
        for chunk in np.array_split(np.arange(flat.size), max(1, flat.size // 512)):
            res[chunk] = dx * np.exp(-1j * np.outer(flat[chunk], self.x_grid)) @ values
        return res.reshape(lam.shape)

    def Fhat_at(self, lam):
        """F^_s at arbitrary frequencies, by the same quadrature."""
        return self._transform_at(self.F_s, lam)

    def Rhat_at(self, lam):
        return self._transform_at(self.R_s, lam)


def _gaussian_density(x):
    return np.exp(-(x**2) / 4.0) / math.sqrt(4.0 * math.pi)


def _forward_transform(values, x0, dx):
    """Trapezoid sums dx * sum f(x_j) e^{-i lambda x_j} on the full DFT frequency grid."""
    M = values.size
    lam = 2.0 * np.pi * np.fft.fftfreq(M, d=dx)
    return lam, dx * np.exp(-1j * lam * x0) * np.fft.fft(values)


def _inverse_transform(hat, lam, x0, dx):
    """Exact inverse of ``_forward_transform``."""
    return np.fft.ifft(hat * np.exp(1j * lam * x0)) / dx


def gaussian_wave_split(s: float, grid: SplitQuadrature | None = None) -> WaveSplit:
    """Split e^{-x^2/4}/sqrt(4 pi) into a far part F_s and a near part R_s.

    F_s = phi_s G, R_s = (1 - phi_s) G with phi_s(x) = psi(s(|x| - s)), so R_s
    is supported in |x| <= s - 1/(2s) and F^_s + R^_s = e^{-lambda^2}.
    """
    if not s > 1:
        raise DomainError(f"split parameter must satisfy s > 1, got {s}")
    grid = grid or SplitQuadrature.default(s)
    M = grid.size
    x0 = -grid.half_width
    x = x0 + grid.step * np.arange(M)
    G = _gaussian_density(x)
    phi = split_step(s * (np.abs(x) - s))
    F = phi * G
    R = (1.0 - phi) * G
    lam, Fhat = _forward_transform(F, x0, grid.step)
    _, Rhat = _forward_transform(R, x0, grid.step)
    # the identity is only meaningful where the grid resolves e^{-lambda^2}
    lam_check = 0.5 * np.pi / grid.step
    inside = np.abs(lam) <= lam_check
    target = np.exp(-(lam**2))
    split_res = float(np.max(np.abs(Fhat + Rhat - target)[inside]))
    if split_res > 1e-6:
        raise QuadratureError(f"split identity residual {split_res:.3e} > 1e-6; refine the grid")
    R_rec = _inverse_transform(target - Fhat, lam, x0, grid.step)
    edge = s - 1.0 / (2.0 * s)
    outside = np.abs(x) >= edge
    out_res = float(np.max(np.abs(R_rec[outside]))) if np.any(outside) else 0.0
    tails = {}
    for N in (1, 2, 3):
        weight = s * (1.0 + lam[inside] ** 2 / s**2) ** N * math.exp(s**2 / 4.0)
        tails[N] = float(np.max(np.abs(Fhat[inside]) * weight))
    order = np.argsort(lam)
    return WaveSplit(
        s=float(s),
        lambda_grid=lam[order],
        Fhat_s=Fhat[order],
        Rhat_s=Rhat[order],
        x_grid=x,
        F_s=F,
        R_s=R,
        R_reconstructed=R_rec,
        quadrature=grid,
        split_residual=split_res,
        outside_support_residual=out_res,
        tail_constants=tails,
    )


def split_transference_residual(spec: SpectralData, split: WaveSplit, t: float) -> float:
    """max |K_{e^{-tL}} - K_{F^_s(sqrt(tL))} - K_{R^_s(sqrt(tL))}| relative to max |K_{e^{-tL}}|."""
    sig = np.sqrt(t * spec.values)
    Fw = split.Fhat_at(sig)
    Rw = split.Rhat_at(sig)
    heat = np.exp(-t * spec.values)
    K = spec.kernel_of(heat - Fw - Rw).K
    return float(np.abs(K).max() / np.abs(spec.kernel_of(heat).K).max())


def symmetric_gauss_grid(r: float, panels: int = 16, order: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes/weights on [-r, r], symmetric, with a break at 0."""
    xg, wg = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, r, panels + 1)
    half = (edges[1:] - edges[:-1]) / 2.0
    mid = (edges[1:] + edges[:-1]) / 2.0
    pos = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    wpos = (half[:, None] * wg[None, :]).ravel()
    taus = np.concatenate([-pos[::-1], pos])
    weights = np.concatenate([wpos[::-1], wpos])
    return taus, weights


def wave_synthesis_weights(spec: SpectralData, taus, Fhat, weights=None) -> np.ndarray:
    """Spectral weights of (1/2pi) sum_j w_j F^(tau_j) cos(tau_j sqrt L)."""
    taus = np.asarray(taus, dtype=float)
    Fhat = np.asarray(Fhat)
    if weights is None:
        if taus.size > 1:
            weights = np.full(taus.size, taus[1] - taus[0])
            weights[[0, -1]] *= 0.5
        else:
            weights = np.zeros(taus.size)
    weights = np.asarray(weights, dtype=float)
    if not (np.allclose(taus, -taus[::-1], rtol=0, atol=1e-12 * max(1.0, np.abs(taus).max(initial=0)))
            and np.allclose(Fhat, Fhat[::-1], rtol=1e-12, atol=1e-15)
            and np.allclose(weights, weights[::-1], rtol=1e-12, atol=0)):
        raise SymmetryError("wave synthesis needs an even F^ sampled on a symmetric grid")
    sig = np.sqrt(spec.values)
    out = np.zeros(sig.size, dtype=complex)
    # accumulate over tau in a fixed order so the reduction is deterministic
    for chunk in np.array_split(np.arange(taus.size), max(1, taus.size // 256)):
        out += np.cos(np.outer(sig, taus[chunk])) @ (weights[chunk] * Fhat[chunk])
    out /= 2.0 * np.pi
    if not np.any(out.imag):
        out = out.real
    return out


def synthesize_from_wave(spec: SpectralData, taus, Fhat, weights=None) -> KernelMatrix:
    """Kernel of F(sqrt L) = (1/2pi) integral F^(tau) cos(tau sqrt L) dtau by quadrature."""
    return spec.kernel_of(wave_synthesis_weights(spec, taus, Fhat, weights))


def triangle_hat(taus, r: float) -> np.ndarray:
    """Even triangle (1 - |tau|/r)_+ supported in [-r, r]."""
    return np.maximum(0.0, 1.0 - np.abs(np.asarray(taus, dtype=float)) / r)


def support_leak(K: KernelMatrix, dist: DistanceField, radius: float) -> float:
    """max |K(x, y)| over rho(x, y) > radius, relative to max |K|."""
    A = np.abs(K.K)
    outside = dist.rho > radius + 1e-12
    return float(A[outside].max() / A.max()) if np.any(outside) else 0.0


def epsilon_support_radius(K: KernelMatrix, dist: DistanceField, eps: float) -> float:
    """max rho(x, y) over entries with |K(x, y)| > eps * max |K|."""
    A = np.abs(K.K)
    big = A > eps * A.max()
    return float(dist.hops[big].max()) * dist.h if np.any(big) else 0.0


@dataclass
class PropagationReport:
    kappa_hat: float
    per_t: list
    eps: float


def estimate_propagation_speed(spec: SpectralData, dist: DistanceField, t_list, eps: float = 1e-8) -> PropagationReport:
    """Fit kappa_hat = max_t (eps-support radius of cos(t sqrt L)) / t.

    t = 0 is recorded with radius 0; times 0 < t < 2h are excluded as sub-grid.
    """
    t_list = list(t_list)
    if not t_list:
        raise DomainError("t_list must be non-empty")
    if not 0 < eps < 1:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    h = dist.h
    per_t = []
    kappa = 0.0
    for t in t_list:
        t = abs(float(t))
        if t == 0:
            per_t.append((0.0, 0.0))
            continue
        if t < 2 * h - 1e-12:
            log.debug("excluding sub-grid time t=%g < 2h", t)
            continue
        r = epsilon_support_radius(wave_kernel(spec, t), dist, eps)
        per_t.append((t, r))
        kappa = max(kappa, r / t)
    if kappa == 0.0:
        raise DomainError("no valid times t >= 2h in t_list")
    return PropagationReport(kappa, per_t, eps)
