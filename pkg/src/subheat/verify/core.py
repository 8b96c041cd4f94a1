"""Report types, suite configuration and shared evaluation context."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..calculus import PropagationReport, estimate_propagation_speed
from ..errors import DomainError
from ..geometry import (
    DiscreteGeometry,
    DistanceField,
    ModelSpec,
    ball_volume_table,
    build_model,
    cc_distance_matrix,
    volume_at,
)
from ..operators import SpectralData, assemble_operator, spectral_decompose

DEFAULT_ALPHAS = ((), (0,), (1,), (0, 0), (0, 1), (1, 0), (1, 1))


@dataclass
class Sample:
    params: dict
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        if self.rhs == 0:
            return 0.0 if self.lhs == 0 else math.inf
        return self.lhs / self.rhs


@dataclass
class BoundReport:
    """Fitted constant of one inequality over a sample grid.

    ``constants`` holds the named constants compared across resolutions;
    ``stability`` is filled in by the cross-resolution runner.
    """

    suite: str
    inequality: str
    samples: list[Sample]
    passed: bool
    threshold_doc: str
    constants: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)
    stability: dict | None = None

    @property
    def C_fit(self) -> float:
        return max((s.ratio for s in self.samples), default=0.0)

    @property
    def witness(self) -> Sample | None:
        if not self.samples:
            return None
        return max(self.samples, key=lambda s: s.ratio)


def stable_within(values, tol: float) -> bool:
    """True if every value lies within +-tol (relative) of the first one."""
    values = [float(v) for v in values]
    if not all(math.isfinite(v) for v in values):
        return False
    ref = values[0]
    if ref == 0:
        return all(v == 0 for v in values)
    return all(abs(v - ref) <= tol * abs(ref) for v in values)


def uniform_within(values, factor: float) -> bool:
    """max(values) <= factor * median(values)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0 or not np.all(np.isfinite(v)):
        return False
    med = float(np.median(v))
    return bool(v.max() <= factor * med) if med > 0 else bool(v.max() == 0)


def suite_rng(seed: int, suite: str) -> np.random.Generator:
    """Independent deterministic stream per (seed, suite name)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *suite.encode()]))


def dyadic_times(h: float, diameter: float) -> list[float]:
    """t = 2^k with 2h <= sqrt(t) <= diameter / 2."""
    lo = math.ceil(math.log2((2 * h) ** 2) - 1e-12)
    hi = math.floor(math.log2((diameter / 2) ** 2) + 1e-12)
    return [2.0**k for k in range(lo, hi + 1)]


@dataclass(frozen=True)
class VerifySuiteConfig:
    t_grid: tuple[float, ...]
    alpha_set: tuple[tuple[int, ...], ...] = DEFAULT_ALPHAS
    eps: float = 1e-8
    R0: float = 0.0
    pairs: np.ndarray | None = None
    n_nodes: int = 8
    n_functions: int = 8

    def __post_init__(self):
        if not self.t_grid:
            raise DomainError("t_grid must be non-empty")
        if self.R0 <= 0:
            raise DomainError(f"R0 must be positive, got {self.R0}")
        if any(len(a) > 2 for a in self.alpha_set):
            raise DomainError("alpha_set is limited to |alpha| <= 2")

    @classmethod
    def default(cls, h: float, diameter: float, t_grid=None, **kw) -> "VerifySuiteConfig":
        """Dyadic t grid and R0 = diameter/4 unless overridden."""
        kw.setdefault("R0", diameter / 4.0)
        grid = tuple(t_grid) if t_grid else tuple(dyadic_times(h, diameter))
        return cls(grid, **kw)

    def validate_for(self, h: float) -> None:
        if any(math.sqrt(t) < 2 * h - 1e-12 for t in self.t_grid):
            raise DomainError("all times must satisfy sqrt(t) >= 2h")


@dataclass(eq=False)
class SuiteContext:
    """Everything a suite needs about one model/operator pair."""

    geom: DiscreteGeometry
    dist: DistanceField
    spec: SpectralData
    cfg: VerifySuiteConfig
    seed: int = 0
    _volumes: np.ndarray | None = field(default=None, repr=False)
    _propagation: PropagationReport | None = field(default=None, repr=False)

    @property
    def h(self) -> float:
        return self.geom.h

    @property
    def volumes(self) -> np.ndarray:
        if self._volumes is None:
            self._volumes = ball_volume_table(self.geom, self.dist)
        return self._volumes

    def volume(self, x, delta) -> np.ndarray:
        return volume_at(self.volumes, self.h, x, delta)

    def volume_matrix(self, radius: np.ndarray) -> np.ndarray:
        """V(x, radius[x, y]) for a full (N, N) radius array."""
        rows = np.arange(self.geom.size)[:, None]
        return volume_at(self.volumes, self.h, rows, radius)

    @property
    def propagation(self) -> PropagationReport:
        if self._propagation is None:
            h = self.h
            self._propagation = estimate_propagation_speed(self.spec, self.dist, [4 * h, 8 * h])
        return self._propagation

    @property
    def kappa_hat(self) -> float:
        return self.propagation.kappa_hat

    def rng(self, suite: str) -> np.random.Generator:
        return suite_rng(self.seed, suite)

    def sample_nodes(self, suite: str) -> np.ndarray:
        """Node 0 plus distinct random nodes, cfg.n_nodes in total."""
        n = self.geom.size
        k = min(self.cfg.n_nodes, n)
        rest = self.rng(suite + "/nodes").choice(np.arange(1, n), size=k - 1, replace=False)
        return np.concatenate([[0], np.sort(rest)]).astype(int)

    def pair_mask(self) -> np.ndarray:
        """Boolean (N, N) mask of the sampled pairs (all pairs by default)."""
        n = self.geom.size
        if self.cfg.pairs is None:
            return np.ones((n, n), dtype=bool)
        mask = np.zeros((n, n), dtype=bool)
        p = np.asarray(self.cfg.pairs, dtype=int)
        mask[p[:, 0], p[:, 1]] = True
        return mask


def build_context(
    model: str | ModelSpec,
    kind: str = "sublaplacian",
    seed: int = 0,
    spec: SpectralData | None = None,
    **cfg_overrides,
) -> SuiteContext:
    """Build geometry, metric, spectral data and a default suite config."""
    ms = ModelSpec.parse(model) if isinstance(model, str) else model
    geom = spec.geom if spec is not None else build_model(ms)
    dist = cc_distance_matrix(geom)
    if spec is None:
        spec = spectral_decompose(assemble_operator(geom, kind))
    cfg = VerifySuiteConfig.default(geom.h, dist.diameter, **cfg_overrides)
    cfg.validate_for(geom.h)
    return SuiteContext(geom, dist, spec, cfg, seed)
