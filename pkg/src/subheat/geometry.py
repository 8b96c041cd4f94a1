"""Discrete model geometries, word metric, ball volumes and doubling exponents.

Two compact models are provided:

* ``flat_torus``: the square lattice Z_n x Z_n with unit-step shifts.
* ``heisenberg``: the lattice points of the Heisenberg nilmanifold
  H(Z) / lattice, in coordinates (a, b, c) with a, b in Z_n and c in Z_{n^2}.
  The central direction has spacing h^2 so small balls scale like delta^4.

Nodes are indexed lexicographically in their coordinates.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .errors import ConnectivityError, InsufficientScalesError, InvalidModelError

KINDS = ("heisenberg", "flat_torus")
GENERATORS = (0, 1)

_SPEC_RE = re.compile(r"^\s*(heisenberg|flat_torus)\s*:\s*n\s*=\s*(\d+)\s*$")


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidModelError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        if not isinstance(self.n, (int, np.integer)) or self.n < 3:
            raise InvalidModelError(
                f"model resolution n={self.n} is invalid: need n >= 3 "
                "(shift and inverse shift coincide below this)"
            )

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @classmethod
    def parse(cls, text: str) -> "ModelSpec":
        """Parse ``"heisenberg:n=6"`` / ``"flat_torus:n=16"``."""
        m = _SPEC_RE.match(text)
        if m is None:
            raise InvalidModelError(f"cannot parse model spec {text!r}; expected e.g. 'heisenberg:n=6'")
        return cls(m.group(1), int(m.group(2)))

    def __str__(self) -> str:
        return f"{self.kind}:n={self.n}"


@dataclass(frozen=True, eq=False)
class DiscreteGeometry:
    """Nodes, generator shifts and node measure of a discretized model.

    ``shifts[g][i]`` is the head of the generator-g edge leaving node i;
    ``inverse_shifts[g]`` is its inverse permutation.
    """

    spec: ModelSpec
    coords: np.ndarray
    shifts: np.ndarray
    mu: np.ndarray
    inverse_shifts: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        return self.spec.h

    @property
    def size(self) -> int:
        return self.coords.shape[0]

    @property
    def edges(self) -> list[tuple[int, int, int]]:
        """Directed horizontal edges as (tail, head, generator)."""
        return [(i, int(self.shifts[g][i]), g) for g in GENERATORS for i in range(self.size)]

    @property
    def volume(self) -> float:
        return float(self.mu.sum())

    def shift_matrix(self, g: int):
        """Sparse permutation S_g with (S_g f)(x) = f(x . g)."""
        n = self.size
        return coo_matrix((np.ones(n), (np.arange(n), self.shifts[g])), shape=(n, n)).tocsr()

    def adjacency(self):
        """Undirected 0/1 adjacency of the generator graph."""
        n = self.size
        rows = np.concatenate([np.arange(n)] * len(GENERATORS))
        cols = np.concatenate([self.shifts[g] for g in GENERATORS])
        a = coo_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n)).tocsr()
        a = a + a.T
        a.data[:] = 1.0
        return a

    def index_of(self, coord) -> int:
        """Node index of a coordinate tuple (reduced into range)."""
        n = self.spec.n
        if self.spec.kind == "flat_torus":
            a, b = coord
            return (a % n) * n + (b % n)
        a, b, c = coord
        a0 = a % n
        # (a, b, c) ~ (a - n k, b, c - n k b) under the lattice action
        c = c - n * ((a - a0) // n) * b
        return (a0 * n + (b % n)) * n * n + (c % (n * n))


def build_model(spec: ModelSpec) -> DiscreteGeometry:
    """Build the discrete geometry for ``spec``."""
    n = spec.n
    if spec.kind == "flat_torus":
        a, b = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        coords = np.stack([a.ravel(), b.ravel()], axis=1)
        a, b = coords.T
        sx = ((a + 1) % n) * n + b
        sy = a * n + (b + 1) % n
        mu = np.full(n * n, spec.h**2)
    else:
        n2 = n * n
        a, b, c = np.meshgrid(np.arange(n), np.arange(n), np.arange(n2), indexing="ij")
        coords = np.stack([a.ravel(), b.ravel(), c.ravel()], axis=1)
        a, b, c = coords.T
        # right multiplication by x = (1,0,0); wrapping a picks up c -> c - n b
        wrap = a + 1 == n
        cx = np.where(wrap, (c - n * b) % n2, c)
        sx = (((a + 1) % n) * n + b) * n2 + cx
        # right multiplication by y = (0,1,0): c -> c + a
        sy = (a * n + (b + 1) % n) * n2 + (c + a) % n2
        mu = np.full(n**4, spec.h**4)
    shifts = np.stack([sx, sy]).astype(np.int64)
    inverse = np.empty_like(shifts)
    for g in GENERATORS:
        inverse[g][shifts[g]] = np.arange(shifts.shape[1])
    return DiscreteGeometry(spec, coords, shifts, mu, inverse)


@dataclass(frozen=True, eq=False)
class DistanceField:
    """rho(x, y) = h * (undirected hop count)."""

    hops: np.ndarray
    h: float

    @property
    def rho(self) -> np.ndarray:
        return self.hops * self.h

    @property
    def diameter(self) -> float:
        return float(self.hops.max()) * self.h

    @property
    def diameter_hops(self) -> int:
        return int(self.hops.max())


def cc_distance_matrix(geom: DiscreteGeometry) -> DistanceField:
    """All-pairs word metric on the undirected generator graph."""
    adj = geom.adjacency()
    ncomp, _ = connected_components(adj, directed=False)
    if ncomp != 1:
        raise ConnectivityError(f"generator graph has {ncomp} components")
    hops = shortest_path(adj, method="D", directed=False, unweighted=True)
    return DistanceField(np.rint(hops).astype(np.int32), geom.h)


def ball_volume(geom: DiscreteGeometry, dist: DistanceField, x: int, delta: float) -> float:
    """V(x, delta): measure of the open ball {y : rho(x, y) < delta}."""
    if delta <= 0:
        return 0.0
    inside = dist.hops[x] * dist.h < delta
    return float(geom.mu[inside].sum())


def ball_volume_table(geom: DiscreteGeometry, dist: DistanceField) -> np.ndarray:
    """Closed hop-ball volumes: ``table[x, k] = V(x, (k + 1/2) h)``.

    Columns run over k = 0..diameter_hops.
    """
    kmax = dist.diameter_hops
    table = np.zeros((geom.size, kmax + 1))
    for x in range(geom.size):
        table[x] = np.bincount(dist.hops[x], weights=geom.mu, minlength=kmax + 1)
    return np.cumsum(table, axis=1)


def volume_at(table: np.ndarray, h: float, x, delta) -> np.ndarray:
    """Look up V(x, delta) from a closed hop-ball table (open-ball convention)."""
    delta = np.asarray(delta, dtype=float)
    # rho < delta  <=>  hops <= ceil(delta/h) - 1
    k = np.ceil(delta / h - 1e-12).astype(int) - 1
    k = np.clip(k, -1, table.shape[1] - 1)
    vals = table[x, np.maximum(k, 0)]
    return np.where(k < 0, 0.0, vals)


@dataclass
class DoublingReport:
    Q_fit: float
    q_fit: float
    delta0: float
    residuals: list = field(default_factory=list)


def fit_doubling_exponents(geom: DiscreteGeometry, dist: DistanceField, delta0: float | None = None) -> DoublingReport:
    """Fit upper/lower volume growth exponents by sup/inf of log-ratios.

    Radii are sampled at the realized values delta_k = (k + 1/2) h.
    Upper exponent: gamma >= 1 with gamma * delta <= diameter / 2.
    Lower exponent: gamma < 1 with delta <= delta0 (default diameter / 4).
    """
    h = dist.h
    diam = dist.diameter
    if delta0 is None:
        delta0 = diam / 4.0
    table = ball_volume_table(geom, dist)
    radii = (np.arange(table.shape[1]) + 0.5) * h
    up = radii[radii <= diam / 2.0 + 1e-12]
    low = radii[radii <= delta0 + 1e-12]
    if up.size < 2 or low.size < 2:
        raise InsufficientScalesError(
            f"need >= 2 sampled radii below diameter/2 and delta0 (diameter={diam}, delta0={delta0})"
        )
    # vertex classes with identical volume profiles share exponents
    profiles, reps = np.unique(np.round(table, 15), axis=0, return_index=True)
    residuals = []
    Q = -np.inf
    q = np.inf
    for x in np.sort(reps):
        for i, d in enumerate(up):
            for d2 in up[i + 1:]:
                gamma = d2 / d
                ratio = table[x, int(round(d2 / h - 0.5))] / table[x, int(round(d / h - 0.5))]
                e = np.log(ratio) / np.log(gamma)
                residuals.append((int(x), float(d), float(gamma), float(ratio)))
                Q = max(Q, e)
        for i, d in enumerate(low):
            for d1 in low[:i]:
                gamma = d1 / d
                ratio = table[x, int(round(d1 / h - 0.5))] / table[x, int(round(d / h - 0.5))]
                e = np.log(ratio) / np.log(gamma)
                residuals.append((int(x), float(d), float(gamma), float(ratio)))
                q = min(q, e)
    return DoublingReport(float(Q), float(q), float(delta0), residuals)
