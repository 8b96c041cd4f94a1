import itertools
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subheat.errors import InsufficientScalesError, InvalidModelError
from subheat.geometry import (
    ModelSpec,
    ball_volume,
    ball_volume_table,
    build_model,
    cc_distance_matrix,
    fit_doubling_exponents,
    volume_at,
)

from .conftest import model


def heis_mul(p, q):
    """Integer Heisenberg product (a, b, c)(a', b', c') = (a+a', b+b', c+c'+a b')."""
    return (p[0] + q[0], p[1] + q[1], p[2] + q[2] + p[0] * q[1])


GENS = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0)]


def bfs_word_lengths(geom, radius):
    """Word lengths of group elements reachable in <= radius steps, computed in H(Z) then reduced."""
    seen = {(0, 0, 0): 0}
    frontier = deque([(0, 0, 0)])
    while frontier:
        p = frontier.popleft()
        if seen[p] == radius:
            continue
        for g in GENS:
            q = heis_mul(p, g)
            if q not in seen:
                seen[q] = seen[p] + 1
                frontier.append(q)
    out = {}
    for p, k in seen.items():
        i = geom.index_of(p)
        out[i] = min(k, out.get(i, k))
    return out


def test_flat_torus_counts():
    geom, _ = model("flat_torus:n=4")
    assert geom.size == 16
    assert len(geom.edges) == 32
    assert np.all(geom.mu == 1 / 16)


def test_heisenberg_counts():
    geom, _ = model("heisenberg:n=4")
    assert geom.size == 256
    assert len(geom.edges) == 512
    assert np.all(geom.mu == 1 / 256)
    assert geom.volume == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("text", ["heisenberg:n=2", "flat_torus:n=1", "sphere:n=4", "heisenberg"])
def test_invalid_models(text):
    with pytest.raises(InvalidModelError):
        ModelSpec.parse(text)


def test_model_string_roundtrip():
    assert str(ModelSpec.parse(" heisenberg : n=6 ")) == "heisenberg:n=6"


def test_shifts_are_permutations():
    geom, _ = model("heisenberg:n=4")
    for g in (0, 1):
        assert np.array_equal(np.sort(geom.shifts[g]), np.arange(geom.size))
        assert np.array_equal(geom.inverse_shifts[g][geom.shifts[g]], np.arange(geom.size))


def test_heisenberg_shifts_are_right_multiplication():
    geom, _ = model("heisenberg:n=5")
    rng = np.random.default_rng(0)
    for i in rng.choice(geom.size, 30, replace=False):
        p = tuple(int(v) for v in geom.coords[i])
        assert geom.shifts[0][i] == geom.index_of(heis_mul(p, (1, 0, 0)))
        assert geom.shifts[1][i] == geom.index_of(heis_mul(p, (0, 1, 0)))


def test_distances_one_step_and_torus():
    geom, dist = model("heisenberg:n=6")
    e = geom.index_of((0, 0, 0))
    for g in (0, 1):
        assert dist.rho[e, geom.shifts[g][e]] == pytest.approx(geom.h)
    tgeom, tdist = model("flat_torus:n=4")
    assert tdist.rho[tgeom.index_of((0, 0)), tgeom.index_of((2, 0))] == 0.5


def test_central_element_distance_matches_bfs_oracle():
    geom, dist = model("heisenberg:n=6")
    e = geom.index_of((0, 0, 0))
    z = geom.index_of((0, 0, 1))
    assert dist.hops[e, z] == 4
    assert dist.rho[e, z] == pytest.approx(4 * geom.h)
    oracle = bfs_word_lengths(geom, 5)
    for i, k in oracle.items():
        assert dist.hops[e, i] == k


def test_ball_volume_examples():
    geom, dist = model("heisenberg:n=4")
    h = geom.h
    assert ball_volume(geom, dist, 0, 0.5 * h) == h**4
    tgeom, tdist = model("flat_torus:n=8")
    assert ball_volume(tgeom, tdist, 3, 1.01 * tgeom.h) == pytest.approx(5 * tgeom.h**2)


def test_ball_volume_two_step_words():
    geom, dist = model("heisenberg:n=6")
    words = {geom.index_of((0, 0, 0))}
    for w in itertools.product(GENS + [(0, 0, 0)], repeat=2):
        p = (0, 0, 0)
        for g in w:
            p = heis_mul(p, g)
        words.add(geom.index_of(p))
    e = geom.index_of((0, 0, 0))
    assert ball_volume(geom, dist, e, 2.01 * geom.h) == pytest.approx(len(words) * geom.h**4, rel=1e-14)


def test_volume_table_matches_direct():
    geom, dist = model("heisenberg:n=4")
    table = ball_volume_table(geom, dist)
    for x in (0, 17, 200):
        for delta in (0.0, 0.1, 0.25, 0.26, 0.9, 3.0):
            assert volume_at(table, geom.h, x, delta) == pytest.approx(ball_volume(geom, dist, x, delta), abs=1e-15)


@pytest.mark.parametrize("text", ["flat_torus:n=8", "heisenberg:n=4"])
def test_triangle_inequality(text):
    _, dist = model(text)
    H = dist.hops.astype(np.int64)
    # min-plus closure cannot shorten any entry
    for z in range(H.shape[0]):
        assert np.all(H <= H[:, z][:, None] + H[z][None, :])


def test_flat_torus_vertex_transitive():
    geom, dist = model("flat_torus:n=8")
    table = ball_volume_table(geom, dist)
    assert np.all(table == table[0])


@pytest.mark.parametrize("n", [4, 6])
def test_heisenberg_volume_invariant_under_central_shift(n):
    # left multiplication by the center commutes with the lattice action, so it is an isometry
    geom, dist = model(f"heisenberg:n={n}")
    table = ball_volume_table(geom, dist)
    for i, (a, b, c) in enumerate(geom.coords):
        assert np.array_equal(table[geom.index_of((a, b, c + 1))], table[i])


@settings(max_examples=50, deadline=None)
@given(x=st.integers(0, 255), d1=st.floats(0, 3), d2=st.floats(0, 3))
def test_volume_monotone(x, d1, d2):
    geom, dist = model("heisenberg:n=4")
    lo, hi = sorted((d1, d2))
    assert ball_volume(geom, dist, x, lo) <= ball_volume(geom, dist, x, hi)


@pytest.mark.parametrize("text", ["flat_torus:n=16", "heisenberg:n=6"])
def test_doubling_holds_with_reported_exponent(text):
    geom, dist = model(text)
    rep = fit_doubling_exponents(geom, dist)
    table = ball_volume_table(geom, dist)
    bound = 2 ** (rep.Q_fit + 0.5)
    for k in range(table.shape[1]):
        delta = (k + 0.5) * geom.h
        if 2 * delta > dist.diameter:
            break
        big = volume_at(table, geom.h, np.arange(geom.size), 2 * delta)
        assert np.all(big <= bound * table[:, k] * (1 + 1e-12))


def test_doubling_ranges():
    geom, dist = model("flat_torus:n=16")
    assert 1.7 <= fit_doubling_exponents(geom, dist).Q_fit <= 2.5
    geom, dist = model("heisenberg:n=6")
    assert 3.5 <= fit_doubling_exponents(geom, dist).Q_fit <= 4.7


def test_doubling_needs_scales():
    geom, dist = model("flat_torus:n=4")
    with pytest.raises(InsufficientScalesError):
        fit_doubling_exponents(geom, dist, delta0=0.01)


def test_bfs_covers_everything_within_diameter():
    geom, dist = model("heisenberg:n=4")
    assert np.all(dist.hops <= dist.diameter_hops)
    assert dist.diameter == pytest.approx(2.0)
