from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roelab.lattice import (HalfSpaceSpec, Window, delone_perturb, half_space_sites, is_coarsely_dense,
                            stack_embed, window_sites)


def test_window_sites_small_cases():
    assert window_sites(1, 1) == [(-1,), (0,), (1,)]
    assert window_sites(2, 0) == [(0, 0)]
    sites = window_sites(2, 1)
    assert len(sites) == 9
    assert sites[0] == (-1, -1) and sites[-1] == (1, 1)


@pytest.mark.parametrize("d,L", [(0, 1), (-1, 2), (2, -1)])
def test_window_rejects_bad_parameters(d, L):
    with pytest.raises(ValueError):
        Window(d, L)


@pytest.mark.parametrize("d,L", [(1, 3), (2, 2), (3, 1)])
def test_window_order_is_lexicographic_bijection(d, L):
    w = Window(d, L)
    sites = w.sites()
    assert sites == sorted(sites)
    assert len(set(sites)) == (2 * L + 1) ** d
    assert set(sites) == set(itertools.product(range(-L, L + 1), repeat=d))
    for i, s in enumerate(sites):
        assert w.index_of(w.site_at(i)) == i
        assert w.index_of(s) == i
    np.testing.assert_array_equal(w.indices_of(w.labels), np.arange(w.n))


def test_index_of_outside_window_raises():
    with pytest.raises(KeyError):
        Window(2, 1).index_of((2, 0))


def test_labels_are_read_only():
    w = Window(2, 1)
    with pytest.raises(ValueError):
        w.labels[0, 0] = 5


def test_coarse_density_examples():
    X = Window(2, 3)
    assert is_coarsely_dense(X, X, 0.0)
    even = X.labels[(X.labels % 2 == 0).all(axis=1)]
    assert is_coarsely_dense(even, X, 1.5)
    assert not is_coarsely_dense(np.zeros((1, 2)), X, 1.0)
    assert not is_coarsely_dense(np.zeros((0, 2)), X, 10.0)


def test_even_sublattice_needs_radius_sqrt2():
    # the odd-odd sites sit at distance sqrt(2) from 2Z^2
    X = Window(2, 3)
    even = X.labels[(X.labels % 2 == 0).all(axis=1)]
    assert not is_coarsely_dense(even, X, 1.4)
    assert is_coarsely_dense(even, X, np.sqrt(2))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**16), st.floats(0.0, 3.0), st.floats(0.0, 2.0))
def test_coarse_density_is_monotone_in_radius(seed, R, extra):
    X = Window(2, 3)
    rng = np.random.default_rng(seed)
    Y = X.labels[rng.random(X.n) < 0.3]
    if is_coarsely_dense(Y, X, R):
        assert is_coarsely_dense(Y, X, R + extra)


@pytest.mark.parametrize("k,site,expected", [(1, (5,), (0, 5)), (2, (5,), (5, 0)), (1, (), (0,)),
                                             (2, (1, 2), (1, 0, 2))])
def test_stack_embed(k, site, expected):
    assert stack_embed(k, site) == expected


@pytest.mark.parametrize("k", [0, 3])
def test_stack_embed_rejects_axis(k):
    with pytest.raises(ValueError):
        stack_embed(k, (1,))


@given(st.integers(1, 3), st.lists(st.integers(-50, 50), min_size=2, max_size=2),
       st.lists(st.integers(-50, 50), min_size=2, max_size=2))
def test_stack_embed_is_isometric(k, a, b):
    ea, eb = np.array(stack_embed(k, a)), np.array(stack_embed(k, b))
    assert np.linalg.norm(ea - eb) == np.linalg.norm(np.subtract(a, b))
    if a != b:
        assert stack_embed(k, a) != stack_embed(k, b)


def test_delone_zero_amplitude_is_lattice():
    pts = delone_perturb(Window(2, 2), 0.0, seed=3)
    np.testing.assert_array_equal(pts.positions, Window(2, 2).positions)
    assert pts.r_min == 1.0 and pts.R_cov == 0.0


def test_delone_separation_and_cover():
    w = Window(2, 4)
    pts = delone_perturb(w, 0.2, seed=11)
    diff = pts.positions[:, None, :] - pts.positions[None, :, :]
    dist = np.linalg.norm(diff, axis=-1) + np.eye(w.n) * 99
    assert dist.min() >= 0.6
    assert pts.r_min == pytest.approx(dist.min())
    assert pts.R_cov <= 0.2 * np.sqrt(2) + 1e-12
    assert is_coarsely_dense(pts, w, pts.R_cov)


def test_delone_is_deterministic():
    a = delone_perturb(Window(2, 3), 0.3, seed=5)
    b = delone_perturb(Window(2, 3), 0.3, seed=5)
    np.testing.assert_array_equal(a.positions, b.positions)
    c = delone_perturb(Window(2, 3), 0.3, seed=6)
    assert not np.array_equal(a.positions, c.positions)


@pytest.mark.parametrize("amp", [0.5, 0.7, -0.1])
def test_delone_rejects_amplitude(amp):
    with pytest.raises(ValueError):
        delone_perturb(Window(1, 2), amp, seed=0)


def test_half_space_examples():
    assert half_space_sites(Window(1, 1), HalfSpaceSpec(1, 1)) == [(0,), (1,)]
    assert len(half_space_sites(Window(2, 1), HalfSpaceSpec(2, 1))) == 6


@pytest.mark.parametrize("d,L,k", [(2, 2, 1), (2, 3, 2), (3, 1, 3)])
def test_half_spaces_cover_window_and_meet_on_hyperplane(d, L, k):
    w = Window(d, L)
    plus = half_space_sites(w, HalfSpaceSpec(k, 1))
    minus = half_space_sites(w, HalfSpaceSpec(k, -1))
    assert set(plus) | set(minus) == set(w.sites())
    assert set(plus) & set(minus) == {s for s in w.sites() if s[k - 1] == 0}
    order = {s: i for i, s in enumerate(w.sites())}
    assert [order[s] for s in plus] == sorted(order[s] for s in plus)


def test_half_space_spec_validation():
    with pytest.raises(ValueError):
        HalfSpaceSpec(0)
    with pytest.raises(ValueError):
        HalfSpaceSpec(1, 0)
    with pytest.raises(ValueError):
        half_space_sites(Window(1, 2), HalfSpaceSpec(2))
