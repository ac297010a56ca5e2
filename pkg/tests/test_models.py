from __future__ import annotations

import math
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roelab.lattice import Window
from roelab.models import (CLEAN, DisorderSpec, ModelError, ModelSpec, build_hamiltonian, build_parts,
                           landau_hofstadter, neumann_resolvent, plaquette_holonomy, site_potential)
from roelab.roe_ops import BlockOperator, classify_decay, decay_profile, propagation


def spectrum(H: BlockOperator) -> np.ndarray:
    return np.linalg.eigvalsh(H.to_dense())


def test_periodic_chain_matches_cosine_band():
    spec = ModelSpec("laplacian_potential", d=1, L=6, boundary="periodic")
    M = 2 * spec.L + 1
    expected = np.sort(2 - 2 * np.cos(2 * np.pi * np.arange(M) / M))
    np.testing.assert_allclose(spectrum(build_hamiltonian(spec)), expected, atol=1e-10)


def test_zero_flux_hofstadter_is_laplacian():
    lap = build_hamiltonian(ModelSpec("laplacian_potential", L=3))
    for gauge in ("cocycle", "landau"):
        hof = build_hamiltonian(ModelSpec("hofstadter", L=3, gauge=gauge))
        np.testing.assert_array_equal(hof.to_dense(), lap.to_dense())


def test_decoupled_ssh_stack_is_direct_sum():
    L = 4
    stack = build_hamiltonian(ModelSpec("ssh_stack", L=L, coupling=0.0))
    chain = build_hamiltonian(ModelSpec("ssh_stack", d=1, L=L))
    layers = 2 * L + 1
    expected = np.sort(np.repeat(spectrum(chain), layers))
    np.testing.assert_allclose(spectrum(stack), expected, atol=1e-12)


@pytest.mark.parametrize("axis", [1, 2])
def test_ssh_stack_axis_choice(axis):
    H = build_hamiltonian(ModelSpec("ssh_stack", L=2, axis=axis))
    win = Window(2, 2)
    a = win.index_of((0, 0))
    along = (0, 1) if axis == 1 else (1, 0)
    across = (1, 0) if axis == 1 else (0, 1)
    np.testing.assert_array_equal(H.block(a, win.index_of(along)), [[0, 0], [1.0, 0]])
    np.testing.assert_array_equal(H.block(a, win.index_of(across)), 0.1 * np.eye(2))


def test_builder_is_deterministic():
    spec = ModelSpec("hofstadter", L=4, flux=Fraction(1, 3))
    dis = DisorderSpec(W=1.0, hopping_W=0.2, seed=9)
    a, b = build_hamiltonian(spec, dis), build_hamiltonian(spec, dis)
    np.testing.assert_array_equal(a.data, b.data)
    np.testing.assert_array_equal(a.rows, b.rows)
    assert not np.array_equal(build_hamiltonian(spec, replace(dis, seed=10)).data, a.data)


def test_zero_disorder_reproduces_clean():
    spec = ModelSpec("ssh_stack", L=3)
    np.testing.assert_array_equal(build_hamiltonian(spec, DisorderSpec(W=0, seed=123)).to_dense(),
                                  build_hamiltonian(spec).to_dense())


def test_disorder_is_keyed_by_site():
    big = Window(2, 4)
    small = Window(2, 2)
    vb = site_potential(big.labels, 2, 1.0, 5)
    vs = site_potential(small.labels, 2, 1.0, 5)
    np.testing.assert_array_equal(vb[big.indices_of(small.labels)], vs)
    assert np.all(np.abs(vb) <= 0.5)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.01, 5.0), st.integers(0, 2**31 - 1))
def test_disordered_models_are_hermitian(W, seed):
    spec = ModelSpec("hofstadter", L=3, flux=Fraction(1, 4))
    H = build_hamiltonian(spec, DisorderSpec(W=W, hopping_W=0.1, seed=seed))
    assert H.hermitian
    assert H.hermiticity_error() <= 1e-12
    assert propagation(H) <= 1.0


@pytest.mark.parametrize("kind", ["laplacian_potential", "ssh_stack"])
def test_clean_models_are_translation_covariant(kind):
    spec = ModelSpec(kind, L=4)
    H = build_hamiltonian(spec)
    win = spec.window
    lab = win.labels
    by_offset: dict = {}
    for (x, y), b in H.items():
        if np.any(np.abs(lab[x]) >= win.L) or np.any(np.abs(lab[y]) >= win.L):
            continue
        key = tuple(lab[y] - lab[x])
        if key in by_offset:
            np.testing.assert_array_equal(by_offset[key], b)
        else:
            by_offset[key] = b
    assert len(by_offset) == 5


def test_propagation_bounds():
    for spec in (ModelSpec("laplacian_potential", d=3, L=2), ModelSpec("hofstadter", L=3, flux=Fraction(1, 5)),
                 ModelSpec("ssh_stack", L=3)):
        assert propagation(build_hamiltonian(spec)) == 1.0


def test_delone_model():
    spec = ModelSpec("delone_laplacian", L=4)
    H = build_hamiltonian(spec, DisorderSpec(positional=0.2, seed=3))
    assert H.hermitian
    assert propagation(H) <= 1.6
    assert np.linalg.eigvalsh(H.to_dense()).min() > -1e-12


@pytest.mark.parametrize("flux", [Fraction(1, 3), Fraction(-1, 3), Fraction(2, 7)])
def test_cocycle_and_landau_gauges_agree(flux):
    spec = ModelSpec("hofstadter", L=5, flux=flux)
    Hc = build_hamiltonian(spec)
    Hl = landau_hofstadter(spec)
    np.testing.assert_allclose(spectrum(Hc), spectrum(Hl), atol=1e-10)
    expected = np.exp(-2j * np.pi * float(flux))
    for corner in [(0, 0), (-3, 2), (4, -5)]:
        assert abs(plaquette_holonomy(Hc, corner) - expected) < 1e-12
        assert abs(plaquette_holonomy(Hl, corner) - expected) < 1e-12


def test_periodic_hofstadter_commutes_with_magnetic_translations():
    spec = ModelSpec("hofstadter", L=4, flux=Fraction(1, 3), boundary="periodic", gauge="landau")
    H = build_hamiltonian(spec).to_dense()
    win = spec.window
    for shift in [(0, 3), (1, 0)]:
        target = (win.labels + shift + win.L) % win.side - win.L
        Tm = np.zeros_like(H)
        Tm[win.indices_of(target), np.arange(win.n)] = 1
        assert np.max(np.abs(Tm @ H - H @ Tm)) < 1e-10
    # a single step along the second axis is not a symmetry
    target = (win.labels + (0, 1) + win.L) % win.side - win.L
    Tm = np.zeros_like(H)
    Tm[win.indices_of(target), np.arange(win.n)] = 1
    assert np.max(np.abs(Tm @ H - H @ Tm)) > 0.1


@pytest.mark.parametrize("kwargs,match", [
    (dict(kind="nope"), "unknown model kind"),
    (dict(kind="hofstadter", flux=Fraction(1, 65)), "denominator"),
    (dict(kind="hofstadter", L=4, flux=Fraction(1, 3), boundary="periodic", gauge="landau"), None),
    (dict(kind="hofstadter", L=5, flux=Fraction(1, 3), boundary="periodic", gauge="landau"), "multiple of q"),
    (dict(kind="hofstadter", d=3), "two-dimensional"),
    (dict(kind="ssh_stack", d=3), "ssh_stack supports"),
    (dict(kind="laplacian_potential", boundary="twisted"), "boundary"),
    (dict(kind="laplacian_potential", L=0, boundary="periodic"), "at least 3"),
    (dict(kind="delone_laplacian", boundary="periodic"), "open boundaries"),
])
def test_spec_validation(kwargs, match):
    if match is None:
        ModelSpec(**kwargs)
        return
    with pytest.raises(ModelError, match=match):
        ModelSpec(**kwargs)


def test_periodic_cocycle_gauge_rejected():
    spec = ModelSpec("hofstadter", L=4, flux=Fraction(1, 3), boundary="periodic")
    with pytest.raises(ModelError, match="landau"):
        build_hamiltonian(spec)


@pytest.mark.parametrize("kwargs", [dict(W=-1), dict(positional=0.5), dict(hopping_W=-0.1)])
def test_disorder_validation(kwargs):
    with pytest.raises(ModelError):
        DisorderSpec(**kwargs)


# --------------------------------------------------------------------------
# Neumann resolvent


def chain_parts(L=20, W=2.0, seed=0):
    spec = ModelSpec("laplacian_potential", d=1, L=L)
    return build_parts(spec, DisorderSpec(W=W, seed=seed))


def test_neumann_zero_potential_is_free_resolvent():
    delta, V = chain_parts(W=0.0)
    res = neumann_resolvent(delta, V, 1.0, order=4)
    expected = np.linalg.inv(1j * np.eye(delta.dim) + delta.to_dense())
    np.testing.assert_array_equal(res.resolvent.to_dense(), expected)
    assert res.contraction == 0.0


def test_neumann_residual_and_rate():
    delta, V = chain_parts(W=2.0)
    assert np.max(np.abs(V.data)) <= 1.0
    res = neumann_resolvent(delta, V, 10.0, order=20)
    assert res.residual < 1e-10
    assert np.all(res.bound_met())
    r = res.residuals
    # geometric decrease while above round-off
    live = r[r > 1e3 * res.roundoff]
    assert np.all(np.diff(live) < 0)
    assert res.measured_rate() <= res.contraction * 1.1


def test_neumann_result_decays_exponentially():
    delta, V = chain_parts(L=30, W=2.0)
    res = neumann_resolvent(delta, V, 1.5, order=60)
    cls = classify_decay(decay_profile(res.resolvent))
    assert cls.kind == "exponential" and cls.rate > 0


def test_neumann_rejects_non_contraction():
    delta, V = chain_parts(W=2.0)
    with pytest.raises(ModelError, match="does not contract"):
        neumann_resolvent(delta, V * 50.0, 0.1, order=3)


def test_neumann_rejects_offdiagonal_potential():
    delta, V = chain_parts()
    with pytest.raises(ModelError, match="diagonal"):
        neumann_resolvent(delta, delta, 10.0, order=3)
