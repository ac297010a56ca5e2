from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from roelab.lattice import Window
from roelab.models import CLEAN, DisorderSpec, ModelError, ModelSpec, build_hamiltonian
from roelab.roe_ops import BlockOperator
from roelab.spectral import (GapClosedError, bulk_gap, bulk_states, edge_spectrum, eigendecompose,
                             fermi_projection, projection_for, residual_norm, spectral_gap, strip_hamiltonian)

HOF = Fraction(1, 3)


def test_single_site():
    H = BlockOperator.from_dense(Window(1, 0), 1, np.array([[2.5]]), hermitian=True)
    data = eigendecompose(H)
    assert data.eigenvalues.tolist() == [2.5]
    assert spectral_gap(data, 3.0).gapped is False
    P = fermi_projection(data, 3.0)
    assert P.rank == 1 and P.matrix[0, 0] == 1


def test_periodic_chain_cosine_band():
    spec = ModelSpec("laplacian_potential", d=1, L=10, boundary="periodic")
    H = build_hamiltonian(spec)
    data = eigendecompose(H)
    M = 2 * spec.L + 1
    expected = np.sort(2 - 2 * np.cos(2 * np.pi * np.arange(M) / M))
    np.testing.assert_allclose(data.eigenvalues, expected, atol=1e-12)
    assert residual_norm(H, data) < 1e-12


def test_harper_has_three_bands():
    spec = ModelSpec("hofstadter", L=7, flux=HOF, boundary="periodic", gauge="landau")
    ev = eigendecompose(build_hamiltonian(spec)).eigenvalues
    gaps = np.diff(ev)
    big = np.sort(np.argsort(gaps)[-2:])
    assert gaps[big].min() > 0.5
    # three bands of equal weight
    n = len(ev)
    np.testing.assert_array_equal(big + 1, [n // 3, 2 * n // 3])


def test_spectral_gap_examples():
    data = eigendecompose(BlockOperator.from_dense(Window(1, 1), 1, np.diag([0.0, 1.0, 3.0]), hermitian=True))
    g = spectral_gap(data, 2.0)
    assert g.gapped and g.width == 2.0 and (g.below, g.above) == (1.0, 3.0)
    assert not spectral_gap(data, 1.0).gapped
    assert not spectral_gap(data, 2.0, min_gap=2.5).gapped
    assert not spectral_gap(data, -1.0).gapped


def test_ssh_chain_gap():
    spec = ModelSpec("ssh_stack", d=1, L=40, boundary="periodic")
    g = spectral_gap(eigendecompose(build_hamiltonian(spec)), 0.0)
    assert g.gapped
    assert g.width == pytest.approx(1.0, abs=0.02)


def test_open_hofstadter_edge_states_fill_the_gap():
    spec = ModelSpec("hofstadter", L=8, flux=HOF)
    data = eigendecompose(build_hamiltonian(spec))
    raw = spectral_gap(data, 2.6)
    bulk = bulk_gap(data, 2.6)
    assert raw.width < 0.2 < bulk.width
    assert bulk_states(data).sum() < len(data.eigenvalues)


@pytest.mark.parametrize("kind,E_F", [("hofstadter", 2.6), ("ssh_stack", 0.0)])
def test_projection_properties(kind, E_F):
    spec = ModelSpec(kind, L=5, flux=HOF if kind == "hofstadter" else Fraction(0))
    P, data = projection_for(spec, CLEAN, E_F, min_gap=0.1)
    assert P.idempotency_error() < 1e-10
    assert P.hermiticity_error() < 1e-12
    assert round(np.trace(P.matrix).real) == P.rank
    V = P.occupied_frame()
    np.testing.assert_allclose(V @ V.conj().T, P.matrix, atol=1e-12)


def test_periodic_rank_is_one_band():
    spec = ModelSpec("hofstadter", L=7, flux=HOF, boundary="periodic", gauge="landau")
    data = eigendecompose(build_hamiltonian(spec))
    ranks = {fermi_projection(data, E).rank for E in (2.4, 2.6, 2.8)}
    assert ranks == {spec.window.n // 3}


def test_projection_for_raises_when_gap_closes():
    spec = ModelSpec("hofstadter", L=6, flux=HOF)
    with pytest.raises(GapClosedError):
        projection_for(spec, CLEAN, 4.0, min_gap=0.1)


def test_eigendecompose_rejects_non_hermitian():
    A = np.array([[0, 1], [0, 0]], dtype=complex)
    with pytest.raises(ValueError):
        eigendecompose(BlockOperator.from_dense(Window(1, 0), 2, A))


def test_strip_hamiltonian_is_hermitian():
    spec = ModelSpec("hofstadter", flux=HOF)
    H = strip_hamiltonian(spec, 0.7, 12)
    np.testing.assert_allclose(H, H.conj().T)
    with pytest.raises(ModelError):
        strip_hamiltonian(ModelSpec("laplacian_potential", d=1), 0.0, 4)


def test_trivial_strip_has_no_edge_crossings():
    spec = ModelSpec("laplacian_potential")
    es = edge_spectrum(spec, 9.0, momenta=60, width=12)
    assert es.crossings == ()


@pytest.mark.parametrize("flux,sign", [(Fraction(1, 3), 1), (Fraction(-1, 3), -1)])
def test_hofstadter_edge_chirality(flux, sign):
    spec = ModelSpec("hofstadter", flux=flux)
    es = edge_spectrum(spec, 2.6, momenta=200, width=24)
    assert es.chirality("lower") == sign
    assert es.chirality("upper") == -sign
    assert all(c.edge != "bulk" for c in es.crossings)


def test_ssh_stack_strip_has_no_net_chirality():
    es = edge_spectrum(ModelSpec("ssh_stack", axis=1), 0.0, momenta=100, width=12)
    assert es.chirality("lower") == 0 and es.chirality("upper") == 0


def test_edge_spectrum_rejects_disorder():
    with pytest.raises(ModelError):
        edge_spectrum(ModelSpec("hofstadter", flux=HOF), 2.6, dis=DisorderSpec(W=0.1, seed=1))


def test_edge_spectrum_warns_on_narrow_strip():
    with pytest.warns(UserWarning):
        edge_spectrum(ModelSpec("hofstadter", flux=HOF), 2.6, momenta=20, width=8)
