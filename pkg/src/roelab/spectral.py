"""Dense eigensolves, gap detection, Fermi projections and strip edge spectra."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.linalg import eigh
from scipy.optimize import linear_sum_assignment

from .lattice import Window
from .models import CLEAN, DisorderSpec, ModelError, ModelSpec, hopping_rules
from .roe_ops import BlockOperator

HERMITIAN_TOL = 1e-12
DEGENERACY_TOL = 1e-12


class GapClosedError(RuntimeError):
    """No usable spectral gap at the requested Fermi energy."""


@dataclass(frozen=True)
class SpectralData:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    geometry: object
    N: int
    periodic: bool = False

    @property
    def window(self) -> Window:
        g = self.geometry
        return g if isinstance(g, Window) else g.window

    def site_weights(self) -> np.ndarray:
        """``|psi|^2`` summed over internal indices, shape ``(sites, states)``."""
        n = self.geometry.n
        w = np.abs(self.eigenvectors) ** 2
        return w.reshape(n, self.N, -1).sum(axis=1)


def eigendecompose(H: BlockOperator) -> SpectralData:
    """Full dense hermitian eigensolve."""
    if not H.hermitian:
        raise ValueError("eigendecompose needs an operator flagged hermitian")
    M = H.to_dense()
    err = float(np.max(np.abs(M - M.conj().T))) if M.size else 0.0
    if err > HERMITIAN_TOL:
        raise ValueError(f"operator is not hermitian (error {err:.3e})")
    vals, vecs = eigh(M, driver="evr")
    return SpectralData(vals, vecs, H.geometry, H.N, H.periodic)


def residual_norm(H: BlockOperator, data: SpectralData) -> float:
    """``max_j ||H v_j - lambda_j v_j||``."""
    M = H.to_dense()
    R = M @ data.eigenvectors - data.eigenvectors * data.eigenvalues
    return float(np.max(np.linalg.norm(R, axis=0))) if R.size else 0.0


@dataclass(frozen=True)
class Gap:
    width: float
    below: float | None
    above: float | None
    E_F: float
    gapped: bool
    reason: str = ""


def spectral_gap(data: SpectralData, E_F: float, *, min_gap: float = 0.0,
                 states: np.ndarray | None = None) -> Gap:
    """Nearest eigenvalues below and above ``E_F``.

    ``states`` optionally restricts the scan to a subset of eigenstates (see
    :func:`bulk_states`).  The gap is reported closed when ``E_F`` sits
    within ``DEGENERACY_TOL`` of an eigenvalue, when one side is empty, or
    when the width is below ``min_gap``.
    """
    ev = data.eigenvalues if states is None else data.eigenvalues[np.asarray(states)]
    if len(ev) and np.min(np.abs(ev - E_F)) <= DEGENERACY_TOL:
        return Gap(0.0, None, None, E_F, False, "Fermi energy coincides with an eigenvalue")
    lo = ev[ev < E_F]
    hi = ev[ev > E_F]
    below = float(lo.max()) if len(lo) else None
    above = float(hi.min()) if len(hi) else None
    if below is None or above is None:
        return Gap(math.inf, below, above, E_F, False, "Fermi energy outside the spectrum")
    width = above - below
    if width < min_gap:
        return Gap(width, below, above, E_F, False, f"gap {width:.4g} below threshold {min_gap:.4g}")
    return Gap(width, below, above, E_F, True)


def inner_region(window: Window, fraction: float = 0.5) -> np.ndarray:
    """Sites with ``max_j |x_j| <= fraction * L``."""
    return np.max(np.abs(window.labels), axis=1) <= fraction * window.L


def bulk_states(data: SpectralData, fraction: float = 0.5, threshold: float = 0.5) -> np.ndarray:
    """Mask of eigenstates that are not edge-localized.

    A state counts as bulk when its weight on the inner box (half-width
    ``fraction * L``) is at least ``threshold`` times the inner box's share
    of sites.  Periodic systems have no edge, so every state is bulk.
    """
    if data.periodic:
        return np.ones(len(data.eigenvalues), dtype=bool)
    region = inner_region(data.window, fraction)
    if isinstance(data.geometry, Window):
        sites = region
    else:
        sites = region[data.window.indices_of(data.geometry.labels)]
    w_in = data.site_weights()[sites].sum(axis=0)
    return w_in >= threshold * sites.mean()


def bulk_gap(data: SpectralData, E_F: float, min_gap: float = 0.0, **kw) -> Gap:
    return spectral_gap(data, E_F, min_gap=min_gap, states=bulk_states(data, **kw))


@dataclass(frozen=True)
class FermiProjection:
    matrix: np.ndarray
    E_F: float
    gap: Gap
    geometry: object
    N: int
    rank: int
    periodic: bool = False
    occupied: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def window(self) -> Window:
        g = self.geometry
        return g if isinstance(g, Window) else g.window

    @cached_property
    def operator(self) -> BlockOperator:
        return BlockOperator.from_dense(self.geometry, self.N, self.matrix, periodic=self.periodic)

    def occupied_frame(self) -> np.ndarray:
        """Orthonormal basis of the range of ``P``."""
        if self.occupied is not None:
            return self.occupied
        vals, vecs = eigh(self.matrix, driver="evr")
        return vecs[:, vals > 0.5]

    def idempotency_error(self) -> float:
        P = self.matrix
        return float(np.linalg.norm(P @ P - P, ord=2))

    def hermiticity_error(self) -> float:
        P = self.matrix
        return float(np.linalg.norm(P - P.conj().T, ord=2))


def fermi_projection(data: SpectralData, E_F: float) -> FermiProjection:
    """Spectral projection onto eigenvalues below ``E_F``."""
    gap = spectral_gap(data, E_F)
    if not gap.gapped and gap.below is None and gap.above is None:
        raise GapClosedError(gap.reason)
    occ = data.eigenvalues < E_F
    V = data.eigenvectors[:, occ]
    P = V @ V.conj().T
    return FermiProjection(P, E_F, gap, data.geometry, data.N, int(occ.sum()), data.periodic, V)


def projection_for(spec: ModelSpec, dis: DisorderSpec, E_F: float, *, min_gap: float = 0.0):
    """Build, diagonalize and project; raises :class:`GapClosedError` when the
    bulk gap at ``E_F`` is narrower than ``min_gap``."""
    from .models import build_hamiltonian

    data = eigendecompose(build_hamiltonian(spec, dis))
    gap = bulk_gap(data, E_F, min_gap)
    if not gap.gapped:
        raise GapClosedError(f"L={spec.L}: {gap.reason} (below={gap.below}, above={gap.above})")
    P = fermi_projection(data, E_F)
    return replace(P, gap=gap), data


# --------------------------------------------------------------------------
# edge spectra


def strip_hamiltonian(spec: ModelSpec, k: float, width: int) -> np.ndarray:
    """Bloch Hamiltonian of a strip periodic along axis 1 (momentum ``k``) and
    open along axis 2 with sites ``y = 0, ..., width - 1``."""
    if spec.d != 2:
        raise ModelError("edge spectra need a two-dimensional model")
    rules = hopping_rules(spec)
    N = rules.N
    H = np.zeros((width * N, width * N), dtype=complex)
    for y in range(width):
        x = np.array([0, y])
        sl = slice(y * N, (y + 1) * N)
        H[sl, sl] += rules.onsite(x)
        for (dx, dy), fn in rules.hops:
            y2 = y + dy
            if not 0 <= y2 < width:
                continue
            b = np.asarray(fn(x), dtype=complex) * np.exp(1j * k * dx)
            s2 = slice(y2 * N, (y2 + 1) * N)
            H[sl, s2] += b
            H[s2, sl] += b.conj().T
    return H


@dataclass(frozen=True)
class EdgeCrossing:
    momentum: float
    sign: int
    edge: str
    lower_weight: float
    upper_weight: float


@dataclass(frozen=True)
class EdgeSpectrum:
    """Strip spectra with signed Fermi-level crossings.

    Chirality convention: a crossing counts +1 when ``dE/dk > 0``.  The lower
    edge is ``y`` small; edge localization means more than ``threshold`` of
    the weight on the edge-nearest quarter of the strip.
    """

    momenta: np.ndarray
    energies: np.ndarray
    lower_weights: np.ndarray
    upper_weights: np.ndarray
    crossings: tuple[EdgeCrossing, ...]
    E_F: float
    width: int
    threshold: float

    def chirality(self, edge: str = "lower") -> int:
        return sum(c.sign for c in self.crossings if c.edge == edge)

    @property
    def net_chirality(self) -> int:
        return self.chirality("lower")

    def rows(self, edge: str = "lower"):
        """``(momentum, eigenvalue, edge_weight)`` rows for CSV output."""
        wts = self.lower_weights if edge == "lower" else self.upper_weights
        for k, es, ws in zip(self.momenta, self.energies, wts):
            for e, w in zip(es, ws):
                yield float(k), float(e), float(w)


def edge_spectrum(spec: ModelSpec, E_F: float, *, momenta: np.ndarray | int = 400, width: int = 24,
                  dis: DisorderSpec = CLEAN, threshold: float = 0.5) -> EdgeSpectrum:
    """Solve the strip at each momentum and count signed crossings of ``E_F``.

    Eigenstates at neighbouring momenta are matched by maximal overlap, so
    crossings on the two edges are told apart even when they fall into the
    same momentum interval.
    """
    if dis != CLEAN and (dis.W or dis.hopping_W or dis.positional):
        raise ModelError("edge spectra need a translation-invariant (clean) model")
    q = spec.flux.denominator if spec.kind == "hofstadter" else 1
    if width < 4 * q:
        warnings.warn(f"strip width {width} is below 4q = {4 * q}", stacklevel=2)
    if isinstance(momenta, int):
        momenta = -math.pi + 2 * math.pi * np.arange(momenta) / momenta
    momenta = np.asarray(momenta, dtype=float)
    N = hopping_rules(spec).N
    y = np.repeat(np.arange(width), N)
    lower = y < width / 4
    upper = y >= 3 * width / 4
    energies, vectors, lw, uw = [], [], [], []
    for k in momenta:
        e, v = np.linalg.eigh(strip_hamiltonian(spec, k, width))
        w = np.abs(v) ** 2
        energies.append(e)
        vectors.append(v)
        lw.append(w[lower].sum(axis=0))
        uw.append(w[upper].sum(axis=0))
    energies, lw, uw = np.array(energies), np.array(lw), np.array(uw)
    crossings = []
    closed = len(momenta) > 1 and np.isclose(momenta[-1] - momenta[0] + (momenta[1] - momenta[0]), 2 * math.pi)
    steps = len(momenta) if closed else len(momenta) - 1
    for i in range(steps):
        j = (i + 1) % len(momenta)
        crossings.extend(_crossings(momenta[i], energies[i], energies[j], vectors[i], vectors[j],
                                    lw[i], lw[j], uw[i], uw[j], E_F, threshold))
    return EdgeSpectrum(momenta, energies, lw, uw, tuple(crossings), E_F, width, threshold)


def _crossings(k, e0, e1, v0, v1, l0, l1, u0, u1, E_F, threshold):
    # only states that end up on opposite sides of E_F can cross
    c0 = np.nonzero(np.abs(e0 - E_F) <= np.max(np.abs(e1 - e0)) + 1e-9)[0]
    c1 = np.nonzero(np.abs(e1 - E_F) <= np.max(np.abs(e1 - e0)) + 1e-9)[0]
    if len(c0) == 0 or len(c1) == 0:
        return []
    overlap = np.abs(v0[:, c0].conj().T @ v1[:, c1])
    ri, ci = linear_sum_assignment(-overlap)
    out = []
    for a, b in zip(c0[ri], c1[ci]):
        before, after = e0[a] - E_F, e1[b] - E_F
        if (before < 0) == (after < 0):
            continue
        sign = 1 if after > before else -1
        lwt = 0.5 * (l0[a] + l1[b])
        uwt = 0.5 * (u0[a] + u1[b])
        edge = "lower" if lwt > threshold else "upper" if uwt > threshold else "bulk"
        out.append(EdgeCrossing(float(k), sign, edge, float(lwt), float(uwt)))
    return out
