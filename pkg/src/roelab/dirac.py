"""Exterior-algebra Dirac symbol and the finite-volume index pairing.

The fibre ``Lambda^*(C^d)`` uses the subset basis ordered by bitmask: basis
vector ``S`` corresponds to the integer with bit ``j-1`` set for ``j in S``.
Creation by ``e_j`` obeys ``e_j ^ e_S = (-1)^{#{i in S : i < j}} e_{S+j}``.

Index convention
----------------
For a projection ``P`` the pairing forms ``M = Q U Q + (1 - Q)`` with
``Q = P (x) 1`` and ``U`` the site-diagonal Dirac phase, and counts
``dim ker M - dim ker M*`` using only near-kernel singular vectors localized
in the bulk of the window.  In a finite window ``M`` is square, so the raw
counts always agree; the partner of each genuine kernel vector is pushed to
the window boundary, which is what the bulk filter removes.  The spinor
chirality is fixed so that this index agrees in sign with
:func:`kitaev_chern_oracle`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Sequence

import numpy as np

from .models import DisorderSpec, ModelError, ModelSpec
from .roe_ops import classify_decay, decay_profile
from .spectral import FermiProjection, GapClosedError, inner_region, projection_for

DEFAULT_TAU = 0.05
DEFAULT_MIN_GAP = 0.1
MAX_DIM = 12


@dataclass(frozen=True)
class ExteriorAlgebra:
    d: int

    @property
    def dim(self) -> int:
        return 1 << self.d

    @property
    def basis(self) -> list[tuple[int, ...]]:
        return [tuple(j + 1 for j in range(self.d) if m >> j & 1) for m in range(self.dim)]

    @property
    def degrees(self) -> np.ndarray:
        return np.array([bin(m).count("1") for m in range(self.dim)])

    @property
    def grading(self) -> np.ndarray:
        return np.diag((-1.0) ** self.degrees)

    @property
    def even(self) -> np.ndarray:
        return np.nonzero(self.degrees % 2 == 0)[0]

    @property
    def odd(self) -> np.ndarray:
        return np.nonzero(self.degrees % 2 == 1)[0]


@lru_cache(maxsize=None)
def _generators(d: int) -> np.ndarray:
    """Real matrices of ``lambda_{e_j}``, shape ``(d, 2^d, 2^d)``."""
    if not 0 <= d <= MAX_DIM:
        raise ValueError(f"dimension must lie in 0..{MAX_DIM}")
    dim = 1 << d
    out = np.zeros((d, dim, dim))
    for j in range(d):
        bit = 1 << j
        for m in range(dim):
            if m & bit:
                continue
            sign = -1.0 if bin(m & (bit - 1)).count("1") % 2 else 1.0
            out[j, m | bit, m] = sign
    out.flags.writeable = False
    return out


def creation(v: Sequence[complex], d: int | None = None) -> np.ndarray:
    """Matrix of ``lambda_v : eta -> v ^ eta`` on ``Lambda^*(C^d)``."""
    v = np.asarray(v)
    d = len(v) if d is None else d
    if len(v) != d:
        raise ValueError("vector length must equal d")
    return np.tensordot(v, _generators(d), axes=(0, 0)) if d else np.zeros((1, 1))


def clifford(n: Sequence[float]) -> np.ndarray:
    """``lambda_n + lambda_n^*``; squares to ``||n||^2`` for real ``n``."""
    lam = creation(n)
    return lam + lam.conj().T


def dirac_f(n: Sequence[float]) -> np.ndarray:
    """Bounded Dirac symbol ``(1 + ||n||^2)^{-1/2} (lambda_n + lambda_n^*)``."""
    n = np.asarray(n, dtype=float)
    return clifford(n) / math.sqrt(1.0 + float(n @ n))


def right_clifford(d: int) -> np.ndarray:
    """Generators ``i (lambda_j - lambda_j^*)``: they square to one and
    anticommute with ``lambda_n + lambda_n^*`` for real ``n``."""
    lam = _generators(d)
    return 1j * (lam - lam.transpose(0, 2, 1))


@lru_cache(maxsize=None)
def spinor_frame(d: int, chirality: int = -1) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal frames of the even and odd parts of one spinor summand.

    The summand is the joint eigenspace where every ``i g_{2k-1} g_{2k}``
    (``g`` from :func:`right_clifford`) equals ``chirality``.  These operators
    commute with the grading and with the Clifford symbol, so the Dirac phase
    restricts to it.  The odd frame is the image of the even frame under
    ``lambda_{e_1} + lambda_{e_1}^*``, which makes the restricted phase equal
    to the identity along ``+e_1``.
    """
    if d % 2 or d == 0:
        raise ValueError("spinor summands need an even positive dimension")
    if chirality not in (1, -1):
        raise ValueError("chirality is +1 or -1")
    g = right_clifford(d)
    dim = 1 << d
    proj = np.eye(dim, dtype=complex)
    for k in range(d // 2):
        omega = 1j * g[2 * k] @ g[2 * k + 1]
        proj = proj @ (np.eye(dim) + chirality * omega) / 2
    ext = ExteriorAlgebra(d)
    even = np.zeros((dim, len(ext.even)), dtype=complex)
    even[ext.even, np.arange(len(ext.even))] = 1
    vals, vecs = np.linalg.eigh(even.conj().T @ proj @ even)
    frame = even @ vecs[:, vals > 0.5]
    for c in range(frame.shape[1]):
        col = frame[:, c]
        pivot = col[np.argmax(np.abs(col))]
        frame[:, c] = col * (abs(pivot) / pivot)
    e1 = np.zeros(d)
    e1[0] = 1.0
    odd = clifford(e1) @ frame
    frame.flags.writeable = False
    odd.flags.writeable = False
    return frame, odd


def dirac_phase(n: Sequence[float], *, full: bool = False, chirality: int = -1) -> np.ndarray:
    """Unitary even-to-odd block of ``(lambda_n + lambda_n^*) / ||n||``.

    By default the block is restricted to one spinor summand (size
    ``2^{d/2-1}``), where the phase winds; ``full=True`` returns the whole
    ``2^{d-1}`` block in the subset basis.  ``n = 0`` maps to the identity.
    """
    n = np.asarray(n, dtype=float)
    d = len(n)
    r = float(np.linalg.norm(n))
    if full:
        ext = ExteriorAlgebra(d)
        if r == 0:
            return np.eye(len(ext.even), dtype=complex)
        c = clifford(n) / r
        return c[np.ix_(ext.odd, ext.even)].astype(complex)
    even, odd = spinor_frame(d, chirality)
    if r == 0:
        return np.eye(even.shape[1], dtype=complex)
    return odd.conj().T @ (clifford(n) / r) @ even


def winding_number(phases: np.ndarray) -> int:
    """Winding of a closed loop of unit complex numbers."""
    steps = np.angle(np.roll(phases, -1) / phases)
    return int(round(steps.sum() / (2 * math.pi)))


# --------------------------------------------------------------------------
# pairing


@dataclass(frozen=True)
class WindowIndex:
    """Index data of one window.

    ``kernel`` / ``cokernel`` count near-kernel right / left singular vectors
    of ``M`` whose bulk weight exceeds one half.
    """

    L: int
    raw_index: int
    kernel: int
    cokernel: int
    n_below: int
    smallest_retained: float
    largest_discarded: float | None
    tau: float
    ill_conditioned: bool
    singular_values: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class PairingResult:
    index: int
    windows: tuple[WindowIndex, ...]
    tau: float
    converged: bool

    @property
    def ladder(self) -> list[tuple[int, int]]:
        return [(w.L, w.raw_index) for w in self.windows]


def default_center(d: int) -> np.ndarray:
    return np.full(d, 0.5)


def phase_blocks(positions: np.ndarray, center: np.ndarray, N: int, chirality: int = -1) -> np.ndarray:
    """Per-site blocks ``1_N (x) u(x - center)``, shape ``(n, N m, N m)``."""
    return np.stack([np.kron(np.eye(N), dirac_phase(x - center, chirality=chirality)) for x in positions])


def phase_operator(positions: np.ndarray, center: np.ndarray, N: int, chirality: int = -1) -> np.ndarray:
    """Dense site-diagonal unitary built from :func:`phase_blocks`."""
    blocks = phase_blocks(positions, center, N, chirality)
    n, k, _ = blocks.shape
    U = np.zeros((n * k, n * k), dtype=complex)
    for i, b in enumerate(blocks):
        U[i * k:(i + 1) * k, i * k:(i + 1) * k] = b
    return U


def pairing_matrix(P: FermiProjection, *, center=None, chirality: int = -1) -> np.ndarray:
    """Dense ``M = Q U Q + (1 - Q)``; reference form of what
    :func:`window_index` factorizes."""
    d = P.window.d
    center = default_center(d) if center is None else np.asarray(center, dtype=float)
    U = phase_operator(P.geometry.positions, center, P.N, chirality)
    m = U.shape[0] // P.matrix.shape[0]
    Q = np.kron(P.matrix, np.eye(m))
    return Q @ U @ Q + (np.eye(len(Q)) - Q)


def auto_tau(singular_values: np.ndarray, ceiling: float = 0.5) -> float:
    """Threshold in the widest logarithmic gap among singular values below
    ``ceiling``; falls back to ``DEFAULT_TAU``."""
    s = np.sort(singular_values)
    s = s[s > 0]
    if len(s) < 2 or s[0] >= ceiling:
        return DEFAULT_TAU
    cand = np.nonzero(s[:-1] < ceiling)[0]
    ratios = s[cand + 1] / s[cand]
    i = cand[np.argmax(ratios)]
    return float(math.sqrt(s[i] * s[i + 1]))


def window_index(P: FermiProjection, tau: float | str = DEFAULT_TAU, *, center=None,
                 bulk_fraction: float = 0.5, chirality: int = -1) -> WindowIndex:
    """Finite-volume index of ``P`` in its own window."""
    geometry = P.geometry
    win = P.window
    d = win.d
    if d % 2:
        raise ValueError("the numeric pairing needs even dimension")
    center = default_center(d) if center is None else np.asarray(center, dtype=float)
    pos = geometry.positions
    N = P.N
    # M is the compression of U to ran Q, plus the identity on its
    # complement; only the compression needs an SVD
    blocks = phase_blocks(pos, center, N, chirality)
    m = blocks.shape[1] // N
    V = P.occupied_frame()
    if m > 1:
        V = np.kron(V, np.eye(m))
    n_sites, k, _ = blocks.shape
    UV = np.einsum("sab,sbr->sar", blocks, V.reshape(n_sites, k, -1)).reshape(V.shape)
    A, s_c, Bh = np.linalg.svd(V.conj().T @ UV)
    left = V @ A
    right_h = Bh @ V.conj().T
    s = np.concatenate([s_c, np.ones(V.shape[0] - V.shape[1])])
    if tau == "auto":
        tau = auto_tau(s)
    tau = float(tau)
    radius = bulk_fraction * win.L
    inside = np.linalg.norm(pos - center, axis=1) <= radius
    site_of = np.repeat(np.arange(len(pos)), N * m)
    bulk_rows = inside[site_of]
    small = np.nonzero(s < tau)[0]
    kernel = cokernel = 0
    for i in small:  # ones from the complement are never small
        if np.sum(np.abs(right_h[i, bulk_rows]) ** 2) > 0.5:
            kernel += 1
        if np.sum(np.abs(left[bulk_rows, i]) ** 2) > 0.5:
            cokernel += 1
    retained = s[s >= tau]
    discarded = s[s < tau]
    ill = bool(np.any((s >= tau / 10) & (s < tau)) and np.any((s >= tau) & (s < 10 * tau)))
    if ill:
        warnings.warn(f"L={win.L}: singular values within a factor 10 on both sides of tau={tau}",
                      stacklevel=2)
    return WindowIndex(
        L=win.L,
        raw_index=kernel - cokernel,
        kernel=kernel,
        cokernel=cokernel,
        n_below=len(small),
        smallest_retained=float(retained.min()) if len(retained) else math.nan,
        largest_discarded=float(discarded.max()) if len(discarded) else None,
        tau=tau,
        ill_conditioned=ill,
        singular_values=s,
    )


def index_pairing(projections: Sequence[FermiProjection], tau: float | str = DEFAULT_TAU, **kw) -> PairingResult:
    """Index ladder over projections on increasing windows.

    The reported index is that of the largest window; the result is flagged
    converged when the last two windows agree.
    """
    if not projections:
        raise ValueError("need at least one window")
    rows = tuple(window_index(P, tau, **kw) for P in sorted(projections, key=lambda p: p.window.L))
    converged = len(rows) >= 2 and rows[-1].raw_index == rows[-2].raw_index
    if not converged:
        warnings.warn(f"index ladder did not converge: {[(r.L, r.raw_index) for r in rows]}", stacklevel=2)
    return PairingResult(rows[-1].raw_index, rows, rows[-1].tau, converged)


@dataclass(frozen=True)
class OracleResult:
    value: float
    radius: float
    sector_sizes: tuple[int, int, int]
    touches_boundary: bool

    @property
    def nearest_integer(self) -> int:
        return int(round(self.value))

    @property
    def distance_to_integer(self) -> float:
        return abs(self.value - round(self.value))


def sectors(positions: np.ndarray, center, radius: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Three 120-degree sectors of the disc, counterclockwise from angle 0."""
    rel = positions - np.asarray(center)
    r = np.linalg.norm(rel, axis=1)
    ang = np.mod(np.arctan2(rel[:, 1], rel[:, 0]), 2 * math.pi)
    out = []
    for a in (0.0, 2 * math.pi / 3, 4 * math.pi / 3):
        out.append(np.nonzero((r <= radius) & (ang >= a) & (ang < a + 2 * math.pi / 3))[0])
    return tuple(out)


def kitaev_chern_oracle(P: FermiProjection, *, radius: float | None = None, center=None) -> OracleResult:
    """Real-space Chern number ``12 pi i sum (P_jk P_kl P_lj - P_jl P_lk P_kj)``
    over ``j, k, l`` in three counterclockwise sectors."""
    win = P.window
    if win.d != 2:
        raise ValueError("the oracle is two-dimensional")
    center = default_center(2) if center is None else np.asarray(center, dtype=float)
    radius = win.L / 2 if radius is None else radius
    A, B, C = sectors(P.geometry.positions, center, radius)
    N = P.N
    idx = [(s[:, None] * N + np.arange(N)).ravel() for s in (A, B, C)]
    Pm = P.matrix
    a, b, c = idx
    t1 = np.trace(Pm[np.ix_(a, b)] @ Pm[np.ix_(b, c)] @ Pm[np.ix_(c, a)])
    t2 = np.trace(Pm[np.ix_(a, c)] @ Pm[np.ix_(c, b)] @ Pm[np.ix_(b, a)])
    value = (12j * math.pi * (t1 - t2)).real
    touches = radius + float(np.max(np.abs(center))) >= win.L - 1
    if touches:
        warnings.warn("oracle sectors reach the window boundary", stacklevel=2)
    return OracleResult(float(value), radius, (len(A), len(B), len(C)), bool(touches))


# --------------------------------------------------------------------------
# experiments


@dataclass(frozen=True)
class PairingExperiment:
    spec: ModelSpec
    disorder: DisorderSpec
    E_F: float
    result: PairingResult
    gaps: tuple[float, ...]
    oracle: OracleResult | None
    decay: object | None


def pairing_experiment(spec: ModelSpec, dis: DisorderSpec, E_F: float, L_list: Sequence[int], *,
                       tau: float | str = DEFAULT_TAU, min_gap: float = DEFAULT_MIN_GAP,
                       oracle: bool = True, decay: bool = False, bulk_fraction: float = 0.5) -> PairingExperiment:
    """Build, check the bulk gap, project and pair on every window of the
    ladder.  A closed gap raises :class:`GapClosedError`."""
    projections = []
    gaps = []
    for L in L_list:
        P, _ = projection_for(replace(spec, L=L), dis, E_F, min_gap=min_gap)
        projections.append(P)
        gaps.append(P.gap.width)
    result = index_pairing(projections, tau, bulk_fraction=bulk_fraction)
    top = projections[-1]
    orc = kitaev_chern_oracle(top) if oracle and spec.d == 2 else None
    dec = decay_class(spec, dis, E_F, L_list[-1], min_gap=min_gap, fallback=top) if decay else None
    return PairingExperiment(spec, dis, E_F, result, tuple(gaps), orc, dec)


def periodic_counterpart(spec: ModelSpec) -> ModelSpec | None:
    """Same model on a periodic window (Landau gauge for magnetic models), or
    ``None`` when the window cannot carry it."""
    if spec.periodic:
        return spec
    try:
        return replace(spec, boundary="periodic", gauge="landau" if spec.kind == "hofstadter" else spec.gauge)
    except ModelError:
        return None


def decay_class(spec: ModelSpec, dis: DisorderSpec, E_F: float, L: int, *, min_gap: float = DEFAULT_MIN_GAP,
                fallback: FermiProjection | None = None):
    """Decay class of the Fermi projection.

    Open windows carry gapless edge channels whose algebraic tails would mask
    the bulk decay, so the periodic counterpart is used when it exists (the
    nearest admissible window size at or above ``L``).  Otherwise rows are
    restricted to the inner half of the open window.
    """
    per = None
    for L2 in range(L, L + 8):
        per = periodic_counterpart(replace(spec, L=L2)) if spec.kind != "delone_laplacian" else None
        if per is not None:
            break
    if per is not None:
        P, _ = projection_for(per, dis, E_F, min_gap=min_gap)
        return classify_decay(decay_profile(P.operator))
    P = fallback if fallback is not None else projection_for(replace(spec, L=L), dis, E_F, min_gap=min_gap)[0]
    return classify_decay(decay_profile(P.operator, inner_region(P.window, 0.5)), window_margin=P.window.L)


def weak_phase_experiment(spec: ModelSpec, dis: DisorderSpec, L_list: Sequence[int] = (8, 12, 16), *,
                          E_F: float = 0.0, **kw) -> PairingExperiment:
    """Pair a stacked SSH insulator; its strong index should vanish."""
    if spec.kind != "ssh_stack" or spec.d != 2:
        raise ModelError("the weak-phase experiment runs on a two-dimensional ssh_stack")
    kw.setdefault("decay", True)
    return pairing_experiment(spec, dis, E_F, L_list, **kw)


__all__ = [
    "ExteriorAlgebra", "creation", "clifford", "dirac_f", "dirac_phase", "right_clifford", "spinor_frame",
    "winding_number", "phase_blocks", "phase_operator", "pairing_matrix", "WindowIndex", "PairingResult", "window_index", "index_pairing", "auto_tau",
    "kitaev_chern_oracle", "OracleResult", "sectors", "pairing_experiment", "weak_phase_experiment",
    "PairingExperiment", "periodic_counterpart", "decay_class", "GapClosedError", "DEFAULT_TAU", "DEFAULT_MIN_GAP",
]
