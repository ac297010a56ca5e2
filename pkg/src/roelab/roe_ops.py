"""Finite-window block operators and the controlled-operator toolkit.

A :class:`BlockOperator` stores the nonzero ``N x N`` blocks ``T[x, y]`` of an
operator on ``l^2(sites, C^N)`` in coordinate (COO) form.  Everything here is
finite-dimensional, so local compactness is automatic; what is measured is
propagation, decay and the behaviour under twisted products.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Mapping

import numpy as np

from .lattice import PointSet, Window

UNIT_TOL = 1e-12
IDENTITY_TOL = 1e-10


class CocycleError(ValueError):
    """A cocycle violated the cocycle identity beyond tolerance."""


def _window_of(geometry) -> Window:
    return geometry if isinstance(geometry, Window) else geometry.window


class BlockOperator:
    """Sparse block matrix over the sites of a window or point set.

    Parameters
    ----------
    geometry : Window or PointSet
        Site set; its order fixes block indices.
    N : int
        Internal dimension.
    rows, cols : array of int
        Site indices of the stored blocks.
    data : complex array, shape ``(nnz, N, N)``
    hermitian : bool
        Hint checked at construction to ``UNIT_TOL``.
    periodic : bool
        Whether displacements wrap around the window (torus geometry).
    """

    __slots__ = ("geometry", "N", "rows", "cols", "data", "hermitian", "periodic")

    def __init__(self, geometry, N: int, rows, cols, data, *, hermitian=False, periodic=False):
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        data = np.asarray(data, dtype=complex).reshape(len(rows), N, N)
        n = geometry.n
        if len(rows) and (rows.min() < 0 or cols.min() < 0 or rows.max() >= n or cols.max() >= n):
            raise IndexError("block key references a site outside the geometry")
        order = np.lexsort((cols, rows))
        rows, cols, data = rows[order], cols[order], data[order]
        if len(rows) > 1:
            key = rows * n + cols
            uniq, start = np.unique(key, return_index=True)
            if len(uniq) != len(key):
                data = np.add.reduceat(data, start, axis=0)
                rows, cols = rows[start], cols[start]
        for arr in (rows, cols, data):
            arr.flags.writeable = False
        self.geometry = geometry
        self.N = N
        self.rows = rows
        self.cols = cols
        self.data = data
        self.periodic = bool(periodic)
        self.hermitian = bool(hermitian)
        if hermitian:
            err = self.hermiticity_error()
            if err > UNIT_TOL:
                raise ValueError(f"operator flagged hermitian but |T - T*| = {err:.3e}")

    # construction -----------------------------------------------------
    @classmethod
    def from_blocks(cls, geometry, N: int, blocks: Mapping[tuple[int, int], np.ndarray], **kw):
        keys = list(blocks)
        rows = [k[0] for k in keys]
        cols = [k[1] for k in keys]
        data = np.array([np.asarray(blocks[k], dtype=complex).reshape(N, N) for k in keys])
        return cls(geometry, N, rows, cols, data.reshape(len(keys), N, N), **kw)

    @classmethod
    def from_dense(cls, geometry, N: int, matrix: np.ndarray, **kw):
        n = geometry.n
        M = np.asarray(matrix, dtype=complex).reshape(n, N, n, N).transpose(0, 2, 1, 3)
        nz = np.any(M != 0, axis=(2, 3))
        rows, cols = np.nonzero(nz)
        return cls(geometry, N, rows, cols, M[rows, cols], **kw)

    @classmethod
    def identity(cls, geometry, N: int = 1, **kw):
        idx = np.arange(geometry.n)
        data = np.broadcast_to(np.eye(N, dtype=complex), (geometry.n, N, N))
        return cls(geometry, N, idx, idx, data, hermitian=True, **kw)

    @classmethod
    def zeros(cls, geometry, N: int = 1, **kw):
        return cls(geometry, N, [], [], np.zeros((0, N, N)), **kw)

    # basic views --------------------------------------------------------
    @property
    def n(self) -> int:
        return self.geometry.n

    @property
    def dim(self) -> int:
        return self.n * self.N

    @property
    def nnz(self) -> int:
        return len(self.rows)

    def block(self, x: int, y: int) -> np.ndarray:
        hit = np.nonzero((self.rows == x) & (self.cols == y))[0]
        if len(hit):
            return self.data[hit[0]].copy()
        return np.zeros((self.N, self.N), dtype=complex)

    def items(self) -> Iterator[tuple[tuple[int, int], np.ndarray]]:
        for x, y, b in zip(self.rows, self.cols, self.data):
            yield (int(x), int(y)), b

    def to_dense(self) -> np.ndarray:
        n, N = self.n, self.N
        M = np.zeros((n, n, N, N), dtype=complex)
        M[self.rows, self.cols] = self.data
        return M.transpose(0, 2, 1, 3).reshape(n * N, n * N)

    def with_data(self, data, rows=None, cols=None, hermitian=None) -> "BlockOperator":
        return BlockOperator(
            self.geometry,
            self.N,
            self.rows if rows is None else rows,
            self.cols if cols is None else cols,
            data,
            hermitian=self.hermitian if hermitian is None else hermitian,
            periodic=self.periodic,
        )

    def drop_zeros(self) -> "BlockOperator":
        keep = np.any(self.data != 0, axis=(1, 2))
        return self.with_data(self.data[keep], self.rows[keep], self.cols[keep])

    # geometry of blocks -------------------------------------------------
    def offsets(self) -> np.ndarray:
        """Integer offsets ``y - x`` of the stored blocks (wrapped if periodic)."""
        labels = self.geometry.labels
        k = labels[self.cols] - labels[self.rows]
        if self.periodic:
            side = _window_of(self.geometry).side
            k = (k + side // 2) % side - side // 2
        return k

    def displacements(self) -> np.ndarray:
        """Real displacement vectors ``y - x`` between block sites."""
        pos = self.geometry.positions
        delta = pos[self.cols] - pos[self.rows]
        if self.periodic:
            side = _window_of(self.geometry).side
            delta = delta - side * np.round(delta / side)
        return delta

    def distances(self) -> np.ndarray:
        return np.linalg.norm(self.displacements(), axis=1)

    def block_norms(self) -> np.ndarray:
        if self.N == 1:
            return np.abs(self.data[:, 0, 0])
        return np.linalg.norm(self.data, ord=2, axis=(1, 2))

    # algebra ----------------------------------------------------------------
    def adjoint(self) -> "BlockOperator":
        return self.with_data(np.conj(self.data.transpose(0, 2, 1)), self.cols, self.rows)

    def hermiticity_error(self) -> float:
        if self.nnz == 0:
            return 0.0
        D = self.to_dense()
        return float(np.max(np.abs(D - D.conj().T)))

    def _check_compatible(self, other: "BlockOperator"):
        if other.geometry is not self.geometry and not _same_geometry(self.geometry, other.geometry):
            raise ValueError("operators live on different windows")
        if other.N != self.N:
            raise ValueError(f"block sizes differ: {self.N} vs {other.N}")

    def __add__(self, other: "BlockOperator") -> "BlockOperator":
        self._check_compatible(other)
        return BlockOperator(
            self.geometry,
            self.N,
            np.concatenate([self.rows, other.rows]),
            np.concatenate([self.cols, other.cols]),
            np.concatenate([self.data, other.data]),
            periodic=self.periodic,
        )

    def __neg__(self) -> "BlockOperator":
        return self.with_data(-self.data)

    def __sub__(self, other: "BlockOperator") -> "BlockOperator":
        return self + (-other)

    def __mul__(self, scalar) -> "BlockOperator":
        return self.with_data(self.data * scalar, hermitian=False)

    __rmul__ = __mul__

    def __matmul__(self, other: "BlockOperator") -> "BlockOperator":
        return twisted_product(self, other, None)

    def norm(self) -> float:
        if self.nnz == 0:
            return 0.0
        return float(np.linalg.norm(self.to_dense(), ord=2))

    def __repr__(self):
        return f"BlockOperator(n={self.n}, N={self.N}, nnz={self.nnz}, periodic={self.periodic})"


def _same_geometry(a, b) -> bool:
    if isinstance(a, Window) and isinstance(b, Window):
        return a == b
    return a.n == b.n and np.array_equal(a.positions, b.positions)


# --------------------------------------------------------------------------
# cocycles and gauges


@dataclass(frozen=True)
class Cocycle:
    """U(1)-valued function ``w(x, z, y)`` of three positions.

    ``evaluator`` is vectorized: it receives three float arrays of shape
    ``(..., d)`` and returns a complex array of shape ``(...)``.
    """

    evaluator: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    d: int
    name: str = "cocycle"

    def __call__(self, x, z, y) -> np.ndarray:
        x, z, y = (np.asarray(a, dtype=float) for a in (x, z, y))
        return np.asarray(self.evaluator(x, z, y), dtype=complex)


@dataclass(frozen=True)
class GaugeFunction:
    """U(1)-valued function ``v(x, y)`` of two positions (vectorized)."""

    evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray]
    d: int
    name: str = "gauge"

    def __call__(self, x, y) -> np.ndarray:
        x, y = (np.asarray(a, dtype=float) for a in (x, y))
        return np.asarray(self.evaluator(x, y), dtype=complex)

    def conj(self) -> "GaugeFunction":
        f = self.evaluator
        return GaugeFunction(lambda x, y: np.conj(f(x, y)), self.d, f"conj({self.name})")


def trivial_cocycle(d: int) -> Cocycle:
    return Cocycle(lambda x, z, y: np.ones(np.broadcast_shapes(x.shape, z.shape, y.shape)[:-1]), d, "trivial")


def trivial_gauge(d: int) -> GaugeFunction:
    return GaugeFunction(lambda x, y: np.ones(np.broadcast_shapes(x.shape, y.shape)[:-1]), d, "trivial")


def coboundary(v: GaugeFunction) -> Cocycle:
    """The cocycle ``w(x, z, y) = v(x, z) v(z, y) / v(x, y)``."""
    return Cocycle(lambda x, z, y: v(x, z) * v(z, y) / v(x, y), v.d, f"d({v.name})")


def random_gauge(window: Window, seed: int) -> GaugeFunction:
    """Gauge with independent uniformly random phases on every site pair."""
    rng = np.random.default_rng(seed)
    table = np.exp(2j * np.pi * rng.random((window.n, window.n)))

    def ev(x, y):
        ix = window.indices_of(np.rint(x).astype(int))
        iy = window.indices_of(np.rint(y).astype(int))
        return table[ix, iy]

    return GaugeFunction(ev, window.d, f"random[{seed}]")


def site_phase_gauge(window: Window, seed: int) -> GaugeFunction:
    """Diagonal gauge ``v(x, y) = g(x) conj(g(y))`` with random site phases ``g``.

    These are exactly the gauges that are algebra automorphisms of the
    untwisted product.
    """
    rng = np.random.default_rng(seed)
    g = np.exp(2j * np.pi * rng.random(window.n))

    def ev(x, y):
        ix = window.indices_of(np.rint(x).astype(int))
        iy = window.indices_of(np.rint(y).astype(int))
        return g[ix] * np.conj(g[iy])

    return GaugeFunction(ev, window.d, f"site-phase[{seed}]")


def signed_area(x, z, y) -> np.ndarray:
    """Oriented area of the planar triangle ``(x, z, y)``."""
    a = z - x
    b = y - x
    return 0.5 * (a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0])


def magnetic_cocycle(flux: float, d: int = 2) -> Cocycle:
    """Magnetic twist ``w(x, z, y) = exp(i * flux * area(x, z, y))``.

    ``flux`` is the phase per unit plaquette.  Signed area is additive under
    triangulation, so the cocycle identity holds exactly.
    """
    if d != 2:
        raise NotImplementedError("magnetic cocycles are implemented for d = 2 only")
    return Cocycle(lambda x, z, y: np.exp(1j * flux * signed_area(x, z, y)), 2, f"magnetic[{flux:.6g}]")


@dataclass(frozen=True)
class CocycleReport:
    ok: bool
    max_violation: float
    samples: int
    max_modulus_error: float = 0.0


def _sample_positions(geometry, rng, shape) -> np.ndarray:
    idx = rng.integers(0, geometry.n, size=shape)
    return geometry.positions[idx]


def cocycle_check(w: Cocycle, window, samples: int = 1000, seed: int = 0) -> CocycleReport:
    """Evaluate ``w(x,z,y) w(x,t,z) = w(x,t,y) w(t,z,y)`` on random quadruples."""
    rng = np.random.default_rng(seed)
    x, t, z, y = (_sample_positions(window, rng, samples) for _ in range(4))
    lhs = w(x, z, y) * w(x, t, z)
    rhs = w(x, t, y) * w(t, z, y)
    viol = float(np.max(np.abs(lhs - rhs))) if samples else 0.0
    mod = float(np.max(np.abs(np.abs(w(x, z, y)) - 1))) if samples else 0.0
    return CocycleReport(viol < IDENTITY_TOL and mod < UNIT_TOL, viol, samples, mod)


def untwist(w: Cocycle, e, *, window=None, samples: int = 1000, seed: int = 0) -> GaugeFunction:
    """Gauge ``v(x, y) = w(x, y, e)`` exhibiting ``w`` as a coboundary.

    The cocycle identity is checked first on ``window`` (default: the box of
    half-width 4); a violation raises :class:`CocycleError`.
    """
    window = window if window is not None else Window(w.d, 4)
    report = cocycle_check(w, window, samples, seed)
    if not report.ok:
        raise CocycleError(
            f"{w.name} is not a cocycle: max violation {report.max_violation:.3e}, "
            f"modulus error {report.max_modulus_error:.3e} over {samples} quadruples"
        )
    e = np.asarray(e, dtype=float)
    return GaugeFunction(lambda x, y: w(x, y, np.broadcast_to(e, np.broadcast_shapes(x.shape, y.shape))), w.d,
                         f"untwist({w.name})")


def reconstruction_error(w: Cocycle, v: GaugeFunction, window, samples: int = 1000, seed: int = 0) -> float:
    """Max of ``|w(x,z,y) - v(x,z) v(z,y) / v(x,y)|`` over sampled triples."""
    rng = np.random.default_rng(seed)
    x, z, y = (_sample_positions(window, rng, samples) for _ in range(3))
    return float(np.max(np.abs(w(x, z, y) - v(x, z) * v(z, y) / v(x, y))))


def apply_gauge(T: BlockOperator, v: GaugeFunction) -> BlockOperator:
    """Multiply every block ``T[x, y]`` by ``v(x, y)``."""
    pos = T.geometry.positions
    phases = v(pos[T.rows], pos[T.cols])
    return T.with_data(T.data * phases[:, None, None], hermitian=False)


# --------------------------------------------------------------------------
# products


def twisted_product(S: BlockOperator, T: BlockOperator, w: Cocycle | None) -> BlockOperator:
    """``(S *_w T)[x, y] = sum_z w(x, z, y) S[x, z] T[z, y]``.

    ``w=None`` is the ordinary product and runs the same summation.
    """
    S._check_compatible(T)
    if S.periodic != T.periodic:
        raise ValueError("cannot multiply periodic and open operators")
    n, N = S.n, S.N
    pos = S.geometry.positions
    acc: dict[tuple[int, int], np.ndarray] = {}
    s_by_col = _group(S.cols)
    t_by_row = _group(T.rows)
    for z in sorted(set(s_by_col) & set(t_by_row)):
        si = s_by_col[z]
        ti = t_by_row[z]
        xs = S.rows[si]
        ys = T.cols[ti]
        prod = np.einsum("aij,bjk->abik", S.data[si], T.data[ti])
        if w is not None:
            wx = w(pos[xs][:, None, :], pos[z][None, None, :], pos[ys][None, :, :])
            prod = prod * wx[:, :, None, None]
        for a, x in enumerate(xs):
            for b, y in enumerate(ys):
                key = (int(x), int(y))
                if key in acc:
                    acc[key] = acc[key] + prod[a, b]
                else:
                    acc[key] = prod[a, b]
    if not acc:
        return BlockOperator.zeros(S.geometry, N, periodic=S.periodic)
    out = BlockOperator.from_blocks(S.geometry, N, acc, periodic=S.periodic)
    return out.drop_zeros()


def _group(keys: np.ndarray) -> dict[int, np.ndarray]:
    out: dict[int, list[int]] = {}
    for i, k in enumerate(keys):
        out.setdefault(int(k), []).append(i)
    return {k: np.array(v) for k, v in out.items()}


def propagation(T: BlockOperator) -> float:
    """Largest distance between the sites of a nonzero block (0 if none)."""
    T = T.drop_zeros()
    if T.nnz == 0:
        return 0.0
    return float(T.distances().max())


# --------------------------------------------------------------------------
# smoothing, decay, localization


def fejer_weights(offsets: np.ndarray, R: float) -> np.ndarray:
    return np.prod(np.clip(1.0 - np.abs(offsets) / R, 0.0, None), axis=-1)


def fejer_smooth(T: BlockOperator, R: float) -> BlockOperator:
    """Multiply ``T[x, y]`` by the product Fejér weight ``prod_j (1 - |x_j - y_j|/R)_+``.

    Blocks with any ``|x_j - y_j| >= R`` become exactly zero and are dropped.
    """
    if R <= 0:
        raise ValueError("cutoff must be positive")
    delta = T.offsets() if isinstance(T.geometry, Window) else T.displacements()
    wts = fejer_weights(delta, R)
    keep = wts > 0
    return T.with_data(T.data[keep] * wts[keep, None, None], T.rows[keep], T.cols[keep])


@dataclass(frozen=True)
class DecayProfile:
    """``k -> sup_n ||T[n, n+k]||`` over the offsets present in a window."""

    entries: dict[tuple[int, ...], float]
    available_radius: float
    d: int

    @classmethod
    def from_function(cls, f: Callable[[float], float], d: int, radius: int) -> "DecayProfile":
        """Synthetic isotropic profile ``k -> f(||k||)`` on ``[-radius, radius]^d``."""
        ks = Window(d, radius).labels
        entries = {tuple(int(c) for c in k): float(f(float(np.linalg.norm(k)))) for k in ks}
        return cls(entries, radius * math.sqrt(d), d)

    def shells(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct radii ``||k||`` and the envelope (max) on each."""
        if not self.entries:
            return np.zeros(0), np.zeros(0)
        ks = np.array(list(self.entries), dtype=float).reshape(len(self.entries), self.d)
        vals = np.array(list(self.entries.values()))
        r = np.round(np.linalg.norm(ks, axis=1), 9)
        radii, inv = np.unique(r, return_inverse=True)
        env = np.zeros(len(radii))
        np.maximum.at(env, inv, vals)
        return radii, env

    def __getitem__(self, k) -> float:
        return self.entries.get(tuple(k), 0.0)


def decay_profile(T: BlockOperator, region: np.ndarray | None = None) -> DecayProfile:
    """Exact decay profile; ``region`` (boolean mask over sites) restricts the
    sup to rows ``n`` inside it."""
    norms = T.block_norms()
    offsets = T.offsets()
    keep = norms > 0
    if region is not None:
        keep &= np.asarray(region)[T.rows]
    norms, offsets = norms[keep], offsets[keep]
    entries: dict[tuple[int, ...], float] = {}
    if len(norms):
        uniq, inv = np.unique(offsets, axis=0, return_inverse=True)
        env = np.zeros(len(uniq))
        np.maximum.at(env, inv.ravel(), norms)
        entries = {tuple(int(c) for c in k): float(v) for k, v in zip(uniq, env)}
    win = _window_of(T.geometry)
    reach = win.L if T.periodic else 2 * win.L
    return DecayProfile(entries, reach * math.sqrt(win.d), win.d)


@dataclass(frozen=True)
class DecayClass:
    """Outcome of :func:`classify_decay`.

    ``kind`` is one of ``banded``, ``exponential``, ``rapid``, ``none`` or
    ``inconclusive``.  Fit diagnostics are always filled when a fit ran.
    """

    kind: str
    band: float | None = None
    rate: float | None = None
    order: float | None = None
    exp_residual: float | None = None
    poly_residual: float | None = None
    n_shells: int = 0
    notes: tuple[str, ...] = field(default_factory=tuple)


def classify_decay(
    p: DecayProfile,
    window_margin: float = 0.0,
    *,
    rapid_order: float = 6.0,
    floor: float = 1e-13,
) -> DecayClass:
    """Classify a decay profile as banded, exponential, rapid or none.

    Shells within ``window_margin`` of the largest offset the window can hold
    are ignored, as are values below ``floor`` times the profile maximum
    (round-off).  Exponential fits regress ``log p`` on ``||k||``; polynomial
    fits regress ``log p`` on ``log(1 + ||k||)``.  The class with the smaller
    RMS residual wins; a polynomial order above ``rapid_order`` counts as
    rapid decay.
    """
    if not p.entries:
        raise ValueError("empty decay profile")
    radii, env = p.shells()
    cutoff = p.available_radius - window_margin
    support = radii[env > 0].max()
    if support < cutoff - 1e-9:
        return DecayClass(
            "banded",
            band=float(support),
            n_shells=int(np.sum(radii <= support)),
            notes=("banded operators have rapid, exponential and holomorphic decay",),
        )
    peak = env.max()
    use = (radii >= 1) & (radii <= cutoff + 1e-9) & (env > floor * peak)
    r, v = radii[use], env[use]
    if len(r) < 4:
        return DecayClass("inconclusive", n_shells=len(r), notes=("fewer than 4 usable shells",))
    logv = np.log(v)
    exp_coef, exp_res = _linfit(r, logv)
    poly_coef, poly_res = _linfit(np.log1p(r), logv)
    rate = -exp_coef[0]
    order = -poly_coef[0]
    common = dict(rate=float(rate), order=float(order), exp_residual=exp_res, poly_residual=poly_res,
                  n_shells=len(r))
    if rate > 0 and exp_res <= poly_res:
        return DecayClass("exponential", **common)
    if order > rapid_order:
        return DecayClass("rapid", **common)
    return DecayClass("none", **common)


def _linfit(x, y) -> tuple[np.ndarray, float]:
    coef = np.polyfit(x, y, 1)
    resid = y - np.polyval(coef, x)
    return coef, float(np.sqrt(np.mean(resid**2)))


@dataclass(frozen=True)
class Localization:
    vector: np.ndarray
    ratio: float
    box_origin: tuple[int, ...]
    box_side: int


def localize_norm(T: BlockOperator, S: float) -> Localization:
    """Best unit vector supported in a sub-box of diameter at most ``S``.

    Sweeps every axis-aligned sub-box of the window whose Euclidean diameter
    is at most ``S`` and returns the top right-singular vector of the
    column-restricted operator achieving the largest ``||T xi|| / ||T||``.
    """
    if S < 1:
        raise ValueError("support diameter must be >= 1")
    win = _window_of(T.geometry)
    d, N = win.d, T.N
    side = min(int(math.floor(S / math.sqrt(d) + 1e-12)) + 1, win.side)
    M = T.to_dense()
    full = np.linalg.norm(M, ord=2)
    if full == 0:
        raise ValueError("zero operator has no norming vector")
    best = (-1.0, None, None)
    labels = win.labels
    for origin in _box_origins(win, side):
        inside = np.all((labels >= origin) & (labels < origin + side), axis=1)
        sites = np.nonzero(inside)[0]
        cols = (sites[:, None] * N + np.arange(N)).ravel()
        _, s, vh = np.linalg.svd(M[:, cols], full_matrices=False)
        if s[0] > best[0]:
            xi = np.zeros(M.shape[1], dtype=complex)
            xi[cols] = vh[0].conj()
            best = (s[0], xi, tuple(int(c) for c in origin))
    return Localization(best[1], float(min(best[0] / full, 1.0)), best[2], side)


def _box_origins(win: Window, side: int) -> np.ndarray:
    count = win.side - side + 1
    return np.indices((count,) * win.d).reshape(win.d, -1).T - win.L


# --------------------------------------------------------------------------
# triplet files


def write_triplets(T: BlockOperator, path) -> None:
    """Write ``T`` as a sparse triplet file.

    Header ``d L N`` (plus ``periodic`` when applicable), then one line
    ``x-index y-index real imag`` per block entry, row-major within blocks.
    Floats use ``repr`` so the round trip is exact.
    """
    win = _window_of(T.geometry)
    lines = [f"{win.d} {win.L} {T.N}" + (" periodic" if T.periodic else "")]
    for (x, y), b in T.items():
        for z in b.ravel():
            lines.append(f"{x} {y} {float(z.real)!r} {float(z.imag)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_triplets(path, geometry=None) -> BlockOperator:
    text = Path(path).read_text().split("\n")
    head = text[0].split()
    d, L, N = (int(t) for t in head[:3])
    periodic = len(head) > 3 and head[3] == "periodic"
    geometry = geometry if geometry is not None else Window(d, L)
    rows = [ln.split() for ln in text[1:] if ln.strip()]
    if len(rows) % (N * N):
        raise ValueError("triplet count is not a multiple of N*N")
    nb = len(rows) // (N * N)
    xs = np.array([int(r[0]) for r in rows[:: N * N]], dtype=np.int64)
    ys = np.array([int(r[1]) for r in rows[:: N * N]], dtype=np.int64)
    vals = np.array([complex(float(r[2]), float(r[3])) for r in rows]).reshape(nb, N, N)
    return BlockOperator(geometry, N, xs, ys, vals, periodic=periodic)


def random_banded(window: Window, N: int, band: int, seed: int) -> BlockOperator:
    """Operator with i.i.d. complex Gaussian blocks on every pair whose
    per-axis offset is at most ``band`` (open boundaries)."""
    rng = np.random.default_rng(seed)
    lab = window.labels
    diff = np.abs(lab[:, None, :] - lab[None, :, :]).max(axis=-1)
    rows, cols = np.nonzero(diff <= band)
    data = rng.standard_normal((len(rows), N, N)) + 1j * rng.standard_normal((len(rows), N, N))
    return BlockOperator(window, N, rows, cols, data)
