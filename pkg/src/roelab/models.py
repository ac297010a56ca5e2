"""Tight-binding Hamiltonians on finite windows and their resolvents.

Every model is described by on-site blocks and a list of forward hoppings.
The same description feeds the window builder (open or periodic) and the
Bloch-reduced strip builder used for edge spectra.

Sign conventions
----------------
The Laplacian is ``t * (2d - sum of nearest-neighbour shifts)``, so its
spectrum lies in ``[0, 4 d t]``.  A Hofstadter model of flux ``p/q`` uses the
Peierls phase of a negatively charged particle: its hoppings are the clean
Laplacian gauged by ``untwist(magnetic_cocycle(-2 pi p/q))``.  With this
choice the lowest band at flux ``+1/3`` carries index ``+1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable

import numpy as np

from .lattice import PointSet, Window, delone_perturb
from .roe_ops import BlockOperator, apply_gauge, magnetic_cocycle, untwist

KINDS = ("laplacian_potential", "hofstadter", "ssh_stack", "delone_laplacian")
MAX_FLUX_DENOMINATOR = 64
DELONE_CUTOFF = 1.6


class ModelError(ValueError):
    """Invalid model or disorder parameters."""


@dataclass(frozen=True)
class ModelSpec:
    """Parameters of a clean model on the window ``[-L, L]^d``.

    ``flux`` is the flux per plaquette in units of the flux quantum (a
    fraction ``p/q``).  ``axis`` is the 1-based stacking direction of the SSH
    stack; the chains run along the other axis.
    """

    kind: str
    d: int = 2
    L: int = 8
    boundary: str = "open"
    N: int = 1
    hopping: float = 1.0
    flux: Fraction = Fraction(0)
    gauge: str = "cocycle"
    t1: float = 0.5
    t2: float = 1.0
    axis: int = 2
    coupling: float = 0.1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ModelError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        if self.d < 1 or self.L < 0:
            raise ModelError("need d >= 1 and L >= 0")
        if self.boundary not in ("open", "periodic"):
            raise ModelError(f"boundary must be 'open' or 'periodic', got {self.boundary!r}")
        if self.boundary == "periodic" and 2 * self.L + 1 < 3:
            raise ModelError("periodic windows need at least 3 sites per axis")
        object.__setattr__(self, "flux", Fraction(self.flux).limit_denominator(10**6))
        if self.flux.denominator > MAX_FLUX_DENOMINATOR:
            raise ModelError(f"flux denominator {self.flux.denominator} exceeds {MAX_FLUX_DENOMINATOR}")
        if self.kind == "hofstadter":
            if self.d != 2:
                raise ModelError("hofstadter models are two-dimensional")
            if self.gauge not in ("cocycle", "landau"):
                raise ModelError("gauge must be 'cocycle' or 'landau'")
            side = 2 * self.L + 1
            if self.boundary == "periodic" and (self.flux.numerator * side) % self.flux.denominator:
                raise ModelError(
                    f"periodic window of {side} sites cannot carry flux {self.flux}: "
                    f"side must be a multiple of q = {self.flux.denominator}"
                )
        if self.kind == "ssh_stack":
            if self.d not in (1, 2):
                raise ModelError("ssh_stack supports d = 1 (single chain) and d = 2")
            if self.d == 2 and self.axis not in (1, 2):
                raise ModelError("stacking axis must be 1 or 2")
        if self.kind == "delone_laplacian" and self.boundary != "open":
            raise ModelError("delone models use open boundaries")

    @property
    def internal_dim(self) -> int:
        return 2 if self.kind == "ssh_stack" else self.N

    @property
    def window(self) -> Window:
        return Window(self.d, self.L)

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    @property
    def chain_axis(self) -> int:
        """0-based axis along which SSH chains run."""
        if self.d == 1:
            return 0
        return 2 - self.axis


@dataclass(frozen=True)
class DisorderSpec:
    """Disorder amplitudes; ``W`` and ``hopping_W`` are full widths of uniform
    distributions centred at zero, ``positional`` the Delone amplitude."""

    W: float = 0.0
    hopping_W: float = 0.0
    positional: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.W < 0 or self.hopping_W < 0 or self.positional < 0:
            raise ModelError("disorder amplitudes must be nonnegative")
        if self.positional >= 0.5:
            raise ModelError("positional amplitude must stay below 0.5")


CLEAN = DisorderSpec()

_TAG_POTENTIAL = 1
_TAG_HOPPING = 2


def _keyed_uniform(seed: int, tag: int, key: np.ndarray, size: int) -> np.ndarray:
    """Uniform [-1/2, 1/2) numbers that depend only on (seed, tag, key)."""
    entropy = [int(seed) & 0xFFFFFFFF, tag] + [int(c) + (1 << 20) for c in key]
    return np.random.default_rng(np.random.SeedSequence(entropy)).random(size) - 0.5


def site_potential(labels: np.ndarray, N: int, W: float, seed: int) -> np.ndarray:
    """i.i.d. uniform potential in ``[-W/2, W/2]`` per site and orbital."""
    if W == 0:
        return np.zeros((len(labels), N))
    return np.array([W * _keyed_uniform(seed, _TAG_POTENTIAL, lab, N) for lab in labels])


def bond_factor(a: np.ndarray, b: np.ndarray, width: float, seed: int) -> float:
    if width == 0:
        return 1.0
    key = np.concatenate([a, b])
    return 1.0 + width * float(_keyed_uniform(seed, _TAG_HOPPING, key, 1)[0])


# --------------------------------------------------------------------------
# hopping rules

Block = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class HoppingRules:
    """On-site block and forward hoppings ``(offset, block_of_site)``.

    ``block(x)`` is the matrix element ``H[x, x + offset]``; the reverse
    hopping is its adjoint.
    """

    N: int
    onsite: Block
    hops: tuple[tuple[tuple[int, ...], Block], ...] = field(default_factory=tuple)


def _unit(d: int, axis: int) -> tuple[int, ...]:
    return tuple(1 if j == axis else 0 for j in range(d))


def hopping_rules(spec: ModelSpec) -> HoppingRules:
    """Translation-covariant hopping rules of the clean model.

    Hofstadter rules are always in Landau gauge (phases on axis-1 hoppings
    depend on the axis-2 coordinate); the cocycle gauge is applied on whole
    operators instead.
    """
    t, d = spec.hopping, spec.d
    if spec.kind == "laplacian_potential":
        N = spec.N
        onsite = lambda x: 2 * d * t * np.eye(N)
        hops = tuple((_unit(d, a), (lambda x: -t * np.eye(N))) for a in range(d))
        return HoppingRules(N, onsite, hops)
    if spec.kind == "hofstadter":
        phi = 2 * math.pi * float(spec.flux)
        N = spec.N
        onsite = lambda x: 4 * t * np.eye(N)
        hx = lambda x: -t * np.exp(1j * phi * x[1]) * np.eye(N)
        hy = lambda x: -t * np.eye(N, dtype=complex)
        return HoppingRules(N, onsite, ((_unit(2, 0), hx), (_unit(2, 1), hy)))
    if spec.kind == "ssh_stack":
        onsite_m = np.array([[0.0, spec.t1], [spec.t1, 0.0]])
        inter = np.array([[0.0, 0.0], [spec.t2, 0.0]])
        hops = [(_unit(d, spec.chain_axis), lambda x: inter)]
        if d == 2:
            hops.append((_unit(d, spec.axis - 1), lambda x: spec.coupling * np.eye(2)))
        return HoppingRules(2, lambda x: onsite_m, tuple(hops))
    raise ModelError(f"{spec.kind} has no translation-covariant hopping rules")


def assemble(rules: HoppingRules, window: Window, periodic: bool, geometry=None,
             bond: Callable[[np.ndarray, np.ndarray], float] | None = None) -> BlockOperator:
    """Place the rules on every site of ``window``."""
    labels = window.labels
    side = window.side
    blocks: dict[tuple[int, int], np.ndarray] = {}

    def add(key, b):
        blocks[key] = blocks[key] + b if key in blocks else np.asarray(b, dtype=complex)

    for i, x in enumerate(labels):
        add((i, i), rules.onsite(x))
        for offset, fn in rules.hops:
            y = x + np.array(offset)
            if periodic:
                y = (y + window.L) % side - window.L
            elif np.any(np.abs(y) > window.L):
                continue
            j = int(window.indices_of(y))
            b = np.asarray(fn(x), dtype=complex)
            if bond is not None:
                b = b * bond(x, y)
            add((i, j), b)
            add((j, i), b.conj().T)
    return BlockOperator.from_blocks(geometry if geometry is not None else window, rules.N, blocks,
                                     periodic=periodic)


def _delone_kinetic(points: PointSet, t: float, dis: DisorderSpec) -> BlockOperator:
    win = points.window
    offsets = [k for k in Window(win.d, 2).labels if tuple(k) > (0,) * win.d]
    blocks: dict[tuple[int, int], np.ndarray] = {}
    degree = np.zeros(points.n)
    for i, lab in enumerate(points.labels):
        for k in offsets:
            other = lab + k
            if np.any(np.abs(other) > win.L):
                continue
            j = int(win.indices_of(other))
            dist = float(np.linalg.norm(points.positions[j] - points.positions[i]))
            if dist > DELONE_CUTOFF:
                continue
            wgt = t * math.exp(-(dist - 1.0)) * bond_factor(lab, other, dis.hopping_W, dis.seed)
            blocks[(i, j)] = np.array([[-wgt]], dtype=complex)
            blocks[(j, i)] = np.array([[-wgt]], dtype=complex)
            degree[i] += wgt
            degree[j] += wgt
    for i in range(points.n):
        blocks[(i, i)] = np.array([[degree[i]]], dtype=complex)
    return BlockOperator.from_blocks(points, 1, blocks)


def build_parts(spec: ModelSpec, dis: DisorderSpec = CLEAN) -> tuple[BlockOperator, BlockOperator]:
    """Split the Hamiltonian into kinetic part and diagonal potential."""
    window = spec.window
    N = spec.internal_dim
    bond = None
    if dis.hopping_W:
        bond = lambda a, b: bond_factor(a, b, dis.hopping_W, dis.seed)
    if spec.kind == "delone_laplacian":
        points = delone_perturb(window, dis.positional, dis.seed)
        kinetic = _delone_kinetic(points, spec.hopping, dis)
        geometry = points
    elif spec.kind == "hofstadter" and spec.gauge == "cocycle":
        if spec.periodic:
            raise ModelError("the symmetric (cocycle) gauge is not periodic; use gauge = landau")
        clean = replace(spec, kind="laplacian_potential")
        lap = assemble(hopping_rules(clean), window, False, bond=bond)
        v = untwist(magnetic_cocycle(-2 * math.pi * float(spec.flux)), (0.0, 0.0))
        kinetic = apply_gauge(lap, v)
        geometry = window
    else:
        kinetic = assemble(hopping_rules(spec), window, spec.periodic, bond=bond)
        geometry = window
    pot = site_potential(geometry.labels, N, dis.W, dis.seed)
    idx = np.arange(geometry.n)
    V = BlockOperator(geometry, N, idx, idx, np.array([np.diag(p) for p in pot], dtype=complex).reshape(-1, N, N),
                      periodic=kinetic.periodic)
    return kinetic, V


def build_hamiltonian(spec: ModelSpec, dis: DisorderSpec = CLEAN) -> BlockOperator:
    """Hermitian Hamiltonian of ``spec`` with disorder ``dis``."""
    kinetic, V = build_parts(spec, dis)
    H = kinetic + V
    err = H.hermiticity_error()
    if err > 1e-12:
        raise ModelError(f"assembled Hamiltonian is not hermitian (error {err:.3e})")
    return BlockOperator(H.geometry, H.N, H.rows, H.cols, H.data, hermitian=True, periodic=H.periodic).drop_zeros()


def landau_hofstadter(spec: ModelSpec, dis: DisorderSpec = CLEAN) -> BlockOperator:
    """Hofstadter model in Landau gauge; independent cross-check of the
    cocycle-gauge builder."""
    if spec.kind != "hofstadter":
        raise ModelError("landau_hofstadter needs a hofstadter spec")
    return build_hamiltonian(replace(spec, gauge="landau"), dis)


def plaquette_holonomy(H: BlockOperator, corner=(0, 0)) -> complex:
    """Product of hopping phases around the unit square at ``corner``
    (counterclockwise), normalised to modulus one."""
    win = H.geometry if isinstance(H.geometry, Window) else H.geometry.window
    c = np.array(corner)
    loop = [c, c + (1, 0), c + (1, 1), c + (0, 1)]
    idx = [int(win.indices_of(p)) for p in loop]
    prod = 1.0 + 0j
    for a, b in zip(idx, idx[1:] + idx[:1]):
        prod *= H.block(a, b)[0, 0]
    return prod / abs(prod)


# --------------------------------------------------------------------------
# resolvent


@dataclass(frozen=True)
class NeumannResult:
    """Partial Neumann sum for ``(ic + Delta + V)^{-1}``.

    ``residuals[m]`` is ``||(ic + Delta + V) S_m - 1||`` and ``bounds[m]`` the
    a-priori bound ``q^{m+1} / (1 - q)`` with ``q = ||(ic + Delta)^{-1} V||``.
    ``roundoff`` estimates the floating-point floor of the residual
    evaluation; residuals cannot drop below it.
    """

    resolvent: BlockOperator
    contraction: float
    residuals: np.ndarray
    bounds: np.ndarray
    roundoff: float

    def bound_met(self) -> np.ndarray:
        return self.residuals <= self.bounds + self.roundoff

    @property
    def residual(self) -> float:
        return float(self.residuals[-1])

    def measured_rate(self, tail: int = 5) -> float:
        """Geometric mean ratio of successive residuals over the last orders
        still above round-off."""
        r = self.residuals[self.residuals > 1e-13]
        r = r[-(tail + 1):]
        if len(r) < 2:
            return float("nan")
        return float((r[-1] / r[0]) ** (1.0 / (len(r) - 1)))


def neumann_resolvent(delta: BlockOperator, V: BlockOperator, c: float, order: int) -> NeumannResult:
    """Neumann series ``sum_{n<=order} (-(ic + Delta)^{-1} V)^n (ic + Delta)^{-1}``.

    Raises :class:`ModelError` unless ``V`` is block diagonal and the series
    contracts, i.e. ``||(ic + Delta)^{-1} V|| < 1``.
    """
    if c <= 0:
        raise ModelError("c must be positive")
    if order < 0:
        raise ModelError("order must be >= 0")
    if np.any(V.rows != V.cols):
        raise ModelError("potential must be block diagonal")
    D = delta.to_dense()
    Vd = V.to_dense()
    one = np.eye(len(D))
    R0 = np.linalg.inv(1j * c * one + D)
    K = -R0 @ Vd
    q = float(np.linalg.norm(K, ord=2))
    if q >= 1:
        raise ModelError(f"Neumann series does not contract: ||(ic+Delta)^-1 V|| = {q:.4f}")
    full = 1j * c * one + D + Vd
    term = R0.copy()
    S = R0.copy()
    residuals = [np.linalg.norm(full @ S - one, ord=2)]
    for _ in range(order):
        term = K @ term
        S = S + term
        residuals.append(np.linalg.norm(full @ S - one, ord=2))
    bounds = np.array([q ** (m + 1) / (1 - q) for m in range(order + 1)])
    roundoff = 64 * np.finfo(float).eps * np.linalg.norm(full, ord=2) * np.linalg.norm(S, ord=2) * len(D) ** 0.5
    op = BlockOperator.from_dense(delta.geometry, delta.N, S, periodic=delta.periodic)
    return NeumannResult(op, q, np.array(residuals), bounds, float(roundoff))
