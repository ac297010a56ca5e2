"""Lattice geometry: finite windows of Z^d, half-spaces, stacking embeddings
and Delone point sets.

Sites are integer tuples.  A window ``[-L, L]^d`` lists its sites in
lexicographic order (first coordinate slowest), and that order fixes every
matrix index used elsewhere in the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

Site = tuple[int, ...]


@dataclass(frozen=True)
class Window:
    """Centered box ``[-L, L]^d`` of lattice sites."""

    d: int
    L: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")
        if self.L < 0:
            raise ValueError(f"half-width must be >= 0, got {self.L}")

    @property
    def side(self) -> int:
        return 2 * self.L + 1

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.side,) * self.d

    @property
    def n(self) -> int:
        return self.side**self.d

    @cached_property
    def labels(self) -> np.ndarray:
        """Integer site coordinates, shape ``(n, d)``, lexicographic."""
        grids = np.indices(self.shape).reshape(self.d, -1).T
        out = grids - self.L
        out.flags.writeable = False
        return out

    @cached_property
    def positions(self) -> np.ndarray:
        out = self.labels.astype(float)
        out.flags.writeable = False
        return out

    def sites(self) -> list[Site]:
        return [tuple(int(c) for c in row) for row in self.labels]

    def site_at(self, index: int) -> Site:
        return tuple(int(c) for c in self.labels[index])

    def index_of(self, site: Sequence[int]) -> int:
        site = tuple(site)
        if len(site) != self.d or any(abs(c) > self.L for c in site):
            raise KeyError(f"site {site} outside window d={self.d}, L={self.L}")
        return int(np.ravel_multi_index(tuple(c + self.L for c in site), self.shape))

    def indices_of(self, coords: np.ndarray) -> np.ndarray:
        """Vectorized ``index_of`` for an integer array of shape ``(..., d)``."""
        coords = np.asarray(coords, dtype=int)
        shifted = np.moveaxis(coords + self.L, -1, 0)
        return np.ravel_multi_index(tuple(shifted), self.shape)

    def contains(self, coords: np.ndarray) -> np.ndarray:
        coords = np.asarray(coords)
        return np.all(np.abs(coords) <= self.L, axis=-1)

    @property
    def diameter(self) -> float:
        return 2 * self.L * np.sqrt(self.d)


@dataclass(frozen=True)
class PointSet:
    """Finite point set in R^d, each point tagged with the lattice site it
    was generated from.

    ``r_min`` is the smallest pairwise distance and ``R_cov`` the covering
    radius with respect to ``window``.
    """

    positions: np.ndarray
    labels: np.ndarray
    window: Window
    r_min: float
    R_cov: float

    @property
    def d(self) -> int:
        return self.window.d

    @property
    def n(self) -> int:
        return len(self.positions)

    def indices_of(self, coords: np.ndarray) -> np.ndarray:
        return self.window.indices_of(coords)


@dataclass(frozen=True)
class HalfSpaceSpec:
    """Half-space ``x_k >= 0`` (side=+1) or ``x_k <= 0`` (side=-1); ``k`` is
    1-based."""

    direction: int
    side: int = field(default=1)

    def __post_init__(self):
        if self.direction < 1:
            raise ValueError("direction is a 1-based axis index")
        if self.side not in (1, -1):
            raise ValueError("side must be +1 or -1")


def window_sites(d: int, L: int) -> list[Site]:
    """All sites of ``[-L, L]^d`` in lexicographic order."""
    return Window(d, L).sites()


def _as_points(Y) -> np.ndarray:
    if isinstance(Y, (PointSet, Window)):
        return np.asarray(Y.positions, dtype=float)
    pts = np.asarray(Y, dtype=float)
    return pts.reshape(len(pts), -1) if pts.size else pts.reshape(0, 0)


def is_coarsely_dense(Y, X: Window, R: float) -> bool:
    """True iff every site of ``X`` lies within distance ``R`` of ``Y``.

    ``Y`` may be a :class:`PointSet`, a :class:`Window` or an array of
    positions.
    """
    pts = _as_points(Y)
    if X.n == 0:
        return True
    if len(pts) == 0:
        return False
    dist, _ = cKDTree(pts).query(X.positions)
    return bool(np.all(dist <= R + 1e-12))


def stack_embed(k: int, site: Sequence[int]) -> Site:
    """Coordinate embedding Z^{d-1} -> Z^d inserting 0 at (1-based) slot k."""
    site = tuple(int(c) for c in site)
    d = len(site) + 1
    if not 1 <= k <= d:
        raise ValueError(f"axis {k} out of range 1..{d}")
    return site[: k - 1] + (0,) + site[k - 1 :]


def delone_perturb(window: Window, amplitude: float, seed: int) -> PointSet:
    """Displace every window site by an i.i.d. uniform vector in
    ``[-amplitude, amplitude]^d``.

    Amplitudes below 1/2 keep the minimal separation at least
    ``1 - 2*amplitude`` (componentwise argument along the axis where the two
    sites differ), so the result is Delone without rejection sampling.
    """
    if not 0 <= amplitude < 0.5:
        raise ValueError(f"amplitude must lie in [0, 0.5), got {amplitude}")
    rng = np.random.default_rng(seed)
    labels = window.labels
    if amplitude == 0:
        positions = labels.astype(float)
    else:
        positions = labels + rng.uniform(-amplitude, amplitude, size=labels.shape)
    positions.flags.writeable = False
    if window.n > 1:
        dist, _ = cKDTree(positions).query(positions, k=2)
        r_min = float(dist[:, 1].min())
    else:
        r_min = float("inf")
    R_cov = float(cKDTree(positions).query(window.positions)[0].max())
    return PointSet(positions, labels, window, r_min, R_cov)


def half_space_sites(window: Window, spec: HalfSpaceSpec) -> list[Site]:
    if spec.direction > window.d:
        raise ValueError(f"axis {spec.direction} exceeds dimension {window.d}")
    coord = window.labels[:, spec.direction - 1]
    keep = coord >= 0 if spec.side == 1 else coord <= 0
    return [tuple(int(c) for c in row) for row in window.labels[keep]]
