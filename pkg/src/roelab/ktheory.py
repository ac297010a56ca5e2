"""Symbolic K-theory bookkeeping over the real and complex numbers.

Groups are formal direct sums of ``Z`` and ``Z/2``; maps are recorded through
their generators and ranks only.

Degree conventions
------------------
``K_i(F)`` is the periodic sequence of the field (period 2 for ``C``, 8 for
``R``).  The Roe algebra of ``Z^d`` satisfies ``K_i(Roe Z^d) = K_{i-d}(F)``.
The torus module follows the Real (KR) labelling in which the ``binom(d, j)``
generators sit in degree ``-j``; a generator in degree ``s`` contributes
``K_{i-s}(F)`` to degree ``i``.  With that labelling the top generator
(degree ``-d``) is sent to the Roe generator in degree ``+d``.  Other
references put the torus generators in degree ``+j``; for complex
coefficients the two agree, for real ones they differ by the sign of ``j``.
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass
from math import comb
from typing import Iterable, Sequence

FIELDS = ("real", "complex")
PERIOD = {"real": 8, "complex": 2}
_BASE = {
    "complex": ("Z", "0"),
    "real": ("Z", "Z/2", "Z/2", "0", "Z", "0", "0", "0"),
}
REAL_CLASSES = ("AI", "BDI", "D", "DIII", "AII", "CII", "C", "CI")
COMPLEX_CLASSES = ("A", "AIII")
CONVENTION = "KR: torus generators in degree -j; K_i(Roe Z^d) = K_{i-d}(F)"


def _check_field(field: str) -> str:
    if field not in FIELDS:
        raise ValueError(f"field must be 'real' or 'complex', got {field!r}")
    return field


def group_name(summands: Sequence[str]) -> str:
    """Canonical text of a direct sum, e.g. ``('Z', 'Z', 'Z/2') -> 'Z^2+Z/2'``."""
    c = Counter(s for s in summands if s != "0")
    parts = []
    for g in ("Z", "Z/2"):
        m = c.get(g, 0)
        if m == 1:
            parts.append(g)
        elif m > 1:
            parts.append(f"({g})^{m}" if "/" in g else f"{g}^{m}")
    return "+".join(parts) if parts else "0"


@dataclass(frozen=True)
class GradedGroup:
    """Periodic graded group; ``summands[i]`` lists the cyclic summands in
    degree ``i`` (an empty tuple is the zero group)."""

    field: str
    period: int
    summands: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        _check_field(self.field)
        if self.period != PERIOD[self.field] or len(self.summands) != self.period:
            raise ValueError("period does not match the field")
        for s in self.summands:
            if any(g not in ("Z", "Z/2") for g in s):
                raise ValueError(f"unknown summand in {s}")
            if self.field == "complex" and "Z/2" in s:
                raise ValueError("complex K-groups have no torsion here")

    def at(self, i: int) -> tuple[str, ...]:
        return self.summands[i % self.period]

    def name(self, i: int) -> str:
        return group_name(self.at(i))

    def rank(self, i: int) -> int:
        return self.at(i).count("Z")

    def shifted(self, k: int) -> "GradedGroup":
        """Degree ``i`` of the result is degree ``i - k`` of ``self``."""
        return GradedGroup(self.field, self.period, tuple(self.at(i - k) for i in range(self.period)))

    def names(self) -> list[str]:
        return [self.name(i) for i in range(self.period)]


def k_of_field(field: str) -> GradedGroup:
    field = _check_field(field)
    base = _BASE[field]
    return GradedGroup(field, PERIOD[field], tuple(() if g == "0" else (g,) for g in base))


def roe_k(d: int, field: str) -> GradedGroup:
    """``K_*`` of the Roe algebra of ``Z^d``: the field's sequence shifted up by ``d``."""
    if d < 0:
        raise ValueError("d must be non-negative")
    return k_of_field(field).shifted(d)


@dataclass(frozen=True)
class KModule:
    """Free graded ``K_*(F)``-module given by ``(degree, multiplicity)`` generators."""

    field: str
    generators: tuple[tuple[int, int], ...]

    def __post_init__(self):
        _check_field(self.field)
        if any(m <= 0 for _, m in self.generators):
            raise ValueError("multiplicities must be positive")

    @property
    def rank(self) -> int:
        return sum(m for _, m in self.generators)

    def expand(self) -> GradedGroup:
        """Underlying graded group: each generator in degree ``s`` contributes
        ``K_{i-s}(F)`` to degree ``i``."""
        base = k_of_field(self.field)
        per = base.period
        out = []
        for i in range(per):
            acc: list[str] = []
            for s, m in self.generators:
                acc.extend(base.at(i - s) * m)
            out.append(tuple(sorted(acc)))
        return GradedGroup(self.field, per, tuple(out))

    def degree_counts(self) -> dict[int, int]:
        """Number of generators in each degree, reduced mod the period."""
        per = PERIOD[self.field]
        c: Counter = Counter()
        for s, m in self.generators:
            c[s % per] += m
        return dict(sorted(c.items()))


def torus_k(d: int, field: str) -> KModule:
    """``binom(d, j)`` generators in degree ``-j`` for ``j = 0..d``."""
    if d < 0:
        raise ValueError("d must be non-negative")
    return KModule(_check_field(field), tuple((-j, comb(d, j)) for j in range(d + 1)))


@dataclass(frozen=True)
class ComparisonMap:
    """Map from the torus module to the Roe K-theory.

    The generators with ``j < d`` span the kernel (weak phases, stacked from
    lower dimensions); the ``j = d`` generator maps isomorphically onto the
    Roe K-theory, sending degree ``-d`` to degree ``+d``.
    """

    d: int
    field: str
    domain: KModule
    kernel: KModule
    image: KModule
    target: GradedGroup
    convention: str = CONVENTION

    @property
    def kernel_rank(self) -> int:
        return self.kernel.rank

    @property
    def image_rank(self) -> int:
        return self.image.rank

    def image_group(self, i: int) -> tuple[str, ...]:
        """Image inside ``K_i(Roe Z^d)``; equal to the whole group."""
        return self.target.at(i)


def comparison_map(d: int, field: str) -> ComparisonMap:
    if d < 1:
        raise ValueError("comparison_map needs d >= 1")
    dom = torus_k(d, field)
    ker = KModule(field, tuple(g for g in dom.generators if g[0] > -d))
    img = KModule(field, tuple(g for g in dom.generators if g[0] == -d))
    return ComparisonMap(d, field, dom, ker, img, roe_k(d, field))


@dataclass(frozen=True)
class MVBoundary:
    """Record of ``K_j(Roe Z^d) -> K_{j-1}(Roe Z^{d-1})``."""

    d: int
    field: str
    degree: int
    source: tuple[str, ...]
    target: tuple[str, ...]
    sign: int = 1
    axiom: str = "K-theory of the Roe algebra of a half-space vanishes"

    @property
    def is_isomorphism(self) -> bool:
        return Counter(self.source) == Counter(self.target)

    def __str__(self) -> str:
        return (f"K_{self.degree}(Roe Z^{self.d})_{self.field[0].upper()} = {group_name(self.source)} -> "
                f"K_{self.degree - 1}(Roe Z^{self.d - 1}) = {group_name(self.target)}")


def mv_boundary(d: int, field: str, degree: int) -> MVBoundary:
    if d < 1:
        raise ValueError("mv_boundary needs d >= 1")
    return MVBoundary(d, _check_field(field), degree, roe_k(d, field).at(degree), roe_k(d - 1, field).at(degree - 1))


def mv_composite(d: int, field: str, degree: int) -> tuple[list[MVBoundary], tuple[str, ...]]:
    """Chain of ``d`` boundaries from ``(d, degree)`` down to ``(0, degree - d)``.

    Returns the chain and the final group, which is ``K_{degree-d}(F)``.
    """
    chain = [mv_boundary(d - k, field, degree - k) for k in range(d)]
    final = chain[-1].target if chain else roe_k(0, field).at(degree)
    return chain, final


@dataclass(frozen=True)
class KitaevRow:
    field: str
    shift: int
    name: str
    entries: tuple[str, ...]


def kitaev_entry(field: str, shift: int, d: int) -> str:
    """Group for Clifford shift ``s`` in dimension ``d``: ``K_{s-d}(F)``."""
    return k_of_field(field).name(shift - d)


def kitaev_table(d_range: Iterable[int] = range(8), fields: Sequence[str] = ("real", "complex")) -> list[KitaevRow]:
    """Ten rows (eight real, two complex) over the requested dimensions."""
    ds = list(d_range)
    rows = []
    for field in fields:
        names = REAL_CLASSES if _check_field(field) == "real" else COMPLEX_CLASSES
        for s, name in enumerate(names):
            rows.append(KitaevRow(field, s, name, tuple(kitaev_entry(field, s, d) for d in ds)))
    return rows


def format_kitaev(rows: Sequence[KitaevRow], d_range: Iterable[int]) -> str:
    """Aligned text table, one line per symmetry class."""
    ds = list(d_range)
    header = ["class", "field", "s"] + [f"d={d}" for d in ds]
    body = [[r.name, r.field, str(r.shift), *r.entries] for r in rows]
    widths = [max(len(x[c]) for x in [header] + body) for c in range(len(header))]
    lines = ["  ".join(x[c].ljust(widths[c]) for c in range(len(header))).rstrip() for x in [header] + body]
    return "\n".join([f"# {CONVENTION}"] + lines) + "\n"


def kitaev_csv(rows: Sequence[KitaevRow], d_range: Iterable[int], extra: dict[str, str] | None = None) -> str:
    ds = list(d_range)
    extra = extra or {}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["class", "field", "shift", "d", "group", *extra])
    for r in rows:
        for d, g in zip(ds, r.entries):
            w.writerow([r.name, r.field, r.shift, d, g, *extra.values()])
    return buf.getvalue()


def format_roe(field: str, dmax: int) -> str:
    """Aligned table of ``K_i(Roe Z^d)`` for ``d = 0..dmax`` over one period."""
    per = PERIOD[_check_field(field)]
    header = ["d"] + [f"K_{i}" for i in range(per)]
    body = [[str(d), *roe_k(d, field).names()] for d in range(dmax + 1)]
    widths = [max(len(x[c]) for x in [header] + body) for c in range(len(header))]
    lines = ["  ".join(x[c].ljust(widths[c]) for c in range(len(header))).rstrip() for x in [header] + body]
    return "\n".join([f"# {CONVENTION}"] + lines) + "\n"


__all__ = [
    "GradedGroup", "KModule", "ComparisonMap", "MVBoundary", "KitaevRow", "k_of_field", "roe_k", "torus_k",
    "comparison_map", "mv_boundary", "mv_composite", "kitaev_entry", "kitaev_table", "format_kitaev",
    "kitaev_csv", "format_roe", "group_name", "REAL_CLASSES", "COMPLEX_CLASSES", "CONVENTION",
]
