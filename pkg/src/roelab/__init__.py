"""Finite-volume toolkit for coarse-geometric invariants of lattice insulators."""

from __future__ import annotations

__version__ = "0.1.0"
