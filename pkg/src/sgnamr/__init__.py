"""Dispersive shallow-water solver with patch-based adaptive mesh refinement."""

from .backend import BACKEND, COMPILED

__all__ = ["BACKEND", "COMPILED"]
__version__ = "0.1.0"
