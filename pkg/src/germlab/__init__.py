"""germlab: exact p-adic orbital integrals, Shalika germs and rank-1 endoscopy for sl2."""
from __future__ import annotations

from .localfield import FieldSpec, Fpt, LocalElement, Qp, SquareClass, hilbert_symbol

__all__ = ["FieldSpec", "Fpt", "LocalElement", "Qp", "SquareClass", "hilbert_symbol"]
__version__ = "0.1.0"
