"""Bounded soft-pulse synthesis for two coupled heteronuclear spins."""

from .frame import SystemParams
from .pipeline import compile_target, decompose

__all__ = ["SystemParams", "compile_target", "decompose"]
__version__ = "0.1.0"
