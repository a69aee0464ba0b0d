"""Cellular automata on finitely generated groups, with finite-scale verification tools."""

__version__ = "0.1.0"

# Importing these registers their configuration background kinds.
from . import blocking, engine, freeca, groups, lift, patterns, vz  # noqa: E402,F401
