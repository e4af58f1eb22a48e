"""Relative critical points of invariant functions under Lie group actions."""

from relcrit import critsolve, geometry, invariants, lie, systems

__version__ = "0.1.0"

__all__ = ["critsolve", "geometry", "invariants", "lie", "systems"]
