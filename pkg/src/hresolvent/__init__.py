"""Heisenberg-group horizontal calculus, Hardy inequalities and uniform
resolvent estimates, checked numerically."""

__version__ = "0.1.0"
