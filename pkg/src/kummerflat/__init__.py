"""Numerical verification and solution of a glued Ricci-flat structure
on the Kummer surface.

Modules: forms (chart-based exterior calculus), eguchi_hanson (the ALE
model space), gibbons_hawking (the two-center ansatz and its
identification with the model space), kummer (the glued approximate
structure on the resolved torus quotient), solver (weighted norms,
mean-zero inversion, the contraction fixed point, spectral checks),
cli (artifact-producing command-line driver).
"""

from . import eguchi_hanson, forms, gibbons_hawking, kummer, solver

__version__ = "0.1.0"

__all__ = ["forms", "eguchi_hanson", "gibbons_hawking", "kummer", "solver"]
