"""Spectral toolkit for rotating traveling waves on a capillary liquid drop.

Computes nontrivial rotating profiles bifurcating from the sphere, evolves
the drop's Hamiltonian dynamics, and verifies the conserved quantities and
structural identities of the underlying free-boundary problem.
"""

from . import threads as _threads  # pins BLAS pools; see module docstring

__version__ = "0.1.0"
