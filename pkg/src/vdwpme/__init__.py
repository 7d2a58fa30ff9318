"""Finite-element solver for nonlinear diffusion with van der Waals cohesion.

The concentration equation c_t = div(d (1 - gamma c) grad c) is solved through
its porous medium form with Q1 elements, implicit Euler in time and a Picard
(frozen coefficient) iteration per step.
"""

from .assembly import ScalarField
from .mesh import MeshGrid, build_mesh

__all__ = ["MeshGrid", "ScalarField", "build_mesh"]
__version__ = "0.1.0"
