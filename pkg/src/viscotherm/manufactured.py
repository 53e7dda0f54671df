"""Closed-form fields for convergence studies.

The product sine bump vanishes on the boundary and has a matching load
for any screened Laplace operator with unit diffusion, which makes it
the standard probe for discretization order on both equations.
"""

from __future__ import annotations

import numpy as np

from .grid import Mesh, ScalarField

__all__ = ["sine_field", "sine_load"]


def sine_field(mesh: Mesh) -> ScalarField:
    """sin(pi x) sin(pi y) sampled at the nodes."""
    X, Y = mesh.node_grid()
    return ScalarField(mesh, np.sin(np.pi * X) * np.sin(np.pi * Y))


def sine_load(mesh: Mesh, coeff0: float) -> ScalarField:
    """Load whose exact solution is the sine bump.

    For the operator coeff0 * v - div(grad v) with homogeneous Dirichlet
    conditions the exact solution of ``sine_load(mesh, coeff0)`` is
    ``sine_field(mesh)``, since the bump is a Laplace eigenfunction with
    eigenvalue 2 pi^2.
    """
    bump = sine_field(mesh)
    return ScalarField(mesh, (coeff0 + 2.0 * np.pi**2) * bump.values)
