"""Shared assembly kernels for the nodal solvers.

Both equations are discretized the same way: lumped (trapezoid) mass on
the nodes and one-point quadrature of the flux against cell-center
gradients.  The resulting operator application is matrix free:

    (L v)_i = coeff0 * h^2 * v_i + sum_cells q(grad v) . grad phi_i * h^2

where ``q`` is the (possibly nonlinear) flux evaluated per cell.  With a
scalar or identity diffusion coefficient the stiffness couples each node
to its four diagonal neighbours with nonpositive weights, so the
operator is an M-matrix and the discrete comparison principle holds.
Functions here work on raw ``(n+1, n+1)`` arrays; boundary rows are kept
identically zero by :func:`zero_boundary`.
"""

from __future__ import annotations

import numpy as np

from .grid import cell_gradient_arrays

__all__ = [
    "zero_boundary",
    "scatter_flux",
    "matrix_flux",
    "stiffness_diagonal",
    "lumped_load",
]


def zero_boundary(values: np.ndarray) -> np.ndarray:
    """Zero the boundary ring in place and return the array."""
    values[0, :] = 0.0
    values[-1, :] = 0.0
    values[:, 0] = 0.0
    values[:, -1] = 0.0
    return values


def scatter_flux(qx: np.ndarray, qy: np.ndarray, h: float) -> np.ndarray:
    """Adjoint of the cell-center gradient, scaled by the cell area.

    Returns the nodal array with entries ``sum_cells q . grad phi_i h^2``;
    this is the discrete negative divergence of a per-cell flux.
    """
    n = qx.shape[0]
    out = np.zeros((n + 1, n + 1))
    t = 0.5 * h
    out[:-1, :-1] += t * (-qx - qy)
    out[1:, :-1] += t * (qx - qy)
    out[:-1, 1:] += t * (-qx + qy)
    out[1:, 1:] += t * (qx + qy)
    return out


def matrix_flux(gx, gy, a11, a12, a21, a22):
    """Apply a per-cell 2x2 coefficient to a per-cell gradient."""
    return a11 * gx + a12 * gy, a21 * gx + a22 * gy


def stiffness_diagonal(a11, a12, a21, a22, n: int) -> np.ndarray:
    """Diagonal of the one-point-quadrature stiffness matrix.

    Per cell and corner the diagonal entry is
    ``(a11 + a22 + s*(a12 + a21)) / 4`` with ``s = +1`` on the main
    diagonal corners and ``-1`` on the antidiagonal ones; the ``h``
    factors cancel in two dimensions.
    """
    t_sum = np.broadcast_to(np.asarray((a11 + a22) / 4.0, float), (n, n))
    t_mix = np.broadcast_to(np.asarray((a12 + a21) / 4.0, float), (n, n))
    diag = np.zeros((n + 1, n + 1))
    diag[:-1, :-1] += t_sum + t_mix
    diag[1:, :-1] += t_sum - t_mix
    diag[:-1, 1:] += t_sum - t_mix
    diag[1:, 1:] += t_sum + t_mix
    return diag


def lumped_load(values: np.ndarray, h: float) -> np.ndarray:
    """Trapezoid-rule load vector ``h^2 * values`` with zero boundary."""
    return zero_boundary(values * (h * h))


def linear_operator(coeff0: float, a11, a12, a21, a22, h: float):
    """Matrix-free application of ``coeff0 * mass + stiffness``.

    ``coeff0`` is the zero-order coefficient (lambda or mu); the ``a``
    entries are per-cell arrays (or scalars) of the diffusion matrix.
    """

    def apply(v: np.ndarray) -> np.ndarray:
        gx, gy = cell_gradient_arrays(v, h)
        qx, qy = matrix_flux(gx, gy, a11, a12, a21, a22)
        out = scatter_flux(qx, qy, h)
        out += coeff0 * (h * h) * v
        return zero_boundary(out)

    return apply


def linear_diagonal(coeff0: float, a11, a12, a21, a22, n: int) -> np.ndarray:
    """Diagonal of :func:`linear_operator`, with 1 on the boundary ring."""
    h = 1.0 / n
    diag = stiffness_diagonal(a11, a12, a21, a22, n)
    diag += coeff0 * (h * h)
    diag[0, :] = 1.0
    diag[-1, :] = 1.0
    diag[:, 0] = 1.0
    diag[:, -1] = 1.0
    return diag
