"""Vector calculus on top of the grid scalar engines.

All fields use ambient Cartesian components, so these helpers work
unchanged on any grid exposing gradient/laplacian/integrate.  The
Jacobian convention is J[c, d] = d u_c / d x_d.
"""

import numpy as np


def jacobian(grid, u):
    return np.stack([grid.gradient(u[c]) for c in range(3)])


def divergence(grid, u, jac=None):
    j = jacobian(grid, u) if jac is None else jac
    return j[0, 0] + j[1, 1] + j[2, 2]


def curl(grid, u, jac=None):
    j = jacobian(grid, u) if jac is None else jac
    return np.stack([j[2, 1] - j[1, 2], j[0, 2] - j[2, 0], j[1, 0] - j[0, 1]])


def advect(grid, u, v, jac=None):
    """(u . grad) v."""
    j = jacobian(grid, v) if jac is None else jac
    return np.einsum("cd...,d...->c...", j, u)


def vector_laplacian(grid, u):
    return np.stack([grid.laplacian(u[c]) for c in range(3)])


def hessian(grid, f):
    """Second derivatives of a scalar, shape (3, 3, ...)."""
    return jacobian(grid, grid.gradient(f))


def norm(grid, u):
    return np.sqrt(grid.norm2(u))


def dot(a, b):
    return np.einsum("c...,c...->...", a, b)


def cross(a, b):
    return np.stack([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])
