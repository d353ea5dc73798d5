"""One-dimensional spectral building blocks.

Collocation nodes, barycentric differentiation matrices, quadrature
weights and Chebyshev coefficient transforms used by both the channel
and ball grids.  Everything works on arbitrary intervals [a, b].
"""

import numpy as np


def gauss_lobatto(n, a=0.0, b=1.0):
    """Chebyshev-Gauss-Lobatto nodes (ascending) on [a, b]."""
    if n < 2:
        raise ValueError("need at least 2 nodes")
    x = 0.5 * (1.0 - np.cos(np.pi * np.arange(n) / (n - 1)))
    return a + (b - a) * x


def gauss_legendre(n, a=0.0, b=1.0):
    """Gauss-Legendre nodes and weights on [a, b] (no endpoint nodes)."""
    x, w = np.polynomial.legendre.leggauss(n)
    return a + (b - a) * 0.5 * (x + 1.0), 0.5 * (b - a) * w


def clenshaw_curtis_weights(nodes, a=0.0, b=1.0):
    """Quadrature weights for Chebyshev-Gauss-Lobatto nodes on [a, b].

    Built from exact integrals of Chebyshev polynomials, so the rule
    integrates polynomials up to degree n-1 exactly.
    """
    n = len(nodes)
    tmat = coefficient_matrix(n)
    k = np.arange(n)
    moments = np.where(k % 2 == 0, 2.0 / (1.0 - k.astype(float) ** 2 + (k == 1)), 0.0)
    moments[k == 1] = 0.0
    return 0.5 * (b - a) * (moments @ tmat)


def bary_weights(nodes):
    """Barycentric weights, normalised to avoid under/overflow."""
    x = np.asarray(nodes, dtype=float)
    n = len(x)
    logw = np.zeros(n)
    sgn = np.ones(n)
    for i in range(n):
        d = x[i] - np.delete(x, i)
        logw[i] = -np.sum(np.log(np.abs(d)))
        sgn[i] = np.prod(np.sign(d))
    logw -= logw.max()
    return sgn * np.exp(logw)


def diff_matrix(nodes):
    """Differentiation matrix on arbitrary nodes (barycentric form)."""
    x = np.asarray(nodes, dtype=float)
    n = len(x)
    w = bary_weights(x)
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    d = (w[None, :] / w[:, None]) / dx
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, -d.sum(axis=1))
    return d


def interp_row(nodes, xq):
    """Row vector evaluating the interpolant of nodal values at xq."""
    x = np.asarray(nodes, dtype=float)
    w = bary_weights(x)
    d = xq - x
    hit = np.isclose(d, 0.0, atol=1e-300)
    if hit.any():
        row = np.zeros_like(x)
        row[np.argmax(hit)] = 1.0
        return row
    c = w / d
    return c / c.sum()


def coefficient_matrix(n):
    """Matrix sending values at n Gauss-Lobatto nodes (ascending on any
    interval) to Chebyshev coefficients."""
    m = n - 1
    j = np.arange(n)
    k = np.arange(n)
    # ascending nodes correspond to theta = pi*(m-j)/m
    theta = np.pi * (m - j) / m
    c = np.cos(np.outer(k, theta))
    scale = np.full(n, 2.0 / m)
    scale[0] = 1.0 / m
    scale[m] = 1.0 / m
    edge = np.ones(n)
    edge[0] = 0.5
    edge[m] = 0.5
    return scale[:, None] * c * edge[None, :]


def round_tail(c, rel=1e-14, axis=-1):
    """Zero coefficients below `rel` times the per-pencil maximum.

    Rounding noise in trailing spectral coefficients is amplified by
    high powers of the degree under repeated differentiation; clearing
    everything under the relative floor keeps derivative roundoff at
    the scale of the kept coefficients, while leaving marginally
    resolved spectra (whose tails are genuine) untouched.
    """
    m = np.max(np.abs(c), axis=axis, keepdims=True)
    return np.where(np.abs(c) >= rel * m, c, 0.0)


def cheb_eval(coeffs, x, a=0.0, b=1.0):
    """Evaluate a Chebyshev series (coefficients on [a, b]) at x."""
    xi = 2.0 * (np.asarray(x, dtype=float) - a) / (b - a) - 1.0
    return np.polynomial.chebyshev.chebval(xi, coeffs)


def tail_fraction(coeffs, frac=0.25):
    """Relative weight of the trailing `frac` of a coefficient vector.

    Used as a resolution diagnostic: a well-resolved field has all of
    its coefficient mass well away from the truncation end.
    """
    c = np.abs(np.asarray(coeffs))
    total = c.sum()
    if total == 0.0:
        return 0.0
    ntail = max(1, int(len(c) * frac))
    return c[-ntail:].sum() / total
