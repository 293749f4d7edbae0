"""Quadrature helpers: product rules on spheres, composite Gauss panels,
and interpolation through panel nodes."""

from functools import lru_cache

import numpy as np
from scipy.special import gamma, roots_jacobi


def sphere_area(N):
    """Surface measure of the unit sphere in R^N, 2 pi^(N/2) / Gamma(N/2)."""
    return 2.0 * np.pi ** (N / 2.0) / gamma(N / 2.0)


@lru_cache(maxsize=64)
def _sphere_rule(N, order):
    if N < 2:
        raise ValueError("sphere rule needs N >= 2")
    if N == 2:
        m = 2 * order
        phi = 2.0 * np.pi * np.arange(m) / m
        pts = np.column_stack([np.cos(phi), np.sin(phi)])
        return pts, np.full(m, 2.0 * np.pi / m)
    d = N - 1
    a = (d - 2) / 2.0
    t, wt = roots_jacobi(order, a, a)
    sub_pts, sub_w = _sphere_rule(N - 1, order)
    s = np.sqrt(1.0 - t ** 2)
    pts = np.concatenate(
        [np.column_stack([np.full(len(sub_w), ti), si * sub_pts]) for ti, si in zip(t, s)]
    )
    w = np.concatenate([wi * sub_w for wi in wt])
    return pts, w


def sphere_rule(N, order=12):
    """Product Gauss rule on the unit sphere S^{N-1} in R^N.

    Returns ``(points, weights)``; the weights sum to ``sphere_area(N)``.
    Polar angles use Gauss-Jacobi nodes in cos(angle), the last angle is
    uniform, so the rule is exact for polynomials of degree < order in each
    angular variable.
    """
    pts, w = _sphere_rule(int(N), int(order))
    return pts.copy(), w.copy()


@lru_cache(maxsize=16)
def _leggauss(k):
    return np.polynomial.legendre.leggauss(k)


def gauss_panels(edges, k=16):
    """Composite k-point Gauss-Legendre nodes and weights on ``edges``."""
    x, w = _leggauss(k)
    edges = np.asarray(edges, dtype=float)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * x
    weights = 0.5 * (b - a) * w
    return nodes.ravel(), weights.ravel()


def panel_grid(edges, k=16):
    """Grid laid out as ``edge, k Gauss nodes, edge, ..., edge``.

    Integrals over the whole range use only the Gauss nodes; the edges
    carry boundary values.  Returns ``(grid, weights)`` with zero weight on
    the edges.
    """
    edges = np.asarray(edges, dtype=float)
    nodes, weights = gauss_panels(edges, k)
    P = len(edges) - 1
    grid = np.empty(P * (k + 1) + 1)
    wgrid = np.zeros_like(grid)
    grid[:: k + 1] = edges
    for i in range(P):
        sl = slice(i * (k + 1) + 1, (i + 1) * (k + 1))
        grid[sl] = nodes[i * k:(i + 1) * k]
        wgrid[sl] = weights[i * k:(i + 1) * k]
    return grid, wgrid


def panel_weights(grid, k):
    """Recover the quadrature weights of a grid built by :func:`panel_grid`."""
    grid = np.asarray(grid, dtype=float)
    if (len(grid) - 1) % (k + 1):
        raise ValueError("grid length does not match a panel layout")
    edges = grid[:: k + 1]
    return panel_grid(edges, k)[1]


def barycentric_weights(x):
    x = np.asarray(x, dtype=float)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    # rescale to avoid overflow for many nodes on a short interval
    scale = (x.max() - x.min()) / 4.0 if len(x) > 1 else 1.0
    return 1.0 / np.prod(diff / scale, axis=1)


def barycentric_eval(x, f, t):
    """Evaluate the interpolating polynomial through ``(x, f)`` at ``t``."""
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    w = barycentric_weights(x)
    out = np.empty_like(t)
    for j, tj in enumerate(t):
        d = tj - x
        hit = np.nonzero(d == 0.0)[0]
        if hit.size:
            out[j] = f[hit[0]]
            continue
        c = w / d
        out[j] = np.dot(c, f) / c.sum()
    return out
