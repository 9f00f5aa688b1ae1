"""Cell-corner difference calculus behind the variational area machinery.

Every grid cell carries 2**n corner Jacobians built from its edge
differences; a cell-local trapezoidal rule (equal corner weights) turns any
corner integrand into a functional of the nodal values. ``scatter_corner_flux``
is the exact transpose of ``corner_jacobians``, which is what makes every
gradient assembled here variationally consistent down to round-off: the flux
coefficient each edge receives is the arithmetic average of the corner fluxes
sharing that edge.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .grid import DomainGrid


def corner_offsets(n: int) -> tuple[tuple[int, ...], ...]:
    return tuple(itertools.product((0, 1), repeat=n))


def cell_counts(grid: DomainGrid) -> tuple[int, ...]:
    return tuple(c - 1 for c in grid.counts)


def corner_weight(grid: DomainGrid) -> float:
    """Quadrature weight carried by each cell corner."""
    return float(math.prod(grid.spacings)) / 2**grid.n


def corner_jacobians(values: np.ndarray, grid: DomainGrid) -> np.ndarray:
    """Per-cell, per-corner m x n Jacobians from one-sided edge differences.

    ``values`` has shape counts + (m,); the result has shape
    cells + (2**n, m, n). Column i of the corner Jacobian is the first
    difference along the cell edge leaving that corner in direction i, so the
    construction is exact on affine maps.
    """
    n = grid.n
    cells = cell_counts(grid)
    diffs = [np.diff(values, axis=i) / grid.spacings[i] for i in range(n)]
    offs = corner_offsets(n)
    J = np.empty(cells + (len(offs), values.shape[-1], n))
    for ci, nu in enumerate(offs):
        for i in range(n):
            sl = tuple(
                slice(0, cells[j]) if j == i else slice(nu[j], nu[j] + cells[j])
                for j in range(n)
            )
            J[..., ci, :, i] = diffs[i][sl]
    return J


def scatter_corner_flux(flux: np.ndarray, grid: DomainGrid) -> np.ndarray:
    """Exact adjoint of :func:`corner_jacobians`.

    Given per-corner fluxes of shape cells + (2**n, m, n), accumulates
    d<flux, corner_jacobians(dV)> into a nodal array of shape counts + (m,).
    The slice walks mirror those of ``corner_jacobians`` so adjointness holds
    to round-off, independent of any consistency argument.
    """
    n = grid.n
    m = flux.shape[-2]
    cells = cell_counts(grid)
    out = np.zeros(grid.counts + (m,))
    for ci, nu in enumerate(corner_offsets(n)):
        for i in range(n):
            contrib = flux[..., ci, :, i] / grid.spacings[i]
            low = tuple(
                slice(0, cells[j]) if j == i else slice(nu[j], nu[j] + cells[j])
                for j in range(n)
            )
            high = tuple(
                slice(1, cells[j] + 1) if j == i else slice(nu[j], nu[j] + cells[j])
                for j in range(n)
            )
            out[high] += contrib
            out[low] -= contrib
    return out


def corner_metrics(J: np.ndarray):
    """Metric data G = I + J^T J per corner: (G, G^-1, sqrt(det G))."""
    n = J.shape[-1]
    G = np.einsum("...ai,...aj->...ij", J, J) + np.eye(n)
    return G, np.linalg.inv(G), np.sqrt(np.linalg.det(G))
