"""Damped Newton solver for the discrete minimal surface system.

The iteration descends on the discrete area: the Newton matrix is the
derivative of the residual assembled by colored finite differencing, steps
are accepted by backtracking on the area value, and a gradient direction
serves as fallback whenever the Newton direction is unusable. Boundary
values never change, bit for bit.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .area import discrete_area, minimal_system_residual
from .assembly import colored_stencil_matrix, interior_dof_index
from .grid import DomainGrid, GridMap

__all__ = [
    "SolverConfig",
    "SolveOutcome",
    "ContinuationReport",
    "harmonic_extension",
    "solve_dirichlet",
    "continuation_solve",
]

STATUS_CONVERGED = "converged"
STATUS_MAX_ITERATIONS = "max_iterations"
STATUS_LINE_SEARCH_STALL = "line_search_stall"


@dataclass(frozen=True)
class SolverConfig:
    tol_residual_sup: float = 1e-10
    max_newton_iters: int = 50
    max_fallback_iters: int = 5000
    line_search_factor: float = 0.5
    sufficient_decrease: float = 1e-4
    jacobian_fd_step: float = 1e-7
    max_backtracks: int = 40

    def __post_init__(self):
        if min(self.tol_residual_sup, self.jacobian_fd_step) <= 0:
            raise ValueError("tolerances must be positive")
        if min(self.max_newton_iters, self.max_fallback_iters, self.max_backtracks) <= 0:
            raise ValueError("iteration caps must be positive")
        if not 0 < self.line_search_factor < 1:
            raise ValueError("line search factor must lie in (0, 1)")


@dataclass(frozen=True)
class SolveOutcome:
    solution: GridMap
    converged: bool
    status: str
    iterations: int
    fallback_iterations: int
    residual_sup_norm: float
    residual_l2_norm: float
    area_history: tuple[float, ...]
    init_hash: str
    message: str = ""

    def summary(self) -> dict:
        return {
            "converged": self.converged,
            "status": self.status,
            "iterations": self.iterations,
            "fallback_iterations": self.fallback_iterations,
            "residual_sup_norm": self.residual_sup_norm,
            "residual_l2_norm": self.residual_l2_norm,
            "area_history": list(self.area_history),
            "init_hash": self.init_hash,
            "message": self.message,
        }


def _map_hash(f: GridMap) -> str:
    digest = hashlib.sha256()
    digest.update(repr((f.grid.extents, f.grid.counts, f.m)).encode())
    digest.update(np.ascontiguousarray(f.values).tobytes())
    return digest.hexdigest()


def harmonic_extension(boundary: GridMap) -> GridMap:
    """Componentwise harmonic extension of the boundary values.

    Solves the standard 2n+1 point Laplacian with the given Dirichlet data;
    the default initializer for Dirichlet solves.
    """
    grid = boundary.grid
    node_rank, interior_nodes = interior_dof_index(grid)
    n_int = interior_nodes.shape[0]
    counts = np.array(grid.counts)
    h2 = np.array(grid.spacings) ** 2

    rows, cols, vals = [], [], []
    rhs = np.zeros((n_int, boundary.m))
    ranks = node_rank[tuple(interior_nodes.T)]
    diag = np.sum(2.0 / h2)
    rows.extend(ranks)
    cols.extend(ranks)
    vals.extend(np.full(n_int, diag))
    for ax in range(grid.n):
        for sign in (-1, 1):
            nbr = interior_nodes.copy()
            nbr[:, ax] += sign
            on_boundary = (nbr[:, ax] == 0) | (nbr[:, ax] == counts[ax] - 1)
            nbr_rank = node_rank[tuple(nbr.T)]
            inside = ~on_boundary
            rows.extend(ranks[inside])
            cols.extend(nbr_rank[inside])
            vals.extend(np.full(int(inside.sum()), -1.0 / h2[ax]))
            bvals = boundary.values[tuple(nbr[on_boundary].T)]
            rhs[ranks[on_boundary]] += bvals / h2[ax]
    A = sp.coo_matrix((vals, (rows, cols)), shape=(n_int, n_int)).tocsc()
    sol = spla.spsolve(A, rhs)
    if sol.ndim == 1:
        sol = sol[:, None]
    values = boundary.values.copy()
    values[grid.interior_mask] = sol
    return GridMap(grid=grid, values=values)


def _newton_matrix(f: GridMap, base_residual: np.ndarray, cfg: SolverConfig) -> sp.csr_matrix:
    """Derivative of the residual by colored forward differencing."""
    step = cfg.jacobian_fd_step * (1.0 + float(np.abs(f.values).max()))
    grid = f.grid

    def response(probe: np.ndarray) -> np.ndarray:
        pert = GridMap(grid=grid, values=f.values + step * probe)
        return (minimal_system_residual(pert).residual - base_residual) / step

    return colored_stencil_matrix(response, grid, f.m)


def _line_search(f, direction, area0, slope, res_sup0, cfg):
    """Backtracking on the area value; returns (new map, new area) or None.

    Near the residual floor the true area decrease of a Newton step falls
    below the round-off resolution of the area itself, so a step whose area
    change is within a few ulp of zero is also accepted when it at least
    halves the residual. The recorded history is then nonincreasing up to
    that round-off band.
    """
    lam = 1.0
    floor = 4.0 * np.finfo(float).eps * (1.0 + abs(area0))
    for _ in range(cfg.max_backtracks):
        cand = f.with_interior_values(f.values + lam * direction)
        area = discrete_area(cand)
        if area <= area0 + cfg.sufficient_decrease * lam * slope and area < area0:
            return cand, area
        if area <= area0 + floor:
            res = minimal_system_residual(cand).residual_sup_norm
            if res <= 0.5 * res_sup0:
                return cand, area
        lam *= cfg.line_search_factor
    return None


def solve_dirichlet(
    boundary: GridMap,
    init: GridMap | None = None,
    cfg: SolverConfig | None = None,
) -> SolveOutcome:
    """Solve the Dirichlet problem for the minimal surface system.

    ``boundary`` prescribes the values on the box faces (its interior entries
    seed nothing); ``init`` defaults to the harmonic extension and must agree
    with the boundary data exactly on boundary nodes. Non-convergence is
    reported in the outcome, not raised, so amplitude sweeps can continue.
    """
    cfg = cfg or SolverConfig()
    if init is None:
        init = harmonic_extension(boundary)
    if not init.grid.compatible_with(boundary.grid) or init.m != boundary.m:
        raise ValueError("init and boundary live on different grids")
    if not np.array_equal(
        init.values[init.grid.boundary_mask], boundary.values[boundary.grid.boundary_mask]
    ):
        raise ValueError("init disagrees with boundary data on boundary nodes")

    grid = init.grid
    w = grid.quadrature_weights[..., None]
    init_hash = _map_hash(init)
    f = init
    report = minimal_system_residual(f)
    areas = [report.total_area]
    newton_iters = 0
    fallback_iters = 0
    status = STATUS_CONVERGED
    message = ""

    def finish(converged: bool) -> SolveOutcome:
        final = minimal_system_residual(f)
        return SolveOutcome(
            solution=f,
            converged=converged,
            status=status,
            iterations=newton_iters,
            fallback_iterations=fallback_iters,
            residual_sup_norm=final.residual_sup_norm,
            residual_l2_norm=final.residual_l2_norm,
            area_history=tuple(areas),
            init_hash=init_hash,
            message=message,
        )

    while report.residual_sup_norm > cfg.tol_residual_sup:
        use_fallback = newton_iters >= cfg.max_newton_iters
        direction = None
        if not use_fallback:
            newton_iters += 1
            matrix = _newton_matrix(f, report.residual, cfg)
            rhs = -report.residual[grid.interior_mask].ravel()
            try:
                d = spla.spsolve(matrix.tocsc(), rhs)
                if np.all(np.isfinite(d)):
                    direction = np.zeros_like(f.values)
                    direction[grid.interior_mask] = d.reshape(-1, f.m)
            except RuntimeError:
                direction = None
        if direction is not None:
            # slope of the area along the direction; residual is -grad/w
            slope = -float(np.sum(w * report.residual * direction))
            if slope >= 0:
                direction = None
        if direction is None:
            # gradient descent on the area: direction = residual field
            if use_fallback:
                if fallback_iters >= cfg.max_fallback_iters:
                    status = STATUS_MAX_ITERATIONS
                    message = "iteration caps exhausted"
                    return finish(False)
                fallback_iters += 1
            direction = report.residual
            slope = -float(np.sum(w * report.residual * direction))
        result = _line_search(f, direction, areas[-1], slope, report.residual_sup_norm, cfg)
        if result is None and direction is not report.residual:
            # retry once with the gradient direction before declaring a stall
            direction = report.residual
            slope = -float(np.sum(w * report.residual * direction))
            result = _line_search(f, direction, areas[-1], slope, report.residual_sup_norm, cfg)
        if result is None:
            status = STATUS_LINE_SEARCH_STALL
            message = "no step achieved an area decrease"
            return finish(False)
        f, area = result
        areas.append(area)
        report = minimal_system_residual(f)
        if newton_iters >= cfg.max_newton_iters and fallback_iters >= cfg.max_fallback_iters:
            status = STATUS_MAX_ITERATIONS
            message = "iteration caps exhausted"
            return finish(False)
    return finish(True)


@dataclass(frozen=True)
class ContinuationReport:
    amplitudes: tuple[float, ...]
    outcomes: tuple[SolveOutcome, ...]
    first_failure: float | None

    def summary(self) -> dict:
        return {
            "amplitudes": list(self.amplitudes),
            "first_failure": self.first_failure,
            "outcomes": [o.summary() for o in self.outcomes],
        }


def continuation_solve(
    boundary_family,
    amplitudes,
    cfg: SolverConfig | None = None,
) -> ContinuationReport:
    """Solve along an amplitude sweep, warm-starting each step from the last.

    ``boundary_family(s)`` returns the boundary map at amplitude s. Failed
    steps are recorded and the sweep continues from the harmonic extension of
    the next boundary.
    """
    amplitudes = tuple(float(s) for s in amplitudes)
    if not amplitudes:
        raise ValueError("need at least one amplitude")
    outcomes = []
    prev: GridMap | None = None
    first_failure = None
    for s in amplitudes:
        boundary = boundary_family(s)
        init = None
        if prev is not None:
            carried = boundary.values.copy()
            carried[boundary.grid.interior_mask] = prev.values[boundary.grid.interior_mask]
            init = GridMap(grid=boundary.grid, values=carried)
        outcome = solve_dirichlet(boundary, init=init, cfg=cfg)
        outcomes.append(outcome)
        if not outcome.converged and first_failure is None:
            first_failure = s
        prev = outcome.solution if outcome.converged else None
    return ContinuationReport(
        amplitudes=amplitudes, outcomes=tuple(outcomes), first_failure=first_failure
    )
