"""First and second variation of the discrete graph area for vertical fields.

Variations move the map, not the surface: along the straight line f + tV the
corner Jacobian is linear in t, so the exact t-derivatives of the discrete
area are available in closed form. With G the corner metric of the base map
and M = J^T B + B^T J (B the corner Jacobian of V) they read

    dA/dt   = sum w sqrt(g) tr(G^-1 J^T B)
    d2A/dt2 = sum w sqrt(g) [tr(G^-1 B^T B) - 1/2 tr(G^-1 M G^-1 M)
                             + 1/4 (tr G^-1 M)^2]

The second line is the stability quadratic form; its polarization gives a
symmetric operator whose smallest eigenvalue in the quadrature-weighted
inner product is the stability index.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._stencils import corner_jacobians, corner_metrics, corner_weight, scatter_corner_flux
from .area import minimal_system_residual
from .assembly import colored_stencil_matrix, interior_dof_index
from .errors import NotMinimalWarning
from .grid import GridMap, induced_metric

__all__ = [
    "VariationField",
    "StabilityReport",
    "EigenConfig",
    "SecondVariationForm",
    "first_variation",
    "second_variation",
    "hessian_apply",
    "stability_index",
]

DEFAULT_MINIMAL_TOL = 1e-8


@dataclass(frozen=True)
class VariationField:
    """Vertical variation direction, supported on interior nodes.

    Boundary entries are forced to exact zeros at construction, which is the
    discrete form of the compact-support requirement.
    """

    grid: object
    values: np.ndarray  # counts + (m,)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape[: self.grid.n] != self.grid.counts:
            raise ValueError("variation values do not match the grid")
        if vals.ndim == self.grid.n:
            vals = vals[..., None]
        if not np.all(np.isfinite(vals)):
            raise ValueError("variation values must be finite")
        vals[self.grid.boundary_mask] = 0.0
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def m(self) -> int:
        return self.values.shape[-1]


def _as_values(V: VariationField | np.ndarray) -> np.ndarray:
    return V.values if isinstance(V, VariationField) else np.asarray(V, dtype=float)


class SecondVariationForm:
    """Precomputed second-variation machinery at a fixed base map.

    Exposes the quadratic form, the weighted operator (Hessian applied to a
    variation), and a sparse assembly of that operator for eigenanalysis.
    The weighted inner product is <V, W> = sum_nodes w sqrt(det G) <V, W>
    with nodewise metric weights, so the eigenproblem discretizes the
    continuum stability operator.
    """

    def __init__(self, f: GridMap, minimal_tol: float = DEFAULT_MINIMAL_TOL, warn: bool = True):
        self.f = f
        self.grid = f.grid
        self.m = f.m
        report = minimal_system_residual(f)
        self.base_residual_sup = report.residual_sup_norm
        if warn and self.base_residual_sup > minimal_tol:
            warnings.warn(
                "second variation evaluated at a non-minimal map "
                f"(residual sup {self.base_residual_sup:.3e} > {minimal_tol:.1e}); "
                "values are diagnostic only",
                NotMinimalWarning,
                stacklevel=3,
            )
        self._J = corner_jacobians(f.values, self.grid)
        _, self._Ginv, self._sqrtg = corner_metrics(self._J)
        self._wc = corner_weight(self.grid)
        node_metric = induced_metric(f)
        w = self.grid.quadrature_weights * node_metric.sqrt_det
        self._node_weight = w
        self._interior = self.grid.interior_mask

    # -- scalar quantities ------------------------------------------------

    def directional_derivative(self, V: VariationField | np.ndarray) -> float:
        """Exact d/dt of the discrete area along f + tV at t = 0."""
        B = corner_jacobians(_as_values(V), self.grid)
        JGi = np.einsum("...ai,...ij->...aj", self._J, self._Ginv)
        return float(self._wc * np.sum(self._sqrtg * np.einsum("...aj,...aj->...", JGi, B)))

    def _corner_terms(self, B: np.ndarray):
        M = np.einsum("...ai,...aj->...ij", self._J, B)
        M = M + np.swapaxes(M, -1, -2)
        GM = np.einsum("...ij,...jk->...ik", self._Ginv, M)
        return M, GM

    def quadratic(self, V: VariationField | np.ndarray) -> float:
        """Exact d2/dt2 of the discrete area along f + tV at t = 0."""
        B = corner_jacobians(_as_values(V), self.grid)
        _, GM = self._corner_terms(B)
        BtB = np.einsum("...ai,...aj->...ij", B, B)
        t1 = np.einsum("...ij,...ij->...", self._Ginv, BtB)
        t2 = 0.5 * np.einsum("...ij,...ji->...", GM, GM)
        tau = np.trace(GM, axis1=-2, axis2=-1)
        return float(self._wc * np.sum(self._sqrtg * (t1 - t2 + 0.25 * tau**2)))

    # -- operator form ----------------------------------------------------

    def apply_values(self, Vvals: np.ndarray) -> np.ndarray:
        """H V as a nodal array; <W, HV>_w equals the polarized quadratic form."""
        B = corner_jacobians(Vvals, self.grid)
        M, GM = self._corner_terms(B)
        tau = np.trace(GM, axis1=-2, axis2=-1)
        JGi = np.einsum("...ai,...ij->...aj", self._J, self._Ginv)
        flux = np.einsum("...ai,...ij->...aj", B, self._Ginv)
        # J G^-1 M G^-1, using M G^-1 = (G^-1 M)^T for symmetric factors
        flux -= np.einsum("...ak,...ik->...ai", JGi, GM)
        flux += 0.5 * tau[..., None, None] * JGi
        flux *= self._sqrtg[..., None, None]
        out = self._wc * scatter_corner_flux(flux, self.grid)
        out = np.where(
            self._interior[..., None], out / self._node_weight[..., None], 0.0
        )
        return out

    def apply(self, V: VariationField) -> VariationField:
        return VariationField(grid=self.grid, values=self.apply_values(_as_values(V)))

    def weighted_inner(self, V: VariationField | np.ndarray, W: VariationField | np.ndarray) -> float:
        prod = np.sum(_as_values(V) * _as_values(W), axis=-1)
        return float(np.sum(self._node_weight * prod))

    def assemble(self) -> tuple[sp.csr_matrix, np.ndarray]:
        """Sparse operator over interior dofs plus the diagonal weight matrix."""
        H_unweighted = colored_stencil_matrix(self.apply_values, self.grid, self.m)
        node_rank, interior_nodes = interior_dof_index(self.grid)
        w_int = self._node_weight[tuple(interior_nodes.T)]
        B_diag = np.repeat(w_int, self.m)
        # symmetric matrix in the weighted pairing: S = B H, so solve S v = theta B v
        S = sp.diags(B_diag) @ H_unweighted
        S = (S + S.T) * 0.5
        return S.tocsr(), B_diag


def first_variation(f: GridMap, V: VariationField, warn: bool = False) -> float:
    """Derivative of the discrete area along the vertical variation V.

    Agrees with -sum_nodes w <residual, V> to round-off because the residual
    is the exact area gradient; vanishes on minimal graphs.
    """
    form = SecondVariationForm(f, warn=warn)
    return form.directional_derivative(V)


def second_variation(
    f: GridMap,
    V: VariationField,
    minimal_tol: float = DEFAULT_MINIMAL_TOL,
    warn: bool = True,
) -> float:
    """Second derivative of the discrete area along the vertical variation V.

    Warns when f is not minimal to tolerance: the value is still the exact
    second t-derivative of the area along f + tV, but off the critical set it
    no longer measures stability.
    """
    return SecondVariationForm(f, minimal_tol=minimal_tol, warn=warn).quadratic(V)


def hessian_apply(f: GridMap, V: VariationField, warn: bool = False) -> VariationField:
    """Stability operator applied to V in the weighted inner product."""
    return SecondVariationForm(f, warn=warn).apply(V)


@dataclass(frozen=True)
class EigenConfig:
    tol: float = 1e-8
    max_iters: int = 400
    seed: int = 0

    def __post_init__(self):
        if self.tol <= 0 or self.max_iters <= 0:
            raise ValueError("eigensolver tolerance and iteration cap must be positive")


@dataclass(frozen=True)
class StabilityReport:
    """Smallest eigenvalue of the stability operator with its eigenvector."""

    min_eigenvalue: float
    eigenvector: VariationField
    rayleigh_history: tuple[float, ...]
    verdict: str  # stable / marginal / unstable
    epsilon: float
    converged: bool
    iterations: int
    eigen_residual: float

    def summary(self) -> dict:
        return {
            "min_eigenvalue": self.min_eigenvalue,
            "verdict": self.verdict,
            "epsilon": self.epsilon,
            "converged": self.converged,
            "iterations": self.iterations,
            "eigen_residual": self.eigen_residual,
            # only the sign of the bottom eigenvalue is computed, so the
            # unstable count is reported as a bound
            "morse_index_bound": "at least 1" if self.verdict == "unstable" else "0",
            "rayleigh_history": list(self.rayleigh_history),
        }


def _gershgorin_lower_bound(S: sp.csr_matrix, B_diag: np.ndarray) -> float:
    sb = np.sqrt(B_diag)
    absS = abs(S)
    row_weighted = absS.dot(1.0 / sb) / sb
    diag = S.diagonal()
    centers = diag / B_diag
    radii = row_weighted - np.abs(diag) / B_diag
    return float(np.min(centers - radii))


def _smallest_eigenpair(S: sp.csr_matrix, B_diag: np.ndarray, cfg: EigenConfig):
    """Block shifted inverse iteration on the pencil S v = theta B v.

    The initial shift sits below the Gershgorin lower bound of the weighted
    pencil, keeping S - sigma B positive definite. A small block with
    Rayleigh-Ritz extraction handles clustered bottom eigenvalues (the flat
    operator carries one copy of the spectrum per target component); once
    the smallest Ritz value settles, the shift is moved next to it so the
    final convergence is fast even when the Gershgorin bound is far away.
    """
    size = B_diag.shape[0]
    block = min(4, size)
    sb = np.sqrt(B_diag)
    lower = _gershgorin_lower_bound(S, B_diag)
    sigma = lower - 1e-2 * (abs(lower) + 1.0)
    B = sp.diags(B_diag)
    lu = spla.splu((S - sigma * B).tocsc())
    rng = np.random.default_rng(cfg.seed)
    X = rng.standard_normal((size, block))

    def b_orthonormalize(Y):
        Q, _ = np.linalg.qr(sb[:, None] * Y)
        return Q / sb[:, None]

    X = b_orthonormalize(X)
    history: list[float] = []
    theta = np.inf
    ritz = None
    converged = False
    resid = np.inf
    refactors = 0
    it = 0
    for it in range(1, cfg.max_iters + 1):
        X = b_orthonormalize(lu.solve(B_diag[:, None] * X))
        SX = S.dot(X)
        ritz_vals, U = np.linalg.eigh(X.T @ SX)
        X = X @ U
        SX = SX @ U
        theta = float(ritz_vals[0])
        ritz = ritz_vals
        history.append(theta)
        r = SX[:, 0] - theta * (B_diag * X[:, 0])
        resid = float(np.sqrt(np.sum(r * r / B_diag)))
        # absolute residual contract in the weighted norm, ||v||_B = 1
        if resid <= cfg.tol:
            converged = True
            break
        settled = len(history) >= 4 and abs(history[-1] - history[-2]) <= 1e-3 * (
            1.0 + abs(theta)
        )
        if settled and refactors < 3 and theta - sigma > 0.3 * (abs(theta) + 1.0):
            gap = float(ritz_vals[-1] - ritz_vals[0]) if block > 1 else abs(theta)
            sigma = theta - max(0.05 * gap, 1e-3 * (1.0 + abs(theta)))
            lu = spla.splu((S - sigma * B).tocsc())
            refactors += 1
    return theta, X[:, 0], history, converged, it, resid


def stability_index(
    f: GridMap,
    cfg: EigenConfig | None = None,
    minimal_tol: float = DEFAULT_MINIMAL_TOL,
    warn: bool = True,
) -> StabilityReport:
    """Smallest eigenvalue of the second-variation form over interior variations.

    The verdict uses the band epsilon = 1e-8 * median weighted diagonal:
    stable above +epsilon, unstable below -epsilon, marginal in between.
    """
    cfg = cfg or EigenConfig()
    form = SecondVariationForm(f, minimal_tol=minimal_tol, warn=warn)
    S, B_diag = form.assemble()
    theta, v, history, converged, iters, resid = _smallest_eigenpair(S, B_diag, cfg)
    epsilon = 1e-8 * float(np.median(np.abs(S.diagonal() / B_diag)))
    if theta > epsilon:
        verdict = "stable"
    elif theta < -epsilon:
        verdict = "unstable"
    else:
        verdict = "marginal"
    vec = np.zeros(f.grid.counts + (f.m,))
    vec[f.grid.interior_mask] = v.reshape(-1, f.m)
    return StabilityReport(
        min_eigenvalue=theta,
        eigenvector=VariationField(grid=f.grid, values=vec),
        rayleigh_history=tuple(history),
        verdict=verdict,
        epsilon=epsilon,
        converged=converged,
        iterations=iters,
        eigen_residual=resid,
    )
