"""Pointwise algebraic inequality chains behind the two stability criteria.

At a point with Jacobian stretches lambda_i, any vertical variation enters
the second-variation integrand only through the pairings
C_ij = <d V along the i-th principal direction, j-th target frame vector>.
Writing mu_i = 1 + lambda_i^2, the distance-decreasing chain is

    E1 = sum_i (sum_j C_ij^2)/mu_i
         - 1/2 sum_ij (lambda_j C_ij + lambda_i C_ji)^2 / (mu_i mu_j)
    E2 = sum_ij C_ij^2/mu_i
         - sum_ij (lambda_j^2 C_ij^2 + lambda_i^2 C_ji^2) / (mu_i mu_j)
    E3 = sum_ij (C_ij^2/mu_i) (1 - lambda_j^2)/mu_j

with E1 >= E2 always, E2 = E3 as an unconditional identity, and E3 >= 0
whenever all stretches are at most one. The rank chain keeps the square of
the trace term:

    F0       = sum_ij C_ij^2/mu_i + (sum_i lambda_i C_ii/mu_i)^2
               - 1/2 sum_ij (lambda_j C_ij + lambda_i C_ji)^2/(mu_i mu_j)
    F_diag   = sum_i C_ii^2/mu_i^2
               + sum_{i!=j} lambda_i lambda_j C_ii C_jj/(mu_i mu_j)
    F_offdiag= sum_{i!=j} [C_ij^2 - 2 lambda_i lambda_j C_ij C_ji + C_ji^2]
               / (2 mu_i mu_j)
    F_lower  = 1/(p-1) sum_{i<j, both stretches nonzero}
               (|C_ii|/mu_i - |C_jj|/mu_j)^2

with F0 = F_diag + F_offdiag identically and, under
lambda_i lambda_j <= 1/(p-1) for i != j with at most p nonzero stretches,
F_offdiag >= 0 and F_diag >= F_lower >= 0, hence F0 >= 0.

Everything here is plain algebra on sampled (lambda, C) pairs; the module
certifies the inequalities by randomized campaigns and hunts for
counterexamples outside the hypotheses.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

__all__ = [
    "SpectrumSample",
    "ChainEvaluation",
    "SearchRegime",
    "SearchReport",
    "CampaignReport",
    "eval_dd_chain",
    "eval_rank_chain",
    "dd_chain_terms",
    "rank_chain_terms",
    "chain_scale",
    "run_dd_campaign",
    "run_rank_campaign",
    "counterexample_search",
]

CHAIN_DD = "distance_decreasing"
CHAIN_RANK = "rank"


@dataclass(frozen=True)
class SpectrumSample:
    """A spectrum of stretches, optionally with a rank budget p."""

    lam: np.ndarray
    p: int | None = None

    def __post_init__(self):
        lam = np.atleast_1d(np.asarray(self.lam, dtype=float))
        if lam.ndim != 1 or lam.size < 2:
            raise ValueError("need a 1-d spectrum with n >= 2")
        if np.any(lam < 0) or not np.all(np.isfinite(lam)):
            raise ValueError("stretches must be finite and nonnegative")
        if self.p is not None and int(np.count_nonzero(lam)) > self.p:
            raise ValueError("more nonzero stretches than the rank budget p")
        object.__setattr__(self, "lam", lam)

    @property
    def n(self) -> int:
        return self.lam.size


@dataclass(frozen=True)
class ChainEvaluation:
    """Values of every expression in one chain at a single sample."""

    E1: float | None = None
    E2: float | None = None
    E3: float | None = None
    F0: float | None = None
    F_diag: float | None = None
    F_offdiag: float | None = None
    F_lower: float | None = None
    scale: float = 1.0
    in_hypothesis: bool = True

    def asdict(self) -> dict:
        return {
            k: v
            for k, v in self.__dict__.items()
            if v is not None
        }


def chain_scale(C: np.ndarray) -> np.ndarray:
    """Tolerance scale sum C_ij^2 + 1; keeps zero samples non-vacuous."""
    return np.sum(np.asarray(C) ** 2, axis=(-2, -1)) + 1.0


def dd_chain_terms(lam: np.ndarray, C: np.ndarray, row_slack: np.ndarray | None = None):
    """(E1, E2, E3) for batched spectra (..., n) and pairings (..., n, n).

    E1 instantiates the squared derivative norms at their lower bound
    sum_j C_ij^2; ``row_slack`` adds an optional nonnegative per-row surplus
    to model the slack in that bound (it only enlarges E1).
    """
    lam = np.asarray(lam, dtype=float)
    C = np.asarray(C, dtype=float)
    mu = 1.0 + lam**2
    Csq = C**2
    mu_i = mu[..., :, None]
    mu_j = mu[..., None, :]
    denom = mu_i * mu_j
    first = (Csq / mu_i).sum(axis=(-2, -1))
    slack_term = 0.0
    if row_slack is not None:
        row_slack = np.asarray(row_slack, dtype=float)
        if np.any(row_slack < 0):
            raise ValueError("row_slack must be nonnegative")
        slack_term = (row_slack / mu).sum(axis=-1)
    cross = lam[..., None, :] * C + lam[..., :, None] * np.swapaxes(C, -1, -2)
    E1 = first + slack_term - 0.5 * (cross**2 / denom).sum(axis=(-2, -1))
    lam2 = lam**2
    E2 = first - (
        (lam2[..., None, :] * Csq + lam2[..., :, None] * np.swapaxes(Csq, -1, -2)) / denom
    ).sum(axis=(-2, -1))
    E3 = ((Csq / mu_i) * ((1.0 - lam2) / mu)[..., None, :]).sum(axis=(-2, -1))
    return E1, E2, E3


def rank_chain_terms(lam: np.ndarray, C: np.ndarray, p: int):
    """(F0, F_diag, F_offdiag, F_lower) for batched inputs at rank budget p."""
    if p < 2:
        raise ValueError("rank chain requires p >= 2")
    lam = np.asarray(lam, dtype=float)
    C = np.asarray(C, dtype=float)
    n = lam.shape[-1]
    mu = 1.0 + lam**2
    Csq = C**2
    mu_i = mu[..., :, None]
    denom = mu_i * mu[..., None, :]
    diag = np.diagonal(C, axis1=-2, axis2=-1)
    cross = lam[..., None, :] * C + lam[..., :, None] * np.swapaxes(C, -1, -2)
    trace_term = (lam * diag / mu).sum(axis=-1)
    F0 = (Csq / mu_i).sum(axis=(-2, -1)) + trace_term**2 - 0.5 * (cross**2 / denom).sum(
        axis=(-2, -1)
    )
    t = lam * diag / mu
    F_diag = (diag**2 / mu**2).sum(axis=-1) + (t.sum(axis=-1) ** 2 - (t**2).sum(axis=-1))
    lamlam = lam[..., :, None] * lam[..., None, :]
    T = (Csq + np.swapaxes(Csq, -1, -2) - 2.0 * lamlam * C * np.swapaxes(C, -1, -2)) / (
        2.0 * denom
    )
    idx = np.arange(n)
    T = T.copy()
    T[..., idx, idx] = 0.0
    F_offdiag = T.sum(axis=(-2, -1))
    nz = (lam > 0.0).astype(float)
    a = np.abs(diag) / mu
    count = nz.sum(axis=-1)
    F_lower = (count * (nz * a**2).sum(axis=-1) - ((nz * a).sum(axis=-1)) ** 2) / (p - 1)
    return F0, F_diag, F_offdiag, F_lower


def eval_dd_chain(
    sample: SpectrumSample, C: np.ndarray, row_slack: np.ndarray | None = None
) -> ChainEvaluation:
    """Distance-decreasing chain at one sample."""
    C = np.asarray(C, dtype=float)
    if C.shape != (sample.n, sample.n):
        raise ValueError(f"C must be {sample.n} x {sample.n}")
    if not np.all(np.isfinite(C)):
        raise ValueError("pairing matrix entries must be finite")
    E1, E2, E3 = dd_chain_terms(sample.lam, C, row_slack)
    return ChainEvaluation(
        E1=float(E1),
        E2=float(E2),
        E3=float(E3),
        scale=float(chain_scale(C)),
        in_hypothesis=bool(np.all(sample.lam <= 1.0)),
    )


def eval_rank_chain(sample: SpectrumSample, C: np.ndarray, p: int) -> ChainEvaluation:
    """Rank chain at one sample with rank budget p >= 2."""
    C = np.asarray(C, dtype=float)
    if C.shape != (sample.n, sample.n):
        raise ValueError(f"C must be {sample.n} x {sample.n}")
    if not np.all(np.isfinite(C)):
        raise ValueError("pairing matrix entries must be finite")
    if p < 2:
        raise ValueError("rank chain requires p >= 2")
    if int(np.count_nonzero(sample.lam)) > p:
        raise ValueError("sample has more nonzero stretches than p")
    F0, F_diag, F_offdiag, F_lower = rank_chain_terms(sample.lam, C, p)
    prods = np.multiply.outer(sample.lam, sample.lam)
    np.fill_diagonal(prods, 0.0)
    return ChainEvaluation(
        F0=float(F0),
        F_diag=float(F_diag),
        F_offdiag=float(F_offdiag),
        F_lower=float(F_lower),
        scale=float(chain_scale(C)),
        in_hypothesis=bool(prods.max() <= 1.0 / (p - 1) + 1e-15),
    )


# -- sampling ---------------------------------------------------------------


def _sample_dd(rng: np.random.Generator, n: int, count: int, lam_low: float, lam_high: float):
    lam = rng.uniform(lam_low, lam_high, size=(count, n))
    C = rng.uniform(-1.0, 1.0, size=(count, n, n))
    return lam, C


def _sample_rank(rng: np.random.Generator, n: int, p: int, count: int, lam_high: float):
    """Spectra with at most p nonzero entries and pairwise products capped at 1/(p-1)."""
    lam = rng.uniform(0.0, lam_high, size=(count, n))
    if p < n:
        order = np.argsort(rng.random((count, n)), axis=-1)
        mask = np.zeros((count, n))
        np.put_along_axis(mask, order[:, :p], 1.0, axis=-1)
        lam = lam * mask
    top = np.sort(lam, axis=-1)
    prod = top[:, -1] * top[:, -2]
    bound = 1.0 / (p - 1)
    factor = np.where(prod > bound, np.sqrt(bound / np.maximum(prod, 1e-300)), 1.0)
    lam = lam * factor[:, None]
    C = rng.uniform(-1.0, 1.0, size=(count, n, n))
    return lam, C


@dataclass(frozen=True)
class CampaignReport:
    chain: str
    n: int
    p: int | None
    samples: int
    seed: int
    worst_margins: dict
    identity_max_defect: float | None
    passed: bool

    def summary(self) -> dict:
        return {
            "chain": self.chain,
            "n": self.n,
            "p": self.p,
            "samples": self.samples,
            "seed": self.seed,
            "worst_margins": dict(self.worst_margins),
            "identity_max_defect": self.identity_max_defect,
            "passed": self.passed,
        }


def _chunked(total: int, chunk: int):
    done = 0
    while done < total:
        size = min(chunk, total - done)
        yield size
        done += size


def run_dd_campaign(
    n: int,
    samples: int,
    seed: int,
    lam_high: float = 1.0,
    tol: float = 1e-12,
    threads: int = 1,
    chunk: int = 50_000,
) -> CampaignReport:
    """Randomized verification of the distance-decreasing chain.

    Checks E1 >= E2 and the identity E2 = E3 unconditionally; E3 >= 0 is
    asserted only when the sampling box keeps every stretch at most one.
    Margins are worst cases relative to the per-sample scale.
    """
    seeds = np.random.SeedSequence(seed).spawn(len(list(_chunked(samples, chunk))))
    sizes = list(_chunked(samples, chunk))

    def work(args):
        size, ss = args
        rng = np.random.default_rng(ss)
        lam, C = _sample_dd(rng, n, size, 0.0, lam_high)
        E1, E2, E3 = dd_chain_terms(lam, C)
        scale = chain_scale(C)
        return (
            float(((E1 - E2) / scale).min()),
            float((np.abs(E2 - E3) / scale).max()),
            float((E3 / scale).min()),
        )

    jobs = list(zip(sizes, seeds))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(work, jobs))
    else:
        results = [work(j) for j in jobs]
    min_e1_e2 = min(r[0] for r in results)
    max_identity = max(r[1] for r in results)
    min_e3 = min(r[2] for r in results)
    in_hyp = lam_high <= 1.0
    passed = min_e1_e2 >= -tol and max_identity <= tol
    if in_hyp:
        passed = passed and min_e3 >= -tol
    return CampaignReport(
        chain=CHAIN_DD,
        n=n,
        p=None,
        samples=samples,
        seed=seed,
        worst_margins={
            "min_E1_minus_E2": min_e1_e2,
            "min_E3": min_e3,
            "lam_high": lam_high,
        },
        identity_max_defect=max_identity,
        passed=passed,
    )


def run_rank_campaign(
    n: int,
    p: int,
    samples: int,
    seed: int,
    tol: float = 1e-12,
    threads: int = 1,
    chunk: int = 50_000,
) -> CampaignReport:
    """Randomized verification of the rank chain inside its hypotheses."""
    sizes = list(_chunked(samples, chunk))
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))

    def work(args):
        size, ss = args
        rng = np.random.default_rng(ss)
        lam, C = _sample_rank(rng, n, p, size, lam_high=1.0)
        F0, Fd, Fo, Fl = rank_chain_terms(lam, C, p)
        scale = chain_scale(C)
        return (
            float((F0 / scale).min()),
            float(((F0 - Fd - Fo) / scale).min()),
            float(((Fd - Fl) / scale).min()),
            float((Fo / scale).min()),
            float((Fl / scale).min()),
        )

    jobs = list(zip(sizes, seeds))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(work, jobs))
    else:
        results = [work(j) for j in jobs]
    margins = {
        "min_F0": min(r[0] for r in results),
        "min_F0_minus_split": min(r[1] for r in results),
        "min_Fdiag_minus_Flower": min(r[2] for r in results),
        "min_Foffdiag": min(r[3] for r in results),
        "min_Flower": min(r[4] for r in results),
    }
    passed = all(v >= -tol for v in margins.values())
    return CampaignReport(
        chain=CHAIN_RANK,
        n=n,
        p=p,
        samples=samples,
        seed=seed,
        worst_margins=margins,
        identity_max_defect=None,
        passed=passed,
    )


# -- counterexample search ----------------------------------------------------


@dataclass(frozen=True)
class SearchRegime:
    """Sampling box for a counterexample hunt.

    ``lam_high`` above one (distance-decreasing chain) or
    ``cap_products=False`` (rank chain) step outside the hypotheses; inside
    them the search is expected to come back empty.
    """

    chain: str
    n: int
    lam_low: float = 0.0
    lam_high: float = 1.0
    p: int | None = None
    cap_products: bool = True

    def __post_init__(self):
        if self.chain not in (CHAIN_DD, CHAIN_RANK):
            raise ValueError(f"unknown chain {self.chain!r}")
        if self.chain == CHAIN_RANK and (self.p is None or self.p < 2):
            raise ValueError("rank regime needs p >= 2")
        if self.n < 2:
            raise ValueError("need n >= 2")
        if not 0 <= self.lam_low <= self.lam_high:
            raise ValueError("need 0 <= lam_low <= lam_high")


@dataclass(frozen=True)
class SearchReport:
    regime: SearchRegime
    found: bool
    best_margin: float
    best_lambda: tuple[float, ...] | None
    best_C: tuple[tuple[float, ...], ...] | None
    best_values: ChainEvaluation | None
    samples_evaluated: int
    seed: int

    def summary(self) -> dict:
        out = {
            "chain": self.regime.chain,
            "n": self.regime.n,
            "p": self.regime.p,
            "lam_low": self.regime.lam_low,
            "lam_high": self.regime.lam_high,
            "cap_products": self.regime.cap_products,
            "found": self.found,
            "best_margin": self.best_margin,
            "samples_evaluated": self.samples_evaluated,
            "seed": self.seed,
        }
        if self.found:
            out["best_lambda"] = list(self.best_lambda)
            out["best_C"] = [list(r) for r in self.best_C]
            out["best_values"] = self.best_values.asdict()
        return out


def _dd_margin(lam, C):
    E1, E2, E3 = dd_chain_terms(lam, C)
    return E3 / chain_scale(C)


def _rank_margin(lam, C, p):
    F0, Fd, Fo, Fl = rank_chain_terms(lam, C, p)
    scale = chain_scale(C)
    return np.minimum(np.minimum(F0, Fo), Fd - Fl) / scale


def _regime_margin(regime: SearchRegime, lam, C):
    if regime.chain == CHAIN_DD:
        return _dd_margin(lam, C)
    return _rank_margin(lam, C, regime.p)


def _project(regime: SearchRegime, lam, C):
    lam = np.clip(lam, regime.lam_low, regime.lam_high)
    lam = np.maximum(lam, 0.0)
    C = np.clip(C, -1.0, 1.0)
    if regime.chain == CHAIN_RANK:
        if regime.p < regime.n:
            # keep only the p largest stretches
            order = np.argsort(lam)
            lam = lam.copy()
            lam[order[: regime.n - regime.p]] = 0.0
        if regime.cap_products:
            top = np.sort(lam)
            prod = top[-1] * top[-2]
            bound = 1.0 / (regime.p - 1)
            if prod > bound:
                lam = lam * np.sqrt(bound / prod)
    return lam, C


def _analytic_seeds(regime: SearchRegime):
    """Hand-built candidates worth trying before random search."""
    seeds = []
    n = regime.n
    if regime.chain == CHAIN_DD and regime.lam_high > 1.0:
        lam = np.zeros(n)
        lam[0] = min(regime.lam_high, 2.0)
        C = np.zeros((n, n))
        C[1, 0] = 1.0  # pairs the zero-stretch direction against the large one
        seeds.append((lam, C))
    if regime.chain == CHAIN_RANK and not regime.cap_products:
        lam = np.full(n, min(regime.lam_high, 0.9))
        if regime.p < n:
            lam[regime.p :] = 0.0
        C = np.diag([(-1.0) ** i for i in range(n)]).astype(float)
        seeds.append((lam, C))
    return seeds


def counterexample_search(
    regime: SearchRegime,
    budget: int,
    seed: int = 0,
    polish: bool = True,
    tol: float = 1e-12,
    chunk: int = 50_000,
) -> SearchReport:
    """Random search plus local refinement for chain violations in a regime.

    Returns the most negative certified margin found. Absence of a
    counterexample inside the hypotheses is reported as such, not claimed as
    a proof.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(seed)
    best_margin = np.inf
    best = None
    evaluated = 0

    def consider(lam, C):
        nonlocal best_margin, best
        margin = float(_regime_margin(regime, lam, C))
        if margin < best_margin:
            best_margin = margin
            best = (np.array(lam), np.array(C))

    for lam, C in _analytic_seeds(regime):
        lam, C = _project(regime, lam, C)
        consider(lam, C)
        evaluated += 1

    remaining = budget
    while remaining > 0:
        size = min(chunk, remaining)
        remaining -= size
        evaluated += size
        if regime.chain == CHAIN_DD:
            lam = rng.uniform(regime.lam_low, regime.lam_high, size=(size, regime.n))
            C = rng.uniform(-1.0, 1.0, size=(size, regime.n, regime.n))
        else:
            lam = rng.uniform(regime.lam_low, regime.lam_high, size=(size, regime.n))
            if regime.p < regime.n:
                order = np.argsort(rng.random((size, regime.n)), axis=-1)
                mask = np.zeros((size, regime.n))
                np.put_along_axis(mask, order[:, : regime.p], 1.0, axis=-1)
                lam = lam * mask
            if regime.cap_products:
                top = np.sort(lam, axis=-1)
                prod = top[:, -1] * top[:, -2]
                bound = 1.0 / (regime.p - 1)
                factor = np.where(
                    prod > bound, np.sqrt(bound / np.maximum(prod, 1e-300)), 1.0
                )
                lam = lam * factor[:, None]
            C = rng.uniform(-1.0, 1.0, size=(size, regime.n, regime.n))
        margins = _regime_margin(regime, lam, C)
        k = int(np.argmin(margins))
        if margins[k] < best_margin:
            best_margin = float(margins[k])
            best = (lam[k].copy(), C[k].copy())

    if polish and best is not None and best_margin < 0:
        n = regime.n

        def objective(x):
            lam, C = _project(regime, x[:n], x[n:].reshape(n, n))
            return float(_regime_margin(regime, lam, C))

        x0 = np.concatenate([best[0], best[1].ravel()])
        res = minimize(objective, x0, method="Nelder-Mead", options={"maxiter": 400 * x0.size, "xatol": 1e-10, "fatol": 1e-14})
        lam, C = _project(regime, res.x[:n], res.x[n:].reshape(n, n))
        certified = float(_regime_margin(regime, lam, C))
        if certified < best_margin:
            best_margin = certified
            best = (lam, C)

    found = best_margin < -tol
    values = None
    blam = bC = None
    if best is not None and found:
        blam, bC = best
        if regime.chain == CHAIN_DD:
            values = eval_dd_chain(SpectrumSample(lam=blam), bC)
        else:
            values = eval_rank_chain(SpectrumSample(lam=blam, p=None), bC, regime.p)
    return SearchReport(
        regime=regime,
        found=found,
        best_margin=float(best_margin),
        best_lambda=tuple(float(v) for v in blam) if blam is not None else None,
        best_C=tuple(tuple(float(v) for v in row) for row in bC) if bC is not None else None,
        best_values=values,
        samples_evaluated=evaluated,
        seed=seed,
    )
