import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from minsurf import (
    SearchRegime,
    SpectrumSample,
    counterexample_search,
    eval_dd_chain,
    eval_rank_chain,
    run_dd_campaign,
    run_rank_campaign,
)
from minsurf.chains import chain_scale, dd_chain_terms, rank_chain_terms


def test_dd_chain_zero_pairings():
    out = eval_dd_chain(SpectrumSample(lam=[0.3, 0.7]), np.zeros((2, 2)))
    assert out.E1 == out.E2 == out.E3 == 0.0


def test_dd_chain_unit_stretches_make_E3_vanish(rng):
    C = rng.uniform(-1, 1, (2, 2))
    out = eval_dd_chain(SpectrumSample(lam=[1.0, 1.0]), C)
    assert out.E3 == pytest.approx(0.0, abs=1e-15)


def test_dd_chain_analytic_witness():
    # stretches (2, 0) with the only pairing against the stretched direction:
    # E3 = (1/mu_2) * (1 - lambda_1^2)/mu_1 = -3/5
    C = np.zeros((2, 2))
    C[1, 0] = 1.0
    out = eval_dd_chain(SpectrumSample(lam=[2.0, 0.0]), C)
    assert out.E3 == pytest.approx(-0.6, rel=1e-14)
    assert not out.in_hypothesis


def test_rank_chain_trivial_arithmetic():
    out = eval_rank_chain(SpectrumSample(lam=[1.0, 1.0]), np.eye(2), p=2)
    assert out.F0 == pytest.approx(1.0, rel=1e-14)
    assert out.F_diag == pytest.approx(1.0, rel=1e-14)
    assert out.F_offdiag == pytest.approx(0.0, abs=1e-15)
    assert out.F_lower == pytest.approx(0.0, abs=1e-15)


def test_rank_chain_rejects_small_p():
    with pytest.raises(ValueError):
        eval_rank_chain(SpectrumSample(lam=[0.5, 0.5]), np.eye(2), p=1)


def test_spectrum_sample_validation():
    with pytest.raises(ValueError):
        SpectrumSample(lam=[-0.1, 0.5])
    with pytest.raises(ValueError):
        SpectrumSample(lam=[0.5, 0.5, 0.5], p=2)


@given(
    lam=hnp.arrays(np.float64, 3, elements=st.floats(0, 5)),
    C=hnp.arrays(np.float64, (3, 3), elements=st.floats(-3, 3)),
)
@settings(max_examples=300, deadline=None)
def test_identity_E2_equals_E3_unconditionally(lam, C):
    # pure algebra: must hold for every input, not only under hypotheses
    E1, E2, E3 = dd_chain_terms(lam, C)
    scale = chain_scale(C) + float(np.sum(lam**2))
    assert abs(E2 - E3) <= 1e-12 * scale
    assert E1 - E2 >= -1e-12 * scale


@given(
    lam=hnp.arrays(np.float64, 4, elements=st.floats(0, 1)),
    C=hnp.arrays(np.float64, (4, 4), elements=st.floats(-1, 1)),
)
@settings(max_examples=300, deadline=None)
def test_E3_nonnegative_inside_hypotheses(lam, C):
    _, _, E3 = dd_chain_terms(lam, C)
    assert E3 >= -1e-12 * chain_scale(C)


@given(
    lam=hnp.arrays(np.float64, 3, elements=st.floats(0, 2)),
    C=hnp.arrays(np.float64, (3, 3), elements=st.floats(-2, 2)),
    perm=st.permutations(range(3)),
)
@settings(max_examples=200, deadline=None)
def test_chain_values_permutation_invariant(lam, C, perm):
    perm = list(perm)
    E = dd_chain_terms(lam, C)
    Ep = dd_chain_terms(lam[perm], C[np.ix_(perm, perm)])
    scale = chain_scale(C) + float(np.sum(lam**2))
    for a, b in zip(E, Ep):
        assert abs(a - b) <= 1e-11 * scale


def test_dd_chain_row_slack_only_enlarges_E1(rng):
    lam = rng.uniform(0, 1, 3)
    C = rng.uniform(-1, 1, (3, 3))
    base = dd_chain_terms(lam, C)
    slack = rng.uniform(0, 2, 3)
    with_slack = dd_chain_terms(lam, C, row_slack=slack)
    assert with_slack[0] >= base[0]
    assert with_slack[1] == base[1] and with_slack[2] == base[2]
    with pytest.raises(ValueError):
        dd_chain_terms(lam, C, row_slack=-slack)


def test_eval_chain_rejects_nonfinite_pairings():
    C = np.full((2, 2), np.nan)
    with pytest.raises(ValueError):
        eval_dd_chain(SpectrumSample(lam=[0.5, 0.5]), C)


def test_rank_chain_split_is_identity(rng):
    # F0 decomposes exactly into diagonal plus off-diagonal parts
    for _ in range(200):
        n = rng.integers(2, 5)
        p = int(rng.integers(2, n + 1))
        lam = rng.uniform(0, 2, n)
        C = rng.uniform(-1, 1, (n, n))
        F0, Fd, Fo, _ = rank_chain_terms(lam, C, p)
        assert abs(F0 - Fd - Fo) <= 1e-12 * chain_scale(C)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_dd_campaign_inside_hypotheses(n):
    rep = run_dd_campaign(n, 30_000, seed=123)
    assert rep.passed
    assert rep.identity_max_defect <= 1e-12
    assert rep.worst_margins["min_E1_minus_E2"] >= -1e-12
    assert rep.worst_margins["min_E3"] >= -1e-12


@pytest.mark.parametrize("n,p", [(2, 2), (3, 2), (3, 3), (4, 4)])
def test_rank_campaign_inside_hypotheses(n, p):
    rep = run_rank_campaign(n, p, 30_000, seed=77)
    assert rep.passed
    assert all(v >= -1e-12 for v in rep.worst_margins.values())


def test_campaigns_deterministic_and_thread_invariant():
    a = run_dd_campaign(3, 40_000, seed=5, threads=1)
    b = run_dd_campaign(3, 40_000, seed=5, threads=4)
    assert a.worst_margins == b.worst_margins
    assert a.identity_max_defect == b.identity_max_defect


def test_search_finds_E3_violation_outside_hypotheses():
    regime = SearchRegime(chain="distance_decreasing", n=2, lam_high=2.0)
    rep = counterexample_search(regime, budget=5_000, seed=3)
    assert rep.found
    # the analytic witness value is -3/5 at scale 2
    assert rep.best_margin <= -0.29
    assert rep.best_values.E3 < 0


def test_search_empty_inside_hypotheses():
    regime = SearchRegime(chain="distance_decreasing", n=3, lam_high=1.0)
    rep = counterexample_search(regime, budget=50_000, seed=4)
    assert not rep.found
    assert rep.best_margin >= -1e-12


def test_search_finds_rank_violation_beyond_product_cap():
    regime = SearchRegime(chain="rank", n=3, p=3, lam_high=1.0, cap_products=False)
    rep = counterexample_search(regime, budget=30_000, seed=9)
    assert rep.found
    vals = rep.best_values
    assert min(vals.F0, vals.F_offdiag, vals.F_diag - vals.F_lower) < 0


def test_search_empty_inside_rank_hypotheses():
    regime = SearchRegime(chain="rank", n=3, p=2, lam_high=1.0, cap_products=True)
    rep = counterexample_search(regime, budget=50_000, seed=10)
    assert not rep.found


def test_search_regime_validation():
    with pytest.raises(ValueError):
        SearchRegime(chain="unknown", n=2)
    with pytest.raises(ValueError):
        SearchRegime(chain="rank", n=3)  # missing p
    with pytest.raises(ValueError):
        counterexample_search(SearchRegime(chain="distance_decreasing", n=2), budget=0)
