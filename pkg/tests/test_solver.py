import numpy as np
import pytest

from minsurf import (
    GridMap,
    SolverConfig,
    build_grid,
    continuation_solve,
    discrete_area,
    fd_gradient_check,
    harmonic_extension,
    jacobian,
    minimal_system_residual,
    singular_spectrum,
    solve_dirichlet,
)
from minsurf.families import (
    affine_map,
    holomorphic_power_map,
    interior_sine_values,
    random_interior_values,
)

AREA_ULPS = 4 * np.finfo(float).eps


def assert_area_history_nonincreasing(outcome):
    hist = np.array(outcome.area_history)
    band = AREA_ULPS * (1.0 + np.abs(hist).max())
    assert np.all(np.diff(hist) <= band)


def test_affine_boundary_affine_init_zero_iterations(unit_square, rng):
    f = affine_map(unit_square, rng.standard_normal((2, 2)))
    out = solve_dirichlet(f, init=f)
    assert out.converged and out.iterations == 0
    assert np.array_equal(out.solution.values, f.values)


def test_affine_plus_bump_returns_to_affine(unit_square, rng):
    f = affine_map(unit_square, rng.standard_normal((2, 2)) * 0.5)
    bump = interior_sine_values(unit_square, [(2, 1)], [(0.2, -0.1)])
    init = GridMap(grid=unit_square, values=f.values + bump)
    out = solve_dirichlet(f, init=init)
    assert out.converged
    assert np.abs(out.solution.values - f.values).max() <= 1e-8
    assert_area_history_nonincreasing(out)


def test_harmonic_extension_reproduces_affine(unit_square, rng):
    f = affine_map(unit_square, rng.standard_normal((2, 2)), rng.standard_normal(2))
    ext = harmonic_extension(f)
    assert np.abs(ext.values - f.values).max() < 1e-10


def test_solve_holomorphic_boundary_matches_reference():
    # the cubic holomorphic graph solves the continuum system; the discrete
    # solution should approach it at second order
    errs = []
    for N in (17, 33):
        g = build_grid(2, [(0, 1), (0, 1)], (N, N))
        reference = holomorphic_power_map(g, 0.3, 3)
        out = solve_dirichlet(reference)
        assert out.converged, out.status
        errs.append(np.abs(out.solution.values - reference.values).max())
    assert errs[0] / errs[1] > 3.0


def test_boundary_values_unchanged_bit_for_bit(unit_square, rng):
    boundary = holomorphic_power_map(unit_square, 0.35, 3)
    out = solve_dirichlet(boundary)
    mask = unit_square.boundary_mask
    assert np.array_equal(out.solution.values[mask], boundary.values[mask])


def test_solver_idempotent(unit_square):
    boundary = holomorphic_power_map(unit_square, 0.3, 3)
    first = solve_dirichlet(boundary)
    again = solve_dirichlet(boundary, init=first.solution)
    assert again.iterations == 0 and again.converged
    assert np.array_equal(again.solution.values, first.solution.values)


def test_converged_solution_passes_gradient_check(unit_square):
    out = solve_dirichlet(holomorphic_power_map(unit_square, 0.3, 3))
    best = min(
        fd_gradient_check(out.solution, trials=2, step=s, rng=np.random.default_rng(1))
        for s in (1e-3, 1e-4, 1e-5)
    )
    assert best <= 1e-6


def test_init_must_match_boundary(unit_square, rng):
    boundary = affine_map(unit_square, rng.standard_normal((2, 2)))
    other = GridMap(grid=unit_square, values=boundary.values + 1.0)
    with pytest.raises(ValueError):
        solve_dirichlet(boundary, init=other)


def test_solve_records_init_hash(unit_square):
    boundary = holomorphic_power_map(unit_square, 0.2, 3)
    out1 = solve_dirichlet(boundary)
    out2 = solve_dirichlet(boundary)
    assert out1.init_hash == out2.init_hash
    perturbed = GridMap(
        grid=unit_square,
        values=harmonic_extension(boundary).values
        + interior_sine_values(unit_square, [(1, 1)], [(0.05, 0.0)]),
    )
    out3 = solve_dirichlet(boundary, init=perturbed)
    assert out3.init_hash != out1.init_hash


def test_continuation_affine_family_all_converge(unit_square, rng):
    A = rng.standard_normal((2, 2))
    base = affine_map(unit_square, A)

    def family(s):
        return GridMap(grid=unit_square, values=s * base.values)

    report = continuation_solve(family, [0.0, 0.25, 0.5, 1.0])
    assert report.first_failure is None
    for outcome in report.outcomes:
        assert outcome.converged
        assert outcome.residual_sup_norm <= 1e-10


def test_continuation_zero_amplitude_gives_zero_map(unit_square):
    base = holomorphic_power_map(unit_square, 1.0, 3)

    def family(s):
        return GridMap(grid=unit_square, values=s * base.values)

    report = continuation_solve(family, [0.0])
    assert report.outcomes[0].converged
    assert np.abs(report.outcomes[0].solution.values).max() == 0.0


def test_continuation_holomorphic_amplitude_sweep(unit_square):
    base = holomorphic_power_map(unit_square, 1.0, 2)

    def family(s):
        return GridMap(grid=unit_square, values=s * base.values)

    amplitudes = (0.1, 0.2, 0.3, 0.4, 0.5)
    report = continuation_solve(family, amplitudes)
    assert report.first_failure is None
    sups = [
        singular_spectrum(jacobian(o.solution)).sup_lambda_max("closure")
        for o in report.outcomes
    ]
    # stretch grows with the boundary amplitude; recorded, not assumed
    assert np.all(np.diff(sups) > 0)


def test_descent_until_tolerance(unit_square, rng):
    boundary = holomorphic_power_map(unit_square, 0.4, 3)
    bump = random_interior_values(unit_square, 2, rng, amplitude=0.3)
    init = GridMap(
        grid=unit_square, values=harmonic_extension(boundary).values + bump
    )
    out = solve_dirichlet(boundary, init=init)
    assert out.converged
    assert_area_history_nonincreasing(out)
    # strictly decreasing while measurably above the floor
    hist = np.array(out.area_history)
    drops = -np.diff(hist)
    assert drops[0] > 0


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tol_residual_sup=0.0)
    with pytest.raises(ValueError):
        SolverConfig(line_search_factor=1.5)


def test_nonconvergence_reported_not_raised(unit_square):
    cfg = SolverConfig(max_newton_iters=1, max_fallback_iters=1, tol_residual_sup=1e-14)
    boundary = holomorphic_power_map(unit_square, 0.45, 3)
    out = solve_dirichlet(boundary, cfg=cfg)
    if not out.converged:
        assert out.status in ("max_iterations", "line_search_stall")
        assert np.isfinite(out.residual_sup_norm)
    # the best iterate is still returned with intact boundary data
    mask = unit_square.boundary_mask
    assert np.array_equal(out.solution.values[mask], boundary.values[mask])
