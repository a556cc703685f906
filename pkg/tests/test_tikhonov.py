import numpy as np
import pytest

from qpat2d import (
    CoefficientDirection,
    OpticalPair,
    TikhonovConfig,
    add_noise,
    build_grid,
    build_phase_hg,
    build_quadrature,
    choose_alpha,
    convergence_study,
    eval_functional,
    forward,
    penalty_gradient,
    reconstruct,
)
from qpat2d.norms import inner_cells, l2_cells
from qpat2d.phantoms import Inclusion, PhantomSpec, make_phantom
from qpat2d.tikhonov import penalty_value

from conftest import MU_HI, MU_LO, homogeneous_pair, left_patch


def make_cfg(grid, alpha=1e-6, **kwargs):
    prior_a = np.full(grid.shape, 0.1)
    prior_s = np.full(grid.shape, 1.0)
    return TikhonovConfig(alpha, prior_a, prior_s, MU_LO, MU_HI, **kwargs)


@pytest.fixture
def small_problem():
    grid = build_grid(12, 12, 1.0, 1.0)
    quad = build_quadrature(8)
    phase = build_phase_hg(0.0, quad)
    u0 = left_patch(grid, quad)
    return grid, quad, phase, u0


class TestEvalFunctional:
    def test_zero_at_priors_with_exact_data(self, small_problem):
        grid, quad, phase, u0 = small_problem
        cfg = make_cfg(grid)
        pair = OpticalPair(cfg.prior_a.copy(), cfg.prior_s.copy(), MU_LO, MU_HI)
        E_data = forward(grid, quad, phase, pair, u0=u0, tol=1e-12)
        value = eval_functional(grid, quad, phase, pair, E_data, cfg, u0=u0)
        assert value == pytest.approx(0.0, abs=1e-18)  # squared solver tolerance

    def test_bounded_below_by_penalty(self, small_problem):
        grid, quad, phase, u0 = small_problem
        cfg = make_cfg(grid, alpha=1e-3)
        pair = homogeneous_pair(grid, mu_a=0.15, mu_s=1.2)
        E_data = np.zeros(grid.shape)
        value = eval_functional(grid, quad, phase, pair, E_data, cfg, u0=u0)
        assert value >= cfg.alpha * penalty_value(pair, cfg, grid)

    @pytest.mark.parametrize("p", [1.0, 1.5, 2.0])
    def test_noisy_data_bound_at_truth(self, small_problem, p):
        # J_alpha(truth) <= delta^p / p + alpha * penalty(truth)
        grid, quad, phase, u0 = small_problem
        cfg = make_cfg(grid, alpha=1e-4, p=p)
        truth = homogeneous_pair(grid, mu_a=0.12, mu_s=1.1)
        E = forward(grid, quad, phase, truth, u0=u0, tol=1e-12)
        delta = 0.05 * l2_cells(E, grid)
        E_noisy = add_noise(E, delta, grid, seed=3)
        value = eval_functional(grid, quad, phase, truth, E_noisy, cfg, u0=u0)
        bound = delta**p / p + cfg.alpha * penalty_value(truth, cfg, grid)
        assert value <= bound * (1.0 + 1e-6)


class TestPenaltyGradient:
    def test_zero_at_priors(self, small_problem):
        grid, _, _, _ = small_problem
        cfg = make_cfg(grid)
        pair = OpticalPair(cfg.prior_a.copy(), cfg.prior_s.copy(), MU_LO, MU_HI)
        g = penalty_gradient(pair, cfg, grid)
        np.testing.assert_array_equal(g.g_a, 0.0)
        np.testing.assert_array_equal(g.g_s, 0.0)

    def test_constant_offset(self, small_problem):
        grid, _, _, _ = small_problem
        cfg = make_cfg(grid, alpha=0.5)
        c = 0.3
        pair = OpticalPair(cfg.prior_a + c, cfg.prior_s.copy(), MU_LO, MU_HI)
        g = penalty_gradient(pair, cfg, grid)
        np.testing.assert_allclose(g.g_a, 2.0 * cfg.alpha * c, rtol=1e-13)

    def test_matches_central_differences(self, small_problem):
        # quadratic penalty: agreement is near machine precision
        grid, _, _, _ = small_problem
        cfg = make_cfg(grid, alpha=1e-2)
        rng = np.random.default_rng(31)
        pair = OpticalPair(
            0.1 + 0.03 * rng.standard_normal(grid.shape),
            1.0 + 0.2 * rng.standard_normal(grid.shape),
            MU_LO,
            MU_HI,
        )
        g = penalty_gradient(pair, cfg, grid)
        t = 1e-5
        for _ in range(5):
            d = CoefficientDirection(
                rng.standard_normal(grid.shape), rng.standard_normal(grid.shape)
            )
            pairing = inner_cells(g.g_a, d.d_a, grid) + inner_cells(g.g_s, d.d_s, grid)
            plus = OpticalPair(pair.mu_a + t * d.d_a, pair.mu_s + t * d.d_s, MU_LO, MU_HI)
            minus = OpticalPair(pair.mu_a - t * d.d_a, pair.mu_s - t * d.d_s, MU_LO, MU_HI)
            fd = (
                cfg.alpha * penalty_value(plus, cfg, grid)
                - cfg.alpha * penalty_value(minus, cfg, grid)
            ) / (2.0 * t)
            assert abs(fd - pairing) / abs(pairing) < 1e-8


class TestChooseAlpha:
    def test_power_rule_value(self):
        assert choose_alpha(1e-2, p=2.0, c=1.0, r=1.0) == pytest.approx(1e-2)

    def test_limit_ratio_vanishes(self):
        # delta^p / alpha -> 0 along a dyadic sequence
        p, r, c = 2.0, 1.0, 1.0
        vals = [d**p / choose_alpha(d, p, c, r) for d in (0.5**k for k in range(1, 8))]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_rejects_r_at_p(self):
        with pytest.raises(ValueError):
            choose_alpha(1e-2, p=2.0, r=2.0)

    def test_rejects_nonpositive_delta(self):
        with pytest.raises(ValueError):
            choose_alpha(0.0)


class TestReconstruct:
    def test_stationary_start_terminates_immediately(self, small_problem):
        grid, quad, phase, u0 = small_problem
        cfg = make_cfg(grid, grad_tol=1e-8, solver_tol=1e-12)
        priors = OpticalPair(cfg.prior_a.copy(), cfg.prior_s.copy(), MU_LO, MU_HI)
        E_data = forward(grid, quad, phase, priors, u0=u0, tol=1e-12)
        report = reconstruct(grid, quad, phase, E_data, cfg, u0=u0)
        assert report.iterations == 0
        assert report.reason == "converged"
        np.testing.assert_array_equal(report.pair.mu_a, cfg.prior_a)

    def test_requires_p2(self, small_problem):
        grid, quad, phase, u0 = small_problem
        cfg = make_cfg(grid, p=1.5)
        with pytest.raises(ValueError):
            reconstruct(grid, quad, phase, np.zeros(grid.shape), cfg, u0=u0)

    def test_monotone_and_admissible(self, small_problem):
        grid, quad, phase, u0 = small_problem
        truth = OpticalPair(
            np.full(grid.shape, 0.13), np.full(grid.shape, 1.05), MU_LO, MU_HI
        )
        E_data = forward(grid, quad, phase, truth, u0=u0, tol=1e-11)
        cfg = make_cfg(grid, alpha=1e-7, max_outer=30, solver_tol=1e-11)
        report = reconstruct(grid, quad, phase, E_data, cfg, u0=u0)
        fv = report.functional_values
        assert all(b <= a for a, b in zip(fv, fv[1:]))
        assert np.all(report.pair.mu_a >= MU_LO) and np.all(report.pair.mu_a <= MU_HI)
        assert np.all(report.pair.mu_s >= MU_LO) and np.all(report.pair.mu_s <= MU_HI)
        assert fv[-1] < fv[0]

    def test_remark_estimate_holds(self, small_problem):
        # J_alpha(reconstruction) <= delta^2/2 + alpha * penalty(truth) + slack
        grid, quad, phase, u0 = small_problem
        truth = OpticalPair(
            np.full(grid.shape, 0.13), np.full(grid.shape, 1.0), MU_LO, MU_HI
        )
        E = forward(grid, quad, phase, truth, u0=u0, tol=1e-12)
        delta = 0.02 * l2_cells(E, grid)
        E_noisy = add_noise(E, delta, grid, seed=5)
        cfg = make_cfg(grid, alpha=choose_alpha(delta, c=1.0, r=1.0), max_outer=100,
                       solver_tol=1e-12)
        report = reconstruct(grid, quad, phase, E_noisy, cfg, u0=u0)
        bound = delta**2 / 2.0 + cfg.alpha * penalty_value(truth, cfg, grid)
        assert report.functional_values[-1] <= bound * (1.0 + 1e-3)

    def test_gaussian_bump_recovery_baseline(self):
        # smooth absorption bump, exact data, alpha = 1e-6, 32x32x16:
        # spec bound 15%; achieved baseline 1.7e-4, asserted with 10x margin
        grid = build_grid(32, 32, 1.0, 1.0)
        quad = build_quadrature(16)
        phase = build_phase_hg(0.0, quad)
        u0 = left_patch(grid, quad)
        spec = PhantomSpec(
            0.1, 1.0, [Inclusion("disk", (0.5, 0.5, 0.2), 0.2, 1.0)],
            smooth=True, smooth_width=0.12,
        )
        truth = make_phantom(spec, grid, MU_LO, MU_HI)
        E_data = forward(grid, quad, phase, truth, u0=u0, tol=1e-10)
        cfg = make_cfg(grid, alpha=1e-6, max_outer=200, grad_tol=1e-10)
        report = reconstruct(grid, quad, phase, E_data, cfg, u0=u0)
        rel_err = l2_cells(report.pair.mu_a - truth.mu_a, grid) / l2_cells(truth.mu_a, grid)
        assert rel_err <= 0.15  # contract bound
        assert rel_err <= 2e-3  # regression baseline

    def test_stability_constant_logged(self, small_problem):
        # two nearby data sets, same alpha: reconstruction gap over data gap
        grid, quad, phase, u0 = small_problem
        truth = homogeneous_pair(grid, mu_a=0.12, mu_s=1.1)
        E = forward(grid, quad, phase, truth, u0=u0, tol=1e-12)
        gap = 1e-3 * l2_cells(E, grid)
        E1 = add_noise(E, gap, grid, seed=1)
        E2 = add_noise(E, gap, grid, seed=2)
        cfg = make_cfg(grid, alpha=1e-5, max_outer=60, grad_tol=1e-11, solver_tol=1e-12)
        r1 = reconstruct(grid, quad, phase, E1, cfg, u0=u0)
        r2 = reconstruct(grid, quad, phase, E2, cfg, u0=u0)
        recon_gap = np.hypot(
            l2_cells(r1.pair.mu_a - r2.pair.mu_a, grid),
            l2_cells(r1.pair.mu_s - r2.pair.mu_s, grid),
        )
        data_gap = l2_cells(E1 - E2, grid)
        constant = recon_gap / data_gap
        print(f"stability constant ||mu1 - mu2|| / ||E1 - E2|| = {constant:.4f}")
        assert np.isfinite(constant) and constant > 0.0


class TestConvergenceStudy:
    def test_table_reproducible_bit_exact(self, small_problem):
        grid, quad, phase, u0 = small_problem
        truth = homogeneous_pair(grid, mu_a=0.12, mu_s=1.0)
        E = forward(grid, quad, phase, truth, u0=u0, tol=1e-11)
        deltas = [0.04 * l2_cells(E, grid), 0.02 * l2_cells(E, grid)]
        cfg = make_cfg(grid, alpha=1.0, max_outer=25, solver_tol=1e-11)
        rows1 = convergence_study(
            grid, quad, phase, truth, deltas, cfg, u0=u0, seed=9, alpha_c=0.5, alpha_r=1.0
        )
        rows2 = convergence_study(
            grid, quad, phase, truth, deltas, cfg, u0=u0, seed=9, alpha_c=0.5, alpha_r=1.0
        )
        assert [(r.delta, r.alpha, r.error) for r in rows1] == [
            (r.delta, r.alpha, r.error) for r in rows2
        ]

    def test_rejects_nondecreasing_deltas(self, small_problem):
        grid, quad, phase, u0 = small_problem
        truth = homogeneous_pair(grid)
        cfg = make_cfg(grid)
        with pytest.raises(ValueError):
            convergence_study(grid, quad, phase, truth, [0.01, 0.02], cfg, u0=u0)
