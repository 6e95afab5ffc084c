import numpy as np
import pytest

from nearsim.boundary import lr_boundary, published_optimal_boundary
from nearsim.errors import DomainError, InvalidProbabilityError
from nearsim.optimize import (
    OptimizeConfig,
    appendix_null_grid,
    basic_varying_g,
    evaluate_q,
    optimal_varying_g,
)
from nearsim.rp import RPGrid, rejection_prob

SMALL_GRID = tuple(np.linspace(0.0, 8.0, 17))


@pytest.fixture(scope="module")
def basic_j2():
    cfg = OptimizeConfig(n_knots=2, null_grid=SMALL_GRID, max_iterations=60)
    boundary, eps = basic_varying_g(cfg)
    return cfg, boundary, eps


# --- config ------------------------------------------------------------------


def test_config_defaults_and_z():
    cfg = OptimizeConfig()
    assert cfg.n_knots == 16
    assert cfg.alpha == 0.05
    assert len(cfg.null_grid) == 76
    assert cfg.null_grid == appendix_null_grid()
    assert cfg.z == pytest.approx(1.959963984540054, abs=1e-12)


def test_config_validation():
    with pytest.raises(DomainError):
        OptimizeConfig(n_knots=2, null_grid=(0.0, 1.0))  # grid not larger than J
    with pytest.raises(DomainError):
        OptimizeConfig(epsilon=0.06)  # above alpha
    with pytest.raises(DomainError):
        OptimizeConfig(epsilon=-1e-3)
    with pytest.raises(DomainError):
        OptimizeConfig(n_knots=0)
    with pytest.raises(DomainError):
        OptimizeConfig(tol=0.0)
    with pytest.raises(DomainError):
        OptimizeConfig(null_grid=(0.0, -1.0, 2.0))
    with pytest.raises(InvalidProbabilityError):
        OptimizeConfig(alpha=1.2)
    cfg = OptimizeConfig(alt_grid=[(1, 1), (2, 2)])
    assert cfg.alt_grid == ((1.0, 1.0), (2.0, 2.0))


# --- basic construction ------------------------------------------------------


def test_zero_iterations_returns_lr_shape():
    cfg = OptimizeConfig(n_knots=1, null_grid=SMALL_GRID, max_iterations=0)
    boundary, eps = basic_varying_g(cfg)
    ts = np.linspace(0.0, 4.0, 101)
    assert np.max(np.abs(boundary.eval(ts) - np.minimum(ts, cfg.z))) == 0.0
    # achieved eps of the LR boundary is alpha minus its origin NRP
    assert eps == pytest.approx(0.05 - 0.0025, abs=1e-7)
    lr = lr_boundary()
    for mu0 in (0.0, 1.0, 2.0, 4.0):
        assert rejection_prob(boundary, (0.0, mu0)) == pytest.approx(
            rejection_prob(lr, (0.0, mu0)), abs=2e-8
        )


def test_basic_output_invariants(basic_j2):
    cfg, boundary, eps = basic_j2
    assert boundary.alpha == 0.05
    assert boundary.tail == pytest.approx(cfg.z, abs=1e-12)
    assert boundary.knots[0] == (0.0, 0.0)
    assert boundary.knots[-1][0] == pytest.approx(2.5)
    assert len(boundary.knots) - 2 <= cfg.n_knots
    assert 0.0 <= eps < 0.05


def test_basic_respects_level_cap_independently(basic_j2):
    # cross-check the optimizer's fixed-panel NRPs with the adaptive engine
    cfg, boundary, eps = basic_j2
    vals = np.array([rejection_prob(boundary, (0.0, m), tol=1e-10) for m in cfg.null_grid])
    assert vals.max() <= 0.05 + 2e-8
    assert 0.05 - vals.min() == pytest.approx(eps, abs=2e-8)


def test_more_knots_tighten_similarity(basic_j2):
    cfg2, _, eps2 = basic_j2
    eps = {2: eps2}
    for j in (1, 4):
        cfg = OptimizeConfig(n_knots=j, null_grid=SMALL_GRID, max_iterations=60)
        _, eps[j] = basic_varying_g(cfg)
    assert eps[2] <= eps[1] + 1e-12
    assert eps[4] <= eps[2] + 1e-12
    assert eps[4] < eps[1] / 5.0


def test_restarts_never_hurt_and_are_deterministic():
    cfg0 = OptimizeConfig(n_knots=1, null_grid=SMALL_GRID, max_iterations=0)
    cfg3 = OptimizeConfig(n_knots=1, null_grid=SMALL_GRID, max_iterations=0, restarts=3, seed=7)
    b0, _ = basic_varying_g(cfg0)
    b3, _ = basic_varying_g(cfg3)
    q0, _, _ = evaluate_q(b0, cfg0)
    q3, _, _ = evaluate_q(b3, cfg0)
    assert q3 <= q0 + 1e-15  # restarts keep the best Q
    again, _ = basic_varying_g(cfg3)
    assert again.knots == b3.knots  # seeded, so reruns coincide


# --- Q functional ------------------------------------------------------------


def test_published_boundary_scores_near_similar():
    q, eps, max_nrp = evaluate_q(published_optimal_boundary(), OptimizeConfig())
    assert q < 1e-9
    assert eps < 1e-5
    assert max_nrp <= 0.05 + 1e-8


def test_q_orders_boundaries():
    cfg = OptimizeConfig()
    q_pub, _, _ = evaluate_q(published_optimal_boundary(), cfg)
    q_lr, eps_lr, _ = evaluate_q(lr_boundary(), cfg)
    assert q_pub < q_lr
    assert eps_lr == pytest.approx(0.0475, abs=1e-6)


# --- envelope-matching construction ------------------------------------------


def test_optimal_requires_matching_alt_grid():
    alt = ((1.0, 1.0), (2.0, 2.0), (3.0, 3.0))
    env = RPGrid(points=alt, values=(0.3, 0.9, 0.999), errors=(0.0,) * 3, boundary_id="manual")
    with pytest.raises(DomainError):
        optimal_varying_g(OptimizeConfig(n_knots=2, null_grid=SMALL_GRID), env)
    cfg = OptimizeConfig(n_knots=2, null_grid=SMALL_GRID, alt_grid=alt[:2], epsilon=0.03)
    with pytest.raises(DomainError):
        optimal_varying_g(cfg, env)


def test_optimal_rejects_init_with_wrong_endpoint():
    alt = ((1.0, 1.0), (2.0, 2.0))
    env = RPGrid(points=alt, values=(0.3, 0.9), errors=(0.0, 0.0), boundary_id="manual")
    cfg = OptimizeConfig(n_knots=2, null_grid=SMALL_GRID, alt_grid=alt, epsilon=0.03)
    with pytest.raises(DomainError):
        # published boundary ends at t = 2.1, not at the working segment end
        optimal_varying_g(cfg, env, init=published_optimal_boundary())


def test_optimal_stays_in_band_and_obeys_slope():
    alt = ((1.0, 1.0), (2.0, 2.0), (3.0, 3.0))
    cfg = OptimizeConfig(
        n_knots=2, null_grid=SMALL_GRID, alt_grid=alt, epsilon=0.03, max_iterations=40
    )
    env = RPGrid(points=alt, values=(0.30, 0.90, 0.999), errors=(0.0,) * 3, boundary_id="manual")
    boundary = optimal_varying_g(cfg, env)
    ts = np.array([t for t, _ in boundary.knots])
    gs = np.array([g for _, g in boundary.knots])
    assert np.all(np.diff(gs) <= np.diff(ts) + 1e-12)  # slope bound
    assert boundary.knots[-1] == (2.5, pytest.approx(cfg.z))
    for mu0 in (0.0, 1.0, 2.0, 4.0, 8.0):
        nrp = rejection_prob(boundary, (0.0, mu0))
        assert 0.05 - 0.03 - 1e-7 <= nrp <= 0.05 + 1e-7
