import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from toadwave.evolution import (EvolutionConfig, EvolutionError, InstabilityError, WindowOverflowError,
                                default_config, edge_profile_check, front_position, initial_field, simulate,
                                step)
from toadwave.grid import Field2D, make_trait_grid

TRAIT = make_trait_grid(1.0, 2.0, 11)


def small(**kw):
    base = dict(x_min=-20.0, x_max=40.0, n_x=301, trait=TRAIT, alpha=1.0, r=1.0, dt=0.02, t_end=10.0)
    base.update(kw)
    return EvolutionConfig(**base)


@pytest.mark.parametrize("kw", [{"dt": 0.0}, {"alpha": 0.0}, {"r": -1.0}, {"t_end": 5.0},
                                {"thresholds": (0.1, 1.5)}, {"n_x": 2}, {"initial_mass_width": 50.0}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        small(**kw)


def test_front_position_interpolates():
    x = np.array([0.0, 1.0, 2.0, 3.0])
    assert front_position(np.array([1.0, 0.8, 0.2, 0.0]), x, 0.5) == pytest.approx(1.5)
    assert math.isnan(front_position(np.zeros(4), x, 0.5))
    assert front_position(np.ones(4), x, 0.5) == 3.0


def test_initial_field_is_normalised_indicator():
    cfg = small(initial_mass_width=2.0)
    f = initial_field(cfg)
    rho = f.marginal()
    x = cfg.grid.x_nodes
    assert np.allclose(rho[(x <= 2.0) & (x > cfg.x_min)], 1.0)
    assert np.all(rho[x > 2.0] == 0) and rho[0] == 0


def test_mass_balance_without_growth():
    res = simulate(small(r=0.0, t_end=5.0))
    assert res.mass_balance_per_time <= 1e-12


def test_mass_conserved_away_from_boundaries():
    cfg = small(r=0.0, t_end=2.0)
    x = cfg.grid.x_nodes
    vals = np.zeros(cfg.grid.shape)
    vals[np.abs(x - 10.0) <= 2.0] = 1.0
    res = simulate(cfg, initial=Field2D(cfg.grid, vals))
    assert res.mass_drift_per_time <= 1e-8


def test_logistic_growth_of_uniform_state():
    cfg = small(x_min=-100.0, x_max=100.0, n_x=201, t_end=10.0, dt=0.01)
    vals = np.full(cfg.grid.shape, 0.1)
    vals[0] = vals[-1] = 0.0
    n = Field2D(cfg.grid, vals)
    for _ in range(100):
        n = step(n, cfg)
    rho = n.marginal()[100]
    exact = 0.1 * math.e / (0.9 + 0.1 * math.e)
    assert rho == pytest.approx(exact, rel=5e-3)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=5, deadline=None)
def test_step_preserves_positivity(seed):
    cfg = small(n_x=61, x_max=10.0)
    rng = np.random.default_rng(seed)
    vals = rng.uniform(0.0, 2.0, cfg.grid.shape)
    vals[0] = vals[-1] = 0.0
    out = step(Field2D(cfg.grid, vals), cfg).values
    assert np.all(np.isfinite(out)) and out.min() >= 0.0


def test_negative_state_is_reported():
    cfg = small(t_end=10.0)
    vals = np.zeros(cfg.grid.shape)
    vals[5:10] = -1.0
    with pytest.raises(InstabilityError):
        simulate(cfg, initial=Field2D(cfg.grid, vals))


def test_window_checks():
    with pytest.raises(WindowOverflowError, match="window edge"):
        simulate(small(), c_star=5.0)  # needs x_max >= 60
    with pytest.raises(WindowOverflowError, match="window edge"):
        simulate(small(x_max=12.0, n_x=161))


def test_trait_projection_for_degenerate_interval():
    tg = make_trait_grid(1.0, 1.0 + 1e-9, 5)
    cfg = small(trait=tg, t_end=10.0)
    res = simulate(cfg)
    # trait nodes differ by 1e-9, so their x-diffusivities split the rows by about that much
    assert np.max(np.ptp(res.final.values, axis=1)) <= 1e-8 * res.final.values.max()


def test_speed_stable_under_time_step_refinement():
    speeds = []
    for dt in (0.04, 0.02):
        cfg = default_config(TRAIT, t_end=30.0, dt=dt, h_x=0.2, c_star=2.45)
        speeds.append(simulate(cfg, 2.45).trace.fitted_speed[0.01])
    assert abs(speeds[0] - speeds[1]) / speeds[1] < 0.01


def test_edge_check_requires_front(min_speed_21):
    cfg = small(r=0.0, t_end=1.0)
    with pytest.raises(EvolutionError):
        edge_profile_check(Field2D(cfg.grid, np.zeros(cfg.grid.shape)), min_speed_21)
