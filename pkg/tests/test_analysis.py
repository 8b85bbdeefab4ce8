import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from toadwave.analysis import (C_ORACLE, DEFAULT_SEED, TrigPolynomial, fourier_suite, harnack_ratios,
                               interpolation_check, log_holder_check, minimal_constant,
                               random_trig_polynomial, sobolev_norms, wave_limit_checks)
from toadwave.grid import Field2D, make_trait_grid, slab_grid_per_unit
from toadwave.slab import solve_slab


def test_conjugate_symmetry_enforced():
    with pytest.raises(ValueError):
        TrigPolynomial({1: 1.0 + 1.0j, -1: 1.0 + 1.0j})


def test_cosine_norms():
    g = TrigPolynomial({1: 0.5, -1: 0.5})
    n = sobolev_norms(g)
    assert n["l1"] == pytest.approx(2 / math.pi, rel=1e-6)
    assert n["linf"] == pytest.approx(1.0)
    assert n["h32"] == pytest.approx(math.sqrt(0.5))


def test_fft_samples_match_direct_sum():
    g = random_trig_polynomial(np.random.default_rng(3), 16, period=2.0, origin=1.0)
    theta = 1.0 + 2.0 * np.arange(256) / 256
    assert np.allclose(g.samples(256), g(theta), atol=1e-10)
    with pytest.raises(ValueError):
        g.samples(32)


@given(st.integers(0, 10**6), st.floats(1e-3, 1e3))
@settings(max_examples=30, deadline=None)
def test_minimal_constant_is_sharp_and_scale_free(seed, s):
    g = random_trig_polynomial(np.random.default_rng(seed), 8)
    c_min = minimal_constant(sobolev_norms(g))
    assert interpolation_check(g, c_min * (1 + 1e-9)).passed
    assert not interpolation_check(g, c_min * (1 - 1e-6)).passed
    assert minimal_constant(sobolev_norms(g.scaled(s))) == pytest.approx(c_min, rel=1e-9)


def test_branches():
    g = TrigPolynomial({0: 1.0})  # constant: no H^{3/2} content
    assert interpolation_check(g, 1.0).branch == 2
    h = random_trig_polynomial(np.random.default_rng(1), 64)
    assert interpolation_check(h, 1e-6).branch == 1


@given(st.integers(0, 10**6))
@settings(max_examples=20, deadline=None)
def test_log_holder_holds(seed):
    rng = np.random.default_rng(seed)
    g = random_trig_polynomial(rng, 64)
    violations, ratio = log_holder_check(g, rng)
    assert violations == 0 and ratio >= 1.0


def test_frozen_constant_matches_sweep():
    rep = fourier_suite(DEFAULT_SEED, 1000, 64)
    assert rep["max_minimal_constant"] * 1.1 == pytest.approx(C_ORACLE, rel=1e-12)
    assert rep["interpolation_failures"] == 0 and rep["holder_violations"] == 0
    assert rep["n_pairs"] == 100_000


def test_harnack_ratio_of_flat_and_skipped_rows():
    grid = slab_grid_per_unit(2.0, 2, make_trait_grid(1.0, 2.0, 5))
    vals = np.ones(grid.shape)
    vals[-1] = 0.0
    vals[0, 0] = 2.0
    rep = harnack_ratios(Field2D(grid, vals))
    assert rep.global_ratio == 2.0 and rep.skipped == 1
    assert np.all(rep.per_xi_ratio[1:] == 1.0)


def test_wave_limits_on_small_slabs(params, min_speed_21):
    tg = make_trait_grid(1.0, 2.0, 11)
    sols = [solve_slab(slab_grid_per_unit(a, 10, tg), 1.0, 0.01, params, min_speed_21.c_star)
            for a in (20.0, 30.0)]
    rep = wave_limit_checks(sols, min_speed_21)
    assert rep.gaps_decreasing and rep.m > 0 and rep.nu_ahead_ok
    assert rep.speeds[0] < rep.speeds[1] < min_speed_21.c_star
