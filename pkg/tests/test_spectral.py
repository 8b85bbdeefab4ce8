import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import eig

from toadwave.grid import make_trait_grid
from toadwave.params import ModelParams
from toadwave.spectral import (BracketError, assemble_trait_operator, dispersion_c, golden_section,
                               inflection_trait, minimize_speed, principal_eigenpair, profile_shape,
                               verify_relations)

# Continuous reference for alpha = r = 1, Theta = (1, 2), tau = 1, from Chebyshev
# collocation with 81 and 121 points (agreement to 3e-10).
C_AT_ONE = 2.5083274297065477
C_STAR_REF = 2.4539872747418796
LAMBDA_STAR_REF = 0.8120550943215586


def test_eigenpair_matches_dense_solver(params):
    grid = make_trait_grid(1.0, 2.0, 31)
    op = assemble_trait_operator(0.9, 1.0, params, grid)
    gamma, q = principal_eigenpair(op, grid)
    w, v = eig(op.dense())
    k = int(np.argmin(w.real))
    assert gamma == pytest.approx(w[k].real, rel=1e-10)
    ref = np.abs(v[:, k].real)
    ref /= ref @ grid.quad_weights
    assert np.allclose(q, ref, rtol=1e-8)
    assert q.min() > 0


def test_operator_rejects_bad_arguments(params):
    grid = make_trait_grid(1.0, 2.0, 11)
    with pytest.raises(ValueError):
        assemble_trait_operator(0.0, 1.0, params, grid)
    with pytest.raises(ValueError):
        assemble_trait_operator(1.0, 1.5, params, grid)


def test_kpp_limit_is_exact():
    p = ModelParams(alpha=0.7, r=2.0, theta_min=1.5, theta_max=3.0)
    res = minimize_speed(0.0, p, make_trait_grid(1.5, 3.0, 41))
    assert res.c_star == pytest.approx(2 * math.sqrt(3.0), rel=1e-8)
    assert res.lambda_star == pytest.approx(math.sqrt(2.0 / 1.5), rel=1e-6)
    assert np.allclose(res.Q_star, 1.0 / 1.5)


def test_second_order_convergence_of_dispersion(params):
    errs = [dispersion_c(1.0, 1.0, params, make_trait_grid(1.0, 2.0, n)).c - C_AT_ONE
            for n in (51, 101, 201, 401)]
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    assert all(3.9 < q < 4.1 for q in ratios), ratios


def test_minimal_speed_against_reference(min_speed_400):
    assert min_speed_400.c_star == pytest.approx(C_STAR_REF, abs=2e-7)
    assert min_speed_400.lambda_star == pytest.approx(LAMBDA_STAR_REF, abs=1e-4)
    assert min_speed_400.c_star == pytest.approx(2.453987344865738, rel=1e-12)


def test_relations_at_minimum(min_speed_400):
    rel = min_speed_400.residuals
    assert rel.R1 <= 1e-12
    assert rel.R2 > 0
    assert abs(rel.R3) <= 1e-5 * min_speed_400.c_star
    assert rel.R4 >= -1e-8
    assert rel.R6 > 0


@given(st.floats(0.2, 5.0))
@settings(max_examples=25, deadline=None)
def test_dispersion_bounds_hold_for_every_lambda(lam):
    # the principal eigenvalue is trapped between the extreme potentials
    p = ModelParams()
    grid = make_trait_grid(1.0, 2.0, 41)
    s = dispersion_c(lam, 1.0, p, grid)
    assert lam + 1 / lam - 1e-12 <= s.c <= 2 * lam + 1 / lam + 1e-12
    assert verify_relations(s, s).R1 <= 1e-10
    assert verify_relations(s, s).R2 > 0
    assert s.c >= 2.453987 - 1e-5  # never below the minimum


def test_profile_shape_and_inflection(min_speed_400):
    shape = profile_shape(min_speed_400.Q_star, min_speed_400.solution)
    assert shape.is_increasing and shape.n_crossings == 1
    assert abs(shape.theta0_empirical - min_speed_400.theta0) <= 2 * min_speed_400.solution.grid.h_theta
    assert min_speed_400.theta0 == pytest.approx(inflection_trait(min_speed_400.solution))


def test_flat_profile_has_no_inflection():
    p = ModelParams()
    s = dispersion_c(1.0, 0.0, p, make_trait_grid(1.0, 2.0, 21))
    assert profile_shape(s.Q, s).degenerate


def test_bracket_error_when_minimum_outside_scan(params):
    with pytest.raises(BracketError):
        minimize_speed(1.0, params, make_trait_grid(1.0, 2.0, 21), lambda_lo=2.0, lambda_hi=10.0)


def test_golden_section_on_parabola():
    # a quadratic minimum is only resolvable to about sqrt(machine epsilon)
    x, fx = golden_section(lambda t: (t - 0.3) ** 2 + 1.0, -1.0, 2.0, 1e-10)
    assert x == pytest.approx(0.3, abs=1e-7) and fx == pytest.approx(1.0)


def test_threads_do_not_change_result(monkeypatch, params):
    grid = make_trait_grid(1.0, 2.0, 41)
    one = minimize_speed(1.0, params, grid)
    monkeypatch.setenv("TOADWAVE_THREADS", "4")
    four = minimize_speed(1.0, params, grid)
    assert one.c_star == four.c_star and one.lambda_star == four.lambda_star
