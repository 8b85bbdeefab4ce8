import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from toadwave.grid import (Field2D, GridError, integrate_trait, make_slab_grid, make_space_grid,
                           make_trait_grid, second_derivative_neumann, slab_grid_per_unit)


def test_trait_grid_nodes_and_weights():
    g = make_trait_grid(1.0, 2.0, 11)
    assert g.nodes[0] == 1.0 and g.nodes[-1] == 2.0
    assert g.h_theta == pytest.approx(0.1)
    assert g.quad_weights.sum() == pytest.approx(1.0)
    assert g.length == 1.0


@pytest.mark.parametrize("args", [(0.0, 2.0, 11), (2.0, 1.0, 11), (1.0, 2.0, 2)])
def test_trait_grid_rejects_bad_input(args):
    with pytest.raises(GridError):
        make_trait_grid(*args)


def test_g_tau_endpoints():
    g = make_trait_grid(1.0, 3.0, 5)
    assert np.allclose(g.g_tau(0.0), 1.0)
    assert np.allclose(g.g_tau(1.0), g.nodes)


@given(st.floats(0.1, 5.0), st.floats(0.1, 5.0), st.integers(3, 200))
@settings(max_examples=50, deadline=None)
def test_trapezoid_exact_on_linear(lo, width, n):
    g = make_trait_grid(lo, lo + width, n)
    assert integrate_trait(g.nodes, g) == pytest.approx(width * (lo + width / 2), rel=1e-12)


def test_trapezoid_second_order():
    errs = []
    for n in (11, 21, 41):
        g = make_trait_grid(1.0, 2.0, n)
        errs.append(abs(integrate_trait(np.exp(g.nodes), g) - (np.e**2 - np.e)))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.02)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.02)


def test_neumann_second_derivative_of_cosine():
    # cos(pi x) on [0, 1] has zero slope at both ends
    n = 201
    x = np.linspace(0.0, 1.0, n)
    d2 = second_derivative_neumann(np.cos(np.pi * x), x[1] - x[0])
    assert np.max(np.abs(d2 + np.pi**2 * np.cos(np.pi * x))) < 1e-3


def test_slab_grid_is_symmetric_with_centre_node():
    tg = make_trait_grid(1.0, 2.0, 5)
    g = slab_grid_per_unit(20.0, 10, tg)
    assert g.n_xi == 401 and g.xi_nodes[g.center] == 0.0
    assert g.shape == (401, 5)
    with pytest.raises(GridError):
        make_slab_grid(5.0, 10, tg)  # even count has no centre node


def test_space_grid_and_field_marginal():
    tg = make_trait_grid(1.0, 2.0, 5)
    g = make_space_grid(-1.0, 1.0, 21, tg)
    f = Field2D(g, np.full(g.shape, 3.0))
    assert np.allclose(f.marginal(), 3.0)
    with pytest.raises(ValueError):
        Field2D(g, np.zeros((3, 3)))
