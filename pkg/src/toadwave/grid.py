"""Uniform grids, trapezoid quadrature and the Neumann second difference.

Every array that carries a field on the slab is stored row-major by xi
then theta, i.e. ``values[i, j]`` is the value at ``(xi_i, theta_j)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GridError(ValueError):
    """Raised when a grid or field violates its construction contract."""


@dataclass(frozen=True)
class TraitGrid:
    theta_min: float
    theta_max: float
    n_nodes: int
    nodes: np.ndarray = field(repr=False)
    h_theta: float
    quad_weights: np.ndarray = field(repr=False)

    @property
    def length(self) -> float:
        """Measure of the trait interval."""
        return self.theta_max - self.theta_min

    def g_tau(self, tau: float) -> np.ndarray:
        """Homotopy diffusivity ``theta_min + tau (theta - theta_min)`` at the nodes."""
        return self.theta_min + tau * (self.nodes - self.theta_min)


def make_trait_grid(theta_min: float, theta_max: float, n_nodes: int) -> TraitGrid:
    if not theta_min > 0:
        raise GridError(f"theta_min must be > 0, got {theta_min}")
    if not theta_max > theta_min:
        raise GridError(f"theta_max must exceed theta_min, got {theta_max} <= {theta_min}")
    if n_nodes < 3:
        raise GridError(f"n_nodes must be >= 3, got {n_nodes}")
    nodes = np.linspace(theta_min, theta_max, n_nodes)
    h = (theta_max - theta_min) / (n_nodes - 1)
    w = np.full(n_nodes, h)
    w[0] = w[-1] = 0.5 * h
    nodes.setflags(write=False)
    w.setflags(write=False)
    return TraitGrid(float(theta_min), float(theta_max), int(n_nodes), nodes, h, w)


@dataclass(frozen=True)
class SlabGrid:
    half_width: float
    n_xi: int
    xi_nodes: np.ndarray = field(repr=False)
    h_xi: float
    trait: TraitGrid

    @property
    def center(self) -> int:
        """Index of the node sitting exactly at xi = 0."""
        return (self.n_xi - 1) // 2

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_xi, self.trait.n_nodes)


def make_slab_grid(half_width: float, n_xi: int, trait: TraitGrid) -> SlabGrid:
    if not half_width > 0:
        raise GridError(f"half_width must be > 0, got {half_width}")
    if n_xi < 3 or n_xi % 2 == 0:
        raise GridError(f"n_xi must be odd and >= 3 so that xi = 0 is a node, got {n_xi}")
    h = 2.0 * half_width / (n_xi - 1)
    xi = h * (np.arange(n_xi) - (n_xi - 1) // 2)
    xi.setflags(write=False)
    return SlabGrid(float(half_width), int(n_xi), xi, h, trait)


def slab_grid_per_unit(half_width: float, n_xi_per_unit: int, trait: TraitGrid) -> SlabGrid:
    """Slab grid with ``n_xi_per_unit`` cells per unit length of xi."""
    n_cells = int(round(2 * half_width * n_xi_per_unit))
    if n_cells % 2:
        n_cells += 1
    return make_slab_grid(half_width, n_cells + 1, trait)


@dataclass(frozen=True)
class SpaceGrid:
    """Uniform space window for the time-dependent model."""

    x_min: float
    x_max: float
    n_x: int
    x_nodes: np.ndarray = field(repr=False)
    h_x: float
    trait: TraitGrid

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_x, self.trait.n_nodes)


def make_space_grid(x_min: float, x_max: float, n_x: int, trait: TraitGrid) -> SpaceGrid:
    if not x_max > x_min:
        raise GridError(f"need x_max > x_min, got [{x_min}, {x_max}]")
    if n_x < 3:
        raise GridError(f"n_x must be >= 3, got {n_x}")
    x = np.linspace(x_min, x_max, n_x)
    x.setflags(write=False)
    return SpaceGrid(float(x_min), float(x_max), int(n_x), x, (x_max - x_min) / (n_x - 1), trait)


@dataclass(frozen=True)
class Field2D:
    """Nodal values on a slab or space grid, first axis space, second trait."""

    grid: SlabGrid | SpaceGrid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise GridError(f"field shape {self.values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise GridError("field contains non-finite values")

    def marginal(self) -> np.ndarray:
        """Trait integral of the field at every xi node."""
        return self.values @ self.grid.trait.quad_weights


def integrate_trait(f, grid: TraitGrid):
    """Trapezoid integral over the trait interval.

    ``f`` may be 1-D (one profile) or 2-D with the trait axis last.
    """
    f = np.asarray(f, dtype=float)
    if f.shape[-1] != grid.n_nodes:
        raise GridError(f"expected {grid.n_nodes} trait values, got {f.shape[-1]}")
    out = f @ grid.quad_weights
    return float(out) if out.ndim == 0 else out


def second_derivative_neumann(f, h: float) -> np.ndarray:
    """Central second difference with mirror ghost nodes at both ends.

    Works along the last axis, so a stack of profiles can be passed at once.
    """
    f = np.asarray(f, dtype=float)
    if f.shape[-1] < 3:
        raise GridError("need at least 3 values for the Neumann second difference")
    out = np.empty_like(f)
    out[..., 1:-1] = f[..., 2:] - 2.0 * f[..., 1:-1] + f[..., :-2]
    out[..., 0] = 2.0 * (f[..., 1] - f[..., 0])
    out[..., -1] = 2.0 * (f[..., -2] - f[..., -1])
    return out / (h * h)
