"""Trait eigenproblem, dispersion curve and minimal speed.

For a spatial decay rate ``lam`` the trait profile ``Q`` of the linearised
front solves

    alpha Q'' + (-lam c + g_tau(theta) lam^2 + r) Q = 0,   Q' = 0 on the ends,

with ``Q > 0`` and unit mass. Writing ``gamma`` for the smallest eigenvalue of
``-alpha d^2 - (g_tau - theta_max) lam^2`` gives
``lam c(lam) = r + lam^2 theta_max - gamma``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

from .grid import TraitGrid, integrate_trait, second_derivative_neumann
from .params import ModelParams, max_workers

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class EigenSolverError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (final residual {residual:.3e})")
        self.residual = residual


class BracketError(RuntimeError):
    """The speed minimum was found at the edge of the lambda scan."""


@dataclass(frozen=True)
class TraitOperator:
    """Nodal tridiagonal operator ``-alpha D - (g_tau - theta_max) lam^2``.

    ``D`` is the mirror-closed second difference, so the first and last rows
    carry a doubled off-diagonal. The operator is symmetric for the trapezoid
    inner product; :meth:`symmetric` returns the similar symmetric matrix
    ``W^{1/2} A W^{-1/2}``.
    """

    lam: float
    tau: float
    alpha: float
    grid: TraitGrid = field(repr=False)
    diag: np.ndarray = field(repr=False)
    lower: np.ndarray = field(repr=False)
    upper: np.ndarray = field(repr=False)

    def matvec(self, u: np.ndarray) -> np.ndarray:
        out = self.diag * u
        out[1:] += self.lower * u[:-1]
        out[:-1] += self.upper * u[1:]
        return out

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.lower, -1) + np.diag(self.upper, 1)

    def symmetric(self) -> tuple[np.ndarray, np.ndarray]:
        # off-diagonal of W^{1/2} A W^{-1/2}: sqrt(a_{i,i+1} a_{i+1,i})
        return self.diag.copy(), -np.sqrt(self.lower * self.upper)

    @property
    def potential(self) -> np.ndarray:
        return -(self.grid.g_tau(self.tau) - self.grid.theta_max) * self.lam**2

    def gershgorin_lower(self) -> float:
        radius = np.zeros_like(self.diag)
        radius[1:] += np.abs(self.lower)
        radius[:-1] += np.abs(self.upper)
        return float(np.min(self.diag - radius))

    def norm_inf(self) -> float:
        rows = np.abs(self.diag)
        rows[1:] += np.abs(self.lower)
        rows[:-1] += np.abs(self.upper)
        return float(rows.max())


def assemble_trait_operator(lam: float, tau: float, params: ModelParams, grid: TraitGrid) -> TraitOperator:
    if not lam > 0:
        raise ValueError(f"lambda must be > 0, got {lam}")
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    n, h = grid.n_nodes, grid.h_theta
    k = params.alpha / h**2
    pot = -(grid.g_tau(tau) - grid.theta_max) * lam**2
    diag = 2.0 * k + pot
    lower = np.full(n - 1, -k)
    upper = np.full(n - 1, -k)
    upper[0] = -2.0 * k
    lower[-1] = -2.0 * k
    return TraitOperator(float(lam), float(tau), params.alpha, grid, diag, lower, upper)


def principal_eigenpair(op: TraitOperator, grid: TraitGrid, tol: float = 1e-10,
                        max_iter: int = 5000) -> tuple[float, np.ndarray]:
    """Smallest eigenvalue and unit-mass positive eigenvector by inverse iteration.

    The shift sits below the Gershgorin bound, so ``S - shift`` is SPD and is
    factored once (LDL^T). The eigenvalue is read off as the trapezoid mean of
    the potential against ``Q``; the Neumann stiffness term integrates to zero
    exactly, and this avoids the cancellation a Rayleigh quotient suffers from
    the large ``alpha / h^2`` entries.
    """
    d, e = op.symmetric()
    scale = op.alpha / grid.length**2
    shift = op.gershgorin_lower() - scale
    df, ef, info = lapack.dpttrf(d - shift, e)
    if info != 0:
        raise EigenSolverError(f"shifted operator not positive definite (info={info})", float("nan"))
    sqw = np.sqrt(grid.quad_weights)
    pot = op.potential
    v = sqw * np.full(grid.n_nodes, 1.0 / grid.length)
    v /= np.linalg.norm(v)
    norm_a = op.norm_inf()
    gamma_old = np.inf
    res = np.inf
    for _ in range(max_iter):
        x, info = lapack.dpttrs(df, ef, v)
        if info != 0:
            raise EigenSolverError(f"tridiagonal solve failed (info={info})", res)
        v = x / np.linalg.norm(x)
        q = v / sqw
        q /= integrate_trait(q, grid)
        gamma = integrate_trait(pot * q, grid)
        res = float(np.max(np.abs(op.matvec(q) - gamma * q)))
        if res <= tol * norm_a and abs(gamma - gamma_old) <= 1e-14 * max(abs(gamma), 1.0):
            break
        gamma_old = gamma
    else:
        raise EigenSolverError("inverse iteration did not converge", res)
    if np.min(q) <= 0:
        raise EigenSolverError("principal eigenvector is not positive", res)
    return gamma, q


@dataclass(frozen=True)
class SpectralSolution:
    lam: float
    gamma: float
    c: float
    tau: float
    Q: np.ndarray = field(repr=False)
    r: float
    alpha: float
    grid: TraitGrid = field(repr=False)

    @property
    def mean_trait(self) -> float:
        """Mean dispersal coefficient ``int g_tau Q`` (the mean trait at tau = 1)."""
        return integrate_trait(self.grid.g_tau(self.tau) * self.Q, self.grid)


def dispersion_c(lam: float, tau: float, params: ModelParams, grid: TraitGrid,
                 tol: float = 1e-10) -> SpectralSolution:
    op = assemble_trait_operator(lam, tau, params, grid)
    gamma, q = principal_eigenpair(op, grid, tol=tol)
    c = (params.r + lam**2 * grid.theta_max - gamma) / lam
    return SpectralSolution(float(lam), gamma, c, float(tau), q, params.r, params.alpha, grid)


def dispersion_curve(lams, tau: float, params: ModelParams, grid: TraitGrid) -> list[SpectralSolution]:
    lams = [float(x) for x in lams]
    workers = max_workers()
    if workers == 1 or len(lams) < 2:
        return [dispersion_c(x, tau, params, grid) for x in lams]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda x: dispersion_c(x, tau, params, grid), lams))


def golden_section(f, lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Minimise a unimodal ``f`` on ``[lo, hi]`` to an interval of width ``tol``."""
    a, b = lo, hi
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = f(x2)
    return (x1, f1) if f1 <= f2 else (x2, f2)


@dataclass(frozen=True)
class RelationResiduals:
    R1: float
    R2: float
    R3: float
    R4: float
    R6: float

    def as_dict(self) -> dict:
        return {"R1": self.R1, "R2": self.R2, "R3": self.R3, "R4": self.R4, "R6": self.R6}


@dataclass(frozen=True)
class MinSpeedResult:
    c_star: float
    lambda_star: float
    Q_star: np.ndarray = field(repr=False)
    mean_trait: float
    theta0: float
    tau: float
    residuals: RelationResiduals
    solution: SpectralSolution = field(repr=False)
    local_minima: tuple[tuple[float, float], ...] = ()
    scan: tuple[SpectralSolution, ...] = field(default=(), repr=False)


def inflection_trait(sol: SpectralSolution) -> float:
    """Trait where the zeroth-order coefficient of the profile equation vanishes."""
    g0 = (sol.lam * sol.c - sol.r) / sol.lam**2
    grid = sol.grid
    if sol.tau == 0.0:
        return grid.theta_min
    return grid.theta_min + (g0 - grid.theta_min) / sol.tau


def verify_relations(sol: MinSpeedResult | SpectralSolution, curve_point: SpectralSolution) -> RelationResiduals:
    """Residuals of the five identities/inequalities tying ``c``, ``lam`` and ``Q``.

    R1 and R2 are evaluated at ``curve_point``; R3, R4, R6 at the minimiser.
    """
    grid = curve_point.grid
    lam, c, r = curve_point.lam, curve_point.c, curve_point.r
    mean = curve_point.mean_trait
    r1 = abs(-lam * c + lam**2 * mean + r)
    r2 = mean - 0.5 * (grid.theta_max + grid.theta_min)
    star = sol.solution if isinstance(sol, MinSpeedResult) else sol
    q2 = star.Q**2
    g = grid.g_tau(star.tau)
    ratio = integrate_trait(g * q2, grid) / integrate_trait(q2, grid)
    r3 = abs(star.c - 2.0 * star.lam * ratio)
    r4 = star.c - star.lam * (grid.theta_max + grid.theta_min)
    r6 = star.c - 2.0 * math.sqrt(star.r * star.mean_trait)
    return RelationResiduals(r1, r2, r3, r4, r6)


def minimize_speed(tau: float, params: ModelParams, grid: TraitGrid, lambda_lo: float = 0.05,
                   lambda_hi: float = 20.0, tol: float = 1e-8, n_scan: int = 64) -> MinSpeedResult:
    """Minimal speed over ``lam`` by a log-spaced scan refined with golden sections.

    Every interior local minimum of the scan is refined; the smallest speed
    wins and ties go to the smallest ``lam``.
    """
    if not 0 < lambda_lo < lambda_hi:
        raise ValueError("need 0 < lambda_lo < lambda_hi")
    lams = np.geomspace(lambda_lo, lambda_hi, n_scan)
    scan = dispersion_curve(lams, tau, params, grid)
    cs = np.array([s.c for s in scan])
    k_best = int(np.argmin(cs))
    if k_best == 0 or k_best == n_scan - 1:
        raise BracketError(
            f"minimum of c(lambda) at scan edge lambda={lams[k_best]:.4g}; widen [{lambda_lo}, {lambda_hi}]")
    candidates = [k for k in range(1, n_scan - 1) if cs[k] <= cs[k - 1] and cs[k] <= cs[k + 1]]

    def speed(x: float) -> float:
        return dispersion_c(x, tau, params, grid).c

    minima = []
    for k in candidates:
        lam_k, c_k = golden_section(speed, lams[k - 1], lams[k + 1], tol)
        minima.append((lam_k, c_k))
    lam_star, c_best = min(minima, key=lambda m: (m[1], m[0]))
    star = dispersion_c(lam_star, tau, params, grid)
    theta0 = inflection_trait(star)
    residuals = verify_relations(star, star)
    return MinSpeedResult(
        c_star=star.c, lambda_star=star.lam, Q_star=star.Q, mean_trait=star.mean_trait,
        theta0=theta0, tau=float(tau), residuals=residuals, solution=star,
        local_minima=tuple(minima), scan=tuple(scan))


@dataclass(frozen=True)
class ProfileShape:
    is_increasing: bool
    theta0_empirical: float
    n_crossings: int

    @property
    def degenerate(self) -> bool:
        return self.n_crossings == 0


def profile_shape(Q: np.ndarray, sol: SpectralSolution) -> ProfileShape:
    """Monotonicity of ``Q`` and the location where its second difference changes sign.

    The crossing is placed by linear interpolation of the second difference
    between the two bracketing nodes; the leftmost crossing is reported.
    """
    grid = sol.grid
    q = np.asarray(Q, dtype=float)
    scale = float(np.max(np.abs(q)))
    increasing = bool(np.all(np.diff(q) >= -1e-10 * scale))
    d2 = second_derivative_neumann(q, grid.h_theta)
    # second differences of a constant carry round-off of order eps * |Q| / h^2
    floor = max(1e-9 * float(np.max(np.abs(d2))), 1e-12 * scale / grid.h_theta**2)
    sign = np.where(np.abs(d2) <= floor, 0, np.sign(d2))
    idx = [i for i in range(len(q) - 1) if sign[i] * sign[i + 1] < 0]
    if not idx:
        return ProfileShape(increasing, float("nan"), 0)
    i = idx[0]
    t = d2[i] / (d2[i] - d2[i + 1])
    theta0 = grid.nodes[i] + t * grid.h_theta
    return ProfileShape(increasing, float(theta0), len(idx))
