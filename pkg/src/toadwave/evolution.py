"""Time integration of the full model in one space dimension.

    n_t - theta n_xx - alpha n_thetatheta = r n (1 - rho),   rho = int n dtheta

Each step is a Lie splitting: reaction with ``rho`` frozen at the start of the
step (integrated exactly, so it stays explicit and positive), then an implicit
Euler solve in theta (Neumann mirror) and one in x (Dirichlet zero at both
ends). The invasion front is followed through level sets of ``rho``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded
from scipy.sparse.linalg import splu

from .grid import Field2D, SpaceGrid, TraitGrid, make_space_grid
from .spectral import MinSpeedResult

# above this alpha*dt/h_theta^2 the theta solve is replaced by its limit, the trait average
PROJECTION_STIFFNESS = 1e10


class EvolutionError(RuntimeError):
    pass


class InstabilityError(EvolutionError):
    def __init__(self, step: int, detail: str):
        super().__init__(f"instability at step {step}: {detail}")
        self.step = step


class WindowOverflowError(EvolutionError):
    """The front reached the right edge of the space window."""


@dataclass(frozen=True)
class EvolutionConfig:
    x_min: float
    x_max: float
    n_x: int
    trait: TraitGrid
    alpha: float
    r: float
    dt: float
    t_end: float
    initial_mass_width: float = 0.0
    thresholds: tuple[float, ...] = (0.1, 0.01, 0.001)
    record_every: float = 1.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.alpha <= 0 or self.r < 0:
            raise ValueError("need alpha > 0 and r >= 0")
        if self.r > 0 and self.t_end < 10.0 / self.r:
            raise ValueError(f"t_end={self.t_end} is shorter than 10/r = {10.0 / self.r:.4g}")
        if not all(0.0 < t < 1.0 for t in self.thresholds):
            raise ValueError(f"thresholds must lie in (0, 1), got {self.thresholds}")
        if self.n_x < 3 or not self.x_max > self.x_min:
            raise ValueError("need n_x >= 3 and x_max > x_min")
        if not self.x_min < self.initial_mass_width < self.x_max:
            raise ValueError("initial_mass_width must lie inside the window")

    @property
    def grid(self) -> SpaceGrid:
        return make_space_grid(self.x_min, self.x_max, self.n_x, self.trait)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def check_window(self, c_star: float):
        need = c_star * self.t_end * 1.2
        if self.x_max < need:
            raise WindowOverflowError(
                f"front reached window edge: x_max={self.x_max} < 1.2 * c* * t_end = {need:.4g}")


class _Stepper:
    """Factorisations shared by every step of one configuration."""

    def __init__(self, cfg: EvolutionConfig):
        self.cfg = cfg
        tg = cfg.trait
        self.w = tg.quad_weights
        self.nt, self.nx = tg.n_nodes, cfg.n_x
        k = cfg.alpha * cfg.dt / tg.h_theta**2
        self.project = k > PROJECTION_STIFFNESS
        # I - dt alpha D_thetatheta in banded form, mirror rows doubled
        ab = np.zeros((3, self.nt))
        ab[0, 1:] = -k
        ab[0, 1] = -2.0 * k
        ab[1, :] = 1.0 + 2.0 * k
        ab[2, :-1] = -k
        ab[2, -2] = -2.0 * k
        self.theta_ab = ab
        # I - dt theta_j D_xx on interior x nodes, one block per trait node
        m = self.nx - 2
        hx = (cfg.x_max - cfg.x_min) / (cfg.n_x - 1)
        lap = sp.diags([np.ones(m - 1), -2.0 * np.ones(m), np.ones(m - 1)], [-1, 0, 1]) / hx**2
        mat = sp.identity(m * self.nt) - cfg.dt * sp.kron(sp.diags(tg.nodes), lap)
        self.x_lu = splu(mat.tocsc())

    def __call__(self, n: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        rho = n @ self.w
        n = n * np.exp(cfg.r * cfg.dt * (1.0 - rho))[:, None]
        if self.project:
            n = np.repeat((n @ self.w / self.cfg.trait.length)[:, None], self.nt, axis=1)
        else:
            n = solve_banded((1, 1), self.theta_ab, n.T).T
        out = np.zeros_like(n)
        inner = n[1:-1].T.ravel()
        out[1:-1] = self.x_lu.solve(inner).reshape(self.nt, self.nx - 2).T
        return out


def step(n: Field2D, config: EvolutionConfig, stepper: _Stepper | None = None) -> Field2D:
    """Advance the field by one time step ``config.dt``."""
    stepper = stepper or _Stepper(config)
    vals = stepper(np.asarray(n.values, dtype=float))
    return Field2D(n.grid, vals)


def initial_field(config: EvolutionConfig) -> Field2D:
    grid = config.grid
    vals = np.zeros(grid.shape)
    vals[grid.x_nodes <= config.initial_mass_width] = 1.0 / config.trait.length
    vals[0] = vals[-1] = 0.0
    return Field2D(grid, vals)


def front_position(rho: np.ndarray, x: np.ndarray, threshold: float) -> float:
    """Rightmost x where ``rho`` falls through ``threshold``, linear between nodes."""
    idx = np.nonzero(rho >= threshold)[0]
    if idx.size == 0:
        return float("nan")
    i = int(idx[-1])
    if i == len(rho) - 1:
        return float(x[-1])
    t = (rho[i] - threshold) / (rho[i] - rho[i + 1])
    return float(x[i] + t * (x[i + 1] - x[i]))


@dataclass(frozen=True)
class FrontTrace:
    times: np.ndarray = field(repr=False)
    positions: dict = field(repr=False)
    fitted_speed: dict
    fit_window: tuple[float, float]

    def rows(self):
        """``(t, threshold, position)`` triples in time-major order."""
        for k, t in enumerate(self.times):
            for thr in sorted(self.positions, reverse=True):
                yield float(t), thr, float(self.positions[thr][k])


@dataclass(frozen=True)
class SimulationResult:
    trace: FrontTrace
    final: Field2D = field(repr=False)
    mass: np.ndarray = field(repr=False)
    outflow: np.ndarray = field(repr=False)

    def _per_time(self, series: np.ndarray) -> float:
        if len(series) < 2 or self.mass[0] == 0:
            return 0.0
        dt = np.diff(self.trace.times)
        return float(np.max(np.abs(np.diff(series)) / dt) / abs(self.mass[0]))

    @property
    def mass_drift_per_time(self) -> float:
        """Largest relative change of total mass per unit time."""
        return self._per_time(self.mass)

    @property
    def mass_balance_per_time(self) -> float:
        """Same, after adding back what left through the two Dirichlet ends."""
        return self._per_time(self.mass + self.outflow)


def _fit_speed(times: np.ndarray, pos: np.ndarray, t_lo: float) -> float:
    sel = (times >= t_lo) & np.isfinite(pos)
    if sel.sum() < 2:
        return float("nan")
    slope, _ = np.polyfit(times[sel], pos[sel], 1)
    return float(slope)


def simulate(config: EvolutionConfig, c_star: float | None = None,
             initial: Field2D | None = None) -> SimulationResult:
    """Evolve from the indicator initial datum and track the front.

    Positions are recorded every ``record_every`` time units; the speed per
    threshold is the least-squares slope over the second half of the run.
    """
    if c_star is not None:
        config.check_window(c_star)
    stepper = _Stepper(config)
    field0 = initial or initial_field(config)
    grid = field0.grid
    x = grid.x_nodes
    hx = grid.h_x
    n = field0.values.copy()
    every = max(1, int(round(config.record_every / config.dt)))
    guard = config.n_x - 1 - 10
    times, mass, outflow = [0.0], [], [0.0]
    positions = {thr: [] for thr in config.thresholds}
    # implicit x-solve loses exactly dt/h * theta * (n_1 + n_{N-2}) through the ends
    flux_w = config.dt / hx * stepper.w * config.trait.nodes
    gone = 0.0

    def record(vals):
        rho = vals @ stepper.w
        mass.append(float(hx * rho.sum()))
        for thr in config.thresholds:
            positions[thr].append(front_position(rho, x, thr))
        return rho

    record(n)
    for k in range(1, config.n_steps + 1):
        n = stepper(n)
        gone += float((n[1] + n[-2]) @ flux_w)
        if k % every == 0 or k == config.n_steps:
            lo = float(n.min())
            if not np.all(np.isfinite(n)):
                raise InstabilityError(k, "non-finite value")
            if lo < -1e-10:
                raise InstabilityError(k, f"negative value {lo:.3e}")
            rho = record(n)
            times.append(k * config.dt)
            outflow.append(gone)
            last = np.nonzero(rho >= min(config.thresholds))[0]
            if last.size and last[-1] >= guard:
                raise WindowOverflowError(
                    f"front reached window edge at t={k * config.dt:.4g} (x_max={config.x_max})")
    times_a = np.asarray(times)
    pos = {thr: np.asarray(v) for thr, v in positions.items()}
    t_lo = 0.5 * config.t_end
    speeds = {thr: _fit_speed(times_a, p, t_lo) for thr, p in pos.items()}
    trace = FrontTrace(times_a, pos, speeds, (t_lo, float(times_a[-1])))
    return SimulationResult(trace, Field2D(grid, n), np.asarray(mass), np.asarray(outflow))


@dataclass(frozen=True)
class EdgeReport:
    x_edge: float
    distance: float
    decay_rate: float
    lambda_star: float
    slice: np.ndarray = field(repr=False)

    @property
    def rate_error(self) -> float:
        return abs(self.decay_rate - self.lambda_star) / self.lambda_star


def edge_profile_check(final: Field2D, min_speed: MinSpeedResult, level: float = 0.01,
                       decades: float = 4.0) -> EdgeReport:
    """Trait slice at the ``rho = level`` front against ``Q*``, and the decay rate ahead.

    The slice is interpolated linearly in x, normalised to unit mass and
    compared with ``Q*`` in max norm on the rescaled trait variable
    ``(theta - theta_min) / |Theta|``, so the figure does not depend on
    the length of the trait interval. The decay rate is the least-squares
    log-slope of ``rho`` over the ``decades`` decades below ``level``.
    """
    grid = final.grid
    tg = grid.trait
    x = grid.x_nodes
    rho = final.marginal()
    x_edge = front_position(rho, x, level)
    if not math.isfinite(x_edge):
        raise EvolutionError(f"rho never reaches {level}")
    i = int(np.searchsorted(x, x_edge)) - 1
    t = (x_edge - x[i]) / (x[i + 1] - x[i])
    sl = (1 - t) * final.values[i] + t * final.values[i + 1]
    sl = sl / (sl @ tg.quad_weights)
    sg = min_speed.solution.grid
    q = np.interp((tg.nodes - tg.theta_min) / tg.length, (sg.nodes - sg.theta_min) / sg.length,
                  min_speed.Q_star * sg.length)
    distance = float(np.max(np.abs(sl * tg.length - q)))
    ahead = (x >= x_edge) & (rho > 0) & (rho >= level * 10.0**-decades)
    ahead[: i + 1] = False
    idx = np.nonzero(ahead)[0]
    # keep the contiguous run right of the edge
    if idx.size:
        stop = np.nonzero(np.diff(idx) > 1)[0]
        idx = idx[: stop[0] + 1] if stop.size else idx
    if idx.size < 2:
        rate = float("nan")
    else:
        slope, _ = np.polyfit(x[idx], np.log(rho[idx]), 1)
        rate = float(-slope)
    return EdgeReport(float(x_edge), distance, rate, float(min_speed.lambda_star), sl)


def default_config(trait: TraitGrid, alpha: float = 1.0, r: float = 1.0, t_end: float = 100.0,
                   dt: float = 0.02, h_x: float = 0.1, c_star: float | None = None) -> EvolutionConfig:
    """Window sized for the run: 20 units behind the start and 1.2 c* t_end + 10 ahead."""
    speed = c_star if c_star is not None else 2.0 * math.sqrt(r * trait.theta_max)
    x_min = -20.0
    x_max = math.ceil(1.2 * speed * t_end + 10.0)
    n_x = int(round((x_max - x_min) / h_x)) + 1
    return EvolutionConfig(x_min, float(x_max), n_x, trait, alpha, r, dt, t_end)
