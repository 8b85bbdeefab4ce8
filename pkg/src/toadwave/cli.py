"""Command-line entry point: ``toadwave {spectral,slab,evolve,verify}``.

Configuration is JSON; every field has a default, so ``--config`` is
optional. Outputs are CSV (fields, curves) and JSON (summaries, reports), and
every JSON file embeds the resolved configuration and a schema version.

Exit codes: 0 success, 1 invalid configuration, 2 bracket or window
failure, 3 solver failure, 4 failed verification checks.
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import sys
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from . import analysis, evolution, slab, spectral
from .grid import GridError, make_trait_grid, slab_grid_per_unit
from .params import ModelParams

SCHEMA_VERSION = "toadwave/1"

DEFAULTS = {
    "params": {"alpha": 1.0, "r": 1.0, "theta_min": 1.0, "theta_max": 2.0},
    "spectral": {"n_theta": 400, "lambda_lo": 0.05, "lambda_hi": 20.0, "tol": 1e-8, "tau": 1.0},
    "slab": {"a_list": [20.0, 40.0, 80.0], "tau": 1.0, "epsilon": 0.01, "n_xi_per_unit": 10, "n_theta": 21},
    "evolution": {"x_min": -20.0, "x_max": None, "n_x": None, "h_x": 0.1, "dt": 0.02, "t_end": 100.0,
                  "thresholds": [0.1, 0.01, 0.001], "n_theta": 21, "initial_mass_width": 0.0},
    "analysis": {"seed": analysis.DEFAULT_SEED, "n_polys": 1000, "K_max": 64},
    "output_dir": "out",
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, extra: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in extra.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown configuration key '{where}'")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"'{where}' must be an object")
            out[key] = _merge(base[key], val, where + ".")
        else:
            out[key] = val
    return out


@dataclass(frozen=True)
class RunConfig:
    params: dict
    spectral: dict
    slab: dict
    evolution: dict
    analysis: dict
    output_dir: str

    @classmethod
    def from_dict(cls, raw: dict | None = None) -> RunConfig:
        merged = _merge(DEFAULTS, raw or {})
        cfg = cls(**merged)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | None) -> RunConfig:
        if path is None:
            return cls.from_dict({})
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config {path}: {err}") from err
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(raw)

    def validate(self):
        p = self.params
        for key in ("alpha", "r", "theta_min", "theta_max"):
            v = p[key]
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"params.{key} must be a finite number, got {v!r}")
            if v < 0 or (v == 0 and key != "r"):
                raise ConfigError(f"params.{key} must be positive (r may be zero), got {v}")
        if not p["theta_min"] < p["theta_max"]:
            raise ConfigError("params.theta_min must be < params.theta_max")
        eps = self.slab["epsilon"]
        if not 0 < eps < slab.EPS_CAP:
            raise ConfigError(f"slab.epsilon must lie in (0, {slab.EPS_CAP}), got {eps}")
        for sec in ("spectral", "slab"):
            tau = getattr(self, sec)["tau"]
            if not 0 <= tau <= 1:
                raise ConfigError(f"{sec}.tau must lie in [0, 1], got {tau}")
        if any(a <= 0 for a in self.slab["a_list"]):
            raise ConfigError("slab.a_list entries must be positive")
        ev = self.evolution
        if ev["dt"] <= 0 or ev["t_end"] <= 0:
            raise ConfigError("evolution.dt and evolution.t_end must be positive")
        if not all(0 < t < 1 for t in ev["thresholds"]):
            raise ConfigError("evolution.thresholds must lie in (0, 1)")

    def with_tau(self, tau: float | None) -> RunConfig:
        if tau is None:
            return self
        raw = self.as_dict()
        raw["spectral"]["tau"] = tau
        raw["slab"]["tau"] = tau
        return RunConfig.from_dict(raw)

    def as_dict(self) -> dict:
        return {"params": copy.deepcopy(self.params), "spectral": copy.deepcopy(self.spectral),
                "slab": copy.deepcopy(self.slab), "evolution": copy.deepcopy(self.evolution),
                "analysis": copy.deepcopy(self.analysis), "output_dir": self.output_dir}

    @property
    def model(self) -> ModelParams:
        return ModelParams(**{k: float(v) for k, v in self.params.items()})


# ---------------------------------------------------------------- writers

def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def write_json(path: Path, payload: dict, config: RunConfig):
    doc = dict(payload)
    doc["schema_version"] = SCHEMA_VERSION
    doc["config"] = config.as_dict()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(doc), sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header: list[str], rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _field_rows(field, x_name="xi"):
    xs = field.grid.xi_nodes if hasattr(field.grid, "xi_nodes") else field.grid.x_nodes
    th = field.grid.trait.nodes
    for i, x in enumerate(xs):
        for j, t in enumerate(th):
            yield float(x), float(t), float(field.values[i, j])


def _tag(a: float) -> str:
    return f"{a:g}".replace(".", "p")


# ---------------------------------------------------------------- pipelines

def run_spectral(config: RunConfig):
    sp = config.spectral
    grid = make_trait_grid(config.params["theta_min"], config.params["theta_max"], int(sp["n_theta"]))
    return spectral.minimize_speed(float(sp["tau"]), config.model, grid, sp["lambda_lo"], sp["lambda_hi"],
                                   tol=sp["tol"])


def minspeed_payload(res: spectral.MinSpeedResult) -> dict:
    return {"c_star": res.c_star, "lambda_star": res.lambda_star, "mean_trait": res.mean_trait,
            "theta0": res.theta0, "tau": res.tau, "residuals": res.residuals.as_dict(),
            "local_minima": [list(m) for m in res.local_minima],
            "theta": res.solution.grid.nodes, "Q_star": res.Q_star}


def cmd_spectral(config: RunConfig, out: Path) -> int:
    res = run_spectral(config)
    write_csv(out / "dispersion.csv", ["lambda", "gamma", "c"], ((s.lam, s.gamma, s.c) for s in res.scan))
    write_json(out / "minspeed.json", minspeed_payload(res), config)
    print(f"c* = {float(res.c_star)!r}  lambda* = {float(res.lambda_star)!r}")
    return 0


def run_slabs(config: RunConfig, c_star: float):
    s = config.slab
    tg = make_trait_grid(config.params["theta_min"], config.params["theta_max"], int(s["n_theta"]))
    sols, prev = [], None
    for k, a in enumerate(sorted(float(v) for v in s["a_list"])):
        grid = slab_grid_per_unit(a, int(s["n_xi_per_unit"]), tg)
        # the epsilon guard is measured once, on the narrowest slab
        sol = slab.solve_slab(grid, float(s["tau"]), float(s["epsilon"]), config.model, c_star,
                              check_threshold=(k == 0))
        sols.append(sol)
        prev = sol
    return sols, prev


def cmd_slab(config: RunConfig, out: Path) -> int:
    ms = run_spectral(config.with_tau(config.slab["tau"]))
    sols, _ = run_slabs(config, ms.c_star)
    for sol in sols:
        tag = _tag(sol.a)
        write_json(out / f"slab_a{tag}.json", {"a": sol.a, "tau": sol.tau, "epsilon": sol.epsilon, "c": sol.c,
                                              "iterations": sol.iterations, "residual": sol.residual}, config)
        write_csv(out / f"slab_a{tag}_mu.csv", ["xi", "theta", "mu"], _field_rows(sol.mu))
        write_csv(out / f"slab_a{tag}_nu.csv", ["xi", "nu"], zip(sol.grid.xi_nodes.tolist(), sol.nu.tolist()))
    gaps = [abs(s.c - ms.c_star) for s in sols]
    write_json(out / "convergence.json", {
        "c_star": ms.c_star, "pairs": [[s.a, s.c] for s in sols], "gaps": gaps,
        "gaps_decreasing": bool(all(b < a for a, b in zip(gaps, gaps[1:])))}, config)
    for s in sols:
        print(f"a = {s.a:g}: c = {s.c!r}  |c - c*| = {abs(s.c - ms.c_star):.3e}")
    return 0


def evolution_config(config: RunConfig, c_star: float | None) -> evolution.EvolutionConfig:
    ev = config.evolution
    p = config.params
    tg = make_trait_grid(p["theta_min"], p["theta_max"], int(ev["n_theta"]))
    x_min = float(ev["x_min"])
    if ev["x_max"] is not None:
        x_max = float(ev["x_max"])
    else:
        speed = c_star if c_star is not None else 2.0 * math.sqrt(p["r"] * p["theta_max"])
        x_max = float(math.ceil(1.2 * speed * ev["t_end"] + 10.0))
    n_x = int(ev["n_x"]) if ev["n_x"] is not None else int(round((x_max - x_min) / ev["h_x"])) + 1
    return evolution.EvolutionConfig(x_min, x_max, n_x, tg, float(p["alpha"]), float(p["r"]), float(ev["dt"]),
                                     float(ev["t_end"]), float(ev["initial_mass_width"]),
                                     tuple(float(t) for t in ev["thresholds"]))


def cmd_evolve(config: RunConfig, out: Path) -> int:
    ms = run_spectral(config) if config.params["r"] > 0 else None
    c_star = ms.c_star if ms is not None else None
    cfg = evolution_config(config, c_star)
    res = evolution.simulate(cfg, c_star)
    write_csv(out / "front.csv", ["t", "threshold", "position"], res.trace.rows())
    write_csv(out / "final_field.csv", ["x", "theta", "n"], _field_rows(res.final))
    summary = {"fitted_speed": {repr(k): v for k, v in res.trace.fitted_speed.items()},
               "fit_window": list(res.trace.fit_window), "c_star": c_star,
               "mass_drift_per_time": res.mass_drift_per_time,
               "mass_balance_per_time": res.mass_balance_per_time}
    if ms is not None:
        summary["relative_speed_error"] = {repr(k): abs(v - c_star) / c_star
                                           for k, v in res.trace.fitted_speed.items()}
        try:
            edge = evolution.edge_profile_check(res.final, ms)
            summary["edge"] = {"x_edge": edge.x_edge, "distance_to_Q_star": edge.distance,
                               "decay_rate": edge.decay_rate, "lambda_star": edge.lambda_star,
                               "rate_error": edge.rate_error}
        except evolution.EvolutionError as err:
            summary["edge"] = {"error": str(err)}
    write_json(out / "summary.json", summary, config)
    for k, v in res.trace.fitted_speed.items():
        print(f"threshold {k:g}: speed {v!r}")
    return 0


# ---------------------------------------------------------------- verification

class Context:
    """Lazily computed artefacts shared by the verification checks."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.params = config.model

    def trait(self, n: int):
        p = self.config.params
        return make_trait_grid(p["theta_min"], p["theta_max"], n)

    @cached_property
    def min_speed(self) -> spectral.MinSpeedResult:
        return run_spectral(self.config.with_tau(1.0))

    @cached_property
    def kpp_min_speed(self) -> spectral.MinSpeedResult:
        return run_spectral(self.config.with_tau(0.0))

    @cached_property
    def slabs(self):
        cfg = self.config.with_tau(1.0)
        sols, _ = run_slabs(cfg, self.min_speed.c_star)
        return sols

    @cached_property
    def simulation(self):
        cfg = evolution_config(self.config, self.min_speed.c_star)
        return evolution.simulate(cfg, self.min_speed.c_star)

    @cached_property
    def control(self):
        raw = self.config.as_dict()
        raw["params"]["theta_max"] = raw["params"]["theta_min"] + 1e-9
        cfg = RunConfig.from_dict(raw)
        speed = cfg.model.kpp_speed
        return evolution.simulate(evolution_config(cfg, speed), speed), speed


def _rel(ctx):
    return ctx.min_speed.residuals


def check_kpp_anchor(ctx):
    ms, p = ctx.kpp_min_speed, ctx.params
    c_err = abs(ms.c_star - p.kpp_speed) / p.kpp_speed
    l_err = abs(ms.lambda_star - math.sqrt(p.r / p.theta_min)) / math.sqrt(p.r / p.theta_min)
    return c_err <= 1e-6 and l_err <= 1e-6, {"c_rel_error": c_err, "lambda_rel_error": l_err}


def check_rel1(ctx):
    r1 = _rel(ctx).R1
    return r1 <= 1e-6, {"R1": r1}


def check_rel2(ctx):
    r2 = _rel(ctx).R2
    return r2 > 0, {"R2": r2}


def check_rel3(ctx):
    r3 = _rel(ctx).R3
    return abs(r3) <= 1e-5 * ctx.min_speed.c_star, {"R3": r3}


def check_rel4(ctx):
    r4 = _rel(ctx).R4
    return r4 >= -1e-8, {"R4": r4}


def check_rel6(ctx):
    r6 = _rel(ctx).R6
    return r6 > 0, {"R6": r6}


def check_profile_shape(ctx):
    ms = ctx.min_speed
    shape = spectral.profile_shape(ms.Q_star, ms.solution)
    h = ms.solution.grid.h_theta
    gap = abs(shape.theta0_empirical - ms.theta0)
    return bool(shape.is_increasing and gap <= 2 * h), {
        "increasing": shape.is_increasing, "theta0": ms.theta0, "theta0_empirical": shape.theta0_empirical,
        "gap_in_spacings": gap / h}


def check_slab_convergence(ctx):
    sols, cs = ctx.slabs, ctx.min_speed.c_star
    gaps = [abs(s.c - cs) for s in sols]
    ok = all(0 < s.c <= cs + 1e-3 for s in sols)
    ok &= all(b < a for a, b in zip(gaps, gaps[1:]))
    ok &= all(abs(s.nu_at_zero() - s.epsilon) <= 1e-8 for s in sols)
    ok &= all(float(s.mu.values.min()) >= 0.0 for s in sols)
    return bool(ok), {"a": [s.a for s in sols], "c": [s.c for s in sols], "gaps": gaps,
                      "min_mu": [float(s.mu.values.min()) for s in sols]}


def check_tau0_reduction(ctx):
    s = ctx.config.slab
    a = float(min(s["a_list"]))
    grid = slab_grid_per_unit(a, int(s["n_xi_per_unit"]), ctx.trait(int(s["n_theta"])))
    sol = slab.solve_slab(grid, 0.0, float(s["epsilon"]), ctx.params, ctx.params.kpp_speed)
    kpp = slab.solve_kpp_pinned(a, float(s["epsilon"]), grid.n_xi, ctx.params)
    err = float(np.max(np.abs(sol.nu - kpp.nu)))
    return err <= 1e-8, {"max_nu_difference": err, "c_2d": sol.c, "c_kpp": kpp.c}


def check_kpp_scalar(ctx):
    a = float(min(ctx.config.slab["a_list"]))
    n = 20 * int(a) + 1
    sols = [slab.solve_kpp_slab(c, a, n, ctx.params) for c in (0.5, 1.0, 1.5)]
    in_range = all(float(s.nu.min()) >= 0 and float(s.nu.max()) <= 1 for s in sols)
    dec = all(s.decreasing for s in sols)
    at0 = [s.at_zero() for s in sols]
    mono = all(y < x for x, y in zip(at0, at0[1:]))
    return in_range and dec and mono, {"nu0": at0, "in_range": in_range, "decreasing": dec}


def check_wave_limits(ctx):
    rep = analysis.wave_limit_checks(ctx.slabs, ctx.min_speed)
    ok = rep.m > 0 and rep.nu_ahead_ok
    return bool(ok), {"m": rep.m, "nu_at_0.8a": rep.nu_ahead, "decay_slope": rep.decay_slope,
                      "lambda_star": rep.lambda_star, "extrapolated_speed": rep.extrapolated_speed}


def check_harnack(ctx):
    s = ctx.config.slab
    a = float(min(s["a_list"]))
    eps = float(s["epsilon"])
    n_t, n_x = int(s["n_theta"]), int(s["n_xi_per_unit"])
    g0 = slab_grid_per_unit(a, n_x, ctx.trait(n_t))
    flat = analysis.harnack_ratios(slab.solve_slab(g0, 0.0, eps, ctx.params, ctx.params.kpp_speed).mu)
    coarse = analysis.harnack_ratios(slab.solve_slab(g0, 1.0, eps, ctx.params, ctx.min_speed.c_star).mu)
    g1 = slab_grid_per_unit(a, 2 * n_x, ctx.trait(2 * n_t - 1))
    fine = analysis.harnack_ratios(slab.solve_slab(g1, 1.0, eps, ctx.params, ctx.min_speed.c_star,
                                                   check_threshold=False).mu)
    change = abs(fine.global_ratio - coarse.global_ratio) / coarse.global_ratio
    ok = (abs(flat.global_ratio - 1) <= 1e-8 and math.isfinite(coarse.global_ratio) and change <= 0.10)
    return bool(ok), {"tau0_ratio": flat.global_ratio, "ratio": coarse.global_ratio,
                      "ratio_refined": fine.global_ratio, "relative_change": change}


def check_evolution_speed(ctx):
    res, cs = ctx.simulation, ctx.min_speed.c_star
    speeds = res.trace.fitted_speed
    errs = {repr(k): abs(v - cs) / cs for k, v in speeds.items()}
    vals = list(speeds.values())
    spread = (max(vals) - min(vals)) / min(vals)
    ctl, kpp = ctx.control
    ctl_err = abs(ctl.trace.fitted_speed[0.01] - kpp) / kpp
    ok = max(errs.values()) <= 0.05 and spread <= 0.03 and ctl_err <= 0.03
    return bool(ok), {"fitted_speed": {repr(k): v for k, v in speeds.items()}, "relative_error": errs,
                      "threshold_spread": spread, "control_error": ctl_err}


def check_edge_structure(ctx):
    rep = evolution.edge_profile_check(ctx.simulation.final, ctx.min_speed)
    ok = rep.distance <= 0.05 and rep.rate_error <= 0.10
    return bool(ok), {"distance": rep.distance, "decay_rate": rep.decay_rate, "lambda_star": rep.lambda_star,
                      "rate_error": rep.rate_error}


def check_fourier(ctx):
    a = ctx.config.analysis
    rep = analysis.fourier_suite(int(a["seed"]), int(a["n_polys"]), int(a["K_max"]))
    ok = rep["interpolation_failures"] == 0 and rep["holder_violations"] == 0
    return ok, rep


# name -> (suite, anchor, function)
CHECKS = {
    "kpp_anchor": ("spectral", "constant-diffusivity closed form for c* and lambda*", check_kpp_anchor),
    "rel1": ("spectral", "dispersion identity with the mean dispersal coefficient", check_rel1),
    "rel2": ("spectral", "mean trait above the midpoint (spatial sorting)", check_rel2),
    "rel3": ("spectral", "minimal speed from the Q^2-weighted mean", check_rel3),
    "rel4": ("spectral", "speed bound from the trait endpoints", check_rel4),
    "rel6": ("spectral", "c* above the KPP speed of the mean trait", check_rel6),
    "profile_shape": ("spectral", "Q* increasing, inflection at theta0", check_profile_shape),
    "slab_convergence": ("slab", "slab speeds below c* and converging with a", check_slab_convergence),
    "tau0_reduction": ("slab", "tau = 0 slab reduces to scalar Fisher-KPP", check_tau0_reduction),
    "kpp_scalar": ("slab", "scalar slab profile bounded, decreasing, monotone in c", check_kpp_scalar),
    "wave_limits": ("slab", "positive behind the front, vanishing ahead", check_wave_limits),
    "harnack": ("harnack", "trait ratio bounded up to the boundary", check_harnack),
    "evolution_speed": ("evolution", "spreading speed of the Cauchy problem", check_evolution_speed),
    "edge_structure": ("evolution", "edge trait profile and decay rate", check_edge_structure),
    "appendixB": ("appendixB", "Fourier interpolation and log-Hoelder estimates", check_fourier),
}


def run_checks(config: RunConfig, only: str | None = None) -> dict:
    ctx = Context(config)
    results = []
    for name, (suite, anchor, fn) in CHECKS.items():
        if only is not None and only not in (suite, name):
            continue
        try:
            ok, values = fn(ctx)
        except Exception as err:  # a crashing check is a failing check
            ok, values = False, {"error": f"{type(err).__name__}: {err}"}
        results.append({"name": name, "suite": suite, "anchor": anchor, "passed": bool(ok), "values": values})
    return {"checks": results, "passed": all(r["passed"] for r in results),
            "failed": [r["name"] for r in results if not r["passed"]]}


def cmd_verify(config: RunConfig, out: Path, only: str | None = None) -> int:
    known = {s for s, _, _ in CHECKS.values()} | set(CHECKS)
    if only is not None and only not in known:
        raise ConfigError(f"unknown suite '{only}'; choose from {sorted(known)}")
    report = run_checks(config, only)
    write_json(out / "verify.json", report, config)
    for r in report["checks"]:
        print(f"{'PASS' if r['passed'] else 'FAIL'}  {r['name']:<18} {r['anchor']}")
    if not report["passed"]:
        print("failed checks: " + ", ".join(report["failed"]), file=sys.stderr)
        return 4
    return 0


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="toadwave", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("spectral", "slab", "evolve", "verify"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--tau", type=float, help="homotopy parameter in [0, 1]")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        if name == "verify":
            p.add_argument("--only", help="run a single suite or check")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = RunConfig.load(args.config).with_tau(args.tau)
        out = Path(args.out or config.output_dir)
        if args.command == "spectral":
            return cmd_spectral(config, out)
        if args.command == "slab":
            return cmd_slab(config, out)
        if args.command == "evolve":
            return cmd_evolve(config, out)
        return cmd_verify(config, out, args.only)
    except (ConfigError, GridError, ValueError) as err:
        print(f"invalid configuration: {err}", file=sys.stderr)
        return 1
    except (spectral.BracketError, slab.SlabBracketError, evolution.WindowOverflowError) as err:
        print(f"bracket failure: {err}", file=sys.stderr)
        return 2
    except (spectral.EigenSolverError, slab.SlabError, evolution.EvolutionError) as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
