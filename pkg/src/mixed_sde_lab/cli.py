"""Scenario runner: ``mixed-sde-lab <scenario> --config FILE [--seed S] [--out DIR]``.

Each run writes ``results.csv``, ``report.json`` and ``manifest.json`` into the
output directory. The manifest is written first with status "incomplete" and
rewritten when the run finishes, so partial outputs are always labelled.
Exit status is 0 iff every hard check of the scenario passed.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DomainError
from .malliavin import (
    derivative_field_fbm,
    directional_derivative_fd,
    duhamel_reconstruct,
    gradient_pairing_check,
    solve_variational_fbm,
    sobolev_norm_estimate,
    sup_relative_difference,
)
from .models import get_model, model_names
from .moments import (
    alpha_max,
    estimate_exp_moment,
    fernique_check,
    simulate_fbm_holder_norms,
    simulate_integral_norms,
    simulate_sup_norms,
    tail_gaussianity_check,
)
from .paths import hurst_value, sample_fbm, sample_fbm_paths, sample_wiener, sample_wiener_paths, smoothed_driver, substream
from .sde import convergence_study, pathwise_bound_sweep, solve_mixed, solve_smoothed
from .young import StepFunction, mixed_inner_product

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

OUT_ENV = "MIXED_SDE_LAB_OUT"
SECTIONS = ("run", "paths", "young", "sde", "malliavin", "moments")


class ConfigError(ValueError):
    def __init__(self, message, parameter=None, threshold=None):
        super().__init__(message)
        self.parameter = parameter
        self.threshold = threshold

    def record(self) -> dict:
        return {"status": "invalid-config", "error": str(self), "parameter": self.parameter,
                "threshold": self.threshold}


@dataclass
class ScenarioConfig:
    scenario: str = "simulate"
    model: str = "trig1d"
    x0: list | None = None
    H: float = 0.75
    T: float = 1.0
    N: int = 1024
    n: float = 32.0
    n_list: list = field(default_factory=lambda: [8, 16, 32, 64])
    seed: int = 0
    paths: int = 100
    batches: int = 4
    theta: float = 0.45
    mu: float = 0.7
    nu: float = 0.6
    kappa: float = 0.4
    alpha: float | None = None
    z: float = 1.0
    p: float = 2.0
    A: float = 1.0
    fernique_a: float = 1.5
    y: float = 0.5
    x_grid: list = field(default_factory=lambda: [0.5, 1.0, 1.5, 2.0])
    eps_list: list = field(default_factory=lambda: [1e-1, 1e-2, 1e-3, 1e-4])
    pairs: int = 5
    tolerance: float = 0.02
    duhamel_tolerance: float = 0.01
    spread_max: float = 0.2
    out: str | None = None

    @classmethod
    def from_mapping(cls, data: dict) -> ScenarioConfig:
        known = {f.name for f in fields(cls)}
        flat = {}
        for key, val in data.items():
            items = val.items() if isinstance(val, dict) else [(key, val)]
            if isinstance(val, dict) and key not in SECTIONS:
                raise ConfigError(f"unknown config section {key!r}; sections are {list(SECTIONS)}", key)
            for k, v in items:
                if k not in known:
                    raise ConfigError(f"unknown config key {k!r}", k)
                if k in flat:
                    raise ConfigError(f"config key {k!r} given twice", k)
                flat[k] = v
        return cls(**flat)


def _fail(msg, param, threshold=None):
    raise ConfigError(msg, param, threshold)


def validate(cfg: ScenarioConfig) -> None:
    """Check every parameter the scenario uses before any computation."""
    if cfg.scenario not in SCENARIOS:
        _fail(f"unknown scenario {cfg.scenario!r}", "scenario")
    if cfg.model not in model_names():
        _fail(f"unknown model {cfg.model!r}; choose from {model_names()}", "model")
    try:
        hurst_value(cfg.H)
    except DomainError as e:
        _fail(str(e), "H", [0.5, 1.0])
    if not (cfg.T > 0):
        _fail("T must be positive", "T", 0.0)
    if int(cfg.N) != cfg.N or cfg.N < 1:
        _fail("N must be an integer >= 1", "N", 1)
    if int(cfg.paths) != cfg.paths or cfg.paths < 1:
        _fail("paths must be an integer >= 1", "paths", 1)
    dt = cfg.T / cfg.N
    used = SCENARIOS[cfg.scenario].params
    if "n_list" in used:
        if not cfg.n_list:
            _fail("n_list must not be empty", "n_list")
        for n in cfg.n_list:
            if n < 1 or 1.0 / n < dt * (1 - 1e-9):
                _fail(f"smoothing rate n={n} needs 1 <= n <= 1/dt = {1 / dt:g}", "n_list", 1 / dt)
    if "n" in used and (cfg.n < 1 or 1.0 / cfg.n < dt * (1 - 1e-9)):
        _fail(f"smoothing rate n={cfg.n} needs 1 <= n <= 1/dt = {1 / dt:g}", "n", 1 / dt)
    if "mu" in used and not (0.5 < cfg.mu < cfg.H):
        _fail(f"μ must lie in (1/2, H) = (0.5, {cfg.H}), got {cfg.mu}", "mu", [0.5, cfg.H])
    if "theta" in used and not (1 - cfg.mu < cfg.theta < 0.5):
        _fail(f"θ must lie in (1-μ, 1/2) = ({1 - cfg.mu:g}, 0.5), got {cfg.theta}", "theta", [1 - cfg.mu, 0.5])
    if "kappa" in used and not (0 < cfg.kappa < 0.5):
        _fail(f"κ must lie in (0, 1/2), got {cfg.kappa}", "kappa", [0.0, 0.5])
    if "alpha" in used:
        amax = alpha_max(cfg.H)
        if cfg.alpha is not None and not (0 < cfg.alpha < amax):
            _fail(f"α = {cfg.alpha} must lie in (0, 4H/(2H+1)) = (0, {amax:.6g})", "alpha", amax)
    if "z" in used and cfg.z < 0:
        _fail("z must be non-negative", "z", 0.0)
    if "nu" in used and not (0 < cfg.nu < cfg.H):
        _fail(f"ν must lie in (0, H), got {cfg.nu}", "nu", cfg.H)
    if "fernique_a" in used and not (0 < cfg.fernique_a < 2):
        _fail(f"Fernique exponent must lie in (0, 2), got {cfg.fernique_a}", "fernique_a", 2.0)
    if "p" in used and cfg.p < 1:
        _fail("p must be >= 1", "p", 1.0)
    if "batches" in used and not (1 <= cfg.batches <= cfg.paths):
        _fail(f"batches must lie in [1, paths={cfg.paths}]", "batches", cfg.paths)
    if "A" in used and cfg.A < 0:
        _fail("A must be non-negative", "A", 0.0)
    if "eps_list" in used and (len(cfg.eps_list) < 2 or min(cfg.eps_list) <= 0):
        _fail("eps_list needs at least two positive values", "eps_list")
    if "pairs" in used and cfg.pairs < 1:
        _fail("pairs must be >= 1", "pairs", 1)
    if cfg.x0 is not None and len(cfg.x0) != get_model(cfg.model).d:
        _fail(f"x0 must have {get_model(cfg.model).d} entries", "x0")


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

def _x0(cfg, coeffs):
    return np.zeros(coeffs.d) if cfg.x0 is None else np.asarray(cfg.x0, dtype=np.float64)


def _f(x):
    return repr(float(x))


def run_simulate(cfg):
    coeffs = get_model(cfg.model)
    W = sample_wiener(cfg.N, cfg.T, coeffs.m, seed=substream(cfg.seed, "wiener", 0))
    B = sample_fbm(cfg.N, cfg.T, cfg.H, coeffs.l, seed=substream(cfg.seed, "fbm", 0))
    X = solve_mixed(coeffs, _x0(cfg, coeffs), W, B)
    rows = [["t"] + [f"x{i + 1}" for i in range(X.d)]]
    rows += [[_f(t)] + [_f(v) for v in row] for t, row in zip(X.times, X.values)]
    report = {"sup_norm": float(np.max(np.linalg.norm(X.values, axis=1))), "final": X.values[-1].tolist()}
    return rows, report, bool(np.all(np.isfinite(X.values)))


def run_converge(cfg):
    coeffs = get_model(cfg.model)
    table = convergence_study(coeffs, _x0(cfg, coeffs), cfg.T, cfg.N, list(cfg.n_list), (cfg.seed, cfg.paths), H=cfg.H)
    rows = [["n", "median_sup_error", "q25", "q75"]]
    rows += [[_f(r.n), _f(r.median), _f(r.q25), _f(r.q75)] for r in table.rows]
    ok = table.strictly_decreasing()
    return rows, {"medians": table.medians.tolist(), "strictly_decreasing": ok}, ok


def run_bound_check(cfg):
    coeffs = get_model(cfg.model)
    lhs, rhs = pathwise_bound_sweep(coeffs, _x0(cfg, coeffs), H=cfg.H, T=cfg.T, N=cfg.N, n_paths=cfg.paths,
                                    seed=cfg.seed, theta=cfg.theta, mu=cfg.mu)
    ok = lhs <= rhs
    rows = [["path", "lhs", "rhs", "satisfied"]]
    rows += [[str(i), _f(a), _f(b), str(bool(s))] for i, (a, b, s) in enumerate(zip(lhs, rhs, ok))]
    report = {"violations": int(np.sum(~ok)), "paths": cfg.paths, "min_slack": float(np.min(rhs - lhs)),
              "informational": coeffs.d > 1}
    return rows, report, bool(np.all(ok))


def malliavin_path(coeffs, x0, cfg, i):
    """Pairing-vs-FD relative error and Duhamel disagreement for driver path ``i``."""
    W = sample_wiener(cfg.N, cfg.T, coeffs.m, seed=substream(cfg.seed, "wiener", i))
    B = sample_fbm(cfg.N, cfg.T, cfg.H, coeffs.l, seed=substream(cfg.seed, "fbm", i))
    _, zdot = smoothed_driver(B, cfg.n)
    Xn = solve_smoothed(coeffs, x0, W, zdot)
    h = StepFunction(np.array([0.0, cfg.T]), np.ones((1, coeffs.l)))
    fields_q = [derivative_field_fbm(coeffs, Xn, W, zdot, cfg.n, q, t_times=[Xn.T]) for q in range(coeffs.l)]
    fd = directional_derivative_fd(coeffs, x0, W, B, h, cfg.eps_list, cfg.n, cfg.H)
    pr = gradient_pairing_check(fields_q, h, cfg.H, fd)
    s = Xn.times[Xn.N // 4]
    duh = max(
        sup_relative_difference(duhamel_reconstruct(coeffs, Xn, W, zdot, cfg.n, s, q),
                                solve_variational_fbm(coeffs, Xn, W, zdot, cfg.n, s, q))
        for q in range(coeffs.l)
    )
    return pr, fd, duh


def run_malliavin_check(cfg):
    coeffs = get_model(cfg.model)
    x0 = _x0(cfg, coeffs)
    rows = [["path", "rel_error", "duhamel_rel", "fd_eps", "fd_stable"]
            + [f"pairing_{i + 1}" for i in range(coeffs.d)] + [f"fd_{i + 1}" for i in range(coeffs.d)]]
    rel, duh = [], []
    for i in range(cfg.paths):
        pr, fd, dr = malliavin_path(coeffs, x0, cfg, i)
        rel.append(pr.rel_error)
        duh.append(dr)
        rows.append([str(i), _f(pr.rel_error), _f(dr), _f(fd.eps[fd.best]), str(fd.stable)]
                    + [_f(v) for v in pr.pairing] + [_f(v) for v in pr.fd])
    med = float(np.median(rel))
    ok = med <= cfg.tolerance and max(duh) <= cfg.duhamel_tolerance
    report = {"median_rel_error": med, "max_duhamel_rel": float(max(duh)), "tolerance": cfg.tolerance,
              "duhamel_tolerance": cfg.duhamel_tolerance}
    sob = sobolev_norm_estimate(coeffs, x0, H=cfg.H, T=cfg.T, N=cfg.N, n_list=tuple(cfg.n_list), p=cfg.p,
                                n_paths=cfg.paths, seed=cfg.seed, batches=min(cfg.batches, cfg.paths))
    report["sobolev"] = {"n_list": list(sob.n_list), "estimates": sob.estimates.tolist(), "spread": sob.spread,
                         "extrapolated": sob.extrapolated}
    return rows, report, bool(ok)


def run_moments(cfg):
    coeffs = get_model(cfg.model)
    alpha = 0.75 * alpha_max(cfg.H) if cfg.alpha is None else cfg.alpha
    sups = simulate_sup_norms(coeffs, _x0(cfg, coeffs), H=cfg.H, T=cfg.T, N=cfg.N, n_paths=cfg.paths, seed=cfg.seed)
    rep = estimate_exp_moment(sups, cfg.z, alpha, cfg.batches, H=cfg.H, seed=cfg.seed)
    norms = simulate_fbm_holder_norms(cfg.H, cfg.nu, cfg.T, cfg.N, cfg.paths, cfg.seed)
    fer = fernique_check(norms, cfg.fernique_a, cfg.y, cfg.batches, cfg.seed)
    ok = rep.spread < cfg.spread_max and rep.overflow == 0 and fer.passed
    report = {"exp_moment": rep.to_dict(), "fernique": {"moment": fer.moment.to_dict(), "slope": fer.slope,
              "slope_se": fer.slope_se, "slope_upper95": fer.slope_upper, "passed": fer.passed},
              "spread_max": cfg.spread_max}
    return rep.csv_rows(), report, bool(ok)


def run_tail_check(cfg):
    norms = simulate_integral_norms(cfg.A, cfg.kappa, cfg.T, cfg.N, cfg.paths, cfg.seed)
    rep = tail_gaussianity_check(norms, cfg.A, cfg.kappa, cfg.T, cfg.x_grid)
    rows = [["x", "empirical", "bound", "se", "satisfied", "status"]]
    rows += [[_f(r.x), _f(r.empirical), _f(r.bound), _f(r.se), str(r.satisfied), r.status] for r in rep.rows]
    return rows, {"mean": rep.mean, "n_samples": rep.n_samples, "satisfied": rep.satisfied}, rep.satisfied


def isometry_pairs(cfg):
    """Random grid-node indicator pairs: (t, s) for the fBm part, (t', s') for the Wiener part."""
    rng = np.random.default_rng(substream(cfg.seed, "isometry-pairs"))
    idx = rng.integers(1, cfg.N + 1, size=(cfg.pairs, 4))
    return idx * (cfg.T / cfg.N)


def run_isometry_check(cfg):
    B = sample_fbm_paths(cfg.paths, cfg.N, cfg.T, cfg.H, 1, cfg.seed)[..., 0]
    W = sample_wiener_paths(cfg.paths, cfg.N, cfg.T, 1, cfg.seed)[..., 0]
    rows = [["pair", "t", "s", "t_w", "s_w", "empirical", "theory", "se", "within_3se"]]
    ok_all = True
    for i, (t, s, tw, sw) in enumerate(isometry_pairs(cfg)):
        k = [int(round(v * cfg.N / cfg.T)) for v in (t, s, tw, sw)]
        prod = B[:, k[0]] * B[:, k[1]] + W[:, k[2]] * W[:, k[3]]
        emp = float(np.mean(prod))
        se = float(np.std(prod, ddof=1) / np.sqrt(prod.size))
        ind = StepFunction.indicator
        theory = mixed_inner_product(([ind(0, t)], [ind(0, tw)]), ([ind(0, s)], [ind(0, sw)]), cfg.H)
        ok = abs(emp - theory) <= 3 * se
        ok_all &= ok
        rows.append([str(i), _f(t), _f(s), _f(tw), _f(sw), _f(emp), _f(theory), _f(se), str(ok)])
    return rows, {"pairs": cfg.pairs, "all_within_3se": ok_all}, ok_all


@dataclass(frozen=True)
class Scenario:
    run: object
    params: tuple
    claim: str


SCENARIOS = {
    "simulate": Scenario(run_simulate, ("model", "x0", "H", "T", "N", "seed"),
                         "Euler solution of the mixed SDE (one path, CSV t,x1..xd)"),
    "converge": Scenario(run_converge, ("model", "x0", "H", "T", "N", "n_list", "paths", "seed"),
                         "uniform convergence X^n -> X of the smoothed approximation (input to Theorem 2)"),
    "bound-check": Scenario(run_bound_check, ("model", "x0", "H", "T", "N", "paths", "theta", "mu", "seed"),
                            "Lemma 2: explicit pathwise bound on sup|Y| through J and the driver seminorm"),
    "malliavin-check": Scenario(run_malliavin_check, ("model", "x0", "H", "T", "N", "n", "n_list", "eps_list", "p",
                                                      "paths", "batches", "seed"),
                                "Theorem 2: variational derivative vs finite differences, Duhamel formula, "
                                "uniform D^{1,p} bound in n"),
    "moments": Scenario(run_moments, ("model", "x0", "H", "T", "N", "paths", "batches", "alpha", "z", "nu",
                                      "fernique_a", "y", "seed"),
                        "Theorem 1: E exp(z sup|X|^α) finite for α < 4H/(2H+1); Fernique integrability"),
    "tail-check": Scenario(run_tail_check, ("A", "kappa", "T", "N", "paths", "x_grid", "seed"),
                           "Lemma 1: sub-Gaussian tail of Hölder norms of Itô integrals"),
    "isometry-check": Scenario(run_isometry_check, ("H", "T", "N", "paths", "pairs", "seed"),
                               "Isometry E<I(f),I(g)> = <f,g>_h for indicator step functions"),
}


def list_scenarios() -> str:
    lines = []
    for name, sc in SCENARIOS.items():
        lines.append(f"{name}\n    checks: {sc.claim}\n    parameters: {', '.join(sc.params)}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# execution and persistence
# ---------------------------------------------------------------------------

def _versions():
    import numba
    import scipy

    return {"package": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__}


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o)}")


def run(cfg: ScenarioConfig, out_dir=None) -> int:
    """Execute one scenario and persist its outputs; returns the process exit status."""
    out = Path(out_dir or cfg.out or os.environ.get(OUT_ENV) or Path("runs") / cfg.scenario)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"scenario": cfg.scenario, "config": asdict(cfg), "seed": cfg.seed, "versions": _versions(),
                "started": time.strftime("%Y-%m-%dT%H:%M:%S%z"), "status": "incomplete", "files": []}
    try:
        validate(cfg)
    except ConfigError as e:
        _write_json(out / "error.json", e.record())
        manifest.update(status="invalid-config", passed=False, files=["error.json"])
        _write_json(out / "manifest.json", manifest)
        print(json.dumps(e.record(), ensure_ascii=False), file=sys.stderr)
        return 2
    _write_json(out / "manifest.json", manifest)
    t0 = time.perf_counter()
    rows, report, passed = SCENARIOS[cfg.scenario].run(cfg)
    with open(out / "results.csv", "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)
    report = {"scenario": cfg.scenario, "passed": bool(passed), **report}
    _write_json(out / "report.json", report)
    manifest.update(status="complete", passed=bool(passed), wall_time_s=time.perf_counter() - t0,
                    files=["results.csv", "report.json"])
    _write_json(out / "manifest.json", manifest)
    print(f"{cfg.scenario}: {'PASS' if passed else 'FAIL'} -> {out}")
    return 0 if passed else 1


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def build_config(scenario, config_path=None, seed=None, out=None, overrides=()) -> ScenarioConfig:
    data = {}
    if config_path:
        with open(config_path, "rb") as fh:
            data = tomllib.load(fh)
    data = dict(data)
    data.pop("scenario", None)
    cfg = ScenarioConfig.from_mapping(data)
    cfg.scenario = scenario
    for item in overrides:
        key, _, val = item.partition("=")
        if key not in {f.name for f in fields(ScenarioConfig)}:
            raise ConfigError(f"unknown config key {key!r}", key)
        setattr(cfg, key, _parse_value(val))
    if seed is not None:
        cfg.seed = seed
    if out is not None:
        cfg.out = out
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mixed-sde-lab", description=__doc__.splitlines()[0])
    parser.add_argument("scenario", nargs="?", choices=list(SCENARIOS) + ["list"], help="scenario to run")
    parser.add_argument("--config", help="TOML config file (flat keys or [run]/[paths]/[sde]/... sections)")
    parser.add_argument("--seed", type=int, help="master seed (overrides the config)")
    parser.add_argument("--out", help=f"output directory (default ${OUT_ENV} or runs/<scenario>)")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key; VALUE is parsed as JSON when possible")
    args = parser.parse_args(argv)
    if args.scenario in (None, "list"):
        print(list_scenarios())
        return 0
    try:
        cfg = build_config(args.scenario, args.config, args.seed, args.out, args.set)
    except ConfigError as e:
        print(json.dumps(e.record(), ensure_ascii=False), file=sys.stderr)
        return 2
    except TypeError as e:
        print(json.dumps({"status": "invalid-config", "error": str(e)}), file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
