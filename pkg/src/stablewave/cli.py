"""Command-line experiment runner.

Every subcommand resolves an :class:`ExperimentConfig` (defaults, then an
optional ``--config`` file, then flag overrides), writes its CSV output to
the ``out`` directory and echoes the resolved config to ``manifest.txt``.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config, parse_config, serialize_config
from .field import blowup_probe, evaluate_U_grid, hoelder_exponent, isolated_atoms
from .io import load_noise, save_noise
from .quadrature import QuadratureError
from .stable_measure import Rectangle, StableParams, empirical_cf, measure_of_set, sample_series
from .wave_kernel import (
    SigmaCoefficient,
    WaveKernelParams,
    kernel_alpha_norm,
    kernel_alpha_norm_bound,
    kernel_values,
    parse_sigma,
)
from .weak_solution import make_bump, weak_residual

COMMANDS = ("sample-noise", "cf-test", "eval-field", "hoelder", "blowup", "weak-check", "kernel-check")


def _series(cfg: ExperimentConfig, seed: int | None = None):
    if cfg.noise and seed is None:
        return load_noise(cfg.noise)
    params = StableParams(cfg.alpha, cfg.density, cfg.normalization)
    return sample_series(params, cfg.seed if seed is None else seed, cfg.K)


def _kparams(cfg: ExperimentConfig) -> WaveKernelParams:
    return WaveKernelParams(a=cfg.a, quad_tol=cfg.quad_tol)


def _seeds(cfg: ExperimentConfig) -> range:
    return range(cfg.seed, cfg.seed + cfg.n_seeds)


def _g(x: float) -> str:
    return f"{x:.17g}"


def cmd_sample_noise(cfg: ExperimentConfig, out: Path) -> list[Path]:
    return [save_noise(_series(cfg), out / "noise.txt")]


def cmd_cf_test(cfg: ExperimentConfig, out: Path) -> list[Path]:
    params = StableParams(cfg.alpha, cfg.density, cfg.normalization)
    square = Rectangle(0.0, 1.0, 0.0, 1.0)
    samples = [measure_of_set(sample_series(params, s, cfg.K), square) for s in _seeds(cfg)]
    u = np.array(cfg.cf_grid())
    ecf = empirical_cf(samples, u)
    target = np.exp(-np.abs(u) ** cfg.alpha)
    z = ecf.z_scores(target)
    lines = ["u,cf,stderr,target,z"]
    for row in zip(u, ecf.cf_values, ecf.std_errors, target, z):
        lines.append(",".join(_g(v) for v in row))
    lines.append(f"# n_samples={ecf.n_samples} max_abs_z={float(np.max(np.abs(z))):.6g}")
    path = out / "cf_test.csv"
    path.write_text("\n".join(lines) + "\n")
    return [path]


def cmd_eval_field(cfg: ExperimentConfig, out: Path) -> list[Path]:
    series = _series(cfg)
    sigma = parse_sigma(cfg.sigma)
    pts = cfg.grid_points()
    times = cfg.time_list()
    xs = np.concatenate([pts] * len(times))
    ts = np.repeat(times, pts.shape[0])
    prov = {"noise": cfg.noise or "sampled"}
    sample = evaluate_U_grid(series, xs, ts, sigma, _kparams(cfg), provenance=prov)
    path = out / "field.csv"
    path.write_text(sample.to_csv())
    return [path]


def cmd_hoelder(cfg: ExperimentConfig, out: Path) -> list[Path]:
    sigma = parse_sigma(cfg.sigma)
    params = _kparams(cfg)
    x = cfg.probe_point()
    seeds = [None] if cfg.noise else list(_seeds(cfg))
    lines = ["seed,exponent,intercept,r_squared"]
    exps = []
    for seed in seeds:
        series = _series(cfg, seed)
        est = hoelder_exponent(series, x, cfg.T, cfg.n_levels, sigma, params, cfg.statistic)
        exps.append(est.exponent)
        lines.append(f"{series.seed},{_g(est.exponent)},{_g(est.intercept)},{_g(est.r_squared)}")
    lines.append(f"# median_exponent={float(np.median(exps)):.17g} n_paths={len(exps)} statistic={cfg.statistic}")
    path = out / "hoelder.csv"
    path.write_text("\n".join(lines) + "\n")
    return [path]


def cmd_blowup(cfg: ExperimentConfig, out: Path) -> list[Path]:
    series = _series(cfg)
    sigma = parse_sigma(cfg.sigma)
    params = _kparams(cfg)
    radii = cfg.radii()
    within = 0.5 * cfg.a * cfg.blowup_t
    atoms = isolated_atoms(series, cfg.blowup_atoms, 100.0 * cfg.blowup_r_max, within=within)
    if not atoms:
        raise ValueError(f"no atom within {within:g} of the origin is isolated at scale {100 * cfg.blowup_r_max:g}")
    table = ["k,radius,U"]
    summary = ["k,slope,predicted_slope,relative_error"]
    for k in atoms:
        res = blowup_probe(series, k, cfg.blowup_t, radii, (1.0, 0.0), sigma, params)
        for r, v in zip(res.radii, res.values):
            table.append(f"{k + 1},{_g(r)},{_g(v)}")
        rel = abs(res.slope / res.predicted_slope - 1.0) if res.predicted_slope else math.nan
        summary.append(f"{k + 1},{_g(res.slope)},{_g(res.predicted_slope)},{rel:.6g}")
    p1, p2 = out / "blowup.csv", out / "blowup_slopes.csv"
    p1.write_text("\n".join(table) + "\n")
    p2.write_text("\n".join(summary) + "\n")
    return [p1, p2]


def cmd_weak_check(cfg: ExperimentConfig, out: Path) -> list[Path]:
    series = _series(cfg).head(cfg.weak_k)
    center, radii = cfg.bump()
    report = weak_residual(make_bump(center, radii), series, parse_sigma(cfg.sigma), _kparams(cfg))
    path = out / "weak_check.csv"
    path.write_text(report.to_csv())
    return [path]


def cmd_kernel_check(cfg: ExperimentConfig, out: Path) -> list[Path]:
    params = _kparams(cfg)
    rng = np.random.default_rng(cfg.seed)
    n = cfg.kernel_configs
    t = rng.uniform(0.1, 2.0, n)
    r = cfg.a * t * rng.uniform(0.01, 0.99, n)
    ang = rng.uniform(0.0, 2.0 * math.pi, n)
    y = rng.uniform(-1.0, 1.0, (n, 2))
    x = y + r[:, None] * np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    # same coefficient without the constant flag, so the quadrature path runs
    one = parse_sigma("const:1")
    generic = SigmaCoefficient(one.eval, 1.0, 1.0, "const:1 (quadrature)")
    quad = kernel_values(x, y, t, generic, params)
    closed = kernel_values(x, y, t, one, params)
    # sigma(y, tau) = tau has G = (t acosh(a t / r) - sqrt(a^2 t^2 - r^2) / a) / (2 pi a^2)
    a = cfg.a
    linear = SigmaCoefficient(lambda _x, tau: tau, float(t.max()), 1.0, "linear")
    lin_quad = kernel_values(x, y, t, linear, params)
    lin_exact = (t * np.arccosh(a * t / r) - np.sqrt((a * t) ** 2 - r**2) / a) / (2.0 * math.pi * a * a)
    closed_diff = float(np.max(np.abs(quad - closed)))
    lin_diff = float(np.max(np.abs(lin_quad - lin_exact)))
    sigma = parse_sigma(cfg.sigma)
    norm = kernel_alpha_norm((0.0, 0.0), 1.0, sigma, cfg.alpha, params)
    norm_half = kernel_alpha_norm((0.0, 0.0), 1.0, sigma, cfg.alpha, params, tol=0.5 * cfg.quad_tol)
    bound = kernel_alpha_norm_bound(1.0, sigma.bound_C, cfg.alpha, cfg.a)
    lines = [
        "check,value,reference,abs_diff",
        f"closed_form_max_diff,{_g(closed_diff)},0,{_g(closed_diff)}",
        f"linear_sigma_max_diff,{_g(lin_diff)},0,{_g(lin_diff)}",
        f"alpha_norm_vs_halved_tol,{_g(norm)},{_g(norm_half)},{_g(abs(norm - norm_half))}",
        f"alpha_norm_vs_bound,{_g(norm)},{_g(bound)},{_g(bound - norm)}",
    ]
    path = out / "kernel_check.csv"
    path.write_text("\n".join(lines) + "\n")
    return [path]


HANDLERS = {
    "sample-noise": cmd_sample_noise,
    "cf-test": cmd_cf_test,
    "eval-field": cmd_eval_field,
    "hoelder": cmd_hoelder,
    "blowup": cmd_blowup,
    "weak-check": cmd_weak_check,
    "kernel-check": cmd_kernel_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stablewave", description="Stochastic wave equation with stable noise.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--k-terms", type=int, dest="K")
    parser.add_argument("--quad-tol", type=float, dest="quad_tol")
    parser.add_argument("--sigma")
    parser.add_argument("--out")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.set:
        cfg = parse_config("\n".join(args.set), cfg)
    overrides = {k: getattr(args, k) for k in ("alpha", "seed", "K", "quad_tol", "sigma", "out")}
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return cfg.replace(**overrides) if overrides else cfg


def run(command: str, cfg: ExperimentConfig) -> list[Path]:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.txt").write_text(f"# command: {command}\n" + serialize_config(cfg))
    return HANDLERS[command](cfg, out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"stablewave: invalid config: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"stablewave: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        paths = run(args.command, cfg)
    except (ValueError, ArithmeticError, OSError, QuadratureError) as exc:
        print(f"stablewave {args.command}: {exc}", file=sys.stderr)
        return 1
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
