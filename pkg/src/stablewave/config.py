"""Experiment configuration: a flat ``key = value`` file with ``#`` comments."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .stable_measure import DENSITIES
from .wave_kernel import parse_sigma

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "serialize_config", "load_config"]


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class ExperimentConfig:
    alpha: float = 1.5
    a: float = 1.0
    seed: int = 0
    K: int = 10_000
    quad_tol: float = 1e-6
    sigma: str = "const:1"
    density: str = "cauchy"
    normalization: str = "unit"
    out: str = "out"
    # noise file to load instead of sampling (empty: sample from seed)
    noise: str = ""
    # eval-field grid, "lo:hi:n" per axis and a comma list of times
    grid_x1: str = "-1:1:5"
    grid_x2: str = "-1:1:5"
    times: str = "1"
    # multi-seed experiments use seeds seed, seed + 1, ...
    n_seeds: int = 20
    # hoelder
    probe: str = "0.3,0.2"
    T: float = 1.0
    n_levels: int = 8
    statistic: str = "max"
    # cf-test, over the unit square
    cf_u: str = "0.5,1,2"
    # blowup
    blowup_atoms: int = 5
    blowup_t: float = 1.0
    blowup_r_max: float = 1e-5
    blowup_r_min: float = 1e-9
    blowup_n_radii: int = 9
    # weak-check: first weak_k atoms against one bump
    weak_k: int = 100
    bump_center: str = "0,0"
    bump_t0: float = 1.0
    bump_radii: str = "1,1"
    # kernel-check
    kernel_configs: int = 1000

    def __post_init__(self):
        validate(self)

    # derived views ------------------------------------------------------

    def grid_points(self) -> np.ndarray:
        x1 = _parse_axis("grid_x1", self.grid_x1)
        x2 = _parse_axis("grid_x2", self.grid_x2)
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        return np.stack([X1.ravel(), X2.ravel()], axis=-1)

    def time_list(self) -> list[float]:
        return _parse_floats("times", self.times)

    def probe_point(self) -> np.ndarray:
        return np.array(_parse_floats("probe", self.probe, 2))

    def cf_grid(self) -> list[float]:
        return _parse_floats("cf_u", self.cf_u)

    def bump(self) -> tuple[tuple, tuple]:
        c = _parse_floats("bump_center", self.bump_center, 2)
        r = _parse_floats("bump_radii", self.bump_radii, 2)
        return ((c[0], c[1]), self.bump_t0), (r[0], r[1])

    def radii(self) -> np.ndarray:
        return np.geomspace(self.blowup_r_max, self.blowup_r_min, self.blowup_n_radii)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def _parse_floats(name: str, text: str, count: int | None = None) -> list[float]:
    try:
        vals = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(name, f"expected comma-separated numbers, got {text!r}") from None
    if not vals or (count is not None and len(vals) != count):
        raise ConfigError(name, f"expected {count or 'at least one'} number(s), got {text!r}")
    if not all(np.isfinite(vals)):
        raise ConfigError(name, "values must be finite")
    return vals


def _parse_axis(name: str, text: str) -> np.ndarray:
    parts = text.split(":")
    try:
        if len(parts) != 3:
            raise ValueError
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(name, f"expected lo:hi:n, got {text!r}") from None
    if n < 1 or not (np.isfinite(lo) and np.isfinite(hi)):
        raise ConfigError(name, "need finite bounds and n >= 1")
    return np.linspace(lo, hi, n)


def validate(cfg: ExperimentConfig) -> None:
    def need(ok: bool, name: str, msg: str):
        if not ok:
            raise ConfigError(name, msg)

    need(0.0 < cfg.alpha < 2.0 and cfg.alpha != 1.0, "alpha", f"must lie in (0, 2) and differ from 1, got {cfg.alpha!r}")
    need(cfg.a > 0 and np.isfinite(cfg.a), "a", "must be positive")
    need(cfg.seed >= 0, "seed", "must be non-negative")
    need(cfg.K >= 0, "K", "must be non-negative")
    need(cfg.quad_tol > 0, "quad_tol", "must be positive")
    try:
        parse_sigma(cfg.sigma)
    except ValueError as exc:
        raise ConfigError("sigma", str(exc)) from None
    need(cfg.density in DENSITIES, "density", f"choose from {sorted(DENSITIES)}")
    need(cfg.normalization in ("unit", "printed"), "normalization", "must be 'unit' or 'printed'")
    need(bool(cfg.out), "out", "must not be empty")
    cfg.grid_points()
    need(all(t >= 0 for t in cfg.time_list()), "times", "must be non-negative")
    need(cfg.n_seeds >= 1, "n_seeds", "must be at least 1")
    cfg.probe_point()
    need(cfg.T > 0, "T", "must be positive")
    need(cfg.n_levels >= 3, "n_levels", "need at least 3 dyadic scales")
    need(cfg.statistic in ("max", "median"), "statistic", "must be 'max' or 'median'")
    cfg.cf_grid()
    need(cfg.blowup_atoms >= 1, "blowup_atoms", "must be at least 1")
    need(cfg.blowup_t > 0, "blowup_t", "must be positive")
    need(cfg.blowup_r_max > cfg.blowup_r_min > 0, "blowup_r_max", "need blowup_r_max > blowup_r_min > 0")
    need(cfg.blowup_n_radii >= 2, "blowup_n_radii", "need at least 2 radii")
    need(cfg.weak_k >= 0, "weak_k", "must be non-negative")
    _, radii = cfg.bump()
    need(min(radii) > 0, "bump_radii", "must be positive")
    need(cfg.kernel_configs >= 1, "kernel_configs", "must be at least 1")


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def _convert(name: str, raw: str):
    typ = _FIELDS[name].type
    try:
        if typ in ("int", int):
            val = float(raw) if any(c in raw for c in ".eE") else int(raw)
            if isinstance(val, float):
                if not val.is_integer():
                    raise ValueError
                val = int(val)
            return val
        if typ in ("float", float):
            return float(raw)
    except ValueError:
        raise ConfigError(name, f"cannot parse {raw!r} as {typ}") from None
    return raw


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse ``key = value`` lines on top of ``base`` (defaults if omitted)."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"line {lineno}", f"expected key = value, got {raw.strip()!r}")
        if key not in _FIELDS:
            raise ConfigError(key, f"unknown configuration key (line {lineno})")
        values[key] = _convert(key, val.strip())
    return dataclasses.replace(base or ExperimentConfig(), **values)


def serialize_config(cfg: ExperimentConfig) -> str:
    out = []
    for f in fields(cfg):
        val = getattr(cfg, f.name)
        out.append(f"{f.name} = {val!r}" if isinstance(val, float) else f"{f.name} = {val}")
    return "\n".join(out) + "\n"


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())
