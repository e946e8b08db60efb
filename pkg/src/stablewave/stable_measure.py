"""Truncated LePage series for a planar symmetric alpha-stable random measure.

A realization is the triple of sequences ``(gamma_k, xi_k, g_k)``: Poisson
arrival times, atoms drawn from a sampling density ``phi`` on the plane and
centered Gaussian marks with ``E|g|^alpha = 1``.  The measure of a set and the
stochastic integral of a function are the weighted partial sums

    M(A) = c * sum_k gamma_k^(-1/alpha) phi(xi_k)^(-1/alpha) 1_A(xi_k) g_k
    I(f) = c * sum_k gamma_k^(-1/alpha) phi(xi_k)^(-1/alpha) f(xi_k) g_k .
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .quadrature import QuadratureError, cubature, pointwise, smoothstep

__all__ = [
    "DENSITIES",
    "StableParams",
    "TruncatedLePage",
    "EmpiricalCF",
    "Rectangle",
    "Disk",
    "DisjointUnion",
    "lepage_constant",
    "series_constant",
    "gaussian_alpha_scale",
    "sample_series",
    "measure_of_set",
    "integrate_function",
    "alpha_norm_numeric",
    "empirical_cf",
]


def _cauchy_pdf(x: np.ndarray) -> np.ndarray:
    r2 = np.sum(np.square(x), axis=-1)
    return (1.0 + r2) ** -1.5 / (2.0 * math.pi)


def _cauchy_sample(rng: np.random.Generator, n: int) -> np.ndarray:
    # P(|X| > r) = (1 + r^2)^(-1/2); invert with U in (0, 1].  One row per
    # atom keeps a K-term draw a prefix of any longer draw.
    draws = rng.random((n, 2))
    u = 1.0 - draws[:, 0]
    theta = draws[:, 1] * (2.0 * math.pi)
    radius = np.sqrt(1.0 / (u * u) - 1.0)
    return np.stack([radius * np.cos(theta), radius * np.sin(theta)], axis=-1)


def _gauss_pdf(x: np.ndarray) -> np.ndarray:
    r2 = np.sum(np.square(x), axis=-1)
    return np.exp(-0.5 * r2) / (2.0 * math.pi)


def _gauss_sample(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.standard_normal((n, 2))


# id -> (pdf, sampler)
DENSITIES: dict[str, tuple[Callable, Callable]] = {
    "cauchy": (_cauchy_pdf, _cauchy_sample),
    "gaussian": (_gauss_pdf, _gauss_sample),
}


def _check_alpha(alpha: float) -> None:
    if not (0.0 < alpha < 2.0):
        raise ValueError(f"alpha must lie in (0, 2), got {alpha!r}")
    if alpha == 1.0:
        raise ValueError("alpha = 1 is excluded: the series constant degenerates to 0/0 there")


def lepage_constant(alpha: float) -> float:
    """``(Gamma(2 - alpha) cos(pi alpha / 2) / (1 - alpha))^(1/alpha)``.

    This is the constant exactly as printed next to the LePage series.  It is
    the *reciprocal* of the factor that gives ``M(A)`` unit scale per unit
    area; sums in this package use :func:`series_constant` instead.

    >>> round(lepage_constant(0.5), 12) == round(math.pi / 2, 12)
    True
    """
    _check_alpha(alpha)
    base = special.gamma(2.0 - alpha) * math.cos(math.pi * alpha / 2.0) / (1.0 - alpha)
    return float(base ** (1.0 / alpha))


def series_constant(params: "StableParams") -> float:
    """Prefactor applied to every LePage sum for the chosen normalization."""
    c = lepage_constant(params.alpha)
    return 1.0 / c if params.normalization == "unit" else c


def gaussian_alpha_scale(alpha: float) -> float:
    """Standard deviation ``s`` with ``E|N(0, s^2)|^alpha = 1``."""
    if not (0.0 < alpha <= 2.0):
        raise ValueError(f"alpha must lie in (0, 2], got {alpha!r}")
    moment = 2.0 ** (alpha / 2.0) * special.gamma((alpha + 1.0) / 2.0) / math.sqrt(math.pi)
    return float(moment ** (-1.0 / alpha))


@dataclass(frozen=True)
class StableParams:
    alpha: float
    density_id: str = "cauchy"
    normalization: str = "unit"

    def __post_init__(self):
        _check_alpha(self.alpha)
        if self.density_id not in DENSITIES:
            raise ValueError(f"unknown density {self.density_id!r}; choose from {sorted(DENSITIES)}")
        if self.normalization not in ("unit", "printed"):
            raise ValueError("normalization must be 'unit' or 'printed'")

    def density(self, x: np.ndarray) -> np.ndarray:
        return DENSITIES[self.density_id][0](np.asarray(x, dtype=float))


@dataclass(frozen=True, eq=False)
class TruncatedLePage:
    """One K-term realization of the LePage series.  Immutable."""

    params: StableParams
    seed: int
    gammas: np.ndarray
    atoms: np.ndarray
    gaussians: np.ndarray

    def __post_init__(self):
        gammas = np.ascontiguousarray(self.gammas, dtype=float).reshape(-1)
        atoms = np.ascontiguousarray(self.atoms, dtype=float).reshape(-1, 2)
        gaussians = np.ascontiguousarray(self.gaussians, dtype=float).reshape(-1)
        if not (gammas.size == atoms.shape[0] == gaussians.size):
            raise ValueError("gammas, atoms and gaussians must have the same length")
        if gammas.size and (gammas[0] <= 0 or np.any(np.diff(gammas) <= 0)):
            raise ValueError("gammas must be positive and strictly increasing")
        for name, arr in (("gammas", gammas), ("atoms", atoms), ("gaussians", gaussians)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def K(self) -> int:
        return self.gammas.size

    @property
    def alpha(self) -> float:
        return self.params.alpha

    @cached_property
    def constant(self) -> float:
        return series_constant(self.params)

    @cached_property
    def density_values(self) -> np.ndarray:
        return self.params.density(self.atoms)

    @cached_property
    def amplitudes(self) -> np.ndarray:
        """``c * gamma_k^(-1/alpha) * phi(xi_k)^(-1/alpha)``, without the mark."""
        inv = -1.0 / self.alpha
        amp = self.constant * self.gammas**inv * self.density_values**inv
        amp.setflags(write=False)
        return amp

    @cached_property
    def weights(self) -> np.ndarray:
        """Full per-atom weights including the Gaussian marks."""
        w = self.amplitudes * self.gaussians
        w.setflags(write=False)
        return w

    def head(self, n: int) -> "TruncatedLePage":
        """The first ``n`` terms, itself a valid truncated series."""
        return TruncatedLePage(self.params, self.seed, self.gammas[:n], self.atoms[:n], self.gaussians[:n])

    def __eq__(self, other):
        if not isinstance(other, TruncatedLePage):
            return NotImplemented
        return (
            self.params == other.params
            and self.seed == other.seed
            and np.array_equal(self.gammas, other.gammas)
            and np.array_equal(self.atoms, other.atoms)
            and np.array_equal(self.gaussians, other.gaussians)
        )

    __hash__ = None


def sample_series(params: StableParams, seed: int, K: int) -> TruncatedLePage:
    """Draw a K-term realization from three independent streams split off ``seed``."""
    if K < 0:
        raise ValueError("K must be non-negative")
    streams = np.random.SeedSequence(seed).spawn(3)
    rng_gamma, rng_xi, rng_g = (np.random.default_rng(s) for s in streams)
    gammas = np.cumsum(rng_gamma.standard_exponential(K))
    atoms = DENSITIES[params.density_id][1](rng_xi, K)
    gaussians = rng_g.standard_normal(K) * gaussian_alpha_scale(params.alpha)
    return TruncatedLePage(params, int(seed), gammas, atoms, gaussians)


# -- planar regions ---------------------------------------------------------


@dataclass(frozen=True)
class Rectangle:
    x0: float
    x1: float
    y0: float
    y1: float

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        # half-open, so that tilings are disjoint
        return (x >= self.x0) & (x < self.x1) & (y >= self.y0) & (y < self.y1)


@dataclass(frozen=True)
class Disk:
    center: tuple[float, float]
    radius: float

    @property
    def area(self) -> float:
        return math.pi * self.radius**2

    def contains(self, pts: np.ndarray) -> np.ndarray:
        d = np.asarray(pts, dtype=float) - np.asarray(self.center, dtype=float)
        return np.hypot(d[..., 0], d[..., 1]) < self.radius


@dataclass(frozen=True)
class DisjointUnion:
    parts: tuple

    @property
    def area(self) -> float:
        return sum(p.area for p in self.parts)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        out = np.zeros(np.shape(pts)[:-1], dtype=bool)
        for p in self.parts:
            out |= p.contains(pts)
        return out


def measure_of_set(series: TruncatedLePage, region) -> float:
    """K-term value of ``M(region)``; exactly rounded sum in ascending k."""
    if not math.isfinite(region.area):
        raise ValueError("region must have finite area")
    if series.K == 0:
        return 0.0
    mask = region.contains(series.atoms)
    return math.fsum(series.weights[mask])


def integrate_function(series: TruncatedLePage, f: Callable[[np.ndarray], np.ndarray]) -> float:
    """K-term value of the stochastic integral of ``f`` (vectorized over atoms)."""
    if series.K == 0:
        return 0.0
    vals = np.asarray(f(series.atoms), dtype=float).reshape(-1)
    if vals.size != series.K:
        raise ValueError("f must return one value per atom")
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        i = int(bad[0])
        raise ValueError(f"f is not finite at atom index {i} (xi = {series.atoms[i].tolist()})")
    return math.fsum(series.weights * vals)


def alpha_norm_numeric(
    f: Callable[[np.ndarray], np.ndarray],
    domain,
    alpha: float,
    tol: float = 1e-8,
    max_refine: int = 20000,
) -> float:
    """``int_domain |f(x)|^alpha dx`` by adaptive cubature.

    ``domain`` is a :class:`Rectangle` (Cartesian rule) or a :class:`Disk`
    (polar rule about its center, with the radial coordinate flattened at both
    ends so that point singularities at the center are tolerated).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if isinstance(domain, Rectangle):
        g = pointwise(lambda p: np.abs(f(p)) ** alpha)
        try:
            val, _ = cubature(g, [domain.x0, domain.y0], [domain.x1, domain.y1], tol, max_refine)
        except QuadratureError as exc:
            raise QuadratureError(f"alpha-norm did not converge: {exc}", exc.value, exc.error) from None
        return val
    if isinstance(domain, Disk):
        cx, cy = domain.center
        R = domain.radius

        def polar(axes):
            s, phi = axes
            w, dw = smoothstep(s)
            rho = R * w
            x = cx + rho[:, :, None] * np.cos(phi)[:, None, :]
            y = cy + rho[:, :, None] * np.sin(phi)[:, None, :]
            vals = np.abs(f(np.stack([x, y], axis=-1))) ** alpha
            return vals * (rho * R * dw)[:, :, None]

        try:
            val, _ = cubature(polar, [0.0, 0.0], [1.0, 2.0 * math.pi], tol, max_refine)
        except QuadratureError as exc:
            raise QuadratureError(f"alpha-norm did not converge: {exc}", exc.value, exc.error) from None
        return val
    raise TypeError(f"unsupported domain type {type(domain).__name__}")


@dataclass(frozen=True)
class EmpiricalCF:
    u_grid: np.ndarray
    cf_values: np.ndarray
    std_errors: np.ndarray
    n_samples: int
    imag_values: np.ndarray = field(default=None)

    def z_scores(self, target: np.ndarray) -> np.ndarray:
        diff = np.abs(self.cf_values - target)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.std_errors > 0, diff / self.std_errors, np.where(diff == 0, 0.0, np.inf))


def empirical_cf(samples: Sequence[float], u_grid: Sequence[float]) -> EmpiricalCF:
    """Real part of the sample characteristic function with standard errors."""
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size < 2:
        raise ValueError("empirical_cf needs at least 2 samples")
    u = np.asarray(u_grid, dtype=float).reshape(-1)
    phase = np.outer(u, x)
    c = np.cos(phase)
    s = np.sin(phase)
    cf = c.mean(axis=1)
    se = c.std(axis=1, ddof=1) / math.sqrt(x.size)
    cf[u == 0] = 1.0
    se[u == 0] = 0.0
    return EmpiricalCF(u, cf, se, int(x.size), s.mean(axis=1))
