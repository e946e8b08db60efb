"""The candidate solution ``U(x, t) = sum_k w_k G(x, xi_k, t)`` and its diagnostics."""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .stable_measure import TruncatedLePage
from .wave_kernel import SigmaCoefficient, SingularAtomError, WaveKernelParams, kernel_values

__all__ = [
    "FieldSample",
    "HoelderEstimate",
    "BlowupResult",
    "DegeneratePathError",
    "evaluate_U",
    "evaluate_U_grid",
    "time_path",
    "hoelder_exponent",
    "blowup_probe",
    "isolated_atoms",
]


class DegeneratePathError(ValueError):
    """The sampled path carries no increments to regress on."""


@dataclass
class FieldSample:
    points: np.ndarray  # (n, 2)
    times: np.ndarray  # (n,)
    values: np.ndarray  # (n,)
    provenance: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key, val in self.provenance.items():
            buf.write(f"# {key}={val}\n")
        buf.write("x1,x2,t,U\n")
        for (x1, x2), t, u in zip(self.points, self.times, self.values):
            buf.write(f"{x1:.17g},{x2:.17g},{t:.17g},{u:.17g}\n")
        return buf.getvalue()


def evaluate_U(series: TruncatedLePage, x, t: float, sigma: SigmaCoefficient, params: WaveKernelParams) -> float:
    """K-term value of ``U(x, t)``.

    Atoms outside the light cone ``|x - xi_k| < a t`` are skipped before any
    kernel work.  Raises :class:`SingularAtomError` when ``x`` sits on an atom
    where ``sigma`` does not vanish.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    if series.K == 0 or sigma.constant == 0.0:
        return 0.0
    x = np.asarray(x, dtype=float)
    d = series.atoms - x
    r = np.hypot(d[:, 0], d[:, 1])
    idx = np.flatnonzero(r < params.a * t)
    if idx.size == 0:
        return 0.0
    hit = idx[r[idx] == 0]
    if hit.size:
        if np.any(sigma(series.atoms[hit], np.full(hit.size, t)) != 0):
            raise SingularAtomError(f"evaluation at singular atom (index {int(hit[0])})")
        idx = idx[r[idx] > 0]
    G = kernel_values(x, series.atoms[idx], t, sigma, params)
    return math.fsum(series.weights[idx] * G)


def evaluate_U_grid(
    series: TruncatedLePage,
    xs,
    ts,
    sigma: SigmaCoefficient,
    params: WaveKernelParams,
    workers: int = 1,
    provenance: Optional[dict] = None,
) -> FieldSample:
    """Evaluate ``U`` at paired probe points ``(xs[i], ts[i])``.

    ``ts`` may be a scalar.  Every probe is computed independently, so the
    values do not depend on the ordering of the grid or on ``workers``.
    """
    xs = np.asarray(xs, dtype=float).reshape(-1, 2)
    ts = np.broadcast_to(np.asarray(ts, dtype=float), (xs.shape[0],)).copy()
    if np.any(ts < 0):
        raise ValueError("all times must be non-negative")

    def one(i):
        try:
            return evaluate_U(series, xs[i], ts[i], sigma, params)
        except SingularAtomError as exc:
            raise SingularAtomError(f"probe {i}: {exc}") from None

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            values = np.array(list(pool.map(one, range(xs.shape[0]))))
    else:
        values = np.array([one(i) for i in range(xs.shape[0])])
    prov = {
        "seed": series.seed,
        "K": series.K,
        "alpha": repr(series.alpha),
        "density": series.params.density_id,
        "a": repr(params.a),
        "quad_tol": repr(params.quad_tol),
        "sigma": sigma.name,
    }
    if provenance:
        prov.update(provenance)
    return FieldSample(xs, ts, values, prov)


def time_path(series, x, T: float, n_levels: int, sigma, params) -> tuple[np.ndarray, np.ndarray]:
    """``U(x, t_j)`` on the dyadic grid ``t_j = T j / 2^n_levels``."""
    ts = T * np.arange(2**n_levels + 1) / 2**n_levels
    return ts, np.array([evaluate_U(series, x, t, sigma, params) for t in ts])


@dataclass(frozen=True)
class HoelderEstimate:
    exponent: float
    intercept: float
    r_squared: float
    h_range: tuple[float, float]
    statistic: str = "max"
    scales: tuple = ()
    moduli: tuple = ()


def _regress(hs: np.ndarray, ms: np.ndarray) -> tuple[float, float, float]:
    lx, ly = np.log(hs), np.log(ms)
    slope, icpt = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + icpt)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(icpt), r2


def hoelder_from_path(values: np.ndarray, T: float, n_levels: int, statistic: str = "max") -> HoelderEstimate:
    """Log-log regression of the dyadic increment statistic on the lag.

    At level ``l`` the path is cut into ``2^l`` consecutive blocks of length
    ``h = T 2^-l``; ``m(h)`` is the maximum (default) or the median of the
    absolute block increments.
    """
    if n_levels < 3:
        raise ValueError("need at least 3 dyadic scales")
    if statistic not in ("max", "median"):
        raise ValueError("statistic must be 'max' or 'median'")
    values = np.asarray(values, dtype=float)
    if values.size != 2**n_levels + 1:
        raise ValueError("path must hold 2^n_levels + 1 samples")
    if not np.any(values != 0):
        raise DegeneratePathError("degenerate path: U vanishes on the whole grid")
    reduce = np.max if statistic == "max" else np.median
    hs, ms = [], []
    for level in range(1, n_levels + 1):
        step = 2 ** (n_levels - level)
        inc = np.abs(values[step::step] - values[:-step:step])
        hs.append(T * 2.0**-level)
        ms.append(float(reduce(inc)))
    hs, ms = np.array(hs), np.array(ms)
    if np.any(ms <= 0):
        raise DegeneratePathError("degenerate path: zero increment statistic at some scale")
    slope, icpt, r2 = _regress(hs, ms)
    return HoelderEstimate(slope, icpt, r2, (float(hs.min()), float(hs.max())), statistic, tuple(hs), tuple(ms))


def hoelder_exponent(
    series: TruncatedLePage,
    x,
    T: float,
    n_levels: int,
    sigma: SigmaCoefficient,
    params: WaveKernelParams,
    statistic: str = "max",
) -> HoelderEstimate:
    """Estimate the time-Holder exponent of ``t -> U(x, t)`` on ``[0, T]``."""
    if not T > 0:
        raise ValueError("T must be positive")
    if n_levels < 3:
        raise ValueError("need at least 3 dyadic scales")
    if sigma.constant == 0.0:
        raise DegeneratePathError("degenerate path: sigma is identically zero")
    _, values = time_path(series, x, T, n_levels, sigma, params)
    return hoelder_from_path(values, T, n_levels, statistic)


@dataclass(frozen=True)
class BlowupResult:
    radii: np.ndarray
    values: np.ndarray  # U at xi_k + r * direction
    slope: float
    intercept: float
    predicted_slope: float


def blowup_probe(
    series: TruncatedLePage,
    k: int,
    t: float,
    radii: Sequence[float],
    direction,
    sigma: SigmaCoefficient,
    params: WaveKernelParams,
) -> BlowupResult:
    """Sample ``U`` along a ray into atom ``k`` and fit it against ``ln(1/r)``.

    The predicted slope is ``w_k sigma(xi_k, t) / (2 pi a^2)``, the
    coefficient of the logarithmic divergence of the kernel at its atom.
    The fit uses the signed field: the smooth background from the other
    atoms may have the opposite sign, so ``|U|`` can pass through zero
    before the divergence takes over.  ``|slope|`` is the growth rate of
    ``|U|``.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.size < 2 or np.any(radii <= 0) or np.any(np.diff(radii) >= 0):
        raise ValueError("radii must be positive and strictly decreasing (at least two)")
    e = np.asarray(direction, dtype=float)
    e = e / np.hypot(*e)
    xi = series.atoms[k]
    others = np.delete(series.atoms, k, axis=0)
    if others.size:
        sep = float(np.min(np.hypot(*(others - xi).T)))
        if radii[0] >= 0.5 * sep:
            raise ValueError(
                f"largest radius {radii[0]:g} not below half the nearest-atom distance {sep:g}; "
                "other atoms would contaminate the log fit"
            )
    ys = xi + radii[:, None] * e
    vals = np.array([evaluate_U(series, y, t, sigma, params) for y in ys])
    s_at = float(sigma(xi, t))
    predicted = series.weights[k] * s_at / (2.0 * math.pi * params.a**2)
    if not np.any(vals):
        return BlowupResult(radii, vals, 0.0, 0.0, predicted)
    slope, icpt = np.polyfit(np.log(1.0 / radii), vals, 1)
    return BlowupResult(radii, vals, float(slope), float(icpt), predicted)


def isolated_atoms(series: TruncatedLePage, n: int, min_separation: float, within: Optional[float] = None) -> list[int]:
    """Indices of the ``n`` heaviest atoms whose nearest neighbour is farther than ``min_separation``.

    ``within`` restricts the search to atoms inside the disk of that radius
    around the origin.
    """
    from scipy.spatial import cKDTree

    if series.K < 2:
        return list(range(series.K))[:n]
    tree = cKDTree(series.atoms)
    dist, _ = tree.query(series.atoms, k=2)
    ok = dist[:, 1] > min_separation
    if within is not None:
        ok &= np.hypot(*series.atoms.T) < within
    cand = np.flatnonzero(ok)
    order = np.argsort(-np.abs(series.weights[cand]), kind="stable")
    return [int(i) for i in cand[order[:n]]]
