"""Poisson-formula kernel of the planar wave equation.

    G(x, y, t) = 1/(2 pi a) int_0^{t - r/a} sigma(y, tau) / sqrt(a^2 (t - tau)^2 - r^2) dtau,

with ``r = |x - y|`` and ``G = 0`` outside the light cone ``r >= a t``.  The
substitution ``t - tau = (r/a) cosh u`` removes the square-root endpoint
singularity:

    G = 1/(2 pi a^2) int_0^{arccosh(a t / r)} sigma(y, t - (r/a) cosh u) du .
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import special

from .quadrature import QuadratureError, cubature, integrate_many, smoothstep

__all__ = [
    "WaveKernelParams",
    "SigmaCoefficient",
    "SingularAtomError",
    "sigma_const",
    "sigma_holder",
    "sigma_zero",
    "parse_sigma",
    "kernel_G",
    "kernel_values",
    "kernel_radial",
    "kernel_G_log_bound",
    "kernel_alpha_norm",
    "kernel_alpha_norm_bound",
]

# at/r below this is treated as on the cone boundary
CONE_EPS = 1e-12


class SingularAtomError(ValueError):
    """Kernel requested at ``x == y`` where it diverges."""


@dataclass(frozen=True)
class WaveKernelParams:
    a: float = 1.0
    quad_tol: float = 1e-6
    max_refine: int = 200

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("wave speed a must be positive")
        if not self.quad_tol > 0:
            raise ValueError("quad_tol must be positive")
        if self.max_refine < 1:
            raise ValueError("max_refine must be at least 1")


@dataclass(frozen=True)
class SigmaCoefficient:
    """The source coefficient ``sigma(x, t)``.

    ``eval(x, t)`` must be vectorized (``x[..., 2]`` and ``t[...]`` broadcast
    together) and reentrant.  ``constant`` marks coefficients known to be
    constant, which lets kernels use the closed form.  ``time_breaks`` lists
    times where ``sigma`` may have a kink; kernel quadrature splits there.
    """

    eval: Callable[[np.ndarray, np.ndarray], np.ndarray]
    bound_C: float
    holder_gamma: float = 1.0
    name: str = "custom"
    constant: Optional[float] = None
    time_breaks: tuple = ()

    def __call__(self, x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(np.asarray(self.eval(x, t), dtype=float), np.broadcast_shapes(x.shape[:-1], t.shape))

    def spot_check(self, rng: np.random.Generator, n: int = 1000, box: float = 5.0, horizon: float = 5.0) -> bool:
        """Probe the boundedness and time-Holder assumptions at random points."""
        x = rng.uniform(-box, box, size=(n, 2))
        t = rng.uniform(0.0, horizon, size=n)
        s = rng.uniform(0.0, horizon, size=n)
        vt, vs = self(x, t), self(x, s)
        bounded = np.all(np.abs(vt) <= self.bound_C * (1 + 1e-12))
        holder = np.all(np.abs(vt - vs) <= np.abs(t - s) ** self.holder_gamma * (1 + 1e-12) + 1e-15)
        return bool(bounded and holder)


def sigma_const(c: float) -> SigmaCoefficient:
    c = float(c)
    return SigmaCoefficient(
        eval=lambda x, t: np.full(np.broadcast_shapes(np.shape(x)[:-1], np.shape(t)), c),
        bound_C=abs(c),
        holder_gamma=1.0,
        name=f"const:{c:g}",
        constant=c,
    )


def sigma_zero() -> SigmaCoefficient:
    s = sigma_const(0.0)
    return SigmaCoefficient(s.eval, 0.0, 1.0, "zero", constant=0.0)


def sigma_holder(gamma: float) -> SigmaCoefficient:
    """``min(((1 + t)^gamma - 1) / gamma, 1)``: bounded, continuous, Holder-gamma in time."""
    if not (0.0 < gamma <= 1.0):
        raise ValueError("holder exponent must lie in (0, 1]")
    g = float(gamma)

    def ev(x, t):
        t = np.broadcast_to(t, np.broadcast_shapes(np.shape(x)[:-1], np.shape(t)))
        return np.minimum(np.expm1(g * np.log1p(np.maximum(t, 0.0))) / g, 1.0)

    # the clamp engages where (1 + t)^gamma = 1 + gamma
    kink = math.expm1(math.log1p(g) / g)
    return SigmaCoefficient(ev, 1.0, g, f"holder:{g:g}", time_breaks=(kink,))


def parse_sigma(name: str) -> SigmaCoefficient:
    """Build a built-in coefficient from ``const:c``, ``holder:gamma`` or ``zero``."""
    name = name.strip()
    if name == "zero":
        return sigma_zero()
    kind, _, arg = name.partition(":")
    try:
        val = float(arg)
    except ValueError:
        raise ValueError(f"bad sigma name {name!r}") from None
    if kind == "const":
        return sigma_const(val)
    if kind == "holder":
        return sigma_holder(val)
    raise ValueError(f"unknown sigma kind {kind!r}; use const:c, holder:gamma or zero")


def kernel_radial(r, y, t, sigma: SigmaCoefficient, params: WaveKernelParams) -> np.ndarray:
    """``G`` as a function of the distance ``r = |x - y|`` to the source point ``y``.

    ``r``, ``y[..., 2]`` and ``t`` broadcast together.  Entries with ``r == 0``
    inside the cone give ``inf`` when ``sigma(y, t)`` is nonzero and raise
    :class:`SingularAtomError` otherwise.
    """
    r = np.asarray(r, dtype=float)
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    shape = np.broadcast_shapes(r.shape, y.shape[:-1], t.shape)
    r = np.broadcast_to(r, shape).reshape(-1)
    y = np.broadcast_to(y, shape + (2,)).reshape(-1, 2)
    t = np.broadcast_to(t, shape).reshape(-1)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    a = params.a
    at = a * t
    out = np.zeros(r.size)
    if sigma.constant == 0.0:
        return out.reshape(shape)

    with np.errstate(divide="ignore"):
        ratio = np.where(r > 0, at / np.where(r > 0, r, 1.0), np.inf)
    active = (at > r) & (ratio >= 1.0 + CONE_EPS)
    at_atom = active & (r == 0)
    if at_atom.any():
        s0 = sigma(y[at_atom], t[at_atom])
        if np.any(s0 == 0):
            raise SingularAtomError("G(x, x, t) with sigma(x, t) = 0 is not supported")
        out[at_atom] = np.inf
        active &= r > 0
    idx = np.flatnonzero(active)
    if idx.size == 0:
        return out.reshape(shape)
    upper = np.arccosh(ratio[idx])
    pref = 1.0 / (2.0 * math.pi * a * a)
    if sigma.constant is not None:
        out[idx] = sigma.constant * pref * upper
        return out.reshape(shape)

    ys, ts, rs = y[idx], t[idx], r[idx] / a
    # split the u-range where tau = t - (r/a) cosh u crosses a declared kink
    seg_owner, seg_lo, seg_hi = _segments(upper, ts, rs, sigma.time_breaks)

    def integrand(u, owner):
        o = seg_owner[owner]
        tau = ts[o, None] - rs[o, None] * np.cosh(u)
        return sigma(ys[o, None, :], np.maximum(tau, 0.0))

    tol = params.quad_tol / pref * (seg_hi - seg_lo) / upper[seg_owner]
    try:
        vals, errs = integrate_many(integrand, seg_lo, seg_hi, tol, params.max_refine)
    except QuadratureError as exc:
        partial = np.zeros(r.size)
        np.add.at(partial, idx[seg_owner], exc.value * pref)
        raise QuadratureError(f"kernel quadrature: {exc}", partial.reshape(shape), float(np.sum(exc.error)) * pref) from None
    np.add.at(out, idx[seg_owner], vals * pref)
    return out.reshape(shape)


def _segments(upper, ts, rs, breaks):
    n = upper.size
    owner = np.arange(n)
    if not breaks:
        return owner, np.zeros(n), upper.copy()
    cuts = []
    for tb in breaks:
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = (ts - tb) / rs
        ub = np.where(ratio > 1.0, np.arccosh(np.where(ratio > 1.0, ratio, 1.0)), 0.0)
        cuts.append(np.where((ub > 0) & (ub < upper), ub, np.nan))
    pts = np.sort(np.column_stack([np.zeros(n)] + cuts + [upper]), axis=1)  # nan sorts last
    los, his, owners = [], [], []
    for j in range(pts.shape[1] - 1):
        lo, hi = pts[:, j], pts[:, j + 1]
        ok = np.isfinite(hi) & (hi > lo)
        los.append(lo[ok])
        his.append(hi[ok])
        owners.append(owner[ok])
    return np.concatenate(owners), np.concatenate(los), np.concatenate(his)


def kernel_values(x, y, t, sigma: SigmaCoefficient, params: WaveKernelParams) -> np.ndarray:
    """Vectorized ``G(x_i, y_i, t_i)``; arguments broadcast against each other."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x - y
    return kernel_radial(np.hypot(d[..., 0], d[..., 1]), y, t, sigma, params)


def kernel_G(x, y, t: float, sigma: SigmaCoefficient, params: WaveKernelParams) -> float:
    """Scalar ``G(x, y, t)``; zero on and outside the light cone."""
    return float(kernel_values(np.asarray(x, float), np.asarray(y, float), float(t), sigma, params))


def kernel_G_log_bound(x, y, t: float, bound_C: float, a: float) -> float:
    """``bound_C * arccosh(a t / r) / (2 pi a^2)`` inside the cone, else 0.

    Equals ``|G|`` when ``sigma`` is the constant ``bound_C``.
    """
    r = float(np.hypot(*(np.asarray(x, float) - np.asarray(y, float))))
    at = a * t
    if r >= at or at < r * (1.0 + CONE_EPS):
        return 0.0
    if r == 0:
        return math.inf
    return bound_C * math.acosh(at / r) / (2.0 * math.pi * a * a)


def kernel_alpha_norm(
    x,
    t: float,
    sigma: SigmaCoefficient,
    alpha: float,
    params: WaveKernelParams,
    tol: Optional[float] = None,
    max_refine: int = 4000,
) -> float:
    """``int |G(x, y, t)|^alpha dy`` over the ball ``B(x, a t)``.

    Polar coordinates ``y = x + a t r (cos phi, sin phi)``; the radial variable
    is passed through :func:`smoothstep` to soften the logarithmic singularity
    at ``r = 0`` and the ``(1 - r)^(alpha/2)`` behaviour at the cone.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    if not (0.0 < alpha < 2.0):
        raise ValueError("alpha must lie in (0, 2)")
    if t == 0:
        return 0.0
    tol = params.quad_tol if tol is None else tol
    x = np.asarray(x, dtype=float)
    R = params.a * t
    # kernel accuracy must sit well below the cubature tolerance
    kparams = WaveKernelParams(params.a, params.quad_tol * 1e-3, params.max_refine)

    def integrand(axes):
        s, phi = axes
        w, dw = smoothstep(s)
        rho = R * w
        y = x + np.stack(
            [rho[:, :, None] * np.cos(phi)[:, None, :], rho[:, :, None] * np.sin(phi)[:, None, :]], axis=-1
        )
        G = kernel_values(x, y, t, sigma, kparams)
        return np.abs(G) ** alpha * (rho * R * dw)[:, :, None]

    try:
        val, _ = cubature(integrand, [0.0, 0.0], [1.0, 2.0 * math.pi], tol, max_refine)
    except QuadratureError as exc:
        raise QuadratureError(f"alpha-norm of the kernel did not converge: {exc}", exc.value, exc.error) from None
    return val


def kernel_alpha_norm_bound(t: float, bound_C: float, alpha: float, a: float) -> float:
    """Explicit majorant of :func:`kernel_alpha_norm` for ``|sigma| <= bound_C``.

    Uses ``arccosh(1/r) <= ln(2/r)``, so the norm is at most
    ``(a t)^2 (bound_C / (2 pi a^2))^alpha * 2 pi * int_0^1 r ln(2/r)^alpha dr``,
    and the radial integral equals ``2^(1 - alpha) Gamma(alpha + 1, ln 4)``.
    """
    radial = 2.0 ** (1.0 - alpha) * special.gammaincc(alpha + 1.0, math.log(4.0)) * special.gamma(alpha + 1.0)
    return (a * t) ** 2 * (bound_C / (2.0 * math.pi * a * a)) ** alpha * 2.0 * math.pi * radial
