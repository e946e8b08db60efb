"""Test functions, the wave operator, and generalized-solution residuals.

For a test function ``theta`` with ``psi = theta_tt - a^2 Lap theta`` the
weak form pairs

    L(theta) = sum_k w_k  int int G(x, xi_k, t) psi(x, t) dx dt
    R(theta) = sum_k w_k  int theta(xi_k, t) sigma(xi_k, t) dt

term by term.  Each left-hand term is computed from ``G`` and ``psi`` alone
so that agreement with the right-hand term is a genuine check.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .quadrature import QuadratureError, cubature, smoothstep
from .stable_measure import TruncatedLePage
from .wave_kernel import SigmaCoefficient, WaveKernelParams, kernel_radial

__all__ = [
    "TestFunction",
    "WeakFormReport",
    "make_bump",
    "wave_operator_psi",
    "poisson_lhs",
    "poisson_identity_check",
    "poisson_identity_residual",
    "atom_lhs_integral",
    "atom_rhs_integral",
    "atom_term_bound",
    "weak_lhs",
    "weak_rhs",
    "weak_residual",
]

# 1 - rho below this makes exp(-1/(1 - rho)) underflow anyway
_EDGE = 1.0 / 700.0


@dataclass(frozen=True)
class TestFunction:
    """Smooth compactly supported ``theta(x, t)`` with its second derivatives.

    ``center`` and ``radii`` describe a covering support
    ``B(x0, R_space) x [t0 - R_time, t0 + R_time]``; all three callables are
    vectorized over ``x[..., 2]`` and ``t[...]``.
    """

    __test__ = False  # not a pytest class

    eval: Callable
    d2t: Callable
    laplacian: Callable
    center: tuple
    radii: tuple
    fd_derivatives: bool = False

    @property
    def x0(self) -> np.ndarray:
        return np.asarray(self.center[0], dtype=float)

    @property
    def t0(self) -> float:
        return float(self.center[1])

    @property
    def time_support(self) -> tuple[float, float]:
        return max(0.0, self.t0 - self.radii[1]), self.t0 + self.radii[1]

    def __add__(self, other: "TestFunction") -> "TestFunction":
        lo = min(self.time_support[0], other.time_support[0])
        hi = max(self.time_support[1], other.time_support[1])
        R = max(self.radii[0], float(np.hypot(*(other.x0 - self.x0))) + other.radii[0])
        return TestFunction(
            eval=lambda x, t: self.eval(x, t) + other.eval(x, t),
            d2t=lambda x, t: self.d2t(x, t) + other.d2t(x, t),
            laplacian=lambda x, t: self.laplacian(x, t) + other.laplacian(x, t),
            center=(tuple(self.x0), 0.5 * (lo + hi)),
            radii=(R, 0.5 * (hi - lo)),
            fd_derivatives=self.fd_derivatives or other.fd_derivatives,
        )

    def translated(self, shift) -> "TestFunction":
        v = np.asarray(shift, dtype=float)
        return TestFunction(
            eval=lambda x, t: self.eval(np.asarray(x) - v, t),
            d2t=lambda x, t: self.d2t(np.asarray(x) - v, t),
            laplacian=lambda x, t: self.laplacian(np.asarray(x) - v, t),
            center=(tuple(self.x0 + v), self.t0),
            radii=self.radii,
            fd_derivatives=self.fd_derivatives,
        )

    @classmethod
    def from_callable(cls, theta: Callable, center, radii, h: float = 1e-3) -> "TestFunction":
        """Wrap an arbitrary ``theta``; derivatives by central differences (flagged)."""
        ex = np.array([h, 0.0])
        ey = np.array([0.0, h])

        def d2t(x, t):
            x, t = np.asarray(x, float), np.asarray(t, float)
            return (theta(x, t + h) - 2.0 * theta(x, t) + theta(x, t - h)) / (h * h)

        def lap(x, t):
            x = np.asarray(x, float)
            c = theta(x, t)
            return (theta(x + ex, t) + theta(x - ex, t) + theta(x + ey, t) + theta(x - ey, t) - 4.0 * c) / (h * h)

        return cls(theta, d2t, lap, center, radii, fd_derivatives=True)


def _bump(rho: np.ndarray):
    """``exp(-1/(1 - rho))`` and its first two derivatives in ``rho``."""
    q = 1.0 - rho
    inside = q > _EDGE
    qs = np.where(inside, q, 1.0)
    p = np.where(inside, np.exp(-1.0 / qs), 0.0)
    p1 = -p / qs**2
    p2 = p * (1.0 / qs**4 - 2.0 / qs**3)
    return p, p1, p2


def make_bump(center, radii) -> TestFunction:
    """Separable bump ``beta(|x - x0|^2 / Rs^2) * beta(((t - t0) / Rt)^2)``.

    ``beta(rho) = exp(-1/(1 - rho))`` on ``rho < 1`` and zero elsewhere.
    """
    x0 = np.asarray(center[0], dtype=float)
    t0 = float(center[1])
    Rs, Rt = float(radii[0]), float(radii[1])
    if Rs <= 0 or Rt <= 0:
        raise ValueError("radii must be positive")

    def parts(x, t):
        d = np.asarray(x, dtype=float) - x0
        qs = (d[..., 0] ** 2 + d[..., 1] ** 2) / Rs**2
        s = (np.asarray(t, dtype=float) - t0) / Rt
        return qs, s, _bump(qs), _bump(s * s)

    def ev(x, t):
        _, _, (S, _, _), (T, _, _) = parts(x, t)
        return S * T

    def d2t(x, t):
        _, s, (S, _, _), (_, T1, T2) = parts(x, t)
        return S * (4.0 * s * s * T2 + 2.0 * T1) / Rt**2

    def lap(x, t):
        qs, _, (_, S1, S2), (T, _, _) = parts(x, t)
        return 4.0 / Rs**2 * (S2 * qs + S1) * T

    return TestFunction(ev, d2t, lap, (tuple(x0), t0), (Rs, Rt))


def wave_operator_psi(theta: TestFunction, x, t, a: float):
    """``psi = theta_tt - a^2 Lap theta``."""
    return theta.d2t(x, t) - a * a * theta.laplacian(x, t)


def _angular_window(offset: np.ndarray, R: float) -> tuple[float, float]:
    """Angles of rays from a point at ``offset`` from a disk center that can meet the disk."""
    d = float(np.hypot(*offset))
    if d <= R:
        return 0.0, 2.0 * math.pi
    mid = math.atan2(-offset[1], -offset[0])
    half = math.asin(R / d)
    return mid - half, mid + half


def poisson_lhs(
    theta: TestFunction, x, tau: float, a: float, quad_tol: float, max_refine: int = 20000
) -> tuple[float, float]:
    """``1/(2 pi a) int_tau^inf int_{B(x, a(t - tau))} psi(y, t) / sqrt(a^2 (t-tau)^2 - |x-y|^2) dy dt``.

    With ``y = x + a (t - tau) sin(v) (cos phi, sin phi)`` the square-root
    singularity cancels exactly and the inner integrand becomes
    ``a (t - tau) sin(v) psi``.  Returns ``(value, error_estimate)``.
    """
    if tau < 0:
        raise ValueError("tau must be non-negative")
    x = np.asarray(x, dtype=float)
    offset = x - theta.x0
    dist = float(np.hypot(*offset))
    Rs = theta.radii[0]
    t_lo, t_hi = theta.time_support
    t_lo = max(t_lo, tau + max(0.0, dist - Rs) / a)
    if t_lo >= t_hi:
        return 0.0, 0.0
    ph_lo, ph_hi = _angular_window(offset, Rs)

    def integrand(axes):
        t, v, phi = axes
        rad = a * (t - tau)[:, :, None] * np.sin(v)[:, None, :]  # (m, n, n)
        px = x[0] + rad[..., None] * np.cos(phi)[:, None, None, :]
        py = x[1] + rad[..., None] * np.sin(phi)[:, None, None, :]
        psi = wave_operator_psi(theta, np.stack([px, py], axis=-1), t[:, :, None, None], a)
        return psi * rad[..., None] / (2.0 * math.pi * a)

    try:
        return cubature(integrand, [t_lo, 0.0, ph_lo], [t_hi, 0.5 * math.pi, ph_hi], quad_tol, max_refine)
    except QuadratureError as exc:
        target = float(theta.eval(x, tau))
        raise QuadratureError(
            f"Poisson identity quadrature: {exc}; partial residual {abs(exc.value - target):.3e}",
            exc.value,
            exc.error,
        ) from None


def poisson_identity_check(theta: TestFunction, x, tau: float, a: float, quad_tol: float) -> tuple[float, float]:
    """Residual of the Poisson identity together with the quadrature error estimate.

    ``residual + error`` bounds how far the computed left side can be from
    ``theta(x, tau)``; unlike the bare residual, which quickly drops to the
    level of quadrature noise, this bound shrinks steadily with ``quad_tol``.
    """
    lhs, err = poisson_lhs(theta, x, tau, a, quad_tol)
    return abs(lhs - float(theta.eval(np.asarray(x, dtype=float), tau))), err


def poisson_identity_residual(theta: TestFunction, x, tau: float, a: float, quad_tol: float) -> float:
    """``|LHS - theta(x, tau)|`` with LHS from :func:`poisson_lhs`."""
    return poisson_identity_check(theta, x, tau, a, quad_tol)[0]


def atom_lhs_integral(
    theta: TestFunction,
    atom,
    sigma: SigmaCoefficient,
    params: WaveKernelParams,
    max_refine: int = 20000,
    with_error: bool = False,
):
    """Unweighted ``int int G(x, atom, t) psi(x, t) dx dt``.

    Polar coordinates about the atom with ``|x - atom| = a t w(s)`` and
    ``w`` the smoothstep map, so the logarithmic singularity at the atom and
    the square-root edge at the cone are both flattened.  With
    ``with_error`` the cubature error estimate is returned as well.
    """
    a = params.a
    xi = np.asarray(atom, dtype=float)
    offset = xi - theta.x0
    dist = float(np.hypot(*offset))
    Rs = theta.radii[0]
    t_lo, t_hi = theta.time_support
    t_lo = max(t_lo, max(0.0, dist - Rs) / a)
    if t_lo >= t_hi:
        return (0.0, 0.0) if with_error else 0.0
    ph_lo, ph_hi = _angular_window(offset, Rs)
    kparams = WaveKernelParams(a, params.quad_tol * 1e-3, params.max_refine)

    def integrand(axes):
        t, s, phi = axes
        w, dw = smoothstep(s)
        rho = a * t[:, :, None] * w[:, None, :]  # (m, nt, ns)
        G = kernel_radial(rho, xi, t[:, :, None], sigma, kparams)
        jac = G * rho * (a * t[:, :, None]) * dw[:, None, :]
        px = xi[0] + rho[..., None] * np.cos(phi)[:, None, None, :]
        py = xi[1] + rho[..., None] * np.sin(phi)[:, None, None, :]
        psi = wave_operator_psi(theta, np.stack([px, py], axis=-1), t[:, :, None, None], a)
        return psi * jac[..., None]

    try:
        val, err = cubature(integrand, [t_lo, 0.0, ph_lo], [t_hi, 1.0, ph_hi], params.quad_tol, max_refine)
    except QuadratureError as exc:
        raise QuadratureError(f"weak-form quadrature: {exc}", exc.value, exc.error) from None
    return (val, err) if with_error else val


def atom_rhs_integral(theta: TestFunction, atom, sigma: SigmaCoefficient, quad_tol: float) -> float:
    """Unweighted ``int theta(atom, t) sigma(atom, t) dt``."""
    xi = np.asarray(atom, dtype=float)
    if float(np.hypot(*(xi - theta.x0))) >= theta.radii[0]:
        return 0.0
    t_lo, t_hi = theta.time_support

    def integrand(axes):
        (t,) = axes
        return theta.eval(xi, t) * sigma(xi, t)

    val, _ = cubature(integrand, [t_lo], [t_hi], quad_tol)
    return val


def _sup_abs_psi(theta: TestFunction, a: float, n: int = 81) -> float:
    Rs = theta.radii[0]
    t_lo, t_hi = theta.time_support
    g = np.linspace(-Rs, Rs, n)
    X, Y = np.meshgrid(g, g, indexing="ij")
    pts = theta.x0 + np.stack([X, Y], axis=-1)
    ts = np.linspace(t_lo, t_hi, n)
    return float(max(np.max(np.abs(wave_operator_psi(theta, pts, t, a))) for t in ts))


def atom_term_bound(theta: TestFunction, atom_weight: float, bound_C: float, a: float) -> float:
    """A priori bound ``|w| sup|psi| int int |G| dx dt`` on one left-hand term.

    Uses ``int |G(x, y, t)| dx <= bound_C t^2 / 2`` over the whole cone.
    """
    t_lo, t_hi = theta.time_support
    return abs(atom_weight) * _sup_abs_psi(theta, a) * bound_C * (t_hi**3 - t_lo**3) / 6.0


def _reaches(theta: TestFunction, xi: np.ndarray, a: float) -> bool:
    dist = float(np.hypot(*(xi - theta.x0)))
    return dist - theta.radii[0] < a * theta.time_support[1]


def _lhs_terms(theta, series, sigma, params) -> np.ndarray:
    terms = np.zeros(series.K)
    if sigma.constant == 0.0:
        return terms
    for k in range(series.K):
        xi = series.atoms[k]
        if not _reaches(theta, xi, params.a):
            continue
        try:
            val = atom_lhs_integral(theta, xi, sigma, params)
        except QuadratureError as exc:
            raise QuadratureError(f"atom {k}: {exc}", exc.value, exc.error) from None
        terms[k] = series.weights[k] * val
    return terms


def _rhs_terms(theta, series, sigma, quad_tol) -> np.ndarray:
    terms = np.zeros(series.K)
    if sigma.constant == 0.0:
        return terms
    for k in range(series.K):
        try:
            val = atom_rhs_integral(theta, series.atoms[k], sigma, quad_tol)
        except QuadratureError as exc:
            raise QuadratureError(f"atom {k}: {exc}", exc.value, exc.error) from None
        terms[k] = series.weights[k] * val
    return terms


def weak_lhs(theta: TestFunction, series: TruncatedLePage, sigma: SigmaCoefficient, params: WaveKernelParams) -> float:
    """``int int U psi dx dt`` at truncation level K."""
    return math.fsum(_lhs_terms(theta, series, sigma, params))


def weak_rhs(theta: TestFunction, series: TruncatedLePage, sigma: SigmaCoefficient, quad_tol: float = 1e-6) -> float:
    """``int int theta sigma M(dx) dt`` at truncation level K."""
    return math.fsum(_rhs_terms(theta, series, sigma, quad_tol))


@dataclass
class WeakFormReport:
    lhs: float
    rhs: float
    residual: float
    lhs_terms: np.ndarray
    rhs_terms: np.ndarray
    per_atom_residuals: np.ndarray
    term_scales: np.ndarray
    tolerances: dict = field(default_factory=dict)
    fd_derivatives: bool = False

    def relative_residuals(self) -> np.ndarray:
        """``|lhs_k - rhs_k| / max(|rhs_k|, scale_k)``; zero where both terms vanish."""
        denom = np.maximum(np.abs(self.rhs_terms), self.term_scales)
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.abs(self.per_atom_residuals) / denom
        return np.where(self.per_atom_residuals == 0, 0.0, rel)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("k,lhs_term,rhs_term,residual\n")
        for k, (lt, rt, res) in enumerate(zip(self.lhs_terms, self.rhs_terms, self.per_atom_residuals)):
            buf.write(f"{k},{lt:.17g},{rt:.17g},{res:.17g}\n")
        rel = self.relative_residuals()
        buf.write(
            f"# summary lhs={self.lhs:.17g} rhs={self.rhs:.17g} residual={self.residual:.17g} "
            f"max_relative={float(rel.max()) if rel.size else 0.0:.6g}\n"
        )
        return buf.getvalue()


def weak_residual(
    theta: TestFunction,
    series: TruncatedLePage,
    sigma: SigmaCoefficient,
    params: WaveKernelParams,
) -> WeakFormReport:
    """Compare both sides of the weak form, atom by atom.

    ``term_scales[k]`` is the magnitude the right-hand term of atom ``k``
    would have at the center of the test function,
    ``|w_k| bound_C int |theta(x0, t)| dt``; it normalizes per-atom residuals
    for atoms whose own right-hand term is zero or tiny.
    """
    lhs_t = _lhs_terms(theta, series, sigma, params)
    rhs_t = _rhs_terms(theta, series, sigma, params.quad_tol)
    res_t = lhs_t - rhs_t
    lhs, rhs = math.fsum(lhs_t), math.fsum(rhs_t)
    t_lo, t_hi = theta.time_support
    profile, _ = cubature(lambda ax: np.abs(theta.eval(theta.x0, ax[0])), [t_lo], [t_hi], params.quad_tol)
    scales = np.abs(series.weights) * sigma.bound_C * profile if series.K else np.zeros(0)
    return WeakFormReport(
        lhs=lhs,
        rhs=rhs,
        residual=lhs - rhs,
        lhs_terms=lhs_t,
        rhs_terms=rhs_t,
        per_atom_residuals=res_t,
        term_scales=np.asarray(scales, dtype=float),
        tolerances={"quad_tol": params.quad_tol, "kernel_tol": params.quad_tol * 1e-3},
        fd_derivatives=theta.fd_derivatives,
    )
