"""Vectorized adaptive Gauss-Kronrod quadrature.

Two drivers share one 7/15-point Gauss-Kronrod pair:

* :func:`integrate_many` integrates a batch of independent 1-D integrals,
  each with its own interval and its own local error control.  Results for
  one integral never depend on the other members of the batch.
* :func:`cubature` integrates a single function over a box in any dimension
  with a tensor-product rule and global error control.  The integrand
  receives the per-axis node arrays of every box so that it can exploit
  separable structure.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "QuadratureError",
    "GK_NODES",
    "GK_WEIGHTS",
    "GAUSS_WEIGHTS",
    "integrate_many",
    "cubature",
    "pointwise",
    "smoothstep",
]

# Kronrod abscissae (positive half, descending) and weights, QUADPACK qk15.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
# 7-point Gauss weights for _XGK[1], _XGK[3], _XGK[5], _XGK[7]
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

GK_NODES = np.concatenate([-_XGK[:-1], [0.0], _XGK[-2::-1]])
GK_WEIGHTS = np.concatenate([_WGK[:-1], [_WGK[-1]], _WGK[-2::-1]])
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[[1, 3, 5]] = _WG[:3]
GAUSS_WEIGHTS[7] = _WG[3]
GAUSS_WEIGHTS[[13, 11, 9]] = _WG[:3]

_EPS = np.finfo(float).eps


class QuadratureError(ArithmeticError):
    """Refinement budget exhausted before the requested tolerance was met.

    The partial estimate and its error bound are kept on the exception.
    """

    def __init__(self, message: str, value, error):
        super().__init__(message)
        self.value = value
        self.error = error


def smoothstep(s):
    """Map ``[0, 1]`` onto itself with vanishing slope at both ends.

    Returns ``(w, dw/ds)`` for ``w = 3s^2 - 2s^3``.  Used to flatten
    square-root and logarithmic endpoint behaviour before quadrature.
    """
    s = np.asarray(s, dtype=float)
    return s * s * (3.0 - 2.0 * s), 6.0 * s * (1.0 - s)


def integrate_many(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    lo,
    hi,
    tol: float,
    max_refine: int = 200,
):
    """Integrate ``n`` independent 1-D integrals in one vectorized sweep.

    Parameters
    ----------
    f : callable
        ``f(x, owner)`` with ``x`` of shape ``(m, 15)`` and ``owner`` of shape
        ``(m,)`` holding the index of the integral each row belongs to.  Must
        return an array of shape ``(m, 15)``.
    lo, hi : array_like, shape (n,)
        Integration limits.
    tol : float or array_like, shape (n,)
        Absolute tolerance for each integral.
    max_refine : int
        Maximum number of bisections spent on any single integral.

    Returns
    -------
    values, errors : ndarray, shape (n,)
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    n = lo.size
    values = np.zeros(n)
    errors = np.zeros(n)
    if n == 0:
        return values, errors
    tol = np.broadcast_to(np.asarray(tol, dtype=float), (n,))
    span = np.abs(hi - lo)
    refinements = np.zeros(n, dtype=np.int64)

    a, b = lo.copy(), hi.copy()
    owner = np.arange(n)
    while owner.size:
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        x = mid[:, None] + half[:, None] * GK_NODES[None, :]
        fx = np.asarray(f(x, owner), dtype=float)
        kron = half * (fx @ GK_WEIGHTS)
        gauss = half * (fx @ GAUSS_WEIGHTS)
        err = np.abs(kron - gauss)
        share = np.where(span[owner] > 0, np.abs(b - a) / np.where(span[owner] > 0, span[owner], 1.0), 1.0)
        ok = (err <= tol[owner] * share) | (err <= 50.0 * _EPS * np.abs(kron))
        if not np.all(np.isfinite(kron)):
            bad = owner[~np.isfinite(kron)][0]
            raise QuadratureError(f"non-finite integrand in integral {bad}", values, errors)

        np.add.at(values, owner[ok], kron[ok])
        np.add.at(errors, owner[ok], err[ok])

        split = ~ok
        if not split.any():
            break
        so = owner[split]
        refinements[so] += 1
        if np.any(refinements[so] > max_refine):
            worst = so[refinements[so] > max_refine][0]
            np.add.at(values, so, kron[split])
            np.add.at(errors, so, err[split])
            raise QuadratureError(
                f"refinement budget ({max_refine}) exceeded for integral {worst}",
                values,
                errors,
            )
        ma = mid[split]
        a = np.concatenate([a[split], ma])
        b = np.concatenate([ma, b[split]])
        owner = np.concatenate([so, so])
    return values, errors


def _contract(F: np.ndarray, weights: Sequence[np.ndarray]) -> np.ndarray:
    for w in reversed(weights):
        F = F @ w
    return F


def pointwise(g: Callable[[np.ndarray], np.ndarray]):
    """Adapt a point-wise integrand ``g(points[..., d])`` to :func:`cubature`."""

    def wrapped(axes):
        m, n = axes[0].shape
        d = len(axes)
        pts = np.empty((m,) + (n,) * d + (d,))
        for i, ax in enumerate(axes):
            view = [m] + [1] * d
            view[1 + i] = n
            pts[..., i] = ax.reshape(view)
        return g(pts)

    return wrapped


def cubature(
    f: Callable[[list], np.ndarray],
    lo: Sequence[float],
    hi: Sequence[float],
    tol: float,
    max_refine: int = 4000,
    max_split_per_pass: int = 256,
):
    """Globally adaptive tensor Gauss-Kronrod cubature over a box.

    ``f`` receives a list of ``d`` arrays, the ``k``-th of shape ``(m, 15)``
    holding the nodes along axis ``k`` for each of ``m`` boxes, and must
    return the integrand on the tensor grid, shape ``(m, 15, ..., 15)``.
    Wrap point-wise integrands with :func:`pointwise`.

    Boxes are bisected along the axis whose one-dimensional Gauss/Kronrod
    discrepancy is largest until the summed error estimate drops below
    ``tol``.  Returns ``(value, error)``; raises :class:`QuadratureError`
    after ``max_refine`` bisections.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = lo.size
    if np.any(hi <= lo):
        return 0.0, 0.0

    def evaluate(blo, bhi):
        half = 0.5 * (bhi - blo)
        mid = 0.5 * (bhi + blo)
        axes = [mid[:, k, None] + half[:, k, None] * GK_NODES[None, :] for k in range(d)]
        F = np.asarray(f(axes), dtype=float)
        vol = np.prod(half, axis=1)
        kron = vol * _contract(F, [GK_WEIGHTS] * d)
        gauss = vol * _contract(F, [GAUSS_WEIGHTS] * d)
        axis_err = np.empty((blo.shape[0], d))
        for k in range(d):
            ws = [GK_WEIGHTS] * d
            ws[k] = GAUSS_WEIGHTS
            axis_err[:, k] = np.abs(kron - vol * _contract(F, ws))
        if not np.all(np.isfinite(kron)):
            raise QuadratureError("non-finite integrand", float("nan"), float("inf"))
        return kron, np.abs(kron - gauss), axis_err

    blo, bhi = lo[None, :], hi[None, :]
    vals, errs, axerr = evaluate(blo, bhi)
    refinements = 0
    while True:
        noise = 50.0 * _EPS * np.abs(vals)
        live = errs > noise
        total = float(np.sum(errs[live]))
        if total <= tol or not live.any():
            break
        order = np.argsort(-np.where(live, errs, -1.0), kind="stable")
        cum = np.cumsum(errs[order])
        n_split = int(np.searchsorted(cum, total - 0.5 * tol)) + 1
        n_split = max(1, min(n_split, max_split_per_pass, int(live.sum())))
        pick = order[:n_split]
        refinements += n_split
        if refinements > max_refine:
            raise QuadratureError(
                f"refinement budget ({max_refine}) exceeded; error estimate {total:.3e} > {tol:.3e}",
                math.fsum(vals),
                total,
            )
        width = (bhi[pick] - blo[pick]) / (hi - lo)
        score = axerr[pick] + 1e-300 * width
        axis = np.argmax(score, axis=1)
        rows = np.arange(n_split)
        cut = 0.5 * (blo[pick, axis] + bhi[pick, axis])
        left_hi = bhi[pick].copy()
        left_hi[rows, axis] = cut
        right_lo = blo[pick].copy()
        right_lo[rows, axis] = cut
        new_lo = np.concatenate([blo[pick], right_lo])
        new_hi = np.concatenate([left_hi, bhi[pick]])
        nv, ne, na = evaluate(new_lo, new_hi)

        keep = np.ones(vals.size, dtype=bool)
        keep[pick] = False
        blo = np.concatenate([blo[keep], new_lo])
        bhi = np.concatenate([bhi[keep], new_hi])
        vals = np.concatenate([vals[keep], nv])
        errs = np.concatenate([errs[keep], ne])
        axerr = np.concatenate([axerr[keep], na])
    return math.fsum(vals), float(np.sum(errs))
