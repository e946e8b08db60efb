import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from stablewave.stable_measure import StableParams, TruncatedLePage, sample_series
from stablewave.wave_kernel import WaveKernelParams, sigma_const, sigma_holder, sigma_zero
from stablewave.weak_solution import (
    TestFunction,
    atom_lhs_integral,
    atom_rhs_integral,
    atom_term_bound,
    make_bump,
    poisson_identity_check,
    poisson_identity_residual,
    wave_operator_psi,
    weak_lhs,
    weak_residual,
    weak_rhs,
)

P = WaveKernelParams(1.0, 1e-6)
ONE = sigma_const(1.0)
BUMP = make_bump(((0.0, 0.0), 1.0), (1.0, 1.0))


def interior_points(theta, n, seed):
    rng = np.random.default_rng(seed)
    rad = theta.radii[0] * np.sqrt(rng.uniform(0, 0.8, n))
    ang = rng.uniform(0, 2 * np.pi, n)
    x = theta.x0 + np.stack([rad * np.cos(ang), rad * np.sin(ang)], -1)
    t = theta.t0 + theta.radii[1] * rng.uniform(-0.9, 0.9, n)
    return x, t


def fd5_d2t(f, x, t, h):
    return (-f(x, t + 2 * h) + 16 * f(x, t + h) - 30 * f(x, t) + 16 * f(x, t - h) - f(x, t - 2 * h)) / (12 * h * h)


def fd5_lap(f, x, t, h):
    out = 0.0
    for e in (np.array([h, 0.0]), np.array([0.0, h])):
        out = out + (-f(x + 2 * e, t) + 16 * f(x + e, t) - 30 * f(x, t) + 16 * f(x - e, t) - f(x - 2 * e, t)) / (12 * h * h)
    return out


# -- bump ------------------------------------------------------------------


def test_bump_center_value():
    assert float(BUMP.eval(np.array([0.0, 0.0]), 1.0)) == pytest.approx(math.exp(-2), rel=1e-15)


@given(st.floats(0, 2 * math.pi), st.floats(-1, 1))
def test_bump_vanishes_on_support_boundary(phi, s):
    edge = np.array([math.cos(phi), math.sin(phi)])
    assert BUMP.eval(edge, 1.0 + s) == 0.0
    assert BUMP.eval(0.5 * edge, 0.0) == 0.0 and BUMP.eval(0.5 * edge, 2.0) == 0.0


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0, 4))
def test_everything_vanishes_outside_support(x1, x2, t):
    x = np.array([x1, x2])
    if math.hypot(x1, x2) >= 1.0 or abs(t - 1.0) >= 1.0:
        assert BUMP.eval(x, t) == 0.0
        assert BUMP.d2t(x, t) == 0.0
        assert BUMP.laplacian(x, t) == 0.0
        assert wave_operator_psi(BUMP, x, t, 1.3) == 0.0


@pytest.mark.parametrize("radii", [(1.0, 1.0), (0.7, 1.6)])
def test_bump_derivatives_vs_five_point_fd(radii):
    theta = make_bump(((0.4, -0.2), 2.0), radii)
    x, t = interior_points(theta, 100, 1)
    h = 1e-3
    for name, analytic, fd in (("d2t", theta.d2t, fd5_d2t), ("lap", theta.laplacian, fd5_lap)):
        exact = analytic(x, t)
        approx = fd(theta.eval, x, t, h)
        scale = np.max(np.abs(exact))
        assert np.max(np.abs(exact - approx)) / scale < 1e-5, name


def test_psi_vs_fd_composite():
    x, t = interior_points(BUMP, 100, 2)
    a = 1.7
    exact = wave_operator_psi(BUMP, x, t, a)
    approx = fd5_d2t(BUMP.eval, x, t, 1e-3) - a * a * fd5_lap(BUMP.eval, x, t, 1e-3)
    assert np.max(np.abs(exact - approx)) / np.max(np.abs(exact)) < 1e-5


def test_psi_wave_speed_zero_is_d2t():
    x, t = interior_points(BUMP, 10, 3)
    assert np.array_equal(wave_operator_psi(BUMP, x, t, 0.0), BUMP.d2t(x, t))


def test_bump_rejects_bad_radii():
    with pytest.raises(ValueError):
        make_bump(((0, 0), 1.0), (0.0, 1.0))


def test_from_callable_fd_fallback():
    theta = TestFunction.from_callable(BUMP.eval, BUMP.center, BUMP.radii)
    assert theta.fd_derivatives and not BUMP.fd_derivatives
    x, t = interior_points(BUMP, 50, 4)
    # second-order central differences: O(h^2)
    assert np.max(np.abs(theta.d2t(x, t) - BUMP.d2t(x, t))) < 1e-3 * np.max(np.abs(BUMP.d2t(x, t)))
    assert np.max(np.abs(theta.laplacian(x, t) - BUMP.laplacian(x, t))) < 1e-3 * np.max(np.abs(BUMP.laplacian(x, t)))


def test_sum_support_covers_both():
    other = make_bump(((1.5, 0.0), 3.0), (0.5, 0.5))
    both = BUMP + other
    lo, hi = both.time_support
    assert lo == 0.0 and hi == 3.5
    x, t = np.array([1.5, 0.0]), 3.0
    assert float(both.eval(x, t)) == float(other.eval(x, t))
    assert np.hypot(*(np.array([1.9, 0.0]) - both.x0)) < both.radii[0]


# -- Poisson identity ----------------------------------------------------------


def test_poisson_identity_at_center():
    assert poisson_identity_residual(BUMP, (0.0, 0.0), 0.5, 1.0, 1e-6) < 1e-3


@pytest.mark.parametrize("x,tau", [((0.3, 0.1), 0.3), ((0.0, 0.0), 0.2), ((0.5, 0.5), 0.9), ((-0.6, 0.2), 1.4)])
def test_poisson_identity_off_center(x, tau):
    assert poisson_identity_residual(BUMP, x, tau, 1.0, 1e-6) < 1e-6


def test_poisson_identity_other_speed():
    theta = make_bump(((0.2, 0.0), 1.5), (0.8, 0.7))
    assert poisson_identity_residual(theta, (0.1, 0.1), 1.0, 2.5, 1e-7) < 1e-6


def test_poisson_identity_trivial_cases():
    assert poisson_identity_check(BUMP, (0.0, 0.0), 2.5, 1.0, 1e-6) == (0.0, 0.0)
    # the disk around x never reaches the support before the support ends
    assert poisson_identity_residual(BUMP, (10.0, 0.0), 0.5, 1.0, 1e-6) == 0.0
    with pytest.raises(ValueError):
        poisson_identity_residual(BUMP, (0, 0), -0.1, 1.0, 1e-6)


def test_poisson_certified_bound_shrinks():
    bounds = []
    for i in range(4):
        res, err = poisson_identity_check(BUMP, (0.0, 0.0), 0.5, 1.0, 1e-6 / 2**i)
        bounds.append(res + err)
    assert all(b1 < b0 for b0, b1 in zip(bounds, bounds[1:]))


# -- weak form -------------------------------------------------------------


def test_weak_trivial_cases():
    empty = sample_series(StableParams(1.5), 0, 0)
    assert weak_lhs(BUMP, empty, ONE, P) == 0.0
    s = sample_series(StableParams(1.5), 0, 30)
    assert weak_lhs(BUMP, s, sigma_zero(), P) == 0.0
    assert weak_rhs(BUMP, s, sigma_zero()) == 0.0
    report = weak_residual(BUMP, s, sigma_zero(), P)
    assert report.lhs == 0.0 and report.rhs == 0.0


def test_rhs_zero_when_atoms_outside():
    s = sample_series(StableParams(1.5), 0, 50)
    ang = np.linspace(0, 2 * np.pi, 50, endpoint=False)
    ring = np.linspace(1.0, 3.0, 50)[:, None] * np.stack([np.cos(ang), np.sin(ang)], -1)
    far = TruncatedLePage(s.params, 0, s.gammas, ring, s.gaussians)
    assert weak_rhs(BUMP, far, ONE) == 0.0


def test_rhs_single_atom_at_center():
    s = sample_series(StableParams(1.5), 3, 1)
    centered = TruncatedLePage(s.params, 3, s.gammas, np.zeros((1, 2)), s.gaussians)
    oracle, _ = integrate.quad(lambda t: math.exp(-1 - 1 / (1 - (t - 1) ** 2)) if abs(t - 1) < 1 else 0.0, 0, 2, epsabs=1e-14)
    phi0 = 1 / (2 * math.pi)
    expect = s.constant * s.gammas[0] ** (-1 / 1.5) * phi0 ** (-1 / 1.5) * s.gaussians[0] * oracle
    assert weak_rhs(BUMP, centered, ONE, 1e-10) == pytest.approx(expect, rel=1e-9)


@pytest.mark.parametrize("sigma", [ONE, sigma_holder(0.5)], ids=["const", "holder"])
def test_single_atom_identity(sigma):
    s = sample_series(StableParams(1.5), 12, 1)
    atom = TruncatedLePage(s.params, 12, s.gammas, [[0.25, -0.3]], s.gaussians)
    report = weak_residual(BUMP, atom, sigma, P)
    assert abs(report.per_atom_residuals[0]) / abs(report.rhs_terms[0]) < 1e-3
    assert report.residual == report.lhs - report.rhs


def test_ensemble_identity():
    s = sample_series(StableParams(1.5), 1, 100)
    report = weak_residual(BUMP, s, ONE, P)
    assert abs(report.residual) / (abs(report.lhs) + abs(report.rhs) + 1e-300) < 1e-3
    assert np.max(report.relative_residuals()) < 1e-3


def test_per_atom_bound():
    s = sample_series(StableParams(0.75), 2, 40)
    report = weak_residual(BUMP, s, ONE, P)
    for k in range(s.K):
        assert abs(report.lhs_terms[k]) <= atom_term_bound(BUMP, s.weights[k], 1.0, 1.0)


def test_linearity_in_test_function():
    s = sample_series(StableParams(1.5), 6, 8)
    other = make_bump(((0.5, 0.2), 1.3), (0.6, 0.5))
    r1 = weak_residual(BUMP, s, ONE, P)
    r2 = weak_residual(other, s, ONE, P)
    r12 = weak_residual(BUMP + other, s, ONE, P)
    assert r12.lhs == pytest.approx(r1.lhs + r2.lhs, abs=1e-6)
    assert r12.rhs == pytest.approx(r1.rhs + r2.rhs, abs=1e-6)
    assert abs(r12.residual - (r1.residual + r2.residual)) < 1e-6


def test_translation_covariance():
    # atom weights hold phi(xi_k), which is not translation invariant, so the
    # per-atom integrals are compared with the weights held fixed
    shift = np.array([3.7, -2.2])
    moved = BUMP.translated(shift)
    sig = sigma_holder(0.5)
    for xi in ([0.2, 0.1], [0.9, -0.6], [1.8, 0.4]):
        xi = np.array(xi)
        assert atom_lhs_integral(moved, xi + shift, sig, P) == pytest.approx(atom_lhs_integral(BUMP, xi, sig, P), abs=1e-10)
        assert atom_rhs_integral(moved, xi + shift, sig, 1e-6) == pytest.approx(atom_rhs_integral(BUMP, xi, sig, 1e-6), abs=1e-10)


@pytest.mark.parametrize("sigma", [ONE, sigma_holder(0.5)], ids=["const", "holder"])
def test_refinement_convergence(sigma):
    xi = np.array([0.2, 0.1])
    bounds = []
    for i in range(4):
        tol = 1e-6 / 2**i
        lhs, err = atom_lhs_integral(BUMP, xi, sigma, WaveKernelParams(1.0, tol), with_error=True)
        bounds.append(abs(lhs - atom_rhs_integral(BUMP, xi, sigma, tol)) + err)
    assert all(b1 < b0 for b0, b1 in zip(bounds, bounds[1:]))


def test_report_csv():
    s = sample_series(StableParams(1.5), 1, 3)
    text = weak_residual(BUMP, s, ONE, P).to_csv().splitlines()
    assert text[0] == "k,lhs_term,rhs_term,residual"
    assert len(text) == 5 and text[-1].startswith("# summary lhs=")
