import numpy as np
import pytest

from vacuumlab.affine import (AffineState, ScalarAffineState, affine_rhs, compare_growth_models,
                              det_growth_exponent, extract_asymptotics, integrate_affine,
                              predicted_det_exponent, scalar_rhs, shoot_prescribed_asymptotics)
from vacuumlab.errors import DomainError, InsufficientHorizonError

I = np.eye(3)


def adjugate(A):
    """Cofactor matrix from 2x2 minors, independent of any inverse routine."""
    C = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            m = np.delete(np.delete(A, i, 0), j, 1)
            C[i, j] = (-1) ** (i + j) * (m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
    return C


# ---- right-hand sides ------------------------------------------------------
def test_rhs_identity():
    np.testing.assert_allclose(affine_rhs(AffineState(I, I, 1.5)), I, atol=1e-15)


def test_rhs_dilation():
    np.testing.assert_allclose(affine_rhs(AffineState(2 * I, I, 2.0)), I / 16, rtol=1e-14)


def test_rhs_matches_adjugate_oracle():
    rng = np.random.default_rng(3)
    A = I + 0.3 * rng.standard_normal((3, 3))
    assert np.linalg.det(A) > 0.2
    C = adjugate(A)
    det = float(np.dot(A[0], C[0]))
    np.testing.assert_allclose(affine_rhs(AffineState(A, I, 2.0)), det ** -2.0 * C, rtol=1e-12)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_scalar_rhs_unit(dim):
    assert scalar_rhs(ScalarAffineState(1.0, 0.0, 1.7, dim)) == 1.0


def test_scalar_rhs_values():
    assert scalar_rhs(ScalarAffineState(2.0, 0.0, 2.0, 3)) == pytest.approx(0.0625, rel=1e-15)
    assert scalar_rhs(ScalarAffineState(2.0, 0.0, 2.0, 1)) == pytest.approx(0.25, rel=1e-15)


def test_rejects_bad_states():
    with pytest.raises(DomainError):
        AffineState(I, I, 1.0)
    with pytest.raises(DomainError):
        AffineState(-I, I, 2.0)
    with pytest.raises(DomainError):
        ScalarAffineState(0.0, 0.0, 2.0)


# ---- integration -----------------------------------------------------------
def test_scalar_linear_growth():
    """d=1, gamma=2 from rest: alpha'^2/2 + 1/alpha = 1, so alpha' -> sqrt(2)
    and alpha(T)/T -> sqrt(2) (linear growth, with slope sqrt(2) rather than 1)."""
    tr = integrate_affine(ScalarAffineState(1.0, 0.0, 2.0, dim=1), 100.0, 1.0)
    assert np.all(np.diff(tr.alphadot) >= 0)
    limit = np.sqrt(2.0)
    # alpha' = sqrt(2 - 2/alpha) exactly along the motion
    np.testing.assert_allclose(tr.alphadot, np.sqrt(2.0 - 2.0 / tr.alpha), atol=1e-9)
    assert abs(tr.alphadot[-1] - limit) < 2e-2
    assert abs(tr.alpha[-1] / 100.0 - limit) < 0.05


def test_scalar_energy_conserved():
    """alpha'^2/2 + alpha^{-2(gamma-1)... }: for d=1 the first integral is
    alpha'^2/2 + alpha^{1-gamma}/(gamma-1)."""
    g = 2.0
    tr = integrate_affine(ScalarAffineState(1.0, 0.3, g, dim=1), 50.0, 0.5)
    e = 0.5 * tr.alphadot**2 + tr.alpha ** (1 - g) / (g - 1)
    assert np.max(np.abs(e - e[0])) < 1e-9


@pytest.mark.parametrize("g", [1.2, 1.5])
def test_det_growth_cubic(g):
    tr = integrate_affine(AffineState(I, I, g), 1000.0, 1.0)
    assert abs(det_growth_exponent(tr, 10.0, 1000.0) - 3.0) <= 0.05
    assert predicted_det_exponent(g) == 3.0


def test_isotropic_matches_scalar_solution():
    """A = alpha I solves the matrix law exactly when alpha solves the 3-d scalar law."""
    g = 1.7
    tr = integrate_affine(AffineState(I, 0.5 * I, g), 200.0, 1.0)
    sc = integrate_affine(ScalarAffineState(1.0, 0.5, g, dim=3), 200.0, 1.0)
    off = tr.A - tr.A[:, 0, 0][:, None, None] * I
    assert np.max(np.abs(off)) < 1e-10
    np.testing.assert_allclose(tr.A[:, 0, 0], sc.alpha, rtol=1e-8)
    prof = extract_asymptotics(tr)
    np.testing.assert_allclose(prof.A1, sc.alphadot[-1] * I, atol=1e-2)
    assert np.max(np.abs(prof.A1 - np.diag(np.diag(prof.A1)))) < 1e-10


def test_velocity_is_cauchy():
    tr = integrate_affine(AffineState(I, 0 * I, 2.0), 2000.0, 1.0)
    add = np.max(np.abs(tr.Addot()), axis=(1, 2))
    assert add[-1] < 1e-3 * add[0]
    gaps = [np.max(np.abs(tr.Adot[2 * t] - tr.Adot[t])) for t in (50, 200, 1000)]
    assert gaps[0] > gaps[1] > gaps[2]


def test_rk4_order():
    st = AffineState(I, 0.2 * I + 0.05 * np.ones((3, 3)), 2.0)
    ref = integrate_affine(st, 2.0, 0.5, rtol=1e-13, atol=1e-13).A[-1]
    errs = [np.max(np.abs(integrate_affine(st, 2.0, h, method="rk4").A[-1] - ref))
            for h in (0.1, 0.05, 0.025)]
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(orders > 3.8)


# ---- asymptotics -----------------------------------------------------------
def test_velocity_rate_gamma_15():
    prof = extract_asymptotics(integrate_affine(AffineState(I, I, 1.5), 1.0e4, 1.0))
    name, fit, pred = prof.residual_rates[0]
    assert pred == -1.5
    assert abs(fit - pred) <= 0.15


def test_log_growth_at_borderline():
    tr = integrate_affine(AffineState(I, I, 4.0 / 3.0), 1.0e4, 1.0)
    prof = extract_asymptotics(tr)
    assert prof.A0 is None
    assert prof.log_model_preferred
    cmp = compare_growth_models(tr, prof.A1, (1000.0, 1.0e4))
    assert cmp["log_preferred"]


def test_short_horizon_rejected():
    with pytest.raises(InsufficientHorizonError):
        extract_asymptotics(integrate_affine(AffineState(I, 0 * I, 1.5), 20.0, 1.0), tail_tol=1e-8)


# ---- shooting --------------------------------------------------------------
def test_shooting_identity_rate():
    st = shoot_prescribed_asymptotics(I, 0 * I, 2.0)
    # beyond t ~ 300 the remainder sinks below the integrator tolerance times |A|
    tr = integrate_affine(st, 300.0, 1.0)
    m = tr.t >= 10
    dev = np.max(np.abs(tr.A[m] - tr.t[m, None, None] * I), axis=(1, 2))
    slope = np.polyfit(np.log(tr.t[m] + 1), np.log(dev), 1)[0]
    assert abs(slope - (-2.0)) < 0.15


def test_shooting_diagonal_preserved():
    st = shoot_prescribed_asymptotics(np.diag([1.0, 2.0, 3.0]), 0 * I, 2.0)
    assert np.max(np.abs(st.A - np.diag(np.diag(st.A)))) < 1e-12
    assert np.max(np.abs(st.Adot - np.diag(np.diag(st.Adot)))) < 1e-12


def test_shooting_round_trip_offset():
    st = shoot_prescribed_asymptotics(I, I, 3.0)
    prof = extract_asymptotics(integrate_affine(st, 2.0e4, 2.0))
    assert np.max(np.abs(prof.A0 - I)) < 1e-3
    assert np.max(np.abs(prof.A1 - I)) < 1e-3


def test_shooting_needs_gamma_two():
    with pytest.raises(DomainError):
        shoot_prescribed_asymptotics(I, 0 * I, 1.5)
