import math

import numpy as np
import pytest
import sympy as sp
from scipy.integrate import quad

from vacuumlab.errors import CFLViolation, GuardViolation, RegimeError, ResolutionError
from vacuumlab.euler1d import (Euler1DConfig, ManufacturedSolution, PerturbationField1D,
                               cfl_limit, default_velocity_power, derivative_count, energy,
                               energy_terms, mms_rk4_study, mms_spatial_study,
                               mms_temporal_study, momentum_residual,
                               momentum_residual_rescaled, pressure_operator,
                               run_stability_experiment, select_regime, step)
from vacuumlab.weights import WeightedGrid


def zero_field(gamma, n=32, alpha=1.0, alphadot=0.0):
    return PerturbationField1D.initial(WeightedGrid.interval(n, gamma), gamma,
                                       alpha0=alpha, alphadot0=alphadot)


# ---- regimes ---------------------------------------------------------------
def test_regime_selection():
    assert select_regime(2.0) == "gamma2"
    assert select_regime(5.0) == "gamma_gt3"
    assert select_regime(1.5) == "gamma_1to3"
    assert select_regime(3.0) == "gamma_1to3"
    with pytest.raises(RegimeError):
        energy_terms(2.5, "gamma2")


def test_derivative_count_and_velocity_power():
    # ceil((3g-2)/(g-1)) + 1 evaluated by hand
    assert derivative_count(1.5) == 6
    assert derivative_count(3.0) == 5
    assert derivative_count(2.5) == 5
    assert default_velocity_power(2.0) == 1.5
    assert default_velocity_power(5.0) == 2.0


# ---- residuals -------------------------------------------------------------
@pytest.mark.parametrize("alpha,alphadot", [(1.0, 0.0), (3.7, 1.2)])
def test_identity_map_is_steady(alpha, alphadot):
    f = zero_field(2.0, alpha=alpha, alphadot=alphadot)
    assert np.max(np.abs(momentum_residual(f))) < 1e-14


def test_identity_map_is_steady_rescaled():
    f = zero_field(4.0, alpha=2.0, alphadot=0.5)
    assert np.max(np.abs(momentum_residual_rescaled(f))) < 1e-14
    with pytest.raises(RegimeError):
        momentum_residual_rescaled(zero_field(2.0))


def test_pressure_operator_by_hand():
    """deta = c x: eta_x = 1+c, eta_xx = 0, so P = x(1 - (1+c)^{-g}) + c x."""
    g, c = 2.0, 0.05
    grid = WeightedGrid.interval(16, g)
    x = grid.nodes
    P = pressure_operator(c * x, grid, g)
    np.testing.assert_allclose(P, x * (1 - (1 + c) ** -g) + c * x, atol=1e-14)


def test_rescaled_is_scalar_multiple():
    g = 5.0
    grid = WeightedGrid.interval(24, g)
    x = grid.nodes
    f = PerturbationField1D.initial(grid, g, v0=1e-3 * np.sin(np.pi * x),
                                    deta0=1e-3 * (1 - x**2), alpha0=1.7, alphadot0=0.3)
    vt = np.cos(x)
    np.testing.assert_allclose(momentum_residual_rescaled(f, vt),
                               momentum_residual(f, vt) * 1.7 ** (3 - g), rtol=1e-12)


def test_guard_reports_location():
    grid = WeightedGrid.interval(16, 2.0)
    f = PerturbationField1D.initial(grid, 2.0, deta0=0.2 * grid.nodes)
    with pytest.raises(GuardViolation) as exc:
        f.guard()
    assert exc.value.value == pytest.approx(0.2)
    assert exc.value.node is not None


# ---- stepping --------------------------------------------------------------
@pytest.mark.parametrize("g", [2.0, 4.0])
def test_steady_state_preserved(g):
    f = zero_field(g, 64)
    dt = cfl_limit(f, 0.5)
    for k in range(1000):
        f = step(f, dt, t_new=(k + 1) * dt)
    assert np.max(np.abs(f.deta)) < 1e-12
    assert f.t == pytest.approx(1000 * dt)


def test_scale_follows_scalar_law():
    """alpha'' = alpha^{-g} along the stepper; d=1 first integral alpha'^2/2 + alpha^{1-g}/(g-1)."""
    g = 2.0
    drift = []
    for m in (200, 400):
        f = zero_field(g, 16, alpha=1.0, alphadot=0.2)
        e0 = 0.5 * f.alphadot**2 + f.alpha ** (1 - g) / (g - 1)
        dt = 17.5 / m
        for k in range(m):
            f = step(f, dt)
        drift.append(abs(0.5 * f.alphadot**2 + f.alpha ** (1 - g) / (g - 1) - e0))
    assert drift[0] < 1e-6
    assert drift[0] / drift[1] > 12.0  # fourth-order time stepping


def test_cfl_enforced():
    f = zero_field(2.0)
    with pytest.raises(CFLViolation):
        step(f, 2.0 * cfl_limit(f, 0.5))


def test_cfl_bound_by_hand():
    g = 2.0
    grid = WeightedGrid.interval(9, g)
    f = PerturbationField1D.initial(grid, g)
    c = np.sqrt(g * grid.d_values)
    h = np.diff(grid.nodes)
    hmin = np.minimum(np.r_[h[0], h], np.r_[h, h[-1]])
    assert cfl_limit(f, 0.5) == pytest.approx(0.5 * np.min(hmin[1:-1] / c[1:-1]), rel=1e-14)


# ---- energies --------------------------------------------------------------
def test_energy_zero():
    assert energy(zero_field(2.0, 16)).total == 0.0
    assert energy(zero_field(5.0, 16)).total == 0.0


def test_energy_against_fine_quadrature():
    """Each summand int d^{2p} (d^b deta)^2 recomputed by adaptive quadrature on sympy derivatives."""
    g = 2.0
    grid = WeightedGrid.interval(24, g)
    x = sp.symbols("x")
    expr = sp.Rational(1, 100) * (1 - x**2) ** 2
    f = PerturbationField1D.initial(grid, g, deta0=sp.lambdify(x, expr)(grid.nodes))
    rep = energy(f)
    dfun = lambda y: 0.25 * (1 - y * y)
    for term in rep.terms:
        if term.field == "v":
            assert rep.summands[term.key] == 0.0
            continue
        der = sp.lambdify(x, sp.diff(expr, x, term.b))
        oracle = quad(lambda y: dfun(y) ** (2 * term.d_power) * der(y) ** 2, -1, 1,
                      epsabs=0, epsrel=1e-12)[0]
        if oracle == 0.0:
            assert rep.summands[term.key] < 1e-20
        else:
            assert rep.summands[term.key] == pytest.approx(oracle, rel=5e-3)


def test_energy_alpha_weights():
    g = 5.0
    grid = WeightedGrid.interval(24, g)
    x = grid.nodes
    f1 = PerturbationField1D.initial(grid, g, v0=np.sin(x), deta0=1e-2 * np.cos(x), alpha0=1.0)
    f2 = PerturbationField1D.initial(grid, g, v0=np.sin(x), deta0=1e-2 * np.cos(x), alpha0=2.0)
    r1, r2 = energy(f1), energy(f2)
    for t in r1.terms:
        assert r2.summands[t.key] == pytest.approx(r1.summands[t.key] * 2.0 ** (2 * t.alpha_power),
                                                   rel=1e-12)
    assert energy(f1.scaled(3.0)).total == pytest.approx(9.0 * r1.total, rel=1e-12)


def test_energy_needs_resolution():
    with pytest.raises(ResolutionError):
        energy(PerturbationField1D.initial(WeightedGrid.interval(33, 2.0, "uniform"), 2.0))


# ---- experiments -----------------------------------------------------------
def test_zero_perturbation_stays_zero():
    res = run_stability_experiment({"gamma": 2.0, "n_nodes": 32, "T_end": 5.0,
                                    "perturbation": {"kind": "fourier", "amplitude": 0.0, "mode": 1}})
    assert res.verdict == "PASS"
    i = res.header.index("total_energy")
    assert all(r[i] == 0.0 for r in res.rows)


def test_small_data_bounded_and_decaying_gamma2():
    res = run_stability_experiment({"gamma": 2.0, "n_nodes": 64, "T_end": 50.0,
                                    "perturbation": {"kind": "fourier", "amplitude": 1e-3, "mode": 1}})
    d = res.diagnostics
    assert res.verdict == "PASS"
    assert d["guard_trip"] is None
    assert d["max_energy_ratio"] <= 10.0
    assert d["decay_ratio"] < 0.25
    # alpha^{3/2} v stays of the size of the data and relaxes after its peak
    i = res.header.index("sup_alpha_weighted_v")
    w = [r[i] for r in res.rows]
    assert max(w) <= 2.0e-3
    assert w[-1] < max(w)


def test_small_data_gamma5_rescaled():
    res = run_stability_experiment({"gamma": 5.0, "n_nodes": 64, "T_end": 50.0,
                                    "perturbation": {"kind": "bump", "amplitude": 1e-3, "mode": 1}})
    assert res.verdict == "PASS"
    top = [t.key for t in energy_terms(5.0) if t.b == 5][0]
    j = res.header.index(top)
    top_series = [r[j] for r in res.rows]
    # deta(0) = 0, so the top summand first grows, then decays
    assert res.rows[-1][j] < 0.1 * max(top_series)


def test_config_round_trip():
    cfg = Euler1DConfig(gamma=3.0, amplitude=2e-3, mode=2)
    assert Euler1DConfig.from_dict(cfg.to_dict()) == cfg


# ---- manufactured solutions ------------------------------------------------
def test_manufactured_forcing_matches_hand_derivation():
    """At x=0 with d_x(0)=0 the forcing reduces to
    a^{g+1} v_t + 2 a^g a' v + deta - g d(0) eta_x^{-g-1} eta_xx."""
    g, amp, t, a, ad = 2.0, 0.01, 0.3, 1.4, 0.2
    ms = ManufacturedSolution(g, amp)
    e = math.exp(-t)
    eta_x = 1 + amp * math.pi * e
    expected = a**3 * amp * 0 * e + 2 * a**2 * ad * 0 + 0 - g * 0.25 * eta_x ** (-3) * 0
    assert ms.forcing(np.array([0.0]), t, a, ad)[0] == pytest.approx(expected, abs=1e-15)
    x = 0.5
    s, c = math.sin(math.pi * x), math.cos(math.pi * x)
    de, v, vt = amp * s * e, -amp * s * e, amp * s * e
    ex, exx = 1 + amp * math.pi * c * e, -amp * math.pi**2 * s * e
    dd, ddx = 0.25 * (1 - x * x), -0.5 * x
    P = x + 2 * ddx * ex**-2 + de - 2 * dd * ex**-3 * exx
    assert ms.forcing(np.array([x]), t, a, ad)[0] == pytest.approx(
        a**3 * vt + 2 * a**2 * ad * v + P, rel=1e-13)


@pytest.mark.parametrize("g", [2.0, 5.0])
def test_mms_temporal_order_two(g):
    assert abs(mms_temporal_study(g)["order"] - 2.0) <= 0.2


@pytest.mark.parametrize("g", [2.0, 5.0])
def test_mms_spatial_spectral_and_fd4(g):
    errs = mms_spatial_study(g)["errors"]
    assert errs[-1] < 1e-12
    assert errs[0] > 1e3 * errs[-1]
    fd = mms_spatial_study(g, ns=(17, 33, 65), family="uniform")
    assert min(fd["orders"]) >= 3.5


def test_rk4_solution_order():
    orders = mms_rk4_study(2.0)["orders"]
    assert all(abs(o - 4.0) <= 0.2 for o in orders)
