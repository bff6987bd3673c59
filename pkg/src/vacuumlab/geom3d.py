"""Cofactor calculus and identity checks for 3-d Lagrangian flow maps.

Conventions: ``F[..., i, s] = d eta^i / d x_s`` (so the columns of F are
eta,_s), ``A = F^{-1}`` with ``A[..., k, i] = A^k_i``, ``J = det F`` and the
cofactor ``a = J A``.  Row k of ``a`` is ``eta,_{k+1} x eta,_{k+2}`` (indices
cyclic) and the defining property reads ``a F = J I``.

Fields come in two flavours.  :class:`AnalyticField` wraps sympy
expressions and differentiates exactly; :class:`CartesianGrid` samples a
field on a uniform cube and differentiates with 4th-order stencils.  The
two paths are kept independent so stencil bugs show up as disagreement.
Time derivatives in the identity checks are always centred differences,
so the temporal order of every residual is 2.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import sympy as sp
from scipy.integrate import solve_ivp

from .affine import GeneralAffineSpec, ScalarAffineState, scalar_rhs
from .errors import DomainError, GuardViolation, ResolutionError
from .weights import WeightedGrid, fd4_diff_matrix

X = sp.symbols("x1 x2 x3", real=True)
T = sp.Symbol("t", real=True)
GUARD = 0.1


# --------------------------------------------------------------------------
# algebra
# --------------------------------------------------------------------------
def levi_civita() -> np.ndarray:
    """Permutation symbol eps[i, j, k] with eps[0, 1, 2] = 1."""
    e = np.zeros((3, 3, 3))
    for i, j, k in itertools.permutations(range(3)):
        e[i, j, k] = np.linalg.det(np.eye(3)[[i, j, k]])
    return e


EPS = levi_civita()


def cofactor(F) -> np.ndarray:
    """Rows eta,_2 x eta,_3 ; eta,_3 x eta,_1 ; eta,_1 x eta,_2 (works for singular F)."""
    F = np.asarray(F, dtype=float)
    c = [F[..., :, s] for s in range(3)]
    return np.stack([np.cross(c[1], c[2]), np.cross(c[2], c[0]), np.cross(c[0], c[1])], axis=-2)


def curl_of_matrix(M) -> np.ndarray:
    """curl_i = eps_ijk M^k_j for a field of 3x3 matrices M[..., k, j]."""
    return np.einsum("ijk,...kj->...i", EPS, M)


def ball_points(n: int, seed: int = 0, radius: float = 1.0) -> np.ndarray:
    """n points uniformly distributed in the ball (seeded)."""
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1.0 / 3.0)
    return d * r[:, None]


def _rel(dev, scale) -> float:
    return float(np.max(dev) / max(float(np.max(scale)), 1e-300))


def _fit_order(hs, errs) -> float:
    hs, errs = np.asarray(hs, float), np.asarray(errs, float)
    ok = errs > 1e-14
    if ok.sum() < 2:
        return float("inf")
    return float(np.polyfit(np.log(hs[ok]), np.log(errs[ok]), 1)[0])


@dataclass
class IdentityReport:
    check_name: str
    field_spec: str
    resolutions: list
    deviations: list
    fitted_order: float | None
    verdict: str
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"check_name": self.check_name, "field_spec": self.field_spec,
             "resolutions": list(self.resolutions),
             "deviations": [float(x) for x in self.deviations],
             "fitted_order": None if self.fitted_order is None else float(self.fitted_order),
             "verdict": self.verdict}
        if self.extra:
            d["extra"] = self.extra
        return d


# --------------------------------------------------------------------------
# fields
# --------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class TensorField3D:
    """A flow map sampled at points with its derived matrix caches."""

    points: np.ndarray
    eta: np.ndarray
    grad: np.ndarray
    family: object = None
    t: float = 0.0

    @cached_property
    def J(self) -> np.ndarray:
        return np.linalg.det(self.grad)

    @cached_property
    def a(self) -> np.ndarray:
        return cofactor(self.grad)

    @cached_property
    def A(self) -> np.ndarray:
        return self.a / self.J[..., None, None]

    def validate(self, tol: float = 1e-10):
        if not np.all(self.J > 0):
            raise DomainError("the Jacobian must be positive at every node")
        dev = np.abs(self.a @ self.grad - self.J[..., None, None] * np.eye(3))
        if _rel(dev, np.abs(self.J)) > tol:
            raise DomainError("cofactor identity a F = J I violated")

    def grad_deviation_norm(self) -> np.ndarray:
        """Pointwise spectral norm of grad(eta) - I."""
        return np.linalg.norm(self.grad - np.eye(3), ord=2, axis=(-2, -1))

    def guard(self, theta: float = GUARD):
        g = self.grad_deviation_norm().reshape(-1)
        i = int(np.argmax(g))
        if not g[i] <= theta:
            raise GuardViolation(f"|grad deta| = {g[i]:.4g} exceeds {theta}", node=i,
                                 x=self.points.reshape(-1, 3)[i].tolist(), t=self.t,
                                 value=float(g[i]))


@dataclass(frozen=True, eq=False)
class VelocityField3D:
    v: np.ndarray
    grad: np.ndarray
    eta: TensorField3D

    def __post_init__(self):
        if self.v.shape != self.eta.eta.shape or self.grad.shape != self.eta.grad.shape:
            raise DomainError("velocity and flow map sampled on different nodes")

    def curl_eta(self) -> np.ndarray:
        """Lagrangian curl eps_ijk v^k,_r A^r_j."""
        return curl_of_matrix(self.grad @ self.eta.A)


class AnalyticField:
    """Vector field given by three sympy expressions in x1, x2, x3 and optionally t.

    Derivatives are taken symbolically and cached; ``max_derivative`` caps
    the total order to keep expression growth in check.
    """

    def __init__(self, exprs, name: str = "analytic", max_derivative: int = 10):
        self.exprs = tuple(sp.sympify(e) for e in exprs)
        if len(self.exprs) != 3:
            raise DomainError("three components required")
        self.name = name
        self.max_derivative = max_derivative
        self._expr_cache = {}
        self._fn_cache = {}

    def __repr__(self):
        return f"AnalyticField({self.name})"

    def deriv_expr(self, mi=(0, 0, 0), t_order: int = 0):
        mi = tuple(int(m) for m in mi)
        if sum(mi) > self.max_derivative:
            raise ResolutionError(f"{sum(mi)} derivatives exceed the budget "
                                  f"{self.max_derivative} of {self.name}")
        key = (mi, t_order)
        if key not in self._expr_cache:
            out = []
            for e in self.exprs:
                for ax, m in enumerate(mi):
                    if m:
                        e = sp.diff(e, X[ax], m)
                if t_order:
                    e = sp.diff(e, T, t_order)
                out.append(e)
            self._expr_cache[key] = tuple(out)
        return self._expr_cache[key]

    def _fn(self, mi, t_order=0):
        key = (tuple(mi), t_order)
        if key not in self._fn_cache:
            self._fn_cache[key] = sp.lambdify((*X, T), list(self.deriv_expr(mi, t_order)), "numpy")
        return self._fn_cache[key]

    def eval(self, pts, t: float = 0.0, mi=(0, 0, 0), t_order: int = 0) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        vals = self._fn(mi, t_order)(pts[..., 0], pts[..., 1], pts[..., 2], t)
        z = np.zeros(pts.shape[:-1])
        return np.stack([np.asarray(v, dtype=float) + z for v in vals], axis=-1)

    def grad(self, pts, t: float = 0.0, mi=(0, 0, 0), t_order: int = 0) -> np.ndarray:
        """G[..., i, s] = d_s d^mi eta^i."""
        cols = []
        for s in range(3):
            m = list(mi)
            m[s] += 1
            cols.append(self.eval(pts, t, m, t_order))
        return np.stack(cols, axis=-1)

    def tensor_field(self, pts, t: float = 0.0) -> TensorField3D:
        pts = np.asarray(pts, dtype=float)
        return TensorField3D(pts, self.eval(pts, t), self.grad(pts, t), family=self, t=t)

    def at_time(self, t: float) -> "AnalyticField":
        return AnalyticField([e.subs(T, t) for e in self.exprs], f"{self.name}@t={t}",
                             self.max_derivative)


def identity_field() -> AnalyticField:
    return AnalyticField(X, "identity")


def random_fourier_family(seed: int, amplitude: float = 0.02, n_modes: int = 2,
                          time_dependent: bool = True, max_wavenumber: int = 2) -> AnalyticField:
    """eta = x + sum_m c_m sin(k_m . x + w_m t + phi_m), seeded.

    Amplitudes are scaled so |grad deta| <= 3 * n_modes * amplitude * |k|_max,
    well inside the guard for the defaults.
    """
    rng = np.random.default_rng(seed)
    exprs = []
    for i in range(3):
        e = X[i]
        for _ in range(n_modes):
            k = rng.integers(-max_wavenumber, max_wavenumber + 1, size=3)
            if not np.any(k):
                k[i] = 1
            c = amplitude * (2.0 * rng.random() - 1.0)
            w = (0.5 + rng.random()) if time_dependent else 0.0
            ph = 2.0 * math.pi * rng.random()
            arg = sum(int(kk) * X[j] for j, kk in enumerate(k)) + sp.Float(w) * T + sp.Float(ph)
            e = e + sp.Float(c) * sp.sin(arg)
        exprs.append(e)
    return AnalyticField(exprs, f"fourier(seed={seed})")


# --------------------------------------------------------------------------
# Cartesian 4th-order grid
# --------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class CartesianGrid:
    """Uniform n^3 grid on [-L, L]^3 with 4th-order differentiation."""

    n: int
    L: float = 1.0
    max_derivative: int = 3

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.n - 1)

    @cached_property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.L, self.L, self.n)

    @cached_property
    def points(self) -> np.ndarray:
        g = np.meshgrid(self.axis, self.axis, self.axis, indexing="ij")
        return np.stack(g, axis=-1)

    @cached_property
    def D(self) -> np.ndarray:
        return fd4_diff_matrix(self.n, self.h)

    def d(self, f, axis: int) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        return np.moveaxis(np.tensordot(self.D, np.moveaxis(f, axis, 0), axes=(1, 0)), 0, axis)

    def dmulti(self, f, mi) -> np.ndarray:
        if sum(mi) > self.max_derivative:
            raise ResolutionError(f"{sum(mi)} derivatives requested; finite-difference grids "
                                  f"support at most {self.max_derivative}")
        for ax, m in enumerate(mi):
            for _ in range(m):
                f = self.d(f, ax)
        return f

    def grad(self, f) -> np.ndarray:
        """Gradient of grid data f[n, n, n, *rest] as an appended last axis."""
        return np.stack([self.d(f, s) for s in range(3)], axis=-1)

    def vector_grad(self, u) -> np.ndarray:
        """G[..., i, s] = d_s u^i for u of shape (n, n, n, 3)."""
        return np.stack([self.d(u, s) for s in range(3)], axis=-1)

    def mask(self, radius: float = 1.0) -> np.ndarray:
        return np.linalg.norm(self.points, axis=-1) <= radius + 1e-12

    def sample(self, fld: AnalyticField, t: float = 0.0) -> np.ndarray:
        return fld.eval(self.points, t)

    def tensor_field(self, eta_values) -> TensorField3D:
        return TensorField3D(self.points, eta_values, self.vector_grad(eta_values))


# --------------------------------------------------------------------------
# pointwise algebraic identities
# --------------------------------------------------------------------------
def jacobian_identity_check(fld: TensorField3D) -> float:
    """max |J - (1/3) eta^r,_s a^s_r| relative to max |J|."""
    tr = np.einsum("...rs,...sr->...", fld.grad, fld.a)
    return _rel(np.abs(fld.J - tr / 3.0), np.abs(fld.J))


def cofactor_identity_deviation(fld: TensorField3D) -> float:
    dev = np.abs(fld.a @ fld.grad - fld.J[..., None, None] * np.eye(3))
    return _rel(dev, np.abs(fld.J))


def lagrangian_curl_of_identity(fld: TensorField3D) -> float:
    """max |curl_eta eta| = max |eps_ijk eta^k,_r A^r_j| (zero for any invertible map)."""
    return float(np.max(np.abs(curl_of_matrix(fld.grad @ fld.A))))


# --------------------------------------------------------------------------
# Piola identity
# --------------------------------------------------------------------------
def piola_check(fld, grid: CartesianGrid | None = None, radius: float = 0.9) -> float:
    """max over the ball of |d_k a^k_i|.

    ``fld`` is an :class:`AnalyticField` (sampled on ``grid``) or grid values
    of eta with shape (n, n, n, 3).  Both gradient and divergence use the
    grid stencils.
    """
    if grid is None:
        raise ResolutionError("piola_check needs a differentiation grid")
    eta = grid.sample(fld) if isinstance(fld, AnalyticField) else np.asarray(fld, float)
    a = cofactor(grid.vector_grad(eta))
    div = sum(grid.d(a[..., k, :], k) for k in range(3))
    return float(np.max(np.abs(div[grid.mask(radius)])))


def piola_refinement(fld: AnalyticField, ns=(17, 33, 65), radius: float = 0.9,
                     min_order: float = 3.5) -> IdentityReport:
    errs = [piola_check(fld, CartesianGrid(n), radius) for n in ns]
    hs = [2.0 / (n - 1) for n in ns]
    order = _fit_order(hs, errs)
    return IdentityReport("piola", fld.name, list(ns), errs, order,
                          "PASS" if order >= min_order or max(errs) < 1e-12 else "FAIL")


# --------------------------------------------------------------------------
# time identities
# --------------------------------------------------------------------------
def _centred(f: Callable, t: float, dt: float):
    return (f(t + dt) - f(t - dt)) / (2.0 * dt)


def time_identities_check(family: AnalyticField, pts, t0: float, dt: float) -> dict:
    """Deviation of the three evolution laws for J, A and a at time t0.

    Left sides are centred differences in time; the velocity gradient on the
    right side is itself a centred difference of grad(eta).
    """
    pts = np.asarray(pts, dtype=float)
    fld = family.tensor_field(pts, t0)
    G = _centred(lambda t: family.grad(pts, t), t0, dt)  # v^r,_s
    J, A, a = fld.J, fld.A, fld.a

    def at(t):
        return family.tensor_field(pts, t)

    dJ = _centred(lambda t: at(t).J, t0, dt)
    dA = _centred(lambda t: at(t).A, t0, dt)
    da = _centred(lambda t: at(t).a, t0, dt)
    trG = np.einsum("...sr,...rs->...", a, G)
    rhs_J = trG
    rhs_A = -A @ G @ A
    rhs_a = (trG[..., None, None] * a - a @ G @ a) / J[..., None, None]
    return {"J": float(np.max(np.abs(dJ - rhs_J))),
            "A": float(np.max(np.abs(dA - rhs_A))),
            "a": float(np.max(np.abs(da - rhs_a)))}


def dt_halving(fn: Callable[[float], float], dts: Sequence[float]) -> tuple:
    errs = [fn(dt) for dt in dts]
    return errs, _fit_order(dts, errs)


def time_identities_study(family: AnalyticField, pts, t0: float = 0.3,
                          dts=(0.04, 0.02, 0.01), order_tol: float = 0.2) -> IdentityReport:
    rows = [time_identities_check(family, pts, t0, dt) for dt in dts]
    orders = {k: _fit_order(dts, [r[k] for r in rows]) for k in ("J", "A", "a")}
    worst = [max(r.values()) for r in rows]
    ok = all(abs(o - 2.0) <= order_tol or max(r[k] for r in rows) < 1e-11
             for k, o in orders.items())
    return IdentityReport("time_identities", family.name, list(dts), worst,
                          min(orders.values()), "PASS" if ok else "FAIL", {"orders": orders})


# --------------------------------------------------------------------------
# quadratic energy identity
# --------------------------------------------------------------------------
def _quadratic(G) -> np.ndarray:
    """(1/2)(|G|^2 - (tr G)^2 - |curl G|^2), curl_i = eps_ijk G_kj."""
    tr = np.trace(G, axis1=-2, axis2=-1)
    c = curl_of_matrix(G)
    return 0.5 * (np.sum(G * G, axis=(-2, -1)) - tr**2 - np.sum(c * c, axis=-1))


def lemma_aenergy_check(family: AnalyticField, mi, pts, t0: float, dt: float) -> dict:
    """Pointwise energy identity for grad_eta d^mi eta.

    ``lhs`` is -P^j_m (A^m_j A^k_i - A^k_j A^m_i) Q^i_k with P = grad d^mi eta
    and Q = grad d^mi v.  With A frozen at t0 it equals the time derivative
    of (1/2)(|G|^2 - (tr G)^2 - |curl G|^2), G = P A; ``frozen`` is that
    deviation.  Letting A move adds the remainder from dA/dt = -A grad(v) A;
    ``full`` is the deviation of d/dt(quadratic) from lhs + remainder.
    The curl term enters with coefficient 1 under curl_i = eps_ijk G_kj.
    """
    pts = np.asarray(pts, dtype=float)
    mi = tuple(mi)
    fld = family.tensor_field(pts, t0)
    A0 = fld.A
    P = family.grad(pts, t0, mi)
    Q = _centred(lambda t: family.grad(pts, t, mi), t0, dt)
    V = _centred(lambda t: family.grad(pts, t), t0, dt)
    term1 = np.einsum("...jm,...mj->...", P, A0) * np.einsum("...ik,...ki->...", Q, A0)
    term2 = np.einsum("...jm,...kj,...mi,...ik->...", P, A0, A0, Q)
    lhs = -(term1 - term2)
    dfrozen = _centred(lambda t: _quadratic(family.grad(pts, t, mi) @ A0), t0, dt)
    dfull = _centred(lambda t: _quadratic(family.grad(pts, t, mi) @ family.tensor_field(pts, t).A),
                     t0, dt)
    G = P @ A0
    dG = -G @ V @ A0
    trG = np.trace(G, axis1=-2, axis2=-1)
    rem = (np.sum(G * dG, axis=(-2, -1)) - trG * np.trace(dG, axis1=-2, axis2=-1)
           - np.sum(curl_of_matrix(G) * curl_of_matrix(dG), axis=-1))
    # printed form uses coefficient 2 on the curl term
    c = curl_of_matrix(G)
    dprinted = dfrozen - _centred(
        lambda t: 0.5 * np.sum(curl_of_matrix(family.grad(pts, t, mi) @ A0) ** 2, axis=-1), t0, dt)
    return {"frozen": float(np.max(np.abs(dfrozen - lhs))),
            "full": float(np.max(np.abs(dfull - lhs - rem))),
            "printed_curl_factor_2": float(np.max(np.abs(dprinted - lhs))),
            "lhs_scale": float(np.max(np.abs(lhs))),
            "curl_scale": float(np.max(np.abs(c)))}


def lemma_aenergy_study(family: AnalyticField, mi, pts, t0: float = 0.3,
                        dts=(0.04, 0.02, 0.01), order_tol: float = 0.2) -> IdentityReport:
    rows = [lemma_aenergy_check(family, mi, pts, t0, dt) for dt in dts]
    of = _fit_order(dts, [r["frozen"] for r in rows])
    ou = _fit_order(dts, [r["full"] for r in rows])
    ok = all(abs(o - 2.0) <= order_tol or max(e) < 1e-11
             for o, e in ((of, [r["frozen"] for r in rows]), (ou, [r["full"] for r in rows])))
    return IdentityReport("lemma_aenergy", f"{family.name} mi={tuple(mi)}", list(dts),
                          [r["frozen"] for r in rows], of, "PASS" if ok else "FAIL",
                          {"full_order": ou, "full": [r["full"] for r in rows],
                           "printed_curl_factor_2": rows[-1]["printed_curl_factor_2"]})


# --------------------------------------------------------------------------
# tangential derivative and the two tangential identities
# --------------------------------------------------------------------------
def tangential_from_grad(grad_f, pts) -> np.ndarray:
    """bar-d f = x cross grad f, for grad_f[..., s] (scalar) or [..., i, s] (vector)."""
    pts = np.asarray(pts, dtype=float)
    g = np.asarray(grad_f, dtype=float)
    if g.ndim == pts.ndim + 1:  # vector field
        return np.cross(pts[..., None, :], g)
    return np.cross(pts, g)


def tangential_derivative(f, pts=None, grid: CartesianGrid | None = None) -> np.ndarray:
    """(x2 d3 - x3 d2, x3 d1 - x1 d3, x1 d2 - x2 d1) applied to f.

    ``f`` may be a sympy scalar expression, an :class:`AnalyticField`
    (evaluated at ``pts``) or grid samples on ``grid``.  A vector field
    returns shape (..., 3 components, 3 directions).
    """
    if grid is not None:
        f = np.asarray(f, dtype=float)
        return tangential_from_grad(grid.grad(f), grid.points)
    pts = np.asarray(pts, dtype=float)
    if isinstance(f, AnalyticField):
        return tangential_from_grad(f.grad(pts), pts)
    e = sp.sympify(f)
    g = [sp.lambdify(X, sp.diff(e, x), "numpy") for x in X]
    grad = np.stack([np.asarray(gi(pts[..., 0], pts[..., 1], pts[..., 2]), float)
                     + np.zeros(pts.shape[:-1]) for gi in g], axis=-1)
    return tangential_from_grad(grad, pts)


def _subindices(mi):
    return itertools.product(*[range(m + 1) for m in mi])


def _cofactor_derivative_expr(fld: AnalyticField, mi):
    F = sp.Matrix(3, 3, lambda i, s: sp.diff(fld.exprs[i], X[s]))
    cols = [F[:, s] for s in range(3)]
    rows = [cols[1].cross(cols[2]), cols[2].cross(cols[0]), cols[0].cross(cols[1])]
    out = []
    for i in range(3):
        terms = []
        for k in range(3):
            e = rows[k][i]
            for ax, m in enumerate(mi):
                if m:
                    e = sp.diff(e, X[ax], m)
            terms.append(X[k] * e)
        out.append(sum(terms))
    return out


def lemma_atan_check(fld, mi, pts=None, grid: CartesianGrid | None = None,
                     radius: float = 0.9) -> dict:
    """Tangential form of x_k d^mi a^k_i.

    The verified identity is the Leibniz expansion

        x_k d^mi a^k_i = sum_{b <= mi} C(mi, b) bar-d d^b eta^{i+1} . grad d^{mi-b} eta^{i+2}

    (component indices cyclic).  Reported alongside: the one-sided variant
    x_k [G^mi]^k_i with G^mi rows d^mi eta,_{k+1} x eta,_{k+2} against
    -bar-d d^mi eta^{i+2} . grad eta^{i+1} and against
    -bar-d d^mi eta^{i+2} . bar-d eta^{i+1}.
    """
    mi = tuple(int(m) for m in mi)
    if grid is not None:
        if sum(mi) + 1 > grid.max_derivative:
            raise ResolutionError(f"{sum(mi) + 1} derivatives exceed the grid budget "
                                  f"{grid.max_derivative}")
        x = grid.points
        eta = grid.sample(fld) if isinstance(fld, AnalyticField) else np.asarray(fld, float)
        F = grid.vector_grad(eta)
        lhs_full = np.einsum("...k,...ki->...i", x, grid.dmulti(cofactor(F), mi))

        def dgrad(b):
            return grid.vector_grad(grid.dmulti(eta, b))
        mask = grid.mask(radius)
    else:
        x = np.asarray(pts, dtype=float)
        fn = sp.lambdify(X, _cofactor_derivative_expr(fld, mi), "numpy")
        lhs_full = np.stack([np.asarray(c, float) + np.zeros(x.shape[:-1])
                             for c in fn(x[..., 0], x[..., 1], x[..., 2])], axis=-1)

        def dgrad(b):
            return fld.grad(x, 0.0, b)
        mask = np.ones(x.shape[:-1], bool)
    rhs = np.zeros_like(lhs_full)
    cache = {}
    for b in _subindices(mi):
        c = np.prod([math.comb(m, bb) for m, bb in zip(mi, b)])
        rest = tuple(m - bb for m, bb in zip(mi, b))
        for key in (b, rest):
            if key not in cache:
                cache[key] = dgrad(key)
        gb, gr = cache[b], cache[rest]
        tb = tangential_from_grad(gb, x)  # [..., comp, dir]
        for i in range(3):
            p, q = (i + 1) % 3, (i + 2) % 3
            rhs[..., i] += c * np.sum(tb[..., p, :] * gr[..., q, :], axis=-1)
    # one-sided variants
    P = cache.get(mi, dgrad(mi))
    F0 = cache.get((0, 0, 0), dgrad((0, 0, 0)))
    Gm = np.stack([np.cross(P[..., :, (k + 1) % 3], F0[..., :, (k + 2) % 3]) for k in range(3)],
                  axis=-2)
    lhs_one = np.einsum("...k,...ki->...i", x, Gm)
    tP = tangential_from_grad(P, x)
    t0 = tangential_from_grad(F0, x)
    grad_form = np.stack([-np.sum(tP[..., (i + 2) % 3, :] * F0[..., (i + 1) % 3, :], axis=-1)
                          for i in range(3)], axis=-1)
    bar_form = np.stack([-np.sum(tP[..., (i + 2) % 3, :] * t0[..., (i + 1) % 3, :], axis=-1)
                         for i in range(3)], axis=-1)
    m = mask
    return {"leibniz": float(np.max(np.abs(lhs_full - rhs)[m])),
            "one_sided_grad_form": float(np.max(np.abs(lhs_one - grad_form)[m])),
            "one_sided_bar_form": float(np.max(np.abs(lhs_one - bar_form)[m])),
            "scale": float(np.max(np.abs(lhs_full)[m]))}


def lemma_atan_refinement(fld: AnalyticField, mi, ns=(17, 33, 65), radius: float = 0.9,
                          min_order: float = 3.5) -> IdentityReport:
    errs = [lemma_atan_check(fld, mi, grid=CartesianGrid(n), radius=radius)["leibniz"] for n in ns]
    hs = [2.0 / (n - 1) for n in ns]
    order = _fit_order(hs, errs)
    return IdentityReport("lemma_atan", f"{fld.name} mi={tuple(mi)}", list(ns), errs, order,
                          "PASS" if order >= min_order or max(errs) < 1e-12 else "FAIL")


def antisym_vector(M) -> np.ndarray:
    """(M^3_2 - M^2_3, M^1_3 - M^3_1, M^2_1 - M^1_2) for M[..., i, r] = M^i_r."""
    M = np.asarray(M, dtype=float)
    return np.stack([M[..., 2, 1] - M[..., 1, 2], M[..., 0, 2] - M[..., 2, 0],
                     M[..., 1, 0] - M[..., 0, 1]], axis=-1)


def lemma_tan_check(f, M, pts, S=(1.0, 1.0, 1.0), tol: float = 1e-12) -> float:
    """max |(d,_i f,_r - d,_r f,_i) M^i_r - (1/2) bar-d f . M~| for antisymmetric M.

    ``f`` is a sympy scalar expression; ``M`` a constant 3x3 matrix or a field
    of matrices at ``pts``; d = (1 - |x|^2)/4 (unit ball).
    """
    pts = np.asarray(pts, dtype=float)
    M = np.broadcast_to(np.asarray(M, dtype=float), pts.shape[:-1] + (3, 3))
    if np.max(np.abs(M + np.swapaxes(M, -1, -2))) > tol * max(1.0, np.max(np.abs(M))):
        raise DomainError("M must be antisymmetric at every node")
    if tuple(S) != (1.0, 1.0, 1.0):
        raise DomainError("the tangential identity holds for the unit-ball weight only")
    e = sp.sympify(f)
    grad = np.stack([np.asarray(sp.lambdify(X, sp.diff(e, x), "numpy")(*pts.T), float)
                     + np.zeros(pts.shape[:-1]) for x in X], axis=-1)
    dd = -0.5 * pts
    lhs = np.einsum("...i,...r,...ir->...", dd, grad, M) - np.einsum("...r,...i,...ir->...", dd, grad, M)
    rhs = 0.5 * np.sum(tangential_from_grad(grad, pts) * antisym_vector(M), axis=-1)
    return float(np.max(np.abs(lhs - rhs)))


# --------------------------------------------------------------------------
# curl transport
# --------------------------------------------------------------------------
class StreamingFamily:
    """eta(x, t) = x + beta(t) u0(x) with beta = int_0^t alpha^{-2}.

    alpha solves the 3-d scalar affine equation with alpha(0) = 1.  Along
    this family alpha^2 v = u0 is constant in time, so the Lagrangian curl
    of the momentum law vanishes and the curl transport identity applies.
    """

    def __init__(self, u0: AnalyticField, gamma: float = 2.0, alphadot0: float = 0.5,
                 t_max: float = 2.0, S=(1.0, 1.0, 1.0)):
        self.u0 = u0
        self.gamma = gamma
        self.alphadot0 = alphadot0
        self.S = tuple(float(s) for s in S)
        self.name = f"streaming({u0.name})"

        def rhs(t, y):
            st = ScalarAffineState(y[0], y[1], gamma, dim=3, t=t)
            return [y[1], scalar_rhs(st), y[0] ** -2.0]

        kw = dict(method="DOP853", rtol=1e-13, atol=1e-14, dense_output=True)
        self._fwd = solve_ivp(rhs, (0.0, t_max), [1.0, alphadot0, 0.0], **kw).sol
        self._bwd = solve_ivp(rhs, (0.0, -0.5), [1.0, alphadot0, 0.0], **kw).sol

    @classmethod
    def from_spec(cls, u0: AnalyticField, spec: GeneralAffineSpec, t_max: float = 2.0):
        st = spec.alpha_state
        return cls(u0, st.gamma, st.alphadot, t_max, spec.S)

    def _y(self, t):
        return self._fwd(t) if t >= 0 else self._bwd(t)

    def alpha(self, t: float) -> float:
        return float(self._y(t)[0])

    def beta(self, t: float) -> float:
        return float(self._y(t)[2])

    def grad_u0(self, pts) -> np.ndarray:
        return self.u0.grad(pts)

    def grad(self, pts, t: float) -> np.ndarray:
        return np.eye(3) + self.beta(t) * self.grad_u0(pts)


def curl_transport_check(family: StreamingFamily, T: float, dt: float, pts) -> dict:
    """Residual time series of the curl transport law on [0, T].

    ``differential``: alpha^2 curl_eta v - curl u0 - eps_ikj int alpha^2 v^k,_r A^r_l v^l,_m A^m_j.
    ``integrated``: curl deta - beta curl u0 - eps_ikj int v^k,_r (A^r_j - delta)
    - eps_ikj int alpha^{-2} int alpha^2 (...).
    v is a centred difference of eta in time; time integrals are trapezoidal.
    """
    pts = np.asarray(pts, dtype=float)
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-9 * max(T, 1.0):
        raise DomainError("T must be a multiple of dt")
    ts = dt * np.arange(n + 1)
    Gu = family.grad_u0(pts)
    curl_u0 = curl_of_matrix(Gu)
    r_diff, r_int = [], []
    I_quad = np.zeros(pts.shape[:-1] + (3,))
    I_lin = np.zeros_like(I_quad)
    I_outer = np.zeros_like(I_quad)
    prev = None
    for t in ts:
        F = family.grad(pts, t)
        A = np.linalg.inv(F)
        V = (family.grad(pts, t + dt) - family.grad(pts, t - dt)) / (2.0 * dt)
        al = family.alpha(t)
        quad = al**2 * np.einsum("ikj,...kr,...rl,...lm,...mj->...i", EPS, V, A, V, A)
        lin = np.einsum("ikj,...kr,...rj->...i", EPS, V, A - np.eye(3))
        if prev is not None:
            q0, l0, a0 = prev
            I_quad = I_quad + 0.5 * dt * (q0 + quad)
        outer = I_quad / al**2
        if prev is not None:
            I_lin = I_lin + 0.5 * dt * (l0 + lin)
            I_outer = I_outer + 0.5 * dt * (a0 + outer)
        prev = (quad, lin, outer)
        lhs = al**2 * curl_of_matrix(V @ A)
        r_diff.append(float(np.max(np.abs(lhs - curl_u0 - I_quad))))
        curl_deta = curl_of_matrix(F - np.eye(3))
        r_int.append(float(np.max(np.abs(curl_deta - family.beta(t) * curl_u0 - I_lin - I_outer))))
    return {"t": ts.tolist(), "differential": r_diff, "integrated": r_int}


def curl_transport_study(family: StreamingFamily, pts, T: float = 1.0,
                         dts=(0.05, 0.025, 0.0125), order_tol: float = 0.2) -> IdentityReport:
    rows = [curl_transport_check(family, T, dt, pts) for dt in dts]
    e_d = [max(r["differential"]) for r in rows]
    e_i = [max(r["integrated"]) for r in rows]
    od, oi = _fit_order(dts, e_d), _fit_order(dts, e_i)
    ok = all(abs(o - 2.0) <= order_tol or max(e) < 1e-12
             for o, e in ((od, e_d), (oi, e_i)))
    return IdentityReport("curl_transport", family.name, list(dts), e_d, od,
                          "PASS" if ok else "FAIL", {"integrated": e_i, "integrated_order": oi})


def general_affine_curl_check(family: StreamingFamily, T: float, dt: float, pts,
                              component: int = 3, S=None) -> dict:
    """Residual of the S-weighted curl law for bold-eta = (S1^2 eta^1, S2^2 eta^2, S3^2 eta^3).

    For component i with (p, q) the cyclic successors of i:

      [curl bold-deta]^i = beta (S_q^2 u0^q,_p - S_p^2 u0^p,_q)
         - int [S_q^2 v^q,_r (A^r_p - delta) - S_p^2 v^p,_r (A^r_q - delta)]
         + int alpha^{-2} int alpha^2 (S_p^2 v^p,_r A^j_q - S_q^2 v^q,_r A^j_p) v^l,_j A^r_l.

    ``printed_sign`` flips the sign of the middle integral.
    """
    if component not in (1, 2, 3):
        raise DomainError("component must be 1, 2 or 3")
    S = np.asarray(family.S if S is None else S, dtype=float)
    if S.shape != (3,) or np.any(S <= 0):
        raise DomainError("S must hold three positive reals")
    pts = np.asarray(pts, dtype=float)
    i = component - 1
    p, q = (i + 1) % 3, (i + 2) % 3
    sp2, sq2 = S[p] ** 2, S[q] ** 2
    n = int(round(T / dt))
    ts = dt * np.arange(n + 1)
    Gu = family.grad_u0(pts)
    c0 = sq2 * Gu[..., q, p] - sp2 * Gu[..., p, q]
    I_quad = 0.0
    I_lin = 0.0
    I_outer = 0.0
    prev = None
    res, res_printed = [], []
    I3 = np.eye(3)
    for t in ts:
        F = family.grad(pts, t)
        A = np.linalg.inv(F)
        V = (family.grad(pts, t + dt) - family.grad(pts, t - dt)) / (2.0 * dt)
        al = family.alpha(t)
        VA = np.einsum("...lj,...rl->...rj", V, A)  # v^l,_j A^r_l  -> [r, j]
        quad = al**2 * (sp2 * np.einsum("...r,...j,...rj->...", V[..., p, :], A[..., :, q], VA)
                        - sq2 * np.einsum("...r,...j,...rj->...", V[..., q, :], A[..., :, p], VA))
        lin = (sq2 * np.einsum("...r,...r->...", V[..., q, :], (A - I3)[..., :, p])
               - sp2 * np.einsum("...r,...r->...", V[..., p, :], (A - I3)[..., :, q]))
        if prev is not None:
            I_quad = I_quad + 0.5 * dt * (prev[0] + quad)
        outer = I_quad / al**2
        if prev is not None:
            I_lin = I_lin + 0.5 * dt * (prev[1] + lin)
            I_outer = I_outer + 0.5 * dt * (prev[2] + outer)
        prev = (quad, lin, outer)
        dF = F - I3
        lhs = sq2 * dF[..., q, p] - sp2 * dF[..., p, q]
        base = lhs - family.beta(t) * c0 - I_outer
        res.append(float(np.max(np.abs(base + I_lin))))
        res_printed.append(float(np.max(np.abs(base - I_lin))))
    return {"t": ts.tolist(), "residual": res, "printed_sign": res_printed}


def general_affine_curl_study(family: StreamingFamily, pts, component: int = 3, T: float = 1.0,
                              dts=(0.05, 0.025, 0.0125), order_tol: float = 0.2) -> IdentityReport:
    rows = [general_affine_curl_check(family, T, dt, pts, component) for dt in dts]
    e = [max(r["residual"]) for r in rows]
    ep = [max(r["printed_sign"]) for r in rows]
    o = _fit_order(dts, e)
    ok = abs(o - 2.0) <= order_tol or max(e) < 1e-12
    return IdentityReport("general_affine_curl", f"{family.name} S={family.S} i={component}",
                          list(dts), e, o, "PASS" if ok else "FAIL",
                          {"printed_sign": ep, "printed_sign_order": _fit_order(dts, ep)})


# --------------------------------------------------------------------------
# guard consequences
# --------------------------------------------------------------------------
def guard_bound_check(fld: TensorField3D, theta: float = GUARD) -> dict:
    """Check |A - I| <= theta/(1-theta) and |A A^T - I| <= 3 theta/(1-theta)
    (pointwise spectral norms) on a guarded field."""
    fld.guard(theta)
    I3 = np.eye(3)
    A = fld.A
    nA = np.linalg.norm(A - I3, ord=2, axis=(-2, -1))
    nAA = np.linalg.norm(A @ np.swapaxes(A, -1, -2) - I3, ord=2, axis=(-2, -1))
    b1, b2 = theta / (1 - theta), 3 * theta / (1 - theta)
    return {"A_minus_I": float(nA.max()), "A_bound": b1,
            "AAT_minus_I": float(nAA.max()), "AAT_bound": b2,
            "ok": bool(nA.max() <= b1 * (1 + 1e-12) and nAA.max() <= b2 * (1 + 1e-12))}


def jacobian_bound_study(theta: float = GUARD, n_samples: int = 20000, seed: int = 0) -> dict:
    """Range of J = det(I + H) over |H|_2 <= theta, by sampling plus the
    extreme points H = +-theta I.

    Returns the observed range, the analytic range [(1-theta)^3, (1+theta)^3],
    and the largest theta for which J stays in [0.9, 1.1].
    """
    rng = np.random.default_rng(seed)
    H = rng.normal(size=(n_samples, 3, 3))
    H *= (theta * rng.random(n_samples) ** (1 / 9) / np.linalg.norm(H, ord=2, axis=(1, 2)))[:, None, None]
    H = np.concatenate([H, theta * np.eye(3)[None], -theta * np.eye(3)[None]])
    J = np.linalg.det(np.eye(3) + H)
    theta_band = min(1.1 ** (1 / 3) - 1.0, 1.0 - 0.9 ** (1 / 3))
    return {"theta": theta, "J_min": float(J.min()), "J_max": float(J.max()),
            "analytic": [(1 - theta) ** 3, (1 + theta) ** 3],
            "theta_for_tenth_band": theta_band,
            "within_tenth_band": bool(J.min() >= 0.9 and J.max() <= 1.1)}


def cofactor_taylor_check(seed: int = 0, scales=(1e-1, 5e-2, 2.5e-2, 1.25e-2)) -> dict:
    """(a - I) J^{-2} = L(H) + O(|H|^2) with L(H) = tr(H) I - H at F = I + H."""
    rng = np.random.default_rng(seed)
    H0 = rng.normal(size=(3, 3))
    H0 /= np.linalg.norm(H0, 2)
    errs = []
    for s in scales:
        F = np.eye(3) + s * H0
        J = np.linalg.det(F)
        lin = s * (np.trace(H0) * np.eye(3) - H0)
        errs.append(float(np.max(np.abs((cofactor(F) - np.eye(3)) / J**2 - lin))))
    return {"scales": list(scales), "remainder": errs, "order": _fit_order(scales, errs)}


# --------------------------------------------------------------------------
# 3-d energy
# --------------------------------------------------------------------------
def min_K(gamma: float) -> int:
    """Smallest admissible norm order: K >= 8, and K > (6g-5)/(g-1) when g <= 5/3."""
    if gamma <= 1.0:
        raise DomainError("gamma must exceed 1")
    if gamma <= 5.0 / 3.0:
        bound = (6 * gamma - 5) / (gamma - 1)
        # strict inequality; snap values that are integers up to round-off
        return max(8, int(math.floor(bound + 1e-9)) + 1)
    return 8


@dataclass(frozen=True)
class Energy3DTerm:
    field: str  # deta | v | curl_eta_v
    b: int
    a: int
    d_power: float
    alpha_power: float

    @property
    def key(self) -> str:
        return f"{self.field}_b{self.b}_a{self.a}_d{self.d_power!r}_al{self.alpha_power!r}"


def energy3d_terms(K: int, gamma: float) -> list:
    g = gamma
    top_alpha = -0.5 if g == 2.0 else (3.0 - 5.0 * g) / 2.0
    terms = []
    for b in range(K + 1):
        for a in range(K - b + 1):
            s = (b * (g - 1) + 1) / (2 * g - 2)
            terms.append(Energy3DTerm("deta", b, a, s, 0.0))
            terms.append(Energy3DTerm("v", b, a, s, 2.0))
    for b in range(1, K + 2):
        terms.append(Energy3DTerm("deta", b, K + 1 - b, (b * (g - 1) + 1) / (2 * g - 2), top_alpha))
    for b in range(K + 1):
        terms.append(Energy3DTerm("curl_eta_v", b, K - b, (b * (g - 1) + 2) / (2 * g - 2), 2.0))
    return terms


def _bar(e, j):
    p, q = (j + 1) % 3, (j + 2) % 3
    return X[p] * sp.diff(e, X[q]) - X[q] * sp.diff(e, X[p])


class _Derivs:
    """All components of grad^b bar-d^a of a vector of expressions."""

    def __init__(self, exprs):
        self.exprs = list(exprs)
        self._c = {}

    def get(self, b: int, a: int):
        key = (b, a)
        if key in self._c:
            return self._c[key]
        if b == 0 and a == 0:
            out = list(self.exprs)
        elif b == 0:
            out = [_bar(e, j) for e in self.get(0, a - 1) for j in range(3)]
        else:
            out = [sp.diff(e, X[j]) for e in self.get(b - 1, a) for j in range(3)]
        self._c[key] = out
        return out


def energy3d_eval(deta: AnalyticField, v: AnalyticField, alpha: float, K: int, gamma: float,
                  grid: WeightedGrid | None = None):
    """Truncated 3-d energy of order K for analytically given (deta, v).

    Each summand ||alpha^p d^s grad^b bar-d^a f||_0^2 is integrated with the
    ball quadrature built for the weight d^{2s}.  ``curl_eta_v`` uses the
    flow map eta = x + deta.
    """
    from .euler1d import EnergyReport

    budget = min(deta.max_derivative, v.max_derivative)
    if K + 1 > budget:
        raise ResolutionError(f"K={K} needs {K + 1} derivatives; budget is {budget}")
    if grid is None:
        grid = WeightedGrid.ball(8 + K, 8 + K, gamma=gamma)
    terms = energy3d_terms(K, gamma)
    eta = [X[i] + deta.exprs[i] for i in range(3)]
    Fm = sp.Matrix(3, 3, lambda i, s: sp.diff(eta[i], X[s]))
    Jm = Fm.det()
    adj = Fm.adjugate()  # adj = J F^{-1} = a
    gv = sp.Matrix(3, 3, lambda i, s: sp.diff(v.exprs[i], X[s]))
    GA = gv * adj / Jm
    curl = [sum(int(EPS[i, j, k]) * GA[k, j] for j in range(3) for k in range(3)
                if EPS[i, j, k]) for i in range(3)]
    derivs = {"deta": _Derivs(deta.exprs), "v": _Derivs(v.exprs), "curl_eta_v": _Derivs(curl)}
    vals = {}
    for term in terms:
        exprs = [e.subs(T, 0) for e in derivs[term.field].get(term.b, term.a)]
        pts, w = grid.weighted_rule(2.0 * term.d_power)
        fn = sp.lambdify(X, exprs, "numpy", cse=True)
        arr = np.stack([np.asarray(c, float) + np.zeros(len(pts))
                        for c in fn(pts[:, 0], pts[:, 1], pts[:, 2])])
        vals[term.key] = float(alpha ** (2 * term.alpha_power) * np.dot(w, np.sum(arr**2, axis=0)))
    regime = "gamma2" if gamma == 2.0 else "gamma_gt5_3"
    return EnergyReport(0.0, vals, float(sum(vals.values())), regime, tuple(terms))
