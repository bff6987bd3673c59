"""Distance weights, sample grids, weighted quadrature and the functional
inequalities that the energy method relies on.

One-dimensional grids live on (-1, 1) with the weight

    d(x) = (gamma - 1) / (2 gamma) * (1 - x**2),

three-dimensional grids live on the unit ball with d(x) = (S1 S2 S3 / 4)(1 - |x|^2).

Two 1-d families exist.  ``jacobi`` uses Legendre-Gauss-Lobatto nodes with
spectral (modal) differentiation; every weighted integral ``int d^s g^2`` of a
polynomial ``g`` of degree < n is then evaluated *exactly* by a Gauss-Jacobi
rule whose exponent matches ``s``.  ``uniform`` is the finite-difference
fallback: equispaced nodes, composite Simpson weights and 4th-order stencils
with one-sided closures.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import legendre as leg
from scipy.special import roots_jacobi, roots_legendre

from .errors import DomainError, ResolutionError

FAMILIES = ("jacobi", "uniform")
UNIFORM_MAX_DERIVATIVE = 4
KAPPA0 = math.exp(-2.0)


# --------------------------------------------------------------------------
# distance weights
# --------------------------------------------------------------------------
def weight_constant_1d(gamma: float) -> float:
    return (gamma - 1.0) / (2.0 * gamma)


def distance_weight_1d(x, gamma: float):
    """d(x) = (gamma-1)/(2 gamma) (1 - x^2)."""
    x = np.asarray(x, dtype=float)
    return weight_constant_1d(gamma) * (1.0 - x * x)


def distance_weight_1d_dx(x, gamma: float):
    """d_x = -(gamma-1)/gamma * x."""
    return -2.0 * weight_constant_1d(gamma) * np.asarray(x, dtype=float)


def distance_weight_3d(x, S=(1.0, 1.0, 1.0)):
    """d(x) = (S1 S2 S3 / 4)(1 - |x|^2) for points ``x`` of shape (..., 3)."""
    x = np.asarray(x, dtype=float)
    return float(np.prod(S)) / 4.0 * (1.0 - np.sum(x * x, axis=-1))


# --------------------------------------------------------------------------
# 1-d building blocks
# --------------------------------------------------------------------------
def lgl_nodes_weights(n: int):
    """Legendre-Gauss-Lobatto nodes and weights on [-1, 1] (n >= 2 points)."""
    if n < 2:
        raise ResolutionError("a Lobatto grid needs at least two nodes")
    N = n - 1
    if n == 2:
        x = np.array([-1.0, 1.0])
    else:
        inner, _ = roots_jacobi(n - 2, 1.0, 1.0)
        x = np.concatenate(([-1.0], np.sort(inner), [1.0]))
    PN = leg.legval(x, np.eye(n)[N])
    w = 2.0 / (N * (N + 1) * PN**2)
    return x, w


def barycentric_diff_matrix(x: np.ndarray) -> np.ndarray:
    """Spectral differentiation matrix for polynomial interpolation on ``x``."""
    x = np.asarray(x, dtype=float)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    # barycentric weights in log form to avoid overflow for large n
    logw = -np.sum(np.log(np.abs(diff)), axis=1)
    sign = np.prod(np.sign(diff), axis=1)
    w = sign * np.exp(logw - logw.max())
    D = (w[None, :] / w[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


def fd4_diff_matrix(n: int, h: float) -> np.ndarray:
    """4th-order first-derivative matrix on an equispaced grid.

    Centered five-point stencil in the interior, one-sided five-point
    closures on the two nodes next to each end.
    """
    if n < 5:
        raise ResolutionError("4th-order stencils need at least five nodes")
    D = np.zeros((n, n))
    c = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
    for i in range(2, n - 2):
        D[i, i - 2:i + 3] = c
    D[0, :5] = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
    D[1, :5] = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0
    D[-1, -5:] = -D[0, :5][::-1]
    D[-2, -5:] = -D[1, :5][::-1]
    return D / h


def simpson_weights(n: int, h: float) -> np.ndarray:
    if n < 3 or n % 2 == 0:
        raise ResolutionError("composite Simpson needs an odd number (>= 3) of nodes")
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * h / 3.0


@lru_cache(maxsize=256)
def _gauss_jacobi_sym(q: int, s: float):
    """Nodes and weights of int_{-1}^{1} (1-x^2)^s f(x) dx."""
    if s == 0.0:
        return roots_legendre(q)
    return roots_jacobi(q, s, s)


# --------------------------------------------------------------------------
# grids
# --------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class WeightedGrid:
    """Immutable sample set with quadrature weights and distance values.

    For ``dim == 1`` the grid also carries a differentiation rule; for
    ``dim == 3`` it is a quadrature-only ball sampling (radial Gauss-Jacobi
    times a Gauss-Legendre/trapezoid angular product rule).
    """

    dim: int
    family: str
    n: int
    gamma: float
    nodes: np.ndarray
    quad_weights: np.ndarray
    d_values: np.ndarray
    h: float
    S: tuple = (1.0, 1.0, 1.0)
    n_angular: int = 0
    _D: np.ndarray | None = field(default=None, repr=False)

    # ---- constructors ----------------------------------------------------
    @classmethod
    def interval(cls, n: int, gamma: float, family: str = "jacobi") -> "WeightedGrid":
        if gamma <= 1.0:
            raise DomainError("gamma must exceed 1")
        if family == "jacobi":
            x, w = lgl_nodes_weights(n)
            D = barycentric_diff_matrix(x)
            h = float(np.min(np.diff(x)))
        elif family == "uniform":
            x = np.linspace(-1.0, 1.0, n)
            h = 2.0 / (n - 1)
            w = simpson_weights(n, h)
            D = fd4_diff_matrix(n, h)
        else:
            raise DomainError(f"unknown grid family {family!r}; expected one of {FAMILIES}")
        d = distance_weight_1d(x, gamma)
        for arr in (x, w, d, D):
            arr.setflags(write=False)
        return cls(1, family, n, float(gamma), x, w, d, h, _D=D)

    @classmethod
    def ball(cls, n_radial: int, n_angular: int | None = None, S=(1.0, 1.0, 1.0),
             gamma: float = 2.0) -> "WeightedGrid":
        n_angular = n_angular or n_radial
        pts, w = _ball_rule(n_radial, n_angular, 0.0)
        d = distance_weight_3d(pts, S)
        for arr in (pts, w, d):
            arr.setflags(write=False)
        return cls(3, "jacobi", n_radial, float(gamma), pts, w, d,
                   1.0 / n_radial, tuple(float(s) for s in S), n_angular)

    @classmethod
    def from_config(cls, cfg: dict) -> "WeightedGrid":
        dim = int(cfg.get("dim", 1))
        if dim == 1:
            return cls.interval(int(cfg["n"]), float(cfg["gamma"]), cfg.get("family", "jacobi"))
        if dim == 3:
            return cls.ball(int(cfg["n"]), cfg.get("n_angular"), tuple(cfg.get("S", (1, 1, 1))),
                            float(cfg.get("gamma", 2.0)))
        raise DomainError("dim must be 1 or 3")

    # ---- properties ------------------------------------------------------
    @property
    def grid_id(self) -> str:
        if self.dim == 1:
            return f"interval-{self.family}-n{self.n}-gamma{self.gamma!r}"
        return f"ball-n{self.n}x{self.n_angular}-S{'x'.join(repr(s) for s in self.S)}"

    @property
    def D(self) -> np.ndarray:
        if self._D is None:
            raise ResolutionError("this grid has no differentiation rule")
        return self._D

    @property
    def max_derivative(self) -> int:
        if self.dim != 1:
            return 0
        return self.n - 1 if self.family == "jacobi" else UNIFORM_MAX_DERIVATIVE

    @property
    def weight_constant(self) -> float:
        if self.dim == 1:
            return weight_constant_1d(self.gamma)
        return float(np.prod(self.S)) / 4.0

    def local_spacing(self) -> np.ndarray:
        """Distance from each 1-d node to its nearest neighbour."""
        gaps = np.diff(self.nodes)
        return np.minimum(np.r_[gaps[0], gaps], np.r_[gaps, gaps[-1]])

    # ---- differentiation --------------------------------------------------
    def _check_order(self, k: int):
        if k < 0:
            raise ResolutionError("derivative order must be nonnegative")
        if k > self.max_derivative:
            raise ResolutionError(
                f"{k} derivatives requested but grid {self.grid_id} supports at most "
                f"{self.max_derivative}")

    def modal(self, f) -> np.ndarray:
        """Legendre coefficients of the interpolant of nodal values (jacobi family)."""
        if self.family != "jacobi" or self.dim != 1:
            raise ResolutionError("modal coefficients need a 1-d jacobi grid")
        f = np.asarray(f, dtype=float)
        return _lgl_forward(self.n) @ f

    def diff(self, f, k: int = 1) -> np.ndarray:
        """k-th derivative of nodal data at the nodes."""
        self._check_order(k)
        f = np.asarray(f, dtype=float)
        if k == 0:
            return f.copy()
        if self.family == "jacobi":
            c = leg.legder(self.modal(f), k) if k < self.n else np.zeros(1)
            return leg.legval(self.nodes, c)
        out = f
        for _ in range(k):
            out = self.D @ out
        return out

    def interpolant(self, f) -> Callable:
        """Callable continuous extension of nodal data to [-1, 1]."""
        f = np.asarray(f, dtype=float)
        if self.family == "jacobi":
            c = self.modal(f)
            return lambda y: leg.legval(np.asarray(y, dtype=float), c)
        return lambda y: np.interp(y, self.nodes, f)

    # ---- quadrature ------------------------------------------------------
    def integrate(self, g) -> float:
        return float(np.dot(self.quad_weights, g))

    def weighted_sq(self, f, k: int, s: float) -> float:
        """int d^s |d^k f/dx^k|^2 over the domain (1-d) for nodal ``f``.

        For the jacobi family the integrand is a polynomial times
        (1-x^2)^s and the Gauss-Jacobi rule is exact.  ``s > -1`` is allowed
        there (needed by the embedding check); the uniform family needs s >= 0.
        """
        if self.dim != 1:
            if k != 0:
                raise ResolutionError("ball grids carry no differentiation rule")
            f = np.asarray(f, dtype=float)
            return float(np.dot(self.quad_weights * self.d_values**s, f**2))
        self._check_order(k)
        if s <= -1.0:
            raise DomainError("weight exponent must exceed -1 for integrability")
        if self.family == "jacobi":
            c = self.modal(f)
            if k:
                c = leg.legder(c, k) if k < self.n else np.zeros(1)
            xq, wq = _gauss_jacobi_sym(self.n + 1, float(s))
            g = leg.legval(xq, c)
            return float(self.weight_constant**s * np.dot(wq, g * g))
        if s < 0.0:
            raise ResolutionError("negative weight exponents need the jacobi family")
        g = self.diff(f, k)
        dw = self.d_values**s if s > 0 else np.ones_like(g)
        return float(np.dot(self.quad_weights, dw * g * g))

    def weighted_rule(self, s: float):
        """Points and weights integrating ``d^s f`` (3-d ball or 1-d interval)."""
        if self.dim == 3:
            pts, w = _ball_rule(self.n, self.n_angular, float(s))
            return pts, w * self.weight_constant**s
        xq, wq = _gauss_jacobi_sym(self.n + 1, float(s))
        return xq, wq * self.weight_constant**s


@lru_cache(maxsize=64)
def _lgl_forward(n: int) -> np.ndarray:
    """Matrix mapping LGL nodal values to Legendre coefficients (exact)."""
    x, w = lgl_nodes_weights(n)
    N = n - 1
    V = leg.legvander(x, N)  # V[i, k] = P_k(x_i)
    gam = 2.0 / (2.0 * np.arange(n) + 1.0)
    gam[N] = 2.0 / N
    M = (V * w[:, None]).T / gam[:, None]
    M.setflags(write=False)
    return M


@lru_cache(maxsize=64)
def _ball_rule(n_radial: int, n_angular: int, s: float):
    """Quadrature for int_{|x|<1} (1-|x|^2)^s f(x) dx.

    Radial part: r = (1+z)/2 maps (1-r)^s r^2 dr to a Gauss-Jacobi weight
    (1-z)^s (1+z)^2; the smooth leftover factor (1+r)^s is folded into the
    weights.  Angular part: Gauss-Legendre in cos(theta) times the periodic
    trapezoid rule in phi.
    """
    z, wz = roots_jacobi(n_radial, s, 2.0)
    r = 0.5 * (1.0 + z)
    wr = wz * 2.0 ** (-s - 3.0) * (1.0 + r) ** s
    mu, wmu = roots_legendre(n_angular)
    n_phi = 2 * n_angular
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    wphi = np.full(n_phi, 2.0 * np.pi / n_phi)
    R, MU, PHI = np.meshgrid(r, mu, phi, indexing="ij")
    ST = np.sqrt(1.0 - MU**2)
    pts = np.stack([R * ST * np.cos(PHI), R * ST * np.sin(PHI), R * MU], axis=-1).reshape(-1, 3)
    w = (wr[:, None, None] * wmu[None, :, None] * wphi[None, None, :]).reshape(-1)
    pts.setflags(write=False)
    w.setflags(write=False)
    return pts, w


# --------------------------------------------------------------------------
# norms
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class WeightedNormSpec:
    """(k, s) of the norm sqrt(int d^s sum_{j<=k} |d^j F|^2)."""

    k: int
    s: float
    fractional: float | None = None

    def __post_init__(self):
        if self.k < 0:
            raise DomainError("derivative order k must be nonnegative")
        if self.s < 0:
            raise DomainError("weight exponent s must be nonnegative")
        if self.fractional is not None and float(self.fractional).is_integer():
            raise DomainError("fractional order must not be an integer")

    def to_dict(self):
        return {"k": self.k, "s": self.s, "fractional": self.fractional}


def _sobolev_sq(F, k: int, s: float, grid: WeightedGrid) -> float:
    return sum(grid.weighted_sq(F, j, s) for j in range(k + 1))


def weighted_norm(F, spec: WeightedNormSpec, grid: WeightedGrid) -> float:
    """Weighted Sobolev norm ||F||_{H^k(d, s)} of nodal data."""
    if spec.fractional is not None:
        if spec.s != 0:
            raise DomainError("weighted fractional norms are not defined here")
        return fractional_norm(F, spec.fractional, grid)
    return math.sqrt(max(_sobolev_sq(F, spec.k, spec.s, grid), 0.0))


def norm_report(F, spec: WeightedNormSpec, grid: WeightedGrid) -> dict:
    return {"value": weighted_norm(F, spec, grid), "spec": spec.to_dict(), "grid_id": grid.grid_id}


def fractional_norm(u, s: float, grid: WeightedGrid) -> float:
    """Sobolev-Slobodeckij norm of order s on the interval.

    ||u||^2 = ||u||^2_{H^[s]} + sum_{i != j} w_i w_j |D^m u_i - D^m u_j|^2 / |x_i - x_j|^{1+2 sigma}
    with m = [s] and sigma = s - m.  The diagonal is omitted.
    """
    if grid.dim != 1:
        raise DomainError("fractional norms are implemented on 1-d grids only")
    if s <= 0:
        raise DomainError("fractional order must be positive")
    m = int(math.floor(s))
    sigma = s - m
    base = _sobolev_sq(u, m, 0.0, grid)
    if sigma == 0.0:
        return math.sqrt(base)
    if (sigma > 0.9 or sigma < 0.1) and grid.n < 128:
        warnings.warn(
            f"fractional order {s} is close to an integer; the kernel is poorly resolved "
            f"on {grid.n} nodes", RuntimeWarning, stacklevel=2)
    f = grid.diff(u, m)
    x, w = grid.nodes, grid.quad_weights
    dx = np.abs(x[:, None] - x[None, :])
    np.fill_diagonal(dx, 1.0)
    kern = (f[:, None] - f[None, :]) ** 2 / dx ** (1.0 + 2.0 * sigma)
    np.fill_diagonal(kern, 0.0)
    semi = float(w @ kern @ w)
    return math.sqrt(base + semi)


# --------------------------------------------------------------------------
# inequality checks
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class RatioReport:
    lhs: float
    rhs: float
    ratio: float
    admissible: bool = True

    def to_dict(self):
        return {"lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio, "admissible": self.admissible}


def hardy_check(u, k: int, grid: WeightedGrid, boundary_tol: float = 1e-10) -> RatioReport:
    """Both sides of ||u/d||_{k-1} <= C ||u||_k.

    The quotient is sampled directly at interior nodes and by its one-sided
    limit u'/d' at the boundary nodes.  ``admissible`` is False when u does
    not vanish on the boundary (u outside H^1_0); the ratio is still reported.
    """
    if grid.dim != 1:
        raise DomainError("hardy_check is one-dimensional")
    if k < 1:
        raise DomainError("k must be at least 1")
    u = np.asarray(u, dtype=float)
    scale = max(float(np.max(np.abs(u))), 1e-300)
    admissible = bool(abs(u[0]) <= boundary_tol * scale and abs(u[-1]) <= boundary_tol * scale)
    d = grid.d_values
    dx = distance_weight_1d_dx(grid.nodes, grid.gamma)
    q = np.empty_like(u)
    q[1:-1] = u[1:-1] / d[1:-1]
    du = grid.diff(u, 1)
    q[0] = du[0] / dx[0]
    q[-1] = du[-1] / dx[-1]
    lhs = math.sqrt(_sobolev_sq(q, k - 1, 0.0, grid))
    rhs = math.sqrt(_sobolev_sq(u, k, 0.0, grid))
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
    return RatioReport(lhs, rhs, ratio, admissible)


def embedding_check(F, k: int, r: int, s: float, grid: WeightedGrid) -> RatioReport:
    """Both (squared) sides of ||F||^2_{H^r(d, s-2(k-r))} <= C ||F||^2_{H^k(d, s)}."""
    if not s > 2 * (k - r) - 1:
        raise DomainError(
            f"embedding needs s > 2(k-r)-1; got s={s!r}, k={k}, r={r} "
            f"(bound {2 * (k - r) - 1})")
    if r > k:
        raise DomainError("need r <= k")
    lhs = _sobolev_sq(F, r, s - 2 * (k - r), grid)
    rhs = _sobolev_sq(F, k, s, grid)
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
    return RatioReport(lhs, rhs, ratio)


# --------------------------------------------------------------------------
# mollification
# --------------------------------------------------------------------------
# C^2 reflection across an endpoint: E u(1 + t) = sum c_m u(1 - lam_m t)
_REFLECT_LAM = np.array([1.0, 2.0, 3.0])
_REFLECT_C = np.linalg.solve(np.vander(-_REFLECT_LAM, 3, increasing=True).T, np.ones(3))


def extend(f: Callable, y) -> np.ndarray:
    """Higher-order reflection extension of a function on [-1, 1] to the line."""
    y = np.asarray(y, dtype=float)
    out = np.empty_like(y)
    mid = np.abs(y) <= 1.0
    out[mid] = f(y[mid])
    hi = y > 1.0
    lo = y < -1.0
    if hi.any():
        t = y[hi] - 1.0
        out[hi] = sum(c * f(1.0 - lam * t) for c, lam in zip(_REFLECT_C, _REFLECT_LAM))
    if lo.any():
        t = -1.0 - y[lo]
        out[lo] = sum(c * f(-1.0 + lam * t) for c, lam in zip(_REFLECT_C, _REFLECT_LAM))
    return out


@lru_cache(maxsize=8)
def _bump_rule(m: int = 256):
    z, w = roots_legendre(m)
    rho = np.exp(-1.0 / (1.0 - z * z))
    kw = w * rho
    kw /= kw.sum()  # unit mass exactly, in floating point
    return z, kw


def mollify_initial_data(u0, kappa: float, grid: WeightedGrid) -> np.ndarray:
    """Extend nodal data past the boundary and convolve with a bump of radius 1/|ln kappa|."""
    if not 0.0 < kappa < 1.0:
        raise DomainError("kappa must lie in (0, 1)")
    if kappa >= KAPPA0:
        raise DomainError(f"kappa must be below {KAPPA0!r} so the kernel fits the extension")
    if grid.dim != 1:
        raise DomainError("mollification is implemented on 1-d grids")
    eps = 1.0 / abs(math.log(kappa))
    f = grid.interpolant(u0)
    z, kw = _bump_rule()
    y = grid.nodes[:, None] - eps * z[None, :]
    vals = extend(f, y.ravel()).reshape(y.shape)
    return vals @ kw


# --------------------------------------------------------------------------
# refinement studies
# --------------------------------------------------------------------------
def _spread(vals: Sequence[float]) -> float:
    vals = np.asarray(vals, dtype=float)
    return float((vals.max() - vals.min()) / abs(vals[-1])) if vals[-1] != 0 else math.inf


def hardy_refinement(u_func: Callable, k: int, ns: Sequence[int], gamma: float,
                     family: str = "jacobi", tol: float = 0.05) -> dict:
    """Hardy ratios of a field sampled on a sequence of grids.

    Verdict PASS for an admissible field whose ratios agree within ``tol``;
    EXPECTED-FAIL for an inadmissible field whose ratio keeps growing.
    """
    reps = []
    for n in ns:
        g = WeightedGrid.interval(n, gamma, family)
        reps.append(hardy_check(u_func(g.nodes), k, g))
    ratios = [r.ratio for r in reps]
    admissible = all(r.admissible for r in reps)
    spread = _spread(ratios)
    if admissible:
        verdict = "PASS" if spread <= tol else "FAIL"
    else:
        growing = all(b > (1.0 + tol) * a for a, b in zip(ratios, ratios[1:]))
        verdict = "EXPECTED-FAIL" if growing else "FAIL"
    return {"ns": list(ns), "ratios": ratios, "lhs": [r.lhs for r in reps],
            "rhs": [r.rhs for r in reps], "spread": spread, "admissible": admissible,
            "verdict": verdict}


def embedding_refinement(F_func: Callable, k: int, r: int, s: float, ns: Sequence[int],
                         gamma: float, family: str = "jacobi", tol: float = 0.05) -> dict:
    reps = []
    for n in ns:
        g = WeightedGrid.interval(n, gamma, family)
        reps.append(embedding_check(F_func(g.nodes), k, r, s, g))
    ratios = [x.ratio for x in reps]
    spread = _spread(ratios)
    return {"ns": list(ns), "ratios": ratios, "spread": spread,
            "verdict": "PASS" if spread <= tol else "FAIL"}


def mollifier_study(u_func: Callable, kappas: Sequence[float], grid: WeightedGrid,
                    growth_tol: float = 0.05) -> dict:
    """Norm growth of mollified data against |ln kappa|^2 ||u0||_0.

    Boundedness is operationalised as: no ratio exceeds the first one by more
    than ``growth_tol`` (the constant is fixed at the coarsest kappa).  The
    L^2 distance to the data must decrease along the sequence.
    """
    u0 = u_func(grid.nodes)
    n0 = math.sqrt(_sobolev_sq(u0, 0, 0.0, grid))
    ratios, dists, h2 = [], [], []
    for kap in kappas:
        uk = mollify_initial_data(u0, kap, grid)
        h2n = math.sqrt(_sobolev_sq(uk, 2, 0.0, grid))
        h2.append(h2n)
        ratios.append(h2n / (math.log(kap) ** 2 * n0))
        dists.append(math.sqrt(_sobolev_sq(uk - u0, 0, 0.0, grid)))
    bounded = max(ratios) <= (1.0 + growth_tol) * ratios[0]
    monotone = all(b < a for a, b in zip(dists, dists[1:]))
    return {"kappas": list(kappas), "ratios": ratios, "h2_norms": h2, "l2_distance": dists,
            "bounded": bounded, "monotone": monotone,
            "verdict": "PASS" if bounded and monotone else "FAIL"}


def distance_identities(grid: WeightedGrid) -> dict:
    """Max deviations of the 1-d weight identities at the nodes."""
    if grid.dim != 1:
        raise DomainError("1-d identities only")
    g = grid.gamma
    x = grid.nodes
    dx = distance_weight_1d_dx(x, g)
    dxx = -2.0 * weight_constant_1d(g) * np.ones_like(x)
    return {
        "formula": float(np.max(np.abs(grid.d_values - distance_weight_1d(x, g)))),
        "dxx": float(np.max(np.abs(dxx + (g - 1.0) / g))),
        "dx_bound": float(np.max(np.abs(dx)) - (g - 1.0) / g),
        "cancellation": float(np.max(np.abs(x + g / (g - 1.0) * dx))),
    }
