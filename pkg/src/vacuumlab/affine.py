"""Affine expanding motions.

The deformation matrix obeys

    A''(t) = det(A)^{1-gamma} A^{-T} = det(A)^{-gamma} cof(A),

and its isotropic reduction A = alpha(t) I in d dimensions is

    alpha''(t) = alpha^{-d gamma + d - 1}.

Besides integration this module extracts the asymptotic velocity limit
A1 = lim A'(t), the offset A0 = lim (A(t) - A1 t), fits the decay rates of
both remainders and solves the inverse problem of reaching prescribed
(A1, A0) by integrating backwards from a large time.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (DomainError, InsufficientHorizonError, NonConvergenceError,
                     SingularMatrixError, StepFailureError)

DET_FLOOR = np.finfo(float).eps
RTOL = 1e-12
ATOL = 1e-12


# --------------------------------------------------------------------------
# states
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class AffineState:
    A: np.ndarray
    Adot: np.ndarray
    gamma: float
    t: float = 0.0

    def __post_init__(self):
        A = np.array(self.A, dtype=float).reshape(3, 3)
        Ad = np.array(self.Adot, dtype=float).reshape(3, 3)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "Adot", Ad)
        if self.gamma <= 1.0:
            raise DomainError("gamma must exceed 1")
        if np.linalg.det(A) <= 0.0:
            raise DomainError("det(A) must be positive")


@dataclass(frozen=True)
class ScalarAffineState:
    alpha: float
    alphadot: float
    gamma: float
    dim: int = 3
    t: float = 0.0

    def __post_init__(self):
        if self.gamma <= 1.0:
            raise DomainError("gamma must exceed 1")
        if self.dim not in (1, 2, 3):
            raise DomainError("dim must be 1, 2 or 3")
        if not self.alpha > 0.0:
            raise DomainError("alpha must be positive")

    @property
    def exponent(self) -> float:
        return -self.dim * self.gamma + (self.dim - 1)


@dataclass(frozen=True)
class GeneralAffineSpec:
    """Diagonal affine motion A(t) = alpha(t) Lambda with Lambda = diag(S)."""

    S: tuple
    alpha_state: ScalarAffineState

    def __post_init__(self):
        S = tuple(float(s) for s in self.S)
        if len(S) != 3 or min(S) <= 0.0:
            raise DomainError("S must hold three positive reals")
        object.__setattr__(self, "S", S)

    @property
    def Lam(self):
        return np.diag(self.S)

    @property
    def M(self):
        return self.Lam @ self.Lam

    @property
    def Mcal(self):
        return self.M @ self.M

    @property
    def m(self):
        return self.M @ self.M @ self.M


# --------------------------------------------------------------------------
# right-hand sides
# --------------------------------------------------------------------------
def affine_rhs(state: AffineState | np.ndarray, gamma: float | None = None) -> np.ndarray:
    """det(A)^{1-gamma} A^{-T}."""
    if isinstance(state, AffineState):
        A, gamma = state.A, state.gamma
    else:
        A = np.asarray(state, dtype=float)
    det = np.linalg.det(A)
    if det <= DET_FLOOR:
        raise SingularMatrixError(f"det(A) = {det!r} is not safely positive")
    return det ** (1.0 - gamma) * np.linalg.inv(A).T


def scalar_rhs(state: ScalarAffineState) -> float:
    """alpha^{-d gamma + d - 1}."""
    if not state.alpha > 0.0:
        raise DomainError("alpha must be positive")
    return state.alpha ** state.exponent


def _matrix_field(gamma):
    def f(t, y):
        A = y[:9].reshape(3, 3)
        det = np.linalg.det(A) if np.all(np.isfinite(y)) else np.nan
        if not det > DET_FLOOR:
            # a trial stage left GL+; NaN makes the adaptive scheme reject the step
            return np.full(18, np.nan)
        return np.concatenate([y[9:], (det ** (1.0 - gamma) * np.linalg.inv(A).T).ravel()])
    return f


def _scalar_field(gamma, dim):
    p = -dim * gamma + (dim - 1)

    def f(t, y):
        return np.array([y[1], y[0] ** p])
    return f


# --------------------------------------------------------------------------
# trajectories
# --------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-stamped states of one integration (immutable)."""

    t: np.ndarray
    gamma: float
    kind: str  # "matrix" or "scalar"
    A: np.ndarray | None = None
    Adot: np.ndarray | None = None
    alpha: np.ndarray | None = None
    alphadot: np.ndarray | None = None
    dim: int = 3
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("t", "A", "Adot", "alpha", "alphadot"):
            arr = getattr(self, name)
            if arr is not None:
                arr.setflags(write=False)

    @property
    def det(self) -> np.ndarray:
        if self.kind == "matrix":
            return np.linalg.det(self.A)
        return self.alpha ** self.dim

    def Addot(self) -> np.ndarray:
        if self.kind == "matrix":
            return np.array([affine_rhs(a, self.gamma) for a in self.A])
        return self.alpha ** (-self.dim * self.gamma + self.dim - 1)

    def state(self, i: int):
        if self.kind == "matrix":
            return AffineState(self.A[i], self.Adot[i], self.gamma, float(self.t[i]))
        return ScalarAffineState(float(self.alpha[i]), float(self.alphadot[i]), self.gamma,
                                 self.dim, float(self.t[i]))

    def csv_header(self):
        if self.kind == "matrix":
            idx = [f"{i}{j}" for i in range(1, 4) for j in range(1, 4)]
            return ["t"] + [f"A{k}" for k in idx] + [f"Adot{k}" for k in idx] + ["detA"]
        return ["t", "alpha", "alphadot", "detA"]

    def csv_rows(self):
        det = self.det
        for i, ti in enumerate(self.t):
            if self.kind == "matrix":
                yield [ti, *self.A[i].ravel(), *self.Adot[i].ravel(), det[i]]
            else:
                yield [ti, self.alpha[i], self.alphadot[i], det[i]]


def _output_times(t0, T, dt):
    n = int(math.floor((T - t0) / dt + 1e-9))
    ts = t0 + dt * np.arange(n + 1)
    if T - ts[-1] > 1e-9 * max(1.0, abs(T)):
        ts = np.append(ts, T)
    return ts


def _rk4_fixed(f, y0, ts):
    ys = np.empty((len(ts), len(y0)))
    ys[0] = y0
    y = np.array(y0, dtype=float)
    for i in range(1, len(ts)):
        h = ts[i] - ts[i - 1]
        t = ts[i - 1]
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        ys[i] = y
    return ys


def integrate_affine(initial, T: float, dt: float, method: str = "adaptive",
                     rtol: float = RTOL, atol: float = ATOL, t_eval=None) -> Trajectory:
    """Integrate from ``initial.t`` to ``T``.

    ``method="adaptive"`` uses an 8th-order Dormand-Prince scheme with error
    control; ``dt`` is then the output spacing.  ``method="rk4"`` uses the
    classical fixed-step RK4 with step ``dt`` (used for order studies).
    Integration backwards in time is allowed when ``T < initial.t``.
    """
    if dt <= 0:
        raise DomainError("dt must be positive")
    t0 = float(initial.t)
    if T == t0:
        raise DomainError("T must differ from the initial time")
    backward = T < t0
    if not backward and T <= 0:
        raise DomainError("T must be positive")

    if isinstance(initial, AffineState):
        f = _matrix_field(initial.gamma)
        y0 = np.concatenate([initial.A.ravel(), initial.Adot.ravel()])
        kind = "matrix"

        def det_event(t, y):
            if not np.all(np.isfinite(y)):
                return -1.0
            return np.linalg.det(y[:9].reshape(3, 3)) - 1e3 * DET_FLOOR
    elif isinstance(initial, ScalarAffineState):
        f = _scalar_field(initial.gamma, initial.dim)
        y0 = np.array([initial.alpha, initial.alphadot])
        kind = "scalar"

        def det_event(t, y):
            return y[0] - 1e3 * DET_FLOOR
    else:
        raise TypeError("initial must be an AffineState or ScalarAffineState")
    det_event.terminal = True
    det_event.direction = -1

    if t_eval is None:
        if backward:
            ts = t0 - _output_times(0.0, t0 - T, dt)
        else:
            ts = _output_times(t0, T, dt)
    else:
        ts = np.asarray(t_eval, dtype=float)

    if method == "adaptive":
        sol = solve_ivp(f, (t0, float(ts[-1])), y0, method="DOP853", t_eval=ts,
                        rtol=rtol, atol=atol, events=det_event)
        if sol.status == 1 or not sol.success:
            raise StepFailureError(
                f"integration stopped at t={sol.t[-1] if len(sol.t) else t0!r}: "
                f"{'determinant collapse' if sol.status == 1 else sol.message}")
        ys = sol.y.T
    elif method == "rk4":
        ys = _rk4_fixed(f, y0, ts)
        if not np.all(np.isfinite(ys)):
            raise StepFailureError("non-finite state in fixed-step integration")
    else:
        raise DomainError(f"unknown method {method!r}")

    meta = {"method": method, "dt": dt, "rtol": rtol, "atol": atol}
    if kind == "matrix":
        A = ys[:, :9].reshape(-1, 3, 3)
        Ad = ys[:, 9:].reshape(-1, 3, 3)
        if np.any(np.linalg.det(A) <= 0):
            raise StepFailureError("determinant left GL+")
        return Trajectory(ts.copy(), initial.gamma, kind, A=A, Adot=Ad, meta=meta)
    if np.any(ys[:, 0] <= 0):
        raise StepFailureError("alpha left (0, inf)")
    return Trajectory(ts.copy(), initial.gamma, kind, alpha=ys[:, 0].copy(),
                      alphadot=ys[:, 1].copy(), dim=initial.dim, meta=meta)


# --------------------------------------------------------------------------
# fitting helpers
# --------------------------------------------------------------------------
def fit_loglog(t, y, shift: float = 0.0):
    """Least-squares slope/intercept of log y against log(t + shift)."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    X = np.log(t + shift)
    Y = np.log(y)
    slope, icpt = np.polyfit(X, Y, 1)
    rss = float(np.sum((Y - (slope * X + icpt)) ** 2))
    return float(slope), float(icpt), rss


def fit_log_model(t, y, shift: float = 2.0):
    """Least squares y ~ a + b log(t + shift); RSS measured on log y like fit_loglog."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    L = np.log(t + shift)
    b, a = np.polyfit(L, y, 1)
    pred = a + b * L
    if np.any(pred <= 0):
        return float(a), float(b), math.inf
    rss = float(np.sum((np.log(y) - np.log(pred)) ** 2))
    return float(a), float(b), rss


def det_growth_exponent(traj: Trajectory, t_min: float, t_max: float) -> float:
    """Log-log slope of det A(t) against t over the stored samples in [t_min, t_max]."""
    m = (traj.t >= t_min) & (traj.t <= t_max)
    if m.sum() < 3:
        raise InsufficientHorizonError("fewer than three samples in the fitting window")
    slope, _, _ = fit_loglog(traj.t[m], traj.det[m])
    return slope


def predicted_det_exponent(gamma: float) -> float:
    """Growth exponent p of det A: 3 for gamma <= 5/3, 2/(gamma-1) otherwise (a lower bound)."""
    return 3.0 if gamma <= 5.0 / 3.0 else 2.0 / (gamma - 1.0)


# --------------------------------------------------------------------------
# asymptotics
# --------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class AsymptoticProfile:
    A1: np.ndarray
    A0: np.ndarray | None
    fitted_det_exponent: float
    residual_rates: list
    tail_norm: float = 0.0
    spd: bool = True
    log_model_preferred: bool | None = None

    def to_dict(self):
        return {
            "A1": self.A1.tolist(),
            "A0": None if self.A0 is None else self.A0.tolist(),
            "fitted_det_exponent": self.fitted_det_exponent,
            "residual_rates": [
                {"quantity": q, "fitted": f, "predicted": p} for q, f, p in self.residual_rates],
            "tail_norm": self.tail_norm,
            "spd": self.spd,
            "log_model_preferred": self.log_model_preferred,
        }


def is_spd(M: np.ndarray, tol: float = 1e-8) -> bool:
    sym = 0.5 * (M + M.T)
    return bool(np.min(np.linalg.eigvalsh(sym)) > tol)


def extract_asymptotics(traj: Trajectory, tail_tol: float = 1e-2,
                        window: tuple | None = None) -> AsymptoticProfile:
    """Velocity limit, offset and remainder decay rates of a matrix trajectory.

    A1 = A'(T) + int_T^inf A''.  The tail is estimated from A''(T) assuming
    |A''| ~ (t+1)^{-(gamma p - 2)} with p the det-growth exponent measured on
    the final decade; this is the same mechanism that makes A'' integrable.
    A0 = A(T) - A1 T + int_T^inf (A' - A1), estimated the same way, exists for
    gamma > 4/3; at gamma = 4/3 the remainder grows logarithmically and the
    power-law and log models are compared instead.  Remainder rates are log-log fits in (t+1) on ``window``
    (default: the final decade).
    """
    if traj.kind != "matrix":
        raise DomainError("asymptotic extraction needs a matrix trajectory")
    t = traj.t
    T = float(t[-1])
    lo, hi = window if window is not None else (T / 10.0, T)
    p = det_growth_exponent(traj, lo, hi)
    g = traj.gamma
    q = g * p - 2.0  # decay exponent of |A''|
    if q <= 1.0:
        raise InsufficientHorizonError(f"A'' is not integrable at the measured rate (q={q:.3f})")
    Add_T = affine_rhs(traj.A[-1], g)
    tail = Add_T * (T + 1.0) / (q - 1.0)
    tail_norm = float(np.max(np.abs(tail)))
    if tail_norm > tail_tol:
        raise InsufficientHorizonError(
            f"tail estimate {tail_norm:.3e} exceeds tolerance {tail_tol:.1e}; integrate further")
    A1 = traj.Adot[-1] + tail
    A0 = None
    # the offset exists only above the logarithmic borderline gamma = 4/3
    if g > 4.0 / 3.0 + 1e-9 and q > 2.0:
        A0 = traj.A[-1] - A1 * T - tail * (T + 1.0) / (q - 2.0)

    spd = is_spd(A1)
    if not spd:
        warnings.warn("symmetrized A1 is not positive definite", RuntimeWarning, stacklevel=2)

    m = (t >= lo) & (t <= hi)
    rates = []
    dv = np.max(np.abs(traj.Adot[m] - A1), axis=(1, 2))
    if np.all(dv > 0):
        s, _, _ = fit_loglog(t[m], dv, shift=1.0)
        rates.append(("|A'-A1|", s, -3.0 * g + 3.0))
    log_pref = None
    if A0 is not None:
        dr = np.max(np.abs(traj.A[m] - (A1 * t[m, None, None] + A0)), axis=(1, 2))
        if np.all(dr > 0):
            s, _, _ = fit_loglog(t[m], dr, shift=1.0)
            rates.append(("|A-(A1 t+A0)|", s, -3.0 * g + 4.0))
    else:
        dr = np.max(np.abs(traj.A[m] - A1 * t[m, None, None]), axis=(1, 2))
        s, _, rss_pow = fit_loglog(t[m], dr, shift=1.0)
        _, _, rss_log = fit_log_model(t[m], dr)
        log_pref = rss_log < rss_pow
        rates.append(("|A-A1 t|", s, max(-3.0 * g + 4.0, 0.0)))
    return AsymptoticProfile(A1, A0, p, rates, tail_norm, spd, log_pref)


def compare_growth_models(traj: Trajectory, A1: np.ndarray, window: tuple) -> dict:
    """Power law vs logarithm for |A(t) - A1 t| on ``window``."""
    t = traj.t
    m = (t >= window[0]) & (t <= window[1])
    y = np.max(np.abs(traj.A[m] - A1 * t[m, None, None]), axis=(1, 2))
    slope, _, rss_pow = fit_loglog(t[m], y, shift=1.0)
    a, b, rss_log = fit_log_model(t[m], y)
    return {"power_exponent": slope, "rss_power": rss_pow, "log_coeffs": [a, b],
            "rss_log": rss_log, "log_preferred": rss_log < rss_pow}


# --------------------------------------------------------------------------
# shooting
# --------------------------------------------------------------------------
def shoot_prescribed_asymptotics(A1, A0, gamma: float, T_start: float = 1000.0,
                                 tol: float = 1e-6, max_doublings: int = 4) -> AffineState:
    """Initial data at t=0 whose forward motion approaches A1 t + A0.

    Starts at T_start on the asymptote (A = A1 T + A0, A' = A1), integrates
    back to t = 0 and repeats from 2 T_start until two consecutive answers
    agree to ``tol``.
    """
    if gamma < 2.0:
        raise DomainError("prescribing (A1, A0) requires gamma >= 2")
    A1 = np.asarray(A1, dtype=float)
    A0 = np.asarray(A0, dtype=float)
    if not is_spd(A1):
        raise DomainError("A1 must be symmetric positive definite")

    def back(Ts):
        AT = A1 * Ts + A0
        if float(np.max(np.abs(affine_rhs(AT, gamma)))) * Ts > 1e-2:
            raise DomainError(f"T_start={Ts!r} too small: |A''(T)| T exceeds 1e-2")
        st = AffineState(AT, A1, gamma, Ts)
        tr = integrate_affine(st, 0.0, Ts, t_eval=np.array([Ts, 0.0]))
        return tr.A[-1], tr.Adot[-1]

    Ts = float(T_start)
    prev = back(Ts)
    for _ in range(max_doublings):
        Ts *= 2.0
        cur = back(Ts)
        err = max(np.max(np.abs(cur[0] - prev[0])), np.max(np.abs(cur[1] - prev[1])))
        if err <= tol:
            return AffineState(cur[0], cur[1], gamma, 0.0)
        prev = cur
    raise NonConvergenceError(f"backward shooting did not settle (last change {err:.3e})")


def alpha_integral(traj: Trajectory, power: float) -> np.ndarray:
    """Cumulative trapezoid of alpha^{-power} along a scalar trajectory."""
    from scipy.integrate import cumulative_trapezoid
    return cumulative_trapezoid(traj.alpha ** (-power), traj.t, initial=0.0)
