"""Closed-form constants and deterministic scaling functions.

Everything here is a pure function of the dimension ``d``, the obstacle
intensity ``nu`` and the free branching rate ``beta2``.  The principal
Dirichlet eigenvalue of ``-1/2 Laplacian`` on the unit ball is computed from
the first zero of a Bessel function, with a finite-difference radial solver
kept alongside as an independent check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

__all__ = [
    "DomainError",
    "ModelParams",
    "ConstantsTable",
    "unit_ball_volume",
    "bessel_j_scaled",
    "first_bessel_zero",
    "principal_eigenvalue_ball",
    "principal_eigenvalue_fd",
    "growth_constants",
    "clearing_radius_rho",
    "speed_functions",
    "speed_bound",
    "n_defined_from",
    "proof_time_scales",
    "bramson_median",
]


class DomainError(ValueError):
    """Argument outside the domain where a formula is defined."""


def _check_dim(d: int) -> int:
    if int(d) != d or d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d!r}")
    return int(d)


@dataclass(frozen=True)
class ModelParams:
    """Obstacle intensity ``nu``, obstacle radius ``a``, suppressed rate
    ``beta1`` (inside K) and free rate ``beta2``."""

    nu: float
    a: float
    beta1: float
    beta2: float

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"nu must be > 0, got {self.nu}")
        if not self.a > 0:
            raise ValueError(f"a must be > 0, got {self.a}")
        if not 0 <= self.beta1 < self.beta2:
            raise ValueError(
                f"need 0 <= beta1 < beta2, got beta1={self.beta1}, beta2={self.beta2}"
            )

    def to_dict(self) -> dict:
        return {"nu": self.nu, "a": self.a, "beta1": self.beta1, "beta2": self.beta2}


@dataclass(frozen=True)
class ConstantsTable:
    d: int
    nu: float
    omega_d: float
    lambda_d: float
    c_quenched: float
    c_annealed: float
    R0: float

    def rows(self) -> list[tuple[str, float]]:
        return [
            ("d", self.d),
            ("nu", self.nu),
            ("omega_d", self.omega_d),
            ("lambda_d", self.lambda_d),
            ("c_quenched", self.c_quenched),
            ("c_annealed", self.c_annealed),
            ("R0", self.R0),
        ]


def unit_ball_volume(d: int) -> float:
    """Volume of the unit ball in R^d."""
    d = _check_dim(d)
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def bessel_j_scaled(nu: float, x: float) -> float:
    """``J_nu(x) * Gamma(nu+1) * (2/x)**nu`` by its power series.

    The scaling removes the ``x**nu`` factor, so the result is an entire
    function with the same positive zeros as ``J_nu`` and value 1 at 0.
    Accurate to ~1e-15 for x below about 8.
    """
    q = -0.25 * x * x
    term = 1.0
    total = 1.0
    k = 0
    while True:
        k += 1
        term *= q / (k * (k + nu))
        total += term
        if abs(term) < 1e-17 * max(1.0, abs(total)) and k > abs(q):
            return total
        if k > 500:
            raise RuntimeError(f"Bessel series did not converge at x={x}")


def first_bessel_zero(nu: float, lo: float = 0.1, hi: float = 20.0,
                      tol: float = 1e-13) -> float:
    """First positive zero of ``J_nu`` (nu > -1) by sign-change bracketing
    on ``[lo, hi]`` followed by bisection down to ``tol``."""
    if nu <= -1:
        raise ValueError("order must exceed -1")
    step = 0.01
    a = lo
    fa = bessel_j_scaled(nu, a)
    while a < hi:
        b = min(a + step, hi)
        fb = bessel_j_scaled(nu, b)
        if fa == 0.0:
            return a
        if fa * fb <= 0.0:
            break
        a, fa = b, fb
    else:
        raise RuntimeError(f"no sign change of J_{nu} on [{lo}, {hi}]")
    for _ in range(200):
        if b - a <= tol:
            return 0.5 * (a + b)
        m = 0.5 * (a + b)
        fm = bessel_j_scaled(nu, m)
        if fm == 0.0:
            return m
        if fa * fm < 0.0:
            b = m
        else:
            a, fa = m, fm
    raise RuntimeError("bisection for the Bessel zero did not converge")


def principal_eigenvalue_ball(d: int) -> float:
    """Principal Dirichlet eigenvalue of ``-1/2 Laplacian`` on the unit ball."""
    d = _check_dim(d)
    j = first_bessel_zero(d / 2 - 1)
    return 0.5 * j * j


def principal_eigenvalue_fd(d: int, n: int = 10_000) -> float:
    """Same eigenvalue from a cell-centred finite-volume discretisation of the
    radial operator ``-(1/2) r^(1-d) (r^(d-1) u')'`` on (0, 1) with u(1)=0.

    Second-order accurate; independent of any Bessel function evaluation.
    """
    d = _check_dim(d)
    h = 1.0 / n
    faces = np.arange(n + 1) * h                       # r_{i-1/2}, i = 0..n
    vol = (faces[1:] ** d - faces[:-1] ** d) / d       # cell "volumes" with r^(d-1) weight
    flux = faces ** (d - 1) / h                        # face conductances
    flux[0] = 0.0                                      # symmetry at r = 0
    diag = 0.5 * (flux[:-1] + flux[1:])
    diag[-1] = 0.5 * (flux[-2] + 2.0 * faces[-1] ** (d - 1) / h)  # Dirichlet at half a cell
    off = -0.5 * flux[1:-1]
    s = 1.0 / np.sqrt(vol)
    w = eigh_tridiagonal(diag * s * s, off * s[:-1] * s[1:],
                         eigvals_only=True, select="i", select_range=(0, 0))
    return float(w[0])


def growth_constants(d: int, nu: float) -> ConstantsTable:
    """Quenched and annealed growth constants and the clearing scale R0."""
    d = _check_dim(d)
    if not nu > 0:
        raise ValueError(f"nu must be > 0, got {nu}")
    omega = unit_ball_volume(d)
    lam = principal_eigenvalue_ball(d)
    c = lam * (nu * omega / d) ** (2.0 / d)
    c_ann = (nu * omega) ** (2.0 / (d + 2)) * ((d + 2) / 2.0) * (2.0 * lam / d) ** (d / (d + 2))
    r0 = (d / (nu * omega)) ** (1.0 / d)
    return ConstantsTable(d, float(nu), omega, lam, c, c_ann, r0)


def clearing_radius_rho(l: float, d: int, nu: float) -> float:
    """``R0 (log l)^(1/d) - (log log l)^2``; may be negative for moderate l."""
    if not l >= math.e:
        raise DomainError(f"need l >= e, got {l}")
    r0 = growth_constants(d, nu).R0
    ll = math.log(l)
    return r0 * ll ** (1.0 / d) - math.log(ll) ** 2


def speed_bound(t: float, c: float, beta2: float, d: int) -> tuple[float, float, float]:
    """(f(t), n(t), Bramson m(t)) for a given growth constant ``c`` >= 0."""
    if not t > 1:
        raise DomainError(f"need t > 1, got {t}")
    if not beta2 > 0:
        raise ValueError("beta2 must be > 0")
    v = math.sqrt(2.0 * beta2)
    lt = math.log(t)
    f = c * t / lt ** (2.0 / d)
    if f >= beta2 * t:
        raise DomainError(
            f"f(t)={f:.6g} >= beta2*t={beta2 * t:.6g}: speed bound undefined at t={t}"
        )
    n = t * v * math.sqrt(1.0 - f / (beta2 * t))
    m = t * v - 1.5 / v * lt
    return f, n, m


def speed_functions(t: float, d: int, nu: float, beta2: float) -> tuple[float, float, float]:
    """f(t), the radius n(t) and Bramson's m(t) for the (d, nu, beta2) model."""
    d = _check_dim(d)
    return speed_bound(t, growth_constants(d, nu).c_quenched, beta2, d)


def n_defined_from(d: int, nu: float, beta2: float) -> float:
    """Smallest t for which n(t) is real: (log t)^(2/d) > c/beta2."""
    c = growth_constants(d, nu).c_quenched
    return math.exp((c / beta2) ** (d / 2.0))


def bramson_median(t: float, beta2: float = 1.0) -> float:
    """Leading terms of the median maximal displacement of 1-d free BBM."""
    v = math.sqrt(2.0 * beta2)
    return t * v - 1.5 / v * math.log(t)


def proof_time_scales(t: float) -> tuple[float, float]:
    """``ell(t) = t^(1 - 1/log log t)`` and ``m(t) = t^(1 - 1/(2 log log t))``.

    Defined for t >= e^e (at t = e^e, ell = 1 and m = sqrt(t)).
    """
    ee = math.exp(math.e)
    if t < ee * (1 - 1e-15):
        raise DomainError(f"need t >= e^e ~ {ee:.6f}, got {t}")
    lt = math.log(t)
    llt = max(math.log(lt), 1.0)
    return t ** (1.0 - 1.0 / llt), t ** (1.0 - 0.5 / llt)
