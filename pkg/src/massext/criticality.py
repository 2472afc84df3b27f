"""Threshold functions and critical-value solvers.

Two scalar functions of the birth rate control the phase structure of the
process on the d-ary tree:

    f_d(lam) = inf_{0<u<1} lam / (u (1-u)) * [1 - (lam / (lam + u))^d]
    h_d(lam) = d - 2 lam * [1 - (lam / (lam + 1))^d]

``lambda_c(d)``, the unique root of ``f_d = 1``, separates almost-sure
extinction of the whole-tree process (below) from survival with positive
probability (above).  ``lambda_s(d)``, the unique root of ``h_d = 0``, plays
the same role for the restriction of the process to any fixed infinite
branch.  For every d the two differ, which leaves an intermediate phase
(lambda_c, lambda_s] where each fixed branch dies out almost surely while
the tree process survives.

The bracketed integrand at fixed u equals d * psi(u) where psi(u) is the
moment generating function of one step K - W of the level race (K an
exponential kill clock, W the slot-filling time); its infimum over u is the
large-deviation rate constant rho = f_d(lam) / d used by the ``oracles``
module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# inner-infimum search parameters: dense coarse grid, then golden-section
# refinement of the bracketing cell down to U_TOL
U_EDGE = 1e-6
GRID_POINTS = 1024
U_TOL = 1e-12

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0

# bisection bracket for lambda_c; f_d(0) = 0 and f_d(1) > 1 for d >= 2
_LC_BRACKET = (1e-9, 1.0)


class BracketError(RuntimeError):
    """A root bracket failed its sign check."""


def ratio_power(r, d: int):
    """r**d computed stably for large d (r in [0, 1))."""
    if d <= 64:
        return r ** d
    # exponent-log form avoids intermediate underflow ordering issues
    return np.exp(d * np.log(r))


def objective(d: int, lam: float, u):
    """Integrand of the inner infimum: lam/(u(1-u)) * [1 - (lam/(lam+u))^d].

    Accepts a scalar or array u; every entry must lie strictly in (0, 1).
    """
    _check_d(d)
    if lam <= 0:
        raise ValueError(f"lam must be > 0, got {lam}")
    ua = np.asarray(u, dtype=float)
    if np.any(ua <= 0.0) or np.any(ua >= 1.0):
        raise ValueError("u must lie strictly in (0, 1)")
    val = lam / (ua * (1.0 - ua)) * (1.0 - ratio_power(lam / (lam + ua), d))
    return val if val.ndim else float(val)


def f_d(d: int, lam: float) -> tuple[float, float]:
    """Inner infimum of ``objective`` over u in (0, 1).

    Returns (value, minimizing_u).  A 1024-point coarse grid on
    [U_EDGE, 1 - U_EDGE] locates the basin (no convexity in u is assumed),
    then golden-section refines the bracketing cell to U_TOL.  The objective
    diverges at both endpoints, so the edge clip cannot hide the infimum.
    """
    us = np.linspace(U_EDGE, 1.0 - U_EDGE, GRID_POINTS)
    vals = objective(d, lam, us)
    i = int(np.argmin(vals))
    a = us[max(i - 1, 0)]
    b = us[min(i + 1, GRID_POINTS - 1)]
    u = _golden_min(lambda x: objective(d, lam, x), a, b)
    return objective(d, lam, u), u


def h_d(d: int, lam: float) -> float:
    """d - 2 lam [1 - (lam/(lam+1))^d]; closed form, defined for lam >= 0."""
    _check_d(d)
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    if lam == 0.0:
        return float(d)
    return float(d - 2.0 * lam * (1.0 - ratio_power(lam / (lam + 1.0), d)))


@dataclass(frozen=True)
class CriticalResult:
    """A solved critical value with its bisection bracket.

    minimizing_u is the argmin of the inner infimum at the solution
    (lambda_c only; None for lambda_s).
    """

    d: int
    value: float
    tolerance: float
    bracket: tuple[float, float]
    minimizing_u: float | None


def solve_lambda_c(d: int, tol: float = 1e-10) -> CriticalResult:
    """Root of f_d(lam) = 1 by bisection on (1e-9, 1).

    The partition used is {f <= 1} below / {f > 1} above, matching the
    definition of lambda_c as inf{lam : f_d(lam) > 1}; for large d, where
    the root sits within an ulp of 1/4, this keeps the returned midpoint on
    the upper side of 1/4.

    d = 1 has no solution (f_1 <= 1 for every lam) and raises BracketError.
    """
    _check_d(d)
    if tol <= 0:
        raise ValueError("tol must be > 0")
    lo, hi = _LC_BRACKET
    if not (f_d(d, lo)[0] <= 1.0 < f_d(d, hi)[0]):
        raise BracketError(
            f"f_{d} does not cross 1 on [{lo}, {hi}]; lambda_c is only "
            "defined for d >= 2 (f_1 never exceeds 1)"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f_d(d, mid)[0] > 1.0:
            hi = mid
        else:
            lo = mid
    value = 0.5 * (lo + hi)
    return CriticalResult(d, value, tol, (lo, hi), f_d(d, value)[1])


def solve_lambda_s(d: int, tol: float = 1e-10) -> CriticalResult:
    """Root of h_d(lam) = 0: bracket by doubling from [0, 1], then bisect.

    h_d(0) = d > 0 and h_d -> -d as lam -> infinity, so a sign change is
    always found.
    """
    _check_d(d)
    if tol <= 0:
        raise ValueError("tol must be > 0")
    lo, hi = 0.0, 1.0
    while h_d(d, hi) > 0.0:
        lo = hi
        hi *= 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if h_d(d, mid) < 0.0:
            hi = mid
        else:
            lo = mid
    value = 0.5 * (lo + hi)
    return CriticalResult(d, value, tol, (lo, hi), None)


def _golden_min(fn, a: float, b: float) -> float:
    c = b - _INVPHI * (b - a)
    e = a + _INVPHI * (b - a)
    fc = fn(c)
    fe = fn(e)
    while b - a > U_TOL:
        if fc < fe:
            b, e, fe = e, c, fc
            c = b - _INVPHI * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, e, fe
            e = a + _INVPHI * (b - a)
            fe = fn(e)
    return 0.5 * (a + b)


def _check_d(d: int) -> None:
    if int(d) != d or d < 1:
        raise ValueError(f"d must be an integer >= 1, got {d!r}")
