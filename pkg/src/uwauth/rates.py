"""Closed-form detection error probabilities and their quadratures.

Implements the prior-weighted false-alarm / missed-detection expressions for
the distance-bounding test and the distance outlier test, plus the sorted-
midpoint misclassification probability for identification (distance or AoA
feature). Formulas are kept verbatim, including the 1/(M+1) occupant prior;
conversions to occupant-conditional rates live in the simulation layer.

The ranging error scale is either one common sigma (feature-noise channel)
or per-node sigmas plus a distance-parameterized sigma for the adversary
(pathloss-dependent waveform channel); the two modes coincide when all
sigmas are equal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import erfc, log_ndtr, logsumexp


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to converge; carries the partial estimate."""

    def __init__(self, message: str, partial: float):
        super().__init__(message)
        self.partial = partial


def q_func(x):
    """Standard normal tail Q(x), via the complementary error function."""
    out = 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))
    return float(out) if np.isscalar(x) else out


def log_q_func(x):
    """log Q(x), exact far into the tail (no underflow at any float x)."""
    out = log_ndtr(-np.asarray(x, dtype=float))
    return float(out) if np.isscalar(x) else out


def _adaptive(f, a, b, fa, fm, fb, whole, tol, depth, max_depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    if depth >= max_depth:
        raise QuadratureError(
            f"adaptive Simpson exceeded depth {max_depth} on "
            f"[{a}, {b}]", left + right)
    delta = left + right - whole
    if abs(delta) <= 15.0 * tol:
        return left + right + delta / 15.0
    return (_adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth + 1,
                      max_depth)
            + _adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth + 1,
                        max_depth))


def quadrature(f: Callable[[float], float], a: float, b: float,
               tol: float = 1e-8, max_depth: int = 60) -> float:
    """Adaptive Simpson integral of f over [a, b], absolute tolerance tol.

    Intervals are bisected until the local error estimate drops below the
    tolerance share of the interval; exceeding the recursion depth raises
    QuadratureError with the partial estimate attached.
    """
    if not a < b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _adaptive(f, a, b, fa, fm, fb, whole, tol, 0, max_depth)


def _piecewise_quadrature(f, a, b, breakpoints, tol):
    """Quadrature split at known integrand features so narrow bumps between
    coarse Simpson nodes cannot be missed."""
    pts = [a] + sorted(x for x in breakpoints if a < x < b) + [b]
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        if hi - lo > 1e-12:
            total += quadrature(f, lo, hi, tol * (hi - lo) / (b - a))
    return total


@dataclass(frozen=True)
class AnalyticContext:
    """Deployment constants and error scales for the closed forms.

    sigma_alice holds sigma_{d_i} per node (a scalar broadcasts to all
    nodes); sigma_eve maps a candidate adversary distance to its sigma.
    For the common-noise channel both are one constant.
    """

    d: np.ndarray
    theta: np.ndarray
    d0: float
    d_min: float
    k: float
    epsilon: float
    sigma_alice: np.ndarray
    sigma_eve: Callable[[float], float]
    quad_tol: float = 1e-8

    @classmethod
    def common_sigma(cls, d, theta, d0, d_min, k, epsilon, sigma,
                     quad_tol: float = 1e-8) -> "AnalyticContext":
        d = np.asarray(d, dtype=float)
        if sigma <= 0:
            raise ValueError("sigma must be positive")
        return cls(d=d, theta=np.asarray(theta, dtype=float), d0=d0,
                   d_min=d_min, k=k, epsilon=epsilon,
                   sigma_alice=np.full(d.size, float(sigma)),
                   sigma_eve=lambda d_e: float(sigma), quad_tol=quad_tol)

    def __post_init__(self):
        if self.k <= 1:
            raise ValueError("ring ratio k must exceed 1")
        if np.any(self.sigma_alice <= 0):
            raise ValueError("per-node sigma must be positive")
        if self.d.size != self.sigma_alice.size:
            raise ValueError("sigma_alice must match the node count")

    @property
    def m(self) -> int:
        return self.d.size

    @property
    def prior(self) -> float:
        """Equal occupant prior over the M nodes plus the adversary."""
        return 1.0 / (self.m + 1)


def pfa_test1(ctx: AnalyticContext) -> float:
    """False-alarm probability of the distance-bounding test."""
    if np.any(ctx.d > ctx.d0):
        raise ValueError("all node distances must lie within d0")
    return float(ctx.prior * np.sum(q_func((ctx.d0 - ctx.d) / ctx.sigma_alice)))


def pfa_test1_log(ctx: AnalyticContext) -> float:
    """log of pfa_test1, usable where the linear value underflows."""
    if np.any(ctx.d > ctx.d0):
        raise ValueError("all node distances must lie within d0")
    terms = log_q_func((ctx.d0 - ctx.d) / ctx.sigma_alice)
    return float(np.log(ctx.prior) + logsumexp(terms))


def pmd_bar_test1(ctx: AnalyticContext) -> float:
    """Expected missed detection of the distance bound, adversary distance
    uniform on (d0 + epsilon, k*d0).

    Evaluated in the complementary form prior * integral of eta *
    Q((d_E - d0)/sigma) (identical since eta integrates to 1 over the
    support) so small values survive instead of cancelling against 1.
    """
    lo, hi = ctx.d0 + ctx.epsilon, ctx.k * ctx.d0
    if hi <= lo:
        raise ValueError("empty adversary support: k*d0 <= d0 + epsilon")
    eta = 1.0 / (ctx.d0 * (ctx.k - 1.0) - ctx.epsilon)

    def integrand(d_e):
        return eta * q_func((d_e - ctx.d0) / ctx.sigma_eve(d_e))

    integral = _piecewise_quadrature(integrand, lo, hi, [lo + (hi - lo) / 64],
                                     ctx.quad_tol)
    return float(ctx.prior * integral)


def pfa_test2b(ctx: AnalyticContext, eps_d: float) -> float:
    """False-alarm probability of the distance outlier test."""
    if eps_d <= 0:
        raise ValueError("eps_d must be positive")
    return float(ctx.prior * np.sum(2.0 * q_func(eps_d / ctx.sigma_alice)))


def pfa_test2b_log(ctx: AnalyticContext, eps_d: float) -> float:
    """log of pfa_test2b, usable where the linear value underflows."""
    if eps_d <= 0:
        raise ValueError("eps_d must be positive")
    terms = log_q_func(eps_d / ctx.sigma_alice)
    return float(np.log(2.0 * ctx.prior) + logsumexp(terms))


def pmd_bar_test2b(ctx: AnalyticContext, eps_d: float) -> float:
    """Expected missed detection of the distance outlier test, adversary
    distance uniform on (d_min, k*d0)."""
    lo, hi = ctx.d_min, ctx.k * ctx.d0
    if lo >= hi:
        raise ValueError("empty adversary support: d_min >= k*d0")
    if eps_d == 0:
        return 0.0
    if eps_d < 0:
        raise ValueError("eps_d must be non-negative")
    d = ctx.d

    def integrand(d_e):
        s = ctx.sigma_eve(d_e)
        return float(np.sum(q_func((d - eps_d - d_e) / s)
                            - q_func((d + eps_d - d_e) / s)))

    breaks = np.concatenate([d - eps_d, d, d + eps_d])
    integral = _piecewise_quadrature(integrand, lo, hi, breaks, ctx.quad_tol)
    return float(ctx.prior * integral / (hi - lo))


def pe_misclassification(ctx: AnalyticContext, feature: str = "distance",
                         conditional: bool = False):
    """Identification misclassification probability for one feature.

    Sorts the feature values, forms midpoint cell boundaries (outer
    boundaries d_min/d0 for distance, 0/180 degrees for AoA) and evaluates
    the per-node escape probability P_e|i. The verbatim total weights by
    the 1/(M+1) occupant prior; `conditional` weights by 1/M instead
    (occupant known to be legitimate), which is what a Monte Carlo
    misclassification frequency over legitimate-sender slots estimates.

    Returns (p_e, per_node) with per_node in the sorted feature order.
    """
    if feature == "distance":
        values = np.asarray(ctx.d, dtype=float)
        lo_bound, hi_bound = ctx.d_min, ctx.d0
        sig = np.asarray(ctx.sigma_alice, dtype=float)
    elif feature == "aoa":
        values = np.asarray(ctx.theta, dtype=float)
        lo_bound, hi_bound = 0.0, 180.0
        sig = np.asarray(ctx.sigma_alice, dtype=float)
    else:
        raise ValueError(f"unknown feature {feature!r}")

    vals = values.copy()
    # exact ties leave midpoint boundaries undefined; nudge before sorting
    for _ in range(3):
        order = np.argsort(vals, kind="stable")
        tied = np.diff(vals[order]) == 0.0
        if not np.any(tied):
            break
        vals[order[1:][tied]] += 1e-9
    else:
        raise ValueError("duplicate feature values persist after perturbation")

    order = np.argsort(vals, kind="stable")
    sv = vals[order]
    ss = sig[order]
    lower = np.empty(sv.size)
    upper = np.empty(sv.size)
    lower[0], upper[-1] = lo_bound, hi_bound
    mids = 0.5 * (sv[:-1] + sv[1:])
    lower[1:] = mids
    upper[:-1] = mids
    per_node = 1.0 - (q_func((lower - sv) / ss) - q_func((upper - sv) / ss))
    weight = (1.0 / sv.size) if conditional else ctx.prior
    return float(np.sum(per_node * weight)), per_node
