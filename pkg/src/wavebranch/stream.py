"""Uniform-stream family: depth, Bernoulli constant, Froude number, flow force.

A stream is parameterized by theta = U'(0) > theta0.  Its height profile in
hodograph variables is H(p; theta) = int_0^p (theta^2 - 2*Omega(tau))^(-1/2) dtau,
the depth is d = H(1), and

    R(theta) = theta^2/2 + d(theta) - Omega(1)
    1/F^2    = int_0^1 H_p^3 dp
    S(theta) = int_0^d (U_Y^2/2 - Omega(U) + Omega(1) - Y + R) dY

All quadratures are adaptive Gauss-Kronrod (QUADPACK) with relative tolerance
1e-12; the flow-force integral is reduced to a single non-nested quadrature via
int_0^1 H H_p dp = d^2/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .errors import (
    BelowCriticalError,
    NoRootError,
    SingularIntegrandError,
    UnboundedSearchError,
)
from .vorticity import (
    VorticitySpec,
    eval_Omega,
    max_Omega,
    omega_critical_points,
    theta0,
)

__all__ = [
    "StreamSolution",
    "DispersionSummary",
    "depth",
    "depth_prime",
    "R_of_theta",
    "R_prime_of_theta",
    "froude_of_theta",
    "flow_force_of_theta",
    "stream_profile",
    "stream_profile_dtheta",
    "stream_at",
    "dispersion_summary",
    "solve_theta_for_R",
    "flow_force_of_R",
    "check_flow_force_identity",
]

_QUAD_OPTS = dict(epsabs=1e-14, epsrel=1e-12, limit=200)


@dataclass(frozen=True)
class StreamSolution:
    """One uniform stream: parameter, depth, Bernoulli constant, Froude number,
    flow force, and a sampled height profile H(p_j) on a uniform p-grid."""

    theta: float
    depth: float
    R: float
    froude: float
    flow_force: float
    p: np.ndarray
    profile: np.ndarray


@dataclass(frozen=True)
class DispersionSummary:
    """Critical stream data: argmin theta_c of R(theta), R_c, and R_0 = R(theta0)
    (math.inf when the depth integral at theta0 diverges)."""

    theta_c: float
    R_c: float
    R_0: float
    theta_0: float


def _inv_speed(spec: VorticitySpec, theta: float):
    """Integrand 1/sqrt(theta^2 - 2*Omega(tau)) with a positivity guard."""

    def f(tau: float) -> float:
        s = theta * theta - 2.0 * eval_Omega(spec, tau)
        if s <= 0.0:
            raise SingularIntegrandError(
                f"theta^2 - 2*Omega({tau}) = {s} <= 0; need theta > theta0"
            )
        return 1.0 / math.sqrt(s)

    return f


def _quad(f, a: float, b: float, points=None) -> float:
    if points:
        pts = [x for x in points if a < x < b]
        val, _ = integrate.quad(f, a, b, points=pts or None, **_QUAD_OPTS)
    else:
        val, _ = integrate.quad(f, a, b, **_QUAD_OPTS)
    return val


def _require_above_theta0(spec: VorticitySpec, theta: float) -> float:
    t0 = theta0(spec)
    if theta <= t0:
        raise SingularIntegrandError(f"theta={theta} <= theta0={t0}")
    return t0


def depth(spec: VorticitySpec, theta: float) -> float:
    """d(theta) = int_0^1 dtau / sqrt(theta^2 - 2*Omega(tau)), theta > theta0."""
    _require_above_theta0(spec, theta)
    return _quad(_inv_speed(spec, theta), 0.0, 1.0, points=omega_critical_points(spec))


def depth_prime(spec: VorticitySpec, theta: float) -> float:
    """d'(theta) = -theta * int_0^1 (theta^2 - 2*Omega)^(-3/2) dtau."""
    _require_above_theta0(spec, theta)

    def f(tau: float) -> float:
        s = theta * theta - 2.0 * eval_Omega(spec, tau)
        return s ** -1.5

    return -theta * _quad(f, 0.0, 1.0, points=omega_critical_points(spec))


def R_of_theta(spec: VorticitySpec, theta: float) -> float:
    """Bernoulli constant R(theta) = theta^2/2 + d(theta) - Omega(1)."""
    return 0.5 * theta * theta + depth(spec, theta) - eval_Omega(spec, 1.0)


def R_prime_of_theta(spec: VorticitySpec, theta: float) -> float:
    return theta + depth_prime(spec, theta)


def froude_of_theta(spec: VorticitySpec, theta: float) -> float:
    """Froude number from 1/F^2 = int_0^1 H_p^3 dp."""
    _require_above_theta0(spec, theta)

    def f(tau: float) -> float:
        s = theta * theta - 2.0 * eval_Omega(spec, tau)
        return s ** -1.5

    inv_f2 = _quad(f, 0.0, 1.0, points=omega_critical_points(spec))
    return inv_f2 ** -0.5


def flow_force_of_theta(spec: VorticitySpec, theta: float) -> float:
    """Flow force of the stream, written as a single p-quadrature.

    S = int_0^1 [ (theta^2 - 2*Omega)/2 - Omega + Omega(1) + R ] H_p dp - d^2/2,
    using int_0^1 H H_p dp = d^2/2 exactly.
    """
    _require_above_theta0(spec, theta)
    d = depth(spec, theta)
    R = 0.5 * theta * theta + d - eval_Omega(spec, 1.0)
    om1 = eval_Omega(spec, 1.0)

    def f(tau: float) -> float:
        s = theta * theta - 2.0 * eval_Omega(spec, tau)
        return (0.5 * s - eval_Omega(spec, tau) + om1 + R) / math.sqrt(s)

    val = _quad(f, 0.0, 1.0, points=omega_critical_points(spec))
    return val - 0.5 * d * d


def stream_profile(spec: VorticitySpec, theta: float, p: np.ndarray) -> np.ndarray:
    """H(p_j; theta) at the given ascending nodes, by cumulative segment quadrature."""
    _require_above_theta0(spec, theta)
    p = np.asarray(p, dtype=float)
    f = _inv_speed(spec, theta)
    pts = omega_critical_points(spec)
    H = np.zeros_like(p)
    acc = 0.0
    prev = 0.0
    for j, pj in enumerate(p):
        if pj > prev:
            acc += _quad(f, prev, pj, points=pts)
            prev = pj
        H[j] = acc
    return H


def stream_profile_dtheta(spec: VorticitySpec, theta: float, p: np.ndarray) -> np.ndarray:
    """dH/dtheta at the given nodes: -theta * int_0^p (theta^2 - 2*Omega)^(-3/2)."""
    _require_above_theta0(spec, theta)
    p = np.asarray(p, dtype=float)

    def f(tau: float) -> float:
        s = theta * theta - 2.0 * eval_Omega(spec, tau)
        return s ** -1.5

    pts = omega_critical_points(spec)
    out = np.zeros_like(p)
    acc = 0.0
    prev = 0.0
    for j, pj in enumerate(p):
        if pj > prev:
            acc += _quad(f, prev, pj, points=pts)
            prev = pj
        out[j] = -theta * acc
    return out


def stream_at(spec: VorticitySpec, theta: float, n_profile: int = 201) -> StreamSolution:
    """Assemble the full StreamSolution at the given theta > theta0."""
    _require_above_theta0(spec, theta)
    d = depth(spec, theta)
    R = 0.5 * theta * theta + d - eval_Omega(spec, 1.0)
    F = froude_of_theta(spec, theta)
    S = flow_force_of_theta(spec, theta)
    p = np.linspace(0.0, 1.0, n_profile)
    H = stream_profile(spec, theta, p)
    return StreamSolution(theta=theta, depth=d, R=R, froude=F, flow_force=S, p=p, profile=H)


def _depth_at_theta0(spec: VorticitySpec, t0: float, tau_star: float) -> float:
    """d(theta0) when the depth integral converges.

    The integrand has an endpoint inverse-square-root singularity at the argmax
    tau_star of Omega; it is removed by the substitution tau = tau_star -/+ u^2.
    """
    pts = omega_critical_points(spec)

    def raw(tau: float) -> float:
        s = t0 * t0 - 2.0 * eval_Omega(spec, tau)
        if s <= 0.0:
            return math.inf
        return 1.0 / math.sqrt(s)

    if tau_star >= 1.0 - 1e-14:
        # singular at tau = 1: substitute tau = 1 - u^2
        def g(u: float) -> float:
            return 2.0 * u * raw(1.0 - u * u)

        return _quad(g, 0.0, 1.0, points=[math.sqrt(max(1.0 - x, 0.0)) for x in pts])
    if tau_star <= 1e-14:
        # singular at tau = 0: substitute tau = u^2
        def g(u: float) -> float:
            return 2.0 * u * raw(u * u)

        return _quad(g, 0.0, 1.0, points=[math.sqrt(x) for x in pts])
    # interior argmax with a convergent integral is not expected; integrate by splitting
    return _quad(raw, 0.0, tau_star) + _quad(raw, tau_star, 1.0)


def _classify_R0(spec: VorticitySpec) -> float:
    """R_0 = R(theta0), or math.inf when d(theta0) diverges.

    Finiteness is decided numerically from the growth of d(theta0 + eps) over
    eps in {1e-2, 1e-3, 1e-4}: square-root endpoint singularities give
    decreasing increments (ratio ~ 1/sqrt(10)); divergent integrals give
    increments with ratio >= 1.
    """
    t0 = theta0(spec)
    d1 = depth(spec, t0 + 1e-2)
    d2 = depth(spec, t0 + 1e-3)
    d3 = depth(spec, t0 + 1e-4)
    g1 = d2 - d1
    g2 = d3 - d2
    if g1 <= 1e-12 and g2 <= 1e-12:
        # no growth at all: Omega max is attained flatly; integral converges
        pass
    elif g2 > 0.6 * g1:
        return math.inf
    _, tau_star = max_Omega(spec)
    d0 = _depth_at_theta0(spec, t0, tau_star)
    return 0.5 * t0 * t0 + d0 - eval_Omega(spec, 1.0)


def dispersion_summary(spec: VorticitySpec, theta_max: float | None = None) -> DispersionSummary:
    """Locate the critical stream: theta_c = argmin R(theta), R_c, and R_0.

    The minimum is found as the root of R'(theta) = theta + d'(theta), which is
    negative just above theta0 and positive for large theta.
    """
    t0 = theta0(spec)
    if theta_max is None:
        theta_max = max(10.0, 3.0 * t0 + 10.0)

    def rp(t: float) -> float:
        return R_prime_of_theta(spec, t)

    # bracket the sign change of R' on (theta0, theta_max]
    lo = None
    for k in range(1, 60):
        t = t0 + (theta_max - t0) * 0.5 ** k
        try:
            if rp(t) < 0.0:
                lo = t
                break
        except SingularIntegrandError:
            break
    if lo is None:
        raise UnboundedSearchError("R'(theta) has no sign change above theta0")
    hi = lo
    while rp(hi) < 0.0:
        hi = min(2.0 * hi + 0.1, theta_max)
        if hi >= theta_max and rp(theta_max) < 0.0:
            raise UnboundedSearchError(
                f"no interior minimum of R(theta) within theta_max={theta_max}"
            )
    theta_c = optimize.brentq(rp, lo, hi, xtol=1e-14, rtol=8.9e-16)
    R_c = R_of_theta(spec, theta_c)
    R_0 = _classify_R0(spec)
    return DispersionSummary(theta_c=float(theta_c), R_c=float(R_c), R_0=float(R_0), theta_0=t0)


def solve_theta_for_R(
    spec: VorticitySpec,
    R: float,
    regime: str,
    summary: DispersionSummary | None = None,
) -> float:
    """Invert R(theta) = R on one side of theta_c.

    regime 'supercritical': root theta > theta_c (depth d_-, Froude > 1);
    regime 'subcritical':  root in (theta0, theta_c) (depth d_+), which exists
    only for R < R_0.
    """
    if regime not in ("supercritical", "subcritical"):
        raise ValueError(f"unknown regime {regime!r}")
    if summary is None:
        summary = dispersion_summary(spec)
    if R < summary.R_c - 1e-12:
        raise BelowCriticalError(f"R={R} below R_c={summary.R_c}")
    if R <= summary.R_c + 1e-13:
        return summary.theta_c

    def f(t: float) -> float:
        return R_of_theta(spec, t) - R

    if regime == "supercritical":
        a = summary.theta_c
        b = summary.theta_c + max(1.0, summary.theta_c)
        while f(b) < 0.0:
            b = 2.0 * b
            if b > 1e6:
                raise NoRootError("supercritical bracket expansion failed")
        return float(optimize.brentq(f, a, b, xtol=1e-15, rtol=8.9e-16))

    if R >= summary.R_0:
        raise NoRootError(f"subcritical root requires R < R_0={summary.R_0}, got R={R}")
    t0 = summary.theta_0
    b = summary.theta_c
    a = None
    for k in range(1, 200):
        t = t0 + (summary.theta_c - t0) * 0.5 ** k
        if t <= t0 * (1 + 1e-15) + 1e-300:
            break
        try:
            if f(t) > 0.0:
                a = t
                break
        except SingularIntegrandError:
            break
    if a is None:
        raise NoRootError(f"no subcritical root found for R={R}")
    return float(optimize.brentq(f, a, b, xtol=1e-15, rtol=8.9e-16))


def flow_force_of_R(
    spec: VorticitySpec,
    R: float,
    regime: str,
    summary: DispersionSummary | None = None,
) -> float:
    """S_-(R) or S_+(R): flow force of the stream solving R(theta) = R in the regime."""
    theta = solve_theta_for_R(spec, R, regime, summary=summary)
    return flow_force_of_theta(spec, theta)


def check_flow_force_identity(spec: VorticitySpec, theta: float, h: float) -> float:
    """Central-difference defect |d S/d theta - R'(theta) d(theta)|, O(h^2) by contract.

    Both sides are differenced with the same step so the identity is checked
    independently of the analytic derivative formulas.
    """
    if theta - h <= theta0(spec):
        raise SingularIntegrandError("theta - h must stay above theta0")
    dS = (flow_force_of_theta(spec, theta + h) - flow_force_of_theta(spec, theta - h)) / (2 * h)
    dR = (R_of_theta(spec, theta + h) - R_of_theta(spec, theta - h)) / (2 * h)
    return abs(dS - dR * depth(spec, theta))
