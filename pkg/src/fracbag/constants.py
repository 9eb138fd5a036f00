"""Admissibility thresholds and shooting constants.

Computes the critical exponent p_bar (root of the barrier function f),
the per-exponent frequency threshold Omega_q (root of g in omega), and the
package of constants the shooter relies on: inner radius r0, cone constant
alpha, angular-speed floor Theta, the energy level gamma with its decay
exponent q, and the strip width E1. An optional trapping radius is exposed
as a diagnostic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import model
from .model import DomainError, ModelParams


def f_barrier(p: float) -> float:
    """Barrier function exp(-4/(1-p))*(1+p) - p; strictly decreasing."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must lie in (0, 1), got {p}")
    return math.exp(-4.0 / (1.0 - p)) * (1.0 + p) - p


def p_bar() -> float:
    """Unique root of the barrier function in (0, 1), ~ 0.0173622."""
    lo, hi = 1e-12, 1.0 - 1e-12
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f_barrier(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def g_barrier(omega: float, p: float, mass: float = 1.0) -> float:
    """Frequency barrier; increasing in omega, tends to f(p) as omega -> oo."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must lie in (0, 1), got {p}")
    if not omega > mass > 0.0:
        raise DomainError(
            f"need omega > mass > 0, got omega={omega} mass={mass}")
    beta = (p * omega + (1.0 - p) * mass) / omega
    return math.exp(-4.0 * omega / ((omega - mass) * (1.0 - p))) * (1.0 + beta) - beta


def omega_threshold(p: float, mass: float = 1.0) -> float:
    """Unique root Omega_p > mass of g(., p); requires p < p_bar.

    Bisection on (mass, 1e6 * mass * max(1, ...)] to 1e-12 relative width.
    """
    pb = p_bar()
    if not 0.0 < p < pb:
        raise DomainError(
            f"no frequency threshold: need 0 < p < p_bar={pb:.9g}, got {p}")
    lo = mass * (1.0 + 1e-12)
    hi = mass * 1e6
    while g_barrier(hi, p, mass) <= 0.0:
        hi *= 10.0
        if hi > mass * 1e15:
            raise DomainError(f"failed to bracket the threshold for p={p}")
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if g_barrier(mid, p, mass) > 0.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-12 * hi:
            break
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ShootingConstants:
    """Constant pack used by the shooter at fixed (p, q_cone, omega, mass).

    p_bar:    critical exponent (root of f)
    omega_p:  frequency threshold at q_cone
    r0:       inner radius 1/((omega-mass)(1-q_cone))
    alpha:    cone constant g(omega, q_cone) > 0
    theta_lb: angular-speed floor (1-p)(omega-mass) - 1/r0 > 0
    gamma:    energy level chosen so q_exp > 0
    q_exp:    2(1-p)(omega+mass)C_gamma - 1
    e1:       strip width E0^2 * alpha
    q_cone:   the cone exponent actually used
    """

    p_bar: float
    omega_p: float
    r0: float
    alpha: float
    theta_lb: float
    gamma: float
    q_exp: float
    e1: float
    q_cone: float


def default_q_cone(p: float, omega: float, mass: float = 1.0) -> float:
    """Cone exponent in (p, p_bar) kept admissible at the given omega.

    Prefers min(2p, (p + p_bar)/2); when that threshold exceeds omega the
    exponent is pulled toward p: q = p + 0.9 (q*(omega) - p) with q* the
    exponent whose threshold equals omega.
    """
    pb = p_bar()
    if not 0.0 < p < pb:
        raise DomainError(f"need 0 < p < p_bar={pb:.9g}, got p={p}")
    q = min(2.0 * p, 0.5 * (p + pb))
    if g_barrier(omega, q, mass) > 0.0:
        return q
    if g_barrier(omega, p, mass) <= 0.0:
        raise DomainError(
            f"omega={omega} is below the threshold "
            f"Omega_p={omega_threshold(p, mass):.9g} for p={p}")
    lo, hi = p, q
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g_barrier(omega, mid, mass) > 0.0:
            lo = mid
        else:
            hi = mid
    return p + 0.9 * (0.5 * (lo + hi) - p)


def shooting_constants(params: ModelParams,
                       q_cone: float | None = None) -> ShootingConstants:
    """Build the shooting constants for the given parameters.

    Requires 0 < p < q_cone < p_bar and omega > Omega_{q_cone}; the error
    message carries the computed threshold when the latter fails.
    """
    p, om, m = params.p, params.omega, params.mass
    pb = p_bar()
    if q_cone is None:
        q_cone = default_q_cone(p, om, m)
    if not p < q_cone < pb:
        raise DomainError(
            f"need p < q_cone < p_bar={pb:.9g}, got p={p}, q_cone={q_cone}")
    if g_barrier(om, q_cone, m) <= 0.0:
        raise DomainError(
            f"omega={om} is not admissible for q_cone={q_cone}: "
            f"requires omega > {omega_threshold(q_cone, m):.9g}")

    om_p = omega_threshold(q_cone, m)
    r0 = 1.0 / ((om - m) * (1.0 - q_cone))
    alpha = g_barrier(om, q_cone, m)
    theta_lb = (1.0 - p) * (om - m) - 1.0 / r0

    # smallest gamma on a log grid with a comfortable decay-exponent margin;
    # C_gamma >= 2/(om+m) makes q_exp >= 4(1-p) - 1, so the first point wins
    gamma = math.nan
    q_exp = math.nan
    g_lo, g_hi = 1e-6 * (om - m), 1e3 * (om - m)
    n_grid = 91
    for i in range(n_grid):
        cand = g_lo * (g_hi / g_lo) ** (i / (n_grid - 1))
        c = model.level_constants(cand, params, n_angles=64).c_gamma
        qe = 2.0 * (1.0 - p) * (om + m) * c - 1.0
        if qe > 0.1:
            gamma = cand
            q_exp = qe
            break
    if math.isnan(gamma):
        raise DomainError("no admissible gamma found on the scan grid")

    e1 = model.e0(params) ** 2 * alpha
    return ShootingConstants(p_bar=pb, omega_p=om_p, r0=r0, alpha=alpha,
                             theta_lb=theta_lb, gamma=gamma, q_exp=q_exp,
                             e1=e1, q_cone=q_cone)


def trapping_radius(consts: ShootingConstants, params: ModelParams,
                    k: int) -> float:
    """Diagnostic trapping radius for the k-node argument (not used by the
    solver): min(M1^3 / (4 M2 (pi (k+2)/Theta + r0)), sqrt(alpha) * E0).

    (M1, M2) is the point of the zero level in {v > u > 0} where the level
    curve crosses v^2 - u^2 = ((omega-mass)/p)^(1/(p-1)).
    """
    if k < 0:
        raise DomainError(f"k must be nonnegative, got {k}")
    p, om, m = params.p, params.omega, params.mass
    x1 = (p / (om - m)) ** (1.0 / (1.0 - p))
    m1_sq = x1 * (om - m) * (1.0 - p) / (2.0 * p * om)
    m1 = math.sqrt(m1_sq)
    m2 = math.sqrt(m1_sq + x1)
    cap = m1 ** 3 / (4.0 * m2 * (math.pi * (k + 2) / consts.theta_lb + consts.r0))
    return min(cap, math.sqrt(consts.alpha) * model.e0(params))


def with_regularization(params: ModelParams, consts: ShootingConstants,
                        eps: float | None = None) -> ModelParams:
    """Copy of params with the strip width e1 (and optionally eps) filled."""
    return ModelParams(p=params.p, omega=params.omega, mass=params.mass,
                       eps=params.eps if eps is None else eps,
                       e1=consts.e1)
