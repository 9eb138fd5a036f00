"""Energy landscape of the radial sub-linear Dirac system.

Closed-form domain functions shared by the whole package: the sub-linear
coupling F, the plane energy H and its tilted variant H_eps, the zero-level
amplitude E0, level-set constants (C_gamma, D_gamma), the angular threshold
(theta_bar, v_bar), and the regularization cutoff phi_eps with its region
geometry. All operations are pure and work in binary64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import _kernels as _k


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


def _require_finite(name: str, x: float) -> None:
    if not math.isfinite(x):
        raise DomainError(f"{name} must be finite, got {x!r}")


# ---------------------------------------------------------------------------
# parameter and state types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelParams:
    """Physical and regularization parameters of the radial system.

    p:    sub-linear exponent, 0 < p < 1
    omega: stationary frequency, omega > mass
    mass: fermion mass, > 0
    eps:  regularization strength, 0 <= eps < mass
    e1:   regularization strip width (amplitude^2 units), >= 0;
          0 means "not set" and is rejected by operations that need it
    """

    p: float
    omega: float
    mass: float
    eps: float = 0.0
    e1: float = 0.0

    def __post_init__(self):
        for name in ("p", "omega", "mass", "eps", "e1"):
            _require_finite(name, getattr(self, name))
        if not self.mass > 0:
            raise DomainError(f"mass must be positive, got {self.mass}")
        if not self.omega > self.mass:
            raise DomainError(
                f"omega must exceed mass, got omega={self.omega} mass={self.mass}")
        if not 0.0 < self.p < 1.0:
            raise DomainError(f"p must lie in (0, 1), got {self.p}")
        if not 0.0 <= self.eps < self.mass:
            raise DomainError(f"eps must lie in [0, mass), got {self.eps}")
        if self.e1 < 0.0:
            raise DomainError(f"e1 must be nonnegative, got {self.e1}")


@dataclass(frozen=True)
class PlaneState:
    """A point of the (u, v) phase plane at radius r."""

    r: float
    u: float
    v: float

    def __post_init__(self):
        for name in ("r", "u", "v"):
            _require_finite(name, getattr(self, name))
        if self.r < 0.0:
            raise DomainError(f"r must be nonnegative, got {self.r}")

    @property
    def rho(self) -> float:
        return math.hypot(self.u, self.v)

    @property
    def w(self) -> float:
        return self.v * self.v - self.u * self.u


@dataclass(frozen=True)
class LevelConstants:
    """Sandwich constants of one energy level gamma > 0.

    c_gamma: least constant with u^2 <= c_gamma * H on {H >= gamma}
    d_gamma: largest D with the disk of radius sqrt(D) inside {H < gamma}
    """

    gamma: float
    c_gamma: float
    d_gamma: float


# ---------------------------------------------------------------------------
# closed-form functions
# ---------------------------------------------------------------------------

def signed_pow(x: float, p: float) -> float:
    """sign(x) * |x|**p, exactly 0 at x = 0."""
    return _k.signed_pow(x, p)


def nonlinearity_F(s: float, p: float) -> float:
    """Sub-linear coupling F(s) = p*|s|**(p-1) for s != 0, F(0) = 0.

    Diverges as s -> 0; no clamping is applied here, consumers must guard.
    """
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must lie in (0, 1), got {p}")
    _require_finite("s", s)
    return _k.nonlin_f(s, p)


def energy_H(u: float, v: float, params: ModelParams) -> float:
    """Plane energy H(u, v); even in u and in v separately."""
    _require_finite("u", u)
    _require_finite("v", v)
    return _k.energy(u, v, params.p, params.omega, params.mass)


def energy_H_eps(u: float, v: float, params: ModelParams) -> float:
    """Tilted energy H(u, v) - (omega - eps) v^2 with eps from params."""
    _require_finite("u", u)
    _require_finite("v", v)
    return _k.energy_eps(u, v, params.p, params.omega, params.mass, params.eps)


def grad_H(u: float, v: float, params: ModelParams) -> tuple[float, float]:
    """Gradient of H; used by level-set projections."""
    return _k.grad_energy(u, v, params.p, params.omega, params.mass)


def e0(params: ModelParams) -> float:
    """Largest amplitude on the zero level: sup{v : exists u, H(u,v) = 0}.

    Equals (omega - mass)**(-1/(2(1-p))), the unique positive root of
    H(0, .) = 0. As p -> 0 it tends to 1/sqrt(omega - mass).
    """
    return (params.omega - params.mass) ** (-1.0 / (2.0 * (1.0 - params.p)))


def e_gamma(gamma: float, params: ModelParams) -> float:
    """Largest amplitude on the level gamma > 0: sup{v : exists u, H = gamma}.

    The root of H(0, v) = gamma beyond the minimum of H(0, .).
    """
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    p, om, m = params.p, params.omega, params.mass
    # H(0, v) in t = v^2: ((om-m) t - t^p)/2, minimal at t = x1
    x1 = (p / (om - m)) ** (1.0 / (1.0 - p))

    def f(t):
        return 0.5 * ((om - m) * t - t ** p) - gamma

    hi = max(4.0 * x1, 1.0)
    while f(hi) < 0:
        hi *= 4.0
    return math.sqrt(brentq(f, x1, hi, xtol=1e-300, rtol=1e-15))


def level_constants(gamma: float, params: ModelParams,
                    n_angles: int = 2048) -> LevelConstants:
    """Sandwich constants of the level gamma.

    c_gamma = max(C0, C1, 2/(omega+mass)) where C0 comes from the level
    point on the u-axis and C1 from the interior critical point of the
    level curve; both are closed forms up to one scalar root-find.
    d_gamma is found by radial bisection on an angular sweep of the
    quadrant (level sets meet each ray in a single relevant root).
    """
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    p, om, m = params.p, params.omega, params.mass

    # C0: u(0)^2 solves gamma = (U^p + (om+m) U)/2, monotone in U
    def g0(U):
        return 0.5 * (U ** p + (om + m) * U) - gamma

    hi = 1.0
    while g0(hi) < 0:
        hi *= 4.0
    lo = min(1.0, hi)
    while g0(lo) > 0 and lo > 1e-280:
        lo /= 4.0
    if g0(lo) > 0:
        # (2 gamma)^(1/p) underflows binary64; the interior candidate,
        # which blows up as gamma -> 0, dominates the vanishing C0
        c0 = 0.0
    else:
        u0_sq = brentq(g0, lo, hi, xtol=1e-300, rtol=1e-15)
        c0 = u0_sq / gamma

    # C1: the critical point sits on v^2 - u^2 = x1 with a closed form
    x1 = (p / (om - m)) ** (1.0 / (1.0 - p))
    u1_sq = (gamma + 0.5 * (1.0 - p) * x1 ** p) / om
    v1_sq = u1_sq + x1
    c1 = u1_sq / gamma
    # skip the interior candidate if it leaves the level curve (not expected
    # for gamma > 0, kept as a guard)
    if v1_sq <= 0.0 or u1_sq <= 0.0:
        c1 = 0.0

    c_gamma = max(c0, c1, 2.0 / (om + m))

    # D: smallest squared radius reaching the level over a quadrant sweep
    psi = np.linspace(0.0, 0.5 * math.pi, n_angles)
    cospsi = np.cos(psi)
    sinpsi = np.sin(psi)
    c2 = -np.cos(2.0 * psi)          # w = t * c2 for (u, v) = sqrt(t)(cos, sin)
    q = (om - m) * sinpsi ** 2 + (om + m) * cospsi ** 2

    def h_ray(t):
        w = t * c2
        return -0.5 * np.sign(w) * np.abs(w) ** p + 0.5 * q * t - gamma

    # bracket: the root lies beyond the dip of the negative-w rays
    t_lo = np.where(c2 > 0,
                    (p * np.abs(c2) ** p / q) ** (1.0 / (1.0 - p)),
                    0.0)
    t_hi = np.full_like(psi, max(4.0 * gamma / (om - m), 1.0))
    bad = h_ray(t_hi) < 0
    while np.any(bad):
        t_hi[bad] *= 4.0
        bad = h_ray(t_hi) < 0
    for _ in range(120):
        t_mid = 0.5 * (t_lo + t_hi)
        pos = h_ray(t_mid) > 0
        t_hi = np.where(pos, t_mid, t_hi)
        t_lo = np.where(pos, t_lo, t_mid)
    d_gamma = float(np.min(0.5 * (t_lo + t_hi)))

    return LevelConstants(gamma=gamma, c_gamma=float(c_gamma), d_gamma=d_gamma)


def angular_threshold(params: ModelParams) -> tuple[float, float]:
    """Angular cone constants (theta_bar, v_bar) of the zero level.

    v_bar is the position of the interior maximum of u(v) on {H = 0},
    theta_bar = atan(u(v_bar)/v_bar) in (0, pi/4). Any (u, v) with
    H >= 0 and |u| <= tan(theta_bar)|v| has |v| >= v_bar.
    """
    p, om, m = params.p, params.omega, params.mass
    s = p / (om - m)
    vbar_sq = s ** (1.0 / (1.0 - p)) + (1.0 - p) / (2.0 * om) * s ** (p / (1.0 - p))
    vbar = math.sqrt(vbar_sq)

    def f(u):
        return _k.energy(u, vbar, p, om, m)

    # H(0, vbar) < 0 < H(vbar, vbar); H is increasing in u on (0, vbar)
    u_at = brentq(f, 0.0, vbar, xtol=1e-300, rtol=1e-15)
    theta_bar = math.atan2(u_at, vbar)
    return theta_bar, vbar


# ---------------------------------------------------------------------------
# regularization regions and cutoff
# ---------------------------------------------------------------------------

def _canonical(u: float, v: float) -> tuple[float, float]:
    a, b = abs(u), abs(v)
    return (a, b) if a <= b else (b, a)


def _require_regular(params: ModelParams) -> None:
    if not params.eps > 0:
        raise DomainError("regularization requires eps > 0")
    if not params.e1 > 0:
        raise DomainError("regularization requires e1 > 0")


def in_region1(u: float, v: float, params: ModelParams) -> bool:
    """Outer regularization region, understood up to the phi symmetries."""
    _require_regular(params)
    a, b = _canonical(u, v)
    if b - a > params.e1:
        return False
    p, om, m = params.p, params.omega, params.mass
    return (_k.energy_eps(a, b, p, om, m, params.eps) >= 0.0
            and _k.energy_eps(b, a, p, om, m, params.eps) >= 0.0)


def in_region2(u: float, v: float, params: ModelParams) -> bool:
    """Inner regularization region (half strip width, half tilt)."""
    _require_regular(params)
    a, b = _canonical(u, v)
    if b - a > 0.5 * params.e1:
        return False
    p, om, m = params.p, params.omega, params.mass
    half = 0.5 * params.eps
    return (_k.energy_eps(a, b, p, om, m, half) >= 0.0
            and _k.energy_eps(b, a, p, om, m, half) >= 0.0)


def phi_eps(u: float, v: float, params: ModelParams) -> float:
    """Smooth cutoff in [0, 1]: 0 on the inner region, 1 outside the outer.

    The transition is the cubic ramp t^2 (3 - 2t) of the normalized position
    between the two region boundaries along rays orthogonal to the diagonal;
    phi(u,v) = phi(|u|,|v|) = phi(|v|,|u|) holds exactly by canonicalization.
    """
    _require_regular(params)
    if u == 0.0 and v == 0.0:
        raise DomainError("phi_eps is undefined at the origin")
    _require_finite("u", u)
    _require_finite("v", v)
    return _k.phi_cutoff(u, v, params.p, params.omega, params.mass,
                         params.eps, params.e1)
