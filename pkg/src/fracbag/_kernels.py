"""Scalar numerical kernels for the radial Dirac flow.

Everything in this module is plain float arithmetic so it can be compiled
with numba when available. The public modules (`model`, `integrator`) wrap
these kernels; tests assert the wrappers and kernels agree bit for bit.

Set FRACBAG_DISABLE_NUMBA=1 to force the pure-Python fallback.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    if os.environ.get("FRACBAG_DISABLE_NUMBA"):
        raise ImportError("numba disabled by environment")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


# integration modes
MODE_ORIGINAL = 0
MODE_REGULARIZED = 1
MODE_SWITCH = 2

# terminal codes
TERM_HIT = 0
TERM_ENERGY_NEGATIVE = 1
TERM_HORIZON = 2
TERM_WINDING_CAP = 3

# status codes
OK = 0
ERR_STIFF = 1
ERR_NAN = 2
ERR_STEP_LIMIT = 3
ERR_SINGULAR_ORIGINAL = 4
ERR_WALKER = 5

# event codes
EV_VZERO = 0
EV_HZERO = 1
EV_DIAG_ENTER = 2
EV_DIAG_EXIT = 3
EV_ORIGIN = 4
EV_MAXR = 5

# smallest plane radius the tube walker resolves before using the
# reflection shortcut; keeps |w|**(p-1) far from overflow
RHO_FLOOR = 1e-120

MAX_EVENTS = 400_000
MAX_TRANSITS = 100_000
MAX_WZ = 400_000
MAX_WALK_VZ = 8192
WALK_STEPS = 400_000


# ---------------------------------------------------------------------------
# closed-form energy landscape
# ---------------------------------------------------------------------------

@njit(cache=True)
def signed_pow(x, p):
    """sign(x)*|x|**p with the value 0 at x = 0."""
    if x == 0.0:
        return 0.0
    if x > 0.0:
        return x ** p
    return -((-x) ** p)


@njit(cache=True)
def nonlin_f(s, p):
    """Sub-linear coupling p*|s|**(p-1); exactly 0 at s = 0."""
    if s == 0.0:
        return 0.0
    return p * abs(s) ** (p - 1.0)


@njit(cache=True)
def energy(u, v, p, om, m):
    w = v * v - u * u
    return -0.5 * signed_pow(w, p) + 0.5 * (om - m) * v * v + 0.5 * (om + m) * u * u


@njit(cache=True)
def energy_eps(u, v, p, om, m, eps):
    return energy(u, v, p, om, m) - (om - eps) * v * v


@njit(cache=True)
def grad_energy(u, v, p, om, m):
    F = nonlin_f(v * v - u * u, p)
    return u * (F + om + m), v * (om - m - F)


@njit(cache=True)
def rhs_autonomous(u, v, p, om, m):
    """Diagonal-neighbourhood system: the 2u/r term dropped."""
    F = nonlin_f(v * v - u * u, p)
    return v * (om - m - F), -u * (F + om + m)


# ---------------------------------------------------------------------------
# regularization cutoff
# ---------------------------------------------------------------------------

@njit(cache=True)
def ray_width(mu, p, om, m, eps_eff, cap):
    """Half-width of {H_eps >= 0} along the ray (mu-d, mu+d), capped.

    Returns the first d in (0, cap] where H_eps crosses below zero, or cap
    if no crossing is found on a 32-point scan.
    """
    d_prev = 0.0
    for j in range(1, 33):
        d = cap * j / 32.0
        fd = energy_eps(mu - d, mu + d, p, om, m, eps_eff)
        if fd < 0.0:
            lo, hi = d_prev, d
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                if energy_eps(mu - mid, mu + mid, p, om, m, eps_eff) < 0.0:
                    hi = mid
                else:
                    lo = mid
            return 0.5 * (lo + hi)
        d_prev = d
    return cap


@njit(cache=True)
def phi_cutoff(u, v, p, om, m, eps, e1):
    """Smooth cutoff: 0 on the inner region, 1 outside the outer one.

    Evaluated at (min|.|, max|.|) so the four symmetry identities hold
    exactly. Caller must not pass (0, 0).
    """
    a = abs(u)
    b = abs(v)
    if a > b:
        a, b = b, a
    if b - a > e1:
        return 1.0
    # the swapped energy condition holds automatically for a <= b
    if energy_eps(a, b, p, om, m, eps) < 0.0:
        return 1.0
    d = 0.5 * (b - a)
    mu = 0.5 * (a + b)
    d1 = ray_width(mu, p, om, m, eps, 0.5 * e1)
    d2 = ray_width(mu, p, om, m, 0.5 * eps, 0.25 * e1)
    if d <= d2:
        return 0.0
    if d1 <= d2:
        return 1.0
    t = (d - d2) / (d1 - d2)
    if t >= 1.0:
        return 1.0
    return t * t * (3.0 - 2.0 * t)


@njit(cache=True)
def rhs_full(r, u, v, p, om, m, eps, e1, mode):
    """Radial system; `mode` selects the 2u/r factor (1, phi, or 1)."""
    w = v * v - u * u
    F = nonlin_f(w, p)
    phi = 1.0
    if mode == MODE_REGULARIZED:
        if u != 0.0 or v != 0.0:
            phi = phi_cutoff(u, v, p, om, m, eps, e1)
    du = -2.0 * u * phi / r + v * (om - m - F)
    dv = -u * (F + om + m)
    return du, dv


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4) step and dense output
# ---------------------------------------------------------------------------

@njit(cache=True)
def dopri_step(r, u, v, du, dv, h, p, om, m, eps, e1, mode):
    """One embedded 5(4) step; returns (u1, v1, du1, dv1, err_u, err_v)."""
    k1u, k1v = du, dv

    ru = u + h * 0.2 * k1u
    rv = v + h * 0.2 * k1v
    k2u, k2v = rhs_full(r + 0.2 * h, ru, rv, p, om, m, eps, e1, mode)

    ru = u + h * (3.0 / 40.0 * k1u + 9.0 / 40.0 * k2u)
    rv = v + h * (3.0 / 40.0 * k1v + 9.0 / 40.0 * k2v)
    k3u, k3v = rhs_full(r + 0.3 * h, ru, rv, p, om, m, eps, e1, mode)

    ru = u + h * (44.0 / 45.0 * k1u - 56.0 / 15.0 * k2u + 32.0 / 9.0 * k3u)
    rv = v + h * (44.0 / 45.0 * k1v - 56.0 / 15.0 * k2v + 32.0 / 9.0 * k3v)
    k4u, k4v = rhs_full(r + 0.8 * h, ru, rv, p, om, m, eps, e1, mode)

    ru = u + h * (19372.0 / 6561.0 * k1u - 25360.0 / 2187.0 * k2u
                  + 64448.0 / 6561.0 * k3u - 212.0 / 729.0 * k4u)
    rv = v + h * (19372.0 / 6561.0 * k1v - 25360.0 / 2187.0 * k2v
                  + 64448.0 / 6561.0 * k3v - 212.0 / 729.0 * k4v)
    k5u, k5v = rhs_full(r + 8.0 / 9.0 * h, ru, rv, p, om, m, eps, e1, mode)

    ru = u + h * (9017.0 / 3168.0 * k1u - 355.0 / 33.0 * k2u
                  + 46732.0 / 5247.0 * k3u + 49.0 / 176.0 * k4u
                  - 5103.0 / 18656.0 * k5u)
    rv = v + h * (9017.0 / 3168.0 * k1v - 355.0 / 33.0 * k2v
                  + 46732.0 / 5247.0 * k3v + 49.0 / 176.0 * k4v
                  - 5103.0 / 18656.0 * k5v)
    k6u, k6v = rhs_full(r + h, ru, rv, p, om, m, eps, e1, mode)

    u1 = u + h * (35.0 / 384.0 * k1u + 500.0 / 1113.0 * k3u + 125.0 / 192.0 * k4u
                  - 2187.0 / 6784.0 * k5u + 11.0 / 84.0 * k6u)
    v1 = v + h * (35.0 / 384.0 * k1v + 500.0 / 1113.0 * k3v + 125.0 / 192.0 * k4v
                  - 2187.0 / 6784.0 * k5v + 11.0 / 84.0 * k6v)
    du1, dv1 = rhs_full(r + h, u1, v1, p, om, m, eps, e1, mode)

    # difference between the 5th and 4th order weights (FSAL form)
    eu = h * (71.0 / 57600.0 * k1u - 71.0 / 16695.0 * k3u + 71.0 / 1920.0 * k4u
              - 17253.0 / 339200.0 * k5u + 22.0 / 525.0 * k6u - 1.0 / 40.0 * du1)
    ev = h * (71.0 / 57600.0 * k1v - 71.0 / 16695.0 * k3v + 71.0 / 1920.0 * k4v
              - 17253.0 / 339200.0 * k5v + 22.0 / 525.0 * k6v - 1.0 / 40.0 * dv1)
    return u1, v1, du1, dv1, eu, ev


@njit(cache=True)
def hermite(y0, y1, f0, f1, h, s):
    """Cubic Hermite dense output on one step, s in [0, 1]."""
    s2 = s * s
    s3 = s2 * s
    return ((2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * h * f0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * h * f1)


@njit(cache=True)
def _err_norm(u, v, u1, v1, eu, ev, tol_rel, tol_abs):
    su = tol_abs + tol_rel * max(abs(u), abs(u1))
    sv = tol_abs + tol_rel * max(abs(v), abs(v1))
    return math.sqrt(0.5 * ((eu / su) ** 2 + (ev / sv) ** 2))


@njit(cache=True)
def _tube_gap(u, v, delta_base):
    """|v^2-u^2| minus the local tube half-width; negative inside."""
    w = v * v - u * u
    rho2 = u * u + v * v
    d = delta_base * (rho2 if rho2 > 1.0 else 1.0)
    return abs(w) - d


# ---------------------------------------------------------------------------
# level-curve walker (diagonal tube)
# ---------------------------------------------------------------------------

@njit(cache=True)
def project_level(u, v, h0, p, om, m):
    """Newton projection onto {H = h0} along grad H. Returns (u, v, ok)."""
    for _ in range(12):
        hh = energy(u, v, p, om, m) - h0
        if abs(hh) <= 1e-14 * (1.0 + abs(h0)):
            return u, v, True
        gu, gv = grad_energy(u, v, p, om, m)
        g2 = gu * gu + gv * gv
        if g2 == 0.0:
            return u, v, False
        t = hh / g2
        u -= t * gu
        v -= t * gv
    hh = energy(u, v, p, om, m) - h0
    return u, v, abs(hh) <= 1e-11 * (1.0 + abs(h0))


@njit(cache=True)
def _unit_tangent(u, v, p, om, m):
    du, dv = rhs_autonomous(u, v, p, om, m)
    n = math.hypot(du, dv)
    if n == 0.0:
        return 0.0, 0.0, 0.0
    return du / n, dv / n, n


@njit(cache=True)
def _angle_inc(u0, v0, u1, v1):
    """Angle swept from (u0,v0) to (u1,v1) in the winding sense."""
    cross = u1 * v0 - v1 * u0
    dot = u0 * u1 + v0 * v1
    return math.atan2(cross, dot)


@njit(cache=True)
def walk_tube(r_in, u_in, v_in, th_in, p, om, m,
              delta_out, tol_origin, hit_energy,
              smp_r, smp_u, smp_v, smp_du, smp_dv, smp_th, smp_tube,
              n_smp, stride, ctr,
              wz_r, n_wz, vz_r, vz_u, max_steps):
    """Trace {H = H(entry)} through the diagonal tube until |v^2-u^2|
    exceeds delta_out, the origin ball is hit, or the walk fails.

    The autonomous flow is followed with arclength predictor steps corrected
    by Newton projection along grad H, so the level is conserved to
    rounding. Radius advances by the Simpson rule on dr/ds = 1/|f|.
    v-zero passes land in (vz_r, vz_u), diagonal touches in wz_r.

    Returns (status, r, u, v, theta, n_smp, ctr, n_wz, n_vz,
             min_rho, log10_min_rho).
    status: 0 exit at the tube boundary, 1 origin hit, < 0 failure.
    """
    h0 = energy(u_in, v_in, p, om, m)
    r = r_in
    u = u_in
    v = v_in
    th = th_in
    n_vz = 0
    min_rho = math.hypot(u, v)
    log_min = math.log10(min_rho) if min_rho > 0 else -400.0

    tu, tv, fn = _unit_tangent(u, v, p, om, m)
    if fn == 0.0:
        return (-1, r, u, v, th, n_smp, ctr, n_wz, n_vz, min_rho, log_min)

    rho = math.hypot(u, v)
    ds = 0.01 * rho

    for _ in range(max_steps):
        accepted = False
        un = u
        vn = v
        for _try in range(80):
            up = u + ds * tu
            vp = v + ds * tv
            un, vn, ok = project_level(up, vp, h0, p, om, m)
            if ok:
                tun, tvn, fnn = _unit_tangent(un, vn, p, om, m)
                if fnn > 0.0:
                    turn = abs(_angle_inc(tun, tvn, tu, tv))
                    rho_n = math.hypot(un, vn)
                    if turn <= 0.25 and rho_n > 0.0 and \
                            abs(math.log(max(rho_n, 1e-280) / rho)) <= 0.35:
                        accepted = True
                        break
            ds *= 0.5
            if ds < 1e-280:
                break
        if not accepted:
            return (-2, r, u, v, th, n_smp, ctr, n_wz, n_vz, min_rho, log_min)

        # radius advance: Simpson on 1/|f| along the chord
        um, vm, okm = project_level(0.5 * (u + un), 0.5 * (v + vn), h0, p, om, m)
        if not okm:
            um, vm = 0.5 * (u + un), 0.5 * (v + vn)
        _t1, _t2, fm = _unit_tangent(um, vm, p, om, m)
        _t3, _t4, fn1 = _unit_tangent(un, vn, p, om, m)
        seg = math.hypot(un - u, vn - v)
        dr = 0.0
        if fm > 0.0 and fn > 0.0 and fn1 > 0.0:
            dr = seg * (1.0 / fn + 4.0 / fm + 1.0 / fn1) / 6.0
        r_new = r + dr
        rho_new = math.hypot(un, vn)
        w_prev = v * v - u * u
        w_new = vn * vn - un * un

        # v-zero pass inside the tube (a node of the solution)
        if (v > 0.0 and vn < 0.0) or (v < 0.0 and vn > 0.0):
            a_, b_ = 0.0, 1.0
            uz = un
            for _ in range(80):
                smid = 0.5 * (a_ + b_)
                uu, vv, okz = project_level(u + smid * (un - u),
                                            v + smid * (vn - v), h0, p, om, m)
                if not okz:
                    break
                if (v > 0.0) == (vv > 0.0):
                    a_ = smid
                else:
                    b_ = smid
                uz = uu
            rz = r + dr * 0.5 * (a_ + b_)
            rho_z = abs(uz)
            if rho_z < min_rho:
                min_rho = rho_z
                if rho_z > 0.0:
                    log_min = math.log10(rho_z)
            if rho_z <= tol_origin and h0 <= hit_energy:
                return (1, rz, 0.0, 0.0, th, n_smp, ctr, n_wz, n_vz, 0.0, log_min)
            if n_vz < vz_r.shape[0]:
                vz_r[n_vz] = rz
                vz_u[n_vz] = uz
                n_vz += 1

        # diagonal touch (sign flip of v^2 - u^2)
        if (w_prev > 0.0 and w_new < 0.0) or (w_prev < 0.0 and w_new > 0.0):
            if n_wz < wz_r.shape[0]:
                wz_r[n_wz] = r + 0.5 * dr
                n_wz += 1

        th += _angle_inc(u, v, un, vn)
        u, v = un, vn
        tu, tv, fn = _unit_tangent(u, v, p, om, m)
        r = r_new
        rho = rho_new

        if rho < min_rho:
            min_rho = rho
            if rho > 0.0:
                log_min = math.log10(rho)

        if rho <= tol_origin and h0 <= hit_energy:
            return (1, r, 0.0, 0.0, th, n_smp, ctr, n_wz, n_vz, 0.0, log_min)

        # reflection shortcut below the representable floor: the remaining
        # sub-floor arc advances r by O(rho^2) and returns through the mirror
        if rho < RHO_FLOOR:
            if h0 <= hit_energy:
                return (1, r, 0.0, 0.0, th, n_smp, ctr, n_wz, n_vz, 0.0, log_min)
            if abs(v) <= abs(u):
                # dive bottom: v crosses zero at u* = (2 h0)^(1/(2p))
                if h0 > 0.0:
                    lmin = math.log10(2.0 * h0) / (2.0 * p)
                    if lmin < log_min:
                        log_min = lmin
                    ustar = 10.0 ** lmin if lmin > -307.0 else 0.0
                else:
                    ustar = 0.0
                if ustar < min_rho:
                    min_rho = ustar
                if ustar <= tol_origin and h0 <= hit_energy:
                    return (1, r, 0.0, 0.0, th, n_smp, ctr, n_wz, n_vz, 0.0, log_min)
                if n_vz < vz_r.shape[0]:
                    vz_r[n_vz] = r
                    vz_u[n_vz] = ustar
                    n_vz += 1
                th += abs(_angle_inc(u, v, u, -v))
                v = -v
            else:
                th += abs(_angle_inc(u, v, -u, v))
                u = -u
            tu, tv, fn = _unit_tangent(u, v, p, om, m)
            continue

        ctr += 1
        if ctr % stride == 0 and n_smp < smp_r.shape[0]:
            fu, fv = rhs_autonomous(u, v, p, om, m)
            smp_r[n_smp] = r
            smp_u[n_smp] = u
            smp_v[n_smp] = v
            smp_du[n_smp] = fu
            smp_dv[n_smp] = fv
            smp_th[n_smp] = th
            smp_tube[n_smp] = 1
            n_smp += 1

        if abs(w_new) >= delta_out:
            return (0, r, u, v, th, n_smp, ctr, n_wz, n_vz, min_rho, log_min)

        ds = min(ds * 1.3, 0.03 * max(rho, 1e-280))

    return (-3, r, u, v, th, n_smp, ctr, n_wz, n_vz, min_rho, log_min)


# ---------------------------------------------------------------------------
# event-driven adaptive integration
# ---------------------------------------------------------------------------

@njit(cache=True)
def integrate_core(x, p, om, m, eps, e1, mode,
                   h_init, tol_rel, tol_abs, delta_base, tol_origin,
                   r_max, hit_energy, h_neg_extra, stop_windings, fixed_h,
                   max_samples, max_steps):
    """Adaptive 5(4) integration of the radial flow from (0, x).

    Sentinels: h_neg_extra <= 0 disables the post-H<0 stop, stop_windings
    <= 0 disables the winding cap, fixed_h <= 0 selects adaptive stepping.
    Returns sample/event/transit arrays plus scalar summaries; see
    `integrator.integrate` for the decoding.
    """
    smp_r = np.empty(max_samples)
    smp_u = np.empty(max_samples)
    smp_v = np.empty(max_samples)
    smp_du = np.empty(max_samples)
    smp_dv = np.empty(max_samples)
    smp_th = np.empty(max_samples)
    smp_tube = np.zeros(max_samples, dtype=np.int8)
    n_smp = 0
    stride = 1
    ctr = 0

    ev_kind = np.empty(MAX_EVENTS, dtype=np.int8)
    ev_r = np.empty(MAX_EVENTS)
    ev_u = np.empty(MAX_EVENTS)
    ev_v = np.empty(MAX_EVENTS)
    n_ev = 0

    tr_rin = np.empty(MAX_TRANSITS)
    tr_rout = np.empty(MAX_TRANSITS)
    tr_hin = np.empty(MAX_TRANSITS)
    tr_hout = np.empty(MAX_TRANSITS)
    tr_win = np.empty(MAX_TRANSITS)
    tr_wout = np.empty(MAX_TRANSITS)
    tr_nodes = np.empty(MAX_TRANSITS, dtype=np.int64)
    tr_wz0 = np.empty(MAX_TRANSITS, dtype=np.int64)
    tr_wz1 = np.empty(MAX_TRANSITS, dtype=np.int64)
    n_tr = 0

    wz_r = np.empty(MAX_WZ)
    n_wz = 0

    vz_r = np.empty(MAX_WALK_VZ)
    vz_u = np.empty(MAX_WALK_VZ)

    status = OK
    terminal = TERM_HORIZON
    windings = 0
    hit = False

    # series launch at r = 0: u = a r + O(r^3), v = x + b r^2 + O(r^4)
    Fx = nonlin_f(x * x, p)
    a_lin = x * (om - m - Fx) / 3.0
    b_quad = 0.5 * a_lin * (-Fx - (m + om))
    h0 = h_init
    for _ in range(200):
        uh = a_lin * h0
        vh = x + b_quad * h0 * h0
        wh = vh * vh - uh * uh
        if wh > 0.0 and abs(nonlin_f(wh, p) - Fx) <= 0.01 * Fx:
            break
        h0 *= 0.5

    H_init = energy(0.0, x, p, om, m)
    min_rho = x
    log_min = math.log10(x) if x > 0 else -400.0

    smp_r[0] = 0.0
    smp_u[0] = 0.0
    smp_v[0] = x
    smp_du[0] = a_lin
    smp_dv[0] = 0.0
    smp_th[0] = 0.0
    n_smp = 1

    r = h0
    u = a_lin * h0
    v = x + b_quad * h0 * h0
    theta = math.atan2(u, v)

    stop_r = r_max
    h_neg_seen = H_init <= 0.0
    if h_neg_seen and h_neg_extra > 0.0 and h_neg_extra < r_max:
        stop_r = h_neg_extra

    du, dv = rhs_full(r, u, v, p, om, m, eps, e1, mode)

    ctr = 1
    smp_r[1] = r
    smp_u[1] = u
    smp_v[1] = v
    smp_du[1] = du
    smp_dv[1] = dv
    smp_th[1] = theta
    n_smp = 2

    h = fixed_h if fixed_h > 0.0 else 10.0 * h0
    err_prev = 1e-2
    term_r = r
    n_scan = 8

    step = 0
    while step < max_steps:
        step += 1
        if r >= stop_r * (1.0 - 1e-14):
            break
        if n_smp > max_samples - 2000:
            keep = n_smp // 2
            for i in range(keep):
                j = 2 * i
                smp_r[i] = smp_r[j]
                smp_u[i] = smp_u[j]
                smp_v[i] = smp_v[j]
                smp_du[i] = smp_du[j]
                smp_dv[i] = smp_dv[j]
                smp_th[i] = smp_th[j]
                smp_tube[i] = smp_tube[j]
            n_smp = keep
            stride *= 2

        # cap the step: below a quarter turn, and never past the horizon
        rho2 = u * u + v * v
        if rho2 > 0.0 and fixed_h <= 0.0:
            th_rate = abs(du * v - dv * u) / rho2
            if th_rate > 0.0 and h > 0.5 / th_rate:
                h = 0.5 / th_rate
        if r + h > stop_r:
            h = stop_r - r
        if h < 1e-15 * r:
            status = ERR_STIFF
            break

        u1, v1, du1, dv1, eu, ev_ = dopri_step(r, u, v, du, dv, h,
                                               p, om, m, eps, e1, mode)
        if not (math.isfinite(u1) and math.isfinite(v1)):
            status = ERR_NAN
            break

        if fixed_h <= 0.0:
            err = _err_norm(u, v, u1, v1, eu, ev_, tol_rel, tol_abs)
            if err > 1.0:
                h *= max(0.1, 0.9 * err ** -0.2)
                continue
        else:
            err = 0.5

        # ------------------------------------------------------ event scan
        trunc_sig = 2.0
        trunc_type = -1

        sig_a = 0.0
        ua = u
        va = v
        Ha = energy(u, v, p, om, m)
        ga = _tube_gap(u, v, delta_base)
        wa = va * va - ua * ua
        for j in range(1, n_scan + 1):
            sig_b = j / n_scan
            ub = hermite(u, u1, du, du1, h, sig_b)
            vb = hermite(v, v1, dv, dv1, h, sig_b)
            Hb = energy(ub, vb, p, om, m)
            gb = _tube_gap(ub, vb, delta_base)
            wb = vb * vb - ub * ub

            # tube entry first: gap crossing, or w flip hidden in the scan
            sig_t = 2.0
            entered = ga > 0.0 and gb <= 0.0
            flipped = (wa > 0.0 and wb < 0.0) or (wa < 0.0 and wb > 0.0)
            if entered or (flipped and ga > 0.0):
                hi = sig_b
                if not entered:
                    lo2, hi2 = sig_a, sig_b
                    for _ in range(90):
                        mid = 0.5 * (lo2 + hi2)
                        um = hermite(u, u1, du, du1, h, mid)
                        vm = hermite(v, v1, dv, dv1, h, mid)
                        wm = vm * vm - um * um
                        if (wa > 0.0) == (wm > 0.0):
                            lo2 = mid
                        else:
                            hi2 = mid
                    hi = 0.5 * (lo2 + hi2)
                lo = sig_a
                for _ in range(90):
                    mid = 0.5 * (lo + hi)
                    um = hermite(u, u1, du, du1, h, mid)
                    vm = hermite(v, v1, dv, dv1, h, mid)
                    if _tube_gap(um, vm, delta_base) > 0.0:
                        lo = mid
                    else:
                        hi = mid
                sig_t = 0.5 * (lo + hi)

            # v-zero in this scan cell, before any tube entry
            if (va > 0.0 and vb < 0.0) or (va < 0.0 and vb > 0.0):
                lo, hi = sig_a, sig_b
                for _ in range(90):
                    mid = 0.5 * (lo + hi)
                    vm = hermite(v, v1, dv, dv1, h, mid)
                    if (va > 0.0) == (vm > 0.0):
                        lo = mid
                    else:
                        hi = mid
                sz = 0.5 * (lo + hi)
                if sz < sig_t:
                    rz = r + h * sz
                    uz = hermite(u, u1, du, du1, h, sz)
                    if n_ev < MAX_EVENTS:
                        ev_kind[n_ev] = EV_VZERO
                        ev_r[n_ev] = rz
                        ev_u[n_ev] = uz
                        ev_v[n_ev] = 0.0
                        n_ev += 1
                    if abs(uz) < min_rho:
                        min_rho = abs(uz)
                        if min_rho > 0.0:
                            log_min = math.log10(min_rho)
                    windings += 1
                    if stop_windings > 0 and windings >= stop_windings:
                        trunc_sig = sz
                        trunc_type = 10
                        break

            # H crossing zero downward, before any tube entry
            if Ha > 0.0 and Hb <= 0.0:
                lo, hi = sig_a, sig_b
                for _ in range(90):
                    mid = 0.5 * (lo + hi)
                    um = hermite(u, u1, du, du1, h, mid)
                    vm = hermite(v, v1, dv, dv1, h, mid)
                    if energy(um, vm, p, om, m) > 0.0:
                        lo = mid
                    else:
                        hi = mid
                sz = 0.5 * (lo + hi)
                if sz < sig_t:
                    rz = r + h * sz
                    if n_ev < MAX_EVENTS:
                        ev_kind[n_ev] = EV_HZERO
                        ev_r[n_ev] = rz
                        ev_u[n_ev] = hermite(u, u1, du, du1, h, sz)
                        ev_v[n_ev] = hermite(v, v1, dv, dv1, h, sz)
                        n_ev += 1
                    if not h_neg_seen:
                        h_neg_seen = True
                        if h_neg_extra > 0.0 and rz + h_neg_extra < stop_r:
                            stop_r = rz + h_neg_extra

            if sig_t <= 1.0:
                trunc_sig = sig_t
                trunc_type = 11
                break

            # origin ball with exhausted energy (stepper-side fallback)
            rho_b = math.hypot(ub, vb)
            if rho_b <= tol_origin and Hb <= hit_energy:
                trunc_sig = sig_b
                trunc_type = 12
                break

            sig_a = sig_b
            ua = ub
            va = vb
            Ha = Hb
            ga = gb
            wa = wb

        # ------------------------------------------------- apply the step
        if trunc_type < 0:
            theta += _angle_inc(u, v, u1, v1)
            r += h
            u, v, du, dv = u1, v1, du1, dv1
        else:
            sz = trunc_sig
            un = hermite(u, u1, du, du1, h, sz)
            vn = hermite(v, v1, dv, dv1, h, sz)
            theta += _angle_inc(u, v, un, vn)
            r += h * sz
            u, v = un, vn
            du, dv = rhs_full(r, u, v, p, om, m, eps, e1, mode)

        rho = math.hypot(u, v)
        if rho < min_rho:
            min_rho = rho
            if rho > 0.0:
                log_min = math.log10(rho)

        ctr += 1
        if ctr % stride == 0 and n_smp < max_samples:
            smp_r[n_smp] = r
            smp_u[n_smp] = u
            smp_v[n_smp] = v
            smp_du[n_smp] = du
            smp_dv[n_smp] = dv
            smp_th[n_smp] = theta
            smp_tube[n_smp] = 0
            n_smp += 1

        if trunc_type == 10:
            terminal = TERM_WINDING_CAP
            term_r = r
            break

        if trunc_type == 12:
            if n_ev < MAX_EVENTS:
                ev_kind[n_ev] = EV_ORIGIN
                ev_r[n_ev] = r
                ev_u[n_ev] = u
                ev_v[n_ev] = v
                n_ev += 1
            terminal = TERM_HIT
            term_r = r
            hit = True
            break

        if trunc_type == 11:
            if mode == MODE_ORIGINAL:
                status = ERR_SINGULAR_ORIGINAL
                break
            rho2 = u * u + v * v
            delta_eff = delta_base * (rho2 if rho2 > 1.0 else 1.0)
            r_entry = r
            H_in = energy(u, v, p, om, m)
            w_in = v * v - u * u
            if n_ev < MAX_EVENTS:
                ev_kind[n_ev] = EV_DIAG_ENTER
                ev_r[n_ev] = r
                ev_u[n_ev] = u
                ev_v[n_ev] = v
                n_ev += 1
            wz_lo = n_wz
            (wstat, r_w, u_w, v_w, theta, n_smp, ctr, n_wz, n_vz,
             mr_w, lmr_w) = walk_tube(
                r, u, v, theta, p, om, m,
                2.0 * delta_eff, tol_origin, hit_energy,
                smp_r, smp_u, smp_v, smp_du, smp_dv, smp_th, smp_tube,
                n_smp, stride, ctr, wz_r, n_wz, vz_r, vz_u, WALK_STEPS)
            if mr_w < min_rho:
                min_rho = mr_w
            if lmr_w < log_min:
                log_min = lmr_w
            for q in range(n_vz):
                if n_ev < MAX_EVENTS:
                    ev_kind[n_ev] = EV_VZERO
                    ev_r[n_ev] = vz_r[q]
                    ev_u[n_ev] = vz_u[q]
                    ev_v[n_ev] = 0.0
                    n_ev += 1
                windings += 1
            if wstat == 1:
                if n_ev < MAX_EVENTS:
                    ev_kind[n_ev] = EV_ORIGIN
                    ev_r[n_ev] = r_w
                    ev_u[n_ev] = 0.0
                    ev_v[n_ev] = 0.0
                    n_ev += 1
                terminal = TERM_HIT
                term_r = r_w
                r = r_w
                u, v = 0.0, 0.0
                hit = True
                break
            if wstat < 0:
                status = ERR_WALKER
                r, u, v = r_w, u_w, v_w
                break
            r, u, v = r_w, u_w, v_w
            du, dv = rhs_full(r, u, v, p, om, m, eps, e1, mode)
            if n_ev < MAX_EVENTS:
                ev_kind[n_ev] = EV_DIAG_EXIT
                ev_r[n_ev] = r
                ev_u[n_ev] = u
                ev_v[n_ev] = v
                n_ev += 1
            if n_tr < MAX_TRANSITS:
                tr_rin[n_tr] = r_entry
                tr_rout[n_tr] = r
                tr_hin[n_tr] = H_in
                tr_hout[n_tr] = energy(u, v, p, om, m)
                tr_win[n_tr] = w_in
                tr_wout[n_tr] = v * v - u * u
                tr_nodes[n_tr] = n_vz
                tr_wz0[n_tr] = wz_lo
                tr_wz1[n_tr] = n_wz
                n_tr += 1
            ctr += 1
            if ctr % stride == 0 and n_smp < max_samples:
                smp_r[n_smp] = r
                smp_u[n_smp] = u
                smp_v[n_smp] = v
                smp_du[n_smp] = du
                smp_dv[n_smp] = dv
                smp_th[n_smp] = theta
                smp_tube[n_smp] = 0
                n_smp += 1
            if stop_windings > 0 and windings >= stop_windings:
                terminal = TERM_WINDING_CAP
                term_r = r
                break
            # restart step size against the tube-edge stiffness
            if fixed_h <= 0.0:
                wrate = abs(2.0 * (v * dv - u * du))
                if wrate > 0.0:
                    h_new = 0.1 * delta_eff / wrate
                    if h_new < h:
                        h = h_new
            continue

        if fixed_h <= 0.0:
            if err < 1e-30:
                fac = 5.0
            else:
                fac = 0.9 * err ** -0.14 * err_prev ** 0.08
                if fac > 5.0:
                    fac = 5.0
                elif fac < 0.2:
                    fac = 0.2
            err_prev = max(err, 1e-10)
            h *= fac

    if step >= max_steps:
        status = ERR_STEP_LIMIT

    if status == OK and not hit and terminal != TERM_WINDING_CAP:
        term_r = r
        if n_ev < MAX_EVENTS:
            ev_kind[n_ev] = EV_MAXR
            ev_r[n_ev] = r
            ev_u[n_ev] = u
            ev_v[n_ev] = v
            n_ev += 1
        terminal = (TERM_ENERGY_NEGATIVE
                    if energy(u, v, p, om, m) < 0.0 else TERM_HORIZON)
    elif status != OK:
        term_r = r

    return (smp_r[:n_smp].copy(), smp_u[:n_smp].copy(), smp_v[:n_smp].copy(),
            smp_du[:n_smp].copy(), smp_dv[:n_smp].copy(),
            smp_th[:n_smp].copy(), smp_tube[:n_smp].copy(),
            ev_kind[:n_ev].copy(), ev_r[:n_ev].copy(),
            ev_u[:n_ev].copy(), ev_v[:n_ev].copy(),
            tr_rin[:n_tr].copy(), tr_rout[:n_tr].copy(),
            tr_hin[:n_tr].copy(), tr_hout[:n_tr].copy(),
            tr_win[:n_tr].copy(), tr_wout[:n_tr].copy(),
            tr_nodes[:n_tr].copy(), tr_wz0[:n_tr].copy(), tr_wz1[:n_tr].copy(),
            wz_r[:n_wz].copy(),
            terminal, term_r, windings, min_rho, log_min, hit,
            status, u, v, theta)
