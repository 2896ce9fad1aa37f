"""Pure NumPy implementation of the fused quadrature kernels.

The compiled backend (``_kernels_cy``) mirrors every public function here
with an identical signature; ``_backend`` picks one at import time.  Model
densities that the compiled code can represent are passed as an integer kind
plus up to three parameters:

    kind 0  normal      f(t) = exp(-t / 2)
    kind 1  student     f(t) = (1 + t / d0) ** (-d1)
    kind 2  exp_power   f(t) = exp(-d0 * t ** d1)
    kind 3  kotz        f(t) = t ** d0 * exp(-d1 * t)

Losses are the two-sided power family rho(t) = c1 |t|^p on t < 0 and
c2 t^p on t >= 0.  Custom densities and losses go through the ``*_generic``
entry points, which exist only in this module.
"""

import math

import numpy as np
from scipy import special

from . import _gk

_INF = math.inf


def _fvals(kind, d0, d1, d2, t):
    t = np.asarray(t, dtype=float)
    with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
        if kind == 0:
            return np.exp(-0.5 * t)
        if kind == 1:
            return (1.0 + t / d0) ** (-d1)
        if kind == 2:
            return np.exp(-d0 * np.power(t, d1))
        if kind == 3:
            return np.power(t, d0) * np.exp(-d1 * t)
    raise ValueError(f"unknown density kind {kind}")


def _rho(p, c1, c2, t):
    t = np.asarray(t, dtype=float)
    a = np.abs(t)
    with np.errstate(over="ignore", under="ignore"):
        pw = a**p
    return np.where(t < 0.0, c1 * pw, c2 * pw)


def _rho_prime(p, c1, c2, t):
    """Derivative of the two-sided power loss; subgradient midpoint at 0 for p = 1."""
    t = np.asarray(t, dtype=float)
    a = np.abs(t)
    with np.errstate(over="ignore", under="ignore", divide="ignore"):
        pw = a ** (p - 1.0)
    out = np.where(t < 0.0, -c1 * p * pw, c2 * p * pw)
    if p == 1.0:
        out = np.where(t == 0.0, 0.5 * (c2 - c1), out)
    else:
        out = np.where(t == 0.0, 0.0, out)
    return out


def _rho_prime_abs(p, c1, c2, t):
    return np.abs(_rho_prime(p, c1, c2, t))


def _elementwise(fn):
    """Adapt a scalar outer integrand to the vectorized quadrature engine."""

    def wrapped(x):
        x = np.asarray(x, dtype=float)
        return np.array([fn(float(t)) for t in x.ravel()]).reshape(x.shape)

    return wrapped


def _pow_inf(base, exponent):
    """base ** exponent overflowing to inf instead of raising."""
    with np.errstate(over="ignore"):
        return float(np.power(base, exponent))


# ---------------------------------------------------------------------------
# radial moment: integral of r**power * f(r**2) over (0, inf)


def radial_moment(kind, d0, d1, d2, power, rel, abs_tol, max_sub):
    def fv(r):
        return np.power(r, power) * _fvals(kind, d0, d1, d2, r * r)

    return _gk.integrate(fv, 0.0, _INF, rel, abs_tol, max_sub, breakpoints=(1.0,))


def radial_moment_generic(fgen, power, rel, abs_tol, max_sub):
    def fv(r):
        return np.power(r, power) * fgen(r * r)

    return _gk.integrate(fv, 0.0, _INF, rel, abs_tol, max_sub, breakpoints=(1.0,))


# ---------------------------------------------------------------------------
# posterior gradient, shared kernel for the shrink equations and the risk
# difference kernel:
#
#   integral over v in (0, inf) of  v**m * I(v)
#   I(v) = integral over u in (-inf, v*y - lam) of rho'(u + cz*v) f(u*u + v*v)
#
# y may be +inf (then the inner integral runs over the whole line).


def _pg2d(fdens, rho_prime, m, cz, y, lam, rel, abs_tol, max_sub):
    inner_rel = rel / 10.0
    inner_abs = abs_tol / 10.0

    def outer(v):
        if v <= 0.0:
            return 0.0
        # substitute u = sc * w: keeps the inner mass at O(1) width for every
        # v (heavy-tailed densities spread over |u| ~ v).  The inner absolute
        # target shrinks with the outer amplification AND an integrable
        # 1/(1+v^2) weight, so the summed inner errors stay below abs_tol
        # even over the infinite outer range
        sc = max(v, 1.0)
        v2 = v * v
        upper = _INF if math.isinf(y) else (v * y - lam) / sc
        kink = -cz * v / sc

        def fw(w):
            u = sc * w
            # sc * (w - kink) equals u + cz * v but stays exact near the
            # kink, where the direct form loses all significant digits
            return rho_prime(sc * (w - kink)) * fdens(u * u + v2)

        amp = _pow_inf(v, m) * sc
        bps = (kink, -3.0, -1.0, 1.0, 3.0)
        val, _ = _gk.integrate(fw, -_INF, upper, inner_rel,
                               inner_abs / min(max(1.0, amp * (1.0 + v2)), 1e280),
                               max_sub, bps)
        return val * amp

    return _gk.integrate(_elementwise(outer), 0.0, _INF, rel, abs_tol, max_sub,
                         breakpoints=(1.0,))


def posterior_gradient2d(kind, d0, d1, d2, m, p, c1, c2, cz, y, lam, rel, abs_tol, max_sub):
    return _pg2d(
        lambda t: _fvals(kind, d0, d1, d2, t),
        lambda t: _rho_prime(p, c1, c2, t),
        m, cz, y, lam, rel, abs_tol, max_sub,
    )


def posterior_gradient2d_generic(fgen, rho_prime_fn, m, cz, y, lam, rel, abs_tol, max_sub):
    return _pg2d(fgen, rho_prime_fn, m, cz, y, lam, rel, abs_tol, max_sub)


def posterior_objective2d(kind, d0, d1, d2, m, p, c1, c2, cz, y, rel, abs_tol, max_sub):
    return posterior_objective2d_generic(
        lambda t: _fvals(kind, d0, d1, d2, t),
        lambda t: _rho(p, c1, c2, t),
        m, cz, y, rel, abs_tol, max_sub,
    )


def posterior_objective2d_generic(fgen, rho_fn, m, cz, y, rel, abs_tol, max_sub):
    """Two-dimensional posterior loss for non-convex custom losses."""
    inner_rel = rel / 10.0
    inner_abs = abs_tol / 10.0

    def outer(v):
        if v <= 0.0:
            return 0.0
        # same u = sc * w rescale as the gradient kernel; see _pg2d
        sc = max(v, 1.0)
        v2 = v * v
        upper = v * y / sc
        kink = -cz * v / sc

        def fw(w):
            u = sc * w
            return rho_fn(sc * (w - kink)) * fgen(u * u + v2)

        amp = _pow_inf(v, m) * sc
        bps = (kink, -3.0, -1.0, 1.0, 3.0)
        val, _ = _gk.integrate(fw, -_INF, upper, inner_rel,
                               inner_abs / min(max(1.0, amp * (1.0 + v2)), 1e280),
                               max_sub, bps)
        return val * amp

    return _gk.integrate(_elementwise(outer), 0.0, _INF, rel, abs_tol, max_sub,
                         breakpoints=(1.0,))


# ---------------------------------------------------------------------------
# shrink-term evaluation used inside the risk integrand


def _studentlike_norm(m):
    return math.sqrt(math.pi) * math.exp(
        special.gammaln((m + 1.0) / 2.0) - special.gammaln((m + 2.0) / 2.0)
    )


def _studentlike_cdf(m, y):
    return special.stdtr(m + 1.0, np.asarray(y, dtype=float) * math.sqrt(m + 1.0))


def _studentlike_quantile(m, q):
    q = np.asarray(q, dtype=float)
    t = special.stdtrit(m + 1.0, q) / math.sqrt(m + 1.0)
    pdf = (1.0 + t * t) ** (-(m + 2.0) / 2.0) / _studentlike_norm(m)
    resid = _studentlike_cdf(m, t) - q
    with np.errstate(divide="ignore", invalid="ignore"):
        step = np.where(pdf > 0.0, resid / pdf, 0.0)
    return t - step


def _trunc_mean(m, y):
    y = np.asarray(y, dtype=float)
    zm = _studentlike_norm(m)
    cdf = _studentlike_cdf(m, y)
    with np.errstate(divide="ignore", over="ignore"):
        direct = -((1.0 + y * y) ** (-m / 2.0)) / (m * zm * cdf)
    return np.where(y < -1e8, y * (m + 1.0) / m, direct)


def _tail_antideriv(m, y):
    """A(y) = integral of t * (1 + t^2) ** (-(m + 2) / 2) from -inf to y."""
    y = np.asarray(y, dtype=float)
    return -((1.0 + y * y) ** (-m / 2.0)) / m


def _asym2_shift(m, c1, c2, y):
    """Vectorized solve of the quadratic-loss posterior equation.

    Finds h with  c1 * L(min(y, -h)) + c2 * [L(y) - L(min(y, -h))] = 0 where
    L(x) = A(x) + h B(x); bisection, 80 halvings.
    """
    y = np.asarray(y, dtype=float)
    zm = _studentlike_norm(m)

    def grad(h):
        cut = np.minimum(y, -h)
        a_cut = _tail_antideriv(m, cut)
        b_cut = zm * _studentlike_cdf(m, cut)
        a_y = _tail_antideriv(m, y)
        b_y = zm * _studentlike_cdf(m, y)
        neg = a_cut + h * b_cut
        pos = (a_y - a_cut) + h * (b_y - b_cut)
        return c1 * neg + c2 * np.where(y > -h, pos, 0.0)

    # y = +inf is the untruncated problem whose solution is O(1); clip the
    # bracket so it stays finite there
    lo = -np.minimum(y, 1e6) - 1.0
    hi = np.minimum(np.abs(y), 1e6) + 10.0
    # widen either end until the gradient brackets the root
    for _ in range(60):
        bad = grad(hi) <= 0.0
        if not np.any(bad):
            break
        hi = np.where(bad, np.abs(hi) * 2.0 + 1.0, hi)
    for _ in range(60):
        bad = grad(lo) >= 0.0
        if not np.any(bad):
            break
        lo = np.where(bad, -np.abs(lo) * 2.0 - 1.0, lo)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        g = grad(mid)
        lo = np.where(g < 0.0, mid, lo)
        hi = np.where(g < 0.0, hi, mid)
    return 0.5 * (lo + hi)


def _hermite_eval(ys, gs, dd, right_limit, y):
    """Cubic Hermite interpolation with slope -1 left of the grid and the
    recorded limit right of it."""
    y = np.asarray(y, dtype=float)
    out = np.empty_like(y)
    left = y <= ys[0]
    right = y >= ys[-1]
    mid = ~(left | right)
    out[left] = gs[0] - (y[left] - ys[0])
    out[right] = right_limit
    if np.any(mid):
        ym = y[mid]
        idx = np.clip(np.searchsorted(ys, ym) - 1, 0, len(ys) - 2)
        h = ys[idx + 1] - ys[idx]
        t = (ym - ys[idx]) / h
        t2 = t * t
        t3 = t2 * t
        h00 = 2 * t3 - 3 * t2 + 1
        h10 = t3 - 2 * t2 + t
        h01 = -2 * t3 + 3 * t2
        h11 = t3 - t2
        out[mid] = (
            h00 * gs[idx]
            + h10 * h * dd[idx]
            + h01 * gs[idx + 1]
            + h11 * h * dd[idx + 1]
        )
    return out


def shrink_values(gmode, g0, g1, g2, g3, ys, gs, dd, y):
    """Shrink amount g(y) for each ratio in ``y`` (vectorized).

    gmode 1: quadratic-loss closed form; g0 = index m
    gmode 2: absolute-loss closed form; g0 = m, g1 = quantile level, g2 = c0
    gmode 3: quadratic asymmetric-loss root; g0 = m, g1 = c1, g2 = c2, g3 = c0
    gmode 4: interpolation table (ys, gs, dd); g0 = right limit
    """
    y = np.asarray(y, dtype=float)
    if gmode == 1:
        return -_trunc_mean(g0, y)
    if gmode == 2:
        target = g1 * _studentlike_cdf(g0, y)
        return -g2 - _studentlike_quantile(g0, target)
    if gmode == 3:
        return _asym2_shift(g0, g1, g2, y) - g3
    if gmode == 4:
        return _hermite_eval(ys, gs, dd, g0, y)
    raise ValueError(f"unknown gmode {gmode}")


# ---------------------------------------------------------------------------
# risk integral at sigma = 1:
#   kn * integral over s in (0, inf), x in R of
#        rho(delta(x, s) - lam) * s**(n-1) * f((x - lam)**2 + s**2)


def risk_quad(kind, d0, d1, d2, n, kn, p, c1, c2, lam, mode, c0,
              gmode, g0, g1, g2, g3, ys, gs, dd, rel, abs_tol, max_sub):
    fdens = lambda t: _fvals(kind, d0, d1, d2, t)
    rho = lambda t: _rho(p, c1, c2, t)

    # max(0, x + c * s) - lam == max(-lam, dx + c * s) with dx = x - lam; the
    # right-hand form avoids cancellation between x and lam
    def delta_shift(dx, s):
        if mode == 0:
            return dx + c0 * s
        if mode == 1:
            return np.maximum(-lam, dx + c0 * s)
        ratio = (lam + dx) / s
        g = shrink_values(gmode, g0, g1, g2, g3, ys, gs, dd, ratio)
        return np.maximum(-lam, dx + (c0 + g) * s)

    return _risk_quad_impl(fdens, rho, delta_shift, n, kn, lam, mode, c0,
                           rel, abs_tol, max_sub)


def risk_quad_generic(fgen, rho_fn, delta_fn, n, kn, lam, rel, abs_tol, max_sub):
    """Risk for an arbitrary vectorized estimator delta_fn(x, s)."""

    def delta_shift(dx, s):
        x = lam + dx
        return delta_fn(x, np.full_like(x, s)) - lam

    return _risk_quad_impl(fgen, rho_fn, delta_shift, n, kn, lam, None, 0.0,
                           rel, abs_tol, max_sub)


def _risk_quad_impl(fdens, rho, delta_shift, n, kn, lam, mode, c0,
                    rel, abs_tol, max_sub):
    inner_rel = rel / 10.0
    inner_abs = abs_tol / 10.0

    def outer(s):
        if s <= 0.0:
            return 0.0
        # substitute x = lam + sc * t: the density mass spreads over
        # |x - lam| ~ s for heavy tails, so integrate on the rescaled axis.
        # the 1/(1+s^2) weight keeps the summed inner errors integrable over
        # the infinite outer range
        sc = max(s, 1.0)
        s2 = s * s
        bps = [-3.0 / sc, 0.0, 3.0 / sc, -1.0, 1.0]
        if mode == 1:
            bps += [(-c0 * s - lam) / sc, -c0 * s / sc]

        def ft(t):
            t = np.asarray(t, dtype=float)
            dx = sc * t
            return rho(delta_shift(dx, s)) * fdens(dx * dx + s2)

        amp = _pow_inf(s, n - 1.0) * sc
        val, _ = _gk.integrate(ft, -_INF, _INF, inner_rel,
                               inner_abs / min(max(1.0, amp * (1.0 + s2)), 1e280),
                               max_sub, bps)
        return val * amp

    val, err = _gk.integrate(_elementwise(outer), 0.0, _INF, rel, abs_tol, max_sub,
                             breakpoints=(1.0,))
    return kn * val, kn * (err + abs(val) * inner_rel)


# ---------------------------------------------------------------------------
# one-dimensional section density appearing in the risk-slope analysis:
#   t**n * f(alpha * ((t - a)**2 + eps))  on (0, inf)
# with alpha = lam**2 (1 + y**2), a = y / (1 + y**2), eps = (1 + y**2)**-2.


def _flam_params(lam, y):
    one = 1.0 + y * y
    return lam * lam * one, y / one, 1.0 / (one * one)


def _flam_impl(fdens, n, lam, y, lo, hi, weight, kval, rel, abs_tol, max_sub):
    alpha, a, eps = _flam_params(lam, y)
    spread = 1.0 / math.sqrt(alpha)
    center = max(a, 0.0)
    bps = [center + j * spread for j in (-10.0, -3.0, -1.0, 1.0, 3.0, 10.0)]
    bps += [center, 1.0]
    if kval > 0.0:
        bps.append(1.0 / kval)

    def ft(t):
        t = np.asarray(t, dtype=float)
        d = t - a
        base = np.power(t, n) * fdens(alpha * (d * d + eps))
        return base if weight is None else base * weight(t)

    return _gk.integrate(ft, lo, hi, rel, abs_tol, max_sub, bps)


def flam_integral(kind, d0, d1, d2, n, lam, y, lo, hi, wmode, p, c1, c2, kval,
                  rel, abs_tol, max_sub):
    """wmode 0: plain; 1: |rho'(lam * (t k - 1))|; 2: |t k - 1| ** (p - 1)."""
    fdens = lambda t: _fvals(kind, d0, d1, d2, t)
    if wmode == 0:
        weight = None
    elif wmode == 1:
        weight = lambda t: _rho_prime_abs(p, c1, c2, lam * (t * kval - 1.0))
    elif wmode == 2:
        weight = lambda t: np.abs(t * kval - 1.0) ** (p - 1.0)
    else:
        raise ValueError(f"unknown wmode {wmode}")
    return _flam_impl(fdens, n, lam, y, lo, hi, weight, kval, rel, abs_tol, max_sub)


def flam_integral_generic(fgen, n, lam, y, lo, hi, weight_fn, kval,
                          rel, abs_tol, max_sub):
    return _flam_impl(fgen, n, lam, y, lo, hi, weight_fn, kval, rel, abs_tol, max_sub)


# ---------------------------------------------------------------------------
# density-free posterior objective and gradient for two-sided power losses:
#   obj(h)  = integral over t in (-inf, y) of rho(t + h) * (1 + t^2) ** (-expo)
#   grad(h) = same with rho'


def _weight_1d(expo, t):
    return (1.0 + t * t) ** (-expo)


def posterior_obj1(p, c1, c2, expo, y, h, rel, abs_tol, max_sub):
    kink = -h

    def ft(t):
        t = np.asarray(t, dtype=float)
        return _rho(p, c1, c2, t + h) * _weight_1d(expo, t)

    bps = (kink,) if kink < y else ()
    return _gk.integrate(ft, -_INF, y, rel, abs_tol, max_sub, bps)


def posterior_grad1(p, c1, c2, expo, y, h, rel, abs_tol, max_sub):
    kink = -h

    def ft(t):
        t = np.asarray(t, dtype=float)
        return _rho_prime(p, c1, c2, t + h) * _weight_1d(expo, t)

    bps = (kink,) if kink < y else ()
    return _gk.integrate(ft, -_INF, y, rel, abs_tol, max_sub, bps)
