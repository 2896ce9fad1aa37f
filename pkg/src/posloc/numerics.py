"""Quadrature, root finding, scalar minimization and the heavy-tail reference
distribution used throughout the estimator formulas.

The reference distribution, written StudentLike(m) here, has density
proportional to (1 + t**2) ** (-(m + 2) / 2) on the real line.  It equals a
Student-t with m + 1 degrees of freedom rescaled by 1 / sqrt(m + 1), which is
how the cdf is evaluated (regularized incomplete beta under the hood).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import _gk
from .errors import InvalidParameterError, NoRootError

_EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class QuadratureSpec:
    """Accuracy request for the adaptive integrators.

    ``rel_tol`` of None picks the context default: 1e-10 for one-dimensional
    integrals, 1e-8 for nested two-dimensional ones.
    """

    rel_tol: float | None = None
    abs_tol: float = 1e-14
    max_subdivisions: int = 2000

    def resolve(self, ndim=1):
        rel = self.rel_tol
        if rel is None:
            rel = 1e-10 if ndim == 1 else 1e-8
        return rel, self.abs_tol, self.max_subdivisions


DEFAULT_QUADRATURE = QuadratureSpec()


def _vectorize(fn):
    """Return a version of fn that accepts ndarray arguments."""
    probe = np.array([0.25, 0.5])
    try:
        out = fn(probe)
        if np.shape(out) == probe.shape:
            return fn
    except Exception:
        pass

    def wrapped(x):
        x = np.asarray(x, dtype=float)
        return np.array([fn(float(t)) for t in x.ravel()]).reshape(x.shape)

    return wrapped


def integrate_1d(fn, a, b, spec=None, breakpoints=()):
    """Adaptive integral of fn over (a, b); infinite endpoints allowed.

    Returns (value, error_estimate).  Raises AccuracyError with the best
    estimate attached when the subdivision budget is exhausted.
    """
    spec = spec or DEFAULT_QUADRATURE
    rel, abst, max_sub = spec.resolve(ndim=1)
    return _gk.integrate(_vectorize(fn), a, b, rel, abst, max_sub, breakpoints)


def integrate_2d_halfplane(fn, spec=None, u_breakpoints=(), v_breakpoints=()):
    """Nested integral of fn(u, v) over u in R, v in (0, inf).

    The inner (u) integral runs at a tolerance ten times tighter than the
    outer one; the returned error adds the inner tolerance contribution to
    the outer error estimate.
    """
    spec = spec or DEFAULT_QUADRATURE
    rel, abst, max_sub = spec.resolve(ndim=2)

    def outer(v):
        val, _ = _gk.integrate(
            _vectorize(lambda u: fn(u, v)),
            -math.inf,
            math.inf,
            rel / 10.0,
            abst / 10.0,
            max_sub,
            u_breakpoints,
        )
        return val

    val, err = _gk.integrate(
        _vectorize(outer), 0.0, math.inf, rel, abst, max_sub, v_breakpoints
    )
    return val, err + abs(val) * rel / 10.0


def find_root(fn, lo, hi, xtol=1e-13, ftol=0.0, max_expansions=60, max_iter=200):
    """Brent-style root of a scalar function with automatic bracket growth.

    The initial bracket [lo, hi] is widened geometrically (doubling width,
    up to ``max_expansions`` times) until the endpoints straddle a sign
    change.  Raises NoRootError when no sign change can be found.
    """
    lo, hi = float(lo), float(hi)
    if lo > hi:
        lo, hi = hi, lo
    flo, fhi = fn(lo), fn(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    width = max(hi - lo, 1e-8)
    for _ in range(max_expansions):
        if flo * fhi < 0.0:
            break
        width *= 2.0
        lo -= width
        hi += width
        flo, fhi = fn(lo), fn(hi)
        if flo == 0.0:
            return lo
        if fhi == 0.0:
            return hi
    else:
        raise NoRootError(
            f"no sign change in [{lo:.6g}, {hi:.6g}] after {max_expansions} expansions"
        )

    # classic Brent: inverse quadratic / secant with bisection fallback
    a, b, fa, fb = lo, hi, flo, fhi
    c, fc = a, fa
    d = e = b - a
    for _ in range(max_iter):
        if fb * fc > 0.0:
            c, fc = a, fa
            d = e = b - a
        if abs(fc) < abs(fb):
            a, b, c = b, c, b
            fa, fb, fc = fb, fc, fb
        tol1 = 2.0 * _EPS * abs(b) + 0.5 * xtol
        xm = 0.5 * (c - b)
        if abs(xm) <= tol1 or fb == 0.0 or abs(fb) <= ftol:
            return b
        if abs(e) >= tol1 and abs(fa) > abs(fb):
            s = fb / fa
            if a == c:
                p = 2.0 * xm * s
                q = 1.0 - s
            else:
                q = fa / fc
                r = fb / fc
                p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0))
                q = (q - 1.0) * (r - 1.0) * (s - 1.0)
            if p > 0.0:
                q = -q
            p = abs(p)
            if 2.0 * p < min(3.0 * xm * q - abs(tol1 * q), abs(e * q)):
                e = d
                d = p / q
            else:
                d = xm
                e = d
        else:
            d = xm
            e = d
        a, fa = b, fb
        b += d if abs(d) > tol1 else math.copysign(tol1, xm)
        fb = fn(b)
    return b


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def minimize_scalar(fn, lo, hi, xtol=1e-10, scan_points=257):
    """Minimize a scalar function: coarse grid scan, then golden section.

    The scan makes the search robust for bowl-shaped but non-convex
    objectives; golden section then refines within the bracketing pair of
    grid cells.
    """
    xs = np.linspace(lo, hi, scan_points)
    vals = np.array([fn(float(x)) for x in xs])
    i = int(np.nanargmin(vals))
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, scan_points - 1)]
    while (b - a) > xtol:
        h = b - a
        c = b - _INVPHI * h
        d = a + _INVPHI * h
        if fn(c) <= fn(d):
            b = d
        else:
            a = c
    return 0.5 * (a + b)


# ---------------------------------------------------------------------------
# StudentLike(m): density proportional to (1 + t**2) ** (-(m + 2) / 2)


def student_like_normalization(m):
    """Z_m = integral of (1 + t**2) ** (-(m + 2) / 2) over the real line."""
    if m <= 0:
        raise InvalidParameterError(f"index must be positive, got {m}")
    return math.sqrt(math.pi) * math.exp(
        special.gammaln((m + 1) / 2.0) - special.gammaln((m + 2) / 2.0)
    )

def student_like_pdf(m, t):
    t = np.asarray(t, dtype=float)
    return (1.0 + t * t) ** (-(m + 2.0) / 2.0) / student_like_normalization(m)


def student_like_cdf(m, t):
    """cdf of StudentLike(m) via the rescaled Student-t representation."""
    if m <= 0:
        raise InvalidParameterError(f"index must be positive, got {m}")
    t = np.asarray(t, dtype=float)
    out = special.stdtr(m + 1.0, t * math.sqrt(m + 1.0))
    return float(out) if out.ndim == 0 else out


def student_like_quantile(m, q):
    """Inverse cdf by monotone root refinement around a rescaled-t guess."""
    if not 0.0 < q < 1.0:
        raise InvalidParameterError(f"quantile level must be in (0, 1), got {q}")
    guess = float(special.stdtrit(m + 1.0, q)) / math.sqrt(m + 1.0)
    wing = 1e-6 * (1.0 + abs(guess))
    return find_root(
        lambda t: student_like_cdf(m, t) - q, guess - wing, guess + wing, xtol=1e-14
    )


def student_like_quantile_vec(m, q):
    """Vectorized quantile: rescaled-t inverse plus one Newton polish step."""
    q = np.asarray(q, dtype=float)
    t = special.stdtrit(m + 1.0, q) / math.sqrt(m + 1.0)
    pdf = student_like_pdf(m, t)
    resid = student_like_cdf(m, t) - q
    with np.errstate(divide="ignore", invalid="ignore"):
        step = np.where(pdf > 0.0, resid / pdf, 0.0)
    return t - step


def trunc_mean(m, y):
    """E[T | T <= y] for T ~ StudentLike(m); finite only for m > 1.

    The numerator has the closed antiderivative -(1/m) (1 + y**2) ** (-m/2),
    so the whole expression reduces to incomplete-beta evaluations.
    """
    if m <= 1:
        raise InvalidParameterError(f"index must exceed 1 for a finite mean, got {m}")
    y = np.asarray(y, dtype=float)
    zm = student_like_normalization(m)
    cdf = special.stdtr(m + 1.0, y * math.sqrt(m + 1.0))
    with np.errstate(divide="ignore", over="ignore"):
        direct = -((1.0 + y * y) ** (-m / 2.0)) / (m * zm * cdf)
    # far-left asymptote: conditional mean of a power tail
    asym = y * (m + 1.0) / m
    out = np.where(y < -1e8, asym, direct)
    return float(out) if out.ndim == 0 else out
