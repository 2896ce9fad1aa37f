"""Equivariant and generalized Bayes estimators of a nonnegative location.

All estimators have the form x + c0 s + g(x/s) s.  The best equivariant
(unrestricted) estimator uses g = 0 with the offset c0 solving

    integral over v > 0, u in R of rho'(u + c v) v**n f(u**2 + v**2) = 0.

The generalized Bayes estimator against the prior with density lam**l on
lam >= 0 (times the usual scale prior) adds the shrink term g(y), the
solution in z of the truncated analogue

    B_m(y, z) = integral over v > 0, u < v y of
                rho'(u + (c0 + z) v) v**m f(u**2 + v**2) = 0,  m = n + l.

For two-sided power losses both equations are density-free: substituting
t = u / v turns them into one-dimensional integrals against the heavy-tail
weight (1 + t**2) ** (-(m + p + 1) / 2), which yields closed forms for
p = 1 and p = 2 and a cheap scalar problem otherwise.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _backend, losses as losses_mod, models
from .errors import (
    InternalConsistencyError,
    InvalidParameterError,
    NoRootError,
)
from .numerics import (
    QuadratureSpec,
    find_root,
    minimize_scalar,
    student_like_cdf,
    student_like_quantile,
    student_like_quantile_vec,
    trunc_mean,
)

_kp = _backend.pure_kernels()


# ---------------------------------------------------------------------------
# kernel dispatch


def _grad2d(setup, loss, m, cz, y, lam=0.0, spec=None):
    """Two-dimensional posterior gradient (the B integral), any backend."""
    spec = spec or QuadratureSpec()
    rel, abst, max_sub = spec.resolve(ndim=2)
    code = setup.bound.kernel_code
    if code is not None and loss.is_power_form:
        k = _backend.kernels()
        return k.posterior_gradient2d(
            code[0], code[1], code[2], code[3], float(m),
            loss.p, loss.c1, loss.c2, cz, y, lam, rel, abst, max_sub,
        )[0]
    return _kp.posterior_gradient2d_generic(
        setup.bound.fvals,
        lambda t: np.asarray(losses_mod.rho_prime(loss, t), dtype=float),
        float(m), cz, y, lam, rel, abst, max_sub,
    )[0]


def _obj2d(setup, loss, m, cz, y, spec=None):
    """Two-dimensional posterior loss with the actual density, any backend."""
    spec = spec or QuadratureSpec()
    rel, abst, max_sub = spec.resolve(ndim=2)
    code = setup.bound.kernel_code
    if code is not None and loss.is_power_form:
        k = _backend.kernels()
        return k.posterior_objective2d(
            code[0], code[1], code[2], code[3], float(m),
            loss.p, loss.c1, loss.c2, cz, y, rel, abst, max_sub,
        )[0]
    return _kp.posterior_objective2d_generic(
        setup.bound.fvals,
        lambda t: np.asarray(losses_mod.rho(loss, t), dtype=float),
        float(m), cz, y, rel, abst, max_sub,
    )[0]


def _grad1d(loss, expo, y, h, spec=None):
    """Density-free posterior gradient for power-form losses."""
    spec = spec or QuadratureSpec()
    rel, abst, max_sub = spec.resolve(ndim=1)
    k = _backend.kernels()
    return k.posterior_grad1(loss.p, loss.c1, loss.c2, expo, y, h, rel, abst, max_sub)[0]


def _obj1d(loss, expo, y, h, spec=None):
    spec = spec or QuadratureSpec()
    rel, abst, max_sub = spec.resolve(ndim=1)
    k = _backend.kernels()
    return k.posterior_obj1(loss.p, loss.c1, loss.c2, expo, y, h, rel, abst, max_sub)[0]


# ---------------------------------------------------------------------------
# the equivariant offset c0


@lru_cache(maxsize=None)
def _mre_constant_cached(setup, loss, m, method):
    if loss.even and method == "auto":
        return 0.0
    if loss.is_power_form and method in ("auto", "density_free"):
        q = loss.c2 / (loss.c1 + loss.c2)
        if loss.p == 1.0:
            return -student_like_quantile(m, q)
        if loss.p == 2.0:
            return float(_kp._asym2_shift(m + 1.0, loss.c1, loss.c2, np.array(math.inf)))
        return _gfree_shift(loss, m, math.inf)
    # density-dependent route: root of the full two-dimensional gradient
    if not loss.convex and not loss.is_power_form:
        # index m - 1: differentiating the objective in the shift pulls
        # down one factor of the scale
        return _obj2d_minimize(setup, loss, m - 1.0, math.inf)
    tight = QuadratureSpec(rel_tol=1e-10, abs_tol=1e-14)
    guess = 0.0
    if loss.is_power_form:
        guess = _mre_constant_cached(setup, loss, m, "auto")
    return find_root(
        lambda c: _grad2d(setup, loss, m, c, math.inf, spec=tight),
        guess - 0.25, guess + 0.25, xtol=1e-12,
    )


def mre_constant(setup, loss, m=None, method="auto"):
    """Offset c0 of the best equivariant estimator x + c0 s.

    ``m`` defaults to the setup dimension n; other values serve the shrink
    limit formula.  ``method`` is one of "auto" (closed form or density-free
    solve), "density_free", or "root2d" (solve the full two-dimensional
    equation, as a cross-check).
    """
    if method not in ("auto", "density_free", "root2d"):
        raise InvalidParameterError(f"unknown method {method!r}")
    m = float(setup.n if m is None else m)
    if m < 1.0:
        raise InvalidParameterError(f"index must be >= 1, got {m}")
    if method == "root2d" and loss.even:
        method = "auto"  # exact zero; nothing to solve
    return _mre_constant_cached(setup, loss, m, method)


def _gfree_shift(loss, m, y, spec=None):
    """argmin over h of the density-free posterior loss, truncated at y.

    Grid scan plus golden section finds the basin; a derivative root then
    polishes the minimizer to near machine accuracy (golden section alone
    stalls at the square root of the objective's relative noise).
    """
    expo = (m + loss.p + 1.0) / 2.0
    if loss.p < 1.0:
        # rho' blows up like |t|**(p-1) at the kink, where the quadrature
        # cannot certify much below 1e-8 absolute (the claimed error of a
        # panel hugging the singularity scales like the square root of one
        # ulp); the root moves by at most error / |gradient slope|
        base = spec or QuadratureSpec()
        spec = QuadratureSpec(rel_tol=base.rel_tol,
                              abs_tol=max(base.abs_tol, 1e-8),
                              max_subdivisions=base.max_subdivisions)
    hi = (abs(y) if math.isfinite(y) else 0.0) + 10.0
    lo = -y - 1.0 if math.isfinite(y) else -hi
    if loss.convex:
        h0 = None
    else:
        h0 = minimize_scalar(lambda h: _obj1d(loss, expo, y, h, spec), lo, hi, xtol=1e-8)
        lo, hi = h0 - 1e-3, h0 + 1e-3
    try:
        return find_root(lambda h: _grad1d(loss, expo, y, h, spec), lo, hi, xtol=1e-13)
    except NoRootError:
        if h0 is None:
            raise
        return h0


def _obj2d_minimize(setup, loss, m, y, spec=None):
    spec = spec or QuadratureSpec(rel_tol=1e-9)
    obj = lambda c: _obj2d(setup, loss, m, c, y, spec)
    hi = (abs(y) if math.isfinite(y) else 0.0) + 10.0
    lo = -y - 1.0 if math.isfinite(y) else -hi
    return minimize_scalar(obj, lo, hi, xtol=1e-9)


def _obj2d_polish(setup, loss, m, y, start, spec=None):
    """Vertex of the actual-density posterior loss near ``start``.

    Three-point parabolas at spacings d and d/2 with one Richardson step.
    The objective is a convolution in the shift, hence smooth, so the
    extrapolated vertex bias is O(d**4); evaluation noise enters divided by
    curvature * d, which sets the spacing.
    """
    spec = spec or QuadratureSpec(rel_tol=1e-11)
    obj = lambda c: _obj2d(setup, loss, m, c, y, spec)
    d = 5e-3
    oc = obj(start)

    def vertex(dd):
        om, op = obj(start - dd), obj(start + dd)
        denom = om - 2.0 * oc + op
        if denom <= 0.0:
            raise NoRootError(
                f"posterior loss is not locally convex near shift {start}"
            )
        return start + 0.5 * dd * (om - op) / denom

    return (4.0 * vertex(0.5 * d) - vertex(d)) / 3.0


# ---------------------------------------------------------------------------
# posterior gradient and the shrink function


def posterior_gradient(setup, loss, m, y, z, spec=None):
    """B_m(y, z): derivative of the truncated posterior loss in the shrink z."""
    if m < 1.0:
        raise InvalidParameterError(f"index must be >= 1, got {m}")
    c0 = mre_constant(setup, loss)
    return _grad2d(setup, loss, m, c0 + z, y, spec=spec)


def _require_l(setup, l):
    if l < -(setup.n - 1) - 1e-12:
        raise InvalidParameterError(
            f"prior exponent l = {l} below the integrability boundary -(n-1) = {-(setup.n - 1)}"
        )


def shrink_closed_form(setup, loss, l, y):
    """Vectorized g(y) where a closed form exists, else None.

    Power p = 2 (even): g = -E[T | T <= y] under the index n + l + 1 weight.
    Power-form p = 1:   g = -c0 - F^{-1}(q F(y)) at index n + l.
    Power-form p = 2:   scalar root of the incomplete-moment equation.
    """
    if not loss.is_power_form:
        return None
    m = setup.n + l
    y = np.asarray(y, dtype=float)
    if loss.p == 2.0:
        if loss.even:
            out = -trunc_mean(m + 1.0, y)
        else:
            c0 = mre_constant(setup, loss)
            out = _kp._asym2_shift(m + 1.0, loss.c1, loss.c2, y) - c0
        return out
    if loss.p == 1.0:
        c0 = mre_constant(setup, loss)
        q = loss.c2 / (loss.c1 + loss.c2)
        return -c0 - student_like_quantile_vec(m, q * student_like_cdf(m, y))
    return None


def shrink_value(setup, loss, l, y, method="auto", spec=None):
    """Shrink amount g(y) of the generalized Bayes estimator with prior
    exponent l, computed by the requested route.

    "closed" uses the p = 1 / p = 2 formulas, "posterior_min" minimizes the
    density-free objective (power forms), "gradient_root" solves B = 0 with
    the actual model density, "objective_min" refines the minimizer of the
    actual-density posterior loss (the density-dependent cross-check for
    p < 1 losses, whose unbounded rho' defeats the gradient quadrature),
    "auto" picks the cheapest exact route.
    """
    _require_l(setup, l)
    m = setup.n + l
    c0 = mre_constant(setup, loss)
    if method == "closed":
        out = shrink_closed_form(setup, loss, l, y)
        if out is None:
            raise InvalidParameterError("no closed form for this loss")
        return float(out) if np.ndim(out) == 0 else out
    if method == "posterior_min":
        if loss.is_power_form:
            return _gfree_shift(loss, m, float(y), spec) - c0
        return _obj2d_minimize(setup, loss, m - 1.0, float(y), spec) - c0
    if method == "gradient_root":
        return _shrink_gradient_root(setup, loss, m, float(y), spec)
    if method == "objective_min":
        # differentiating the objective in the shift pulls down one factor
        # of the scale, so the index-m gradient condition pairs with the
        # index m - 1 objective
        if loss.is_power_form:
            start = _gfree_shift(loss, m, float(y))
        else:
            start = _obj2d_minimize(setup, loss, m - 1.0, float(y))
        return _obj2d_polish(setup, loss, m - 1.0, float(y), start, spec) - c0
    if method != "auto":
        raise InvalidParameterError(f"unknown method {method!r}")
    out = shrink_closed_form(setup, loss, l, y)
    if out is not None:
        return float(out) if np.ndim(out) == 0 else out
    if loss.is_power_form:
        return _gfree_shift(loss, m, float(y), spec) - c0
    if loss.convex:
        return _shrink_gradient_root(setup, loss, m, float(y), spec)
    return _obj2d_minimize(setup, loss, m - 1.0, float(y), spec) - c0


def _radial_probe(setup, power):
    """Fail fast when the radial factor of the defining integral diverges.

    The two-dimensional solve would discover the divergence too, but only
    after exhausting its budget on inner integrals; this one-dimensional
    probe raises the same AccuracyError in milliseconds.
    """
    code = setup.bound.kernel_code
    if code is not None:
        k = _backend.kernels()
        k.radial_moment(code[0], code[1], code[2], code[3], float(power),
                        1e-6, 1e-12, 400)
    else:
        _kp.radial_moment_generic(setup.bound.fvals, float(power), 1e-6, 1e-12, 400)


def _shrink_gradient_root(setup, loss, m, y, spec=None):
    """Solve B_m(y, z) = 0 in z with the actual density.

    The bracket starts around the density-free solution when one exists
    (the theory says they coincide for power-form losses; solving again is
    the numerical cross-check) and is grown geometrically otherwise.
    """
    spec = spec or QuadratureSpec(rel_tol=1e-10, abs_tol=1e-14)
    if loss.is_power_form:
        _radial_probe(setup, m + loss.p)
    c0 = mre_constant(setup, loss)
    if loss.is_power_form:
        guess = shrink_closed_form(setup, loss, m - setup.n, y)
        guess = float(guess) if guess is not None else _gfree_shift(loss, m, y) - c0
        wing = 1e-2
    else:
        guess, wing = -min(y, 0.0), 1.0
    grad = lambda z: _grad2d(setup, loss, m, c0 + z, y, spec=spec)
    return find_root(grad, guess - wing, guess + wing, xtol=1e-12)


def shrink_limit(setup, loss, l):
    """Right limit of g: -c0(n) + c0(n + l)."""
    return -mre_constant(setup, loss) + mre_constant(setup, loss, m=setup.n + l)


# ---------------------------------------------------------------------------
# tabulated shrink function


@dataclass(frozen=True)
class ShrinkTable:
    """Monotone-cubic table of g over a ratio grid, with the left asymptote
    g(y) ~ -y - c0 and the recorded right limit used beyond the edges."""

    y: np.ndarray
    g: np.ndarray
    deriv: np.ndarray
    c0: float
    right_limit: float
    l: float
    n: int
    loss_label: str
    provenance: str
    boundary_case: bool
    monotonicity_violations: tuple

    def __call__(self, ynew):
        out = _kp._hermite_eval(self.y, self.g, self.deriv, self.right_limit,
                                np.asarray(ynew, dtype=float))
        return float(out) if out.ndim == 0 else out

    def to_json(self):
        return {
            "c0": self.c0,
            "right_limit": self.right_limit,
            "l": self.l,
            "n": self.n,
            "loss": self.loss_label,
            "provenance": self.provenance,
            "boundary_case": self.boundary_case,
            "monotonicity_violations": [list(v) for v in self.monotonicity_violations],
            "y": [float(v) for v in self.y],
            "g": [float(v) for v in self.g],
        }


def default_ratio_grid():
    return np.linspace(-8.0, 8.0, 201)


def shrink_table(setup, loss, l, y_grid=None, spec=None, strict=True):
    """Tabulate g on a ratio grid and wrap it in a ShrinkTable.

    Monotonicity (nonincreasing g) and the lower bound g >= -y - c0 are
    validated; for convex and power-form losses a violation raises, for other
    losses it is recorded in the table.
    """
    from scipy.interpolate import PchipInterpolator

    _require_l(setup, l)
    y = default_ratio_grid() if y_grid is None else np.asarray(y_grid, dtype=float)
    if len(y) < 4 or np.any(np.diff(y) <= 0):
        raise InvalidParameterError("ratio grid must be increasing with >= 4 points")
    closed = shrink_closed_form(setup, loss, l, y)
    if closed is not None:
        g = np.asarray(closed, dtype=float)
        provenance = "closed_form"
    elif loss.is_power_form:
        g = np.array([shrink_value(setup, loss, l, float(v), "posterior_min", spec) for v in y])
        provenance = "posterior_min"
    else:
        g = np.array([shrink_value(setup, loss, l, float(v), "auto", spec) for v in y])
        provenance = "gradient_root" if loss.convex else "posterior_min"
    c0 = mre_constant(setup, loss)
    limit = shrink_limit(setup, loss, l)
    tol = 1e-8
    increases = np.diff(g)
    bad = [
        (float(y[i]), float(y[i + 1]), float(increases[i]))
        for i in np.nonzero(increases > tol)[0]
    ]
    if bad and (loss.convex or loss.is_power_form) and strict:
        raise InternalConsistencyError(
            f"shrink table is not nonincreasing: first violation {bad[0]}"
        )
    low = g + y + c0
    if np.any(low < -1e-9):
        i = int(np.argmin(low))
        raise InternalConsistencyError(
            f"shrink value g({y[i]:.4g}) = {g[i]:.8g} breaches the bound -y - c0"
        )
    deriv = PchipInterpolator(y, g)(y, 1)
    return ShrinkTable(
        y=y, g=g, deriv=np.asarray(deriv, dtype=float), c0=c0, right_limit=limit,
        l=float(l), n=setup.n, loss_label=losses_mod.loss_label(loss),
        provenance=provenance, boundary_case=bool(abs(l + setup.n - 1) < 1e-12),
        monotonicity_violations=tuple(bad),
    )


# ---------------------------------------------------------------------------
# estimator specification and evaluation


@dataclass(frozen=True)
class EstimatorSpec:
    kind: str  # "mre" | "truncated_mre" | "gen_bayes"
    setup: models.ProblemSetup
    loss: losses_mod.Loss
    l: float = 0.0

    def __post_init__(self):
        if self.kind not in ("mre", "truncated_mre", "gen_bayes"):
            raise InvalidParameterError(f"unknown estimator kind {self.kind!r}")
        if self.kind == "gen_bayes":
            _require_l(self.setup, self.l)

    def label(self):
        if self.kind == "gen_bayes":
            return f"gen_bayes(l={self.l:g})"
        return self.kind


_TABLE_CACHE: dict = {}


def cached_table(spec):
    key = (spec.setup, spec.loss, spec.l)
    if key not in _TABLE_CACHE:
        _TABLE_CACHE[key] = shrink_table(spec.setup, spec.loss, spec.l)
    return _TABLE_CACHE[key]


def evaluate(spec, x, s):
    """Estimator value at observed (x, s); vectorized; requires s > 0.

    Closed-form shrink routes are evaluated exactly; other losses go through
    the cached 201-knot table.  Generalized Bayes output is clamped at 0,
    which only absorbs rounding (the exact value is nonnegative).
    """
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0.0):
        raise InvalidParameterError("scale statistic must be positive")
    c0 = mre_constant(spec.setup, spec.loss)
    if spec.kind == "mre":
        out = x + c0 * s
    elif spec.kind == "truncated_mre":
        out = np.maximum(0.0, x + c0 * s)
    else:
        ratio = x / s
        g = shrink_closed_form(spec.setup, spec.loss, spec.l, ratio)
        if g is None:
            g = cached_table(spec)(ratio)
        out = np.maximum(0.0, x + (c0 + g) * s)
    return float(out) if out.ndim == 0 else out


def estimator_to_json(spec):
    out = {"kind": spec.kind}
    if spec.kind == "gen_bayes":
        out["l"] = spec.l
    return out


def estimator_from_json(obj, setup, loss):
    from .errors import ConfigError

    if not isinstance(obj, dict) or "kind" not in obj:
        raise ConfigError(f"estimator descriptor must be an object with 'kind', got {obj!r}")
    kind = obj["kind"]
    if kind not in ("mre", "truncated_mre", "gen_bayes"):
        raise ConfigError(f"unknown estimator kind {kind!r}")
    extra = set(obj) - {"kind", "l"}
    if extra:
        raise ConfigError(f"unknown estimator keys {sorted(extra)}")
    if "l" in obj and kind != "gen_bayes":
        raise ConfigError(f"'l' applies only to gen_bayes, not {kind}")
    try:
        return EstimatorSpec(kind=kind, setup=setup, loss=loss,
                             l=float(obj.get("l", 0.0)))
    except InvalidParameterError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# unit-scale profile and the geometric bounds


class UnitProfile:
    """Exact l = 0 shrink evaluator with the unit-scale estimate k(y).

    k(y) = y + c0 + g(y) is the estimator value at (x, s) = (y, 1); the
    dominance diagnostics integrate against it.  Values are cached per ratio.
    """

    def __init__(self, setup, loss, spec=None):
        self.setup = setup
        self.loss = loss
        self.c0 = mre_constant(setup, loss)
        self._spec = spec
        self._cache: dict = {}

    def shrink(self, y):
        y = float(y)
        if y not in self._cache:
            self._cache[y] = float(shrink_value(self.setup, self.loss, 0.0, y,
                                                "auto", self._spec))
        return self._cache[y]

    def k(self, y):
        return float(y) + self.c0 + self.shrink(y)


@dataclass(frozen=True)
class BoundReport:
    passed: bool
    max_excess: float
    worst_point: tuple

    def to_json(self):
        return {"passed": self.passed, "max_excess": self.max_excess,
                "worst_point": list(self.worst_point)}


def upper_bound_report(profile, x_grid, s_grid):
    """Check delta(x, s) < x + s**2 / x on a positive grid (strict)."""
    worst = (-math.inf, (math.nan, math.nan))
    for x in np.asarray(x_grid, dtype=float):
        if x <= 0:
            raise InvalidParameterError("bound applies to x > 0 only")
        for s in np.asarray(s_grid, dtype=float):
            excess = s * profile.k(x / s) - (x + s * s / x)
            if excess > worst[0]:
                worst = (excess, (float(x), float(s)))
    return BoundReport(passed=worst[0] < 0.0, max_excess=worst[0], worst_point=worst[1])


def inverse_bound_report(profile, y_grid):
    """Check 1 / k(y) > max(0, y / (1 + y**2)) pointwise (strict)."""
    worst = (math.inf, math.nan)
    for y in np.asarray(y_grid, dtype=float):
        k = profile.k(y)
        margin = 1.0 / k - max(0.0, y / (1.0 + y * y))
        if k <= 0.0:
            margin = -math.inf
        if margin < worst[0]:
            worst = (margin, float(y))
    return BoundReport(passed=worst[0] > 0.0, max_excess=-worst[0], worst_point=(worst[1],))


def ordering_report(setup, loss, l_values, y_grid, tol=1e-8):
    """Check g is nonincreasing in l pointwise on the grid."""
    l_values = sorted(float(v) for v in l_values)
    tables = {lv: shrink_table(setup, loss, lv, y_grid) for lv in l_values}
    worst = (-math.inf, (math.nan, math.nan, math.nan))
    for lo, hi in zip(l_values[:-1], l_values[1:]):
        gap = tables[hi].g - tables[lo].g  # should be <= 0
        i = int(np.argmax(gap))
        if gap[i] > worst[0]:
            worst = (float(gap[i]), (float(np.asarray(y_grid)[i]), lo, hi))
    return BoundReport(passed=worst[0] <= tol, max_excess=worst[0], worst_point=worst[1])
