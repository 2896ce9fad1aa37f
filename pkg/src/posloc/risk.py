"""Frequentist risk of location estimators and the dominance diagnostics.

Risk is evaluated at (mu, sigma) = (lam, 1); by equivariance this loses no
generality, and ``risk_at_scale`` exists to verify that numerically.  The
dominance machinery follows the integral-expression-of-risk-difference
route: the kernel

    psi(lam, y) = integral over v > 0 of v**n
                  integral over u < v y - lam of rho'(u + (c0 + g(y)) v) f(u**2 + v**2)

vanishes at lam = 0 by the definition of g and its nonpositivity for all
lam >= 0 certifies that the generalized Bayes estimator dominates the best
equivariant one.  The lam-derivative of psi has the sign of D_rho, a weighted
one-dimensional integral against the section density

    f_{lam,y}(t) proportional to t**n f(lam**2 (1+y**2) ((t - a)**2 + eps)),

with a = y / (1 + y**2) and eps = (1 + y**2) ** -2 on t > 0.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _backend, estimators, losses as losses_mod, models
from .errors import InvalidParameterError
from .numerics import QuadratureSpec, integrate_2d_halfplane

_kp = _backend.pure_kernels()


# ---------------------------------------------------------------------------
# risk by quadrature


def _gen_bayes_gmode(spec):
    """Map an estimator onto the kernel shrink-mode arguments."""
    loss, setup = spec.loss, spec.setup
    n, l = setup.n, spec.l
    c0 = estimators.mre_constant(setup, loss)
    empty = np.empty(0)
    if loss.is_power_form and loss.p == 2.0 and loss.even:
        return 1, n + l + 1.0, 0.0, 0.0, 0.0, empty, empty, empty
    if loss.is_power_form and loss.p == 1.0:
        q = loss.c2 / (loss.c1 + loss.c2)
        return 2, n + l, q, c0, 0.0, empty, empty, empty
    if loss.is_power_form and loss.p == 2.0:
        return 3, n + l + 1.0, loss.c1, loss.c2, c0, empty, empty, empty
    table = estimators.cached_table(spec)
    return 4, table.right_limit, 0.0, 0.0, 0.0, table.y, table.g, table.deriv


def risk_quadrature(spec, lam, qspec=None):
    """(risk, error) of the estimator at location lam, scale 1.

    Divergent risks surface as AccuracyError once the subdivision budget is
    exhausted.
    """
    if lam < 0:
        raise InvalidParameterError(f"location must be nonnegative, got {lam}")
    qspec = qspec or QuadratureSpec()
    rel, abst, max_sub = qspec.resolve(ndim=2)
    setup, loss = spec.setup, spec.loss
    code = setup.bound.kernel_code
    c0 = estimators.mre_constant(setup, loss)
    kn = setup.knorm
    if code is not None and loss.is_power_form:
        k = _backend.kernels()
        mode = {"mre": 0, "truncated_mre": 1, "gen_bayes": 2}[spec.kind]
        if mode == 2:
            gmode, g0, g1, g2, g3, ys, gs, dd = _gen_bayes_gmode(spec)
        else:
            gmode, g0, g1, g2, g3 = 0, 0.0, 0.0, 0.0, 0.0
            ys = gs = dd = np.empty(0)
        return k.risk_quad(
            code[0], code[1], code[2], code[3], setup.n, kn,
            loss.p, loss.c1, loss.c2, float(lam), mode, c0,
            gmode, float(g0), float(g1), float(g2), float(g3),
            np.ascontiguousarray(ys, dtype=float),
            np.ascontiguousarray(gs, dtype=float),
            np.ascontiguousarray(dd, dtype=float),
            rel, abst, max_sub,
        )
    rho_vec = lambda t: np.asarray(losses_mod.rho(loss, t), dtype=float)
    delta = lambda x, s: estimators.evaluate(spec, x, s)
    return _kp.risk_quad_generic(
        setup.bound.fvals, rho_vec, delta, setup.n, kn, float(lam), rel, abst, max_sub
    )


def risk_at_scale(spec, lam, sigma, qspec=None):
    """Scale-invariant risk E rho((delta - mu) / sigma) at mu = lam * sigma.

    Equivariance makes this independent of sigma; evaluating it directly is
    the numerical check of that invariance.
    """
    if sigma <= 0:
        raise InvalidParameterError(f"scale must be positive, got {sigma}")
    qspec = qspec or QuadratureSpec()
    mu = lam * sigma
    setup, loss = spec.setup, spec.loss

    def fn(u, s):
        if s <= 0:
            return 0.0
        x = np.asarray(u, dtype=float) + mu
        dens = models.joint_density(setup, x, np.full_like(x, s), mu=mu, sigma=sigma)
        return losses_mod.rho(loss, (estimators.evaluate(spec, x, s) - mu) / sigma) * dens

    val, err = integrate_2d_halfplane(fn, qspec, v_breakpoints=(sigma,))
    return val, err


# ---------------------------------------------------------------------------
# risk by Monte Carlo


def risk_mc(spec, lam, reps, seed):
    """(risk, stderr) from ``reps`` independent draws at location lam."""
    batch = models.sample_xs(spec.setup, lam, reps, seed)
    vals = losses_mod.rho(spec.loss, estimators.evaluate(spec, batch.x, batch.s) - lam)
    mean = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / math.sqrt(reps)) if reps > 1 else math.nan
    return mean, stderr


def risk_mc_paired(spec_a, spec_b, lam, reps, seed):
    """Risk difference a - b on common random numbers.

    Returns (diff, diff_stderr, risk_a, risk_b).  Sharing the draws cancels
    most of the Monte Carlo noise in the difference.
    """
    batch = models.sample_xs(spec_a.setup, lam, reps, seed)
    la = losses_mod.rho(spec_a.loss, estimators.evaluate(spec_a, batch.x, batch.s) - lam)
    lb = losses_mod.rho(spec_b.loss, estimators.evaluate(spec_b, batch.x, batch.s) - lam)
    d = la - lb
    stderr = float(np.std(d, ddof=1) / math.sqrt(reps)) if reps > 1 else math.nan
    return float(np.mean(d)), stderr, float(np.mean(la)), float(np.mean(lb))


def _subseed(seed, index):
    return np.random.SeedSequence(entropy=seed, spawn_key=(index,))


# ---------------------------------------------------------------------------
# curves and dominance


@dataclass(frozen=True)
class RiskCurve:
    label: str
    lambdas: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    method: str

    def to_json(self):
        return {
            "label": self.label,
            "method": self.method,
            "lambda": [float(v) for v in self.lambdas],
            "risk": [float(v) for v in self.values],
            "error": [float(v) for v in self.errors],
        }


def risk_curve(spec, lambdas, method="quadrature", qspec=None, reps=100_000,
               seed=0, threads=1):
    """Risk along a lambda grid; quadrature points may run on threads."""
    lambdas = np.asarray(lambdas, dtype=float)
    if method == "quadrature":
        def one(i):
            return risk_quadrature(spec, float(lambdas[i]), qspec)
    elif method == "mc":
        def one(i):
            return risk_mc(spec, float(lambdas[i]), reps, _subseed(seed, i))
    else:
        raise InvalidParameterError(f"unknown method {method!r}")
    pairs = _run_indexed(one, len(lambdas), threads)
    vals = np.array([p[0] for p in pairs])
    errs = np.array([p[1] for p in pairs])
    return RiskCurve(label=spec.label(), lambdas=lambdas, values=vals,
                     errors=errs, method=method)


def _run_indexed(fn, count, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, range(count)))
    return [fn(i) for i in range(count)]


@dataclass(frozen=True)
class DominancePoint:
    lam: float
    risk_a: float
    risk_b: float
    margin: float  # risk_a - risk_b
    tolerance: float
    verdict: str  # "better" | "indeterminate" | "worse"


@dataclass(frozen=True)
class DominanceReport:
    label_a: str
    label_b: str
    method: str
    points: tuple
    verdict: str  # "dominates" | "does_not_dominate" | "indeterminate"

    def to_json(self):
        return {
            "a": self.label_a,
            "b": self.label_b,
            "method": self.method,
            "verdict": self.verdict,
            "points": [
                {
                    "lambda": p.lam, "risk_a": p.risk_a, "risk_b": p.risk_b,
                    "margin": p.margin, "tolerance": p.tolerance, "verdict": p.verdict,
                }
                for p in self.points
            ],
        }


def dominance_check(spec_a, spec_b, lambdas, method="quadrature", qspec=None,
                    reps=1_000_000, seed=0, sigma=4.0, threads=1):
    """Does estimator a dominate estimator b on the grid?

    Per point: "better" when risk_a < risk_b beyond combined numerical
    tolerance, "worse" for the opposite, "indeterminate" inside the band.
    Aggregate "dominates" requires no "worse" point and at least one
    "better"; indeterminate points are never counted as failures.
    """
    if spec_a.setup is not spec_b.setup and spec_a.setup != spec_b.setup:
        raise InvalidParameterError("estimators must share a setup")
    if spec_a.loss != spec_b.loss:
        raise InvalidParameterError("estimators must share a loss")
    lambdas = np.asarray(lambdas, dtype=float)

    def one(i):
        lam = float(lambdas[i])
        if method == "quadrature":
            ra, ea = risk_quadrature(spec_a, lam, qspec)
            rb, eb = risk_quadrature(spec_b, lam, qspec)
            return lam, ra, rb, ra - rb, ea + eb
        diff, stderr, ra, rb = risk_mc_paired(spec_a, spec_b, lam, reps, _subseed(seed, i))
        return lam, ra, rb, diff, sigma * stderr

    rows = _run_indexed(one, len(lambdas), threads)
    points = []
    for lam, ra, rb, margin, tol in rows:
        if margin < -tol:
            verdict = "better"
        elif margin > tol:
            verdict = "worse"
        else:
            verdict = "indeterminate"
        points.append(DominancePoint(lam, ra, rb, margin, tol, verdict))
    verdicts = {p.verdict for p in points}
    if "worse" in verdicts:
        overall = "does_not_dominate"
    elif "better" in verdicts:
        overall = "dominates"
    else:
        overall = "indeterminate"
    return DominanceReport(label_a=spec_a.label(), label_b=spec_b.label(),
                           method=method, points=tuple(points), verdict=overall)


# ---------------------------------------------------------------------------
# the risk-difference kernel psi and its slope diagnostics


def risk_diff_kernel(profile, lam, y, spec=None):
    """psi(lam, y); zero at lam = 0 and nonpositive under the dominance
    conditions.  Returns (value, error_estimate)."""
    if lam < 0:
        raise InvalidParameterError(f"lambda must be nonnegative, got {lam}")
    setup, loss = profile.setup, profile.loss
    qspec = spec or QuadratureSpec()
    rel, abst, max_sub = qspec.resolve(ndim=2)
    cz = profile.c0 + profile.shrink(y)
    code = setup.bound.kernel_code
    if code is not None and loss.is_power_form:
        k = _backend.kernels()
        return k.posterior_gradient2d(
            code[0], code[1], code[2], code[3], float(setup.n),
            loss.p, loss.c1, loss.c2, cz, float(y), float(lam), rel, abst, max_sub,
        )
    return _kp.posterior_gradient2d_generic(
        setup.bound.fvals,
        lambda t: np.asarray(losses_mod.rho_prime(loss, t), dtype=float),
        float(setup.n), cz, float(y), float(lam), rel, abst, max_sub,
    )


def _flam(setup, lam, y, lo, hi, wmode, loss_p, c1, c2, kval, qspec):
    rel, abst, max_sub = qspec.resolve(ndim=1)
    code = setup.bound.kernel_code
    if code is not None:
        k = _backend.kernels()
        return k.flam_integral(
            code[0], code[1], code[2], code[3], float(setup.n), float(lam), float(y),
            lo, hi, wmode, loss_p, c1, c2, kval, rel, abst, max_sub,
        )
    if wmode == 0:
        weight = None
    elif wmode == 1:
        weight = lambda t: np.abs(_kp._rho_prime(loss_p, c1, c2, lam * (t * kval - 1.0)))
    else:
        weight = lambda t: np.abs(t * kval - 1.0) ** (loss_p - 1.0)
    return _kp.flam_integral_generic(setup.bound.fvals, float(setup.n), float(lam),
                                     float(y), lo, hi, weight, kval, rel, abst, max_sub)


class SlopeDensity:
    """Normalized section density f_{lam,y} on (0, inf); defined for lam > 0."""

    def __init__(self, setup, lam, y, qspec=None):
        if lam <= 0:
            raise InvalidParameterError(
                f"section density requires lambda > 0, got {lam}; it degenerates at 0"
            )
        self.setup = setup
        self.lam = float(lam)
        self.y = float(y)
        self._qspec = qspec or QuadratureSpec()
        self.normalization, _ = _flam(setup, lam, y, 0.0, math.inf, 0,
                                      2.0, 1.0, 1.0, 0.0, self._qspec)

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        alpha, a, eps = _kp._flam_params(self.lam, self.y)
        d = t - a
        raw = np.power(np.maximum(t, 0.0), self.setup.n) * self.setup.bound.fvals(
            alpha * (d * d + eps)
        )
        out = np.where(t > 0, raw / self.normalization, 0.0)
        return float(out) if out.ndim == 0 else out

    def cdf(self, t):
        t = float(t)
        if t <= 0:
            return 0.0
        val, _ = _flam(self.setup, self.lam, self.y, 0.0, t, 0, 2.0, 1.0, 1.0, 0.0,
                       self._qspec)
        return val / self.normalization


def risk_diff_slope(profile, lam, y, qspec=None):
    """D_rho(lam, y): its sign equals the sign of d psi / d lam.

    Positive when the mass of |rho'| below the threshold 1/k(y) outweighs the
    mass above it, under the section density.
    """
    if lam <= 0:
        raise InvalidParameterError(f"slope diagnostic requires lambda > 0, got {lam}")
    qspec = qspec or QuadratureSpec()
    setup, loss = profile.setup, profile.loss
    if not loss.is_power_form:
        raise InvalidParameterError("slope diagnostic is defined for power-form losses")
    kval = profile.k(y)
    thr = 1.0 / kval
    norm, _ = _flam(setup, lam, y, 0.0, math.inf, 0, loss.p, loss.c1, loss.c2, 0.0, qspec)
    below, eb = _flam(setup, lam, y, 0.0, thr, 1, loss.p, loss.c1, loss.c2, kval, qspec)
    above, ea = _flam(setup, lam, y, thr, math.inf, 1, loss.p, loss.c1, loss.c2, kval, qspec)
    return (below - above) / norm, (eb + ea) / norm


def weighted_tail_prob(profile, lam, y, qspec=None):
    """P(W > 1 / k(y)) under the |t k - 1| ** (p - 1) reweighted section law."""
    if lam <= 0:
        raise InvalidParameterError(f"tail diagnostic requires lambda > 0, got {lam}")
    qspec = qspec or QuadratureSpec()
    setup, loss = profile.setup, profile.loss
    kval = profile.k(y)
    thr = 1.0 / kval
    num, _ = _flam(setup, lam, y, thr, math.inf, 2, loss.p, loss.c1, loss.c2, kval, qspec)
    den, _ = _flam(setup, lam, y, 0.0, math.inf, 2, loss.p, loss.c1, loss.c2, kval, qspec)
    return num / den


def classify_sign_pattern(values, tol):
    """Classify a sequence as all_negative / all_positive / neg_to_pos /
    pos_to_neg / multiple / indeterminate, ignoring values inside the band."""
    signs = [1 if v > tol else (-1 if v < -tol else 0) for v in values]
    signs = [s for s in signs if s != 0]
    if not signs:
        return "indeterminate"
    changes = sum(1 for a, b in zip(signs[:-1], signs[1:]) if a != b)
    if changes == 0:
        return "all_negative" if signs[0] < 0 else "all_positive"
    if changes == 1:
        return "neg_to_pos" if signs[0] < 0 else "pos_to_neg"
    return "multiple"


def default_lambda_grid():
    """Log-spaced diagnostic grid; avoids 0 where section densities degenerate."""
    return np.geomspace(1e-3, 30.0, 60)
