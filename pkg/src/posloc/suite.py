"""Acceptance battery: the checks a fresh build must pass.

Each criterion is a function returning a CriterionResult with the measured
quantities it judged.  ``run_suite`` executes them (optionally filtered by
tag) and aggregates pass/fail.  Passing ``tolerance`` replaces each
criterion's accuracy tolerance, so a deliberately impossible request (say
1e-15 on a quadrature comparison) exercises the failure path.
"""

import math
import time
from dataclasses import dataclass

import numpy as np

from . import estimators, losses, models, risk
from .errors import AccuracyError
from .numerics import QuadratureSpec


@dataclass(frozen=True)
class CriterionResult:
    name: str
    tags: tuple
    passed: bool
    measured: dict
    runtime: float

    def to_json(self):
        return {
            "name": self.name,
            "tags": list(self.tags),
            "passed": self.passed,
            "measured": _jsonable(self.measured),
            "runtime_seconds": round(self.runtime, 3),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (np.floating, np.integer)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [float(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _setup(kind, n, **params):
    return models.ProblemSetup(models.make_density(kind, **params), n)


# ---------------------------------------------------------------------------
# criteria


def closed_form_shrink_values(tol=1e-8):
    """g(0) against hand values, three independent routes each."""
    checks = []
    norm1 = _setup("normal", 1)
    for loss, target in ((losses.make_power(2), 2.0 / math.pi),
                         (losses.make_power(1), 1.0 / math.sqrt(3.0))):
        routes = {
            "closed": float(estimators.shrink_value(norm1, loss, 0.0, 0.0, "closed")),
            "gradient_root": float(
                estimators.shrink_value(norm1, loss, 0.0, 0.0, "gradient_root")),
            "posterior_min": float(
                estimators.shrink_value(norm1, loss, 0.0, 0.0, "posterior_min")),
        }
        worst = max(abs(v - target) for v in routes.values())
        checks.append({"target": target, "routes": routes, "worst_abs_error": worst})
    worst = max(c["worst_abs_error"] for c in checks)
    return worst <= tol, {"checks": checks, "tolerance": tol, "worst": worst}


def mre_offsets(tol=1e-8, even_tol=1e-10):
    """c0 vanishes for even losses; asymmetric closed form matches root solve."""
    evens = []
    for setup in (_setup("normal", 2), _setup("student", 3, nu=5.0)):
        for loss in (losses.make_power(2), losses.make_power(1),
                     losses.make_power(0.5)):
            evens.append(abs(estimators.mre_constant(setup, loss)))
    norm1 = _setup("normal", 1)
    asym = losses.make_asym_power(1.0, 1.0, 3.0)
    closed = estimators.mre_constant(norm1, asym)
    root2d = estimators.mre_constant(norm1, asym, method="root2d")
    target = -1.0 / math.sqrt(3.0)
    worst = max(abs(closed - target), abs(root2d - target))
    passed = max(evens) < even_tol and worst <= tol
    return passed, {
        "even_worst": max(evens), "closed": closed, "root2d": root2d,
        "target": target, "worst_abs_error": worst, "tolerance": tol,
    }


def generator_robustness(tol=1e-6, points=50):
    """The shrink function must not depend on the generator.

    Solving the full two-dimensional problem under a normal and under a
    heavy-tailed generator must reproduce the same g: by gradient root
    where rho' is quadrature-friendly (p >= 1), by refining the posterior
    loss minimum otherwise.  When a generator's tails make the defining
    integral non-integrable (its radial moment diverges) the solve raises
    AccuracyError and the density-free route, which is the defining one in
    that regime, stands in.
    """
    normal2 = _setup("normal", 2)
    student2 = _setup("student", 2, nu=3.0)
    ys = np.linspace(-2.0, 3.0, points)
    spec = QuadratureSpec(rel_tol=1e-9)
    rows = []

    def column(setup, loss, l):
        if loss.is_power_form and loss.p < 1.0:
            method, mspec = "objective_min", None
        else:
            method, mspec = "gradient_root", spec
        try:
            first = estimators.shrink_value(setup, loss, l, ys[0], method, mspec)
        except AccuracyError:
            method, mspec = "posterior_min", spec
            first = estimators.shrink_value(setup, loss, l, ys[0], method, mspec)
        rest = [estimators.shrink_value(setup, loss, l, y, method, mspec)
                for y in ys[1:]]
        return np.array([first, *rest]), method

    for loss in (losses.make_asym_power(2.0, 1.0, 2.0), losses.make_power(0.5)):
        for l in (0.0, 1.0):
            ga, ma = column(normal2, loss, l)
            gb, mb = column(student2, loss, l)
            gap = float(np.max(np.abs(ga - gb)))
            rows.append({"loss": losses.loss_label(loss), "l": l, "max_gap": gap,
                         "normal_route": ma, "student_route": mb})
    worst = max(r["max_gap"] for r in rows)
    return worst <= tol, {"rows": rows, "tolerance": tol, "worst": worst}


def shrink_monotonicity(tol=1e-8):
    """g nonincreasing in the ratio and in the prior exponent."""
    grid = estimators.default_ratio_grid()
    rows = []
    worst = -math.inf
    for setup, loss in ((_setup("normal", 2), losses.make_power(2)),
                        (_setup("normal", 2), losses.make_power(1)),
                        (_setup("student", 3, nu=5.0), losses.make_asym_power(2.0, 1.0, 2.0))):
        for l in (0.0, 1.0):
            table = estimators.shrink_table(setup, loss, l, grid)
            rise = float(np.max(np.diff(table.g)))
            rows.append({"loss": losses.loss_label(loss), "l": l, "max_rise": rise})
            worst = max(worst, rise)
    orep = estimators.ordering_report(
        _setup("normal", 2), losses.make_power(2), (0.0, 0.5, 1.0, 2.0), grid, tol
    )
    worst = max(worst, orep.max_excess)
    passed = worst <= tol and orep.passed
    return passed, {"rows": rows, "l_ordering_max_excess": orep.max_excess,
                    "tolerance": tol, "worst": worst}


def boundary_risk_match(tol=2e-8):
    """At the boundary location the generalized Bayes risk equals the
    equivariant benchmark risk."""
    rows = []
    for n in (1, 3):
        setup = _setup("normal", n)
        loss = losses.make_power(2)
        gb = estimators.EstimatorSpec("gen_bayes", setup, loss, l=0.0)
        mre = estimators.EstimatorSpec("mre", setup, loss)
        ra, ea = risk.risk_quadrature(gb, 0.0)
        rb, eb = risk.risk_quadrature(mre, 0.0)
        rows.append({"n": n, "gap": abs(ra - rb), "err": ea + eb})
    worst = max(r["gap"] for r in rows)
    return worst <= tol, {"rows": rows, "tolerance": tol, "worst": worst}


def dominance_quadrature(err_cap=1e-6, threads=1):
    """Generalized Bayes (l=0) weakly beats the equivariant benchmark on a
    location grid, by quadrature with certified error."""
    lambdas = np.linspace(0.0, 3.0, 13)
    cases = [
        ("normal", {}, 3, losses.make_power(2)),
        ("normal", {}, 3, losses.make_asym_power(2.0, 1.0, 2.0)),
        ("student", {"nu": 3.0}, 3, losses.make_power(1)),
    ]
    rows = []
    ok = True
    for kind, params, n, loss in cases:
        setup = _setup(kind, n, **params)
        gb = estimators.EstimatorSpec("gen_bayes", setup, loss, l=0.0)
        mre = estimators.EstimatorSpec("mre", setup, loss)
        rep = risk.dominance_check(gb, mre, lambdas, threads=threads)
        max_err = max(p.tolerance for p in rep.points)
        rows.append({
            "density": models.density_label(setup.density), "n": n,
            "loss": losses.loss_label(loss), "verdict": rep.verdict,
            "max_margin": max(p.margin for p in rep.points),
            "max_quadrature_err": max_err,
        })
        ok = ok and rep.verdict == "dominates" and max_err <= err_cap
    return ok, {"rows": rows, "error_cap": err_cap}


def dominance_monte_carlo(reps=1_000_000, seed=20260815, sigma=4.0, threads=1):
    """Same comparison for a non-convex loss, by paired Monte Carlo."""
    setup = _setup("normal", 3)
    loss = losses.make_power(0.5)
    gb = estimators.EstimatorSpec("gen_bayes", setup, loss, l=0.0)
    mre = estimators.EstimatorSpec("mre", setup, loss)
    lambdas = np.linspace(0.0, 3.0, 13)
    rep = risk.dominance_check(gb, mre, lambdas, method="mc", reps=reps,
                               seed=seed, sigma=sigma, threads=threads)
    rows = [{"lambda": p.lam, "diff": p.margin, "band": p.tolerance,
             "verdict": p.verdict} for p in rep.points]
    ok = all(p.verdict != "worse" for p in rep.points)
    return ok, {"rows": rows, "reps": reps, "sigma": sigma, "verdict": rep.verdict}


def negative_prior_risk_gap(factor=5.0):
    """The prior exponent -1 inflates the boundary risk above the benchmark,
    so that estimator is not minimax."""
    setup = _setup("normal", 3)
    loss = losses.make_power(2)
    gb = estimators.EstimatorSpec("gen_bayes", setup, loss, l=-1.0)
    mre = estimators.EstimatorSpec("mre", setup, loss)
    ra, ea = risk.risk_quadrature(gb, 0.0)
    rb, eb = risk.risk_quadrature(mre, 0.0)
    gap, err = ra - rb, ea + eb
    return gap > factor * err, {"risk_gap": gap, "combined_err": err,
                                "required_factor": factor}


def sign_diagnostics(zero_tol=1e-8, threads=1):
    """The risk-difference kernel vanishes at the boundary, stays nonpositive
    on the sampled rectangle, its slope surrogate shows the admissible sign
    patterns and matches finite differences, and the reweighted tail law is
    stochastically decreasing in the location."""
    setup = _setup("normal", 2)
    loss = losses.make_power(2)
    profile = estimators.UnitProfile(setup, loss)
    ys = np.linspace(-3.0, 3.0, 7)
    lams = np.geomspace(1e-3, 4.0, 9)

    zero_worst = max(abs(risk.risk_diff_kernel(profile, 0.0, float(y))[0]) for y in ys)

    nonpos_worst = -math.inf
    slope_grid = {}
    for y in ys:
        for lam in lams:
            val, err = risk.risk_diff_kernel(profile, float(lam), float(y))
            nonpos_worst = max(nonpos_worst, val - err)
    patterns = {}
    for y in ys:
        vals = [risk.risk_diff_slope(profile, float(lam), float(y))[0] for lam in lams]
        slope_grid[float(y)] = vals
        patterns[float(y)] = risk.classify_sign_pattern(vals, 1e-12)
    allowed = {"neg_to_pos", "all_negative"}
    patterns_ok = set(patterns.values()) <= allowed

    rng = np.random.default_rng(3)
    match_fails = []
    for _ in range(20):
        y = float(rng.choice(ys))
        lam = float(rng.choice(lams[1:-1]))
        slope = risk.risk_diff_slope(profile, lam, y)[0]
        h = 0.05 * lam
        hi = risk.risk_diff_kernel(profile, lam + h, y)[0]
        lo = risk.risk_diff_kernel(profile, lam - h, y)[0]
        fd = (hi - lo) / (2.0 * h)
        if abs(fd) > 1e-9 and abs(slope) > 1e-9 and fd * slope < 0:
            match_fails.append({"lambda": lam, "y": y, "slope": slope, "fd": fd})

    tail_rise = -math.inf
    for y in (-1.0, 0.0, 1.5):
        w = [risk.weighted_tail_prob(profile, float(lam), y) for lam in lams]
        tail_rise = max(tail_rise, float(np.max(np.diff(w))))

    passed = (zero_worst <= zero_tol and nonpos_worst <= 0.0 and patterns_ok
              and not match_fails and tail_rise <= 1e-9)
    return passed, {
        "boundary_worst": zero_worst, "nonpositivity_worst": nonpos_worst,
        "sign_patterns": {str(k): v for k, v in patterns.items()},
        "finite_difference_mismatches": match_fails,
        "tail_max_rise": tail_rise, "tolerance": zero_tol,
    }


def estimate_bounds():
    """The l = 0 estimate stays below x + s^2/x, and its unit-scale value
    k(y) keeps 1/k above the positive part of y/(1+y^2)."""
    setup = _setup("normal", 2)
    profile = estimators.UnitProfile(setup, losses.make_power(2))
    grid = np.linspace(0.1, 6.0, 20)
    upper = estimators.upper_bound_report(profile, grid, grid)
    inverse = estimators.inverse_bound_report(profile, np.linspace(-5.0, 5.0, 41))
    passed = upper.passed and inverse.passed
    return passed, {"upper": upper.to_json(), "inverse": inverse.to_json()}


def truncated_dominance(tol=1e-9):
    """Truncating the equivariant estimator at zero never hurts and strictly
    helps at the boundary."""
    setup = _setup("normal", 3)
    loss = losses.make_power(2)
    trunc = estimators.EstimatorSpec("truncated_mre", setup, loss)
    mre = estimators.EstimatorSpec("mre", setup, loss)
    lambdas = np.linspace(0.0, 4.0, 9)
    rep = risk.dominance_check(trunc, mre, lambdas)
    r0 = rep.points[0]
    strict_at_zero = r0.margin < -max(r0.tolerance, tol)
    ok = rep.verdict == "dominates" and strict_at_zero
    return ok, {"verdict": rep.verdict, "zero_margin": r0.margin,
                "zero_tolerance": r0.tolerance}


# ---------------------------------------------------------------------------
# registry and driver


_CRITERIA = (
    ("closed_form_shrink_values", ("closed-form", "fast"), closed_form_shrink_values),
    ("mre_offsets", ("closed-form", "fast"), mre_offsets),
    ("generator_robustness", ("robustness",), generator_robustness),
    ("shrink_monotonicity", ("monotonicity",), shrink_monotonicity),
    ("boundary_risk_match", ("risk", "boundary"), boundary_risk_match),
    ("dominance_quadrature", ("risk", "dominance"), dominance_quadrature),
    ("dominance_monte_carlo", ("risk", "dominance", "mc"), dominance_monte_carlo),
    ("negative_prior_risk_gap", ("risk", "minimax"), negative_prior_risk_gap),
    ("sign_diagnostics", ("diagnostics",), sign_diagnostics),
    ("estimate_bounds", ("bounds", "fast"), estimate_bounds),
    ("truncated_dominance", ("risk", "dominance", "fast"), truncated_dominance),
)


@dataclass(frozen=True)
class SuiteReport:
    results: tuple
    passed: bool

    def to_json(self):
        return {
            "passed": self.passed,
            "criteria": [r.to_json() for r in self.results],
        }


_TOL_PARAMS = frozenset({"tol", "err_cap", "zero_tol", "even_tol"})


def criterion_names():
    return [name for name, _, _ in _CRITERIA]


def known_tags():
    tags = set()
    for _, crit_tags, _ in _CRITERIA:
        tags.update(crit_tags)
    return sorted(tags)


def run_criterion(name, tolerance=None, threads=1):
    for cname, tags, fn in _CRITERIA:
        if cname == name:
            break
    else:
        raise KeyError(name)
    params = fn.__code__.co_varnames[: fn.__code__.co_argcount]
    kwargs = {}
    if "threads" in params:
        kwargs["threads"] = threads
    if tolerance is not None:
        kwargs.update({p: tolerance for p in params if p in _TOL_PARAMS})
    start = time.time()
    passed, measured = fn(**kwargs)
    return CriterionResult(name=name, tags=tags, passed=bool(passed),
                           measured=measured, runtime=time.time() - start)


def run_suite(tag=None, tolerance=None, threads=1, progress=None):
    """Run all criteria (or those carrying ``tag``); returns a SuiteReport."""
    results = []
    for name, tags, _ in _CRITERIA:
        if tag is not None and tag not in tags:
            continue
        res = run_criterion(name, tolerance=tolerance, threads=threads)
        if progress is not None:
            progress(res)
        results.append(res)
    return SuiteReport(results=tuple(results), passed=all(r.passed for r in results))
