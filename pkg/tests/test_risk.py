"""Risk quadrature, Monte Carlo, dominance verdicts, and slope diagnostics.

The two frozen slope constants were computed from the section-density
representation with an independent high-precision integrator.
"""

import math

import numpy as np
import pytest

from posloc import (
    EstimatorSpec,
    ProblemSetup,
    QuadratureSpec,
    SlopeDensity,
    UnitProfile,
    classify_sign_pattern,
    default_lambda_grid,
    dominance_check,
    make_asym_power,
    make_density,
    make_power,
    risk_at_scale,
    risk_curve,
    risk_diff_kernel,
    risk_diff_slope,
    risk_mc,
    risk_mc_paired,
    risk_quadrature,
    weighted_tail_prob,
)
from posloc.errors import InvalidParameterError

NORMAL = make_density("normal")
P1, P2 = make_power(1.0), make_power(2.0)


def _specs(n=2, loss=P2, l=0.0, density=NORMAL):
    setup = ProblemSetup(density, n)
    return (
        EstimatorSpec("gen_bayes", setup, loss, l=l),
        EstimatorSpec("mre", setup, loss),
        EstimatorSpec("truncated_mre", setup, loss),
    )


# ---------------------------------------------------------------------------
# risk values


def test_mre_squared_risk_is_one():
    # canonical coordinates: the location statistic has unit variance
    _, mre, _ = _specs(n=2)
    for lam in (0.0, 1.0, 5.0):
        val, err = risk_quadrature(mre, lam)
        assert val == pytest.approx(1.0, abs=max(5 * err, 1e-9))


def test_student_mre_risk_matches_marginal_variance():
    _, mre, _ = _specs(n=3, density=make_density("student", nu=5.0))
    val, err = risk_quadrature(mre, 2.0)
    assert val == pytest.approx(5.0 / 3.0, abs=max(5 * err, 1e-8))


def test_equivariant_risk_is_constant_in_location():
    _, mre, _ = _specs(n=2, loss=make_asym_power(1.0, 1.0, 3.0))
    curve = risk_curve(mre, [0.0, 0.7, 3.0, 13.0])
    spread = float(np.max(curve.values) - np.min(curve.values))
    assert spread <= 2.0 * float(np.max(curve.errors)) + 1e-10


def test_truncation_halves_symmetric_risk_at_origin():
    _, mre, trunc = _specs(n=2)
    full, _ = risk_quadrature(mre, 0.0)
    half, err = risk_quadrature(trunc, 0.0)
    assert half == pytest.approx(0.5 * full, abs=max(5 * err, 1e-9))


def test_boundary_risk_identity():
    # at lambda = 0 the generalized Bayes risk collapses to the benchmark
    gb, mre, _ = _specs(n=2)
    ra, ea = risk_quadrature(gb, 0.0)
    rb, eb = risk_quadrature(mre, 0.0)
    assert abs(ra - rb) <= max(2e-8, 5 * (ea + eb))


def test_risk_at_scale_is_scale_invariant():
    gb, _, _ = _specs(n=2)
    base, be = risk_at_scale(gb, 1.0, 1.0)
    for sigma in (0.5, 2.0):
        val, err = risk_at_scale(gb, 1.0, sigma)
        assert val == pytest.approx(base, abs=max(5 * (err + be), 1e-8))


def test_risk_rejects_negative_location():
    gb, _, _ = _specs()
    with pytest.raises(InvalidParameterError):
        risk_quadrature(gb, -0.5)
    with pytest.raises(InvalidParameterError):
        risk_at_scale(gb, 1.0, 0.0)


def test_monte_carlo_matches_quadrature():
    gb, _, _ = _specs(n=2)
    exact, _ = risk_quadrature(gb, 1.0)
    est, stderr = risk_mc(gb, 1.0, 200_000, seed=5)
    assert abs(est - exact) <= 5.0 * stderr


def test_paired_monte_carlo_is_internally_consistent():
    gb, mre, _ = _specs(n=2)
    diff, stderr, ra, rb = risk_mc_paired(gb, mre, 1.0, 50_000, seed=9)
    assert diff == pytest.approx(ra - rb, abs=1e-12)
    assert stderr > 0.0
    # common random numbers: the difference is far less noisy than the levels
    _, sa = risk_mc(gb, 1.0, 50_000, seed=9)
    assert stderr < sa


def test_risk_curve_shape_and_determinism():
    gb, _, _ = _specs(n=2)
    lams = [0.0, 1.0]
    a = risk_curve(gb, lams, method="mc", reps=20_000, seed=4)
    b = risk_curve(gb, lams, method="mc", reps=20_000, seed=4)
    assert a.label == "gen_bayes(l=0)" and a.method == "mc"
    assert np.array_equal(a.values, b.values)
    c = risk_curve(gb, lams, method="mc", reps=20_000, seed=5)
    assert not np.array_equal(a.values, c.values)


# ---------------------------------------------------------------------------
# dominance verdicts


def test_dominance_verdicts_by_quadrature():
    gb, mre, _ = _specs(n=3)
    lams = [0.0, 1.0, 3.0]
    fwd = dominance_check(gb, mre, lams)
    assert fwd.verdict == "dominates"
    assert fwd.points[0].verdict == "indeterminate"  # risks coincide at 0
    assert {p.verdict for p in fwd.points[1:]} == {"better"}
    rev = dominance_check(mre, gb, lams)
    assert rev.verdict == "does_not_dominate"


def test_dominance_of_estimator_with_itself_is_indeterminate():
    _, mre, _ = _specs(n=2)
    report = dominance_check(mre, mre, [0.0, 2.0])
    assert report.verdict == "indeterminate"
    assert all(p.margin == 0.0 for p in report.points)


def test_dominance_requires_shared_setup_and_loss():
    gb, _, _ = _specs(n=2)
    other_setup, _, _ = _specs(n=3)
    other_loss, _, _ = _specs(n=2, loss=P1)
    with pytest.raises(InvalidParameterError):
        dominance_check(gb, other_setup, [1.0])
    with pytest.raises(InvalidParameterError):
        dominance_check(gb, other_loss, [1.0])


def test_dominance_by_monte_carlo():
    from posloc.risk import _subseed

    _, mre, trunc = _specs(n=2)
    report = dominance_check(trunc, mre, [0.5], method="mc", reps=40_000, seed=3)
    assert report.method == "mc"
    assert report.verdict == "dominates"
    point = report.points[0]
    diff, stderr, _, _ = risk_mc_paired(trunc, mre, 0.5, 40_000, _subseed(3, 0))
    assert point.margin == pytest.approx(diff, abs=1e-15)
    assert point.tolerance == pytest.approx(4.0 * stderr, rel=1e-12)
    assert point.margin < -point.tolerance


# ---------------------------------------------------------------------------
# risk-difference kernel and slope diagnostics


def test_kernel_vanishes_at_origin():
    profile = UnitProfile(ProblemSetup(NORMAL, 2), P2)
    for y in (-1.0, 0.5, 2.0):
        val, err = risk_diff_kernel(profile, 0.0, y)
        assert abs(val) <= max(1e-8, 5 * err)


def test_kernel_rejects_negative_location():
    profile = UnitProfile(ProblemSetup(NORMAL, 2), P2)
    with pytest.raises(InvalidParameterError):
        risk_diff_kernel(profile, -1.0, 0.0)


def test_slope_frozen_value():
    profile = UnitProfile(ProblemSetup(NORMAL, 2), P2)
    val, err = risk_diff_slope(profile, 1.0, 0.8)
    assert val == pytest.approx(-0.7757044821348927, abs=max(1e-9, 5 * err))


def test_tail_probability_frozen_value():
    profile = UnitProfile(ProblemSetup(NORMAL, 2), P2)
    assert weighted_tail_prob(profile, 1.0, 0.8) == pytest.approx(
        0.871999031805477, abs=1e-9
    )


def test_slope_sign_matches_kernel_derivative():
    profile = UnitProfile(ProblemSetup(NORMAL, 2), P2)
    for lam, y in ((1.0, 0.8), (0.4, -0.5)):
        slope, _ = risk_diff_slope(profile, lam, y)
        h = 0.05 * lam
        hi, _ = risk_diff_kernel(profile, lam + h, y)
        lo, _ = risk_diff_kernel(profile, lam - h, y)
        fd = (hi - lo) / (2 * h)
        if abs(fd) > 1e-9:
            assert math.copysign(1.0, slope) == math.copysign(1.0, fd)


def test_slope_sign_equivalent_to_tail_threshold():
    # D > 0 exactly when the reweighted tail mass is below c1 / (c1 + c2)
    profile = UnitProfile(ProblemSetup(NORMAL, 2), P2)
    for lam, y in ((0.3, -1.0), (1.0, 0.8), (2.0, 0.0)):
        slope, _ = risk_diff_slope(profile, lam, y)
        tail = weighted_tail_prob(profile, lam, y)
        assert (slope > 0) == (tail < 0.5)


def test_tail_probability_nonincreasing_in_location():
    profile = UnitProfile(ProblemSetup(NORMAL, 2), P2)
    vals = [weighted_tail_prob(profile, lam, 0.8) for lam in (0.5, 1.0, 2.0, 4.0)]
    assert all(b <= a + 1e-6 for a, b in zip(vals[:-1], vals[1:]))


def test_slope_requires_positive_location():
    profile = UnitProfile(ProblemSetup(NORMAL, 2), P2)
    with pytest.raises(InvalidParameterError):
        risk_diff_slope(profile, 0.0, 0.5)
    with pytest.raises(InvalidParameterError):
        weighted_tail_prob(profile, 0.0, 0.5)


def test_slope_rejects_custom_losses():
    from posloc import make_custom

    quartic = make_custom(lambda t: np.asarray(t, dtype=float) ** 4,
                          lambda t: 4.0 * np.asarray(t, dtype=float) ** 3)
    profile = UnitProfile(ProblemSetup(NORMAL, 2), quartic)
    with pytest.raises(InvalidParameterError):
        risk_diff_slope(profile, 1.0, 0.5)


# ---------------------------------------------------------------------------
# section density


def test_section_density_is_a_density():
    dens = SlopeDensity(ProblemSetup(NORMAL, 2), lam=1.0, y=0.8)
    assert dens.pdf(-1.0) == 0.0
    ts = np.linspace(0.01, 6.0, 25)
    assert np.all(dens.pdf(ts) >= 0.0)
    assert dens.cdf(30.0) == pytest.approx(1.0, abs=1e-6)
    cs = [dens.cdf(t) for t in (0.5, 1.0, 2.0, 5.0)]
    assert all(b >= a for a, b in zip(cs[:-1], cs[1:]))


def test_section_density_degenerates_at_origin():
    with pytest.raises(InvalidParameterError):
        SlopeDensity(ProblemSetup(NORMAL, 2), lam=0.0, y=0.8)


# ---------------------------------------------------------------------------
# sign patterns and grids


def test_classify_sign_pattern_cases():
    tol = 0.05
    assert classify_sign_pattern((-1.0, -0.5, 0.1, 0.4), tol) == "neg_to_pos"
    assert classify_sign_pattern((1.0, 0.5, -0.1, -0.4), tol) == "pos_to_neg"
    assert classify_sign_pattern((-1.0, 0.2, -0.1, 0.4), tol) == "multiple"
    assert classify_sign_pattern((-1.0, -0.2, -0.01, -0.4), tol) == "all_negative"
    assert classify_sign_pattern((0.2, 0.01, 0.4), tol) == "all_positive"
    assert classify_sign_pattern((0.01, -0.02, 0.03), tol) == "indeterminate"
    # values inside the band are ignored, not treated as sign changes
    assert classify_sign_pattern((-1.0, 0.01, -0.5, 0.4), tol) == "neg_to_pos"


def test_default_lambda_grid_shape():
    grid = default_lambda_grid()
    assert len(grid) == 60
    assert grid[0] == pytest.approx(1e-3) and grid[-1] == pytest.approx(30.0)
    assert np.all(np.diff(grid) > 0)
