"""Offset constants, shrink functions, tables, and estimator evaluation.

Scalar oracles were fixed by high-precision quadrature of the density-free
defining conditions (quantiles and truncated means of the heavy-tailed
posterior-section law), independently of the package integrators.
"""

import math

import numpy as np
import pytest

from posloc import (
    EstimatorSpec,
    ProblemSetup,
    UnitProfile,
    estimator_from_json,
    estimator_to_json,
    evaluate,
    inverse_bound_report,
    make_asym_power,
    make_custom,
    make_density,
    make_power,
    mre_constant,
    ordering_report,
    shrink_limit,
    shrink_table,
    shrink_value,
    upper_bound_report,
)
from posloc.errors import ConfigError, InvalidParameterError

NORMAL = make_density("normal")
STUDENT3 = make_density("student", nu=3.0)
P1, P2, PHALF = make_power(1.0), make_power(2.0), make_power(0.5)
ASYM113 = make_asym_power(1.0, 1.0, 3.0)
ASYM212 = make_asym_power(2.0, 1.0, 2.0)


# ---------------------------------------------------------------------------
# offset constant c0


def test_even_losses_have_zero_offset():
    for n in (1, 2, 3):
        setup = ProblemSetup(NORMAL, n)
        for loss in (P1, P2, PHALF):
            assert mre_constant(setup, loss) == 0.0


def test_asym_linear_offset_closed_form():
    setup = ProblemSetup(NORMAL, 1)
    c0 = mre_constant(setup, ASYM113)
    assert c0 == pytest.approx(-1.0 / math.sqrt(3.0), abs=1e-10)
    # cross-check against the full two-dimensional root solve
    assert mre_constant(setup, ASYM113, method="root2d") == pytest.approx(c0, abs=1e-8)


def test_offset_is_density_free_for_power_losses():
    # the defining equation reduces to a generator-independent section law
    for loss in (ASYM113, ASYM212):
        vals = [
            mre_constant(ProblemSetup(dens, 2), loss)
            for dens in (NORMAL, STUDENT3, make_density("exp_power", alpha=1.0, p=1.5))
        ]
        assert max(vals) - min(vals) < 1e-10


def test_mre_constant_rejects_bad_requests():
    setup = ProblemSetup(NORMAL, 2)
    with pytest.raises(InvalidParameterError):
        mre_constant(setup, P2, m=0.5)
    with pytest.raises(InvalidParameterError):
        mre_constant(setup, P2, method="magic")


# ---------------------------------------------------------------------------
# shrink values: route agreement and frozen oracles


def test_squared_loss_shrink_three_routes():
    setup = ProblemSetup(NORMAL, 1)
    target = 2.0 / math.pi
    for method in ("closed", "gradient_root", "posterior_min"):
        assert shrink_value(setup, P2, 0.0, 0.0, method) == pytest.approx(target, abs=1e-8)


def test_absolute_loss_shrink_three_routes():
    setup = ProblemSetup(NORMAL, 1)
    target = 1.0 / math.sqrt(3.0)
    for method in ("closed", "gradient_root", "posterior_min"):
        assert shrink_value(setup, P1, 0.0, 0.0, method) == pytest.approx(target, abs=1e-8)


def test_absolute_loss_shrink_frozen_value():
    # oracle: quantile condition F(-g) = F(1)/2 under the index-1 section law
    setup = ProblemSetup(NORMAL, 1)
    assert shrink_value(setup, P1, 0.0, 1.0) == pytest.approx(
        0.14804272078783030, abs=1e-12
    )


def test_shrink_limit_frozen_value():
    # oracle: difference of 3/4-quantiles of the index-2 and index-3 laws
    setup = ProblemSetup(NORMAL, 2)
    assert shrink_limit(setup, ASYM113, 1.0) == pytest.approx(
        0.07126224964898706, abs=1e-11
    )
    # density-free: the Student generator must give the same limit
    assert shrink_limit(ProblemSetup(STUDENT3, 2), ASYM113, 1.0) == pytest.approx(
        shrink_limit(setup, ASYM113, 1.0), abs=1e-12
    )


def test_shrink_limit_vanishes_for_even_losses():
    setup = ProblemSetup(NORMAL, 3)
    for l in (0.0, 1.0, 2.0):
        assert shrink_limit(setup, P2, l) == 0.0


def test_objective_route_matches_gradient_route():
    # the index-(m-1) posterior objective must locate the index-m gradient
    # root; convex case checked against the gradient solve directly
    setup = ProblemSetup(NORMAL, 2)
    root = shrink_value(setup, P2, 0.0, 0.5, "gradient_root")
    obj = shrink_value(setup, P2, 0.0, 0.5, "objective_min")
    assert obj == pytest.approx(root, abs=1e-7)


def test_objective_route_for_sublinear_loss():
    # p < 1: unbounded rho' rules out the gradient solve, so the
    # density-dependent objective is the cross-check for the density-free one
    setup = ProblemSetup(NORMAL, 2)
    free = shrink_value(setup, PHALF, 0.0, 0.5, "posterior_min")
    dep = shrink_value(setup, PHALF, 0.0, 0.5, "objective_min")
    assert dep == pytest.approx(free, abs=1e-7)


def test_shrink_is_generator_robust():
    # nu = 5 keeps the radial factor integrable at both prior exponents
    heavy = make_density("student", nu=5.0)
    for l in (0.0, 1.0):
        for y in (-1.0, 0.5):
            a = shrink_value(ProblemSetup(NORMAL, 2), ASYM212, l, y, "gradient_root")
            b = shrink_value(ProblemSetup(heavy, 2), ASYM212, l, y, "gradient_root")
            assert a == pytest.approx(b, abs=1e-6)


def test_shrink_decreases_in_prior_exponent():
    setup = ProblemSetup(NORMAL, 2)
    g0 = shrink_value(setup, P2, 0.0, 0.7)
    g1 = shrink_value(setup, P2, 1.0, 0.7)
    g2 = shrink_value(setup, P2, 2.0, 0.7)
    assert g0 >= g1 - 1e-12 >= g2 - 2e-12


def test_shrink_rejects_prior_below_integrability():
    setup = ProblemSetup(NORMAL, 2)
    with pytest.raises(InvalidParameterError):
        shrink_value(setup, P2, -1.5, 0.0)


# ---------------------------------------------------------------------------
# tabulated shrink function


def test_shrink_table_shape_and_metadata():
    setup = ProblemSetup(NORMAL, 3)
    table = shrink_table(setup, P2, 1.0)
    assert table.n == 3 and table.l == 1.0
    assert table.c0 == 0.0
    assert table.right_limit == 0.0
    assert table.provenance == "closed_form"
    assert not table.boundary_case
    assert not table.monotonicity_violations
    # nonincreasing, and above the hard lower bound -y - c0
    assert np.all(np.diff(table.g) <= 1e-8)
    assert np.all(table.g + table.y + table.c0 >= -1e-9)


def test_shrink_table_interpolation_and_edges():
    setup = ProblemSetup(NORMAL, 2)
    table = shrink_table(setup, P2, 0.0)
    # exact at the knots
    i = len(table.y) // 2
    assert table(float(table.y[i])) == pytest.approx(float(table.g[i]), abs=1e-12)
    # between knots the interpolant stays within the bracketing values
    mid = 0.5 * (table.y[i] + table.y[i + 1])
    lo, hi = sorted((table.g[i], table.g[i + 1]))
    assert lo - 1e-12 <= table(float(mid)) <= hi + 1e-12
    # beyond the edges: slope -1 continuation on the left (which keeps the
    # bound g >= -y - c0), recorded limit on the right
    left = table(-25.0)
    assert left == pytest.approx(float(table.g[0]) + (-25.0 - table.y[0]) * -1.0,
                                 rel=1e-12)
    assert left >= 25.0 - table.c0 - 1e-9
    assert table(25.0) == table.right_limit


def test_shrink_table_boundary_flag():
    table = shrink_table(ProblemSetup(NORMAL, 1), P2, 0.0,
                         y_grid=np.linspace(-2, 2, 9))
    assert table.boundary_case  # l = -(n - 1) at n = 1


def test_ordering_report_across_prior_exponents():
    setup = ProblemSetup(NORMAL, 2)
    report = ordering_report(setup, P2, (0.0, 0.5, 1.0), np.linspace(-2.0, 2.0, 9))
    assert report.passed


# ---------------------------------------------------------------------------
# estimator evaluation


def test_estimator_labels_and_json_round_trip():
    setup = ProblemSetup(NORMAL, 2)
    for kind, l in (("mre", 0.0), ("truncated_mre", 0.0), ("gen_bayes", 1.0)):
        spec = EstimatorSpec(kind=kind, setup=setup, loss=P2, l=l)
        back = estimator_from_json(estimator_to_json(spec), setup, P2)
        assert back.kind == spec.kind and back.l == spec.l
    assert EstimatorSpec("gen_bayes", setup, P2, l=1.0).label() == "gen_bayes(l=1)"
    assert EstimatorSpec("mre", setup, P2).label() == "mre"


def test_estimator_from_json_rejects_malformed_input():
    setup = ProblemSetup(NORMAL, 2)
    with pytest.raises(ConfigError):
        estimator_from_json({"kind": "bayes"}, setup, P2)
    with pytest.raises(ConfigError):
        estimator_from_json({"kind": "mre", "l": 1.0}, setup, P2)
    with pytest.raises(ConfigError):
        estimator_from_json({"kind": "gen_bayes", "reps": 2}, setup, P2)


def test_estimator_spec_enforces_prior_boundary():
    setup = ProblemSetup(NORMAL, 3)
    EstimatorSpec("gen_bayes", setup, P2, l=-2.0)  # boundary -(n-1) is allowed
    with pytest.raises(InvalidParameterError):
        EstimatorSpec("gen_bayes", setup, P2, l=-2.5)


def test_evaluate_scale_equivariance():
    setup = ProblemSetup(NORMAL, 2)
    x, s, a = 1.3, 0.8, 2.7
    for kind in ("mre", "truncated_mre", "gen_bayes"):
        spec = EstimatorSpec(kind, setup, P2, l=0.0)
        assert evaluate(spec, a * x, a * s) == pytest.approx(
            a * evaluate(spec, x, s), rel=1e-12
        )


def test_evaluate_truncation_and_nonnegativity():
    setup = ProblemSetup(NORMAL, 2)
    mre = EstimatorSpec("mre", setup, ASYM113)
    trunc = EstimatorSpec("truncated_mre", setup, ASYM113)
    bayes = EstimatorSpec("gen_bayes", setup, ASYM113, l=0.0)
    xs = np.array([-3.0, -0.5, 0.0, 0.5, 3.0])
    ss = np.full_like(xs, 0.9)
    mv = evaluate(mre, xs, ss)
    tv = evaluate(trunc, xs, ss)
    bv = evaluate(bayes, xs, ss)
    assert tv == pytest.approx(np.maximum(0.0, mv), abs=1e-14)
    assert np.all(bv >= 0.0)
    assert np.any(mv < 0.0)  # the unconstrained estimator does go negative


def test_evaluate_rejects_nonpositive_scale():
    spec = EstimatorSpec("mre", ProblemSetup(NORMAL, 2), P2)
    with pytest.raises(InvalidParameterError):
        evaluate(spec, 1.0, 0.0)


def test_evaluate_uses_table_when_no_closed_form():
    # p = 1.5 has no closed-form shrink, so evaluation goes through the
    # cached table; it must agree with a direct solve at the same ratio
    setup = ProblemSetup(NORMAL, 2)
    loss = make_power(1.5)
    spec = EstimatorSpec("gen_bayes", setup, loss, l=0.0)
    val = evaluate(spec, 1.1, 1.0)
    direct = 1.1 + mre_constant(setup, loss) + shrink_value(setup, loss, 0.0, 1.1)
    assert val == pytest.approx(direct, abs=2e-6)


def test_shrink_table_for_custom_loss_uses_gradient_solve():
    # non-power losses have no density-free reduction; the table falls back
    # to the two-dimensional gradient root at every knot
    setup = ProblemSetup(NORMAL, 1)
    quartic = make_custom(lambda t: np.asarray(t, dtype=float) ** 4,
                          lambda t: 4.0 * np.asarray(t, dtype=float) ** 3)
    table = shrink_table(setup, quartic, 1.0, y_grid=np.linspace(-1.0, 1.0, 5))
    assert table.provenance == "gradient_root"
    assert np.all(np.diff(table.g) <= 1e-8)
    assert np.all(np.isfinite(table.g))


# ---------------------------------------------------------------------------
# unit profile and geometric bounds


def test_unit_profile_frozen_value_and_cache():
    profile = UnitProfile(ProblemSetup(NORMAL, 2), P2)
    # oracle: 0.7 minus the truncated mean of the index-3 section law
    assert profile.k(0.7) == pytest.approx(0.8556770701076131, abs=1e-10)
    assert 0.7 in profile._cache
    assert profile.shrink(0.7) == profile._cache[0.7]


def test_unit_profile_k_positive():
    profile = UnitProfile(ProblemSetup(NORMAL, 3), P2)
    for y in np.linspace(-4.0, 4.0, 9):
        assert profile.k(float(y)) > 0.0


def test_upper_bound_report():
    profile = UnitProfile(ProblemSetup(NORMAL, 2), P2)
    grid = np.linspace(0.2, 5.0, 12)
    report = upper_bound_report(profile, grid, grid)
    assert report.passed
    assert report.max_excess < 0.0


def test_inverse_bound_report():
    profile = UnitProfile(ProblemSetup(NORMAL, 2), P2)
    report = inverse_bound_report(profile, np.linspace(-4.0, 4.0, 17))
    assert report.passed
    assert report.max_excess < 0.0
