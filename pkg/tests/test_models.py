"""Generator families, shape assumptions, normalization, sampling."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from posloc import (
    ProblemSetup,
    angular_constant,
    canonicalize,
    check_assumptions,
    density_from_json,
    density_to_json,
    joint_density,
    make_density,
    normalizing_constant,
    sample_xs,
)
from posloc.errors import ConfigError, InvalidParameterError
from posloc.models import density_label
from posloc.numerics import integrate_2d_halfplane


# ---------------------------------------------------------------------------
# construction and validation


def test_make_density_rejects_bad_parameters():
    with pytest.raises(InvalidParameterError):
        make_density("student", nu=0.0)
    with pytest.raises(InvalidParameterError):
        make_density("exp_power", alpha=-1.0, p=2.0)
    with pytest.raises(InvalidParameterError):
        make_density("kotz", m=0.3, alpha=1.0)  # exponent must be in (-1/2, 0)
    with pytest.raises(InvalidParameterError):
        make_density("kotz", m=-0.7, alpha=1.0)
    with pytest.raises(InvalidParameterError):
        make_density("normal", nu=3.0)  # extra parameter
    with pytest.raises(InvalidParameterError):
        make_density("cauchy")


def test_density_labels():
    assert density_label(make_density("normal")) == "normal"
    assert "student" in density_label(make_density("student", nu=3.0))
    mix = make_density("scale_mixture", base=make_density("normal"),
                       mixing=make_density("exp_power", alpha=1.0, p=1.0))
    assert "mixture" in density_label(mix)


# ---------------------------------------------------------------------------
# shape assumptions


@pytest.mark.parametrize("density,n", [
    (make_density("normal"), None),
    (make_density("student", nu=1.0), 3),
    (make_density("student", nu=5.0), 1),
    (make_density("exp_power", alpha=1.0, p=0.5), None),
    (make_density("kotz", m=-0.3, alpha=1.0), None),
])
def test_assumptions_hold_for_builtin_families(density, n):
    report = check_assumptions(density, n=n)
    assert report.passed
    assert not report.sign_violations
    assert not report.monotonicity_violations


def test_assumptions_fail_for_rising_generator():
    # f(t) = exp(-(t-1)^2) increases on (0, 1): the sign condition breaks
    rising = make_density(
        "custom",
        generator=lambda t: np.exp(-((np.asarray(t) - 1.0) ** 2)),
        log_deriv=lambda t: -2.0 * (np.asarray(t) - 1.0),
    )
    report = check_assumptions(rising)
    assert not report.passed
    assert report.sign_violations


def test_assumptions_fail_for_oscillating_log_derivative():
    wavy = make_density(
        "custom",
        generator=lambda t: np.exp(-np.asarray(t) - 0.5 * np.cos(2.0 * np.asarray(t))),
        log_deriv=lambda t: -1.0 + np.sin(2.0 * np.asarray(t)),
    )
    report = check_assumptions(wavy)
    assert not report.passed


def test_assumption_report_serializes():
    report = check_assumptions(make_density("normal"))
    obj = report.to_json()
    assert obj["passed"] is True
    assert obj["grid_size"] == 1000


# ---------------------------------------------------------------------------
# normalization


def test_angular_constant_small_dimensions():
    # integral of sin(theta)**(n-1) over (0, pi)
    assert angular_constant(1) == pytest.approx(math.pi, rel=1e-14)
    assert angular_constant(2) == pytest.approx(2.0, rel=1e-14)
    assert angular_constant(3) == pytest.approx(math.pi / 2.0, rel=1e-14)


def test_cauchy_model_normalizer():
    # Student(1) at n = 1: the joint normalizer reduces to 1/pi
    setup = ProblemSetup(make_density("student", nu=1.0), 1)
    assert setup.knorm == pytest.approx(1.0 / math.pi, rel=1e-12)


@pytest.mark.parametrize("density,n", [
    (make_density("normal"), 1),
    (make_density("normal"), 3),
    (make_density("student", nu=5.0), 2),
    (make_density("exp_power", alpha=0.7, p=1.5), 2),
])
def test_joint_density_integrates_to_one(density, n):
    setup = ProblemSetup(density, n)
    mass, err = integrate_2d_halfplane(lambda x, s: joint_density(setup, x, s))
    assert mass == pytest.approx(1.0, abs=max(1e-8, 10 * err))


def test_joint_density_location_scale_equivariance():
    setup = ProblemSetup(make_density("normal"), 2)
    mu, sigma = 1.3, 2.1
    x, s = 0.8, 1.7
    lhs = joint_density(setup, x, s, mu=mu, sigma=sigma)
    rhs = joint_density(setup, (x - mu) / sigma, s / sigma) / sigma ** 2
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_normalizing_constant_positive_and_cached():
    setup = ProblemSetup(make_density("student", nu=3.0), 2)
    assert setup.knorm > 0
    assert setup.bound is setup.bound  # cached per setup


# ---------------------------------------------------------------------------
# sampling


def test_normal_sampler_matches_marginals():
    setup = ProblemSetup(make_density("normal"), 3)
    lam = 1.5
    batch = sample_xs(setup, lam, 200_000, seed=11)
    se = 1.0 / math.sqrt(len(batch.x))
    assert batch.x.mean() == pytest.approx(lam, abs=5 * se)
    assert (batch.s ** 2).mean() == pytest.approx(3.0, abs=5 * math.sqrt(6.0) * se)
    assert stats.kstest(batch.x - lam, "norm").pvalue > 0.01
    assert stats.kstest(batch.s ** 2, "chi2", args=(3,)).pvalue > 0.01


def test_radial_sampler_matches_student_marginal():
    # the location coordinate of a spherical Student model is Student-t(nu)
    nu = 5.0
    setup = ProblemSetup(make_density("student", nu=nu), 2)
    batch = sample_xs(setup, 0.0, 100_000, seed=3)
    assert np.all(batch.s > 0)
    assert stats.kstest(batch.x, "t", args=(nu,)).pvalue > 0.01


def test_sampler_rejects_negative_location():
    setup = ProblemSetup(make_density("normal"), 2)
    with pytest.raises(InvalidParameterError):
        sample_xs(setup, -0.5, 10, seed=0)


def test_sampler_is_seed_deterministic():
    setup = ProblemSetup(make_density("student", nu=4.0), 1)
    a = sample_xs(setup, 0.7, 64, seed=42)
    b = sample_xs(setup, 0.7, 64, seed=42)
    c = sample_xs(setup, 0.7, 64, seed=43)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.s, b.s)
    assert not np.array_equal(a.x, c.x)


# ---------------------------------------------------------------------------
# canonical reduction


def test_canonicalize_two_point_sample():
    x, s, n = canonicalize([0.0, 2.0])
    assert x == pytest.approx(math.sqrt(2.0), rel=1e-15)
    assert s == pytest.approx(math.sqrt(2.0), rel=1e-15)
    assert n == 1


def test_canonicalize_rejects_degenerate_input():
    with pytest.raises(InvalidParameterError):
        canonicalize([1.0])
    with pytest.raises(InvalidParameterError):
        canonicalize(np.zeros((2, 2)))


@given(
    values=st.lists(st.floats(-100.0, 100.0), min_size=2, max_size=20),
    shift=st.floats(-50.0, 50.0),
    scale=st.floats(0.1, 10.0),
)
@settings(max_examples=100, deadline=None)
def test_canonicalize_equivariance(values, shift, scale):
    arr = np.asarray(values)
    x0, s0, n0 = canonicalize(arr)
    x1, s1, n1 = canonicalize(scale * arr + shift)
    assert n1 == n0 == len(values) - 1
    scale_abs = 10.0 + np.max(np.abs(arr)) * scale
    assert x1 == pytest.approx(scale * x0 + math.sqrt(len(values)) * shift,
                               abs=1e-9 * scale_abs)
    assert s1 == pytest.approx(scale * s0, abs=1e-9 * scale_abs)


# ---------------------------------------------------------------------------
# serialization


@pytest.mark.parametrize("density", [
    make_density("normal"),
    make_density("student", nu=3.5),
    make_density("exp_power", alpha=0.4, p=1.2),
    make_density("kotz", m=-0.2, alpha=2.0),
    make_density("scale_mixture", base=make_density("normal"),
                 mixing=make_density("exp_power", alpha=1.0, p=1.0)),
])
def test_density_json_round_trip(density):
    obj = density_to_json(density)
    back = density_from_json(obj)
    assert back.kind == density.kind
    assert back.params == density.params
    if density.kind == "scale_mixture":
        assert back.base.kind == density.base.kind
        assert back.mixing.kind == density.mixing.kind


def test_density_json_rejects_malformed_input():
    with pytest.raises(ConfigError):
        density_from_json({"kind": "gaussian"})
    with pytest.raises(ConfigError):
        density_from_json({"kind": "student"})  # missing nu
    with pytest.raises(ConfigError):
        density_from_json({"kind": "normal", "nu": 1.0})
    with pytest.raises(ConfigError):
        density_from_json("normal")


def test_custom_density_is_not_serializable():
    custom = make_density("custom", generator=lambda t: np.exp(-t),
                          log_deriv=lambda t: -np.ones_like(np.asarray(t, dtype=float)))
    with pytest.raises(ConfigError):
        density_to_json(custom)
