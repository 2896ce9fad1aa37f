"""Quadrature, root finding, and the StudentLike(m) distribution helpers."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special, stats

from posloc.errors import AccuracyError, InvalidParameterError, NoRootError
from posloc.numerics import (
    QuadratureSpec,
    find_root,
    integrate_1d,
    integrate_2d_halfplane,
    minimize_scalar,
    student_like_cdf,
    student_like_normalization,
    student_like_pdf,
    student_like_quantile,
    student_like_quantile_vec,
    trunc_mean,
)
from posloc import _gk

SQRT_PI = math.sqrt(math.pi)

# (integrand, a, b, exact value)
CLOSED_FORM_INTEGRALS = [
    (lambda x: x * x, 0.0, 1.0, 1.0 / 3.0),
    (lambda x: np.exp(-x), 0.0, math.inf, 1.0),
    (lambda x: np.exp(x), -math.inf, 0.0, 1.0),
    (lambda x: np.exp(-x * x), -math.inf, math.inf, SQRT_PI),
    (lambda x: x ** 3 * np.exp(-x), 0.0, math.inf, 6.0),
    (lambda x: np.sin(x), 0.0, math.pi, 2.0),
    (lambda x: np.cos(x) ** 2, 0.0, 2.0 * math.pi, math.pi),
    (lambda x: 1.0 / np.sqrt(x), 1e-300, 1.0, 2.0),
    (lambda x: 1.0 / (1.0 + x * x), -math.inf, math.inf, math.pi),
    (lambda x: np.log(x), 0.0, 1.0, -1.0),
    (lambda x: x * np.exp(-0.5 * x * x), 0.0, math.inf, 1.0),
    (lambda x: x ** 2 * np.exp(-0.5 * x * x), -math.inf, math.inf, math.sqrt(2 * math.pi)),
    (lambda x: np.exp(-np.abs(x)), -math.inf, math.inf, 2.0),
    (lambda x: 1.0 / (1.0 + x) ** 2, 0.0, math.inf, 1.0),
    (lambda x: np.sqrt(x) * np.exp(-x), 0.0, math.inf, SQRT_PI / 2.0),
    (lambda x: x ** 1.5 / (1.0 + x * x) ** 3, 0.0, math.inf,
     0.5 * special.beta(1.25, 1.75)),
    (lambda x: x ** -0.25 * (1.0 - x) ** -0.25, 1e-300, 1.0 - 1e-16,
     special.beta(0.75, 0.75)),
    (lambda x: np.exp(-x) * np.sin(x), 0.0, math.inf, 0.5),
    (lambda x: x ** 4 * (1.0 + x * x) ** -4, -math.inf, math.inf,
     special.beta(2.5, 1.5)),
    (lambda x: np.cosh(np.clip(x, -300.0, 300.0)) ** -2, -math.inf, math.inf, 2.0),
]


@pytest.mark.parametrize("case", range(len(CLOSED_FORM_INTEGRALS)))
def test_integrate_1d_closed_forms(case):
    fn, a, b, exact = CLOSED_FORM_INTEGRALS[case]
    val, err = integrate_1d(fn, a, b)
    assert val == pytest.approx(exact, rel=1e-9, abs=1e-12)
    # the error estimate must cover the actual error
    assert abs(val - exact) <= max(err * 50.0, 1e-12)


@pytest.mark.parametrize("a_pow,b_exp", [(0.0, 2.0), (1.0, 2.0), (2.0, 3.0), (3.0, 4.5)])
def test_radial_moment_closed_form(a_pow, b_exp):
    # integral of v^a (1 + v^2)^(-b) over (0, inf) = B((a+1)/2, b-(a+1)/2) / 2
    exact = 0.5 * special.beta((a_pow + 1) / 2, b_exp - (a_pow + 1) / 2)
    val, _ = integrate_1d(lambda v: v ** a_pow * (1 + v * v) ** -b_exp, 0.0, math.inf)
    assert val == pytest.approx(exact, rel=1e-10)


@pytest.mark.parametrize("nu", [1.0, 3.0, 7.5])
def test_scaled_radial_moment_closed_form(nu):
    # integral of v^a (1 + v^2/nu)^(-b) = nu^((a+1)/2) B((a+1)/2, b-(a+1)/2) / 2
    a_pow, b_exp = 2.0, 4.0
    exact = nu ** ((a_pow + 1) / 2) * 0.5 * special.beta(
        (a_pow + 1) / 2, b_exp - (a_pow + 1) / 2
    )
    val, _ = integrate_1d(lambda v: v ** a_pow * (1 + v * v / nu) ** -b_exp, 0.0, math.inf)
    assert val == pytest.approx(exact, rel=1e-10)


def test_integrate_1d_breakpoint_kink():
    val, err = integrate_1d(lambda x: np.abs(x - 0.3), 0.0, 1.0, breakpoints=(0.3,))
    assert val == pytest.approx(0.5 * (0.3 ** 2 + 0.7 ** 2), abs=1e-13)
    assert err < 1e-10


def test_integrate_1d_budget_exhaustion():
    spec = QuadratureSpec(rel_tol=1e-12, max_subdivisions=2)
    with pytest.raises(AccuracyError):
        integrate_1d(lambda x: 1.0 / np.sqrt(np.abs(x - 0.37)), 0.0, 1.0, spec=spec)


def test_integrate_2d_halfplane_gaussian():
    val, err = integrate_2d_halfplane(lambda u, v: np.exp(-(u * u + v * v)))
    assert val == pytest.approx(math.pi / 2.0, rel=1e-8)
    assert err < 1e-6


def test_integrate_2d_halfplane_weighted():
    val, _ = integrate_2d_halfplane(lambda u, v: v * v * np.exp(-(u * u + v * v)))
    assert val == pytest.approx(math.pi / 4.0, rel=1e-8)


def test_semiinfinite_transform_round_trip():
    xs = np.array([0.0, 1e-8, 0.1, 1.0, 7.3, 1e3, 1e6])
    rs = _gk.transform_to_r(xs)
    assert np.all((rs >= -1) & (rs <= 1))
    back = _gk.transform_from_r(rs)
    assert back == pytest.approx(xs, rel=1e-9, abs=1e-12)


def test_find_root_simple():
    root = find_root(math.cos, 1.0, 2.0)
    assert root == pytest.approx(math.pi / 2.0, abs=1e-12)


def test_find_root_bracket_expansion():
    # initial bracket excludes the root; geometric widening must find it
    root = find_root(lambda x: x - 10.0, 0.0, 1.0)
    assert root == pytest.approx(10.0, abs=1e-10)


def test_find_root_no_sign_change():
    with pytest.raises(NoRootError):
        find_root(lambda x: x * x + 1.0, -1.0, 1.0, max_expansions=8)


@given(
    a_coef=st.floats(0.1, 10.0),
    b_coef=st.floats(-50.0, 50.0),
)
@settings(max_examples=50, deadline=None)
def test_find_root_monotone_cubic(a_coef, b_coef):
    root = find_root(lambda x: x ** 3 + a_coef * x + b_coef, -1.0, 1.0)
    assert abs(root ** 3 + a_coef * root + b_coef) < 1e-7 * (1 + abs(b_coef))


def test_minimize_scalar_quartic():
    x = minimize_scalar(lambda t: (t - 0.3) ** 4, -1.0, 1.0)
    assert x == pytest.approx(0.3, abs=1e-3)


def test_minimize_scalar_nonconvex_picks_global_basin():
    x = minimize_scalar(lambda t: math.cos(t) + 0.5 * t, 0.0, 10.0)
    assert x == pytest.approx(math.pi - math.asin(0.5), abs=1e-8)


@pytest.mark.parametrize("m", [1.0, 2.0, 3.0, 5.5])
def test_student_like_normalization_vs_quadrature(m):
    val, _ = integrate_1d(lambda t: (1 + t * t) ** (-(m + 2) / 2), -math.inf, math.inf)
    assert student_like_normalization(m) == pytest.approx(val, rel=1e-10)


@pytest.mark.parametrize("m,t", [(1.0, 0.0), (3.0, 0.7), (3.0, -1.4), (6.0, 2.2)])
def test_student_like_cdf_vs_quadrature(m, t):
    val, _ = integrate_1d(lambda s: student_like_pdf(m, s), -math.inf, t)
    assert student_like_cdf(m, t) == pytest.approx(val, rel=1e-9)


def test_student_like_cdf_matches_rescaled_t():
    # StudentLike(m) equals Student-t(m+1) scaled by 1/sqrt(m+1)
    m = 4.0
    ts = np.linspace(-3, 3, 13)
    expected = stats.t.cdf(ts * math.sqrt(m + 1.0), df=m + 1.0)
    assert student_like_cdf(m, ts) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("m", [1.0, 2.0, 4.5])
def test_student_like_quantile_round_trip(m):
    for t in (-2.0, -0.3, 0.0, 0.9, 3.1):
        q = float(student_like_cdf(m, t))
        assert student_like_quantile(m, q) == pytest.approx(t, abs=1e-10)


def test_student_like_quantile_vec_matches_scalar():
    m = 2.0
    qs = np.linspace(0.02, 0.98, 25)
    vec = student_like_quantile_vec(m, qs)
    scalar = np.array([student_like_quantile(m, float(q)) for q in qs])
    assert vec == pytest.approx(scalar, abs=1e-9)


def test_student_like_quantile_rejects_bad_level():
    with pytest.raises(InvalidParameterError):
        student_like_quantile(2.0, 0.0)
    with pytest.raises(InvalidParameterError):
        student_like_quantile(2.0, 1.0)


@pytest.mark.parametrize("m,y", [(2.5, 0.8), (3.0, -0.4), (5.0, 2.0)])
def test_trunc_mean_vs_quadrature(m, y):
    num, _ = integrate_1d(lambda t: t * student_like_pdf(m, t), -math.inf, y)
    den = float(student_like_cdf(m, y))
    assert trunc_mean(m, y) == pytest.approx(num / den, rel=1e-9)


def test_trunc_mean_requires_integrable_tail():
    with pytest.raises(InvalidParameterError):
        trunc_mean(1.0, 0.5)


def test_quadrature_spec_defaults():
    spec = QuadratureSpec()
    assert spec.resolve(ndim=1) == (1e-10, 1e-14, 2000)
    assert spec.resolve(ndim=2) == (1e-8, 1e-14, 2000)
    assert QuadratureSpec(rel_tol=1e-6).resolve(ndim=2)[0] == 1e-6


@given(x=st.floats(0.0, 1e6))
@settings(max_examples=100, deadline=None)
def test_transform_round_trip_property(x):
    r = float(_gk.transform_to_r(np.array([x]))[0])
    back = float(_gk.transform_from_r(np.array([r]))[0])
    # the compactified coordinate quantizes near r = 1: precision decays
    # like x**2 * eps, so stay in the range where 1e-9 relative holds
    assert back == pytest.approx(x, rel=1e-9, abs=1e-12)
