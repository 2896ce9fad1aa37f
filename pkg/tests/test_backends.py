"""Compiled and pure kernel backends must agree on every shared entry point.

The pure backend is the reference; the compiled extension re-implements the
same Gauss-Kronrod subdivision, so certified intervals should overlap.  The
2-D parity cases run at loose tolerance because the pure evaluator is slow.
"""

import os
import subprocess
import sys

import numpy as np
import pytest

from posloc import EstimatorSpec, ProblemSetup, make_density, make_power
from posloc._backend import backend_name, compiled_available, kernels, pure_kernels
from posloc.errors import AccuracyError
from posloc.risk import _gen_bayes_gmode

NORMAL_CODE = (0, 0.0, 0.0, 0.0)
STUDENT3_CODE = (1, 3.0, 3.0, 0.0)

pytestmark = pytest.mark.skipif(
    not compiled_available(), reason="compiled extension not built"
)


def _both():
    compiled = kernels()
    pure = pure_kernels()
    assert compiled is not pure
    return compiled, pure


def test_compiled_backend_is_active():
    assert compiled_available()
    assert backend_name() == "compiled"


def test_forcing_pure_backend_via_environment():
    env = dict(os.environ, POSLOC_PURE="1")
    out = subprocess.run(
        [sys.executable, "-c", "from posloc._backend import backend_name; print(backend_name())"],
        capture_output=True, text=True, env=env, check=True,
    )
    assert out.stdout.strip() == "pure"


def test_radial_moment_parity():
    compiled, pure = _both()
    for code, power in ((NORMAL_CODE, 3.0), (NORMAL_CODE, 6.5), (STUDENT3_CODE, 2.0)):
        a = compiled.radial_moment(*code, power, 1e-10, 1e-14, 2000)
        b = pure.radial_moment(*code, power, 1e-10, 1e-14, 2000)
        assert a[0] == pytest.approx(b[0], rel=1e-10)
        assert a[1] >= 0 and b[1] >= 0


def test_divergent_radial_moment_raises_on_both_backends():
    # student(3) tails cannot support a sixth radial moment
    compiled, pure = _both()
    for impl in (compiled, pure):
        with pytest.raises(AccuracyError):
            impl.radial_moment(*STUDENT3_CODE, 6.0, 1e-6, 1e-12, 400)


def test_density_free_1d_parity():
    compiled, pure = _both()
    cases = (
        (2.0, 1.0, 1.0, 3.0, 0.7, 0.4),
        (1.0, 1.0, 3.0, 3.0, -0.5, 0.2),
        (0.5, 2.0, 1.0, 4.5, 1.2, -0.1),
    )
    for p, c1, c2, expo, y, h in cases:
        for name in ("posterior_obj1", "posterior_grad1"):
            if p < 1.0 and name == "posterior_grad1":
                continue  # unbounded rho' near the kink
            a = getattr(compiled, name)(p, c1, c2, expo, y, h, 1e-10, 1e-14, 2000)
            b = getattr(pure, name)(p, c1, c2, expo, y, h, 1e-10, 1e-14, 2000)
            assert a[0] == pytest.approx(b[0], rel=1e-9, abs=1e-12)


def test_section_integral_parity():
    compiled, pure = _both()
    # wmode 0: plain mass; 1: signed rho' weight; 2: |rho'| weight
    for wmode in (0, 1, 2):
        args = (*NORMAL_CODE, 2.0, 1.0, 0.8, 0.0, 2.5, wmode, 2.0, 1.0, 1.0, 0.9)
        a = compiled.flam_integral(*args, 1e-10, 1e-14, 2000)
        b = pure.flam_integral(*args, 1e-10, 1e-14, 2000)
        assert a[0] == pytest.approx(b[0], rel=1e-9, abs=1e-13)


def test_posterior_gradient2d_parity():
    compiled, pure = _both()
    cases = (
        (NORMAL_CODE, 2.0, 2.0, 1.0, 1.0, 0.55, 0.7, 0.9),
        (NORMAL_CODE, 3.0, 1.0, 1.0, 3.0, -0.3, -0.4, 0.0),
        (STUDENT3_CODE, 2.0, 1.0, 1.0, 1.0, 0.8, 0.5, 1.3),
    )
    for code, m, p, c1, c2, cz, y, lam in cases:
        a = compiled.posterior_gradient2d(*code, m, p, c1, c2, cz, y, lam,
                                          1e-6, 1e-12, 600)
        b = pure.posterior_gradient2d(*code, m, p, c1, c2, cz, y, lam,
                                      1e-6, 1e-12, 600)
        assert a[0] == pytest.approx(b[0], abs=max(1e-9, a[1] + b[1]))


def test_posterior_objective2d_parity():
    compiled, pure = _both()
    cases = (
        (NORMAL_CODE, 1.0, 2.0, 1.0, 1.0, 0.6, 0.0),
        (NORMAL_CODE, 1.0, 0.5, 1.0, 1.0, 0.9, 0.5),
        (NORMAL_CODE, 2.0, 1.0, 1.0, 3.0, 0.2, -0.7),
        (STUDENT3_CODE, 1.0, 2.0, 1.0, 1.0, 0.5, 0.3),
    )
    for code, m, p, c1, c2, cz, y in cases:
        a = compiled.posterior_objective2d(*code, m, p, c1, c2, cz, y,
                                           1e-6, 1e-12, 600)
        b = pure.posterior_objective2d(*code, m, p, c1, c2, cz, y,
                                       1e-6, 1e-12, 600)
        assert a[0] == pytest.approx(b[0], abs=max(1e-9, a[1] + b[1]))


def test_risk_quad_parity_across_estimator_modes():
    compiled, pure = _both()
    setup = ProblemSetup(make_density("normal"), 2)
    empty = np.empty(0)
    for mode in (0, 1):  # mre, truncated mre
        args = (*NORMAL_CODE, 2, setup.knorm, 2.0, 1.0, 1.0, 0.8, mode, 0.0,
                0, 0.0, 0.0, 0.0, 0.0, empty, empty, empty)
        a = compiled.risk_quad(*args, 1e-6, 1e-12, 600)
        b = pure.risk_quad(*args, 1e-6, 1e-12, 600)
        assert a[0] == pytest.approx(b[0], abs=max(1e-8, a[1] + b[1]))


def test_risk_quad_parity_for_gen_bayes():
    compiled, pure = _both()
    setup = ProblemSetup(make_density("normal"), 2)
    loss = make_power(2.0)
    spec = EstimatorSpec("gen_bayes", setup, loss, l=0.0)
    gmode, g0, g1, g2, g3, ys, gs, dd = _gen_bayes_gmode(spec)
    args = (*NORMAL_CODE, 2, setup.knorm, 2.0, 1.0, 1.0, 0.8, 2, 0.0,
            gmode, float(g0), float(g1), float(g2), float(g3),
            np.ascontiguousarray(ys, dtype=float),
            np.ascontiguousarray(gs, dtype=float),
            np.ascontiguousarray(dd, dtype=float))
    a = compiled.risk_quad(*args, 1e-6, 1e-12, 600)
    b = pure.risk_quad(*args, 1e-6, 1e-12, 600)
    assert a[0] == pytest.approx(b[0], abs=max(1e-8, a[1] + b[1]))
