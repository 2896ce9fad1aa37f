"""Bowl-shaped loss functions rho(estimate - parameter).

Two parametric families cover the theory: the symmetric power loss |t|^p and
its two-sided generalization c1 |t|^p (t < 0) / c2 t^p (t >= 0), which prices
overestimation and underestimation differently.  Arbitrary bowl-shaped losses
can be wrapped with ``make_custom``; their shape flags are probed numerically
at construction.
"""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels_py
from .errors import ConfigError, InvalidParameterError, SingularityError


@dataclass(frozen=True)
class Loss:
    """A bowl-shaped loss with the shape flags the theory branches on.

    ``even``: rho(-t) == rho(t); ``convex``: rho convex on the line;
    ``penalizes_overestimation``: |rho'(-u)| <= rho'(u) for u > 0, the
    condition under which overestimating the location costs no less than
    undershooting it by the same amount.
    """

    kind: str  # "power" | "asym_power" | "custom"
    p: float | None = None
    c1: float | None = None
    c2: float | None = None
    rho_fn: Callable | None = None
    rho_prime_fn: Callable | None = None
    even: bool = False
    convex: bool = False
    penalizes_overestimation: bool = False

    @property
    def is_power_form(self):
        return self.kind in ("power", "asym_power")


def make_power(p):
    """Symmetric power loss |t| ** p."""
    return make_asym_power(p, 1.0, 1.0)


def make_asym_power(p, c1, c2):
    """Two-sided power loss: c1 |t|^p below zero, c2 t^p above."""
    if p <= 0:
        raise InvalidParameterError(f"power must be positive, got {p}")
    if c1 <= 0 or c2 <= 0:
        raise InvalidParameterError(f"side weights must be positive, got {c1}, {c2}")
    even = c1 == c2
    return Loss(
        kind="power" if even else "asym_power",
        p=float(p),
        c1=float(c1),
        c2=float(c2),
        even=even,
        convex=p >= 1.0,
        penalizes_overestimation=c2 >= c1,
    )


_PROBE = np.concatenate([-np.geomspace(1e-3, 50.0, 40)[::-1], np.geomspace(1e-3, 50.0, 40)])


def make_custom(rho_fn, rho_prime_fn, grid=None):
    """Wrap a user loss; validates bowl shape and probes the flags on a grid."""
    grid = _PROBE if grid is None else np.asarray(grid, dtype=float)
    vals = np.asarray(rho_fn(grid), dtype=float)
    at_zero = float(np.asarray(rho_fn(np.array([0.0])), dtype=float).ravel()[0])
    if abs(at_zero) > 1e-12:
        raise InvalidParameterError("loss must vanish at zero")
    if np.any(vals < -1e-12):
        raise InvalidParameterError("loss must be nonnegative")
    neg = grid < 0
    pos = grid > 0
    if np.any(np.diff(vals[neg]) > 1e-10) or np.any(np.diff(vals[pos]) < -1e-10):
        raise InvalidParameterError("loss must be nonincreasing below 0 and nondecreasing above")
    even = bool(np.allclose(vals[neg][::-1], vals[pos], rtol=1e-9, atol=1e-12))
    mid = 0.5 * (grid[:-1] + grid[1:])
    midvals = np.asarray(rho_fn(mid), dtype=float)
    convex = bool(np.all(midvals <= 0.5 * (vals[:-1] + vals[1:]) + 1e-10))
    u = grid[pos]
    dneg = np.abs(np.asarray(rho_prime_fn(-u), dtype=float))
    dpos = np.asarray(rho_prime_fn(u), dtype=float)
    overest = bool(np.all(dneg <= dpos + 1e-10))
    return Loss(
        kind="custom",
        rho_fn=rho_fn,
        rho_prime_fn=rho_prime_fn,
        even=even,
        convex=convex,
        penalizes_overestimation=overest,
    )


def rho(loss, t):
    """Loss value, vectorized over t."""
    if loss.is_power_form:
        out = _kernels_py._rho(loss.p, loss.c1, loss.c2, t)
    else:
        out = np.asarray(loss.rho_fn(np.asarray(t, dtype=float)), dtype=float)
    return float(out) if np.ndim(out) == 0 else out


def rho_prime(loss, t):
    """Loss derivative, vectorized over t.

    For p = 1 the value at 0 is the subgradient midpoint (c2 - c1) / 2; for
    p < 1 the derivative blows up at 0 and a scalar request there raises.
    """
    if loss.is_power_form:
        if loss.p < 1.0 and np.isscalar(t) and t == 0.0:
            raise SingularityError("derivative of a sub-linear power loss at 0")
        out = _kernels_py._rho_prime(loss.p, loss.c1, loss.c2, t)
    else:
        out = np.asarray(loss.rho_prime_fn(np.asarray(t, dtype=float)), dtype=float)
    return float(out) if np.ndim(out) == 0 else out


def check_overestimation_condition(loss, grid=None):
    """Return (passed, list of u where |rho'(-u)| > rho'(u))."""
    grid = np.geomspace(1e-3, 1e3, 400) if grid is None else np.asarray(grid, dtype=float)
    grid = grid[grid > 0]
    dneg = np.abs(rho_prime(loss, -grid))
    dpos = np.asarray(rho_prime(loss, grid))
    bad = dneg > dpos + 1e-12
    return not bool(np.any(bad)), [float(u) for u in grid[bad]]


def loss_to_json(loss):
    if not loss.is_power_form:
        raise ConfigError("custom losses are not serializable")
    if loss.kind == "power":
        return {"kind": "power", "p": loss.p}
    return {"kind": "asym_power", "p": loss.p, "c1": loss.c1, "c2": loss.c2}


def loss_from_json(obj):
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ConfigError(f"loss descriptor must be an object with 'kind', got {obj!r}")
    kind = obj["kind"]
    allowed = {"power": {"kind", "p"}, "asym_power": {"kind", "p", "c1", "c2"}}
    if kind not in allowed:
        raise ConfigError(f"unknown loss kind {kind!r}")
    extra = set(obj) - allowed[kind]
    if extra:
        raise ConfigError(f"unknown loss keys {sorted(extra)}")
    try:
        if kind == "power":
            return make_power(float(obj["p"]))
        return make_asym_power(float(obj["p"]), float(obj["c1"]), float(obj["c2"]))
    except KeyError as exc:
        raise ConfigError(f"missing loss key {exc}") from exc


def loss_label(loss):
    if loss.kind == "power":
        return f"power(p={loss.p:g})"
    if loss.kind == "asym_power":
        return f"asym_power(p={loss.p:g}, c1={loss.c1:g}, c2={loss.c2:g})"
    return "custom"
