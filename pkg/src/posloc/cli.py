"""Command-line front end for reproducible, seedable runs.

Subcommands map onto the library surfaces: ``density-check`` (generator shape
assumptions), ``g-table`` (shrink tables per prior exponent), ``risk-curve``,
``dominance``, ``diagnostics`` (psi / slope / tail grids), ``estimate``
(apply estimators to a raw sample), and ``suite`` (the acceptance battery).
Runs are driven by a JSON config declaring ``"schema": 1`` plus a handful of
flags; outputs are CSV or JSON, embed the resolved config, and are
byte-identical for identical config and seed up to the generated_at line.

Exit codes: 0 success, 1 config problem, 2 assumption violation, 3 existence
failure, 4 accuracy failure (including failed suite criteria).
"""

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import estimators, losses, models, risk, suite
from ._backend import backend_name
from .errors import (
    AccuracyError,
    AssumptionError,
    ConfigError,
    ExistenceError,
    InvalidParameterError,
    NoRootError,
    NonNormalizableError,
    PoslocError,
    SingularityError,
)
from .numerics import QuadratureSpec
from .suite import _jsonable

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ASSUMPTION = 2
EXIT_EXISTENCE = 3
EXIT_ACCURACY = 4

# first matching class wins; subclasses must precede their bases
_ERROR_EXITS = (
    (ConfigError, EXIT_CONFIG),
    (InvalidParameterError, EXIT_CONFIG),
    (SingularityError, EXIT_CONFIG),
    (AssumptionError, EXIT_ASSUMPTION),
    (ExistenceError, EXIT_EXISTENCE),
    (NoRootError, EXIT_EXISTENCE),
    (NonNormalizableError, EXIT_EXISTENCE),
    (AccuracyError, EXIT_ACCURACY),
)


def _exit_code_for(exc):
    for cls, code in _ERROR_EXITS:
        if isinstance(exc, cls):
            return code
    return EXIT_CONFIG


def _fmt(x):
    """17 significant digits: enough to round-trip any double exactly."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def _timestamp():
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


# ---------------------------------------------------------------------------
# run configuration


_TOP_KEYS = frozenset({
    "schema", "model", "n", "loss", "estimators", "l_values", "lambda_grid",
    "y_grid", "seed", "method", "reps", "tolerances", "sample", "output",
})
_TOLERANCE_KEYS = frozenset({"rel", "abs", "max_subdivisions", "sigma", "suite"})
_ESTIMATOR_KINDS = ("mre", "truncated_mre", "gen_bayes")


def _as_int(value, name, minimum=None, maximum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    if maximum is not None and value > maximum:
        raise ConfigError(f"{name} must be <= {maximum}, got {value}")
    return value


def _as_real(value, name, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    value = float(value)
    if positive and not value > 0:
        raise ConfigError(f"{name} must be positive, got {value}")
    return value


def _grid_from_json(obj, name):
    """Materialize a grid descriptor: a bare array of increasing values or
    {start, stop, count, spacing} with spacing "linear" (default) or "log"."""
    if isinstance(obj, (list, tuple)):
        if not obj:
            raise ConfigError(f"{name} must not be empty")
        vals = np.array([_as_real(v, f"{name} value") for v in obj])
        if np.any(np.diff(vals) <= 0):
            raise ConfigError(f"{name} values must be strictly increasing")
        return vals
    if not isinstance(obj, dict):
        raise ConfigError(f"{name} must be an array or an object, got {obj!r}")
    extra = set(obj) - {"values", "start", "stop", "count", "spacing"}
    if extra:
        raise ConfigError(f"unknown {name} keys {sorted(extra)}")
    if "values" in obj:
        if set(obj) != {"values"}:
            raise ConfigError(f"{name} mixes 'values' with range keys")
        return _grid_from_json(obj["values"], name)
    missing = {"start", "stop", "count"} - set(obj)
    if missing:
        raise ConfigError(f"missing {name} keys {sorted(missing)}")
    start = _as_real(obj["start"], f"{name}.start")
    stop = _as_real(obj["stop"], f"{name}.stop")
    count = _as_int(obj["count"], f"{name}.count", minimum=2)
    if not start < stop:
        raise ConfigError(f"{name} needs start < stop, got [{start}, {stop}]")
    spacing = obj.get("spacing", "linear")
    if spacing == "linear":
        return np.linspace(start, stop, count)
    if spacing == "log":
        if start <= 0:
            raise ConfigError(f"log-spaced {name} needs start > 0, got {start}")
        return np.geomspace(start, stop, count)
    raise ConfigError(f"{name}.spacing must be 'linear' or 'log', got {spacing!r}")


def _check_estimator_json(obj):
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ConfigError(f"estimator descriptor must be an object with 'kind', got {obj!r}")
    if obj["kind"] not in _ESTIMATOR_KINDS:
        raise ConfigError(f"unknown estimator kind {obj['kind']!r}")
    extra = set(obj) - {"kind", "l"}
    if extra:
        raise ConfigError(f"unknown estimator keys {sorted(extra)}")
    if "l" in obj:
        if obj["kind"] != "gen_bayes":
            raise ConfigError(f"'l' applies only to gen_bayes, not {obj['kind']}")
        _as_real(obj["l"], "estimator l")


@dataclass
class RunConfig:
    """Parsed run configuration with defaults filled in.

    ``model`` and ``loss`` hold constructed objects; the ``*_json`` twins
    keep the serializable descriptors for provenance.  Grid fields keep the
    raw (validated) descriptor so outputs can embed exactly what was asked.
    """

    model: object = None
    model_json: object = None
    n: int | None = None
    loss: object = None
    loss_json: object = None
    estimators: tuple = ()
    l_values: tuple = (0.0,)
    lambda_grid: object = None
    y_grid: object = None
    seed: int = 0
    method: str = "quadrature"
    reps: int | None = None
    rel_tol: float | None = None
    abs_tol: float = 1e-14
    max_subdivisions: int = 2000
    sigma: float = 4.0
    suite_tolerance: float | None = None
    sample: str | None = None
    output_path: str | None = None
    output_format: str | None = None

    @property
    def quadrature(self):
        return QuadratureSpec(self.rel_tol, self.abs_tol, self.max_subdivisions)

    @classmethod
    def from_json(cls, obj):
        if not isinstance(obj, dict):
            raise ConfigError(f"config must be a JSON object, got {type(obj).__name__}")
        extra = set(obj) - _TOP_KEYS
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        if "schema" not in obj:
            raise ConfigError('config must declare "schema": 1')
        if obj["schema"] != 1:
            raise ConfigError(f"unsupported config schema {obj['schema']!r}")
        kw = {}
        if "model" in obj:
            kw["model"] = models.density_from_json(obj["model"])
            kw["model_json"] = obj["model"]
        if "n" in obj:
            kw["n"] = _as_int(obj["n"], "n", minimum=1)
        if "loss" in obj:
            kw["loss"] = losses.loss_from_json(obj["loss"])
            kw["loss_json"] = obj["loss"]
        if "estimators" in obj:
            if not isinstance(obj["estimators"], list) or not obj["estimators"]:
                raise ConfigError("estimators must be a nonempty array")
            for desc in obj["estimators"]:
                _check_estimator_json(desc)
            kw["estimators"] = tuple(obj["estimators"])
        if "l_values" in obj:
            if not isinstance(obj["l_values"], list) or not obj["l_values"]:
                raise ConfigError("l_values must be a nonempty array")
            kw["l_values"] = tuple(_as_real(v, "l_values entry") for v in obj["l_values"])
        for key in ("lambda_grid", "y_grid"):
            if key in obj:
                _grid_from_json(obj[key], key)
                kw[key] = obj[key]
        if "seed" in obj:
            kw["seed"] = _as_int(obj["seed"], "seed", minimum=0, maximum=2 ** 64 - 1)
        if "method" in obj:
            if obj["method"] not in ("quadrature", "mc"):
                raise ConfigError(f"method must be 'quadrature' or 'mc', got {obj['method']!r}")
            kw["method"] = obj["method"]
        if "reps" in obj:
            kw["reps"] = _as_int(obj["reps"], "reps", minimum=1)
        if "tolerances" in obj:
            kw.update(cls._parse_tolerances(obj["tolerances"]))
        if "sample" in obj:
            if not isinstance(obj["sample"], str):
                raise ConfigError(f"sample must be a path string, got {obj['sample']!r}")
            kw["sample"] = obj["sample"]
        if "output" in obj:
            kw.update(cls._parse_output(obj["output"]))
        return cls(**kw)

    @staticmethod
    def _parse_tolerances(obj):
        if not isinstance(obj, dict):
            raise ConfigError(f"tolerances must be an object, got {obj!r}")
        extra = set(obj) - _TOLERANCE_KEYS
        if extra:
            raise ConfigError(f"unknown tolerances keys {sorted(extra)}")
        kw = {}
        if obj.get("rel") is not None:
            kw["rel_tol"] = _as_real(obj["rel"], "tolerances.rel", positive=True)
        if "abs" in obj:
            kw["abs_tol"] = _as_real(obj["abs"], "tolerances.abs")
            if kw["abs_tol"] < 0:
                raise ConfigError(f"tolerances.abs must be >= 0, got {kw['abs_tol']}")
        if "max_subdivisions" in obj:
            kw["max_subdivisions"] = _as_int(obj["max_subdivisions"],
                                             "tolerances.max_subdivisions", minimum=1)
        if "sigma" in obj:
            kw["sigma"] = _as_real(obj["sigma"], "tolerances.sigma", positive=True)
        if obj.get("suite") is not None:
            kw["suite_tolerance"] = _as_real(obj["suite"], "tolerances.suite", positive=True)
        return kw

    @staticmethod
    def _parse_output(obj):
        if not isinstance(obj, dict):
            raise ConfigError(f"output must be an object, got {obj!r}")
        extra = set(obj) - {"path", "format"}
        if extra:
            raise ConfigError(f"unknown output keys {sorted(extra)}")
        kw = {}
        if "path" in obj:
            if not isinstance(obj["path"], str):
                raise ConfigError(f"output.path must be a string, got {obj['path']!r}")
            kw["output_path"] = obj["path"]
        if "format" in obj:
            if obj["format"] not in ("csv", "json"):
                raise ConfigError(f"output.format must be 'csv' or 'json', got {obj['format']!r}")
            kw["output_format"] = obj["format"]
        return kw


def _density_json(cfg):
    if cfg.model_json is not None:
        return cfg.model_json
    try:
        return models.density_to_json(cfg.model)
    except ConfigError:
        return {"kind": cfg.model.kind}


def _loss_json(cfg):
    if cfg.loss_json is not None:
        return cfg.loss_json
    try:
        return losses.loss_to_json(cfg.loss)
    except ConfigError:
        return {"kind": "custom"}


def _quad_json(cfg):
    return {"rel": cfg.rel_tol, "abs": cfg.abs_tol,
            "max_subdivisions": cfg.max_subdivisions}


def _setup_from(cfg, command):
    if cfg.model is None:
        raise ConfigError(f"{command} requires 'model' in the config")
    if cfg.n is None:
        raise ConfigError(f"{command} requires 'n' in the config")
    return models.ProblemSetup(cfg.model, cfg.n)


def _loss_from(cfg, command):
    if cfg.loss is None:
        raise ConfigError(f"{command} requires 'loss' in the config")
    return cfg.loss


def _estimator_specs(cfg, setup, loss, command, exactly=None):
    if not cfg.estimators:
        raise ConfigError(f"{command} requires a nonempty 'estimators' list")
    if exactly is not None and len(cfg.estimators) != exactly:
        raise ConfigError(
            f"{command} needs exactly {exactly} estimators, got {len(cfg.estimators)}"
        )
    return [estimators.estimator_from_json(d, setup, loss) for d in cfg.estimators]


# ---------------------------------------------------------------------------
# output rendering


@dataclass
class Output:
    command: str
    config: dict
    summary: str
    json_result: dict
    csv_header: list
    csv_rows: list
    csv_comments: list = field(default_factory=list)
    exit_code: int = EXIT_OK


def _render_json(out):
    payload = {
        "schema": 1,
        "command": out.command,
        "generated_at": _timestamp(),
        "config": _jsonable(out.config),
        "result": _jsonable(out.json_result),
    }
    return json.dumps(payload, indent=2) + "\n"


def _render_csv(out):
    buf = io.StringIO()
    buf.write(f"# posloc {out.command}\n")
    buf.write("# schema 1\n")
    buf.write(f"# generated_at {_timestamp()}\n")
    compact = json.dumps(_jsonable(out.config), sort_keys=True, separators=(",", ":"))
    buf.write(f"# config {compact}\n")
    for line in out.csv_comments:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(out.csv_header)
    writer.writerows(out.csv_rows)
    return buf.getvalue()


def _write_output(out, path, fmt):
    text = _render_csv(out) if fmt == "csv" else _render_json(out)
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# commands


def cmd_density_check(cfg, opts):
    if cfg.model is None:
        raise ConfigError("density-check requires 'model' in the config")
    label = models.density_label(cfg.model)
    report = models.check_assumptions(cfg.model, n=cfg.n)
    config = {"schema": 1, "model": _density_json(cfg)}
    if cfg.n is not None:
        config["n"] = cfg.n
    rows = [["sign", _fmt(t), "", _fmt(v)] for t, v in report.sign_violations]
    rows += [
        ["monotonicity", _fmt(a), _fmt(b), _fmt(inc)]
        for a, b, inc in report.monotonicity_violations
    ]
    verdict = "passed" if report.passed else "failed"
    return Output(
        command="density-check",
        config=config,
        summary=f"density-check: {verdict} ({label})",
        json_result={"density": label, **report.to_json()},
        csv_header=["violation", "t_left", "t_right", "value"],
        csv_rows=rows,
        csv_comments=[f"density {label}", f"passed {report.passed}"],
        exit_code=EXIT_OK if report.passed else EXIT_ASSUMPTION,
    )


def cmd_g_table(cfg, opts):
    setup = _setup_from(cfg, "g-table")
    loss = _loss_from(cfg, "g-table")
    y_json = cfg.y_grid if cfg.y_grid is not None else {"start": -8.0, "stop": 8.0, "count": 201}
    y = _grid_from_json(y_json, "y_grid")
    tables = []
    for l in cfg.l_values:
        try:
            tables.append(estimators.shrink_table(setup, loss, float(l),
                                                  y_grid=y, spec=cfg.quadrature))
        except (ExistenceError, NoRootError) as exc:
            raise type(exc)(f"l = {l:g}: {exc}") from exc
    config = {
        "schema": 1, "model": _density_json(cfg), "n": cfg.n,
        "loss": _loss_json(cfg), "l_values": list(cfg.l_values),
        "y_grid": y_json, "tolerances": _quad_json(cfg),
    }
    comments = [
        f"table l={t.l:g} c0={_fmt(t.c0)} right_limit={_fmt(t.right_limit)}"
        f" provenance={t.provenance} boundary_case={t.boundary_case}"
        for t in tables
    ]
    rows = [
        [_fmt(t.l), _fmt(yv), _fmt(gv)]
        for t in tables
        for yv, gv in zip(t.y, t.g)
    ]
    return Output(
        command="g-table",
        config=config,
        summary=f"g-table: {len(tables)} table(s) over {len(y)} ratio points",
        json_result={"tables": [t.to_json() for t in tables]},
        csv_header=["l", "y", "g"],
        csv_rows=rows,
        csv_comments=comments,
    )


def cmd_risk_curve(cfg, opts):
    setup = _setup_from(cfg, "risk-curve")
    loss = _loss_from(cfg, "risk-curve")
    specs = _estimator_specs(cfg, setup, loss, "risk-curve")
    lam_json = cfg.lambda_grid if cfg.lambda_grid is not None else \
        {"start": 0.0, "stop": 3.0, "count": 13}
    lam = _grid_from_json(lam_json, "lambda_grid")
    kwargs = {"method": cfg.method, "qspec": cfg.quadrature,
              "seed": cfg.seed, "threads": opts.threads}
    if cfg.reps is not None:
        kwargs["reps"] = cfg.reps
    curves = [risk.risk_curve(spec, lam, **kwargs) for spec in specs]
    config = {
        "schema": 1, "model": _density_json(cfg), "n": cfg.n,
        "loss": _loss_json(cfg), "estimators": list(cfg.estimators),
        "lambda_grid": lam_json, "method": cfg.method, "seed": cfg.seed,
        "tolerances": _quad_json(cfg),
    }
    if cfg.method == "mc":
        config["reps"] = cfg.reps if cfg.reps is not None else 100_000
    rows = [
        [c.label, _fmt(lv), _fmt(rv), _fmt(ev)]
        for c in curves
        for lv, rv, ev in zip(c.lambdas, c.values, c.errors)
    ]
    return Output(
        command="risk-curve",
        config=config,
        summary=f"risk-curve: {len(curves)} estimator(s) at {len(lam)} lambda points"
                f" ({cfg.method})",
        json_result={"curves": [c.to_json() for c in curves]},
        csv_header=["estimator", "lambda", "risk", "error"],
        csv_rows=rows,
    )


def cmd_dominance(cfg, opts):
    setup = _setup_from(cfg, "dominance")
    loss = _loss_from(cfg, "dominance")
    spec_a, spec_b = _estimator_specs(cfg, setup, loss, "dominance", exactly=2)
    lam_json = cfg.lambda_grid if cfg.lambda_grid is not None else \
        {"start": 0.0, "stop": 3.0, "count": 13}
    lam = _grid_from_json(lam_json, "lambda_grid")
    kwargs = {"method": cfg.method, "qspec": cfg.quadrature, "seed": cfg.seed,
              "sigma": cfg.sigma, "threads": opts.threads}
    if cfg.reps is not None:
        kwargs["reps"] = cfg.reps
    report = risk.dominance_check(spec_a, spec_b, lam, **kwargs)
    config = {
        "schema": 1, "model": _density_json(cfg), "n": cfg.n,
        "loss": _loss_json(cfg), "estimators": list(cfg.estimators),
        "lambda_grid": lam_json, "method": cfg.method, "seed": cfg.seed,
        "tolerances": {**_quad_json(cfg), "sigma": cfg.sigma},
    }
    if cfg.method == "mc":
        config["reps"] = cfg.reps if cfg.reps is not None else 1_000_000
    rows = [
        [_fmt(p.lam), _fmt(p.risk_a), _fmt(p.risk_b), _fmt(p.margin),
         _fmt(p.tolerance), p.verdict]
        for p in report.points
    ]
    return Output(
        command="dominance",
        config=config,
        summary=f"dominance: {report.label_a} vs {report.label_b}: {report.verdict}",
        json_result=report.to_json(),
        csv_header=["lambda", "risk_a", "risk_b", "margin", "tolerance", "verdict"],
        csv_rows=rows,
        csv_comments=[f"a {report.label_a}", f"b {report.label_b}",
                      f"verdict {report.verdict}"],
    )


def cmd_diagnostics(cfg, opts):
    setup = _setup_from(cfg, "diagnostics")
    loss = _loss_from(cfg, "diagnostics")
    y_json = cfg.y_grid if cfg.y_grid is not None else {"start": -3.0, "stop": 3.0, "count": 7}
    lam_json = cfg.lambda_grid if cfg.lambda_grid is not None else \
        {"values": [0.0] + [float(v) for v in risk.default_lambda_grid()]}
    ys = _grid_from_json(y_json, "y_grid")
    lams = _grid_from_json(lam_json, "lambda_grid")
    qspec = cfg.quadrature
    profile = estimators.UnitProfile(setup, loss, qspec)
    slope_ok = loss.is_power_form
    tail_ok = slope_ok and loss.p >= 1.0
    for yv in ys:  # warm the per-ratio cache before fanning out
        profile.k(float(yv))
    cells = [(float(yv), float(lv)) for yv in ys for lv in lams]

    def one(i):
        yv, lv = cells[i]
        psi, perr = risk.risk_diff_kernel(profile, lv, yv, qspec)
        slope = serr = tail = None
        if slope_ok and lv > 0:
            slope, serr = risk.risk_diff_slope(profile, lv, yv, qspec)
            if tail_ok:
                tail = risk.weighted_tail_prob(profile, lv, yv, qspec)
        return psi, perr, slope, serr, tail

    values = risk._run_indexed(one, len(cells), opts.threads)
    points = [
        {"y": yv, "lambda": lv, "psi": psi, "psi_error": perr,
         "slope": slope, "slope_error": serr, "tail": tail}
        for (yv, lv), (psi, perr, slope, serr, tail) in zip(cells, values)
    ]
    patterns = []
    tail_rises = []
    per_y = len(lams)
    for j, yv in enumerate(ys):
        block = values[j * per_y:(j + 1) * per_y]
        slopes = [v[2] for v in block if v[2] is not None]
        serrs = [v[3] for v in block if v[3] is not None]
        if slopes:
            pattern = risk.classify_sign_pattern(slopes, max(serrs))
            patterns.append({"y": float(yv), "pattern": pattern})
        tails = [v[4] for v in block if v[4] is not None]
        if len(tails) >= 2:
            rise = float(max(np.diff(tails)))
            tail_rises.append({"y": float(yv), "max_rise": rise})
    config = {
        "schema": 1, "model": _density_json(cfg), "n": cfg.n,
        "loss": _loss_json(cfg), "lambda_grid": lam_json, "y_grid": y_json,
        "tolerances": _quad_json(cfg),
    }
    result = {"points": points, "sign_patterns": patterns,
              "tail_max_rise": tail_rises}
    blank = lambda v: "" if v is None else _fmt(v)
    rows = [
        [_fmt(p["y"]), _fmt(p["lambda"]), _fmt(p["psi"]), _fmt(p["psi_error"]),
         blank(p["slope"]), blank(p["slope_error"]), blank(p["tail"])]
        for p in points
    ]
    comments = [f"pattern y={p['y']:g} {p['pattern']}" for p in patterns]
    comments += [f"tail_max_rise y={t['y']:g} {_fmt(t['max_rise'])}" for t in tail_rises]
    return Output(
        command="diagnostics",
        config=config,
        summary=f"diagnostics: {len(cells)} cells"
                f" ({len(ys)} ratios x {len(lams)} lambdas)",
        json_result=result,
        csv_header=["y", "lambda", "psi", "psi_error", "slope", "slope_error", "tail"],
        csv_rows=rows,
        csv_comments=comments,
    )


def _read_sample(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    tokens = [
        tok
        for line in text.splitlines()
        if not line.lstrip().startswith("#")
        for tok in line.replace(",", " ").split()
    ]
    values = []
    for tok in tokens:
        try:
            values.append(float(tok))
        except ValueError:
            raise ConfigError(f"sample file {path!r} has a non-numeric entry {tok!r}") from None
    return values


def cmd_estimate(cfg, opts):
    if cfg.sample is None:
        raise ConfigError("estimate requires 'sample' (path to the raw observations)")
    if cfg.model is None:
        raise ConfigError("estimate requires 'model' in the config")
    loss = _loss_from(cfg, "estimate")
    values = _read_sample(cfg.sample)
    x, s, ncanon = models.canonicalize(values)
    if cfg.n is not None and cfg.n != ncanon:
        raise ConfigError(
            f"config n = {cfg.n} does not match the sample: {len(values)}"
            f" observations canonicalize to n = {ncanon}"
        )
    setup = models.ProblemSetup(cfg.model, ncanon)
    specs = _estimator_specs(cfg, setup, loss, "estimate")
    rows = []
    ests = []
    for spec in specs:
        mu = float(estimators.evaluate(spec, x, s))
        theta = mu / s
        ests.append({"estimator": spec.label(), "mu": mu, "theta": theta})
        rows.append([spec.label(), _fmt(mu), _fmt(theta)])
    config = {
        "schema": 1, "model": _density_json(cfg), "loss": _loss_json(cfg),
        "estimators": list(cfg.estimators), "sample": cfg.sample,
        "tolerances": _quad_json(cfg),
    }
    brief = "; ".join(f"{e['estimator']}: mu={e['mu']:.6g} theta={e['theta']:.6g}"
                      for e in ests)
    return Output(
        command="estimate",
        config=config,
        summary=f"estimate: x={x:.6g} s={s:.6g} n={ncanon}; {brief}",
        json_result={"sample_size": len(values), "x": x, "s": s, "n": ncanon,
                     "estimates": ests},
        csv_header=["estimator", "mu_hat", "theta_hat"],
        csv_rows=rows,
        csv_comments=[f"sample_size {len(values)}", f"x {_fmt(x)}",
                      f"s {_fmt(s)}", f"n {ncanon}"],
    )


def cmd_suite(cfg, opts):
    tag = opts.tag
    if tag is not None and tag not in suite.known_tags():
        raise ConfigError(f"unknown suite tag {tag!r}; known tags: {suite.known_tags()}")

    def progress(res):
        status = "PASS" if res.passed else "FAIL"
        print(f"  [{status}] {res.name} ({res.runtime:.2f}s)", file=sys.stderr)

    report = suite.run_suite(tag=tag, tolerance=cfg.suite_tolerance,
                             threads=opts.threads, progress=progress)
    config = {"schema": 1, "tolerances": {"suite": cfg.suite_tolerance}}
    if tag is not None:
        config["tag"] = tag
    npass = sum(1 for r in report.results if r.passed)
    failed = [r.name for r in report.results if not r.passed]
    summary = f"suite: {npass}/{len(report.results)} criteria passed ({backend_name()})"
    if failed:
        summary += f"; failed: {', '.join(failed)}"
    rows = [
        [r.name, "pass" if r.passed else "fail", _fmt(r.runtime), ";".join(r.tags)]
        for r in report.results
    ]
    return Output(
        command="suite",
        config=config,
        summary=summary,
        json_result=report.to_json(),
        csv_header=["criterion", "status", "runtime_seconds", "tags"],
        csv_rows=rows,
        exit_code=EXIT_OK if report.passed else EXIT_ACCURACY,
    )


_COMMANDS = {
    "density-check": cmd_density_check,
    "g-table": cmd_g_table,
    "risk-curve": cmd_risk_curve,
    "dominance": cmd_dominance,
    "diagnostics": cmd_diagnostics,
    "estimate": cmd_estimate,
    "suite": cmd_suite,
}

_DEFAULT_FORMAT = {"density-check": "json", "suite": "json"}


# ---------------------------------------------------------------------------
# argument parsing and entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # argparse defaults to exit 2, which this tool reserves for
        # assumption violations
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"),
                        help="output format (default: csv; json for"
                             " density-check and suite)")
    common.add_argument("--seed", type=int, metavar="U64",
                        help="override the config seed")
    common.add_argument("--threads", type=int, default=1, metavar="K",
                        help="worker threads for grid evaluation (default 1)")

    parser = _Parser(prog="posloc",
                     description="Minimax and generalized Bayes estimation of a"
                                 " nonnegative location under unknown scale.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    sub.add_parser("density-check", parents=[common],
                   help="verify the generator shape assumptions")
    sub.add_parser("g-table", parents=[common],
                   help="tabulate the shrink function per prior exponent")
    sub.add_parser("risk-curve", parents=[common],
                   help="risk along a lambda grid for each estimator")
    sub.add_parser("dominance", parents=[common],
                   help="compare two estimators' risks over a lambda grid")
    sub.add_parser("diagnostics", parents=[common],
                   help="psi, slope, and tail diagnostic grids")
    sub.add_parser("estimate", parents=[common],
                   help="canonicalize a raw sample and apply estimators")
    ps = sub.add_parser("suite", parents=[common], help="run the acceptance battery")
    ps.add_argument("--tag", metavar="FILTER", help="run only criteria carrying this tag")
    return parser


def _load_config(args):
    if args.config is None:
        cfg = RunConfig()
    else:
        with open(args.config, encoding="utf-8") as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config {args.config!r} is not valid JSON: {exc}") from exc
        cfg = RunConfig.from_json(obj)
    if args.seed is not None:
        cfg.seed = _as_int(args.seed, "--seed", minimum=0, maximum=2 ** 64 - 1)
    if args.threads < 1:
        raise ConfigError(f"--threads must be >= 1, got {args.threads}")
    return cfg


def run(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "tag"):
        args.tag = None
    try:
        cfg = _load_config(args)
        out = _COMMANDS[args.command](cfg, args)
        fmt = args.format or cfg.output_format or _DEFAULT_FORMAT.get(args.command, "csv")
        path = args.out if args.out is not None else cfg.output_path
        _write_output(out, path, fmt)
    except PoslocError as exc:
        print(f"posloc {args.command}: {exc}", file=sys.stderr)
        return _exit_code_for(exc)
    except OSError as exc:
        print(f"posloc {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(out.summary, file=sys.stderr)
    return out.exit_code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
