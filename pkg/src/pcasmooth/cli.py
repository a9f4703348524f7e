"""Config-driven command line: simulate, estimate, rates, validate-config.

One JSON config schema feeds every verb.  Precedence for settings is config
file < environment variables (prefix ``PCASMOOTH_``, ``__`` for nesting) <
repeatable ``--set key=value`` flags.  All randomness flows from the config's
explicit seed; there is no hidden state, and rerunning a verb with identical
inputs rewrites outputs with identical bytes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .estimators import EstimatorConfig, RegressionSample, kernel_densities, kernel_regressions, partial_sums
from .experiments import (
    BandwidthRule,
    RunConfig,
    _atomic_write,
    bandwidth_for,
    replication_rng,
    run_all,
)
from .hilbert import CurveGrid, curve_to_coeffs, fourier_basis, read_curves, write_curves
from .kernels import kernel
from .spectral import eigendecompose, empirical_covariance, projector_from
from .synthetic import (
    ProcessSpec,
    RegressionModelSpec,
    generate_process,
    generate_regression,
    geometric_spectrum,
    support_half_widths,
    true_projector,
)

__all__ = ["ConfigError", "parse_config", "run", "main", "evaluate_estimates"]

ENV_PREFIX = "PCASMOOTH_"

# Grid resolution used when exporting synthetic curves.
_EXPORT_GRID_POINTS = 256

_DEFAULT_N_GRID = (250, 500, 1000, 2000, 4000)


class ConfigError(ValueError):
    """Invalid or missing configuration; message carries the key path."""


def _fail(path: str, message: str) -> "ConfigError":
    where = path if path else "<config>"
    return ConfigError(f"{where}: {message}")


# Canonical spellings for case-insensitive override keys (env vars arrive
# uppercased; config keys like "J" and "D" are case-sensitive in the file).
_CANONICAL_KEYS = {
    "seed": "seed", "d": "D", "process": "process", "j": "J", "spectrum": "spectrum",
    "kind": "kind", "ratio": "ratio", "scale": "scale", "coefficient_law": "coefficient_law",
    "kernel": "kernel", "family": "family", "model": "model", "target": "target",
    "noise_halfwidth": "noise_halfwidth", "d_true": "D_true", "n_grid": "n_grid",
    "replications": "replications", "bandwidth_rule": "bandwidth_rule", "h": "h", "p": "p",
    "anchors_per_run": "anchors_per_run", "data": "data", "file": "file",
    "grid_rule": "grid_rule", "responses": "responses",
}


def _canonical_path(dotted: str) -> list[str]:
    parts = [seg for seg in dotted.split(".") if seg]
    if not parts:
        raise ConfigError(f"override key {dotted!r} is empty")
    return [_CANONICAL_KEYS.get(seg.lower(), seg) for seg in parts]


def _apply_override(doc: dict, dotted: str, raw: str) -> None:
    path = _canonical_path(dotted)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = doc
    for seg in path[:-1]:
        child = node.get(seg)
        if not isinstance(child, dict):
            child = {}
            node[seg] = child
        node = child
    node[path[-1]] = value


def _collect_env_overrides(env) -> list[tuple[str, str]]:
    pairs = []
    for name in sorted(env):
        if name.startswith(ENV_PREFIX) and len(name) > len(ENV_PREFIX):
            dotted = name[len(ENV_PREFIX):].replace("__", ".")
            pairs.append((dotted, env[name]))
    return pairs


def _expect_mapping(obj, path: str) -> dict:
    if not isinstance(obj, dict):
        raise _fail(path, f"expected an object, got {type(obj).__name__}")
    return obj


def _reject_unknown(obj: dict, allowed: set[str], path: str) -> None:
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise _fail(path, f"unknown key {unknown[0]!r}; allowed keys: {', '.join(sorted(allowed))}")


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise _fail(path, f"missing required key {key!r}")
    return obj[key]


def _as_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise _fail(path, f"expected an integer, got {value!r}")
    return int(value)


def _as_number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise _fail(path, f"expected a number, got {value!r}")
    return float(value)


def _build_process(obj, path: str) -> ProcessSpec:
    section = _expect_mapping(obj, path)
    _reject_unknown(section, {"J", "spectrum", "coefficient_law"}, path)
    J = _as_int(_require(section, "J", path), f"{path}.J")
    spectrum = section.get("spectrum", {"kind": "geometric", "ratio": 0.5, "scale": 1.0})
    if isinstance(spectrum, dict):
        _reject_unknown(spectrum, {"kind", "ratio", "scale"}, f"{path}.spectrum")
        if spectrum.get("kind", "geometric") != "geometric":
            raise _fail(f"{path}.spectrum.kind", f"unknown spectrum kind {spectrum.get('kind')!r}; only 'geometric'")
        lam = geometric_spectrum(J, ratio=float(spectrum.get("ratio", 0.5)),
                                 scale=float(spectrum.get("scale", 1.0)))
    elif isinstance(spectrum, (list, tuple)):
        lam = tuple(_as_number(v, f"{path}.spectrum[{i}]") for i, v in enumerate(spectrum))
    else:
        raise _fail(f"{path}.spectrum", "expected a list of eigenvalues or a geometric-spectrum object")
    law = section.get("coefficient_law", "uniform_sym")
    try:
        return ProcessSpec(J=J, spectrum=lam, coefficient_law=law, seed=0)
    except (ValueError, TypeError) as exc:
        raise _fail(path, str(exc)) from None


def _build_kernel(obj, path: str):
    section = _expect_mapping(obj, path)
    _reject_unknown(section, {"family"}, path)
    family = section.get("family", "naive")
    try:
        return kernel(family)
    except ValueError as exc:
        raise _fail(f"{path}.family", str(exc)) from None


def _build_model(obj, path: str, default_D: int) -> RegressionModelSpec | None:
    if obj is None:
        return None
    section = _expect_mapping(obj, path)
    _reject_unknown(section, {"target", "noise_halfwidth", "D_true"}, path)
    try:
        return RegressionModelSpec(
            target=section.get("target", "sine_quad"),
            noise_halfwidth=_as_number(section.get("noise_halfwidth", 0.25), f"{path}.noise_halfwidth"),
            D_true=_as_int(section.get("D_true", default_D), f"{path}.D_true"),
        )
    except ValueError as exc:
        raise _fail(path, str(exc)) from None


def _build_bandwidth(obj, path: str) -> BandwidthRule:
    section = _expect_mapping(obj, path)
    _reject_unknown(section, {"kind", "h", "p"}, path)
    kind = section.get("kind", "stone")
    try:
        if kind == "fixed":
            return BandwidthRule("fixed", h=_as_number(_require(section, "h", path), f"{path}.h"))
        if kind == "stone":
            return BandwidthRule("stone", p=_as_int(section.get("p", 2), f"{path}.p"))
        return BandwidthRule(kind)
    except ValueError as exc:
        raise _fail(path, str(exc)) from None


def _build_data(obj, path: str) -> dict | None:
    if obj is None:
        return None
    section = _expect_mapping(obj, path)
    _reject_unknown(section, {"file", "grid_rule", "responses"}, path)
    rule = section.get("grid_rule", "periodic")
    if rule not in ("periodic", "trapezoid"):
        raise _fail(f"{path}.grid_rule", f"expected 'periodic' or 'trapezoid', got {rule!r}")
    spec = {"file": str(_require(section, "file", path)), "grid_rule": rule,
            "responses": section.get("responses")}
    if spec["responses"] is not None:
        spec["responses"] = str(spec["responses"])
    return spec


_TOP_KEYS = {"seed", "D", "process", "kernel", "model", "n_grid", "replications",
             "bandwidth_rule", "anchors_per_run", "data"}


def _build_config(doc: dict) -> tuple[RunConfig, dict | None]:
    _expect_mapping(doc, "")
    _reject_unknown(doc, _TOP_KEYS, "")
    seed = _as_int(_require(doc, "seed", ""), "seed")
    D = _as_int(_require(doc, "D", ""), "D")
    process = _build_process(_require(doc, "process", ""), "process")
    kern = _build_kernel(doc.get("kernel", {}), "kernel")
    model = _build_model(doc.get("model", {"target": "sine_quad"}), "model", default_D=D)
    n_grid = doc.get("n_grid", list(_DEFAULT_N_GRID))
    if not isinstance(n_grid, (list, tuple)):
        raise _fail("n_grid", f"expected a list of sample sizes, got {n_grid!r}")
    n_grid = tuple(_as_int(v, f"n_grid[{i}]") for i, v in enumerate(n_grid))
    replications = _as_int(doc.get("replications", 100), "replications")
    bandwidth = _build_bandwidth(doc.get("bandwidth_rule", {}), "bandwidth_rule")
    anchors = _as_int(doc.get("anchors_per_run", 20), "anchors_per_run")
    data = _build_data(doc.get("data"), "data")
    # The process carries the run seed so generation helpers default sanely.
    process = ProcessSpec(J=process.J, spectrum=process.spectrum,
                          coefficient_law=process.coefficient_law, seed=seed)
    try:
        cfg = RunConfig(process=process, D=D, kernel=kern, n_grid=n_grid,
                        replications=replications, bandwidth_rule=bandwidth,
                        anchors_per_run=anchors, seed=seed, model=model)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg, data


def _load_config(path, overrides=(), env=None) -> tuple[RunConfig, dict | None]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if env is None:
        env = os.environ
    for dotted, raw in _collect_env_overrides(env):
        _apply_override(doc, dotted, raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        _apply_override(doc, dotted, raw)
    return _build_config(doc)


def parse_config(path) -> RunConfig:
    """Parse and fully validate a config file into a RunConfig."""
    return _load_config(path)[0]


# Estimation --------------------------------------------------------------


def evaluate_estimates(cfg: RunConfig, predictors, responses=None) -> list[dict]:
    """Fit the empirical projector and evaluate density/regression at anchors.

    Anchors are the first ``anchors_per_run`` rows of the dataset.  Returns
    one record per anchor; ``regression`` is NaN when no responses are given.
    The bandwidth comes from the config's rule at the dataset's actual size.
    """
    X = np.asarray(predictors, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError(f"predictors must be a nonempty (n, J) array, got shape {X.shape}")
    if X.shape[1] != cfg.process.J:
        raise ValueError(f"predictors have dimension {X.shape[1]} but the config says J={cfg.process.J}")
    n = X.shape[0]
    h = bandwidth_for(cfg, n)
    ecfg = EstimatorConfig(cfg.D, h, cfg.kernel)
    P_hat = projector_from(eigendecompose(empirical_covariance(X)), cfg.D)
    anchors = X[: min(cfg.anchors_per_run, n)]
    dens = kernel_densities(X, anchors, P_hat, ecfg)
    empty = ~(partial_sums(X, anchors, P_hat, ecfg) > 0)
    if responses is not None:
        sample = RegressionSample(X, np.asarray(responses, dtype=float))
        regr, regr_empty = kernel_regressions(sample, anchors, P_hat, ecfg)
        if not np.array_equal(regr_empty, empty):
            raise RuntimeError("empty-window flags disagree between density and regression paths")
    else:
        regr = np.full(anchors.shape[0], np.nan)
    return [
        {"anchor_index": i, "n": n, "bandwidth": h, "density": float(dens[i]),
         "regression": float(regr[i]), "empty_window": bool(empty[i])}
        for i in range(anchors.shape[0])
    ]


def _write_estimates_csv(path, records) -> None:
    lines = ["anchor_index,n,bandwidth,density,regression,empty_window"]
    for r in records:
        lines.append(
            f"{r['anchor_index']},{r['n']},{r['bandwidth']!r},{r['density']!r},"
            f"{r['regression']!r},{int(r['empty_window'])}"
        )
    _atomic_write(path, "\n".join(lines) + "\n")


def _read_responses(path) -> np.ndarray:
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    out = np.empty(len(lines))
    for i, ln in enumerate(lines):
        try:
            out[i] = float(ln)
        except ValueError:
            raise ConfigError(f"responses file {path}, line {i + 1}: could not parse {ln!r}") from None
    return out


def _grid_from_points(points: np.ndarray, rule: str) -> CurveGrid:
    if rule == "trapezoid":
        return CurveGrid.trapezoid(points)
    # Periodic rule: uniform spacing with the last interval wrapping around.
    steps = np.diff(points)
    dt = float(steps[0])
    if np.any(np.abs(steps - dt) > 1e-9 * dt):
        raise ConfigError(
            "data.grid_rule is 'periodic' but the curve file's grid is not uniformly spaced; "
            "use grid_rule 'trapezoid'"
        )
    return CurveGrid(points, np.full(points.size, dt))


def _ingest_curves(cfg: RunConfig, data: dict):
    points, curves = read_curves(data["file"])
    grid = _grid_from_points(points, data["grid_rule"])
    basis = fourier_basis(points, cfg.process.J)
    coeffs, _residual = curve_to_coeffs(curves, basis, grid)
    responses = _read_responses(data["responses"]) if data["responses"] else None
    if responses is not None and responses.size != coeffs.shape[0]:
        raise ConfigError(
            f"responses file has {responses.size} values but the curve file has {coeffs.shape[0]} curves"
        )
    return coeffs, responses


# Verbs -------------------------------------------------------------------


def _simulate_stream(cfg: RunConfig, n_index: int) -> np.random.Generator:
    # Exported data reproduces replication 0 of the given grid position.
    return replication_rng(cfg.seed, n_index * cfg.replications)


def _cmd_simulate(cfg: RunConfig, data, out_dir: str, workers: int, log) -> None:
    os.makedirs(out_dir, exist_ok=True)
    grid = CurveGrid.uniform_periodic(_EXPORT_GRID_POINTS)
    basis = fourier_basis(grid.grid_points, cfg.process.J)
    for n_index, n in enumerate(cfg.n_grid):
        rng = _simulate_stream(cfg, n_index)
        X = generate_process(cfg.process, n, seed=rng)
        curve_path = os.path.join(out_dir, f"sample_n{n}.csv")
        write_curves(curve_path, grid.grid_points, X @ basis)
        log(f"simulate: wrote {curve_path}")
        if cfg.model is not None:
            sample = generate_regression(X, cfg.model, true_projector(cfg.process, cfg.model.D_true),
                                         seed=rng, support_half_widths=support_half_widths(cfg.process))
            resp_path = os.path.join(out_dir, f"responses_n{n}.csv")
            _atomic_write(resp_path, "\n".join(repr(float(y)) for y in sample.responses) + "\n")
            log(f"simulate: wrote {resp_path}")


def _cmd_estimate(cfg: RunConfig, data, out_dir: str, workers: int, log) -> None:
    os.makedirs(out_dir, exist_ok=True)
    if data is not None:
        X, Y = _ingest_curves(cfg, data)
        log(f"estimate: ingested {X.shape[0]} curves from {data['file']}")
    else:
        n_index = len(cfg.n_grid) - 1
        rng = _simulate_stream(cfg, n_index)
        X = generate_process(cfg.process, cfg.n_grid[n_index], seed=rng)
        Y = None
        if cfg.model is not None:
            sample = generate_regression(X, cfg.model, true_projector(cfg.process, cfg.model.D_true),
                                         seed=rng, support_half_widths=support_half_widths(cfg.process))
            Y = sample.responses
        log(f"estimate: generated {X.shape[0]} draws from the configured process")
    records = evaluate_estimates(cfg, X, Y)
    path = os.path.join(out_dir, "estimates.csv")
    _write_estimates_csv(path, records)
    log(f"estimate: wrote {path}")


def _cmd_rates(cfg: RunConfig, data, out_dir: str, workers: int, log) -> None:
    paths = run_all(cfg, out_dir, workers=workers, log=log)
    for name in sorted(paths):
        log(f"rates: wrote {paths[name]}")


def _cmd_validate(cfg: RunConfig, data, out_dir, workers: int, log) -> None:
    model = cfg.model.target if cfg.model is not None else "none"
    log(
        f"config OK: J={cfg.process.J} D={cfg.D} law={cfg.process.coefficient_law} "
        f"kernel={cfg.kernel.family} n_grid={list(cfg.n_grid)} replications={cfg.replications} "
        f"bandwidth={cfg.bandwidth_rule.kind} model={model} seed={cfg.seed}"
    )


_VERBS = {
    "simulate": (_cmd_simulate, True),
    "estimate": (_cmd_estimate, True),
    "rates": (_cmd_rates, True),
    "validate-config": (_cmd_validate, False),
}


def run(verb: str, config_path, out_dir=None, *, workers: int = 1, overrides=(),
        env=None, log=None) -> int:
    """Execute one verb; returns the process exit status."""
    if log is None:
        def log(message: str) -> None:
            print(message, file=sys.stderr)
    if verb not in _VERBS:
        raise ValueError(f"unknown verb {verb!r}; valid verbs: {', '.join(_VERBS)}")
    handler, needs_out = _VERBS[verb]
    cfg, data = _load_config(config_path, overrides=overrides, env=env)
    if needs_out and not out_dir:
        raise ConfigError(f"verb {verb!r} requires --out")
    handler(cfg, data, out_dir, workers, log)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pcasmooth",
        description="Projection-then-smooth estimation and its Monte Carlo rate harness.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, (_, needs_out) in _VERBS.items():
        p = sub.add_parser(verb)
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--out", required=needs_out, default=None, help="output directory")
        p.add_argument("--workers", type=int, default=os.cpu_count(),
                       help="worker processes (default: logical processors)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       dest="overrides", help="override a config key (repeatable)")
    args = parser.parse_args(argv)
    try:
        return run(args.verb, args.config, args.out, workers=args.workers,
                   overrides=args.overrides)
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports, not raises
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
