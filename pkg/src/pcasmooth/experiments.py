"""Monte Carlo harness for projector convergence and estimate equivalence rates.

Each experiment sweeps a grid of sample sizes; every (n, replication) pair is
an independent task whose randomness is derived as seed XOR task_index with
task_index = n_index * replications + replication, fed to a counter-based
generator.  One task consumes a single stream in a fixed order (predictors,
anchors, responses), so experiments that share a task function see bitwise
identical data, and the order-preserving worker pool makes serial and
parallel runs produce identical rows.

Within a replication the estimate and the pseudo-estimate share the data,
anchors, kernel and bandwidth; only the projector differs.  Normalizers use
the generator's known projected law when it has a closed form, else an
empirical small-ball estimate from a held-out sample, so the statistic under
test is never normalized by its own noise.
"""

from __future__ import annotations

import json
import math
import multiprocessing
import os
import tempfile
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .estimators import EstimatorConfig, kernel_regressions, partial_sums, weighted_sums
from .kernels import KernelSpec, kernel_moment
from .spectral import (
    eigen_localization,
    eigendecompose,
    empirical_covariance,
    projector_from,
    sup_norm,
)
from .synthetic import (
    ProcessSpec,
    RegressionModelSpec,
    draw_anchors,
    generate_process,
    generate_regression,
    has_exact_small_ball,
    projected_small_ball,
    support_half_widths,
    true_decomposition,
    true_projector,
    unit_ball_volume,
)

__all__ = [
    "HELD_OUT_SALT",
    "HELD_OUT_DRAWS",
    "TARGET_WINDOW_COUNT",
    "RESULT_COLUMNS",
    "BandwidthRule",
    "RunConfig",
    "ExperimentRow",
    "RateFit",
    "replication_key",
    "replication_rng",
    "bandwidth_for",
    "bandwidth_schedule",
    "rate_normalizer",
    "run_projector_convergence",
    "run_sum_equivalence",
    "run_regression_equivalence",
    "run_density_equivalence",
    "fit_log_log_slope",
    "write_rows_csv",
    "read_rows_csv",
    "config_to_jsonable",
    "run_all",
]

# Key for held-out normalizer draws: golden-ratio constant, so the stream
# never collides with any replication key derived by small-integer XOR.
HELD_OUT_SALT = 0x9E3779B97F4A7C15
HELD_OUT_DRAWS = 100_000
# Expected in-window count targeted at the smallest n by the stone rule.
TARGET_WINDOW_COUNT = 20.0

RESULT_COLUMNS = ("experiment", "n", "statistic", "value", "normalizer",
                  "replications", "excluded", "mc_stderr")


@dataclass(frozen=True)
class BandwidthRule:
    """Either a fixed bandwidth or the rate-optimal schedule for p-smooth targets.

    The stone rule is h_n = c * n**(-1/(2p+D)) with c calibrated once per
    config so the expected in-window count at the smallest n is about
    ``TARGET_WINDOW_COUNT`` (windows must not empty out as n grows).
    """

    kind: str
    h: float | None = None
    p: int | None = None

    def __post_init__(self) -> None:
        if self.kind == "fixed":
            if self.h is None or not (np.isfinite(self.h) and self.h > 0):
                raise ValueError(f"fixed bandwidth rule needs h > 0, got {self.h!r}")
            if self.p is not None:
                raise ValueError("fixed bandwidth rule does not take a smoothness order p")
        elif self.kind == "stone":
            if self.h is not None:
                raise ValueError("stone bandwidth rule does not take a fixed h")
            if not (isinstance(self.p, (int, np.integer)) and self.p >= 1):
                raise ValueError(f"stone bandwidth rule needs an integer smoothness p >= 1, got {self.p!r}")
        else:
            raise ValueError(f"unknown bandwidth rule {self.kind!r}; valid kinds: fixed, stone")


@dataclass(frozen=True)
class RunConfig:
    """Everything one experiment suite depends on; all randomness flows from seed."""

    process: ProcessSpec
    D: int
    kernel: KernelSpec
    n_grid: tuple[int, ...]
    replications: int
    bandwidth_rule: BandwidthRule
    anchors_per_run: int
    seed: int
    model: RegressionModelSpec | None = None

    def __post_init__(self) -> None:
        if not (isinstance(self.D, (int, np.integer)) and 1 <= self.D < self.process.J):
            raise ValueError(
                f"projection dimension must satisfy 1 <= D < {self.process.J}, got {self.D!r}"
            )
        grid = tuple(int(n) for n in self.n_grid)
        if len(grid) == 0:
            raise ValueError("n_grid must be nonempty")
        for i, n in enumerate(grid):
            if n < 1:
                raise ValueError(f"n_grid[{i}] must be >= 1, got {n}")
            if i and grid[i] <= grid[i - 1]:
                raise ValueError(
                    f"n_grid must be strictly increasing; entry {i} = {grid[i]} <= entry {i - 1} = {grid[i - 1]}"
                )
        if not (isinstance(self.replications, (int, np.integer)) and self.replications >= 1):
            raise ValueError(f"replications must be an integer >= 1, got {self.replications!r}")
        if not (isinstance(self.anchors_per_run, (int, np.integer)) and self.anchors_per_run >= 1):
            raise ValueError(f"anchors_per_run must be an integer >= 1, got {self.anchors_per_run!r}")
        if not isinstance(self.seed, (int, np.integer)):
            raise TypeError(f"seed must be an integer, got {type(self.seed).__name__}")
        if not 0 <= self.seed < 2 ** 63:
            raise ValueError(f"seed must lie in [0, 2**63), got {self.seed}")
        if self.model is not None and not isinstance(self.model, RegressionModelSpec):
            raise TypeError(f"model must be a RegressionModelSpec or None, got {type(self.model).__name__}")
        object.__setattr__(self, "n_grid", grid)
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class ExperimentRow:
    """One aggregated statistic at one sample size.

    ``value`` is the pooled mean over included replication-anchor units
    (or the stated max/frequency); ``normalizer`` records the comparison
    scale for the statistic; ``excluded`` counts dropped units so that
    excluded + included always equals the configured total; ``mc_stderr``
    is the between-replication standard error of the value.
    """

    experiment: str
    n: int
    statistic: str
    value: float
    normalizer: float
    replications: int
    excluded: int
    mc_stderr: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.value):
            raise ValueError(f"statistic {self.statistic!r} at n={self.n} has non-finite value {self.value!r}")
        if not self.normalizer > 0:
            raise ValueError(f"statistic {self.statistic!r} at n={self.n} has nonpositive normalizer {self.normalizer!r}")


@dataclass(frozen=True)
class RateFit:
    """Least-squares slope of log(value) against log(n)."""

    slope: float
    intercept: float
    r_squared: float

    def __post_init__(self) -> None:
        if not -1e-12 <= self.r_squared <= 1 + 1e-12:
            raise ValueError(f"r_squared must lie in [0, 1], got {self.r_squared!r}")


# Seed derivation ---------------------------------------------------------


def replication_key(seed: int, task_index: int) -> int:
    """Stream key for one task: seed XOR task_index (documented derivation rule)."""
    if task_index < 0:
        raise ValueError(f"task index must be >= 0, got {task_index}")
    return int(seed) ^ int(task_index)


def replication_rng(seed: int, task_index: int) -> np.random.Generator:
    """Counter-based generator for one task's single random stream."""
    return np.random.Generator(np.random.Philox(key=replication_key(seed, task_index)))


# Bandwidth schedules -----------------------------------------------------


def _projected_density(spec: ProcessSpec, D: int) -> float:
    # Constant density of the projected uniform law on its box.
    half = support_half_widths(spec)[:D]
    return float(np.prod(1.0 / (2.0 * half)))


def _invert_small_ball(cfg: RunConfig, mass: float) -> float:
    """Radius whose small-ball mass is ``mass`` at a typical interior anchor."""
    spec = cfg.process
    if has_exact_small_ball(spec):
        coef = _projected_density(spec, cfg.D) * unit_ball_volume(cfg.D)
        h = (mass / coef) ** (1.0 / cfg.D)
        tight = float(support_half_widths(spec)[: cfg.D].min())
        if h > tight:
            raise ValueError(
                f"bandwidth calibration needs radius {h!r} but the projected support box "
                f"has half-width {tight!r}; lower the target count or enlarge the spectrum scale"
            )
        return h
    # No closed form: use the quantile of held-out projected pair distances,
    # i.e. the small-ball mass averaged over anchors drawn from the law.
    held = generate_process(spec, HELD_OUT_DRAWS, seed=cfg.seed ^ HELD_OUT_SALT)
    Z = held[:, : cfg.D]
    half = Z.shape[0] // 2
    pair_d = np.linalg.norm(Z[:half] - Z[half: 2 * half], axis=1)
    return float(np.quantile(pair_d, mass))


def _stone_constant(cfg: RunConfig) -> float:
    rule = cfg.bandwidth_rule
    n0 = cfg.n_grid[0]
    m1 = kernel_moment(cfg.kernel, cfg.D, 1)
    mass = TARGET_WINDOW_COUNT / (m1 * n0)
    if not mass < 1.0:
        raise ValueError(
            f"smallest sample size {n0} cannot reach the target in-window count "
            f"{TARGET_WINDOW_COUNT}; required small-ball mass {mass!r} >= 1"
        )
    h0 = _invert_small_ball(cfg, mass)
    return h0 * n0 ** (1.0 / (2 * rule.p + cfg.D))


def bandwidth_for(cfg: RunConfig, n: int) -> float:
    """Bandwidth at sample size ``n`` under the config's rule."""
    rule = cfg.bandwidth_rule
    if rule.kind == "fixed":
        return float(rule.h)
    return _stone_constant(cfg) * float(n) ** (-1.0 / (2 * rule.p + cfg.D))


def bandwidth_schedule(cfg: RunConfig) -> dict[int, float]:
    """Bandwidths for every n in the grid (stone constant computed once)."""
    rule = cfg.bandwidth_rule
    if rule.kind == "fixed":
        return {n: float(rule.h) for n in cfg.n_grid}
    c = _stone_constant(cfg)
    expo = -1.0 / (2 * rule.p + cfg.D)
    return {n: c * float(n) ** expo for n in cfg.n_grid}


def rate_normalizer(n: int, h: float) -> float:
    """The equivalence-rate scale log(n h^2)/(n h^2); needs n h^2 > 1."""
    nh2 = n * h * h
    if not nh2 > 1.0:
        raise ValueError(
            f"rate normalizer undefined: n*h^2 = {nh2!r} <= 1 at n={n}, h={h!r}; "
            "the bandwidth schedule shrinks too fast for this sample size"
        )
    return math.log(nh2) / nh2


# Normalizers -------------------------------------------------------------


def _exact_interior_normalizer(cfg: RunConfig, h: float) -> float | None:
    """Small-ball mass at radius h for margin-filtered anchors, when exact.

    Anchors are drawn with margin >= h to every face of the projected
    support box, so the ball never leaves the box and the mass is the
    constant density times the ball volume, identical for all anchors.
    Returns None when the law has no closed form.
    """
    if not has_exact_small_ball(cfg.process):
        return None
    # Consistency pin: the generic closed form at the box center must agree.
    value = _projected_density(cfg.process, cfg.D) * unit_ball_volume(cfg.D) * h ** cfg.D
    check = projected_small_ball(cfg.process, cfg.D, np.zeros(cfg.D), h)
    if abs(value - check) > 1e-12 * max(value, check):
        raise RuntimeError(f"closed-form normalizer mismatch: {value!r} vs {check!r}")
    return value


# Held-out projected draws for empirical normalizers, installed per worker.
_HELDOUT: np.ndarray | None = None


def _set_heldout(arr: np.ndarray | None) -> None:
    global _HELDOUT
    _HELDOUT = arr


def _heldout_for(cfg: RunConfig) -> np.ndarray | None:
    if has_exact_small_ball(cfg.process):
        return None
    held = generate_process(cfg.process, HELD_OUT_DRAWS, seed=cfg.seed ^ HELD_OUT_SALT)
    return np.ascontiguousarray(held[:, : cfg.D])


def _empirical_small_ball(anchors_proj: np.ndarray, h: float) -> np.ndarray:
    if _HELDOUT is None:
        raise RuntimeError("held-out sample not installed; run through the experiment runners")
    mass = (cdist(anchors_proj, _HELDOUT) <= h).mean(axis=1)
    if np.any(mass == 0):
        bad = int(np.argmin(mass))
        raise RuntimeError(
            f"held-out small-ball estimate is zero at anchor {bad} with radius {h!r}; "
            f"{_HELDOUT.shape[0]} draws cannot resolve the normalizer at this bandwidth"
        )
    return mass


# Tasks (module level for picklability) -----------------------------------


def _projector_task(cfg: RunConfig, n: int, task_index: int, override: bool) -> dict:
    truth = true_decomposition(cfg.process)
    if override:
        emp = truth
    else:
        rng = replication_rng(cfg.seed, task_index)
        X = generate_process(cfg.process, n, seed=rng)
        emp = eigendecompose(empirical_covariance(X))
    localized = eigen_localization(emp, truth, cfg.D)
    try:
        P_hat = projector_from(emp, cfg.D)
    except ValueError:
        return {"gap_failed": True, "localized": localized, "sup_err": None}
    err = sup_norm(P_hat - true_projector(cfg.process, cfg.D))
    return {"gap_failed": False, "localized": localized, "sup_err": err}


def _equivalence_task(cfg: RunConfig, n: int, task_index: int, h: float,
                      f_exact: float | None, with_model: bool, override: bool) -> dict:
    # One stream per task, consumed in fixed order: predictors, anchors,
    # responses.  The sum and density runners both call with
    # with_model=False, which makes their data bitwise identical.
    rng = replication_rng(cfg.seed, task_index)
    spec = cfg.process
    X = generate_process(spec, n, seed=rng)
    model = cfg.model if with_model else None
    anchors = draw_anchors(spec, cfg.anchors_per_run, cfg.D, h_margin=h, seed=rng, model=model)
    sample = None
    if with_model:
        target_proj = true_projector(spec, model.D_true)
        sample = generate_regression(X, model, target_proj, seed=rng,
                                     support_half_widths=support_half_widths(spec))

    P_true = true_projector(spec, cfg.D)
    if override:
        P_hat, gap_failed = P_true, False
    else:
        try:
            P_hat = projector_from(eigendecompose(empirical_covariance(X)), cfg.D)
            gap_failed = False
        except ValueError:
            P_hat, gap_failed = None, True

    ecfg = EstimatorConfig(cfg.D, h, cfg.kernel)
    out: dict = {"gap_failed": gap_failed}
    out["sum_true"] = partial_sums(X, anchors, P_true, ecfg)
    if f_exact is not None:
        out["f_vals"] = np.full(cfg.anchors_per_run, f_exact)
    else:
        out["f_vals"] = _empirical_small_ball(anchors[:, : cfg.D], h)
    if with_model:
        out["z_true"] = weighted_sums(sample, anchors, P_true, ecfg)
        out["r_true"], out["empty_true"] = kernel_regressions(sample, anchors, P_true, ecfg)
    if not gap_failed:
        out["sum_hat"] = partial_sums(X, anchors, P_hat, ecfg)
        if with_model:
            out["z_hat"] = weighted_sums(sample, anchors, P_hat, ecfg)
            out["r_hat"], out["empty_hat"] = kernel_regressions(sample, anchors, P_hat, ecfg)
    return out


def _map_tasks(fn, args, workers: int, heldout: np.ndarray | None):
    if workers <= 1:
        _set_heldout(heldout)
        try:
            return [fn(*a) for a in args]
        finally:
            _set_heldout(None)
    chunk = max(1, len(args) // (workers * 8))
    with multiprocessing.Pool(workers, initializer=_set_heldout, initargs=(heldout,)) as pool:
        # starmap preserves argument order, which the deterministic
        # aggregation relies on.
        return pool.starmap(fn, args, chunksize=chunk)


# Aggregation helpers -----------------------------------------------------


def _se_of_means(means: list[float]) -> float:
    if len(means) < 2:
        return 0.0
    arr = np.asarray(means)
    return float(arr.std(ddof=1) / math.sqrt(arr.size))


def _pooled(pairs: list[tuple[float, int]]) -> float:
    total = sum(s for s, _ in pairs)
    count = sum(c for _, c in pairs)
    if count == 0:
        raise RuntimeError("no included replication-anchor units; cannot form the statistic")
    return total / count


def _included(reps: list[dict], experiment: str, n: int) -> list[dict]:
    kept = [r for r in reps if not r["gap_failed"]]
    if not kept:
        raise RuntimeError(f"{experiment} at n={n}: every replication hit an eigengap failure")
    return kept


# Experiment runners ------------------------------------------------------


def _task_grid(cfg: RunConfig):
    for n_index, n in enumerate(cfg.n_grid):
        for rep in range(cfg.replications):
            yield n_index, n, n_index * cfg.replications + rep


def run_projector_convergence(cfg: RunConfig, *, workers: int = 1,
                              override_empirical: bool = False) -> list[ExperimentRow]:
    """Sup-norm error of the empirical projector across the n grid.

    Per n emits: mean squared sup-norm error (normalizer 1/n, the mean-square
    rate), the max over replications of error/sqrt(log n / n) (the
    almost-sure rate diagnostic), and the frequency of the eigenvalue
    localization event.  Replications whose eigengap collapses are excluded
    and counted.  ``override_empirical`` forces the decomposition of the
    exact covariance (errors become exactly 0).
    """
    args = [(cfg, n, idx, override_empirical) for _, n, idx in _task_grid(cfg)]
    results = _map_tasks(_projector_task, args, workers, None)
    R = cfg.replications
    rows: list[ExperimentRow] = []
    for i, n in enumerate(cfg.n_grid):
        reps = results[i * R: (i + 1) * R]
        sups = np.asarray([r["sup_err"] for r in reps if not r["gap_failed"]])
        excluded = R - sups.size
        if sups.size == 0:
            raise RuntimeError(f"projector_convergence at n={n}: every replication hit an eigengap failure")
        as_rate = math.sqrt(math.log(n) / n)
        locs = np.asarray([r["localized"] for r in reps], dtype=float)
        freq = float(locs.mean())
        rows.append(ExperimentRow("projector_convergence", n, "proj_err_sq_mean",
                                  float(np.mean(sups ** 2)), 1.0 / n, R, excluded,
                                  _se_of_means(list(sups ** 2))))
        rows.append(ExperimentRow("projector_convergence", n, "proj_err_over_rate_max",
                                  float(sups.max() / as_rate), as_rate, R, excluded,
                                  _se_of_means(list(sups / as_rate))))
        rows.append(ExperimentRow("projector_convergence", n, "localization_freq",
                                  freq, 1.0, R, 0,
                                  math.sqrt(max(freq * (1.0 - freq), 0.0) / R)))
    return rows


def _collect_equivalence(cfg: RunConfig, with_model: bool, workers: int, override: bool):
    schedule = bandwidth_schedule(cfg)
    exact = {n: _exact_interior_normalizer(cfg, schedule[n]) for n in cfg.n_grid}
    heldout = _heldout_for(cfg)
    args = [(cfg, n, idx, schedule[n], exact[n], with_model, override)
            for _, n, idx in _task_grid(cfg)]
    results = _map_tasks(_equivalence_task, args, workers, heldout)
    R = cfg.replications
    grouped = {n: results[i * R: (i + 1) * R] for i, n in enumerate(cfg.n_grid)}
    return schedule, grouped


def _sum_rows(cfg: RunConfig, experiment: str, n: int, h: float, reps: list[dict]) -> list[ExperimentRow]:
    R, A = cfg.replications, cfg.anchors_per_run
    kept = _included(reps, experiment, n)
    excl_units = (R - len(kept)) * A
    ratio_pairs: list[tuple[float, int]] = []
    ratio_means: list[float] = []
    anchor_excl = 0
    norm_means: list[float] = []
    shat_means: list[float] = []
    for r in kept:
        st, sh = r["sum_true"], r["sum_hat"]
        valid = st > 0
        anchor_excl += int(A - valid.sum())
        if valid.any():
            dev = np.abs(sh[valid] / st[valid] - 1.0)
            ratio_pairs.append((float(dev.sum()), int(dev.size)))
            ratio_means.append(float(dev.mean()))
        norm_means.append(float((st / (n * r["f_vals"])).mean()))
        shat_means.append(float(sh.mean()))
    m1 = kernel_moment(cfg.kernel, cfg.D, 1)
    return [
        ExperimentRow(experiment, n, "sum_ratio_absdev_mean", _pooled(ratio_pairs), 1.0,
                      R, excl_units + anchor_excl, _se_of_means(ratio_means)),
        ExperimentRow(experiment, n, "sum_normalized_mean", float(np.mean(norm_means)), m1,
                      R, excl_units, _se_of_means(norm_means)),
        ExperimentRow(experiment, n, "sum_hat_mean", float(np.mean(shat_means)), 1.0,
                      R, excl_units, _se_of_means(shat_means)),
    ]


def run_sum_equivalence(cfg: RunConfig, *, workers: int = 1,
                        override_empirical: bool = False) -> list[ExperimentRow]:
    """Relative agreement of kernel partial sums under the two projectors.

    Per n emits: pooled mean of |S_hat/S_true - 1| over anchors with
    S_true > 0 (zero-sum anchors excluded and counted), the pooled mean of
    S_true/(n F(h_n)) whose comparison scale is the first kernel moment, and
    the raw per-replication mean of S_hat shared bit-for-bit with the
    density experiment.  Requires D > 2, the regime where the equivalence
    guarantees hold.
    """
    if cfg.D <= 2:
        raise ValueError(f"sum equivalence requires projection dimension D > 2, got D={cfg.D}")
    schedule, grouped = _collect_equivalence(cfg, False, workers, override_empirical)
    rows: list[ExperimentRow] = []
    for n in cfg.n_grid:
        rows.extend(_sum_rows(cfg, "sum_equivalence", n, schedule[n], grouped[n]))
    return rows


def run_density_equivalence(cfg: RunConfig, *, workers: int = 1,
                            override_empirical: bool = False) -> list[ExperimentRow]:
    """Mean squared difference of density estimate vs pseudo-estimate.

    Per n emits the raw MSE (normalizer log(n h^2)/(n h^2)), the normalized
    MSE, and the same ``sum_hat_mean`` rows as :func:`run_sum_equivalence`
    computed from bitwise-identical data (same seeds, same task function).
    """
    if cfg.D <= 2:
        raise ValueError(f"density equivalence requires projection dimension D > 2, got D={cfg.D}")
    schedule, grouped = _collect_equivalence(cfg, False, workers, override_empirical)
    R, A = cfg.replications, cfg.anchors_per_run
    rows: list[ExperimentRow] = []
    for n in cfg.n_grid:
        h = schedule[n]
        reps = grouped[n]
        kept = _included(reps, "density_equivalence", n)
        excl_units = (R - len(kept)) * A
        rate = rate_normalizer(n, h)
        scale = 1.0 / (n * h ** cfg.D)
        sq_means = [float(np.mean(((r["sum_hat"] - r["sum_true"]) * scale) ** 2)) for r in kept]
        mse = float(np.mean(sq_means))
        se = _se_of_means(sq_means)
        rows.append(ExperimentRow("density_equivalence", n, "dens_mse", mse, rate, R, excl_units, se))
        rows.append(ExperimentRow("density_equivalence", n, "dens_mse_over_rate", mse / rate, 1.0,
                                  R, excl_units, se / rate))
        rows.extend(row for row in _sum_rows(cfg, "density_equivalence", n, h, reps)
                    if row.statistic == "sum_hat_mean")
    return rows


def run_regression_equivalence(cfg: RunConfig, *, workers: int = 1,
                               override_empirical: bool = False) -> list[ExperimentRow]:
    """Mean squared difference of regression estimate vs pseudo-estimate.

    Anchors are drawn with |target| >= 0.1 so relative statements are well
    scaled.  Per n emits the raw MSE over anchors where both windows are
    nonempty (normalizer log(n h^2)/(n h^2)), the normalized MSE, and the
    pooled |Z_hat/Z_true - 1| ratio over anchors with Z_true != 0.
    Empty-window and zero-numerator anchors are excluded and counted.
    """
    if cfg.model is None:
        raise ValueError("regression equivalence requires a regression model in the config")
    schedule, grouped = _collect_equivalence(cfg, True, workers, override_empirical)
    R, A = cfg.replications, cfg.anchors_per_run
    rows: list[ExperimentRow] = []
    for n in cfg.n_grid:
        h = schedule[n]
        kept = _included(grouped[n], "regression_equivalence", n)
        excl_units = (R - len(kept)) * A
        rate = rate_normalizer(n, h)
        sq_pairs: list[tuple[float, int]] = []
        sq_means: list[float] = []
        window_excl = 0
        z_pairs: list[tuple[float, int]] = []
        z_means: list[float] = []
        z_excl = 0
        for r in kept:
            ok = ~(r["empty_true"] | r["empty_hat"])
            window_excl += int(A - ok.sum())
            if ok.any():
                sq = (r["r_hat"][ok] - r["r_true"][ok]) ** 2
                sq_pairs.append((float(sq.sum()), int(sq.size)))
                sq_means.append(float(sq.mean()))
            zok = r["z_true"] != 0
            z_excl += int(A - zok.sum())
            if zok.any():
                zdev = np.abs(r["z_hat"][zok] / r["z_true"][zok] - 1.0)
                z_pairs.append((float(zdev.sum()), int(zdev.size)))
                z_means.append(float(zdev.mean()))
        mse = _pooled(sq_pairs)
        se = _se_of_means(sq_means)
        rows.append(ExperimentRow("regression_equivalence", n, "regr_mse", mse, rate,
                                  R, excl_units + window_excl, se))
        rows.append(ExperimentRow("regression_equivalence", n, "regr_mse_over_rate", mse / rate, 1.0,
                                  R, excl_units + window_excl, se / rate))
        rows.append(ExperimentRow("regression_equivalence", n, "zsum_ratio_absdev_mean",
                                  _pooled(z_pairs), 1.0, R, excl_units + z_excl,
                                  _se_of_means(z_means)))
    return rows


# Rate fitting ------------------------------------------------------------


def fit_log_log_slope(rows) -> RateFit:
    """Ordinary least squares of log(value) on log(n) over experiment rows.

    Needs at least 3 rows, all with positive values; a nonpositive value is
    an error naming the row since its log is undefined.
    """
    rows = list(rows)
    if len(rows) < 3:
        raise ValueError(f"rate fitting needs at least 3 rows, got {len(rows)}")
    for row in rows:
        if not row.value > 0:
            raise ValueError(
                f"cannot fit a log-log rate: row (experiment={row.experiment!r}, "
                f"statistic={row.statistic!r}, n={row.n}) has nonpositive value {row.value!r}"
            )
    x = np.log([row.n for row in rows])
    y = np.log([row.value for row in rows])
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RateFit(float(slope), float(intercept), float(min(max(r2, 0.0), 1.0)))


# Result emission ---------------------------------------------------------


def _atomic_write(path, text: str) -> None:
    # Never leave a partially written output behind.
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".partial")
    try:
        with os.fdopen(fd, "w", encoding="ascii") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_rows_csv(path, rows) -> None:
    """Write rows as delimited text; floats use repr so reruns are byte-identical."""
    lines = [",".join(RESULT_COLUMNS)]
    for row in rows:
        lines.append(
            f"{row.experiment},{row.n},{row.statistic},{row.value!r},{row.normalizer!r},"
            f"{row.replications},{row.excluded},{row.mc_stderr!r}"
        )
    _atomic_write(path, "\n".join(lines) + "\n")


def read_rows_csv(path) -> list[ExperimentRow]:
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != ",".join(RESULT_COLUMNS):
        raise ValueError(f"{path}: missing or wrong header row")
    rows = []
    for i, line in enumerate(lines[1:], start=1):
        parts = line.split(",")
        if len(parts) != len(RESULT_COLUMNS):
            raise ValueError(f"{path}, row {i}: expected {len(RESULT_COLUMNS)} fields, got {len(parts)}")
        rows.append(ExperimentRow(parts[0], int(parts[1]), parts[2], float(parts[3]),
                                  float(parts[4]), int(parts[5]), int(parts[6]), float(parts[7])))
    return rows


def config_to_jsonable(cfg: RunConfig) -> dict:
    """Deterministic plain-dict echo of a RunConfig for summaries."""
    doc = {
        "seed": cfg.seed,
        "D": cfg.D,
        "process": {
            "J": cfg.process.J,
            "spectrum": list(cfg.process.spectrum),
            "coefficient_law": cfg.process.coefficient_law,
        },
        "kernel": {"family": cfg.kernel.family},
        "n_grid": list(cfg.n_grid),
        "replications": cfg.replications,
        "bandwidth_rule": {"kind": cfg.bandwidth_rule.kind,
                           "h": cfg.bandwidth_rule.h,
                           "p": cfg.bandwidth_rule.p},
        "anchors_per_run": cfg.anchors_per_run,
        "model": None,
    }
    if cfg.model is not None:
        doc["model"] = {"target": cfg.model.target,
                        "noise_halfwidth": cfg.model.noise_halfwidth,
                        "D_true": cfg.model.D_true}
    return doc


_SUMMARY_FIT_STATISTIC = {
    "projector_convergence": "proj_err_sq_mean",
    "sum_equivalence": "sum_ratio_absdev_mean",
    "regression_equivalence": "regr_mse",
    "density_equivalence": "dens_mse",
}


def run_all(cfg: RunConfig, out_dir, *, workers: int = 1, log=None) -> dict[str, str]:
    """Run every applicable experiment; write one CSV each plus summary.json.

    Returns a mapping from experiment name (plus "summary") to the written
    path.  The regression experiment runs only when the config has a model.
    Outputs are written atomically and are byte-identical across reruns with
    the same config, serial or parallel.
    """
    os.makedirs(out_dir, exist_ok=True)
    runners = [
        ("projector_convergence", run_projector_convergence),
        ("sum_equivalence", run_sum_equivalence),
        ("regression_equivalence", run_regression_equivalence),
        ("density_equivalence", run_density_equivalence),
    ]
    paths: dict[str, str] = {}
    fits: dict[str, dict] = {}
    for name, runner in runners:
        if name == "regression_equivalence" and cfg.model is None:
            continue
        if log is not None:
            log(f"running {name} (n_grid={list(cfg.n_grid)}, replications={cfg.replications})")
        rows = runner(cfg, workers=workers)
        path = os.path.join(out_dir, f"{name}.csv")
        write_rows_csv(path, rows)
        paths[name] = path
        stat = _SUMMARY_FIT_STATISTIC[name]
        fit = fit_log_log_slope([row for row in rows if row.statistic == stat])
        fits[name] = {stat: {"slope": fit.slope, "intercept": fit.intercept,
                             "r_squared": fit.r_squared}}
    summary = {"config": config_to_jsonable(cfg), "rate_fits": fits}
    summary_path = os.path.join(out_dir, "summary.json")
    _atomic_write(summary_path, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    paths["summary"] = summary_path
    return paths
