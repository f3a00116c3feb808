"""Sample-size sweeps for the synthetic examples.

A trial draws ``n`` samples, holds out the last tenth for testing, estimates
the subspace on the rest, regresses on the projected training inputs and
records the projection distance to the planted subspace together with the
test RMSE. A sweep repeats trials over a grid of ``n`` and fits log-log
slopes of the mean errors.
"""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import List, Optional

import numpy as np
from scipy.linalg import orthogonal_procrustes

from .dataset import Dataset, Truth
from .estimators import (
    DegenerateError,
    GcrParams,
    NoPairsError,
    gcr_fit,
    scr_fit,
    sir_fit,
    structure_violations,
)
from .geometry import projection_distance
from .io import fmt
from .regression import ComposedModel, fit_kernel, fit_stage_two
from .synthetic import get_example, make_example

logger = logging.getLogger(__name__)

METHODS = ("GCR", "SCR", "SIR", "AMBIENT")
RULE_TYPES = ("scaled", "absolute", "inverse_n")
REGRESSORS = ("piecewise_poly", "kernel")


class ConfigError(ValueError):
    pass


def evaluate_rule(rule: dict, n: int, D: int) -> float:
    """``scaled``: C n^(-1/D); ``inverse_n``: C / n; ``absolute``: C."""
    kind, C = rule["type"], float(rule["C"])
    if kind == "scaled":
        return C * n ** (-1.0 / D)
    if kind == "inverse_n":
        return C / n
    if kind == "absolute":
        return C
    raise ConfigError(f"unknown rule type {kind!r}; expected one of {RULE_TYPES}")


# Threshold defaults per (method, example, noise percent). Keys with noise
# None match any noise level for that example.
_GCR_ALPHA = {
    ("1", None): {"type": "absolute", "C": 1e-3},
    ("2a", None): {"type": "scaled", "C": 1 / 200},
    ("2b", None): {"type": "scaled", "C": 1 / 400},
    ("3", 0): {"type": "scaled", "C": 1 / 120},
    ("3", 5): {"type": "scaled", "C": 1 / 50},
    ("3", 50): {"type": "scaled", "C": 0.3},
    ("4", 0): {"type": "scaled", "C": 1 / 5},
    ("4", 5): {"type": "scaled", "C": 1 / 50},
    ("4", 50): {"type": "scaled", "C": 1.0},
}
_SCR_ALPHA = {
    ("1", None): {"type": "absolute", "C": 1e-2},
    ("2a", None): {"type": "inverse_n", "C": 2.0},
    ("2b", None): {"type": "inverse_n", "C": 2.0},
    ("3", 0): {"type": "inverse_n", "C": 2.0},
    ("3", 5): {"type": "inverse_n", "C": 1.0},
    ("3", 50): {"type": "inverse_n", "C": 24.0},
    ("4", 5): {"type": "inverse_n", "C": 1.0},
    ("4", 50): {"type": "inverse_n", "C": 24.0},
}


def _lookup(table, example, noise, fallback):
    if (example, None) in table:
        return dict(table[(example, None)])
    keyed = [(abs(p - noise), p) for (e, p) in table if e == example and p is not None]
    if keyed:
        return dict(table[(example, min(keyed)[1])])
    return dict(fallback)


def default_alpha_rule(method: str, example, noise: float) -> Optional[dict]:
    example = str(example).lower()
    if method == "GCR":
        heavy = noise >= 25
        fallback = {"type": "scaled", "C": 1.0 if heavy else 1 / 50}
        return _lookup(_GCR_ALPHA, example, noise, fallback)
    if method == "SCR":
        fallback = {"type": "inverse_n", "C": 24.0 if noise >= 25 else 1.0}
        return _lookup(_SCR_ALPHA, example, noise, fallback)
    return None


def default_r_rule(example) -> dict:
    if str(example) == "1":
        return {"type": "absolute", "C": 0.01}
    return {"type": "scaled", "C": 2.0}


@dataclass
class ExperimentConfig:
    example: str
    method: str
    noise: float = 0.0
    n_grid: List[int] = field(default_factory=lambda: [1000, 1995, 3981])
    trials: int = 10
    d: Optional[int] = None
    alpha_rule: Optional[dict] = None
    r_rule: Optional[dict] = None
    regressor: str = "piecewise_poly"
    smoothness: float = 2.0
    slice_target: int = 200
    n_slices: Optional[int] = None
    candidate_cap: Optional[int] = None
    master_seed: int = 0
    label: Optional[str] = None

    def __post_init__(self):
        self.example = str(self.example).lower()
        self.method = str(self.method).upper()
        try:
            spec = get_example(self.example)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.d is None:
            self.d = spec.d
        if not 1 <= self.d <= spec.D:
            raise ConfigError(f"d must lie in [1, {spec.D}]")
        self.n_grid = [int(v) for v in self.n_grid]
        if not self.n_grid or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ConfigError("n_grid must be a nonempty strictly increasing list")
        if min(self.n_grid) < 20:
            raise ConfigError("every n in n_grid must be at least 20")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.noise < 0:
            raise ConfigError("noise must be nonnegative")
        if self.regressor not in REGRESSORS:
            raise ConfigError(f"regressor must be one of {REGRESSORS}")
        if self.alpha_rule is None:
            self.alpha_rule = default_alpha_rule(self.method, self.example, self.noise)
        if self.r_rule is None and self.method == "GCR":
            self.r_rule = default_r_rule(self.example)
        if self.n_slices is None and self.method == "SIR" and self.example == "1":
            self.n_slices = 10
        if self.n_slices is not None and self.n_slices < 2:
            raise ConfigError("n_slices must be at least 2")
        if self.slice_target < 1:
            raise ConfigError("slice_target must be at least 1")
        for name in ("alpha_rule", "r_rule"):
            rule = getattr(self, name)
            if rule is None:
                continue
            if set(rule) != {"type", "C"} or rule["type"] not in RULE_TYPES:
                raise ConfigError(f"{name} must be {{'type': one of {RULE_TYPES}, 'C': number}}")
        if self.label is None:
            self.label = self.method

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        for req in ("example", "method"):
            if req not in doc:
                raise ConfigError(f"missing required config key: {req}")
        try:
            return cls(**doc)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrialResult:
    n: int
    trial: int
    seed: int
    subspace_error: Optional[float]
    regression_error: Optional[float]
    n_alpha: Optional[int] = None
    structure_ok: Optional[bool] = None  # GCR pairing invariants held
    failed: bool = False
    message: str = ""
    wall_time: float = field(default=0.0, compare=False)

    def to_dict(self, timing: bool = False) -> dict:
        doc = asdict(self)
        if not timing:
            doc.pop("wall_time")
        return doc


def split_train_test(data: Dataset):
    """Last ``ceil(n / 10)`` samples in generation order form the test set."""
    n_test = math.ceil(data.n / 10)
    idx = np.arange(data.n)
    return data.subset(idx[: data.n - n_test]), data.subset(idx[data.n - n_test:])


def fit_regressor(Z, y, config: ExperimentConfig):
    if config.regressor == "kernel":
        return fit_kernel(Z, y)
    return fit_stage_two(Z, y, config.smoothness)


def fit_subspace(train: Dataset, config: ExperimentConfig, n: int):
    """Basis for the configured method; thresholds are evaluated at ``n``.

    Returns ``(basis, n_alpha, structure_ok)``; the last two are ``None``
    except for GCR.
    """
    D = train.D
    if config.method == "GCR":
        params = GcrParams(
            alpha=evaluate_rule(config.alpha_rule, n, D),
            r=evaluate_rule(config.r_rule, n, D),
            candidate_cap=config.candidate_cap,
        )
        report = gcr_fit(train, params, config.d)
        problems = structure_violations(report, train.X)
        for msg in problems:
            logger.error("GCR invariant violated: %s", msg)
        return report.basis, report.n_alpha, not problems
    if config.method == "SCR":
        return scr_fit(train, evaluate_rule(config.alpha_rule, n, D), config.d), None, None
    if config.method == "SIR":
        return sir_fit(train, config.d, config.slice_target, config.n_slices), None, None
    return np.eye(D), None, None


def run_trial(config: ExperimentConfig, n: int, trial_seed: int, trial: int = 0) -> TrialResult:
    t0 = time.perf_counter()
    data = make_example(config.example, n, config.noise, seed=trial_seed)
    train, test = split_train_test(data)
    try:
        basis, n_alpha, structure_ok = fit_subspace(train, config, n)
    except (NoPairsError, DegenerateError) as exc:
        return TrialResult(n, trial, trial_seed, None, None, failed=True, message=str(exc),
                           wall_time=time.perf_counter() - t0)
    if config.method == "AMBIENT":
        g_hat = fit_kernel(train.X, train.y)
        sub_err = 1.0
    else:
        g_hat = fit_regressor(train.X @ basis, train.y, config)
        sub_err = projection_distance(basis, data.truth.phi)
    model = ComposedModel(basis, g_hat)
    resid = model.predict(test.X) - test.y
    rmse = float(np.sqrt(np.mean(resid ** 2)))
    return TrialResult(n, trial, trial_seed, sub_err, rmse, n_alpha, structure_ok,
                       wall_time=time.perf_counter() - t0)


def trial_seed(master_seed: int, n_index: int, trial: int) -> int:
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(n_index, trial))
    return int(ss.generate_state(1, np.uint32)[0])


def fit_loglog_slope(ns, errors):
    """Least-squares line through ``(log10 n, log10 error)``; returns (slope, intercept)."""
    lx = np.log10(np.asarray(ns, dtype=float))
    ly = np.log10(np.asarray(errors, dtype=float))
    if lx.size < 2:
        return None, None
    xm, ym = lx.mean(), ly.mean()
    dx = lx - xm
    slope = float(dx @ (ly - ym) / (dx @ dx))
    return slope, float(ym - slope * xm)


@dataclass
class SweepResult:
    config: ExperimentConfig
    trials: List[TrialResult]
    summary: List[dict]
    subspace_slope: Optional[float]
    subspace_intercept: Optional[float]
    regression_slope: Optional[float]
    regression_intercept: Optional[float]

    def to_dict(self, timing: bool = False) -> dict:
        return {
            "config": self.config.to_dict(),
            "summary": self.summary,
            "subspace_slope": self.subspace_slope,
            "subspace_intercept": self.subspace_intercept,
            "regression_slope": self.regression_slope,
            "regression_intercept": self.regression_intercept,
            "trials": [t.to_dict(timing) for t in self.trials],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        cols = ["n", "mean_subspace_error", "std_subspace_error",
                "mean_regression_error", "std_regression_error", "failures"]
        lines = [",".join(cols)]
        for row in self.summary:
            lines.append(",".join("" if row[c] is None else (fmt(row[c]) if isinstance(row[c], float) else str(row[c]))
                                  for c in cols))
        return "\n".join(lines) + "\n"


def aggregate(config: ExperimentConfig, trials: List[TrialResult]) -> SweepResult:
    trials = sorted(trials, key=lambda t: (t.n, t.trial))
    summary = []
    for n in config.n_grid:
        group = [t for t in trials if t.n == n]
        ok = [t for t in group if not t.failed]
        row = {"n": n, "trials_run": len(group), "trials_succeeded": len(ok), "failures": len(group) - len(ok)}
        for key in ("subspace_error", "regression_error"):
            vals = np.array([getattr(t, key) for t in ok], dtype=float)
            row[f"mean_{key}"] = float(vals.mean()) if vals.size else None
            row[f"std_{key}"] = float(vals.std()) if vals.size else None
        summary.append(row)
    slopes = []
    for key in ("subspace_error", "regression_error"):
        pts = [(r["n"], r[f"mean_{key}"]) for r in summary if r[f"mean_{key}"] not in (None, 0.0)]
        if config.method == "AMBIENT" and key == "subspace_error":
            pts = []
        slopes.extend(fit_loglog_slope(*zip(*pts)) if len(pts) >= 2 else (None, None))
    return SweepResult(config, trials, summary, *slopes)


def _run_one(args):
    config, n, seed, trial = args
    return run_trial(config, n, seed, trial)


def run_sweep(config: ExperimentConfig, jobs: int = 1) -> SweepResult:
    tasks = [
        (config, n, trial_seed(config.master_seed, i, t), t)
        for i, n in enumerate(config.n_grid)
        for t in range(config.trials)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, tasks))
    else:
        results = [_run_one(task) for task in tasks]
    for r in results:
        logger.info("n=%d trial=%d sub=%s reg=%s %.1fs", r.n, r.trial, r.subspace_error, r.regression_error, r.wall_time)
    return aggregate(config, results)


def theoretical_schedule(n, D, d, L_g, B, sigma, c0, M, nu, C2=None, C3=None) -> dict:
    """Threshold, radius and offset from the theoretical parameter schedule.

    Returns a dict with ``C1, C2, C3, alpha0, alpha, r``. ``C2``/``C3`` may be
    given to bypass their construction from the other constants.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    for name, v in (("L_g", L_g), ("B", B), ("c0", c0), ("M", M)):
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if not nu > 2:
        raise ValueError("nu must exceed 2")
    C1 = 1.0 / (4 * L_g ** 2 * max(5 * B, 2))
    if C2 is None:
        C2 = (56 * nu * L_g ** 2 / (3 * c0 * C1 ** (D - 1))) ** (1.0 / D)
    if C3 is None:
        C3 = (256 * nu * (M + sigma) ** 4 * L_g ** 2 / (c0 * C1 ** (D - 1))) ** (1.0 / (D + 2))
    q = math.log(n) / n
    alpha0 = max(C2 * q ** (1.0 / D), C3 * q ** (1.0 / (D + 2)))
    alpha = 4 * d * L_g ** 2 * B ** 2 * q ** (1.0 / D) + alpha0 + 3 * sigma ** 2
    return {"C1": C1, "C2": C2, "C3": C3, "alpha0": alpha0, "alpha": alpha, "r": C1 * alpha0}


def theory_constants(B, D, d, L_g, C0, phi_value) -> dict:
    """Constants C4..C8 of the partition-size rule for a given gap ``C0 - phi``."""
    gap = C0 - phi_value
    if not gap > 0:
        raise ValueError("C0 must exceed phi")
    C4 = gap ** 2
    C5 = 1152 * B ** 4
    C6 = 64 * B ** 2 * gap
    C7 = C5 / C4 * (math.log(2 * D) + 2 * D + 1) + 8 + 8 * D * C6 ** 2 / C4 ** 2
    return {"C4": C4, "C5": C5, "C6": C6, "C7": C7, "C8": d * C7 * L_g ** 2 * B ** 2}


def error_decomposition(model: ComposedModel, truth: Optional[Truth], X_test):
    """Squared subspace error and the regression error measured in estimated coordinates.

    The estimated basis is rotated onto the planted one (orthogonal
    Procrustes) so that the planted link function can be evaluated at the
    estimated coordinates.
    """
    if truth is None or truth.g is None:
        raise ValueError("error decomposition needs the planted basis and link function")
    X_test = np.atleast_2d(np.asarray(X_test, dtype=float))
    basis = model.basis
    sub = projection_distance(basis, truth.phi) ** 2
    Q, _ = orthogonal_procrustes(basis, truth.phi)
    z_hat = X_test @ basis
    reg = float(np.mean((model.g_hat.predict(z_hat) - truth.g(z_hat @ Q)) ** 2))
    return sub, reg
