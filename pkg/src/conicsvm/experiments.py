"""Synthetic instances, the cross-validation protocol and benchmark runs."""

from __future__ import annotations

import configparser
import csv
import dataclasses
import enum
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm

from .core import (
    InputError,
    LabeledDataset,
    SolverError,
    TrainedClassifier,
    add_intercept,
    misclassification_rate,
)
from .formulations import hinge_lambda_grid, kappa_grid, train_conic, train_hinge

log = logging.getLogger(__name__)


class Generator(str, enum.Enum):
    NONE = "none"
    CLUSTERED = "clustered"
    SPREAD = "spread"
    SEPARABLE_FLIP = "separable_flip"


class Method(str, enum.Enum):
    HINGE = "hinge"
    CONIC = "conic"
    BAYES = "bayes"


# RNG streams derived from a single seed
_DIRECTION, _TRAIN, _VALIDATE, _TEST = 0, 1, 2, 3


@dataclass(frozen=True)
class ExperimentConfig:
    generator: Generator = Generator.NONE
    n: int = 100
    p: int = 3
    sigma: float = 0.2
    tau: float = 0.0
    replications: int = 20
    seed: int = 0
    grid_size: int = 100
    test_size: int = 100_000
    methods: tuple = (Method.HINGE, Method.CONIC, Method.BAYES)

    def __post_init__(self):
        object.__setattr__(self, "generator", Generator(self.generator))
        object.__setattr__(self, "methods", tuple(Method(m) for m in self.methods))
        if self.n < 1 or self.p < 1 or self.replications < 1 or self.grid_size < 1 or self.test_size < 1:
            raise InputError("n, p, replications, grid_size and test_size must be positive")
        if not self.sigma > 0:
            raise InputError("sigma must be positive")
        if not 0.0 <= self.tau < 0.5:
            raise InputError("tau must lie in [0, 0.5)")

    def for_replication(self, r: int) -> "ExperimentConfig":
        return dataclasses.replace(self, seed=replication_seed(self.seed, r))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["generator"] = self.generator.value
        d["methods"] = [m.value for m in self.methods]
        return d


def replication_seed(seed: int, r: int) -> int:
    """Independent 63-bit seed for replication ``r``."""
    return int(np.random.SeedSequence([int(seed), int(r)]).generate_state(1, np.uint64)[0] >> 1)


# -- generators -------------------------------------------------------------------------

def instance_direction(config: ExperimentConfig) -> np.ndarray:
    """Direction ``d`` with i.i.d. Uniform[-1, 1] entries (normal of the
    Bayes hyperplane, or the true hyperplane for label-flip instances)."""
    rng = np.random.default_rng([config.seed, _DIRECTION])
    dim = config.p + 1 if config.generator is Generator.SEPARABLE_FLIP else config.p
    return rng.uniform(-1.0, 1.0, dim)


def centroids(config: ExperimentConfig):
    d = instance_direction(config)
    c = 0.5 * d / np.linalg.norm(d)
    return c, -c


def generate_gaussian_instance(config: ExperimentConfig, n: Optional[int] = None,
                               outliers: bool = True, stream: int = _TRAIN) -> LabeledDataset:
    """Two Gaussian classes around centroids one unit apart, plus outliers.

    Mixture components (probability, center, std, label):

    * none: (.5, c+, s, +1), (.5, c-, s, -1)
    * clustered: (.45, c+, s, +1), (.45, c-, s, -1), (.1, 10 c-, sqrt(.001) s, +1)
    * spread: (.45, c+, s, +1), (.45, c-, s, -1), (.05, c+, 10 s, +1), (.05, c-, 10 s, -1)

    With ``outliers=False`` the clean two-component mixture is sampled.
    Column 0 of the result is the intercept.
    """
    if config.generator is Generator.SEPARABLE_FLIP:
        raise InputError("use generate_separable_flip_instance for label-flip instances")
    n = config.n if n is None else n
    s = config.sigma
    cp, cm = centroids(config)
    comps = [(0.5, cp, s, 1.0), (0.5, cm, s, -1.0)]
    if outliers and config.generator is Generator.CLUSTERED:
        comps = [(0.45, cp, s, 1.0), (0.45, cm, s, -1.0), (0.1, 10.0 * cm, math.sqrt(0.001) * s, 1.0)]
    elif outliers and config.generator is Generator.SPREAD:
        comps = [(0.45, cp, s, 1.0), (0.45, cm, s, -1.0), (0.05, cp, 10.0 * s, 1.0), (0.05, cm, 10.0 * s, -1.0)]
    rng = np.random.default_rng([config.seed, stream])
    cat = rng.choice(len(comps), size=n, p=[c[0] for c in comps])
    noise = rng.standard_normal((n, config.p))
    centers = np.array([c[1] for c in comps])[cat]
    scales = np.array([c[2] for c in comps])[cat]
    labels = np.array([c[3] for c in comps])[cat]
    X = centers + scales[:, None] * noise
    return LabeledDataset(add_intercept(X), labels, intercept_embedded=True)


def outlier_mask(config: ExperimentConfig, n: Optional[int] = None, stream: int = _TRAIN) -> np.ndarray:
    """Which points of the matching :func:`generate_gaussian_instance` call
    came from an outlier component."""
    n = config.n if n is None else n
    rng = np.random.default_rng([config.seed, stream])
    if config.generator is Generator.CLUSTERED:
        return rng.choice(3, size=n, p=[0.45, 0.45, 0.1]) == 2
    if config.generator is Generator.SPREAD:
        return rng.choice(4, size=n, p=[0.45, 0.45, 0.05, 0.05]) >= 2
    return np.zeros(n, dtype=bool)


def generate_separable_flip_instance(config: ExperimentConfig, n: Optional[int] = None,
                                     flip: bool = True, stream: int = _TRAIN) -> LabeledDataset:
    """Points uniform on [-1, 1]^p (plus intercept) labeled by a random
    hyperplane, each label flipped with probability ``tau``."""
    if not 0.0 <= config.tau < 0.5:
        raise InputError("tau must lie in [0, 0.5)")
    n = config.n if n is None else n
    w_true = instance_direction(dataclasses.replace(config, generator=Generator.SEPARABLE_FLIP))
    rng = np.random.default_rng([config.seed, stream])
    X = add_intercept(rng.uniform(-1.0, 1.0, (n, config.p)))
    y = np.where(X @ w_true >= 0, 1.0, -1.0)
    flips = rng.random(n) < config.tau
    if flip:
        y = np.where(flips, -y, y)
    return LabeledDataset(X, y, intercept_embedded=True)


def generate(config: ExperimentConfig, n: Optional[int] = None, clean: bool = False,
             stream: int = _TRAIN) -> LabeledDataset:
    if config.generator is Generator.SEPARABLE_FLIP:
        return generate_separable_flip_instance(config, n, flip=not clean, stream=stream)
    return generate_gaussian_instance(config, n, outliers=not clean, stream=stream)


def bayes_classifier(config: ExperimentConfig) -> TrainedClassifier:
    """The ideal rule ``w = (0, d)`` for the Gaussian instances."""
    if config.generator is Generator.SEPARABLE_FLIP:
        raise InputError("no Bayes classifier defined for label-flip instances")
    return TrainedClassifier(weights=np.r_[0.0, instance_direction(config)], method="bayes")


def bayes_error(sigma: float) -> float:
    """Bayes misclassification on clean data: ``Phi(-1 / (2 sigma))``."""
    return float(norm.cdf(-0.5 / sigma))


# -- cross-validation ---------------------------------------------------------------------

@dataclass
class CrossValidationResult:
    classifier: TrainedClassifier
    hyperparameter: float
    index: int
    total_time: float
    validation_errors: np.ndarray
    failures: list = field(default_factory=list)


def hyperparameter_grid(method: Method, grid_size: int) -> np.ndarray:
    method = Method(method)
    if method is Method.HINGE:
        return hinge_lambda_grid(grid_size)
    if method is Method.CONIC:
        return kappa_grid(grid_size)
    raise InputError(f"no hyperparameter grid for {method.value}")


def _fit(method: Method, train: LabeledDataset, value: float) -> TrainedClassifier:
    if method is Method.HINGE:
        return train_hinge(train, value)
    return train_conic(train, kappa=value)


def cross_validate(train: LabeledDataset, validate: LabeledDataset, method, grid_size: int = 100,
                   grid: Optional[Sequence[float]] = None) -> CrossValidationResult:
    """Train one model per grid value and keep the one with the fewest
    validation errors (ties go to the lower index).

    Hinge models use the ``lambda`` grid, conic models the ``kappa`` grid.
    Grid points whose solve fails are recorded in ``failures`` and skipped.
    """
    method = Method(method)
    if train.p != validate.p:
        raise InputError("train and validation sets have different dimensions")
    values = np.asarray(hyperparameter_grid(method, grid_size) if grid is None else grid, dtype=float)
    errors = np.full(values.size, np.inf)
    models: list = [None] * values.size
    failures = []
    total = 0.0
    for k, value in enumerate(values):
        t0 = time.perf_counter()
        try:
            model = _fit(method, train, float(value))
        except SolverError as exc:
            failures.append((k, float(value), str(exc)))
            continue
        finally:
            total += time.perf_counter() - t0
        models[k] = model
        errors[k] = misclassification_rate(model, validate)
    if not np.isfinite(errors).any():
        raise SolverError(f"all {values.size} {method.value} grid points failed")
    best = int(np.argmin(errors))
    return CrossValidationResult(models[best], float(values[best]), best, total, errors, failures)


# -- experiments -------------------------------------------------------------------------

@dataclass(frozen=True)
class ReplicationResult:
    method: Method
    replication: int
    seed: int
    oos_misclassification: float
    cv_time: float = 0.0
    chosen_hyperparameter: float = float("nan")
    error: str = ""


@dataclass
class ExperimentResult:
    config: dict
    replications: list

    def summary(self) -> dict:
        out = {}
        methods = sorted({r.method.value for r in self.replications})
        for m in methods:
            rows = [r for r in self.replications if r.method.value == m and not r.error]
            oos = np.array([r.oos_misclassification for r in rows])
            tim = np.array([r.cv_time for r in rows])
            out[m] = {
                "count": len(rows),
                "failed": sum(1 for r in self.replications if r.method.value == m and r.error),
                "oos_mean": _stat(np.mean, oos),
                "oos_std": _stat(lambda a: np.std(a, ddof=1), oos, need=2),
                "time_mean": _stat(np.mean, tim),
                "time_std": _stat(lambda a: np.std(a, ddof=1), tim, need=2),
            }
        return out

    def by_method(self, method) -> list:
        method = Method(method)
        return [r for r in self.replications if r.method is method]


def _stat(fn, a, need=1):
    return float(fn(a)) if a.size >= need else None


def _evaluate_methods(train, validate, test, methods, grid_size, replication, seed, bayes=None):
    out = []
    for m in methods:
        if m is Method.BAYES:
            if bayes is None:
                continue
            out.append(ReplicationResult(m, replication, seed, misclassification_rate(bayes, test)))
            continue
        try:
            cv = cross_validate(train, validate, m, grid_size)
        except SolverError as exc:
            log.warning("replication %d, %s: %s", replication, m.value, exc)
            out.append(ReplicationResult(m, replication, seed, float("nan"), error=str(exc)))
            continue
        out.append(ReplicationResult(
            m, replication, seed, misclassification_rate(cv.classifier, test),
            cv.total_time, cv.hyperparameter))
    return out


def run_replication(config: ExperimentConfig, r: int) -> list:
    """Fresh train/validation sets (contaminated) and a clean test set."""
    rc = config.for_replication(r)
    train = generate(rc, stream=_TRAIN)
    validate = generate(rc, stream=_VALIDATE)
    test = generate(rc, n=config.test_size, clean=True, stream=_TEST)
    bayes = None if config.generator is Generator.SEPARABLE_FLIP else bayes_classifier(rc)
    return _evaluate_methods(train, validate, test, config.methods, config.grid_size, r, rc.seed, bayes)


def _run_replication_star(args):
    return run_replication(*args)


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """All replications of ``config``; deterministic for a fixed seed
    regardless of ``jobs``."""
    tasks = [(config, r) for r in range(config.replications)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_replication_star, tasks))
    else:
        chunks = [run_replication(*t) for t in tasks]
    return ExperimentResult(config.to_dict(), [row for chunk in chunks for row in chunk])


def split_and_flip(data: LabeledDataset, tau: float, rng: np.random.Generator,
                   fractions=(0.35, 0.35, 0.30)):
    """Random train/validation/test split; train and validation labels are
    flipped independently with probability ``tau``."""
    if not 0.0 <= tau < 0.5:
        raise InputError("tau must lie in [0, 0.5)")
    perm = rng.permutation(data.n)
    n_tr = int(round(fractions[0] * data.n))
    n_va = int(round(fractions[1] * data.n))
    parts = [perm[:n_tr], perm[n_tr:n_tr + n_va], perm[n_tr + n_va:]]
    if any(len(p) == 0 for p in parts):
        raise InputError("dataset too small to split")
    out = []
    for k, idx in enumerate(parts):
        sub = data.subset(idx)
        if k < 2:
            flips = rng.random(sub.n) < tau
            sub = sub.with_labels(np.where(flips, -sub.labels, sub.labels))
        out.append(sub)
    return tuple(out)


def run_dataset_experiment(data: LabeledDataset, tau: float = 0.0, replications: int = 20,
                           seed: int = 0, grid_size: int = 100,
                           methods=(Method.HINGE, Method.CONIC)) -> ExperimentResult:
    """Repeated 35/35/30 splits of a user dataset with label-flip noise on
    the training and validation parts."""
    methods = tuple(Method(m) for m in methods if Method(m) is not Method.BAYES)
    rows = []
    for r in range(replications):
        s = replication_seed(seed, r)
        train, validate, test = split_and_flip(data, tau, np.random.default_rng(s))
        rows += _evaluate_methods(train, validate, test, methods, grid_size, r, s)
    cfg = {"n": data.n, "p": data.p, "tau": tau, "replications": replications, "seed": seed,
           "grid_size": grid_size, "methods": [m.value for m in methods]}
    return ExperimentResult(cfg, rows)


# -- I/O ---------------------------------------------------------------------------------

RESULT_COLUMNS = ("replication", "seed", "method", "oos_misclassification", "cv_time",
                  "chosen_hyperparameter", "error")


def write_results_csv(result: ExperimentResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in result.replications:
            w.writerow([r.replication, r.seed, r.method.value, repr(r.oos_misclassification),
                        repr(r.cv_time), repr(r.chosen_hyperparameter), r.error])


def write_summary_json(result: ExperimentResult, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"config": result.config, "summary": result.summary()}, fh, indent=2)
        fh.write("\n")


_INT_KEYS = {"n", "p", "replications", "seed", "grid_size", "test_size"}
_FLOAT_KEYS = {"sigma", "tau"}


def parse_config(text: str, **overrides) -> ExperimentConfig:
    """``key = value`` lines (``#`` comments, optional ``[section]``) to a config."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if not text.lstrip().startswith("["):
        text = "[experiment]\n" + text
    parser.read_string(text)
    kv = {}
    for section in parser.sections():
        kv.update(parser[section])
    kv.update({k: v for k, v in overrides.items() if v is not None})
    fields = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(kv) - fields
    if unknown:
        raise InputError(f"unknown config keys: {', '.join(sorted(unknown))}")
    args = {}
    for k, v in kv.items():
        if k in _INT_KEYS:
            args[k] = int(v)
        elif k in _FLOAT_KEYS:
            args[k] = float(v)
        elif k == "methods":
            args[k] = tuple(m.strip() for m in (v.split(",") if isinstance(v, str) else v) if m.strip())
        else:
            args[k] = v
    try:
        return ExperimentConfig(**args)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def read_config(path, **overrides) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), **overrides)
