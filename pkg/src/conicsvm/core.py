"""Shared data types, dataset I/O, prediction and evaluation metrics."""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np


class InputError(ValueError):
    """Raised when arguments violate a documented precondition."""


class SolverError(RuntimeError):
    """Raised when a numerical solve does not produce a usable answer."""


class SolverStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INACCURATE = "Inaccurate"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix with +/-1 labels.

    Parameters
    ----------
    features : array of shape (n, p)
        Row ``i`` holds ``x_i``. When ``intercept_embedded`` is set, column 0
        is the constant-1 intercept feature.
    labels : array of shape (n,)
        Entries in {-1, +1}.
    intercept_embedded : bool
        Whether column 0 is the constant intercept feature.
    """

    features: np.ndarray
    labels: np.ndarray
    intercept_embedded: bool = False

    def __post_init__(self):
        X = np.array(self.features, dtype=float)
        y = np.array(self.labels, dtype=float).ravel()
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise InputError("features must be a 2-D array")
        n, p = X.shape
        if n < 1 or p < 1:
            raise InputError("dataset needs at least one point and one feature")
        if y.shape != (n,):
            raise InputError(f"expected {n} labels, got {y.shape[0]}")
        if not np.all(np.isfinite(X)):
            raise InputError("features contain non-finite values")
        if not np.all((y == 1.0) | (y == -1.0)):
            raise InputError("labels must be exactly -1 or +1")
        if self.intercept_embedded and not np.all(X[:, 0] == 1.0):
            raise InputError("intercept column 0 must be all ones")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    @property
    def signed_features(self) -> np.ndarray:
        """Rows ``y_i * x_i``."""
        return self.labels[:, None] * self.features

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx)
        return LabeledDataset(self.features[idx], self.labels[idx], self.intercept_embedded)

    def with_labels(self, labels) -> "LabeledDataset":
        return LabeledDataset(self.features, labels, self.intercept_embedded)


class KernelKind(str, enum.Enum):
    LINEAR = "linear"
    GAUSSIAN = "gaussian"
    POLYNOMIAL = "polynomial"


@dataclass(frozen=True)
class Kernel:
    """Positive-definite kernel ``k(x, x')``.

    The Gaussian kernel is ``exp(-||x - x'||^2 / (2 bandwidth^2))`` and the
    polynomial kernel is ``(x.x' + offset)^degree``.
    """

    kind: KernelKind = KernelKind.LINEAR
    bandwidth: float = 1.0
    degree: int = 2
    offset: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind(self.kind))
        if self.kind is KernelKind.GAUSSIAN and not self.bandwidth > 0:
            raise InputError("Gaussian bandwidth must be positive")
        if self.kind is KernelKind.POLYNOMIAL and (int(self.degree) != self.degree or self.degree < 1):
            raise InputError("polynomial degree must be a positive integer")

    @classmethod
    def linear(cls) -> "Kernel":
        return cls(KernelKind.LINEAR)

    @classmethod
    def gaussian(cls, bandwidth: float) -> "Kernel":
        return cls(KernelKind.GAUSSIAN, bandwidth=bandwidth)

    @classmethod
    def polynomial(cls, degree: int, offset: float = 1.0) -> "Kernel":
        return cls(KernelKind.POLYNOMIAL, degree=degree, offset=offset)

    def __call__(self, A, B) -> np.ndarray:
        """Cross-kernel matrix ``k(A[i], B[j])``."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.atleast_2d(np.asarray(B, dtype=float))
        if A.shape[1] != B.shape[1]:
            raise InputError("kernel arguments have different dimensions")
        inner = A @ B.T
        if self.kind is KernelKind.LINEAR:
            return inner
        if self.kind is KernelKind.POLYNOMIAL:
            return (inner + self.offset) ** int(self.degree)
        sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * inner
        return np.exp(-np.maximum(sq, 0.0) / (2.0 * self.bandwidth**2))

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "bandwidth": self.bandwidth,
                "degree": int(self.degree), "offset": self.offset}

    @classmethod
    def from_dict(cls, d: dict) -> "Kernel":
        return cls(KernelKind(d["kind"]), float(d.get("bandwidth", 1.0)),
                   int(d.get("degree", 2)), float(d.get("offset", 1.0)))


@dataclass(frozen=True)
class TrainedClassifier:
    """A fitted linear or kernel classifier.

    Exactly one of ``weights`` (linear mode) and ``dual_coefficients``
    (kernel mode) is set. Kernel mode also keeps the training set, since
    predictions need ``k(x_j, x)`` against every training point.
    """

    weights: Optional[np.ndarray] = None
    dual_coefficients: Optional[np.ndarray] = None
    kernel: Optional[Kernel] = None
    training_data: Optional[LabeledDataset] = None
    objective_value: float = float("nan")
    solver_status: SolverStatus = SolverStatus.OPTIMAL
    z_values: Optional[np.ndarray] = None
    method: str = ""
    hyperparameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if (self.weights is None) == (self.dual_coefficients is None):
            raise InputError("exactly one of weights / dual_coefficients must be set")
        if self.dual_coefficients is not None and (self.kernel is None or self.training_data is None):
            raise InputError("kernel mode needs a kernel and the training data")
        for name in ("weights", "dual_coefficients", "z_values"):
            v = getattr(self, name)
            if v is not None:
                v = np.array(v, dtype=float).ravel()
                v.setflags(write=False)
                object.__setattr__(self, name, v)
        object.__setattr__(self, "solver_status", SolverStatus(self.solver_status))

    @property
    def is_kernel(self) -> bool:
        return self.dual_coefficients is not None

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.is_kernel:
            train = self.training_data
            if X.shape[1] != train.p:
                raise InputError(f"expected {train.p} features, got {X.shape[1]}")
            return self.kernel(X, train.features) @ (train.labels * self.dual_coefficients)
        if X.shape[1] != self.weights.shape[0]:
            raise InputError(f"expected {self.weights.shape[0]} features, got {X.shape[1]}")
        return X @ self.weights

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) >= 0.0, 1, -1)


def predict(classifier: TrainedClassifier, x, dataset_for_kernel: Optional[LabeledDataset] = None) -> int:
    """Label of a single point; a zero score is labeled +1."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InputError("predict expects a single feature vector")
    if classifier.is_kernel and dataset_for_kernel is not None:
        classifier = TrainedClassifier(
            dual_coefficients=classifier.dual_coefficients, kernel=classifier.kernel,
            training_data=dataset_for_kernel)
    return int(classifier.predict(x[None, :])[0])


def misclassification_rate(classifier: TrainedClassifier, data: LabeledDataset) -> float:
    if data.n == 0:
        raise InputError("empty dataset")
    return float(np.mean(classifier.predict(data.features) != data.labels))


def gram_matrix(kernel: Kernel, data: LabeledDataset) -> np.ndarray:
    """Signed Gram matrix with entries ``y_i y_j k(x_i, x_j)``."""
    K = kernel(data.features, data.features)
    K = data.labels[:, None] * K * data.labels[None, :]
    return 0.5 * (K + K.T)


def add_intercept(X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.hstack([np.ones((X.shape[0], 1)), X])


def read_csv(path, intercept: bool = False, label_column: str = "y") -> LabeledDataset:
    """Read a dataset whose header names a ``y`` column and numeric features.

    With ``intercept=True`` a constant-1 feature is prepended, unless the file
    already carries one as its first feature column named ``intercept``.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path}: empty file")
    header, body = rows[0], [r for r in rows[1:] if r]
    if label_column not in header:
        raise InputError(f"{path}: no '{label_column}' column")
    try:
        values = np.array(body, dtype=float).reshape(len(body), len(header))
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric entry ({exc})") from None
    j = header.index(label_column)
    names = [h for k, h in enumerate(header) if k != j]
    X = np.delete(values, j, axis=1)
    has_intercept = bool(names) and names[0] == "intercept"
    if intercept and not has_intercept:
        X = add_intercept(X)
    return LabeledDataset(X, values[:, j], intercept_embedded=intercept or has_intercept)


def write_csv(data: LabeledDataset, path) -> None:
    """Write ``data`` with a ``y`` column first; the intercept column, if any,
    is written as ``intercept`` so it round-trips."""
    p = data.p
    if data.intercept_embedded:
        names = ["intercept"] + [f"x{k}" for k in range(1, p)]
    else:
        names = [f"x{k}" for k in range(1, p + 1)]
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y"] + names)
        for yi, xi in zip(data.labels, data.features):
            w.writerow([f"{int(yi)}"] + [repr(float(v)) for v in xi])


def _floats(a):
    return None if a is None else [float(v) for v in a]


def classifier_to_dict(model: TrainedClassifier) -> dict:
    """JSON-ready representation; floats are kept at full precision."""
    d = {
        "method": model.method,
        "solver_status": model.solver_status.value,
        "objective_value": None if math.isnan(model.objective_value) else float(model.objective_value),
        "hyperparameters": dict(model.hyperparameters),
        "weights": _floats(model.weights),
        "dual_coefficients": _floats(model.dual_coefficients),
        "z_values": _floats(model.z_values),
        "kernel": None if model.kernel is None else model.kernel.to_dict(),
    }
    if model.training_data is not None:
        t = model.training_data
        d["training_data"] = {"features": t.features.tolist(), "labels": _floats(t.labels),
                              "intercept_embedded": t.intercept_embedded}
    return d


def classifier_from_dict(d: dict) -> TrainedClassifier:
    try:
        train = d.get("training_data")
        if train is not None:
            train = LabeledDataset(np.array(train["features"], dtype=float),
                                   np.array(train["labels"], dtype=float),
                                   bool(train.get("intercept_embedded", False)))
        kernel = Kernel.from_dict(d["kernel"]) if d.get("kernel") else None
        obj = d.get("objective_value")
        return TrainedClassifier(
            weights=d.get("weights"), dual_coefficients=d.get("dual_coefficients"),
            kernel=kernel, training_data=train,
            objective_value=float("nan") if obj is None else float(obj),
            solver_status=d.get("solver_status", SolverStatus.OPTIMAL.value),
            z_values=d.get("z_values"), method=d.get("method", ""),
            hyperparameters=dict(d.get("hyperparameters", {})))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"malformed model: {exc}") from None


def write_model(model: TrainedClassifier, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(classifier_to_dict(model), fh, indent=2)
        fh.write("\n")


def read_model(path) -> TrainedClassifier:
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: not a JSON model ({exc})") from None
    return classifier_from_dict(d)
