"""Dataset representation, per-datapoint errors and validation."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np


class DenError(ValueError):
    """Base class for rejected inputs."""


class DataError(DenError):
    """Malformed or inconsistent input data."""


class TaskKind(str, enum.Enum):
    REGRESSION = "regression"
    BINARY = "binary"


@dataclass(frozen=True)
class Partition:
    """Categorical labels held as dense integer codes.

    ``codes[i]`` indexes into ``categories``; categories are sorted so that the
    encoding does not depend on the order in which labels first appear.
    """

    codes: np.ndarray
    categories: tuple

    @classmethod
    def from_values(cls, values: Sequence) -> "Partition":
        arr = np.asarray(values)
        if arr.ndim != 1:
            raise DataError("label vector must be one-dimensional")
        cats, codes = np.unique(arr, return_inverse=True)
        return cls(codes=codes.astype(np.int64).reshape(-1), categories=tuple(cats.tolist()))

    def __len__(self) -> int:
        return len(self.codes)

    @property
    def n_categories(self) -> int:
        return len(self.categories)

    def values(self) -> list:
        return [self.categories[c] for c in self.codes]


def _as_partition(labels) -> Optional[Partition]:
    if labels is None or isinstance(labels, Partition):
        return labels
    return Partition.from_values(labels)


@dataclass(frozen=True)
class Dataset:
    """Proxy embeddings plus per-datapoint errors and optional labels.

    Construction does not validate; call :func:`validate_dataset` or
    :meth:`check` before handing a dataset to downstream operations.
    """

    embeddings: np.ndarray
    errors: np.ndarray
    identity: Optional[Partition] = None
    groups: Mapping[str, Partition] = field(default_factory=dict)

    @classmethod
    def create(cls, embeddings, errors, identity=None, groups=None) -> "Dataset":
        emb = np.asarray(embeddings, dtype=np.float64)
        if emb.ndim == 1:
            emb = emb.reshape(-1, 1)
        ds = cls(
            embeddings=emb,
            errors=np.asarray(errors, dtype=np.float64).reshape(-1),
            identity=_as_partition(identity),
            groups={name: _as_partition(v) for name, v in (groups or {}).items()},
        )
        return ds

    @property
    def n(self) -> int:
        return int(self.embeddings.shape[0])

    @property
    def dim(self) -> int:
        return int(self.embeddings.shape[1]) if self.embeddings.ndim == 2 else 0

    def with_errors(self, errors) -> "Dataset":
        return Dataset(self.embeddings, np.asarray(errors, dtype=np.float64).reshape(-1),
                       self.identity, dict(self.groups))

    def partition(self, name: str) -> Partition:
        """Look up a labeling by name; ``"individual"`` means the identity labels."""
        if name == "individual":
            if self.identity is None:
                raise DataError("dataset has no identity labels (partition 'individual')")
            return self.identity
        if name not in self.groups:
            raise DataError(f"dataset has no group partition {name!r}")
        return self.groups[name]

    def reference_names(self) -> list[str]:
        names = ["individual"] if self.identity is not None else []
        return names + sorted(self.groups)

    def check(self) -> "Dataset":
        problems = validate_dataset(self)
        if problems:
            raise DataError("; ".join(problems))
        return self


def validate_dataset(ds: Dataset) -> list[str]:
    """Return human-readable violations; an empty list means the dataset is valid."""
    out = []
    emb = np.asarray(ds.embeddings)
    if emb.ndim != 2:
        out.append(f"embeddings: expected a 2-D matrix, got {emb.ndim}-D")
        n = len(emb)
    else:
        n = emb.shape[0]
        if emb.shape[1] < 1:
            out.append("embeddings: dimension must be >= 1")
        bad = np.argwhere(~np.isfinite(emb))
        if len(bad):
            i, j = bad[0]
            out.append(f"embeddings: non-finite value at row {i}, column {j}")
    errors = np.asarray(ds.errors)
    if errors.ndim != 1 or len(errors) != n:
        out.append(f"errors: length {errors.size} does not match n={n}")
    else:
        nonfinite = np.flatnonzero(~np.isfinite(errors))
        if len(nonfinite):
            out.append(f"errors: non-finite value at index {nonfinite[0]}")
        negative = np.flatnonzero(errors < 0)
        if len(negative):
            out.append(f"errors: negative value {errors[negative[0]]!r} at index {negative[0]}")
    if ds.identity is not None and len(ds.identity) != n:
        out.append(f"identity: length {len(ds.identity)} does not match n={n}")
    for name, part in ds.groups.items():
        if len(part) != n:
            out.append(f"groups[{name!r}]: length {len(part)} does not match n={n}")
    return out


@dataclass(frozen=True)
class ModelRun:
    name: str
    predictions: np.ndarray
    labels: np.ndarray
    task: TaskKind = TaskKind.REGRESSION

    def __post_init__(self):
        object.__setattr__(self, "predictions", np.asarray(self.predictions, dtype=np.float64).reshape(-1))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.float64).reshape(-1))
        object.__setattr__(self, "task", TaskKind(self.task))


def per_datapoint_error(run: ModelRun) -> np.ndarray:
    """Absolute error for regression runs, 0/1 misclassification for binary runs.

    Binary predictions are thresholded at 0.5 (``>= 0.5`` is class 1).
    """
    pred, lab = run.predictions, run.labels
    if len(pred) != len(lab):
        raise DataError(f"run {run.name!r}: {len(pred)} predictions vs {len(lab)} labels")
    for what, arr in (("prediction", pred), ("label", lab)):
        bad = np.flatnonzero(~np.isfinite(arr))
        if len(bad):
            raise DataError(f"run {run.name!r}: non-finite {what} at index {bad[0]}")
    if run.task is TaskKind.REGRESSION:
        return np.abs(pred - lab)
    bad = np.flatnonzero((lab != 0) & (lab != 1))
    if len(bad):
        raise DataError(f"run {run.name!r}: binary label {lab[bad[0]]!r} at index {bad[0]} is not 0/1")
    return ((pred >= 0.5).astype(np.float64) != lab).astype(np.float64)
