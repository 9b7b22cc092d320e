"""Neighborhood errors, disparity measures and DEN curves.

For each anchor the errors of its neighbors are gathered in sorted-distance
order and prefix-summed once; every kNN mean is then a single lookup and every
radius mean one binary search into the sorted distance row.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import DataError, DenError, Partition
from .geometry import DistanceProfile, NeighborhoodSpec, ProfileLike, distance_range

EPSILON = 1e-9
DEFAULT_GRID_POINTS = 32


class DisparityMetric(str, enum.Enum):
    RAWLSIAN = "rawlsian"
    STDDEV = "stddev"


@dataclass(frozen=True)
class NeighborhoodErrors:
    values: np.ndarray
    spec: NeighborhoodSpec


@dataclass(frozen=True)
class SizeGrid:
    kind: str
    values: tuple

    def __post_init__(self):
        if self.kind not in ("knn", "radius"):
            raise DenError(f"unknown neighborhood kind {self.kind!r}")
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1 or len(vals) == 0:
            raise DenError("size grid must be a non-empty list")
        if np.any(np.diff(vals) <= 0):
            raise DenError("size grid must be strictly increasing")
        if self.kind == "knn":
            if np.any(vals != np.round(vals)) or vals[0] < 1:
                raise DenError("kNN sizes must be integers >= 1")
            object.__setattr__(self, "values", tuple(int(v) for v in vals))
        else:
            if not np.all(np.isfinite(vals)) or vals[0] <= 0:
                raise DenError("radius sizes must be finite and > 0 (r = 0 gives empty neighborhoods)")
            object.__setattr__(self, "values", tuple(float(v) for v in vals))

    def __len__(self):
        return len(self.values)

    def check(self, n: int) -> None:
        if self.kind == "knn" and self.values[-1] > n:
            raise DenError(f"kNN size {self.values[-1]} exceeds n={n}")

    def specs(self) -> list[NeighborhoodSpec]:
        make = NeighborhoodSpec.knn if self.kind == "knn" else NeighborhoodSpec.radius
        return [make(v) for v in self.values]


def geometric_knn_grid(n: int, count: int = DEFAULT_GRID_POINTS) -> SizeGrid:
    """``min(count, n)`` distinct integers from 1 to n, roughly geometrically spaced.

    Rounded geometric values that collide at the low end are bumped up by one,
    so the grid keeps its full length instead of collapsing under deduplication.
    """
    if n < 1:
        raise DenError("n must be >= 1")
    if n <= count:
        return SizeGrid("knn", tuple(range(1, n + 1)))
    vals, prev = [], 0
    for idx, g in enumerate(np.geomspace(1, n, count)):
        v = max(int(round(g)), prev + 1)
        v = min(v, n - (count - 1 - idx))
        vals.append(v)
        prev = v
    return SizeGrid("knn", tuple(vals))


def linear_radius_grid(profile: ProfileLike, count: int = DEFAULT_GRID_POINTS) -> SizeGrid:
    """``count`` radii from the smallest nonzero nearest-neighbor distance to the
    largest pairwise distance."""
    lo, hi = distance_range(profile)
    if hi == 0:
        return SizeGrid("radius", (1.0,))
    return SizeGrid("radius", tuple(np.unique(np.linspace(lo, hi, count))))


def default_grid(kind: str, profile: ProfileLike, count: int = DEFAULT_GRID_POINTS) -> SizeGrid:
    if kind == "knn":
        return geometric_knn_grid(profile.n, count)
    return linear_radius_grid(profile, count)


def _check_errors(errors, n: int) -> np.ndarray:
    e = np.asarray(errors, dtype=np.float64).reshape(-1)
    if len(e) != n:
        raise DataError(f"error vector has length {len(e)}, expected n={n}")
    if not np.all(np.isfinite(e)) or np.any(e < 0):
        raise DataError("errors must be finite and >= 0")
    return e


def _sweep_block(order, dist, errors, grid, global_mean, lo, hi):
    n = len(errors)
    csum = np.cumsum(errors[order], axis=1)
    if grid.kind == "knn":
        counts = np.broadcast_to(np.asarray(grid.values, dtype=np.int64), (len(order), len(grid)))
    else:
        radii = np.asarray(grid.values)
        counts = np.stack([np.searchsorted(row, radii, side="left") for row in dist])
    rows = np.arange(len(order))[:, None]
    out = csum[rows, counts - 1] / counts
    # the full set is the same neighborhood for every anchor; give it one value
    out[counts == n] = global_mean
    np.clip(out, lo, hi, out=out)
    return out.T


def sweep_neighborhood_errors(profile: ProfileLike, errors, grid: SizeGrid,
                              threads: int = 1) -> list[NeighborhoodErrors]:
    """Neighborhood mean errors for every anchor at every grid size, in one pass."""
    e = _check_errors(errors, profile.n)
    grid.check(profile.n)
    global_mean = float(np.sum(e)) / len(e)
    lo, hi = float(e.min()), float(e.max())
    m = len(profile.anchors)
    result = np.empty((len(grid), m))

    if isinstance(profile, DistanceProfile) and threads > 1:
        block = max(1, -(-m // threads))
        blocks = list(profile.iter_blocks(block))
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = pool.map(lambda b: _sweep_block(b[1], b[2], e, grid, global_mean, lo, hi), blocks)
            for ((s, t), _, _), part in zip(blocks, parts):
                result[:, s:t] = part
    else:
        for (s, t), order, dist in profile.iter_blocks():
            result[:, s:t] = _sweep_block(order, dist, e, grid, global_mean, lo, hi)
    return [NeighborhoodErrors(result[j].copy(), spec) for j, spec in enumerate(grid.specs())]


def neighborhood_errors(profile: ProfileLike, errors, spec: NeighborhoodSpec) -> NeighborhoodErrors:
    """Mean error over each anchor's neighborhood of the given size."""
    if spec.kind == "radius" and spec.size == 0:
        raise DenError("radius 0 gives empty neighborhoods under strict inequality")
    grid = SizeGrid(spec.kind, (spec.size,))
    return sweep_neighborhood_errors(profile, errors, grid)[0]


def _nonempty(E) -> np.ndarray:
    E = np.asarray(E, dtype=np.float64).reshape(-1)
    if len(E) == 0:
        raise DenError("disparity of an empty error set is undefined")
    return E


def rawlsian(E, epsilon: float = EPSILON) -> float:
    """Max-min disparity ``1 - min(E) / (max(E) + epsilon)``.

    Returns 0 when all values are equal or when ``max(E) <= epsilon``: a flat
    or uniformly near-zero profile carries no disparity.
    """
    if epsilon < 0:
        raise DenError("epsilon must be >= 0")
    E = _nonempty(E)
    lo, hi = float(E.min()), float(E.max())
    if hi <= epsilon or lo == hi:
        return 0.0
    return 1.0 - lo / (hi + epsilon)


def std_dev(E) -> float:
    """Population standard deviation (0 for a constant vector)."""
    E = _nonempty(E)
    if np.all(E == E[0]):
        return 0.0
    return float(np.sqrt(np.mean((E - E.mean()) ** 2)))


def disparity(E, metric="rawlsian", epsilon: float = EPSILON) -> float:
    if DisparityMetric(metric) is DisparityMetric.RAWLSIAN:
        return rawlsian(E, epsilon)
    return std_dev(E)


def category_means(errors, labels) -> np.ndarray:
    if labels is None:
        raise DataError("partition labels are missing")
    part = labels if isinstance(labels, Partition) else Partition.from_values(labels)
    e = np.asarray(errors, dtype=np.float64).reshape(-1)
    if len(part) != len(e):
        raise DataError(f"labels have length {len(part)}, errors have {len(e)}")
    if len(e) == 0:
        raise DataError("no datapoints to partition")
    counts = np.bincount(part.codes, minlength=part.n_categories)
    sums = np.bincount(part.codes, weights=e, minlength=part.n_categories)
    keep = counts > 0
    return sums[keep] / counts[keep]


def partition_disparity(errors, labels, metric="rawlsian", epsilon: float = EPSILON) -> float:
    """Ground-truth disparity: the chosen measure over per-category mean errors."""
    return disparity(category_means(errors, labels), metric, epsilon)


def trapezoid_auc(sizes: Sequence[float], values: Sequence[float]) -> float:
    """Trapezoid area with the size axis rescaled to [0, 1]; 0 for a single point."""
    x = np.asarray(sizes, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    if len(x) < 2:
        return 0.0
    x = (x - x[0]) / (x[-1] - x[0])
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2.0))


@dataclass(frozen=True)
class DenCurve:
    sizes: tuple
    values: tuple
    size_kind: str
    metric: DisparityMetric
    auc: float

    @classmethod
    def from_points(cls, sizes, values, size_kind, metric) -> "DenCurve":
        sizes, values = tuple(sizes), tuple(float(v) for v in values)
        if len(sizes) != len(values) or not sizes:
            raise DenError("curve needs matching, non-empty sizes and values")
        return cls(sizes, values, size_kind, DisparityMetric(metric), trapezoid_auc(sizes, values))

    @property
    def points(self) -> list[tuple]:
        return list(zip(self.sizes, self.values))


def den_curve(profile: ProfileLike, errors, grid: SizeGrid, metric="rawlsian",
              epsilon: float = EPSILON, threads: int = 1) -> DenCurve:
    """Disparity across all anchor neighborhoods at each grid size."""
    sweep = sweep_neighborhood_errors(profile, errors, grid, threads)
    values = [disparity(ne.values, metric, epsilon) for ne in sweep]
    return DenCurve.from_points(grid.values, values, grid.kind, metric)


@dataclass(frozen=True)
class EstimationErrors:
    sizes: tuple
    errors: tuple
    argmin_index: int

    @property
    def argmin_size(self):
        return self.sizes[self.argmin_index]

    @property
    def min_error(self) -> float:
        return self.errors[self.argmin_index]


def estimation_error_curve(curve: DenCurve, reference_disparity: float) -> EstimationErrors:
    """``|estimate - reference|`` at each size; the argmin is the first minimum."""
    err = np.abs(np.asarray(curve.values) - float(reference_disparity))
    return EstimationErrors(curve.sizes, tuple(float(v) for v in err), int(np.argmin(err)))
