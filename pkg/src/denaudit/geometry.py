"""Exact distance structure over the proxy embedding space.

A distance profile holds, for every anchor datapoint, all datapoints sorted by
distance to it (ties by ascending index, the anchor itself always first). Every
neighborhood query is then a prefix of a sorted row.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Optional, Union

import numpy as np

from .core import Dataset, DataError, DenError, Partition

DEFAULT_MEMORY_BUDGET = 512 * 2**20
# order (int64) + dist (float64) + gathered errors + their prefix sums
_BYTES_PER_ENTRY = 32


class Metric(str, enum.Enum):
    EUCLIDEAN = "l2"
    COSINE = "cosine"


@dataclass(frozen=True)
class NeighborhoodSpec:
    """Either a radius neighborhood (``kind == "radius"``) or a kNN one (``"knn"``)."""

    kind: str
    size: float

    @classmethod
    def knn(cls, k: int) -> "NeighborhoodSpec":
        if int(k) != k or k < 1:
            raise DenError(f"kNN size must be an integer >= 1, got {k!r}")
        return cls("knn", int(k))

    @classmethod
    def radius(cls, r: float) -> "NeighborhoodSpec":
        if not np.isfinite(r) or r < 0:
            raise DenError(f"radius must be finite and >= 0, got {r!r}")
        return cls("radius", float(r))

    def check(self, n: int) -> None:
        if self.kind == "knn" and self.size > n:
            raise DenError(f"kNN size {self.size} exceeds n={n}")


def _embeddings(data) -> np.ndarray:
    emb = data.embeddings if isinstance(data, Dataset) else data
    emb = np.asarray(emb, dtype=np.float64)
    if emb.ndim == 1:
        emb = emb.reshape(-1, 1)
    if emb.ndim != 2 or emb.shape[0] < 1 or emb.shape[1] < 1:
        raise DataError(f"embeddings must be a non-empty n x d matrix, got shape {emb.shape}")
    return emb


def _prepare(emb: np.ndarray, metric: Metric) -> np.ndarray:
    if metric is Metric.COSINE:
        norms = np.sqrt((emb * emb).sum(axis=1))
        zero = np.flatnonzero(norms == 0)
        if len(zero):
            raise DataError(f"zero-norm embedding at index {zero[0]} under cosine distance")
        return emb / norms[:, None]
    return emb


def _row(points: np.ndarray, i: int, metric: Metric) -> tuple[np.ndarray, np.ndarray]:
    # One anchor at a time: the arithmetic for (i, j) mirrors (j, i) exactly,
    # and results do not depend on how rows are batched across workers.
    if metric is Metric.COSINE:
        d = 1.0 - (points * points[i]).sum(axis=1)
        np.clip(d, 0.0, 2.0, out=d)
    else:
        diff = points - points[i]
        d = np.sqrt((diff * diff).sum(axis=1))
    d[i] = 0.0
    order = np.argsort(d, kind="stable")
    if order[0] != i:
        # zero-distance duplicates with a smaller index: move the anchor to the front
        p = int(np.flatnonzero(order == i)[0])
        order[1:p + 1] = order[:p].copy()
        order[0] = i
    return order, d[order]


def _rows(points, anchors, metric):
    order = np.empty((len(anchors), len(points)), dtype=np.int64)
    dist = np.empty((len(anchors), len(points)), dtype=np.float64)
    for r, i in enumerate(anchors):
        order[r], dist[r] = _row(points, int(i), metric)
    return order, dist


def _chunks(m: int, block: int):
    return [(s, min(s + block, m)) for s in range(0, m, block)]


def _parallel_rows(points, anchors, metric, threads, block):
    spans = _chunks(len(anchors), block)
    work = lambda span: _rows(points, anchors[span[0]:span[1]], metric)  # noqa: E731
    if threads <= 1 or len(spans) == 1:
        yield from ((s, *work(s)) for s in spans)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for span, (o, d) in zip(spans, pool.map(work, spans)):
            yield span, o, d


def _resolve_anchors(n: int, anchors) -> np.ndarray:
    if anchors is None:
        return np.arange(n, dtype=np.int64)
    a = np.asarray(anchors, dtype=np.int64).reshape(-1)
    if len(a) == 0 or a.min() < 0 or a.max() >= n:
        raise DenError("anchor indices must be a non-empty subset of 0..n-1")
    return a


class _RowLookup:
    anchors: np.ndarray
    n: int

    def _row_of(self, i: int) -> int:
        if not 0 <= i < self.n:
            raise DenError(f"datapoint index {i} out of range 0..{self.n - 1}")
        if len(self.anchors) == self.n and self.anchors[i] == i:
            return i
        hit = np.flatnonzero(self.anchors == i)
        if not len(hit):
            raise DenError(f"datapoint {i} is not an anchor of this profile")
        return int(hit[0])


@dataclass(frozen=True, eq=False)
class DistanceProfile(_RowLookup):
    """Materialized sorted distance rows; row ``r`` belongs to datapoint ``anchors[r]``."""

    order: np.ndarray
    dist: np.ndarray
    metric: Metric
    anchors: np.ndarray

    @property
    def n(self) -> int:
        return int(self.order.shape[1])

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        r = self._row_of(i)
        return self.order[r], self.dist[r]

    def iter_blocks(self, block_rows: Optional[int] = None) -> Iterator:
        m = len(self.anchors)
        for s, e in _chunks(m, block_rows or m):
            yield (s, e), self.order[s:e], self.dist[s:e]


class StreamingProfile(_RowLookup):
    """Same interface as :class:`DistanceProfile`, but rows are recomputed in
    blocks on every pass instead of being held in memory."""

    def __init__(self, points, metric, anchors, block_rows, threads=1):
        self._points = points
        self.metric = metric
        self.anchors = anchors
        self.block_rows = max(1, int(block_rows))
        self.threads = threads

    @property
    def n(self) -> int:
        return len(self._points)

    def row(self, i: int):
        self._row_of(i)
        return _row(self._points, i, self.metric)

    def iter_blocks(self, block_rows: Optional[int] = None) -> Iterator:
        yield from _parallel_rows(self._points, self.anchors, self.metric,
                                  self.threads, block_rows or self.block_rows)


ProfileLike = Union[DistanceProfile, StreamingProfile]


def build_distance_profile(data, metric="l2", anchors=None, threads: int = 1) -> DistanceProfile:
    """Exact pairwise distances with every row fully sorted.

    ``data`` is a :class:`Dataset` or an ``n x d`` array. Euclidean distance is
    the L2 norm of the difference; cosine distance is ``1 - cos``. ``anchors``
    restricts the rows to a subset of datapoints (columns always cover all n).
    """
    metric = Metric(metric)
    points = _prepare(_embeddings(data), metric)
    a = _resolve_anchors(len(points), anchors)
    block = max(1, -(-len(a) // max(1, threads)))
    order = np.empty((len(a), len(points)), dtype=np.int64)
    dist = np.empty((len(a), len(points)), dtype=np.float64)
    for (s, e), o, d in _parallel_rows(points, a, metric, threads, block):
        order[s:e], dist[s:e] = o, d
    return DistanceProfile(order=order, dist=dist, metric=metric, anchors=a)


def profile_for(data, metric="l2", anchors=None, threads: int = 1,
                memory_budget: int = DEFAULT_MEMORY_BUDGET) -> ProfileLike:
    """Materialize the profile when it fits ``memory_budget`` bytes, else stream it."""
    metric = Metric(metric)
    points = _prepare(_embeddings(data), metric)
    a = _resolve_anchors(len(points), anchors)
    row_bytes = _BYTES_PER_ENTRY * len(points)
    if row_bytes * len(a) <= memory_budget:
        return build_distance_profile(data, metric, a, threads)
    return StreamingProfile(points, metric, a, memory_budget // row_bytes, threads)


def knn_neighborhood(profile: ProfileLike, i: int, k: int) -> np.ndarray:
    """Indices of the ``k`` nearest datapoints to ``i``, itself included, nearest first."""
    spec = NeighborhoodSpec.knn(k)
    spec.check(profile.n)
    order, _ = profile.row(i)
    return order[:spec.size].copy()


def radius_neighborhood(profile: ProfileLike, i: int, r: float) -> np.ndarray:
    """Indices strictly closer than ``r`` to datapoint ``i``; empty for ``r == 0``."""
    spec = NeighborhoodSpec.radius(r)
    order, dist = profile.row(i)
    return order[:np.searchsorted(dist, spec.size, side="left")].copy()


def _codes(identity) -> np.ndarray:
    if identity is None:
        raise DataError("retrieval AUROC needs identity labels")
    if isinstance(identity, Partition):
        return identity.codes
    return Partition.from_values(identity).codes


def _auroc_from_row(order, dist, i, codes) -> Optional[float]:
    keep = order != i
    order, dist = order[keep], dist[keep]
    pos = codes[order] == codes[i]
    n_pos = int(pos.sum())
    n_neg = len(order) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    neg_d = dist[~pos]
    pos_d = dist[pos]
    right = np.searchsorted(neg_d, pos_d, side="right")
    left = np.searchsorted(neg_d, pos_d, side="left")
    twice_wins = 2 * int((n_neg - right).sum()) + int((right - left).sum())
    return twice_wins / (2 * n_pos * n_neg)


def per_point_retrieval_auroc(profile: ProfileLike, identity, i: int) -> Optional[float]:
    """Same-identity retrieval AUROC for anchor ``i``.

    Counts (same-identity, other-identity) pairs where the same-identity point
    is strictly nearer, with ties worth one half. Returns ``None`` when ``i``
    has no other same-identity point or no other-identity point.
    """
    codes = _codes(identity)
    if len(codes) != profile.n:
        raise DataError(f"identity labels have length {len(codes)}, expected {profile.n}")
    order, dist = profile.row(i)
    return _auroc_from_row(order, dist, i, codes)


def retrieval_auroc(profile: ProfileLike, identity) -> np.ndarray:
    """Per-anchor retrieval AUROC; NaN marks undefined anchors."""
    codes = _codes(identity)
    if len(codes) != profile.n:
        raise DataError(f"identity labels have length {len(codes)}, expected {profile.n}")
    out = np.full(len(profile.anchors), np.nan)
    for (s, _), order, dist in profile.iter_blocks():
        for r in range(len(order)):
            v = _auroc_from_row(order[r], dist[r], int(profile.anchors[s + r]), codes)
            if v is not None:
                out[s + r] = v
    return out


def distance_range(profile: ProfileLike) -> tuple[float, float]:
    """Smallest nonzero nearest-neighbor distance and the largest distance over all rows.

    Returns ``(0.0, 0.0)`` when every distance is zero.
    """
    lo, hi = np.inf, 0.0
    for _, _, dist in profile.iter_blocks():
        hi = max(hi, float(dist[:, -1].max()))
        nz = dist[dist > 0]
        if nz.size:
            # rows are sorted, so the smallest positive entry is a nearest-neighbor distance
            lo = min(lo, float(nz.min()))
    if not np.isfinite(lo):
        return 0.0, 0.0
    return lo, hi
