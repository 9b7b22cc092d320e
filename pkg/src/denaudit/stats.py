"""Correlations with p-values, model ranking and affect evaluation metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import stats as _sps

from .core import DenError

EXACT_KENDALL_MAX_N = 10


@dataclass(frozen=True)
class CorrelationResult:
    coefficient: float
    p_value: float
    n: int


def _pair(x, y, min_n: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if len(x) != len(y):
        raise DenError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < min_n:
        raise DenError(f"need at least {min_n} paired values, got {len(x)}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DenError("inputs must be finite")
    return x, y


def _pcc(x: np.ndarray, y: np.ndarray) -> float:
    dx = x - x.mean()
    dy = y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise DenError("correlation undefined for a constant vector")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def pearson_with_p(x, y) -> CorrelationResult:
    """Pearson r with a two-sided Student-t p-value on n - 2 degrees of freedom."""
    x, y = _pair(x, y, 3)
    r = _pcc(x, y)
    n = len(x)
    if abs(r) == 1.0:
        return CorrelationResult(r, 0.0, n)
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    p = float(2.0 * _sps.t.sf(abs(t), n - 2))
    return CorrelationResult(r, min(1.0, p), n)


def _sign_sum(x: np.ndarray, y: np.ndarray) -> tuple[int, int, int]:
    """Return (S, pairs untied in x, pairs untied in y) over all i < j."""
    s = n_x = n_y = 0
    for i in range(len(x) - 1):
        sx = np.sign(x[i + 1:] - x[i])
        sy = np.sign(y[i + 1:] - y[i])
        s += int((sx * sy).sum())
        n_x += int(np.count_nonzero(sx))
        n_y += int(np.count_nonzero(sy))
    return s, n_x, n_y


def _tie_sizes(v: np.ndarray) -> np.ndarray:
    _, counts = np.unique(v, return_counts=True)
    return counts[counts > 1].astype(np.int64)


def _mahonian(n: int) -> list[int]:
    """Number of permutations of n items with each possible inversion count."""
    dist = [1]
    for m in range(2, n + 1):
        new = [0] * (len(dist) + m - 1)
        for k, c in enumerate(dist):
            for extra in range(m):
                new[k + extra] += c
        dist = new
    return dist


def _all_permutations(n: int) -> np.ndarray:
    perms = np.zeros((1, 1), dtype=np.int8)
    for m in range(1, n):
        # insert item m at every position of each permutation of 0..m-1
        k = len(perms)
        out = np.empty((k * (m + 1), m + 1), dtype=np.int8)
        for pos in range(m + 1):
            block = out[pos * k:(pos + 1) * k]
            block[:, :pos] = perms[:, :pos]
            block[:, pos] = m
            block[:, pos + 1:] = perms[:, pos:]
        perms = out
    return perms


def _exact_kendall_p(x: np.ndarray, y: np.ndarray, s_obs: int) -> float:
    n = len(x)
    total = math.factorial(n)
    if len(_tie_sizes(x)) == 0 and len(_tie_sizes(y)) == 0:
        # no ties: S = n(n-1)/2 - 2 * inversions of a uniform random permutation
        pairs = n * (n - 1) // 2
        hits = sum(c for inv, c in enumerate(_mahonian(n)) if abs(pairs - 2 * inv) >= abs(s_obs))
        return hits / total
    perms = _all_permutations(n)
    yp = np.unique(y, return_inverse=True)[1].astype(np.int8).reshape(-1)[perms]
    s = np.zeros(len(perms), dtype=np.int64)
    for i in range(n - 1):
        for j in range(i + 1, n):
            sx = int(np.sign(x[j] - x[i]))
            if sx:
                s += sx * np.sign(yp[:, j] - yp[:, i]).astype(np.int64)
    hits = int(np.count_nonzero(np.abs(s) >= abs(s_obs)))
    return hits / total


def _asymptotic_kendall_p(x: np.ndarray, y: np.ndarray, s_obs: int) -> float:
    n = len(x)
    t, u = _tie_sizes(x), _tie_sizes(y)
    v0 = n * (n - 1) * (2 * n + 5)
    vt = int((t * (t - 1) * (2 * t + 5)).sum())
    vu = int((u * (u - 1) * (2 * u + 5)).sum())
    v1 = int((t * (t - 1)).sum()) * int((u * (u - 1)).sum()) / (2.0 * n * (n - 1))
    v2 = int((t * (t - 1) * (t - 2)).sum()) * int((u * (u - 1) * (u - 2)).sum()) / (9.0 * n * (n - 1) * (n - 2))
    var = (v0 - vt - vu) / 18.0 + v1 + v2
    if var <= 0:
        return 1.0
    z = abs(s_obs) / math.sqrt(var)
    return math.erfc(z / math.sqrt(2.0))


def kendall_tau_with_p(x, y) -> CorrelationResult:
    """Tie-corrected Kendall tau-b.

    The two-sided p-value is exact for n <= 10 (the null distribution of the
    pair statistic over all n! orderings of ``y``) and uses the tie-corrected
    normal approximation above that.
    """
    x, y = _pair(x, y, 2)
    s, n_x, n_y = _sign_sum(x, y)
    if n_x == 0 or n_y == 0:
        raise DenError("Kendall tau undefined when one input is all tied")
    tau = s / math.sqrt(n_x * n_y)
    tau = min(1.0, max(-1.0, tau))
    n = len(x)
    if n <= EXACT_KENDALL_MAX_N:
        p = _exact_kendall_p(x, y, s)
    else:
        p = _asymptotic_kendall_p(x, y, s)
    return CorrelationResult(tau, min(1.0, p), n)


@dataclass(frozen=True)
class RankReport:
    models: tuple
    auc_den: tuple
    true_disparities: Mapping[str, tuple]
    correlations: Mapping[str, CorrelationResult] = field(default_factory=dict)


def rank_models(auc_den: Mapping[str, float], true_disparities: Mapping[str, Mapping[str, float]]) -> RankReport:
    """Kendall tau between AUC-DEN and each reference's true disparity across models.

    ``true_disparities`` maps model name to ``{reference name: disparity}``.
    """
    models = tuple(auc_den)
    if len(models) < 3:
        raise DenError(f"ranking needs at least 3 models, got {len(models)}")
    if set(models) != set(true_disparities):
        raise DenError("model sets of AUC-DEN and true disparities differ")
    refs = set(true_disparities[models[0]])
    for m in models:
        if set(true_disparities[m]) != refs:
            raise DenError(f"model {m!r} has references {sorted(true_disparities[m])}, expected {sorted(refs)}")
    x = [auc_den[m] for m in models]
    truth, corr = {}, {}
    for ref in sorted(refs):
        truth[ref] = tuple(float(true_disparities[m][ref]) for m in models)
        corr[ref] = kendall_tau_with_p(x, truth[ref])
    return RankReport(models, tuple(float(v) for v in x), truth, corr)


def _metric_inputs(Y, Y_hat):
    Y = np.asarray(Y, dtype=np.float64).reshape(-1)
    Y_hat = np.asarray(Y_hat, dtype=np.float64).reshape(-1)
    if len(Y) != len(Y_hat):
        raise DenError(f"length mismatch: {len(Y)} vs {len(Y_hat)}")
    if len(Y) == 0:
        raise DenError("metrics need at least one value")
    return Y, Y_hat


def rmse(Y, Y_hat) -> float:
    Y, Y_hat = _metric_inputs(Y, Y_hat)
    return float(np.sqrt(np.mean((Y - Y_hat) ** 2)))


def sagr(Y, Y_hat) -> float:
    """Fraction of matching signs, with sign(0) counted as positive."""
    Y, Y_hat = _metric_inputs(Y, Y_hat)
    return float(np.mean((Y >= 0) == (Y_hat >= 0)))


def pcc(Y, Y_hat) -> float:
    Y, Y_hat = _metric_inputs(Y, Y_hat)
    if len(Y) < 2:
        raise DenError("PCC needs at least 2 values")
    return _pcc(Y, Y_hat)


def ccc(Y, Y_hat) -> float:
    """Concordance correlation with population moments."""
    Y, Y_hat = _metric_inputs(Y, Y_hat)
    r = pcc(Y, Y_hat)
    sy, sh = float(np.std(Y)), float(np.std(Y_hat))
    gap = float(Y.mean() - Y_hat.mean())
    scale = 2.0 * sy * sh / (sy * sy + sh * sh + gap * gap)
    return r * min(1.0, scale)


def affect_metrics(Y, Y_hat) -> dict[str, float]:
    return {"rmse": rmse(Y, Y_hat), "sagr": sagr(Y, Y_hat), "pcc": pcc(Y, Y_hat), "ccc": ccc(Y, Y_hat)}
