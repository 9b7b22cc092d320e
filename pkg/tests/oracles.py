"""Slow, obviously-correct reference computations used only by the tests.

None of these share code with the package: distances are pure-Python loops,
neighborhoods are membership tests, correlations use exact rationals.
"""

import itertools
import math
from fractions import Fraction

from denaudit import Dataset


def pairwise(z, metric="l2"):
    n = len(z)
    out = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if metric == "l2":
                out[i][j] = math.sqrt(sum((a - b) ** 2 for a, b in zip(z[i], z[j])))
            else:
                dot = sum(a * b for a, b in zip(z[i], z[j]))
                ni = math.sqrt(sum(a * a for a in z[i]))
                nj = math.sqrt(sum(b * b for b in z[j]))
                out[i][j] = 0.0 if i == j else max(0.0, 1.0 - dot / (ni * nj))
    return out


def knn_members(dist_row, i, k):
    keyed = sorted(range(len(dist_row)), key=lambda j: (dist_row[j], j != i, j))
    return set(keyed[:k])


def radius_members(dist_row, r):
    return {j for j, d in enumerate(dist_row) if d < r}


def neighborhood_mean(errors, members):
    members = sorted(members)
    return math.fsum(errors[j] for j in members) / len(members)


def auroc(dist_row, labels, i):
    pos = [dist_row[j] for j in range(len(labels)) if j != i and labels[j] == labels[i]]
    neg = [dist_row[j] for j in range(len(labels)) if j != i and labels[j] != labels[i]]
    if not pos or not neg:
        return None
    twice = 0
    for p in pos:
        for q in neg:
            twice += 2 if p < q else (1 if p == q else 0)
    return twice / (2 * len(pos) * len(neg))


def _sgn(v):
    return (v > 0) - (v < 0)


def kendall_s(x, y):
    s = nx = ny = 0
    for i, j in itertools.combinations(range(len(x)), 2):
        a, b = _sgn(x[j] - x[i]), _sgn(y[j] - y[i])
        s += a * b
        nx += a != 0
        ny += b != 0
    return s, nx, ny


def kendall_tau_b(x, y):
    s, nx, ny = kendall_s(x, y)
    return s / math.sqrt(nx * ny)


def kendall_exact_p(x, y):
    """Two-sided permutation p-value by enumerating every ordering of y."""
    s_obs = abs(kendall_s(x, y)[0])
    hits = total = 0
    for perm in itertools.permutations(range(len(y))):
        s = kendall_s(x, [y[p] for p in perm])[0]
        hits += abs(s) >= s_obs
        total += 1
    return hits / total


def pearson_exact(x, y):
    """Two-pass Pearson r in exact rational arithmetic, rounded once at the end."""
    fx = [Fraction(v) for v in x]
    fy = [Fraction(v) for v in y]
    mx, my = sum(fx) / len(fx), sum(fy) / len(fy)
    sxy = sum((a - mx) * (b - my) for a, b in zip(fx, fy))
    sxx = sum((a - mx) ** 2 for a in fx)
    syy = sum((b - my) ** 2 for b in fy)
    return float(sxy) / math.sqrt(float(sxx) * float(syy))


def random_dataset(rng, n, d=3, ties=False, identities=None):
    if ties:
        z = rng.integers(0, 4, size=(n, d)).astype(float)
    else:
        z = rng.standard_normal((n, d))
    errors = rng.random(n)
    ident = rng.integers(0, identities, size=n) if identities else None
    return Dataset.create(z, errors, identity=ident)
