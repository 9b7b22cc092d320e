import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from denaudit import (DataError, DenError, build_distance_profile, knn_neighborhood,
                      per_point_retrieval_auroc, radius_neighborhood)
from denaudit.geometry import StreamingProfile, distance_range, profile_for, retrieval_auroc


def test_line_rows(line3_profile):
    assert line3_profile.dist[0].tolist() == [0.0, 1.0, 3.0]
    assert line3_profile.order[0].tolist() == [0, 1, 2]
    assert line3_profile.dist[1].tolist() == [0.0, 1.0, 2.0]
    assert line3_profile.order[1].tolist() == [1, 0, 2]


def test_single_point():
    p = build_distance_profile(np.array([[1.0, 2.0]]))
    assert p.dist.tolist() == [[0.0]] and p.order.tolist() == [[0]]


@pytest.mark.parametrize("metric", ["l2", "cosine"])
def test_matches_pure_python_distances(metric):
    rng = np.random.default_rng(3)
    z = rng.standard_normal((25, 4))
    p = build_distance_profile(z, metric)
    ref = oracles.pairwise(z.tolist(), metric)
    for r in range(25):
        np.testing.assert_allclose(p.dist[r], np.array(ref[r])[p.order[r]], rtol=0, atol=1e-12)


@pytest.mark.parametrize("metric", ["l2", "cosine"])
def test_distance_symmetry_exact(metric):
    rng = np.random.default_rng(4)
    p = build_distance_profile(rng.standard_normal((40, 7)), metric)
    full = np.empty((40, 40))
    for i in range(40):
        full[i, p.order[i]] = p.dist[i]
    assert np.array_equal(full, full.T)


def test_ties_by_index_and_self_first():
    z = np.array([[0.0], [1.0], [0.0], [1.0], [0.0]])
    p = build_distance_profile(z)
    assert p.order[2].tolist() == [2, 0, 4, 1, 3]
    assert p.order[3].tolist() == [3, 1, 0, 2, 4]
    for i in range(5):
        assert p.order[i][0] == i and p.dist[i][0] == 0.0
        assert sorted(p.order[i]) == list(range(5))
        assert np.all(np.diff(p.dist[i]) >= 0)


def test_cosine_zero_norm_rejected():
    with pytest.raises(DataError, match="index 1"):
        build_distance_profile(np.array([[1.0, 0.0], [0.0, 0.0]]), "cosine")


def test_knn_examples(line3_profile):
    assert set(knn_neighborhood(line3_profile, 0, 2)) == {0, 1}
    for i in range(3):
        assert knn_neighborhood(line3_profile, i, 1).tolist() == [i]
        assert set(knn_neighborhood(line3_profile, i, 3)) == {0, 1, 2}
    with pytest.raises(DenError):
        knn_neighborhood(line3_profile, 0, 4)


def test_radius_examples(line3_profile):
    assert set(radius_neighborhood(line3_profile, 0, 1.5)) == {0, 1}
    assert set(radius_neighborhood(line3_profile, 0, 0.5)) == {0}
    assert set(radius_neighborhood(line3_profile, 2, 10.0)) == {0, 1, 2}
    assert len(radius_neighborhood(line3_profile, 0, 0.0)) == 0
    # strict inequality: a neighbor exactly at r is excluded
    assert set(radius_neighborhood(line3_profile, 0, 1.0)) == {0}
    with pytest.raises(DenError):
        radius_neighborhood(line3_profile, 0, -1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 30), st.integers(0, 2**32 - 1), st.booleans())
def test_neighborhoods_match_brute_force(n, seed, ties):
    rng = np.random.default_rng(seed)
    ds = oracles.random_dataset(rng, n, ties=ties)
    p = build_distance_profile(ds)
    ref = oracles.pairwise(ds.embeddings.tolist())
    radii = sorted(set(np.concatenate([rng.random(5) * 4, [0.5, 1.0, 2.0]]).tolist()))
    for i in range(n):
        prev = set()
        for k in range(1, n + 1):
            got = set(knn_neighborhood(p, i, k).tolist())
            assert got == oracles.knn_members(ref[i], i, k)
            assert prev <= got
            prev = got
        prev = set()
        for r in radii:
            got = set(radius_neighborhood(p, i, r).tolist())
            assert got == oracles.radius_members(ref[i], r)
            assert prev <= got
            prev = got


def test_permutation_equivariance():
    rng = np.random.default_rng(9)
    z = rng.standard_normal((30, 3))
    perm = rng.permutation(30)
    p, q = build_distance_profile(z), build_distance_profile(z[perm])
    for new_i, old_i in enumerate(perm):
        for k in (1, 5, 30):
            a = set(perm[knn_neighborhood(q, new_i, k)].tolist())
            assert a == set(knn_neighborhood(p, int(old_i), k).tolist())


def test_auroc_examples():
    # anchor 0 at the origin; same identity at 2, different identities at 1 and 3
    z = np.array([[0.0], [2.0], [1.0], [3.0]])
    p = build_distance_profile(z)
    assert per_point_retrieval_auroc(p, ["a", "a", "b", "c"], 0) == 0.5
    perfect = build_distance_profile(np.array([[0.0], [1.0], [5.0], [6.0]]))
    assert per_point_retrieval_auroc(perfect, [0, 0, 1, 1], 0) == 1.0
    inverted = build_distance_profile(np.array([[0.0], [5.0], [1.0], [2.0]]))
    assert per_point_retrieval_auroc(inverted, [0, 0, 1, 1], 0) == 0.0


def test_auroc_undefined_and_ties():
    p = build_distance_profile(np.array([[0.0], [1.0], [1.0]]))
    assert per_point_retrieval_auroc(p, [0, 1, 1], 0) is None  # no positives
    assert per_point_retrieval_auroc(p, [0, 0, 0], 0) is None  # no negatives
    assert per_point_retrieval_auroc(p, [0, 0, 1], 0) == 0.5  # one tied pair
    with pytest.raises(DataError):
        per_point_retrieval_auroc(p, None, 0)
    all_rows = retrieval_auroc(p, [0, 1, 1])
    assert np.isnan(all_rows[0]) and all_rows[1] == 1.0


def test_streaming_profile_matches_materialized():
    rng = np.random.default_rng(5)
    z = rng.standard_normal((50, 3))
    full = build_distance_profile(z)
    lazy = profile_for(z, memory_budget=32 * 50 * 7)
    assert isinstance(lazy, StreamingProfile)
    rows = [(o, d) for _, o, d in lazy.iter_blocks()]
    assert np.array_equal(np.vstack([o for o, _ in rows]), full.order)
    assert np.array_equal(np.vstack([d for _, d in rows]), full.dist)
    assert distance_range(lazy) == distance_range(full)


def test_threads_do_not_change_profile():
    z = np.random.default_rng(6).standard_normal((97, 5))
    ref = build_distance_profile(z)
    for t in (2, 4, 8):
        p = build_distance_profile(z, threads=t)
        assert np.array_equal(p.order, ref.order) and np.array_equal(p.dist, ref.dist)


def test_anchor_subset():
    z = np.random.default_rng(7).standard_normal((20, 2))
    full = build_distance_profile(z)
    sub = build_distance_profile(z, anchors=[3, 11])
    assert np.array_equal(sub.order, full.order[[3, 11]])
    assert knn_neighborhood(sub, 11, 4).tolist() == knn_neighborhood(full, 11, 4).tolist()
    with pytest.raises(DenError):
        knn_neighborhood(sub, 0, 1)
