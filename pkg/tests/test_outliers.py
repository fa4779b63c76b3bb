"""Neighborhood-similarity outlier ranking against a brute-force oracle."""

import numpy as np
import pytest

from conftest import random_embeddings
from dermaudit import EmbeddingMatrix, cosine, outlier_scores


def brute_scores(emb, n):
    out = []
    for i in range(len(emb)):
        sims = sorted(
            (cosine(emb.values[i], emb.values[j]) for j in range(len(emb)) if j != i),
            reverse=True,
        )
        out.append((emb.ids[i], sims[n - 1]))
    out.sort(key=lambda t: (t[1], t[0]))
    return out


def test_matches_brute_force():
    for seed in (0, 1, 2):
        emb = random_embeddings(60, 16, seed=seed)
        got = outlier_scores(emb, n_neighbors=5)
        want = brute_scores(emb, 5)
        assert [i for i, _ in got] == [i for i, _ in want]
        for (_, gs), (_, ws) in zip(got, want):
            assert abs(gs - ws) < 1e-9


def test_ascending_order_with_id_tiebreak():
    # two points in a private plane tie exactly at the same 1-NN score
    rows = np.array([
        [1.0, 0.0, 0.0, 0.0],
        [0.9, 0.1, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
    ])
    emb = EmbeddingMatrix(["zz", "aa", "m2", "m1"], rows)
    scored = outlier_scores(emb, n_neighbors=1)
    scores = dict(scored)
    assert scores["m1"] == scores["m2"]
    order = [i for i, _ in scored]
    assert order.index("m1") < order.index("m2")
    assert [i for i, _ in scored] == sorted(order, key=lambda i: (scores[i], i))


def test_private_axis_point_scores_zero():
    rng = np.random.default_rng(3)
    base = rng.standard_normal((20, 8)) * 0.2
    base[:, 0] += 1.0                     # coherent population around one axis
    base[:, 7] = 0.0                      # ...living in 7 dims
    lonely = np.zeros(8)
    lonely[7] = 1.0                       # orthogonal to everyone
    emb = EmbeddingMatrix([f"p{i}" for i in range(20)] + ["lonely"],
                          np.vstack([base, lonely]))
    scored = outlier_scores(emb, n_neighbors=5)
    assert scored[0][0] == "lonely"
    assert scored[0][1] == 0.0
    assert scored[1][1] > 0.0


def test_neighbor_count_bounds():
    emb = random_embeddings(6, 4, seed=4)
    with pytest.raises(ValueError):
        outlier_scores(emb, n_neighbors=0)
    with pytest.raises(ValueError):
        outlier_scores(emb, n_neighbors=6)
