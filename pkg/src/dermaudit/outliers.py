"""Outlier ranking by neighborhood similarity.

An image whose closest neighbors are all far away is a candidate for
being off-domain (wrong body site, instrument artifact, not skin at
all). The score of an image is the similarity to its n-th nearest
neighbor, i.e. the minimum over its top-n neighbor similarities; low
score = isolated = suspect. No cutoff is applied here: ranking is the
product, removal is a cleaning-config decision.
"""

from __future__ import annotations

from .embeddings import EmbeddingMatrix, knn


def outlier_scores(
    emb: EmbeddingMatrix, n_neighbors: int = 5
) -> list[tuple[str, float]]:
    """(image_id, score) tuples sorted ascending by score, then id.

    score = min over the image's n_neighbors nearest-neighbor cosine
    similarities, which by construction equals the n-th one. Requires
    n_neighbors in 1..len(emb)-1.
    """
    neighbors = knn(emb, n_neighbors)
    scored = [
        (image_id, nearest[-1][1]) for image_id, nearest in neighbors.items()
    ]
    scored.sort(key=lambda t: (t[1], t[0]))
    return scored
