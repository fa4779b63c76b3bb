"""Near-duplicate structure on top of raw similarity pairs.

Pairs from the embedding scan are only half the story: duplicates arrive
in clusters, metadata may already know two images belong together, and a
human verdict can contradict both. This module turns pairs into clusters
(connected components), merges pair and cluster evidence, and reconciles
similarity hits against group metadata and review verdicts.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .embeddings import EmbeddingMatrix, SimilarityPair, make_pair
from .errors import IntegrityError
from .manifest import DatasetManifest

VERDICTS = ("duplicate", "unclear", "different")


class UnionFind:
    """Disjoint sets over hashable keys; path compression + union by size."""

    def __init__(self):
        self.parent: dict = {}
        self.size: dict = {}

    def add(self, key) -> None:
        if key not in self.parent:
            self.parent[key] = key
            self.size[key] = 1

    def find(self, key):
        self.add(key)
        root = key
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[key] != root:
            self.parent[key], key = root, self.parent[key]
        return root

    def union(self, a, b) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]

    def components(self) -> list[set]:
        comps: dict = {}
        for key in self.parent:
            comps.setdefault(self.find(key), set()).add(key)
        return list(comps.values())


@dataclass(frozen=True)
class DuplicateCluster:
    """A set of mutually near-duplicate images.

    members are sorted ascending; mean_similarity averages cosine over all
    member pairs (not just detected edges). Homogeneity flags are None
    until labels are attached from a manifest; unknown FST (0) never makes
    a cluster FST-heterogeneous, only two differing known values do.
    """

    members: tuple[str, ...]
    mean_similarity: float
    homogeneous_diagnosis: bool | None = None
    homogeneous_fst: bool | None = None

    def __post_init__(self):
        if len(self.members) < 2:
            raise IntegrityError("cluster needs at least 2 members")
        if list(self.members) != sorted(self.members):
            raise IntegrityError("cluster members must be sorted ascending")
        if len(set(self.members)) != len(self.members):
            raise IntegrityError("cluster members must be unique")

    def __len__(self) -> int:
        return len(self.members)


@dataclass
class PairConfusion:
    """Similarity hits reconciled against group metadata and verdicts."""

    confirmed: list[SimilarityPair]            # same group, verdict duplicate
    missed: list[SimilarityPair]               # different groups, verdict duplicate
    true_non_duplicates: list[SimilarityPair]  # different groups, verdict different
    false_duplicates: list[SimilarityPair]     # same group, verdict different
    unclear: list[SimilarityPair]              # excluded from the four counts

    def counts(self) -> dict[str, int]:
        return {
            "confirmed": len(self.confirmed),
            "missed": len(self.missed),
            "true_non_duplicates": len(self.true_non_duplicates),
            "false_duplicates": len(self.false_duplicates),
            "unclear": len(self.unclear),
        }


@dataclass(frozen=True)
class IntervalCounts:
    """Composition of one rank interval of the pair list."""

    start: int  # 1-based rank of first pair in the interval
    stop: int   # 1-based rank of last pair in the interval
    already_in_metadata: int
    missed_duplicate: int
    true_non_duplicate: int

    @property
    def width(self) -> int:
        return self.stop - self.start + 1


def _mean_pairwise(emb: EmbeddingMatrix, members: tuple[str, ...]) -> float:
    rows = emb.unit_rows()[[emb.row_index(m) for m in members]]
    scores = rows @ rows.T
    k = len(members)
    total = 0.0
    for i in range(k):
        for j in range(i + 1, k):
            total += scores[i, j]
    return total / (k * (k - 1) / 2)


def annotate_homogeneity(
    clusters: list[DuplicateCluster], manifest: DatasetManifest
) -> list[DuplicateCluster]:
    """Fill homogeneity flags from manifest labels."""
    out = []
    for cluster in clusters:
        records = [manifest.get(m) for m in cluster.members]
        diagnoses = {r.diagnosis for r in records}
        known_fsts = {r.fst for r in records if r.fst != 0}
        out.append(
            replace(
                cluster,
                homogeneous_diagnosis=len(diagnoses) <= 1,
                homogeneous_fst=len(known_fsts) <= 1,
            )
        )
    return out


def detect_clusters(
    emb: EmbeddingMatrix,
    threshold: float,
    min_size: int = 3,
    manifest: DatasetManifest | None = None,
    pairs: list[SimilarityPair] | None = None,
) -> list[DuplicateCluster]:
    """Connected components of the threshold graph that stay coherent.

    A component qualifies as a cluster when it has at least min_size
    members and its mean pairwise similarity (over all member pairs) is
    strictly above the threshold, which filters out loose chains. Sorted
    by descending mean similarity, then smallest member id. Pass pairs to
    reuse an existing scan at the same threshold.
    """
    if min_size < 2:
        raise ValueError(f"min_size must be >= 2, got {min_size}")
    from .embeddings import scan_pairs

    if pairs is None:
        pairs = scan_pairs(emb, threshold)
    uf = UnionFind()
    for pair in pairs:
        uf.union(pair.a, pair.b)
    clusters = []
    for comp in uf.components():
        if len(comp) < min_size:
            continue
        members = tuple(sorted(comp))
        mean = _mean_pairwise(emb, members)
        if mean > threshold:
            clusters.append(DuplicateCluster(members=members, mean_similarity=mean))
    clusters.sort(key=lambda c: (-c.mean_similarity, c.members[0]))
    if manifest is not None:
        clusters = annotate_homogeneity(clusters, manifest)
    return clusters


def coalesce(
    pairs: list[SimilarityPair],
    clusters: list[DuplicateCluster],
    emb: EmbeddingMatrix,
    manifest: DatasetManifest | None = None,
) -> list[DuplicateCluster]:
    """Merge pair evidence and cluster evidence into final components.

    Union-find over the union of pair edges and cluster memberships;
    every component of size >= 2 becomes a cluster with mean similarity
    recomputed over its final membership. Output order: descending mean,
    then smallest member id.
    """
    uf = UnionFind()
    for pair in pairs:
        uf.union(pair.a, pair.b)
    for cluster in clusters:
        first = cluster.members[0]
        for member in cluster.members[1:]:
            uf.union(first, member)
    merged = []
    for comp in uf.components():
        if len(comp) < 2:
            continue
        members = tuple(sorted(comp))
        merged.append(
            DuplicateCluster(members=members, mean_similarity=_mean_pairwise(emb, members))
        )
    merged.sort(key=lambda c: (-c.mean_similarity, c.members[0]))
    if manifest is not None:
        merged = annotate_homogeneity(merged, manifest)
    return merged


def _same_group(manifest: DatasetManifest, pair: SimilarityPair) -> bool:
    return manifest.get(pair.a).group_key == manifest.get(pair.b).group_key


def _verdict_for(verdicts: dict, pair: SimilarityPair) -> str | None:
    value = verdicts.get(pair.key)
    if value is None:
        return None
    if value not in VERDICTS:
        raise ValueError(f"verdict for {pair.key} must be one of {VERDICTS}, got {value!r}")
    return value


def classify_pairs(
    pairs: list[SimilarityPair],
    verdicts: dict[tuple[str, str], str],
    manifest: DatasetManifest,
) -> PairConfusion:
    """Cross high-similarity pairs with metadata and human verdicts.

    Pairs marked unclear are excluded from the four confusion buckets and
    surfaced separately. A pair without a verdict is an error here: this
    report is only meaningful over fully reviewed pairs.
    """
    result = PairConfusion([], [], [], [], [])
    for pair in pairs:
        verdict = _verdict_for(verdicts, pair)
        if verdict is None:
            raise IntegrityError(f"pair {pair.key} has no verdict")
        if verdict == "unclear":
            result.unclear.append(pair)
            continue
        same = _same_group(manifest, pair)
        if same and verdict == "duplicate":
            result.confirmed.append(pair)
        elif same:
            result.false_duplicates.append(pair)
        elif verdict == "duplicate":
            result.missed.append(pair)
        else:
            result.true_non_duplicates.append(pair)
    return result


def interval_analysis(
    pairs: list[SimilarityPair],
    manifest: DatasetManifest,
    verdicts: dict[tuple[str, str], str] | None = None,
    top_k: int = 1000,
    width: int = 100,
) -> list[IntervalCounts]:
    """Composition of the top-k pair ranks, interval by interval.

    Metadata decides "already_in_metadata"; for cross-group pairs a
    duplicate verdict makes a "missed_duplicate" and anything else
    (different, unclear, or unreviewed) counts as "true_non_duplicate".
    The three counts always sum to the interval width; the last interval
    may be short when fewer than top_k pairs exist.
    """
    if top_k < 1 or width < 1:
        raise ValueError("top_k and width must be >= 1")
    verdicts = verdicts or {}
    ranked = pairs[:top_k]
    out = []
    for start in range(0, len(ranked), width):
        chunk = ranked[start : start + width]
        already = missed = non_dup = 0
        for pair in chunk:
            if _same_group(manifest, pair):
                already += 1
            elif _verdict_for(verdicts, pair) == "duplicate":
                missed += 1
            else:
                non_dup += 1
        out.append(
            IntervalCounts(
                start=start + 1,
                stop=start + len(chunk),
                already_in_metadata=already,
                missed_duplicate=missed,
                true_non_duplicate=non_dup,
            )
        )
    return out


def least_similar_within_groups(
    manifest: DatasetManifest,
    emb: EmbeddingMatrix,
    per_bucket: int = 5,
) -> dict[int, list[SimilarityPair]]:
    """Least similar same-group pairs, bucketed by group size.

    The low end of within-group similarity is where mislinked metadata
    hides: images that share a group but look nothing alike. For every
    group size present (>= 2) the per_bucket lowest-scoring pairs are
    returned in ascending score order.
    """
    if per_bucket < 1:
        raise ValueError(f"per_bucket must be >= 1, got {per_bucket}")
    unit = emb.unit_rows()
    buckets: dict[int, list[SimilarityPair]] = {}
    for members in manifest.groups().values():
        if len(members) < 2:
            continue
        ids = sorted(r.image_id for r in members)
        rows = unit[[emb.row_index(i) for i in ids]]
        scores = rows @ rows.T
        bucket = buckets.setdefault(len(ids), [])
        for i in range(len(ids)):
            for j in range(i + 1, len(ids)):
                bucket.append(make_pair(ids[i], ids[j], scores[i, j]))
    return {
        size: sorted(bucket, key=lambda p: (p.score, p.a, p.b))[:per_bucket]
        for size, bucket in sorted(buckets.items())
    }
