"""Replica datasets whose audit outcomes are known exactly by construction.

Real dermatology collections are too large to ship with a test suite and
their embeddings are not redistributable, so these generators build
replicas with the same statistical shape: planted duplicate structure,
group metadata that leaks across partitions in known amounts, label
conflicts cell by cell, review verdicts with a fixed disagreement
pattern, and planted outliers. Every generator returns the expected
audit numbers alongside the data and asserts its own bookkeeping while
building, so a downstream mismatch means the pipeline is wrong, not the
fixture.

Geometry: each planted unit (pair or triple) gets a random unit-norm
center c and per-member orthonormal tilts w_i perpendicular to c; a
member is cos(t)*c + sin(t)*w_i, which makes the within-unit cosine
exactly cos(t)^2 while cross-unit cosines stay bounded by the center
coherence, which is checked at build time. Isolated images sit directly
on their own centers. Planted outliers occupy private coordinates
orthogonal to the population block, pinning their neighborhood
similarity at exactly zero so they rank strictly last.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field

import numpy as np

from .cleaner import CleaningConfig
from .embeddings import EmbeddingMatrix, SimilarityPair, make_pair
from .manifest import DatasetManifest, ImageRecord

_HAM_CLASSES = ("akiec", "bcc", "bkl", "df", "mel", "nv", "vasc")


def _checksum(image_id: str) -> str:
    return hashlib.md5(image_id.encode("utf-8")).hexdigest()


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise AssertionError(f"replica construction error: {message}")


# ---------------------------------------------------------------------------
# embedding geometry


def _unit_centers(
    rng: np.random.Generator, count: int, dim: int, max_coherence: float
) -> np.ndarray:
    """Random unit vectors whose pairwise cosine stays under max_coherence."""
    centers = rng.standard_normal((count, dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    worst = -1.0
    block = 1024
    for start in range(0, count, block):
        sims = centers[start : start + block] @ centers.T
        for i in range(sims.shape[0]):
            sims[i, start + i] = -1.0
        worst = max(worst, float(sims.max()))
    _require(
        worst <= max_coherence,
        f"center coherence {worst:.4f} exceeds {max_coherence}; change the seed",
    )
    return centers


def _tilts(rng: np.random.Generator, center: np.ndarray, k: int) -> list[np.ndarray]:
    """k orthonormal vectors perpendicular to center (and to each other)."""
    basis = [center]
    out: list[np.ndarray] = []
    while len(out) < k:
        v = rng.standard_normal(center.shape[0])
        for b in basis:
            v = v - (v @ b) * b
        norm = np.linalg.norm(v)
        if norm < 1e-9:
            continue
        v = v / norm
        basis.append(v)
        out.append(v)
    return out


def _members(
    rng: np.random.Generator, center: np.ndarray, k: int, similarity: float
) -> list[np.ndarray]:
    """k unit vectors with pairwise cosine exactly `similarity`."""
    cos_t = float(np.sqrt(similarity))
    sin_t = float(np.sqrt(1.0 - similarity))
    return [cos_t * center + sin_t * w for w in _tilts(rng, center, k)]


# ---------------------------------------------------------------------------
# planted duplicates (small, for oracle comparisons)


def planted_duplicates(
    n_isolated: int = 400,
    n_pairs: int = 20,
    n_triples: int = 8,
    dim: int = 96,
    seed: int = 11,
) -> tuple[EmbeddingMatrix, dict]:
    """Small embedding set with planted near-duplicate structure.

    Returns (embeddings, truth) where truth["pairs"] lists every planted
    (a, b, similarity) at 0.97 or above and truth["clusters"] lists the
    planted triples as member tuples. Nothing else reaches 0.90: with
    center coherence capped at 0.55 and tilt angles of at most
    acos(sqrt(0.97)), the worst cross-unit cosine is about 0.76.
    """
    rng = np.random.default_rng(seed)
    n_units = n_triples + n_pairs + n_isolated
    centers = _unit_centers(rng, n_units, dim, max_coherence=0.55)
    ids: list[str] = []
    rows: list[np.ndarray] = []
    truth_pairs: list[tuple[str, str, float]] = []
    truth_clusters: list[tuple[str, ...]] = []
    unit = 0
    pair_sims = (0.97, 0.975, 0.98)

    def emit(vector: np.ndarray) -> str:
        image_id = f"syn_{len(ids):04d}"
        ids.append(image_id)
        rows.append(vector)
        return image_id

    for _ in range(n_triples):
        members = [emit(v) for v in _members(rng, centers[unit], 3, 0.97)]
        unit += 1
        truth_clusters.append(tuple(members))
        for i in range(3):
            for j in range(i + 1, 3):
                truth_pairs.append((members[i], members[j], 0.97))
    for p in range(n_pairs):
        sim = pair_sims[p % len(pair_sims)]
        a, b = (emit(v) for v in _members(rng, centers[unit], 2, sim))
        unit += 1
        truth_pairs.append((a, b, sim))
    for _ in range(n_isolated):
        emit(centers[unit])
        unit += 1

    emb = EmbeddingMatrix(ids, np.asarray(rows))
    truth = {"pairs": truth_pairs, "clusters": truth_clusters}
    return emb, truth


# ---------------------------------------------------------------------------
# grouped-metadata replica (leakage and repair)


@dataclass
class GroupedReplica:
    """Metadata-only replica: grouped images plus leaking split lists."""

    manifest: DatasetManifest
    splits: dict[str, list[str]]
    extra_pairs: list[SimilarityPair]
    expected: dict


# Spanning groups: (count, images per partition). The per-partition image
# products and distinct-group counts below pin the overlap table exactly;
# singletons and non-spanning groups absorb the rest of the image budget.
_SPANNING = (
    (29, {"train": 1, "valid": 1, "test": 1}),
    (11, {"train": 2, "valid": 1, "test": 1}),
    (58, {"valid": 1, "test": 1}),
    (15, {"valid": 2, "test": 1}),
    (195, {"train": 1, "valid": 1}),
    (89, {"train": 2, "valid": 1}),
    (8, {"train": 1, "valid": 2}),
    (367, {"train": 1, "test": 1}),
    (175, {"train": 2, "test": 1}),
    (59, {"train": 1, "test": 2}),
)

_NON_SPANNING = (
    # (group count, group size, partition)
    (600, 2, "train"),
    (40, 2, "valid"),
    (163, 2, "test"),
    (90, 3, "train"),
    (5, 3, "valid"),
    (20, 3, "test"),
    (18, 4, "train"),
    (1, 4, "valid"),
    (4, 4, "test"),
    (4, 5, "train"),
    (1, 5, "test"),
    (3, 6, "train"),
    (1, 6, "test"),
)

_SINGLETONS = (("train", 4219), ("valid", 476), ("test", 819))


def ham10000_like() -> GroupedReplica:
    """Grouped replica: 10,015 images over 7,470 groups with leaky splits.

    The split lists spill 40 groups across all three partitions, 332
    across train+valid, 641 across train+test and 113 across valid+test,
    which the overlap audit must report as 51/440/886/128 joined images.
    Seven additional cross-partition near-duplicate pairs connect
    singleton groups, so a full repair moves 1,208 images and leaves
    8,215/573/1,227.
    """
    records: list[ImageRecord] = []
    splits: dict[str, list[str]] = {"train": [], "valid": [], "test": []}
    single_ids: dict[str, list[str]] = {"train": [], "valid": [], "test": []}
    serial = 0
    group_serial = 0

    def add_image(group_id: str | None, partition: str, diagnosis: str) -> str:
        nonlocal serial
        image_id = f"ham_{serial:05d}"
        serial += 1
        records.append(
            ImageRecord(
                image_id=image_id,
                file_path=f"images/{image_id}.jpg",
                diagnosis=diagnosis,
                group_id=group_id,
            )
        )
        splits[partition].append(image_id)
        return image_id

    def next_group() -> tuple[str, str]:
        nonlocal group_serial
        group_id = f"les_{group_serial:05d}"
        diagnosis = _HAM_CLASSES[group_serial % len(_HAM_CLASSES)]
        group_serial += 1
        return group_id, diagnosis

    for count, layout in _SPANNING:
        for _ in range(count):
            group_id, diagnosis = next_group()
            for partition, n in layout.items():
                for _ in range(n):
                    add_image(group_id, partition, diagnosis)
    for count, size, partition in _NON_SPANNING:
        for _ in range(count):
            group_id, diagnosis = next_group()
            for _ in range(size):
                add_image(group_id, partition, diagnosis)
    for partition, count in _SINGLETONS:
        for _ in range(count):
            group_id, diagnosis = next_group()
            single_ids[partition].append(add_image(None, partition, diagnosis))

    # Near-duplicate pairs the group metadata missed: endpoints are
    # singleton groups, so they add nothing to the group overlap table.
    extra_pairs = [
        make_pair(single_ids["train"][i], single_ids["test"][i], 0.97)
        for i in range(5)
    ] + [
        make_pair(single_ids["train"][5 + j], single_ids["valid"][j], 0.97)
        for j in range(2)
    ]

    manifest = DatasetManifest(name="grouped-replica", records=records)
    expected = {
        "images": 10015,
        "groups": 7470,
        "histogram": {1: 5514, 2: 1423, 3: 490, 4: 34, 5: 5, 6: 4},
        "groups_multi": 1956,
        "split_counts": {"train": 7007, "valid": 1003, "test": 2005},
        "overlap": {
            "train+valid": {"groups": 332, "images": 440},
            "train+test": {"groups": 641, "images": 886},
            "valid+test": {"groups": 113, "images": 128},
            "train+valid+test": {"groups": 40, "images": 51},
        },
        "repaired_counts": {"train": 8215, "valid": 573, "test": 1227},
        "n_moves": 1208,
    }

    _require(len(records) == expected["images"], "image total drifted")
    sizes: dict[int, int] = {}
    by_group: dict[str, int] = {}
    for rec in records:
        by_group[rec.group_key] = by_group.get(rec.group_key, 0) + 1
    for n in by_group.values():
        sizes[n] = sizes.get(n, 0) + 1
    _require(sizes == expected["histogram"], f"group histogram drifted: {sizes}")
    _require(
        {p: len(ids) for p, ids in splits.items()} == expected["split_counts"],
        "split totals drifted",
    )
    return GroupedReplica(
        manifest=manifest, splits=splits, extra_pairs=extra_pairs, expected=expected
    )


# ---------------------------------------------------------------------------
# embedded replica (similarity, conflicts, review, cleaning, split)

_POP_DIM = 256
_SIM_NEAR_EXACT = 0.9951
_SIM_REVIEW = 0.96
_SIM_GROUP = 0.91

# Conflict cells: (count, diagnoses differ, abs fst gap). Gap 0 means the
# known skin types agree; the review-tier cells sit at similarity 0.96,
# the group-tier cells at 0.91.
_V2_CONFLICT_CELLS = (
    (38, True, 0),
    (564, False, 1),
    (184, False, 3),
    (40, True, 1),
    (15, True, 3),
)
_P2_CELLS = (
    (399, True, 1),
    (447, True, 3),
    (817, False, 1),
    (390, False, 3),
    (454, False, 0),  # clean, both skin types known
    (50, False, -1),  # clean, one skin type unknown (excluded from fst sets)
)
# Triples: (count, pattern). dD3 = three-way diagnosis disagreement;
# the others put one odd member against two clean ones.
_HET3_PATTERNS = (
    (293, "dD3"),
    (290, "DF1"),
    (197, "F1"),
    (50, "Fg"),
    (50, "DFg"),
)

_N_X2 = 200
_N_V2N_DIFFERENT = 16
_N_V2N_UNCLEAR = 7
_N_V2H = 361
_N_OUTLIERS = 300
_N_SINGLES = 5673

# Survivor class sizes. Multiples of ten split exactly at 70/10/20; the
# four size-13 classes each round one image into test and the two
# size-16 classes round one into valid, landing the totals on
# 7,975/1,139/2,280 with every per-class deviation under one image.
_SURVIVOR_CLASS_SIZES = (
    [2110, 1200, 800, 600]
    + [500] * 2
    + [400] * 2
    + [300] * 2
    + [200] * 4
    + [100] * 8
    + [60] * 10
    + [50] * 16
    + [30] * 20
    + [20] * 20
    + [10] * 20
    + [13] * 4
    + [16] * 2
)


@dataclass
class EmbeddedReplica:
    """Full-pipeline replica: embeddings, labels, verdicts, outliers."""

    manifest: DatasetManifest
    embeddings: EmbeddingMatrix
    verdicts: list[tuple[str, str, str, str]]  # (annotator, a, b, value)
    outlier_ids: list[str] = field(default_factory=list)
    primary_annotator: str = "r1"
    expected: dict = field(default_factory=dict)

    def cleaning_config(self) -> CleaningConfig:
        return CleaningConfig(outlier_ids=list(self.outlier_ids))


class _SlotAllocator:
    """Hands out survivor label slots against fixed per-class capacities."""

    def __init__(self, sizes: list[int]):
        self.capacity = list(sizes)

    def take_pair(self) -> int:
        idx = min(range(len(self.capacity)), key=lambda i: (-self.capacity[i], i))
        _require(self.capacity[idx] >= 2, "no class can hold a same-label pair")
        self.capacity[idx] -= 2
        return idx

    def take_two_classes(self) -> tuple[int, int]:
        order = sorted(range(len(self.capacity)), key=lambda i: (-self.capacity[i], i))
        a, b = order[0], order[1]
        _require(self.capacity[b] >= 1, "no two classes left for a split pair")
        self.capacity[a] -= 1
        self.capacity[b] -= 1
        return a, b

    def drain_singles(self) -> list[int]:
        out: list[int] = []
        for idx, cap in enumerate(self.capacity):
            out.extend([idx] * cap)
            self.capacity[idx] = 0
        return out


def _fst_pair(gap: int) -> tuple[int, int]:
    # gap -1 encodes "one side unknown"; 0 same; 1 adjacent; >1 far apart.
    if gap == -1:
        return (0, 4)
    if gap == 0:
        return (2, 2)
    if gap == 1:
        return (2, 3)
    return (1, 1 + gap)


def fitzpatrick_like(seed: int = 20260819) -> EmbeddedReplica:
    """Ungrouped replica exercising the whole embedding-driven pipeline.

    16,577 images over 114 diagnosis classes. Planted similarity
    structure: 200 near-exact pairs at 0.9951, 1,225 pairs at 0.96 (841
    with label conflicts, 23 judged not duplicates in review, 361 clean),
    880 triples and 2,557 pairs at 0.91, 300 isolated outliers and 5,673
    isolated singles. That yields 6,622 pairs at threshold 0.90 and
    1,425 at 0.95, conflict sets of fixed size per threshold, 880
    detected triple clusters that coalesce with the 1,402 review-confirmed
    pairs into 2,282 components, and a cleaned release of 11,394 images
    whose 70/10/20 class-stratified split is 7,975/1,139/2,280. Two
    planted reviewers disagree on exactly 6 of 1,425 shared pairs with
    matching marginals, fixing the chance-corrected agreement near 0.868.
    """
    rng = np.random.default_rng(seed)
    classes = [f"cond_{i:03d}" for i in range(114)]
    sizes = list(_SURVIVOR_CLASS_SIZES)
    _require(len(sizes) == 114, "class count drifted")
    _require(sum(sizes) == 11394, "survivor budget drifted")

    allocator = _SlotAllocator(sizes)
    n_p2_same = sum(c for c, diff, _ in _P2_CELLS if not diff)
    n_p2_diff = sum(c for c, diff, _ in _P2_CELLS if diff)
    n_v2n = _N_V2N_DIFFERENT + _N_V2N_UNCLEAR
    same_pair_slots = [allocator.take_pair() for _ in range(n_p2_same + n_v2n)]
    diff_pair_slots = [allocator.take_two_classes() for _ in range(n_p2_diff)]
    single_slots = allocator.drain_singles()
    _require(
        len(single_slots) == _N_X2 + _N_V2H + _N_SINGLES,
        "singleton slot count drifted",
    )

    # Every pair or triple is one geometric unit; every single is its own.
    n_units = (
        _N_X2
        + sum(c for c, _, _ in _V2_CONFLICT_CELLS)
        + n_v2n
        + _N_V2H
        + sum(c for c, _ in _HET3_PATTERNS)
        + sum(c for c, _, _ in _P2_CELLS)
        + _N_SINGLES
    )
    centers = _unit_centers(rng, n_units, _POP_DIM, max_coherence=0.45)
    dim = _POP_DIM + _N_OUTLIERS

    records: list[ImageRecord] = []
    vectors = np.zeros((16577, dim), dtype=np.float64)
    serial = 0
    unit = 0

    def add_image(
        diagnosis: str, fst: int, vector: np.ndarray | None, size: tuple[int, int]
    ) -> str:
        nonlocal serial
        image_id = f"f17k_{serial:05d}"
        if vector is not None:
            vectors[serial, :_POP_DIM] = vector
        records.append(
            ImageRecord(
                image_id=image_id,
                file_path=f"images/{image_id}.jpg",
                diagnosis=diagnosis,
                fst=fst,
                width=size[0],
                height=size[1],
                checksum=_checksum(image_id),
            )
        )
        serial += 1
        return image_id

    def add_pair(
        similarity: float,
        diag: tuple[str, str],
        fst: tuple[int, int],
        sizes_wh: tuple[tuple[int, int], tuple[int, int]] = ((600, 450), (600, 450)),
    ) -> tuple[str, str]:
        nonlocal unit
        va, vb = _members(rng, centers[unit], 2, similarity)
        unit += 1
        a = add_image(diag[0], fst[0], va, sizes_wh[0])
        b = add_image(diag[1], fst[1], vb, sizes_wh[1])
        return a, b

    single_cursor = 0

    def next_single_class() -> str:
        nonlocal single_cursor
        label = classes[single_slots[single_cursor]]
        single_cursor += 1
        return label

    x2_pairs: list[tuple[str, str]] = []
    for _ in range(_N_X2):
        label = next_single_class()  # the kept, smaller id; the twin mirrors it
        x2_pairs.append(add_pair(_SIM_NEAR_EXACT, (label, label), (2, 2)))

    v2c_pairs: list[tuple[str, str]] = []
    for count, diag_differs, gap in _V2_CONFLICT_CELLS:
        for _ in range(count):
            diag = ("cond_000", "cond_001") if diag_differs else ("cond_000", "cond_000")
            v2c_pairs.append(add_pair(_SIM_REVIEW, diag, _fst_pair(gap)))

    v2n_pairs: list[tuple[str, str]] = []
    same_cursor = n_p2_same  # v2n slots sit after the p2 same-label slots
    for _ in range(n_v2n):
        label = classes[same_pair_slots[same_cursor]]
        same_cursor += 1
        v2n_pairs.append(add_pair(_SIM_REVIEW, (label, label), (2, 2)))

    v2h_pairs: list[tuple[str, str]] = []
    for _ in range(_N_V2H):
        label = next_single_class()  # keeper has the larger area
        v2h_pairs.append(
            add_pair(
                _SIM_REVIEW,
                (label, label),
                (2, 2),
                sizes_wh=((800, 600), (600, 450)),
            )
        )

    for count, pattern in _HET3_PATTERNS:
        for _ in range(count):
            va, vb, vc = _members(rng, centers[unit], 3, _SIM_GROUP)
            unit += 1
            if pattern == "dD3":
                plan = [("cond_000", 2), ("cond_001", 2), ("cond_002", 2)]
            elif pattern == "DF1":
                plan = [("cond_001", 3), ("cond_000", 2), ("cond_000", 2)]
            elif pattern == "F1":
                plan = [("cond_000", 3), ("cond_000", 2), ("cond_000", 2)]
            elif pattern == "Fg":
                plan = [("cond_000", 5), ("cond_000", 2), ("cond_000", 2)]
            else:  # DFg
                plan = [("cond_001", 5), ("cond_000", 2), ("cond_000", 2)]
            for (diagnosis, fst), vec in zip(plan, (va, vb, vc)):
                add_image(diagnosis, fst, vec, (600, 450))

    same_cursor = 0
    diff_cursor = 0
    for count, diag_differs, gap in _P2_CELLS:
        for _ in range(count):
            if diag_differs:
                ia, ib = diff_pair_slots[diff_cursor]
                diff_cursor += 1
                diag = (classes[ia], classes[ib])
            else:
                label = classes[same_pair_slots[same_cursor]]
                same_cursor += 1
                diag = (label, label)
            add_pair(_SIM_GROUP, diag, _fst_pair(gap))
    _require(same_cursor == n_p2_same, "p2 same-label slot mismatch")
    _require(diff_cursor == n_p2_diff, "p2 split-label slot mismatch")

    outlier_ids: list[str] = []
    for j in range(_N_OUTLIERS):
        image_id = add_image("cond_000", 2, None, (600, 450))
        vectors[serial - 1, _POP_DIM + j] = 1.0
        outlier_ids.append(image_id)

    for i in range(_N_SINGLES):
        add_image(next_single_class(), i % 7, centers[unit], (600, 450))
        unit += 1

    _require(serial == 16577, f"image total drifted: {serial}")
    _require(unit == n_units, "unit cursor drifted")
    _require(single_cursor == len(single_slots), "unused singleton slots")

    manifest = DatasetManifest(name="embedded-replica", records=records)
    emb = EmbeddingMatrix([r.image_id for r in records], vectors)

    # Two reviewers over every pair at or above 0.95. r2 disagrees on
    # exactly six pairs, swapping three duplicate and three different
    # verdicts so both sides keep the same marginals.
    verdicts: list[tuple[str, str, str, str]] = []
    r1: list[tuple[tuple[str, str], str]] = []
    r1 += [(p, "duplicate") for p in x2_pairs]
    r1 += [(p, "duplicate") for p in v2c_pairs]
    r1 += [(p, "different") for p in v2n_pairs[:_N_V2N_DIFFERENT]]
    r1 += [(p, "unclear") for p in v2n_pairs[_N_V2N_DIFFERENT:]]
    r1 += [(p, "duplicate") for p in v2h_pairs]
    flips = {v2h_pairs[i]: "different" for i in range(3)}
    flips.update({v2n_pairs[i]: "duplicate" for i in range(3)})
    for (a, b), value in r1:
        verdicts.append(("r1", a, b, value))
    for (a, b), value in r1:
        verdicts.append(("r2", a, b, flips.get((a, b), value)))

    n_review = len(r1)
    po = (n_review - 6) / n_review
    pe = (1402**2 + 16**2 + 7**2) / n_review**2
    expected = {
        "images": 16577,
        "dim": dim,
        "classes": 114,
        "pair_counts": {0.90: 6622, 0.95: 1425},
        "near_exact_pairs": 200,
        "conflicts": {
            0.90: {
                "diagnosis": 2498,
                "fst_geq1": 4030,
                "fst_gt1": 1236,
                "diagnosis_and_fst_geq1": 1581,
                "diagnosis_and_fst_gt1": 562,
                "diagnosis_or_fst_geq1": 4947,
                "diagnosis_or_fst_gt1": 3172,
            },
            0.95: {
                "diagnosis": 93,
                "fst_geq1": 803,
                "fst_gt1": 199,
                "diagnosis_and_fst_geq1": 55,
                "diagnosis_and_fst_gt1": 15,
                "diagnosis_or_fst_geq1": 841,
                "diagnosis_or_fst_gt1": 277,
            },
        },
        "detected_clusters": 880,
        "confirmed_pairs": 1402,
        "coalesced_clusters": 2282,
        "removed_by_stage": {
            "near_exact": 200,
            "cluster_heterogeneous": 4322,
            "cluster_duplicate": 361,
            "outlier": 300,
        },
        "survivors": 11394,
        "split_counts": {"train": 7975, "valid": 1139, "test": 2280},
        "review": {
            "n_common": n_review,
            "agreement": po,
            "kappa": (po - pe) / (1 - pe),
        },
    }
    _require(n_review == 1425, f"review queue drifted: {n_review}")
    planted_90 = (
        _N_X2
        + len(v2c_pairs)
        + n_v2n
        + _N_V2H
        + 3 * sum(c for c, _ in _HET3_PATTERNS)
        + sum(c for c, _, _ in _P2_CELLS)
    )
    _require(planted_90 == 6622, f"planted pair total drifted: {planted_90}")
    removed_total = sum(expected["removed_by_stage"].values())
    _require(
        expected["images"] - removed_total == expected["survivors"],
        "removal budget drifted",
    )
    return EmbeddedReplica(
        manifest=manifest,
        embeddings=emb,
        verdicts=verdicts,
        outlier_ids=outlier_ids,
        primary_annotator="r1",
        expected=expected,
    )


# ---------------------------------------------------------------------------
# extended-release sources


def extended_release_sources() -> tuple[dict[str, DatasetManifest], list[str], dict]:
    """Three disjoint source manifests plus an exclusion list.

    The test source contains ISIC_0035068, which the exclusion list
    removes, so the assembled release counts 10,015/193/1,511.
    """

    def build(name: str, prefix: str, count: int, extra_ids: tuple[str, ...] = ()):
        records = [
            ImageRecord(
                image_id=image_id,
                file_path=f"images/{image_id}.jpg",
                diagnosis=_HAM_CLASSES[i % len(_HAM_CLASSES)],
            )
            for i, image_id in enumerate(
                [f"{prefix}_{i:05d}" for i in range(count)] + list(extra_ids)
            )
        ]
        return DatasetManifest(name=name, records=records)

    sources = {
        "train": build("ext-train", "exttr", 10015),
        "valid": build("ext-valid", "extva", 193),
        "test": build("ext-test", "extte", 1511, extra_ids=("ISIC_0035068",)),
    }
    exclusions = ["ISIC_0035068"]
    expected = {
        "totals": {"train": 10015, "valid": 193, "test": 1511},
        "images": 11719,
        "absent": "ISIC_0035068",
    }
    return sources, exclusions, expected


# ---------------------------------------------------------------------------
# random manifests for property checks


def random_manifest(
    seed: int, n_groups: int = 40
) -> tuple[DatasetManifest, list[SimilarityPair]]:
    """Random grouped manifest plus a few random duplicate pairs.

    Group sizes, partitions (including unassigned), labels and skin
    types are all drawn from the seed, giving repair and overlap checks
    a stream of odd-shaped inputs.
    """
    rng = random.Random(seed)
    records: list[ImageRecord] = []
    serial = 0
    for g in range(n_groups):
        size = rng.choice((1, 1, 1, 2, 2, 3, 4))
        group_id = f"g{g:03d}" if size > 1 or rng.random() < 0.5 else None
        for _ in range(size):
            records.append(
                ImageRecord(
                    image_id=f"r{serial:04d}",
                    file_path=f"images/r{serial:04d}.jpg",
                    diagnosis=rng.choice(("a", "b", "c")),
                    group_id=group_id,
                    fst=rng.randint(0, 6),
                    partition=rng.choice(("train", "valid", "test", "unassigned")),
                )
            )
            serial += 1
    manifest = DatasetManifest(name=f"random-{seed}", records=records)
    ids = [r.image_id for r in records]
    extra = []
    for _ in range(rng.randint(0, 5)):
        a, b = rng.sample(ids, 2)
        extra.append(make_pair(a, b, 0.97))
    return manifest, extra
