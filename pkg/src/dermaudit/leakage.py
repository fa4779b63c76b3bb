"""Cross-partition leakage detection and repair.

Two images of the same subject must never sit on opposite sides of a
train/eval boundary, or the evaluation score measures memorization. A
group "spans" partitions when its images occupy more than one of train,
valid, test; unassigned images are outside the split and never count.

Overlap is quantified the way an inner join sees it: for a combination
of partitions, image_count sums over spanning groups the product of the
group's per-partition image counts (join row count), and group_count is
the number of distinct spanning groups. A group spanning all three
partitions is counted in every pairwise combination as well.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .embeddings import SimilarityPair
from .errors import ConfigError
from .manifest import DatasetManifest

SPLIT_PARTITIONS = ("train", "valid", "test")

COMBINATIONS = (
    ("train", "valid"),
    ("train", "test"),
    ("valid", "test"),
    ("train", "valid", "test"),
)


@dataclass(frozen=True)
class OverlapEntry:
    combination: tuple[str, ...]
    group_count: int
    image_count: int
    groups: tuple[str, ...]


@dataclass
class OverlapReport:
    entries: dict[tuple[str, ...], OverlapEntry]

    def entry(self, *partitions: str) -> OverlapEntry:
        return self.entries[tuple(partitions)]

    def is_clean(self) -> bool:
        return all(e.group_count == 0 for e in self.entries.values())

    def counts(self) -> dict[str, dict[str, int]]:
        return {
            "+".join(combo): {
                "groups": e.group_count,
                "images": e.image_count,
            }
            for combo, e in self.entries.items()
        }


@dataclass(frozen=True)
class MoveRecord:
    image_id: str
    from_partition: str
    to_partition: str
    reason: str


def _partition_tally(manifest: DatasetManifest) -> dict[str, dict[str, int]]:
    """group_key -> {partition: image count}, split partitions only."""
    tally: dict[str, dict[str, int]] = {}
    for rec in manifest.records:
        if rec.partition not in SPLIT_PARTITIONS:
            continue
        tally.setdefault(rec.group_key, {}).setdefault(rec.partition, 0)
        tally[rec.group_key][rec.partition] += 1
    return tally


def detect_overlap(manifest: DatasetManifest) -> OverlapReport:
    """Measure group leakage across every partition combination."""
    tally = _partition_tally(manifest)
    entries = {}
    for combo in COMBINATIONS:
        groups = []
        images = 0
        for group, counts in tally.items():
            if all(counts.get(p, 0) > 0 for p in combo):
                groups.append(group)
                product = 1
                for p in combo:
                    product *= counts[p]
                images += product
        entries[combo] = OverlapEntry(
            combination=combo,
            group_count=len(groups),
            image_count=images,
            groups=tuple(sorted(groups)),
        )
    return OverlapReport(entries=entries)


def repair(
    manifest: DatasetManifest,
    extra_pairs: list[SimilarityPair] | None = None,
    spanning_no_train: str = "to_train",
) -> tuple[DatasetManifest, list[MoveRecord]]:
    """Consolidate every spanning group into a single partition.

    Rules, applied to a fixpoint so no move can reintroduce a span:
      1. a group with at least one train image moves entirely to train
         (train is the largest partition; moving the other way would
         shrink it and leak training content into evaluation anyway);
      2. a group spanning only valid and test moves per spanning_no_train
         (to_train by default, to_valid / to_test if configured);
      3. each extra duplicate pair that crosses partitions has both
         images placed in train, even though group metadata missed them.

    Records are never added or removed and labels never change, so
    per-diagnosis totals are invariant. Running repair on its own output
    yields zero moves.
    """
    targets = {"to_train": "train", "to_valid": "valid", "to_test": "test"}
    if spanning_no_train not in targets:
        raise ConfigError(
            f"spanning_no_train must be one of {sorted(targets)}, got {spanning_no_train!r}"
        )
    no_train_target = targets[spanning_no_train]
    extra_pairs = extra_pairs or []
    for pair in extra_pairs:
        manifest.get(pair.a)
        manifest.get(pair.b)

    partition = {r.image_id: r.partition for r in manifest.records}
    group_members: dict[str, list[str]] = {}
    for rec in manifest.records:
        group_members.setdefault(rec.group_key, []).append(rec.image_id)

    moves: list[MoveRecord] = []

    def move(image_id: str, target: str, reason: str) -> bool:
        if partition[image_id] == target:
            return False
        moves.append(
            MoveRecord(
                image_id=image_id,
                from_partition=partition[image_id],
                to_partition=target,
                reason=reason,
            )
        )
        partition[image_id] = target
        return True

    changed = True
    while changed:
        changed = False
        for group in sorted(group_members):
            members = group_members[group]
            present = {
                partition[m] for m in members if partition[m] in SPLIT_PARTITIONS
            }
            if len(present) < 2:
                continue
            if "train" in present:
                target, reason = "train", "group_spans_train"
            else:
                target, reason = no_train_target, "group_spans_valid_test"
            for member in members:
                if partition[member] in SPLIT_PARTITIONS:
                    changed |= move(member, target, reason)
        for pair in extra_pairs:
            pa, pb = partition[pair.a], partition[pair.b]
            if pa not in SPLIT_PARTITIONS or pb not in SPLIT_PARTITIONS:
                continue
            if pa != pb:
                changed |= move(pair.a, "train", "duplicate_pair")
                changed |= move(pair.b, "train", "duplicate_pair")

    records = [replace(r, partition=partition[r.image_id]) for r in manifest.records]
    repaired = DatasetManifest(
        name=manifest.name, records=records, label_space=set(manifest.label_space)
    )
    return repaired, moves
