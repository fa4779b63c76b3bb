"""Staged dataset cleaning, stratified re-splitting, and image export.

Cleaning is a pipeline of explicit, individually logged removal stages:

  1. near-exact filter: of any pair virtually indistinguishable in
     embedding space (similarity strictly above the near-exact
     threshold), the lexicographically larger id is dropped;
  2. duplicate clusters: a cluster whose members disagree on diagnosis
     or on known skin type is removed entirely (no way to tell which
     label is right); a label-homogeneous cluster keeps exactly its
     highest-resolution member (ties broken by smallest id);
  3. outliers: removed only when explicitly configured, either by id
     list or by a score cutoff - there is no silent default;
  4. optionally, images with unknown skin type (fst 0).

Every removal lands in a ledger with its stage and reason, so the
difference between input and output manifests is fully accounted for.
"""

from __future__ import annotations

import logging
import random
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import csv

from PIL import Image

from .duplicates import DuplicateCluster
from .embeddings import BICUBIC, EmbeddingMatrix, scan_pairs
from .errors import ConfigError, IntegrityError
from .manifest import DatasetManifest, ImageRecord
from .outliers import outlier_scores

logger = logging.getLogger(__name__)

SPLIT_ORDER = ("train", "valid", "test")


@dataclass
class CleaningConfig:
    """All knobs of the cleaning and splitting pipeline.

    outlier_ids and outlier_score_cutoff are mutually exclusive; leaving
    both unset disables stage 3 entirely.
    """

    near_exact_threshold: float = 0.99
    keep_rule: str = "largest_resolution"
    remove_unknown_fst: bool = False
    outlier_ids: list[str] = field(default_factory=list)
    outlier_score_cutoff: float | None = None
    outlier_neighbors: int = 5
    split_ratios: tuple[float, float, float] = (0.70, 0.10, 0.20)
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.near_exact_threshold <= 1.0:
            raise ConfigError(
                f"near_exact_threshold must be in (0, 1], got {self.near_exact_threshold}"
            )
        if self.keep_rule != "largest_resolution":
            raise ConfigError(f"unknown keep_rule {self.keep_rule!r}")
        if self.outlier_ids and self.outlier_score_cutoff is not None:
            raise ConfigError("outlier_ids and outlier_score_cutoff are mutually exclusive")
        if self.outlier_neighbors < 1:
            raise ConfigError("outlier_neighbors must be >= 1")
        self.split_ratios = tuple(float(r) for r in self.split_ratios)
        validate_ratios(self.split_ratios)

    @classmethod
    def from_dict(cls, data: dict) -> "CleaningConfig":
        cleaning = data.get("cleaning", {})
        split = data.get("split", {})
        known_cleaning = {
            "near_exact_threshold",
            "keep_rule",
            "remove_unknown_fst",
            "outlier_ids",
            "outlier_score_cutoff",
            "outlier_neighbors",
        }
        known_split = {"ratios", "seed"}
        for table, known in (("cleaning", known_cleaning), ("split", known_split)):
            extra = set(data.get(table, {})) - known
            if extra:
                raise ConfigError(f"unknown [{table}] keys: {sorted(extra)}")
        kwargs = {k: v for k, v in cleaning.items()}
        if "ratios" in split:
            kwargs["split_ratios"] = tuple(split["ratios"])
        if "seed" in split:
            kwargs["seed"] = int(split["seed"])
        return cls(**kwargs)


def validate_ratios(ratios) -> tuple[float, float, float]:
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3:
        raise ConfigError(f"need exactly 3 split ratios, got {len(ratios)}")
    if any(r < 0 for r in ratios):
        raise ConfigError(f"split ratios must be non-negative: {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must sum to 1, got {sum(ratios)!r}")
    return ratios


@dataclass(frozen=True)
class RemovalRecord:
    image_id: str
    stage: str
    reason: str


@dataclass
class RemovalLedger:
    records: list[RemovalRecord] = field(default_factory=list)

    def add(self, image_id: str, stage: str, reason: str) -> None:
        self.records.append(RemovalRecord(image_id, stage, reason))

    def ids(self) -> set[str]:
        return {r.image_id for r in self.records}

    def by_stage(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for rec in self.records:
            out[rec.stage] = out.get(rec.stage, 0) + 1
        return out

    def __len__(self) -> int:
        return len(self.records)

    def save(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["image_id", "stage", "reason"])
            for rec in self.records:
                writer.writerow([rec.image_id, rec.stage, rec.reason])

    @classmethod
    def load(cls, path) -> "RemovalLedger":
        ledger = cls()
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["image_id", "stage", "reason"]:
                raise ConfigError(f"bad removals header {header!r}")
            for row in reader:
                ledger.add(*row)
        return ledger


def _check_bound(manifest: DatasetManifest, emb: EmbeddingMatrix) -> None:
    manifest_ids = {r.image_id for r in manifest.records}
    emb_ids = set(emb.ids)
    if manifest_ids != emb_ids:
        missing = sorted(manifest_ids - emb_ids)[:3]
        extra = sorted(emb_ids - manifest_ids)[:3]
        raise IntegrityError(
            f"embeddings not bound to manifest (missing {missing}, extra {extra})"
        )


def clean(
    manifest: DatasetManifest,
    emb: EmbeddingMatrix,
    clusters: list[DuplicateCluster],
    config: CleaningConfig,
) -> tuple[DatasetManifest, RemovalLedger]:
    """Run the removal stages and return (cleaned manifest, ledger).

    Clusters are typically the coalesced output of the duplicates module.
    Heterogeneity is judged on a cluster's full detected membership, but
    removals only apply to members still present, so a cluster that lost
    an image to the near-exact filter is still dropped whole when its
    labels disagree.
    """
    _check_bound(manifest, emb)
    ledger = RemovalLedger()
    removed: set[str] = set()

    # Stage 1: near-exact pairs, strictly above threshold.
    for pair in scan_pairs(emb, config.near_exact_threshold):
        if pair.score <= config.near_exact_threshold:
            continue
        if pair.b not in removed:
            removed.add(pair.b)
            ledger.add(pair.b, "near_exact", f"near-exact duplicate of {pair.a}")

    # Stage 2: duplicate clusters.
    for cluster in sorted(clusters, key=lambda c: c.members):
        records = [manifest.get(m) for m in cluster.members]
        diagnoses = {r.diagnosis for r in records}
        known_fsts = {r.fst for r in records if r.fst != 0}
        heterogeneous = len(diagnoses) > 1 or len(known_fsts) > 1
        remaining = [r for r in records if r.image_id not in removed]
        if heterogeneous:
            what = "diagnosis" if len(diagnoses) > 1 else "fst"
            for rec in remaining:
                removed.add(rec.image_id)
                ledger.add(
                    rec.image_id,
                    "cluster_heterogeneous",
                    f"{what} differs within cluster anchored at {cluster.members[0]}",
                )
            continue
        if len(remaining) < 2:
            continue
        for rec in remaining:
            if rec.width is None:
                raise IntegrityError(
                    f"{rec.image_id}: dimensions required to pick a cluster keeper"
                )
        keeper = sorted(
            remaining, key=lambda r: (-(r.width * r.height), r.image_id)
        )[0]
        for rec in remaining:
            if rec.image_id != keeper.image_id:
                removed.add(rec.image_id)
                ledger.add(
                    rec.image_id,
                    "cluster_duplicate",
                    f"duplicate of {keeper.image_id} (smaller resolution)",
                )

    # Stage 3: outliers, only when configured.
    if config.outlier_ids:
        for image_id in config.outlier_ids:
            manifest.get(image_id)  # unknown id is a config mistake
            if image_id not in removed:
                removed.add(image_id)
                ledger.add(image_id, "outlier", "configured outlier id")
    elif config.outlier_score_cutoff is not None:
        for image_id, score in outlier_scores(emb, config.outlier_neighbors):
            if score < config.outlier_score_cutoff and image_id not in removed:
                removed.add(image_id)
                ledger.add(
                    image_id,
                    "outlier",
                    f"neighborhood similarity {score:.6f} below cutoff",
                )

    # Stage 4: unknown skin type.
    if config.remove_unknown_fst:
        for rec in manifest.records:
            if rec.fst == 0 and rec.image_id not in removed:
                removed.add(rec.image_id)
                ledger.add(rec.image_id, "unknown_fst", "unknown skin type (fst 0)")

    survivors = [r for r in manifest.records if r.image_id not in removed]
    cleaned = DatasetManifest(
        name=manifest.name, records=survivors, label_space=set(manifest.label_space)
    )
    return cleaned, ledger


def apportion(
    class_sizes: list[tuple[str, int]], ratios: tuple[float, float, float]
) -> dict[str, tuple[int, int, int]]:
    """Per-class largest-remainder allocation of (train, valid, test).

    Within a class, whole seats go by floor, leftovers by largest
    remainder; remainder ties break toward the partition with the largest
    remaining global deficit, then by partition order, so totals track
    the global targets instead of drifting. Per-class counts deviate from
    the exact ratio by less than one image.
    """
    ratios = validate_ratios(ratios)
    total = sum(n for _, n in class_sizes)
    targets = [ratios[i] * total for i in range(3)]
    assigned = [0, 0, 0]
    result: dict[str, tuple[int, int, int]] = {}
    for label, n in class_sizes:
        exact = [ratios[i] * n for i in range(3)]
        counts = [int(e) for e in exact]
        for i in range(3):
            assigned[i] += counts[i]
        seats = n - sum(counts)
        if seats:
            order = sorted(
                range(3),
                key=lambda i: (
                    -(exact[i] - counts[i]),
                    -(targets[i] - assigned[i]),
                    i,
                ),
            )
            for i in order[:seats]:
                counts[i] += 1
                assigned[i] += 1
        result[label] = tuple(counts)
    return result


def stratified_split(
    manifest: DatasetManifest,
    ratios: tuple[float, float, float] = (0.70, 0.10, 0.20),
    seed: int = 0,
) -> DatasetManifest:
    """Re-partition every record class by class at the given ratios.

    Membership within a class is shuffled deterministically from the
    seed; counts come from apportion() and never depend on the seed. A
    single-image class lands in train (largest remainder wins there).
    """
    by_class: dict[str, list[str]] = {}
    for rec in manifest.records:
        by_class.setdefault(rec.diagnosis, []).append(rec.image_id)
    class_sizes = sorted((label, len(ids)) for label, ids in by_class.items())
    counts = apportion(class_sizes, ratios)
    assignment: dict[str, str] = {}
    for label, ids in sorted(by_class.items()):
        n_train, n_valid, _ = counts[label]
        if len(ids) == 1:
            logger.info("class %r has a single image; assigned to train", label)
        ids = sorted(ids)
        random.Random(f"{seed}:{label}").shuffle(ids)
        for i, image_id in enumerate(ids):
            if i < n_train:
                assignment[image_id] = "train"
            elif i < n_train + n_valid:
                assignment[image_id] = "valid"
            else:
                assignment[image_id] = "test"
    from dataclasses import replace

    records = [replace(r, partition=assignment[r.image_id]) for r in manifest.records]
    return DatasetManifest(
        name=manifest.name, records=records, label_space=set(manifest.label_space)
    )


def build_extended(
    sources: dict[str, DatasetManifest],
    exclusions: list[str] | None = None,
    name: str = "extended",
) -> DatasetManifest:
    """Assemble a release from per-partition source manifests.

    Source ids must be pairwise disjoint. Exclusions are dropped from
    whichever source carries them; an exclusion id found nowhere is a
    warning, not an error, so a shared exclusion list can be reused
    across releases.
    """
    unknown = set(sources) - set(SPLIT_ORDER)
    if unknown:
        raise ConfigError(f"unknown source partitions: {sorted(unknown)}")
    exclusions = list(exclusions or [])
    seen: dict[str, str] = {}
    for partition in SPLIT_ORDER:
        if partition not in sources:
            continue
        for rec in sources[partition].records:
            if rec.image_id in seen:
                raise IntegrityError(
                    f"image_id {rec.image_id!r} appears in both "
                    f"{seen[rec.image_id]!r} and {partition!r}"
                )
            seen[rec.image_id] = partition

    to_drop = set()
    for image_id in exclusions:
        if image_id in seen:
            to_drop.add(image_id)
        else:
            logger.warning("exclusion id %r not present in any source", image_id)

    from dataclasses import replace

    records = []
    label_space: set[str] = set()
    for partition in SPLIT_ORDER:
        if partition not in sources:
            continue
        label_space |= sources[partition].label_space
        for rec in sources[partition].records:
            if rec.image_id in to_drop:
                continue
            records.append(replace(rec, partition=partition))
    return DatasetManifest(name=name, records=records, label_space=label_space)


IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png")


def resize_export(
    src_dir,
    dst_dir,
    size: tuple[int, int],
    manifest: DatasetManifest | None = None,
) -> int:
    """Resize images under src_dir into dst_dir at the target size.

    Resampling is a single direct bicubic pass from the source
    resolution; routing through any intermediate resolution would bake
    interpolation artifacts into the output. A file already at the target
    size is copied byte for byte. Returns the number of files written.
    """
    if size[0] < 1 or size[1] < 1:
        raise ConfigError(f"target size must be positive, got {size}")
    src_dir = Path(src_dir)
    dst_dir = Path(dst_dir)
    if manifest is not None:
        rel_paths = [Path(rec.file_path) for rec in manifest.records]
    else:
        rel_paths = sorted(
            p.relative_to(src_dir)
            for p in src_dir.rglob("*")
            if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file()
        )
    written = 0
    for rel in rel_paths:
        src = src_dir / rel
        if not src.is_file():
            raise IntegrityError(f"missing image file {src}")
        dst = dst_dir / rel
        dst.parent.mkdir(parents=True, exist_ok=True)
        with Image.open(src) as img:
            if img.size == tuple(size):
                img.close()
                shutil.copyfile(src, dst)
            else:
                img.resize(tuple(size), BICUBIC).save(dst)
        written += 1
    return written
