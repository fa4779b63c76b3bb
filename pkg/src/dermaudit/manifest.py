"""Dataset manifest model and tabular I/O.

A manifest is the single source of truth about a labeled image dataset:
one record per image carrying its stable id, file location, optional
acquisition group (images of the same physical subject share a group),
diagnosis label, Fitzpatrick skin type (0 means unknown), partition
assignment, optional pixel dimensions, and optional content checksum.

The on-disk form ("tabular-v1") is a plain CSV with a fixed header so it
stays diffable and loadable by any table tool.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field, replace

from .errors import ConfigError, IntegrityError, ManifestError

PARTITIONS = ("train", "valid", "test", "unassigned")

HEADER = [
    "image_id",
    "file_path",
    "group_id",
    "diagnosis",
    "fst",
    "partition",
    "width",
    "height",
    "checksum",
]

_CHECKSUM_RE = re.compile(r"^[0-9a-f]{32}$")


@dataclass(frozen=True)
class ImageRecord:
    """One image's metadata row.

    width/height must be both present or both absent; fst is an int in
    0..6 where 0 stands for "unknown"; checksum, when present, is a
    32-char lowercase hex digest of the file content.
    """

    image_id: str
    file_path: str
    diagnosis: str
    group_id: str | None = None
    fst: int = 0
    partition: str = "unassigned"
    width: int | None = None
    height: int | None = None
    checksum: str | None = None

    def __post_init__(self):
        if not self.image_id:
            raise ManifestError("image_id must be non-empty")
        if not self.diagnosis:
            raise ManifestError(f"{self.image_id}: diagnosis must be non-empty")
        if not isinstance(self.fst, int) or not 0 <= self.fst <= 6:
            raise IntegrityError(f"{self.image_id}: fst {self.fst!r} outside 0..6")
        if self.partition not in PARTITIONS:
            raise ManifestError(
                f"{self.image_id}: partition {self.partition!r} not one of {PARTITIONS}"
            )
        if (self.width is None) != (self.height is None):
            raise ManifestError(
                f"{self.image_id}: width and height must be both present or both absent"
            )
        if self.width is not None and (self.width < 1 or self.height < 1):
            raise ManifestError(f"{self.image_id}: dimensions must be positive")
        if self.checksum is not None and not _CHECKSUM_RE.match(self.checksum):
            raise ManifestError(
                f"{self.image_id}: checksum must be 32 lowercase hex chars"
            )

    @property
    def group_key(self) -> str:
        """Group identity; images without a group form their own singleton."""
        return self.group_id if self.group_id else self.image_id


@dataclass
class DatasetManifest:
    """An ordered, validated collection of ImageRecords.

    Records are kept sorted by image_id; ids are unique; every record's
    diagnosis belongs to label_space (derived from the records unless a
    wider space is declared explicitly).
    """

    name: str
    records: list[ImageRecord]
    label_space: set[str] = field(default_factory=set)

    def __post_init__(self):
        self.records = sorted(self.records, key=lambda r: r.image_id)
        seen = set()
        for rec in self.records:
            if rec.image_id in seen:
                raise IntegrityError(f"duplicate image_id {rec.image_id!r}")
            seen.add(rec.image_id)
        derived = {r.diagnosis for r in self.records}
        if not self.label_space:
            self.label_space = derived
        elif not derived <= self.label_space:
            extra = sorted(derived - self.label_space)
            raise IntegrityError(f"diagnoses outside declared label_space: {extra}")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def get(self, image_id: str) -> ImageRecord:
        rec = self._index().get(image_id)
        if rec is None:
            raise IntegrityError(f"unknown image_id {image_id!r}")
        return rec

    def __contains__(self, image_id: str) -> bool:
        return image_id in self._index()

    def _index(self) -> dict[str, ImageRecord]:
        # Rebuilt lazily; records list is treated as immutable after init.
        idx = getattr(self, "_idx", None)
        if idx is None or len(idx) != len(self.records):
            idx = {r.image_id: r for r in self.records}
            object.__setattr__(self, "_idx", idx)
        return idx

    def groups(self) -> dict[str, list[ImageRecord]]:
        """Records bucketed by group identity, singletons included."""
        out: dict[str, list[ImageRecord]] = {}
        for rec in self.records:
            out.setdefault(rec.group_key, []).append(rec)
        return out

    def partition_counts(self) -> dict[str, int]:
        counts = {p: 0 for p in PARTITIONS}
        for rec in self.records:
            counts[rec.partition] += 1
        return counts

    def diagnosis_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for rec in self.records:
            counts[rec.diagnosis] = counts.get(rec.diagnosis, 0) + 1
        return counts


def _parse_row(row: list[str], rownum: int) -> ImageRecord:
    if len(row) != len(HEADER):
        raise ManifestError(
            f"expected {len(HEADER)} columns, got {len(row)}", row=rownum
        )
    image_id, file_path, group_id, diagnosis, fst, partition, width, height, checksum = (
        cell.strip() for cell in row
    )
    try:
        fst_val = int(fst) if fst else 0
    except ValueError:
        raise ManifestError(f"fst {fst!r} is not an integer", row=rownum) from None

    def opt_int(cell: str, label: str) -> int | None:
        if not cell:
            return None
        try:
            return int(cell)
        except ValueError:
            raise ManifestError(
                f"{label} {cell!r} is not an integer", row=rownum
            ) from None

    try:
        return ImageRecord(
            image_id=image_id,
            file_path=file_path,
            group_id=group_id or None,
            diagnosis=diagnosis,
            fst=fst_val,
            partition=partition or "unassigned",
            width=opt_int(width, "width"),
            height=opt_int(height, "height"),
            checksum=checksum or None,
        )
    except ManifestError as exc:
        raise ManifestError(str(exc), row=rownum) from None


def load_manifest(path, name: str | None = None) -> DatasetManifest:
    """Read a tabular-v1 manifest CSV.

    Raises ManifestError (with the 1-based row number) for malformed rows
    and IntegrityError for duplicate ids or out-of-range FST values.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestError("empty file, expected tabular-v1 header") from None
        if header != HEADER:
            raise ManifestError(
                f"bad header {header!r}, expected {','.join(HEADER)}", row=1
            )
        records = []
        for rownum, row in enumerate(reader, start=2):
            if not row:
                continue
            records.append(_parse_row(row, rownum))
    return DatasetManifest(name=name or str(path), records=records)


def save_manifest(manifest: DatasetManifest, path) -> None:
    """Write tabular-v1 CSV; load_manifest(save_manifest(m)) == m records."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(HEADER)
        for rec in manifest.records:
            writer.writerow(
                [
                    rec.image_id,
                    rec.file_path,
                    rec.group_id or "",
                    rec.diagnosis,
                    rec.fst,
                    rec.partition,
                    rec.width if rec.width is not None else "",
                    rec.height if rec.height is not None else "",
                    rec.checksum or "",
                ]
            )


def group_histogram(manifest: DatasetManifest) -> dict[int, int]:
    """Map group size -> number of groups of that size.

    Images without a group_id count as singleton groups, so the weighted
    sum over the histogram always equals len(manifest).
    """
    hist: dict[int, int] = {}
    for members in manifest.groups().values():
        size = len(members)
        hist[size] = hist.get(size, 0) + 1
    return hist


def apply_split_lists(
    manifest: DatasetManifest, splits: dict[str, list[str]]
) -> DatasetManifest:
    """Return a new manifest with partitions set from explicit id lists.

    Ids absent from every list become "unassigned". An id appearing in two
    lists or an id not present in the manifest is an IntegrityError.
    """
    assignment: dict[str, str] = {}
    for partition, ids in splits.items():
        if partition not in ("train", "valid", "test"):
            raise ConfigError(f"unknown split partition {partition!r}")
        for image_id in ids:
            if image_id in assignment:
                raise IntegrityError(
                    f"image_id {image_id!r} listed in both "
                    f"{assignment[image_id]!r} and {partition!r}"
                )
            if image_id not in manifest:
                raise IntegrityError(f"split list names unknown image_id {image_id!r}")
            assignment[image_id] = partition
    records = [
        replace(rec, partition=assignment.get(rec.image_id, "unassigned"))
        for rec in manifest.records
    ]
    return DatasetManifest(
        name=manifest.name, records=records, label_space=set(manifest.label_space)
    )


def interpretable_name(
    record: ImageRecord, abbreviations: dict[str, str], index: int
) -> str:
    """Build a human-readable filename for an image.

    Shape: <diagnosis abbreviation>_f<fst>_<index>_<first 8 checksum hex>.jpg
    so the label, skin type, and a content fingerprint are visible at a
    glance in any file listing.
    """
    abbrev = abbreviations.get(record.diagnosis)
    if not abbrev:
        raise ConfigError(f"no abbreviation configured for {record.diagnosis!r}")
    if record.checksum is None:
        raise IntegrityError(f"{record.image_id}: checksum required for renaming")
    if index < 0:
        raise ConfigError(f"index must be non-negative, got {index}")
    return f"{abbrev}_f{record.fst}_{index}_{record.checksum[:8]}.jpg"
