"""Embedding storage, similarity math, and exact neighbor search.

Vectors are stored float32 (that is what embedding exporters emit); every
similarity is accumulated in float64 so scores are reproducible to 1e-6
across platforms and block sizes. All pair/neighbor routines are exact
brute force: the datasets this toolkit audits (tens of thousands of rows)
do not justify approximate indexes, and exactness is what makes the
audit numbers defensible.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import EmbeddingFormatError, IntegrityError

MAGIC = b"EMB1"

# Pillow renamed the resampling enum in 9.1; support both spellings.
BICUBIC = Image.Resampling.BICUBIC if hasattr(Image, "Resampling") else Image.BICUBIC
NEAREST = Image.Resampling.NEAREST if hasattr(Image, "Resampling") else Image.NEAREST


@dataclass(frozen=True)
class SimilarityPair:
    """An unordered image pair with its cosine score; a < b always."""

    a: str
    b: str
    score: float

    def __post_init__(self):
        if self.a >= self.b:
            raise IntegrityError(f"pair ids must satisfy a < b, got {self.a!r}, {self.b!r}")

    @property
    def key(self) -> tuple[str, str]:
        return (self.a, self.b)


def make_pair(id1: str, id2: str, score: float) -> SimilarityPair:
    """Canonicalize id order so (x, y) and (y, x) are the same pair."""
    if id1 == id2:
        raise IntegrityError(f"pair of an image with itself: {id1!r}")
    a, b = (id1, id2) if id1 < id2 else (id2, id1)
    return SimilarityPair(a=a, b=b, score=float(score))


class EmbeddingMatrix:
    """Id-addressed float32 matrix, one row per image."""

    def __init__(self, ids: list[str], values: np.ndarray):
        values = np.asarray(values, dtype=np.float32)
        if values.ndim != 2:
            raise EmbeddingFormatError(f"values must be 2-D, got shape {values.shape}")
        if len(ids) != values.shape[0]:
            raise EmbeddingFormatError(
                f"{len(ids)} ids but {values.shape[0]} rows"
            )
        if values.shape[1] < 1:
            raise EmbeddingFormatError("embedding dimension must be >= 1")
        if not np.isfinite(values).all():
            bad = int(np.argwhere(~np.isfinite(values).all(axis=1))[0][0])
            raise EmbeddingFormatError(f"non-finite value in row {bad} ({ids[bad]!r})")
        norms = np.linalg.norm(values.astype(np.float64), axis=1)
        if (norms == 0.0).any():
            bad = int(np.argmax(norms == 0.0))
            raise EmbeddingFormatError(f"all-zero row {bad} ({ids[bad]!r})")
        index: dict[str, int] = {}
        for i, image_id in enumerate(ids):
            if image_id in index:
                raise IntegrityError(f"duplicate embedding id {image_id!r}")
            index[image_id] = i
        self.ids = list(ids)
        self.values = values
        self._index = index
        self._unit: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return self.values.shape[0]

    def __contains__(self, image_id: str) -> bool:
        return image_id in self._index

    def row_index(self, image_id: str) -> int:
        try:
            return self._index[image_id]
        except KeyError:
            raise IntegrityError(f"unknown embedding id {image_id!r}") from None

    def vector(self, image_id: str) -> np.ndarray:
        return self.values[self.row_index(image_id)]

    def subset(self, ids: list[str]) -> "EmbeddingMatrix":
        rows = [self.row_index(i) for i in ids]
        return EmbeddingMatrix(list(ids), self.values[rows])

    def unit_rows(self) -> np.ndarray:
        """Float64 row-normalized view used by all similarity scans.

        Computed once and cached; rows are treated as immutable after
        construction, so the cache never goes stale.
        """
        if self._unit is None:
            x = self.values.astype(np.float64)
            self._unit = x / np.linalg.norm(x, axis=1, keepdims=True)
        return self._unit


def load_embeddings(path, fmt: str = "auto") -> EmbeddingMatrix:
    """Read embeddings from emb-bin-v1 or the tabular CSV form.

    fmt "auto" sniffs the 4-byte magic; "binary" and "tabular" force a
    parser. Format violations raise EmbeddingFormatError naming the spot.
    """
    if fmt not in ("auto", "binary", "tabular"):
        raise EmbeddingFormatError(f"unknown format {fmt!r}")
    if fmt == "auto":
        with open(path, "rb") as fh:
            fmt = "binary" if fh.read(4) == MAGIC else "tabular"
    if fmt == "binary":
        return _load_binary(path)
    return _load_tabular(path)


def _load_binary(path) -> EmbeddingMatrix:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise EmbeddingFormatError(f"bad magic {blob[:4]!r}, expected {MAGIC!r}")
    if len(blob) < 12:
        raise EmbeddingFormatError("truncated header")
    n, dim = struct.unpack_from("<II", blob, 4)
    if dim < 1:
        raise EmbeddingFormatError("dimension must be >= 1")
    offset = 12
    ids = []
    for i in range(n):
        end = blob.find(b"\x00", offset)
        if end < 0:
            raise EmbeddingFormatError(f"id {i} not null-terminated")
        try:
            ids.append(blob[offset:end].decode("utf-8"))
        except UnicodeDecodeError:
            raise EmbeddingFormatError(f"id {i} is not valid UTF-8") from None
        offset = end + 1
    expected = n * dim * 4
    payload = blob[offset:]
    if len(payload) != expected:
        raise EmbeddingFormatError(
            f"value section is {len(payload)} bytes, expected {expected}"
        )
    values = np.frombuffer(payload, dtype="<f4").reshape(n, dim)
    if not np.isfinite(values).all():
        bad = int(np.argwhere(~np.isfinite(values).all(axis=1))[0][0])
        raise EmbeddingFormatError(f"non-finite value in row {bad}")
    return EmbeddingMatrix(ids, values.copy())


def _load_tabular(path) -> EmbeddingMatrix:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmbeddingFormatError("empty file") from None
        if len(header) < 2 or header[0] != "image_id":
            raise EmbeddingFormatError("header must be image_id,v0,...,v{dim-1}")
        dim = len(header) - 1
        if header[1:] != [f"v{i}" for i in range(dim)]:
            raise EmbeddingFormatError("header must be image_id,v0,...,v{dim-1}")
        ids = []
        rows = []
        for rownum, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim + 1:
                raise EmbeddingFormatError(
                    f"row {rownum}: expected {dim + 1} cells, got {len(row)}"
                )
            ids.append(row[0])
            try:
                rows.append([float(c) for c in row[1:]])
            except ValueError:
                raise EmbeddingFormatError(
                    f"row {rownum}: non-numeric value"
                ) from None
    if not ids:
        raise EmbeddingFormatError("no embedding rows")
    values = np.asarray(rows, dtype=np.float32)
    if not np.isfinite(values).all():
        bad = int(np.argwhere(~np.isfinite(values).all(axis=1))[0][0])
        raise EmbeddingFormatError(f"row {bad + 2}: non-finite value")
    return EmbeddingMatrix(ids, values)


def save_embeddings(emb: EmbeddingMatrix, path, fmt: str = "binary") -> None:
    """Write emb-bin-v1 (default) or the tabular CSV form."""
    if fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<II", len(emb), emb.dim))
            for image_id in emb.ids:
                fh.write(image_id.encode("utf-8") + b"\x00")
            fh.write(np.ascontiguousarray(emb.values, dtype="<f4").tobytes())
    elif fmt == "tabular":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["image_id"] + [f"v{i}" for i in range(emb.dim)])
            for image_id, row in zip(emb.ids, emb.values):
                writer.writerow([image_id] + [repr(float(v)) for v in row])
    else:
        raise EmbeddingFormatError(f"unknown format {fmt!r}")


def cosine(u, v) -> float:
    """Cosine similarity with float64 accumulation.

    Symmetric by construction; a zero vector has no direction and raises
    ValueError.
    """
    a = np.asarray(u, dtype=np.float64).ravel()
    b = np.asarray(v, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine undefined for zero vector")
    return float(np.dot(a, b) / (na * nb))


def scan_pairs(
    emb: EmbeddingMatrix, threshold: float, block_size: int = 2048
) -> list[SimilarityPair]:
    """All unordered pairs with cosine >= threshold.

    Blocked matrix products keep memory flat; block size never changes
    which pairs are found, only how they are batched. Result is sorted by
    descending score, then (a, b).
    """
    if not -1.0 <= threshold <= 1.0:
        raise ValueError(f"threshold {threshold} outside [-1, 1]")
    unit = emb.unit_rows()
    n = len(emb)
    found: list[SimilarityPair] = []
    for i0 in range(0, n, block_size):
        i1 = min(i0 + block_size, n)
        left = unit[i0:i1]
        for j0 in range(i0, n, block_size):
            j1 = min(j0 + block_size, n)
            scores = left @ unit[j0:j1].T
            mask = scores >= threshold
            if i0 == j0:
                # Keep strictly-upper entries of the diagonal block.
                mask &= np.triu(np.ones(scores.shape, dtype=bool), k=1)
            for r, c in np.argwhere(mask):
                found.append(
                    make_pair(emb.ids[i0 + r], emb.ids[j0 + c], scores[r, c])
                )
    found.sort(key=lambda p: (-p.score, p.a, p.b))
    return found


def knn(
    emb: EmbeddingMatrix, k: int, block_size: int = 2048
) -> dict[str, list[tuple[str, float]]]:
    """Exact k nearest neighbors by cosine for every image.

    Ties on score are broken by ascending neighbor image_id so the result
    is fully deterministic. k must lie in 1..n-1.
    """
    n = len(emb)
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must be in 1..{n - 1}, got {k}")
    unit = emb.unit_rows()
    ids = emb.ids
    result: dict[str, list[tuple[str, float]]] = {}
    for i0 in range(0, n, block_size):
        i1 = min(i0 + block_size, n)
        scores = unit[i0:i1] @ unit.T
        for r in range(i1 - i0):
            row = scores[r].copy()
            row[i0 + r] = -np.inf  # never own neighbor
            kth = np.partition(row, n - k)[n - k]
            above = np.nonzero(row > kth)[0]
            at = np.nonzero(row == kth)[0]
            chosen = sorted(
                ((float(row[j]), ids[j]) for j in above), key=lambda t: (-t[0], t[1])
            )
            fill = sorted(ids[j] for j in at)[: k - len(chosen)]
            neighbors = [(name, score) for score, name in chosen]
            neighbors += [(name, float(kth)) for name in fill]
            result[ids[i0 + r]] = neighbors
    return result


def baseline_features(image_path) -> np.ndarray:
    """Tiny deterministic content descriptor for images (192 floats).

    Each RGB channel is downscaled to 8x8 with the bicubic kernel, then
    mean-centered per channel so global brightness drops out; channels are
    concatenated R, G, B. Meant as a stand-in where no learned embedding
    is available: near-identical pixels give near-identical vectors.
    """
    with Image.open(image_path) as img:
        small = img.convert("RGB").resize((8, 8), BICUBIC)
    arr = np.asarray(small, dtype=np.float64)
    channels = []
    for c in range(3):
        ch = arr[:, :, c].ravel()
        channels.append(ch - ch.mean())
    return np.concatenate(channels)
