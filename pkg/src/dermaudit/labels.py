"""Label-conflict quantification over near-duplicate pairs.

When two images are near-duplicates but carry different labels, at least
one label is wrong. Conflicts are measured separately for the diagnosis
and for the Fitzpatrick skin type; FST 0 means unknown and a pair with an
unknown side is excluded from FST conflicts rather than counted.
"""

from __future__ import annotations

from dataclasses import dataclass

from .embeddings import SimilarityPair
from .manifest import DatasetManifest


@dataclass
class ConflictSets:
    """Conflicting pairs for one similarity threshold's pair list.

    diagnosis: pairs whose diagnosis labels differ.
    fst_geq1:  pairs whose known FSTs differ by at least one grade.
    fst_gt1:   pairs whose known FSTs differ by more than one grade
               (a one-grade gap is within honest annotator disagreement;
               a larger gap is not). Always a subset of fst_geq1.
    """

    diagnosis: list[SimilarityPair]
    fst_geq1: list[SimilarityPair]
    fst_gt1: list[SimilarityPair]

    def _keys(self, pairs: list[SimilarityPair]) -> set[tuple[str, str]]:
        return {p.key for p in pairs}

    def counts(self) -> dict[str, int]:
        d = self._keys(self.diagnosis)
        f1 = self._keys(self.fst_geq1)
        fg = self._keys(self.fst_gt1)
        return {
            "diagnosis": len(d),
            "fst_geq1": len(f1),
            "fst_gt1": len(fg),
            "diagnosis_or_fst_geq1": len(d | f1),
            "diagnosis_or_fst_gt1": len(d | fg),
            "diagnosis_and_fst_geq1": len(d & f1),
            "diagnosis_and_fst_gt1": len(d & fg),
        }


def conflict_sets(
    pairs: list[SimilarityPair], manifest: DatasetManifest
) -> ConflictSets:
    """Partition a pair list by the kind of label disagreement.

    Set identities hold by construction, e.g. |D or F| = |D| + |F| - |D and F|
    for any threshold's pair list, because these are plain sets over the
    same pairs.
    """
    diagnosis = []
    fst_geq1 = []
    fst_gt1 = []
    for pair in pairs:
        ra, rb = manifest.get(pair.a), manifest.get(pair.b)
        if ra.diagnosis != rb.diagnosis:
            diagnosis.append(pair)
        if ra.fst != 0 and rb.fst != 0:
            gap = abs(ra.fst - rb.fst)
            if gap >= 1:
                fst_geq1.append(pair)
            if gap > 1:
                fst_gt1.append(pair)
    return ConflictSets(diagnosis=diagnosis, fst_geq1=fst_geq1, fst_gt1=fst_gt1)


def conflict_matrix(
    sets_by_threshold: dict[float, ConflictSets]
) -> dict[str, dict[str, int]]:
    """Counts table keyed by threshold, for reports and the CLI."""
    return {
        f"{threshold:.2f}": sets_.counts()
        for threshold, sets_ in sorted(sets_by_threshold.items())
    }
