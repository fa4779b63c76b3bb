"""Audit report assembly and rendering.

The report is a plain dict built from whatever audit products exist, so
partial audits (metadata only, no embeddings) still render. Serialization
is deterministic: the same inputs produce byte-identical report.json and
report.html. The HTML is one static self-contained page - no scripts, no
external assets - because audit evidence should be viewable anywhere,
forever. Counts shown in the report are recomputable from the tabular
side files written next to it.
"""

from __future__ import annotations

import html
import json
import csv
from pathlib import Path

from .cleaner import RemovalLedger
from .duplicates import DuplicateCluster, IntervalCounts, PairConfusion
from .embeddings import SimilarityPair
from .labels import ConflictSets, conflict_matrix
from .leakage import MoveRecord, OverlapReport
from .manifest import DatasetManifest, group_histogram


def audit_report(
    manifest: DatasetManifest,
    overlap: OverlapReport | None = None,
    confusion: PairConfusion | None = None,
    conflicts: dict[float, ConflictSets] | None = None,
    clusters: list[DuplicateCluster] | None = None,
    outliers: list[tuple[str, float]] | None = None,
    intervals: list[IntervalCounts] | None = None,
    pair_counts: dict[float, int] | None = None,
) -> dict:
    """Assemble the audit findings into one JSON-ready dict."""
    hist = group_histogram(manifest)
    report: dict = {
        "dataset": {
            "name": manifest.name,
            "images": len(manifest),
            "labels": sorted(manifest.label_space),
            "groups": sum(hist.values()),
        },
        "partitions": manifest.partition_counts(),
        "diagnoses": manifest.diagnosis_counts(),
        "group_histogram": {str(k): v for k, v in sorted(hist.items())},
    }
    if overlap is not None:
        report["overlap"] = overlap.counts()
    if pair_counts is not None:
        report["pair_counts"] = {f"{t:.2f}": c for t, c in sorted(pair_counts.items())}
    if confusion is not None:
        report["pair_confusion"] = confusion.counts()
    if conflicts is not None:
        report["conflicts"] = conflict_matrix(conflicts)
    if clusters is not None:
        sizes = sorted(len(c) for c in clusters)
        report["clusters"] = {
            "count": len(clusters),
            "mean_size": sum(sizes) / len(sizes) if sizes else 0.0,
            "size_histogram": {
                str(s): sizes.count(s) for s in sorted(set(sizes))
            },
        }
    if outliers is not None:
        report["outliers"] = {
            "scored": len(outliers),
            "lowest": [[image_id, score] for image_id, score in outliers[:20]],
        }
    if intervals is not None:
        report["intervals"] = [
            {
                "start": iv.start,
                "stop": iv.stop,
                "already_in_metadata": iv.already_in_metadata,
                "missed_duplicate": iv.missed_duplicate,
                "true_non_duplicate": iv.true_non_duplicate,
            }
            for iv in intervals
        ]
    return report


_CSS = """
body { font-family: sans-serif; margin: 2em auto; max-width: 60em; color: #222; }
h1 { border-bottom: 2px solid #444; padding-bottom: 0.2em; }
h2 { margin-top: 1.5em; color: #333; }
table { border-collapse: collapse; margin: 0.5em 0; }
th, td { border: 1px solid #bbb; padding: 0.25em 0.7em; text-align: left; }
th { background: #eee; }
td.num { text-align: right; font-variant-numeric: tabular-nums; }
"""


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _render_value(value, rows: list[str]) -> None:
    if isinstance(value, dict) and value and all(
        not isinstance(v, (dict, list)) for v in value.values()
    ):
        rows.append("<table><tr><th>key</th><th>value</th></tr>")
        for k in value:
            rows.append(
                f"<tr><td>{html.escape(str(k))}</td>"
                f"<td class=\"num\">{html.escape(_fmt(value[k]))}</td></tr>"
            )
        rows.append("</table>")
    elif isinstance(value, dict):
        # Nested dict of dicts: render as a matrix when shapes agree.
        inner_keys: list = []
        for v in value.values():
            if isinstance(v, dict):
                for k in v:
                    if k not in inner_keys:
                        inner_keys.append(k)
        header = "".join(f"<th>{html.escape(str(k))}</th>" for k in inner_keys)
        rows.append(f"<table><tr><th></th>{header}</tr>")
        for k, v in value.items():
            cells = "".join(
                f"<td class=\"num\">{html.escape(_fmt(v.get(ik, '')))}</td>"
                if isinstance(v, dict)
                else ""
                for ik in inner_keys
            )
            rows.append(f"<tr><td>{html.escape(str(k))}</td>{cells}</tr>")
        rows.append("</table>")
    elif isinstance(value, list) and value and isinstance(value[0], dict):
        keys = list(value[0].keys())
        header = "".join(f"<th>{html.escape(str(k))}</th>" for k in keys)
        rows.append(f"<table><tr>{header}</tr>")
        for item in value:
            cells = "".join(
                f"<td class=\"num\">{html.escape(_fmt(item.get(k, '')))}</td>"
                for k in keys
            )
            rows.append(f"<tr>{cells}</tr>")
        rows.append("</table>")
    elif isinstance(value, list):
        rows.append("<table>")
        for item in value:
            if isinstance(item, list):
                cells = "".join(
                    f"<td class=\"num\">{html.escape(_fmt(c))}</td>" for c in item
                )
                rows.append(f"<tr>{cells}</tr>")
            else:
                rows.append(f"<tr><td>{html.escape(_fmt(item))}</td></tr>")
        rows.append("</table>")
    else:
        rows.append(f"<p>{html.escape(_fmt(value))}</p>")


def render_html(report: dict) -> str:
    """One static page; same report dict -> byte-identical HTML."""
    name = report.get("dataset", {}).get("name", "dataset")
    rows = [
        "<!DOCTYPE html>",
        "<html>",
        "<head>",
        '<meta charset="utf-8">',
        f"<title>audit: {html.escape(str(name))}</title>",
        f"<style>{_CSS}</style>",
        "</head>",
        "<body>",
        f"<h1>Dataset audit: {html.escape(str(name))}</h1>",
    ]
    for section in report:
        rows.append(f"<h2>{html.escape(section.replace('_', ' '))}</h2>")
        _render_value(report[section], rows)
    rows.append("</body>")
    rows.append("</html>")
    return "\n".join(rows) + "\n"


def write_report(report: dict, out_dir) -> tuple[Path, Path]:
    """Write report.json and report.html; returns both paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / "report.json"
    html_path = out_dir / "report.html"
    json_path.write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    html_path.write_text(render_html(report), encoding="utf-8")
    return json_path, html_path


# Tabular side files. Every aggregate in the report can be recomputed
# from these; floats are written with repr so they round-trip exactly.


def write_pairs_csv(pairs: list[SimilarityPair], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["a", "b", "score"])
        for pair in pairs:
            writer.writerow([pair.a, pair.b, repr(pair.score)])


def read_pairs_csv(path) -> list[SimilarityPair]:
    from .embeddings import make_pair
    from .errors import ManifestError

    pairs = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["a", "b", "score"]:
            raise ManifestError(f"bad pairs header {header!r}")
        for rownum, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ManifestError("expected 3 cells", row=rownum)
            try:
                pairs.append(make_pair(row[0], row[1], float(row[2])))
            except ValueError:
                raise ManifestError(f"bad score {row[2]!r}", row=rownum) from None
    return pairs


def write_clusters_csv(clusters: list[DuplicateCluster], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "cluster",
                "image_id",
                "mean_similarity",
                "homogeneous_diagnosis",
                "homogeneous_fst",
            ]
        )
        for idx, cluster in enumerate(clusters):
            for member in cluster.members:
                writer.writerow(
                    [
                        idx,
                        member,
                        repr(cluster.mean_similarity),
                        "" if cluster.homogeneous_diagnosis is None else cluster.homogeneous_diagnosis,
                        "" if cluster.homogeneous_fst is None else cluster.homogeneous_fst,
                    ]
                )


def write_outliers_csv(scored: list[tuple[str, float]], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "image_id", "score"])
        for rank, (image_id, score) in enumerate(scored, start=1):
            writer.writerow([rank, image_id, repr(score)])


def write_overlap_csv(overlap: OverlapReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["combination", "group_count", "image_count"])
        for combo, entry in overlap.entries.items():
            writer.writerow(["+".join(combo), entry.group_count, entry.image_count])


def write_moves_csv(moves: list[MoveRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "from_partition", "to_partition", "reason"])
        for move in moves:
            writer.writerow(
                [move.image_id, move.from_partition, move.to_partition, move.reason]
            )


def write_conflict_counts_csv(conflicts: dict[float, ConflictSets], path) -> None:
    matrix = conflict_matrix(conflicts)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "set", "count"])
        for threshold, counts in matrix.items():
            for set_name, count in counts.items():
                writer.writerow([threshold, set_name, count])


def write_split_lists(manifest: DatasetManifest, out_dir) -> None:
    """One id-per-line text file per partition (train.txt, ...)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for partition in ("train", "valid", "test"):
        ids = [r.image_id for r in manifest.records if r.partition == partition]
        (out_dir / f"{partition}.txt").write_text(
            "".join(f"{i}\n" for i in ids), encoding="utf-8"
        )


def write_removals_csv(ledger: RemovalLedger, path) -> None:
    ledger.save(path)
