"""Command-line entry point: the audit pipeline as subcommands.

Every subcommand reads its inputs from flags, writes all outputs under
one --out directory, and never mutates an input file. Exit codes: 0 on
success, 1 on a validation problem (bad flags, missing input file,
inconsistent data), 2 on an I/O failure or a corrupt binary payload.
The DERMAUDIT_LOG environment variable (error, warn, info, debug)
controls log verbosity.

Tabular side files written by the subcommands:

  pairs.csv      a,b,score                      one similar pair per row
  clusters.csv   cluster,image_id,mean_similarity,homogeneous_diagnosis,
                 homogeneous_fst                one member per row
  outliers.csv   rank,image_id,score            ascending neighborhood score
  overlap.csv    combination,group_count,image_count
  moves.csv      image_id,from_partition,to_partition,reason
  conflicts.csv  threshold,set,count
  removals.csv   image_id,stage,reason
  manifest.csv   the standard manifest header (repair/clean/split/extend)
  train.txt, valid.txt, test.txt                one image_id per line

The optional TOML config mirrors CleaningConfig plus the duplicate
evidence used by `clean`:

  [cleaning]
  near_exact_threshold = 0.99
  remove_unknown_fst = false
  outlier_ids = ["..."]          # or: outlier_score_cutoff = 0.15

  [split]
  ratios = [0.70, 0.10, 0.20]
  seed = 0

  [duplicates]                   # read by `clean` only
  threshold = 0.90               # cluster detection
  min_cluster_size = 3
  review_threshold = 0.95        # queue that was sent to review
  verdict_log = "verdicts.tsv"   # confirmed pairs come from here
  primary_annotator = "r1"

Flags override config values where both apply (--seed over [split] seed).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # 3.10
    import tomli as tomllib

from . import reporting
from .cleaner import (
    CleaningConfig,
    build_extended,
    clean,
    resize_export,
    stratified_split,
)
from .duplicates import coalesce, detect_clusters, interval_analysis
from .embeddings import load_embeddings, scan_pairs
from .errors import AuditError, ConfigError, EmbeddingFormatError
from .labels import conflict_sets
from .leakage import detect_overlap, repair
from .manifest import (
    apply_split_lists,
    group_histogram,
    load_manifest,
    save_manifest,
)
from .outliers import outlier_scores
from .review import ReviewSession, VerdictLog, confirmed_duplicates, create_app

logger = logging.getLogger("dermaudit")

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _input_path(value: str, flag: str) -> Path:
    path = Path(value)
    if not path.is_file():
        raise ConfigError(f"{flag}: file not found: {path}")
    return path


def _input_dir(value: str, flag: str) -> Path:
    path = Path(value)
    if not path.is_dir():
        raise ConfigError(f"{flag}: directory not found: {path}")
    return path


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_manifest_arg(args):
    return load_manifest(_input_path(args.manifest, "--manifest"))


def _load_embeddings_arg(args):
    return load_embeddings(_input_path(args.embeddings, "--embeddings"))


def _read_split_dir(path: Path) -> dict[str, list[str]]:
    splits: dict[str, list[str]] = {}
    for partition in ("train", "valid", "test"):
        list_file = path / f"{partition}.txt"
        if list_file.is_file():
            ids = [
                line.strip()
                for line in list_file.read_text(encoding="utf-8").splitlines()
                if line.strip()
            ]
            splits[partition] = ids
    if not splits:
        raise ConfigError(
            f"--splits: no train.txt/valid.txt/test.txt under {path}"
        )
    return splits


def _manifest_with_splits(args):
    manifest = _load_manifest_arg(args)
    if args.splits:
        splits = _read_split_dir(_input_dir(args.splits, "--splits"))
        manifest = apply_split_lists(manifest, splits)
    return manifest


def _load_config(args) -> dict:
    if not getattr(args, "config", None):
        return {}
    path = _input_path(args.config, "--config")
    with open(path, "rb") as fh:
        try:
            return tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"--config: {exc}") from None


# ---------------------------------------------------------------------------
# subcommands


def _cmd_pairs(args) -> int:
    emb = _load_embeddings_arg(args)
    pairs = scan_pairs(emb, args.threshold)
    out = _out_dir(args)
    reporting.write_pairs_csv(pairs, out / "pairs.csv")
    print(f"{len(pairs)} pairs at similarity >= {args.threshold} -> {out / 'pairs.csv'}")
    return 0


def _cmd_clusters(args) -> int:
    emb = _load_embeddings_arg(args)
    manifest = _load_manifest_arg(args) if args.manifest else None
    clusters = detect_clusters(emb, args.threshold, manifest=manifest)
    out = _out_dir(args)
    reporting.write_clusters_csv(clusters, out / "clusters.csv")
    print(f"{len(clusters)} clusters at threshold {args.threshold} -> {out / 'clusters.csv'}")
    return 0


def _cmd_leakage(args) -> int:
    manifest = _manifest_with_splits(args)
    overlap = detect_overlap(manifest)
    out = _out_dir(args)
    reporting.write_overlap_csv(overlap, out / "overlap.csv")
    for combo, entry in overlap.entries.items():
        print(
            f"{'+'.join(combo)}: {entry.group_count} groups, "
            f"{entry.image_count} joined images"
        )
    return 0


def _cmd_repair(args) -> int:
    manifest = _manifest_with_splits(args)
    extra = (
        reporting.read_pairs_csv(_input_path(args.pairs, "--pairs"))
        if args.pairs
        else None
    )
    repaired, moves = repair(manifest, extra_pairs=extra)
    out = _out_dir(args)
    save_manifest(repaired, out / "manifest.csv")
    reporting.write_moves_csv(moves, out / "moves.csv")
    counts = repaired.partition_counts()
    print(
        f"{len(moves)} moves; partitions now "
        + "/".join(str(counts.get(p, 0)) for p in ("train", "valid", "test"))
    )
    return 0


def _cmd_conflicts(args) -> int:
    manifest = _load_manifest_arg(args)
    emb = _load_embeddings_arg(args)
    thresholds = sorted({args.threshold, 0.95}) if args.threshold else [0.90, 0.95]
    base = min(thresholds)
    pairs = scan_pairs(emb, base)
    matrix = {}
    for t in thresholds:
        subset = [p for p in pairs if p.score >= t]
        matrix[t] = conflict_sets(subset, manifest)
    out = _out_dir(args)
    reporting.write_conflict_counts_csv(matrix, out / "conflicts.csv")
    for t in thresholds:
        counts = matrix[t].counts()
        print(
            f"threshold {t:.2f}: diagnosis {counts['diagnosis']}, "
            f"fst {counts['fst_geq1']}, either {counts['diagnosis_or_fst_geq1']}"
        )
    return 0


def _cmd_outliers(args) -> int:
    emb = _load_embeddings_arg(args)
    scored = outlier_scores(emb, n_neighbors=5)
    if args.top_k:
        scored = scored[: args.top_k]
    out = _out_dir(args)
    reporting.write_outliers_csv(scored, out / "outliers.csv")
    print(f"{len(scored)} outlier scores -> {out / 'outliers.csv'}")
    return 0


def _cmd_clean(args) -> int:
    manifest = _load_manifest_arg(args)
    emb = _load_embeddings_arg(args)
    data = _load_config(args)
    config = CleaningConfig.from_dict(data)
    dup = data.get("duplicates", {})
    unknown = set(dup) - {
        "threshold",
        "min_cluster_size",
        "review_threshold",
        "verdict_log",
        "primary_annotator",
    }
    if unknown:
        raise ConfigError(f"unknown [duplicates] keys: {sorted(unknown)}")
    threshold = float(dup.get("threshold", 0.90))
    min_size = int(dup.get("min_cluster_size", 3))
    clusters = detect_clusters(emb, threshold, min_size=min_size)
    if "verdict_log" in dup:
        log_path = Path(dup["verdict_log"])
        if not log_path.is_absolute() and args.config:
            log_path = Path(args.config).parent / log_path
        log = VerdictLog(_input_path(str(log_path), "[duplicates] verdict_log"))
        confirmed = confirmed_duplicates(
            log, rule="primary", primary=dup.get("primary_annotator")
        )
        log.close()
        review_threshold = float(dup.get("review_threshold", 0.95))
        confirmed_pairs = [
            p for p in scan_pairs(emb, review_threshold) if p.key in confirmed
        ]
        clusters = coalesce(confirmed_pairs, clusters, emb)
    cleaned, ledger = clean(manifest, emb, clusters, config)
    out = _out_dir(args)
    save_manifest(cleaned, out / "manifest.csv")
    reporting.write_removals_csv(ledger, out / "removals.csv")
    stages = ledger.by_stage()
    print(
        f"removed {len(ledger)} ({stages}); "
        f"{len(cleaned)} images -> {out / 'manifest.csv'}"
    )
    return 0


def _cmd_split(args) -> int:
    manifest = _load_manifest_arg(args)
    data = _load_config(args)
    config = CleaningConfig.from_dict(data)
    seed = args.seed if args.seed is not None else config.seed
    result = stratified_split(manifest, ratios=config.split_ratios, seed=seed)
    out = _out_dir(args)
    save_manifest(result, out / "manifest.csv")
    reporting.write_split_lists(result, out)
    counts = result.partition_counts()
    print(
        "split "
        + "/".join(str(counts.get(p, 0)) for p in ("train", "valid", "test"))
        + f" (seed {seed})"
    )
    return 0


def _cmd_resize(args) -> int:
    try:
        width, height = (int(v) for v in args.size.lower().split("x"))
    except ValueError:
        raise ConfigError(f"--size must look like 224x224, got {args.size!r}") from None
    manifest = _load_manifest_arg(args) if args.manifest else None
    src = _input_dir(args.src, "--src")
    written = resize_export(src, Path(args.out), (width, height), manifest=manifest)
    print(f"{written} images resized to {width}x{height} -> {args.out}")
    return 0


def _cmd_extend(args) -> int:
    sources = {}
    for partition in ("train", "valid", "test"):
        value = getattr(args, partition)
        if value:
            sources[partition] = load_manifest(
                _input_path(value, f"--{partition}"), name=partition
            )
    if not sources:
        raise ConfigError("pass at least one of --train/--valid/--test")
    exclusions = []
    if args.exclusions:
        text = _input_path(args.exclusions, "--exclusions").read_text(encoding="utf-8")
        exclusions = [line.strip() for line in text.splitlines() if line.strip()]
    merged = build_extended(sources, exclusions=exclusions)
    out = _out_dir(args)
    save_manifest(merged, out / "manifest.csv")
    counts = merged.partition_counts()
    print(
        "extended release "
        + "/".join(str(counts.get(p, 0)) for p in ("train", "valid", "test"))
        + f" -> {out / 'manifest.csv'}"
    )
    return 0


def _cmd_audit(args) -> int:
    manifest = _manifest_with_splits(args)
    out = _out_dir(args)
    overlap = detect_overlap(manifest)
    reporting.write_overlap_csv(overlap, out / "overlap.csv")
    kwargs: dict = {"overlap": overlap}
    if args.embeddings:
        emb = _load_embeddings_arg(args)
        base = args.threshold or 0.90
        thresholds = sorted({base, 0.95})
        pairs = scan_pairs(emb, min(thresholds))
        reporting.write_pairs_csv(pairs, out / "pairs.csv")
        kwargs["pair_counts"] = {
            t: sum(1 for p in pairs if p.score >= t) for t in thresholds
        }
        kwargs["conflicts"] = {
            t: conflict_sets([p for p in pairs if p.score >= t], manifest)
            for t in thresholds
        }
        reporting.write_conflict_counts_csv(kwargs["conflicts"], out / "conflicts.csv")
        clusters = detect_clusters(emb, base, manifest=manifest, pairs=pairs)
        reporting.write_clusters_csv(clusters, out / "clusters.csv")
        kwargs["clusters"] = clusters
        if len(emb) > 5:
            scored = outlier_scores(emb, n_neighbors=5)
            reporting.write_outliers_csv(scored, out / "outliers.csv")
            kwargs["outliers"] = scored
        if any(len(g) > 1 for g in manifest.groups().values()):
            kwargs["intervals"] = interval_analysis(
                pairs, manifest, None, top_k=args.top_k or 1000, width=args.interval
            )
    report = reporting.audit_report(manifest, **kwargs)
    json_path, html_path = reporting.write_report(report, out)
    print(f"audit report -> {json_path} and {html_path}")
    return 0


def _cmd_report(args) -> int:
    manifest = _manifest_with_splits(args)
    report = reporting.audit_report(manifest, overlap=detect_overlap(manifest))
    json_path, html_path = reporting.write_report(report, _out_dir(args))
    print(f"report -> {json_path} and {html_path}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    manifest = _load_manifest_arg(args) if args.manifest else None
    queue = reporting.read_pairs_csv(_input_path(args.pairs, "--pairs"))
    log_path = Path(args.log)
    log_path.parent.mkdir(parents=True, exist_ok=True)
    log = VerdictLog(log_path)
    session = ReviewSession(queue=queue, log=log, manifest=manifest)
    ui_dir = _input_dir(args.ui, "--ui") if args.ui else None
    image_root = _input_dir(args.images, "--images") if args.images else None
    app = create_app(session, image_root=image_root, ui_dir=ui_dir)
    print(f"review service on http://{args.host}:{args.port} (log: {log_path})")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# parser assembly


def build_parser() -> _Parser:
    parser = _Parser(prog="dermaudit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name: str, func, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        return p

    def manifest_flag(p, required=True):
        p.add_argument("--manifest", required=required, help="manifest CSV")

    def embeddings_flag(p, required=True):
        p.add_argument(
            "--embeddings", required=required, help="embedding file (binary or CSV)"
        )

    def out_flag(p):
        p.add_argument("--out", required=True, help="output directory")

    def splits_flag(p):
        p.add_argument(
            "--splits", help="directory of train.txt/valid.txt/test.txt id lists"
        )

    p = add("audit", _cmd_audit, "full audit: report plus all side files")
    manifest_flag(p)
    embeddings_flag(p, required=False)
    splits_flag(p)
    p.add_argument("--threshold", type=float, default=0.90, help="pair scan threshold")
    p.add_argument("--top-k", type=int, default=1000, help="pairs ranked for intervals")
    p.add_argument("--interval", type=int, default=100, help="interval width")
    out_flag(p)

    p = add("pairs", _cmd_pairs, "scan similar pairs above a threshold")
    embeddings_flag(p)
    p.add_argument("--threshold", type=float, default=0.90)
    out_flag(p)

    p = add("clusters", _cmd_clusters, "detect duplicate clusters")
    embeddings_flag(p)
    manifest_flag(p, required=False)
    p.add_argument("--threshold", type=float, default=0.90)
    out_flag(p)

    p = add("leakage", _cmd_leakage, "measure cross-partition group overlap")
    manifest_flag(p)
    splits_flag(p)
    out_flag(p)

    p = add("repair", _cmd_repair, "consolidate spanning groups and duplicate pairs")
    manifest_flag(p)
    splits_flag(p)
    p.add_argument("--pairs", help="pairs.csv of confirmed cross-partition duplicates")
    out_flag(p)

    p = add("conflicts", _cmd_conflicts, "count label conflicts among similar pairs")
    manifest_flag(p)
    embeddings_flag(p)
    p.add_argument("--threshold", type=float, default=None, help="base threshold")
    out_flag(p)

    p = add("outliers", _cmd_outliers, "rank images by neighborhood similarity")
    embeddings_flag(p)
    p.add_argument("--top-k", type=int, default=0, help="write only the first K rows")
    out_flag(p)

    p = add("clean", _cmd_clean, "staged removal pipeline; writes cleaned manifest")
    manifest_flag(p)
    embeddings_flag(p)
    p.add_argument("--config", help="TOML config (see module docstring)")
    out_flag(p)

    p = add("split", _cmd_split, "stratified 70/10/20 re-split of a manifest")
    manifest_flag(p)
    p.add_argument("--config", help="TOML config carrying [split] ratios/seed")
    p.add_argument("--seed", type=int, default=None, help="overrides [split] seed")
    out_flag(p)

    p = add("resize", _cmd_resize, "export images resized in one bicubic pass")
    p.add_argument("--src", required=True, help="source image directory")
    p.add_argument("--size", required=True, help="target size, e.g. 224x224")
    manifest_flag(p, required=False)
    out_flag(p)

    p = add("extend", _cmd_extend, "assemble a release from per-partition manifests")
    p.add_argument("--train", help="train source manifest")
    p.add_argument("--valid", help="valid source manifest")
    p.add_argument("--test", help="test source manifest")
    p.add_argument("--exclusions", help="text file of image ids to drop")
    out_flag(p)

    p = add("serve", _cmd_serve, "run the pair-review HTTP service")
    manifest_flag(p, required=False)
    p.add_argument("--pairs", required=True, help="pairs.csv review queue")
    p.add_argument("--log", required=True, help="append-only verdict log path")
    p.add_argument("--images", help="image root served at /api/images")
    p.add_argument("--ui", help="static UI bundle directory served at /")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    p = add("report", _cmd_report, "metadata-only report for a manifest")
    manifest_flag(p)
    splits_flag(p)
    out_flag(p)

    return parser


def main(argv=None) -> int:
    level_name = os.environ.get("DERMAUDIT_LOG", "warn").lower()
    if level_name not in _LOG_LEVELS:
        print(
            f"dermaudit: error: DERMAUDIT_LOG must be one of "
            f"{sorted(_LOG_LEVELS)}, got {level_name!r}",
            file=sys.stderr,
        )
        return 1
    logging.basicConfig(
        level=_LOG_LEVELS[level_name], format="%(levelname)s %(name)s: %(message)s"
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args) or 0
    except EmbeddingFormatError as exc:
        logger.error("corrupt embedding payload: %s", exc)
        print(f"dermaudit: error: {exc}", file=sys.stderr)
        return 2
    except AuditError as exc:
        print(f"dermaudit: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"dermaudit: i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
