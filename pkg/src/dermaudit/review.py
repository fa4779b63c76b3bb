"""Human review of candidate duplicate pairs.

State model: the pair queue (highest similarity first) plus an
append-only verdict log are the entire session state. The log is one
tab-separated line per verdict; restarting the service replays the log,
so a crash can lose at most a partially written trailing line, which is
detected and ignored. One verdict per (pair, annotator), ever - changing
your mind means a new session, which keeps the record honest.
"""

from __future__ import annotations

import logging
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timezone

from .duplicates import VERDICTS
from .embeddings import SimilarityPair
from .errors import ConfigError, IntegrityError, VerdictConflictError
from .manifest import DatasetManifest

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Verdict:
    timestamp: str
    annotator: str
    a: str
    b: str
    value: str


@dataclass(frozen=True)
class AgreementStats:
    kappa: float
    agreement: float
    n_common: int


def cohen_kappa(
    verdicts_a: dict[tuple[str, str], str],
    verdicts_b: dict[tuple[str, str], str],
) -> AgreementStats:
    """Chance-corrected agreement over the pairs both annotators rated.

    Expected agreement comes from each annotator's own marginal verdict
    distribution over the fixed 3-value space. When both annotators are
    fully concentrated on one value, observed and expected agreement are
    both 1 and kappa is defined as 1.0.
    """
    common = sorted(set(verdicts_a) & set(verdicts_b))
    if not common:
        raise ValueError("no common pairs to compare")
    n = len(common)
    matches = sum(1 for key in common if verdicts_a[key] == verdicts_b[key])
    p_o = matches / n
    p_e = 0.0
    for value in VERDICTS:
        ma = sum(1 for key in common if verdicts_a[key] == value) / n
        mb = sum(1 for key in common if verdicts_b[key] == value) / n
        p_e += ma * mb
    if p_e == 1.0:
        return AgreementStats(kappa=1.0, agreement=p_o, n_common=n)
    kappa = (p_o - p_e) / (1.0 - p_e)
    return AgreementStats(kappa=kappa, agreement=p_o, n_common=n)


class VerdictLog:
    """Append-only tab-separated verdict store with replay recovery."""

    def __init__(self, path):
        self.path = str(path)
        self._lock = threading.Lock()
        self._by_pair: dict[tuple[str, str], dict[str, Verdict]] = {}
        self._count = 0
        if os.path.exists(self.path):
            self._replay()
        self._fh = open(self.path, "a", encoding="utf-8")

    def _replay(self) -> None:
        with open(self.path, "r", encoding="utf-8") as fh:
            content = fh.read()
        lines = content.split("\n")
        if content and not content.endswith("\n"):
            # Crash mid-append: the unterminated tail is not a verdict.
            logger.warning("dropping partial trailing line in %s", self.path)
            lines = lines[:-1]
        for lineno, line in enumerate(l for l in lines if l):
            fields = line.split("\t")
            if len(fields) != 5:
                raise IntegrityError(
                    f"{self.path}:{lineno + 1}: expected 5 fields, got {len(fields)}"
                )
            timestamp, annotator, a, b, value = fields
            self._store(Verdict(timestamp, annotator, a, b, value))

    def _store(self, verdict: Verdict) -> None:
        if verdict.value not in VERDICTS:
            raise ValueError(
                f"verdict value must be one of {VERDICTS}, got {verdict.value!r}"
            )
        if verdict.a >= verdict.b:
            raise IntegrityError(
                f"pair ids must satisfy a < b, got {verdict.a!r}, {verdict.b!r}"
            )
        per_annotator = self._by_pair.setdefault((verdict.a, verdict.b), {})
        if verdict.annotator in per_annotator:
            raise VerdictConflictError(
                f"{verdict.annotator!r} already rated ({verdict.a}, {verdict.b})"
            )
        per_annotator[verdict.annotator] = verdict
        self._count += 1

    def record(self, annotator: str, a: str, b: str, value: str) -> Verdict:
        """Validate, persist, then publish one verdict."""
        if not annotator or "\t" in annotator or "\n" in annotator:
            raise ValueError(f"bad annotator name {annotator!r}")
        if a == b:
            raise IntegrityError(f"pair of an image with itself: {a!r}")
        a, b = (a, b) if a < b else (b, a)
        timestamp = datetime.now(timezone.utc).isoformat()
        verdict = Verdict(timestamp, annotator, a, b, value)
        with self._lock:
            self._store(verdict)
            self._fh.write(
                f"{timestamp}\t{annotator}\t{a}\t{b}\t{value}\n"
            )
            self._fh.flush()
            os.fsync(self._fh.fileno())
        return verdict

    def get(self, a: str, b: str, annotator: str) -> Verdict | None:
        a, b = (a, b) if a < b else (b, a)
        return self._by_pair.get((a, b), {}).get(annotator)

    def annotators(self) -> list[str]:
        names = set()
        for per_annotator in self._by_pair.values():
            names |= set(per_annotator)
        return sorted(names)

    def verdict_map(self, annotator: str) -> dict[tuple[str, str], str]:
        return {
            key: per_annotator[annotator].value
            for key, per_annotator in self._by_pair.items()
            if annotator in per_annotator
        }

    def __len__(self) -> int:
        return self._count

    def close(self) -> None:
        self._fh.close()


class ReviewSession:
    """A pair queue bound to a verdict log (and optionally a manifest)."""

    def __init__(
        self,
        queue: list[SimilarityPair],
        log: VerdictLog,
        manifest: DatasetManifest | None = None,
        name: str = "review",
    ):
        keys = {p.key for p in queue}
        if len(keys) != len(queue):
            raise IntegrityError("queue contains repeated pairs")
        self.queue = list(queue)
        self.log = log
        self.manifest = manifest
        self.name = name
        self._positions = {p.key: i for i, p in enumerate(self.queue)}

    def __len__(self) -> int:
        return len(self.queue)

    def next_pair(self, annotator: str) -> tuple[SimilarityPair, int] | None:
        """First queue entry this annotator has not rated, with its index."""
        done = self.log.verdict_map(annotator)
        for i, pair in enumerate(self.queue):
            if pair.key not in done:
                return pair, i
        return None

    def record_verdict(self, annotator: str, a: str, b: str, value: str) -> Verdict:
        key = (a, b) if a < b else (b, a)
        if key not in self._positions:
            raise IntegrityError(f"pair {key} is not in the review queue")
        return self.log.record(annotator, a, b, value)

    def progress(self, annotator: str) -> tuple[int, int]:
        done = self.log.verdict_map(annotator)
        rated = sum(1 for p in self.queue if p.key in done)
        return rated, len(self.queue)

    def stats(self) -> dict:
        annotators = self.log.annotators()
        per_annotator = {}
        for name in annotators:
            verdicts = self.log.verdict_map(name)
            in_queue = [self.queue[self._positions[k]] for k in verdicts if k in self._positions]
            by_value = {v: 0 for v in VERDICTS}
            for key in verdicts:
                if key in self._positions:
                    by_value[verdicts[key]] += 1
            per_annotator[name] = {
                "done": len(in_queue),
                "remaining": len(self.queue) - len(in_queue),
                "by_value": by_value,
            }
        agreements = []
        for i, name_a in enumerate(annotators):
            for name_b in annotators[i + 1 :]:
                map_a = self.log.verdict_map(name_a)
                map_b = self.log.verdict_map(name_b)
                common = set(map_a) & set(map_b) & set(self._positions)
                if not common:
                    continue
                stats = cohen_kappa(
                    {k: map_a[k] for k in common}, {k: map_b[k] for k in common}
                )
                agreements.append(
                    {
                        "annotators": [name_a, name_b],
                        "n_common": stats.n_common,
                        "raw_agreement": stats.agreement,
                        "kappa": stats.kappa,
                    }
                )
        return {
            "name": self.name,
            "pairs": len(self.queue),
            "verdicts": len(self.log),
            "annotators": per_annotator,
            "agreement": agreements,
        }


def confirmed_duplicates(
    log: VerdictLog, rule: str = "primary", primary: str | None = None
) -> set[tuple[str, str]]:
    """Adjudicate the log into a set of confirmed duplicate pair keys.

    rule "primary": the designated annotator's duplicate verdicts stand
    (with a single-annotator log the designation is implicit).
    rule "consensus": every annotator who rated the pair said duplicate.
    """
    annotators = log.annotators()
    if rule == "primary":
        if primary is None:
            if len(annotators) > 1:
                raise ConfigError(
                    f"multiple annotators {annotators}; pass primary= explicitly"
                )
            primary = annotators[0] if annotators else None
        if primary is None:
            return set()
        return {
            key for key, value in log.verdict_map(primary).items() if value == "duplicate"
        }
    if rule == "consensus":
        confirmed = set()
        for key, per_annotator in log._by_pair.items():
            values = [v.value for v in per_annotator.values()]
            if values and all(v == "duplicate" for v in values):
                confirmed.add(key)
        return confirmed
    raise ConfigError(f"unknown adjudication rule {rule!r}")


FALLBACK_PAGE = """<!DOCTYPE html>
<html>
<head><meta charset="utf-8"><title>duplicate review</title></head>
<body>
<h1>Duplicate review service</h1>
<p>No UI bundle is installed. The JSON API is live:</p>
<ul>
<li>GET /api/session</li>
<li>GET /api/pairs/next?annotator=NAME</li>
<li>POST /api/verdicts</li>
<li>GET /api/stats</li>
<li>GET /api/images/&lt;image_id&gt;</li>
</ul>
</body>
</html>
"""


def create_app(session: ReviewSession, image_root=None, ui_dir=None):
    """Build the HTTP facade over a ReviewSession.

    Endpoints are plain JSON so any client works; the optional ui_dir is
    served at / as static files (a single-page app consuming the same
    endpoints). image_root anchors the manifest's relative file paths.
    """
    from fastapi import Body, FastAPI, HTTPException, Query
    from fastapi.responses import FileResponse, HTMLResponse

    app = FastAPI(title="dermaudit review", docs_url=None, redoc_url=None)

    def pair_payload(pair: SimilarityPair) -> dict:
        def meta(image_id: str):
            if session.manifest is None or image_id not in session.manifest:
                return None
            rec = session.manifest.get(image_id)
            return {
                "diagnosis": rec.diagnosis,
                "fst": rec.fst,
                "group_id": rec.group_id,
                "partition": rec.partition,
                "width": rec.width,
                "height": rec.height,
            }

        return {
            "a": pair.a,
            "b": pair.b,
            "score": pair.score,
            "a_meta": meta(pair.a),
            "b_meta": meta(pair.b),
        }

    @app.get("/api/session")
    def get_session():
        return {
            "name": session.name,
            "pairs": len(session.queue),
            "verdicts": len(session.log),
            "annotators": session.log.annotators(),
        }

    @app.get("/api/pairs/next")
    def get_next(annotator: str = Query(default="")):
        if not annotator:
            raise HTTPException(status_code=400, detail="annotator is required")
        nxt = session.next_pair(annotator)
        done, total = session.progress(annotator)
        if nxt is None:
            return {"done": True, "pair": None, "index": None, "total": total}
        pair, index = nxt
        return {
            "done": False,
            "pair": pair_payload(pair),
            "index": index,
            "total": total,
            "rated": done,
        }

    @app.post("/api/verdicts", status_code=201)
    def post_verdict(body: dict = Body(...)):
        for field in ("annotator", "a", "b", "value"):
            if not isinstance(body.get(field), str) or not body[field]:
                raise HTTPException(
                    status_code=400, detail=f"{field} must be a non-empty string"
                )
        try:
            session.record_verdict(
                body["annotator"], body["a"], body["b"], body["value"]
            )
        except VerdictConflictError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from None
        except IntegrityError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        done, total = session.progress(body["annotator"])
        return {"recorded": True, "rated": done, "remaining": total - done}

    @app.get("/api/stats")
    def get_stats():
        return session.stats()

    @app.get("/api/images/{image_id}")
    def get_image(image_id: str):
        if session.manifest is None or image_id not in session.manifest:
            raise HTTPException(status_code=404, detail=f"unknown image {image_id!r}")
        rec = session.manifest.get(image_id)
        path = os.path.join(image_root or ".", rec.file_path)
        if not os.path.isfile(path):
            raise HTTPException(status_code=404, detail=f"file missing for {image_id!r}")
        return FileResponse(path)

    if ui_dir and os.path.isdir(ui_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    else:

        @app.get("/", response_class=HTMLResponse)
        def index():
            return FALLBACK_PAGE

    return app
