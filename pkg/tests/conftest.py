"""Shared fixtures and the acceptance summary hook."""

import numpy as np
import pytest

from dermaudit import DatasetManifest, EmbeddingMatrix, ImageRecord

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def acceptance_report():
    """One printed pass/fail line per criterion, plus the hard assert."""

    def _report(criterion: str, source: str, ok: bool, detail: str = ""):
        status = "PASS" if ok else "FAIL"
        line = f"{status} criterion {criterion} [{source}] {detail}".rstrip()
        ACCEPTANCE_LINES.append(line)
        assert ok, line

    return _report


def rec(image_id, diagnosis="mel", group=None, partition="unassigned", fst=0,
        width=None, height=None, checksum=None, file_path=None):
    return ImageRecord(
        image_id=image_id,
        file_path=file_path or f"img/{image_id}.jpg",
        diagnosis=diagnosis,
        group_id=group,
        fst=fst,
        partition=partition,
        width=width,
        height=height,
        checksum=checksum,
    )


def manifest_of(*records, name="test"):
    return DatasetManifest(name=name, records=list(records))


def random_embeddings(n, dim, seed, prefix="e"):
    rng = np.random.default_rng(seed)
    values = rng.standard_normal((n, dim))
    ids = [f"{prefix}{i:04d}" for i in range(n)]
    return EmbeddingMatrix(ids, values)


@pytest.fixture(scope="session")
def ham_replica():
    from dermaudit.synthetic import ham10000_like

    return ham10000_like()


@pytest.fixture(scope="session")
def fitz_replica():
    from dermaudit.synthetic import fitzpatrick_like

    return fitzpatrick_like()
