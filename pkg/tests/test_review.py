"""Verdict log durability, agreement math, adjudication, and the HTTP facade."""

import pytest

from dermaudit import (
    ConfigError,
    IntegrityError,
    ReviewSession,
    VerdictConflictError,
    VerdictLog,
    cohen_kappa,
    confirmed_duplicates,
    create_app,
    make_pair,
)


def log_at(tmp_path, name="v.tsv"):
    return VerdictLog(tmp_path / name)


# ---------------------------------------------------------------------------
# log

def test_record_and_replay(tmp_path):
    log = log_at(tmp_path)
    log.record("r1", "b", "a", "duplicate")  # order canonicalized
    log.record("r1", "a", "c", "different")
    log.record("r2", "a", "b", "unclear")
    log.close()
    back = log_at(tmp_path)
    assert len(back) == 3
    assert back.verdict_map("r1") == {("a", "b"): "duplicate",
                                      ("a", "c"): "different"}
    assert back.annotators() == ["r1", "r2"]
    assert back.get("b", "a", "r2").value == "unclear"
    back.close()


def test_log_line_format(tmp_path):
    log = log_at(tmp_path)
    log.record("r1", "a", "b", "duplicate")
    log.close()
    line = (tmp_path / "v.tsv").read_text().splitlines()[0]
    fields = line.split("\t")
    assert len(fields) == 5
    assert fields[1:] == ["r1", "a", "b", "duplicate"]
    assert "T" in fields[0]  # ISO timestamp


def test_partial_trailing_line_dropped(tmp_path):
    log = log_at(tmp_path)
    log.record("r1", "a", "b", "duplicate")
    log.close()
    path = tmp_path / "v.tsv"
    with open(path, "a", encoding="utf-8") as fh:
        fh.write("2026-01-01T00:00:00+00:00\tr1\ta\tc\tdup")  # no newline
    back = log_at(tmp_path)
    assert len(back) == 1
    assert back.verdict_map("r1") == {("a", "b"): "duplicate"}
    back.close()


def test_corrupt_full_line_is_an_error(tmp_path):
    path = tmp_path / "v.tsv"
    path.write_text("not\ta\tverdict\n")
    with pytest.raises(IntegrityError):
        VerdictLog(path)


def test_one_verdict_per_annotator_pair(tmp_path):
    log = log_at(tmp_path)
    log.record("r1", "a", "b", "duplicate")
    with pytest.raises(VerdictConflictError):
        log.record("r1", "b", "a", "different")
    # same pair, other annotator is fine
    log.record("r2", "a", "b", "different")
    log.close()


def test_record_validation(tmp_path):
    log = log_at(tmp_path)
    with pytest.raises(ValueError):
        log.record("r1", "a", "b", "maybe")
    with pytest.raises(IntegrityError):
        log.record("r1", "a", "a", "duplicate")
    with pytest.raises(ValueError):
        log.record("r\t1", "a", "b", "duplicate")
    log.close()


# ---------------------------------------------------------------------------
# agreement

def test_kappa_identical_annotators():
    m = {("a", "b"): "duplicate", ("a", "c"): "different", ("b", "c"): "unclear"}
    stats = cohen_kappa(m, dict(m))
    assert stats.kappa == 1.0
    assert stats.agreement == 1.0
    assert stats.n_common == 3


def test_kappa_zero_on_marginal_hand_example():
    # A says duplicate on all 4; B splits 2/2: p_o = 0.5 and
    # p_e = 1.0 * 0.5 = 0.5, so kappa is exactly 0
    keys = [("a", "b"), ("a", "c"), ("a", "d"), ("b", "c")]
    map_a = {k: "duplicate" for k in keys}
    map_b = {keys[0]: "duplicate", keys[1]: "duplicate",
             keys[2]: "different", keys[3]: "different"}
    stats = cohen_kappa(map_a, map_b)
    assert abs(stats.kappa - 0.0) < 1e-9
    assert stats.agreement == 0.5


def test_kappa_hand_computed_three_category_case():
    # 10 shared pairs; 8 agreements; marginals A(7,1,2)/B(7,2,1) over
    # (duplicate, unclear, different): p_e = (49 + 2 + 2) / 100
    pairs = [(f"p{i}", f"q{i}") for i in range(10)]
    a_vals = ["duplicate"] * 7 + ["unclear"] + ["different"] * 2
    b_vals = list(a_vals)
    b_vals[6] = "unclear"       # disagree on one duplicate
    b_vals[9] = "duplicate"     # disagree on one different
    map_a = dict(zip(pairs, a_vals))
    map_b = dict(zip(pairs, b_vals))
    stats = cohen_kappa(map_a, map_b)
    p_o, p_e = 0.8, 0.53
    assert abs(stats.kappa - (p_o - p_e) / (1 - p_e)) < 1e-12


def test_kappa_degenerate_full_concentration():
    m = {("a", "b"): "duplicate", ("a", "c"): "duplicate"}
    assert cohen_kappa(m, dict(m)).kappa == 1.0


def test_kappa_requires_common_pairs():
    with pytest.raises(ValueError):
        cohen_kappa({("a", "b"): "duplicate"}, {("a", "c"): "duplicate"})


# ---------------------------------------------------------------------------
# adjudication

def test_confirmed_duplicates_primary(tmp_path):
    log = log_at(tmp_path)
    log.record("r1", "a", "b", "duplicate")
    log.record("r1", "a", "c", "different")
    log.record("r2", "a", "b", "different")
    log.record("r2", "b", "c", "duplicate")
    assert confirmed_duplicates(log, rule="primary", primary="r1") == {("a", "b")}
    assert confirmed_duplicates(log, rule="primary", primary="r2") == {("b", "c")}
    with pytest.raises(ConfigError):
        confirmed_duplicates(log, rule="primary")  # ambiguous with 2 annotators
    log.close()


def test_confirmed_duplicates_single_annotator_implicit(tmp_path):
    log = log_at(tmp_path)
    log.record("solo", "a", "b", "duplicate")
    log.record("solo", "a", "c", "unclear")
    assert confirmed_duplicates(log) == {("a", "b")}
    log.close()


def test_confirmed_duplicates_consensus(tmp_path):
    log = log_at(tmp_path)
    log.record("r1", "a", "b", "duplicate")
    log.record("r2", "a", "b", "duplicate")
    log.record("r1", "a", "c", "duplicate")
    log.record("r2", "a", "c", "unclear")
    log.record("r1", "b", "c", "duplicate")  # only r1 saw it
    assert confirmed_duplicates(log, rule="consensus") == {("a", "b"), ("b", "c")}
    with pytest.raises(ConfigError):
        confirmed_duplicates(log, rule="majority")
    log.close()


# ---------------------------------------------------------------------------
# session + service

def queue_of(*keys):
    return [make_pair(a, b, 0.99 - 0.001 * i) for i, (a, b) in enumerate(keys)]


def test_session_cursor_skips_rated(tmp_path):
    log = log_at(tmp_path)
    session = ReviewSession(queue_of(("a", "b"), ("c", "d"), ("e", "f")), log)
    pair, index = session.next_pair("r1")
    assert (pair.key, index) == (("a", "b"), 0)
    session.record_verdict("r1", "a", "b", "duplicate")
    pair, index = session.next_pair("r1")
    assert (pair.key, index) == (("c", "d"), 1)
    # each annotator has an independent cursor
    pair, _ = session.next_pair("r2")
    assert pair.key == ("a", "b")
    assert session.progress("r1") == (1, 3)
    log.close()


def test_session_rejects_unqueued_pair(tmp_path):
    log = log_at(tmp_path)
    session = ReviewSession(queue_of(("a", "b")), log)
    with pytest.raises(IntegrityError):
        session.record_verdict("r1", "x", "y", "duplicate")
    with pytest.raises(IntegrityError):
        ReviewSession(queue_of(("a", "b"), ("a", "b")), log)
    log.close()


def test_session_restart_resumes(tmp_path):
    queue = queue_of(("a", "b"), ("c", "d"), ("e", "f"))
    log = log_at(tmp_path)
    ReviewSession(queue, log).record_verdict("r1", "a", "b", "duplicate")
    log.close()
    # new process: rebuild from the same files
    log2 = log_at(tmp_path)
    session = ReviewSession(queue, log2)
    pair, index = session.next_pair("r1")
    assert (pair.key, index) == (("c", "d"), 1)
    log2.close()


@pytest.fixture()
def client(tmp_path):
    from fastapi.testclient import TestClient

    log = log_at(tmp_path)
    session = ReviewSession(queue_of(("a", "b"), ("c", "d"), ("e", "f")), log)
    with TestClient(create_app(session)) as c:
        yield c
    log.close()


def test_http_verdict_cycle(client):
    body = client.get("/api/session").json()
    assert (body["pairs"], body["verdicts"]) == (3, 0)
    seen = []
    for _ in range(3):
        nxt = client.get("/api/pairs/next", params={"annotator": "r1"}).json()
        assert nxt["done"] is False
        pair = nxt["pair"]
        seen.append((pair["a"], pair["b"]))
        r = client.post("/api/verdicts", json={
            "annotator": "r1", "a": pair["a"], "b": pair["b"], "value": "duplicate",
        })
        assert r.status_code == 201
    assert seen == [("a", "b"), ("c", "d"), ("e", "f")]
    done = client.get("/api/pairs/next", params={"annotator": "r1"}).json()
    assert done["done"] is True
    stats = client.get("/api/stats").json()
    assert stats["annotators"]["r1"]["done"] == 3


def test_http_error_statuses(client):
    assert client.get("/api/pairs/next").status_code == 400
    ok = {"annotator": "r1", "a": "a", "b": "b", "value": "duplicate"}
    assert client.post("/api/verdicts", json=ok).status_code == 201
    assert client.post("/api/verdicts", json=ok).status_code == 409
    bad_pair = dict(ok, a="x", b="y")
    assert client.post("/api/verdicts", json=bad_pair).status_code == 404
    bad_value = dict(ok, a="c", b="d", value="maybe")
    assert client.post("/api/verdicts", json=bad_value).status_code == 400
    missing = {"annotator": "r1", "a": "c", "b": "d"}
    assert client.post("/api/verdicts", json=missing).status_code == 400


def test_http_stats_agreement(client):
    for annotator in ("r1", "r2"):
        for a, b in (("a", "b"), ("c", "d")):
            client.post("/api/verdicts", json={
                "annotator": annotator, "a": a, "b": b, "value": "duplicate",
            })
    stats = client.get("/api/stats").json()
    (pairing,) = stats["agreement"]
    assert pairing["annotators"] == ["r1", "r2"]
    assert pairing["n_common"] == 2
    assert pairing["raw_agreement"] == 1.0
    assert pairing["kappa"] == 1.0


def test_http_fallback_page(client):
    body = client.get("/")
    assert body.status_code == 200
    assert "/api/pairs/next" in body.text
