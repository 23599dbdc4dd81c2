import json

import pytest

from src.corpus.ingest import dataset_statistics, ingest_records, k_core
from src.lib.core.errors import RecordParseError, RecordSchemaError
from src.schemas.records import YELP_SCHEMA, InteractionRecord


def amazon_line(user, item, rating, text):
    return json.dumps(
        {"reviewerID": user, "asin": item, "overall": rating, "reviewText": text}
    )


def test_ingest_keeps_valid_and_counts_dropped():
    lines = [
        amazon_line("u1", "i1", 5, "great"),
        "",
        amazon_line("u1", "i2", 4, "   "),
        amazon_line("u2", "i1", 0, "bad scale"),
        amazon_line("u2", "i2", 6.5, "too high"),
        amazon_line("u2", "i3", "2", "numeric string"),
    ]
    records, summary = ingest_records(lines)

    assert [(r.user_id, r.item_id, r.rating) for r in records] == [
        ("u1", "i1", 5.0),
        ("u2", "i3", 2.0),
    ]
    assert summary.kept == 2
    assert summary.dropped_empty == 1
    assert summary.dropped_range == 2
    assert summary.total == 5


def test_ingest_reports_line_of_malformed_json():
    lines = [amazon_line("u1", "i1", 5, "ok"), "{not json"]
    with pytest.raises(RecordParseError) as exc:
        ingest_records(lines)
    assert exc.value.line_no == 2


def test_ingest_reports_line_of_undecodable_bytes(tmp_path):
    path = tmp_path / "reviews.json"
    good = amazon_line("u1", "i1", 5, "fine").encode("utf-8")
    bad = amazon_line("u2", "i1", 4, "PLACEHOLDER").encode("utf-8")
    path.write_bytes(good + b"\n" + bad.replace(b"PLACEHOLDER", b"\xff\xfe") + b"\n")

    with open(path, "rb") as fh, pytest.raises(RecordParseError) as exc:
        ingest_records(fh)
    assert exc.value.line_no == 2


def test_ingest_accepts_binary_lines():
    lines = [amazon_line("u1", "i1", 5, "caf\u00e9 ok").encode("utf-8") + b"\n"]
    records, _ = ingest_records(lines)
    assert records[0].review == "caf\u00e9 ok"


def test_ingest_rejects_non_object_lines():
    with pytest.raises(RecordParseError):
        ingest_records(["[1, 2, 3]"])


def test_ingest_reports_missing_field():
    line = json.dumps({"reviewerID": "u1", "asin": "i1", "reviewText": "x"})
    with pytest.raises(RecordSchemaError) as exc:
        ingest_records([line])
    assert exc.value.field == "overall"
    assert exc.value.line_no == 1


def test_ingest_rejects_non_numeric_rating():
    with pytest.raises(RecordSchemaError):
        ingest_records([amazon_line("u1", "i1", "five", "text")])


def test_ingest_yelp_schema():
    line = json.dumps(
        {"user_id": "a", "business_id": "b", "stars": 3, "text": "fine place"}
    )
    records, _ = ingest_records([line], YELP_SCHEMA)
    assert records[0].item_id == "b"
    assert records[0].review == "fine place"


def _rec(user, item, rating=3.0):
    return InteractionRecord(user_id=user, item_id=item, rating=rating, review="x")


def test_k_core_iterates_until_stable():
    records = [
        _rec("u1", "i1"),
        _rec("u1", "i2"),
        _rec("u2", "i1"),
        _rec("u2", "i2"),
        _rec("u3", "i1"),
        _rec("u3", "i3"),
    ]
    kept = k_core(records, 2)
    # dropping (u3, i3) leaves u3 with a single record
    assert {(r.user_id, r.item_id) for r in kept} == {
        ("u1", "i1"),
        ("u1", "i2"),
        ("u2", "i1"),
        ("u2", "i2"),
    }


def test_k_core_of_one_is_identity():
    records = [_rec("u1", "i1")]
    assert k_core(records, 1) == records


def test_dataset_statistics():
    records = [
        _rec("u1", "i1", 5.0),
        _rec("u1", "i2", 1.0),
        _rec("u2", "i1", 4.0),
        _rec("u2", "i2", 2.0),
    ]
    stats = dataset_statistics(records)
    assert stats.n_users == 2
    assert stats.n_items == 2
    assert stats.n_ratings == 4
    assert stats.density == pytest.approx(1.0)
    assert stats.positive_fraction == pytest.approx(0.5)
    assert stats.imbalance_histogram[5] == 2
    assert sum(stats.imbalance_histogram) == 2
