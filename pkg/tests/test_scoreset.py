import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fomkit import errors
from fomkit.scoreset import (MISSING, OBJECT, SUBJECT, ScoreRecord, ScoreTable, concat,
                             parse_score_table, read_table, serialize, to_csv, validate,
                             write_table)


def test_minimal_csv():
    t = parse_score_table(b"subject_id,label,score\nA,0,0.1\nB,1,0.9")
    assert len(t) == 2 and t.level == SUBJECT
    assert t.records[1] == ScoreRecord("B", 1, 0.9)


def test_bad_label():
    with pytest.raises(errors.BadLabel):
        parse_score_table(b"subject_id,label,score\nA,2,0.5\n")


def test_inconsistent_subject_label():
    data = b"subject_id,object_id,label,score\nA,a1,0,0.1\nA,a2,1,0.2\n"
    with pytest.raises(errors.InconsistentSubjectLabel):
        parse_score_table(data)


@pytest.mark.parametrize("cell", ["nan", "inf", "-Infinity", "NaN"])
def test_non_finite_score(cell):
    with pytest.raises(errors.NonFiniteScore):
        parse_score_table(f"subject_id,label,score\nA,0,{cell}\n".encode())


@pytest.mark.parametrize("data", [
    b"",
    b"subject_id,label\nA,0\n",
    b"subject_id,label,score,extra\nA,0,0.1,x\n",
    b"subject_id,label,score\nA,0\n",
    b"subject_id,label,score\nA,0,0,1\n",
    b"subject_id,label,score\nA,0,0.1\xff\n",
    b"subject_id,label,score\nA,0,1e\n",
    b"subject_id,label,score\n,0,0.5\n",
    b"subject_id,fold,label,score\nA,0,0,0.1\nB,,1,0.2\n",
    b"subject_id,fold,label,score\nA,-1,0,0.1\n",
])
def test_malformed(data):
    with pytest.raises(errors.MalformedInput):
        parse_score_table(data)


def test_duplicate_rows_rejected():
    with pytest.raises(errors.MalformedInput, match="Duplicate"):
        parse_score_table(b"subject_id,label,score\nA,0,0.1\nA,0,0.2\n")


def test_covariates_crlf_bom_and_scientific():
    data = "﻿subject_id,label,score,cov_ga_days\r\nA,0,1e-3,120\r\nB,1,+.5E1,200.5\r\n"
    t = parse_score_table(data.encode("utf-8"))
    assert t.covariate_names == ["cov_ga_days"]
    np.testing.assert_array_equal(t.score, [1e-3, 5.0])
    np.testing.assert_array_equal(t.covariates["cov_ga_days"], [120, 200.5])


def test_object_level_and_epochs():
    data = (b"subject_id,object_id,fold,epoch,label,score\n"
            b"A,a1,0,0,0,0.1\nA,a2,0,0,0,0.2\nA,a1,0,1,0,0.3\nB,b1,1,0,1,0.9\n")
    t = parse_score_table(data)
    assert t.level == OBJECT
    assert t.folds() == [0, 1] and t.epochs() == [0, 1]


def test_jsonl():
    data = (b'{"subject_id": "A", "label": 0, "score": 0.25, "cov_x": 3}\n'
            b'{"subject_id": "B", "label": 1, "score": 1, "fold": null, "cov_x": 4.5}\n')
    t = parse_score_table(data, "jsonl")
    assert t.records[0] == ScoreRecord("A", 0, 0.25, covariates={"cov_x": 3.0})
    with pytest.raises(errors.BadLabel):
        parse_score_table(b'{"subject_id": "A", "label": true, "score": 0.1}\n', "jsonl")
    with pytest.raises(errors.MalformedInput):
        parse_score_table(b'{"subject_id": "A", "label": 0, "score": "0.1"}\n', "jsonl")
    with pytest.raises(errors.MalformedInput):
        parse_score_table(b'[1, 2]\n', "jsonl")


def test_validate_reports_rows():
    t = parse_score_table(b"subject_id,label,score\nA,0,0.1\nB,1,0.9\n")
    assert validate(t) == []
    bad = t.with_scores([0.1, np.nan])
    assert [(v.kind, v.row) for v in validate(bad)] == [("NonFiniteScore", 1)]

    obj = ScoreTable(["A", "A"], [0, 0], [0.1, 0.2], object_id=["a1", None], level=OBJECT)
    assert [(v.kind, v.row) for v in validate(obj)] == [("MissingObjectId", 1)]

    partial = ScoreTable(["A", "B"], [0, 1], [0.1, 0.2], fold=[0, MISSING])
    assert [v.kind for v in validate(partial)] == ["PartialFold"]

    labels = ScoreTable(["A", "B", "A"], [0, 3, 1], [0.1, 0.2, 0.3], object_id=["1", "2", "3"],
                        level=OBJECT)
    kinds = {(v.kind, v.row) for v in validate(labels)}
    assert kinds == {("BadLabel", 1), ("InconsistentSubjectLabel", 2)}


def test_same_subject_across_epochs_is_not_a_duplicate():
    t = ScoreTable(["A", "A", "B", "B"], [0, 0, 1, 1], [0.1, 0.2, 0.3, 0.4], epoch=[0, 1, 0, 1])
    assert validate(t) == []


def test_csv_layout_is_canonical():
    t = parse_score_table(b"subject_id,label,score,cov_a\nA,0,0.1,1\nB,1,0.9,2\n")
    assert to_csv(t) == ("subject_id,object_id,fold,epoch,label,score,cov_a\n"
                         "A,,,,0,0.1,1.0\nB,,,,1,0.9,2.0\n")


def test_records_round_trip_and_concat():
    t = parse_score_table(b"subject_id,object_id,fold,label,score\nA,a,0,0,0.1\nB,b,1,1,0.7\n")
    assert ScoreTable.from_records(t.records) == t
    both = concat([t.take([0]), t.take([1])])
    assert both == t


def test_file_io(tmp_path):
    t = parse_score_table(b"subject_id,label,score\nA,0,0.1\nB,1,0.9\n")
    for name in ("t.csv", "t.jsonl"):
        write_table(t, tmp_path / name)
        assert read_table(tmp_path / name) == t


# ---------------------------------------------------------------- round-trip property

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@st.composite
def tables(draw):
    n_subj = draw(st.integers(1, 6))
    level = draw(st.sampled_from([OBJECT, SUBJECT]))
    with_fold = draw(st.booleans())
    with_epoch = draw(st.booleans())
    n_epochs = draw(st.integers(1, 3)) if with_epoch else 1
    with_cov = draw(st.booleans())
    rows = []
    for s in range(n_subj):
        label = draw(st.integers(0, 1))
        fold = draw(st.integers(0, 4))
        n_obj = draw(st.integers(1, 3)) if level == OBJECT else 1
        for e in range(n_epochs):
            for o in range(n_obj):
                rows.append(dict(
                    subject_id=f"S{s}", label=label, score=draw(finite),
                    object_id=f"S{s}-{o}" if level == OBJECT else None,
                    fold=fold if with_fold else None, epoch=e if with_epoch else None,
                    covariates={"cov_z": draw(finite)} if with_cov else {}))
    return ScoreTable.from_records([ScoreRecord(**r) for r in rows], level=level)


@given(tables(), st.sampled_from(["csv", "jsonl"]))
def test_parse_serialize_round_trip(table, fmt):
    assert validate(table) == []
    once = parse_score_table(serialize(table, fmt), fmt)
    assert once == table
    assert parse_score_table(serialize(once, fmt), fmt) == once
    assert validate(once) == []
