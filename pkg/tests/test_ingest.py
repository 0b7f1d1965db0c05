import io
import math
import warnings
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from toxsem.ingest import (
    ANALYSIS_COLUMNS,
    EnrichedRecord,
    InputError,
    ReviewRecord,
    RowValidationError,
    SamplingDesign,
    SamplingError,
    SchemaError,
    UnknownAppError,
    balance_sample,
    clean_listwise,
    code_sector,
    default_sector_table,
    load_sector_table,
    parse_reviews,
    serialize_reviews,
    write_analysis_rows,
)

HEADER = "reviewId,userName,content,score,thumbsUpCount,reviewCreatedVersion,at,replyContent," \
         "repliedAt,sortOrder,appId\n"


def test_parse_table_one_header_with_passthrough():
    data = (HEADER +
            'r1,amit,"Great app, fast",5,3,1.2,2021-01-01,,,most_relevant,Zomato\n'
            'r2,neha,Bad,1,0,1.2,2021-01-02,Sorry!,2021-01-03,newest,Zomato\n'
            'r3,ravi,"said ""ok""",3,12,,2021-01-05,,,relevant,redbus\n').encode()
    recs = parse_reviews(data)
    assert len(recs) == 3
    assert recs[0].content == "Great app, fast"
    assert recs[0].sortOrder == "relevant"
    assert recs[1].extras()["replyContent"] == "Sorry!"
    assert [k for k, _ in recs[0].extra] == ["userName", "reviewCreatedVersion", "at",
                                             "replyContent", "repliedAt"]
    assert recs[2].content == 'said "ok"'


def test_header_only_gives_empty_list():
    assert parse_reviews(HEADER.encode()) == []


def test_score_out_of_range_cites_row():
    data = (HEADER + "r1,a,x,5,0,,,,,relevant,A\nr2,b,y,7,0,,,,,relevant,A\n").encode()
    with pytest.raises(RowValidationError) as exc:
        parse_reviews(data)
    assert exc.value.row == 2 and "7" in str(exc.value)


def test_missing_mandatory_column_named():
    with pytest.raises(SchemaError, match="thumbsUpCount"):
        parse_reviews(b"content,score,appId\nx,3,A\n")


def test_bad_encoding_is_input_error():
    with pytest.raises(InputError):
        parse_reviews(b"content,score,thumbsUpCount,appId\n\xff\xfe,3,0,A\n")


def test_negative_thumbs_rejected():
    with pytest.raises(RowValidationError):
        parse_reviews(b"content,score,thumbsUpCount,appId\nx,3,-1,A\n")


_text = st.text(st.characters(blacklist_categories=("Cs",), blacklist_characters="\r\x00"),
                max_size=40)
_record = st.builds(
    ReviewRecord,
    reviewId=st.from_regex(r"r[0-9]{1,5}", fullmatch=True),
    content=_text,
    score=st.integers(1, 5),
    thumbsUpCount=st.integers(0, 10 ** 6),
    appId=st.from_regex(r"[A-Za-z][A-Za-z0-9 ]{0,8}[A-Za-z0-9]", fullmatch=True),
    sortOrder=st.sampled_from(["relevant", "newest"]),
)


@settings(max_examples=200)
@given(st.lists(_record, max_size=15), st.lists(_text, min_size=0, max_size=2))
def test_serialize_parse_round_trip(records, extra_values):
    cols = [f"extra{k}" for k in range(len(extra_values))]
    recs = [ReviewRecord(r.reviewId, r.content, r.score, r.thumbsUpCount, r.appId, r.sortOrder,
                         tuple(zip(cols, extra_values))) for r in records]
    assert parse_reviews(serialize_reviews(recs)) == recs


# --------------------------------------------------------------------------
# sampling


def _records(app, order, counts):
    out = []
    for score, n in counts.items():
        for k in range(n):
            out.append(ReviewRecord(f"{app}-{order}-{score}-{k}", "x", score, 0, app, order))
    return out


FULL = {1: 120, 2: 100, 3: 230, 4: 110, 5: 100}


def test_default_design_counts():
    recs = []
    for a in ("A", "B"):
        for o in ("relevant", "newest"):
            recs += _records(a, o, FULL)
    out = balance_sample(recs)
    assert len(out) == 2 * 1200
    cells = Counter((r.appId, r.sortOrder, r.score) for r in out)
    assert cells[("A", "relevant", 3)] == 200 and cells[("B", "newest", 1)] == 100
    assert SamplingDesign().per_app == 1200


def test_eighteen_apps_give_21600_rows():
    recs = []
    for a in range(18):
        for o in ("relevant", "newest"):
            recs += _records(f"app{a}", o, FULL)
    assert len(balance_sample(recs)) == 21600


def test_first_k_selection_is_deterministic_and_in_input_order():
    recs = _records("A", "relevant", {3: 5}) + _records("A", "newest", {3: 5})
    out = balance_sample(recs, SamplingDesign({3: 2}))
    assert [r.reviewId for r in out] == ["A-relevant-3-0", "A-relevant-3-1",
                                         "A-newest-3-0", "A-newest-3-1"]


def test_seeded_sampling_reproducible_subset():
    recs = _records("A", "relevant", {3: 50}) + _records("A", "newest", {3: 50})
    d = SamplingDesign({3: 10}, seed=5)
    a, b = balance_sample(recs, d), balance_sample(recs, d)
    assert a == b and len(a) == 20
    assert not Counter(a) - Counter(recs)


def test_deficient_cell_error_lists_every_cell():
    recs = _records("A", "relevant", {**FULL, 3: 150}) + _records("A", "newest", {**FULL, 1: 3})
    with pytest.raises(SamplingError) as exc:
        balance_sample(recs)
    msg = str(exc.value)
    assert "A/relevant/score=3: have 150, need 200" in msg
    assert "A/newest/score=1: have 3, need 100" in msg
    assert len(exc.value.deficient) == 2


def test_deficient_override_takes_all_with_warning():
    recs = _records("A", "relevant", {3: 1}) + _records("A", "newest", {3: 4})
    with pytest.warns(RuntimeWarning):
        out = balance_sample(recs, SamplingDesign({3: 2}, allow_deficient=True))
    assert len(out) == 3


def test_zero_quotas_empty_output():
    recs = _records("A", "relevant", {3: 4})
    assert balance_sample(recs, SamplingDesign({k: 0 for k in range(1, 6)})) == []


@settings(max_examples=100)
@given(st.lists(st.tuples(st.sampled_from("AB"), st.sampled_from(["relevant", "newest"]),
                          st.integers(1, 5)), max_size=60), st.integers(0, 3))
def test_sample_is_sub_multiset_and_cells_capped(cells, quota):
    recs = [ReviewRecord(f"r{k}", "t", s, 0, a, o) for k, (a, o, s) in enumerate(cells)]
    design = SamplingDesign({s: quota for s in range(1, 6)}, allow_deficient=True)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out = balance_sample(recs, design)
    assert not Counter(out) - Counter(recs)
    for n in Counter((r.appId, r.sortOrder, r.score) for r in out).values():
        assert n <= quota


# --------------------------------------------------------------------------
# sectors


def test_default_table_has_eighteen_players_six_per_sector():
    table = default_sector_table()
    assert len(table) == 18
    assert Counter(table.values()) == {1: 6, 2: 6, 3: 6}


def test_code_sector_examples():
    assert code_sector("Zomato") == 1
    assert code_sector("redbus") == 3
    assert code_sector("practo") == 2
    with pytest.raises(UnknownAppError):
        code_sector("NotAnApp")


def test_custom_sector_table():
    table = load_sector_table(io.StringIO("# comment\nappId,sector\nfoo,travel\nbar\tpharma\n"))
    assert table == {"foo": 3, "bar": 2}
    assert code_sector("foo", table) == 3
    with pytest.raises(ValueError):
        load_sector_table(io.StringIO("foo,space\n"))


# --------------------------------------------------------------------------
# cleaning


def _enriched(k, tox=0.1, srr=1.5, sent=0.2, reason=None):
    r = ReviewRecord(f"r{k}", "t", 1 + k % 5, k, "Zomato")
    return EnrichedRecord(r, sent, tox, 1, srr, reason)


def test_clean_keeps_complete_rows():
    recs = [_enriched(k) for k in range(5)]
    rows, rep = clean_listwise(recs)
    assert len(rows) == 5 and rep.dropped == 0 and rep.kept + rep.dropped == rep.total


def test_clean_drops_missing_with_reasons():
    recs = [_enriched(0), _enriched(1, tox=None, reason="unsupported_language"),
            _enriched(2, tox=None, reason="empty_text"), _enriched(3, srr=None),
            _enriched(4, sent=math.nan)]
    rows, rep = clean_listwise(recs)
    assert [r.reviewerScore for r in rows] == [1]
    assert rep.total == 5 and rep.kept == 1 and rep.dropped == 4
    assert rep.reasons == {"commentToxicity:unsupported_language": 1,
                           "commentToxicity:empty_text": 1,
                           "serviceRelativeRating:no_rating": 1,
                           "commentSentiment:not_scored": 1}
    assert "total=5" in rep.to_kv() and "kept=1" in rep.to_kv()
    assert "1 of 5 rows kept" in rep.to_text()


def test_clean_all_missing():
    rows, rep = clean_listwise([_enriched(k, tox=None) for k in range(3)])
    assert rows == [] and rep.dropped == 3


def test_paper_scale_cleaning_arithmetic():
    recs = [_enriched(k, tox=None if k < 484 else 0.2) for k in range(21600)]
    rows, rep = clean_listwise(recs)
    assert rep.kept == 21116 and rep.dropped == 484


@settings(max_examples=100)
@given(st.lists(st.tuples(st.booleans(), st.booleans()), max_size=40))
def test_clean_partitions_input(flags):
    recs = [_enriched(k, tox=None if a else 0.3, srr=None if b else 2.0)
            for k, (a, b) in enumerate(flags)]
    rows, rep = clean_listwise(recs)
    complete = [r for r in recs if not r.missing()]
    assert rep.kept + rep.dropped == rep.total == len(recs)
    assert [r.thumbsUpCount for r in rows] == [r.review.thumbsUpCount for r in complete]


def test_write_analysis_rows_header():
    rows, _ = clean_listwise([_enriched(1)])
    buf = io.StringIO()
    write_analysis_rows(rows, buf)
    assert buf.getvalue().splitlines()[0] == ",".join(ANALYSIS_COLUMNS)
