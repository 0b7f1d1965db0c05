import csv
import json

import pytest

from toxsem.ingest import ANALYSIS_COLUMNS
from toxsem.pipeline import (
    ARTIFACTS,
    ConfigError,
    StageError,
    column_values,
    load_config,
    run_pipeline,
    with_column,
)
from toxsem.toxicity import CredentialError, MockToxicityServer, default_mock_scorer

from conftest import FIXTURES, fixture_config


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    return run_pipeline(fixture_config(tmp_path_factory.mktemp("run")))


def _rows(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


# --------------------------------------------------------------------------
# config


def _raw(**kw):
    raw = json.loads((FIXTURES / "pipeline.json").read_text())
    raw.update(kw)
    return raw


def test_missing_required_key_named():
    raw = _raw()
    del raw["players"]
    with pytest.raises(ConfigError, match="'players'"):
        load_config(raw, base=FIXTURES)


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="colour"):
        load_config(_raw(colour="blue"), base=FIXTURES)


def test_missing_model_file_names_key():
    with pytest.raises(ConfigError, match="'models.path'"):
        load_config(_raw(models={"path": "nowhere.sem"}), base=FIXTURES)


def test_unknown_bundled_model():
    with pytest.raises(ConfigError, match="models.other"):
        load_config(_raw(models={"other": "bundled"}), base=FIXTURES)


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "none.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{oops")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(bad)


def test_paths_relative_to_config_file():
    cfg = load_config(FIXTURES / "pipeline.json")
    assert cfg.input == FIXTURES / "reviews_600.csv"
    assert cfg.output_dir == FIXTURES / "out"


# --------------------------------------------------------------------------
# full run


def test_every_artifact_written(run):
    for name in ARTIFACTS.values():
        assert (run.output_dir / name).exists(), name
    for model in ("path", "measurement", "total_effect", "full_sem"):
        assert (run.output_dir / f"fit_{model}.txt").read_text().startswith("toxsem")


def test_enriched_files_keep_all_rows_and_add_columns(run):
    rows = _rows(run.output_dir / ARTIFACTS["sectorwise"])
    assert len(rows) == 600
    assert {"commentSentiment", "commentToxicity", "serviceCluster",
            "serviceRelativeRating", "reviewCreatedVersion"} <= set(rows[0])


def test_clean_report_arithmetic(run):
    rep = run.clean_report
    assert rep.kept + rep.dropped == rep.total == 600
    assert rep.dropped <= sum(rep.reasons.values())
    assert rep.reasons.get("commentToxicity:empty_text") == 2
    assert rep.reasons.get("commentToxicity:unsupported_language", 0) > 0
    analysis = _rows(run.output_dir / ARTIFACTS["analysis"])
    assert len(analysis) == rep.kept
    assert list(analysis[0]) == list(ANALYSIS_COLUMNS)


def test_toxicity_values_come_from_mock(run):
    rows = _rows(run.output_dir / ARTIFACTS["toxicity"])
    for r in rows[:50]:
        expected = default_mock_scorer(r["content"]) if r["content"].strip() else None
        if expected is None:
            assert r["commentToxicity"] == "NA"
        else:
            assert float(r["commentToxicity"]) == expected


def test_srr_sums_to_ten_per_sector(run):
    sector = {r["appId"]: r["sector"] for r in _rows(FIXTURES / "players.csv")}
    totals = {}
    for r in _rows(run.output_dir / ARTIFACTS["srr"]):
        s = sector[r["appId"]]
        totals[s] = totals.get(s, 0.0) + float(r["serviceRelativeRating"])
    assert len(totals) == 3
    assert all(abs(t - 10) < 1e-9 for t in totals.values())


def test_fits_have_expected_df(run):
    assert {k: f.df for k, f in run.fits.items()} == {
        "path": 3, "measurement": 8, "total_effect": 3, "full_sem": 8}


# --------------------------------------------------------------------------
# resume and failures


def test_resume_rescores_only_lost_rows(tmp_path):
    out = tmp_path / "o"
    with MockToxicityServer() as s:
        run_pipeline(fixture_config(out), mock_url=s.url)
        first = len(s.requests)
    ck = out / ARTIFACTS["checkpoint"]
    lines = ck.read_text().splitlines(keepends=True)
    ck.write_text("".join(lines[:400]))
    lost = [ln for ln in lines[400:] if "NA:empty_text" not in ln]
    with MockToxicityServer() as s:
        run_pipeline(fixture_config(out), mock_url=s.url)
        assert len(s.requests) == len(lost)
    assert first == 598
    assert ck.read_text().count("\n") == 600


def test_corrupt_checkpoint_is_toxicity_stage_error(tmp_path):
    out = tmp_path / "o"
    out.mkdir()
    (out / ARTIFACTS["checkpoint"]).write_text("broken line\n")
    with pytest.raises(StageError) as exc:
        run_pipeline(fixture_config(out))
    assert exc.value.stage == "toxicity" and "rerun to resume" in str(exc.value)


def test_bad_input_is_ingest_stage_error(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("content,score\nx,3\n")
    with pytest.raises(StageError) as exc:
        run_pipeline(fixture_config(tmp_path / "o", input=str(bad)))
    assert exc.value.stage == "ingest"


def test_rejected_key_propagates(tmp_path):
    with MockToxicityServer(api_key="right") as s, pytest.raises(CredentialError):
        run_pipeline(fixture_config(tmp_path / "o"), mock_url=s.url, api_key="wrong")


# --------------------------------------------------------------------------
# helpers


def test_with_column_replaces_and_formats(run):
    from toxsem.ingest import ReviewRecord

    r = [ReviewRecord("a", "t", 3, 0, "Zomato", extra=(("x", "1"),))]
    r = with_column(r, "x", [None])
    r = with_column(r, "y", [0.5])
    assert r[0].extra == (("x", "NA"), ("y", "0.5"))
    assert column_values(r, "y") == ["0.5"]
    with pytest.raises(ValueError):
        with_column(r, "z", [])


def test_boxplot_by_sector_on_enriched_rows(run):
    from toxsem.boxplot import boxplot_stats

    rows = _rows(run.output_dir / ARTIFACTS["analysis"])
    stats = boxplot_stats(rows, "commentSentiment", ["serviceCluster"])
    assert sorted(s.group for s in stats) == [("1",), ("2",), ("3",)]
    assert sum(s.count for s in stats) == run.clean_report.kept
