"""End-to-end enrichment and modelling run driven by a JSON config.

Stages run in order: sentiment, toxicity, sector/SRR join, listwise
cleaning, then the four model fits.  Every artifact is plain CSV or text
so two runs over the same inputs can be compared byte for byte.

Config keys (paths are relative to the config file)::

    {
      "input": "reviews.csv",             required
      "output_dir": "out",                required
      "players": "players.csv",           required, SRR inputs
      "models": {"path": "bundled", ...}, required, file path or "bundled"
      "lexicon": "bundled",               optional
      "sector_table": "bundled",          optional
      "sampling": {"quotas": {...}, "seed": null, "allow_deficient": false},
      "toxicity": {"url": "...", "mock": false, "rate": 1.0, "max_retries": 3,
                   "request_timeout": 30, "workers": 1},
      "fit": {"divisor": "n", "multiplier": "n-1", "bootstrap": 0, "seed": 0},
      "inclusive_credit": false
    }
"""
from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

from . import ingest, models, srr, toxicity
from .ingest import ANALYSIS_COLUMNS, EnrichedRecord, ReviewRecord
from .sentiment import Lexicon, default_lexicon, load_lexicon, score_review

__all__ = [
    "ConfigError",
    "StageError",
    "PipelineConfig",
    "PipelineResult",
    "with_column",
    "column_values",
    "enrich_sentiment",
    "enrich_toxicity",
    "join_enriched",
    "load_config",
    "run_pipeline",
    "ARTIFACTS",
]

log = logging.getLogger(__name__)

BUNDLED = "bundled"

ARTIFACTS = {
    "sentiment": "reviews_with_sentimentscore.csv",
    "toxicity": "reviews_with_toxicityscore.csv",
    "checkpoint": "toxicity_checkpoint.tsv",
    "srr": "serviceRelativeRating.csv",
    "sectorwise": "reviews_with_sentox_sectorwise.csv",
    "analysis": "analysis_rows.csv",
    "clean": "clean_report.txt",
}

TOXICITY_REASON_COLUMN = "toxicityMissingReason"


class ConfigError(ValueError):
    """Invalid or incomplete pipeline configuration."""


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        hint = ""
        if stage == "toxicity":
            hint = " (scored rows are kept in the checkpoint; rerun to resume)"
        super().__init__(f"stage {stage!r} failed: {cause}{hint}")


# --------------------------------------------------------------------------
# column helpers


def _fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, float):
        return "NA" if math.isnan(v) else repr(v)
    return str(v)


def with_column(records: Sequence[ReviewRecord], name: str,
                values: Sequence) -> list[ReviewRecord]:
    """Copies of ``records`` with column ``name`` set (replaced if present)."""
    if len(values) != len(records):
        raise ValueError("one value per record is required")
    out = []
    for r, v in zip(records, values):
        extra = tuple((k, x) for k, x in r.extra if k != name) + ((name, _fmt(v)),)
        out.append(ReviewRecord(r.reviewId, r.content, r.score, r.thumbsUpCount, r.appId,
                                r.sortOrder, extra))
    return out


def column_values(records: Sequence[ReviewRecord], name: str) -> list[str]:
    out = []
    for n, r in enumerate(records, start=1):
        ex = r.extras()
        if name not in ex:
            raise ingest.SchemaError(f"row {n} has no {name!r} column")
        out.append(ex[name])
    return out


def _parse_optional_float(text: str) -> float | None:
    text = text.strip()
    if text in ("", "NA", "nan", "NaN"):
        return None
    return float(text)


# --------------------------------------------------------------------------
# stages


def enrich_sentiment(records: Sequence[ReviewRecord], lexicon: Lexicon) -> list[ReviewRecord]:
    """Append ``commentSentiment`` (average sentence score) to each review."""
    return with_column(records, "commentSentiment",
                       [score_review(r.content, lexicon).average for r in records])


def enrich_toxicity(records: Sequence[ReviewRecord], client: toxicity.ToxicityClient,
                    checkpoint: str | os.PathLike | None = None,
                    progress: Callable[[int, int], None] | None = None) -> list[ReviewRecord]:
    """Append ``commentToxicity`` and the missing reason (blank when scored)."""
    items = [(r.reviewId, r.content) for r in records]
    if len({rid for rid, _ in items}) != len(items):
        items = [(f"row{k + 1}", text) for k, (_, text) in enumerate(items)]
    scores = toxicity.stream_scores(items, client, checkpoint, progress,
                                    partitions=[r.appId for r in records])
    out = with_column(records, "commentToxicity", [s.value for s in scores])
    return with_column(out, TOXICITY_REASON_COLUMN, [s.reason or "" for s in scores])


def join_enriched(records: Sequence[ReviewRecord], sectors: Mapping[str, int],
                  srr_values: Mapping[str, float]) -> list[EnrichedRecord]:
    """Attach sector code and SRR to sentiment/toxicity-scored reviews."""
    sent = column_values(records, "commentSentiment")
    tox = column_values(records, "commentToxicity")
    out = []
    for r, s, t in zip(records, sent, tox):
        reason = r.extras().get(TOXICITY_REASON_COLUMN) or None
        value = _parse_optional_float(t)
        s_val = _parse_optional_float(s)
        out.append(EnrichedRecord(
            review=r,
            commentSentiment=float("nan") if s_val is None else s_val,
            commentToxicity=value,
            serviceCluster=ingest.code_sector(r.appId, sectors),
            serviceRelativeRating=srr_values.get(r.appId),
            missing_reason=(reason or "api_error") if value is None else None,
        ))
    return out


def write_enriched(records: Sequence[EnrichedRecord], fh) -> None:
    base = [with_column([e.review], "serviceCluster", [e.serviceCluster])[0] for e in records]
    base = with_column(base, "serviceRelativeRating",
                       [e.serviceRelativeRating for e in records])
    ingest.serialize_reviews(base, fh)


# --------------------------------------------------------------------------
# config


@dataclass
class PipelineConfig:
    base: Path
    input: Path
    output_dir: Path
    players: Path
    models: dict[str, str | Path]
    lexicon: str | Path = BUNDLED
    sector_table: str | Path = BUNDLED
    sampling: dict | None = None
    toxicity: dict = field(default_factory=dict)
    fit: dict = field(default_factory=dict)
    inclusive_credit: bool = False


_REQUIRED = ("input", "output_dir", "players", "models")
_KNOWN = set(_REQUIRED) | {"lexicon", "sector_table", "sampling", "toxicity", "fit",
                           "inclusive_credit"}


def _resolve(base: Path, value, key: str, must_exist: bool = True):
    if value == BUNDLED:
        return BUNDLED
    if not isinstance(value, str) or not value:
        raise ConfigError(f"config key {key!r} must be a path or {BUNDLED!r}")
    p = Path(value)
    p = p if p.is_absolute() else base / p
    if must_exist and not p.exists():
        raise ConfigError(f"config key {key!r}: file {p} does not exist")
    return p


def load_config(source: str | os.PathLike | Mapping, base: str | os.PathLike | None = None
                ) -> PipelineConfig:
    """Read and validate a pipeline config (a JSON file or a mapping)."""
    if isinstance(source, Mapping):
        raw = dict(source)
        base_dir = Path(base or ".")
    else:
        path = Path(source)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        base_dir = Path(base) if base else path.parent
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    for key in _REQUIRED:
        if key not in raw:
            raise ConfigError(f"config is missing required key {key!r}")
    unknown = set(raw) - _KNOWN
    if unknown:
        raise ConfigError("unknown config key(s): " + ", ".join(sorted(unknown)))
    if not isinstance(raw["models"], dict) or not raw["models"]:
        raise ConfigError("config key 'models' must map model names to files")
    model_paths = {}
    for name, value in raw["models"].items():
        if value == BUNDLED and name not in models.MODELS:
            raise ConfigError(f"config key 'models.{name}': no bundled model of that name")
        model_paths[name] = _resolve(base_dir, value, f"models.{name}")
    out_dir = raw["output_dir"]
    if not isinstance(out_dir, str) or not out_dir:
        raise ConfigError("config key 'output_dir' must be a path")
    return PipelineConfig(
        base=base_dir,
        input=_resolve(base_dir, raw["input"], "input"),
        output_dir=Path(out_dir) if Path(out_dir).is_absolute() else base_dir / out_dir,
        players=_resolve(base_dir, raw["players"], "players"),
        models=model_paths,
        lexicon=_resolve(base_dir, raw.get("lexicon", BUNDLED), "lexicon"),
        sector_table=_resolve(base_dir, raw.get("sector_table", BUNDLED), "sector_table"),
        sampling=raw.get("sampling"),
        toxicity=dict(raw.get("toxicity") or {}),
        fit=dict(raw.get("fit") or {}),
        inclusive_credit=bool(raw.get("inclusive_credit", False)),
    )


# --------------------------------------------------------------------------
# run


@dataclass
class PipelineResult:
    output_dir: Path
    artifacts: dict[str, Path]
    clean_report: ingest.CleanReport
    fits: dict[str, object]


def _write_text(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8", newline="\n")
    return path


def _model_source(name: str, value) -> tuple[str, str]:
    if value == BUNDLED:
        return models.model_text(name), models.model_mode(name)
    text = Path(value).read_text(encoding="utf-8")
    mode = models.model_mode(name) if name in models.MODELS else "explicit"
    return text, mode


def _policy(cfg: Mapping) -> toxicity.RateLimitPolicy:
    return toxicity.RateLimitPolicy(
        max_requests_per_second=float(cfg.get("rate", 1.0)),
        max_retries=int(cfg.get("max_retries", 3)),
        backoff_initial=float(cfg.get("backoff_initial", 1.0)),
        backoff_multiplier=float(cfg.get("backoff_multiplier", 2.0)),
        request_timeout=float(cfg.get("request_timeout", 30.0)),
        workers=int(cfg.get("workers", 1)),
    )


def run_pipeline(config: PipelineConfig, *, mock_url: str | None = None,
                 api_key: str | None = None) -> PipelineResult:
    """Execute every stage, writing artifacts under ``config.output_dir``.

    ``mock_url`` overrides the toxicity endpoint.  With ``"mock": true`` in
    the toxicity section and no URL, an in-process mock server is started.
    """
    from .sem import fit as sem_fit

    out = config.output_dir
    out.mkdir(parents=True, exist_ok=True)
    paths = {k: out / v for k, v in ARTIFACTS.items()}
    stage = "ingest"
    mock_server = None
    try:
        records = ingest.read_reviews(config.input)
        if config.sampling is not None:
            s = dict(config.sampling)
            quotas = {int(k): int(v) for k, v in s.pop("quotas", {}).items()} or None
            kwargs = {"quotas": quotas} if quotas else {}
            design = ingest.SamplingDesign(
                **kwargs, seed=s.pop("seed", None),
                allow_deficient=bool(s.pop("allow_deficient", False)),
                **({"sort_orders": tuple(s.pop("sort_orders"))} if "sort_orders" in s else {}))
            if s:
                raise ConfigError("unknown sampling key(s): " + ", ".join(sorted(s)))
            records = ingest.balance_sample(records, design)

        stage = "sentiment"
        if config.lexicon == BUNDLED:
            lex = default_lexicon()
        else:
            with open(config.lexicon, encoding="utf-8") as fh:
                lex = load_lexicon(fh)
        records = enrich_sentiment(records, lex)
        with paths["sentiment"].open("w", encoding="utf-8", newline="") as fh:
            ingest.serialize_reviews(records, fh)

        stage = "toxicity"
        tcfg = config.toxicity
        url = mock_url or tcfg.get("url")
        if url is None and tcfg.get("mock"):
            mock_server = toxicity.MockToxicityServer().start()
            url = mock_server.url
        is_mock = bool(mock_url or tcfg.get("mock"))
        url = url or toxicity.DEFAULT_URL
        key = api_key or tcfg.get("api_key") or os.environ.get(toxicity.API_KEY_ENV)
        if not key:
            key = "mock-key" if is_mock else toxicity.credentials_from_env()
        policy = _policy(tcfg)
        with toxicity.ToxicityClient(key, policy, url) as client:
            records = enrich_toxicity(records, client, paths["checkpoint"])
        with paths["toxicity"].open("w", encoding="utf-8", newline="") as fh:
            ingest.serialize_reviews(records, fh)

        stage = "srr"
        if config.sector_table == BUNDLED:
            sectors = ingest.default_sector_table()
        else:
            with open(config.sector_table, encoding="utf-8") as fh:
                sectors = ingest.load_sector_table(fh)
        with open(config.players, encoding="utf-8", newline="") as fh:
            players = srr.read_players(fh)
        srr_values = srr.srr_by_sector(players, config.inclusive_credit)
        with paths["srr"].open("w", encoding="utf-8", newline="") as fh:
            srr.write_srr(srr_values, fh)
        enriched = join_enriched(records, sectors, srr_values)
        with paths["sectorwise"].open("w", encoding="utf-8", newline="") as fh:
            write_enriched(enriched, fh)

        stage = "clean"
        rows, report = ingest.clean_listwise(enriched)
        _write_text(paths["clean"], report.to_text() + "\n" + report.to_kv())
        with paths["analysis"].open("w", encoding="utf-8", newline="") as fh:
            ingest.write_analysis_rows(rows, fh)

        fcfg = config.fit
        data = ingest.analysis_matrix(rows)
        fits = {}
        for name, src in config.models.items():
            stage = f"fit:{name}"
            text, mode = _model_source(name, src)
            result = sem_fit(text, data, ANALYSIS_COLUMNS, mode=mode,
                             divisor=fcfg.get("divisor", "n"),
                             multiplier=fcfg.get("multiplier", "n-1"),
                             case_insensitive=bool(fcfg.get("case_insensitive", False)),
                             bootstrap_B=int(fcfg.get("bootstrap", 0)),
                             seed=int(fcfg.get("seed", 0)))
            fits[name] = result
            paths[f"fit:{name}"] = _write_text(out / f"fit_{name}.txt", result.summary())
            paths[f"machine:{name}"] = _write_text(out / f"fit_{name}.tsv", result.machine())
    except toxicity.CredentialError:
        raise
    except ConfigError:
        raise
    except Exception as exc:
        raise StageError(stage, exc) from exc
    finally:
        if mock_server is not None:
            mock_server.stop()
    return PipelineResult(out, paths, report, fits)
