"""Review CSV ingestion, balanced sampling, sector coding and listwise cleaning."""
from __future__ import annotations

import csv
import io
import math
import warnings
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from typing import Iterable, Mapping, Sequence, TextIO

import numpy as np

__all__ = [
    "SchemaError",
    "RowValidationError",
    "InputError",
    "SamplingError",
    "UnknownAppError",
    "ReviewRecord",
    "EnrichedRecord",
    "AnalysisRow",
    "SamplingDesign",
    "CleanReport",
    "SECTOR_CODES",
    "REVIEW_COLUMNS",
    "MANDATORY_COLUMNS",
    "MISSING_REASONS",
    "parse_reviews",
    "read_reviews",
    "serialize_reviews",
    "balance_sample",
    "load_sector_table",
    "default_sector_table",
    "code_sector",
    "clean_listwise",
    "ANALYSIS_COLUMNS",
    "analysis_matrix",
    "write_analysis_rows",
]


class SchemaError(ValueError):
    """A mandatory column is absent."""


class RowValidationError(ValueError):
    def __init__(self, message: str, row: int):
        super().__init__(f"row {row}: {message}")
        self.row = row


class InputError(ValueError):
    """The input could not be decoded."""


class SamplingError(ValueError):
    def __init__(self, deficient: list[tuple[str, str, int, int, int]]):
        cells = "; ".join(f"{app}/{order}/score={s}: have {have}, need {need}"
                          for app, order, s, have, need in deficient)
        super().__init__("insufficient rows for cell(s): " + cells)
        self.deficient = deficient


class UnknownAppError(KeyError):
    pass


SECTOR_CODES = {"service": 1, "pharma": 2, "travel": 3}

REVIEW_COLUMNS = [
    "reviewId", "userName", "userImage", "content", "score", "thumbsUpCount",
    "reviewCreatedVersion", "at", "replyContent", "repliedAt", "sortOrder", "appId",
]
MANDATORY_COLUMNS = ["content", "score", "thumbsUpCount", "appId"]

SORT_ORDERS = ("relevant", "newest")
_SORT_ALIASES = {"relevant": "relevant", "most_relevant": "relevant", "most relevant": "relevant",
                 "newest": "newest"}

MISSING_REASONS = ("api_error", "unsupported_language", "empty_text", "timeout")


@dataclass(frozen=True)
class ReviewRecord:
    reviewId: str
    content: str
    score: int
    thumbsUpCount: int
    appId: str
    sortOrder: str = "relevant"
    extra: tuple[tuple[str, str], ...] = ()

    def extras(self) -> dict[str, str]:
        return dict(self.extra)


@dataclass(frozen=True)
class EnrichedRecord:
    review: ReviewRecord
    commentSentiment: float
    commentToxicity: float | None
    serviceCluster: int
    serviceRelativeRating: float | None
    missing_reason: str | None = None

    def missing(self) -> list[str]:
        """Names of model variables with no value, each with a reason."""
        out = []
        if self.commentToxicity is None:
            out.append(f"commentToxicity:{self.missing_reason or 'api_error'}")
        if self.serviceRelativeRating is None:
            out.append("serviceRelativeRating:no_rating")
        if self.commentSentiment is None or (isinstance(self.commentSentiment, float)
                                             and math.isnan(self.commentSentiment)):
            out.append("commentSentiment:not_scored")
        return out


@dataclass(frozen=True)
class AnalysisRow:
    reviewerScore: int
    thumbsUpCount: int
    serviceCluster: int
    commentSentiment: float
    commentToxicity: float
    serviceRelativeRating: float


ANALYSIS_COLUMNS = [f.name for f in fields(AnalysisRow)]


# --------------------------------------------------------------------------
# CSV


def _decode(source) -> TextIO:
    if isinstance(source, (bytes, bytearray)):
        try:
            return io.StringIO(bytes(source).decode("utf-8-sig"))
        except UnicodeDecodeError as exc:
            raise InputError(f"input is not valid UTF-8: {exc}") from exc
    if isinstance(source, io.TextIOBase) or hasattr(source, "read"):
        data = source.read()
        if isinstance(data, bytes):
            return _decode(data)
        return io.StringIO(data)
    raise InputError("expected bytes or a readable stream")


def parse_reviews(source) -> list[ReviewRecord]:
    """Parse a review CSV dump (bytes or stream) into records.

    Columns other than the known review fields are kept in ``extra`` in
    header order; row order is preserved.  Row numbers in errors are
    1-based data rows (the header is row 0).
    """
    fh = _decode(source)
    reader = csv.DictReader(fh)
    header = reader.fieldnames or []
    for col in MANDATORY_COLUMNS:
        if col not in header:
            raise SchemaError(f"missing mandatory column {col!r}")
    passthrough = [c for c in header if c not in
                   ("reviewId", "content", "score", "thumbsUpCount", "appId", "sortOrder")]
    out: list[ReviewRecord] = []
    for n, row in enumerate(reader, start=1):
        try:
            score = int(float(row["score"]))
        except (TypeError, ValueError):
            raise RowValidationError(f"score {row['score']!r} is not a number", n) from None
        if score not in (1, 2, 3, 4, 5):
            raise RowValidationError(f"score {score} outside 1..5", n)
        try:
            thumbs = int(float(row["thumbsUpCount"] or 0))
        except ValueError:
            raise RowValidationError(f"thumbsUpCount {row['thumbsUpCount']!r} is not a number",
                                     n) from None
        if thumbs < 0:
            raise RowValidationError("thumbsUpCount is negative", n)
        app = (row["appId"] or "").strip()
        if not app:
            raise RowValidationError("empty appId", n)
        order_raw = (row.get("sortOrder") or "relevant").strip().lower()
        order = _SORT_ALIASES.get(order_raw)
        if order is None:
            raise RowValidationError(f"unknown sortOrder {order_raw!r}", n)
        out.append(ReviewRecord(
            reviewId=row.get("reviewId") or f"row{n}",
            content=row["content"] or "",
            score=score,
            thumbsUpCount=thumbs,
            appId=app,
            sortOrder=order,
            extra=tuple((c, row.get(c) or "") for c in passthrough),
        ))
    return out


def read_reviews(path) -> list[ReviewRecord]:
    with open(path, "rb") as fh:
        return parse_reviews(fh.read())


def serialize_reviews(records: Sequence[ReviewRecord], fh: TextIO | None = None) -> bytes:
    """Write records as CSV; ``parse_reviews`` of the result gives them back."""
    extra_cols: list[str] = []
    for r in records:
        for k, _ in r.extra:
            if k not in extra_cols:
                extra_cols.append(k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["reviewId", "content", "score", "thumbsUpCount", "appId", "sortOrder", *extra_cols])
    for r in records:
        ex = r.extras()
        w.writerow([r.reviewId, r.content, r.score, r.thumbsUpCount, r.appId, r.sortOrder,
                    *(ex.get(c, "") for c in extra_cols)])
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text.encode("utf-8")


# --------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class SamplingDesign:
    """Per (appId, sortOrder) quota of reviews for each star score."""

    quotas: Mapping[int, int] = field(default_factory=lambda: {1: 100, 2: 100, 3: 200,
                                                               4: 100, 5: 100})
    sort_orders: tuple[str, ...] = SORT_ORDERS
    seed: int | None = None
    allow_deficient: bool = False

    @property
    def per_app(self) -> int:
        return sum(self.quotas.values()) * len(self.sort_orders)


def balance_sample(records: Sequence[ReviewRecord],
                   design: SamplingDesign = SamplingDesign()) -> list[ReviewRecord]:
    """Select exactly the design quota from every (app, sortOrder, score) cell.

    Selection is first-k in input order unless ``design.seed`` is set, in
    which case each cell is sampled without replacement.  Output keeps
    input order.
    """
    cells: dict[tuple[str, str, int], list[int]] = defaultdict(list)
    apps: list[str] = []
    for i, r in enumerate(records):
        cells[(r.appId, r.sortOrder, r.score)].append(i)
        if r.appId not in apps:
            apps.append(r.appId)
    rng = np.random.default_rng(design.seed) if design.seed is not None else None
    chosen: list[int] = []
    deficient = []
    for app in apps:
        for order in design.sort_orders:
            for score, need in design.quotas.items():
                if need <= 0:
                    continue
                have = cells.get((app, order, score), [])
                if len(have) < need:
                    deficient.append((app, order, score, len(have), need))
                    chosen.extend(have)
                elif rng is None:
                    chosen.extend(have[:need])
                else:
                    chosen.extend(rng.choice(have, size=need, replace=False).tolist())
    if deficient:
        if not design.allow_deficient:
            raise SamplingError(deficient)
        warnings.warn(str(SamplingError(deficient)) + " (taking all available)",
                      RuntimeWarning, stacklevel=2)
    return [records[i] for i in sorted(chosen)]


# --------------------------------------------------------------------------
# sectors


def load_sector_table(fh: TextIO) -> dict[str, int]:
    """Parse ``appId<TAB or comma>sector`` lines; ``#`` comments and blanks ignored."""
    table: dict[str, int] = {}
    for n, line in enumerate(fh, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in (line.split("\t") if "\t" in line else line.split(","))]
        if len(parts) != 2:
            raise ValueError(f"sector table line {n}: expected two columns")
        app, sector = parts
        if app == "appId":
            continue
        if sector.lower() not in SECTOR_CODES:
            raise ValueError(f"sector table line {n}: unknown sector {sector!r}")
        table[app] = SECTOR_CODES[sector.lower()]
    return table


def default_sector_table() -> dict[str, int]:
    with resources.files("toxsem.data").joinpath("sectors.tsv").open(encoding="utf-8") as fh:
        return load_sector_table(fh)


def code_sector(app_id: str, lookup: Mapping[str, int] | None = None) -> int:
    """Ordinal sector code (1 service, 2 pharma, 3 travel) of an app."""
    table = default_sector_table() if lookup is None else lookup
    try:
        return table[app_id]
    except KeyError:
        raise UnknownAppError(f"app {app_id!r} is not in the sector table") from None


# --------------------------------------------------------------------------
# cleaning


@dataclass
class CleanReport:
    total: int
    kept: int
    dropped: int
    reasons: dict[str, int]

    def to_text(self) -> str:
        lines = [f"Listwise cleaning: {self.kept} of {self.total} rows kept, "
                 f"{self.dropped} dropped"]
        for k, v in sorted(self.reasons.items()):
            lines.append(f"  {k}: {v}")
        return "\n".join(lines) + "\n"

    def to_kv(self) -> str:
        lines = [f"total={self.total}", f"kept={self.kept}", f"dropped={self.dropped}"]
        lines += [f"reason[{k}]={v}" for k, v in sorted(self.reasons.items())]
        return "\n".join(lines) + "\n"


def clean_listwise(records: Iterable[EnrichedRecord]) -> tuple[list[AnalysisRow], CleanReport]:
    """Drop every record with a missing model variable."""
    kept: list[AnalysisRow] = []
    reasons: Counter[str] = Counter()
    total = 0
    for rec in records:
        total += 1
        miss = rec.missing()
        if miss:
            reasons.update(miss)
            continue
        kept.append(AnalysisRow(
            reviewerScore=rec.review.score,
            thumbsUpCount=rec.review.thumbsUpCount,
            serviceCluster=rec.serviceCluster,
            commentSentiment=rec.commentSentiment,
            commentToxicity=rec.commentToxicity,
            serviceRelativeRating=rec.serviceRelativeRating,
        ))
    report = CleanReport(total=total, kept=len(kept), dropped=total - len(kept),
                         reasons=dict(reasons))
    return kept, report


def analysis_matrix(rows: Sequence[AnalysisRow]) -> np.ndarray:
    return np.array([[float(getattr(r, c)) for c in ANALYSIS_COLUMNS] for r in rows]).reshape(
        len(rows), len(ANALYSIS_COLUMNS))


def write_analysis_rows(rows: Sequence[AnalysisRow], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(ANALYSIS_COLUMNS)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in asdict(r).values()])

