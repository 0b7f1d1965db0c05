"""Sector-wise weighted player rating (serviceRelativeRating).

For the ``n`` players of one sector::

    srr_i = (R_p * R_c)_i / ((1/10) * sum_k (R_p * R_c)_k)

where ``R_p`` is the overall store rating and ``R_c`` the reviewer credit
(2 for more than a million reviewers, else 1).  The 1/10 normaliser makes
the values of a sector sum to 10.
"""
from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, TextIO

from .ingest import SECTOR_CODES

__all__ = [
    "MILLION",
    "PlayerRating",
    "reviewer_credit",
    "compute_srr",
    "srr_by_sector",
    "read_players",
    "write_srr",
]

MILLION = 1_000_000


def reviewer_credit(reviewer_count: int, inclusive: bool = False) -> int:
    """2 for strictly more than a million reviewers, else 1.

    ``inclusive=True`` also gives 2 at exactly one million.
    """
    if reviewer_count < 0:
        raise ValueError("reviewer count must be non-negative")
    if reviewer_count > MILLION or (inclusive and reviewer_count == MILLION):
        return 2
    return 1


@dataclass(frozen=True)
class PlayerRating:
    appId: str
    rating: float
    reviewerCount: int
    sector: int | None = None

    def __post_init__(self):
        if not 1.0 <= self.rating <= 5.0:
            raise ValueError(f"{self.appId}: rating {self.rating} outside [1, 5]")
        if self.reviewerCount < 0:
            raise ValueError(f"{self.appId}: negative reviewer count")

    def credit(self, inclusive: bool = False) -> int:
        return reviewer_credit(self.reviewerCount, inclusive)


def compute_srr(players: Iterable[PlayerRating], inclusive: bool = False) -> dict[str, float]:
    """SRR for the players of a single sector, keyed by appId."""
    players = list(players)
    if not players:
        raise ValueError("at least one player is required")
    weights = {p.appId: p.rating * p.credit(inclusive) for p in players}
    total = sum(weights.values())
    assert total > 0, "ratings are at least 1, so the total is positive"
    denom = total / 10.0
    return {app: w / denom for app, w in weights.items()}


def srr_by_sector(players: Iterable[PlayerRating], inclusive: bool = False) -> dict[str, float]:
    """SRR computed separately within each sector."""
    groups: dict[int | None, list[PlayerRating]] = defaultdict(list)
    for p in players:
        groups[p.sector].append(p)
    out: dict[str, float] = {}
    for members in groups.values():
        out.update(compute_srr(members, inclusive))
    return out


def read_players(fh: TextIO) -> list[PlayerRating]:
    """Read ``appId, sector, rating, reviewerCount`` rows (header required)."""
    reader = csv.DictReader(fh)
    need = {"appId", "sector", "rating", "reviewerCount"}
    missing = need - set(reader.fieldnames or [])
    if missing:
        raise ValueError("player file lacks column(s): " + ", ".join(sorted(missing)))
    out = []
    for row in reader:
        sector = row["sector"].strip().lower()
        code = SECTOR_CODES[sector] if sector in SECTOR_CODES else int(sector)
        out.append(PlayerRating(row["appId"].strip(), float(row["rating"]),
                                int(float(row["reviewerCount"])), code))
    return out


def write_srr(values: dict[str, float], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["appId", "serviceRelativeRating"])
    for app, v in values.items():
        w.writerow([app, repr(v)])
