"""Five-number summaries per group, the data behind a grouped boxplot.

Quartiles use linear interpolation between order statistics: the q-th
quantile of sorted values ``x[0..n-1]`` sits at position ``q * (n - 1)``.
For 1..5 that gives Q1 = 2, median = 3, Q3 = 4.
"""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence, TextIO

import numpy as np

__all__ = ["GroupStats", "boxplot_stats", "write_stats"]


@dataclass(frozen=True)
class GroupStats:
    group: tuple[str, ...]
    count: int
    min: float
    q1: float
    median: float
    q3: float
    max: float
    mean: float


def boxplot_stats(rows: Sequence[Mapping[str, str]], value: str,
                  by: Sequence[str] = ()) -> list[GroupStats]:
    """Summaries of column ``value`` for each distinct combination of ``by``.

    Groups appear in order of first occurrence.  Raises ``ValueError`` when
    there are no rows, a column is missing or a value is not numeric.
    """
    if not rows:
        raise ValueError("no rows to summarise (empty group set)")
    for col in (value, *by):
        if col not in rows[0]:
            raise ValueError(f"column {col!r} not found")
    groups: dict[tuple[str, ...], list[float]] = {}
    for n, row in enumerate(rows, start=1):
        raw = row[value]
        try:
            x = float(raw)
        except (TypeError, ValueError):
            raise ValueError(f"row {n}: {value}={raw!r} is not numeric") from None
        if np.isnan(x):
            continue
        groups.setdefault(tuple(str(row[c]) for c in by), []).append(x)
    if not groups:
        raise ValueError("no numeric values to summarise")
    out = []
    for key, xs in groups.items():
        a = np.asarray(xs)
        q1, med, q3 = np.quantile(a, [0.25, 0.5, 0.75], method="linear")
        out.append(GroupStats(key, a.size, float(a.min()), float(q1), float(med), float(q3),
                              float(a.max()), float(a.mean())))
    return out


def write_stats(stats: Sequence[GroupStats], by: Sequence[str], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow([*by, "count", "min", "q1", "median", "q3", "max", "mean"])
    for s in stats:
        d = asdict(s)
        w.writerow([*s.group, s.count, *(repr(d[k]) for k in
                                         ("min", "q1", "median", "q3", "max", "mean"))])
