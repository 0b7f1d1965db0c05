"""Sentence-level lexicon sentiment with valence shifters.

Each sentence is scored as the sum of its shifted polarity weights divided
by the square root of its word count, and a review scores the mean of its
sentences.  Around every polarized word a window of ``window_before`` words
before and ``window_after`` words after is inspected, without crossing a
comma:

* an odd number of negators flips the sign;
* each amplifier multiplies the weight by ``1 + amplifier_weight``;
* each de-amplifier multiplies it by ``max(0, 1 - amplifier_weight)``.

When a sentence contains an adversative conjunction ("but"), words after
the last one are up-weighted by ``1 + amplifier_weight`` and words before
it down-weighted by ``1 - amplifier_weight``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Mapping, TextIO

__all__ = [
    "SHIFTER_CLASSES",
    "COMMA",
    "Lexicon",
    "ReviewSentiment",
    "load_lexicon",
    "micro_lexicon",
    "default_lexicon",
    "split_sentences",
    "score_sentence",
    "score_review",
]

SHIFTER_CLASSES = ("negator", "amplifier", "deamplifier", "adversative")

# clause barrier kept in token lists; never counted as a word
COMMA = ","

# abbreviations whose trailing period does not end a sentence
_ABBREVIATIONS = frozenset({
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "etc", "inc", "ltd", "co",
    "e.g", "i.e", "approx", "no", "min", "max", "dept", "est", "rs",
})

_WORD_RE = re.compile(r"[a-z0-9]+(?:['’][a-z0-9]+)*")


@dataclass(frozen=True)
class Lexicon:
    polarity: Mapping[str, float]
    shifters: Mapping[str, str] = field(default_factory=dict)
    amplifier_weight: float = 0.8
    window_before: int = 4
    window_after: int = 2

    def __post_init__(self):
        bad = {w: v for w, v in self.polarity.items() if not -1.0 <= v <= 1.0}
        if bad:
            raise ValueError(f"polarity weights outside [-1, 1]: {bad}")
        classes = set(self.shifters.values()) - set(SHIFTER_CLASSES)
        if classes:
            raise ValueError(f"unknown shifter class(es): {sorted(classes)}")
        if self.window_before < 0 or self.window_after < 0:
            raise ValueError("window sizes must be non-negative")


@dataclass(frozen=True)
class ReviewSentiment:
    sentence_scores: tuple[float, ...]
    average: float


def load_lexicon(fh: TextIO, **kwargs) -> Lexicon:
    """Read ``token<TAB>weight`` or ``token<TAB>shifter-class`` lines.

    Blank lines and ``#`` comments are skipped.  Keyword arguments are
    passed on to :class:`Lexicon` (window sizes, amplifier weight).
    """
    polarity: dict[str, float] = {}
    shifters: dict[str, str] = {}
    for n, line in enumerate(fh, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t") if "\t" in line else line.split(",")
        if len(parts) != 2:
            raise ValueError(f"lexicon line {n}: expected two fields")
        token, value = parts[0].strip().lower(), parts[1].strip()
        if value in SHIFTER_CLASSES:
            if token in shifters and shifters[token] != value:
                raise ValueError(f"lexicon line {n}: {token!r} is in two shifter classes")
            shifters[token] = value
        else:
            polarity[token] = float(value)
    return Lexicon(polarity, shifters, **kwargs)


def _bundled(name: str) -> Lexicon:
    with resources.files("toxsem.data").joinpath(name).open(encoding="utf-8") as fh:
        return load_lexicon(fh)


def micro_lexicon() -> Lexicon:
    """Tiny lexicon used by the worked examples and tests."""
    return _bundled("micro_lexicon.tsv")


def default_lexicon() -> Lexicon:
    """General-purpose review lexicon shipped with the package."""
    return _bundled("review_lexicon.tsv")


def _sentence_spans(text: str) -> list[str]:
    out: list[str] = []
    start = 0
    for m in re.finditer(r"[.!?]+", text):
        end = m.end()
        if m.group() == ".":
            before = text[start:m.start()]
            last = re.search(r"([A-Za-z.]+)$", before)
            if last and last.group(1).lower().rstrip(".") in _ABBREVIATIONS:
                continue
            # no space after the period: "e.g", "2.5", "v1.2", "site.com"
            if end < len(text) and text[end].isalnum():
                continue
        out.append(text[start:end])
        start = end
    out.append(text[start:])
    return out


def split_sentences(text: str) -> list[list[str]]:
    """Split text into sentences of lowercased word tokens.

    Sentences end at ``.``, ``!`` or ``?`` (runs count once).  A lone
    period does not end a sentence after a known abbreviation ("Dr.",
    "etc.") or when a letter or digit follows it directly ("e.g", "2.5").
    Text after the last terminator forms a final sentence.  Commas are kept as ``","`` tokens
    so shifter windows can stop at them; other punctuation is dropped.
    """
    sentences: list[list[str]] = []
    for span in _sentence_spans(text):
        tokens: list[str] = []
        for piece in re.split(r"(,)", span.lower()):
            if piece == ",":
                if tokens and tokens[-1] != COMMA:
                    tokens.append(COMMA)
                continue
            tokens.extend(w.replace("’", "'") for w in _WORD_RE.findall(piece))
        while tokens and tokens[-1] == COMMA:
            tokens.pop()
        if any(t != COMMA for t in tokens):
            sentences.append(tokens)
    return sentences


def _clauses(tokens: list[str]) -> list[list[str]]:
    out: list[list[str]] = [[]]
    for t in tokens:
        if t == COMMA:
            out.append([])
        else:
            out[-1].append(t)
    return out


def score_sentence(tokens: list[str], lexicon: Lexicon) -> float:
    """Valence-shifted sentiment of one tokenized sentence."""
    words = [t for t in tokens if t != COMMA]
    if not words:
        return 0.0
    shifters = lexicon.shifters
    aw = lexicon.amplifier_weight
    adversatives = [i for i, w in enumerate(words) if shifters.get(w) == "adversative"]
    pivot = adversatives[-1] if adversatives else None

    total = 0.0
    pos = 0
    for clause in _clauses(tokens):
        for k, w in enumerate(clause):
            weight = lexicon.polarity.get(w)
            if weight is None or w in shifters:
                continue
            window = clause[max(0, k - lexicon.window_before):k] + \
                clause[k + 1:k + 1 + lexicon.window_after]
            kinds = [shifters.get(x) for x in window]
            value = weight
            if kinds.count("negator") % 2 == 1:
                value = -value
            value *= (1.0 + aw) ** kinds.count("amplifier")
            value *= max(0.0, 1.0 - aw) ** kinds.count("deamplifier")
            if pivot is not None:
                value *= (1.0 + aw) if pos + k > pivot else max(0.0, 1.0 - aw)
            total += value
        pos += len(clause)
    return total / math.sqrt(len(words))


def score_review(text: str, lexicon: Lexicon) -> ReviewSentiment:
    """Mean sentence score of a review; empty text scores 0."""
    scores = tuple(score_sentence(s, lexicon) for s in split_sentences(text or ""))
    avg = sum(scores) / len(scores) if scores else 0.0
    return ReviewSentiment(scores, avg)
