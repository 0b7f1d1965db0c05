"""Regenerate the bundled 600-row synthetic review corpus.

Six apps (two per sector), two sort orders, 50 reviews per (app, order):
14 with three stars and 9 with each other score.  Text is assembled from
phrase pools so that star score, sentiment words, toxic words and helpful
votes are correlated.  A few reviews are in Hindi (the mock toxicity
service rejects them) and two are empty, so listwise cleaning has
something to drop.

Run from the repository root::

    python fixtures/make_fixture.py
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

HERE = Path(__file__).resolve().parent
SEED = 20240611

APPS = [("Zomato", 1), ("Udemy", 1), ("practo", 2), ("1mg", 2), ("redbus", 3), ("goibibo", 3)]
ORDERS = ("relevant", "newest")
QUOTAS = {1: 9, 2: 9, 3: 14, 4: 9, 5: 9}

POSITIVE = [
    "great app", "very good service", "love the delivery speed", "excellent support team",
    "booking was quick and easy", "really helpful staff", "smooth experience overall",
    "highly recommended", "the interface is simple and clean", "refund came fast, thanks",
    "affordable prices and genuine products", "super convenient for daily use",
]
NEGATIVE = [
    "worst experience ever", "the app crashes every time", "refund not processed yet",
    "customer care is rude", "delivery was late again", "too many bugs after the update",
    "payment failed and money stuck", "totally useless support", "very disappointed",
    "orders get cancelled without reason", "it is slow and buggy", "wrong items delivered",
]
MIXED = [
    "good app but the support is slow", "prices are fine, however delivery is late",
    "not bad, but could be better", "the service is ok though the app hangs",
    "nice offers but refund takes weeks",
]
NEGATED = ["not good at all", "never works properly", "the app is not reliable",
           "support is not helpful", "i don't like the new update"]
TOXIC = [
    "these idiots cheated me", "pathetic fraud company", "total scam, stupid people",
    "useless garbage app", "what nonsense, shut this trash down", "damn idiots, hate them",
]
HINDI = ["बहुत अच्छा ऐप है", "सेवा बेकार है, पैसे वापस नहीं मिले", "डिलीवरी समय पर नहीं हुई",
         "ऐप ठीक है लेकिन धीमा है"]

PLAYERS = [
    ("AmazonIndia", "service", 4.3, 9_800_000), ("BigBasket", "service", 4.2, 820_000),
    ("WhiteHatJr", "service", 3.9, 150_000), ("Udemy", "service", 4.5, 1_000_000),
    ("Zomato", "service", 4.1, 4_500_000), ("Groww", "service", 4.4, 2_300_000),
    ("Netmeds", "pharma", 4.4, 310_000), ("medlife", "pharma", 4.0, 95_000),
    ("sastasundar", "pharma", 4.2, 38_000), ("practo", "pharma", 4.3, 1_100_000),
    ("apollo", "pharma", 4.1, 240_000), ("1mg", "pharma", 4.6, 1_400_000),
    ("makemytrip", "travel", 4.5, 1_600_000), ("oyo rooms", "travel", 4.2, 2_100_000),
    ("goibibo", "travel", 4.4, 980_000), ("redbus", "travel", 4.5, 1_250_000),
    ("Uber", "travel", 4.3, 13_000_000), ("booking", "travel", 4.6, 3_400_000),
]


def review_text(rng: np.random.Generator, score: int, cluster: int) -> str:
    p_pos = {1: 0.05, 2: 0.2, 3: 0.5, 4: 0.8, 5: 0.95}[score]
    parts = []
    for _ in range(int(rng.integers(1, 4))):
        u = rng.random()
        if u < 0.15:
            parts.append(MIXED[rng.integers(len(MIXED))])
        elif rng.random() < p_pos:
            parts.append(POSITIVE[rng.integers(len(POSITIVE))])
        elif rng.random() < 0.3:
            parts.append(NEGATED[rng.integers(len(NEGATED))])
        else:
            parts.append(NEGATIVE[rng.integers(len(NEGATIVE))])
    p_toxic = {1: 0.45, 2: 0.3, 3: 0.1, 4: 0.03, 5: 0.01}[score] + 0.05 * (cluster - 1)
    if rng.random() < p_toxic:
        parts.insert(int(rng.integers(len(parts) + 1)), TOXIC[rng.integers(len(TOXIC))])
    text = ". ".join(s[0].upper() + s[1:] for s in parts) + "."
    if rng.random() < 0.08:
        text = text.upper()
    return text


def build_rows(seed: int = SEED) -> list[dict]:
    rng = np.random.default_rng(seed)
    rows = []
    n = 0
    for app, cluster in APPS:
        for order in ORDERS:
            scores = [s for s, k in QUOTAS.items() for _ in range(k)]
            rng.shuffle(scores)
            for score in scores:
                n += 1
                lam = np.exp(0.6 + 0.45 * cluster + 0.35 * (3 - score) + rng.normal(0, 0.6))
                thumbs = int(rng.poisson(lam))
                u = rng.random()
                if u < 0.035:
                    text = HINDI[rng.integers(len(HINDI))]
                else:
                    text = review_text(rng, score, cluster)
                rows.append({"reviewId": f"r{n:04d}", "content": text, "score": score,
                             "thumbsUpCount": thumbs, "appId": app, "sortOrder": order,
                             "reviewCreatedVersion": f"{int(rng.integers(5, 12))}.{int(rng.integers(0, 10))}"})
    rows[17]["content"] = ""
    rows[433]["content"] = "   "
    return rows


def main() -> None:
    rows = build_rows()
    with open(HERE / "reviews_600.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    with open(HERE / "players.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["appId", "sector", "rating", "reviewerCount"])
        w.writerows(PLAYERS)
    config = {
        "input": "reviews_600.csv",
        "output_dir": "out",
        "players": "players.csv",
        "models": {k: "bundled" for k in ("path", "measurement", "total_effect", "full_sem")},
        "sampling": {"quotas": {str(k): v for k, v in QUOTAS.items()}},
        "toxicity": {"mock": True, "rate": 200, "max_retries": 2, "backoff_initial": 0.01,
                     "request_timeout": 5, "workers": 1},
        "fit": {"divisor": "n", "multiplier": "n-1", "seed": 0},
    }
    (HERE / "pipeline.json").write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
