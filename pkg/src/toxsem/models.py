"""The four bundled review models and reference parameter values for simulation."""
from __future__ import annotations

from importlib import resources

OBSERVED = [
    "reviewerScore",
    "thumbsUpCount",
    "serviceCluster",
    "commentSentiment",
    "commentToxicity",
    "serviceRelativeRating",
]

# model key -> (file, lowering mode)
MODELS = {
    "path": ("path.sem", "explicit"),
    "measurement": ("measurement.sem", "auto"),
    "total_effect": ("total_effect.sem", "explicit"),
    "full_sem": ("full_sem.sem", "auto"),
}


def model_text(key: str) -> str:
    fname, _ = MODELS[key]
    return resources.files("toxsem.data.models").joinpath(fname).read_text(encoding="utf-8")


def model_mode(key: str) -> str:
    return MODELS[key][1]


_PATH = {
    "commentSentiment~reviewerScore": 0.16,
    "commentSentiment~thumbsUpCount": 0.004,
    "commentSentiment~serviceCluster": -0.03,
    "serviceRelativeRating~commentToxicity": -0.4,
    "serviceRelativeRating~commentSentiment": -0.05,
    "serviceRelativeRating~reviewerScore": 0.02,
    "commentToxicity~thumbsUpCount": 0.001,
    "commentToxicity~reviewerScore": -0.034,
    "reviewerScore~~reviewerScore": 2.0,
    "thumbsUpCount~~thumbsUpCount": 25.0,
    "serviceCluster~~serviceCluster": 0.67,
    "reviewerScore~~thumbsUpCount": -0.8,
    "reviewerScore~~serviceCluster": 0.05,
    "thumbsUpCount~~serviceCluster": 0.3,
    "commentSentiment~~commentSentiment": 0.12,
    "commentToxicity~~commentToxicity": 0.02,
    "serviceRelativeRating~~serviceRelativeRating": 0.3,
    "commentSentiment~~commentToxicity": -0.01,
}

_LABELS = {
    "commentSentiment~reviewerScore": "a",
    "serviceRelativeRating~commentSentiment": "b",
    "serviceRelativeRating~reviewerScore": "c",
    "commentToxicity~reviewerScore": "d",
    "serviceRelativeRating~commentToxicity": "e",
}

_MEASUREMENT = {
    "sectorEffect=~thumbsUpCount": -2.5,
    "sectorEffect=~serviceCluster": 0.3,
    "productSentiment=~commentToxicity": -0.2,
    "productSentiment=~serviceRelativeRating": 0.8,
    "reviewerScore~~reviewerScore": 1.2,
    "thumbsUpCount~~thumbsUpCount": 20.0,
    "serviceCluster~~serviceCluster": 0.5,
    "commentSentiment~~commentSentiment": 0.1,
    "commentToxicity~~commentToxicity": 0.02,
    "serviceRelativeRating~~serviceRelativeRating": 0.25,
    "sectorEffect~~sectorEffect": 0.8,
    "productSentiment~~productSentiment": 0.15,
    "sectorEffect~~productSentiment": 0.1,
}

_FULL = {k: v for k, v in _MEASUREMENT.items() if k != "sectorEffect~~productSentiment"}
_FULL["productSentiment~sectorEffect"] = 0.2
_FULL["productSentiment~~productSentiment"] = 0.15 - 0.2 ** 2 * 0.8

REFERENCE_THETA = {
    "path": _PATH,
    "measurement": _MEASUREMENT,
    "total_effect": {_LABELS.get(k, k): v for k, v in _PATH.items()},
    "full_sem": _FULL,
}
