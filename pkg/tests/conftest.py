from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from toxsem import models
from toxsem.sem import prepare
from toxsem.simulate import simulate, theta_from_mapping

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"
LISTINGS = Path(__file__).resolve().parent / "fixtures" / "listings"

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def bundled(key: str):
    """(table, ram, theta0) for a bundled model at its reference values."""
    table, ram = prepare(models.model_text(key), models.OBSERVED, models.model_mode(key))
    return table, ram, theta_from_mapping(ram, models.REFERENCE_THETA[key])


def simulated(key: str, N: int, seed: int) -> np.ndarray:
    """Data drawn from a bundled model, columns in ``models.OBSERVED`` order."""
    _, ram, theta = bundled(key)
    X = simulate(ram, theta, N, seed)
    order = [ram.observed.index(v) for v in models.OBSERVED]
    return X[:, order]


@pytest.fixture(scope="session")
def listings() -> dict[str, str]:
    return {p.stem: p.read_text(encoding="utf-8") for p in LISTINGS.glob("*.sem")}


def fixture_config(out_dir, **overrides):
    """The bundled 600-row pipeline config writing into ``out_dir``."""
    import json

    from toxsem.pipeline import load_config

    raw = json.loads((FIXTURES / "pipeline.json").read_text(encoding="utf-8"))
    raw.update(output_dir=str(out_dir), **overrides)
    return load_config(raw, base=FIXTURES)


# acceptance criterion -> (passed, seconds, detail), filled by test_acceptance
ACCEPTANCE: dict[int, tuple[str, bool, float, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, secs, detail = ACCEPTANCE[n]
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] {n:2d} {title} ({secs:.1f} s){detail}")
