"""Multivariate-normal data from a model at a known parameter vector."""
from __future__ import annotations

from typing import Mapping

import numpy as np

from .ram import RamMatrices, implied_cov

__all__ = ["SimulationError", "theta_from_mapping", "simulate"]


class SimulationError(ValueError):
    pass


def theta_from_mapping(ram: RamMatrices, values: Mapping[str, float]) -> np.ndarray:
    """Order a ``name -> value`` mapping like ``ram.param_names``.

    Names are labels or ``lhs op rhs`` strings with no spaces, e.g.
    ``"y~x"`` or ``"x~~x"``.
    """
    missing = [n for n in ram.param_names if n not in values]
    if missing:
        raise SimulationError("no value for free parameter(s): " + ", ".join(missing))
    extra = [n for n in values if n not in ram.param_names]
    if extra:
        raise SimulationError("unknown parameter name(s): " + ", ".join(extra))
    return np.array([float(values[n]) for n in ram.param_names])


def simulate(ram: RamMatrices, theta, N: int, seed: int) -> np.ndarray:
    """Draw ``N`` rows with covariance ``Sigma(theta)`` and zero means.

    Seeded standard normals are mapped through the lower Cholesky factor.
    """
    if N < 1:
        raise SimulationError("N must be at least 1")
    sigma = implied_cov(ram, theta)
    try:
        L = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise SimulationError("implied covariance is not positive definite") from exc
    z = np.random.default_rng(seed).standard_normal((N, sigma.shape[0]))
    return z @ L.T
