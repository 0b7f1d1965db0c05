"""One-call model fitting: parse, lower, build, estimate, infer, evaluate."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import fitstats
from .dsl import ModelAST, ParameterTable, lower, parse_model
from .estimator import (
    BootstrapResult,
    DataError,
    EstimationResult,
    OptimizerOptions,
    SampleMoments,
    bootstrap,
    delta_defined,
    fit_baseline,
    optimize,
    sample_moments,
    standard_errors,
    test_multiplier,
)
from .ram import RamMatrices, build_ram, count_df, implied_cov

__all__ = ["SemFit", "fit", "fit_moments", "prepare"]


@dataclass
class SemFit:
    table: ParameterTable
    ram: RamMatrices
    moments: SampleMoments
    result: EstimationResult
    df: int
    indices: fitstats.FitIndices | None
    sigma: np.ndarray
    options: dict = field(default_factory=dict)
    bootstrap: BootstrapResult | None = None

    @property
    def chisq(self) -> float:
        return self.indices.chisq if self.indices else float("nan")

    def estimates(self) -> dict[str, float]:
        return self.result.estimates()

    def summary(self) -> str:
        from .report import render_summary
        return render_summary(self)

    def machine(self) -> str:
        from .report import render_machine
        return render_machine(self)


def prepare(model: str | ModelAST, observed: Sequence[str], mode: str = "explicit",
            case_insensitive: bool = False) -> tuple[ParameterTable, RamMatrices]:
    """Parse (if needed), lower, and build the RAM matrices of ``model``."""
    ast = parse_model(model) if isinstance(model, str) else model
    table = lower(ast, mode, observed, case_insensitive=case_insensitive)
    count_df(table)
    return table, build_ram(table)


def _fixed_labels(table: ParameterTable) -> dict[str, float]:
    return {r.label: r.fixed_value for r in table.parameter_rows()
            if r.label and not r.free}


def fit_moments(table: ParameterTable, ram: RamMatrices, moments: SampleMoments, *,
                multiplier: str = "n-1", se: str | None = "expected",
                rmsea_denominator: str = "n-1",
                options: OptimizerOptions | None = None) -> SemFit:
    """Fit an already-built model to sample moments."""
    moments = moments.subset(ram.observed)
    df = count_df(table, moments.p)
    res = optimize(ram, moments, options)
    if se:
        standard_errors(res, ram, moments, method=se, multiplier=multiplier)
    res.defined = delta_defined(table.defined, res.theta_hat, ram.param_names, res.vcov,
                                _fixed_labels(table))
    sigma = implied_cov(ram, res.theta_hat)
    mult = test_multiplier(moments.N, multiplier)
    chisq, p = fitstats.chisq_test(res.fml_value, moments.N, df, mult)
    chisq_b, df_b = fit_baseline(moments, multiplier)
    ind = fitstats.fit_indices(chisq, df, p, chisq_b, df_b, moments.N, moments.S, sigma,
                               denominator=rmsea_denominator)
    return SemFit(table, ram, moments, res, df, ind, sigma,
                  options={"multiplier": multiplier, "se": se,
                           "divisor": moments.divisor})


def fit(model: str | ModelAST, data, names: Sequence[str] | None = None, *,
        mode: str = "explicit", divisor: str = "n", multiplier: str = "n-1",
        se: str | None = "expected", case_insensitive: bool = False,
        lower_bound_variances: bool = False, bootstrap_B: int = 0, seed: int = 0,
        workers: int = 1) -> SemFit:
    """Fit ``model`` to raw ``data`` (rows are observations).

    Parameters
    ----------
    model : str or ModelAST
        Model text or a parsed model.
    data : array_like or DataFrame
        Raw observations.
    names : column names when ``data`` is a plain array.
    mode : {"explicit", "auto"}
    divisor : {"n", "n-1"} covariance denominator.
    multiplier : {"n-1", "n"} factor applied to F for the test statistic.
    se : {"expected", "observed", None}
    bootstrap_B : number of naive bootstrap replicates (0 disables).
    """
    full = sample_moments(data, names, divisor)
    table, ram = prepare(model, full.names, mode, case_insensitive)
    opts = OptimizerOptions(lower_bound_variances=lower_bound_variances)
    result = fit_moments(table, ram, full, multiplier=multiplier, se=se, options=opts)
    if bootstrap_B:
        X = _raw_matrix(data, full.names)
        col_idx = [full.names.index(v) for v in ram.observed]
        fixed = _fixed_labels(table)
        start = result.result.theta_hat

        def refit(sample: np.ndarray):
            m = sample_moments(sample[:, col_idx], ram.observed, divisor)
            r = optimize(ram, m, OptimizerOptions(lower_bound_variances=lower_bound_variances,
                                                  start=start))
            if not r.converged:
                return None
            d = delta_defined(table.defined, r.theta_hat, ram.param_names, None, fixed)
            return r.theta_hat, {k: v.estimate for k, v in d.items()}

        result.bootstrap = bootstrap(X, refit, ram.param_names, bootstrap_B, seed, workers)
    return result


def _raw_matrix(data, names: Sequence[str]) -> np.ndarray:
    if hasattr(data, "columns"):
        return np.asarray(data[list(names)].to_numpy(), dtype=float)
    if isinstance(data, (list, tuple)) and data and hasattr(data[0], "__dataclass_fields__"):
        return np.array([[float(getattr(r, c)) for c in names] for r in data])
    X = np.asarray(data, dtype=float)
    if X.ndim != 2:
        raise DataError("data must be two-dimensional")
    return X
