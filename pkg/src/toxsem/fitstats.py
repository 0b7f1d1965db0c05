"""Fit indices: chi-square test, CFI, TLI, RMSEA with close-fit probability, SRMR."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

__all__ = [
    "FitIndices",
    "Thresholds",
    "chisq_test",
    "cfi_tli",
    "rmsea",
    "ncx2_sf",
    "srmr",
    "verdicts",
    "fit_indices",
    "fmt_p",
]

NA = float("nan")


def chisq_test(fml_value: float, N: int, df: int, multiplier: float | None = None
               ) -> tuple[float, float]:
    """Test statistic and its upper-tail p-value.

    ``multiplier`` defaults to ``N - 1``.  For ``df == 0`` the p-value is NaN
    (not applicable).
    """
    m = N - 1 if multiplier is None else multiplier
    chisq = max(m * fml_value, 0.0)
    if df == 0:
        return chisq, NA
    return chisq, float(stats.chi2.sf(chisq, df))


def cfi_tli(chisq: float, df: int, chisq_b: float, df_b: int) -> tuple[float, float]:
    """Comparative fit index (clamped to [0, 1]) and Tucker-Lewis index (unclamped)."""
    num = max(chisq - df, 0.0)
    den = max(chisq_b - df_b, chisq - df, 0.0)
    cfi = 1.0 if den == 0.0 else 1.0 - num / den
    cfi = min(max(cfi, 0.0), 1.0)
    if df == 0 or df_b == 0 or chisq_b / df_b == 1.0:
        tli = NA
    else:
        tli = (chisq_b / df_b - chisq / df) / (chisq_b / df_b - 1.0)
    return cfi, tli


def ncx2_sf(x: float, df: float, ncp: float, tol: float = 1e-14) -> float:
    """Upper tail of the noncentral chi-square distribution.

    Poisson-weighted sum of central chi-square tails,
    ``sum_j Pois(j; ncp/2) * Q(x; df + 2j)``.  Summation starts at the
    Poisson mode and walks outward in both directions; each side stops once
    the remaining Poisson mass (bounded by a tail of the Poisson cdf) is
    below ``tol``.  Since every ``Q`` is at most 1, the truncation error is
    bounded by the ignored Poisson mass.
    """
    if x <= 0:
        return 1.0
    lam = ncp / 2.0
    if lam == 0.0:
        return float(special.gammaincc(df / 2.0, x / 2.0))
    mode = int(math.floor(lam))

    def term(j: int) -> float:
        logw = -lam + j * math.log(lam) - math.lgamma(j + 1)
        return math.exp(logw) * float(special.gammaincc(df / 2.0 + j, x / 2.0))

    total = term(mode)
    # walk down
    j = mode - 1
    while j >= 0:
        total += term(j)
        if stats.poisson.cdf(j - 1, lam) < tol:
            break
        j -= 1
    # walk up
    j = mode + 1
    while True:
        total += term(j)
        if stats.poisson.sf(j, lam) < tol:
            break
        j += 1
    return min(total, 1.0)


def rmsea(chisq: float, df: int, N: int, denominator: str = "n-1") -> tuple[float, float]:
    """RMSEA and the probability that the population RMSEA is at most 0.05.

    Returns ``(nan, nan)`` when ``df == 0``.
    """
    if df <= 0:
        return NA, NA
    n = N - 1 if denominator == "n-1" else N
    value = math.sqrt(max(chisq - df, 0.0) / (df * n))
    pclose = ncx2_sf(chisq, df, df * n * 0.05 ** 2)
    return value, pclose


def srmr(S: np.ndarray, Sigma: np.ndarray) -> float:
    """Standardized root mean square residual over the lower triangle incl. diagonal."""
    S = np.asarray(S, dtype=float)
    Sigma = np.asarray(Sigma, dtype=float)
    ds, dm = np.diag(S), np.diag(Sigma)
    if np.any(ds <= 0) or np.any(dm <= 0):
        raise ValueError("srmr needs positive diagonals")
    rs = S / np.sqrt(np.outer(ds, ds))
    rm = Sigma / np.sqrt(np.outer(dm, dm))
    il = np.tril_indices(S.shape[0])
    return float(np.sqrt(np.mean((rs - rm)[il] ** 2)))


@dataclass(frozen=True)
class Thresholds:
    """Acceptance bands used for the verdicts (conventional cutoffs)."""

    cfi_min: float = 0.95
    tli_min: float = 0.95
    rmsea_max: float = 0.06
    srmr_max: float = 0.08


@dataclass
class FitIndices:
    chisq: float
    df: int
    pvalue: float
    baseline_chisq: float
    baseline_df: int
    cfi: float
    tli: float
    rmsea: float
    rmsea_pclose: float
    srmr: float
    chisq_df_ratio: float = NA
    verdicts: dict[str, str] = field(default_factory=dict)

    def as_dict(self) -> dict[str, float]:
        return {
            "chisq": self.chisq, "df": self.df, "pvalue": self.pvalue,
            "baseline_chisq": self.baseline_chisq, "baseline_df": self.baseline_df,
            "cfi": self.cfi, "tli": self.tli, "rmsea": self.rmsea,
            "rmsea_pclose": self.rmsea_pclose, "srmr": self.srmr,
            "chisq_df_ratio": self.chisq_df_ratio,
        }


def verdicts(ind: FitIndices, thresholds: Thresholds = Thresholds()) -> dict[str, str]:
    out: dict[str, str] = {}
    if ind.df == 0:
        out["model"] = "saturated - fit indices uninformative"
        return out
    if not math.isnan(ind.pvalue):
        sig = ind.pvalue < 0.05
        out["chisq"] = ("significant (expected for large N; not used for the verdict)"
                        if sig else "not significant")
    out["chisq_df"] = "ignored for large dataset"
    out["cfi"] = "good fit" if ind.cfi >= thresholds.cfi_min else "not good"
    if not math.isnan(ind.tli):
        out["tli"] = "good fit" if ind.tli >= thresholds.tli_min else "not good"
    if not math.isnan(ind.rmsea):
        out["rmsea"] = "good fit" if ind.rmsea <= thresholds.rmsea_max else "not good"
    out["srmr"] = "good fit" if ind.srmr < thresholds.srmr_max else "not good"
    return out


def fit_indices(chisq: float, df: int, pvalue: float, chisq_b: float, df_b: int, N: int,
                S: np.ndarray, Sigma: np.ndarray, denominator: str = "n-1",
                thresholds: Thresholds = Thresholds()) -> FitIndices:
    cfi, tli = cfi_tli(chisq, df, chisq_b, df_b)
    r, pclose = rmsea(chisq, df, N, denominator)
    ind = FitIndices(chisq=chisq, df=df, pvalue=pvalue, baseline_chisq=chisq_b,
                     baseline_df=df_b, cfi=cfi, tli=tli, rmsea=r, rmsea_pclose=pclose,
                     srmr=srmr(S, Sigma), chisq_df_ratio=chisq / df if df else NA)
    ind.verdicts = verdicts(ind, thresholds)
    return ind


def fmt_p(p: float, digits: int = 3) -> str:
    """Format a p-value with a ``0.000`` floor; NaN prints as ``NA``."""
    if p is None or math.isnan(p):
        return "NA"
    return f"{p:.{digits}f}"
