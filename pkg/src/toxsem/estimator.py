"""Maximum-likelihood estimation for covariance structure models.

The discrepancy minimised is the normal-theory ML function::

    F(theta) = ln|Sigma| + tr(S Sigma^-1) - ln|S| - p

and the test statistic is ``multiplier * F`` with ``multiplier = N - 1`` by
default.  Minimisation uses Fisher scoring (Gauss-Newton with the expected
information as the curvature model) with a backtracking line search and
projection onto optional lower bounds for variance parameters.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import stats

from .dsl import Defined
from .ram import IdentificationError, NonAdmissibleError, RamMatrices, implied_cov_jacobian

__all__ = [
    "DataError",
    "EstimationError",
    "BootstrapError",
    "SampleMoments",
    "OptimizerOptions",
    "EstimationResult",
    "DefinedEstimate",
    "BootstrapResult",
    "sample_moments",
    "test_multiplier",
    "fml",
    "fml_gradient",
    "start_values",
    "optimize",
    "information_matrix",
    "standard_errors",
    "delta_defined",
    "bootstrap",
    "fit_baseline",
]


class DataError(ValueError):
    """Input data cannot be used for estimation."""


class EstimationError(RuntimeError):
    """The optimiser could not produce an admissible solution."""


class BootstrapError(RuntimeError):
    """Too many bootstrap replicates failed."""


@dataclass
class SampleMoments:
    S: np.ndarray
    names: list[str]
    N: int
    divisor: str = "n"

    @property
    def p(self) -> int:
        return len(self.names)

    def subset(self, names: Sequence[str]) -> "SampleMoments":
        """Moments restricted and reordered to ``names``."""
        missing = [n for n in names if n not in self.names]
        if missing:
            raise DataError(f"data lacks columns: {', '.join(missing)}")
        idx = [self.names.index(n) for n in names]
        return SampleMoments(self.S[np.ix_(idx, idx)], list(names), self.N, self.divisor)


def sample_moments(data, names: Sequence[str] | None = None, divisor: str = "n") -> SampleMoments:
    """Sample covariance matrix of ``data``.

    Parameters
    ----------
    data : array_like, DataFrame, or sequence of dataclass rows
        Observations in rows.
    names : sequence of str, optional
        Column names; taken from a DataFrame or the row dataclass if omitted.
    divisor : {"n", "n-1"}
        Denominator of the covariance.
    """
    if divisor not in ("n", "n-1"):
        raise ValueError("divisor must be 'n' or 'n-1'")
    X, cols = _as_matrix(data, names)
    N = X.shape[0]
    if N < 2:
        raise DataError(f"need at least 2 rows, got {N}")
    Xc = X - X.mean(axis=0)
    S = Xc.T @ Xc / (N if divisor == "n" else N - 1)
    S = (S + S.T) / 2.0
    const = [c for c, v in zip(cols, np.diag(S)) if v == 0.0]
    if const:
        warnings.warn(f"constant column(s): {', '.join(const)}", RuntimeWarning, stacklevel=2)
    return SampleMoments(S, cols, N, divisor)


def _as_matrix(data, names) -> tuple[np.ndarray, list[str]]:
    if hasattr(data, "columns") and hasattr(data, "to_numpy"):
        cols = list(names) if names is not None else [str(c) for c in data.columns]
        return np.asarray(data[cols].to_numpy(), dtype=float), cols
    if isinstance(data, (list, tuple)) and data and hasattr(data[0], "__dataclass_fields__"):
        cols = list(names) if names is not None else list(data[0].__dataclass_fields__)
        return np.array([[float(getattr(r, c)) for c in cols] for r in data]), cols
    X = np.asarray(data, dtype=float)
    if X.ndim != 2:
        raise DataError("data must be two-dimensional")
    cols = list(names) if names is not None else [f"x{k + 1}" for k in range(X.shape[1])]
    if len(cols) != X.shape[1]:
        raise DataError("names do not match the number of columns")
    return X, cols


def test_multiplier(N: int, convention: str = "n-1") -> float:
    """Factor turning ``F`` into the test statistic."""
    if convention == "n-1":
        return float(N - 1)
    if convention == "n":
        return float(N)
    raise ValueError("convention must be 'n' or 'n-1'")


test_multiplier.__test__ = False  # keep pytest from collecting it


def _logdet_pd(M: np.ndarray) -> float:
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise NonAdmissibleError("matrix is not positive definite") from exc
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def fml(S: np.ndarray, Sigma: np.ndarray, p: int | None = None) -> float:
    """ML discrepancy between sample ``S`` and implied ``Sigma``."""
    S = np.asarray(S, dtype=float)
    Sigma = np.asarray(Sigma, dtype=float)
    p = S.shape[0] if p is None else p
    ld_sigma = _logdet_pd(Sigma)
    try:
        ld_s = _logdet_pd(S)
    except NonAdmissibleError as exc:
        raise DataError("sample covariance is not positive definite") from exc
    trace = float(np.trace(np.linalg.solve(Sigma, S)))
    return ld_sigma + trace - ld_s - p


def fml_gradient(ram: RamMatrices, S: np.ndarray, theta) -> tuple[float, np.ndarray]:
    """Value and analytic gradient ``tr[(Sigma^-1 - Sigma^-1 S Sigma^-1) dSigma]``."""
    sigma, dsig = implied_cov_jacobian(ram, theta)
    value = fml(S, sigma)
    Si = np.linalg.inv(sigma)
    W = Si - Si @ S @ Si
    grad = np.einsum("ij,kji->k", W, dsig)
    return value, grad


@dataclass
class OptimizerOptions:
    max_iter: int = 10000
    gtol: float = 1e-6
    ftol: float = 1e-10
    lower_bound_variances: bool = False
    start: np.ndarray | None = None


@dataclass
class DefinedEstimate:
    estimate: float
    se: float = float("nan")
    z: float = float("nan")
    pvalue: float = float("nan")


@dataclass
class EstimationResult:
    names: list[str]
    theta_hat: np.ndarray
    converged: bool
    iterations: int
    fml_value: float
    gradient: np.ndarray
    message: str = ""
    vcov: np.ndarray | None = None
    se: np.ndarray | None = None
    z: np.ndarray | None = None
    pvalues: np.ndarray | None = None
    defined: dict[str, DefinedEstimate] = field(default_factory=dict)

    def estimates(self) -> dict[str, float]:
        return dict(zip(self.names, self.theta_hat.tolist()))


def _indicators(ram: RamMatrices, f: int) -> tuple[int | None, list[int]]:
    """Marker (fixed loading) and free indicators of latent ``f``."""
    n_obs = ram.n_observed
    marker = next((a for a in range(n_obs) if ram.A[a, f] != 0.0
                   and not any(("A", a, f) in cs for cs in ram.param_map)), None)
    free = [r for cs in ram.param_map for m, r, c in cs if m == "A" and c == f and r < n_obs]
    return marker, free


def start_values(ram: RamMatrices, moments: SampleMoments) -> np.ndarray:
    """Admissible starting values.

    Regressions and covariances start at 0 and observed variances at half
    the observed variance.  Free loadings of a latent with a marker
    indicator ``m`` start at ``s_jk / s_mk`` for another indicator ``k``
    (1 when no usable triad exists); the latent variance starts at
    ``s_mj s_mk / s_jk`` from the first indicator triad.
    """
    S = moments.S
    obs_var = np.diag(S)
    n_obs = ram.n_observed
    theta = np.zeros(ram.n_params)
    loading: dict[tuple[int, int], float] = {}
    lat_var: dict[int, float] = {}
    for f in range(n_obs, len(ram.variables)):
        marker, free = _indicators(ram, f)
        if marker is None:
            continue
        scale = ram.A[marker, f]
        lat_var[f] = 0.5 * obs_var[marker] / scale ** 2
        for j in free:
            others = [k for k in free if k != j]
            k = others[0] if others else None
            if k is not None and abs(S[marker, k]) > 1e-12 * np.sqrt(obs_var[marker] * obs_var[k]):
                loading[(j, f)] = scale * S[j, k] / S[marker, k]
            else:
                loading[(j, f)] = 1.0
        if len(free) >= 2:
            j, k = free[0], free[1]
            if S[j, k] != 0.0:
                v = S[marker, j] * S[marker, k] / S[j, k] / scale ** 2
                if 0.0 < v < obs_var[marker] / scale ** 2:
                    lat_var[f] = v
    for k, cells in enumerate(ram.param_map):
        mat, i, j = cells[0]
        if mat == "S" and i == j:
            if i < n_obs:
                v = 0.5 * obs_var[i]
            else:
                v = lat_var.get(i, 0.05)
            theta[k] = v if v > 0 else 0.05
        elif mat == "A" and (i, j) in loading:
            theta[k] = loading[(i, j)]
        elif mat == "A" and j >= n_obs and i < n_obs:
            theta[k] = 1.0
    return theta


def _project(theta: np.ndarray, lower: np.ndarray) -> np.ndarray:
    return np.maximum(theta, lower)


def optimize(ram: RamMatrices, moments: SampleMoments,
             options: OptimizerOptions | None = None) -> EstimationResult:
    """Minimise the ML discrepancy over the free parameters of ``ram``.

    Returns an :class:`EstimationResult` with ``converged`` False (and the
    last iterate) when the iteration limit is hit or the line search stalls.
    Raises :class:`EstimationError` if the starting point is not admissible.
    """
    opts = options or OptimizerOptions()
    S = moments.S
    if ram.observed != moments.names:
        raise DataError("moments are not ordered like the model's observed variables")
    theta = np.array(opts.start if opts.start is not None else start_values(ram, moments),
                     dtype=float)
    lower = np.full(ram.n_params, -np.inf)
    if opts.lower_bound_variances:
        lower[ram.variance_mask()] = 0.0
        theta = _project(theta, lower)
    try:
        f, g = fml_gradient(ram, S, theta)
    except NonAdmissibleError as exc:
        raise EstimationError(f"starting values are not admissible: {exc}") from exc

    converged = False
    message = "iteration limit reached"
    it = 0
    for it in range(1, opts.max_iter + 1):
        free = ~((theta <= lower) & (g > 0))
        if np.max(np.abs(g[free]), initial=0.0) <= opts.gtol:
            converged, message = True, "gradient tolerance reached"
            it -= 1
            break
        M = information_matrix(ram, theta)[np.ix_(free, free)]
        step = np.zeros_like(theta)
        try:
            step[free] = -np.linalg.solve(M, g[free])
        except np.linalg.LinAlgError:
            step[free] = -np.linalg.lstsq(M, g[free], rcond=None)[0]
        if not np.all(np.isfinite(step)) or g @ step >= 0:
            step = -g * np.where(free, 1.0, 0.0)
        alpha = 1.0
        accepted = False
        while alpha > 1e-12:
            cand = _project(theta + alpha * step, lower)
            try:
                fc, gc = fml_gradient(ram, S, cand)
            except NonAdmissibleError:
                alpha *= 0.5
                continue
            if fc <= f + 1e-4 * alpha * min(g @ step, 0.0) or fc <= f:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            message = "line search failed to decrease the discrepancy"
            break
        df_rel = abs(f - fc) / max(abs(f), 1.0)
        theta, f, g = cand, fc, gc
        if df_rel <= opts.ftol:
            free = ~((theta <= lower) & (g > 0))
            if np.max(np.abs(g[free]), initial=0.0) <= opts.gtol:
                converged, message = True, "gradient tolerance reached"
                break
            if df_rel == 0.0 and alpha < 1e-6:
                message = "no further progress possible"
                break
    if converged and ram.n_params:
        neg = [n for n, v, var in zip(ram.param_names, theta, ram.variance_mask())
               if var and v < 0]
        if neg:
            warnings.warn("negative variance estimate(s): " + ", ".join(neg),
                          RuntimeWarning, stacklevel=2)
    return EstimationResult(names=list(ram.param_names), theta_hat=theta, converged=converged,
                            iterations=it, fml_value=f, gradient=g, message=message)


def information_matrix(ram: RamMatrices, theta, S: np.ndarray | None = None,
                       method: str = "expected") -> np.ndarray:
    """Unit information for ``F``: ``tr(Sigma^-1 dSigma_k Sigma^-1 dSigma_l)``.

    With ``method="observed"`` the Hessian of ``F`` is returned instead,
    obtained by central differences of the analytic gradient (requires ``S``).
    Either way the per-observation information is half this matrix.
    """
    theta = np.asarray(theta, dtype=float)
    if method == "expected":
        sigma, dsig = implied_cov_jacobian(ram, theta)
        Si = np.linalg.inv(sigma)
        T = np.einsum("ij,kjl->kil", Si, dsig)
        return np.einsum("kij,lji->kl", T, T)
    if method == "observed":
        if S is None:
            raise ValueError("observed information needs the sample covariance")
        n = theta.size
        H = np.zeros((n, n))
        for k in range(n):
            h = 1e-5 * max(1.0, abs(theta[k]))
            e = np.zeros(n)
            e[k] = h
            gp = fml_gradient(ram, S, theta + e)[1]
            gm = fml_gradient(ram, S, theta - e)[1]
            H[:, k] = (gp - gm) / (2 * h)
        return (H + H.T) / 2.0
    raise ValueError("method must be 'expected' or 'observed'")


def standard_errors(result: EstimationResult, ram: RamMatrices, moments: SampleMoments,
                    method: str = "expected", multiplier: str = "n-1"
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Covariance matrix and standard errors of the estimates.

    ``vcov = (multiplier / 2 * I)^-1`` where ``I`` comes from
    :func:`information_matrix`.  Also fills ``se``, ``z`` and two-sided
    normal p-values on ``result``.

    Raises
    ------
    IdentificationError
        If the information matrix is singular; the message names the
        parameters spanning its null space.
    """
    M = information_matrix(ram, result.theta_hat, moments.S, method)
    info = 0.5 * test_multiplier(moments.N, multiplier) * M
    w, V = np.linalg.eigh(info)
    tol = max(w.max(initial=0.0), 1e-300) * 1e-10
    if w.size and w.min() <= tol:
        null = V[:, w <= tol]
        involved = [ram.param_names[k] for k in range(len(w))
                    if np.max(np.abs(null[k])) > 1e-3]
        raise IdentificationError(
            "information matrix is singular; not locally identified in: " + ", ".join(involved))
    vcov = np.linalg.inv(info)
    vcov = (vcov + vcov.T) / 2.0
    se = np.sqrt(np.clip(np.diag(vcov), 0.0, None))
    result.vcov = vcov
    result.se = se
    with np.errstate(divide="ignore", invalid="ignore"):
        result.z = result.theta_hat / se
    result.pvalues = 2.0 * stats.norm.sf(np.abs(result.z))
    return vcov, se


def _defined_values(defined: Sequence[Defined], values: Mapping[str, float],
                    grads: Mapping[str, np.ndarray], n: int
                    ) -> dict[str, tuple[float, np.ndarray]]:
    env: dict[str, tuple[float, np.ndarray]] = {k: (float(values[k]), grads[k]) for k in values}
    out: dict[str, tuple[float, np.ndarray]] = {}
    for d in defined:
        total = 0.0
        gtot = np.zeros(n)
        for prod in d.expr:
            try:
                parts = [env[name] for name in prod]
            except KeyError as exc:
                raise EstimationError(f"{d.name}: label {exc.args[0]!r} was not estimated") from None
            vals = [v for v, _ in parts]
            pv = float(np.prod(vals))
            for i, (_, gi) in enumerate(parts):
                others = float(np.prod(vals[:i] + vals[i + 1:]))
                gtot = gtot + others * gi
            total += pv
        env[d.name] = out[d.name] = (total, gtot)
    return out


def delta_defined(defined: Sequence[Defined], theta, names: Sequence[str],
                  vcov: np.ndarray | None = None,
                  fixed: Mapping[str, float] | None = None) -> dict[str, DefinedEstimate]:
    """Point estimates and delta-method standard errors of defined parameters.

    Parameters
    ----------
    defined : sequence of Defined
        In dependency order; later entries may use earlier names.
    theta, names : estimated free parameters and their names (labels).
    vcov : covariance of ``theta``; without it only estimates are returned.
    fixed : labels bound to fixed (non-estimated) values.
    """
    theta = np.asarray(theta, dtype=float)
    n = theta.size
    eye = np.eye(n)
    values = {nm: theta[k] for k, nm in enumerate(names)}
    grads = {nm: eye[k] for k, nm in enumerate(names)}
    for nm, v in (fixed or {}).items():
        values.setdefault(nm, v)
        grads.setdefault(nm, np.zeros(n))
    out: dict[str, DefinedEstimate] = {}
    for name, (val, g) in _defined_values(defined, values, grads, n).items():
        if vcov is None:
            out[name] = DefinedEstimate(val)
            continue
        se = float(np.sqrt(max(g @ vcov @ g, 0.0)))
        z = val / se if se > 0 else float("nan")
        p = float(2.0 * stats.norm.sf(abs(z))) if se > 0 else float("nan")
        out[name] = DefinedEstimate(val, se, z, p)
    return out


@dataclass
class BootstrapResult:
    B: int
    n_ok: int
    n_failed: int
    se: dict[str, float]
    defined_se: dict[str, float]
    estimates: np.ndarray
    note: str = ""


def bootstrap(data: np.ndarray, refit: Callable[[np.ndarray], tuple[np.ndarray, dict[str, float]] | None],
              names: Sequence[str], B: int, seed: int, workers: int = 1) -> BootstrapResult:
    """Naive nonparametric bootstrap standard errors.

    ``refit(resample)`` returns ``(theta_hat, defined_values)`` or ``None``
    for a non-converged replicate.  Each replicate draws from its own
    stream spawned from ``seed``, so ``workers`` never changes the output.
    """
    if B < 1:
        raise ValueError("B must be at least 1")
    data = np.asarray(data, dtype=float)
    N = data.shape[0]
    seqs = np.random.SeedSequence(seed).spawn(B)

    def one(b: int):
        rng = np.random.default_rng(seqs[b])
        idx = rng.integers(0, N, size=N)
        try:
            return refit(data[idx])
        except (EstimationError, NonAdmissibleError, DataError, np.linalg.LinAlgError):
            return None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reps = list(pool.map(one, range(B)))
    else:
        reps = [one(b) for b in range(B)]
    ok = [r for r in reps if r is not None]
    failed = B - len(ok)
    if failed > B / 2:
        raise BootstrapError(f"{failed} of {B} bootstrap replicates did not converge")
    nan = float("nan")
    if len(ok) < 2:
        return BootstrapResult(B, len(ok), failed, {n: nan for n in names}, {},
                               np.empty((len(ok), len(names))),
                               note="not available: B too small for a standard deviation")
    est = np.array([r[0] for r in ok])
    se = dict(zip(names, est.std(axis=0, ddof=1).tolist()))
    dnames = list(ok[0][1])
    dvals = np.array([[r[1][k] for k in dnames] for r in ok]) if dnames else np.empty((len(ok), 0))
    dse = dict(zip(dnames, dvals.std(axis=0, ddof=1).tolist())) if dnames else {}
    note = f"{failed} replicate(s) dropped (not converged)" if failed else ""
    return BootstrapResult(B, len(ok), failed, se, dse, est, note)


def fit_baseline(moments: SampleMoments, multiplier: str = "n-1") -> tuple[float, int]:
    """Chi-square and df of the independence model (closed form)."""
    S = moments.S
    p = moments.p
    d = np.diag(S)
    if np.any(d <= 0):
        raise DataError("baseline needs positive variances")
    F = float(np.sum(np.log(d))) - _logdet_pd(S)
    return test_multiplier(moments.N, multiplier) * max(F, 0.0), p * (p - 1) // 2
