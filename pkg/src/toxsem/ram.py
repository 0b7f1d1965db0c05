"""RAM representation of a lowered model and the implied covariance."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dsl import ParameterTable, ParamRow

__all__ = [
    "RamConflictError",
    "NonAdmissibleError",
    "IdentificationError",
    "RamMatrices",
    "build_ram",
    "implied_cov",
    "implied_cov_jacobian",
    "count_df",
]


class RamConflictError(ValueError):
    """Two statements target the same matrix cell."""


class NonAdmissibleError(ArithmeticError):
    """The parameter vector is outside the admissible region."""


class IdentificationError(ValueError):
    """The model is not identified (by counting or locally)."""


@dataclass
class RamMatrices:
    """Matrices ``A`` (directed), ``S`` (symmetric), ``F`` (filter).

    ``A[i, j]`` holds the effect of variable ``j`` on variable ``i``.
    ``param_map[k]`` lists the ``(matrix, i, j)`` cells of free parameter
    ``k``; for ``S`` only the cell with ``i >= j`` is listed and the
    mirror is implied.
    """

    variables: list[str]
    n_observed: int
    A: np.ndarray
    S: np.ndarray
    F: np.ndarray
    param_names: list[str]
    param_map: list[list[tuple[str, int, int]]]
    param_rows: list[list[ParamRow]] = field(default_factory=list)

    @property
    def observed(self) -> list[str]:
        return self.variables[: self.n_observed]

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    def matrices(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return copies of ``A`` and ``S`` with ``theta`` filled in."""
        A = self.A.copy()
        S = self.S.copy()
        for k, cells in enumerate(self.param_map):
            for mat, i, j in cells:
                if mat == "A":
                    A[i, j] = theta[k]
                else:
                    S[i, j] = S[j, i] = theta[k]
        return A, S

    def variance_mask(self) -> np.ndarray:
        """Boolean per parameter: True where it sits on the diagonal of S."""
        return np.array([any(m == "S" and i == j for m, i, j in cells)
                         for cells in self.param_map], dtype=bool)

    def dump(self) -> str:
        """Matrix text for inspection."""
        names = self.variables
        out = []
        for title, M in (("A", self.A), ("S", self.S), ("F", self.F)):
            out.append(f"{title}:")
            rows = names if title != "F" else self.observed
            out.append(" " * 24 + " ".join(f"{c[:10]:>10}" for c in names))
            for r, row in zip(rows, M):
                out.append(f"{r[:23]:<24}" + " ".join(f"{v:10.4g}" for v in row))
        out.append("free parameters:")
        for name, cells in zip(self.param_names, self.param_map):
            out.append(f"  {name}: " + ", ".join(f"{m}[{names[i]},{names[j]}]"
                                                 for m, i, j in cells))
        return "\n".join(out)


def _cell(row: ParamRow, idx: dict[str, int]) -> tuple[str, int, int]:
    if row.op == "~":
        return "A", idx[row.lhs], idx[row.rhs]
    if row.op == "=~":
        return "A", idx[row.rhs], idx[row.lhs]
    i, j = idx[row.lhs], idx[row.rhs]
    return "S", max(i, j), min(i, j)


def build_ram(table: ParameterTable, observed: list[str] | None = None) -> RamMatrices:
    """Place every parameter row of ``table`` in the RAM matrices.

    ``observed`` fixes the order of the observed variables (defaults to
    ``table.observed``); latents follow in table order.
    """
    obs = list(observed) if observed is not None else list(table.observed)
    missing = [v for v in table.observed if v not in obs]
    if missing:
        raise ValueError(f"observed order lacks model variables: {', '.join(missing)}")
    variables = obs + [f for f in table.latents if f not in obs]
    idx = {v: k for k, v in enumerate(variables)}
    m = len(variables)
    A = np.zeros((m, m))
    S = np.zeros((m, m))
    F = np.zeros((len(obs), m))
    F[np.arange(len(obs)), np.arange(len(obs))] = 1.0

    owner: dict[tuple[str, int, int], ParamRow] = {}
    names: list[str] = []
    pmap: list[list[tuple[str, int, int]]] = []
    prow: list[list[ParamRow]] = []
    for row in table.parameter_rows():
        cell = _cell(row, idx)
        if cell in owner:
            prev = owner[cell]
            raise RamConflictError(
                f"'{prev.lhs} {prev.op} {prev.rhs}' and '{row.lhs} {row.op} {row.rhs}' "
                "assign the same matrix cell")
        owner[cell] = row
        mat, i, j = cell
        if row.free:
            if row.name in names:
                k = names.index(row.name)
            else:
                k = len(names)
                names.append(row.name)
                pmap.append([])
                prow.append([])
            pmap[k].append(cell)
            prow[k].append(row)
        else:
            target = A if mat == "A" else S
            target[i, j] = row.fixed_value
            if mat == "S":
                target[j, i] = row.fixed_value
    return RamMatrices(variables, len(obs), A, S, F, names, pmap, prow)


def _inverse_IA(A: np.ndarray) -> np.ndarray:
    IA = np.eye(A.shape[0]) - A
    # a cheap conditioning check catches exact and near singularity
    try:
        B = np.linalg.inv(IA)
    except np.linalg.LinAlgError as exc:
        raise NonAdmissibleError("I - A is singular") from exc
    if not np.all(np.isfinite(B)) or np.linalg.cond(IA) > 1e14:
        raise NonAdmissibleError("I - A is singular")
    return B


def implied_cov(ram: RamMatrices, theta) -> np.ndarray:
    """Model-implied covariance ``F (I-A)^-1 S (I-A)^-T F^T`` at ``theta``."""
    theta = np.asarray(theta, dtype=float)
    A, S = ram.matrices(theta)
    B = _inverse_IA(A)
    FB = ram.F @ B
    sigma = FB @ S @ FB.T
    return (sigma + sigma.T) / 2.0


def implied_cov_jacobian(ram: RamMatrices, theta) -> tuple[np.ndarray, np.ndarray]:
    """Return ``Sigma`` and ``dSigma`` with ``dSigma[k] = dSigma/dtheta_k``."""
    theta = np.asarray(theta, dtype=float)
    A, S = ram.matrices(theta)
    B = _inverse_IA(A)
    FB = ram.F @ B
    BSBt = B @ S @ B.T
    sigma = FB @ S @ FB.T
    sigma = (sigma + sigma.T) / 2.0
    p = ram.n_observed
    d = np.zeros((ram.n_params, p, p))
    for k, cells in enumerate(ram.param_map):
        for mat, i, j in cells:
            if mat == "A":
                # d(B)/dA_ij = B e_i e_j^T B
                t = np.outer(FB[:, i], BSBt[j, :] @ ram.F.T)
                d[k] += t + t.T
            elif i == j:
                d[k] += np.outer(FB[:, i], FB[:, i])
            else:
                t = np.outer(FB[:, i], FB[:, j])
                d[k] += t + t.T
    return sigma, d


def count_df(table: ParameterTable, p: int | None = None) -> int:
    """Degrees of freedom ``p(p+1)/2 - free parameters``.

    Raises :class:`IdentificationError` when negative.
    """
    if p is None:
        p = len(table.observed)
    df = p * (p + 1) // 2 - table.n_free
    if df < 0:
        raise IdentificationError(
            f"model has {table.n_free} free parameters but only {p * (p + 1) // 2} "
            f"moments (df = {df}); it is not identified")
    return df
