"""Human-readable three-section fit summary and the machine-readable twin."""
from __future__ import annotations

import math
from typing import TYPE_CHECKING

from . import __version__
from .fitstats import fmt_p

if TYPE_CHECKING:
    from .sem import SemFit

__all__ = ["render_summary", "render_machine", "parse_machine", "parameter_rows", "edge_list"]

_W = 54


def _line(label: str, value: str, indent: int = 2) -> str:
    pad = _W - indent - len(label)
    return " " * indent + label + value.rjust(max(pad, 1))


def _num(x: float, digits: int = 3) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "NA"
    return f"{x:.{digits}f}"


def parameter_rows(fit: "SemFit") -> list[dict]:
    """One dict per parameter row (free and fixed) and per defined parameter."""
    res = fit.result
    idx = {n: k for k, n in enumerate(res.names)}
    out = []
    for r in fit.table.parameter_rows():
        d = {"lhs": r.lhs, "op": r.op, "rhs": r.rhs, "label": r.label or "",
             "free": r.free}
        if r.free:
            k = idx[r.name]
            d["est"] = float(res.theta_hat[k])
            d["se"] = float(res.se[k]) if res.se is not None else float("nan")
            d["z"] = float(res.z[k]) if res.z is not None else float("nan")
            d["pvalue"] = float(res.pvalues[k]) if res.pvalues is not None else float("nan")
        else:
            d.update(est=float(r.fixed_value), se=float("nan"), z=float("nan"),
                     pvalue=float("nan"))
        out.append(d)
    for d in fit.table.defined:
        e = res.defined[d.name]
        out.append({"lhs": d.name, "op": ":=", "rhs": "+".join("*".join(p) for p in d.expr),
                    "label": d.name, "free": False, "est": e.estimate, "se": e.se,
                    "z": e.z, "pvalue": e.pvalue})
    return out


def _section(rows: list[dict], op: str) -> list[str]:
    groups: dict[str, list[dict]] = {}
    for r in rows:
        if r["op"] == op:
            groups.setdefault(r["lhs"], []).append(r)
    out: list[str] = []
    for lhs, items in groups.items():
        out.append(f"  {lhs} {op}")
        out.extend(_param_line(r, r["rhs"]) for r in items)
    return out


def _param_line(r: dict, name: str, indent: int = 4) -> str:
    shown = name if not r.get("label") or r["op"] == ":=" else f"{name} ({r['label']})"
    cols = [_num(r["est"])]
    if r["free"] or r["op"] == ":=":
        cols += [_num(r["se"]), _num(r["z"]), fmt_p(r["pvalue"])]
    return " " * indent + f"{shown[:24]:<24}" + "".join(c.rjust(10) for c in cols)


def render_summary(fit: "SemFit") -> str:
    res = fit.result
    ind = fit.indices
    status = "ended normally" if res.converged else "did NOT end normally"
    L = [f"toxsem {__version__} {status} after {res.iterations} iterations", ""]
    L.append(_line("Estimator", "ML"))
    L.append(_line("Optimization method", "FISHER-SCORING"))
    L.append(_line("Number of model parameters", str(fit.table.n_free)))
    L.append("")
    L.append(_line("Number of observations", str(fit.moments.N)))
    L.append("")
    L.append("Model Test User Model:")
    L.append("")
    L.append(_line("Test statistic", _num(ind.chisq)))
    L.append(_line("Degrees of freedom", str(ind.df)))
    L.append(_line("P-value (Chi-square)", fmt_p(ind.pvalue)))
    L.append("")
    L.append("Model Test Baseline Model:")
    L.append("")
    L.append(_line("Test statistic", _num(ind.baseline_chisq)))
    L.append(_line("Degrees of freedom", str(ind.baseline_df)))
    L.append("")
    L.append("User Model versus Baseline Model:")
    L.append("")
    L.append(_line("Comparative Fit Index (CFI)", _num(ind.cfi)))
    L.append(_line("Tucker-Lewis Index (TLI)", _num(ind.tli)))
    L.append("")
    L.append("Root Mean Square Error of Approximation:")
    L.append("")
    L.append(_line("RMSEA", _num(ind.rmsea)))
    L.append(_line("P-value RMSEA <= 0.05", fmt_p(ind.rmsea_pclose)))
    L.append("")
    L.append("Standardized Root Mean Square Residual:")
    L.append("")
    L.append(_line("SRMR", _num(ind.srmr)))
    L.append("")
    L.append("Fit Verdicts:")
    L.append("")
    for k, v in ind.verdicts.items():
        L.append(f"  {k:<10}{v}")
    L.append("")
    L.append("Parameter Estimates:")
    L.append("")
    L.append(_line("Information", (fit.options.get("se") or "none").capitalize()))
    if fit.bootstrap is not None:
        L.append(_line("Bootstrap replicates (ok/requested)",
                       f"{fit.bootstrap.n_ok}/{fit.bootstrap.B}"))
    L.append("")
    rows = parameter_rows(fit)
    header = " " * 28 + "".join(h.rjust(10) for h in ("Estimate", "Std.Err", "z-value", "P(>|z|)"))
    for title, op in (("Latent Variables:", "=~"), ("Regressions:", "~")):
        body = _section(rows, op)
        if body:
            L += [title, header] + body + [""]
    covs = [r for r in rows if r["op"] == "~~" and r["lhs"] != r["rhs"]]
    if covs:
        L += ["Covariances:", header]
        for r in covs:
            L.append(f"  {r['lhs']} ~~")
            L.append(_param_line(r, r["rhs"]))
        L.append("")
    vars_ = [r for r in rows if r["op"] == "~~" and r["lhs"] == r["rhs"]]
    if vars_:
        L += ["Variances:", header]
        L += [_param_line(r, r["lhs"], indent=2) for r in vars_]
        L.append("")
    defs = [r for r in rows if r["op"] == ":="]
    if defs:
        L += ["Defined Parameters:", header]
        L += [_param_line(r, f"{r['lhs']}", indent=2) for r in defs]
        L.append("")
    if fit.bootstrap is not None:
        L.append("Bootstrap Standard Errors:")
        L.append("")
        for k, v in {**fit.bootstrap.se, **fit.bootstrap.defined_se}.items():
            L.append(_line(k, _num(v)))
        if fit.bootstrap.note:
            L.append("  note: " + fit.bootstrap.note)
        L.append("")
    return "\n".join(L)


def _r(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return "NA" if math.isnan(x) else repr(x)
    return str(x)


def render_machine(fit: "SemFit") -> str:
    """``key=value`` lines followed by a tab-delimited parameter table."""
    res = fit.result
    kv = {
        "converged": res.converged,
        "iterations": res.iterations,
        "estimator": "ML",
        "n_parameters": fit.table.n_free,
        "n_observations": fit.moments.N,
        "fml": float(res.fml_value),
        **{k: (float(v) if not isinstance(v, int) else v) for k, v in fit.indices.as_dict().items()},
    }
    lines = [f"{k}={_r(v)}" for k, v in kv.items()]
    if fit.bootstrap is not None:
        lines.append(f"bootstrap_ok={fit.bootstrap.n_ok}")
        lines.append(f"bootstrap_failed={fit.bootstrap.n_failed}")
        for k, v in {**fit.bootstrap.se, **fit.bootstrap.defined_se}.items():
            lines.append(f"bootstrap_se[{k}]={_r(float(v))}")
    lines.append("")
    cols = ["lhs", "op", "rhs", "label", "free", "est", "se", "z", "pvalue"]
    lines.append("\t".join(cols))
    for r in parameter_rows(fit):
        lines.append("\t".join(_r(r[c]) for c in cols))
    return "\n".join(lines) + "\n"


def _parse_value(s: str):
    if s == "NA":
        return float("nan")
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def parse_machine(text: str) -> tuple[dict, list[dict]]:
    """Inverse of :func:`render_machine`."""
    head, _, table = text.partition("\n\n")
    kv = {}
    for line in head.splitlines():
        k, _, v = line.partition("=")
        kv[k] = _parse_value(v)
    rows = []
    lines = [ln for ln in table.splitlines() if ln]
    if lines:
        cols = lines[0].split("\t")
        for ln in lines[1:]:
            parts = ln.split("\t")
            rows.append({c: (_parse_value(p) if c not in ("lhs", "op", "rhs", "label") else p)
                         for c, p in zip(cols, parts)})
    return kv, rows


def edge_list(fit: "SemFit") -> str:
    """Directed and undirected edges of the fitted model as delimited text."""
    lines = ["from\tto\ttype\testimate"]
    for r in parameter_rows(fit):
        if r["op"] == "~":
            lines.append(f"{r['rhs']}\t{r['lhs']}\tdirected\t{_r(r['est'])}")
        elif r["op"] == "=~":
            lines.append(f"{r['lhs']}\t{r['rhs']}\tdirected\t{_r(r['est'])}")
        elif r["op"] == "~~":
            lines.append(f"{r['lhs']}\t{r['rhs']}\tundirected\t{_r(r['est'])}")
    return "\n".join(lines) + "\n"
