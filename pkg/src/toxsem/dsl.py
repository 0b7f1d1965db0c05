"""Model syntax: parsing, printing, and lowering to a parameter table.

The accepted syntax is the familiar lavaan-style notation::

    # comment
    y ~ a*x1 + x2            regression
    f =~ 1*x1 + x2 + x3      loading (``≈`` is accepted as a synonym)
    x1 ~~ x2                 variance / covariance
    ab := a*b                defined parameter

A statement may continue on the next line when it ends with ``+``.
Statements may also be separated by ``;``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

__all__ = [
    "ModelSyntaxError",
    "LoweringError",
    "Term",
    "Regression",
    "SymmetricRelation",
    "Loading",
    "Defined",
    "ModelAST",
    "ParamRow",
    "ParameterTable",
    "parse_model",
    "print_model",
    "lower",
]


class ModelSyntaxError(ValueError):
    """Raised for malformed model text; carries the 1-based line and column."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class LoweringError(ValueError):
    """Raised when an AST cannot be turned into a parameter table."""


Modifier = Union[float, str, None]


@dataclass(frozen=True)
class Term:
    """One right-hand-side term: a variable with an optional fixed value or label."""

    var: str
    modifier: Modifier = None

    @property
    def fixed(self) -> float | None:
        return self.modifier if isinstance(self.modifier, float) else None

    @property
    def label(self) -> str | None:
        return self.modifier if isinstance(self.modifier, str) else None


@dataclass(frozen=True)
class Regression:
    lhs: str
    terms: tuple[Term, ...]
    op = "~"


@dataclass(frozen=True)
class SymmetricRelation:
    lhs: str
    terms: tuple[Term, ...]
    op = "~~"


@dataclass(frozen=True)
class Loading:
    latent: str
    terms: tuple[Term, ...]
    op = "=~"

    @property
    def lhs(self) -> str:
        return self.latent


@dataclass(frozen=True)
class Defined:
    """``name := expr`` where expr is a sum of products of names.

    ``expr`` is stored canonically as a tuple of product tuples, so
    ``TIE := a*b + d*e`` becomes ``(("a", "b"), ("d", "e"))``.
    """

    name: str
    expr: tuple[tuple[str, ...], ...]
    op = ":="

    @property
    def lhs(self) -> str:
        return self.name

    def names(self) -> list[str]:
        seen: list[str] = []
        for prod in self.expr:
            for n in prod:
                if n not in seen:
                    seen.append(n)
        return seen


Statement = Union[Regression, SymmetricRelation, Loading, Defined]


@dataclass(frozen=True)
class ModelAST:
    statements: tuple[Statement, ...] = ()

    def latents(self) -> list[str]:
        out: list[str] = []
        for st in self.statements:
            if isinstance(st, Loading) and st.latent not in out:
                out.append(st.latent)
        return out

    def variables(self) -> list[str]:
        """Every variable name referenced outside defined expressions, in order."""
        out: list[str] = []
        for st in self.statements:
            if isinstance(st, Defined):
                continue
            for name in (st.lhs, *(t.var for t in st.terms)):
                if name not in out:
                    out.append(name)
        return out

    def labels(self) -> list[str]:
        out: list[str] = []
        for st in self.statements:
            if isinstance(st, Defined):
                continue
            for t in st.terms:
                if t.label is not None and t.label not in out:
                    out.append(t.label)
        return out


# --------------------------------------------------------------------------
# lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<comment>[#!][^\n]*)
  | (?P<newline>\n)
  | (?P<ws>[ \t\r]+)
  | (?P<op>:=|=~|≈|~~|~)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
  | (?P<plus>\+)
  | (?P<minus>-)
  | (?P<star>\*)
  | (?P<semi>;)
    """,
    re.VERBOSE,
)

# operator-like sequences that look plausible but are not supported
_BAD_OPS = ("<~", "~=", "==", "<", ">", "|", "%")


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        col = pos - line_start + 1
        for bad in _BAD_OPS:
            if text.startswith(bad, pos):
                raise ModelSyntaxError(f"unknown operator {bad!r}", line, col)
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ModelSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        if kind == "newline":
            toks.append(_Tok("newline", "\n", line, col))
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            val = "=~" if m.group() == "≈" else m.group()
            toks.append(_Tok(kind, val, line, col))
        pos = m.end()
    return toks


def _split_statements(toks: list[_Tok]) -> list[list[_Tok]]:
    stmts: list[list[_Tok]] = []
    cur: list[_Tok] = []
    for tok in toks:
        if tok.kind in ("newline", "semi"):
            # a trailing '+' or operator continues the statement
            if cur and (cur[-1].kind == "plus" or cur[-1].kind == "op") and tok.kind == "newline":
                continue
            if cur:
                stmts.append(cur)
                cur = []
        else:
            cur.append(tok)
    if cur:
        if cur[-1].kind in ("plus", "op", "star", "minus"):
            t = cur[-1]
            raise ModelSyntaxError(f"statement ends with dangling {t.text!r}", t.line, t.col)
        stmts.append(cur)
    return stmts


# --------------------------------------------------------------------------
# parser


class _Cursor:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.i = 0

    def peek(self) -> _Tok | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self, kind: str, what: str) -> _Tok:
        tok = self.peek()
        if tok is None:
            last = self.toks[-1]
            raise ModelSyntaxError(f"expected {what} after {last.text!r}", last.line,
                                   last.col + len(last.text))
        if tok.kind != kind:
            raise ModelSyntaxError(f"expected {what}, got {tok.text!r}", tok.line, tok.col)
        self.i += 1
        return tok


def _parse_term(cur: _Cursor) -> Term:
    tok = cur.peek()
    assert tok is not None
    if tok.kind in ("num", "minus"):
        sign = 1.0
        if tok.kind == "minus":
            cur.i += 1
            sign = -1.0
        num = cur.take("num", "number")
        cur.take("star", "'*'")
        var = cur.take("ident", "variable name")
        return Term(var.text, sign * float(num.text))
    first = cur.take("ident", "variable name")
    nxt = cur.peek()
    if nxt is not None and nxt.kind == "star":
        cur.i += 1
        var = cur.take("ident", "variable name")
        after = cur.peek()
        if after is not None and after.kind == "star":
            raise ModelSyntaxError("a term takes at most one modifier", after.line, after.col)
        return Term(var.text, first.text)
    return Term(first.text)


def _parse_statement(toks: list[_Tok]) -> Statement:
    ops = [t for t in toks if t.kind == "op"]
    if not ops:
        t = toks[0]
        raise ModelSyntaxError("statement has no operator", t.line, t.col)
    if len(ops) > 1:
        t = ops[1]
        raise ModelSyntaxError(f"unexpected second operator {t.text!r}", t.line, t.col)
    op = ops[0]
    k = toks.index(op)
    lhs_toks, rhs_toks = toks[:k], toks[k + 1:]
    if not lhs_toks:
        raise ModelSyntaxError("missing left-hand side", op.line, op.col)
    if len(lhs_toks) != 1 or lhs_toks[0].kind != "ident":
        bad = next((t for t in lhs_toks if t.kind != "ident"), lhs_toks[-1])
        raise ModelSyntaxError("left-hand side must be a single name without modifier",
                               bad.line, bad.col)
    lhs = lhs_toks[0].text
    if not rhs_toks:
        raise ModelSyntaxError("missing right-hand side", op.line, op.col + len(op.text))
    cur = _Cursor(rhs_toks)

    if op.text == ":=":
        products: list[tuple[str, ...]] = []
        while True:
            names = [cur.take("ident", "name").text]
            while cur.peek() is not None and cur.peek().kind == "star":
                cur.i += 1
                names.append(cur.take("ident", "name").text)
            products.append(tuple(names))
            if cur.peek() is None:
                break
            cur.take("plus", "'+' or '*'")
        return Defined(lhs, tuple(products))

    terms: list[Term] = []
    while True:
        terms.append(_parse_term(cur))
        if cur.peek() is None:
            break
        cur.take("plus", "'+'")
    if op.text == "~":
        return Regression(lhs, tuple(terms))
    if op.text == "~~":
        return SymmetricRelation(lhs, tuple(terms))
    return Loading(lhs, tuple(terms))


def parse_model(text: str) -> ModelAST:
    """Parse model text into a :class:`ModelAST`, keeping statement order."""
    stmts = _split_statements(_tokenize(text))
    return ModelAST(tuple(_parse_statement(s) for s in stmts))


# --------------------------------------------------------------------------
# printer


def _fmt_num(x: float) -> str:
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _fmt_term(t: Term) -> str:
    if t.modifier is None:
        return t.var
    if isinstance(t.modifier, str):
        return f"{t.modifier}*{t.var}"
    return f"{_fmt_num(t.modifier)}*{t.var}"


def _fmt_statement(st: Statement) -> str:
    if isinstance(st, Defined):
        return f"{st.name} := " + "+".join("*".join(p) for p in st.expr)
    rhs = " + ".join(_fmt_term(t) for t in st.terms)
    return f"{st.lhs} {st.op} {rhs}"


def print_model(ast: ModelAST) -> str:
    """Render an AST as canonical model text, one statement per line."""
    if not ast.statements:
        return ""
    return "\n".join(_fmt_statement(st) for st in ast.statements) + "\n"


# --------------------------------------------------------------------------
# lowering


@dataclass(frozen=True)
class ParamRow:
    lhs: str
    op: str
    rhs: str
    free: bool
    fixed_value: float | None = None
    label: str | None = None
    start: float | None = None
    user: bool = True

    @property
    def name(self) -> str:
        """Stable display name: the label if any, else ``lhs op rhs``."""
        return self.label if self.label else f"{self.lhs}{self.op}{self.rhs}"

    @property
    def is_variance(self) -> bool:
        return self.op == "~~" and self.lhs == self.rhs


@dataclass
class ParameterTable:
    rows: list[ParamRow]
    observed: list[str]
    latents: list[str]
    defined: list[Defined] = field(default_factory=list)

    def parameter_rows(self) -> list[ParamRow]:
        return [r for r in self.rows if r.op != ":="]

    def free_rows(self) -> list[ParamRow]:
        return [r for r in self.parameter_rows() if r.free]

    def free_names(self) -> list[str]:
        """One name per distinct free parameter; rows sharing a label collapse."""
        names: list[str] = []
        for r in self.free_rows():
            if r.name not in names:
                names.append(r.name)
        return names

    @property
    def n_free(self) -> int:
        return len(self.free_names())

    def labels(self) -> dict[str, ParamRow]:
        out: dict[str, ParamRow] = {}
        for r in self.parameter_rows():
            if r.label and r.label not in out:
                out[r.label] = r
        return out


_OPS = {Regression: "~", SymmetricRelation: "~~", Loading: "=~"}


def _resolve_names(ast: ModelAST, observed: Sequence[str],
                   case_insensitive: bool) -> dict[str, str]:
    latents = ast.latents()
    known = {n: n for n in (*observed, *latents)}
    if case_insensitive:
        folded: dict[str, str] = {}
        for n in observed:
            folded.setdefault(n.lower(), n)
        for n in latents:
            folded.setdefault(n.lower(), n)
    missing: list[str] = []
    mapping: dict[str, str] = {}
    for v in ast.variables():
        if v in known:
            mapping[v] = v
        elif case_insensitive and v.lower() in folded:
            mapping[v] = folded[v.lower()]
        else:
            missing.append(v)
    if missing:
        hint = "" if case_insensitive else " (case-insensitive matching is off)"
        raise LoweringError(
            "variables neither observed nor latent: " + ", ".join(missing) + hint)
    return mapping


def lower(ast: ModelAST, mode: str, observed: Sequence[str], *,
          case_insensitive: bool = False) -> ParameterTable:
    """Lower an AST to a :class:`ParameterTable`.

    Parameters
    ----------
    ast : ModelAST
        Parsed model.
    mode : {"explicit", "auto"}
        ``explicit`` turns only the written statements into parameters.
        ``auto`` also fixes marker loadings, adds residual variances for
        observed and endogenous variables, and frees variances and
        covariances of exogenous variables.
    observed : sequence of str
        Names of the observed variables (the data columns the model may use).
    case_insensitive : bool
        Match model names to ``observed`` ignoring case.

    Returns
    -------
    ParameterTable
    """
    if mode not in ("explicit", "auto"):
        raise ValueError(f"mode must be 'explicit' or 'auto', got {mode!r}")
    mapping = _resolve_names(ast, observed, case_insensitive)
    latents = [mapping[v] for v in ast.latents()]
    used_obs = [v for v in observed if v in set(mapping.values()) and v not in latents]

    rows: list[ParamRow] = []
    defined: list[Defined] = []
    for st in ast.statements:
        if isinstance(st, Defined):
            defined.append(st)
            continue
        op = _OPS[type(st)]
        lhs = mapping[st.lhs]
        terms = list(st.terms)
        if (mode == "auto" and isinstance(st, Loading)
                and not any(t.fixed is not None for t in terms)):
            # marker loading; any label is kept as a name for the fixed value
            first = terms[0]
            rows.append(ParamRow(lhs, op, mapping[first.var], free=False, fixed_value=1.0,
                                 label=first.label))
            terms = terms[1:]
        for t in terms:
            rhs = mapping[t.var]
            if t.fixed is not None:
                rows.append(ParamRow(lhs, op, rhs, free=False, fixed_value=t.fixed))
            else:
                rows.append(ParamRow(lhs, op, rhs, free=True, label=t.label))

    if mode == "auto":
        rows.extend(_auto_rows(rows, used_obs, latents))

    labels = {r.label for r in rows if r.label}
    names_so_far: set[str] = set(labels)
    for d in defined:
        unknown = [n for n in d.names() if n not in names_so_far]
        if unknown:
            raise LoweringError(f"defined parameter {d.name!r} references unknown "
                                f"label(s): {', '.join(unknown)}")
        names_so_far.add(d.name)
        expr = " + ".join("*".join(p) for p in d.expr)
        rows.append(ParamRow(d.name, ":=", expr, free=False))

    return ParameterTable(rows=rows, observed=used_obs, latents=latents, defined=defined)


def _has_sym(rows: Iterable[ParamRow], a: str, b: str) -> bool:
    return any(r.op == "~~" and {r.lhs, r.rhs} == {a, b} for r in rows)


def _auto_rows(rows: list[ParamRow], observed: list[str], latents: list[str]) -> list[ParamRow]:
    dependents = {r.lhs for r in rows if r.op == "~"}
    indicators = {r.rhs for r in rows if r.op == "=~"}
    predictors = {r.rhs for r in rows if r.op == "~"}
    extra: list[ParamRow] = []

    def add_var(v: str) -> None:
        if not _has_sym(rows + extra, v, v):
            extra.append(ParamRow(v, "~~", v, free=True, user=False))

    def add_cov(a: str, b: str) -> None:
        if not _has_sym(rows + extra, a, b):
            extra.append(ParamRow(a, "~~", b, free=True, user=False))

    for v in observed:
        if v in dependents or v in indicators:
            add_var(v)
    exo_obs = [v for v in observed
               if v in predictors and v not in dependents and v not in indicators]
    for v in observed:
        if v not in dependents and v not in indicators and v not in predictors:
            add_var(v)
    for v in exo_obs:
        add_var(v)
    for i, a in enumerate(exo_obs):
        for b in exo_obs[i + 1:]:
            add_cov(a, b)

    endo_lat = [f for f in latents if f in dependents]
    exo_lat = [f for f in latents if f not in dependents]
    for f in endo_lat:
        add_var(f)
    for f in exo_lat:
        add_var(f)
    for i, a in enumerate(exo_lat):
        for b in exo_lat[i + 1:]:
            add_cov(a, b)
    return extra
