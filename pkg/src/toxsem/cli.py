"""Command-line entry point: ``toxsem <command> ...``.

Exit codes: 0 success, 2 usage, 3 configuration or credentials, 4 data or
I/O, 5 model syntax, 6 estimation or identification, 7 network.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import httpx
import numpy as np

from . import __version__, ingest, models, srr, toxicity
from .boxplot import boxplot_stats, write_stats
from .dsl import LoweringError, ModelSyntaxError, parse_model
from .estimator import BootstrapError, DataError, EstimationError
from .pipeline import ConfigError, StageError, enrich_sentiment, enrich_toxicity, load_config, \
    run_pipeline
from .ram import IdentificationError, NonAdmissibleError, RamConflictError
from .sentiment import default_lexicon, load_lexicon
from .simulate import SimulationError

__all__ = ["main", "EXIT_CODES"]

EXIT_CODES = {"ok": 0, "usage": 2, "config": 3, "data": 4, "parse": 5, "estimation": 6,
              "network": 7}

_CLASSES = [
    ((ConfigError, toxicity.CredentialError), "config"),
    ((ModelSyntaxError, LoweringError, RamConflictError), "parse"),
    ((EstimationError, IdentificationError, NonAdmissibleError, BootstrapError), "estimation"),
    ((httpx.HTTPError,), "network"),
    ((DataError, SimulationError, toxicity.CheckpointError, ingest.SchemaError,
      ingest.RowValidationError, ingest.InputError, ingest.SamplingError,
      ingest.UnknownAppError, OSError, ValueError, KeyError), "data"),
]


def classify(exc: BaseException) -> str:
    if isinstance(exc, StageError):
        return classify(exc.cause)
    for types, name in _CLASSES:
        if isinstance(exc, types):
            return name
    raise exc


# --------------------------------------------------------------------------
# helpers


def _open_out(path: str | None):
    if path in (None, "-"):
        return _Stdout()
    return open(path, "w", encoding="utf-8", newline="")


class _Stdout:
    def __enter__(self):
        return sys.stdout

    def __exit__(self, *exc):
        sys.stdout.flush()


def _read_model(spec: str) -> tuple[str, str | None]:
    """Model text from a file, or a bundled model by name."""
    p = Path(spec)
    if p.exists():
        return p.read_text(encoding="utf-8"), None
    if spec in models.MODELS:
        return models.model_text(spec), models.model_mode(spec)
    raise FileNotFoundError(f"model file {spec!r} not found "
                            f"(bundled models: {', '.join(models.MODELS)})")


def _read_table(path: str) -> tuple[list[str], list[dict[str, str]]]:
    with open(path, encoding="utf-8-sig", newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
        return list(reader.fieldnames or []), rows


def _numeric_columns(path: str, wanted: Sequence[str], case_insensitive: bool
                     ) -> tuple[np.ndarray, list[str]]:
    header, rows = _read_table(path)
    fold = (lambda s: s.lower()) if case_insensitive else (lambda s: s)
    by_key = {fold(h): h for h in header}
    cols = [by_key[fold(w)] for w in wanted if fold(w) in by_key]
    if not rows:
        raise DataError(f"{path}: no data rows")
    X = np.empty((len(rows), len(cols)))
    for i, row in enumerate(rows):
        for j, c in enumerate(cols):
            try:
                X[i, j] = float(row[c])
            except (TypeError, ValueError):
                raise DataError(f"{path}: row {i + 1} column {c!r} is not numeric: "
                                f"{row[c]!r}") from None
    return X, cols


def _write_matrix(X: np.ndarray, names: Sequence[str], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(names)
    for row in X:
        w.writerow([repr(float(v)) for v in row])


# --------------------------------------------------------------------------
# commands


def cmd_enrich_sentiment(args) -> int:
    records = ingest.read_reviews(args.input)
    if args.lexicon:
        with open(args.lexicon, encoding="utf-8") as fh:
            lex = load_lexicon(fh)
    else:
        lex = default_lexicon()
    out = enrich_sentiment(records, lex)
    with _open_out(args.output) as fh:
        ingest.serialize_reviews(out, fh)
    return 0


def cmd_enrich_toxicity(args) -> int:
    records = ingest.read_reviews(args.input)
    if args.mock:
        url = args.mock
        key = toxicity.credentials_from_env() if args.api_key_required else "mock-key"
    else:
        url = args.url
        key = toxicity.credentials_from_env()
    policy = toxicity.RateLimitPolicy(max_requests_per_second=args.rate,
                                      max_retries=args.max_retries,
                                      backoff_initial=args.backoff,
                                      request_timeout=args.timeout, workers=args.workers)
    pending = len(records)
    if args.checkpoint:
        pending -= len(toxicity.read_checkpoint(args.checkpoint))
    eta = toxicity.eta_seconds(pending, policy, args.seconds_per_request)
    print(f"scoring {pending} reviews; estimated {eta / 3600:.1f} h", file=sys.stderr)
    with toxicity.ToxicityClient(key, policy, url) as client:
        out = enrich_toxicity(records, client, args.checkpoint)
    with _open_out(args.output) as fh:
        ingest.serialize_reviews(out, fh)
    return 0


def cmd_srr(args) -> int:
    with open(args.input, encoding="utf-8", newline="") as fh:
        players = srr.read_players(fh)
    values = srr.srr_by_sector(players, args.inclusive)
    with _open_out(args.output) as fh:
        srr.write_srr(values, fh)
    return 0


def cmd_fit(args) -> int:
    from .report import edge_list
    from .sem import fit

    text, bundled_mode = _read_model(args.model)
    mode = args.mode or bundled_mode or "explicit"
    ast = parse_model(text)
    latents = {v.lower() if args.case_insensitive else v for v in ast.latents()}
    wanted = [v for v in ast.variables()
              if (v.lower() if args.case_insensitive else v) not in latents]
    X, cols = _numeric_columns(args.data, wanted, args.case_insensitive)
    try:
        result = fit(ast, X, cols, mode=mode, divisor=args.divisor, multiplier=args.multiplier,
                     se=args.se, case_insensitive=args.case_insensitive,
                     lower_bound_variances=args.lower_bound_variances,
                     bootstrap_B=args.bootstrap, seed=args.seed, workers=args.workers)
    except (IdentificationError, NonAdmissibleError, EstimationError):
        if args.mode is None and bundled_mode is None:
            print("toxsem: hint: model files default to --mode explicit; models that leave "
                  "variances or marker loadings implicit need --mode auto", file=sys.stderr)
        raise
    sys.stdout.write(result.summary())
    if args.machine:
        Path(args.machine).write_text(result.machine(), encoding="utf-8")
    if args.edges:
        Path(args.edges).write_text(edge_list(result), encoding="utf-8")
    return 0


def cmd_simulate(args) -> int:
    from .sem import prepare
    from .simulate import simulate, theta_from_mapping

    text, bundled_mode = _read_model(args.model)
    mode = args.mode or bundled_mode or "explicit"
    ast = parse_model(text)
    observed = [v for v in ast.variables() if v not in ast.latents()]
    table, ram = prepare(ast, observed, mode)
    if args.theta == "reference":
        if args.model not in models.REFERENCE_THETA:
            raise ConfigError(f"no reference parameter values for {args.model!r}")
        values = models.REFERENCE_THETA[args.model]
    else:
        values = json.loads(Path(args.theta).read_text(encoding="utf-8"))
    theta = theta_from_mapping(ram, values)
    X = simulate(ram, theta, args.n, args.seed)
    with _open_out(args.output) as fh:
        _write_matrix(X, ram.observed, fh)
    return 0


def cmd_boxplot(args) -> int:
    _, rows = _read_table(args.input)
    stats = boxplot_stats(rows, args.value, args.by)
    with _open_out(args.output) as fh:
        write_stats(stats, args.by, fh)
    return 0


def cmd_pipeline(args) -> int:
    cfg = load_config(args.config)
    result = run_pipeline(cfg, mock_url=args.mock)
    print(result.clean_report.to_text(), end="")
    for name, f in result.fits.items():
        print(f"{name}: chisq={f.chisq:.3f} df={f.df} -> fit_{name}.txt")
    return 0


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="toxsem", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"toxsem {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    enrich = sub.add_parser("enrich", help="append a score column to a review CSV")
    esub = enrich.add_subparsers(dest="what", required=True)
    s = esub.add_parser("sentiment", help="append commentSentiment")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", dest="output", default="-")
    s.add_argument("--lexicon")
    s.set_defaults(func=cmd_enrich_sentiment)

    t = esub.add_parser("toxicity", help="append commentToxicity")
    t.add_argument("--in", dest="input", required=True)
    t.add_argument("--out", dest="output", default="-")
    t.add_argument("--mock", metavar="URL", help="use a mock server at URL")
    t.add_argument("--url", default=toxicity.DEFAULT_URL)
    t.add_argument("--checkpoint")
    t.add_argument("--rate", type=float, default=1.0, help="max requests per second")
    t.add_argument("--max-retries", type=int, default=3)
    t.add_argument("--backoff", type=float, default=1.0, help="initial retry delay (s)")
    t.add_argument("--timeout", type=float, default=30.0)
    t.add_argument("--workers", type=int, default=1)
    t.add_argument("--seconds-per-request", type=float, default=5.0,
                   help="latency assumed for the ETA estimate")
    t.add_argument("--api-key-required", action="store_true",
                   help=f"read {toxicity.API_KEY_ENV} even with --mock")
    t.set_defaults(func=cmd_enrich_toxicity)

    r = sub.add_parser("srr", help="sector-wise weighted player rating")
    r.add_argument("--in", dest="input", required=True)
    r.add_argument("--out", dest="output", default="-")
    r.add_argument("--inclusive", action="store_true",
                   help="credit 2 at exactly one million reviewers")
    r.set_defaults(func=cmd_srr)

    f = sub.add_parser("fit", help="fit a model to a data CSV")
    f.add_argument("--model", required=True, help="model file or bundled model name")
    f.add_argument("--data", required=True)
    f.add_argument("--mode", choices=("explicit", "auto"))
    f.add_argument("--divisor", choices=("n", "n-1"), default="n")
    f.add_argument("--multiplier", choices=("n", "n-1"), default="n-1")
    f.add_argument("--se", choices=("expected", "observed"), default="expected")
    f.add_argument("--bootstrap", type=int, default=0, metavar="B")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--workers", type=int, default=1)
    f.add_argument("--case-insensitive", action="store_true")
    f.add_argument("--lower-bound-variances", action="store_true")
    f.add_argument("--machine", metavar="FILE", help="write key=value + TSV output")
    f.add_argument("--edges", metavar="FILE", help="write the fitted path edge list")
    f.set_defaults(func=cmd_fit)

    m = sub.add_parser("simulate", help="draw normal data from a model at given values")
    m.add_argument("--model", required=True)
    m.add_argument("--theta", required=True,
                   help='JSON file of parameter values, or "reference" for bundled models')
    m.add_argument("--n", type=int, required=True)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--mode", choices=("explicit", "auto"))
    m.add_argument("--out", dest="output", default="-")
    m.set_defaults(func=cmd_simulate)

    b = sub.add_parser("boxplot-stats", help="per-group quartile table")
    b.add_argument("--in", dest="input", required=True)
    b.add_argument("--value", required=True)
    b.add_argument("--by", nargs="*", default=[])
    b.add_argument("--out", dest="output", default="-")
    b.set_defaults(func=cmd_boxplot)

    pl = sub.add_parser("pipeline", help="run every stage from a JSON config")
    pl.add_argument("config")
    pl.add_argument("--mock", metavar="URL")
    pl.set_defaults(func=cmd_pipeline)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001
        kind = classify(exc)
        print(f"toxsem: {kind} error: {exc}", file=sys.stderr)
        return EXIT_CODES[kind]


if __name__ == "__main__":
    sys.exit(main())
