"""Client for a Perspective-style comment toxicity service.

Only the TOXICITY attribute is requested.  Per-row failures never abort a
batch: they come back as a missing score with a reason.  A bad API key is
the exception and raises :class:`CredentialError`.
"""
from __future__ import annotations

import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import httpx

__all__ = [
    "API_KEY_ENV",
    "DEFAULT_URL",
    "CredentialError",
    "CheckpointError",
    "ToxicityScore",
    "RateLimitPolicy",
    "RateLimiter",
    "ToxicityClient",
    "credentials_from_env",
    "score_comment",
    "stream_scores",
    "read_checkpoint",
    "eta_seconds",
    "MockToxicityServer",
    "default_mock_scorer",
]

log = logging.getLogger(__name__)

API_KEY_ENV = "PERSPECTIVE_API_KEY"
DEFAULT_URL = "https://commentanalyzer.googleapis.com"
ANALYZE_PATH = "/v1alpha1/comments:analyze"

REASONS = ("api_error", "unsupported_language", "empty_text", "timeout")


class CredentialError(RuntimeError):
    """Missing or rejected API key; fatal for the whole run."""


class CheckpointError(RuntimeError):
    pass


@dataclass(frozen=True)
class ToxicityScore:
    """Probability that a reader finds the text toxic, or a missing marker.

    A value of 0.22 means roughly 22 of 100 readers would perceive the
    comment as toxic.
    """

    value: float | None
    reason: str | None = None

    def __post_init__(self):
        if self.value is None:
            if self.reason not in REASONS:
                raise ValueError(f"missing score needs a reason in {REASONS}")
        elif not 0.0 <= self.value <= 1.0:
            raise ValueError(f"toxicity {self.value} outside [0, 1]")

    @classmethod
    def missing(cls, reason: str) -> "ToxicityScore":
        return cls(None, reason)

    @property
    def present(self) -> bool:
        return self.value is not None

    def encode(self) -> str:
        return repr(self.value) if self.present else f"NA:{self.reason}"

    @classmethod
    def decode(cls, text: str) -> "ToxicityScore":
        if text.startswith("NA:"):
            return cls.missing(text[3:])
        return cls(float(text))


@dataclass(frozen=True)
class RateLimitPolicy:
    max_requests_per_second: float = 1.0
    max_retries: int = 3
    backoff_initial: float = 1.0
    backoff_multiplier: float = 2.0
    request_timeout: float = 30.0
    workers: int = 1

    def __post_init__(self):
        if self.max_requests_per_second <= 0 or self.request_timeout <= 0:
            raise ValueError("rate and timeout must be positive")
        if self.max_retries < 0 or self.backoff_initial < 0 or self.backoff_multiplier < 1:
            raise ValueError("invalid retry settings")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


class RateLimiter:
    """Spaces request starts at least ``1 / rate`` seconds apart.

    Shared by all workers; ``acquire`` blocks until the caller may send.
    """

    def __init__(self, rate: float, clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        self.interval = 1.0 / rate
        self._clock = clock
        self._sleep = sleep
        self._next = -float("inf")
        self._lock = threading.Lock()

    def acquire(self) -> float:
        with self._lock:
            now = self._clock()
            slot = max(now, self._next)
            self._next = slot + self.interval
        wait = slot - now
        if wait > 0:
            self._sleep(wait)
        return slot


def credentials_from_env(env: dict | None = None) -> str:
    key = (env if env is not None else os.environ).get(API_KEY_ENV, "").strip()
    if not key:
        raise CredentialError(f"set {API_KEY_ENV} to the toxicity service API key")
    return key


class _Transient(Exception):
    def __init__(self, reason: str):
        self.reason = reason


class ToxicityClient:
    """Scores one comment per request, honouring a shared rate limit."""

    def __init__(self, api_key: str, policy: RateLimitPolicy = RateLimitPolicy(),
                 base_url: str = DEFAULT_URL, limiter: RateLimiter | None = None,
                 sleep: Callable[[float], None] = time.sleep,
                 http: httpx.Client | None = None):
        if not api_key:
            raise CredentialError("empty API key")
        self.api_key = api_key
        self.policy = policy
        self.base_url = base_url.rstrip("/")
        self.limiter = limiter or RateLimiter(policy.max_requests_per_second)
        self._sleep = sleep
        self._http = http or httpx.Client(timeout=policy.request_timeout)
        self.requests_sent = 0
        self._count_lock = threading.Lock()

    def close(self) -> None:
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _request(self, text: str) -> ToxicityScore:
        self.limiter.acquire()
        with self._count_lock:
            self.requests_sent += 1
        body = {"comment": {"text": text}, "requestedAttributes": {"TOXICITY": {}},
                "doNotStore": True}
        try:
            resp = self._http.post(self.base_url + ANALYZE_PATH, params={"key": self.api_key},
                                   json=body, timeout=self.policy.request_timeout)
        except httpx.TimeoutException:
            raise _Transient("timeout") from None
        except httpx.TransportError:
            raise _Transient("api_error") from None
        if resp.status_code == 200:
            try:
                value = float(resp.json()["attributeScores"]["TOXICITY"]["summaryScore"]["value"])
            except (KeyError, TypeError, ValueError):
                return ToxicityScore.missing("api_error")
            if not 0.0 <= value <= 1.0:
                return ToxicityScore.missing("api_error")
            return ToxicityScore(value)
        if resp.status_code == 429 or resp.status_code >= 500:
            raise _Transient("api_error")
        return self._client_error(resp)

    @staticmethod
    def _client_error(resp: httpx.Response) -> ToxicityScore:
        try:
            err = resp.json().get("error", {})
        except ValueError:
            err = {}
        message = str(err.get("message", ""))
        types = {d.get("errorType") for d in err.get("details", []) if isinstance(d, dict)}
        if resp.status_code in (401, 403) or "API key not valid" in message \
                or "API_KEY_INVALID" in types:
            raise CredentialError(f"toxicity service rejected the API key: {message or resp.status_code}")
        if "LANGUAGE_NOT_SUPPORTED_BY_ATTRIBUTE" in types or "does not support request languages" in message:
            return ToxicityScore.missing("unsupported_language")
        return ToxicityScore.missing("api_error")

    def score(self, text: str) -> ToxicityScore:
        """Score ``text``; empty text is answered locally without a request."""
        if not text or not text.strip():
            return ToxicityScore.missing("empty_text")
        delay = self.policy.backoff_initial
        last = "api_error"
        for attempt in range(self.policy.max_retries + 1):
            try:
                return self._request(text)
            except _Transient as t:
                last = t.reason
                if attempt < self.policy.max_retries:
                    log.debug("transient %s, retrying in %.2fs", t.reason, delay)
                    self._sleep(delay)
                    delay *= self.policy.backoff_multiplier
        return ToxicityScore.missing(last)


def score_comment(text: str, credentials: str, policy: RateLimitPolicy = RateLimitPolicy(),
                  base_url: str = DEFAULT_URL) -> ToxicityScore:
    with ToxicityClient(credentials, policy, base_url) as client:
        return client.score(text)


def eta_seconds(n: int, policy: RateLimitPolicy, seconds_per_request: float = 0.0) -> float:
    """Lower-bound run time for ``n`` requests under ``policy``.

    With the ~5 s per review seen against the live service, 21600 reviews
    on one worker take about 30 hours.
    """
    by_rate = max(n - 1, 0) / policy.max_requests_per_second
    by_latency = n * seconds_per_request / policy.workers
    return max(by_rate, by_latency)


def read_checkpoint(path: str | os.PathLike) -> dict[str, ToxicityScore]:
    """Load ``rowId<TAB>score`` lines written by :func:`stream_scores`."""
    done: dict[str, ToxicityScore] = {}
    p = Path(path)
    if not p.exists():
        return done
    with p.open(encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            if not line.endswith("\n") or line.count("\t") != 1:
                raise CheckpointError(
                    f"{p}: line {n} is malformed ({line.rstrip()!r}). Delete that line and any "
                    "after it (the rows will be re-scored), or remove the file to start over.")
            row_id, enc = line.rstrip("\n").split("\t")
            try:
                done[row_id] = ToxicityScore.decode(enc)
            except ValueError:
                raise CheckpointError(
                    f"{p}: line {n} has an invalid score {enc!r}. Delete that line and any after "
                    "it, or remove the file to start over.") from None
    return done


def stream_scores(items: Sequence[tuple[str, str]], client: ToxicityClient,
                  checkpoint_path: str | os.PathLike | None = None,
                  progress: Callable[[int, int], None] | None = None,
                  partitions: Sequence[str] | None = None) -> list[ToxicityScore]:
    """Score ``(row_id, text)`` pairs in order, resuming from a checkpoint.

    Rows already in the checkpoint are never re-requested.  New results are
    appended one line per row as they arrive.  With ``client.policy.workers``
    above 1, each worker takes whole partitions (one per distinct value of
    ``partitions``, e.g. the appId of each row) while all of them share the
    client's rate limiter.  The output order always matches ``items``.
    """
    if partitions is not None and len(partitions) != len(items):
        raise ValueError("partitions must have one key per item")
    ids = [rid for rid, _ in items]
    if len(set(ids)) != len(ids):
        raise ValueError("row ids must be unique")
    done = read_checkpoint(checkpoint_path) if checkpoint_path else {}
    pending = [(k, rid, text) for k, (rid, text) in enumerate(items) if rid not in done]
    results: list[ToxicityScore | None] = [done.get(rid) for rid in ids]
    log.info("%d rows to score (%d from checkpoint); estimated %.0f s",
             len(pending), len(items) - len(pending), eta_seconds(len(pending), client.policy))
    lock = threading.Lock()
    fh = open(checkpoint_path, "a", encoding="utf-8") if checkpoint_path else None
    counter = [0]

    def work(entry):
        k, rid, text = entry
        s = client.score(text)
        with lock:
            results[k] = s
            if fh is not None:
                fh.write(f"{rid}\t{s.encode()}\n")
                fh.flush()
            counter[0] += 1
            if progress:
                progress(counter[0], len(pending))
        return s

    try:
        if client.policy.workers > 1:
            groups: dict[object, list] = {}
            for entry in pending:
                key = partitions[entry[0]] if partitions is not None else entry[0]
                groups.setdefault(key, []).append(entry)
            with ThreadPoolExecutor(max_workers=client.policy.workers) as pool:
                for _ in pool.map(lambda g: [work(e) for e in g], groups.values()):
                    pass
        else:
            for entry in pending:
                work(entry)
    finally:
        if fh is not None:
            fh.close()
    return [r for r in results if r is not None]


# --------------------------------------------------------------------------
# deterministic local stand-in for the service


_TOXIC_WORDS = {
    "idiot": 0.35, "idiots": 0.35, "stupid": 0.3, "pathetic": 0.2, "garbage": 0.2, "trash": 0.15,
    "fraud": 0.2, "scam": 0.2, "cheat": 0.15, "cheated": 0.15, "hate": 0.15, "worst": 0.1,
    "nonsense": 0.15, "useless": 0.1, "rubbish": 0.2, "shut": 0.1, "damn": 0.25, "hell": 0.15,
}


def default_mock_scorer(text: str) -> float | None:
    """Deterministic pseudo toxicity; ``None`` for non-Latin text."""
    import hashlib
    import re

    letters = [c for c in text if c.isalpha()]
    if letters and sum(not c.isascii() for c in letters) / len(letters) > 0.3:
        return None
    words = re.findall(r"[a-z']+", text.lower())
    base = 0.02 + sum(_TOXIC_WORDS.get(w, 0.0) for w in words)
    shout = sum(c.isupper() for c in letters) / len(letters) if letters else 0.0
    base += 0.2 * shout * (len(letters) > 8)
    jitter = int(hashlib.sha256(text.encode("utf-8")).hexdigest()[:8], 16) / 0xFFFFFFFF
    return round(min(0.99, base + 0.05 * jitter), 6)


class MockToxicityServer:
    """Local HTTP server speaking the analyze request/response bodies.

    ``scorer(text)`` returns a probability, or ``None`` to answer with an
    unsupported-language error.  ``fail_first`` makes the first n requests
    for each text fail with HTTP 503; ``delay`` sleeps before answering.
    Every request is logged in ``requests`` as ``(monotonic time, text)``.
    """

    def __init__(self, scorer: Callable[[str], float | None] = default_mock_scorer,
                 api_key: str = "mock-key", delay: float = 0.0, fail_first: int = 0,
                 host: str = "127.0.0.1", port: int = 0):
        from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
        from urllib.parse import parse_qs, urlparse

        self.scorer = scorer
        self.api_key = api_key
        self.delay = delay
        self.fail_first = fail_first
        self.requests: list[tuple[float, str]] = []
        self._fails: dict[str, int] = {}
        self._lock = threading.Lock()
        server = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _send(self, code: int, payload: dict):
                data = json.dumps(payload).encode()
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                try:
                    self.wfile.write(data)
                except (BrokenPipeError, ConnectionResetError):
                    pass

            def do_POST(self):
                url = urlparse(self.path)
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length) or b"{}")
                text = body.get("comment", {}).get("text", "")
                with server._lock:
                    server.requests.append((time.monotonic(), text))
                    nfail = server._fails.get(text, 0)
                    server._fails[text] = nfail + 1
                if url.path != ANALYZE_PATH:
                    return self._send(404, {"error": {"code": 404, "message": "not found"}})
                key = parse_qs(url.query).get("key", [""])[0]
                if key != server.api_key:
                    return self._send(400, {"error": {
                        "code": 400, "message": "API key not valid. Please pass a valid API key.",
                        "details": [{"errorType": "API_KEY_INVALID"}]}})
                if server.delay:
                    time.sleep(server.delay)
                if nfail < server.fail_first:
                    return self._send(503, {"error": {"code": 503, "message": "unavailable"}})
                value = server.scorer(text)
                if value is None:
                    return self._send(400, {"error": {
                        "code": 400,
                        "message": "Attribute TOXICITY does not support request languages: und",
                        "details": [{"errorType": "LANGUAGE_NOT_SUPPORTED_BY_ATTRIBUTE"}]}})
                return self._send(200, {"attributeScores": {"TOXICITY": {
                    "summaryScore": {"value": value, "type": "PROBABILITY"}}},
                    "languages": ["en"]})

        self._httpd = ThreadingHTTPServer((host, port), Handler)
        self._httpd.daemon_threads = True
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "MockToxicityServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
