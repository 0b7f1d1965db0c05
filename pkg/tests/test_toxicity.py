import json
import time

import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from toxsem.toxicity import (
    API_KEY_ENV,
    CheckpointError,
    CredentialError,
    MockToxicityServer,
    RateLimiter,
    RateLimitPolicy,
    ToxicityClient,
    ToxicityScore,
    credentials_from_env,
    default_mock_scorer,
    eta_seconds,
    read_checkpoint,
    score_comment,
    stream_scores,
)

FAST = RateLimitPolicy(max_requests_per_second=500, max_retries=2, backoff_initial=0.0,
                       request_timeout=5)


class FakeClock:
    def __init__(self):
        self.t = 0.0
        self.sleeps = []

    def __call__(self):
        return self.t

    def sleep(self, dt):
        self.sleeps.append(dt)
        self.t += dt


@pytest.fixture
def server():
    with MockToxicityServer(lambda text: 0.22 if "idiot" in text else
                            (None if text == "नमस्ते" else 0.01)) as s:
        yield s


def _client(server, policy=FAST, key="mock-key", **kw):
    return ToxicityClient(key, policy, server.url, **kw)


# --------------------------------------------------------------------------
# single requests


def test_mock_returns_configured_probability(server):
    assert score_comment("you idiot", "mock-key", FAST, server.url) == ToxicityScore(0.22)


def test_unsupported_language_is_missing(server):
    with _client(server) as c:
        assert c.score("नमस्ते") == ToxicityScore.missing("unsupported_language")


def test_empty_text_sends_nothing(server):
    with _client(server) as c:
        assert c.score("   ") == ToxicityScore.missing("empty_text")
        assert c.requests_sent == 0
    assert server.requests == []


def test_invalid_key_is_fatal(server):
    with _client(server, key="wrong") as c, pytest.raises(CredentialError, match="API key"):
        c.score("hello")


@pytest.mark.parametrize("status", [401, 403])
def test_auth_status_is_fatal(status):
    http = httpx.Client(transport=httpx.MockTransport(lambda r: httpx.Response(status)))
    c = ToxicityClient("k", FAST, "http://x", http=http)
    with pytest.raises(CredentialError):
        c.score("hello")


def test_timeouts_retry_then_give_up():
    calls = []

    def handler(request):
        calls.append(request)
        raise httpx.ReadTimeout("slow", request=request)

    clock = FakeClock()
    policy = RateLimitPolicy(1000, max_retries=3, backoff_initial=1.0, backoff_multiplier=2.0)
    c = ToxicityClient("k", policy, "http://x", sleep=clock.sleep,
                       http=httpx.Client(transport=httpx.MockTransport(handler)))
    assert c.score("hello") == ToxicityScore.missing("timeout")
    assert len(calls) == 1 + 3
    assert clock.sleeps == [1.0, 2.0, 4.0]


def test_server_errors_recover_within_retries():
    with MockToxicityServer(lambda t: 0.5, fail_first=2) as s, _client(s) as c:
        assert c.score("x") == ToxicityScore(0.5)
        assert c.requests_sent == 3


def test_rate_limited_429_retried():
    codes = iter([429, 200])

    def handler(request):
        code = next(codes)
        if code == 429:
            return httpx.Response(429)
        return httpx.Response(200, json={"attributeScores": {"TOXICITY": {
            "summaryScore": {"value": 0.3}}}})

    c = ToxicityClient("k", FAST, "http://x", sleep=lambda s: None,
                       http=httpx.Client(transport=httpx.MockTransport(handler)))
    assert c.score("x").value == 0.3


def test_wire_format():
    seen = {}

    def handler(request):
        seen["url"] = str(request.url)
        seen["body"] = request.read()
        return httpx.Response(200, json={"attributeScores": {"TOXICITY": {
            "summaryScore": {"value": 0.1}}}})

    c = ToxicityClient("KEY", FAST, "http://h/", http=httpx.Client(
        transport=httpx.MockTransport(handler)))
    c.score("hi")
    assert seen["url"] == "http://h/v1alpha1/comments:analyze?key=KEY"
    assert json.loads(seen["body"]) == {"comment": {"text": "hi"},
                                        "requestedAttributes": {"TOXICITY": {}},
                                        "doNotStore": True}


def test_malformed_body_is_api_error():
    c = ToxicityClient("k", FAST, "http://x", http=httpx.Client(
        transport=httpx.MockTransport(lambda r: httpx.Response(200, json={"x": 1}))))
    assert c.score("x") == ToxicityScore.missing("api_error")


def test_credentials_from_env():
    assert credentials_from_env({API_KEY_ENV: " abc "}) == "abc"
    with pytest.raises(CredentialError, match=API_KEY_ENV):
        credentials_from_env({})


# --------------------------------------------------------------------------
# rate limiting


def test_limiter_spacing_with_fake_clock():
    clock = FakeClock()
    lim = RateLimiter(1.0, clock, clock.sleep)
    slots = [lim.acquire() for _ in range(10)]
    assert slots == [float(k) for k in range(10)]
    assert clock.t == 9.0


def test_limiter_does_not_wait_after_idle_gap():
    clock = FakeClock()
    lim = RateLimiter(2.0, clock, clock.sleep)
    lim.acquire()
    clock.t = 10.0
    lim.acquire()
    assert clock.sleeps == []


def test_real_requests_respect_rate():
    policy = RateLimitPolicy(max_requests_per_second=20, max_retries=0)
    limiter = RateLimiter(20)
    slots = []
    acquire = limiter.acquire
    limiter.acquire = lambda: slots.append(acquire()) or slots[-1]
    with MockToxicityServer(lambda t: 0.1) as s, _client(s, policy, limiter=limiter) as c:
        t0 = time.monotonic()
        for k in range(10):
            c.score(f"comment {k}")
        elapsed = time.monotonic() - t0
        received = len(s.requests)
    assert received == 10
    assert elapsed >= 9 / 20
    assert all(b - a >= 1 / 20 - 1e-9 for a, b in zip(slots, slots[1:]))


@given(st.integers(0, 100000), st.floats(0.1, 10), st.floats(0, 10), st.integers(1, 8))
def test_eta_bounds(n, rate, latency, workers):
    p = RateLimitPolicy(max_requests_per_second=rate, workers=workers)
    eta = eta_seconds(n, p, latency)
    assert eta >= max(n - 1, 0) / rate - 1e-9
    assert eta >= n * latency / workers - 1e-9


def test_eta_for_full_corpus_is_about_thirty_hours():
    assert eta_seconds(21600, RateLimitPolicy(), 5.0) / 3600 == pytest.approx(30.0)


# --------------------------------------------------------------------------
# streaming and checkpoints


def test_stream_resume_issues_only_missing_requests(server, tmp_path):
    ck = tmp_path / "ck.tsv"
    items = [(f"r{k}", f"text {k}") for k in range(10)]
    with _client(server) as c:
        first = stream_scores(items[:6], c, ck)
    assert len(first) == 6
    with _client(server) as c:
        out = stream_scores(items, c, ck)
        assert c.requests_sent == 4
    assert [s.value for s in out] == [0.01] * 10
    assert list(read_checkpoint(ck)) == [rid for rid, _ in items]


def test_stream_keeps_order_with_workers(tmp_path):
    policy = RateLimitPolicy(500, max_retries=0, workers=4)
    items = [(f"r{k}", f"t{k:03d}") for k in range(40)]
    parts = [f"app{k % 5}" for k in range(40)]
    with MockToxicityServer(lambda t: int(t[1:]) / 100, delay=0.005) as s, _client(s, policy) as c:
        out = stream_scores(items, c, tmp_path / "ck.tsv", partitions=parts)
    assert [s.value for s in out] == [k / 100 for k in range(40)]
    assert set(read_checkpoint(tmp_path / "ck.tsv")) == {rid for rid, _ in items}


def test_checkpoint_records_missing_reasons(server, tmp_path):
    ck = tmp_path / "ck.tsv"
    with _client(server) as c:
        stream_scores([("a", "नमस्ते"), ("b", ""), ("c", "idiot")], c, ck)
    assert ck.read_text() == "a\tNA:unsupported_language\nb\tNA:empty_text\nc\t0.22\n"


def test_corrupt_checkpoint_names_line_and_fix(tmp_path):
    ck = tmp_path / "ck.tsv"
    ck.write_text("a\t0.1\nb\t0.")
    with pytest.raises(CheckpointError, match="line 2.*Delete"):
        read_checkpoint(ck)
    ck.write_text("a\tbanana\n")
    with pytest.raises(CheckpointError, match="line 1"):
        read_checkpoint(ck)


def test_duplicate_row_ids_rejected(server):
    with _client(server) as c, pytest.raises(ValueError):
        stream_scores([("a", "x"), ("a", "y")], c)


def test_progress_callback(server):
    seen = []
    with _client(server) as c:
        stream_scores([("a", "x"), ("b", "y")], c, progress=lambda k, n: seen.append((k, n)))
    assert seen == [(1, 2), (2, 2)]


# --------------------------------------------------------------------------
# score values


@given(st.floats(0, 1) | st.none(), st.sampled_from(["api_error", "unsupported_language",
                                                     "empty_text", "timeout"]))
def test_score_encode_round_trip(value, reason):
    s = ToxicityScore(value) if value is not None else ToxicityScore.missing(reason)
    assert ToxicityScore.decode(s.encode()) == s


def test_score_validation():
    with pytest.raises(ValueError):
        ToxicityScore(1.2)
    with pytest.raises(ValueError):
        ToxicityScore.missing("bored")


@given(st.text(max_size=80))
def test_default_mock_scorer_range_and_determinism(text):
    v = default_mock_scorer(text)
    assert v == default_mock_scorer(text)
    assert v is None or 0.0 <= v <= 0.99


def test_default_mock_scorer_orders_toxic_above_plain():
    assert default_mock_scorer("you stupid idiot, garbage app") > default_mock_scorer("nice app")
    assert default_mock_scorer("बहुत अच्छा ऐप है") is None


def test_ten_records_at_one_per_second_take_nine_seconds():
    policy = RateLimitPolicy(max_requests_per_second=1.0, max_retries=0)
    items = [(f"r{k}", f"review {k}") for k in range(10)]
    with MockToxicityServer(lambda t: 0.1) as s, _client(s, policy) as c:
        t0 = time.monotonic()
        out = stream_scores(items, c)
        elapsed = time.monotonic() - t0
    assert elapsed >= 9.0 and len(out) == 10
