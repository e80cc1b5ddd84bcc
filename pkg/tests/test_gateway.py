from __future__ import annotations

import json
import threading

import pytest

from plansolve.errors import (
    BackendUnavailable,
    CacheMiss,
    MalformedResponse,
    RateLimited,
    SourceParseError,
)
from plansolve.gateway import (
    CacheStore,
    CachingBackend,
    CompletionExchange,
    CompletionRequest,
    LiveBackend,
    MockBackend,
    MockRule,
    ReplayBackend,
    cache_key,
)


def request(prompt="Q: x? A: think.", temperature=0.0, sample_index=0, **kwargs):
    return CompletionRequest(
        prompt=prompt,
        temperature=temperature,
        max_tokens=kwargs.pop("max_tokens", 64),
        model_id=kwargs.pop("model_id", "test-model"),
        sample_index=sample_index,
    )


def exchange(req=None, text="four", latency_ms=12, backend="live"):
    return CompletionExchange(
        request=req or request(), response_text=text, latency_ms=latency_ms, backend=backend
    )


class TestCompletionRequest:
    def test_greedy_requires_sample_zero(self):
        with pytest.raises(ValueError):
            request(temperature=0.0, sample_index=1)

    def test_sampled_draws_allowed(self):
        assert request(temperature=0.7, sample_index=9).sample_index == 9

    @pytest.mark.parametrize("temperature", [-0.1, 2.1])
    def test_temperature_bounds(self, temperature):
        with pytest.raises(ValueError):
            request(temperature=temperature, sample_index=0)

    def test_max_tokens_positive(self):
        with pytest.raises(ValueError):
            request(max_tokens=0)


class TestCacheKey:
    def test_identical_requests_identical_digests(self):
        assert cache_key(request()) == cache_key(request())

    def test_sample_index_is_keyed(self):
        a = request(temperature=0.7, sample_index=0)
        b = request(temperature=0.7, sample_index=1)
        assert cache_key(a) != cache_key(b)

    def test_latency_is_not_keyed(self):
        slow = exchange(latency_ms=900)
        fast = exchange(latency_ms=1)
        assert cache_key(slow.request) == cache_key(fast.request)

    @pytest.mark.parametrize(
        "field,value",
        [("prompt", "other"), ("model_id", "other-model"), ("max_tokens", 99)],
    )
    def test_request_fields_are_keyed(self, field, value):
        base = request()
        changed = request(**{field: value}) if field != "prompt" else request(prompt=value)
        assert cache_key(base) != cache_key(changed)

    def test_temperature_fixed_precision(self):
        # 0.7 and 0.700 must produce the same digest on every platform.
        a = request(temperature=0.7, sample_index=0)
        b = request(temperature=0.700, sample_index=0)
        assert cache_key(a) == cache_key(b)


class TestCacheStore:
    def test_put_then_get(self, tmp_path):
        store = CacheStore(tmp_path)
        entry = store.put(exchange())
        fetched = store.get(entry.key)
        assert fetched is not None
        assert fetched.exchange.response_text == "four"
        assert fetched.exchange.request == request()

    def test_put_is_idempotent(self, tmp_path):
        store = CacheStore(tmp_path)
        first = store.put(exchange(text="one"))
        second = store.put(exchange(text="two"))  # same request, later response
        assert second.exchange.response_text == "one"
        assert len(store) == 1
        assert first.key == second.key

    def test_missing_key(self, tmp_path):
        assert CacheStore(tmp_path).get("0" * 64) is None

    def test_corrupt_entry(self, tmp_path):
        store = CacheStore(tmp_path)
        entry = store.put(exchange())
        (tmp_path / f"{entry.key}.json").write_text("{broken", "utf-8")
        with pytest.raises(MalformedResponse):
            store.get(entry.key)

    def test_concurrent_puts_never_duplicate(self, tmp_path):
        store = CacheStore(tmp_path)
        barrier = threading.Barrier(8)

        def record():
            barrier.wait()
            store.put(exchange())

        threads = [threading.Thread(target=record) for _ in range(8)]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()
        assert len(store) == 1


class TestReplayBackend:
    def test_replays_byte_exact(self, tmp_path):
        store = CacheStore(tmp_path)
        store.put(exchange(text="recorded é\n"))
        replayed = ReplayBackend(store).complete(request())
        assert replayed.response_text == "recorded é\n"
        assert replayed.backend == "replay"

    def test_strict_miss(self, tmp_path):
        with pytest.raises(CacheMiss):
            ReplayBackend(CacheStore(tmp_path)).complete(request())

    def test_fallthrough_records(self, tmp_path):
        store = CacheStore(tmp_path)
        mock = MockBackend([MockRule(pattern="Q:", response="fresh")])
        backend = ReplayBackend(store, fallthrough=mock)
        first = backend.complete(request())
        assert first.backend == "mock"
        assert len(store) == 1
        second = backend.complete(request())
        assert second.backend == "replay"
        assert second.response_text == "fresh"


class TestMockBackend:
    def test_first_matching_rule_wins(self):
        backend = MockBackend(
            [
                MockRule(pattern="the answer is", response="step two"),
                MockRule(pattern="Q:", response="step one"),
            ]
        )
        assert backend.complete(request(prompt="Q: hi. A: go")).response_text == "step one"
        assert (
            backend.complete(request(prompt="Q: hi. A: go... the answer is")).response_text
            == "step two"
        )

    def test_exact_match(self):
        backend = MockBackend([MockRule(pattern="exactly this", match="exact", response="hit")])
        assert backend.complete(request(prompt="exactly this")).response_text == "hit"
        with pytest.raises(CacheMiss):
            backend.complete(request(prompt="not exactly this"))

    def test_default_response(self):
        backend = MockBackend([], default="fallback")
        assert backend.complete(request()).response_text == "fallback"

    def test_responses_indexed_by_sample(self):
        backend = MockBackend([MockRule(pattern="Q:", responses=("a", "b", "c"))])
        texts = [
            backend.complete(request(temperature=0.7, sample_index=i)).response_text
            for i in range(4)
        ]
        assert texts == ["a", "b", "c", "a"]

    def test_rule_validation(self):
        with pytest.raises(ValueError):
            MockRule(pattern="x")
        with pytest.raises(ValueError):
            MockRule(pattern="x", response="r", responses=("a",))
        with pytest.raises(ValueError):
            MockRule(pattern="x", match="regex", response="r")

    def test_script_file(self, tmp_path):
        script = tmp_path / "mock.json"
        script.write_text(
            json.dumps(
                {
                    "rules": [
                        {"match": "substring", "pattern": "Q:", "response": "hello"},
                    ],
                    "default": "other",
                }
            ),
            "utf-8",
        )
        backend = MockBackend.from_script(script)
        assert backend.complete(request()).response_text == "hello"
        assert backend.complete(request(prompt="nothing")).response_text == "other"

    def test_bad_script(self, tmp_path):
        script = tmp_path / "mock.json"
        script.write_text("[]", "utf-8")
        with pytest.raises(SourceParseError):
            MockBackend.from_script(script)


class _FakeResponse:
    def __init__(self, status_code=200, body=None, headers=None):
        self.status_code = status_code
        self._body = body if body is not None else {"choices": [{"text": " four"}]}
        self.headers = headers or {}

    def json(self):
        if isinstance(self._body, Exception):
            raise self._body
        return self._body


class _FakeSession:
    def __init__(self, responses):
        self._responses = list(responses)
        self.calls: list[dict] = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.calls.append({"url": url, "json": json, "headers": headers})
        result = self._responses.pop(0)
        if isinstance(result, Exception):
            raise result
        return result


def live_backend(session, **kwargs):
    sleeps: list[float] = []
    backend = LiveBackend(
        base_url="http://fake.local/v1",
        api_key="test-key",
        session=session,
        sleeper=sleeps.append,
        **kwargs,
    )
    return backend, sleeps


class TestLiveBackend:
    def test_success(self):
        session = _FakeSession([_FakeResponse()])
        backend, _ = live_backend(session)
        result = backend.complete(request())
        assert result.response_text == " four"
        assert result.backend == "live"
        call = session.calls[0]
        assert call["url"] == "http://fake.local/v1/completions"
        assert call["json"]["model"] == "test-model"
        assert call["json"]["prompt"] == "Q: x? A: think."
        assert call["headers"]["Authorization"] == "Bearer test-key"

    def test_retries_rate_limit_honoring_retry_after(self):
        session = _FakeSession(
            [
                _FakeResponse(status_code=429, headers={"Retry-After": "3"}),
                _FakeResponse(),
            ]
        )
        backend, sleeps = live_backend(session)
        assert backend.complete(request()).response_text == " four"
        assert sleeps == [3.0]

    def test_unparseable_retry_after_falls_back_to_backoff(self):
        session = _FakeSession(
            [
                _FakeResponse(status_code=429, headers={"Retry-After": "tomorrow"}),
                _FakeResponse(),
            ]
        )
        backend, sleeps = live_backend(session, backoff_seconds=0.25)
        assert backend.complete(request()).response_text == " four"
        assert sleeps == [0.25]

    def test_non_string_completion_text(self):
        session = _FakeSession([_FakeResponse(body={"choices": [{"text": 42}]})])
        backend, _ = live_backend(session)
        with pytest.raises(MalformedResponse):
            backend.complete(request())

    def test_rate_limit_exhaustion(self):
        session = _FakeSession([_FakeResponse(status_code=429)] * 4)
        backend, _ = live_backend(session, max_retries=3)
        with pytest.raises(RateLimited):
            backend.complete(request())
        assert len(session.calls) == 4

    def test_server_errors_retry_then_fail(self):
        session = _FakeSession([_FakeResponse(status_code=503)] * 3)
        backend, sleeps = live_backend(session, max_retries=2)
        with pytest.raises(BackendUnavailable):
            backend.complete(request())
        assert len(sleeps) == 2  # exponential backoff between attempts

    def test_auth_error_fails_fast(self):
        session = _FakeSession([_FakeResponse(status_code=401)])
        backend, _ = live_backend(session)
        with pytest.raises(BackendUnavailable):
            backend.complete(request())
        assert len(session.calls) == 1

    def test_malformed_body(self):
        session = _FakeSession([_FakeResponse(body={"nonsense": True})])
        backend, _ = live_backend(session)
        with pytest.raises(MalformedResponse):
            backend.complete(request())

    def test_network_exception_retries(self):
        import requests as requests_lib

        session = _FakeSession([requests_lib.ConnectionError("boom"), _FakeResponse()])
        backend, _ = live_backend(session)
        assert backend.complete(request()).response_text == " four"

    def test_recording_wrapper(self, tmp_path):
        store = CacheStore(tmp_path)
        session = _FakeSession([_FakeResponse()])
        backend, _ = live_backend(session)
        recorded = CachingBackend(backend, store).complete(request())
        assert recorded.backend == "live"
        entry = store.get(cache_key(request()))
        assert entry is not None
        assert entry.exchange.response_text == " four"

    def test_requests_per_minute_throttle(self):
        session = _FakeSession([_FakeResponse(), _FakeResponse()])
        backend, sleeps = live_backend(session, requests_per_minute=60)
        backend.complete(request())
        backend.complete(request())
        assert len(sleeps) == 1
        assert 0 < sleeps[0] <= 1.0  # 60 rpm -> one-second spacing
