"""Uniform completion interface over live, replay, and mock backends.

Every other module talks to a Backend (anything with a ``complete``
method), so evaluation code never knows whether responses come from an
OpenAI-compatible HTTP endpoint, a content-addressed record/replay
store, or a scripted mock. Responses are preserved byte-exact.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterator, Protocol

import requests

from .errors import (
    BackendUnavailable,
    CacheMiss,
    MalformedResponse,
    RateLimited,
    SourceParseError,
)

DEFAULT_BASE_URL = "https://api.openai.com/v1"
BASE_URL_ENV = "OPENAI_BASE_URL"
API_KEY_ENV = "OPENAI_API_KEY"

STEP1_MAX_TOKENS = 512
STEP2_MAX_TOKENS = 32


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    temperature: float
    max_tokens: int
    model_id: str
    sample_index: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 2.0:  # also rejects NaN
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")
        if self.sample_index < 0:
            raise ValueError("sample_index must be non-negative")
        if self.temperature == 0.0 and self.sample_index != 0:
            # Greedy decoding yields a single chain; extra indices would
            # silently alias distinct cache entries onto one response.
            raise ValueError("temperature 0 implies sample_index 0")


@dataclass(frozen=True)
class CompletionExchange:
    request: CompletionRequest
    response_text: str
    latency_ms: int
    backend: str  # "live" | "replay" | "mock"


@dataclass(frozen=True)
class CacheEntry:
    key: str
    exchange: CompletionExchange
    created_at: str


class Backend(Protocol):
    def complete(self, request: CompletionRequest) -> CompletionExchange:  # pragma: no cover
        ...


def cache_key(request: CompletionRequest) -> str:
    """Stable content digest of a request.

    Temperature is serialized with fixed three-decimal formatting so the
    digest never depends on platform float printing. Latency and other
    response-side data are never keyed.
    """
    canonical = json.dumps(
        {
            "max_tokens": request.max_tokens,
            "model_id": request.model_id,
            "prompt": request.prompt,
            "sample_index": request.sample_index,
            "temperature": f"{request.temperature:.3f}",
        },
        sort_keys=True,
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class CacheStore:
    """Directory of completion exchanges keyed by request digest.

    One JSON file per entry; writes are atomic (temp file + rename) and
    serialized, reads are lock-free, and re-recording an existing key is
    a no-op so retries never duplicate entries.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()

    def _path(self, key: str) -> Path:
        return self.root / f"{key}.json"

    def __contains__(self, key: str) -> bool:
        return self._path(key).exists()

    def __len__(self) -> int:
        return sum(1 for _ in self.root.glob("*.json"))

    def keys(self) -> list[str]:
        return sorted(path.stem for path in self.root.glob("*.json"))

    def get(self, key: str) -> CacheEntry | None:
        path = self._path(key)
        if not path.exists():
            return None
        try:
            payload = json.loads(path.read_text("utf-8"))
            request = CompletionRequest(
                prompt=payload["request"]["prompt"],
                temperature=float(payload["request"]["temperature"]),
                max_tokens=int(payload["request"]["max_tokens"]),
                model_id=payload["request"]["model_id"],
                sample_index=int(payload["request"]["sample_index"]),
            )
            exchange = CompletionExchange(
                request=request,
                response_text=payload["response_text"],
                latency_ms=int(payload["latency_ms"]),
                backend=payload["backend"],
            )
            return CacheEntry(key=payload["key"], exchange=exchange, created_at=payload["created_at"])
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise MalformedResponse(f"corrupt cache entry {key}: {exc}") from None

    def entries(self) -> Iterator[CacheEntry]:
        for key in self.keys():
            entry = self.get(key)
            if entry is not None:
                yield entry

    def put(self, exchange: CompletionExchange) -> CacheEntry:
        key = cache_key(exchange.request)
        with self._write_lock:
            existing_path = self._path(key)
            if existing_path.exists():
                existing = self.get(key)
                assert existing is not None
                return existing
            entry = CacheEntry(
                key=key,
                exchange=exchange,
                created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
            )
            payload = {
                "key": key,
                "request": {
                    "prompt": exchange.request.prompt,
                    "temperature": exchange.request.temperature,
                    "max_tokens": exchange.request.max_tokens,
                    "model_id": exchange.request.model_id,
                    "sample_index": exchange.request.sample_index,
                },
                "response_text": exchange.response_text,
                "latency_ms": exchange.latency_ms,
                "backend": exchange.backend,
                "created_at": entry.created_at,
            }
            tmp_path = existing_path.with_suffix(".tmp")
            tmp_path.write_text(
                json.dumps(payload, sort_keys=True, ensure_ascii=False), "utf-8"
            )
            os.replace(tmp_path, existing_path)
            return entry


class ReplayBackend:
    """Serves recorded responses byte-exact; strict by default.

    With a fall-through backend configured, misses are forwarded and the
    fresh exchange is recorded before being returned.
    """

    def __init__(self, store: CacheStore, fallthrough: Backend | None = None):
        self._store = store
        self._fallthrough = fallthrough

    def complete(self, request: CompletionRequest) -> CompletionExchange:
        key = cache_key(request)
        entry = self._store.get(key)
        if entry is not None:
            return CompletionExchange(
                request=request,
                response_text=entry.exchange.response_text,
                latency_ms=entry.exchange.latency_ms,
                backend="replay",
            )
        if self._fallthrough is None:
            raise CacheMiss(key)
        exchange = self._fallthrough.complete(request)
        self._store.put(exchange)
        return exchange


class CachingBackend:
    """Records every exchange from the wrapped backend into a store."""

    def __init__(self, inner: Backend, store: CacheStore):
        self._inner = inner
        self._store = store

    def complete(self, request: CompletionRequest) -> CompletionExchange:
        exchange = self._inner.complete(request)
        self._store.put(exchange)
        return exchange


@dataclass(frozen=True)
class MockRule:
    """One prompt-matching rule: exact or substring match -> response.

    ``responses`` scripts self-consistency draws: the request's
    sample_index selects the response (wrapping around).
    """

    pattern: str
    match: str = "substring"
    response: str | None = None
    responses: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.match not in ("substring", "exact"):
            raise ValueError(f"unknown match mode: {self.match!r}")
        if (self.response is None) == (not self.responses):
            raise ValueError("rule needs exactly one of response/responses")

    def matches(self, prompt: str) -> bool:
        if self.match == "exact":
            return prompt == self.pattern
        return self.pattern in prompt

    def response_for(self, sample_index: int) -> str:
        if self.response is not None:
            return self.response
        return self.responses[sample_index % len(self.responses)]


class MockBackend:
    """Scripted oracle backend; rules are checked in order, first match wins."""

    def __init__(self, rules: list[MockRule] | tuple[MockRule, ...], default: str | None = None):
        self._rules = tuple(rules)
        self._default = default

    @classmethod
    def from_script(cls, path: str | Path) -> "MockBackend":
        source = Path(path)
        try:
            document = json.loads(source.read_text("utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise SourceParseError(f"{source}: {exc}") from None
        if not isinstance(document, dict) or not isinstance(document.get("rules"), list):
            raise SourceParseError(f"{source}: expected an object with a 'rules' list")
        rules = []
        for i, raw in enumerate(document["rules"]):
            if not isinstance(raw, dict) or "pattern" not in raw:
                raise SourceParseError(f"{source}: rule #{i} needs a 'pattern'")
            try:
                rules.append(
                    MockRule(
                        pattern=raw["pattern"],
                        match=raw.get("match", "substring"),
                        response=raw.get("response"),
                        responses=tuple(raw.get("responses", ())),
                    )
                )
            except ValueError as exc:
                raise SourceParseError(f"{source}: rule #{i}: {exc}") from None
        return cls(rules, default=document.get("default"))

    def complete(self, request: CompletionRequest) -> CompletionExchange:
        for rule in self._rules:
            if rule.matches(request.prompt):
                text = rule.response_for(request.sample_index)
                break
        else:
            if self._default is None:
                raise CacheMiss("no mock rule matches the prompt")
            text = self._default
        return CompletionExchange(
            request=request, response_text=text, latency_ms=0, backend="mock"
        )


class LiveBackend:
    """OpenAI-compatible completions client.

    Bounded retries with exponential backoff on 429/5xx (Retry-After is
    honored), a max-in-flight cap, and an optional requests-per-minute
    throttle shared across worker threads.
    """

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        *,
        session: requests.Session | None = None,
        max_retries: int = 3,
        backoff_seconds: float = 0.5,
        timeout_seconds: float = 60.0,
        max_in_flight: int = 4,
        requests_per_minute: float | None = None,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        self._base_url = (base_url or os.environ.get(BASE_URL_ENV) or DEFAULT_BASE_URL).rstrip("/")
        self._api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self._session = session or requests.Session()
        self._max_retries = max_retries
        self._backoff = backoff_seconds
        self._timeout = timeout_seconds
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._pace_lock = threading.Lock()
        self._min_interval = 60.0 / requests_per_minute if requests_per_minute else 0.0
        self._next_slot = 0.0
        self._sleep = sleeper

    def _pace(self) -> None:
        if not self._min_interval:
            return
        with self._pace_lock:
            now = time.monotonic()
            wait = self._next_slot - now
            self._next_slot = max(now, self._next_slot) + self._min_interval
        if wait > 0:
            self._sleep(wait)

    @staticmethod
    def _retry_after(response: requests.Response) -> float | None:
        header = response.headers.get("Retry-After")
        if header is None:
            return None
        try:
            return max(0.0, float(header))
        except ValueError:
            return None

    def complete(self, request: CompletionRequest) -> CompletionExchange:
        payload = {
            "model": request.model_id,
            "prompt": request.prompt,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "n": 1,
        }
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"

        with self._slots:
            last_error: Exception = BackendUnavailable("no attempt made")
            for attempt in range(self._max_retries + 1):
                self._pace()
                started = time.monotonic()
                try:
                    response = self._session.post(
                        f"{self._base_url}/completions",
                        json=payload,
                        headers=headers,
                        timeout=self._timeout,
                    )
                except requests.RequestException as exc:
                    last_error = BackendUnavailable(f"request failed: {exc}")
                    if attempt < self._max_retries:
                        self._sleep(self._backoff * (2**attempt))
                    continue
                latency_ms = int((time.monotonic() - started) * 1000)

                if response.status_code == 429:
                    last_error = RateLimited(f"rate limited by {self._base_url}")
                    if attempt < self._max_retries:
                        delay = self._retry_after(response)
                        self._sleep(delay if delay is not None else self._backoff * (2**attempt))
                    continue
                if response.status_code >= 500:
                    last_error = BackendUnavailable(f"server error {response.status_code}")
                    if attempt < self._max_retries:
                        self._sleep(self._backoff * (2**attempt))
                    continue
                if response.status_code != 200:
                    raise BackendUnavailable(
                        f"completions endpoint returned {response.status_code}"
                    )

                try:
                    body = response.json()
                    text = body["choices"][0]["text"]
                except (ValueError, KeyError, IndexError, TypeError) as exc:
                    raise MalformedResponse(f"unparseable completion body: {exc}") from None
                if not isinstance(text, str):
                    raise MalformedResponse("completion text is not a string")
                return CompletionExchange(
                    request=request,
                    response_text=text,
                    latency_ms=latency_ms,
                    backend="live",
                )
            raise last_error
