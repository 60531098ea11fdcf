"""Completion backends: a remote text-completion API client with retry and
rate limiting, and a deterministic rule-based mock for hermetic testing.

The mock applies a fixed regex rule table to the search-results portion of
the prompt and answers one "Variable: value" line per variable, so the
correct output of a full pipeline run is computable by hand.
"""

from __future__ import annotations

import importlib.resources
import os
import random
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import requests

from .schema import FOUND_NOTHING


class AuthError(Exception):
    """Missing or rejected API credentials (never retried)."""


class RateLimitExhaustedError(Exception):
    """All retries were spent on retryable failures (429/5xx/network)."""


class CompletionTimeoutError(Exception):
    """The final attempt timed out."""


class MalformedResponseError(Exception):
    """The backend answered with something other than the expected shape."""


@dataclass
class CompletionRequest:
    prompt_text: str
    max_answer_tokens: int = 512
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if not self.prompt_text:
            raise ValueError("prompt_text must be non-empty")


@dataclass
class CompletionResponse:
    text: str
    latency: float  # seconds; fixed 0.0 for the mock backend
    backend_id: str
    retries: int = 0


@dataclass
class BackendConfig:
    kind: str = "mock-rules"  # "remote-api" | "mock-rules"
    endpoint: str | None = None
    api_key_env: str | None = None
    model_name: str = "text-davinci-003"
    max_retries: int = 3
    timeout: float = 60.0
    requests_per_minute: float = 60.0

    def __post_init__(self) -> None:
        if self.kind not in ("remote-api", "mock-rules"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == "remote-api" and not (self.endpoint and self.api_key_env and self.model_name):
            raise ValueError("remote-api requires endpoint, api_key_env and model_name")


# --------------------------------------------------------------------------
# Mock rule backend
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MockRule:
    variable: str
    pattern: re.Pattern
    template: str


def load_mock_rules(path: str | Path | None = None) -> tuple[MockRule, ...]:
    """Load the shipped (or an alternate) VARIABLE/REGEX/TEMPLATE rule table."""
    if path is None:
        text = importlib.resources.files("pdfabstract").joinpath("data/mock_rules.tsv").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    rules = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"mock rule line {lineno}: expected 3 tab-separated fields")
        variable, pattern, template = parts
        rules.append(MockRule(variable, re.compile(pattern, re.IGNORECASE), template))
    return tuple(rules)


_DEFAULT_RULES: tuple[MockRule, ...] | None = None


def _default_rules() -> tuple[MockRule, ...]:
    global _DEFAULT_RULES
    if _DEFAULT_RULES is None:
        _DEFAULT_RULES = load_mock_rules()
    return _DEFAULT_RULES


def _context_of(prompt_text: str) -> str:
    """The search-results portion: after "Search results:" and before the
    final paragraph (the question body)."""
    start = prompt_text.find("Search results:")
    end = prompt_text.rfind("\n\n")
    if start == -1:
        return prompt_text
    start += len("Search results:")
    return prompt_text[start:end] if end > start else prompt_text[start:]


def mock_rules_answer(prompt_text: str, rules: tuple[MockRule, ...] | None = None) -> str:
    """Deterministic answer: one "Variable: value" line per rule-table variable."""
    rules = _default_rules() if rules is None else rules
    context = _context_of(prompt_text)
    answers: dict[str, str] = {}
    for rule in rules:
        if rule.variable in answers:
            continue
        m = rule.pattern.search(context)
        if m:
            answers[rule.variable] = m.expand(rule.template)
    lines = []
    for variable in dict.fromkeys(r.variable for r in rules):
        lines.append(f"{variable}: {answers.get(variable, FOUND_NOTHING)}")
    return "\n".join(lines)


# --------------------------------------------------------------------------
# Remote completion client
# --------------------------------------------------------------------------

_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


def complete(req: CompletionRequest, cfg: BackendConfig, *,
             session: requests.Session | None = None,
             sleep=time.sleep, rng: random.Random | None = None) -> CompletionResponse:
    """Run one completion request against the configured backend.

    Remote transient failures (429/5xx/network/timeout) are retried up to
    ``max_retries`` times with exponential backoff (base 1 s, factor 2, full
    jitter). The API key is read from the environment variable named by
    ``api_key_env`` and never appears in errors or logs.
    """
    if cfg.kind == "mock-rules":
        return CompletionResponse(text=mock_rules_answer(req.prompt_text),
                                  latency=0.0, backend_id="mock-rules")

    key = os.environ.get(cfg.api_key_env or "")
    if not key:
        raise AuthError(f"environment variable {cfg.api_key_env} is not set")
    if session is None:
        session = requests.Session()
    if rng is None:
        rng = random.Random()
    payload = {"model": cfg.model_name, "prompt": req.prompt_text,
               "max_tokens": req.max_answer_tokens, "temperature": req.temperature}
    headers = {"Authorization": f"Bearer {key}"}

    start = time.monotonic()
    last_failure = ""
    timed_out = False
    for attempt in range(cfg.max_retries + 1):
        if attempt:
            sleep(rng.uniform(0.0, min(1.0 * 2 ** (attempt - 1), 60.0)))
        try:
            resp = session.post(cfg.endpoint, json=payload, headers=headers, timeout=cfg.timeout)
        except requests.Timeout:
            last_failure, timed_out = "request timed out", True
            continue
        except requests.RequestException as exc:
            last_failure, timed_out = f"network error: {type(exc).__name__}", False
            continue
        if resp.status_code in (401, 403):
            raise AuthError(f"backend rejected credentials (HTTP {resp.status_code})")
        if resp.status_code in _RETRYABLE_STATUS:
            last_failure, timed_out = f"HTTP {resp.status_code}", False
            continue
        if resp.status_code != 200:
            raise MalformedResponseError(f"unexpected HTTP {resp.status_code}")
        try:
            text = resp.json()["choices"][0]["text"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedResponseError("response is missing choices[0].text") from exc
        if not isinstance(text, str):
            raise MalformedResponseError("choices[0].text is not a string")
        return CompletionResponse(text=text, latency=time.monotonic() - start,
                                  backend_id=cfg.model_name, retries=attempt)
    if timed_out:
        raise CompletionTimeoutError(f"gave up after {cfg.max_retries + 1} attempts: {last_failure}")
    raise RateLimitExhaustedError(f"gave up after {cfg.max_retries + 1} attempts: {last_failure}")


class RateLimiter:
    """Shared token bucket enforcing a requests-per-minute cap."""

    def __init__(self, per_minute: float, clock=time.monotonic, sleep=time.sleep):
        if per_minute <= 0:
            raise ValueError("per_minute must be positive")
        self._rate = per_minute / 60.0
        self._capacity = per_minute
        self._tokens = per_minute
        self._updated = clock()
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()

    def acquire(self) -> None:
        """Block until a request token is available, then consume it."""
        while True:
            with self._lock:
                now = self._clock()
                self._tokens = min(self._capacity, self._tokens + (now - self._updated) * self._rate)
                self._updated = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self._rate
            self._sleep(wait)
