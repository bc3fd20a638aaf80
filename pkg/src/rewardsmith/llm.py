"""Chat sessions, chat-completion backends and token accounting."""

from __future__ import annotations

import json
import logging
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import httpx

from .errors import ConfigError, MalformedResponse, TransportError

log = logging.getLogger(__name__)

DEFAULT_TEMPERATURE = 0.7
API_KEY_ENV = "REWARDSMITH_API_KEY"
ROLES = ("system", "user", "assistant")


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if not self.content:
            raise ValueError("message content must be nonempty")

    def to_dict(self) -> dict:
        return {"role": self.role, "content": self.content}


class ChatSession:
    """Append-only dialogue history.

    The first message must be the system prompt; after it, user and
    assistant turns alternate, starting with a user turn.
    """

    def __init__(self, messages=()):
        self._messages: list[ChatMessage] = []
        for m in messages:
            self.append(m)

    @property
    def messages(self) -> tuple[ChatMessage, ...]:
        return tuple(self._messages)

    def __len__(self) -> int:
        return len(self._messages)

    def append(self, message: ChatMessage) -> None:
        if not self._messages:
            if message.role != "system":
                raise ValueError("a session must start with a system message")
        else:
            prev = self._messages[-1].role
            expected = "assistant" if prev == "user" else "user"
            if message.role != expected:
                raise ValueError(f"expected a {expected} message after {prev}, got {message.role}")
        self._messages.append(message)

    def to_list(self) -> list[dict]:
        return [m.to_dict() for m in self._messages]

    @classmethod
    def from_list(cls, data) -> "ChatSession":
        return cls(ChatMessage(d["role"], d["content"]) for d in data)


@dataclass(frozen=True)
class Usage:
    prompt_tokens: int
    completion_tokens: int
    source: str = "estimated"  # or "reported"

    def __post_init__(self):
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be non-negative")

    @property
    def total(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def to_dict(self) -> dict:
        return {
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "source": self.source,
        }


@dataclass
class TokenLedger:
    entries: list[tuple[int, Usage]] = field(default_factory=list)

    def record(self, usage: Usage) -> int:
        index = len(self.entries)
        self.entries.append((index, usage))
        return index

    def to_list(self) -> list[dict]:
        return [{"query_index": i, **u.to_dict()} for i, u in self.entries]


def ledger_total(ledger: TokenLedger) -> tuple[int, int, int]:
    prompt = sum(u.prompt_tokens for _, u in ledger.entries)
    completion = sum(u.completion_tokens for _, u in ledger.entries)
    return prompt, completion, prompt + completion


def estimate_tokens(text: str) -> int:
    """Rough count used when the backend does not report usage: one token
    per four UTF-8 bytes, rounded up."""
    return math.ceil(len(text.encode("utf-8")) / 4)


class Backend(Protocol):
    def complete(self, messages: tuple[ChatMessage, ...], temperature: float) -> tuple[str, Usage]: ...


class ReplayMismatch(TransportError):
    """The outgoing prompt no longer matches the recorded transcript."""


class ReplayBackend:
    """Serves recorded responses in order.

    A record may pin ``expected_prompt_prefix``; the last outgoing user
    message must then start with it.
    """

    def __init__(self, records):
        self.records = [dict(r) for r in records]
        self.position = 0

    @classmethod
    def from_file(cls, path: str | Path) -> "ReplayBackend":
        data = json.loads(Path(path).read_text())
        records = data["records"] if isinstance(data, dict) else data
        for r in records:
            if "response" not in r:
                raise ConfigError(f"replay record without a response in {path}")
        return cls(records)

    @property
    def remaining(self) -> int:
        return len(self.records) - self.position

    def complete(self, messages, temperature):
        if self.position >= len(self.records):
            raise TransportError("replay exhausted")
        record = self.records[self.position]
        prefix = record.get("expected_prompt_prefix")
        if prefix is not None:
            last = messages[-1].content if messages else ""
            if not last.startswith(prefix):
                raise ReplayMismatch(
                    f"replay record {self.position}: prompt does not start with "
                    f"{prefix[:60]!r}; got {last[:60]!r}"
                )
        self.position += 1
        response = record["response"]
        usage = Usage(
            sum(estimate_tokens(m.content) for m in messages),
            estimate_tokens(response),
            "estimated",
        )
        return response, usage


class LiveBackend:
    """Chat-completions client: POST ``{base_url}/chat/completions``."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str | None = None,
        *,
        timeout: float = 120.0,
        max_attempts: int = 3,
        backoff: float = 1.0,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.url = base_url.rstrip("/") + "/chat/completions"
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.client = client or httpx.Client(timeout=timeout)
        self.sleep = sleep

    def _post(self, payload: dict) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        delay = self.backoff
        for attempt in range(1, self.max_attempts + 1):
            try:
                resp = self.client.post(self.url, json=payload, headers=headers)
                if resp.status_code >= 400:
                    raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                try:
                    return resp.json()
                except ValueError as exc:
                    raise MalformedResponse(f"response is not JSON: {exc}") from exc
            except (httpx.HTTPError, TransportError) as exc:
                if attempt == self.max_attempts:
                    if isinstance(exc, TransportError):
                        raise
                    raise TransportError(str(exc)) from exc
                log.warning("chat request failed (attempt %d/%d): %s", attempt, self.max_attempts, exc)
                self.sleep(delay)
                delay *= 2
        raise AssertionError("unreachable")

    def complete(self, messages, temperature):
        payload = {
            "model": self.model,
            "messages": [m.to_dict() for m in messages],
            "temperature": temperature,
        }
        data = self._post(payload)
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse(f"reply lacks choices[0].message.content: {exc!r}") from exc
        if not isinstance(content, str) or not content:
            raise MalformedResponse("empty or non-string message content")
        usage_data = data.get("usage")
        if isinstance(usage_data, dict) and "prompt_tokens" in usage_data and "completion_tokens" in usage_data:
            usage = Usage(int(usage_data["prompt_tokens"]), int(usage_data["completion_tokens"]), "reported")
        else:
            usage = Usage(
                sum(estimate_tokens(m.content) for m in messages), estimate_tokens(content), "estimated"
            )
        return content, usage


def send(session: ChatSession, backend: Backend, temperature: float = DEFAULT_TEMPERATURE):
    """Query ``backend`` with the session history.

    Returns ``(assistant_message, usage)``; the caller decides whether to
    append the reply and records the usage.
    """
    messages = session.messages
    if not messages or messages[-1].role != "user":
        raise ValueError("session must end with a user message before sending")
    content, usage = backend.complete(messages, temperature)
    return ChatMessage("assistant", content), usage
