"""Chat-completion-backed membership oracle with retries and an on-disk cache.

Each query becomes one POST to an OpenAI-style chat endpoint: the instruction
text plus one content part per attachment (representatives first).  Replies
are mapped to decisions by ``parse_conclusion``.  Definitive answers and
parsed Unknowns are cached append-only, keyed by a query fingerprint, so
repeated queries are free and interrupted runs resume without re-spending.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable
from urllib.parse import urlparse

import requests

from .exceptions import ConfigurationError
from .oracles import (
    MembershipOracle,
    MembershipQuery,
    MergeQuery,
    OracleDecision,
    PromptTemplate,
    DEFAULT_TEMPLATE,
    build_membership_prompt,
    build_merge_prompt,
    parse_conclusion,
)

__all__ = ["RetryPolicy", "RemoteOracle", "API_KEY_ENV"]

API_KEY_ENV = "ORACLE_API_KEY"

logger = logging.getLogger(__name__)

# Statuses retried with backoff; other 4xx mean the request itself is unusable.
_TRANSIENT_STATUSES = {408, 429, 500, 502, 503, 504}


@dataclass(frozen=True)
class RetryPolicy:
    """``max_attempts`` total tries per query; delays double from
    ``backoff_base`` up to ``backoff_cap`` seconds."""

    max_attempts: int = 3
    backoff_base: float = 0.5
    backoff_cap: float = 8.0


class RemoteOracle(MembershipOracle):
    def __init__(
        self,
        endpoint: str,
        model: str,
        *,
        template: PromptTemplate = DEFAULT_TEMPLATE,
        temperature: float = 0.0,
        retry: RetryPolicy = RetryPolicy(),
        cache_path: str | Path | None = None,
        api_key: str | None = None,
        attachment_resolver: Callable[[str], dict] | None = None,
        max_in_flight: int = 4,
        timeout: float = 30.0,
        session: requests.Session | None = None,
    ):
        parsed = urlparse(endpoint)
        if parsed.scheme not in ("http", "https") or not parsed.netloc:
            raise ConfigurationError(f"malformed endpoint: {endpoint!r}")
        if max_in_flight < 1:
            raise ConfigurationError(f"max_in_flight must be >= 1, got {max_in_flight}")
        self.endpoint = endpoint
        self.model = model
        self.template = template
        self.temperature = float(temperature)
        self.retry = retry
        self.timeout = float(timeout)
        self.descriptor = f"remote:{model}@{endpoint}"
        self._resolver = attachment_resolver
        self._api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self._session = session or requests.Session()
        self._gate = threading.BoundedSemaphore(max_in_flight)
        self._cache_lock = threading.Lock()
        self._cache_path = Path(cache_path) if cache_path is not None else None
        self._cache: dict[str, str] = {}
        if self._cache_path is not None and self._cache_path.exists():
            self._load_cache()

    # -- cache -------------------------------------------------------------

    def _load_cache(self) -> None:
        for line in self._cache_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
                self._cache[entry["fingerprint"]] = entry["decision"]
            except (json.JSONDecodeError, KeyError, TypeError):
                logger.warning("skipping malformed cache line in %s", self._cache_path)

    def _remember(self, fingerprint: str, decision: OracleDecision, response_text: str) -> None:
        with self._cache_lock:
            self._cache[fingerprint] = decision.value
            if self._cache_path is None:
                return
            entry = json.dumps(
                {"fingerprint": fingerprint, "decision": decision.value, "response": response_text},
                sort_keys=True,
            )
            with open(self._cache_path, "a", encoding="utf-8") as fh:
                fh.write(entry + "\n")

    @staticmethod
    def _fingerprint(kind: str, parts: dict, model: str) -> str:
        canonical = json.dumps({"kind": kind, "model": model, **parts}, sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()

    # -- transport ---------------------------------------------------------

    def _attachment_part(self, node_id: str) -> dict:
        if self._resolver is not None:
            return self._resolver(node_id)
        return {"type": "text", "text": f"[attachment {node_id}]"}

    def _post(self, prompt: str, attachments: list[str]) -> requests.Response:
        content = [{"type": "text", "text": prompt}]
        content.extend(self._attachment_part(a) for a in attachments)
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": content}],
            "temperature": self.temperature,
        }
        headers = {}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        return self._session.post(self.endpoint, json=payload, headers=headers, timeout=self.timeout)

    def _decide(self, fingerprint: str, prompt: str, attachments: list[str]) -> OracleDecision:
        cached = self._cache.get(fingerprint)
        if cached is not None:
            return OracleDecision(cached)
        with self._gate:
            for attempt in range(self.retry.max_attempts):
                if attempt:
                    time.sleep(min(self.retry.backoff_cap, self.retry.backoff_base * 2 ** (attempt - 1)))
                try:
                    response = self._post(prompt, attachments)
                except requests.RequestException as exc:
                    logger.debug("attempt %d transport failure: %s", attempt + 1, exc)
                    continue
                if response.status_code in (401, 403):
                    raise ConfigurationError(
                        f"authentication rejected by {self.endpoint} "
                        f"(status {response.status_code}); check {API_KEY_ENV}"
                    )
                if response.status_code in _TRANSIENT_STATUSES:
                    logger.debug("attempt %d got status %d", attempt + 1, response.status_code)
                    continue
                if response.status_code != 200:
                    raise ConfigurationError(
                        f"endpoint {self.endpoint} returned status {response.status_code}"
                    )
                try:
                    body = response.json()
                except ValueError:
                    logger.debug("attempt %d returned a non-JSON body", attempt + 1)
                    continue
                try:
                    text = body["choices"][0]["message"]["content"]
                except (KeyError, IndexError, TypeError):
                    text = ""
                if not isinstance(text, str):
                    text = ""
                decision = parse_conclusion(text)
                self._remember(fingerprint, decision, text)
                return decision
        # Transport never produced a response; not cached so a resumed run retries.
        return OracleDecision.UNKNOWN

    # -- oracle interface --------------------------------------------------

    def assess_membership(self, query: MembershipQuery) -> OracleDecision:
        prompt, attachments = build_membership_prompt(query, self.template)
        fingerprint = self._fingerprint(
            "membership",
            {
                "representatives": list(query.representatives),
                "candidate": query.candidate,
                "aspect": query.aspect,
            },
            self.model,
        )
        return self._decide(fingerprint, prompt, attachments)

    def assess_merge(self, query: MergeQuery) -> OracleDecision:
        prompt, attachments = build_merge_prompt(query, self.template)
        fingerprint = self._fingerprint(
            "merge",
            {
                "representatives_a": list(query.representatives_a),
                "representatives_b": list(query.representatives_b),
                "aspect": query.aspect,
            },
            self.model,
        )
        return self._decide(fingerprint, prompt, attachments)
