"""Client for an OpenAI-compatible LLM server, plus a deterministic offline mock.

Requests always decode greedily (temperature 0). Batches run with bounded
concurrency and come back in input order. A request that still fails after its
retries is reported as failed, and the caller keeps the original text.
"""

from __future__ import annotations

import json
import logging
import math
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import httpx

from .manifest import Example

log = logging.getLogger(__name__)

ENGLISH_PROMPT = (
    "For the given <language> sentence, restore the upper-case characters (if applicable) and add "
    "punctuation WITHOUT CHANGING ANY WORDS. Answer in <language> without any explanation. "
    "Here is the sentence: <input>. Here is the output:"
)

LANGUAGE_NAMES = {
    "eng": "English",
    "zho": "Chinese",
    "deu": "German",
    "fra": "French",
    "spa": "Spanish",
    "ita": "Italian",
    "nld": "Dutch",
    "por": "Portuguese",
    "pol": "Polish",
    "jpn": "Japanese",
    "kor": "Korean",
    "rus": "Russian",
}

GREEDY = {"temperature": 0.0, "top_p": 1.0, "n": 1}

OK = "ok"
LLM_FAILED = "llm_failed"
SKIPPED = "skipped"


class ConfigError(ValueError):
    pass


class EndpointError(RuntimeError):
    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts


class FeatureUnavailable(EndpointError):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    language: str
    template: str

    def __post_init__(self):
        if self.template.count("<input>") != 1:
            raise ConfigError(f"prompt template for {self.language!r} must contain <input> exactly once")
        if "<language>" not in self.template:
            raise ConfigError(f"prompt template for {self.language!r} must contain <language>")


def render_prompt(template: PromptTemplate, language_display_name: str, input: str) -> str:
    if not input:
        raise ValueError("cannot render a prompt for empty input")
    return template.template.replace("<language>", language_display_name).replace("<input>", input)


class PromptRegistry:
    """Per-language prompt templates, falling back to the English prompt."""

    def __init__(self, templates: Iterable[PromptTemplate] = (), names: dict | None = None):
        self.default = PromptTemplate("eng", ENGLISH_PROMPT)
        self.templates = {"eng": self.default}
        self.names = dict(LANGUAGE_NAMES)
        if names:
            self.names.update(names)
        for t in templates:
            self.templates[t.language] = t

    @classmethod
    def from_file(cls, path) -> "PromptRegistry":
        """Load ``{"templates": {lang: text}, "names": {lang: display}}`` from JSON or YAML."""
        text = Path(path).read_text(encoding="utf-8")
        if str(path).endswith((".yaml", ".yml")):
            import yaml

            data = yaml.safe_load(text) or {}
        else:
            data = json.loads(text)
        templates = [PromptTemplate(lang, t) for lang, t in (data.get("templates") or {}).items()]
        return cls(templates, data.get("names"))

    def select(self, language: str) -> PromptTemplate:
        return self.templates.get(language, self.default)

    def display_name(self, language: str) -> str:
        return self.names.get(language, language)

    def render(self, language: str, text: str) -> str:
        return render_prompt(self.select(language), self.display_name(language), text)


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model_name: str = "default"
    timeout_sec: float = 60.0
    max_in_flight: int = 4
    max_retries: int = 3
    backoff_sec: float = 0.5
    api_key: str | None = None

    @classmethod
    def from_env(cls, **overrides) -> "EndpointConfig":
        env = {
            "base_url": os.environ.get("S2TCURATE_LLM_URL", "http://localhost:8000/v1"),
            "model_name": os.environ.get("S2TCURATE_LLM_MODEL", "default"),
            "api_key": os.environ.get("S2TCURATE_LLM_API_KEY") or os.environ.get("OPENAI_API_KEY"),
        }
        env.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**env)


@dataclass
class CompletionResult:
    text: str | None
    status: str
    attempts: int = 1
    error: str | None = None


def _transient(exc: Exception) -> bool:
    if isinstance(exc, (httpx.TimeoutException, httpx.TransportError)):
        return True
    if isinstance(exc, httpx.HTTPStatusError):
        code = exc.response.status_code
        return code == 429 or code >= 500
    return False


class LLMClient:
    """Thread-safe client; one instance can be shared across workers."""

    def __init__(self, config: EndpointConfig, transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.config = config
        self._sleep = sleep
        headers = {"Authorization": f"Bearer {config.api_key}"} if config.api_key else {}
        self._http = httpx.Client(
            base_url=config.base_url.rstrip("/") + "/", timeout=config.timeout_sec, headers=headers, transport=transport
        )
        self._slots = threading.BoundedSemaphore(max(1, config.max_in_flight))

    def close(self):
        self._http.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _post(self, path: str, payload: dict) -> tuple[dict, int]:
        attempt = 0
        while True:
            attempt += 1
            try:
                with self._slots:
                    resp = self._http.post(path, json=payload)
                resp.raise_for_status()
                return resp.json(), attempt
            except Exception as exc:
                if not _transient(exc) or attempt > self.config.max_retries:
                    raise EndpointError(f"{path} failed after {attempt} attempt(s): {exc!r}", attempt) from exc
                delay = self.config.backoff_sec * 2 ** (attempt - 1)
                log.warning("retrying %s (attempt %d/%d) after %r", path, attempt, self.config.max_retries, exc)
                self._sleep(delay)

    def complete_with_info(self, prompt: str) -> tuple[str, int]:
        payload = {
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            **GREEDY,
        }
        data, attempts = self._post("chat/completions", payload)
        try:
            return data["choices"][0]["message"]["content"].strip(), attempts
        except (KeyError, IndexError, TypeError, AttributeError):
            raise EndpointError(f"malformed completion response: {data!r}", attempts) from None

    def complete(self, prompt: str) -> str:
        return self.complete_with_info(prompt)[0]

    def complete_many(self, prompts: Sequence[str]) -> list[CompletionResult]:
        def one(prompt):
            try:
                text, attempts = self.complete_with_info(prompt)
                return CompletionResult(text, OK, attempts)
            except EndpointError as exc:
                log.error("%s", exc)
                return CompletionResult(None, LLM_FAILED, exc.attempts, str(exc))

        with ThreadPoolExecutor(max_workers=max(1, self.config.max_in_flight)) as pool:
            # map preserves input order regardless of completion order
            return list(pool.map(one, prompts))

    def logprob(self, text: str) -> list[float]:
        """Per-token log-probabilities of ``text`` via ``completions`` with ``echo``."""
        if not text.strip():
            raise ValueError("cannot score empty text")
        payload = {
            "model": self.config.model_name,
            "prompt": text,
            "max_tokens": 0,
            "echo": True,
            "logprobs": 0,
            **GREEDY,
        }
        try:
            data, _ = self._post("completions", payload)
        except EndpointError as exc:
            cause = exc.__cause__
            if isinstance(cause, httpx.HTTPStatusError) and cause.response.status_code in (400, 404, 405, 501):
                raise FeatureUnavailable("endpoint does not support log-probability scoring") from exc
            raise
        try:
            values = data["choices"][0]["logprobs"]["token_logprobs"]
        except (KeyError, IndexError, TypeError):
            raise FeatureUnavailable("endpoint response carries no token log-probabilities") from None
        # servers report None for the first token (no context)
        scores = [float(v) for v in values if v is not None]
        if not scores:
            raise ValueError("no scorable tokens in text")
        return scores


def perplexity(logprobs: Sequence[float]) -> float:
    if not logprobs:
        raise ValueError("perplexity of zero tokens is undefined")
    return math.exp(-sum(logprobs) / len(logprobs))


def corpus_perplexity(per_text: Iterable[Sequence[float]]) -> float:
    pooled = [lp for text in per_text for lp in text]
    return perplexity(pooled)


# --- candidate generation ---------------------------------------------------


def _prompt_jobs(examples: list[Example]):
    """(example index, target key, language, text) for every text to restore."""
    jobs = []
    for i, ex in enumerate(examples):
        if ex.task == "asr":
            jobs.append((i, "candidate_text", ex.language, ex.y_tgt))
        else:
            # translations already carry punctuation; restore the source transcript
            jobs.append((i, "src_candidate_text", ex.language, ex.y_src))
    return jobs


def generate_candidates(examples: Iterable[Example], client: LLMClient,
                        registry: PromptRegistry | None = None) -> list[dict]:
    """One candidate record per example, in input order.

    Failed requests fall back to the original text with ``status = llm_failed``.
    """
    registry = registry or PromptRegistry()
    examples = list(examples)
    jobs = _prompt_jobs(examples)
    live = [j for j in jobs if j[3].strip()]
    results = client.complete_many([registry.render(lang, text) for _, _, lang, text in live])
    by_index = {j[0]: (j, r) for j, r in zip(live, results)}

    records = []
    for i, ex in enumerate(examples):
        key = jobs[i][1]
        rec = {"id": ex.id, "candidate_text": None, "status": SKIPPED}
        if i in by_index:
            (_, _, _, text), res = by_index[i]
            rec["status"] = res.status
            rec[key] = res.text if res.status == OK else text
        if key == "src_candidate_text":
            rec.setdefault("src_candidate_text", None)
        records.append(rec)
    return records


# --- offline mock -----------------------------------------------------------


def mock_restore(text: str) -> str:
    """Capitalize sentence starts and the pronoun "i", and end with a period."""
    words = text.split()
    out = []
    start = True
    for w in words:
        if start or w == "i" or w.startswith("i'"):
            w = w[:1].upper() + w[1:]
        out.append(w)
        start = w.endswith((".", "?", "!"))
    result = " ".join(out)
    if result and not result.endswith((".", "?", "!")):
        result += "."
    return result


def _mock_token_logprob(token: str) -> float:
    return -1.0 - 0.5 * (len(token) % 3)


class MockLLM:
    """An ``httpx`` transport handler that speaks the chat/completions schema offline.

    It inverts the registered prompt templates to recover the input sentence
    and answers with :func:`mock_restore`. ``fail_first`` makes the first n
    requests time out (for retry tests) and ``down`` makes every request fail.
    """

    def __init__(self, registry: PromptRegistry | None = None, restore: Callable[[str], str] = mock_restore,
                 fail_first: int = 0, down: bool = False, scoring: bool = True):
        self.registry = registry or PromptRegistry()
        self.restore = restore
        self.fail_first = fail_first
        self.down = down
        self.scoring = scoring
        self.requests = 0
        self._lock = threading.Lock()
        self._patterns = []
        for t in self.registry.templates.values():
            parts = re.split(r"(<language>|<input>)", t.template)
            rx = "".join(
                "(?P<input>.*)" if p == "<input>" else ".*?" if p == "<language>" else re.escape(p) for p in parts
            )
            self._patterns.append(re.compile(rx, re.S))

    def extract_input(self, prompt: str) -> str:
        for rx in self._patterns:
            m = rx.fullmatch(prompt)
            if m:
                return m.group("input")
        return prompt

    def transport(self) -> httpx.MockTransport:
        return httpx.MockTransport(self.handle)

    def handle(self, request: httpx.Request) -> httpx.Response:
        with self._lock:
            self.requests += 1
            n = self.requests
        if self.down:
            return httpx.Response(503, json={"error": "service unavailable"})
        if n <= self.fail_first:
            raise httpx.ReadTimeout("mock timeout", request=request)
        body = json.loads(request.content)
        path = request.url.path
        if path.endswith("/chat/completions"):
            prompt = body["messages"][-1]["content"]
            answer = self.restore(self.extract_input(prompt))
            return httpx.Response(
                200,
                json={
                    "object": "chat.completion",
                    "model": body.get("model"),
                    "choices": [{"index": 0, "message": {"role": "assistant", "content": answer},
                                 "finish_reason": "stop"}],
                },
            )
        if path.endswith("/completions") and self.scoring:
            tokens = body["prompt"].split()
            lps = [None] + [_mock_token_logprob(t) for t in tokens[1:]]
            return httpx.Response(
                200,
                json={"object": "text_completion", "choices": [
                    {"index": 0, "text": body["prompt"], "logprobs": {"tokens": tokens, "token_logprobs": lps}}
                ]},
            )
        return httpx.Response(404, json={"error": "not found"})


def mock_client(config: EndpointConfig | None = None, **mock_kw) -> LLMClient:
    config = config or EndpointConfig(base_url="http://mock.invalid/v1", model_name="mock", backoff_sec=0.0)
    registry = mock_kw.pop("registry", None)
    mock = MockLLM(registry, **mock_kw)
    client = LLMClient(config, transport=mock.transport(), sleep=lambda s: None)
    client.mock = mock
    return client
