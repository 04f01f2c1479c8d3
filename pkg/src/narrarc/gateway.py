"""Single choke point for generative-model and embedding-model calls.

Two providers exist: a live HTTP provider and a deterministic mock driven
by a scripted fixture file. No other module in the package may open a
connection to a model vendor; everything goes through ``LLMGateway``.

Structured output contract: every chat call carries a JSON schema, the
raw model text is parsed and validated, and invalid replies are re-asked
with the validation error appended to the prompt, up to
``max_repair_attempts`` extra tries.
"""

from __future__ import annotations

import fnmatch
import hashlib
import json
import math
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Protocol

import jsonschema

from .config import ProviderConfig
from .errors import (
    ConfigError,
    PreconditionError,
    ProviderUnavailable,
    SchemaRepairExhausted,
    UnexpectedRequest,
)


@dataclass(frozen=True)
class ChatRequest:
    """One structured-output request issued by a pipeline task."""

    task_tag: str
    system_prompt: str
    user_prompt: str
    response_schema: dict[str, Any]
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if not self.response_schema:
            raise PreconditionError(f"{self.task_tag}: response_schema must be non-empty")
        if not 0.0 <= self.temperature <= 1.0:
            raise PreconditionError(f"{self.task_tag}: temperature must be in [0, 1]")


@dataclass(frozen=True)
class EmbeddingVector:
    """Fixed-dimension embedding with a guaranteed positive norm."""

    values: tuple[float, ...]
    dimension: int

    def __post_init__(self) -> None:
        if self.dimension < 1 or len(self.values) != self.dimension:
            raise ValueError("dimension must match the number of values")
        if math.fsum(v * v for v in self.values) == 0.0:
            raise ValueError("embedding norm must be > 0")


@dataclass(frozen=True)
class GatewayReply:
    """Parsed, schema-valid document plus how many repair re-asks it took."""

    document: Any
    repair_count: int


@dataclass
class CallRecord:
    """Captured chat call, kept for test inspection and run accounting."""

    task_tag: str
    system_prompt: str
    user_prompt: str
    document: Any = None
    repair_count: int = 0


class ChatProvider(Protocol):
    def complete(self, task_tag: str, system_prompt: str, user_prompt: str,
                 temperature: float, model: str) -> str: ...

    def embed(self, texts: list[str]) -> list[list[float]]: ...


def _hash_unit_vector(text: str, dimension: int) -> list[float]:
    """Pseudo-random unit vector derived purely from SHA-256 of the text.

    Counter-mode expansion keeps the mapping stable across platforms and
    library versions, which the byte-identical golden exports depend on.
    """
    seed = text.encode("utf-8")
    values: list[float] = []
    counter = 0
    while len(values) < dimension:
        digest = hashlib.sha256(seed + b"\x00" + counter.to_bytes(4, "big")).digest()
        for offset in range(0, len(digest) - 7, 8):
            chunk = int.from_bytes(digest[offset:offset + 8], "big")
            values.append(chunk / 2 ** 63 - 1.0)
            if len(values) == dimension:
                break
        counter += 1
    norm = math.sqrt(math.fsum(v * v for v in values))
    if norm == 0.0:  # unreachable in practice; keep the norm contract anyway
        values[0] = 1.0
        norm = 1.0
    return [v / norm for v in values]


class MockProvider:
    """Deterministic offline provider driven by an ordered script.

    Each chat call consumes the next script entry; the entry's ``task_tag``
    pattern (fnmatch) must match the incoming tag, otherwise the call fails
    loudly. Entries are dicts with a ``task_tag`` plus exactly one of:

    - ``response``: a JSON value returned as the model text,
    - ``raw``: a literal string returned verbatim (for malformed-output tests),
    - ``error``: raises ``ProviderUnavailable`` (for fault injection).

    Embeddings are hash-seeded unit vectors: identical text, identical vector.
    """

    def __init__(self, script: list[dict[str, Any]], embed_dimension: int = 32):
        for index, entry in enumerate(script):
            if "task_tag" not in entry:
                raise PreconditionError(f"mock script entry {index} lacks task_tag")
            if sum(k in entry for k in ("response", "raw", "error")) != 1:
                raise PreconditionError(
                    f"mock script entry {index} needs exactly one of response/raw/error"
                )
        self._script = list(script)
        self._cursor = 0
        self.embed_dimension = embed_dimension

    @classmethod
    def from_file(cls, path: str | os.PathLike[str], embed_dimension: int = 32) -> "MockProvider":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(doc, list):
            raise PreconditionError(f"mock script {path} must be a JSON array")
        return cls(doc, embed_dimension=embed_dimension)

    @property
    def consumed(self) -> int:
        return self._cursor

    @property
    def remaining(self) -> int:
        return len(self._script) - self._cursor

    def complete(self, task_tag: str, system_prompt: str, user_prompt: str,
                 temperature: float, model: str) -> str:
        if self._cursor >= len(self._script):
            raise UnexpectedRequest(
                f"mock script exhausted; unexpected request for {task_tag!r}"
            )
        entry = self._script[self._cursor]
        pattern = entry["task_tag"]
        if not fnmatch.fnmatchcase(task_tag, pattern):
            raise UnexpectedRequest(
                f"mock script entry {self._cursor} expects {pattern!r}, "
                f"got request for {task_tag!r}"
            )
        self._cursor += 1
        if "error" in entry:
            raise ProviderUnavailable(
                f"scripted provider failure at entry {self._cursor - 1} ({task_tag})"
            )
        if "raw" in entry:
            return entry["raw"]
        return json.dumps(entry["response"])

    def embed(self, texts: list[str]) -> list[list[float]]:
        return [_hash_unit_vector(text, self.embed_dimension) for text in texts]


class HttpChatProvider:
    """OpenAI-compatible chat/embeddings provider over HTTP.

    Credentials come from the environment variable named by
    ``api_key_env``; any transport or auth failure surfaces as
    ``ProviderUnavailable``. Untested offline by design.
    """

    def __init__(self, base_url: str, api_key_env: str, embed_dimension: int):
        if not base_url:
            raise PreconditionError("live provider requires a base_url")
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.embed_dimension = embed_dimension

    def _headers(self) -> dict[str, str]:
        key = os.environ.get(self.api_key_env, "")
        if not key:
            raise ProviderUnavailable(f"missing API key in ${self.api_key_env}")
        return {"Authorization": f"Bearer {key}"}

    def complete(self, task_tag: str, system_prompt: str, user_prompt: str,
                 temperature: float, model: str) -> str:
        import httpx

        payload = {
            "model": model,
            "temperature": temperature,
            "response_format": {"type": "json_object"},
            "messages": [
                {"role": "system", "content": system_prompt},
                {"role": "user", "content": user_prompt},
            ],
        }
        try:
            resp = httpx.post(
                f"{self.base_url}/chat/completions",
                json=payload, headers=self._headers(), timeout=120.0,
            )
            resp.raise_for_status()
            return resp.json()["choices"][0]["message"]["content"]
        except ProviderUnavailable:
            raise
        except Exception as exc:
            raise ProviderUnavailable(f"chat call failed: {exc}") from exc

    def embed(self, texts: list[str]) -> list[list[float]]:
        import httpx

        try:
            resp = httpx.post(
                f"{self.base_url}/embeddings",
                json={"input": texts}, headers=self._headers(), timeout=120.0,
            )
            resp.raise_for_status()
            return [row["embedding"] for row in resp.json()["data"]]
        except ProviderUnavailable:
            raise
        except Exception as exc:
            raise ProviderUnavailable(f"embedding call failed: {exc}") from exc


_FENCE_RE = re.compile(r"```(?:json)?\s*([\s\S]*?)```", re.IGNORECASE)


def _parse_model_json(raw: str) -> Any:
    text = raw.strip()
    if text.startswith("```"):
        match = _FENCE_RE.search(text)
        if match:
            text = match.group(1)
    return json.loads(text)


class LLMGateway:
    """Validating front door for all chat and embedding calls."""

    def __init__(self, provider: ChatProvider, config: ProviderConfig | None = None):
        self.provider = provider
        self.config = config or ProviderConfig()
        self.calls: list[CallRecord] = []
        self.provider_chat_calls = 0
        self.embed_calls = 0

    @classmethod
    def from_config(cls, config: ProviderConfig) -> "LLMGateway":
        if config.kind == "mock":
            if not config.fixture_path:
                raise ConfigError("mock provider requires a fixture path (file or env)")
            provider: ChatProvider = MockProvider.from_file(
                config.fixture_path, embed_dimension=config.embed_dimension
            )
        else:
            provider = HttpChatProvider(
                config.base_url, config.api_key_env, config.embed_dimension
            )
        return cls(provider, config)

    def model_for(self, task_tag: str) -> str:
        return self.config.task_models.get(task_tag, self.config.model)

    def chat_structured(self, req: ChatRequest) -> GatewayReply:
        """Issue one chat call and return a document valid under the schema.

        Malformed or non-conforming replies are re-asked with the error
        appended, up to ``max_repair_attempts`` extra tries; after that,
        ``SchemaRepairExhausted`` is raised and the caller's run aborts.
        """
        validator = jsonschema.Draft202012Validator(req.response_schema)
        model = self.model_for(req.task_tag)
        user_prompt = req.user_prompt
        last_error = ""
        for attempt in range(self.config.max_repair_attempts + 1):
            self.provider_chat_calls += 1
            raw = self.provider.complete(
                req.task_tag, req.system_prompt, user_prompt, req.temperature, model
            )
            try:
                document = _parse_model_json(raw)
                error = next(iter(validator.iter_errors(document)), None)
                if error is not None:
                    raise ValueError(error.message)
            except (ValueError, json.JSONDecodeError) as exc:
                last_error = str(exc)
                user_prompt = (
                    f"{req.user_prompt}\n\n"
                    f"Your previous reply was rejected: {last_error}\n"
                    "Return ONLY a corrected JSON object matching the schema."
                )
                continue
            record = CallRecord(
                task_tag=req.task_tag,
                system_prompt=req.system_prompt,
                user_prompt=req.user_prompt,
                document=document,
                repair_count=attempt,
            )
            self.calls.append(record)
            return GatewayReply(document=document, repair_count=attempt)
        raise SchemaRepairExhausted(
            f"{req.task_tag}: output invalid after "
            f"{self.config.max_repair_attempts} repair attempts ({last_error})"
        )

    def embed(self, texts: list[str]) -> list[EmbeddingVector]:
        """Embed each text; every returned vector has the provider dimension."""
        if not texts:
            raise PreconditionError("embed requires a non-empty list of texts")
        if any(not t for t in texts):
            raise PreconditionError("embed requires every text to be non-empty")
        self.embed_calls += 1
        rows = self.provider.embed(texts)
        vectors = [EmbeddingVector(values=tuple(row), dimension=len(row)) for row in rows]
        dims = {v.dimension for v in vectors}
        if len(dims) != 1:
            raise ProviderUnavailable(f"provider returned mixed dimensions: {sorted(dims)}")
        return vectors
