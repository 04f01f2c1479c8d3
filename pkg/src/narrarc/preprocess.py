"""Plot preprocessing: simplify, resolve pronouns, normalize, summarize.

Each episode moves through strictly ordered stages
(raw -> simplified -> normalized -> summarized); stage outputs live on the
``EpisodeDoc``. Pronoun resolution slices the simplified text into
non-overlapping windows of at most fifteen sentences and rewrites each
window in one gateway call that must preserve the sentence count.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Any

from .characters import normalize_mentions, replace_with_preferred
from .errors import PreconditionError
from .gateway import ChatRequest, LLMGateway
from .model import EpisodeDoc, EpisodeKey
from .prompts import SYSTEM_PROMPT, render
from .store import Store

WINDOW_SIZE = 15

_SENTENCE_BOUNDARY = re.compile(r"(?<=[.!?])\s+")


@dataclass(frozen=True)
class SentenceWindow:
    """One contiguous block of sentences sent for rewriting."""

    sentences: tuple[str, ...]
    center_index: int
    window_size: int = WINDOW_SIZE

    def __post_init__(self) -> None:
        if len(self.sentences) > self.window_size:
            raise ValueError("window holds more sentences than window_size")
        if not 0 <= self.center_index < len(self.sentences):
            raise ValueError("center_index out of bounds")


def split_sentences(text: str) -> list[str]:
    """Split on ., !, ? followed by whitespace, keeping the delimiter."""
    return [s for s in _SENTENCE_BOUNDARY.split(text.strip()) if s]


def partition_windows(sentences: list[str], size: int = WINDOW_SIZE) -> list[SentenceWindow]:
    """Non-overlapping blocks covering every sentence exactly once."""
    windows = []
    for start in range(0, len(sentences), size):
        block = tuple(sentences[start:start + size])
        windows.append(
            SentenceWindow(
                sentences=block,
                center_index=(len(block) - 1) // 2,
                window_size=size,
            )
        )
    return windows


def _text_schema(field: str, max_length: int | None = None) -> dict[str, Any]:
    prop: dict[str, Any] = {"type": "string", "minLength": 1}
    if max_length is not None:
        prop["maxLength"] = max_length
    return {
        "type": "object",
        "properties": {field: prop},
        "required": [field],
        "additionalProperties": False,
    }


def simplify_plot(gateway: LLMGateway, doc: EpisodeDoc, genre: str = "") -> EpisodeDoc:
    """Rewrite the raw plot as simple one-fact-per-sentence prose."""
    if not doc.raw_plot.strip():
        raise PreconditionError(f"{doc.key.label}: raw_plot is empty")
    reply = gateway.chat_structured(
        ChatRequest(
            task_tag=f"preprocess.simplify@{doc.key.label}",
            system_prompt=SYSTEM_PROMPT,
            user_prompt=render(
                "simplify_plot", series=doc.key.series, genre=genre, plot=doc.raw_plot
            ),
            response_schema=_text_schema("simplified_plot"),
            temperature=gateway.config.temperature,
        )
    )
    return replace(doc, simplified_plot=reply.document["simplified_plot"])


def resolve_pronouns(gateway: LLMGateway, doc: EpisodeDoc) -> EpisodeDoc:
    """Rewrite the simplified plot window-by-window, pronouns to names.

    The per-window schema pins the output sentence count to the input
    count, so the rewritten plot always has as many sentences as before.
    """
    if not doc.simplified_plot.strip():
        raise PreconditionError(f"{doc.key.label}: simplified_plot is empty")
    sentences = split_sentences(doc.simplified_plot)
    rewritten: list[str] = []
    for window in partition_windows(sentences):
        schema = {
            "type": "object",
            "properties": {
                "sentences": {
                    "type": "array",
                    "items": {"type": "string", "minLength": 1},
                    "minItems": len(window.sentences),
                    "maxItems": len(window.sentences),
                }
            },
            "required": ["sentences"],
            "additionalProperties": False,
        }
        numbered = "\n".join(
            f"{i + 1}. {s}" for i, s in enumerate(window.sentences)
        )
        reply = gateway.chat_structured(
            ChatRequest(
                task_tag=f"preprocess.resolve_pronouns@{doc.key.label}",
                system_prompt=SYSTEM_PROMPT,
                user_prompt=render(
                    "resolve_pronouns",
                    sentences=numbered,
                    center_index=window.center_index + 1,
                    window_size=window.window_size,
                ),
                response_schema=schema,
                temperature=gateway.config.temperature,
            )
        )
        rewritten.extend(reply.document["sentences"])
    return replace(doc, simplified_plot=" ".join(rewritten))


def extract_entities(gateway: LLMGateway, doc: EpisodeDoc) -> list[str]:
    """Person mentions from the pronoun-resolved text, deduplicated in order."""
    if not doc.simplified_plot.strip():
        raise PreconditionError(f"{doc.key.label}: no pronoun-resolved text available")
    schema = {
        "type": "object",
        "properties": {
            "mentions": {"type": "array", "items": {"type": "string", "minLength": 1}}
        },
        "required": ["mentions"],
        "additionalProperties": False,
    }
    reply = gateway.chat_structured(
        ChatRequest(
            task_tag=f"preprocess.extract_entities@{doc.key.label}",
            system_prompt=SYSTEM_PROMPT,
            user_prompt=render("extract_entities", text=doc.simplified_plot),
            response_schema=schema,
            temperature=gateway.config.temperature,
        )
    )
    seen: set[str] = set()
    mentions: list[str] = []
    for mention in reply.document["mentions"]:
        if mention not in seen:
            seen.add(mention)
            mentions.append(mention)
    return mentions


def summarize_episode(gateway: LLMGateway, doc: EpisodeDoc) -> EpisodeDoc:
    """Summarize the normalized plot; the schema forces a strictly shorter text."""
    if not doc.normalized_plot.strip():
        raise PreconditionError(f"{doc.key.label}: normalized_plot is empty")
    reply = gateway.chat_structured(
        ChatRequest(
            task_tag=f"preprocess.summarize@{doc.key.label}",
            system_prompt=SYSTEM_PROMPT,
            user_prompt=render("summarize_episode", plot=doc.normalized_plot),
            response_schema=_text_schema(
                "episode_summary", max_length=len(doc.normalized_plot) - 1
            ),
            temperature=gateway.config.temperature,
        )
    )
    return replace(doc, episode_summary=reply.document["episode_summary"])


def build_season_summary(gateway: LLMGateway, docs: list[EpisodeDoc]) -> str:
    """Concatenate episode summaries in order and summarize once more."""
    if not docs:
        raise PreconditionError("build_season_summary requires at least one episode")
    keys = [d.key.sort_key() for d in docs]
    if keys != sorted(keys):
        raise PreconditionError("episodes must be ordered by (season, episode)")
    for doc in docs:
        if not doc.episode_summary.strip():
            raise PreconditionError(f"{doc.key.label}: episode_summary is empty")
    joined = "\n\n".join(
        f"{d.key.label}: {d.episode_summary}" for d in docs
    )
    reply = gateway.chat_structured(
        ChatRequest(
            task_tag=f"preprocess.season_summary@S{docs[0].key.season:02d}",
            system_prompt=SYSTEM_PROMPT,
            user_prompt=render("season_summary", summaries=joined),
            response_schema=_text_schema("season_summary"),
            temperature=gateway.config.temperature,
        )
    )
    return reply.document["season_summary"]


def preprocess_episode(gateway: LLMGateway, store: Store, key: EpisodeKey) -> EpisodeDoc:
    """Run all stages for one episode and persist the results atomically."""
    genre = store.get_series_genre(key.series)
    doc = store.get_episode_doc(key)
    with store.transaction():
        doc = simplify_plot(gateway, doc, genre=genre)
        doc = resolve_pronouns(gateway, doc)
        mentions = extract_entities(gateway, doc)
        if mentions:
            normalize_mentions(
                gateway, store, key.series, mentions,
                task_tag=f"characters.normalize@{key.label}",
            )
        registry = store.list_characters(key.series)
        doc = replace(
            doc, normalized_plot=replace_with_preferred(doc.simplified_plot, registry)
        )
        doc = summarize_episode(gateway, doc)
        store.upsert_episode_doc(doc)
    return doc


def preprocess_season(
    gateway: LLMGateway, store: Store, series: str, season: int
) -> str:
    """Preprocess every ingested episode in order, then build the season summary."""
    docs = store.list_episode_docs(series, season)
    if not docs:
        raise PreconditionError(f"no ingested episodes for {series} season {season}")
    processed = [preprocess_episode(gateway, store, d.key) for d in docs]
    summary = build_season_summary(gateway, processed)
    store.set_season_summary(series, season, summary)
    return summary
