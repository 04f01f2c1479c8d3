"""Character registry: mention normalization, aliasing, and duplicate hints.

Mentions extracted from plots are grouped into characters by a single
gateway call; afterwards the registry supports deterministic text
normalization (aliases replaced by preferred names) and Jaccard-based
duplicate suggestions that are surfaced to a human, never auto-merged.
"""

from __future__ import annotations

import re
from typing import Any, Iterable

from .errors import PreconditionError
from .gateway import ChatRequest, LLMGateway
from .model import Character
from .prompts import SYSTEM_PROMPT, render
from .store import Store

_NORMALIZE_SCHEMA: dict[str, Any] = {
    "type": "object",
    "properties": {
        "assignments": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "mention": {"type": "string", "minLength": 1},
                    "preferred_name": {"type": "string", "minLength": 1},
                },
                "required": ["mention", "preferred_name"],
                "additionalProperties": False,
            },
        }
    },
    "required": ["assignments"],
    "additionalProperties": False,
}


def normalize_mentions(
    gateway: LLMGateway,
    store: Store,
    series: str,
    mentions: list[str],
    task_tag: str = "characters.normalize",
) -> list[Character]:
    """Attach, merge, or create characters for the given raw mentions.

    One gateway call proposes a preferred name per mention; mentions that
    share a preferred name collapse into one character, and a preferred
    name matching an existing character (by any known name,
    case-insensitive) attaches the mentions as alternative names.
    Returns the characters that were created or updated.
    """
    if not mentions:
        raise PreconditionError("normalize_mentions requires at least one mention")

    existing = store.list_characters(series)
    known_lines = [
        f"- {c.preferred_name} (also known as: {', '.join(sorted(c.alternative_names)) or 'none'})"
        for c in existing
    ]
    reply = gateway.chat_structured(
        ChatRequest(
            task_tag=task_tag,
            system_prompt=SYSTEM_PROMPT,
            user_prompt=render(
                "normalize_mentions",
                series=series,
                known_characters="\n".join(known_lines) or "(none yet)",
                mentions="\n".join(f"- {m}" for m in mentions),
            ),
            response_schema=_NORMALIZE_SCHEMA,
            temperature=gateway.config.temperature,
        )
    )

    assigned = {
        entry["mention"]: entry["preferred_name"]
        for entry in reply.document["assignments"]
    }
    # Group mentions by proposed preferred name, in first-appearance order.
    # Mentions the model skipped become their own fresh characters.
    groups: dict[str, tuple[str, list[str]]] = {}
    for mention in mentions:
        preferred = assigned.get(mention, mention)
        _, members = groups.setdefault(preferred.lower(), (preferred, []))
        members.append(mention)

    by_name = {
        name.lower(): char for char in existing for name in char.all_names()
    }
    touched: list[Character] = []
    for _, (preferred, members) in groups.items():
        target = by_name.get(preferred.lower())
        if target is None:
            target = Character(
                character_id=store.new_id(),
                preferred_name=preferred,
                series=series,
            )
        aliases = {
            m for m in members if m.lower() != target.preferred_name.lower()
        }
        updated = Character(
            character_id=target.character_id,
            preferred_name=target.preferred_name,
            series=series,
            alternative_names=target.alternative_names | aliases,
        )
        updated = store.save_character(updated)
        for name in updated.all_names():
            by_name[name.lower()] = updated
        touched.append(updated)
    return touched


def replace_with_preferred(text: str, registry: Iterable[Character]) -> str:
    """Replace every alias occurrence with its owner's preferred name.

    Longest match wins, matches are word-boundary anchored, and preferred
    names already present are left untouched; the operation is idempotent.
    """
    replacements: dict[str, str] = {}
    for char in registry:
        for alias in char.alternative_names:
            replacements.setdefault(alias, char.preferred_name)
    for char in registry:
        # Preferred names map to themselves and shadow any alias of the
        # same spelling, which is what keeps repeated application stable.
        replacements[char.preferred_name] = char.preferred_name
    if not replacements:
        return text
    ordered = sorted(replacements, key=lambda name: (-len(name), name))
    pattern = re.compile(
        r"(?<!\w)(?:" + "|".join(re.escape(name) for name in ordered) + r")(?!\w)"
    )
    return pattern.sub(lambda m: replacements[m.group(0)], text)


def name_tokens(char: Character) -> frozenset[str]:
    """Lowercase word tokens across the preferred and alternative names."""
    tokens: set[str] = set()
    for name in char.all_names():
        tokens.update(re.findall(r"\w+", name.lower()))
    return frozenset(tokens)


def jaccard_similarity(a: Character, b: Character) -> float:
    """Token-set Jaccard index in [0, 1] between two distinct characters."""
    if a.character_id == b.character_id:
        raise PreconditionError("jaccard_similarity requires two distinct characters")
    ta, tb = name_tokens(a), name_tokens(b)
    union = ta | tb
    if not union:
        return 0.0
    return len(ta & tb) / len(union)


def suggest_duplicates(
    registry: list[Character],
    threshold: float = 0.5,
    dismissed: set[tuple[str, str]] | None = None,
) -> list[tuple[Character, Character, float]]:
    """All unordered pairs scoring >= threshold, best first.

    Suggestions only: the human decides, since same-surname false
    positives are expected. Pairs in ``dismissed`` are skipped.
    """
    if not 0.0 < threshold <= 1.0:
        raise PreconditionError("threshold must be in (0, 1]")
    dismissed = dismissed or set()
    ordered = sorted(registry, key=lambda c: c.character_id)
    results: list[tuple[Character, Character, float]] = []
    for i, first in enumerate(ordered):
        for second in ordered[i + 1:]:
            pair = (first.character_id, second.character_id)
            if pair in dismissed:
                continue
            score = jaccard_similarity(first, second)
            if score >= threshold:
                results.append((first, second, score))
    results.sort(key=lambda item: (-item[2], item[0].character_id, item[1].character_id))
    return results


def merge_characters(store: Store, keep_id: str, remove_id: str) -> Character:
    """Merge ``remove`` into ``keep`` atomically; see ``Store.merge_characters``."""
    return store.merge_characters(keep_id, remove_id)
