"""Domain model for narrative arcs, progressions, characters, and episodes.

Every type is an immutable value object with a canonical JSON encoding
(snake_case field names, sets rendered as sorted lists). That encoding is
the wire format of the HTTP service and the export format of the CLI, so
it must stay byte-stable: same data in, same bytes out.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Iterable


class ArcType(str, Enum):
    """The three storyline categories an arc can belong to."""

    ANTHOLOGY = "Anthology"
    SOAP = "Soap"
    GENRE_SPECIFIC = "GenreSpecific"


@dataclass(frozen=True, order=True)
class EpisodeKey:
    """Identifies one episode; orders lexicographically by (season, episode)."""

    series: str
    season: int
    episode: int

    def __post_init__(self) -> None:
        if not self.series:
            raise ValueError("series must be non-empty")
        if self.season < 1 or self.episode < 1:
            raise ValueError("season and episode must be positive")

    @property
    def label(self) -> str:
        return f"S{self.season:02d}E{self.episode:02d}"

    def sort_key(self) -> tuple[int, int]:
        return (self.season, self.episode)


@dataclass(frozen=True)
class Progression:
    """One arc's development within one specific episode."""

    progression_id: str
    arc_id: str
    content: str
    series: str
    season: int
    episode: int
    interfering_characters: frozenset[str] = frozenset()

    def episode_key(self) -> EpisodeKey:
        return EpisodeKey(self.series, self.season, self.episode)


@dataclass(frozen=True)
class NarrativeArc:
    """A storyline with a type, characters, and per-episode progressions."""

    arc_id: str
    title: str
    description: str
    arc_type: ArcType
    series: str
    main_characters: frozenset[str] = frozenset()
    progressions: tuple[Progression, ...] = ()


@dataclass(frozen=True)
class Character:
    """A normalized character entity with a preferred name and known aliases."""

    character_id: str
    preferred_name: str
    series: str
    alternative_names: frozenset[str] = frozenset()

    def all_names(self) -> frozenset[str]:
        return self.alternative_names | {self.preferred_name}


@dataclass(frozen=True)
class EpisodeDoc:
    """One episode's plot text at each preprocessing stage.

    ``simplified_plot``, ``normalized_plot``, and ``episode_summary`` start
    empty and are filled by successive stages; ``normalized_plot`` may only
    be set once ``simplified_plot`` is.
    """

    key: EpisodeKey
    raw_plot: str = ""
    simplified_plot: str = ""
    normalized_plot: str = ""
    episode_summary: str = ""

    def __post_init__(self) -> None:
        if self.normalized_plot and not self.simplified_plot:
            raise ValueError("normalized_plot set before simplified_plot")


@dataclass(frozen=True)
class Violation:
    """One invariant violation found by ``validate_arc``."""

    code: str
    message: str


def order_progressions(arc: NarrativeArc) -> NarrativeArc:
    """Return the arc with progressions sorted ascending by (season, episode).

    Stable and idempotent; a no-op on already-sorted arcs.
    """
    ordered = tuple(sorted(arc.progressions, key=lambda p: (p.season, p.episode)))
    if ordered == arc.progressions:
        return arc
    return replace(arc, progressions=ordered)


def validate_arc(arc: NarrativeArc, registry_ids: Iterable[str]) -> list[Violation]:
    """Check every arc invariant against a character registry.

    Returns an empty list iff the arc is well-formed. Violations are data,
    not errors: callers decide whether to reject, repair, or surface them.
    """
    known = set(registry_ids)
    violations: list[Violation] = []

    if not arc.title.strip():
        violations.append(Violation("empty-title", f"arc {arc.arc_id} has an empty title"))
    if not arc.description.strip():
        violations.append(
            Violation("empty-description", f"arc {arc.arc_id} has an empty description")
        )

    keys = [(p.season, p.episode) for p in arc.progressions]
    if keys != sorted(keys):
        violations.append(
            Violation("unsorted-progressions", f"arc {arc.arc_id} progressions out of order")
        )
    seen: set[tuple[int, int]] = set()
    for season, episode in keys:
        if (season, episode) in seen:
            violations.append(
                Violation(
                    "duplicate-episode-progression",
                    f"arc {arc.arc_id} has multiple progressions in "
                    f"S{season:02d}E{episode:02d}",
                )
            )
        seen.add((season, episode))

    if arc.arc_type is ArcType.ANTHOLOGY and len(set(keys)) > 1:
        violations.append(
            Violation(
                "anthology-multi-episode",
                f"anthology arc {arc.arc_id} spans {len(set(keys))} episodes",
            )
        )

    for cid in sorted(arc.main_characters):
        if cid not in known:
            violations.append(
                Violation("unknown-main-character", f"arc {arc.arc_id} references {cid}")
            )

    for prog in arc.progressions:
        if prog.arc_id != arc.arc_id:
            violations.append(
                Violation(
                    "progression-arc-mismatch",
                    f"progression {prog.progression_id} belongs to {prog.arc_id}",
                )
            )
        if prog.series != arc.series:
            violations.append(
                Violation(
                    "progression-series-mismatch",
                    f"progression {prog.progression_id} is in series {prog.series!r}",
                )
            )
        if not prog.content.strip():
            violations.append(
                Violation(
                    "empty-progression-content",
                    f"progression {prog.progression_id} has empty content",
                )
            )
        for cid in sorted(prog.interfering_characters):
            if cid not in known:
                violations.append(
                    Violation(
                        "unknown-interfering-character",
                        f"progression {prog.progression_id} references {cid}",
                    )
                )

    return violations


# --------------------------------------------------------------------------
# Canonical JSON encoding
# --------------------------------------------------------------------------

def episode_key_to_dict(key: EpisodeKey) -> dict[str, Any]:
    return {"series": key.series, "season": key.season, "episode": key.episode}


def episode_key_from_dict(doc: dict[str, Any]) -> EpisodeKey:
    return EpisodeKey(series=doc["series"], season=doc["season"], episode=doc["episode"])


def progression_to_dict(prog: Progression) -> dict[str, Any]:
    return {
        "progression_id": prog.progression_id,
        "arc_id": prog.arc_id,
        "content": prog.content,
        "series": prog.series,
        "season": prog.season,
        "episode": prog.episode,
        "interfering_characters": sorted(prog.interfering_characters),
    }


def progression_from_dict(doc: dict[str, Any]) -> Progression:
    return Progression(
        progression_id=doc["progression_id"],
        arc_id=doc["arc_id"],
        content=doc["content"],
        series=doc["series"],
        season=doc["season"],
        episode=doc["episode"],
        interfering_characters=frozenset(doc.get("interfering_characters", [])),
    )


def arc_to_dict(arc: NarrativeArc) -> dict[str, Any]:
    return {
        "arc_id": arc.arc_id,
        "title": arc.title,
        "description": arc.description,
        "arc_type": arc.arc_type.value,
        "series": arc.series,
        "main_characters": sorted(arc.main_characters),
        "progressions": [progression_to_dict(p) for p in arc.progressions],
    }


def arc_from_dict(doc: dict[str, Any]) -> NarrativeArc:
    return NarrativeArc(
        arc_id=doc["arc_id"],
        title=doc["title"],
        description=doc["description"],
        arc_type=ArcType(doc["arc_type"]),
        series=doc["series"],
        main_characters=frozenset(doc.get("main_characters", [])),
        progressions=tuple(progression_from_dict(p) for p in doc.get("progressions", [])),
    )


def character_to_dict(char: Character) -> dict[str, Any]:
    return {
        "character_id": char.character_id,
        "preferred_name": char.preferred_name,
        "series": char.series,
        "alternative_names": sorted(char.alternative_names),
    }


def character_from_dict(doc: dict[str, Any]) -> Character:
    return Character(
        character_id=doc["character_id"],
        preferred_name=doc["preferred_name"],
        series=doc["series"],
        alternative_names=frozenset(doc.get("alternative_names", [])),
    )


def episode_doc_to_dict(doc: EpisodeDoc) -> dict[str, Any]:
    return {
        "key": episode_key_to_dict(doc.key),
        "raw_plot": doc.raw_plot,
        "simplified_plot": doc.simplified_plot,
        "normalized_plot": doc.normalized_plot,
        "episode_summary": doc.episode_summary,
    }


def episode_doc_from_dict(doc: dict[str, Any]) -> EpisodeDoc:
    return EpisodeDoc(
        key=episode_key_from_dict(doc["key"]),
        raw_plot=doc.get("raw_plot", ""),
        simplified_plot=doc.get("simplified_plot", ""),
        normalized_plot=doc.get("normalized_plot", ""),
        episode_summary=doc.get("episode_summary", ""),
    )


def canonical_dumps(doc: Any) -> str:
    """Serialize to the canonical JSON text used for exports and reports.

    Sorted keys, two-space indent, no ASCII escaping, trailing newline.
    Byte-identical output for equal inputs is a hard contract relied on by
    the golden-export and determinism tests.
    """
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
