"""Evaluation harness: score an export against gold annotations.

Extracted arcs are matched one-to-one to gold arcs greedily by descending
embedding similarity of their title+description text, restricted to pairs
of the same arc type at or above the match threshold. Under the mock
provider identical strings embed identically (cosine 1.0), so offline
evaluation degrades to exact-text matching.
"""

from __future__ import annotations

from typing import Any

import jsonschema

from .characters import suggest_duplicates
from .errors import PreconditionError
from .gateway import LLMGateway
from .model import Character
from .semantic import cosine_similarity

GOLD_SCHEMA: dict[str, Any] = {
    "type": "object",
    "properties": {
        "arcs": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "title": {"type": "string", "minLength": 1},
                    "arc_type": {"enum": ["Anthology", "Soap", "GenreSpecific"]},
                    "description": {"type": "string"},
                    "main_characters": {"type": "array", "items": {"type": "string"}},
                    "episodes": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "properties": {
                                "season": {"type": "integer", "minimum": 1},
                                "episode": {"type": "integer", "minimum": 1},
                            },
                            "required": ["season", "episode"],
                            "additionalProperties": False,
                        },
                    },
                },
                "required": ["title", "arc_type", "main_characters", "episodes"],
                "additionalProperties": False,
            },
        },
        "characters": {"type": "array", "items": {"type": "string"}},
    },
    "required": ["arcs", "characters"],
    "additionalProperties": False,
}

ARC_TYPES = ("Anthology", "Soap", "GenreSpecific")


def _ratio(numerator: int, denominator: int) -> float:
    # Vacuous cases score 1.0: no extractions means no false positives,
    # no gold arcs means nothing was missed.
    if denominator == 0:
        return 1.0
    return numerator / denominator


def evaluate_export(
    gateway: LLMGateway,
    export_doc: dict[str, Any],
    gold_doc: dict[str, Any],
    match_threshold: float = 0.80,
) -> dict[str, Any]:
    """Compute per-type arc precision/recall and character precision."""
    error = next(
        iter(jsonschema.Draft202012Validator(GOLD_SCHEMA).iter_errors(gold_doc)), None
    )
    if error is not None:
        raise PreconditionError(f"gold annotations invalid: {error.message}")

    extracted = [
        {
            "title": arc["title"],
            "description": arc.get("description", ""),
            "arc_type": arc["arc_type"],
        }
        for arc in export_doc.get("arcs", [])
    ]
    gold = gold_doc["arcs"]

    pairs: list[tuple[float, int, int]] = []
    if extracted and gold:
        extracted_vecs = gateway.embed(
            [f"Title: {a['title']}\nDescription: {a['description']}" for a in extracted]
        )
        gold_vecs = gateway.embed(
            [
                f"Title: {g['title']}\nDescription: {g.get('description', '')}"
                for g in gold
            ]
        )
        for i, arc in enumerate(extracted):
            for j, gold_arc in enumerate(gold):
                if arc["arc_type"] != gold_arc["arc_type"]:
                    continue
                score = cosine_similarity(extracted_vecs[i], gold_vecs[j])
                if score >= match_threshold:
                    pairs.append((score, i, j))

    pairs.sort(key=lambda item: (-item[0], item[1], item[2]))
    matched_extracted: dict[int, int] = {}
    matched_gold: set[int] = set()
    for _score, i, j in pairs:
        if i in matched_extracted or j in matched_gold:
            continue
        matched_extracted[i] = j
        matched_gold.add(j)

    arc_metrics: dict[str, Any] = {}
    total_extracted = total_gold = total_matched = 0
    for arc_type in ARC_TYPES:
        n_extracted = sum(1 for a in extracted if a["arc_type"] == arc_type)
        n_gold = sum(1 for g in gold if g["arc_type"] == arc_type)
        n_matched = sum(
            1 for i in matched_extracted if extracted[i]["arc_type"] == arc_type
        )
        total_extracted += n_extracted
        total_gold += n_gold
        total_matched += n_matched
        arc_metrics[arc_type] = {
            "extracted": n_extracted,
            "gold": n_gold,
            "matched": n_matched,
            "precision": _ratio(n_matched, n_extracted),
            "recall": _ratio(n_matched, n_gold),
        }
    arc_metrics["overall"] = {
        "extracted": total_extracted,
        "gold": total_gold,
        "matched": total_matched,
        "precision": _ratio(total_matched, total_extracted),
        "recall": _ratio(total_matched, total_gold),
    }

    gold_names = {name.lower() for name in gold_doc["characters"]}
    extracted_chars = export_doc.get("characters", [])
    matched_chars = sum(
        1 for c in extracted_chars if c["preferred_name"].lower() in gold_names
    )
    registry = [
        Character(
            character_id=c["character_id"],
            preferred_name=c["preferred_name"],
            series=c["series"],
            alternative_names=frozenset(c.get("alternative_names", [])),
        )
        for c in extracted_chars
    ]
    duplicates = suggest_duplicates(registry)

    return {
        "match_threshold": match_threshold,
        "arc_metrics": arc_metrics,
        "character_metrics": {
            "extracted": len(extracted_chars),
            "gold": len(gold_doc["characters"]),
            "matched": matched_chars,
            "precision": _ratio(matched_chars, len(extracted_chars)),
        },
        "duplicate_character_pairs": len(duplicates),
    }


def format_report(report: dict[str, Any]) -> str:
    """Human-readable metric lines, one per figure."""
    lines = []
    for arc_type in (*ARC_TYPES, "overall"):
        metrics = report["arc_metrics"][arc_type]
        lines.append(
            f"{arc_type} precision: {metrics['matched']}/{metrics['extracted']}"
            f" = {metrics['precision']:.3f}"
        )
        lines.append(
            f"{arc_type} recall: {metrics['matched']}/{metrics['gold']}"
            f" = {metrics['recall']:.3f}"
        )
    chars = report["character_metrics"]
    lines.append(
        f"character precision: {chars['matched']}/{chars['extracted']}"
        f" = {chars['precision']:.3f}"
    )
    lines.append(
        f"duplicate character pairs flagged: {report['duplicate_character_pairs']}"
    )
    return "\n".join(lines)
