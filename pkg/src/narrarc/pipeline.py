"""The nine-stage extraction workflow that turns one episode into arcs.

Stages run strictly in order, each backed by one gateway call (skipped
when its input set makes the call pointless, e.g. no prior arcs for the
flagging stage). Nothing touches the store until the final review stage,
which commits every surviving draft inside a single transaction: a
failure at ANY stage leaves the store exactly as it was.

Episodes must be processed in broadcast order so that each run sees
exactly the arcs committed by the episodes before it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from .config import SemanticConfig
from .errors import (
    EpisodeAlreadyProcessed,
    OutOfOrderEpisode,
    PipelineStageError,
    PreconditionError,
)
from .gateway import ChatRequest, LLMGateway
from .model import (
    ArcType,
    EpisodeKey,
    NarrativeArc,
    Progression,
    canonical_dumps,
)
from .prompts import SYSTEM_PROMPT, render
from .semantic import link_or_create
from .store import Store

RUNNING_TYPES = (ArcType.SOAP, ArcType.GENRE_SPECIFIC)


class Stage(enum.Enum):
    AGENT1 = 1
    AGENT2 = 2
    AGENT3 = 3
    AGENT4 = 4
    AGENT5 = 5
    AGENT6 = 6
    AGENT7 = 7
    AGENT8 = 8
    AGENT9 = 9
    DONE = 10


@dataclass
class DraftArc:
    """A candidate arc mid-pipeline; has no id until committed."""

    title: str
    description: str
    arc_type: ArcType
    progression_content: str
    main_character_names: list[str] = field(default_factory=list)
    interfering_character_names: list[str] = field(default_factory=list)
    main_character_ids: frozenset[str] = frozenset()
    interfering_character_ids: frozenset[str] = frozenset()
    existing_arc_id: str | None = None
    resolution_rationale: str = ""


@dataclass
class PipelineState:
    """Carries one episode's run from flagging through commit."""

    episode: EpisodeKey
    season_arcs: list[NarrativeArc]
    flagged_arcs: list[tuple[str, str]] = field(default_factory=list)
    candidate_arcs: list[DraftArc] = field(default_factory=list)
    stage: Stage = Stage.AGENT1


@dataclass
class RunReport:
    """What one episode run created, extended, merged, dropped, and warned."""

    series: str
    season: int
    episode: int
    created_arcs: list[dict[str, str]] = field(default_factory=list)
    extended_arcs: list[dict[str, str]] = field(default_factory=list)
    merges: list[dict[str, Any]] = field(default_factory=list)
    drops: list[dict[str, str]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    gateway_call_count: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "series": self.series,
            "season": self.season,
            "episode": self.episode,
            "created_arcs": self.created_arcs,
            "extended_arcs": self.extended_arcs,
            "merges": self.merges,
            "drops": self.drops,
            "warnings": self.warnings,
            "gateway_call_count": self.gateway_call_count,
        }


def _expect_stage(state: PipelineState, expected: Stage) -> None:
    if state.stage is not expected:
        raise PreconditionError(
            f"stage must be {expected.name}, pipeline is at {state.stage.name}"
        )


def _draft_lines(drafts: list[DraftArc]) -> str:
    lines = []
    for i, d in enumerate(drafts):
        mains = ", ".join(d.main_character_names) or "unknown"
        lines.append(
            f"{i}. [{d.arc_type.value}] {d.title}: {d.description} "
            f"(main characters: {mains}; progression: {d.progression_content})"
        )
    return "\n".join(lines)


class EpisodePipeline:
    """Runs the nine agents for one episode against one store."""

    def __init__(
        self,
        gateway: LLMGateway,
        store: Store,
        key: EpisodeKey,
        semantic: SemanticConfig | None = None,
    ):
        self.gateway = gateway
        self.store = store
        self.key = key
        self.semantic = semantic or SemanticConfig()
        self.report = RunReport(series=key.series, season=key.season, episode=key.episode)
        self.genre = store.get_series_genre(key.series)
        doc = store.get_episode_doc(key)
        if not doc.normalized_plot.strip() or not doc.episode_summary.strip():
            raise PreconditionError(
                f"{key.label}: preprocessing incomplete (normalize and summarize first)"
            )
        self.plot = doc.normalized_plot
        self.season_summary = self._season_summary_so_far()
        self.registry = {c.character_id: c for c in store.list_characters(key.series)}

    # -- context -----------------------------------------------------------

    def _season_summary_so_far(self) -> str:
        docs = self.store.list_episode_docs(self.key.series, self.key.season)
        parts = [
            f"{d.key.label}: {d.episode_summary}"
            for d in docs
            if d.key.episode < self.key.episode and d.episode_summary.strip()
        ]
        return "\n".join(parts) or "(season start; nothing has happened yet)"

    def _chat(self, agent: str, template: str, schema: dict[str, Any], **params: object) -> Any:
        reply = self.gateway.chat_structured(
            ChatRequest(
                task_tag=f"pipeline.{agent}@{self.key.label}",
                system_prompt=SYSTEM_PROMPT,
                user_prompt=render(template, **params),
                response_schema=schema,
                temperature=self.gateway.config.temperature,
            )
        )
        return reply.document

    def _resolve_names(self, names: list[str], stage: str, title: str) -> frozenset[str]:
        by_name = {
            name.lower(): char.character_id
            for char in self.registry.values()
            for name in char.all_names()
        }
        resolved = set()
        for name in names:
            cid = by_name.get(name.lower())
            if cid is None:
                self.report.warnings.append(
                    f"{stage}: unknown character {name!r} dropped from {title!r}"
                )
            else:
                resolved.add(cid)
        return frozenset(resolved)

    def initial_state(self) -> PipelineState:
        return PipelineState(
            episode=self.key,
            season_arcs=self.store.arcs_in_season(self.key.series, self.key.season),
        )

    # -- agents ------------------------------------------------------------

    def agent1_flag_existing(self, state: PipelineState) -> PipelineState:
        """Flag prior running arcs possibly present in this episode.

        First episode (no prior arcs): no gateway call, no flags. Anthology
        arcs are never flagged; they are self-contained by definition and
        extending one across episodes would break its invariant. The model
        refers to arcs by their position in a title-sorted listing.
        """
        _expect_stage(state, Stage.AGENT1)
        running = sorted(
            (a for a in state.season_arcs if a.arc_type in RUNNING_TYPES),
            key=lambda a: (a.title, a.arc_id),
        )
        if running:
            schema = {
                "type": "object",
                "properties": {
                    "flags": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "properties": {
                                "index": {"type": "integer", "minimum": 0,
                                          "maximum": len(running) - 1},
                                "possibly_present": {"type": "boolean"},
                                "rationale": {"type": "string"},
                            },
                            "required": ["index", "possibly_present", "rationale"],
                            "additionalProperties": False,
                        },
                    }
                },
                "required": ["flags"],
                "additionalProperties": False,
            }
            arcs_text = "\n".join(
                f"{i}. [{a.arc_type.value}] {a.title}: {a.description}"
                for i, a in enumerate(running)
            )
            doc = self._chat(
                "agent1", "agent1_flag_existing", schema,
                episode_label=self.key.label, series=self.key.series,
                season_summary=self.season_summary, plot=self.plot, arcs=arcs_text,
            )
            flagged: list[tuple[str, str]] = []
            seen_arcs: set[str] = set()
            for flag in doc["flags"]:
                arc = running[flag["index"]]
                if flag["possibly_present"] and arc.arc_id not in seen_arcs:
                    seen_arcs.add(arc.arc_id)
                    flagged.append((arc.arc_id, flag["rationale"]))
            state.flagged_arcs = flagged
        state.stage = Stage.AGENT2
        return state

    def agent2_extract_anthology(self, state: PipelineState) -> PipelineState:
        """Extract self-contained storylines; they skip season continuity."""
        _expect_stage(state, Stage.AGENT2)
        schema = {
            "type": "object",
            "properties": {
                "arcs": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {
                            "title": {"type": "string", "minLength": 1},
                            "description": {"type": "string", "minLength": 1},
                            "main_characters": {
                                "type": "array", "items": {"type": "string"},
                            },
                            "progression_content": {"type": "string", "minLength": 1},
                        },
                        "required": ["title", "description", "main_characters",
                                     "progression_content"],
                        "additionalProperties": False,
                    },
                }
            },
            "required": ["arcs"],
            "additionalProperties": False,
        }
        doc = self._chat(
            "agent2", "agent2_extract_anthology", schema,
            episode_label=self.key.label, series=self.key.series,
            genre=self.genre, plot=self.plot,
        )
        for entry in doc["arcs"]:
            state.candidate_arcs.append(
                DraftArc(
                    title=entry["title"],
                    description=entry["description"],
                    arc_type=ArcType.ANTHOLOGY,
                    progression_content=entry["progression_content"],
                    main_character_names=list(dict.fromkeys(entry["main_characters"])),
                )
            )
        state.stage = Stage.AGENT3
        return state

    def agent3_extract_running(self, state: PipelineState) -> PipelineState:
        """Extract new running arcs and confirm or reject Agent 1 flags.

        Flags are referenced by their position in the flagged list; a
        confirmation without progression text counts as a rejection.
        """
        _expect_stage(state, Stage.AGENT3)
        schema = {
            "type": "object",
            "properties": {
                "new_arcs": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {
                            "title": {"type": "string", "minLength": 1},
                            "description": {"type": "string", "minLength": 1},
                            "arc_type": {"enum": ["Soap", "GenreSpecific"]},
                            "main_characters": {
                                "type": "array", "items": {"type": "string"},
                            },
                            "progression_content": {"type": "string", "minLength": 1},
                        },
                        "required": ["title", "description", "arc_type",
                                     "main_characters", "progression_content"],
                        "additionalProperties": False,
                    },
                },
                "flag_decisions": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {
                            "index": {
                                "type": "integer",
                                "minimum": 0,
                                "maximum": max(0, len(state.flagged_arcs) - 1),
                            },
                            "verdict": {"enum": ["confirmed", "rejected"]},
                            "progression_content": {"type": "string"},
                        },
                        "required": ["index", "verdict"],
                        "additionalProperties": False,
                    },
                },
            },
            "required": ["new_arcs", "flag_decisions"],
            "additionalProperties": False,
        }
        by_id = {a.arc_id: a for a in state.season_arcs}
        flag_lines = [
            f"{i}. {by_id[arc_id].title} (flag rationale: {rationale})"
            for i, (arc_id, rationale) in enumerate(state.flagged_arcs)
        ]
        doc = self._chat(
            "agent3", "agent3_extract_running", schema,
            episode_label=self.key.label, series=self.key.series,
            genre=self.genre, plot=self.plot,
            season_summary=self.season_summary,
            flagged_arcs="\n".join(flag_lines) or "(none)",
        )
        decisions = {d["index"]: d for d in doc["flag_decisions"]}
        confirmed: list[tuple[str, str]] = []
        for i, (arc_id, rationale) in enumerate(state.flagged_arcs):
            decision = decisions.get(i)
            arc = by_id[arc_id]
            content = (decision or {}).get("progression_content", "").strip()
            if decision is None or decision["verdict"] != "confirmed" or not content:
                self.report.drops.append(
                    {"stage": "agent3", "title": arc.title,
                     "reason": "flag rejected" if decision else "flag unanswered"}
                )
                continue
            confirmed.append((arc_id, rationale))
            state.candidate_arcs.append(
                DraftArc(
                    title=arc.title,
                    description=arc.description,
                    arc_type=arc.arc_type,
                    progression_content=content,
                    main_character_names=sorted(
                        self.registry[cid].preferred_name
                        for cid in arc.main_characters
                        if cid in self.registry
                    ),
                    existing_arc_id=arc_id,
                )
            )
        state.flagged_arcs = confirmed
        for entry in doc["new_arcs"]:
            state.candidate_arcs.append(
                DraftArc(
                    title=entry["title"],
                    description=entry["description"],
                    arc_type=ArcType(entry["arc_type"]),
                    progression_content=entry["progression_content"],
                    main_character_names=list(dict.fromkeys(entry["main_characters"])),
                )
            )
        state.stage = Stage.AGENT4
        return state

    def agent4_optimize_season(self, state: PipelineState) -> PipelineState:
        """Merge or refine overlapping running drafts. Anthology untouched.

        Groups must be type-homogeneous and a merge never changes the arc
        type. Drafts the model does not mention pass through unchanged.
        """
        _expect_stage(state, Stage.AGENT4)
        running_positions = [
            i for i, d in enumerate(state.candidate_arcs)
            if d.arc_type in RUNNING_TYPES
        ]
        if len(running_positions) < 2:
            state.stage = Stage.AGENT5
            return state
        running = [state.candidate_arcs[i] for i in running_positions]
        schema = {
            "type": "object",
            "properties": {
                "groups": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {
                            "draft_indices": {
                                "type": "array",
                                "items": {"type": "integer",
                                          "minimum": 0,
                                          "maximum": len(running) - 1},
                                "minItems": 1,
                            },
                            "title": {"type": "string", "minLength": 1},
                            "description": {"type": "string", "minLength": 1},
                        },
                        "required": ["draft_indices", "title", "description"],
                        "additionalProperties": False,
                    },
                }
            },
            "required": ["groups"],
            "additionalProperties": False,
        }
        doc = self._chat(
            "agent4", "agent4_optimize_season", schema, drafts=_draft_lines(running)
        )
        seen: set[int] = set()
        merged_at: dict[int, DraftArc] = {}
        dropped: set[int] = set()
        for group in doc["groups"]:
            indices = sorted(set(group["draft_indices"]))
            if any(i in seen for i in indices):
                raise PipelineStageError("agent4 assigned a draft to two groups")
            seen.update(indices)
            members = [running[i] for i in indices]
            types = {m.arc_type for m in members}
            if len(types) > 1:
                raise PipelineStageError("agent4 tried to merge drafts of different types")
            existing_ids = [m.existing_arc_id for m in members if m.existing_arc_id]
            if len(existing_ids) > 1:
                raise PipelineStageError(
                    "agent4 tried to merge two already-committed arcs"
                )
            names: list[str] = []
            for m in members:
                names.extend(n for n in m.main_character_names if n not in names)
            merged = DraftArc(
                title=group["title"],
                description=group["description"],
                arc_type=members[0].arc_type,
                progression_content=" ".join(
                    m.progression_content for m in members
                ).strip(),
                main_character_names=names,
                existing_arc_id=existing_ids[0] if existing_ids else None,
            )
            merged_at[indices[0]] = merged
            dropped.update(indices[1:])
            if len(members) > 1:
                self.report.merges.append(
                    {"stage": "agent4",
                     "titles": [m.title for m in members],
                     "result": merged.title}
                )
        new_candidates: list[DraftArc] = []
        running_index = 0
        for i, draft in enumerate(state.candidate_arcs):
            if i not in running_positions:
                new_candidates.append(draft)
                continue
            if running_index in merged_at:
                new_candidates.append(merged_at[running_index])
            elif running_index not in dropped and running_index not in seen:
                new_candidates.append(draft)
            running_index += 1
        state.candidate_arcs = new_candidates
        state.stage = Stage.AGENT5
        return state

    def agent5_deduplicate(self, state: PipelineState) -> PipelineState:
        """Resolve cross-type duplicates to exactly one draft with one type."""
        _expect_stage(state, Stage.AGENT5)
        drafts = state.candidate_arcs
        if len(drafts) < 2:
            state.stage = Stage.AGENT6
            return state
        schema = {
            "type": "object",
            "properties": {
                "duplicates": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {
                            "indices": {
                                "type": "array",
                                "items": {"type": "integer",
                                          "minimum": 0,
                                          "maximum": len(drafts) - 1},
                                "minItems": 2,
                            },
                            "resolved_type": {
                                "enum": ["Anthology", "Soap", "GenreSpecific"]
                            },
                            "rationale": {"type": "string"},
                        },
                        "required": ["indices", "resolved_type", "rationale"],
                        "additionalProperties": False,
                    },
                }
            },
            "required": ["duplicates"],
            "additionalProperties": False,
        }
        doc = self._chat(
            "agent5", "agent5_deduplicate", schema, drafts=_draft_lines(drafts)
        )
        drop: set[int] = set()
        taken: set[int] = set()
        for group in doc["duplicates"]:
            indices = sorted(set(group["indices"]))
            if any(i in taken for i in indices):
                raise PipelineStageError("agent5 assigned a draft to two duplicate sets")
            taken.update(indices)
            resolved = ArcType(group["resolved_type"])
            # Keep continuity first (an already-committed arc), then the
            # draft already carrying the resolved type, then the first.
            keep = next((i for i in indices if drafts[i].existing_arc_id), None)
            if keep is None:
                keep = next(
                    (i for i in indices if drafts[i].arc_type is resolved), indices[0]
                )
            kept = drafts[keep]
            if kept.existing_arc_id is None:
                kept.arc_type = resolved
            kept.resolution_rationale = group["rationale"]
            for i in indices:
                if i != keep:
                    drop.add(i)
                    self.report.drops.append(
                        {"stage": "agent5", "title": drafts[i].title,
                         "reason": group["rationale"]}
                    )
        state.candidate_arcs = [d for i, d in enumerate(drafts) if i not in drop]
        titles = [d.title for d in state.candidate_arcs]
        if len(titles) != len(set(titles)):
            raise PipelineStageError("duplicate draft titles survived deduplication")
        state.stage = Stage.AGENT6
        return state

    def agent6_enhance(self, state: PipelineState) -> PipelineState:
        """Fill in characters and progression text for every draft.

        Character names that do not resolve against the registry are
        dropped with a warning in the run report.
        """
        _expect_stage(state, Stage.AGENT6)
        drafts = state.candidate_arcs
        if not drafts:
            state.stage = Stage.AGENT7
            return state
        schema = {
            "type": "object",
            "properties": {
                "drafts": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {
                            "index": {"type": "integer", "minimum": 0,
                                      "maximum": len(drafts) - 1},
                            "main_characters": {
                                "type": "array", "items": {"type": "string"},
                            },
                            "interfering_characters": {
                                "type": "array", "items": {"type": "string"},
                            },
                            "progression_content": {"type": "string", "minLength": 1},
                        },
                        "required": ["index", "main_characters",
                                     "interfering_characters", "progression_content"],
                        "additionalProperties": False,
                    },
                }
            },
            "required": ["drafts"],
            "additionalProperties": False,
        }
        registry_lines = "\n".join(
            f"- {c.preferred_name}"
            for c in sorted(self.registry.values(), key=lambda c: c.preferred_name)
        )
        doc = self._chat(
            "agent6", "agent6_enhance", schema,
            plot=self.plot, characters=registry_lines, drafts=_draft_lines(drafts),
        )
        enriched = {entry["index"]: entry for entry in doc["drafts"]}
        for i, draft in enumerate(drafts):
            entry = enriched.get(i)
            if entry is None:
                raise PipelineStageError(f"agent6 left draft {i} unenriched")
            draft.main_character_names = list(dict.fromkeys(entry["main_characters"]))
            draft.interfering_character_names = list(
                dict.fromkeys(entry["interfering_characters"])
            )
            draft.main_character_ids = self._resolve_names(
                draft.main_character_names, "agent6", draft.title
            )
            draft.interfering_character_ids = self._resolve_names(
                draft.interfering_character_names, "agent6", draft.title
            )
            draft.progression_content = entry["progression_content"]
        state.stage = Stage.AGENT7
        return state

    def agent7_verify_progressions(self, state: PipelineState) -> PipelineState:
        """Accept, rewrite, or drop each draft's progression text."""
        _expect_stage(state, Stage.AGENT7)
        drafts = state.candidate_arcs
        if not drafts:
            state.stage = Stage.AGENT8
            return state
        schema = {
            "type": "object",
            "properties": {
                "reviews": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {
                            "index": {"type": "integer", "minimum": 0,
                                      "maximum": len(drafts) - 1},
                            "verdict": {"enum": ["accept", "rewrite", "irrelevant"]},
                            "content": {"type": "string"},
                        },
                        "required": ["index", "verdict"],
                        "additionalProperties": False,
                    },
                }
            },
            "required": ["reviews"],
            "additionalProperties": False,
        }
        doc = self._chat(
            "agent7", "agent7_verify_progressions", schema, drafts=_draft_lines(drafts)
        )
        verdicts = {entry["index"]: entry for entry in doc["reviews"]}
        survivors: list[DraftArc] = []
        for i, draft in enumerate(drafts):
            entry = verdicts.get(i, {"verdict": "accept"})
            if entry["verdict"] == "irrelevant":
                reason = (
                    "flag rejected: progression irrelevant"
                    if draft.existing_arc_id
                    else "progression irrelevant"
                )
                self.report.drops.append(
                    {"stage": "agent7", "title": draft.title, "reason": reason}
                )
                continue
            if entry["verdict"] == "rewrite":
                content = entry.get("content", "").strip()
                if not content:
                    raise PipelineStageError(
                        f"agent7 rewrite for draft {i} carries no content"
                    )
                draft.progression_content = content
            survivors.append(draft)
        state.candidate_arcs = survivors
        state.stage = Stage.AGENT8
        return state

    def agent8_verify_roles(self, state: PipelineState) -> PipelineState:
        """Confirm or swap main vs interfering roles per draft."""
        _expect_stage(state, Stage.AGENT8)
        drafts = state.candidate_arcs
        if not drafts:
            state.stage = Stage.AGENT9
            return state
        schema = {
            "type": "object",
            "properties": {
                "assignments": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {
                            "index": {"type": "integer", "minimum": 0,
                                      "maximum": len(drafts) - 1},
                            "main_characters": {
                                "type": "array", "items": {"type": "string"},
                            },
                            "interfering_characters": {
                                "type": "array", "items": {"type": "string"},
                            },
                        },
                        "required": ["index", "main_characters",
                                     "interfering_characters"],
                        "additionalProperties": False,
                    },
                }
            },
            "required": ["assignments"],
            "additionalProperties": False,
        }
        registry_lines = "\n".join(
            f"- {c.preferred_name}"
            for c in sorted(self.registry.values(), key=lambda c: c.preferred_name)
        )
        doc = self._chat(
            "agent8", "agent8_verify_roles", schema,
            plot=self.plot, characters=registry_lines, drafts=_draft_lines(drafts),
        )
        for entry in doc["assignments"]:
            draft = drafts[entry["index"]]
            draft.main_character_names = list(dict.fromkeys(entry["main_characters"]))
            draft.interfering_character_names = list(
                dict.fromkeys(entry["interfering_characters"])
            )
            draft.main_character_ids = self._resolve_names(
                draft.main_character_names, "agent8", draft.title
            )
            draft.interfering_character_ids = self._resolve_names(
                draft.interfering_character_names, "agent8", draft.title
            )
        state.stage = Stage.AGENT9
        return state

    def agent9_final_review(self, state: PipelineState) -> PipelineState:
        """Consistency pass, then commit everything atomically.

        New drafts become arcs (routed through continuation linking);
        drafts for existing arcs append one progression each. The episode
        is marked processed in the same transaction, so a failure anywhere
        rolls the whole episode back.
        """
        _expect_stage(state, Stage.AGENT9)
        drafts = state.candidate_arcs
        if drafts:
            schema = {
                "type": "object",
                "properties": {
                    "reviews": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "properties": {
                                "index": {"type": "integer", "minimum": 0,
                                          "maximum": len(drafts) - 1},
                                "approved": {"type": "boolean"},
                                "rationale": {"type": "string"},
                            },
                            "required": ["index", "approved", "rationale"],
                            "additionalProperties": False,
                        },
                    }
                },
                "required": ["reviews"],
                "additionalProperties": False,
            }
            doc = self._chat(
                "agent9", "agent9_final_review", schema,
                season_summary=self.season_summary, drafts=_draft_lines(drafts),
            )
            rejected = {
                entry["index"]: entry["rationale"]
                for entry in doc["reviews"]
                if not entry["approved"]
            }
            kept = []
            for i, draft in enumerate(drafts):
                if i in rejected:
                    self.report.drops.append(
                        {"stage": "agent9", "title": draft.title,
                         "reason": rejected[i]}
                    )
                elif not draft.progression_content.strip():
                    self.report.drops.append(
                        {"stage": "agent9", "title": draft.title,
                         "reason": "no progression content"}
                    )
                else:
                    kept.append(draft)
            drafts = kept

        with self.store.transaction():
            for draft in drafts:
                if draft.existing_arc_id:
                    self._commit_extension(draft)
                else:
                    self._commit_new(draft)
            self.store.mark_processed(self.key)
        state.candidate_arcs = []
        state.stage = Stage.DONE
        return state

    def _commit_extension(self, draft: DraftArc) -> None:
        arc_id = draft.existing_arc_id
        assert arc_id is not None
        self.store.add_progression(
            Progression(
                progression_id=self.store.new_id(),
                arc_id=arc_id,
                content=draft.progression_content,
                series=self.key.series,
                season=self.key.season,
                episode=self.key.episode,
                interfering_characters=draft.interfering_character_ids,
            )
        )
        arc = self.store.get_arc(arc_id)
        self.report.extended_arcs.append({"arc_id": arc_id, "title": arc.title})

    def _commit_new(self, draft: DraftArc) -> None:
        arc_id = self.store.new_id()
        progression = Progression(
            progression_id=self.store.new_id(),
            arc_id=arc_id,
            content=draft.progression_content,
            series=self.key.series,
            season=self.key.season,
            episode=self.key.episode,
            interfering_characters=draft.interfering_character_ids,
        )
        arc = NarrativeArc(
            arc_id=arc_id,
            title=draft.title,
            description=draft.description,
            arc_type=draft.arc_type,
            series=self.key.series,
            main_characters=draft.main_character_ids,
            progressions=(progression,),
        )
        final_id = link_or_create(
            self.gateway, self.store, arc,
            k=self.semantic.link_k, min_sim=self.semantic.link_threshold,
            task_tag=f"semantic.adjudicate_link@{self.key.label}",
        )
        if final_id == arc_id:
            self.report.created_arcs.append(
                {"arc_id": arc_id, "title": arc.title,
                 "arc_type": arc.arc_type.value}
            )
        else:
            existing = self.store.get_arc(final_id)
            self.report.merges.append(
                {"stage": "link", "titles": [arc.title, existing.title],
                 "result": existing.title}
            )
            self.report.extended_arcs.append(
                {"arc_id": final_id, "title": existing.title}
            )


def run_episode(
    gateway: LLMGateway,
    store: Store,
    key: EpisodeKey,
    runs_dir: str | Path | None = None,
    semantic: SemanticConfig | None = None,
) -> RunReport:
    """Run all nine agents for one episode and return the run report.

    Episodes of a season must be processed strictly in order, each exactly
    once; the season lock is held for the duration of the run.
    """
    if store.is_processed(key):
        raise EpisodeAlreadyProcessed(f"{key.series} {key.label} was already processed")
    ingested = store.list_episode_docs(key.series, key.season)
    if not any(d.key == key for d in ingested):
        raise PreconditionError(f"{key.series} {key.label} is not ingested")
    prior = [d.key.episode for d in ingested if d.key.episode < key.episode]
    done = set(store.processed_episodes(key.series, key.season))
    missing = [e for e in prior if e not in done]
    if missing:
        raise OutOfOrderEpisode(
            f"{key.label} cannot run before episode(s) "
            f"{', '.join(str(e) for e in missing)} of season {key.season}"
        )

    with store.season_run_lock(key.series, key.season):
        pipeline = EpisodePipeline(gateway, store, key, semantic=semantic)
        calls_before = gateway.provider_chat_calls
        state = pipeline.initial_state()
        state = pipeline.agent1_flag_existing(state)
        state = pipeline.agent2_extract_anthology(state)
        state = pipeline.agent3_extract_running(state)
        state = pipeline.agent4_optimize_season(state)
        state = pipeline.agent5_deduplicate(state)
        state = pipeline.agent6_enhance(state)
        state = pipeline.agent7_verify_progressions(state)
        state = pipeline.agent8_verify_roles(state)
        state = pipeline.agent9_final_review(state)
        pipeline.report.gateway_call_count = gateway.provider_chat_calls - calls_before

    if runs_dir is not None:
        path = Path(runs_dir) / key.series / f"{key.label}.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(canonical_dumps(pipeline.report.to_dict()), encoding="utf-8")
    return pipeline.report


def run_season(
    gateway: LLMGateway,
    store: Store,
    series: str,
    season: int,
    runs_dir: str | Path | None = None,
    semantic: SemanticConfig | None = None,
) -> list[RunReport]:
    """Run every unprocessed episode of the season, in order."""
    docs = store.list_episode_docs(series, season)
    if not docs:
        raise PreconditionError(f"no ingested episodes for {series} season {season}")
    reports = []
    for doc in docs:
        if store.is_processed(doc.key):
            continue
        reports.append(run_episode(gateway, store, doc.key, runs_dir, semantic))
    return reports


def draft_progression(
    gateway: LLMGateway, store: Store, arc_id: str, season: int, episode: int
) -> str:
    """Auto-draft (without persisting) a progression for an arc and episode."""
    arc = store.get_arc(arc_id)
    key = EpisodeKey(arc.series, season, episode)
    doc = store.get_episode_doc(key)
    if not doc.normalized_plot.strip():
        raise PreconditionError(f"{key.label} has no normalized plot yet")
    schema = {
        "type": "object",
        "properties": {"content": {"type": "string", "minLength": 1}},
        "required": ["content"],
        "additionalProperties": False,
    }
    reply = gateway.chat_structured(
        ChatRequest(
            task_tag=f"api.regenerate_progression@{key.label}",
            system_prompt=SYSTEM_PROMPT,
            user_prompt=render(
                "regenerate_progression",
                episode_label=key.label,
                arc=f"Title: {arc.title}\nDescription: {arc.description}",
                plot=doc.normalized_plot,
            ),
            response_schema=schema,
            temperature=gateway.config.temperature,
        )
    )
    return reply.document["content"]
