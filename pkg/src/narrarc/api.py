"""JSON-over-HTTP service exposing every read, edit, merge, and run capability.

Design rule: nothing AI-generated persists without an explicit save call.
The progression-draft endpoint returns text for review; saving it is a
separate, ordinary create call. While a pipeline run holds a season lock,
every state-changing endpoint answers 409 with a Retry-After header.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import jsonschema
from fastapi import Body, FastAPI, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response

from .characters import suggest_duplicates
from .config import AppConfig
from .errors import (
    Conflict,
    ConstraintViolation,
    DomainError,
    EpisodeAlreadyProcessed,
    GatewayError,
    InsufficientPoints,
    MalformedCorpus,
    NarrarcError,
    NotFound,
    OutOfOrderEpisode,
    PreconditionError,
    SelfMerge,
    StoreBusy,
)
from .gateway import LLMGateway
from .model import (
    ArcType,
    Character,
    EpisodeKey,
    NarrativeArc,
    Progression,
    arc_to_dict,
    character_to_dict,
    progression_to_dict,
)
from .pipeline import draft_progression, run_episode
from .semantic import cluster_arcs, pca_project_3d, upsert_arc_embedding
from .store import Store

_ID = {"type": "string", "minLength": 1}
_ARC_TYPE = {"enum": ["Anthology", "Soap", "GenreSpecific"]}

RESPONSE_SCHEMAS: dict[str, Any] = {
    "health": {
        "type": "object",
        "properties": {"status": {"const": "ok"}},
        "required": ["status"],
        "additionalProperties": False,
    },
    "error": {
        "type": "object",
        "properties": {"detail": {"type": "string"}},
        "required": ["detail"],
        "additionalProperties": False,
    },
    "series_list": {
        "type": "array",
        "items": {
            "type": "object",
            "properties": {"name": {"type": "string"}, "genre": {"type": "string"}},
            "required": ["name", "genre"],
            "additionalProperties": False,
        },
    },
    "progression": {
        "type": "object",
        "properties": {
            "progression_id": _ID,
            "arc_id": _ID,
            "content": {"type": "string"},
            "series": {"type": "string"},
            "season": {"type": "integer"},
            "episode": {"type": "integer"},
            "interfering_characters": {"type": "array", "items": _ID},
        },
        "required": ["progression_id", "arc_id", "content", "series",
                     "season", "episode", "interfering_characters"],
        "additionalProperties": False,
    },
    "character": {
        "type": "object",
        "properties": {
            "character_id": _ID,
            "preferred_name": {"type": "string"},
            "series": {"type": "string"},
            "alternative_names": {"type": "array", "items": {"type": "string"}},
        },
        "required": ["character_id", "preferred_name", "series", "alternative_names"],
        "additionalProperties": False,
    },
    "draft": {
        "type": "object",
        "properties": {"content": {"type": "string", "minLength": 1}},
        "required": ["content"],
        "additionalProperties": False,
    },
    "clusters": {
        "type": "object",
        "properties": {
            "threshold": {"type": "number"},
            "clusters": {
                "type": "array",
                "items": {"type": "array", "items": _ID},
            },
        },
        "required": ["threshold", "clusters"],
        "additionalProperties": False,
    },
    "pca3d": {
        "type": "object",
        "properties": {
            "points": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {
                        "arc_id": _ID,
                        "x": {"type": "number"},
                        "y": {"type": "number"},
                        "z": {"type": "number"},
                    },
                    "required": ["arc_id", "x", "y", "z"],
                    "additionalProperties": False,
                },
            },
            "explained_variance_ratios": {
                "type": "array",
                "items": {"type": "number"},
                "minItems": 3,
                "maxItems": 3,
            },
        },
        "required": ["points", "explained_variance_ratios"],
        "additionalProperties": False,
    },
    "run_report": {
        "type": "object",
        "properties": {
            "series": {"type": "string"},
            "season": {"type": "integer"},
            "episode": {"type": "integer"},
            "created_arcs": {"type": "array"},
            "extended_arcs": {"type": "array"},
            "merges": {"type": "array"},
            "drops": {"type": "array"},
            "warnings": {"type": "array", "items": {"type": "string"}},
            "gateway_call_count": {"type": "integer"},
        },
        "required": ["series", "season", "episode", "created_arcs",
                     "extended_arcs", "merges", "drops", "warnings",
                     "gateway_call_count"],
        "additionalProperties": False,
    },
}
RESPONSE_SCHEMAS["arc"] = {
    "type": "object",
    "properties": {
        "arc_id": _ID,
        "title": {"type": "string", "minLength": 1},
        "description": {"type": "string", "minLength": 1},
        "arc_type": _ARC_TYPE,
        "series": {"type": "string"},
        "main_characters": {"type": "array", "items": _ID},
        "progressions": {
            "type": "array", "items": RESPONSE_SCHEMAS["progression"],
        },
    },
    "required": ["arc_id", "title", "description", "arc_type", "series",
                 "main_characters", "progressions"],
    "additionalProperties": False,
}
RESPONSE_SCHEMAS["arc_list"] = {"type": "array", "items": RESPONSE_SCHEMAS["arc"]}
RESPONSE_SCHEMAS["progression_list"] = {
    "type": "array", "items": RESPONSE_SCHEMAS["progression"],
}
RESPONSE_SCHEMAS["character_list"] = {
    "type": "array", "items": RESPONSE_SCHEMAS["character"],
}
RESPONSE_SCHEMAS["suggestions"] = {
    "type": "object",
    "properties": {
        "threshold": {"type": "number"},
        "suggestions": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "first": RESPONSE_SCHEMAS["character"],
                    "second": RESPONSE_SCHEMAS["character"],
                    "score": {"type": "number"},
                },
                "required": ["first", "second", "score"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["threshold", "suggestions"],
    "additionalProperties": False,
}
RESPONSE_SCHEMAS["timeline"] = {
    "type": "object",
    "properties": {
        "series": {"type": "string"},
        "season": {"type": "integer"},
        "episodes": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "season": {"type": "integer"},
                    "episode": {"type": "integer"},
                    "label": {"type": "string"},
                },
                "required": ["season", "episode", "label"],
                "additionalProperties": False,
            },
        },
        "rows": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "arc_id": _ID,
                    "title": {"type": "string"},
                    "arc_type": _ARC_TYPE,
                    "main_characters": {"type": "array", "items": _ID},
                    "cells": {
                        "type": "array",
                        "items": {
                            "oneOf": [
                                {"type": "null"},
                                {
                                    "type": "object",
                                    "properties": {
                                        "progression_id": _ID,
                                        "content": {"type": "string"},
                                        "interfering_characters": {
                                            "type": "array", "items": _ID,
                                        },
                                    },
                                    "required": ["progression_id", "content",
                                                 "interfering_characters"],
                                    "additionalProperties": False,
                                },
                            ]
                        },
                    },
                },
                "required": ["arc_id", "title", "arc_type", "main_characters", "cells"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["series", "season", "episodes", "rows"],
    "additionalProperties": False,
}

_REQUEST_SCHEMAS: dict[str, Any] = {
    "arc_create": {
        "type": "object",
        "properties": {
            "title": {"type": "string", "minLength": 1},
            "description": {"type": "string", "minLength": 1},
            "arc_type": _ARC_TYPE,
            "series": {"type": "string", "minLength": 1},
            "main_characters": {"type": "array", "items": _ID},
        },
        "required": ["title", "description", "arc_type", "series"],
        "additionalProperties": False,
    },
    "arc_update": {
        "type": "object",
        "properties": {
            "title": {"type": "string", "minLength": 1},
            "description": {"type": "string", "minLength": 1},
            "arc_type": _ARC_TYPE,
            "main_characters": {"type": "array", "items": _ID},
        },
        "additionalProperties": False,
    },
    "progression_create": {
        "type": "object",
        "properties": {
            "content": {"type": "string", "minLength": 1},
            "season": {"type": "integer", "minimum": 1},
            "episode": {"type": "integer", "minimum": 1},
            "interfering_characters": {"type": "array", "items": _ID},
        },
        "required": ["content", "season", "episode"],
        "additionalProperties": False,
    },
    "progression_update": {
        "type": "object",
        "properties": {
            "content": {"type": "string", "minLength": 1},
            "interfering_characters": {"type": "array", "items": _ID},
        },
        "additionalProperties": False,
    },
    "progression_draft": {
        "type": "object",
        "properties": {
            "season": {"type": "integer", "minimum": 1},
            "episode": {"type": "integer", "minimum": 1},
        },
        "required": ["season", "episode"],
        "additionalProperties": False,
    },
    "character_create": {
        "type": "object",
        "properties": {
            "preferred_name": {"type": "string", "minLength": 1},
            "series": {"type": "string", "minLength": 1},
            "alternative_names": {"type": "array", "items": {"type": "string"}},
        },
        "required": ["preferred_name", "series"],
        "additionalProperties": False,
    },
    "character_update": {
        "type": "object",
        "properties": {
            "preferred_name": {"type": "string", "minLength": 1},
            "alternative_names": {"type": "array", "items": {"type": "string"}},
        },
        "additionalProperties": False,
    },
    "character_merge": {
        "type": "object",
        "properties": {"keep_id": _ID, "remove_id": _ID},
        "required": ["keep_id", "remove_id"],
        "additionalProperties": False,
    },
    "suggestion_dismiss": {
        "type": "object",
        "properties": {
            "series": {"type": "string", "minLength": 1},
            "character_a": _ID,
            "character_b": _ID,
        },
        "required": ["series", "character_a", "character_b"],
        "additionalProperties": False,
    },
    "pipeline_run": {
        "type": "object",
        "properties": {
            "series": {"type": "string", "minLength": 1},
            "season": {"type": "integer", "minimum": 1},
            "episode": {"type": "integer", "minimum": 1},
        },
        "required": ["series", "season", "episode"],
        "additionalProperties": False,
    },
}


def _validate_body(name: str, body: Any) -> None:
    error = next(
        iter(jsonschema.Draft202012Validator(_REQUEST_SCHEMAS[name]).iter_errors(body)),
        None,
    )
    if error is not None:
        raise RequestInvalid(f"{name}: {error.message}")


class RequestInvalid(NarrarcError):
    """Request body failed schema validation (HTTP 422)."""


_STATUS_BY_ERROR: list[tuple[type, int]] = [
    (NotFound, 404),
    (StoreBusy, 409),
    (Conflict, 409),
    (SelfMerge, 409),
    (OutOfOrderEpisode, 409),
    (EpisodeAlreadyProcessed, 409),
    (RequestInvalid, 422),
    (InsufficientPoints, 422),
    (PreconditionError, 422),
    (ConstraintViolation, 422),
    (MalformedCorpus, 422),
    (GatewayError, 503),
    (DomainError, 422),
]


def _error_response(exc: NarrarcError) -> JSONResponse:
    status = 500
    for err_type, code in _STATUS_BY_ERROR:
        if isinstance(exc, err_type):
            status = code
            break
    headers = {"Retry-After": "1"} if isinstance(exc, StoreBusy) else None
    return JSONResponse({"detail": str(exc)}, status_code=status, headers=headers)


def create_app(store: Store, gateway: LLMGateway, config: AppConfig) -> FastAPI:
    app = FastAPI(title="narrarc", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[config.service.cors_origin],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(NarrarcError)
    def _handle_domain_error(request: Request, exc: NarrarcError) -> JSONResponse:
        return _error_response(exc)

    # -- meta ---------------------------------------------------------------

    @app.get("/health")
    def health() -> dict[str, str]:
        return {"status": "ok"}

    @app.get("/schema")
    def schema() -> dict[str, Any]:
        return RESPONSE_SCHEMAS

    @app.get("/series")
    def list_series() -> list[dict[str, str]]:
        return [{"name": n, "genre": g} for n, g in store.list_series()]

    # -- arcs ----------------------------------------------------------------

    @app.get("/arcs")
    def list_arcs(
        series: str = Query(...), arc_type: str | None = Query(default=None)
    ) -> list[dict[str, Any]]:
        arcs = store.list_arcs(series)
        if arc_type is not None:
            arcs = [a for a in arcs if a.arc_type.value == arc_type]
        return [arc_to_dict(a) for a in arcs]

    @app.get("/arcs/{arc_id}")
    def get_arc(arc_id: str) -> dict[str, Any]:
        return arc_to_dict(store.get_arc(arc_id))

    @app.post("/arcs", status_code=201)
    def create_arc(payload: dict[str, Any] = Body(...)) -> dict[str, Any]:
        _validate_body("arc_create", payload)
        arc = NarrativeArc(
            arc_id=store.new_id(),
            title=payload["title"],
            description=payload["description"],
            arc_type=ArcType(payload["arc_type"]),
            series=payload["series"],
            main_characters=frozenset(payload.get("main_characters", [])),
        )
        with store.transaction():
            created = store.create_arc(arc)
            upsert_arc_embedding(gateway, store, created)
        return arc_to_dict(created)

    @app.patch("/arcs/{arc_id}")
    def update_arc(arc_id: str, payload: dict[str, Any] = Body(...)) -> dict[str, Any]:
        _validate_body("arc_update", payload)
        mains = payload.get("main_characters")
        with store.transaction():
            before = store.get_arc(arc_id)
            updated = store.update_arc(
                arc_id,
                title=payload.get("title"),
                description=payload.get("description"),
                arc_type=ArcType(payload["arc_type"]) if "arc_type" in payload else None,
                main_characters=frozenset(mains) if mains is not None else None,
            )
            if (updated.title, updated.description) != (before.title, before.description):
                upsert_arc_embedding(gateway, store, updated)
        return arc_to_dict(updated)

    @app.delete("/arcs/{arc_id}", status_code=204)
    def delete_arc(arc_id: str) -> Response:
        store.delete_arc(arc_id)
        return Response(status_code=204)

    @app.post("/arcs/{keep_id}/merge/{remove_id}")
    def merge_arcs(keep_id: str, remove_id: str) -> dict[str, Any]:
        return arc_to_dict(store.merge_arcs(keep_id, remove_id))

    # -- progressions ---------------------------------------------------------

    @app.get("/arcs/{arc_id}/progressions")
    def list_progressions(arc_id: str) -> list[dict[str, Any]]:
        arc = store.get_arc(arc_id)
        return [progression_to_dict(p) for p in arc.progressions]

    @app.post("/arcs/{arc_id}/progressions", status_code=201)
    def create_progression(
        arc_id: str, payload: dict[str, Any] = Body(...)
    ) -> dict[str, Any]:
        _validate_body("progression_create", payload)
        arc = store.get_arc(arc_id)
        prog = Progression(
            progression_id=store.new_id(),
            arc_id=arc_id,
            content=payload["content"],
            series=arc.series,
            season=payload["season"],
            episode=payload["episode"],
            interfering_characters=frozenset(payload.get("interfering_characters", [])),
        )
        return progression_to_dict(store.add_progression(prog))

    @app.get("/progressions/{progression_id}")
    def get_progression(progression_id: str) -> dict[str, Any]:
        return progression_to_dict(store.get_progression(progression_id))

    @app.patch("/progressions/{progression_id}")
    def update_progression(
        progression_id: str, payload: dict[str, Any] = Body(...)
    ) -> dict[str, Any]:
        _validate_body("progression_update", payload)
        interfering = payload.get("interfering_characters")
        return progression_to_dict(
            store.update_progression(
                progression_id,
                content=payload.get("content"),
                interfering_characters=(
                    frozenset(interfering) if interfering is not None else None
                ),
            )
        )

    @app.delete("/progressions/{progression_id}", status_code=204)
    def delete_progression(progression_id: str) -> Response:
        store.delete_progression(progression_id)
        return Response(status_code=204)

    @app.post("/arcs/{arc_id}/progressions/draft")
    def draft_arc_progression(
        arc_id: str, payload: dict[str, Any] = Body(...)
    ) -> dict[str, str]:
        # Draft only: the text is returned for human review, never persisted
        # here. Saving it is an explicit create call.
        _validate_body("progression_draft", payload)
        content = draft_progression(
            gateway, store, arc_id, payload["season"], payload["episode"]
        )
        return {"content": content}

    # -- characters ------------------------------------------------------------

    @app.get("/characters")
    def list_characters(series: str = Query(...)) -> list[dict[str, Any]]:
        return [character_to_dict(c) for c in store.list_characters(series)]

    @app.post("/characters", status_code=201)
    def create_character(payload: dict[str, Any] = Body(...)) -> dict[str, Any]:
        _validate_body("character_create", payload)
        char = Character(
            character_id=store.new_id(),
            preferred_name=payload["preferred_name"],
            series=payload["series"],
            alternative_names=frozenset(payload.get("alternative_names", [])),
        )
        return character_to_dict(store.save_character(char))

    @app.patch("/characters/{character_id}")
    def update_character(
        character_id: str, payload: dict[str, Any] = Body(...)
    ) -> dict[str, Any]:
        _validate_body("character_update", payload)
        current = store.get_character(character_id)
        preferred = payload.get("preferred_name", current.preferred_name)
        alternatives = frozenset(
            payload.get("alternative_names", sorted(current.alternative_names))
        )
        updated = Character(
            character_id=character_id,
            preferred_name=preferred,
            series=current.series,
            alternative_names=alternatives,
        )
        return character_to_dict(store.save_character(updated))

    @app.delete("/characters/{character_id}", status_code=204)
    def delete_character(character_id: str) -> Response:
        store.delete_character(character_id)
        return Response(status_code=204)

    @app.get("/characters/suggest-duplicates")
    def suggest_character_duplicates(
        series: str = Query(...), threshold: float = Query(default=0.5)
    ) -> dict[str, Any]:
        suggestions = suggest_duplicates(
            store.list_characters(series),
            threshold=threshold,
            dismissed=store.dismissed_pairs(series),
        )
        return {
            "threshold": threshold,
            "suggestions": [
                {
                    "first": character_to_dict(first),
                    "second": character_to_dict(second),
                    "score": score,
                }
                for first, second, score in suggestions
            ],
        }

    @app.post("/characters/merge")
    def merge_characters(payload: dict[str, Any] = Body(...)) -> dict[str, Any]:
        _validate_body("character_merge", payload)
        return character_to_dict(
            store.merge_characters(payload["keep_id"], payload["remove_id"])
        )

    @app.post("/characters/suggestions/dismiss", status_code=204)
    def dismiss_suggestion(payload: dict[str, Any] = Body(...)) -> Response:
        _validate_body("suggestion_dismiss", payload)
        store.get_character(payload["character_a"])
        store.get_character(payload["character_b"])
        store.dismiss_suggestion(
            payload["series"], payload["character_a"], payload["character_b"]
        )
        return Response(status_code=204)

    # -- timeline and vector views ----------------------------------------------

    @app.get("/timeline")
    def timeline(
        series: str = Query(...),
        season: int = Query(...),
        arc_type: str | None = Query(default=None),
        character_id: str | None = Query(default=None),
    ) -> dict[str, Any]:
        episodes = [d.key for d in store.list_episode_docs(series, season)]
        arcs = store.arcs_in_season(series, season)
        if arc_type is not None:
            arcs = [a for a in arcs if a.arc_type.value == arc_type]
        if character_id is not None:
            arcs = [
                a for a in arcs
                if character_id in a.main_characters
                or any(
                    character_id in p.interfering_characters for p in a.progressions
                )
            ]
        arcs.sort(key=lambda a: (a.title, a.arc_id))
        rows = []
        for arc in arcs:
            by_episode = {
                (p.season, p.episode): p for p in arc.progressions
            }
            cells: list[dict[str, Any] | None] = []
            for key in episodes:
                prog = by_episode.get((key.season, key.episode))
                cells.append(
                    None
                    if prog is None
                    else {
                        "progression_id": prog.progression_id,
                        "content": prog.content,
                        "interfering_characters": sorted(prog.interfering_characters),
                    }
                )
            rows.append(
                {
                    "arc_id": arc.arc_id,
                    "title": arc.title,
                    "arc_type": arc.arc_type.value,
                    "main_characters": sorted(arc.main_characters),
                    "cells": cells,
                }
            )
        return {
            "series": series,
            "season": season,
            "episodes": [
                {"season": k.season, "episode": k.episode, "label": k.label}
                for k in episodes
            ],
            "rows": rows,
        }

    @app.get("/clusters")
    def clusters(
        series: str = Query(...), threshold: float | None = Query(default=None)
    ) -> dict[str, Any]:
        value = threshold if threshold is not None else config.semantic.cluster_threshold
        return {"threshold": value, "clusters": cluster_arcs(store, series, value)}

    @app.get("/pca3d")
    def pca3d(series: str = Query(...)) -> dict[str, Any]:
        points, ratios = pca_project_3d(store, series)
        return {
            "points": [
                {"arc_id": arc_id, "x": x, "y": y, "z": z}
                for arc_id, x, y, z in points
            ],
            "explained_variance_ratios": ratios,
        }

    # -- pipeline -----------------------------------------------------------------

    @app.post("/pipeline/run")
    def trigger_run(payload: dict[str, Any] = Body(...)) -> dict[str, Any]:
        _validate_body("pipeline_run", payload)
        report = run_episode(
            gateway,
            store,
            EpisodeKey(payload["series"], payload["season"], payload["episode"]),
            runs_dir=config.runs_dir,
            semantic=config.semantic,
        )
        return report.to_dict()

    @app.get("/runs/{series}/{season}/{episode}")
    def get_run_report(series: str, season: int, episode: int) -> dict[str, Any]:
        label = f"S{season:02d}E{episode:02d}"
        path = Path(config.runs_dir) / series / f"{label}.json"
        if not path.is_file():
            raise NotFound(f"no run report for {series} {label}")
        return json.loads(path.read_text(encoding="utf-8"))

    return app


def serve(store: Store, gateway: LLMGateway, config: AppConfig) -> None:
    """Run the service until interrupted."""
    import uvicorn

    uvicorn.run(
        create_app(store, gateway, config),
        host=config.service.host,
        port=config.service.port,
        log_level="info",
    )
