"""Arc embeddings: similarity search, continuation linking, clustering, PCA.

An arc is embedded from its title and description; similar arcs within
one series are retrieved by cosine similarity and a gateway call decides
whether a new arc continues an existing storyline. Every adjudication is
written to an audit log.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import (
    DimensionMismatch,
    InsufficientPoints,
    NotFound,
    PreconditionError,
    ZeroVector,
)
from .gateway import ChatRequest, EmbeddingVector, LLMGateway
from .model import ArcType, NarrativeArc
from .prompts import SYSTEM_PROMPT, render
from .store import Store

DEFAULT_LINK_THRESHOLD = 0.80
DEFAULT_LINK_K = 5
DEFAULT_CLUSTER_THRESHOLD = 0.85


@dataclass(frozen=True)
class ArcEmbedding:
    """Stored vector for one arc, keyed by arc id."""

    arc_id: str
    vector: EmbeddingVector
    source_text: str


def arc_source_text(arc: NarrativeArc) -> str:
    return f"Title: {arc.title}\nDescription: {arc.description}"


def upsert_arc_embedding(
    gateway: LLMGateway, store: Store, arc: NarrativeArc
) -> ArcEmbedding:
    """(Re-)embed a persisted arc; edits to title or description re-embed."""
    store.get_arc(arc.arc_id)
    source = arc_source_text(arc)
    vector = gateway.embed([source])[0]
    store.upsert_embedding(arc.arc_id, vector, source)
    return ArcEmbedding(arc_id=arc.arc_id, vector=vector, source_text=source)


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    if a.dimension != b.dimension:
        raise DimensionMismatch(f"dimensions differ: {a.dimension} vs {b.dimension}")
    va = np.asarray(a.values)
    vb = np.asarray(b.values)
    norm_a = float(np.linalg.norm(va))
    norm_b = float(np.linalg.norm(vb))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVector("cosine similarity is undefined for zero vectors")
    return float(np.dot(va, vb) / (norm_a * norm_b))


def find_similar(
    store: Store,
    arc_id: str,
    k: int = DEFAULT_LINK_K,
    min_sim: float = DEFAULT_LINK_THRESHOLD,
) -> list[tuple[str, float]]:
    """Top-k other arcs of the same series with cosine >= min_sim.

    Descending by score; ties broken by ascending arc id.
    """
    arc = store.get_arc(arc_id)
    own = store.get_embedding(arc_id)
    if own is None:
        raise NotFound(f"arc {arc_id} has no embedding")
    own_vector, _ = own
    scored = []
    for other_id, vector, _ in store.list_embeddings(arc.series):
        if other_id == arc_id:
            continue
        score = cosine_similarity(own_vector, vector)
        if score >= min_sim:
            scored.append((other_id, score))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:k]


def adjudicate_link(
    gateway: LLMGateway,
    store: Store,
    new_arc_id: str,
    candidate_arc_id: str,
    task_tag: str = "semantic.adjudicate_link",
) -> tuple[str, str]:
    """Ask the model whether two similar arcs are the same storyline.

    Returns (verdict, rationale) and records both in the audit log.
    """
    if new_arc_id == candidate_arc_id:
        raise PreconditionError("cannot adjudicate an arc against itself")
    new_arc = store.get_arc(new_arc_id)
    candidate = store.get_arc(candidate_arc_id)
    schema: dict[str, Any] = {
        "type": "object",
        "properties": {
            "verdict": {"enum": ["SameStoryline", "Distinct"]},
            "rationale": {"type": "string"},
        },
        "required": ["verdict", "rationale"],
        "additionalProperties": False,
    }
    reply = gateway.chat_structured(
        ChatRequest(
            task_tag=task_tag,
            system_prompt=SYSTEM_PROMPT,
            user_prompt=render(
                "adjudicate_link",
                first_arc=_arc_card(candidate),
                second_arc=_arc_card(new_arc),
            ),
            response_schema=schema,
            temperature=gateway.config.temperature,
        )
    )
    verdict = reply.document["verdict"]
    rationale = reply.document["rationale"]
    store.add_link_audit(new_arc.series, new_arc_id, candidate_arc_id, verdict, rationale)
    return verdict, rationale


def _arc_card(arc: NarrativeArc) -> str:
    latest = arc.progressions[-1].content if arc.progressions else "(none)"
    return (
        f"Title: {arc.title}\n"
        f"Description: {arc.description}\n"
        f"Type: {arc.arc_type.value}\n"
        f"Latest progression: {latest}"
    )


def _mergeable(existing: NarrativeArc, new: NarrativeArc) -> bool:
    # Skip candidates where a merge is forbidden anyway: two anthology
    # arcs from different episodes, or any episode-level collision.
    existing_eps = {(p.season, p.episode) for p in existing.progressions}
    new_eps = {(p.season, p.episode) for p in new.progressions}
    if (
        existing.arc_type is ArcType.ANTHOLOGY
        and new.arc_type is ArcType.ANTHOLOGY
        and existing_eps != new_eps
    ):
        return False
    return not (existing_eps & new_eps)


def link_or_create(
    gateway: LLMGateway,
    store: Store,
    arc: NarrativeArc,
    k: int = DEFAULT_LINK_K,
    min_sim: float = DEFAULT_LINK_THRESHOLD,
    task_tag: str = "semantic.adjudicate_link",
) -> str:
    """Persist a new arc, or fold it into the storyline it continues.

    The arc is stored and embedded, then candidates are adjudicated in
    rank order; the first SameStoryline verdict merges the new arc into
    the existing one (progressions appended, characters unioned, existing
    title and description kept) and returns the existing id. With no
    SameStoryline verdict the new id is returned.
    """
    with store.transaction():
        created = store.create_arc(arc)
        upsert_arc_embedding(gateway, store, created)
        for candidate_id, _score in find_similar(store, created.arc_id, k, min_sim):
            candidate = store.get_arc(candidate_id)
            if not _mergeable(candidate, created):
                continue
            verdict, _ = adjudicate_link(
                gateway, store, created.arc_id, candidate_id, task_tag=task_tag
            )
            if verdict == "SameStoryline":
                store.merge_arcs(candidate_id, created.arc_id)
                return candidate_id
        return created.arc_id


def cluster_arcs(
    store: Store, series: str, threshold: float = DEFAULT_CLUSTER_THRESHOLD
) -> list[list[str]]:
    """Single-linkage grouping: arcs chained by pairwise cosine >= threshold.

    Includes singletons. Output is deterministic: ids sorted within each
    cluster, clusters ordered by their smallest id. High recall is the
    point; these groups exist to surface arcs that should likely merge.
    """
    embeddings = store.list_embeddings(series)
    ids = [arc_id for arc_id, _, _ in embeddings]
    parent = {arc_id: arc_id for arc_id in ids}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, (id_a, vec_a, _) in enumerate(embeddings):
        for id_b, vec_b, _ in embeddings[i + 1:]:
            if cosine_similarity(vec_a, vec_b) >= threshold:
                ra, rb = find(id_a), find(id_b)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)

    groups: dict[str, list[str]] = {}
    for arc_id in ids:
        groups.setdefault(find(arc_id), []).append(arc_id)
    clusters = [sorted(members) for members in groups.values()]
    clusters.sort(key=lambda cluster: cluster[0])
    return clusters


def project_matrix_3d(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project row vectors onto the top-3 principal components.

    Mean-centers the rows, eigendecomposes the sample covariance matrix,
    and keeps the three components with the largest eigenvalues
    (descending). Sign convention: each component's largest-magnitude
    loading is positive. Returns (n x 3 coordinates, 3 explained-variance
    ratios over the total variance).
    """
    data = np.asarray(matrix, dtype=float)
    n, d = data.shape
    if n < 4:
        raise InsufficientPoints(f"3D projection needs at least 4 points, got {n}")
    centered = data - data.mean(axis=0)
    cov = centered.T @ centered / (n - 1)
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues, kind="stable")[::-1]
    eigenvalues = np.clip(eigenvalues[order], 0.0, None)
    components = eigenvectors[:, order[: min(3, d)]]
    for col in range(components.shape[1]):
        pivot = np.argmax(np.abs(components[:, col]))
        if components[pivot, col] < 0:
            components[:, col] = -components[:, col]
    coords = centered @ components
    if components.shape[1] < 3:
        coords = np.pad(coords, ((0, 0), (0, 3 - components.shape[1])))
    total = float(eigenvalues.sum())
    top = eigenvalues[:3]
    if top.size < 3:
        top = np.pad(top, (0, 3 - top.size))
    ratios = top / total if total > 0 else np.zeros(3)
    return coords, ratios


def pca_project_3d(
    store: Store, series: str
) -> tuple[list[tuple[str, float, float, float]], list[float]]:
    """3D PCA of every embedded arc in a series, plus variance ratios."""
    embeddings = store.list_embeddings(series)
    if len(embeddings) < 4:
        raise InsufficientPoints(
            f"3D PCA needs at least 4 embedded arcs, got {len(embeddings)}"
        )
    ids = [arc_id for arc_id, _, _ in embeddings]
    matrix = np.array([vector.values for _, vector, _ in embeddings])
    coords, ratios = project_matrix_3d(matrix)
    points = [
        (arc_id, float(x), float(y), float(z))
        for arc_id, (x, y, z) in zip(ids, coords)
    ]
    return points, [float(r) for r in ratios]
