"""Single-file relational store for every domain entity.

SQLite with explicit transactions: each public mutation is atomic, nested
calls join the enclosing transaction through savepoints, and a failure at
any depth rolls the whole unit back. Arc deletion cascades to
progressions, character links, and embeddings.

Identifiers are 128-bit lowercase hex, derived from a seeded counter kept
in the database so that repeated runs over the same inputs allocate the
same ids (the determinism and golden-export tests rely on this).
"""

from __future__ import annotations

import hashlib
import json
import sqlite3
import threading
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterator

import numpy as np

from .errors import (
    Conflict,
    ConstraintViolation,
    NotFound,
    SelfMerge,
    StoreBusy,
)
from .gateway import EmbeddingVector
from .model import (
    ArcType,
    Character,
    EpisodeDoc,
    EpisodeKey,
    NarrativeArc,
    Progression,
    arc_to_dict,
    canonical_dumps,
    character_to_dict,
    episode_doc_to_dict,
    validate_arc,
)

SCHEMA_VERSION = 1

_MIGRATIONS: list[str] = [
    """
    CREATE TABLE meta (key TEXT PRIMARY KEY, value TEXT NOT NULL);
    CREATE TABLE series (
        name TEXT PRIMARY KEY,
        genre TEXT NOT NULL DEFAULT ''
    );
    CREATE TABLE characters (
        character_id TEXT PRIMARY KEY,
        series TEXT NOT NULL,
        preferred_name TEXT NOT NULL,
        alternative_names TEXT NOT NULL DEFAULT '[]'
    );
    CREATE UNIQUE INDEX idx_characters_preferred
        ON characters(series, lower(preferred_name));
    CREATE TABLE arcs (
        arc_id TEXT PRIMARY KEY,
        series TEXT NOT NULL,
        title TEXT NOT NULL,
        description TEXT NOT NULL,
        arc_type TEXT NOT NULL
            CHECK (arc_type IN ('Anthology', 'Soap', 'GenreSpecific'))
    );
    CREATE TABLE arc_main_characters (
        arc_id TEXT NOT NULL REFERENCES arcs(arc_id) ON DELETE CASCADE,
        character_id TEXT NOT NULL REFERENCES characters(character_id),
        PRIMARY KEY (arc_id, character_id)
    );
    CREATE TABLE progressions (
        progression_id TEXT PRIMARY KEY,
        arc_id TEXT NOT NULL REFERENCES arcs(arc_id) ON DELETE CASCADE,
        series TEXT NOT NULL,
        season INTEGER NOT NULL,
        episode INTEGER NOT NULL,
        content TEXT NOT NULL,
        UNIQUE (arc_id, season, episode)
    );
    CREATE TABLE progression_interfering (
        progression_id TEXT NOT NULL
            REFERENCES progressions(progression_id) ON DELETE CASCADE,
        character_id TEXT NOT NULL REFERENCES characters(character_id),
        PRIMARY KEY (progression_id, character_id)
    );
    CREATE TABLE episode_docs (
        series TEXT NOT NULL,
        season INTEGER NOT NULL,
        episode INTEGER NOT NULL,
        raw_plot TEXT NOT NULL DEFAULT '',
        simplified_plot TEXT NOT NULL DEFAULT '',
        normalized_plot TEXT NOT NULL DEFAULT '',
        episode_summary TEXT NOT NULL DEFAULT '',
        PRIMARY KEY (series, season, episode)
    );
    CREATE TABLE season_summaries (
        series TEXT NOT NULL,
        season INTEGER NOT NULL,
        summary TEXT NOT NULL,
        PRIMARY KEY (series, season)
    );
    CREATE TABLE arc_embeddings (
        arc_id TEXT PRIMARY KEY REFERENCES arcs(arc_id) ON DELETE CASCADE,
        dimension INTEGER NOT NULL,
        vector BLOB NOT NULL,
        source_text TEXT NOT NULL
    );
    CREATE TABLE link_audit (
        audit_id INTEGER PRIMARY KEY AUTOINCREMENT,
        series TEXT NOT NULL,
        new_arc_id TEXT NOT NULL,
        candidate_arc_id TEXT NOT NULL,
        verdict TEXT NOT NULL CHECK (verdict IN ('SameStoryline', 'Distinct')),
        rationale TEXT NOT NULL DEFAULT ''
    );
    CREATE TABLE processed_episodes (
        series TEXT NOT NULL,
        season INTEGER NOT NULL,
        episode INTEGER NOT NULL,
        PRIMARY KEY (series, season, episode)
    );
    CREATE TABLE dismissed_suggestions (
        series TEXT NOT NULL,
        character_a TEXT NOT NULL,
        character_b TEXT NOT NULL,
        PRIMARY KEY (series, character_a, character_b)
    );
    """,
]

_DOMAIN_TABLES = (
    "dismissed_suggestions",
    "processed_episodes",
    "link_audit",
    "arc_embeddings",
    "season_summaries",
    "episode_docs",
    "progression_interfering",
    "progressions",
    "arc_main_characters",
    "arcs",
    "characters",
    "series",
)


def _vector_to_blob(values: tuple[float, ...]) -> bytes:
    return np.asarray(values, dtype="<f8").tobytes()


def _blob_to_vector(blob: bytes, dimension: int) -> EmbeddingVector:
    values = tuple(float(v) for v in np.frombuffer(blob, dtype="<f8"))
    return EmbeddingVector(values=values, dimension=dimension)


class Store:
    """Transactional store; one instance per database file (or ':memory:')."""

    def __init__(self, path: str = ":memory:", id_seed: int = 0):
        self.path = str(path)
        self._conn = sqlite3.connect(self.path, check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        self._conn.isolation_level = None
        self._conn.execute("PRAGMA foreign_keys = ON")
        self._lock = threading.RLock()
        self._txn_depth = 0
        self._season_locks: dict[tuple[str, int], int] = {}
        self._registry_guard = threading.Lock()
        self._migrate()
        self._init_id_state(id_seed)

    def close(self) -> None:
        self._conn.close()

    # ------------------------------------------------------------------
    # Schema and transactions
    # ------------------------------------------------------------------

    def _migrate(self) -> None:
        with self._lock:
            row = self._conn.execute(
                "SELECT name FROM sqlite_master WHERE type='table' AND name='meta'"
            ).fetchone()
            current = 0
            if row is not None:
                got = self._conn.execute(
                    "SELECT value FROM meta WHERE key='schema_version'"
                ).fetchone()
                current = int(got["value"]) if got else 0
            for version in range(current, len(_MIGRATIONS)):
                self._conn.execute("BEGIN IMMEDIATE")
                try:
                    # Statement-at-a-time keeps the migration inside this
                    # transaction (executescript would auto-commit it).
                    for statement in _MIGRATIONS[version].split(";"):
                        if statement.strip():
                            self._conn.execute(statement)
                    self._conn.execute(
                        "INSERT OR REPLACE INTO meta (key, value) VALUES "
                        "('schema_version', ?)",
                        (str(version + 1),),
                    )
                except Exception:
                    self._conn.execute("ROLLBACK")
                    raise
                self._conn.execute("COMMIT")

    def _init_id_state(self, id_seed: int) -> None:
        with self.transaction() as conn:
            conn.execute(
                "INSERT OR IGNORE INTO meta (key, value) VALUES ('id_seed', ?)",
                (str(id_seed),),
            )
            conn.execute(
                "INSERT OR IGNORE INTO meta (key, value) VALUES ('id_counter', '0')"
            )

    @contextmanager
    def transaction(self) -> Iterator[sqlite3.Connection]:
        """Atomic scope. Nested use joins the outer transaction via savepoints.

        Raises ``StoreBusy`` when another thread's pipeline run holds a
        season lock: mutations wait their turn behind a run, reads do not.
        """
        with self._lock:
            if self._txn_depth == 0 and self._locked_by_other_thread():
                raise StoreBusy("a pipeline run is in progress; retry later")
            depth = self._txn_depth
            if depth == 0:
                self._conn.execute("BEGIN IMMEDIATE")
            else:
                self._conn.execute(f"SAVEPOINT sp_{depth}")
            self._txn_depth = depth + 1
            try:
                yield self._conn
            except sqlite3.IntegrityError as exc:
                self._rollback_to(depth)
                raise _map_integrity_error(exc) from exc
            except Exception:
                self._rollback_to(depth)
                raise
            else:
                self._txn_depth = depth
                if depth == 0:
                    self._conn.execute("COMMIT")
                else:
                    self._conn.execute(f"RELEASE sp_{depth}")

    def _rollback_to(self, depth: int) -> None:
        self._txn_depth = depth
        if depth == 0:
            self._conn.execute("ROLLBACK")
        else:
            self._conn.execute(f"ROLLBACK TO sp_{depth}")
            self._conn.execute(f"RELEASE sp_{depth}")


    def _q1(self, query: str, params: tuple[Any, ...] = ()) -> sqlite3.Row | None:
        with self._lock:
            return self._conn.execute(query, params).fetchone()

    def _q(self, query: str, params: tuple[Any, ...] = ()) -> list[sqlite3.Row]:
        with self._lock:
            return self._conn.execute(query, params).fetchall()

    def _locked_by_other_thread(self) -> bool:
        me = threading.get_ident()
        with self._registry_guard:
            return any(owner != me for owner in self._season_locks.values())

    @contextmanager
    def season_run_lock(self, series: str, season: int) -> Iterator[None]:
        """Exclusive lock held for the duration of one pipeline run."""
        key = (series, season)
        with self._registry_guard:
            if key in self._season_locks:
                raise StoreBusy(f"a run is already active for {series} season {season}")
            self._season_locks[key] = threading.get_ident()
        try:
            yield
        finally:
            with self._registry_guard:
                self._season_locks.pop(key, None)

    def run_active(self) -> bool:
        with self._registry_guard:
            return bool(self._season_locks)

    # ------------------------------------------------------------------
    # Identifier allocation
    # ------------------------------------------------------------------

    def new_id(self) -> str:
        """Allocate the next 128-bit hex identifier from the seeded sequence."""
        with self.transaction() as conn:
            seed = conn.execute(
                "SELECT value FROM meta WHERE key='id_seed'"
            ).fetchone()["value"]
            counter = int(
                conn.execute(
                    "SELECT value FROM meta WHERE key='id_counter'"
                ).fetchone()["value"]
            )
            conn.execute(
                "UPDATE meta SET value=? WHERE key='id_counter'", (str(counter + 1),)
            )
        return hashlib.sha256(f"{seed}:{counter}".encode()).hexdigest()[:32]

    # ------------------------------------------------------------------
    # Series
    # ------------------------------------------------------------------

    def upsert_series(self, name: str, genre: str) -> None:
        with self.transaction() as conn:
            conn.execute(
                "INSERT INTO series (name, genre) VALUES (?, ?) "
                "ON CONFLICT(name) DO UPDATE SET genre=excluded.genre",
                (name, genre),
            )

    def get_series_genre(self, name: str) -> str:
        row = self._q1("SELECT genre FROM series WHERE name=?", (name,))
        if row is None:
            raise NotFound(f"series {name!r} not registered")
        return row["genre"]

    def list_series(self) -> list[tuple[str, str]]:
        rows = self._q("SELECT name, genre FROM series ORDER BY name")
        return [(r["name"], r["genre"]) for r in rows]

    # ------------------------------------------------------------------
    # Characters
    # ------------------------------------------------------------------

    def save_character(self, char: Character) -> Character:
        alt = sorted(char.alternative_names - {char.preferred_name})
        with self.transaction() as conn:
            conn.execute(
                "INSERT INTO characters "
                "(character_id, series, preferred_name, alternative_names) "
                "VALUES (?, ?, ?, ?) "
                "ON CONFLICT(character_id) DO UPDATE SET "
                "preferred_name=excluded.preferred_name, "
                "alternative_names=excluded.alternative_names",
                (char.character_id, char.series, char.preferred_name, json.dumps(alt)),
            )
        return Character(
            character_id=char.character_id,
            preferred_name=char.preferred_name,
            series=char.series,
            alternative_names=frozenset(alt),
        )

    def get_character(self, character_id: str) -> Character:
        row = self._q1("SELECT * FROM characters WHERE character_id=?", (character_id,))
        if row is None:
            raise NotFound(f"character {character_id} not found")
        return _row_to_character(row)

    def list_characters(self, series: str | None = None) -> list[Character]:
        query = "SELECT * FROM characters"
        params: tuple[Any, ...] = ()
        if series is not None:
            query += " WHERE series=?"
            params = (series,)
        rows = self._q(query + " ORDER BY character_id", params)
        return [_row_to_character(r) for r in rows]

    def delete_character(self, character_id: str) -> None:
        with self.transaction() as conn:
            referenced = conn.execute(
                "SELECT 1 FROM arc_main_characters WHERE character_id=? "
                "UNION SELECT 1 FROM progression_interfering WHERE character_id=? "
                "LIMIT 1",
                (character_id, character_id),
            ).fetchone()
            if referenced is not None:
                raise Conflict(f"character {character_id} is referenced by arcs")
            cur = conn.execute(
                "DELETE FROM characters WHERE character_id=?", (character_id,)
            )
            if cur.rowcount == 0:
                raise NotFound(f"character {character_id} not found")

    def merge_characters(self, keep_id: str, remove_id: str) -> Character:
        """Fold ``remove`` into ``keep``: names become aliases, references move."""
        if keep_id == remove_id:
            raise SelfMerge("cannot merge a character into itself")
        with self.transaction() as conn:
            keep = self.get_character(keep_id)
            remove = self.get_character(remove_id)
            for table in ("arc_main_characters", "progression_interfering"):
                conn.execute(
                    f"UPDATE OR IGNORE {table} SET character_id=? WHERE character_id=?",
                    (keep_id, remove_id),
                )
                conn.execute(
                    f"DELETE FROM {table} WHERE character_id=?", (remove_id,)
                )
            conn.execute("DELETE FROM characters WHERE character_id=?", (remove_id,))
            conn.execute(
                "DELETE FROM dismissed_suggestions "
                "WHERE character_a=? OR character_b=?",
                (remove_id, remove_id),
            )
            merged_names = (
                keep.alternative_names
                | remove.alternative_names
                | {remove.preferred_name}
            ) - {keep.preferred_name}
            return self.save_character(
                Character(
                    character_id=keep.character_id,
                    preferred_name=keep.preferred_name,
                    series=keep.series,
                    alternative_names=frozenset(merged_names),
                )
            )

    # ------------------------------------------------------------------
    # Arcs and progressions
    # ------------------------------------------------------------------

    def create_arc(self, arc: NarrativeArc) -> NarrativeArc:
        registry = {c.character_id for c in self.list_characters(arc.series)}
        violations = validate_arc(arc, registry)
        if violations:
            raise ConstraintViolation(
                "arc violates invariants: " + ", ".join(v.code for v in violations)
            )
        with self.transaction() as conn:
            conn.execute(
                "INSERT INTO arcs (arc_id, series, title, description, arc_type) "
                "VALUES (?, ?, ?, ?, ?)",
                (arc.arc_id, arc.series, arc.title, arc.description, arc.arc_type.value),
            )
            for cid in sorted(arc.main_characters):
                conn.execute(
                    "INSERT INTO arc_main_characters (arc_id, character_id) "
                    "VALUES (?, ?)",
                    (arc.arc_id, cid),
                )
            for prog in arc.progressions:
                self._insert_progression(conn, prog)
        return self.get_arc(arc.arc_id)

    def _insert_progression(self, conn: sqlite3.Connection, prog: Progression) -> None:
        conn.execute(
            "INSERT INTO progressions "
            "(progression_id, arc_id, series, season, episode, content) "
            "VALUES (?, ?, ?, ?, ?, ?)",
            (prog.progression_id, prog.arc_id, prog.series,
             prog.season, prog.episode, prog.content),
        )
        for cid in sorted(prog.interfering_characters):
            conn.execute(
                "INSERT INTO progression_interfering (progression_id, character_id) "
                "VALUES (?, ?)",
                (prog.progression_id, cid),
            )

    def get_arc(self, arc_id: str) -> NarrativeArc:
        row = self._q1("SELECT * FROM arcs WHERE arc_id=?", (arc_id,))
        if row is None:
            raise NotFound(f"arc {arc_id} not found")
        return self._assemble_arc(row)

    def _assemble_arc(self, row: sqlite3.Row) -> NarrativeArc:
        arc_id = row["arc_id"]
        mains = frozenset(
            r["character_id"]
            for r in self._q(
                "SELECT character_id FROM arc_main_characters WHERE arc_id=?",
                (arc_id,),
            )
        )
        prog_rows = self._q(
            "SELECT * FROM progressions WHERE arc_id=? ORDER BY season, episode",
            (arc_id,),
        )
        progressions = []
        for prow in prog_rows:
            interfering = frozenset(
                r["character_id"]
                for r in self._q(
                    "SELECT character_id FROM progression_interfering "
                    "WHERE progression_id=?",
                    (prow["progression_id"],),
                )
            )
            progressions.append(
                Progression(
                    progression_id=prow["progression_id"],
                    arc_id=prow["arc_id"],
                    content=prow["content"],
                    series=prow["series"],
                    season=prow["season"],
                    episode=prow["episode"],
                    interfering_characters=interfering,
                )
            )
        return NarrativeArc(
            arc_id=arc_id,
            title=row["title"],
            description=row["description"],
            arc_type=ArcType(row["arc_type"]),
            series=row["series"],
            main_characters=mains,
            progressions=tuple(progressions),
        )

    def list_arcs(self, series: str | None = None) -> list[NarrativeArc]:
        query = "SELECT * FROM arcs"
        params: tuple[Any, ...] = ()
        if series is not None:
            query += " WHERE series=?"
            params = (series,)
        rows = self._q(query + " ORDER BY arc_id", params)
        return [self._assemble_arc(r) for r in rows]

    def arcs_in_season(self, series: str, season: int) -> list[NarrativeArc]:
        rows = self._q(
            "SELECT DISTINCT a.* FROM arcs a "
            "JOIN progressions p ON p.arc_id = a.arc_id "
            "WHERE a.series=? AND p.season=? ORDER BY a.arc_id",
            (series, season),
        )
        return [self._assemble_arc(r) for r in rows]

    def update_arc(
        self,
        arc_id: str,
        *,
        title: str | None = None,
        description: str | None = None,
        arc_type: ArcType | None = None,
        main_characters: frozenset[str] | None = None,
    ) -> NarrativeArc:
        with self.transaction() as conn:
            arc = self.get_arc(arc_id)
            new_title = title if title is not None else arc.title
            new_desc = description if description is not None else arc.description
            new_type = arc_type if arc_type is not None else arc.arc_type
            new_mains = main_characters if main_characters is not None else arc.main_characters
            candidate = NarrativeArc(
                arc_id=arc_id, title=new_title, description=new_desc,
                arc_type=new_type, series=arc.series,
                main_characters=new_mains, progressions=arc.progressions,
            )
            registry = {c.character_id for c in self.list_characters(arc.series)}
            violations = validate_arc(candidate, registry)
            if violations:
                raise ConstraintViolation(
                    "update violates invariants: "
                    + ", ".join(v.code for v in violations)
                )
            conn.execute(
                "UPDATE arcs SET title=?, description=?, arc_type=? WHERE arc_id=?",
                (new_title, new_desc, new_type.value, arc_id),
            )
            if main_characters is not None:
                conn.execute(
                    "DELETE FROM arc_main_characters WHERE arc_id=?", (arc_id,)
                )
                for cid in sorted(main_characters):
                    conn.execute(
                        "INSERT INTO arc_main_characters (arc_id, character_id) "
                        "VALUES (?, ?)",
                        (arc_id, cid),
                    )
        return self.get_arc(arc_id)

    def delete_arc(self, arc_id: str) -> None:
        with self.transaction() as conn:
            cur = conn.execute("DELETE FROM arcs WHERE arc_id=?", (arc_id,))
            if cur.rowcount == 0:
                raise NotFound(f"arc {arc_id} not found")

    def merge_arcs(self, keep_id: str, remove_id: str) -> NarrativeArc:
        """Move progressions and characters from ``remove`` into ``keep``.

        Refuses to merge two anthology arcs from different episodes, and
        refuses when both arcs progressed in the same episode (human
        judgment is required there: nothing is changed).
        """
        if keep_id == remove_id:
            raise SelfMerge("cannot merge an arc into itself")
        with self.transaction() as conn:
            keep = self.get_arc(keep_id)
            remove = self.get_arc(remove_id)
            keep_eps = {(p.season, p.episode) for p in keep.progressions}
            remove_eps = {(p.season, p.episode) for p in remove.progressions}
            if (
                keep.arc_type is ArcType.ANTHOLOGY
                and remove.arc_type is ArcType.ANTHOLOGY
                and keep_eps != remove_eps
            ):
                raise Conflict(
                    "cannot merge anthology arcs from different episodes"
                )
            overlap = keep_eps & remove_eps
            if overlap:
                label = ", ".join(f"S{s:02d}E{e:02d}" for s, e in sorted(overlap))
                raise Conflict(f"both arcs have progressions in {label}")
            conn.execute(
                "UPDATE progressions SET arc_id=? WHERE arc_id=?",
                (keep_id, remove_id),
            )
            conn.execute(
                "UPDATE OR IGNORE arc_main_characters SET arc_id=? WHERE arc_id=?",
                (keep_id, remove_id),
            )
            conn.execute("DELETE FROM arcs WHERE arc_id=?", (remove_id,))
        return self.get_arc(keep_id)

    def add_progression(self, prog: Progression) -> Progression:
        arc = self.get_arc(prog.arc_id)
        if arc.series != prog.series:
            raise ConstraintViolation("progression series does not match its arc")
        with self.transaction() as conn:
            self._insert_progression(conn, prog)
        return self.get_progression(prog.progression_id)

    def get_progression(self, progression_id: str) -> Progression:
        row = self._q1(
            "SELECT * FROM progressions WHERE progression_id=?", (progression_id,)
        )
        if row is None:
            raise NotFound(f"progression {progression_id} not found")
        interfering = frozenset(
            r["character_id"]
            for r in self._q(
                "SELECT character_id FROM progression_interfering "
                "WHERE progression_id=?",
                (progression_id,),
            )
        )
        return Progression(
            progression_id=row["progression_id"],
            arc_id=row["arc_id"],
            content=row["content"],
            series=row["series"],
            season=row["season"],
            episode=row["episode"],
            interfering_characters=interfering,
        )

    def update_progression(
        self,
        progression_id: str,
        *,
        content: str | None = None,
        interfering_characters: frozenset[str] | None = None,
    ) -> Progression:
        with self.transaction() as conn:
            self.get_progression(progression_id)
            if content is not None:
                if not content.strip():
                    raise ConstraintViolation("progression content must be non-empty")
                conn.execute(
                    "UPDATE progressions SET content=? WHERE progression_id=?",
                    (content, progression_id),
                )
            if interfering_characters is not None:
                conn.execute(
                    "DELETE FROM progression_interfering WHERE progression_id=?",
                    (progression_id,),
                )
                for cid in sorted(interfering_characters):
                    conn.execute(
                        "INSERT INTO progression_interfering "
                        "(progression_id, character_id) VALUES (?, ?)",
                        (progression_id, cid),
                    )
        return self.get_progression(progression_id)

    def delete_progression(self, progression_id: str) -> None:
        with self.transaction() as conn:
            cur = conn.execute(
                "DELETE FROM progressions WHERE progression_id=?", (progression_id,)
            )
            if cur.rowcount == 0:
                raise NotFound(f"progression {progression_id} not found")

    # ------------------------------------------------------------------
    # Episode docs and season summaries
    # ------------------------------------------------------------------

    def upsert_episode_doc(self, doc: EpisodeDoc) -> None:
        with self.transaction() as conn:
            conn.execute(
                "INSERT INTO episode_docs "
                "(series, season, episode, raw_plot, simplified_plot, "
                " normalized_plot, episode_summary) "
                "VALUES (?, ?, ?, ?, ?, ?, ?) "
                "ON CONFLICT(series, season, episode) DO UPDATE SET "
                "raw_plot=excluded.raw_plot, "
                "simplified_plot=excluded.simplified_plot, "
                "normalized_plot=excluded.normalized_plot, "
                "episode_summary=excluded.episode_summary",
                (doc.key.series, doc.key.season, doc.key.episode,
                 doc.raw_plot, doc.simplified_plot,
                 doc.normalized_plot, doc.episode_summary),
            )

    def get_episode_doc(self, key: EpisodeKey) -> EpisodeDoc:
        row = self._q1(
            "SELECT * FROM episode_docs WHERE series=? AND season=? AND episode=?",
            (key.series, key.season, key.episode),
        )
        if row is None:
            raise NotFound(f"episode {key.series} {key.label} not ingested")
        return EpisodeDoc(
            key=key,
            raw_plot=row["raw_plot"],
            simplified_plot=row["simplified_plot"],
            normalized_plot=row["normalized_plot"],
            episode_summary=row["episode_summary"],
        )

    def list_episode_docs(
        self, series: str, season: int | None = None
    ) -> list[EpisodeDoc]:
        query = "SELECT * FROM episode_docs WHERE series=?"
        params: list[Any] = [series]
        if season is not None:
            query += " AND season=?"
            params.append(season)
        rows = self._q(query + " ORDER BY season, episode", tuple(params))
        return [
            EpisodeDoc(
                key=EpisodeKey(r["series"], r["season"], r["episode"]),
                raw_plot=r["raw_plot"],
                simplified_plot=r["simplified_plot"],
                normalized_plot=r["normalized_plot"],
                episode_summary=r["episode_summary"],
            )
            for r in rows
        ]

    def set_season_summary(self, series: str, season: int, summary: str) -> None:
        with self.transaction() as conn:
            conn.execute(
                "INSERT INTO season_summaries (series, season, summary) "
                "VALUES (?, ?, ?) "
                "ON CONFLICT(series, season) DO UPDATE SET summary=excluded.summary",
                (series, season, summary),
            )

    def get_season_summary(self, series: str, season: int) -> str:
        row = self._q1(
            "SELECT summary FROM season_summaries WHERE series=? AND season=?",
            (series, season),
        )
        return row["summary"] if row else ""

    # ------------------------------------------------------------------
    # Embeddings, audit, run bookkeeping
    # ------------------------------------------------------------------

    def upsert_embedding(
        self, arc_id: str, vector: EmbeddingVector, source_text: str
    ) -> None:
        self.get_arc(arc_id)
        with self.transaction() as conn:
            conn.execute(
                "INSERT INTO arc_embeddings (arc_id, dimension, vector, source_text) "
                "VALUES (?, ?, ?, ?) "
                "ON CONFLICT(arc_id) DO UPDATE SET "
                "dimension=excluded.dimension, vector=excluded.vector, "
                "source_text=excluded.source_text",
                (arc_id, vector.dimension, _vector_to_blob(vector.values), source_text),
            )

    def get_embedding(self, arc_id: str) -> tuple[EmbeddingVector, str] | None:
        row = self._q1("SELECT * FROM arc_embeddings WHERE arc_id=?", (arc_id,))
        if row is None:
            return None
        return _blob_to_vector(row["vector"], row["dimension"]), row["source_text"]

    def list_embeddings(self, series: str) -> list[tuple[str, EmbeddingVector, str]]:
        rows = self._q(
            "SELECT e.* FROM arc_embeddings e JOIN arcs a ON a.arc_id = e.arc_id "
            "WHERE a.series=? ORDER BY e.arc_id",
            (series,),
        )
        return [
            (r["arc_id"], _blob_to_vector(r["vector"], r["dimension"]), r["source_text"])
            for r in rows
        ]

    def add_link_audit(
        self, series: str, new_arc_id: str, candidate_arc_id: str,
        verdict: str, rationale: str,
    ) -> None:
        with self.transaction() as conn:
            conn.execute(
                "INSERT INTO link_audit "
                "(series, new_arc_id, candidate_arc_id, verdict, rationale) "
                "VALUES (?, ?, ?, ?, ?)",
                (series, new_arc_id, candidate_arc_id, verdict, rationale),
            )

    def list_link_audit(self, series: str | None = None) -> list[dict[str, Any]]:
        query = "SELECT * FROM link_audit"
        params: tuple[Any, ...] = ()
        if series is not None:
            query += " WHERE series=?"
            params = (series,)
        rows = self._q(query + " ORDER BY audit_id", params)
        return [dict(r) for r in rows]

    def mark_processed(self, key: EpisodeKey) -> None:
        with self.transaction() as conn:
            conn.execute(
                "INSERT INTO processed_episodes (series, season, episode) "
                "VALUES (?, ?, ?)",
                (key.series, key.season, key.episode),
            )

    def is_processed(self, key: EpisodeKey) -> bool:
        row = self._q1(
            "SELECT 1 FROM processed_episodes WHERE series=? AND season=? AND episode=?",
            (key.series, key.season, key.episode),
        )
        return row is not None

    def processed_episodes(self, series: str, season: int) -> list[int]:
        rows = self._q(
            "SELECT episode FROM processed_episodes WHERE series=? AND season=? "
            "ORDER BY episode",
            (series, season),
        )
        return [r["episode"] for r in rows]

    def dismiss_suggestion(self, series: str, id_a: str, id_b: str) -> None:
        first, second = sorted((id_a, id_b))
        with self.transaction() as conn:
            conn.execute(
                "INSERT OR IGNORE INTO dismissed_suggestions "
                "(series, character_a, character_b) VALUES (?, ?, ?)",
                (series, first, second),
            )

    def dismissed_pairs(self, series: str) -> set[tuple[str, str]]:
        rows = self._q(
            "SELECT character_a, character_b FROM dismissed_suggestions WHERE series=?",
            (series,),
        )
        return {(r["character_a"], r["character_b"]) for r in rows}

    # ------------------------------------------------------------------
    # Export / import / integrity
    # ------------------------------------------------------------------

    def export_doc(self, series: str | None = None) -> dict[str, Any]:
        """Collect the full (or one series') state as a canonical document."""
        def wanted(name: str) -> bool:
            return series is None or name == series

        seed = self._q1("SELECT value FROM meta WHERE key='id_seed'")["value"]
        counter = self._q1("SELECT value FROM meta WHERE key='id_counter'")["value"]

        doc: dict[str, Any] = {
            "schema_version": SCHEMA_VERSION,
            "id_state": {"seed": int(seed), "counter": int(counter)},
            "series": [
                {"name": name, "genre": genre}
                for name, genre in self.list_series()
                if wanted(name)
            ],
            "characters": [
                character_to_dict(c)
                for c in self.list_characters()
                if wanted(c.series)
            ],
            "arcs": [
                arc_to_dict(a) for a in self.list_arcs() if wanted(a.series)
            ],
            "episode_docs": [],
            "season_summaries": [],
            "arc_embeddings": [],
            "link_audit": [
                {
                    "audit_id": row["audit_id"],
                    "series": row["series"],
                    "new_arc_id": row["new_arc_id"],
                    "candidate_arc_id": row["candidate_arc_id"],
                    "verdict": row["verdict"],
                    "rationale": row["rationale"],
                }
                for row in self.list_link_audit()
                if wanted(row["series"])
            ],
            "processed_episodes": [],
            "dismissed_suggestions": [],
        }

        for row in self._q("SELECT * FROM episode_docs ORDER BY series, season, episode"):
            if wanted(row["series"]):
                doc["episode_docs"].append(
                    episode_doc_to_dict(
                        EpisodeDoc(
                            key=EpisodeKey(row["series"], row["season"], row["episode"]),
                            raw_plot=row["raw_plot"],
                            simplified_plot=row["simplified_plot"],
                            normalized_plot=row["normalized_plot"],
                            episode_summary=row["episode_summary"],
                        )
                    )
                )
        for row in self._q("SELECT * FROM season_summaries ORDER BY series, season"):
            if wanted(row["series"]):
                doc["season_summaries"].append(
                    {"series": row["series"], "season": row["season"],
                     "summary": row["summary"]}
                )
        for row in self._q(
            "SELECT e.*, a.series AS series FROM arc_embeddings e "
            "JOIN arcs a ON a.arc_id = e.arc_id ORDER BY e.arc_id"
        ):
            if wanted(row["series"]):
                vector = _blob_to_vector(row["vector"], row["dimension"])
                doc["arc_embeddings"].append(
                    {
                        "arc_id": row["arc_id"],
                        "vector": {
                            "values": list(vector.values),
                            "dimension": vector.dimension,
                        },
                        "source_text": row["source_text"],
                    }
                )
        for row in self._q("SELECT * FROM processed_episodes ORDER BY series, season, episode"):
            if wanted(row["series"]):
                doc["processed_episodes"].append(
                    {"series": row["series"], "season": row["season"],
                     "episode": row["episode"]}
                )
        for row in self._q(
            "SELECT * FROM dismissed_suggestions "
            "ORDER BY series, character_a, character_b"
        ):
            if wanted(row["series"]):
                doc["dismissed_suggestions"].append(
                    {"series": row["series"], "character_a": row["character_a"],
                     "character_b": row["character_b"]}
                )
        return doc

    def export_canonical(self, series: str | None = None) -> str:
        return canonical_dumps(self.export_doc(series))

    def wipe(self) -> None:
        """Delete every domain row; schema and id seed remain."""
        with self.transaction() as conn:
            for table in _DOMAIN_TABLES:
                conn.execute(f"DELETE FROM {table}")
            conn.execute("DELETE FROM sqlite_sequence WHERE name='link_audit'")
            conn.execute("UPDATE meta SET value='0' WHERE key='id_counter'")

    def import_doc(self, doc: dict[str, Any]) -> None:
        """Load an exported document into an empty store."""
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise ConstraintViolation(
                f"export schema_version {doc.get('schema_version')!r} is not "
                f"{SCHEMA_VERSION}"
            )
        if self._q1("SELECT 1 FROM arcs LIMIT 1") or self._q1(
                "SELECT 1 FROM characters LIMIT 1"):
            raise Conflict("import requires an empty store")
        from .model import (  # local import keeps module top uncluttered
            arc_from_dict,
            character_from_dict,
            episode_doc_from_dict,
        )

        with self.transaction() as conn:
            id_state = doc.get("id_state", {})
            if id_state:
                conn.execute(
                    "UPDATE meta SET value=? WHERE key='id_seed'",
                    (str(id_state["seed"]),),
                )
                conn.execute(
                    "UPDATE meta SET value=? WHERE key='id_counter'",
                    (str(id_state["counter"]),),
                )
            for entry in doc.get("series", []):
                self.upsert_series(entry["name"], entry["genre"])
            for entry in doc.get("characters", []):
                self.save_character(character_from_dict(entry))
            for entry in doc.get("arcs", []):
                self.create_arc(arc_from_dict(entry))
            for entry in doc.get("episode_docs", []):
                self.upsert_episode_doc(episode_doc_from_dict(entry))
            for entry in doc.get("season_summaries", []):
                self.set_season_summary(
                    entry["series"], entry["season"], entry["summary"]
                )
            for entry in doc.get("arc_embeddings", []):
                self.upsert_embedding(
                    entry["arc_id"],
                    EmbeddingVector(
                        values=tuple(entry["vector"]["values"]),
                        dimension=entry["vector"]["dimension"],
                    ),
                    entry["source_text"],
                )
            for entry in doc.get("link_audit", []):
                conn.execute(
                    "INSERT INTO link_audit "
                    "(audit_id, series, new_arc_id, candidate_arc_id, "
                    " verdict, rationale) VALUES (?, ?, ?, ?, ?, ?)",
                    (entry["audit_id"], entry["series"], entry["new_arc_id"],
                     entry["candidate_arc_id"], entry["verdict"], entry["rationale"]),
                )
            for entry in doc.get("processed_episodes", []):
                self.mark_processed(
                    EpisodeKey(entry["series"], entry["season"], entry["episode"])
                )
            for entry in doc.get("dismissed_suggestions", []):
                self.dismiss_suggestion(
                    entry["series"], entry["character_a"], entry["character_b"]
                )

    def integrity_sweep(self) -> list[str]:
        """Return every dangling reference or invariant violation, or []."""
        problems: list[str] = []
        checks = [
            ("SELECT m.arc_id FROM arc_main_characters m "
             "LEFT JOIN arcs a ON a.arc_id = m.arc_id WHERE a.arc_id IS NULL",
             "arc_main_characters row with missing arc"),
            ("SELECT m.character_id FROM arc_main_characters m "
             "LEFT JOIN characters c ON c.character_id = m.character_id "
             "WHERE c.character_id IS NULL",
             "arc_main_characters row with missing character"),
            ("SELECT p.progression_id FROM progressions p "
             "LEFT JOIN arcs a ON a.arc_id = p.arc_id WHERE a.arc_id IS NULL",
             "progression with missing arc"),
            ("SELECT i.progression_id FROM progression_interfering i "
             "LEFT JOIN progressions p ON p.progression_id = i.progression_id "
             "WHERE p.progression_id IS NULL",
             "interfering row with missing progression"),
            ("SELECT i.character_id FROM progression_interfering i "
             "LEFT JOIN characters c ON c.character_id = i.character_id "
             "WHERE c.character_id IS NULL",
             "interfering row with missing character"),
            ("SELECT e.arc_id FROM arc_embeddings e "
             "LEFT JOIN arcs a ON a.arc_id = e.arc_id WHERE a.arc_id IS NULL",
             "embedding with missing arc"),
            ("SELECT pe.series FROM processed_episodes pe "
             "LEFT JOIN episode_docs d ON d.series = pe.series "
             "AND d.season = pe.season AND d.episode = pe.episode "
             "WHERE d.series IS NULL",
             "processed episode with missing episode doc"),
        ]
        for query, label in checks:
            for row in self._q(query):
                problems.append(f"{label}: {tuple(row)}")
        by_series: dict[str, set[str]] = {}
        for char in self.list_characters():
            key = char.series
            lowered = char.preferred_name.lower()
            if lowered in by_series.setdefault(key, set()):
                problems.append(f"duplicate preferred name {char.preferred_name!r}")
            by_series[key].add(lowered)
        for arc in self.list_arcs():
            registry = {c.character_id for c in self.list_characters(arc.series)}
            for violation in validate_arc(arc, registry):
                problems.append(f"arc {arc.arc_id}: {violation.code}")
        return problems


def _row_to_character(row: sqlite3.Row) -> Character:
    return Character(
        character_id=row["character_id"],
        preferred_name=row["preferred_name"],
        series=row["series"],
        alternative_names=frozenset(json.loads(row["alternative_names"])),
    )


def _map_integrity_error(exc: sqlite3.IntegrityError) -> Exception:
    message = str(exc)
    if "UNIQUE" in message:
        if "characters" in message:
            return Conflict(f"preferred name already taken ({message})")
        return Conflict(message)
    if "FOREIGN KEY" in message:
        return ConstraintViolation(f"dangling reference ({message})")
    return ConstraintViolation(message)


def open_store(path: str | Path, id_seed: int = 0) -> Store:
    """Open (creating if needed) the store at ``path``."""
    p = Path(path)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True, exist_ok=True)
    return Store(str(p), id_seed=id_seed)
