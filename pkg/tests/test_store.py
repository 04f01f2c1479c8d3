"""Transactional CRUD, cascades, merges, export/import, locks, id sequence."""

from __future__ import annotations

import threading

import pytest

from narrarc.errors import Conflict, ConstraintViolation, NotFound, SelfMerge, StoreBusy
from narrarc.gateway import EmbeddingVector
from narrarc.model import ArcType, EpisodeDoc, EpisodeKey, NarrativeArc, Progression
from narrarc.store import Store

from .conftest import SERIES, seed_character, seed_episode


def make_arc(store: Store, title: str, arc_type: ArcType = ArcType.SOAP,
             episodes: tuple[int, ...] = (1,), season: int = 1,
             mains: frozenset[str] = frozenset(),
             description: str = "Something develops.") -> NarrativeArc:
    arc_id = store.new_id()
    progressions = tuple(
        Progression(
            progression_id=store.new_id(), arc_id=arc_id,
            content=f"Events of episode {e}.", series=SERIES,
            season=season, episode=e,
        )
        for e in episodes
    )
    return store.create_arc(
        NarrativeArc(
            arc_id=arc_id, title=title, description=description,
            arc_type=arc_type, series=SERIES, main_characters=mains,
            progressions=progressions,
        )
    )


def unit_vector(index: int, dimension: int = 4) -> EmbeddingVector:
    values = [0.0] * dimension
    values[index] = 1.0
    return EmbeddingVector(values=tuple(values), dimension=dimension)


class TestArcCrud:
    def test_create_get_roundtrip(self, store):
        char = seed_character(store, "Dana Ellis")
        arc = make_arc(store, "An Arc", mains=frozenset({char.character_id}))
        assert store.get_arc(arc.arc_id) == arc

    def test_create_rejects_unknown_main_character(self, store):
        arc_id = store.new_id()
        with pytest.raises(ConstraintViolation):
            store.create_arc(
                NarrativeArc(
                    arc_id=arc_id, title="t", description="d",
                    arc_type=ArcType.SOAP, series=SERIES,
                    main_characters=frozenset({"ghost"}),
                )
            )

    def test_delete_cascades_progressions_and_embedding(self, store):
        arc = make_arc(store, "Doomed", episodes=(1, 2, 3))
        store.upsert_embedding(arc.arc_id, unit_vector(0), "text")
        prog_ids = [p.progression_id for p in arc.progressions]
        store.delete_arc(arc.arc_id)
        for pid in prog_ids:
            with pytest.raises(NotFound):
                store.get_progression(pid)
        assert store.get_embedding(arc.arc_id) is None
        assert store.list_arcs(SERIES) == []

    def test_duplicate_episode_progression_conflicts(self, store):
        arc = make_arc(store, "An Arc", episodes=(1,))
        with pytest.raises(Conflict):
            store.add_progression(
                Progression(
                    progression_id=store.new_id(), arc_id=arc.arc_id,
                    content="again", series=SERIES, season=1, episode=1,
                )
            )

    def test_update_arc_fields(self, store):
        arc = make_arc(store, "Old Title")
        updated = store.update_arc(arc.arc_id, title="New Title",
                                   arc_type=ArcType.GENRE_SPECIFIC)
        assert updated.title == "New Title"
        assert updated.arc_type is ArcType.GENRE_SPECIFIC
        assert updated.progressions == arc.progressions

    def test_get_missing_arc(self, store):
        with pytest.raises(NotFound):
            store.get_arc("nope")


class TestMergeArcs:
    def test_disjoint_merge_unions_progressions(self, store):
        # The classic extraction failure shape: one character's storyline
        # split into two arcs with interleaved episodes, merged by a human.
        c = seed_character(store, "Nora Quinn")
        keep = make_arc(store, "Nora: Facing the Past", episodes=(1, 3),
                        mains=frozenset({c.character_id}))
        remove = make_arc(store, "Nora: Work Against Ambition",
                          episodes=(2, 4), mains=frozenset({c.character_id}))
        merged = store.merge_arcs(keep.arc_id, remove.arc_id)
        assert [(p.season, p.episode) for p in merged.progressions] == [
            (1, 1), (1, 2), (1, 3), (1, 4)]
        assert merged.title == "Nora: Facing the Past"
        with pytest.raises(NotFound):
            store.get_arc(remove.arc_id)

    def test_same_episode_merge_conflicts_and_changes_nothing(self, store):
        keep = make_arc(store, "One", episodes=(1, 2))
        remove = make_arc(store, "Two", episodes=(2, 3))
        before = store.export_canonical()
        with pytest.raises(Conflict):
            store.merge_arcs(keep.arc_id, remove.arc_id)
        assert store.export_canonical() == before

    def test_anthology_cross_episode_merge_refused(self, store):
        keep = make_arc(store, "Case A", ArcType.ANTHOLOGY, episodes=(1,))
        remove = make_arc(store, "Case B", ArcType.ANTHOLOGY, episodes=(2,))
        with pytest.raises(Conflict):
            store.merge_arcs(keep.arc_id, remove.arc_id)

    def test_self_merge_rejected(self, store):
        arc = make_arc(store, "Solo")
        with pytest.raises(SelfMerge):
            store.merge_arcs(arc.arc_id, arc.arc_id)

    def test_characters_unioned(self, store):
        a = seed_character(store, "Dana Ellis")
        b = seed_character(store, "Victor Hale")
        keep = make_arc(store, "One", episodes=(1,), mains=frozenset({a.character_id}))
        remove = make_arc(store, "Two", episodes=(2,), mains=frozenset({b.character_id}))
        merged = store.merge_arcs(keep.arc_id, remove.arc_id)
        assert merged.main_characters == {a.character_id, b.character_id}


class TestCharacters:
    def test_preferred_name_unique_case_insensitive(self, store):
        seed_character(store, "Dana Ellis")
        with pytest.raises(Conflict):
            seed_character(store, "DANA ELLIS")

    def test_delete_referenced_character_refused(self, store):
        c = seed_character(store, "Dana Ellis")
        make_arc(store, "Arc", mains=frozenset({c.character_id}))
        with pytest.raises(Conflict):
            store.delete_character(c.character_id)

    def test_delete_unreferenced_character(self, store):
        c = seed_character(store, "Dana Ellis")
        store.delete_character(c.character_id)
        assert store.list_characters(SERIES) == []


class TestEpisodeDocs:
    def test_upsert_and_get(self, store):
        key = seed_episode(store)
        doc = store.get_episode_doc(key)
        assert doc.normalized_plot

    def test_missing_episode(self, store):
        with pytest.raises(NotFound):
            store.get_episode_doc(EpisodeKey(SERIES, 1, 9))

    def test_list_ordered(self, store):
        store.upsert_series(SERIES, "drama")
        for episode in (3, 1, 2):
            store.upsert_episode_doc(
                EpisodeDoc(key=EpisodeKey(SERIES, 1, episode), raw_plot="x")
            )
        episodes = [d.key.episode for d in store.list_episode_docs(SERIES, 1)]
        assert episodes == [1, 2, 3]


class TestExportImport:
    def _populate(self, store: Store) -> None:
        store.upsert_series(SERIES, "medical drama")
        c = seed_character(store, "Dana Ellis", aliases=("Dana",))
        arc = make_arc(store, "An Arc", episodes=(1, 2),
                       mains=frozenset({c.character_id}))
        store.upsert_embedding(arc.arc_id, unit_vector(1), "Title: An Arc")
        seed_episode(store, episode=1)
        store.set_season_summary(SERIES, 1, "A season happened.")
        store.add_link_audit(SERIES, arc.arc_id, arc.arc_id, "Distinct", "why")
        store.mark_processed(EpisodeKey(SERIES, 1, 1))
        store.dismiss_suggestion(SERIES, "ca", "cb")

    def test_export_wipe_import_round_trip(self, store):
        self._populate(store)
        first = store.export_canonical()
        store.wipe()
        assert store.list_arcs() == []
        store.import_doc(__import__("json").loads(first))
        assert store.export_canonical() == first

    def test_import_requires_empty_store(self, store):
        self._populate(store)
        doc = store.export_doc()
        with pytest.raises(Conflict):
            store.import_doc(doc)

    def test_import_rejects_other_schema_version(self, store):
        with pytest.raises(ConstraintViolation):
            store.import_doc({"schema_version": 99})

    def test_series_filtered_export(self, store):
        self._populate(store)
        store.upsert_series("Other Show", "comedy")
        doc = store.export_doc(SERIES)
        assert [s["name"] for s in doc["series"]] == [SERIES]


class TestIdSequence:
    def test_same_seed_same_sequence(self):
        a = Store(":memory:", id_seed=7)
        b = Store(":memory:", id_seed=7)
        assert [a.new_id() for _ in range(5)] == [b.new_id() for _ in range(5)]

    def test_different_seeds_differ(self):
        a = Store(":memory:", id_seed=1)
        b = Store(":memory:", id_seed=2)
        assert a.new_id() != b.new_id()

    def test_ids_are_128_bit_lowercase_hex(self, store):
        new = store.new_id()
        assert len(new) == 32
        assert new == new.lower()
        int(new, 16)

    def test_sequence_survives_reopen(self, tmp_path):
        path = tmp_path / "store.db"
        a = Store(str(path), id_seed=3)
        first = a.new_id()
        a.close()
        b = Store(str(path), id_seed=3)
        assert b.new_id() != first


class TestLocks:
    def test_second_run_lock_same_season_rejected(self, store):
        with store.season_run_lock(SERIES, 1):
            with pytest.raises(StoreBusy):
                with store.season_run_lock(SERIES, 1):
                    pass

    def test_mutation_from_other_thread_rejected_while_locked(self, store):
        errors: list[Exception] = []

        def attempt_mutation():
            try:
                store.upsert_series("Blocked Show", "x")
            except Exception as exc:
                errors.append(exc)

        with store.season_run_lock(SERIES, 1):
            thread = threading.Thread(target=attempt_mutation)
            thread.start()
            thread.join()
        assert len(errors) == 1
        assert isinstance(errors[0], StoreBusy)

    def test_lock_owner_may_mutate(self, store):
        with store.season_run_lock(SERIES, 1):
            store.upsert_series(SERIES, "fine")
        assert store.get_series_genre(SERIES) == "fine"

    def test_reads_allowed_while_locked(self, store):
        store.upsert_series(SERIES, "drama")
        results: list = []
        with store.season_run_lock(SERIES, 1):
            thread = threading.Thread(
                target=lambda: results.append(store.list_series())
            )
            thread.start()
            thread.join()
        assert results == [[(SERIES, "drama")]]


class TestIntegritySweep:
    def test_detects_planted_orphan(self):
        store = Store(":memory:")
        arc = make_arc(store, "An Arc")
        with store._lock:
            store._conn.execute("PRAGMA foreign_keys = OFF")
            store._conn.execute(
                "INSERT INTO arc_main_characters (arc_id, character_id) "
                "VALUES (?, 'ghost')",
                (arc.arc_id,),
            )
            store._conn.execute("PRAGMA foreign_keys = ON")
        problems = store.integrity_sweep()
        assert any("missing character" in p for p in problems)
