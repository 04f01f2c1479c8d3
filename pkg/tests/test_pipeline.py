"""Per-agent behavior, run guards, commit atomicity, and run accounting."""

from __future__ import annotations

import json

import pytest

from narrarc.errors import (
    EpisodeAlreadyProcessed,
    OutOfOrderEpisode,
    PipelineStageError,
    PreconditionError,
    ProviderUnavailable,
)
from narrarc.model import ArcType, EpisodeKey, NarrativeArc, Progression
from narrarc.pipeline import DraftArc, EpisodePipeline, Stage, run_episode
from narrarc.store import Store

from .conftest import SERIES, seed_character, seed_episode


@pytest.fixture
def seeded(store):
    """Store with a preprocessed episode 1 and 2, plus a small registry."""
    seed_episode(store, episode=1)
    seed_episode(store, episode=2)
    for name in ("Dana Ellis", "Victor Hale", "Priya Nair"):
        seed_character(store, name)
    return store


def committed_arc(store: Store, title: str, arc_type: ArcType = ArcType.SOAP,
                  episode: int = 1) -> NarrativeArc:
    arc_id = store.new_id()
    return store.create_arc(
        NarrativeArc(
            arc_id=arc_id, title=title, description=f"{title} described.",
            arc_type=arc_type, series=SERIES,
            progressions=(
                Progression(
                    progression_id=store.new_id(), arc_id=arc_id,
                    content="Events.", series=SERIES, season=1, episode=episode,
                ),
            ),
        )
    )


def pipeline_for(gateway, store, episode: int = 1) -> EpisodePipeline:
    return EpisodePipeline(gateway, store, EpisodeKey(SERIES, 1, episode))


def draft(title: str, arc_type: ArcType = ArcType.SOAP,
          existing: str | None = None, content: str = "Things happen.") -> DraftArc:
    return DraftArc(
        title=title, description=f"{title} described.", arc_type=arc_type,
        progression_content=content, existing_arc_id=existing,
    )


class TestAgent1:
    def test_first_episode_no_flags_no_calls(self, seeded, make_gateway):
        gw = make_gateway([])
        p = pipeline_for(gw, seeded)
        state = p.agent1_flag_existing(p.initial_state())
        assert state.flagged_arcs == []
        assert gw.provider_chat_calls == 0
        assert state.stage is Stage.AGENT2

    def test_prior_arc_flagged_present(self, seeded, make_gateway):
        arc = committed_arc(seeded, "Ongoing Story")
        gw = make_gateway([{
            "task_tag": "pipeline.agent1@S01E02",
            "response": {"flags": [
                {"index": 0, "possibly_present": True, "rationale": "continues"},
            ]},
        }])
        p = pipeline_for(gw, seeded, episode=2)
        state = p.agent1_flag_existing(p.initial_state())
        assert state.flagged_arcs == [(arc.arc_id, "continues")]

    def test_prior_arc_scripted_absent(self, seeded, make_gateway):
        committed_arc(seeded, "Ongoing Story")
        gw = make_gateway([{
            "task_tag": "pipeline.agent1@S01E02",
            "response": {"flags": []},
        }])
        p = pipeline_for(gw, seeded, episode=2)
        assert p.agent1_flag_existing(p.initial_state()).flagged_arcs == []

    def test_anthology_arcs_never_offered_for_flagging(self, seeded, make_gateway):
        committed_arc(seeded, "Case of the Week", ArcType.ANTHOLOGY)
        gw = make_gateway([])  # no running arcs -> no call at all
        p = pipeline_for(gw, seeded, episode=2)
        state = p.agent1_flag_existing(p.initial_state())
        assert state.flagged_arcs == []
        assert gw.provider_chat_calls == 0


class TestAgent2:
    def test_scripted_anthology_drafts(self, seeded, make_gateway):
        gw = make_gateway([{
            "task_tag": "pipeline.agent2@S01E01",
            "response": {"arcs": [
                {"title": "Case A", "description": "d", "main_characters": [],
                 "progression_content": "c"},
                {"title": "Case B", "description": "d", "main_characters": [],
                 "progression_content": "c"},
            ]},
        }])
        p = pipeline_for(gw, seeded)
        state = p.initial_state()
        state.stage = Stage.AGENT2
        state = p.agent2_extract_anthology(state)
        assert [d.title for d in state.candidate_arcs] == ["Case A", "Case B"]
        assert all(d.arc_type is ArcType.ANTHOLOGY for d in state.candidate_arcs)

    def test_no_case_of_the_week(self, seeded, make_gateway):
        gw = make_gateway([{
            "task_tag": "pipeline.agent2@S01E01", "response": {"arcs": []},
        }])
        p = pipeline_for(gw, seeded)
        state = p.initial_state()
        state.stage = Stage.AGENT2
        assert p.agent2_extract_anthology(state).candidate_arcs == []


class TestAgent3:
    def _state(self, p, flags):
        state = p.initial_state()
        state.stage = Stage.AGENT3
        state.flagged_arcs = flags
        return state

    def test_new_soap_draft(self, seeded, make_gateway):
        gw = make_gateway([{
            "task_tag": "pipeline.agent3@S01E01",
            "response": {"new_arcs": [
                {"title": "New Bond", "description": "d", "arc_type": "Soap",
                 "main_characters": ["Dana Ellis"], "progression_content": "starts"},
            ], "flag_decisions": []},
        }])
        p = pipeline_for(gw, seeded)
        state = p.agent3_extract_running(self._state(p, []))
        (d,) = state.candidate_arcs
        assert d.arc_type is ArcType.SOAP
        assert d.existing_arc_id is None

    def test_flag_confirmed_with_progression(self, seeded, make_gateway):
        arc = committed_arc(seeded, "Ongoing")
        gw = make_gateway([{
            "task_tag": "pipeline.agent3@S01E02",
            "response": {"new_arcs": [], "flag_decisions": [
                {"index": 0, "verdict": "confirmed",
                 "progression_content": "it develops"},
            ]},
        }])
        p = pipeline_for(gw, seeded, episode=2)
        state = p.agent3_extract_running(self._state(p, [(arc.arc_id, "r")]))
        (d,) = state.candidate_arcs
        assert d.existing_arc_id == arc.arc_id
        assert d.progression_content == "it develops"
        assert state.flagged_arcs == [(arc.arc_id, "r")]

    def test_flag_rejected_is_dropped_and_logged(self, seeded, make_gateway):
        arc = committed_arc(seeded, "Ongoing")
        gw = make_gateway([{
            "task_tag": "pipeline.agent3@S01E02",
            "response": {"new_arcs": [], "flag_decisions": [
                {"index": 0, "verdict": "rejected"},
            ]},
        }])
        p = pipeline_for(gw, seeded, episode=2)
        state = p.agent3_extract_running(self._state(p, [(arc.arc_id, "r")]))
        assert state.candidate_arcs == []
        assert state.flagged_arcs == []
        assert p.report.drops[0]["stage"] == "agent3"

    def test_confirmation_without_progression_counts_as_rejection(self, seeded, make_gateway):
        arc = committed_arc(seeded, "Ongoing")
        gw = make_gateway([{
            "task_tag": "pipeline.agent3@S01E02",
            "response": {"new_arcs": [], "flag_decisions": [
                {"index": 0, "verdict": "confirmed", "progression_content": "  "},
            ]},
        }])
        p = pipeline_for(gw, seeded, episode=2)
        state = p.agent3_extract_running(self._state(p, [(arc.arc_id, "r")]))
        assert state.candidate_arcs == []


class TestAgent4:
    def _run(self, p, drafts, response):
        state = p.initial_state()
        state.stage = Stage.AGENT4
        state.candidate_arcs = drafts
        gw_entries = [{"task_tag": "pipeline.agent4@*", "response": response}]
        p.gateway.provider._script.extend(gw_entries)
        return p.agent4_optimize_season(state)

    def test_overlapping_drafts_merge(self, seeded, make_gateway):
        gw = make_gateway([])
        p = pipeline_for(gw, seeded)
        drafts = [
            draft("Staffing A", ArcType.GENRE_SPECIFIC),
            draft("Staffing B", ArcType.GENRE_SPECIFIC),
        ]
        state = self._run(p, drafts, {"groups": [
            {"draft_indices": [0, 1], "title": "Staffing Crisis",
             "description": "merged"},
        ]})
        (merged,) = state.candidate_arcs
        assert merged.title == "Staffing Crisis"
        assert merged.arc_type is ArcType.GENRE_SPECIFIC
        assert p.report.merges[0]["stage"] == "agent4"

    def test_disjoint_drafts_unchanged(self, seeded, make_gateway):
        gw = make_gateway([])
        p = pipeline_for(gw, seeded)
        drafts = [draft("One", ArcType.SOAP), draft("Two", ArcType.GENRE_SPECIFIC)]
        state = self._run(p, list(drafts), {"groups": []})
        assert [d.title for d in state.candidate_arcs] == ["One", "Two"]

    def test_type_mixing_rejected(self, seeded, make_gateway):
        gw = make_gateway([])
        p = pipeline_for(gw, seeded)
        drafts = [draft("One", ArcType.SOAP), draft("Two", ArcType.GENRE_SPECIFIC)]
        with pytest.raises(PipelineStageError):
            self._run(p, drafts, {"groups": [
                {"draft_indices": [0, 1], "title": "Bad", "description": "d"},
            ]})

    def test_anthology_drafts_bypass_agent4(self, seeded, make_gateway):
        gw = make_gateway([])  # fewer than two running drafts: no call
        p = pipeline_for(gw, seeded)
        state = p.initial_state()
        state.stage = Stage.AGENT4
        state.candidate_arcs = [
            draft("Case", ArcType.ANTHOLOGY), draft("Running", ArcType.SOAP),
        ]
        state = p.agent4_optimize_season(state)
        assert gw.provider_chat_calls == 0
        assert len(state.candidate_arcs) == 2

    def test_anthology_never_in_agent4_prompt(self, seeded, make_gateway):
        gw = make_gateway([{"task_tag": "pipeline.agent4@*",
                            "response": {"groups": []}}])
        p = pipeline_for(gw, seeded)
        state = p.initial_state()
        state.stage = Stage.AGENT4
        state.candidate_arcs = [
            draft("Secret Case", ArcType.ANTHOLOGY),
            draft("Running A", ArcType.SOAP),
            draft("Running B", ArcType.SOAP),
        ]
        p.agent4_optimize_season(state)
        assert "Secret Case" not in gw.calls[-1].user_prompt


class TestAgent5:
    def _run(self, p, drafts, response):
        state = p.initial_state()
        state.stage = Stage.AGENT5
        state.candidate_arcs = drafts
        p.gateway.provider._script.append(
            {"task_tag": "pipeline.agent5@*", "response": response}
        )
        return p.agent5_deduplicate(state)

    def test_cross_type_duplicate_resolved(self, seeded, make_gateway):
        p = pipeline_for(make_gateway([]), seeded)
        drafts = [
            draft("The Case", ArcType.ANTHOLOGY),
            draft("The Storyline", ArcType.GENRE_SPECIFIC),
        ]
        state = self._run(p, drafts, {"duplicates": [
            {"indices": [0, 1], "resolved_type": "GenreSpecific",
             "rationale": "one storyline"},
        ]})
        (kept,) = state.candidate_arcs
        assert kept.title == "The Storyline"
        assert kept.arc_type is ArcType.GENRE_SPECIFIC
        assert kept.resolution_rationale == "one storyline"
        assert p.report.drops[0]["title"] == "The Case"

    def test_no_duplicates_unchanged(self, seeded, make_gateway):
        p = pipeline_for(make_gateway([]), seeded)
        drafts = [draft("A"), draft("B")]
        state = self._run(p, list(drafts), {"duplicates": []})
        assert [d.title for d in state.candidate_arcs] == ["A", "B"]

    def test_single_draft_skips_call(self, seeded, make_gateway):
        gw = make_gateway([])
        p = pipeline_for(gw, seeded)
        state = p.initial_state()
        state.stage = Stage.AGENT5
        state.candidate_arcs = [draft("Only")]
        p.agent5_deduplicate(state)
        assert gw.provider_chat_calls == 0

    def test_surviving_titles_pairwise_distinct(self, seeded, make_gateway):
        p = pipeline_for(make_gateway([]), seeded)
        drafts = [draft("Same"), draft("Same")]
        with pytest.raises(PipelineStageError):
            self._run(p, drafts, {"duplicates": []})


class TestAgent6:
    def test_enrichment_fills_characters_and_content(self, seeded, make_gateway):
        gw = make_gateway([{
            "task_tag": "pipeline.agent6@S01E01",
            "response": {"drafts": [
                {"index": 0, "main_characters": ["Dana Ellis"],
                 "interfering_characters": ["Victor Hale"],
                 "progression_content": "Dana acts."},
                {"index": 1, "main_characters": ["Priya Nair"],
                 "interfering_characters": [],
                 "progression_content": "Priya acts."},
            ]},
        }])
        p = pipeline_for(gw, seeded)
        state = p.initial_state()
        state.stage = Stage.AGENT6
        state.candidate_arcs = [draft("One"), draft("Two")]
        state = p.agent6_enhance(state)
        first, second = state.candidate_arcs
        assert len(first.main_character_ids) == 1
        assert len(first.interfering_character_ids) == 1
        assert second.progression_content == "Priya acts."
        assert all(d.progression_content for d in state.candidate_arcs)

    def test_unknown_name_dropped_with_warning(self, seeded, make_gateway):
        gw = make_gateway([{
            "task_tag": "pipeline.agent6@S01E01",
            "response": {"drafts": [
                {"index": 0, "main_characters": ["Dr. Nobody", "Dana Ellis"],
                 "interfering_characters": [], "progression_content": "c"},
            ]},
        }])
        p = pipeline_for(gw, seeded)
        state = p.initial_state()
        state.stage = Stage.AGENT6
        state.candidate_arcs = [draft("One")]
        state = p.agent6_enhance(state)
        assert len(state.candidate_arcs[0].main_character_ids) == 1
        assert any("Dr. Nobody" in w for w in p.report.warnings)


class TestAgent7:
    def _run(self, p, drafts, reviews):
        state = p.initial_state()
        state.stage = Stage.AGENT7
        state.candidate_arcs = drafts
        p.gateway.provider._script.append(
            {"task_tag": "pipeline.agent7@*", "response": {"reviews": reviews}}
        )
        return p.agent7_verify_progressions(state)

    def test_rewrite_replaces_content(self, seeded, make_gateway):
        p = pipeline_for(make_gateway([]), seeded)
        state = self._run(p, [draft("One", content="long rambling text")], [
            {"index": 0, "verdict": "rewrite", "content": "tight"},
        ])
        assert state.candidate_arcs[0].progression_content == "tight"

    def test_irrelevant_new_draft_dropped(self, seeded, make_gateway):
        p = pipeline_for(make_gateway([]), seeded)
        state = self._run(p, [draft("One")], [
            {"index": 0, "verdict": "irrelevant"},
        ])
        assert state.candidate_arcs == []
        assert p.report.drops[0]["reason"] == "progression irrelevant"

    def test_irrelevant_existing_draft_rejects_flag(self, seeded, make_gateway):
        arc = committed_arc(seeded, "Ongoing")
        p = pipeline_for(make_gateway([]), seeded, episode=2)
        state = self._run(p, [draft("Ongoing", existing=arc.arc_id)], [
            {"index": 0, "verdict": "irrelevant"},
        ])
        assert state.candidate_arcs == []
        assert "flag rejected" in p.report.drops[0]["reason"]

    def test_survivors_keep_content(self, seeded, make_gateway):
        p = pipeline_for(make_gateway([]), seeded)
        state = self._run(p, [draft("One"), draft("Two")], [])
        assert all(d.progression_content for d in state.candidate_arcs)


class TestAgent8:
    def test_scripted_role_swap(self, seeded, make_gateway):
        gw = make_gateway([{
            "task_tag": "pipeline.agent8@S01E01",
            "response": {"assignments": [
                {"index": 0, "main_characters": ["Dana Ellis", "Victor Hale"],
                 "interfering_characters": []},
            ]},
        }])
        p = pipeline_for(gw, seeded)
        d = draft("One")
        d.main_character_names = ["Dana Ellis"]
        d.interfering_character_names = ["Victor Hale"]
        state = p.initial_state()
        state.stage = Stage.AGENT8
        state.candidate_arcs = [d]
        state = p.agent8_verify_roles(state)
        assert len(state.candidate_arcs[0].main_character_ids) == 2
        assert state.candidate_arcs[0].interfering_character_ids == frozenset()

    def test_no_change_verdict_identical(self, seeded, make_gateway):
        gw = make_gateway([{
            "task_tag": "pipeline.agent8@S01E01", "response": {"assignments": []},
        }])
        p = pipeline_for(gw, seeded)
        d = draft("One")
        d.main_character_ids = frozenset({"x"})
        state = p.initial_state()
        state.stage = Stage.AGENT8
        state.candidate_arcs = [d]
        state = p.agent8_verify_roles(state)
        assert state.candidate_arcs[0].main_character_ids == frozenset({"x"})


FULL_EPISODE_SCRIPT = [
    {"task_tag": "pipeline.agent2@S01E01", "response": {"arcs": [
        {"title": "The Case", "description": "d", "main_characters": [],
         "progression_content": "case events"},
    ]}},
    {"task_tag": "pipeline.agent3@S01E01", "response": {"new_arcs": [
        {"title": "The Bond", "description": "d", "arc_type": "Soap",
         "main_characters": ["Dana Ellis"], "progression_content": "bond events"},
        {"title": "The Job", "description": "d", "arc_type": "GenreSpecific",
         "main_characters": ["Dana Ellis"], "progression_content": "job events"},
    ], "flag_decisions": []}},
    {"task_tag": "pipeline.agent4@S01E01", "response": {"groups": []}},
    {"task_tag": "pipeline.agent5@S01E01", "response": {"duplicates": []}},
    {"task_tag": "pipeline.agent6@S01E01", "response": {"drafts": [
        {"index": 0, "main_characters": ["Dana Ellis"],
         "interfering_characters": [], "progression_content": "case events"},
        {"index": 1, "main_characters": ["Dana Ellis"],
         "interfering_characters": [], "progression_content": "bond events"},
        {"index": 2, "main_characters": ["Dana Ellis"],
         "interfering_characters": [], "progression_content": "job events"},
    ]}},
    {"task_tag": "pipeline.agent7@S01E01", "response": {"reviews": []}},
    {"task_tag": "pipeline.agent8@S01E01", "response": {"assignments": []}},
    {"task_tag": "pipeline.agent9@S01E01", "response": {"reviews": []}},
]


class TestRunEpisode:
    def test_first_episode_commits_three_arcs(self, seeded, make_gateway):
        gw = make_gateway(list(FULL_EPISODE_SCRIPT))
        report = run_episode(gw, seeded, EpisodeKey(SERIES, 1, 1))
        assert len(report.created_arcs) == 3
        arcs = seeded.list_arcs(SERIES)
        assert len(arcs) == 3
        assert sum(len(a.progressions) for a in arcs) == 3
        assert all(
            (p.season, p.episode) == (1, 1)
            for a in arcs for p in a.progressions
        )
        assert report.gateway_call_count == 8

    def test_rerun_rejected(self, seeded, make_gateway):
        gw = make_gateway(list(FULL_EPISODE_SCRIPT))
        run_episode(gw, seeded, EpisodeKey(SERIES, 1, 1))
        with pytest.raises(EpisodeAlreadyProcessed):
            run_episode(gw, seeded, EpisodeKey(SERIES, 1, 1))

    def test_out_of_order_rejected(self, seeded, make_gateway):
        with pytest.raises(OutOfOrderEpisode):
            run_episode(make_gateway([]), seeded, EpisodeKey(SERIES, 1, 2))

    def test_unpreprocessed_episode_rejected(self, store, make_gateway):
        from narrarc.model import EpisodeDoc

        store.upsert_series(SERIES, "drama")
        store.upsert_episode_doc(
            EpisodeDoc(key=EpisodeKey(SERIES, 1, 1), raw_plot="raw only")
        )
        with pytest.raises(PreconditionError):
            run_episode(make_gateway([]), store, EpisodeKey(SERIES, 1, 1))

    def test_uningested_episode_rejected(self, store, make_gateway):
        store.upsert_series(SERIES, "drama")
        with pytest.raises(PreconditionError):
            run_episode(make_gateway([]), store, EpisodeKey(SERIES, 1, 1))

    def test_gateway_failure_mid_run_leaves_store_unchanged(self, seeded, make_gateway):
        script = list(FULL_EPISODE_SCRIPT[:4])
        script.append({"task_tag": "pipeline.agent6@S01E01", "error": "provider"})
        gw = make_gateway(script)
        before = seeded.export_canonical()
        with pytest.raises(ProviderUnavailable):
            run_episode(gw, seeded, EpisodeKey(SERIES, 1, 1))
        assert seeded.export_canonical() == before

    def test_persistence_failure_mid_commit_rolls_back(self, seeded, make_gateway,
                                                       monkeypatch):
        gw = make_gateway(list(FULL_EPISODE_SCRIPT))
        before = seeded.export_canonical()

        def boom(key):
            raise RuntimeError("disk on fire")

        monkeypatch.setattr(seeded, "mark_processed", boom)
        with pytest.raises(RuntimeError):
            run_episode(gw, seeded, EpisodeKey(SERIES, 1, 1))
        monkeypatch.undo()
        assert seeded.export_canonical() == before

    def test_stage_order_enforced(self, seeded, make_gateway):
        p = pipeline_for(make_gateway([]), seeded)
        state = p.initial_state()
        with pytest.raises(PreconditionError):
            p.agent3_extract_running(state)

    def test_run_report_written_to_disk(self, seeded, make_gateway, tmp_path):
        gw = make_gateway(list(FULL_EPISODE_SCRIPT))
        report = run_episode(gw, seeded, EpisodeKey(SERIES, 1, 1),
                             runs_dir=tmp_path / "runs")
        path = tmp_path / "runs" / SERIES / "S01E01.json"
        assert path.is_file()
        assert json.loads(path.read_text()) == report.to_dict()


class TestEpisodeOrderInvariant:
    def test_agent1_sees_exactly_the_committed_prior_arcs(self, store, make_gateway):
        # Drive episodes 1 and 2 of the bundled season, then check what a
        # fresh pipeline for episode 3 would see.
        from narrarc.corpus import ingest_series
        from narrarc.preprocess import preprocess_season

        from .conftest import DATA_DIR, fixture_script

        episode_two_end = 33
        gw = make_gateway(fixture_script()[:episode_two_end])
        ingest_series(store, DATA_DIR / "corpus" / "mercy_point")
        preprocess_season(gw, store, SERIES, 1)
        run_episode(gw, store, EpisodeKey(SERIES, 1, 1))
        run_episode(gw, store, EpisodeKey(SERIES, 1, 2))

        committed = {a.arc_id for a in store.list_arcs(SERIES)}
        pipeline = EpisodePipeline(gw, store, EpisodeKey(SERIES, 1, 3))
        visible = {a.arc_id for a in pipeline.initial_state().season_arcs}
        assert visible == committed
