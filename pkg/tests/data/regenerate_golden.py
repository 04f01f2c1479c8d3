#!/usr/bin/env python3
"""Regenerate the golden export and run reports from the fixture season.

Run from the repo root whenever the corpus or mock script changes:

    python tests/data/build_mock_script.py
    python tests/data/regenerate_golden.py

Review the resulting diff before committing; the golden files define the
expected byte-for-byte behavior of the whole offline pipeline.
"""

from __future__ import annotations

import sys
import tempfile
from pathlib import Path

from narrarc.config import ProviderConfig, SemanticConfig
from narrarc.corpus import ingest_series
from narrarc.gateway import LLMGateway, MockProvider
from narrarc.pipeline import run_season
from narrarc.preprocess import preprocess_season
from narrarc.store import Store

DATA_DIR = Path(__file__).parent
SERIES = "Mercy Point"


def run_fixture_season(store: Store, runs_dir: Path) -> LLMGateway:
    provider = MockProvider.from_file(DATA_DIR / "mock_script.json")
    gateway = LLMGateway(provider, ProviderConfig(kind="mock", fixture_path="script"))
    ingest_series(store, DATA_DIR / "corpus" / "mercy_point")
    preprocess_season(gateway, store, SERIES, 1)
    run_season(gateway, store, SERIES, 1, runs_dir=runs_dir, semantic=SemanticConfig())
    return gateway


def main() -> int:
    with tempfile.TemporaryDirectory() as tmp:
        runs_dir = Path(tmp) / "runs"
        store = Store(":memory:")
        gateway = run_fixture_season(store, runs_dir)
        assert isinstance(gateway.provider, MockProvider)
        leftover = gateway.provider.remaining
        assert leftover == 0, f"{leftover} unconsumed mock script entries"
        problems = store.integrity_sweep()
        assert not problems, problems

        export_path = DATA_DIR / "golden_export.json"
        export_path.write_text(store.export_canonical(SERIES), encoding="utf-8")
        print(f"wrote {export_path}")

        golden_runs = DATA_DIR / "golden_runs"
        golden_runs.mkdir(exist_ok=True)
        for report in sorted((runs_dir / SERIES).glob("*.json")):
            target = golden_runs / report.name
            target.write_text(report.read_text(encoding="utf-8"), encoding="utf-8")
            print(f"wrote {target}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
