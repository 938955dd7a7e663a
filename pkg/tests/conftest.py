"""Shared fixtures: frozen oracles, canonical analyses, and a seeded store."""

import json
from pathlib import Path

import pytest

from disparity import (
    BiasAnalysis,
    ChiSquareResult,
    ContingencyTable,
    EffectEstimate,
    FixtureSpec,
    MethodAgreement,
    generate_fixture,
    ingest_tables,
    run_analysis,
)

ORACLE_PATH = Path(__file__).parent / "data" / "oracle_values.json"


@pytest.fixture(scope="session")
def oracles() -> dict:
    return json.loads(ORACLE_PATH.read_text(encoding="utf-8"))


@pytest.fixture()
def engineered_analysis() -> BiasAnalysis:
    """Full analysis of the canonical engineered table (56, 103, 267, 256)."""
    return run_analysis(
        ContingencyTable(56, 103, 267, 256),
        comparison_label="Black",
        reference_label="White",
        outcome_label="sentence_type=third-striker",
        created_at="2026-01-01T00:00:00Z",
    )


@pytest.fixture()
def recorded_analysis() -> BiasAnalysis:
    """Analysis rebuilt from previously published display values.

    The point estimates and interval bounds here are recorded numbers, not
    recomputed ones, so tests can check how a renderer displays a known
    artifact without depending on any cell combination reproducing it.
    """
    return BiasAnalysis(
        table=ContingencyTable(56, 103, 267, 256),
        chi2=ChiSquareResult(statistic=12.26, p_value=0.0005, min_expected_cell=75.3),
        agreement=MethodAgreement.from_calls(True, True, True),
        alpha=0.05,
        zero_cell_correction=True,
        comparison_label="Black",
        reference_label="White",
        outcome_label="sentence_type=third-striker",
        odds_ratio=EffectEstimate(
            kind="odds_ratio",
            estimate=0.521,
            ci_low=0.364,
            ci_high=0.745,
            se_log=0.1877,
            alpha=0.05,
            correction_applied=False,
        ),
        relative_risk=EffectEstimate(
            kind="relative_risk",
            estimate=0.69,
            ci_low=0.566,
            ci_high=0.857,
            se_log=0.1158,
            alpha=0.05,
            correction_applied=False,
        ),
        adequacy={
            "adequate": True,
            "n_comparison": 159,
            "n_reference": 523,
            "balance_ratio": 0.304015,
            "warnings": [],
        },
        created_at="2026-01-01T00:00:00Z",
    )


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("fixture")
    generate_fixture(FixtureSpec(), out, seed=42)
    return out


@pytest.fixture(scope="session")
def fixture_store(fixture_dir):
    return ingest_tables(
        fixture_dir / "demographics.csv",
        fixture_dir / "current_commitments.csv",
        fixture_dir / "prior_commitments.csv",
        snapshot_date="2026-01-01",
    )


@pytest.fixture()
def pinned_clock(monkeypatch):
    monkeypatch.setenv("DISPARITY_CLOCK", "2026-01-01T00:00:00Z")
    return "2026-01-01T00:00:00Z"
