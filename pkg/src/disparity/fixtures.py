"""Synthetic record-table generator for demos and end-to-end tests.

Generates the three relational CSVs (demographics, current commitments,
prior commitments) with controllable marginal distributions and a tunable
outcome tilt, so a full pipeline can run against data with a known, planted
disparity signal. Generation is deterministic for a fixed (spec, seed) pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .records import ENHANCEMENT_DELIMITER, SENTENCE_TYPES, deidentify

_WEIGHT_TOLERANCE = 1e-9

DEFAULT_COUNTY_WEIGHTS = {
    "Los Angeles": 0.30,
    "Contra Costa": 0.25,
    "San Diego": 0.20,
    "Sacramento": 0.15,
    "Fresno": 0.10,
}

DEFAULT_ETHNICITY_WEIGHTS = {
    "Black": 0.30,
    "White": 0.30,
    "Hispanic": 0.25,
    "Other": 0.15,
}

# Robbery and firearm codes lead the pool so the canonical demo scenario
# (firearm-enhanced robbery) lands on a usable number of people.
DEFAULT_OFFENSE_POOL = ("PC211", "PC212", "PC459", "PC487", "PC245", "HS11351")

DEFAULT_ENHANCEMENT_POOL = ("PC12022", "PC12022.5", "PC12022.53", "PC186.22")

DEFAULT_SENTENCE_TYPE_WEIGHTS = {
    "third-striker": 0.18,
    "second-striker": 0.22,
    "lwop": 0.08,
    "life-with-parole": 0.12,
    "dsl": 0.40,
}

_INSTITUTIONS = ("CSP-Sacramento", "San Quentin", "CCI-Tehachapi", "Folsom", "CIW")


@dataclass(frozen=True)
class FixtureSpec:
    """Knobs for the generator; weights must each sum to 1.

    ``outcome_tilt`` multiplies the odds of a third-striker sentence for the
    first ethnicity key relative to the rest, planting a disparity the
    analysis stage should detect. 1.0 means no planted signal.
    """

    n_people: int = 2000
    county_weights: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_COUNTY_WEIGHTS)
    )
    ethnicity_weights: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_ETHNICITY_WEIGHTS)
    )
    offense_pool: tuple[str, ...] = DEFAULT_OFFENSE_POOL
    enhancement_pool: tuple[str, ...] = DEFAULT_ENHANCEMENT_POOL
    prior_record_rate: float = 0.55
    sentence_type_weights: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_SENTENCE_TYPE_WEIGHTS)
    )
    outcome_tilt: float = 2.2
    hash_seed: str = "fixture-seed"

    def validate(self) -> None:
        if self.n_people < 1:
            raise ConfigurationError("n_people must be at least 1")
        for name, weights in (
            ("county_weights", self.county_weights),
            ("ethnicity_weights", self.ethnicity_weights),
            ("sentence_type_weights", self.sentence_type_weights),
        ):
            if not weights:
                raise ConfigurationError(f"{name} must be non-empty")
            total = sum(weights.values())
            if abs(total - 1.0) > _WEIGHT_TOLERANCE:
                raise ConfigurationError(f"{name} must sum to 1, got {total!r}")
            if any(w < 0 for w in weights.values()):
                raise ConfigurationError(f"{name} must be non-negative")
        for key in self.sentence_type_weights:
            if key not in SENTENCE_TYPES:
                raise ConfigurationError(f"unknown sentence_type {key!r} in weights")
        if not (0.0 <= self.prior_record_rate <= 1.0):
            raise ConfigurationError("prior_record_rate must be in [0, 1]")
        if self.outcome_tilt <= 0:
            raise ConfigurationError("outcome_tilt must be positive")
        if not self.offense_pool:
            raise ConfigurationError("offense_pool must be non-empty")
        if not self.hash_seed:
            raise ConfigurationError("hash_seed must be non-empty")


def _choice(rng: np.random.Generator, weights: dict[str, float]) -> tuple[list, np.ndarray]:
    keys = list(weights)
    p = np.array([weights[k] for k in keys], dtype=float)
    p = p / p.sum()
    return keys, p


def _tilted_sentence_weights(
    base: dict[str, float], tilt: float
) -> dict[str, float]:
    """Scale the third-striker odds by ``tilt`` and renormalize."""
    out = dict(base)
    third = out.get("third-striker", 0.0)
    if third <= 0 or tilt == 1.0:
        return out
    odds = third / (1.0 - third)
    tilted = odds * tilt
    new_third = tilted / (1.0 + tilted)
    remainder = 1.0 - new_third
    scale = remainder / (1.0 - third)
    for k in out:
        out[k] = new_third if k == "third-striker" else out[k] * scale
    return out


def generate_fixture(spec: FixtureSpec, out_dir: str | Path, seed: int = 42) -> dict[str, Path]:
    """Write the three CSVs under ``out_dir`` and return their paths.

    Deterministic for a fixed (spec, seed); repeated calls produce
    byte-identical files.
    """
    spec.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    county_keys, county_p = _choice(rng, spec.county_weights)
    eth_keys, eth_p = _choice(rng, spec.ethnicity_weights)
    tilted_keys, tilted_p = _choice(
        rng, _tilted_sentence_weights(spec.sentence_type_weights, spec.outcome_tilt)
    )
    base_keys, base_p = _choice(rng, spec.sentence_type_weights)
    tilt_target = eth_keys[0]

    epoch = date(2012, 1, 1)
    span_days = 10 * 365

    demo_rows: list[str] = [
        "hashed_id,ethnicity,controlling_offense,offense_date,sentencing_county,"
        "sentence_length,sentence_type,parole_eligibility,institution"
    ]
    current_rows: list[str] = [
        "hashed_id,offense_code,enhancements,sentence_type,"
        "court_determined_length,sentencing_county"
    ]
    prior_rows: list[str] = [
        "hashed_id,offense_code,enhancements,sentence_type,"
        "court_determined_length,sentencing_county,release_date"
    ]

    for i in range(spec.n_people):
        raw_id = f"person-{i:06d}"
        hid = deidentify(raw_id, spec.hash_seed)
        county = county_keys[rng.choice(len(county_keys), p=county_p)]
        ethnicity = eth_keys[rng.choice(len(eth_keys), p=eth_p)]
        offense = spec.offense_pool[rng.choice(len(spec.offense_pool))]
        if ethnicity == tilt_target:
            stype = tilted_keys[rng.choice(len(tilted_keys), p=tilted_p)]
        else:
            stype = base_keys[rng.choice(len(base_keys), p=base_p)]
        offense_date = epoch + timedelta(days=int(rng.integers(0, span_days)))
        length = int(rng.integers(24, 480))
        parole = offense_date + timedelta(days=int(rng.integers(365, 365 * 25)))
        institution = _INSTITUTIONS[rng.choice(len(_INSTITUTIONS))]
        demo_rows.append(
            f"{hid},{ethnicity},{offense},{offense_date.isoformat()},{county},"
            f"{length},{stype},{parole.isoformat()},{institution}"
        )

        n_enh = int(rng.integers(0, 3))
        enh = ENHANCEMENT_DELIMITER.join(
            spec.enhancement_pool[j]
            for j in sorted(
                rng.choice(len(spec.enhancement_pool), size=n_enh, replace=False)
            )
        )
        current_rows.append(
            f"{hid},{offense},{enh},{stype},{length},{county}"
        )
        extra_current = int(rng.integers(0, 2))
        for _ in range(extra_current):
            off2 = spec.offense_pool[rng.choice(len(spec.offense_pool))]
            current_rows.append(
                f"{hid},{off2},,{stype},{int(rng.integers(12, 120))},{county}"
            )

        if rng.random() < spec.prior_record_rate:
            n_prior = int(rng.integers(1, 4))
            for _ in range(n_prior):
                off3 = spec.offense_pool[rng.choice(len(spec.offense_pool))]
                n_enh3 = int(rng.integers(0, 2))
                enh3 = ENHANCEMENT_DELIMITER.join(
                    spec.enhancement_pool[j]
                    for j in sorted(
                        rng.choice(
                            len(spec.enhancement_pool), size=n_enh3, replace=False
                        )
                    )
                )
                released = epoch - timedelta(days=int(rng.integers(30, 365 * 15)))
                prior_rows.append(
                    f"{hid},{off3},{enh3},dsl,{int(rng.integers(6, 96))},"
                    f"{county},{released.isoformat()}"
                )

    paths = {
        "demographics": out / "demographics.csv",
        "current_commitments": out / "current_commitments.csv",
        "prior_commitments": out / "prior_commitments.csv",
    }
    paths["demographics"].write_text("\n".join(demo_rows) + "\n", encoding="utf-8")
    paths["current_commitments"].write_text(
        "\n".join(current_rows) + "\n", encoding="utf-8"
    )
    paths["prior_commitments"].write_text("\n".join(prior_rows) + "\n", encoding="utf-8")
    return paths
