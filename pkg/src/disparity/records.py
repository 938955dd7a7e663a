"""De-identified prison-record store: ingestion, validation, and joins.

The dataset is three relational CSV tables linked by a seeded-hash id:

* ``demographics`` - one row per person (ethnicity, controlling offense,
  sentence type/length, county, ...),
* ``current_commitments`` - one row per active commitment,
* ``prior_commitments`` - same shape plus a release date for completed terms.

Ingestion is deliberately tolerant of dirty rows: anything that fails
row-level validation (bad date, bad number, unknown foreign key) is
quarantined with a reason instead of aborting, because public-records
extracts routinely contain such rows. Structural problems (missing columns,
duplicate person ids, reject rate above threshold) abort, because they
indicate schema drift rather than noise.
"""

from __future__ import annotations

import csv
import hashlib
import io
import os
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple

from .errors import ConfigurationError, IntegrityError, SchemaError
from .util import parse_date

HASH_SEED_ENV = "DISPARITY_HASH_SEED"

MAX_REJECT_FRACTION = 0.10

SENTENCE_TYPES = ("third-striker", "second-striker", "lwop", "life-with-parole", "dsl")

# Accepted spellings -> canonical sentence type.
_SENTENCE_ALIASES = {
    "determinate": "dsl",
    "life with parole": "life-with-parole",
    "life without parole": "lwop",
}

DEMOGRAPHICS_COLUMNS = (
    "hashed_id",
    "ethnicity",
    "controlling_offense",
    "offense_date",
    "sentencing_county",
    "sentence_length",
    "sentence_type",
    "parole_eligibility",
    "institution",
)

CURRENT_COLUMNS = (
    "hashed_id",
    "offense_code",
    "enhancements",
    "sentence_type",
    "court_determined_length",
    "sentencing_county",
)

PRIOR_COLUMNS = CURRENT_COLUMNS + ("release_date",)

ENHANCEMENT_DELIMITER = ";"


def canonical_sentence_type(text: str) -> str:
    """Normalize a sentence-type spelling ('Third Striker' -> 'third-striker')."""
    key = " ".join(text.strip().lower().replace("_", " ").replace("-", " ").split())
    if key in _SENTENCE_ALIASES:
        return _SENTENCE_ALIASES[key]
    hyphenated = key.replace(" ", "-")
    if hyphenated in SENTENCE_TYPES:
        return hyphenated
    raise ValueError(f"unknown sentence_type {text!r}")


def deidentify(raw_id: str, seed: str) -> str:
    """Seeded MD5 de-identification of a raw record id.

    Returns the lowercase hex MD5 digest of ``seed + raw_id`` (seed first, a
    convention fixed here so independent tooling can reproduce the linkage).
    Deterministic for a fixed pair, and all three tables must use the same
    seed so the join keys line up.
    """
    if not seed:
        raise ConfigurationError("de-identification seed must be non-empty")
    if not raw_id:
        raise ConfigurationError("raw id must be non-empty")
    return hashlib.md5((seed + raw_id).encode("utf-8")).hexdigest()


def hash_seed_from_env() -> str:
    seed = os.environ.get(HASH_SEED_ENV, "")
    if not seed:
        raise ConfigurationError(
            f"{HASH_SEED_ENV} is not set; refusing to de-identify without a seed"
        )
    return seed


@dataclass(frozen=True)
class DemographicsRecord:
    hashed_id: str
    ethnicity: str
    controlling_offense: str
    offense_date: date | None
    sentencing_county: str
    sentence_length: int
    sentence_type: str
    parole_eligibility: date | None
    institution: str
    extras: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class CommitmentRecord:
    hashed_id: str
    offense_code: str
    enhancements: tuple[str, ...]
    sentence_type: str
    court_determined_length: int
    sentencing_county: str
    release_date: date | None = None
    extras: tuple[tuple[str, str], ...] = ()

    def codes(self) -> frozenset[str]:
        """Offense code plus enhancement codes, uppercased."""
        return frozenset(c.upper() for c in (self.offense_code, *self.enhancements) if c)


@dataclass(frozen=True)
class RejectedRow:
    table: str
    row_index: int  # 1-based data row (header excluded)
    reason: str
    row: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class Provenance:
    sources: tuple[tuple[str, str], ...]  # table -> path
    row_counts: tuple[tuple[str, int], ...]  # table -> accepted rows
    snapshot_date: str


class JoinedPerson(NamedTuple):
    demographics: DemographicsRecord
    current: tuple[CommitmentRecord, ...]
    prior: tuple[CommitmentRecord, ...]

    def current_codes(self) -> frozenset[str]:
        out: set[str] = set()
        for c in self.current:
            out |= c.codes()
        return frozenset(out)

    def prior_codes(self) -> frozenset[str]:
        out: set[str] = set()
        for c in self.prior:
            out |= c.codes()
        return frozenset(out)


@dataclass(frozen=True)
class RecordStore:
    """Immutable joined view over the three tables.

    Safe for concurrent readers; built once by :func:`ingest_tables`.
    """

    demographics: Mapping[str, DemographicsRecord]
    current_commitments: Mapping[str, tuple[CommitmentRecord, ...]]
    prior_commitments: Mapping[str, tuple[CommitmentRecord, ...]]
    provenance: Provenance
    rejects: tuple[RejectedRow, ...] = ()

    def __len__(self) -> int:
        return len(self.demographics)

    def ids(self) -> list[str]:
        return sorted(self.demographics)

    def person(self, hashed_id: str) -> JoinedPerson:
        demo = self.demographics.get(hashed_id)
        if demo is None:
            from .errors import NotFoundError

            raise NotFoundError(f"unknown hashed_id {hashed_id!r}")
        return JoinedPerson(
            demographics=demo,
            current=self.current_commitments.get(hashed_id, ()),
            prior=self.prior_commitments.get(hashed_id, ()),
        )

    def ethnicities(self) -> list[str]:
        return sorted({d.ethnicity for d in self.demographics.values()})

    def counties(self) -> list[str]:
        return sorted({d.sentencing_county for d in self.demographics.values()})

    def row_counts(self) -> dict[str, int]:
        return {
            "demographics": len(self.demographics),
            "current_commitments": sum(len(v) for v in self.current_commitments.values()),
            "prior_commitments": sum(len(v) for v in self.prior_commitments.values()),
        }

    def verify_integrity(self) -> None:
        """Full referential and provenance scan; raises IntegrityError."""
        for table_name, table in (
            ("current_commitments", self.current_commitments),
            ("prior_commitments", self.prior_commitments),
        ):
            for hid in table:
                if hid not in self.demographics:
                    raise IntegrityError(
                        f"{table_name} references unknown hashed_id {hid!r}"
                    )
        counts = self.row_counts()
        for table_name, n in self.provenance.row_counts:
            if counts.get(table_name) != n:
                raise IntegrityError(
                    f"provenance row count for {table_name} is {n}, store has "
                    f"{counts.get(table_name)}"
                )


def data_dictionary() -> dict:
    """Column dictionary for the three tables, as served and documented."""
    return {
        "tables": {
            "demographics": {
                "columns": list(DEMOGRAPHICS_COLUMNS),
                "key": "hashed_id",
                "notes": {
                    "offense_date": "ISO-8601 date, may be empty",
                    "parole_eligibility": "ISO-8601 date, may be empty",
                    "sentence_length": "months, non-negative integer",
                    "sentence_type": f"one of {', '.join(SENTENCE_TYPES)}",
                },
            },
            "current_commitments": {
                "columns": list(CURRENT_COLUMNS),
                "key": "hashed_id (foreign key, repeated)",
                "notes": {
                    "enhancements": f"penal codes joined by '{ENHANCEMENT_DELIMITER}'",
                    "court_determined_length": "months, non-negative integer",
                },
            },
            "prior_commitments": {
                "columns": list(PRIOR_COLUMNS),
                "key": "hashed_id (foreign key, repeated)",
                "notes": {"release_date": "ISO-8601 date of completed term"},
            },
        },
        "extra_columns": "preserved as opaque pass-through values",
    }


def _open_rows(source: str | Path | io.TextIOBase, table: str, required: tuple[str, ...]):
    if isinstance(source, (str, Path)):
        handle = open(source, "r", encoding="utf-8", newline="")
        close = True
    else:
        handle, close = source, False
    reader = csv.DictReader(handle)
    header = reader.fieldnames or []
    for col in required:
        if col not in header:
            if close:
                handle.close()
            raise SchemaError(f"{table}: missing required column '{col}'")
    return handle, close, reader, header


def _extras(row: dict[str, str], known: tuple[str, ...]) -> tuple[tuple[str, str], ...]:
    return tuple((k, v) for k, v in row.items() if k not in known and k is not None)


def _parse_optional_date(value: str, column: str) -> date | None:
    value = (value or "").strip()
    if not value:
        return None
    try:
        return parse_date(value)
    except ValueError:
        raise ValueError(f"unparseable date in '{column}': {value!r}")


def _parse_nonneg_int(value: str, column: str) -> int:
    try:
        out = int(str(value).strip())
    except (TypeError, ValueError):
        raise ValueError(f"unparseable number in '{column}': {value!r}")
    if out < 0:
        raise ValueError(f"negative value in '{column}': {out}")
    return out


def _split_enhancements(value: str) -> tuple[str, ...]:
    value = (value or "").strip()
    if not value:
        return ()
    return tuple(c.strip().upper() for c in value.split(ENHANCEMENT_DELIMITER) if c.strip())


def _demographics_from_row(row: dict[str, str]) -> DemographicsRecord:
    hid = (row["hashed_id"] or "").strip()
    if not hid:
        raise ValueError("empty hashed_id")
    stype = canonical_sentence_type(row["sentence_type"])
    return DemographicsRecord(
        hashed_id=hid,
        ethnicity=(row["ethnicity"] or "").strip(),
        controlling_offense=(row["controlling_offense"] or "").strip().upper(),
        offense_date=_parse_optional_date(row["offense_date"], "offense_date"),
        sentencing_county=(row["sentencing_county"] or "").strip(),
        sentence_length=_parse_nonneg_int(row["sentence_length"], "sentence_length"),
        sentence_type=stype,
        parole_eligibility=_parse_optional_date(
            row["parole_eligibility"], "parole_eligibility"
        ),
        institution=(row["institution"] or "").strip(),
        extras=_extras(row, DEMOGRAPHICS_COLUMNS),
    )


def _commitment_from_row(row: dict[str, str], with_release: bool) -> CommitmentRecord:
    hid = (row["hashed_id"] or "").strip()
    if not hid:
        raise ValueError("empty hashed_id")
    release = None
    if with_release:
        release = _parse_optional_date(row["release_date"], "release_date")
        if release is None:
            raise ValueError("prior commitment missing release_date")
    return CommitmentRecord(
        hashed_id=hid,
        offense_code=(row["offense_code"] or "").strip().upper(),
        enhancements=_split_enhancements(row["enhancements"]),
        sentence_type=canonical_sentence_type(row["sentence_type"]),
        court_determined_length=_parse_nonneg_int(
            row["court_determined_length"], "court_determined_length"
        ),
        sentencing_county=(row["sentencing_county"] or "").strip(),
        release_date=release,
        extras=_extras(row, PRIOR_COLUMNS if with_release else CURRENT_COLUMNS),
    )


def ingest_tables(
    demographics_source,
    current_source,
    prior_source,
    *,
    snapshot_date: str = "",
    max_reject_fraction: float = MAX_REJECT_FRACTION,
) -> RecordStore:
    """Load, validate, and join the three tables into a RecordStore.

    Row-level failures (bad values, unknown foreign keys) are quarantined
    into ``store.rejects`` with the 1-based row index and a reason. A table
    whose reject fraction exceeds ``max_reject_fraction`` aborts with
    IntegrityError, as do duplicate demographics ids.
    """
    rejects: list[RejectedRow] = []
    demographics: dict[str, DemographicsRecord] = {}

    handle, close, reader, _ = _open_rows(
        demographics_source, "demographics", DEMOGRAPHICS_COLUMNS
    )
    try:
        total = 0
        for i, row in enumerate(reader, start=1):
            total += 1
            try:
                rec = _demographics_from_row(row)
            except ValueError as exc:
                rejects.append(
                    RejectedRow("demographics", i, f"row {i}: {exc}", tuple(row.items()))
                )
                continue
            if rec.hashed_id in demographics:
                raise IntegrityError(
                    f"demographics: duplicate hashed_id {rec.hashed_id!r} at row {i}"
                )
            demographics[rec.hashed_id] = rec
    finally:
        if close:
            handle.close()
    _check_reject_rate("demographics", total, rejects, max_reject_fraction)

    current = _ingest_commitments(
        current_source, "current_commitments", False, demographics, rejects,
        max_reject_fraction,
    )
    prior = _ingest_commitments(
        prior_source, "prior_commitments", True, demographics, rejects,
        max_reject_fraction,
    )

    def _source_name(src) -> str:
        if isinstance(src, (str, Path)):
            return str(src)
        return getattr(src, "name", "<stream>")

    provenance = Provenance(
        sources=(
            ("demographics", _source_name(demographics_source)),
            ("current_commitments", _source_name(current_source)),
            ("prior_commitments", _source_name(prior_source)),
        ),
        row_counts=(
            ("demographics", len(demographics)),
            ("current_commitments", sum(len(v) for v in current.values())),
            ("prior_commitments", sum(len(v) for v in prior.values())),
        ),
        snapshot_date=snapshot_date,
    )
    store = RecordStore(
        demographics=demographics,
        current_commitments=current,
        prior_commitments=prior,
        provenance=provenance,
        rejects=tuple(rejects),
    )
    store.verify_integrity()
    return store


def _ingest_commitments(
    source,
    table: str,
    with_release: bool,
    demographics: dict[str, DemographicsRecord],
    rejects: list[RejectedRow],
    max_reject_fraction: float,
) -> dict[str, tuple[CommitmentRecord, ...]]:
    required = PRIOR_COLUMNS if with_release else CURRENT_COLUMNS
    out: dict[str, list[CommitmentRecord]] = {}
    handle, close, reader, _ = _open_rows(source, table, required)
    local_rejects = 0
    try:
        total = 0
        for i, row in enumerate(reader, start=1):
            total += 1
            try:
                rec = _commitment_from_row(row, with_release)
            except ValueError as exc:
                rejects.append(RejectedRow(table, i, f"row {i}: {exc}", tuple(row.items())))
                local_rejects += 1
                continue
            if rec.hashed_id not in demographics:
                rejects.append(
                    RejectedRow(
                        table, i,
                        f"row {i}: unknown hashed_id {rec.hashed_id!r}",
                        tuple(row.items()),
                    )
                )
                local_rejects += 1
                continue
            out.setdefault(rec.hashed_id, []).append(rec)
    finally:
        if close:
            handle.close()
    if total and local_rejects / total > max_reject_fraction:
        raise IntegrityError(
            f"{table}: {local_rejects}/{total} rows rejected "
            f"(threshold {max_reject_fraction:.0%}); aborting ingest"
        )
    return {k: tuple(v) for k, v in out.items()}


def _check_reject_rate(table, total, rejects, max_reject_fraction):
    n = sum(1 for r in rejects if r.table == table)
    if total and n / total > max_reject_fraction:
        raise IntegrityError(
            f"{table}: {n}/{total} rows rejected "
            f"(threshold {max_reject_fraction:.0%}); aborting ingest"
        )


# Canonical CSV writers ------------------------------------------------------

def _write_csv(path: Path, columns: Iterable[str], rows: Iterable[dict]) -> None:
    columns = list(columns)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _date_str(d: date | None) -> str:
    return d.isoformat() if d else ""


def export_store(store: RecordStore, out_dir: str | Path) -> dict[str, Path]:
    """Write the store back to canonical CSVs (plus rejects, if any)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    demo_rows = []
    extra_cols: list[str] = []
    for hid in sorted(store.demographics):
        d = store.demographics[hid]
        row = {
            "hashed_id": d.hashed_id,
            "ethnicity": d.ethnicity,
            "controlling_offense": d.controlling_offense,
            "offense_date": _date_str(d.offense_date),
            "sentencing_county": d.sentencing_county,
            "sentence_length": d.sentence_length,
            "sentence_type": d.sentence_type,
            "parole_eligibility": _date_str(d.parole_eligibility),
            "institution": d.institution,
        }
        for k, v in d.extras:
            row[k] = v
            if k not in extra_cols:
                extra_cols.append(k)
        demo_rows.append(row)
    paths["demographics"] = out / "demographics.csv"
    _write_csv(paths["demographics"], list(DEMOGRAPHICS_COLUMNS) + extra_cols, demo_rows)

    for table, with_release in (("current_commitments", False), ("prior_commitments", True)):
        src = getattr(store, table)
        rows = []
        cols = list(PRIOR_COLUMNS if with_release else CURRENT_COLUMNS)
        for hid in sorted(src):
            for c in src[hid]:
                row = {
                    "hashed_id": c.hashed_id,
                    "offense_code": c.offense_code,
                    "enhancements": ENHANCEMENT_DELIMITER.join(c.enhancements),
                    "sentence_type": c.sentence_type,
                    "court_determined_length": c.court_determined_length,
                    "sentencing_county": c.sentencing_county,
                }
                if with_release:
                    row["release_date"] = _date_str(c.release_date)
                rows.append(row)
        paths[table] = out / f"{table}.csv"
        _write_csv(paths[table], cols, rows)

    if store.rejects:
        paths["rejects"] = out / "rejects.csv"
        _write_csv(
            paths["rejects"],
            ("table", "row_index", "reason", "row"),
            (
                {
                    "table": r.table,
                    "row_index": r.row_index,
                    "reason": r.reason,
                    "row": repr(dict(r.row)),
                }
                for r in store.rejects
            ),
        )
    return paths


def load_store(data_dir: str | Path, snapshot_date: str = "") -> RecordStore:
    """Ingest a directory holding the three canonical CSV files."""
    data = Path(data_dir)
    return ingest_tables(
        data / "demographics.csv",
        data / "current_commitments.csv",
        data / "prior_commitments.csv",
        snapshot_date=snapshot_date,
    )
