"""Case featurization and similar-case retrieval.

Each person is mapped to a numeric vector by a configurable list of feature
rules, min-max scaled across the featurized population so no single raw
scale dominates. Retrieval ranks every other case against a target by
cosine, continuous Tanimoto, or Euclidean distance, with deterministic
tie-breaking on hashed id.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Sequence

from .errors import FeaturizationError, NotFoundError, QueryError, UndefinedSimilarityError
from .records import JoinedPerson, RecordStore

METRICS = ("cosine", "tanimoto", "euclidean")


@dataclass(frozen=True)
class FeatureRule:
    """One numeric feature extracted from a joined person.

    kind 'code_score': look each commitment code up in ``scores`` and
    aggregate ('max' or 'sum'); codes absent from the table contribute
    ``default``. kind 'count': size of a record collection ('prior',
    'current', or 'enhancements'). kind 'field': numeric demographics field.
    """

    name: str
    kind: str
    source: str = "current"
    scores: tuple[tuple[str, float], ...] = ()
    mode: str = "max"
    default: float = 0.0
    fieldname: str = ""

    _KINDS = ("code_score", "count", "field")
    _SOURCES = ("current", "prior", "enhancements")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise FeaturizationError(
                f"unknown feature kind {self.kind!r}", feature=self.name
            )
        if self.kind == "code_score":
            if self.source not in ("current", "prior"):
                raise FeaturizationError(
                    f"code_score source must be current|prior, got {self.source!r}",
                    feature=self.name,
                )
            if self.mode not in ("max", "sum"):
                raise FeaturizationError(
                    f"code_score mode must be max|sum, got {self.mode!r}",
                    feature=self.name,
                )
            if not self.scores:
                raise FeaturizationError("code_score needs a score table", feature=self.name)
        if self.kind == "count" and self.source not in self._SOURCES:
            raise FeaturizationError(
                f"count source must be one of {self._SOURCES}, got {self.source!r}",
                feature=self.name,
            )
        if self.kind == "field" and not self.fieldname:
            raise FeaturizationError("field rule needs a fieldname", feature=self.name)

    def extract(self, person: JoinedPerson) -> float:
        if self.kind == "code_score":
            table = dict(self.scores)
            codes = (
                person.current_codes() if self.source == "current" else person.prior_codes()
            )
            values = [table.get(c, self.default) for c in codes]
            if not values:
                return self.default
            return max(values) if self.mode == "max" else sum(values)
        if self.kind == "count":
            if self.source == "prior":
                return float(len(person.prior))
            if self.source == "current":
                return float(len(person.current))
            return float(sum(len(c.enhancements) for c in person.current))
        value = getattr(person.demographics, self.fieldname, None)
        if value is None:
            raise FeaturizationError(
                f"person {person.demographics.hashed_id} has no field "
                f"{self.fieldname!r}",
                feature=self.name,
            )
        try:
            return float(value)
        except (TypeError, ValueError):
            raise FeaturizationError(
                f"field {self.fieldname!r} is not numeric: {value!r}",
                feature=self.name,
            )

    def to_json_dict(self) -> dict:
        out: dict = {"name": self.name, "kind": self.kind}
        if self.kind == "code_score":
            out.update(
                source=self.source,
                scores={k: v for k, v in self.scores},
                mode=self.mode,
                default=self.default,
            )
        elif self.kind == "count":
            out["source"] = self.source
        else:
            out["fieldname"] = self.fieldname
        return out

    @classmethod
    def from_json_dict(cls, obj: dict) -> "FeatureRule":
        try:
            kind = obj["kind"]
            name = obj["name"]
        except KeyError as exc:
            raise FeaturizationError(f"feature rule missing {exc.args[0]!r}")
        scores = obj.get("scores", {})
        return cls(
            name=name,
            kind=kind,
            source=obj.get("source", "current"),
            scores=tuple(sorted((k.upper(), float(v)) for k, v in scores.items())),
            mode=obj.get("mode", "max"),
            default=float(obj.get("default", 0.0)),
            fieldname=obj.get("fieldname", ""),
        )


@dataclass(frozen=True)
class FeatureConfig:
    rules: tuple[FeatureRule, ...]
    normalize: bool = True

    def __post_init__(self):
        if not self.rules:
            raise FeaturizationError("feature config needs at least one rule")
        names = [r.name for r in self.rules]
        if len(set(names)) != len(names):
            raise FeaturizationError("duplicate feature names in config")

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.rules)

    def to_json_dict(self) -> dict:
        return {
            "rules": [r.to_json_dict() for r in self.rules],
            "normalize": self.normalize,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "FeatureConfig":
        if not isinstance(obj, dict) or "rules" not in obj:
            raise FeaturizationError("feature config must be an object with 'rules'")
        return cls(
            rules=tuple(FeatureRule.from_json_dict(r) for r in obj["rules"]),
            normalize=bool(obj.get("normalize", True)),
        )


def default_feature_config() -> FeatureConfig:
    """Packaged default: offense severity, violence flag, counts, length."""
    text = resources.files("disparity.data").joinpath("feature_config.json").read_text(
        encoding="utf-8"
    )
    return FeatureConfig.from_json_dict(json.loads(text))


@dataclass(frozen=True)
class CaseVector:
    hashed_id: str
    values: tuple[float, ...]
    feature_names: tuple[str, ...]

    def to_json_dict(self) -> dict:
        return {
            "hashed_id": self.hashed_id,
            "values": list(self.values),
            "feature_names": list(self.feature_names),
        }


def featurize(person: JoinedPerson, config: FeatureConfig) -> CaseVector:
    """Raw (unscaled) feature vector for one person."""
    return CaseVector(
        hashed_id=person.demographics.hashed_id,
        values=tuple(rule.extract(person) for rule in config.rules),
        feature_names=config.feature_names,
    )


def featurize_store(
    store: RecordStore,
    config: FeatureConfig,
    ids: Iterable[str] | None = None,
) -> dict[str, CaseVector]:
    """Featurize a population, min-max scaling each feature across it.

    A feature that is constant across the population scales to 0.0 for
    everyone (no information, no contribution to any metric).
    """
    selected = sorted(ids) if ids is not None else store.ids()
    raw: dict[str, tuple[float, ...]] = {}
    for hid in selected:
        raw[hid] = featurize(store.person(hid), config).values
    if not raw:
        return {}
    if not config.normalize:
        return {
            hid: CaseVector(hid, values, config.feature_names)
            for hid, values in raw.items()
        }
    n_features = len(config.rules)
    lo = [math.inf] * n_features
    hi = [-math.inf] * n_features
    for values in raw.values():
        for j, v in enumerate(values):
            lo[j] = min(lo[j], v)
            hi[j] = max(hi[j], v)
    out: dict[str, CaseVector] = {}
    for hid, values in raw.items():
        scaled = tuple(
            0.0 if hi[j] == lo[j] else (v - lo[j]) / (hi[j] - lo[j])
            for j, v in enumerate(values)
        )
        out[hid] = CaseVector(hid, scaled, config.feature_names)
    return out


# Similarity metrics ---------------------------------------------------------

def _dot(a: Sequence[float], b: Sequence[float]) -> float:
    return sum(x * y for x, y in zip(a, b))


def similarity(a: Sequence[float], b: Sequence[float], metric: str = "cosine") -> float:
    """Pairwise similarity or distance between two equal-length vectors.

    cosine: dot(a,b) / (|a| |b|), undefined when either vector is all zero.
    tanimoto (continuous): dot / (|a|^2 + |b|^2 - dot), undefined when both
    are all zero. euclidean: plain distance, lower means more similar.
    """
    if metric not in METRICS:
        raise QueryError(f"unknown similarity metric {metric!r}")
    if len(a) != len(b):
        raise QueryError(f"vector length mismatch: {len(a)} vs {len(b)}")
    if metric == "euclidean":
        return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))
    dot = _dot(a, b)
    na2, nb2 = _dot(a, a), _dot(b, b)
    if metric == "cosine":
        if na2 == 0.0 or nb2 == 0.0:
            raise UndefinedSimilarityError("cosine undefined for a zero vector")
        return dot / math.sqrt(na2 * nb2)
    denom = na2 + nb2 - dot
    if denom == 0.0:
        raise UndefinedSimilarityError("tanimoto undefined for two zero vectors")
    return dot / denom


@dataclass(frozen=True)
class SimilarCase:
    hashed_id: str
    score: float

    def to_json_dict(self) -> dict:
        return {"hashed_id": self.hashed_id, "score": self.score}


def find_similar(
    vectors: dict[str, CaseVector],
    target_id: str,
    *,
    metric: str = "cosine",
    k: int = 10,
    threshold: float | None = None,
) -> list[SimilarCase]:
    """Rank every other case against the target.

    Cosine and Tanimoto rank descending (higher is more similar) and a
    threshold keeps scores >= it; Euclidean ranks ascending and a threshold
    keeps distances <= it. Ties break on hashed id so output order is
    deterministic. Cases whose pairing with the target is undefined are
    skipped rather than failing the whole query.
    """
    if metric not in METRICS:
        raise QueryError(f"unknown similarity metric {metric!r}")
    if k < 1:
        raise QueryError("k must be at least 1")
    target = vectors.get(target_id)
    if target is None:
        raise NotFoundError(f"unknown target id {target_id!r}")
    scored: list[SimilarCase] = []
    for hid in sorted(vectors):
        if hid == target_id:
            continue
        try:
            s = similarity(target.values, vectors[hid].values, metric)
        except UndefinedSimilarityError:
            continue
        scored.append(SimilarCase(hid, s))
    reverse = metric != "euclidean"
    scored.sort(key=lambda sc: ((-sc.score if reverse else sc.score), sc.hashed_id))
    if threshold is not None:
        if reverse:
            scored = [sc for sc in scored if sc.score >= threshold]
        else:
            scored = [sc for sc in scored if sc.score <= threshold]
    return scored[:k]
