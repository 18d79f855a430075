"""Corpus model: trial outcome tables, JSONL storage, rm5 ingestion, selections.

The on-disk corpus is JSON Lines: one header object
``{"format_version":1,"kind":"cochrane-corpus"}`` followed by one review
object per line.  Serialization is canonical (sorted keys, compact
separators, ``\\n`` line endings) so ``serialize(load(f))`` is byte-identical
to a canonicalized file.
"""

from __future__ import annotations

import csv
import io
import json
import re
import warnings
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Literal, Sequence, Union

from .errors import DataError, SelectionError

FORMAT_VERSION = 1
FORMAT_KIND = "cochrane-corpus"

OutcomeKind = Literal["dich", "cont"]
TargetGroup = Literal["group1", "group2"]


class EffectScale(Enum):
    """Analysis scales onto which raw study data are reduced."""

    LOG_ODDS_RATIO = "logor"
    PETO_LOG_ODDS_RATIO = "peto"
    LOG_RISK_RATIO = "logrr"
    RISK_DIFFERENCE = "rd"
    MEAN_DIFFERENCE = "md"
    HEDGES_G = "g"

    @classmethod
    def from_token(cls, token: str) -> "EffectScale":
        try:
            return cls(str(token).strip().lower())
        except ValueError:
            valid = ", ".join(s.value for s in cls)
            raise DataError(f"unknown effect scale {token!r} (expected one of: {valid})") from None

    @property
    def is_log(self) -> bool:
        """True for scales whose natural-scale view is the exponential."""
        return self in (
            EffectScale.LOG_ODDS_RATIO,
            EffectScale.PETO_LOG_ODDS_RATIO,
            EffectScale.LOG_RISK_RATIO,
        )

    @property
    def is_dichotomous(self) -> bool:
        return self in (
            EffectScale.LOG_ODDS_RATIO,
            EffectScale.PETO_LOG_ODDS_RATIO,
            EffectScale.LOG_RISK_RATIO,
            EffectScale.RISK_DIFFERENCE,
        )

    @property
    def axis_label(self) -> str:
        return {
            "logor": "log odds ratio (logOR)",
            "peto": "log Peto odds ratio",
            "logrr": "log risk ratio (logRR)",
            "rd": "risk difference (RD)",
            "md": "mean difference (MD)",
            "g": "Hedges' g",
        }[self.value]

    @property
    def natural_label(self) -> str:
        return {
            "logor": "odds ratio (OR)",
            "peto": "odds ratio (OR)",
            "logrr": "risk ratio (RR)",
            "rd": "risk difference (RD)",
            "md": "mean difference (MD)",
            "g": "Hedges' g",
        }[self.value]


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise DataError(message)


@dataclass(frozen=True)
class DichotomousCounts:
    """2x2 outcome table: events/total per group."""

    events1: int
    total1: int
    events2: int
    total2: int

    def __post_init__(self):
        for name in ("events1", "total1", "events2", "total2"):
            v = getattr(self, name)
            _require(isinstance(v, int) and not isinstance(v, bool), f"{name} must be an integer")
        _require(self.total1 > 0 and self.total2 > 0, "totals must be positive")
        _require(0 <= self.events1 <= self.total1, "events1 must satisfy 0 <= events1 <= total1")
        _require(0 <= self.events2 <= self.total2, "events2 must satisfy 0 <= events2 <= total2")

    def swapped(self) -> "DichotomousCounts":
        return DichotomousCounts(self.events2, self.total2, self.events1, self.total1)


@dataclass(frozen=True)
class ContinuousSummaries:
    """Per-group mean, standard deviation and sample size.

    sd == 0 is representable (such studies are flagged non-estimable
    downstream); the corpus loader itself rejects sd <= 0.
    """

    mean1: float
    sd1: float
    n1: int
    mean2: float
    sd2: float
    n2: int

    def __post_init__(self):
        for name in ("n1", "n2"):
            v = getattr(self, name)
            _require(isinstance(v, int) and not isinstance(v, bool) and v >= 2, f"{name} must be an integer >= 2")
        _require(self.sd1 >= 0 and self.sd2 >= 0, "standard deviations must be non-negative")

    def swapped(self) -> "ContinuousSummaries":
        return ContinuousSummaries(self.mean2, self.sd2, self.n2, self.mean1, self.sd1, self.n1)


@dataclass(frozen=True)
class PrecomputedEstimate:
    """An already computed effect and standard error on a declared scale."""

    y: float
    se: float
    scale: EffectScale

    def __post_init__(self):
        _require(isinstance(self.scale, EffectScale), "scale must be an EffectScale")
        _require(self.se > 0 and self.se == self.se and self.se != float("inf"), "se must be positive and finite")
        _require(float("-inf") < self.y < float("inf"), "y must be finite")

    def swapped(self) -> "PrecomputedEstimate":
        # All supported scales are antisymmetric under a group swap.
        return PrecomputedEstimate(-self.y, self.se, self.scale)


StudyData = Union[DichotomousCounts, ContinuousSummaries, PrecomputedEstimate]


@dataclass(frozen=True)
class Study:
    label: str
    data: StudyData

    def __post_init__(self):
        _require(bool(self.label), "study label must be non-empty")

    def swapped(self) -> "Study":
        return Study(self.label, self.data.swapped())


@dataclass(frozen=True)
class Subgroup:
    id: str
    name: str
    studies: tuple[Study, ...]


@dataclass(frozen=True)
class MetaAnalysis:
    id: str
    review_id: str
    name: str
    outcome_kind: OutcomeKind
    group1_label: str
    group2_label: str
    subgroups: tuple[Subgroup, ...]


@dataclass(frozen=True)
class Review:
    id: str
    title: str
    year: int
    topics: tuple[str, ...]
    keywords: tuple[str, ...]
    meta_analyses: tuple[MetaAnalysis, ...]


@dataclass(frozen=True)
class DatabaseSnapshot:
    """Immutable, validated corpus; safe to share across threads."""

    reviews: tuple[Review, ...]
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        _validate_snapshot(self.reviews)
        object.__setattr__(self, "_reviews_by_id", {r.id: r for r in self.reviews})
        mas = {}
        subs = {}
        for r in self.reviews:
            for ma in r.meta_analyses:
                mas[ma.id] = ma
                for sg in ma.subgroups:
                    subs[sg.id] = (ma, sg)
        object.__setattr__(self, "_mas_by_id", mas)
        object.__setattr__(self, "_subs_by_id", subs)

    def review(self, review_id: str) -> Review:
        try:
            return self._reviews_by_id[review_id]
        except KeyError:
            raise DataError(f"unknown review id {review_id!r}") from None

    def meta_analysis(self, ma_id: str) -> MetaAnalysis:
        try:
            return self._mas_by_id[ma_id]
        except KeyError:
            raise DataError(f"unknown meta-analysis id {ma_id!r}") from None

    @property
    def counts(self) -> tuple[int, int, int]:
        """(reviews, meta-analyses, studies) in the snapshot."""
        n_ma = sum(len(r.meta_analyses) for r in self.reviews)
        n_st = sum(
            len(sg.studies) for r in self.reviews for ma in r.meta_analyses for sg in ma.subgroups
        )
        return (len(self.reviews), n_ma, n_st)


@dataclass(frozen=True)
class SelectionItem:
    meta_analysis_id: str
    subgroup_ids: tuple[str, ...] | None = None  # None selects every subgroup


@dataclass(frozen=True)
class Selection:
    """The user's choice of study sets, orientation, scale and overlays."""

    items: tuple[SelectionItem, ...]
    target_group: TargetGroup = "group1"
    pooled: bool = False
    scale: EffectScale = EffectScale.LOG_ODDS_RATIO
    overlay: tuple[Study, ...] = ()

    def __post_init__(self):
        _require(len(self.items) > 0, "selection must contain at least one meta-analysis")
        _require(self.target_group in ("group1", "group2"), "target_group must be 'group1' or 'group2'")


@dataclass(frozen=True)
class StudySet:
    """A resolved, analysis-ready list of studies with group orientation applied.

    Overlay (user-added) studies are the trailing ``n_overlay`` entries.
    """

    name: str
    outcome_kind: OutcomeKind
    group1_label: str
    group2_label: str
    studies: tuple[Study, ...]
    n_overlay: int = 0

    def is_new(self, index: int) -> bool:
        return index >= len(self.studies) - self.n_overlay


# ---------------------------------------------------------------------------
# JSONL corpus format
# ---------------------------------------------------------------------------


def _check_keys(obj: dict, allowed: set[str], where: str) -> None:
    extra = set(obj) - allowed
    if extra:
        raise DataError(f"{where}: unknown field(s) {sorted(extra)}")


def _get(obj: dict, key: str, where: str):
    if key not in obj:
        raise DataError(f"{where}: missing field {key!r}")
    return obj[key]


def _as_int(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise DataError(f"{where}: expected an integer, got {value!r}")
    return value


def _as_num(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DataError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _as_str(value, where: str) -> str:
    if not isinstance(value, str):
        raise DataError(f"{where}: expected a string, got {value!r}")
    return value


def _as_str_list(value, where: str) -> tuple[str, ...]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise DataError(f"{where}: expected a list of strings")
    return tuple(value)


def study_from_obj(obj: dict, where: str = "study") -> Study:
    _check_keys(obj, {"label", "dich", "cont", "est"}, where)
    label = _as_str(_get(obj, "label", where), f"{where}.label")
    kinds = [k for k in ("dich", "cont", "est") if k in obj]
    if len(kinds) != 1:
        raise DataError(f"{where}: exactly one of 'dich', 'cont', 'est' required, found {kinds or 'none'}")
    kind = kinds[0]
    body = obj[kind]
    if not isinstance(body, dict):
        raise DataError(f"{where}.{kind}: expected an object")
    try:
        if kind == "dich":
            _check_keys(body, {"e1", "n1", "e2", "n2"}, f"{where}.dich")
            data: StudyData = DichotomousCounts(
                _as_int(_get(body, "e1", f"{where}.dich"), f"{where}.dich.e1"),
                _as_int(_get(body, "n1", f"{where}.dich"), f"{where}.dich.n1"),
                _as_int(_get(body, "e2", f"{where}.dich"), f"{where}.dich.e2"),
                _as_int(_get(body, "n2", f"{where}.dich"), f"{where}.dich.n2"),
            )
        elif kind == "cont":
            _check_keys(body, {"m1", "sd1", "n1", "m2", "sd2", "n2"}, f"{where}.cont")
            data = ContinuousSummaries(
                _as_num(_get(body, "m1", f"{where}.cont"), f"{where}.cont.m1"),
                _as_num(_get(body, "sd1", f"{where}.cont"), f"{where}.cont.sd1"),
                _as_int(_get(body, "n1", f"{where}.cont"), f"{where}.cont.n1"),
                _as_num(_get(body, "m2", f"{where}.cont"), f"{where}.cont.m2"),
                _as_num(_get(body, "sd2", f"{where}.cont"), f"{where}.cont.sd2"),
                _as_int(_get(body, "n2", f"{where}.cont"), f"{where}.cont.n2"),
            )
            if data.sd1 <= 0 or data.sd2 <= 0:
                raise DataError(f"{where}.cont: standard deviations must be positive")
        else:
            _check_keys(body, {"y", "se", "scale"}, f"{where}.est")
            data = PrecomputedEstimate(
                _as_num(_get(body, "y", f"{where}.est"), f"{where}.est.y"),
                _as_num(_get(body, "se", f"{where}.est"), f"{where}.est.se"),
                EffectScale.from_token(_as_str(_get(body, "scale", f"{where}.est"), f"{where}.est.scale")),
            )
        return Study(label, data)
    except DataError as e:
        if str(e).startswith(where):
            raise
        raise DataError(f"{where}: {e}") from None


def _review_from_obj(obj: dict, where: str) -> Review:
    if not isinstance(obj, dict):
        raise DataError(f"{where}: expected a JSON object")
    _check_keys(obj, {"id", "title", "year", "topics", "keywords", "meta_analyses"}, where)
    rid = _as_str(_get(obj, "id", where), f"{where}.id")
    title = _as_str(_get(obj, "title", where), f"{where}.title")
    _require(bool(title), f"{where}.title: must be non-empty")
    year = _as_int(_get(obj, "year", where), f"{where}.year")
    if not 1900 <= year <= 2100:
        raise DataError(f"{where}.year: {year} outside [1900, 2100]")
    topics = _as_str_list(_get(obj, "topics", where), f"{where}.topics")
    keywords = _as_str_list(_get(obj, "keywords", where), f"{where}.keywords")
    mas_raw = _get(obj, "meta_analyses", where)
    if not isinstance(mas_raw, list):
        raise DataError(f"{where}.meta_analyses: expected a list")
    mas = []
    for i, ma_obj in enumerate(mas_raw):
        w = f"{where}.meta_analyses[{i}]"
        if not isinstance(ma_obj, dict):
            raise DataError(f"{w}: expected an object")
        _check_keys(ma_obj, {"id", "name", "outcome_kind", "group1_label", "group2_label", "subgroups"}, w)
        kind = _as_str(_get(ma_obj, "outcome_kind", w), f"{w}.outcome_kind")
        if kind not in ("dich", "cont"):
            raise DataError(f"{w}.outcome_kind: {kind!r} is not 'dich' or 'cont'")
        sgs_raw = _get(ma_obj, "subgroups", w)
        if not isinstance(sgs_raw, list) or not sgs_raw:
            raise DataError(f"{w}.subgroups: at least one subgroup required")
        subgroups = []
        for j, sg_obj in enumerate(sgs_raw):
            ws = f"{w}.subgroups[{j}]"
            if not isinstance(sg_obj, dict):
                raise DataError(f"{ws}: expected an object")
            _check_keys(sg_obj, {"id", "name", "studies"}, ws)
            st_raw = _get(sg_obj, "studies", ws)
            if not isinstance(st_raw, list):
                raise DataError(f"{ws}.studies: expected a list")
            studies = []
            seen = set()
            for s, st_obj in enumerate(st_raw):
                wst = f"{ws}.studies[{s}]"
                study = study_from_obj(st_obj, wst)
                if study.label in seen:
                    raise DataError(f"{wst}: duplicate study label {study.label!r} within subgroup")
                seen.add(study.label)
                expected = {"dich": DichotomousCounts, "cont": ContinuousSummaries}[kind]
                if not isinstance(study.data, (expected, PrecomputedEstimate)):
                    raise DataError(f"{wst}: study data does not match outcome_kind {kind!r}")
                studies.append(study)
            subgroups.append(
                Subgroup(
                    _as_str(_get(sg_obj, "id", ws), f"{ws}.id"),
                    _as_str(_get(sg_obj, "name", ws), f"{ws}.name"),
                    tuple(studies),
                )
            )
        mas.append(
            MetaAnalysis(
                id=_as_str(_get(ma_obj, "id", w), f"{w}.id"),
                review_id=rid,
                name=_as_str(_get(ma_obj, "name", w), f"{w}.name"),
                outcome_kind=kind,
                group1_label=_as_str(_get(ma_obj, "group1_label", w), f"{w}.group1_label"),
                group2_label=_as_str(_get(ma_obj, "group2_label", w), f"{w}.group2_label"),
                subgroups=tuple(subgroups),
            )
        )
    return Review(rid, title, year, topics, keywords, tuple(mas))


def _validate_snapshot(reviews: Sequence[Review]) -> None:
    seen_reviews: set[str] = set()
    seen_mas: set[str] = set()
    seen_sgs: set[str] = set()
    for r in reviews:
        if r.id in seen_reviews:
            raise DataError(f"duplicate review id {r.id!r}")
        seen_reviews.add(r.id)
        for ma in r.meta_analyses:
            if ma.review_id != r.id:
                raise DataError(f"meta-analysis {ma.id!r} references dangling review id {ma.review_id!r}")
            if ma.id in seen_mas:
                raise DataError(f"duplicate meta-analysis id {ma.id!r}")
            seen_mas.add(ma.id)
            for sg in ma.subgroups:
                if sg.id in seen_sgs:
                    raise DataError(f"duplicate subgroup id {sg.id!r}")
                seen_sgs.add(sg.id)


def load_database(path: str | Path) -> DatabaseSnapshot:
    """Load and validate a JSONL corpus file into an immutable snapshot."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"database file not found: {path}")
    reviews: list[Review] = []
    with path.open("r", encoding="utf-8") as fh:
        header_seen = False
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                obj = json.loads(stripped)
            except json.JSONDecodeError as e:
                raise DataError(f"line {line_no}: invalid JSON at column {e.colno}: {e.msg}") from None
            if not header_seen:
                if not isinstance(obj, dict) or "format_version" not in obj:
                    raise DataError(f"line {line_no}: expected header object with 'format_version'")
                _check_keys(obj, {"format_version", "kind"}, f"line {line_no}: header")
                if obj.get("kind") != FORMAT_KIND:
                    raise DataError(f"line {line_no}: header kind {obj.get('kind')!r} is not {FORMAT_KIND!r}")
                version = obj["format_version"]
                if version != FORMAT_VERSION:
                    raise DataError(
                        f"line {line_no}: unsupported format_version {version!r} (this build reads version {FORMAT_VERSION})"
                    )
                header_seen = True
                continue
            try:
                reviews.append(_review_from_obj(obj, "review"))
            except DataError as e:
                raise DataError(f"line {line_no}: {e}") from None
        if not header_seen:
            raise DataError("empty database file: missing header line")
    _validate_snapshot(reviews)
    return DatabaseSnapshot(tuple(reviews))


def study_to_obj(study: Study) -> dict:
    """JSON object form of a study (inverse of study_from_obj)."""
    if isinstance(study.data, DichotomousCounts):
        d = study.data
        return {"label": study.label, "dich": {"e1": d.events1, "n1": d.total1, "e2": d.events2, "n2": d.total2}}
    if isinstance(study.data, ContinuousSummaries):
        c = study.data
        return {
            "label": study.label,
            "cont": {"m1": c.mean1, "sd1": c.sd1, "n1": c.n1, "m2": c.mean2, "sd2": c.sd2, "n2": c.n2},
        }
    e = study.data
    return {"label": study.label, "est": {"y": e.y, "se": e.se, "scale": e.scale.value}}


def _review_to_obj(review: Review) -> dict:
    return {
        "id": review.id,
        "title": review.title,
        "year": review.year,
        "topics": list(review.topics),
        "keywords": list(review.keywords),
        "meta_analyses": [
            {
                "id": ma.id,
                "name": ma.name,
                "outcome_kind": ma.outcome_kind,
                "group1_label": ma.group1_label,
                "group2_label": ma.group2_label,
                "subgroups": [
                    {"id": sg.id, "name": sg.name, "studies": [study_to_obj(s) for s in sg.studies]}
                    for sg in ma.subgroups
                ],
            }
            for ma in review.meta_analyses
        ],
    }


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def serialize_database(snapshot: DatabaseSnapshot) -> str:
    """Canonical JSONL text for a snapshot (stable byte-for-byte)."""
    lines = [_canonical_json({"format_version": snapshot.format_version, "kind": FORMAT_KIND})]
    lines.extend(_canonical_json(_review_to_obj(r)) for r in snapshot.reviews)
    return "\n".join(lines) + "\n"


def save_database(snapshot: DatabaseSnapshot, path: str | Path) -> None:
    Path(path).write_text(serialize_database(snapshot), encoding="utf-8")


# ---------------------------------------------------------------------------
# rm5-subset XML ingestion
# ---------------------------------------------------------------------------

_OUTCOME_TAGS = {"DICH_OUTCOME": "dich", "CONT_OUTCOME": "cont"}
_SUBGROUP_TAGS = {"dich": "DICH_SUBGROUP", "cont": "CONT_SUBGROUP"}
_DATA_TAGS = {"dich": "DICH_DATA", "cont": "CONT_DATA"}


class Rm5Warning(UserWarning):
    """Raised (as a warning) for rm5 content skipped during ingestion."""


def _slugify(text: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")
    return slug or "review"


def _attr(el: ET.Element, name: str) -> str:
    value = el.get(name)
    if value is None:
        raise DataError(f"element <{el.tag}>: missing required attribute {name!r}")
    return value


def _int_attr(el: ET.Element, name: str) -> int:
    raw = _attr(el, name)
    try:
        return int(raw)
    except ValueError:
        raise DataError(f"element <{el.tag}>: attribute {name!r} is not an integer: {raw!r}") from None


def _float_attr(el: ET.Element, name: str) -> float:
    raw = _attr(el, name)
    try:
        return float(raw)
    except ValueError:
        raise DataError(f"element <{el.tag}>: attribute {name!r} is not a number: {raw!r}") from None


def _dich_study(el: ET.Element) -> Study:
    return Study(
        _attr(el, "STUDY_ID"),
        DichotomousCounts(
            _int_attr(el, "EVENTS_1"),
            _int_attr(el, "TOTAL_1"),
            _int_attr(el, "EVENTS_2"),
            _int_attr(el, "TOTAL_2"),
        ),
    )


def _cont_study(el: ET.Element) -> Study:
    return Study(
        _attr(el, "STUDY_ID"),
        ContinuousSummaries(
            _float_attr(el, "MEAN_1"),
            _float_attr(el, "SD_1"),
            _int_attr(el, "TOTAL_1"),
            _float_attr(el, "MEAN_2"),
            _float_attr(el, "SD_2"),
            _int_attr(el, "TOTAL_2"),
        ),
    )


def parse_rm5_subset(xml_text: str) -> Review:
    """Parse the documented rm5 element subset into a Review.

    Only review title/year, outcome name, subgroup names, group labels and
    per-study raw numbers are read; embedded model estimates and any other
    elements are discarded.  Outcome elements of unknown kind are skipped
    with an Rm5Warning.
    """
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as e:
        line, col = e.position
        raise DataError(f"not well-formed XML (line {line}, column {col}): {e.msg.split(':')[0]}") from None
    if root.tag != "COCHRANE_REVIEW":
        raise DataError(f"root element is <{root.tag}>, expected <COCHRANE_REVIEW>")

    title_el = root.find("./COVER_SHEET/TITLE")
    if title_el is None or not (title_el.text or "").strip():
        raise DataError("element <COVER_SHEET>: missing required <TITLE>")
    title = title_el.text.strip()
    review_id = root.get("ID") or _slugify(title)
    year_raw = root.get("YEAR")
    try:
        year = int(year_raw) if year_raw is not None else 2000
    except ValueError:
        raise DataError(f"element <COCHRANE_REVIEW>: attribute 'YEAR' is not an integer: {year_raw!r}") from None
    keywords = tuple((k.text or "").strip() for k in root.findall("./COVER_SHEET/KEYWORD") if (k.text or "").strip())
    topics = tuple((t.text or "").strip() for t in root.findall("./COVER_SHEET/TOPIC") if (t.text or "").strip())

    mas: list[MetaAnalysis] = []
    ma_seq = 0
    for el in root.iter():
        if el.tag in _OUTCOME_TAGS:
            kind = _OUTCOME_TAGS[el.tag]
        elif el.tag.endswith("_OUTCOME"):
            warnings.warn(f"skipping unsupported outcome element <{el.tag}>", Rm5Warning, stacklevel=2)
            continue
        else:
            continue
        ma_seq += 1
        ma_id = f"{review_id}:ma{ma_seq}"
        name = _attr(el, "NAME")
        g1 = el.get("GROUP_LABEL_1", "Group 1")
        g2 = el.get("GROUP_LABEL_2", "Group 2")
        parser = _dich_study if kind == "dich" else _cont_study
        data_tag = _DATA_TAGS[kind]
        sub_tag = _SUBGROUP_TAGS[kind]
        subgroups: list[Subgroup] = []
        for j, sub_el in enumerate(el.findall(sub_tag), start=1):
            rows = tuple(parser(d) for d in sub_el.findall(data_tag))
            subgroups.append(Subgroup(f"{ma_id}:sg{j}", _attr(sub_el, "NAME"), rows))
        loose = tuple(parser(d) for d in el.findall(data_tag))
        if loose:
            subgroups.append(Subgroup(f"{ma_id}:sg{len(subgroups) + 1}", "All studies", loose))
        if not subgroups:
            subgroups = [Subgroup(f"{ma_id}:sg1", "All studies", ())]
        mas.append(MetaAnalysis(ma_id, review_id, name, kind, g1, g2, tuple(subgroups)))

    return Review(review_id, title, year, topics, keywords, tuple(mas))


# ---------------------------------------------------------------------------
# Selection resolution
# ---------------------------------------------------------------------------


def selection_items_for(
    snapshot: DatabaseSnapshot, ma_ids: Sequence[str], subgroup_ids: Sequence[str] | None
) -> tuple[SelectionItem, ...]:
    """Build selection items from flat id lists (CLI flags, query params).

    Each subgroup id is assigned to the selected meta-analysis that owns it;
    meta-analyses with no listed subgroup include all their subgroups.
    """
    subs = list(subgroup_ids or [])
    items = []
    claimed: set[str] = set()
    for ma_id in ma_ids:
        ma = snapshot.meta_analysis(ma_id)
        own = tuple(s for s in subs if any(sg.id == s for sg in ma.subgroups))
        claimed.update(own)
        items.append(SelectionItem(ma_id, own or None))
    unclaimed = [s for s in subs if s not in claimed]
    if unclaimed:
        raise SelectionError(f"subgroup id(s) {unclaimed} do not belong to any selected meta-analysis")
    return tuple(items)


def resolve_selection(snapshot: DatabaseSnapshot, selection: Selection) -> list[StudySet]:
    """Resolve a selection to analysis-ready study sets.

    Database studies are column-swapped when target_group is 'group2';
    overlay studies are taken as already entered in target orientation
    (the workbench swaps the target group before new data are typed in),
    so they are appended unchanged.
    """
    per_item: list[StudySet] = []
    for item in selection.items:
        ma = snapshot.meta_analysis(item.meta_analysis_id)
        by_id = {sg.id: sg for sg in ma.subgroups}
        if item.subgroup_ids is None:
            chosen = list(ma.subgroups)
        else:
            chosen = []
            for sid in item.subgroup_ids:
                if sid not in by_id:
                    raise SelectionError(f"subgroup id {sid!r} does not exist in meta-analysis {ma.id!r}")
                chosen.append(by_id[sid])
        studies = [s for sg in chosen for s in sg.studies]
        if selection.target_group == "group2":
            studies = [s.swapped() for s in studies]
            g1, g2 = ma.group2_label, ma.group1_label
        else:
            g1, g2 = ma.group1_label, ma.group2_label
        per_item.append(StudySet(ma.name, ma.outcome_kind, g1, g2, tuple(studies)))

    overlay = tuple(selection.overlay)
    if selection.pooled:
        kinds = {s.outcome_kind for s in per_item}
        if len(kinds) > 1:
            raise SelectionError("cannot pool meta-analyses with mixed outcome kinds")
        combined = tuple(s for ss in per_item for s in ss.studies) + overlay
        if not combined:
            raise SelectionError("selection resolves to an empty study set")
        first = per_item[0]
        name = " + ".join(ss.name for ss in per_item)
        return [StudySet(name, first.outcome_kind, first.group1_label, first.group2_label, combined, len(overlay))]

    out = []
    for ss in per_item:
        studies = ss.studies + overlay
        if not studies:
            raise SelectionError(f"selection for {ss.name!r} resolves to an empty study set")
        out.append(replace(ss, studies=studies, n_overlay=len(overlay)))
    return out


# ---------------------------------------------------------------------------
# CSV export / re-import
# ---------------------------------------------------------------------------

_DICH_HEADER = ["study", "events_1", "total_1", "events_2", "total_2"]
_CONT_HEADER = ["study", "mean_1", "sd_1", "n_1", "mean_2", "sd_2", "n_2"]
_EST_HEADER = ["study", "y", "se", "scale"]


def _num_str(x: float) -> str:
    return repr(int(x)) if isinstance(x, int) else repr(x)


def export_csv(study_sets: Sequence[StudySet]) -> str:
    """RFC-4180-style CSV for the given study sets.

    Rows are grouped into sections by column schema (raw dichotomous,
    raw continuous, precomputed); a blank line separates sections.  A
    homogeneous study set exports as a single header plus one row per study.
    """
    if not study_sets or not any(ss.studies for ss in study_sets):
        raise DataError("nothing to export: empty study sets")
    sections: dict[str, list[list[str]]] = {"dich": [], "cont": [], "est": []}
    for ss in study_sets:
        for s in ss.studies:
            if isinstance(s.data, DichotomousCounts):
                d = s.data
                sections["dich"].append([s.label, str(d.events1), str(d.total1), str(d.events2), str(d.total2)])
            elif isinstance(s.data, ContinuousSummaries):
                c = s.data
                sections["cont"].append(
                    [s.label, _num_str(c.mean1), _num_str(c.sd1), str(c.n1), _num_str(c.mean2), _num_str(c.sd2), str(c.n2)]
                )
            else:
                e = s.data
                sections["est"].append([s.label, _num_str(e.y), _num_str(e.se), e.scale.value])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    first = True
    for key, header in (("dich", _DICH_HEADER), ("cont", _CONT_HEADER), ("est", _EST_HEADER)):
        if not sections[key]:
            continue
        if not first:
            writer.writerow([])
        writer.writerow(header)
        writer.writerows(sections[key])
        first = False
    return buf.getvalue()


def parse_study_token(token: str, scale: EffectScale | None = None) -> Study:
    """Parse a user-added study literal.

    Grammar: ``LABEL:e1/n1,e2/n2`` for dichotomous counts, or
    ``LABEL:y±se`` (also accepted: ``y+-se``) for a precomputed estimate on
    the current analysis scale.
    """
    label, sep, body = token.rpartition(":")
    if not sep or not label.strip() or not body.strip():
        raise DataError(f"cannot parse study {token!r}; expected 'LABEL:e1/n1,e2/n2' or 'LABEL:y±se'")
    label = label.strip()
    body = body.strip()
    counts = re.fullmatch(r"(\d+)\s*/\s*(\d+)\s*,\s*(\d+)\s*/\s*(\d+)", body)
    if counts:
        e1, n1, e2, n2 = (int(g) for g in counts.groups())
        return Study(label, DichotomousCounts(e1, n1, e2, n2))
    est = re.fullmatch(r"([+-]?[0-9.eE+-]+?)\s*(?:±|\+-)\s*([0-9.eE+-]+)", body)
    if est:
        if scale is None:
            raise DataError(f"study {token!r} gives a precomputed estimate but no analysis scale is set")
        try:
            y, se = float(est.group(1)), float(est.group(2))
        except ValueError:
            raise DataError(f"non-numeric estimate in study {token!r}") from None
        return Study(label, PrecomputedEstimate(y, se, scale))
    raise DataError(f"cannot parse study data {body!r}; expected 'e1/n1,e2/n2' or 'y±se'")


def studies_from_csv(text: str) -> list[Study]:
    """Inverse of export_csv: parse exported rows back into studies."""
    studies: list[Study] = []
    header: list[str] | None = None
    for row in csv.reader(io.StringIO(text)):
        if not row or all(not cell for cell in row):
            header = None
            continue
        if header is None:
            header = row
            if header not in (_DICH_HEADER, _CONT_HEADER, _EST_HEADER):
                raise DataError(f"unrecognized CSV header: {header}")
            continue
        if len(row) != len(header):
            raise DataError(f"CSV row has {len(row)} fields, header has {len(header)}: {row}")
        label = row[0]
        try:
            if header == _DICH_HEADER:
                data: StudyData = DichotomousCounts(int(row[1]), int(row[2]), int(row[3]), int(row[4]))
            elif header == _CONT_HEADER:
                data = ContinuousSummaries(float(row[1]), float(row[2]), int(row[3]), float(row[4]), float(row[5]), int(row[6]))
            else:
                data = PrecomputedEstimate(float(row[1]), float(row[2]), EffectScale.from_token(row[3]))
        except ValueError as e:
            raise DataError(f"CSV row for {label!r}: {e}") from None
        studies.append(Study(label, data))
    return studies
