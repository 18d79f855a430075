"""Review filtering: keyword/topic postings and title substring search."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

from .dataset import DatabaseSnapshot
from .errors import DataError

FilterMode = Literal["topics", "keywords", "title"]

FILTER_MODES: tuple[str, ...] = ("topics", "keywords", "title")


@dataclass(frozen=True)
class SearchIndex:
    """Immutable lookup structures over a snapshot.

    Postings map lowercased labels to sorted review-id tuples; titles are
    kept lowercased for substring matching.
    """

    keywords: dict[str, tuple[str, ...]]
    topics: dict[str, tuple[str, ...]]
    titles: dict[str, str]  # review id -> lowercased title


def build_index(snapshot: DatabaseSnapshot) -> SearchIndex:
    keywords: dict[str, set[str]] = {}
    topics: dict[str, set[str]] = {}
    titles: dict[str, str] = {}
    for review in snapshot.reviews:
        titles[review.id] = review.title.lower()
        for kw in review.keywords:
            keywords.setdefault(kw.lower(), set()).add(review.id)
        for tp in review.topics:
            topics.setdefault(tp.lower(), set()).add(review.id)
    freeze = lambda postings: {label: tuple(sorted(ids)) for label, ids in postings.items()}
    return SearchIndex(freeze(keywords), freeze(topics), titles)


def filter_reviews(index: SearchIndex, mode: str, query: str | Sequence[str]) -> list[str]:
    """Review ids matching the query, sorted by id.

    'topics' and 'keywords' take a label or list of labels and return the
    union over exact (case-insensitive) label matches; 'title' takes a
    single string matched as a case-insensitive substring.  Unknown labels
    simply contribute nothing.
    """
    if mode not in FILTER_MODES:
        raise DataError(f"unknown filter mode {mode!r} (expected one of: {', '.join(FILTER_MODES)})")
    if mode == "title":
        if not isinstance(query, str):
            raise DataError("title mode takes a single query string")
        needle = query.lower()
        return sorted(rid for rid, title in index.titles.items() if needle in title)
    labels = [query] if isinstance(query, str) else list(query)
    postings = index.keywords if mode == "keywords" else index.topics
    hits: set[str] = set()
    for label in labels:
        hits.update(postings.get(label.lower(), ()))
    return sorted(hits)


@dataclass(frozen=True)
class MetaAnalysisListing:
    review_id: str
    review_title: str
    review_year: int
    meta_analysis_id: str
    name: str
    outcome_kind: str
    group1_label: str
    group2_label: str
    subgroups: tuple[tuple[str, str, int], ...]  # (id, name, n_studies)


def list_meta_analyses(snapshot: DatabaseSnapshot, review_ids: Iterable[str]) -> list[MetaAnalysisListing]:
    """Enumerate the meta-analyses of the given reviews, in (review id, meta-analysis id) order."""
    rows: list[MetaAnalysisListing] = []
    for rid in sorted(set(review_ids)):
        review = snapshot.review(rid)  # raises DataError naming an unknown id
        for ma in sorted(review.meta_analyses, key=lambda m: m.id):
            rows.append(
                MetaAnalysisListing(
                    review.id,
                    review.title,
                    review.year,
                    ma.id,
                    ma.name,
                    ma.outcome_kind,
                    ma.group1_label,
                    ma.group2_label,
                    tuple((sg.id, sg.name, len(sg.studies)) for sg in ma.subgroups),
                )
            )
    return rows
