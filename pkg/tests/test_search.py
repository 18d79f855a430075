import pytest
from hypothesis import given
from hypothesis import strategies as st

from trialbench.dataset import DatabaseSnapshot
from trialbench.demo import synthetic_snapshot
from trialbench.errors import DataError
from trialbench.search import build_index, filter_reviews, list_meta_analyses


@pytest.fixture(scope="module")
def index(snapshot):
    return build_index(snapshot)


def test_keyword_is_case_insensitive_exact(snapshot, index):
    assert filter_reviews(index, "keywords", ["albendazole"]) == ["r-neuro"]
    assert filter_reviews(index, "keywords", ["ALBENDAZOLE"]) == ["r-neuro"]
    # substring of a keyword does not match
    assert filter_reviews(index, "keywords", ["albenda"]) == []


def test_empty_snapshot_empty_index():
    index = build_index(DatabaseSnapshot(()))
    assert index.keywords == {} and index.topics == {} and index.titles == {}


def test_shared_topic_posting_sorted(index):
    assert filter_reviews(index, "topics", ["prevention"]) == ["r-cbt", "r-statins"]


def test_title_substring_case_insensitive(index):
    assert filter_reviews(index, "title", "NEUROCYSTICERCOSIS") == ["r-neuro"]
    assert filter_reviews(index, "title", "") == ["r-cbt", "r-neuro", "r-statins"]


def test_unknown_label_is_empty_not_error(index):
    assert filter_reviews(index, "keywords", ["zzz-unknown"]) == []


def test_unknown_mode_rejected(index):
    with pytest.raises(DataError, match="flavor"):
        filter_reviews(index, "flavor", "x")


def test_listing_order_and_contents(snapshot):
    rows = list_meta_analyses(snapshot, ["r-neuro"])
    assert [r.meta_analysis_id for r in rows] == ["r-neuro:ma1", "r-neuro:ma2"]
    first = rows[0]
    assert first.name == "Seizure recurrence subgroup analysis: age of participants"
    assert [name for _, name, _ in first.subgroups] == [
        "Adults (16 years old or older)",
        "Children (under 16 years old)",
    ]
    assert (first.group1_label, first.group2_label) == ("Placebo", "Albendazole")


def test_listing_unknown_id_named(snapshot):
    with pytest.raises(DataError, match="'r-missing'"):
        list_meta_analyses(snapshot, ["r-missing"])


def test_listing_empty_input(snapshot):
    assert list_meta_analyses(snapshot, []) == []


BIG = synthetic_snapshot(40, seed=7)
BIG_INDEX = build_index(BIG)
ALL_KEYWORDS = sorted(BIG_INDEX.keywords)


@given(
    l1=st.lists(st.sampled_from(ALL_KEYWORDS), max_size=4),
    l2=st.lists(st.sampled_from(ALL_KEYWORDS), max_size=4),
)
def test_union_property(l1, l2):
    both = filter_reviews(BIG_INDEX, "keywords", l1 + l2)
    separate = sorted(set(filter_reviews(BIG_INDEX, "keywords", l1)) | set(filter_reviews(BIG_INDEX, "keywords", l2)))
    assert both == separate


@given(labels=st.lists(st.sampled_from(ALL_KEYWORDS), max_size=4))
def test_results_exist_and_deterministic(labels):
    ids = filter_reviews(BIG_INDEX, "keywords", labels)
    assert ids == filter_reviews(BIG_INDEX, "keywords", labels)
    for rid in ids:
        BIG.review(rid)
