"""Bundled demo corpus and a seeded synthetic corpus generator.

The demo corpus mirrors the structure of a Cochrane-style review on
anthelmintic treatment with an age-split seizure-recurrence meta-analysis.
All counts are synthetic: they exercise the pipelines and the UI, they do
not reproduce any published trial.
"""

from __future__ import annotations

import random

from .dataset import (
    ContinuousSummaries,
    DatabaseSnapshot,
    DichotomousCounts,
    MetaAnalysis,
    PrecomputedEstimate,
    Review,
    Study,
    Subgroup,
    EffectScale,
)


def _dich(label: str, e1: int, n1: int, e2: int, n2: int) -> Study:
    return Study(label, DichotomousCounts(e1, n1, e2, n2))


def _cont(label: str, m1, sd1, n1, m2, sd2, n2) -> Study:
    return Study(label, ContinuousSummaries(m1, sd1, n1, m2, sd2, n2))


def demo_snapshot() -> DatabaseSnapshot:
    neuro = Review(
        id="r-neuro",
        title="Anthelmintics for people with neurocysticercosis",
        year=2021,
        topics=("Infectious disease", "Neurology"),
        keywords=("Albendazole", "Neurocysticercosis", "Epilepsy"),
        meta_analyses=(
            MetaAnalysis(
                id="r-neuro:ma1",
                review_id="r-neuro",
                name="Seizure recurrence subgroup analysis: age of participants",
                outcome_kind="dich",
                group1_label="Placebo",
                group2_label="Albendazole",
                subgroups=(
                    Subgroup(
                        "r-neuro:ma1:adults",
                        "Adults (16 years old or older)",
                        (_dich("Duran 2001", 7, 35, 5, 33), _dich("Klein 2011", 8, 40, 7, 38)),
                    ),
                    Subgroup(
                        "r-neuro:ma1:children",
                        "Children (under 16 years old)",
                        (
                            _dich("Carter 1999", 9, 30, 3, 28),
                            _dich("Ortiz 2004", 11, 44, 5, 45),
                            _dich("Rao 2008", 5, 21, 2, 19),
                            _dich("Mehta 2015", 10, 48, 6, 52),
                        ),
                    ),
                ),
            ),
            MetaAnalysis(
                id="r-neuro:ma2",
                review_id="r-neuro",
                name="Radiological clearance of cysts",
                outcome_kind="dich",
                group1_label="Placebo",
                group2_label="Albendazole",
                subgroups=(
                    Subgroup(
                        "r-neuro:ma2:all",
                        "All studies",
                        (
                            _dich("Carter 1999", 12, 30, 19, 28),
                            _dich("Rao 2008", 8, 21, 13, 19),
                            _dich("Singh 2016", 14, 40, 22, 41),
                        ),
                    ),
                ),
            ),
        ),
    )
    statins = Review(
        id="r-statins",
        title="Statins for the primary prevention of cardiovascular disease",
        year=2013,
        topics=("Cardiology", "Prevention"),
        keywords=("Statins", "Cardiovascular disease"),
        meta_analyses=(
            MetaAnalysis(
                id="r-statins:ma1",
                review_id="r-statins",
                name="Major cardiovascular events",
                outcome_kind="dich",
                group1_label="Statin",
                group2_label="Placebo",
                subgroups=(
                    Subgroup(
                        "r-statins:ma1:all",
                        "All studies",
                        (
                            _dich("Nakamura 2006", 33, 3866, 41, 3966),
                            _dich("Ford 2007", 56, 3302, 74, 3293),
                            _dich("Ridker 2008", 142, 8901, 251, 8901),
                        ),
                    ),
                ),
            ),
        ),
    )
    cbt = Review(
        id="r-cbt",
        title="Cognitive behavioural therapy for chronic pain in adults",
        year=2018,
        topics=("Psychology", "Prevention"),
        keywords=("CBT", "Chronic pain"),
        meta_analyses=(
            MetaAnalysis(
                id="r-cbt:ma1",
                review_id="r-cbt",
                name="Pain intensity at end of treatment",
                outcome_kind="cont",
                group1_label="CBT",
                group2_label="Waiting list",
                subgroups=(
                    Subgroup(
                        "r-cbt:ma1:all",
                        "All studies",
                        (
                            _cont("Alvarez 2009", 4.1, 1.9, 52, 5.0, 2.1, 49),
                            _cont("Berg 2012", 3.8, 2.2, 60, 4.4, 2.0, 61),
                            _cont("Chen 2016", 4.5, 1.8, 44, 4.9, 2.3, 47),
                        ),
                    ),
                ),
            ),
        ),
    )
    return DatabaseSnapshot((neuro, statins, cbt))


_TOPIC_POOL = (
    "Cardiology", "Neurology", "Oncology", "Psychiatry", "Paediatrics",
    "Infectious disease", "Endocrinology", "Respiratory", "Prevention",
)
_KEYWORD_POOL = (
    "Aspirin", "Albendazole", "Statins", "Antibiotics", "Exercise", "Vaccination",
    "Screening", "Vitamin D", "Beta blockers", "Surgery", "Physiotherapy",
)
_CONDITIONS = (
    "stroke", "epilepsy", "asthma", "depression", "hypertension", "malaria",
    "diabetes", "migraine", "osteoarthritis", "pneumonia",
)
_SURNAMES = (
    "Smith", "Garcia", "Chen", "Patel", "Okafor", "Novak", "Silva", "Kim",
    "Haddad", "Ivanov", "Mori", "Larsen",
)


def synthetic_snapshot(n_reviews: int = 100, seed: int = 20210131) -> DatabaseSnapshot:
    """Deterministic synthetic corpus for round-trip and scale testing."""
    rng = random.Random(seed)
    reviews = []
    for i in range(n_reviews):
        rid = f"r{i:03d}"
        condition = rng.choice(_CONDITIONS)
        keyword = rng.choice(_KEYWORD_POOL)
        mas = []
        for j in range(rng.randint(1, 3)):
            kind = rng.choice(("dich", "dich", "cont"))
            subgroups = []
            for g in range(rng.randint(1, 2)):
                studies = []
                for s in range(rng.randint(2, 6)):
                    label = f"{rng.choice(_SURNAMES)} {rng.randint(1990, 2020)} ({s})"
                    if kind == "dich":
                        n1, n2 = rng.randint(10, 300), rng.randint(10, 300)
                        e1 = rng.randint(0, n1 // 2)
                        e2 = rng.randint(0, n2 // 2)
                        studies.append(_dich(label, e1, n1, e2, n2))
                    elif rng.random() < 0.9:
                        studies.append(
                            _cont(
                                label,
                                round(rng.uniform(-2, 8), 2),
                                round(rng.uniform(0.5, 3.0), 2),
                                rng.randint(10, 200),
                                round(rng.uniform(-2, 8), 2),
                                round(rng.uniform(0.5, 3.0), 2),
                                rng.randint(10, 200),
                            )
                        )
                    else:
                        studies.append(
                            Study(
                                label,
                                PrecomputedEstimate(round(rng.uniform(-1, 1), 3), round(rng.uniform(0.05, 0.8), 3), EffectScale.HEDGES_G),
                            )
                        )
                subgroups.append(Subgroup(f"{rid}:ma{j}:sg{g}", f"Subgroup {g + 1}", tuple(studies)))
            mas.append(
                MetaAnalysis(
                    id=f"{rid}:ma{j}",
                    review_id=rid,
                    name=f"Outcome {j + 1} for {condition}",
                    outcome_kind=kind,
                    group1_label="Treatment",
                    group2_label="Control",
                    subgroups=tuple(subgroups),
                )
            )
        reviews.append(
            Review(
                id=rid,
                title=f"{keyword} for {condition}: a systematic review",
                year=rng.randint(1995, 2020),
                topics=tuple(sorted(rng.sample(_TOPIC_POOL, rng.randint(1, 3)))),
                keywords=(keyword, rng.choice(_KEYWORD_POOL)),
                meta_analyses=tuple(mas),
            )
        )
    return DatabaseSnapshot(tuple(reviews))
