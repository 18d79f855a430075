"""Effect-size computation: raw study data -> (estimate, standard error).

Dichotomous notation for a 2x2 table: a = events1, b = total1 - events1,
c = events2, d = total2 - events2, N = n1 + n2, M = a + c.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .dataset import (
    ContinuousSummaries,
    DichotomousCounts,
    EffectScale,
    PrecomputedEstimate,
    Study,
    StudySet,
)
from .errors import DataError, NonEstimableError

__all__ = [
    "EffectScale",
    "EffectEstimate",
    "Exclusion",
    "log_odds_ratio",
    "peto_log_odds_ratio",
    "log_risk_ratio",
    "risk_difference",
    "mean_difference",
    "hedges_g",
    "compute_effects",
]


@dataclass(frozen=True)
class EffectEstimate:
    """A study reduced to a point estimate and standard error on a scale."""

    y: float
    se: float
    scale: EffectScale
    label: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.y) and math.isfinite(self.se) and self.se > 0):
            raise DataError(f"invalid effect estimate for {self.label!r}: y={self.y}, se={self.se}")

    @property
    def weight_fe(self) -> float:
        """Fixed-effect (inverse variance) weight 1/se^2."""
        return 1.0 / (self.se * self.se)


@dataclass(frozen=True)
class Exclusion:
    """A study dropped from an analysis, with the reason surfaced."""

    label: str
    reason: str


def _cells(counts: DichotomousCounts) -> tuple[float, float, float, float]:
    a = counts.events1
    b = counts.total1 - counts.events1
    c = counts.events2
    d = counts.total2 - counts.events2
    return float(a), float(b), float(c), float(d)


def _corrected_cells(counts: DichotomousCounts) -> tuple[float, float, float, float]:
    """Add 0.5 to all four cells iff any cell is zero (ratio scales only)."""
    a, b, c, d = _cells(counts)
    if min(a, b, c, d) == 0.0:
        return a + 0.5, b + 0.5, c + 0.5, d + 0.5
    return a, b, c, d


def _check_ratio_estimable(counts: DichotomousCounts) -> None:
    a, b, c, d = _cells(counts)
    if a == 0 and c == 0:
        raise NonEstimableError("no events in either group")
    if b == 0 and d == 0:
        raise NonEstimableError("all participants had events in both groups")


def log_odds_ratio(counts: DichotomousCounts, label: str = "") -> EffectEstimate:
    """ln(ad/bc) with se = sqrt(1/a + 1/b + 1/c + 1/d) on the (corrected) table."""
    _check_ratio_estimable(counts)
    a, b, c, d = _corrected_cells(counts)
    y = math.log((a * d) / (b * c))
    se = math.sqrt(1 / a + 1 / b + 1 / c + 1 / d)
    return EffectEstimate(y, se, EffectScale.LOG_ODDS_RATIO, label)


def peto_log_odds_ratio(counts: DichotomousCounts, label: str = "") -> EffectEstimate:
    """One-step (O - E)/V estimator; no continuity correction.

    E = n1*M/N, V = n1*n2*M*(N-M) / (N^2*(N-1)), y = (a - E)/V, se = 1/sqrt(V).
    """
    a, _, c, _ = _cells(counts)
    n1, n2 = counts.total1, counts.total2
    N = n1 + n2
    M = a + c
    if M == 0:
        raise NonEstimableError("no events in either group")
    if M == N:
        raise NonEstimableError("all participants had events in both groups")
    E = n1 * M / N
    V = n1 * n2 * M * (N - M) / (N * N * (N - 1))
    return EffectEstimate((a - E) / V, 1.0 / math.sqrt(V), EffectScale.PETO_LOG_ODDS_RATIO, label)


def log_risk_ratio(counts: DichotomousCounts, label: str = "") -> EffectEstimate:
    """ln((a/n1)/(c/n2)) with se = sqrt(1/a - 1/n1 + 1/c - 1/n2)."""
    _check_ratio_estimable(counts)
    a, b, c, d = _corrected_cells(counts)
    n1, n2 = a + b, c + d
    y = math.log((a / n1) / (c / n2))
    se = math.sqrt(1 / a - 1 / n1 + 1 / c - 1 / n2)
    return EffectEstimate(y, se, EffectScale.LOG_RISK_RATIO, label)


def risk_difference(counts: DichotomousCounts, label: str = "") -> EffectEstimate:
    """p1 - p2; when the binomial variance degenerates to zero the variance
    (only) is recomputed from the continuity-corrected table."""
    a, b, c, d = _cells(counts)
    n1, n2 = counts.total1, counts.total2
    p1, p2 = a / n1, c / n2
    y = p1 - p2
    var = p1 * (1 - p1) / n1 + p2 * (1 - p2) / n2
    if var == 0.0:
        ca, cb, cc, cd = a + 0.5, b + 0.5, c + 0.5, d + 0.5
        m1, m2 = ca + cb, cc + cd
        q1, q2 = ca / m1, cc / m2
        var = q1 * (1 - q1) / m1 + q2 * (1 - q2) / m2
    return EffectEstimate(y, math.sqrt(var), EffectScale.RISK_DIFFERENCE, label)


def mean_difference(cont: ContinuousSummaries, label: str = "") -> EffectEstimate:
    """m1 - m2 with se = sqrt(sd1^2/n1 + sd2^2/n2)."""
    se2 = cont.sd1 ** 2 / cont.n1 + cont.sd2 ** 2 / cont.n2
    if se2 == 0.0:
        raise NonEstimableError("zero variance in both groups")
    return EffectEstimate(cont.mean1 - cont.mean2, math.sqrt(se2), EffectScale.MEAN_DIFFERENCE, label)


def hedges_g(cont: ContinuousSummaries, label: str = "") -> EffectEstimate:
    """Bias-corrected standardized mean difference.

    d = (m1 - m2)/s_pooled, J = 1 - 3/(4*(n1+n2-2) - 1), y = J*d,
    se = sqrt(J^2 * ((n1+n2)/(n1*n2) + d^2/(2*(n1+n2-2)))).
    """
    n1, n2 = cont.n1, cont.n2
    df = n1 + n2 - 2
    s2 = ((n1 - 1) * cont.sd1 ** 2 + (n2 - 1) * cont.sd2 ** 2) / df
    if s2 == 0.0:
        raise NonEstimableError("pooled standard deviation is zero")
    d = (cont.mean1 - cont.mean2) / math.sqrt(s2)
    J = 1.0 - 3.0 / (4.0 * df - 1.0)
    y = J * d
    se = math.sqrt(J * J * ((n1 + n2) / (n1 * n2) + d * d / (2.0 * df)))
    return EffectEstimate(y, se, EffectScale.HEDGES_G, label)


_DICH_FUNCS = {
    EffectScale.LOG_ODDS_RATIO: log_odds_ratio,
    EffectScale.PETO_LOG_ODDS_RATIO: peto_log_odds_ratio,
    EffectScale.LOG_RISK_RATIO: log_risk_ratio,
    EffectScale.RISK_DIFFERENCE: risk_difference,
}

_CONT_FUNCS = {
    EffectScale.MEAN_DIFFERENCE: mean_difference,
    EffectScale.HEDGES_G: hedges_g,
}


def study_effect(study: Study, scale: EffectScale) -> EffectEstimate:
    """Effect estimate for a single study on the requested scale."""
    data = study.data
    if isinstance(data, PrecomputedEstimate):
        if data.scale != scale:
            raise DataError(
                f"study {study.label!r} carries a precomputed estimate on scale "
                f"{data.scale.value!r}, not the requested {scale.value!r}"
            )
        return EffectEstimate(data.y, data.se, scale, study.label)
    if isinstance(data, DichotomousCounts):
        if scale not in _DICH_FUNCS:
            raise DataError(f"scale {scale.value!r} does not apply to dichotomous counts")
        return _DICH_FUNCS[scale](data, study.label)
    if scale not in _CONT_FUNCS:
        raise DataError(f"scale {scale.value!r} does not apply to continuous summaries")
    return _CONT_FUNCS[scale](data, study.label)


def compute_effects(
    study_set: StudySet, scale: EffectScale
) -> tuple[list[EffectEstimate], list[Exclusion]]:
    """Per-study estimates for a study set, with non-estimable studies excluded.

    Raises DataError on a scale/outcome-kind mismatch or when a precomputed
    estimate declares a different scale; non-estimable raw tables become
    Exclusion records instead of errors.
    """
    if study_set.outcome_kind == "dich" and not scale.is_dichotomous:
        raise DataError(f"scale {scale.value!r} does not apply to dichotomous outcomes")
    if study_set.outcome_kind == "cont" and scale.is_dichotomous:
        raise DataError(f"scale {scale.value!r} does not apply to continuous outcomes")
    estimates: list[EffectEstimate] = []
    exclusions: list[Exclusion] = []
    for study in study_set.studies:
        try:
            estimates.append(study_effect(study, scale))
        except NonEstimableError as e:
            exclusions.append(Exclusion(study.label, e.reason))
    return estimates, exclusions
