"""Frequentist pooling: inverse-variance and Mantel-Haenszel fixed effect,
DerSimonian-Laird and REML random effects, heterogeneity statistics, and
Egger's funnel-asymmetry regression."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Literal, Sequence

import numpy as np
from scipy import optimize, stats

from .dataset import DichotomousCounts, EffectScale
from .effectsize import EffectEstimate, Exclusion
from .errors import ConvergenceError, DataError

Z_95 = 1.959963985  # 97.5% normal quantile, pinned


class PoolingMethod(Enum):
    FIXED_IV = "fixed"
    FIXED_MH = "mh"
    RANDOM_DL = "dl"
    RANDOM_REML = "reml"

    @property
    def is_random(self) -> bool:
        return self in (PoolingMethod.RANDOM_DL, PoolingMethod.RANDOM_REML)


@dataclass(frozen=True)
class HeterogeneityStats:
    q: float
    df: int
    p_q: float
    tau2: float
    i2: float  # percent in [0, 100]
    h2: float


@dataclass(frozen=True)
class PooledResult:
    method: PoolingMethod
    y: float
    se: float
    ci_low: float
    ci_high: float
    z: float
    p: float
    k: int
    weights_pct: tuple[float, ...]


@dataclass(frozen=True)
class TransformedResult:
    """The pooled result mapped to its natural scale (exp for log scales)."""

    estimate: float
    ci_low: float
    ci_high: float
    transformed: bool


@dataclass(frozen=True)
class EggerResult:
    intercept: float
    se_intercept: float
    t: float
    p: float
    df: int


def _wald(method: PoolingMethod, y: float, se: float, k: int, weights: Sequence[float]) -> PooledResult:
    z = y / se
    p = 2.0 * stats.norm.sf(abs(z))
    total = float(sum(weights))
    pct = tuple(100.0 * w / total for w in weights)
    return PooledResult(method, y, se, y - Z_95 * se, y + Z_95 * se, z, float(p), k, pct)


def _pool_iv(estimates: Sequence[EffectEstimate], tau2: float, method: PoolingMethod) -> PooledResult:
    if not estimates:
        raise DataError("cannot pool an empty list of estimates")
    w = [1.0 / (e.se * e.se + tau2) for e in estimates]
    sw = sum(w)
    y = sum(wi * e.y for wi, e in zip(w, estimates)) / sw
    se = 1.0 / math.sqrt(sw)
    return _wald(method, y, se, len(estimates), w)


def fixed_effect_iv(estimates: Sequence[EffectEstimate]) -> PooledResult:
    """Inverse-variance fixed effect: weights 1/se^2."""
    return _pool_iv(estimates, 0.0, PoolingMethod.FIXED_IV)


def random_effects(
    estimates: Sequence[EffectEstimate],
    tau2: float,
    method: PoolingMethod = PoolingMethod.RANDOM_DL,
) -> PooledResult:
    """Random-effects pooling with weights 1/(se^2 + tau^2)."""
    if tau2 < 0:
        raise DataError("tau2 must be non-negative")
    return _pool_iv(estimates, tau2, method)


def heterogeneity(estimates: Sequence[EffectEstimate]) -> HeterogeneityStats:
    """Cochran's Q, DerSimonian-Laird tau^2, I^2 and H^2.

    For a single study the degenerate stats (Q=0, df=0, p=1, tau2=0) are
    returned rather than raising.
    """
    if not estimates:
        raise DataError("cannot compute heterogeneity of an empty list")
    k = len(estimates)
    if k == 1:
        return HeterogeneityStats(0.0, 0, 1.0, 0.0, 0.0, 1.0)
    w = np.array([e.weight_fe for e in estimates])
    y = np.array([e.y for e in estimates])
    y_fe = float(np.sum(w * y) / np.sum(w))
    q = float(np.sum(w * (y - y_fe) ** 2))
    df = k - 1
    p_q = float(stats.chi2.sf(q, df))
    c = float(np.sum(w) - np.sum(w**2) / np.sum(w))
    tau2 = max(0.0, (q - df) / c) if c > 0 else 0.0
    i2 = max(0.0, (q - df) / q) * 100.0 if q > 0 else 0.0
    h2 = max(1.0, q / df)
    return HeterogeneityStats(q, df, p_q, tau2, i2, h2)


def dl_tau2(estimates: Sequence[EffectEstimate]) -> float:
    return heterogeneity(estimates).tau2


def reml_tau2(estimates: Sequence[EffectEstimate], tol: float = 1e-8, max_iter: int = 500) -> float:
    """Restricted maximum-likelihood tau^2 by bounded scalar optimization.

    Maximizes l_R(t) = -1/2 sum ln(v_i + t) - 1/2 ln sum 1/(v_i + t)
                       - 1/2 sum (y_i - mu(t))^2 / (v_i + t)
    over t in [0, t_max].
    """
    if len(estimates) < 2:
        raise DataError("REML needs at least two estimates")
    y = np.array([e.y for e in estimates])
    v = np.array([e.se * e.se for e in estimates])

    def neg_restricted_ll(tau2: float) -> float:
        tau2 = max(0.0, tau2)
        w = 1.0 / (v + tau2)
        mu = np.sum(w * y) / np.sum(w)
        return 0.5 * (np.sum(np.log(v + tau2)) + np.log(np.sum(w)) + np.sum(w * (y - mu) ** 2))

    tau2_max = max(10.0 * float(np.var(y, ddof=1)), 100.0 * float(np.max(v)), 10.0)
    result = optimize.minimize_scalar(
        neg_restricted_ll,
        bounds=(0.0, tau2_max),
        method="bounded",
        options={"xatol": tol * 1e-2, "maxiter": max_iter},
    )
    if not result.success:
        raise ConvergenceError(f"REML did not converge within {max_iter} iterations", last_iterate=float(result.x))
    tau2 = float(result.x)
    # The bounded minimizer never evaluates the endpoints exactly; snap to 0
    # when the boundary is at least as good as the interior iterate.
    if neg_restricted_ll(0.0) <= result.fun:
        return 0.0
    return tau2


MhScale = Literal["OR", "RR", "RD"]


def mantel_haenszel(
    tables: Sequence[DichotomousCounts], scale: MhScale
) -> tuple[PooledResult, list[Exclusion]]:
    """Mantel-Haenszel fixed-effect pooling straight from 2x2 tables.

    Ratio scales (OR, RR) report y/se on the log scale with the
    Robins-Breslow-Greenland (OR) and Greenland-Robins (RR) variances; RD
    uses the Greenland-Robins variance.  Single-zero tables enter the sums
    uncorrected; double-zero / double-total tables are dropped from ratio
    scales with an exclusion record.
    """
    if scale not in ("OR", "RR", "RD"):
        raise DataError(f"unknown Mantel-Haenszel scale {scale!r}")
    if not tables:
        raise DataError("cannot pool an empty list of tables")
    exclusions: list[Exclusion] = []
    kept: list[DichotomousCounts] = []
    for i, t in enumerate(tables):
        if scale != "RD":
            a, c = t.events1, t.events2
            b, d = t.total1 - t.events1, t.total2 - t.events2
            if a == 0 and c == 0:
                exclusions.append(Exclusion(f"table {i + 1}", "no events in either group"))
                continue
            if b == 0 and d == 0:
                exclusions.append(Exclusion(f"table {i + 1}", "all participants had events in both groups"))
                continue
        kept.append(t)
    if not kept:
        raise DataError("no estimable tables for Mantel-Haenszel pooling")

    a = np.array([t.events1 for t in kept], dtype=float)
    n1 = np.array([t.total1 for t in kept], dtype=float)
    c = np.array([t.events2 for t in kept], dtype=float)
    n2 = np.array([t.total2 for t in kept], dtype=float)
    b, d, N = n1 - a, n2 - c, n1 + n2
    k = len(kept)

    if scale == "RR":
        R = float(np.sum(a * n2 / N))
        S = float(np.sum(c * n1 / N))
        if R == 0.0 or S == 0.0:
            raise DataError("Mantel-Haenszel risk ratio is degenerate (zero events in one group overall)")
        y = math.log(R / S)
        P = float(np.sum((n1 * n2 * (a + c) - a * c * N) / N**2))
        se = math.sqrt(P / (R * S))
        weights = c * n1 / N
    elif scale == "OR":
        R_i, S_i = a * d / N, b * c / N
        R, S = float(np.sum(R_i)), float(np.sum(S_i))
        if R == 0.0 or S == 0.0:
            raise DataError("Mantel-Haenszel odds ratio is degenerate (a zero margin overall)")
        y = math.log(R / S)
        P_i, Q_i = (a + d) / N, (b + c) / N
        var = (
            float(np.sum(P_i * R_i)) / (2 * R * R)
            + float(np.sum(P_i * S_i + Q_i * R_i)) / (2 * R * S)
            + float(np.sum(Q_i * S_i)) / (2 * S * S)
        )
        se = math.sqrt(var)
        weights = S_i
    else:
        W_i = n1 * n2 / N
        W = float(np.sum(W_i))
        y = float(np.sum(W_i * (a / n1 - c / n2)) / W)
        J = float(np.sum((a * b * n2**3 + c * d * n1**3) / (n1 * n2 * N**2)))
        se = math.sqrt(J / (W * W))
        if se == 0.0:
            raise DataError("Mantel-Haenszel risk difference has zero variance")
        weights = W_i

    return _wald(PoolingMethod.FIXED_MH, y, se, k, [float(w) for w in weights]), exclusions


def egger_test(estimates: Sequence[EffectEstimate]) -> EggerResult:
    """Funnel-asymmetry regression of y_i/se_i on 1/se_i.

    The intercept of the precision regression measures asymmetry; its
    two-sided t test uses k - 2 degrees of freedom.
    """
    k = len(estimates)
    if k < 3:
        raise DataError(f"Egger's test needs at least 3 studies, got {k}")
    x = np.array([1.0 / e.se for e in estimates])
    z = np.array([e.y / e.se for e in estimates])
    x_bar, z_bar = float(np.mean(x)), float(np.mean(z))
    sxx = float(np.sum((x - x_bar) ** 2))
    if sxx == 0.0:
        raise DataError("Egger's test is undefined when all standard errors are equal")
    slope = float(np.sum((x - x_bar) * (z - z_bar)) / sxx)
    intercept = z_bar - slope * x_bar
    resid = z - intercept - slope * x
    df = k - 2
    s2 = float(np.sum(resid**2)) / df
    se_b0 = math.sqrt(s2 * (1.0 / k + x_bar * x_bar / sxx))
    t = intercept / se_b0
    p = 2.0 * float(stats.t.sf(abs(t), df))
    return EggerResult(intercept, se_b0, t, p, df)


def transform(result: PooledResult, scale: EffectScale) -> TransformedResult:
    """Map a pooled result to its natural scale: exp for log scales, identity otherwise."""
    if scale.is_log:
        return TransformedResult(math.exp(result.y), math.exp(result.ci_low), math.exp(result.ci_high), True)
    return TransformedResult(result.y, result.ci_low, result.ci_high, False)
