import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trialbench.classical import (
    PoolingMethod,
    Z_95,
    egger_test,
    fixed_effect_iv,
    heterogeneity,
    mantel_haenszel,
    random_effects,
    reml_tau2,
    transform,
)
from trialbench.dataset import DichotomousCounts, EffectScale
from trialbench.effectsize import EffectEstimate, log_risk_ratio
from trialbench.errors import DataError


def E(y, se):
    return EffectEstimate(y, se, EffectScale.LOG_RISK_RATIO)


class TestFixedIV:
    def test_singleton_identity(self):
        r = fixed_effect_iv([E(0.5, 0.2)])
        assert (r.y, r.se, r.k) == (0.5, 0.2, 1)
        assert r.ci_low == pytest.approx(0.5 - Z_95 * 0.2)

    def test_two_estimates(self):
        r = fixed_effect_iv([E(0.0, 1.0), E(2.0, 1.0)])
        assert r.y == 1.0
        assert r.se == pytest.approx(1 / math.sqrt(2))
        assert r.z == pytest.approx(math.sqrt(2))

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            fixed_effect_iv([])

    def test_weights_sum_100(self):
        r = fixed_effect_iv([E(0.1, 0.3), E(-0.2, 0.7), E(0.4, 1.1)])
        assert sum(r.weights_pct) == pytest.approx(100.0, abs=1e-9)


@settings(max_examples=200)
@given(
    data=st.lists(
        st.tuples(st.floats(-3, 3, allow_nan=False), st.floats(0.05, 3)), min_size=1, max_size=12
    )
)
def test_pooled_is_convex_and_permutation_invariant(data):
    ests = [E(y, se) for y, se in data]
    r = fixed_effect_iv(ests)
    ys = [e.y for e in ests]
    assert min(ys) - 1e-9 <= r.y <= max(ys) + 1e-9
    shuffled = ests[::-1]
    assert fixed_effect_iv(shuffled).y == pytest.approx(r.y, abs=1e-12)
    assert r.p == pytest.approx(2 * (1 - 0.5 * (1 + math.erf(abs(r.z) / math.sqrt(2)))), abs=1e-12)
    assert (r.z >= 0) == (r.y >= 0)
    assert 0 <= r.p <= 1


class TestMantelHaenszel:
    def test_single_table_reduction_rr(self):
        t = DichotomousCounts(4, 20, 7, 25)
        pooled, _ = mantel_haenszel([t], "RR")
        assert pooled.y == pytest.approx(math.log((4 / 20) / (7 / 25)), abs=1e-14)
        # Greenland-Robins variance reduces to the per-study logRR variance
        assert pooled.se == pytest.approx(math.sqrt(1 / 4 - 1 / 20 + 1 / 7 - 1 / 25), abs=1e-12)

    def test_single_table_reduction_or(self):
        t = DichotomousCounts(4, 20, 7, 25)
        pooled, _ = mantel_haenszel([t], "OR")
        a, b, c, d = 4, 16, 7, 18
        assert pooled.y == pytest.approx(math.log(a * d / (b * c)), abs=1e-14)
        assert pooled.se == pytest.approx(math.sqrt(1 / a + 1 / b + 1 / c + 1 / d), abs=1e-12)

    def test_single_table_reduction_rd(self):
        t = DichotomousCounts(4, 20, 7, 25)
        pooled, _ = mantel_haenszel([t], "RD")
        p1, p2 = 4 / 20, 7 / 25
        assert pooled.y == pytest.approx(p1 - p2, abs=1e-14)
        assert pooled.se == pytest.approx(math.sqrt(p1 * (1 - p1) / 20 + p2 * (1 - p2) / 25), abs=1e-12)

    def test_replication_invariance(self):
        t = DichotomousCounts(5, 30, 9, 28)
        one, _ = mantel_haenszel([t], "RR")
        two, _ = mantel_haenszel([t, t], "RR")
        assert two.y == pytest.approx(one.y, abs=1e-14)
        assert two.se < one.se

    def test_close_to_iv_on_balanced_set(self):
        tables = [
            DichotomousCounts(12, 100, 20, 100),
            DichotomousCounts(15, 120, 24, 115),
            DichotomousCounts(9, 80, 16, 85),
            DichotomousCounts(18, 150, 28, 140),
        ]
        pooled, _ = mantel_haenszel(tables, "RR")
        iv = fixed_effect_iv([log_risk_ratio(t) for t in tables])
        assert pooled.y == pytest.approx(iv.y, rel=0.05)

    def test_double_zero_dropped_with_record(self):
        tables = [DichotomousCounts(4, 20, 7, 25), DichotomousCounts(0, 10, 0, 12)]
        pooled, exclusions = mantel_haenszel(tables, "RR")
        assert pooled.k == 1
        assert len(exclusions) == 1 and "no events" in exclusions[0].reason

    def test_all_non_estimable_is_error(self):
        with pytest.raises(DataError):
            mantel_haenszel([DichotomousCounts(0, 10, 0, 12)], "OR")

    def test_single_zero_enters_uncorrected(self):
        tables = [DichotomousCounts(0, 10, 3, 12), DichotomousCounts(2, 15, 4, 14)]
        pooled, exclusions = mantel_haenszel(tables, "RR")
        assert not exclusions and pooled.k == 2
        # hand sums: R = sum a*n2/N, S = sum c*n1/N with raw counts
        R = 0 * 12 / 22 + 2 * 14 / 29
        S = 3 * 10 / 22 + 4 * 15 / 29
        assert pooled.y == pytest.approx(math.log(R / S), abs=1e-14)


class TestHeterogeneity:
    def test_hand_computation(self):
        h = heterogeneity([E(0.0, 1.0), E(2.0, 1.0)])
        assert h.q == pytest.approx(2.0, abs=1e-14)
        assert h.df == 1
        assert h.tau2 == pytest.approx(1.0, abs=1e-14)
        assert h.i2 == pytest.approx(50.0)
        assert h.h2 == pytest.approx(2.0)

    def test_identical_estimates(self):
        h = heterogeneity([E(0.3, 0.5)] * 4)
        assert h.q == pytest.approx(0.0, abs=1e-12)
        assert h.tau2 == 0.0 and h.i2 == 0.0

    def test_truncation_when_q_below_df(self):
        h = heterogeneity([E(0.0, 1.0), E(0.1, 1.0), E(-0.1, 1.0)])
        assert h.q < h.df
        assert h.tau2 == 0.0 and h.i2 == 0.0 and h.h2 == 1.0

    def test_k1_degenerate(self):
        h = heterogeneity([E(0.5, 0.2)])
        assert (h.q, h.df, h.p_q, h.tau2) == (0.0, 0, 1.0, 0.0)

    def test_q_matches_brute_force(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            k = rng.integers(2, 15)
            ests = [E(rng.normal(), rng.uniform(0.1, 2)) for _ in range(k)]
            h = heterogeneity(ests)
            w = [1 / e.se**2 for e in ests]
            y_fe = sum(wi * e.y for wi, e in zip(w, ests)) / sum(w)
            q_brute = sum(wi * (e.y - y_fe) ** 2 for wi, e in zip(w, ests))
            assert h.q == pytest.approx(q_brute, rel=1e-12)


def _restricted_ll(tau2, ests):
    v = np.array([e.se**2 for e in ests])
    y = np.array([e.y for e in ests])
    w = 1 / (v + tau2)
    mu = np.sum(w * y) / np.sum(w)
    return -0.5 * (np.sum(np.log(v + tau2)) + np.log(np.sum(w)) + np.sum(w * (y - mu) ** 2))


def _grid_search_reml(ests, hi=10.0, step=1e-4):
    grid = np.arange(0.0, hi + step, step)
    vals = [_restricted_ll(t, ests) for t in grid]
    return float(grid[int(np.argmax(vals))])


class TestReml:
    def test_identical_estimates_zero(self):
        assert reml_tau2([E(0.4, 0.3)] * 5) == 0.0

    def test_matches_grid_oracle_on_hand_case(self):
        ests = [E(0.0, 1.0), E(2.0, 1.0)]
        oracle = _grid_search_reml(ests)
        assert oracle == pytest.approx(1.0, abs=2e-4)
        assert reml_tau2(ests) == pytest.approx(oracle, abs=1e-3)

    def test_matches_grid_oracle_on_random_sets(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            k = int(rng.integers(3, 10))
            ests = [E(float(rng.normal(0, 1.2)), float(rng.uniform(0.2, 1.0))) for _ in range(k)]
            assert reml_tau2(ests) == pytest.approx(_grid_search_reml(ests, hi=8.0), abs=1e-3)

    def test_permutation_invariant(self):
        # summation order inside the objective shifts the optimizer by less
        # than the convergence tolerance
        ests = [E(0.1, 0.5), E(1.4, 0.8), E(-0.3, 0.4)]
        assert reml_tau2(ests) == pytest.approx(reml_tau2(ests[::-1]), abs=1e-7)


class TestRandomEffects:
    def test_tau_zero_identical_to_fixed(self):
        ests = [E(0.2, 0.4), E(-0.5, 0.9), E(0.9, 0.6)]
        f = fixed_effect_iv(ests)
        r = random_effects(ests, 0.0)
        assert (r.y, r.se, r.ci_low, r.ci_high, r.z, r.p) == (f.y, f.se, f.ci_low, f.ci_high, f.z, f.p)
        assert r.weights_pct == f.weights_pct

    def test_large_tau_limit_is_arithmetic_mean(self):
        ests = [E(0.0, 0.1), E(1.0, 0.5), E(2.0, 1.0)]
        r = random_effects(ests, 1e6)
        assert r.y == pytest.approx(np.mean([e.y for e in ests]), abs=1e-3)

    def test_variance_inflation(self):
        ests = [E(0.2, 0.4), E(-0.5, 0.9)]
        assert random_effects(ests, 0.5).se > fixed_effect_iv(ests).se


class TestEgger:
    def test_exactly_symmetric_construction(self):
        # z = 0.5 x + e with e orthogonal to both 1 and x: intercept is exactly 0
        x = np.array([1.0, 2.0, 3.0, 4.0])
        e = np.array([0.1, -0.1, -0.1, 0.1])
        z = 0.5 * x + e
        ests = [E(zi / xi, 1 / xi) for zi, xi in zip(z, x)]
        r = egger_test(ests)
        assert abs(r.intercept) < 1e-10
        assert r.p > 0.9

    def test_k2_rejected(self):
        with pytest.raises(DataError, match="at least 3"):
            egger_test([E(0, 1), E(1, 2)])

    def test_biased_set_detected_and_matches_wls_oracle(self):
        rng = np.random.default_rng(3)
        ses = np.linspace(0.1, 1.0, 10)
        ys = 1.5 * ses + rng.normal(0, 0.02, 10)
        ests = [E(float(y), float(s)) for y, s in zip(ys, ses)]
        r = egger_test(ests)
        assert r.intercept > 0 and r.p < 0.05
        # independent oracle: weighted regression of y on se with weights
        # 1/se^2; the 'se' coefficient is the Egger intercept
        w = 1 / ses**2
        X = np.column_stack([np.ones_like(ses), ses])
        sw = np.sqrt(w)
        beta, *_ = np.linalg.lstsq(X * sw[:, None], ys * sw, rcond=None)
        resid = sw * (ys - X @ beta)
        cov = np.linalg.inv((X * w[:, None]).T @ X) * (resid @ resid) / (10 - 2)
        assert r.intercept == pytest.approx(beta[1], rel=1e-10)
        assert r.se_intercept == pytest.approx(math.sqrt(cov[1, 1]), rel=1e-10)
        assert r.df == 8


class TestTransform:
    def test_paper_rr_numbers(self):
        pooled = random_effects([E(-0.784, (1.207 - 0.361) / (2 * Z_95))], 0.0)
        assert pooled.y == pytest.approx(-0.784, abs=1e-12)
        t = transform(pooled, EffectScale.LOG_RISK_RATIO)
        assert t.estimate == pytest.approx(0.457, abs=1e-3)
        assert t.ci_low == pytest.approx(0.299, abs=1e-3)
        assert t.ci_high == pytest.approx(0.697, abs=1e-3)

    def test_zero_maps_to_one(self):
        t = transform(fixed_effect_iv([E(0.0, 1.0)]), EffectScale.LOG_ODDS_RATIO)
        assert t.estimate == 1.0

    def test_rd_identity(self):
        pooled = fixed_effect_iv([EffectEstimate(0.1, 0.05, EffectScale.RISK_DIFFERENCE)])
        t = transform(pooled, EffectScale.RISK_DIFFERENCE)
        assert t.estimate == pytest.approx(0.1, abs=1e-15)
        assert t.transformed is False

    def test_order_preserved_on_log_scales(self):
        pooled = fixed_effect_iv([E(0.3, 0.4), E(-0.1, 0.2)])
        t = transform(pooled, EffectScale.LOG_RISK_RATIO)
        assert t.ci_low < t.estimate < t.ci_high
