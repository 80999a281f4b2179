import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dynwalk import experiments as ex
from dynwalk.analytic import DomainError, GrowthEnvelope, normal_sf, tail_f
from dynwalk.clocks import sample_clocks
from dynwalk.estimate import ConfigMismatch, Estimate, merge


class TestBandVerdict:
    def test_underpowered_takes_precedence(self):
        est = Estimate(0, 10)
        assert ex.band_verdict(est, (0.0, 0.01)) == ex.UNDERPOWERED

    def test_pass_and_fail(self):
        est = Estimate(500, 10_000)
        assert ex.band_verdict(est, (0.01, 0.2)) == ex.PASS
        assert ex.band_verdict(est, (0.1, 0.3)) == ex.FAIL

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 5000), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
    def test_pass_never_wider_than_band(self, n, frac, a, b):
        hits = int(round(frac * n))
        est = Estimate(hits, n)
        low, high = min(a, b), max(a, b)
        v = ex.band_verdict(est, (low, high))
        if v == ex.PASS:
            assert est.ci_high - est.ci_low <= high - low
            assert low <= est.p_hat <= high
            assert est.ci_low <= high and est.ci_high >= low
        elif v == ex.FAIL:
            assert not low <= est.p_hat <= high

    def test_report_exit_codes(self):
        ok = ex.make_band("a", Estimate(50, 1000), (0.01, 0.2))
        under = ex.make_band("b", Estimate(0, 10), (0.0, 0.01))
        bad = ex.make_check("c", 5.0, 0.0, 1.0)
        r = ex.ExperimentReport("x", {}, 0, [ok, under])
        assert r.verdict == ex.UNDERPOWERED
        assert r.exit_code() == 0 and r.exit_code(strict=True) == 3
        r.checks.append(bad)
        assert r.exit_code(strict=True) == 1


class TestMerge:
    def test_identity_and_mismatch(self):
        e = Estimate(3, 100, 7, ("a",))
        assert merge(e, Estimate.empty(("a",))) == e
        with pytest.raises(ConfigMismatch):
            merge(e, Estimate(1, 10, 7, ("b",)))

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 50), st.integers(0, 50)), min_size=3, max_size=3))
    def test_commutative_associative(self, parts):
        es = [Estimate(min(h, n), n, 1, ("c",)) for h, n in parts]
        a, b, c = es
        assert merge(a, b) == merge(b, a)
        assert merge(merge(a, b), c) == merge(a, merge(b, c))

    def test_pooled_shards_equal_one_run(self):
        n, z, M, size = 100, 1.5, 3000, 1000
        whole = ex.run_tail_sweep(n, [z], M, 11, shard_size=size).bands[0].estimate
        pooled = Estimate.empty(("tail_sweep", n, z), 11)
        for i, c in enumerate(ex.shard_sizes(M, size)):
            hits = ex.tail_sweep_shard((n, [z], 11, i, c))[0]
            pooled = merge(pooled, Estimate(hits, c, 11, ("tail_sweep", n, z)))
        assert pooled == whole


class TestSeeds:
    def test_shard_layout(self):
        assert ex.shard_sizes(25, 10) == [10, 10, 5]
        assert ex.shard_sizes(20, 10) == [10, 10]
        with pytest.raises(DomainError):
            ex.shard_sizes(5, 0)

    def test_streams_differ_by_key(self):
        a = ex.sample_seeds(3, (1, 0), 5)
        b = ex.sample_seeds(3, (1, 1), 5)
        assert not np.array_equal(a, b)
        np.testing.assert_array_equal(a, ex.sample_seeds(3, (1, 0), 5))
        # a longer block extends the shorter one
        np.testing.assert_array_equal(ex.sample_seeds(3, (1, 0), 8)[:5], a)


class TestTailSweep:
    def test_worker_count_does_not_matter(self):
        kw = dict(n=200, z_list=[1.5, 2.0], M=2000, seed=5, shard_size=500)
        assert ex.run_tail_sweep(**kw, workers=1) == ex.run_tail_sweep(**kw, workers=3)

    def test_monotone_in_z(self):
        r = ex.run_tail_sweep(200, [1.0, 1.5, 2.0, 2.5], 3000, 2, allow_rare=True)
        p = [b.estimate.p_hat for b in r.bands]
        assert all(b <= a for a, b in zip(p, p[1:]))

    def test_rare_event_guard(self):
        with pytest.raises(DomainError):
            ex.run_tail_sweep(200, [3.5], 1000, 0)
        r = ex.run_tail_sweep(200, [3.5], 1000, 0, allow_rare=True)
        assert r.bands[0].estimate.n_samples == 1000

    def test_regime_flagged_not_dropped(self):
        r = ex.run_tail_sweep(100, [2.5], 1000, 0)
        assert len(r.bands) == 1
        assert "regime" in r.bands[0].note

    def test_band_recorded(self):
        r = ex.run_tail_sweep(200, [2.0], 2000, 0)
        low, high = r.bands[0].band
        assert low == pytest.approx(0.5 * tail_f(2.0) / 9)
        assert high == pytest.approx(4 * tail_f(2.0))
        assert r.config["slack"] == [0.5, 2.0]

    @pytest.mark.slow
    def test_size_stability(self):
        p = [ex.run_tail_sweep(n, [2.0], 20_000, 3).bands[0].estimate.p_hat for n in (1000, 10_000)]
        assert abs(p[0] - p[1]) / p[1] < 0.25


class TestQuenched:
    def test_bands(self):
        r = ex.run_quenched_tail(300, 2.0, 4, 3000, 1)
        up, lo = r.bands
        f = tail_f(2.0)
        assert up.band == (0.0, pytest.approx(2.5 * f))
        assert lo.band == (pytest.approx(0.5 * f / 9), 1.0)
        assert up.estimate is lo.estimate or up.estimate == lo.estimate

    def test_annealed_matches_mean_quenched(self):
        n, z, M = 200, 2.0, 4000
        fam = ex.run_quenched_family(n, z, list(range(10)), M, 8)
        p = np.array([row["p_hat"] for row in fam.tables["logs"]])
        ann = ex.run_tail_sweep(n, [z], 10 * M, 9).bands[0].estimate
        pooled_se = math.sqrt(ann.p_hat * (1 - ann.p_hat) / (10 * M)) * math.sqrt(2)
        assert abs(p.mean() - ann.p_hat) <= 4 * pooled_se
        assert fam.check("coefficient_of_variation").verdict == ex.PASS


class TestClockVerification:
    def test_below_noise_floor(self):
        # fluctuations of order (n delta)^{-1/2} ~ 0.045 swamp alpha = 0.02
        r = ex.run_clock_verification(1000, 0.5, 0.02, 5, 0, small_logs=0)
        c = r.check("exceedance_frequency")
        assert c.value == 1.0 and c.high == 1.0 and c.verdict == ex.PASS

    def test_regime_precondition(self):
        with pytest.raises(DomainError):
            ex.run_clock_verification(1000, 0.05, 0.2, 5)

    def test_window_size_arithmetic(self):
        assert 1 / (16 * 2.0**2) == 1 / 64

    def test_small_run(self):
        r = ex.run_clock_verification(20_000, 0.05, 0.2, 4, 1, small_logs=5)
        assert r.verdict == ex.PASS


class TestFdd:
    def test_small_grid(self):
        r = ex.run_fdd_covariance(300, [0.0, 1.0], [0.5, 1.0], 3000, 2)
        rows = r.tables["covariance"]
        spot = [x for x in rows if (x["s"], x["t"], x["s2"], x["t2"]) == (0.0, 1.0, 1.0, 1.0)]
        assert spot[0]["target"] == pytest.approx(math.exp(-1))
        diag = [x for x in rows if x["s"] == x["s2"] and x["t"] == x["t2"]]
        assert all(x["target"] == x["t"] for x in diag)
        assert r.verdict == ex.PASS

    def test_reps_precondition(self):
        with pytest.raises(DomainError):
            ex.run_fdd_covariance(100, [0.0], [1.0], 10)


class TestBlocks:
    def test_neighbour_kinds(self):
        assert ex.neighbour_kind(((0.0, 0.5), (0.2, 0.4)), ((0.5, 1.0), (0.2, 0.4))) == "horizontal"
        assert ex.neighbour_kind(((0.0, 0.5), (0.2, 0.4)), ((0.0, 0.5), (0.4, 0.9))) == "vertical"
        with pytest.raises(DomainError):
            ex.neighbour_kind(((0.0, 0.5), (0.2, 0.4)), ((0.6, 1.0), (0.2, 0.4)))
        with pytest.raises(DomainError):
            ex.run_block_moment_check(100, [(((0.0, 0.5), (0.0, 0.2)), ((0.5, 1.0), (0.3, 0.5)))],
                                      reps=10)

    def test_degenerate_block(self):
        pair = (((0.2, 0.2), (0.0, 0.5)), ((0.2, 0.5), (0.0, 0.5)))
        r = ex.run_block_moment_check(100, [pair], reps=200)
        assert r.tables["blocks"][0]["moment"] == 0.0
        assert r.verdict == ex.PASS

    def test_horizontal_product_of_variances(self):
        # disjoint coordinates are independent, and each increment has
        # variance (b - a) * 2 (1 - e^{-(w - u)}) exactly
        I = ((0.0, 0.4), (0.2, 0.6))
        J = ((0.4, 1.0), (0.2, 0.6))
        r = ex.run_block_moment_check(200, [(I, J)], reps=20_000, seed=3)
        row = r.tables["blocks"][0]
        g = 2 * (1 - math.exp(-0.4))
        assert abs(row["moment"] - 0.4 * g * 0.6 * g) < 4 * row["se"]


@pytest.fixture(scope="module")
def suite():
    return ex.run_erdos_suite(M=3000, seed=4, cap=2000)


class TestErdos:
    def test_ratio_at_most_one(self, suite):
        for row in suite.tables["localization"]:
            assert row["p_inside"] <= row["p_above"]

    def test_partial_counts(self, suite):
        hc = suite.hit_counter
        L = hc.partial_counts
        assert np.all(np.diff(L) >= 0) and np.all(L <= hc.levels)
        EL = hc.mean_partial_counts
        assert np.all(np.diff(EL) >= 0) and np.all(EL <= hc.levels)

    def test_classifications(self, suite):
        rows = {r["label"]: r for r in suite.tables["classification"]}
        assert rows["corollary a=4.5"]["integral"] == "Divergent"
        assert rows["corollary a=5.5"]["integral"] == "Finite"
        assert rows["corollary a=2.5"]["static"] == "Divergent"
        assert rows["corollary a=3.5"]["static"] == "Finite"
        assert all(c.verdict == ex.PASS for c in suite.checks)

    def test_q_table_regimes(self, suite):
        for row in suite.tables["q_table"]:
            i, j = row["i"], row["j"]
            li = max(1.0, math.log(i))
            if row["regime"] == 3:
                assert j < i + li
            elif row["regime"] == 1:
                assert j > i + li**10

    def test_levels_cover_cap(self, suite):
        e = [row["e_j"] for row in suite.tables["localization"]]
        assert e[-1] <= 2000 and len(e) == len(set(e))


class TestPaleyZygmund:
    def test_identities(self):
        log = sample_clocks(500, 1.0, 6)
        r = ex.paley_zygmund_check(log, 500, 1.5, 4000, 1)
        assert r.verdict == ex.PASS
        assert r.tables["moments"][0]["target_E_J"] == pytest.approx(normal_sf(1.5))

    def test_large_z_vacuous(self):
        log = sample_clocks(200, 1.0, 2)
        r = ex.paley_zygmund_check(log, 200, 8.0, 1000)
        m = r.tables["moments"][0]
        assert m["E_J"] == 0 and m["P_J_pos"] == 0
        assert r.verdict == ex.PASS

    def test_log_size_mismatch(self):
        with pytest.raises(DomainError):
            ex.paley_zygmund_check(sample_clocks(10, 1.0, 0), 20, 2.0, 100)


def test_reflection_small():
    r = ex.reflection_check(200, reps=2000, seed=5)
    assert r.verdict == ex.PASS
    for row in r.tables["reflection"]:
        assert row["p_running_max"] >= row["p_sup"]


def test_ou_tail_report():
    r = ex.run_ou_tail(2.0, 0.01, 4000, 3)
    assert r.band("z=2.0").band == (pytest.approx(tail_f(2.0) / 10), pytest.approx(10 * tail_f(2.0)))
    assert r.check("halving_shift").value >= 0
    with pytest.raises(DomainError):
        ex.run_ou_tail(0.5, 0.01, 4000)


def test_integral_tests_report():
    fam = [("a=4.5", GrowthEnvelope.corollary(4.5)), ("a=5.5", GrowthEnvelope.corollary(5.5))]
    r = ex.run_integral_tests(fam)
    assert [row["integral"] for row in r.tables["classification"]] == ["Divergent", "Finite"]
    assert r.verdict == ex.PASS
