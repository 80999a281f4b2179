import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from dynwalk import clocks as ck
from dynwalk import walk as wk
from dynwalk.analytic import DomainError, normal_deviates


def full_refresh_log(n, u=0.2, v=0.6):
    # every coordinate fires exactly once inside (u, v]
    times = np.linspace(u, v, n + 2)[1:-1]
    return ck.ClockEventLog(n, 1.0, times, np.arange(n))


class TestStreams:
    def test_split_draw_matches_two_draws(self):
        rng = np.random.default_rng(11)
        a = normal_deviates(rng, 7)
        b = normal_deviates(rng, 5)
        x0, repl = wk.path_deviates(7, 5, 11)
        np.testing.assert_array_equal(x0, a)
        np.testing.assert_array_equal(repl, b)

    def test_derive_seed_distinct(self):
        seeds = wk.quenched_seeds(3, 5000)
        assert np.unique(seeds).size == 5000
        assert wk.derive_seed(3, 0) == wk.derive_seed(3, 0)
        assert wk.derive_seed(3, 0) != wk.derive_seed(4, 0)


class TestSimulatePath:
    def test_matches_brute_force_random_instances(self):
        rng = np.random.default_rng(2024)
        worst = 0.0
        for _ in range(200):
            n = int(rng.integers(1, 51))
            log = ck.sample_clocks(n, 1.0, int(rng.integers(2**63)))
            seed = int(rng.integers(2**63))
            a = wk.simulate_path(n, log, seed)
            b = wk.brute_force_path(n, log, seed)
            np.testing.assert_array_equal(a.times, b.times)
            worst = max(worst, float(np.max(np.abs(a.values - b.values))) / math.sqrt(n))
        assert worst <= 1e-12

    def test_larger_instance(self):
        log = ck.sample_clocks(1000, 1.0, 8)
        a = wk.simulate_path(1000, log, 9)
        b = wk.brute_force_path(1000, log, 9)
        assert np.max(np.abs(a.values - b.values)) <= 1e-12 * math.sqrt(1000)

    def test_empty_log(self):
        log = ck.empty_log(30)
        a = wk.simulate_path(30, log, 4)
        b = wk.brute_force_path(30, log, 4)
        assert len(a) == 1
        np.testing.assert_array_equal(a.values, b.values)
        assert a.values[0] == pytest.approx(wk.path_deviates(30, 0, 4)[0].sum())

    def test_single_coordinate_steps(self):
        log = ck.sample_clocks(20, 1.0, 5)
        p = wk.simulate_path(20, log, 6)
        x0, repl = wk.path_deviates(20, len(log), 6)
        x = x0.copy()
        for k, c in enumerate(log.coords):
            step = p.values[k + 1] - p.values[k]
            assert abs(abs(step) - abs(repl[k] - x[c])) < 1e-12
            x[c] = repl[k]

    def test_initial_variance(self):
        n, R = 64, 4000
        v0 = np.array([wk.simulate_path(n, ck.empty_log(n), s).values[0] for s in range(R)])
        var = v0.var(ddof=1)
        se = n * math.sqrt(2 / (R - 1))
        assert abs(var - n) < 4 * se

    def test_resummation_kernel(self):
        from dynwalk import _kernels as kern
        log = ck.sample_clocks(50, 40.0, 3)  # ~2000 events
        x0, repl = wk.path_deviates(50, len(log), 1)
        a = kern.walk_values(x0, log.coords, repl, 7)
        b = kern.walk_values_brute(x0, log.coords, repl)
        assert np.max(np.abs(a - b)) < 1e-12 * math.sqrt(50)

    def test_mismatched_n(self):
        with pytest.raises(DomainError):
            wk.simulate_path(10, ck.sample_clocks(11, 1.0, 0), 0)

    def test_brute_force_budget(self):
        log = ck.sample_clocks(10**4, 1.0, 0)
        with pytest.raises(DomainError):
            wk.brute_force_path(10**4, log, 0)


class TestPathFunctionals:
    path = wk.WalkPath.from_segments([1.0, -2.0, 3.0], [0.0, 1 / 3, 2 / 3])

    def test_sup_examples(self):
        assert wk.path_sup(self.path) == 3.0
        assert wk.path_sup(self.path, (0.0, 2 / 3)) == 1.0
        assert wk.path_sup(self.path, (0.5, 0.6)) == -2.0
        assert wk.path_sup(self.path, (1 / 3, 0.5)) == -2.0
        assert wk.path_sup(self.path, (1.0, 1.0)) == 3.0
        const = wk.WalkPath.from_segments([4.2])
        assert wk.path_sup(const) == 4.2

    def test_sup_errors(self):
        with pytest.raises(DomainError):
            wk.path_sup(self.path, (0.5, 0.5))
        with pytest.raises(DomainError):
            wk.path_sup(self.path, (0.6, 0.5))

    def test_occupation_examples(self):
        p = wk.WalkPath.from_segments([0.0, 2.0], [0.0, 0.5])
        assert wk.occupation_time(p, 1.0) == pytest.approx(0.5)
        assert wk.occupation_time(p, -1.0) == pytest.approx(1.0)
        assert wk.occupation_time(p, 5.0) == 0.0

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32), st.floats(-3, 3))
    def test_occupation_positive_iff_sup_reaches(self, seed, z):
        n = 40
        log = ck.sample_clocks(n, 1.0, seed)
        p = wk.simulate_path(n, log, seed + 1)
        level = z * math.sqrt(n)
        occ = wk.occupation_time(p, level)
        assert 0 <= occ <= 1
        assert (occ > 0) == (wk.path_sup(p) >= level)
        sup, occ2 = wk.sup_and_occupation(n, log, seed + 1, level)
        assert sup == pytest.approx(wk.path_sup(p), abs=1e-12)
        assert occ2 == pytest.approx(occ, abs=1e-12)

    def test_annealed_sup_matches_path(self):
        log = ck.sample_clocks(200, 1.0, 17)
        assert wk.annealed_sup(200, 17, 3) == pytest.approx(
            wk.path_sup(wk.simulate_path(200, log, 3)), abs=1e-12)

    def test_csv_dump(self, tmp_path):
        p = wk.simulate_path(5, ck.sample_clocks(5, 1.0, 1), 2)
        dest = tmp_path / "p.csv"
        wk.write_path_csv(p, dest)
        rows = dest.read_text().splitlines()
        assert rows[0] == "start,end,value"
        assert len(rows) == len(p) + 1


class TestRunningMax:
    def test_tree_against_scan(self):
        for seed in range(30):
            n = 1 + seed * 7
            log = ck.sample_clocks(n, 1.0, seed)
            a = wk.running_max_sup(n, log, seed)
            b = wk.running_max_sup_scan(n, log, seed)
            assert a == pytest.approx(b, abs=1e-12 * math.sqrt(n))

    def test_empty_log_is_max_prefix(self):
        x0, _ = wk.path_deviates(100, 0, 5)
        assert wk.running_max_sup(100, ck.empty_log(100), 5) == pytest.approx(np.cumsum(x0).max())

    def test_dominates_path_sup(self):
        for seed in range(20):
            log = ck.sample_clocks(300, 1.0, seed)
            p = wk.simulate_path(300, log, seed)
            assert wk.running_max_sup(300, log, seed) >= wk.path_sup(p) - 1e-9

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=40),
           st.lists(st.tuples(st.integers(0, 39), st.floats(-10, 10)), max_size=30))
    def test_tree_class(self, values, updates):
        tree = wk.MaxPrefixSumTree(values)
        x = np.array(values)
        for j, v in updates:
            j = j % len(x)
            tree.update(j, v)
            x[j] = v
            assert tree.max_prefix() == pytest.approx(np.cumsum(x).max(), abs=1e-9)
            assert tree.total() == pytest.approx(x.sum(), abs=1e-9)

    def test_tree_bounds(self):
        with pytest.raises(DomainError):
            wk.MaxPrefixSumTree([])
        with pytest.raises(IndexError):
            wk.MaxPrefixSumTree([1.0]).update(3, 0.0)

    @pytest.mark.slow
    def test_reflection_factor_two(self):
        n, R = 1000, 6000
        rm = np.empty(R)
        ps = np.empty(R)
        for r in range(R):
            log = ck.sample_clocks(n, 1.0, 70_000 + r)
            rm[r] = wk.running_max_sup(n, log, 80_000 + r)
            ps[r] = wk.path_sup(wk.simulate_path(n, log, 80_000 + r))
        for lam in (1.5, 2.0, 2.5):
            d = (rm >= lam * math.sqrt(n)).astype(float) - 2 * (ps >= lam * math.sqrt(n))
            assert d.mean() <= 4 * d.std(ddof=1) / math.sqrt(R)


class TestMultilevel:
    def test_against_prefix_paths(self):
        n = 60
        ends = [5, 17, 33, 60]
        for seed in range(10):
            log = ck.sample_clocks(n, 3.0, seed)
            got = wk.multilevel_sup(log, seed, ends)
            x0, repl = wk.path_deviates(n, len(log), seed)
            x = x0.copy()
            best = np.array([x[:e].sum() for e in ends])
            for k, c in enumerate(log.coords):
                x[c] = repl[k]
                best = np.maximum(best, [x[:e].sum() for e in ends])
            np.testing.assert_allclose(got, best, atol=1e-12)

    def test_top_level_equals_path_sup(self):
        log = ck.sample_clocks(120, 1.0, 3)
        got = wk.multilevel_sup(log, 4, [10, 120])
        assert got[-1] == pytest.approx(wk.path_sup(wk.simulate_path(120, log, 4)), abs=1e-12)

    def test_resummation_branch(self):
        from dynwalk import _kernels as kern
        log = ck.sample_clocks(30, 20.0, 2)
        ends = np.array([4, 11, 30])
        block = np.searchsorted(ends, np.arange(30), side="right").astype(np.int64)
        x0, repl = wk.path_deviates(30, len(log), 1)
        a = kern.multilevel_sup(x0, log.coords, repl, ends, block, 5)
        b = kern.multilevel_sup(x0, log.coords, repl, ends, block, 1 << 30)
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_bad_levels(self):
        log = ck.sample_clocks(10, 1.0, 0)
        for ends in ([], [5, 5, 10], [3, 9]):
            with pytest.raises(DomainError):
                wk.multilevel_sup(log, 0, ends)


class TestMarginals:
    def test_stationarity_and_marginal(self):
        n, R = 500, 10_000
        s0 = np.empty(R)
        s7 = np.empty(R)
        for r in range(R):
            # separate paths for the two times keep the KS samples independent
            log = ck.sample_clocks(n, 1.0, r)
            s0[r] = wk.simulate_path(n, log, r).values[0]
            log2 = ck.sample_clocks(n, 1.0, 10**6 + r)
            p = wk.simulate_path(n, log2, 10**6 + r)
            s7[r] = p.values[np.searchsorted(p.times, 0.7, side="right") - 1]
        assert stats.ks_2samp(s0, s7).pvalue > 1e-3
        assert stats.kstest(s7 / math.sqrt(n), "norm").pvalue > 1e-3
        assert stats.kstest(s0 / math.sqrt(n), "norm").pvalue > 1e-3


class TestQuenched:
    def test_singleton(self):
        log = ck.sample_clocks(50, 1.0, 1)
        ens = wk.quenched_resample(log, 1, "sup", base_seed=9)
        assert ens.M == 1
        seed = int(ens.seeds[0])
        assert ens.outputs[0] == pytest.approx(wk.path_sup(wk.simulate_path(50, log, seed)))

    def test_members_share_log_and_distinct_seeds(self):
        log = ck.sample_clocks(50, 1.0, 1)
        ens = wk.quenched_resample(log, 300, "values", base_seed=2, points=(0.7, 0.2))
        assert ens.log is log
        assert np.unique(ens.seeds).size == 300
        # values are returned in the requested order
        seed = int(ens.seeds[5])
        p = wk.simulate_path(50, log, seed)
        at = lambda q: p.values[np.searchsorted(p.times, q, side="right") - 1]
        np.testing.assert_allclose(ens.outputs[5], [at(0.7), at(0.2)], atol=1e-12)

    def test_occupation_functional(self):
        log = ck.sample_clocks(50, 1.0, 1)
        ens = wk.quenched_resample(log, 20, "occupation", base_seed=2, level=3.0)
        seed = int(ens.seeds[3])
        assert ens.outputs[3] == pytest.approx(
            wk.occupation_time(wk.simulate_path(50, log, seed), 3.0), abs=1e-12)

    def test_bad_functional(self):
        log = ck.sample_clocks(5, 1.0, 1)
        with pytest.raises(DomainError):
            wk.quenched_resample(log, 2, "nope")
        with pytest.raises(DomainError):
            wk.quenched_resample(log, 0)
        with pytest.raises(DomainError):
            wk.quenched_resample(log, 2, "occupation")

    def test_covariance_identity(self):
        n, M = 200, 4000
        for L in range(5):
            log = ck.sample_clocks(n, 1.0, 900 + L)
            for u, v in ((0.0, 0.3), (0.2, 0.9), (0.5, 0.55)):
                ens = wk.quenched_resample(log, M, "values", base_seed=L, points=(u, v))
                a, b = ens.outputs[:, 0], ens.outputs[:, 1]
                assert abs(a.mean()) < 4 * a.std(ddof=1) / math.sqrt(M)
                prod = a * b
                target = n - ck.count_changed(log, u, v)
                assert abs(prod.mean() - target) < 4 * prod.std(ddof=1) / math.sqrt(M)


class TestConditionalMoments:
    def test_regression_law(self):
        log = ck.sample_clocks(400, 1.0, 3)
        rep = wk.conditional_moments_check(log, 0.3, 0.7, 4000, base_seed=1)
        n, N = 400, ck.count_changed(log, 0.3, 0.7)
        assert rep.changed == N
        assert rep.slope_target == pytest.approx(1 - N / n)
        assert rep.resid_var_target == pytest.approx(N * (2 - N / n))
        assert rep.passed
        for lo, hi, cnt, emp, pred in rep.tail_table:
            se = math.sqrt(max(pred * (1 - pred), 1e-4) / cnt)
            assert abs(emp - pred) < 5 * se + 0.02

    def test_full_refresh(self):
        log = full_refresh_log(50)
        rep = wk.conditional_moments_check(log, 0.2, 0.6, 3000, base_seed=2)
        assert rep.changed == 50
        assert rep.slope_target == 0.0
        assert rep.resid_var_target == 50.0
        assert rep.passed

    def test_no_change_is_exact(self):
        log = full_refresh_log(20, 0.5, 0.9)
        rep = wk.conditional_moments_check(log, 0.1, 0.3, 50)
        assert rep.degenerate and rep.exact_equal and rep.passed
        assert (rep.slope_target, rep.resid_var_target) == (1.0, 0.0)

    def test_worked_example(self):
        # n = 100, N = 50: conditional mean at x = 10 is 5, variance 75
        n, N, x = 100, 50, 10.0
        assert (1 - N / n) * x == 5.0
        assert N * (2 - N / n) == 75.0
        times = np.linspace(0.1, 0.5, 52)[1:-1]
        log = ck.ClockEventLog(n, 1.0, times, np.arange(50))
        rep = wk.conditional_moments_check(log, 0.0, 0.6, 200)
        assert rep.slope_target * x == 5.0 and rep.resid_var_target == 75.0

    def test_domain(self):
        with pytest.raises(DomainError):
            wk.conditional_moments_check(ck.empty_log(4), 0.6, 0.5, 10)


class TestRescaledField:
    def test_structure(self):
        n = 100
        log = ck.sample_clocks(n, 1.0, 1)
        s = [0.0, 0.25, 0.25, 0.9]
        t = [0.0, 0.3, 1.0]
        f = wk.rescaled_field(n, log, 2, s, t)
        assert f.values.shape == (4, 3)
        assert np.all(f.values[:, 0] == 0)
        np.testing.assert_array_equal(f.values[1], f.values[2])
        p = wk.simulate_path(n, log, 2)
        at = lambda q: p.values[np.searchsorted(p.times, q, side="right") - 1]
        np.testing.assert_allclose(f.values[:, 2] * math.sqrt(n), [at(q) for q in s], atol=1e-12)

    def test_prefix_column(self):
        n = 50
        log = ck.sample_clocks(n, 1.0, 4)
        f = wk.rescaled_field(n, log, 5, [0.0], [0.1, 0.5])
        x0, _ = wk.path_deviates(n, len(log), 5)
        np.testing.assert_allclose(f.values[0] * math.sqrt(n), [x0[:5].sum(), x0[:25].sum()])

    def test_grid_validation(self):
        with pytest.raises(DomainError):
            wk.rescaled_field(10, ck.empty_log(10), 0, [0.5, 0.1], [0.5])
        with pytest.raises(DomainError):
            wk.rescaled_field(10, ck.empty_log(10), 0, [0.5], [1.5])

    def test_covariance_small(self):
        n, R = 300, 3000
        s = np.array([0.0, 1.0])
        t = np.array([0.5, 1.0])
        vals = np.array([wk.rescaled_field(n, ck.sample_clocks(n, 1.0, r), r + 7, s, t).values.ravel()
                         for r in range(R)])
        pts = [(si, ti) for si in s for ti in t]
        for a, (sa, ta) in enumerate(pts):
            for b, (sb, tb) in enumerate(pts):
                prod = vals[:, a] * vals[:, b]
                target = math.exp(-abs(sa - sb)) * min(ta, tb)
                assert abs(prod.mean() - target) < 4 * prod.std(ddof=1) / math.sqrt(R)


class TestBlockIncrement:
    def field(self):
        n = 100
        return wk.rescaled_field(n, ck.sample_clocks(n, 1.0, 3), 4, [0.0, 0.2, 0.5, 0.9],
                                 [0.0, 0.1, 0.4, 0.7, 1.0])

    def test_degenerate(self):
        f = self.field()
        assert wk.block_increment(f, (0.4, 0.4), (0.2, 0.9)) == 0.0
        assert wk.block_increment(f, (0.1, 0.7), (0.5, 0.5)) == 0.0

    def test_additive(self):
        f = self.field()
        whole = wk.block_increment(f, (0.1, 0.7), (0.0, 0.9))
        parts = (wk.block_increment(f, (0.1, 0.7), (0.0, 0.5))
                 + wk.block_increment(f, (0.1, 0.7), (0.5, 0.9)))
        assert whole == pytest.approx(parts, abs=1e-12)
        parts2 = (wk.block_increment(f, (0.1, 0.4), (0.0, 0.9))
                  + wk.block_increment(f, (0.4, 0.7), (0.0, 0.9)))
        assert whole == pytest.approx(parts2, abs=1e-12)

    def test_definition(self):
        f = self.field()
        got = wk.block_increment(f, (0.1, 0.7), (0.2, 0.9))
        want = f.at(0.9, 0.7) - f.at(0.2, 0.7) - f.at(0.9, 0.1) + f.at(0.2, 0.1)
        assert got == pytest.approx(want, abs=1e-14)

    def test_off_grid(self):
        f = self.field()
        with pytest.raises(DomainError):
            wk.block_increment(f, (0.1, 0.65), (0.2, 0.9))
        with pytest.raises(DomainError):
            wk.block_increment(f, (0.1, 0.7), (0.25, 0.9))
        f2 = wk.rescaled_field(10, ck.empty_log(10), 0, [0.0, 1.0], [0.0, 0.25])
        with pytest.raises(DomainError):
            wk.block_increment(f2, (0.0, 0.25), (0.0, 1.0))
