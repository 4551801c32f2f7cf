import math

import numpy as np
import pytest

from pnormtest.covariance import MomentSample
from pnormtest.dominant_test import calibrate_spec, default_spec
from pnormtest.sample_split import (
    SplitResult,
    select_greedy,
    select_top_scaled,
    split,
    split_test,
)
from pnormtest.test_engine import run_tests


class TestSplit:
    def test_even_split_partitions_the_sample(self):
        n1, n2 = split(10, 0.5, seed=0)
        assert n1.size == 5 and n2.size == 5
        assert np.intersect1d(n1, n2).size == 0
        assert np.array_equal(np.sort(np.concatenate([n1, n2])), np.arange(10))

    def test_deterministic_given_seed(self):
        a = split(100, 0.5, seed=7)
        b = split(100, 0.5, seed=7)
        c = split(100, 0.5, seed=8)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
        assert not np.array_equal(a[0], c[0])

    def test_fraction_sets_first_fold_size(self):
        n1, n2 = split(100, 0.3, seed=1)
        assert n1.size == 30 and n2.size == 70

    def test_folds_come_back_sorted(self):
        for fold in split(50, 0.4, seed=3):
            assert np.array_equal(fold, np.sort(fold))

    def test_rejects_too_small_folds(self):
        with pytest.raises(ValueError, match="too small"):
            split(7, 0.5, seed=0)
        with pytest.raises(ValueError, match="too small"):
            split(100, 0.01, seed=0)

    def test_rejects_bad_fraction(self):
        with pytest.raises(ValueError, match="frac1"):
            split(10, 0.0, seed=0)
        with pytest.raises(ValueError, match="frac1"):
            split(10, 1.0, seed=0)


def shifted_sample(rng, n, big_d, shifts):
    values = rng.standard_normal((n, big_d))
    for j, s in shifts.items():
        values[:, j] += s
    return MomentSample(values)


class TestSelectTopScaled:
    def test_finds_a_ten_se_shift(self):
        # one coordinate shifted by 10 standard errors is found essentially
        # always at n1 = 500
        hits = 0
        rng = np.random.default_rng(42)
        for _ in range(1000):
            s = shifted_sample(rng, 500, 30, {17: 10.0 / math.sqrt(500)})
            hits += select_top_scaled(s, 1)[0] == 17
        assert hits >= 990

    def test_d_equal_to_total_selects_everything(self):
        s = MomentSample(np.random.default_rng(0).standard_normal((40, 6)))
        assert np.array_equal(select_top_scaled(s, 6), np.arange(6))

    def test_exact_tie_goes_to_lower_index(self):
        rng = np.random.default_rng(5)
        strong = rng.standard_normal(60) + 2.0
        weak = rng.standard_normal(60)
        s = MomentSample(np.column_stack([strong, weak, strong]))
        assert select_top_scaled(s, 1)[0] == 0

    def test_zero_variance_scores_zero(self):
        rng = np.random.default_rng(9)
        const = np.full(80, 7.0)
        s = MomentSample(
            np.column_stack([const, rng.standard_normal(80) + 0.3, rng.standard_normal(80)])
        )
        assert 0 not in select_top_scaled(s, 2)
        assert 0 in select_top_scaled(s, 3)  # forced only when d = D

    def test_permutation_equivariant(self):
        rng = np.random.default_rng(11)
        values = rng.standard_normal((60, 8)) + rng.uniform(-0.5, 0.5, size=8)
        pi = rng.permutation(8)
        base = set(select_top_scaled(MomentSample(values), 3).tolist())
        permuted = select_top_scaled(MomentSample(values[:, pi]), 3)
        assert set(pi[permuted].tolist()) == base

    def test_rejects_bad_d(self):
        s = MomentSample(np.zeros((10, 3)))
        with pytest.raises(ValueError, match="1 <= d"):
            select_top_scaled(s, 0)
        with pytest.raises(ValueError, match="1 <= d"):
            select_top_scaled(s, 4)


class TestSelectGreedy:
    @pytest.mark.parametrize("p", [2.0, 3.5, math.inf])
    def test_first_pick_matches_top_scaled(self, p):
        # on a single coordinate every p-norm is the same studentized value
        rng = np.random.default_rng(21)
        s = shifted_sample(rng, 120, 9, {4: 0.6})
        assert select_greedy(s, 1, p)[0] == select_top_scaled(s, 1)[0]

    def test_recovers_two_orthogonal_signals(self):
        rng = np.random.default_rng(33)
        hits = 0
        shift = 8.0 / math.sqrt(400)
        for _ in range(500):
            s = shifted_sample(rng, 400, 12, {3: shift, 7: shift})
            hits += np.array_equal(select_greedy(s, 2, 2.0), [3, 7])
        assert hits >= 475

    def test_matches_brute_force_forward_selection(self):
        # independent check of the Schur recursion: redo each step with an
        # explicit eigendecomposition of the restricted covariance
        rng = np.random.default_rng(14)
        s = shifted_sample(rng, 150, 7, {1: 0.4, 5: 0.3})
        h = math.sqrt(s.n) * s.values.mean(axis=0)
        v = s.values[: 2 * (s.n // 2)]
        r = (v[1::2] - v[0::2]) / math.sqrt(2.0)
        chosen: list[int] = []
        for _ in range(3):
            best, best_stat = -1, -np.inf
            for j in range(7):
                if j in chosen:
                    continue
                cols = chosen + [j]
                sigma = r[:, cols].T @ r[:, cols] / r.shape[0]
                w, q = np.linalg.eigh(sigma)
                stat = float(np.linalg.norm(q @ ((q.T @ h[cols]) / np.sqrt(w))))
                if stat > best_stat:
                    best, best_stat = j, stat
            chosen.append(best)
        assert np.array_equal(select_greedy(s, 3, 2.0), np.sort(chosen))

    @pytest.mark.parametrize("p", [2.0, 3.0])
    def test_duplicate_column_skipped_with_warning(self, p):
        rng = np.random.default_rng(8)
        lead = rng.standard_normal(100) + 1.0
        other = rng.standard_normal(100) + 0.5
        s = MomentSample(np.column_stack([lead, lead, other]))
        with pytest.warns(RuntimeWarning, match="degenerate"):
            chosen = select_greedy(s, 2, p)
        assert np.array_equal(chosen, [0, 2])

    def test_exhausted_candidates_raise(self):
        col = np.random.default_rng(2).standard_normal(50) + 1.0
        s = MomentSample(np.column_stack([col, col]))
        with pytest.warns(RuntimeWarning, match="degenerate"):
            with pytest.raises(RuntimeError, match="no admissible"):
                select_greedy(s, 2, 2.0)

    def test_rejects_bad_exponent_and_d(self):
        s = MomentSample(np.random.default_rng(0).standard_normal((20, 3)))
        with pytest.raises(ValueError, match="exponent"):
            select_greedy(s, 1, 1.5)
        with pytest.raises(ValueError, match="1 <= d"):
            select_greedy(s, 5, 2.0)


@pytest.fixture(scope="module")
def spec4():
    return calibrate_spec(default_spec(4, 0.05), reps=50_000, seed=2)


class TestSplitTest:
    def test_identity_selection_reduces_to_second_fold_test(self):
        spec6 = calibrate_spec(default_spec(6, 0.05), reps=50_000, seed=3)
        values = np.random.default_rng(17).standard_normal((200, 6))
        result = split_test(
            MomentSample(values), 6, selection=range(6), spec=spec6, seed=4
        )
        _, idx2 = split(200, 0.5, seed=4)
        direct = run_tests(MomentSample(values[idx2]), spec6)
        assert result.selected == (0, 1, 2, 3, 4, 5)
        for rec, ref in zip(result.report.per_p, direct.per_p):
            assert rec.statistic == ref.statistic and rec.reject == ref.reject
        assert result.report.dominant.max_ratio == direct.dominant.max_ratio

    def test_selects_and_rejects_a_planted_violation(self, spec4):
        rng = np.random.default_rng(55)
        s = shifted_sample(rng, 600, 40, {23: 0.8})
        result = split_test(s, 4, selection="top", spec=spec4, seed=1)
        assert isinstance(result, SplitResult)
        assert 23 in result.selected
        assert result.report.dominant.reject
        assert (result.n1, result.n2) == (300, 300)
        assert result.report.d == 4

    def test_greedy_route_runs(self, spec4):
        rng = np.random.default_rng(56)
        s = shifted_sample(rng, 400, 10, {2: 0.7})
        result = split_test(s, 4, selection="greedy", p=3.0, spec=spec4, seed=1)
        assert 2 in result.selected

    def test_warns_when_d_outgrows_second_fold(self, spec4):
        s = MomentSample(np.random.default_rng(3).standard_normal((40, 5)))
        with pytest.warns(UserWarning, match=r"n2\^\(2/5\)"):
            split_test(s, 4, selection=range(4), spec=spec4, seed=0)

    def test_json_dict_carries_selection_and_report(self, spec4):
        s = MomentSample(np.random.default_rng(4).standard_normal((200, 8)))
        doc = split_test(s, 4, selection="top", spec=spec4, seed=2).to_json_dict()
        assert sorted(doc) == ["n1", "n2", "report", "selected"]
        assert len(doc["selected"]) == 4

    def test_rejects_bad_explicit_selection(self, spec4):
        s = MomentSample(np.random.default_rng(5).standard_normal((200, 8)))
        with pytest.raises(ValueError, match="distinct"):
            split_test(s, 4, selection=[0, 1, 2], spec=spec4)
        with pytest.raises(ValueError, match="distinct"):
            split_test(s, 4, selection=[0, 1, 2, 2], spec=spec4)
        with pytest.raises(ValueError, match=r"lie in \[0, 8\)"):
            split_test(s, 4, selection=[0, 1, 2, 9], spec=spec4)
        with pytest.raises(ValueError, match="selection"):
            split_test(s, 4, selection="lasso", spec=spec4)

    def test_default_spec_is_calibrated_at_d(self):
        values = np.random.default_rng(6).standard_normal((120, 12))
        result = split_test(MomentSample(values), 2, selection="top", reps=20_000, seed=3)
        assert result.report.d == 2
        calibrated = {rec.p.value for rec in result.report.per_p if rec.source == "calibrated"}
        assert calibrated == {2.0, 3.0, math.inf}
