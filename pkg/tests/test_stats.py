import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import rankdata

from hrcsim.scheduler import Event
from hrcsim.stats import (
    AllZeroDifferences,
    OutOfTableRange,
    PairedSample,
    Trial,
    TrialClosed,
    TrialRecord,
    critical_value,
    report,
    wilcoxon_signed_rank,
)


def gf_exact_p_le(ranks, w_obs) -> float:
    """Generating-function oracle for P(W <= w) under the signed-rank null.

    Builds the distribution of W = sum of an independently included subset of
    `ranks` by convolving {0, r} factors over exact rational mass. Ranks may
    be half-integers (average ranks), so they are doubled to integer keys.
    """
    dist = {0: Fraction(1)}
    for r in ranks:
        key = int(round(2 * r))
        nxt = {}
        for w, mass in dist.items():
            half = mass / 2
            nxt[w] = nxt.get(w, Fraction(0)) + half
            nxt[w + key] = nxt.get(w + key, Fraction(0)) + half
        dist = nxt
    target = 2 * w_obs + 1e-9
    total = sum(mass for w, mass in dist.items() if w <= target)
    return float(total)


def brute_force_p_le(ranks, w_obs) -> float:
    """Direct 2^n enumeration over explicit sign tuples (slow, tiny n only)."""
    n = len(ranks)
    count = 0
    for signs in itertools.product((0, 1), repeat=n):
        w = sum(r for r, s in zip(ranks, signs) if s)
        if w <= w_obs + 1e-12:
            count += 1
    return count / 2 ** n


class TestWilcoxon:
    def test_spec_example_greater(self):
        w, p, n = wilcoxon_signed_rank(PairedSample([(1, 0), (2, 0), (3, 0)]), "greater")
        assert w == 0.0
        assert p == pytest.approx(1 / 8, abs=1e-15)
        assert n == 3

    def test_all_zero_differences(self):
        with pytest.raises(AllZeroDifferences):
            wilcoxon_signed_rank(PairedSample([(1, 1), (2, 2)]), "greater")

    def test_zeros_dropped(self):
        w, p, n = wilcoxon_signed_rank(PairedSample([(1, 1), (1, 0), (2, 0), (3, 0)]), "greater")
        assert n == 3
        assert p == pytest.approx(1 / 8, abs=1e-15)

    def test_tied_ranks_can_make_half_integer_w(self):
        # |d| = (1, 1, 2, 2): ranks (1.5, 1.5, 3.5, 3.5)
        sample = PairedSample([(1, 0), (0, 1), (2, 0), (0, 2)])
        w, p, n = wilcoxon_signed_rank(sample, "two_sided")
        assert w == 5.0  # min(W+, W-) = min(5, 5)
        sample = PairedSample([(1, 0), (0, 1), (2, 0), (2, 0)])
        w, _, _ = wilcoxon_signed_rank(sample, "less")
        assert w % 1 == 0.5  # W+ = 1.5 + 3.5 + 3.5 = 8.5

    def test_matches_generating_function_oracle_small_n(self, rng):
        for trial in range(60):
            n = int(rng.integers(1, 13))
            c1 = np.round(rng.normal(0, 2, n), 1)
            c2 = np.round(c1 - rng.normal(0.5, 2, n), 1)
            pairs = PairedSample(list(zip(c1, c2)))
            d = c1 - c2
            d = d[d != 0]
            if len(d) == 0:
                continue
            ranks = rankdata(np.abs(d))
            for alternative in ("less", "greater"):
                w, p, n_eff = wilcoxon_signed_rank(pairs, alternative)
                assert abs(p - gf_exact_p_le(ranks, w)) < 1e-12

    def test_matches_brute_force_n5(self):
        ranks = [1.0, 2.0, 3.0, 4.0, 5.0]
        for w_obs in (0, 1, 3.5, 7, 15):
            assert gf_exact_p_le(ranks, w_obs) == pytest.approx(
                brute_force_p_le(ranks, w_obs), abs=1e-15
            )

    @given(st.integers(0, 2 ** 32 - 1))
    @settings(max_examples=80, deadline=None)
    def test_rank_sum_identity(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 20))
        c1 = np.round(rng.normal(0, 3, n), 1)
        c2 = np.round(rng.normal(0, 3, n), 1)
        d = c1 - c2
        d = d[d != 0]
        if len(d) == 0:
            return
        ranks = rankdata(np.abs(d))
        w_plus = float(np.sum(ranks[d > 0]))
        w_minus = float(np.sum(ranks[d < 0]))
        n_eff = len(d)
        assert w_plus + w_minus == pytest.approx(n_eff * (n_eff + 1) / 2, abs=1e-9)

    def test_p_in_unit_interval_and_monotone(self, rng):
        for _ in range(40):
            n = int(rng.integers(3, 10))
            c1 = rng.normal(0, 1, n)
            c2 = c1 - rng.normal(0.3, 1, n)
            sample = PairedSample(list(zip(c1, c2)))
            w, p, _ = wilcoxon_signed_rank(sample, "greater")
            assert 0 < p <= 1
            # adding a strongly concordant pair must not increase one-sided p
            big = float(np.max(np.abs(c1 - c2))) + 1.0
            bigger = PairedSample(list(zip(c1, c2)) + [(big, 0.0)])
            _, p2, _ = wilcoxon_signed_rank(bigger, "greater")
            assert p2 <= p + 1e-12

    def test_normal_approximation_above_enumeration_limit(self, rng):
        n = 25
        c1 = rng.normal(1.0, 1, n)
        c2 = rng.normal(0.0, 1, n)
        w, p, n_eff = wilcoxon_signed_rank(PairedSample(list(zip(c1, c2))), "greater")
        assert n_eff == 25
        assert 0 < p < 0.01  # strong shift: approximation must see it

    def test_two_sided_uses_min(self):
        sample = PairedSample([(3, 0), (2, 0), (-1, 0)])
        w, _, _ = wilcoxon_signed_rank(sample, "two_sided")
        assert w == 1.0  # W- = rank of the single negative = 1


class TestCriticalValue:
    def test_paper_table_value(self):
        assert critical_value(12, 0.05, "one") == 17

    def test_two_tailed_table_value(self):
        assert critical_value(12, 0.05, "two") == 13

    def test_n5_matches_brute_force(self):
        # largest w with P(W <= w) <= alpha via direct enumeration of 2^5 patterns
        ranks = [1, 2, 3, 4, 5]
        best = None
        for w in range(0, 16):
            if brute_force_p_le(ranks, w) <= 0.05:
                best = w
        assert critical_value(5, 0.05, "one") == best == 0

    def test_out_of_range_n(self):
        with pytest.raises(OutOfTableRange):
            critical_value(4, 0.05, "one")
        with pytest.raises(OutOfTableRange):
            critical_value(31, 0.05, "one")

    def test_unsupported_alpha(self):
        with pytest.raises(OutOfTableRange):
            critical_value(12, 0.10, "one")

    def test_no_critical_value_exists(self):
        with pytest.raises(OutOfTableRange):
            critical_value(5, 0.01, "one")  # P(W<=0) = 1/32 > 0.01

    def test_agrees_with_published_rows(self):
        # standard one-tailed alpha=0.05 column, n = 6..10
        assert [critical_value(n, 0.05, "one") for n in range(6, 11)] == [2, 3, 5, 8, 10]


def make_trial(condition, seed, collisions=0, interventions=0, total=600.0):
    t = Trial(condition, seed)
    for k in range(collisions):
        t.record(Event(10.0 * k, "collision_event", {"contacts": [[7, "dowel_box"]]}))
    for k in range(interventions):
        t.record(Event(5.0 * k, "intervention", {"object_id": "hex_key"}))
    return t.finalize([30.0] * 10, total)


class TestTrial:
    def test_records_accumulate(self):
        rec = make_trial("C1", 1, collisions=2, interventions=3)
        assert len(rec.collisions) == 2
        assert len(rec.interventions) == 3
        assert rec.total_time == 600.0

    def test_record_after_finalize_rejected(self):
        t = Trial("C1", 1)
        t.finalize([1.0], 10.0)
        with pytest.raises(TrialClosed):
            t.record(Event(0.0, "collision_event", {"contacts": [[1, "x"]]}))

    def test_round_trip_dict(self):
        rec = make_trial("C2", 9, collisions=1, interventions=1)
        back = TrialRecord.from_dict(rec.to_dict())
        assert back == rec


class TestReport:
    def test_single_trial_summary_equals_values(self):
        rec = make_trial("C1", 1, collisions=4, interventions=2, total=500.0)
        doc = report([rec])
        s = doc["conditions"]["C1"]
        assert s["collisions"]["median"] == 4
        assert s["interventions"]["median"] == 2
        assert s["total_time"]["median"] == 500.0

    def test_paired_rows_present(self, rng):
        trials = []
        for seed in range(12):
            c2_coll = int(rng.integers(1, 6))
            trials.append(make_trial("C1", seed, collisions=int(rng.integers(0, 2)), total=600 + seed))
            trials.append(make_trial("C2", seed, collisions=c2_coll, total=640 + seed))
        doc = report(trials)
        for name in ("collisions", "interventions", "total_time"):
            assert name in doc["tests"]
        assert "W" in doc["tests"]["collisions"]
        assert doc["tests"]["collisions"]["n_pairs"] == 12

    def test_identical_conditions_reported_as_no_difference(self):
        trials = [make_trial("C1", s, collisions=2) for s in range(6)] + [
            make_trial("C2", s, collisions=2) for s in range(6)
        ]
        doc = report(trials)
        assert doc["tests"]["collisions"] == {"no_difference": True, "n_pairs": 6}

    def test_report_pure_function(self):
        trials = [make_trial("C1", 1, collisions=1), make_trial("C2", 1, collisions=3)]
        assert report(trials) == report(trials)
