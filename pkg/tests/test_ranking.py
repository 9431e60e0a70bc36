import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from endorsement_rank import (
    EndorsementIndex,
    Query,
    RankerTag,
    candidates,
    rank,
    rank_naive_bayes,
    rank_popularity,
    rank_random,
)
from conftest import TOY_COUNTS, toy_index, toy_tables


# --- exact-rational oracle --------------------------------------------------
#
# Scores recomputed with Fraction arithmetic: no logs, no rounding. The
# implementation must produce the same order up to groups of destinations
# whose exact scores tie (inside such a group log-space float noise may
# legally reorder ids).


def oracle_order(counts, alpha: Fraction, query, include_prior: bool):
    totals = [sum(row) for row in counts]
    grand = sum(totals)
    n_activities = len(counts[0])
    scored = []
    for d, row in enumerate(counts):
        if not any(row[e] > 0 for e in query):
            continue
        score = Fraction(totals[d], grand) if include_prior else Fraction(1)
        for e in query:
            score *= (row[e] + alpha) / (totals[d] + alpha * n_activities)
        scored.append((score, d))
    scored.sort(key=lambda t: (-t[0], t[1]))
    return scored


def assert_matches_oracle(ranked, oracle):
    impl = ranked.destination_ids()
    assert len(impl) == len(oracle)
    pos = 0
    for _, group in itertools.groupby(oracle, key=lambda t: t[0]):
        ids = {d for _, d in group}
        assert set(impl[pos : pos + len(ids)]) == ids, (
            f"order mismatch at positions {pos}..{pos + len(ids)}: "
            f"impl={impl} oracle={oracle}"
        )
        pos += len(ids)


class TestQuery:
    def test_deduplicates_preserving_order(self):
        assert Query((2, 0, 2, 1, 0)).activities == (2, 0, 1)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            Query(())

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            Query((0, -1))

    def test_of_checks_vocabulary_range(self):
        assert Query.of([1, 1, 0], 3).activities == (1, 0)
        with pytest.raises(ValueError, match="outside vocabulary"):
            Query.of([3], 3)

    @given(st.lists(st.integers(0, 5), min_size=1, max_size=12))
    def test_dedup_property(self, ids):
        query = Query(tuple(ids))
        assert len(set(query.activities)) == len(query.activities)
        assert set(query.activities) == set(ids)


class TestCandidates:
    def test_requires_nonzero_count_on_some_queried_activity(self, toy_raw):
        assert candidates(toy_raw, Query((0,))) == {0, 1}
        assert candidates(toy_raw, Query((2,))) == {1}

    def test_union_over_query(self, toy_raw):
        assert candidates(toy_raw, Query((0, 2))) == {0, 1}

    def test_smoothing_does_not_widen_candidates(self):
        for query in [(0,), (1,), (2,), (0, 2)]:
            assert candidates(toy_index(0.0), Query(query)) == candidates(
                toy_index(5.0), Query(query)
            )

    def test_no_candidates_for_unendorsed_activity(self):
        vocabulary, destinations = toy_tables()
        index = EndorsementIndex.from_counts(
            vocabulary, destinations, [[8, 2, 0], [3, 3, 0]]
        )
        assert candidates(index, Query((2,))) == set()

    def test_out_of_range_activity_rejected(self, toy_raw):
        with pytest.raises(ValueError):
            candidates(toy_raw, Query((9,)))


class TestWorkedExamples:
    """Hand-computed unsmoothed scores on the toy corpus."""

    def test_popularity_single_activity(self, toy_raw):
        ranked = rank_popularity(toy_raw, Query((0,)))
        assert ranked.destination_ids() == [0, 1]
        probs = [math.exp(s) for _, s in ranked.entries]
        assert probs == pytest.approx([0.8, 0.3], abs=1e-12)

    def test_naive_bayes_single_activity(self, toy_raw):
        ranked = rank_naive_bayes(toy_raw, Query((0,)))
        assert ranked.destination_ids() == [0, 1]
        probs = [math.exp(s) for _, s in ranked.entries]
        assert probs == pytest.approx([0.40, 0.15], abs=1e-12)

    def test_popularity_two_activities(self, toy_raw):
        ranked = rank_popularity(toy_raw, Query((0, 1)))
        probs = [math.exp(s) for _, s in ranked.entries]
        assert ranked.destination_ids() == [0, 1]
        assert probs == pytest.approx([0.16, 0.09], abs=1e-12)

    def test_naive_bayes_two_activities(self, toy_raw):
        ranked = rank_naive_bayes(toy_raw, Query((0, 1)))
        probs = [math.exp(s) for _, s in ranked.entries]
        assert ranked.destination_ids() == [0, 1]
        assert probs == pytest.approx([0.08, 0.045], abs=1e-12)

    def test_zero_count_gives_minus_infinity_unsmoothed(self, toy_raw):
        # destination A never got a nightlife endorsement; with the beach
        # term it stays a candidate but sorts behind every finite score
        ranked = rank_naive_bayes(toy_raw, Query((0, 2)))
        assert ranked.destination_ids() == [1, 0]
        assert ranked.entries[-1][1] == -math.inf

    def test_smoothing_rescues_zero_counts(self, toy_smoothed):
        ranked = rank_naive_bayes(toy_smoothed, Query((0, 2)))
        assert all(math.isfinite(s) for _, s in ranked.entries)


class TestRandomRanker:
    def test_same_seed_same_order(self, toy_smoothed):
        q = Query((0, 1))
        assert rank_random(toy_smoothed, q, 7) == rank_random(toy_smoothed, q, 7)

    def test_output_is_permutation_of_candidates(self, toy_smoothed):
        q = Query((0,))
        ranked = rank_random(toy_smoothed, q, 123)
        assert sorted(ranked.destination_ids()) == sorted(candidates(toy_smoothed, q))

    def test_seeds_vary_order(self):
        vocabulary = toy_tables()[0]
        from endorsement_rank import Destination, DestinationTable

        destinations = DestinationTable(
            tuple(Destination(i, f"d{i}") for i in range(6))
        )
        index = EndorsementIndex.from_counts(
            vocabulary, destinations, [[1, 0, 0]] * 6
        )
        orders = {
            tuple(rank_random(index, Query((0,)), seed).destination_ids())
            for seed in range(30)
        }
        assert len(orders) > 1

    def test_scores_are_zero(self, toy_smoothed):
        ranked = rank_random(toy_smoothed, Query((0,)), 5)
        assert all(s == 0.0 for _, s in ranked.entries)
        assert ranked.seed == 5


class TestDispatch:
    def test_by_tag(self, toy_smoothed):
        q = Query((0,))
        assert rank(toy_smoothed, q, RankerTag.POPULARITY) == rank_popularity(
            toy_smoothed, q
        )
        assert rank(toy_smoothed, q, "naive_bayes") == rank_naive_bayes(toy_smoothed, q)
        assert rank(toy_smoothed, q, "random", seed=3) == rank_random(toy_smoothed, q, 3)

    def test_random_requires_seed(self, toy_smoothed):
        with pytest.raises(ValueError, match="seed"):
            rank(toy_smoothed, Query((0,)), RankerTag.RANDOM)

    def test_unknown_tag_rejected(self, toy_smoothed):
        with pytest.raises(ValueError):
            rank(toy_smoothed, Query((0,)), "pagerank")

    def test_tags_recorded(self, toy_smoothed):
        q = Query((0,))
        assert rank_popularity(toy_smoothed, q).ranker_tag is RankerTag.POPULARITY
        assert rank_naive_bayes(toy_smoothed, q).ranker_tag is RankerTag.NAIVE_BAYES
        assert rank_random(toy_smoothed, q, 1).ranker_tag is RankerTag.RANDOM


class TestTieBreaking:
    def test_equal_scores_order_by_id(self):
        vocabulary, _ = toy_tables()
        from endorsement_rank import Destination, DestinationTable

        destinations = DestinationTable(tuple(Destination(i, f"d{i}") for i in range(4)))
        # identical rows tie exactly on every score
        index = EndorsementIndex.from_counts(
            vocabulary, destinations, [[2, 1, 0]] * 4, alpha=1.0
        )
        for ranker in (rank_popularity, rank_naive_bayes):
            assert ranker(index, Query((0, 1))).destination_ids() == [0, 1, 2, 3]


class TestOracleEquivalence:
    """Log-space float scoring must reproduce exact-rational ranking."""

    @pytest.mark.parametrize("alpha", [Fraction(0), Fraction(1, 2), Fraction(1)])
    def test_random_corpora(self, alpha):
        rng = np.random.default_rng(2026)
        vocabulary, _ = toy_tables()
        from endorsement_rank import Destination, DestinationTable

        for trial in range(300):
            n_dest = int(rng.integers(2, 6))
            destinations = DestinationTable(
                tuple(Destination(i, f"d{i}") for i in range(n_dest))
            )
            counts = rng.integers(0, 7, size=(n_dest, 3))
            if counts.sum() == 0:
                continue
            index = EndorsementIndex.from_counts(
                vocabulary, destinations, counts, alpha=float(alpha)
            )
            for _ in range(5):
                k = int(rng.integers(1, 4))
                query = tuple(int(a) for a in rng.choice(3, size=k, replace=False))
                counts_list = counts.tolist()
                assert_matches_oracle(
                    rank_popularity(index, Query(query)),
                    oracle_order(counts_list, alpha, query, include_prior=False),
                )
                assert_matches_oracle(
                    rank_naive_bayes(index, Query(query)),
                    oracle_order(counts_list, alpha, query, include_prior=True),
                )


class TestScoreProperties:
    def test_more_evidence_never_hurts_rank(self):
        """Moving one endorsement from an unqueried activity onto the
        queried one (same N_d) must strictly raise the score and never
        worsen the destination's position."""
        rng = np.random.default_rng(7)
        vocabulary, _ = toy_tables()
        from endorsement_rank import Destination, DestinationTable

        for _ in range(50):
            n_dest = int(rng.integers(2, 6))
            destinations = DestinationTable(
                tuple(Destination(i, f"d{i}") for i in range(n_dest))
            )
            counts = rng.integers(1, 8, size=(n_dest, 3))
            d = int(rng.integers(0, n_dest))
            query = (0,)
            bumped = counts.copy()
            bumped[d, 0] += 1
            bumped[d, 2] -= 1
            if bumped[d, 2] < 0:
                continue
            for ranker in (rank_popularity, rank_naive_bayes):
                before = ranker(
                    EndorsementIndex.from_counts(vocabulary, destinations, counts),
                    Query(query),
                )
                after = ranker(
                    EndorsementIndex.from_counts(vocabulary, destinations, bumped),
                    Query(query),
                )
                score_before = dict(before.entries)[d]
                score_after = dict(after.entries)[d]
                assert score_after > score_before
                assert after.destination_ids().index(d) <= before.destination_ids().index(d)

    def test_prior_separates_naive_bayes_from_popularity(self):
        """Two destinations with identical conditionals but different
        endorsement volume: popularity ties (id order), the prior breaks
        the tie toward the bigger destination."""
        vocabulary, _ = toy_tables()
        from endorsement_rank import Destination, DestinationTable

        destinations = DestinationTable((Destination(0, "small"), Destination(1, "big")))
        index = EndorsementIndex.from_counts(
            vocabulary, destinations, [[2, 1, 1], [20, 10, 10]], alpha=0.0
        )
        q = Query((0,))
        assert rank_popularity(index, q).destination_ids() == [0, 1]
        assert rank_naive_bayes(index, q).destination_ids() == [1, 0]

    def test_scores_continuous_in_alpha(self):
        """A small smoothing perturbation moves scores by at most
        len(query) * 2 * eps / alpha."""
        vocabulary, destinations = toy_tables()
        alpha, eps = 1.0, 1e-6
        base = EndorsementIndex.from_counts(
            vocabulary, destinations, TOY_COUNTS, alpha=alpha
        )
        bumped = EndorsementIndex.from_counts(
            vocabulary, destinations, TOY_COUNTS, alpha=alpha + eps
        )
        query = Query((0, 1, 2))
        bound = len(query.activities) * 2 * eps / alpha
        for ranker in (rank_popularity, rank_naive_bayes):
            for (d1, s1), (d2, s2) in zip(
                ranker(base, query).entries, ranker(bumped, query).entries
            ):
                assert d1 == d2
                assert abs(s1 - s2) <= bound

    def test_entries_subset_of_candidates_no_duplicates(self, toy_smoothed):
        for tag in RankerTag:
            ranked = rank(toy_smoothed, Query((0, 1)), tag, seed=11)
            ids = ranked.destination_ids()
            assert len(set(ids)) == len(ids)
            assert set(ids) == candidates(toy_smoothed, Query((0, 1)))
