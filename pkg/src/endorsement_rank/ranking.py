"""Destination rankers over an endorsement index.

All three rankers share one retrieval rule: a destination is a candidate
for a query iff it has a nonzero raw count for at least one queried
activity. Smoothing never widens the candidate set. The rankers differ
only in how they order the candidates:

* random: seeded uniform permutation (control arm),
* popularity: product of smoothed conditionals P(e|d),
* naive_bayes: endorsement-share prior P(d) times the same conditionals.

Scoring happens in log space. Products of many small conditionals
underflow float64 well before a realistic query length, while their logs
stay comfortably in range, so scores are sums of precomputed log tables
and the reported score of a destination is its log probability. Ties on
score break toward the smaller destination id, which keeps every ranker
deterministic given its inputs (plus the seed, for random).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .corpus import EndorsementIndex


class RankerTag(str, Enum):
    RANDOM = "random"
    POPULARITY = "popularity"
    NAIVE_BAYES = "naive_bayes"


@dataclass(frozen=True)
class Query:
    """Deduplicated activity ids, in first-appearance order."""

    activities: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.activities:
            raise ValueError("query must name at least one activity")
        seen: set[int] = set()
        deduped = []
        for a in self.activities:
            if a < 0:
                raise ValueError(f"negative activity id {a}")
            if a not in seen:
                seen.add(a)
                deduped.append(int(a))
        object.__setattr__(self, "activities", tuple(deduped))

    @classmethod
    def of(cls, activities: Iterable[int], n_activities: int | None = None) -> "Query":
        query = cls(tuple(activities))
        if n_activities is not None:
            out_of_range = [a for a in query.activities if a >= n_activities]
            if out_of_range:
                raise ValueError(f"activity ids {out_of_range} outside vocabulary of {n_activities}")
        return query


@dataclass(frozen=True)
class RankedList:
    """Ranker output: (destination_id, score) pairs, best first.

    Scores are log probabilities for the probabilistic rankers and 0.0
    for the random ranker, whose order carries no score information.
    """

    entries: tuple[tuple[int, float], ...]
    ranker_tag: RankerTag
    seed: int | None = None

    def destination_ids(self) -> list[int]:
        return [d for d, _ in self.entries]


def candidates(index: EndorsementIndex, query: Query) -> set[int]:
    """Destinations with a nonzero raw count for any queried activity.

    Membership is decided by raw counts, so it is identical for smoothed
    and unsmoothed indexes built from the same reviews.
    """
    _check_query(index, query)
    cols = index.counts[:, list(query.activities)]
    return set(np.flatnonzero(cols.any(axis=1)).tolist())


def rank_random(index: EndorsementIndex, query: Query, seed: int) -> RankedList:
    """Uniform random permutation of the candidate set.

    The permutation is a function of the seed alone (given the candidate
    set), so repeated calls with one seed agree exactly.
    """
    cand = _candidate_array(index, query)
    rng = np.random.default_rng(seed)
    shuffled = cand.copy()
    rng.shuffle(shuffled)
    entries = tuple((int(d), 0.0) for d in shuffled)
    return RankedList(entries, RankerTag.RANDOM, seed=int(seed))


def rank_popularity(index: EndorsementIndex, query: Query) -> RankedList:
    """Order candidates by the product of smoothed conditionals P(e|d)."""
    cand = _candidate_array(index, query)
    scores = index.log_conditional[np.ix_(cand, list(query.activities))].sum(axis=1)
    return RankedList(_sorted_entries(cand, scores), RankerTag.POPULARITY)


def rank_naive_bayes(index: EndorsementIndex, query: Query) -> RankedList:
    """Order candidates by prior times conditionals, P(d) * prod P(e|d)."""
    cand = _candidate_array(index, query)
    scores = index.log_prior[cand] + index.log_conditional[
        np.ix_(cand, list(query.activities))
    ].sum(axis=1)
    return RankedList(_sorted_entries(cand, scores), RankerTag.NAIVE_BAYES)


def rank(
    index: EndorsementIndex,
    query: Query,
    ranker_tag: RankerTag | str,
    seed: int | None = None,
) -> RankedList:
    """Dispatch to one ranker by tag."""
    tag = RankerTag(ranker_tag)
    if tag is RankerTag.RANDOM:
        if seed is None:
            raise ValueError("the random ranker requires a seed")
        return rank_random(index, query, seed)
    if tag is RankerTag.POPULARITY:
        return rank_popularity(index, query)
    return rank_naive_bayes(index, query)


def _check_query(index: EndorsementIndex, query: Query) -> None:
    bad = [a for a in query.activities if a >= index.n_activities]
    if bad:
        raise ValueError(f"activity ids {bad} outside vocabulary of {index.n_activities}")


def _candidate_array(index: EndorsementIndex, query: Query) -> np.ndarray:
    _check_query(index, query)
    cols = index.counts[:, list(query.activities)]
    return np.flatnonzero(cols.any(axis=1))


def _sorted_entries(
    cand: np.ndarray, scores: np.ndarray
) -> tuple[tuple[int, float], ...]:
    # lexsort's last key wins: descending score, then ascending id on ties.
    order = np.lexsort((cand, -scores))
    return tuple((int(cand[i]), float(scores[i])) for i in order)
