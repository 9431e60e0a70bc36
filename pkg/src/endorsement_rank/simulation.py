"""Synthetic traffic for end-to-end evaluation.

A world config fixes a ground-truth affinity matrix: the probability
that a visitor of a destination endorses an activity. From it we draw a
review corpus, build an index, and push simulated users through the
search flow. Users carry small latent interest profiles; clicks follow
a position-discounted relevance model, so a ranker that puts genuinely
relevant destinations on top converts better. Everything is seeded and
reproducible: per-user generators are spawned from (seed, user ordinal),
so one user's draws never depend on how many other users ran.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import IO, Sequence

import numpy as np

from .corpus import (
    ActivityVocabulary,
    Destination,
    DestinationTable,
    EndorsementIndex,
    Review,
    build_index,
)
from .experiment import (
    ExperimentConfig,
    ExperimentReport,
    SessionRecord,
    assign_variant,
    evaluate,
)
from .ranking import Query, RankerTag, rank

_SIM_EPOCH = datetime(2026, 1, 1, tzinfo=timezone.utc)

#: Most interest profiles and queries use 1 to 3 activities.
_MAX_INTERESTS = 3


@dataclass(frozen=True, eq=False)
class WorldConfig:
    """Ground truth for a simulated market.

    ``affinity[d, e]`` is the probability that a review of destination
    ``d`` endorses activity ``e``, and doubles as the relevance of ``d``
    to a user interested in ``e``.
    """

    n_destinations: int
    n_activities: int
    affinity: np.ndarray
    reviews_per_destination: int
    seed: int

    def __post_init__(self) -> None:
        if self.n_destinations < 1 or self.n_activities < 1:
            raise ValueError("world needs at least one destination and one activity")
        if self.reviews_per_destination < 1:
            raise ValueError("reviews_per_destination must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        affinity = np.asarray(self.affinity, dtype=np.float64)
        if affinity.shape != (self.n_destinations, self.n_activities):
            raise ValueError(
                f"affinity shape {affinity.shape} does not match "
                f"{self.n_destinations} x {self.n_activities}"
            )
        if np.isnan(affinity).any() or (affinity < 0).any() or (affinity > 1).any():
            raise ValueError("affinity values must lie in [0, 1]")
        if (affinity.sum(axis=1) <= 0).any():
            raise ValueError("every destination needs positive affinity for some activity")
        affinity.setflags(write=False)
        object.__setattr__(self, "affinity", affinity)

    @classmethod
    def from_json(cls, source: IO[str] | str | Path) -> "WorldConfig":
        if hasattr(source, "read"):
            payload = json.load(source)  # type: ignore[arg-type]
        else:
            payload = json.loads(Path(source).read_text(encoding="utf-8"))
        try:
            return cls(
                n_destinations=int(payload["n_destinations"]),
                n_activities=int(payload["n_activities"]),
                affinity=np.asarray(payload["affinity"], dtype=np.float64),
                reviews_per_destination=int(payload["reviews_per_destination"]),
                seed=int(payload["seed"]),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed world config: {exc}") from None

    def to_json(self) -> str:
        payload = {
            "n_destinations": self.n_destinations,
            "n_activities": self.n_activities,
            "affinity": self.affinity.tolist(),
            "reviews_per_destination": self.reviews_per_destination,
            "seed": self.seed,
        }
        return json.dumps(payload, indent=2) + "\n"


def synthetic_tables(world: WorldConfig) -> tuple[ActivityVocabulary, DestinationTable]:
    """Vocabulary and destination table matching a world's dimensions."""
    vocabulary = ActivityVocabulary(
        tuple(f"activity_{e:03d}" for e in range(world.n_activities))
    )
    destinations = DestinationTable(
        tuple(
            Destination(d, f"destination_{d:04d}", "XX") for d in range(world.n_destinations)
        )
    )
    return vocabulary, destinations


def generate_corpus(world: WorldConfig) -> list[Review]:
    """Draw the review corpus implied by the world's affinity matrix.

    Each destination receives exactly ``reviews_per_destination`` reviews
    from distinct synthetic users. A draw that endorses nothing is
    redrawn, since reviews carry at least one endorsement by contract.
    """
    rng = np.random.default_rng(world.seed)
    reviews: list[Review] = []
    for d in range(world.n_destinations):
        row = world.affinity[d]
        for i in range(world.reviews_per_destination):
            for _ in range(10_000):
                endorsed = np.flatnonzero(rng.random(world.n_activities) < row)
                if endorsed.size:
                    break
            else:  # pragma: no cover - affinity rows are validated positive
                raise RuntimeError(f"destination {d}: could not draw a nonempty review")
            reviews.append(
                Review(f"rev-{d}-{i}", d, frozenset(int(e) for e in endorsed))
            )
    return reviews


def build_world_index(world: WorldConfig, alpha: float = 1.0) -> EndorsementIndex:
    """Corpus generation and index build in one step."""
    vocabulary, destinations = synthetic_tables(world)
    return build_index(generate_corpus(world), vocabulary, destinations, alpha)


@dataclass(frozen=True, eq=False)
class ClickModel:
    """Position-biased click behaviour.

    A user interested in activities ``e_i`` with weights ``w_i`` finds
    destination ``d`` relevant with strength ``sum_i w_i * affinity[d, e_i]``.
    The click probability at 0-based position ``r`` is that relevance
    times ``1 / log2(r + 2)``: position 0 gets the full relevance and
    lower rows decay slowly, which rewards putting good items first.
    """

    affinity: np.ndarray
    page_size: int = 10

    def __post_init__(self) -> None:
        if self.page_size < 1:
            raise ValueError("page_size must be at least 1")
        discounts = 1.0 / np.log2(np.arange(self.page_size) + 2.0)
        discounts.setflags(write=False)
        object.__setattr__(self, "_discounts", discounts)

    def position_discount(self, position: int) -> float:
        return 1.0 / math.log2(position + 2)

    def relevance(self, interest_ids: Sequence[int], weights: Sequence[float], destination_id: int) -> float:
        w = np.asarray(weights, dtype=np.float64)
        return float(w @ self.affinity[destination_id, list(interest_ids)])

    def click_probabilities(
        self,
        interest_ids: Sequence[int],
        weights: Sequence[float],
        shown: Sequence[int],
    ) -> np.ndarray:
        n = len(shown)
        if n == 0:
            return np.zeros(0)
        rel = self.affinity[np.asarray(shown)][:, np.asarray(interest_ids)] @ np.asarray(weights)
        return rel * self._discounts[:n]  # type: ignore[attr-defined]


@dataclass(frozen=True)
class InterestProfile:
    activities: tuple[int, ...]
    weights: tuple[float, ...]


def sample_interests(rng: np.random.Generator, n_activities: int) -> InterestProfile:
    """Draw a small latent interest profile: 1-3 activities with
    Dirichlet weights."""
    k = int(rng.integers(1, min(_MAX_INTERESTS, n_activities) + 1))
    ids = rng.choice(n_activities, size=k, replace=False)
    weights = rng.dirichlet(np.ones(k))
    return InterestProfile(tuple(int(a) for a in ids), tuple(float(w) for w in weights))


def simulate_user_session(
    index: EndorsementIndex,
    click_model: ClickModel,
    interests: InterestProfile,
    ranker_tag: RankerTag,
    rng: np.random.Generator | int,
    *,
    user_id: str,
    variant: str,
    timestamp: str = "",
) -> SessionRecord:
    """One search-and-click session.

    The query is a weighted subsample of the interest profile; clicks are
    independent Bernoulli draws from the click model over the first page.
    A query with no candidate destinations yields an empty impression.
    """
    rng = np.random.default_rng(rng)
    k = int(rng.integers(1, len(interests.activities) + 1))
    query_ids = rng.choice(
        interests.activities, size=k, replace=False, p=interests.weights
    )
    query = Query.of(tuple(int(a) for a in query_ids), index.n_activities)
    # The shuffle seed is drawn for every arm so that all rankers consume
    # an identical stream; only the random arm uses it.
    shuffle_seed = int(rng.integers(0, 2**63))
    ranked = rank(index, query, ranker_tag, seed=shuffle_seed)
    shown = tuple(ranked.destination_ids()[: click_model.page_size])
    probs = click_model.click_probabilities(interests.activities, interests.weights, shown)
    draws = rng.random(len(shown))
    clicked = tuple(d for d, p, u in zip(shown, probs, draws) if u < p)
    return SessionRecord(
        user_id=user_id,
        variant=variant,
        query=query.activities,
        shown=shown,
        clicked=clicked,
        timestamp=timestamp,
    )


def simulate_sessions(
    world: WorldConfig,
    config: ExperimentConfig,
    n_users: int,
    seed: int,
    *,
    alpha: float = 1.0,
    page_size: int = 10,
    index: EndorsementIndex | None = None,
) -> list[SessionRecord]:
    """Run ``n_users`` single-session users through the experiment.

    Users are bucketed by the experiment config exactly as the live
    service would bucket them. Passing a prebuilt ``index`` skips corpus
    regeneration when the same world is reused across many runs.
    """
    if n_users < 1:
        raise ValueError("n_users must be at least 1")
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    if index is None:
        index = build_world_index(world, alpha)
    click_model = ClickModel(world.affinity, page_size)
    records: list[SessionRecord] = []
    for i in range(n_users):
        user_id = f"u{i:07d}"
        variant = assign_variant(user_id, config)
        rng = np.random.default_rng([seed, i])
        interests = sample_interests(rng, world.n_activities)
        timestamp = (_SIM_EPOCH + timedelta(seconds=i)).strftime("%Y-%m-%dT%H:%M:%SZ")
        records.append(
            simulate_user_session(
                index,
                click_model,
                interests,
                variant.ranker,
                rng,
                user_id=user_id,
                variant=variant.name,
                timestamp=timestamp,
            )
        )
    return records


def run_ab_simulation(
    world: WorldConfig,
    config: ExperimentConfig,
    n_users: int,
    seed: int,
    *,
    alpha: float = 1.0,
    page_size: int = 10,
    level: float = 0.90,
    unit: str = "user",
    index: EndorsementIndex | None = None,
) -> ExperimentReport:
    """Simulate traffic and evaluate it in one step."""
    records = simulate_sessions(
        world, config, n_users, seed, alpha=alpha, page_size=page_size, index=index
    )
    return evaluate(records, config, level=level, unit=unit)


def planted_world(
    n_destinations: int = 40,
    n_activities: int = 8,
    reviews_per_destination: int = 250,
    seed: int = 101,
) -> WorldConfig:
    """A world where the three rankers separate cleanly.

    Regular destinations have a primary and a secondary theme whose
    affinity declines with the destination id, so the prior carries real
    signal. Every fifth destination is a trap: its reviews are almost
    pure (nearly every review endorses the single theme) but visitors
    rarely endorse anything at all, so its conditional P(e|d) is high
    while its true appeal is poor. Popularity promotes traps; the prior
    in the Bayes score demotes them; random ignores scores entirely.
    """
    if n_destinations < 2 or n_activities < 2:
        raise ValueError("planted world needs at least 2 destinations and 2 activities")
    affinity = np.zeros((n_destinations, n_activities))
    for d in range(n_destinations):
        theme = d % n_activities
        second = (d + max(1, n_activities // 2)) % n_activities
        quality = 0.55 - 0.4 * d / max(1, n_destinations - 1)
        if d % 5 == 4:
            affinity[d, :] = 0.003
            affinity[d, theme] = 0.05
        else:
            affinity[d, :] = 0.10 * quality
            affinity[d, theme] = quality
            if second != theme:
                affinity[d, second] = 0.5 * quality
    return WorldConfig(
        n_destinations=n_destinations,
        n_activities=n_activities,
        affinity=affinity,
        reviews_per_destination=reviews_per_destination,
        seed=seed,
    )
