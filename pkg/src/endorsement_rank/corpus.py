"""Endorsement corpus: activity vocabulary, destination table, reviews,
and the aggregated count index that the rankers score against.

A review records which activities a traveller endorsed for one
destination. Absence of an endorsement carries no signal: it means
unknown, not disliked. All downstream probability estimates are built
from the nonnegative count matrix ``c[d, e]`` assembled here.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

#: Laplace smoothing constant used when none is given. Zero selects the
#: unsmoothed maximum-likelihood estimates.
DEFAULT_ALPHA = 1.0

_REVIEW_HEADER = ["user_id", "destination_id", "endorsements"]
_DEST_HEADER = ["destination_id", "name", "country_code"]


class IngestError(ValueError):
    """An input file violates the corpus contracts."""


@dataclass(frozen=True)
class ActivityVocabulary:
    """Ordered activity names; the position of a name is its activity id."""

    names: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.names:
            raise IngestError("vocabulary must contain at least one activity")
        seen: dict[str, int] = {}
        for i, name in enumerate(self.names):
            if not name or name != name.strip():
                raise IngestError(f"activity {i}: name must be non-empty and trimmed")
            if name in seen:
                raise IngestError(f"duplicate activity name {name!r} (ids {seen[name]} and {i})")
            seen[name] = i
        object.__setattr__(self, "_ids", seen)

    def __len__(self) -> int:
        return len(self.names)

    def id_of(self, name: str) -> int:
        """Exact-match lookup. Raises KeyError for unknown names."""
        return self._ids[name]  # type: ignore[attr-defined]

    def resolve(self, text: str) -> int | None:
        """Forgiving lookup: trims whitespace, matches case-insensitively."""
        cleaned = text.strip()
        hit = self._ids.get(cleaned)  # type: ignore[attr-defined]
        if hit is not None:
            return hit
        lowered = cleaned.lower()
        for i, name in enumerate(self.names):
            if name.lower() == lowered:
                return i
        return None


@dataclass(frozen=True)
class Destination:
    destination_id: int
    name: str
    country_code: str = ""


@dataclass(frozen=True)
class DestinationTable:
    """Destinations with contiguous ids 0..D-1, stored in id order."""

    destinations: tuple[Destination, ...]

    def __post_init__(self) -> None:
        if not self.destinations:
            raise IngestError("destination table must not be empty")
        names: set[str] = set()
        for i, dest in enumerate(self.destinations):
            if dest.destination_id != i:
                raise IngestError(
                    f"destination ids must be contiguous from 0; found {dest.destination_id} at position {i}"
                )
            if not dest.name or dest.name != dest.name.strip():
                raise IngestError(f"destination {i}: name must be non-empty and trimmed")
            if dest.name in names:
                raise IngestError(f"duplicate destination name {dest.name!r}")
            names.add(dest.name)
        object.__setattr__(self, "_ids", {d.name: d.destination_id for d in self.destinations})

    def __len__(self) -> int:
        return len(self.destinations)

    def id_of(self, name: str) -> int:
        return self._ids[name]  # type: ignore[attr-defined]

    def name_of(self, destination_id: int) -> str:
        return self.destinations[destination_id].name


@dataclass(frozen=True)
class Review:
    """One traveller's endorsements for one destination.

    ``endorsed`` holds activity ids; it is never empty. Activities absent
    from the set are unknown, not negative.
    """

    user_id: str
    destination_id: int
    endorsed: frozenset[int]

    def __post_init__(self) -> None:
        if not self.user_id:
            raise IngestError("review user_id must be non-empty")
        if self.destination_id < 0:
            raise IngestError("review destination_id must be nonnegative")
        if not self.endorsed:
            raise IngestError("review must endorse at least one activity")


@dataclass(frozen=True)
class ReviewLoadResult:
    reviews: tuple[Review, ...]
    skipped_endorsements: int = 0
    skipped_rows: int = 0


def load_vocabulary(source: IO[str] | str | Path) -> ActivityVocabulary:
    """Read one activity name per line; blank lines are ignored."""
    with _opened(source) as handle:
        names = [line.strip() for line in handle]
    return ActivityVocabulary(tuple(n for n in names if n))


def load_destinations(source: IO[str] | str | Path) -> DestinationTable:
    """Read the destination CSV (header ``destination_id,name,country_code``)."""
    with _opened(source) as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != _DEST_HEADER:
            raise IngestError(f"destination file must start with header {','.join(_DEST_HEADER)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise IngestError(f"destination file line {lineno}: expected 3 fields, got {len(row)}")
            raw_id, name, country = row
            try:
                dest_id = int(raw_id)
            except ValueError:
                raise IngestError(f"destination file line {lineno}: bad id {raw_id!r}") from None
            rows.append(Destination(dest_id, name.strip(), country.strip()))
    rows.sort(key=lambda d: d.destination_id)
    return DestinationTable(tuple(rows))


def load_reviews(
    source: IO[str] | str | Path,
    vocabulary: ActivityVocabulary,
    destinations: DestinationTable,
    *,
    lenient: bool = False,
) -> ReviewLoadResult:
    """Read the review CSV (header ``user_id,destination_id,endorsements``).

    The ``destination_id`` column carries the destination *name*; the
    ``endorsements`` column is a ``|``-separated list of activity names.
    Unknown destination names are an error in both modes. Unknown activity
    names are an error in strict mode; in lenient mode they are dropped and
    counted, and a row left with no valid endorsements is skipped rather
    than rejected.
    """
    reviews: list[Review] = []
    skipped_endorsements = 0
    skipped_rows = 0
    with _opened(source) as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != _REVIEW_HEADER:
            raise IngestError(f"review file must start with header {','.join(_REVIEW_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise IngestError(f"review file line {lineno}: expected 3 fields, got {len(row)}")
            user_id, dest_name, endorsed_field = row
            user_id = user_id.strip()
            if not user_id:
                raise IngestError(f"review file line {lineno}: empty user_id")
            try:
                dest_id = destinations.id_of(dest_name.strip())
            except KeyError:
                raise IngestError(
                    f"review file line {lineno}: unknown destination {dest_name.strip()!r}"
                ) from None
            endorsed: set[int] = set()
            for token in endorsed_field.split("|"):
                token = token.strip()
                if not token:
                    continue
                try:
                    endorsed.add(vocabulary.id_of(token))
                except KeyError:
                    if not lenient:
                        raise IngestError(
                            f"review file line {lineno}: unknown activity {token!r}"
                        ) from None
                    skipped_endorsements += 1
            if not endorsed:
                if not lenient:
                    raise IngestError(f"review file line {lineno}: no valid endorsements")
                skipped_rows += 1
                continue
            reviews.append(Review(user_id, dest_id, frozenset(endorsed)))
    return ReviewLoadResult(tuple(reviews), skipped_endorsements, skipped_rows)


@dataclass(frozen=True, eq=False)
class EndorsementIndex:
    """Aggregated endorsement counts plus the probability tables derived
    from them.

    ``counts[d, e]`` is the number of reviews of destination ``d`` that
    endorsed activity ``e``. Row sums give per-destination endorsement
    totals ``N_d``; their grand total is ``N``. Conditionals are Laplace
    smoothed, ``P(e|d) = (c + alpha) / (N_d + alpha * V)``; the prior
    ``P(d) = N_d / N`` is deliberately left unsmoothed so destinations
    with no endorsements keep zero prior mass.

    Log tables are precomputed once so a query scores with a handful of
    vectorized adds. With ``alpha = 0`` zero counts make the log tables
    hit ``-inf``, which is the intended unsmoothed behaviour.
    """

    vocabulary: ActivityVocabulary
    destinations: DestinationTable
    counts: np.ndarray
    alpha: float = DEFAULT_ALPHA
    built_at: str = ""
    source_digest: str = ""
    dest_totals: np.ndarray = field(init=False, repr=False)
    grand_total: int = field(init=False, repr=False)
    log_conditional: np.ndarray = field(init=False, repr=False)
    log_prior: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2:
            raise IngestError("counts must be a 2-d matrix")
        d, v = counts.shape
        if d != len(self.destinations) or v != len(self.vocabulary):
            raise IngestError(
                f"counts shape {counts.shape} does not match {len(self.destinations)} destinations "
                f"x {len(self.vocabulary)} activities"
            )
        if (counts < 0).any():
            raise IngestError("counts must be nonnegative")
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise IngestError("alpha must be a finite nonnegative number")
        totals = counts.sum(axis=1)
        grand = int(totals.sum())
        if grand == 0:
            raise IngestError("index must contain at least one endorsement")
        # divide: log(0) -> -inf is the intended unsmoothed limit.
        # invalid: a destination with zero endorsements gets NaN conditionals
        # at alpha=0; such rows can never enter a candidate set.
        with np.errstate(divide="ignore", invalid="ignore"):
            log_cond = np.log(counts + self.alpha) - np.log(
                totals[:, None] + self.alpha * v
            )
            log_prior = np.log(totals) - np.log(grand)
        for arr in (counts, totals, log_cond, log_prior):
            arr.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "dest_totals", totals)
        object.__setattr__(self, "grand_total", grand)
        object.__setattr__(self, "log_conditional", log_cond)
        object.__setattr__(self, "log_prior", log_prior)

    @property
    def n_destinations(self) -> int:
        return self.counts.shape[0]

    @property
    def n_activities(self) -> int:
        return self.counts.shape[1]

    def conditional(self, destination_id: int, activity_id: int) -> float:
        """Smoothed P(activity | destination)."""
        c = self.counts[destination_id, activity_id]
        n_d = self.dest_totals[destination_id]
        return float((c + self.alpha) / (n_d + self.alpha * self.n_activities))

    def prior(self, destination_id: int) -> float:
        """Unsmoothed endorsement-share prior P(destination)."""
        return float(self.dest_totals[destination_id] / self.grand_total)

    @classmethod
    def from_counts(
        cls,
        vocabulary: ActivityVocabulary,
        destinations: DestinationTable,
        counts: np.ndarray | Sequence[Sequence[int]],
        *,
        alpha: float = DEFAULT_ALPHA,
        built_at: str | None = None,
        source_digest: str | None = None,
    ) -> "EndorsementIndex":
        """Assemble an index directly from a count matrix."""
        counts = np.asarray(counts, dtype=np.int64)
        if built_at is None:
            built_at = _utc_now()
        if source_digest is None:
            source_digest = _digest_of_counts(vocabulary, destinations, counts)
        return cls(vocabulary, destinations, counts, alpha, built_at, source_digest)


def build_index(
    reviews: Iterable[Review],
    vocabulary: ActivityVocabulary,
    destinations: DestinationTable,
    alpha: float = DEFAULT_ALPHA,
) -> EndorsementIndex:
    """Aggregate reviews into an EndorsementIndex.

    Repeat reviews by the same user accumulate additively; the index keeps
    no per-user state. The source digest is computed over the sorted review
    tuples so any permutation of the same reviews produces the same digest.
    """
    review_list = list(reviews)
    if not review_list:
        raise IngestError("cannot build an index from zero reviews")
    counts = np.zeros((len(destinations), len(vocabulary)), dtype=np.int64)
    for review in review_list:
        if review.destination_id >= len(destinations):
            raise IngestError(f"review destination id {review.destination_id} out of range")
        ids = sorted(review.endorsed)
        if ids[0] < 0 or ids[-1] >= len(vocabulary):
            raise IngestError(f"review endorses activity id outside vocabulary: {ids}")
        counts[review.destination_id, ids] += 1
    digest = _digest_of_reviews(vocabulary, destinations, review_list)
    return EndorsementIndex(vocabulary, destinations, counts, alpha, _utc_now(), digest)


def endorsement_profile(
    index: EndorsementIndex, destination_id: int, top_k: int = 5
) -> list[tuple[int, float]]:
    """Top activities for a destination as (activity_id, share) pairs.

    Share is the raw count fraction ``c(d, e) / N_d``, not the smoothed
    conditional. Only activities with nonzero counts appear; ties on share
    break toward the smaller activity id. ``top_k`` larger than the number
    of nonzero activities returns all of them.
    """
    if not 0 <= destination_id < index.n_destinations:
        raise IngestError(f"destination id {destination_id} out of range")
    if top_k < 1:
        raise IngestError("top_k must be at least 1")
    row = index.counts[destination_id]
    total = index.dest_totals[destination_id]
    if total == 0:
        return []
    nonzero = np.flatnonzero(row)
    order = nonzero[np.lexsort((nonzero, -row[nonzero]))]
    return [(int(e), float(row[e] / total)) for e in order[:top_k]]


# --- snapshot serialization ---------------------------------------------

_SNAPSHOT_VERSION = 1


def save_index(index: EndorsementIndex, target: IO[str] | str | Path) -> None:
    """Write the index as canonical JSON (sorted keys, fixed separators).

    Counts are stored as sparse (destination, activity, count) triples in
    ascending order, so equal indexes serialize to identical bytes.
    """
    d_idx, e_idx = np.nonzero(index.counts)
    triples = [
        [int(d), int(e), int(index.counts[d, e])] for d, e in zip(d_idx.tolist(), e_idx.tolist())
    ]
    payload = {
        "version": _SNAPSHOT_VERSION,
        "alpha": index.alpha,
        "built_at": index.built_at,
        "source_digest": index.source_digest,
        "activities": list(index.vocabulary.names),
        "destinations": [
            [d.destination_id, d.name, d.country_code] for d in index.destinations.destinations
        ],
        "counts": triples,
    }
    text = json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"
    if hasattr(target, "write"):
        target.write(text)  # type: ignore[union-attr]
    else:
        Path(target).write_text(text, encoding="utf-8")


def load_index(source: IO[str] | str | Path) -> EndorsementIndex:
    """Read an index snapshot written by :func:`save_index`."""
    with _opened(source) as handle:
        try:
            payload = json.load(handle)
        except json.JSONDecodeError as exc:
            raise IngestError(f"index snapshot is not valid JSON: {exc}") from None
    for key in ("version", "alpha", "built_at", "source_digest", "activities", "destinations", "counts"):
        if key not in payload:
            raise IngestError(f"index snapshot missing field {key!r}")
    if payload["version"] != _SNAPSHOT_VERSION:
        raise IngestError(f"unsupported snapshot version {payload['version']!r}")
    vocabulary = ActivityVocabulary(tuple(payload["activities"]))
    destinations = DestinationTable(
        tuple(Destination(int(i), str(n), str(c)) for i, n, c in payload["destinations"])
    )
    counts = np.zeros((len(destinations), len(vocabulary)), dtype=np.int64)
    for triple in payload["counts"]:
        if len(triple) != 3:
            raise IngestError(f"malformed count triple {triple!r}")
        d, e, c = (int(x) for x in triple)
        if not (0 <= d < len(destinations) and 0 <= e < len(vocabulary)) or c <= 0:
            raise IngestError(f"count triple out of range: {triple!r}")
        counts[d, e] = c
    return EndorsementIndex(
        vocabulary,
        destinations,
        counts,
        float(payload["alpha"]),
        str(payload["built_at"]),
        str(payload["source_digest"]),
    )


# --- helpers --------------------------------------------------------------


class _opened:
    """Context manager that opens paths and passes streams through."""

    def __init__(self, source: IO[str] | str | Path):
        self._source = source
        self._owned: IO[str] | None = None

    def __enter__(self) -> IO[str]:
        if hasattr(self._source, "read"):
            return self._source  # type: ignore[return-value]
        self._owned = open(self._source, "r", encoding="utf-8", newline="")  # type: ignore[arg-type]
        return self._owned

    def __exit__(self, *exc: object) -> None:
        if self._owned is not None:
            self._owned.close()


def _utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _canonical_digest(payload: object) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def _digest_of_reviews(
    vocabulary: ActivityVocabulary,
    destinations: DestinationTable,
    reviews: Sequence[Review],
) -> str:
    # Sorted tuples make the digest insensitive to review order.
    rows = sorted((r.user_id, r.destination_id, sorted(r.endorsed)) for r in reviews)
    return _canonical_digest(
        {
            "activities": list(vocabulary.names),
            "destinations": [
                [d.destination_id, d.name, d.country_code] for d in destinations.destinations
            ],
            "reviews": [[u, d, e] for u, d, e in rows],
        }
    )


def _digest_of_counts(
    vocabulary: ActivityVocabulary, destinations: DestinationTable, counts: np.ndarray
) -> str:
    d_idx, e_idx = np.nonzero(counts)
    return _canonical_digest(
        {
            "activities": list(vocabulary.names),
            "destinations": [
                [d.destination_id, d.name, d.country_code] for d in destinations.destinations
            ],
            "counts": [[int(d), int(e), int(counts[d, e])] for d, e in zip(d_idx, e_idx)],
        }
    )
