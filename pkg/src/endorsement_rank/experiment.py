"""A/B experimentation: deterministic user bucketing, conversion
summaries with confidence intervals, and a 2x2 G-test for comparing a
variant against the control.

Bucketing hashes ``salt:user_id`` with 64-bit FNV-1a into 10,000 buckets
that are carved into contiguous ranges proportional to variant weights.
The same user therefore lands in the same variant on every request, for
the lifetime of the salt, with no stored assignment state.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from statistics import NormalDist
from typing import IO, Iterable, Mapping, Sequence

from .ranking import RankerTag

# Pinned z values for the usual levels; other levels fall back to the
# exact normal quantile.
_Z_TABLE = {0.90: 1.6449, 0.95: 1.96, 0.99: 2.5758}

_CLICK_LOG_HEADER = ["timestamp", "user_id", "variant", "query", "shown", "clicked"]

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

N_BUCKETS = 10_000


class MissingControlError(ValueError):
    """Raised when an evaluation has no usable control arm to compare against."""


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


@dataclass(frozen=True)
class Variant:
    name: str
    ranker: RankerTag
    weight: float

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("variant name must be non-empty")
        if not (self.weight >= 0 and math.isfinite(self.weight)):
            raise ValueError(f"variant {self.name!r}: weight must be finite and nonnegative")


@dataclass(frozen=True)
class ExperimentConfig:
    """Named experiment: an ordered set of variants, control first."""

    name: str
    salt: str
    variants: tuple[Variant, ...]

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("experiment name must be non-empty")
        if len(self.variants) < 2:
            raise ValueError("an experiment needs at least two variants")
        names = [v.name for v in self.variants]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate variant names in {names}")
        if sum(v.weight for v in self.variants) <= 0:
            raise ValueError("variant weights must sum to a positive value")
        object.__setattr__(self, "_bounds", _bucket_bounds(self.variants))

    @property
    def control(self) -> Variant:
        return self.variants[0]

    def variant_named(self, name: str) -> Variant:
        for v in self.variants:
            if v.name == name:
                return v
        raise KeyError(name)

    @classmethod
    def from_json(cls, source: IO[str] | str | Path) -> "ExperimentConfig":
        if hasattr(source, "read"):
            payload = json.load(source)  # type: ignore[arg-type]
        else:
            payload = json.loads(Path(source).read_text(encoding="utf-8"))
        try:
            variants = tuple(
                Variant(v["name"], RankerTag(v["ranker"]), float(v.get("weight", 1.0)))
                for v in payload["variants"]
            )
            return cls(str(payload["name"]), str(payload["salt"]), variants)
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed experiment config: {exc}") from None

    def to_json(self) -> str:
        payload = {
            "name": self.name,
            "salt": self.salt,
            "variants": [
                {"name": v.name, "ranker": v.ranker.value, "weight": v.weight}
                for v in self.variants
            ],
        }
        return json.dumps(payload, indent=2) + "\n"


def _bucket_bounds(variants: Sequence[Variant]) -> tuple[int, ...]:
    """Upper bucket bound (exclusive) per variant, ending exactly at N_BUCKETS."""
    total = sum(v.weight for v in variants)
    bounds = []
    cum = 0.0
    for v in variants:
        cum += v.weight
        bounds.append(round(N_BUCKETS * cum / total))
    bounds[-1] = N_BUCKETS
    return tuple(bounds)


def bucket_of(user_id: str, salt: str) -> int:
    """The user's bucket in [0, N_BUCKETS)."""
    return fnv1a64(f"{salt}:{user_id}".encode("utf-8")) % N_BUCKETS


def assign_variant(user_id: str, config: ExperimentConfig) -> Variant:
    """Weight-proportional deterministic assignment.

    Zero-weight variants own an empty bucket range and are never assigned.
    """
    if not user_id:
        raise ValueError("user_id must be non-empty")
    bucket = bucket_of(user_id, config.salt)
    for variant, bound in zip(config.variants, config._bounds):  # type: ignore[attr-defined]
        if bucket < bound:
            return variant
    # Unreachable: the last bound is pinned to N_BUCKETS.
    raise AssertionError("bucket out of range")


@dataclass(frozen=True)
class SessionRecord:
    """One search impression and the clicks it received."""

    user_id: str
    variant: str
    query: tuple[int, ...]
    shown: tuple[int, ...]
    clicked: tuple[int, ...]
    timestamp: str = ""

    def __post_init__(self) -> None:
        if not self.user_id:
            raise ValueError("session user_id must be non-empty")
        if not self.variant:
            raise ValueError("session variant must be non-empty")
        if not self.query:
            raise ValueError("session query must be non-empty")
        if len(set(self.shown)) != len(self.shown):
            raise ValueError("shown must not contain duplicates")
        extra = set(self.clicked) - set(self.shown)
        if extra:
            raise ValueError(f"clicked destinations {sorted(extra)} were not shown")

    @property
    def converted(self) -> bool:
        return bool(self.clicked)


@dataclass(frozen=True)
class VariantStats:
    variant_name: str
    users: int
    clickers: int
    conversion_rate: float
    ci_halfwidth: float


@dataclass(frozen=True)
class GTestResult:
    g: float
    p_value: float
    confidence: float
    significant_at_90: bool


def z_value(level: float) -> float:
    if not 0 < level < 1:
        raise ValueError(f"confidence level must be in (0, 1), got {level}")
    pinned = _Z_TABLE.get(level)
    if pinned is not None:
        return pinned
    return NormalDist().inv_cdf(0.5 + level / 2)


def conversion(
    records: Iterable[SessionRecord],
    *,
    level: float = 0.90,
    unit: str = "user",
) -> dict[str, VariantStats]:
    """Per-variant conversion with a normal-approximation CI.

    With ``unit="user"`` the denominator is distinct users and the
    numerator is distinct users with at least one click anywhere, so a
    user who searches many times still counts once. ``unit="session"``
    counts raw records instead.
    """
    if unit not in ("user", "session"):
        raise ValueError(f"unit must be 'user' or 'session', got {unit!r}")
    z = z_value(level)
    totals: dict[str, set[str] | int] = {}
    converted: dict[str, set[str] | int] = {}
    for record in records:
        if unit == "user":
            totals.setdefault(record.variant, set()).add(record.user_id)  # type: ignore[union-attr]
            if record.converted:
                converted.setdefault(record.variant, set()).add(record.user_id)  # type: ignore[union-attr]
        else:
            totals[record.variant] = totals.get(record.variant, 0) + 1  # type: ignore[operator]
            if record.converted:
                converted[record.variant] = converted.get(record.variant, 0) + 1  # type: ignore[operator]
    out: dict[str, VariantStats] = {}
    for name, seen in totals.items():
        users = len(seen) if isinstance(seen, set) else seen
        hit = converted.get(name, 0)
        clickers = len(hit) if isinstance(hit, set) else hit
        rate = clickers / users if users else 0.0
        half = z * math.sqrt(rate * (1.0 - rate) / users) if users else 0.0
        out[name] = VariantStats(name, users, clickers, rate, half)
    return out


def g_test_2x2(
    users_a: int, clickers_a: int, users_b: int, clickers_b: int
) -> GTestResult:
    """Likelihood-ratio test of equal conversion in two variants.

    The 2x2 table is clickers vs non-clickers per variant. G is
    ``2 * sum O * ln(O / E)`` over nonzero cells, chi-square with one
    degree of freedom under the null; the summation uses ``math.fsum``
    so swapping the two variants gives bit-identical G. Degenerate
    tables (an empty margin) carry no evidence and return G=0, p=1.
    """
    for label, users, clickers in (("a", users_a, clickers_a), ("b", users_b, clickers_b)):
        if users < 0 or clickers < 0 or clickers > users:
            raise ValueError(
                f"variant {label}: need 0 <= clickers <= users, got users={users} clickers={clickers}"
            )
    observed = (
        (clickers_a, users_a - clickers_a),
        (clickers_b, users_b - clickers_b),
    )
    row_totals = (users_a, users_b)
    col_totals = (clickers_a + clickers_b, (users_a - clickers_a) + (users_b - clickers_b))
    grand = users_a + users_b
    if 0 in row_totals or 0 in col_totals:
        return GTestResult(0.0, 1.0, 0.0, False)
    terms = []
    for i in range(2):
        for j in range(2):
            o = observed[i][j]
            if o == 0:
                continue
            e = row_totals[i] * col_totals[j] / grand
            terms.append(o * math.log(o / e))
    g = max(0.0, 2.0 * math.fsum(terms))
    # chi-square(1) survival function: P(X >= g) = erfc(sqrt(g / 2)).
    p = math.erfc(math.sqrt(g / 2.0))
    confidence = 1.0 - p
    return GTestResult(g, p, confidence, confidence >= 0.90)


@dataclass(frozen=True)
class ExperimentReport:
    """Evaluation summary: per-variant stats plus G-tests against control."""

    experiment: str
    unit: str
    level: float
    variants: tuple[VariantStats, ...]
    rankers: tuple[str, ...]
    gtests: Mapping[str, GTestResult]

    def to_dict(self) -> dict:
        rows = []
        for i, stats in enumerate(self.variants):
            g = self.gtests.get(stats.variant_name)
            rows.append(
                {
                    "variant": stats.variant_name,
                    "ranker": self.rankers[i],
                    "control": i == 0,
                    "users": stats.users,
                    "clickers": stats.clickers,
                    "conversion_rate": stats.conversion_rate,
                    "ci_halfwidth": stats.ci_halfwidth,
                    "g_test": None
                    if g is None
                    else {
                        "g": g.g,
                        "p_value": g.p_value,
                        "confidence": g.confidence,
                        "significant_at_90": g.significant_at_90,
                    },
                }
            )
        return {
            "experiment": self.experiment,
            "unit": self.unit,
            "level": self.level,
            "variants": rows,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def render_text(self) -> str:
        header = ["Variant", "Ranker", "Users", "Clickers", "Conversion", "G-test conf.", "Significant"]
        rows = [header]
        for i, stats in enumerate(self.variants):
            g = self.gtests.get(stats.variant_name)
            rows.append(
                [
                    stats.variant_name + ("*" if i == 0 else ""),
                    self.rankers[i],
                    str(stats.users),
                    str(stats.clickers),
                    f"{stats.conversion_rate * 100:.2f}% ± {stats.ci_halfwidth * 100:.2f}%",
                    "-" if g is None else f"{g.confidence * 100:.0f}%",
                    "-" if g is None else ("yes" if g.significant_at_90 else "no"),
                ]
            )
        widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
        lines = [f"Experiment: {self.experiment} (unit={self.unit}, level={self.level:g})"]
        for r, row in enumerate(rows):
            lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
            if r == 0:
                lines.append("  ".join("-" * widths[i] for i in range(len(header))))
        lines.append("* control")
        return "\n".join(lines) + "\n"


def summarize(
    records: Iterable[SessionRecord],
    config: ExperimentConfig,
    *,
    level: float = 0.90,
    unit: str = "user",
) -> ExperimentReport:
    """Best-effort report: zero rows for idle variants, G-tests where both
    the control and the variant have traffic. Records whose variant is not
    in the config (e.g. forced-ranker demo sessions) are ignored.
    """
    names = {v.name for v in config.variants}
    stats = conversion((r for r in records if r.variant in names), level=level, unit=unit)
    rows = []
    for v in config.variants:
        rows.append(stats.get(v.name, VariantStats(v.name, 0, 0, 0.0, 0.0)))
    control = rows[0]
    gtests: dict[str, GTestResult] = {}
    if control.users > 0:
        for stat in rows[1:]:
            if stat.users > 0:
                gtests[stat.variant_name] = g_test_2x2(
                    control.users, control.clickers, stat.users, stat.clickers
                )
    return ExperimentReport(
        experiment=config.name,
        unit=unit,
        level=level,
        variants=tuple(rows),
        rankers=tuple(v.ranker.value for v in config.variants),
        gtests=gtests,
    )


def evaluate(
    records: Sequence[SessionRecord],
    config: ExperimentConfig,
    *,
    level: float = 0.90,
    unit: str = "user",
) -> ExperimentReport:
    """Strict evaluation of an experiment from session records.

    Requires traffic in the control arm and in at least one other arm;
    otherwise no comparison is possible and MissingControlError is raised.
    """
    report = summarize(records, config, level=level, unit=unit)
    control = report.variants[0]
    if control.users == 0:
        raise MissingControlError(
            f"control variant {control.variant_name!r} has no session records"
        )
    if not report.gtests:
        raise MissingControlError("no non-control variant has session records")
    return report


# --- click log -------------------------------------------------------------


def _join_ids(ids: Sequence[int]) -> str:
    return "|".join(str(i) for i in ids)


def _split_ids(field: str) -> tuple[int, ...]:
    field = field.strip()
    if not field:
        return ()
    return tuple(int(tok) for tok in field.split("|"))


def write_click_log(records: Iterable[SessionRecord], target: IO[str] | str | Path) -> None:
    """Write records as the click-log CSV, one line per record."""
    if hasattr(target, "write"):
        _write_rows(records, target)  # type: ignore[arg-type]
    else:
        with open(target, "w", encoding="utf-8", newline="") as handle:
            _write_rows(records, handle)


def _write_rows(records: Iterable[SessionRecord], handle: IO[str]) -> None:
    writer = csv.writer(handle)
    writer.writerow(_CLICK_LOG_HEADER)
    for r in records:
        writer.writerow(
            [r.timestamp, r.user_id, r.variant, _join_ids(r.query), _join_ids(r.shown), _join_ids(r.clicked)]
        )


def append_session(record: SessionRecord, path: str | Path) -> None:
    """Append one record to a click-log file, writing the header first if
    the file is new or empty. Appends are line-atomic only if callers
    serialize them; the service holds a lock around this call.
    """
    path = Path(path)
    fresh = not path.exists() or path.stat().st_size == 0
    with open(path, "a", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        if fresh:
            writer.writerow(_CLICK_LOG_HEADER)
        writer.writerow(
            [
                record.timestamp,
                record.user_id,
                record.variant,
                _join_ids(record.query),
                _join_ids(record.shown),
                _join_ids(record.clicked),
            ]
        )


def read_click_log(source: IO[str] | str | Path) -> tuple[SessionRecord, ...]:
    """Read a click-log CSV back into session records.

    The service logs an impression line when results are shown and a
    separate line per click, so lines sharing (user, variant, query,
    shown) are folded into one record whose clicked set is the union.
    """
    merged: dict[tuple, dict] = {}
    order: list[tuple] = []
    if hasattr(source, "read"):
        rows = _read_rows(source)  # type: ignore[arg-type]
    else:
        with open(source, "r", encoding="utf-8", newline="") as handle:
            rows = _read_rows(handle)
    for lineno, row in rows:
        if len(row) != 6:
            raise ValueError(f"click log line {lineno}: expected 6 fields, got {len(row)}")
        timestamp, user_id, variant, query_f, shown_f, clicked_f = row
        try:
            key = (user_id, variant, _split_ids(query_f), _split_ids(shown_f))
            clicked = set(_split_ids(clicked_f))
        except ValueError:
            raise ValueError(f"click log line {lineno}: malformed id list") from None
        if key not in merged:
            merged[key] = {"timestamp": timestamp, "clicked": clicked}
            order.append(key)
        else:
            merged[key]["clicked"] |= clicked
    records = []
    for key in order:
        user_id, variant, query, shown = key
        info = merged[key]
        records.append(
            SessionRecord(
                user_id=user_id,
                variant=variant,
                query=query,
                shown=shown,
                clicked=tuple(sorted(info["clicked"])),
                timestamp=info["timestamp"],
            )
        )
    return tuple(records)


def _read_rows(handle: IO[str]) -> list[tuple[int, list[str]]]:
    reader = csv.reader(handle)
    header = next(reader, None)
    if header is None:
        return []
    if header != _CLICK_LOG_HEADER:
        raise ValueError(f"click log must start with header {','.join(_CLICK_LOG_HEADER)}")
    return [(lineno, row) for lineno, row in enumerate(reader, start=2) if row]
