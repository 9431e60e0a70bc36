import pytest

from endorsement_rank import (
    ActivityVocabulary,
    Destination,
    DestinationTable,
    EndorsementIndex,
)

# Two destinations over a three-activity vocabulary, with endorsement
# counts chosen so every score in the hand-worked ranking examples is a
# short decimal.
TOY_COUNTS = [[8, 2, 0], [3, 3, 4]]


def toy_tables() -> tuple[ActivityVocabulary, DestinationTable]:
    vocabulary = ActivityVocabulary(("beach", "food", "nightlife"))
    destinations = DestinationTable(
        (Destination(0, "A", "AA"), Destination(1, "B", "BB"))
    )
    return vocabulary, destinations


def toy_index(alpha: float) -> EndorsementIndex:
    vocabulary, destinations = toy_tables()
    return EndorsementIndex.from_counts(vocabulary, destinations, TOY_COUNTS, alpha=alpha)


@pytest.fixture
def toy_raw() -> EndorsementIndex:
    """Toy index with no smoothing."""
    return toy_index(alpha=0.0)


@pytest.fixture
def toy_smoothed() -> EndorsementIndex:
    """Toy index with alpha=1 smoothing."""
    return toy_index(alpha=1.0)


def pytest_runtest_logreport(report):
    """Print one verdict line per acceptance criterion as it finishes."""
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}.get(
            report.outcome, report.outcome.upper()
        )
        name = report.nodeid.rsplit("::", 1)[-1]
        print(f"\n[acceptance] {name}: {status}", flush=True)
