"""Destination recommendation from multi-criteria endorsement data.

The package turns traveller reviews ("endorsed beach and food at
destination A") into ranked destination suggestions, and ships the
experimentation loop used to compare rankers: deterministic hash
bucketing, conversion tracking with confidence intervals, a G-test for
significance, and a seeded simulator for end-to-end checks.
"""

from .corpus import (
    ActivityVocabulary,
    Destination,
    DestinationTable,
    EndorsementIndex,
    IngestError,
    Review,
    ReviewLoadResult,
    build_index,
    endorsement_profile,
    load_destinations,
    load_index,
    load_reviews,
    load_vocabulary,
    save_index,
)
from .experiment import (
    ExperimentConfig,
    ExperimentReport,
    GTestResult,
    MissingControlError,
    SessionRecord,
    Variant,
    VariantStats,
    assign_variant,
    conversion,
    evaluate,
    g_test_2x2,
    read_click_log,
    summarize,
    write_click_log,
)
from .ranking import (
    Query,
    RankedList,
    RankerTag,
    candidates,
    rank,
    rank_naive_bayes,
    rank_popularity,
    rank_random,
)
from .simulation import (
    ClickModel,
    InterestProfile,
    WorldConfig,
    build_world_index,
    generate_corpus,
    planted_world,
    run_ab_simulation,
    simulate_sessions,
    simulate_user_session,
)

__version__ = "0.1.0"

__all__ = [
    "ActivityVocabulary",
    "ClickModel",
    "Destination",
    "DestinationTable",
    "EndorsementIndex",
    "ExperimentConfig",
    "ExperimentReport",
    "GTestResult",
    "IngestError",
    "InterestProfile",
    "MissingControlError",
    "Query",
    "RankedList",
    "RankerTag",
    "Review",
    "ReviewLoadResult",
    "SessionRecord",
    "Variant",
    "VariantStats",
    "WorldConfig",
    "assign_variant",
    "build_index",
    "build_world_index",
    "candidates",
    "conversion",
    "endorsement_profile",
    "evaluate",
    "g_test_2x2",
    "generate_corpus",
    "load_destinations",
    "load_index",
    "load_reviews",
    "load_vocabulary",
    "planted_world",
    "rank",
    "rank_naive_bayes",
    "rank_popularity",
    "rank_random",
    "read_click_log",
    "run_ab_simulation",
    "save_index",
    "simulate_sessions",
    "simulate_user_session",
    "summarize",
    "write_click_log",
]
