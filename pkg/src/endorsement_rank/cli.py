"""Command line entry points.

Subcommands cover the whole loop: build an index snapshot from raw
files, serve it over HTTP, generate simulated experiment traffic,
replay a click log into a report, and run a standalone G-test on four
counts.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .corpus import (
    IngestError,
    build_index,
    load_destinations,
    load_index,
    load_reviews,
    load_vocabulary,
    save_index,
)
from .experiment import (
    ExperimentConfig,
    MissingControlError,
    evaluate,
    g_test_2x2,
    read_click_log,
    write_click_log,
)
from .ranking import RankerTag
from .simulation import WorldConfig, planted_world, simulate_sessions


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="endorsement-rank",
        description="Destination recommendation from endorsement data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-index", help="aggregate raw files into an index snapshot")
    p.add_argument("--vocabulary", required=True, help="activity names, one per line")
    p.add_argument("--destinations", required=True, help="destination CSV")
    p.add_argument("--reviews", required=True, help="review CSV")
    p.add_argument("--out", required=True, help="output snapshot path (JSON)")
    p.add_argument("--alpha", type=float, default=1.0, help="Laplace smoothing (0 disables)")
    p.add_argument(
        "--lenient",
        action="store_true",
        help="drop unknown activities in reviews instead of failing",
    )

    p = sub.add_parser("serve", help="serve the HTTP API")
    p.add_argument("--index", required=True, help="index snapshot path")
    p.add_argument("--experiment", help="experiment config JSON")
    p.add_argument("--listen", default="127.0.0.1:8080", help="host:port to bind")
    p.add_argument("--page-size", type=int, default=10)
    p.add_argument(
        "--default-ranker",
        default=RankerTag.NAIVE_BAYES.value,
        choices=[t.value for t in RankerTag],
        help="ranker used when no experiment is configured",
    )
    p.add_argument("--log", help="click log path (default: $ENDORSEMENT_RANK_LOG or clicks.csv)")
    p.add_argument("--lenient", action="store_true", help="drop unknown activities in queries")
    p.add_argument("--ui", help="directory of static web UI files to serve at /")

    p = sub.add_parser("simulate", help="run seeded A/B traffic through a synthetic world")
    p.add_argument("--experiment", required=True, help="experiment config JSON")
    p.add_argument("--world", help="world config JSON (default: built-in planted world)")
    p.add_argument("--users", type=int, default=30000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--page-size", type=int, default=10)
    p.add_argument("--log", help="also write the simulated sessions as a click log CSV")
    p.add_argument("--json", dest="json_out", help="also write the report as JSON")
    p.add_argument("--unit", default="user", choices=["user", "session"])

    p = sub.add_parser("gtest", help="G-test on users/clickers of two variants")
    p.add_argument("users_a", type=int)
    p.add_argument("clickers_a", type=int)
    p.add_argument("users_b", type=int)
    p.add_argument("clickers_b", type=int)

    p = sub.add_parser("report", help="replay a click log into an experiment report")
    p.add_argument("--log", required=True, help="click log CSV")
    p.add_argument("--experiment", required=True, help="experiment config JSON")
    p.add_argument("--unit", default="user", choices=["user", "session"])
    p.add_argument("--level", type=float, default=0.90)
    p.add_argument("--json", action="store_true", help="print JSON instead of a table")

    return parser


def _cmd_build_index(args: argparse.Namespace) -> int:
    vocabulary = load_vocabulary(args.vocabulary)
    destinations = load_destinations(args.destinations)
    loaded = load_reviews(args.reviews, vocabulary, destinations, lenient=args.lenient)
    index = build_index(loaded.reviews, vocabulary, destinations, alpha=args.alpha)
    save_index(index, args.out)
    print(f"wrote {args.out}")
    print(
        f"destinations={index.n_destinations} activities={index.n_activities} "
        f"reviews={len(loaded.reviews)} endorsements={index.grand_total} alpha={index.alpha:g}"
    )
    if args.lenient and (loaded.skipped_endorsements or loaded.skipped_rows):
        print(
            f"lenient mode: dropped {loaded.skipped_endorsements} endorsements, "
            f"skipped {loaded.skipped_rows} rows"
        )
    print(f"source_digest={index.source_digest}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app, resolve_log_path

    host, _, port_text = args.listen.rpartition(":")
    if not host or not port_text.isdigit():
        print(f"error: --listen expects host:port, got {args.listen!r}", file=sys.stderr)
        return 1
    index = load_index(args.index)
    experiment = ExperimentConfig.from_json(args.experiment) if args.experiment else None
    app = create_app(
        index,
        experiment,
        page_size=args.page_size,
        default_ranker=RankerTag(args.default_ranker),
        log_path=args.log,
        lenient=args.lenient,
        ui_dir=args.ui,
    )
    print(f"click log: {resolve_log_path(args.log)}")
    uvicorn.run(app, host=host, port=int(port_text), log_level="info")
    return 0


def _cmd_simulate(args: argparse.Namespace) -> int:
    world = WorldConfig.from_json(args.world) if args.world else planted_world()
    config = ExperimentConfig.from_json(args.experiment)
    records = simulate_sessions(
        world,
        config,
        args.users,
        args.seed,
        alpha=args.alpha,
        page_size=args.page_size,
    )
    if args.log:
        write_click_log(records, args.log)
        print(f"wrote {len(records)} sessions to {args.log}")
    report = evaluate(records, config, unit=args.unit)
    print(report.render_text(), end="")
    if args.json_out:
        Path(args.json_out).write_text(report.to_json(), encoding="utf-8")
        print(f"wrote {args.json_out}")
    return 0


def _cmd_gtest(args: argparse.Namespace) -> int:
    result = g_test_2x2(args.users_a, args.clickers_a, args.users_b, args.clickers_b)
    rate_a = args.clickers_a / args.users_a if args.users_a else 0.0
    rate_b = args.clickers_b / args.users_b if args.users_b else 0.0
    print(f"variant a: {args.clickers_a}/{args.users_a} = {rate_a * 100:.2f}%")
    print(f"variant b: {args.clickers_b}/{args.users_b} = {rate_b * 100:.2f}%")
    print(f"G = {result.g:.6f}")
    print(f"p-value = {result.p_value:.6f}")
    print(f"confidence = {result.confidence * 100:.2f}%")
    print(f"significant at 90%: {'yes' if result.significant_at_90 else 'no'}")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    config = ExperimentConfig.from_json(args.experiment)
    records = read_click_log(args.log)
    report = evaluate(records, config, level=args.level, unit=args.unit)
    if args.json:
        print(report.to_json(), end="")
    else:
        print(report.render_text(), end="")
    return 0


_COMMANDS = {
    "build-index": _cmd_build_index,
    "serve": _cmd_serve,
    "simulate": _cmd_simulate,
    "gtest": _cmd_gtest,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (IngestError, MissingControlError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
