"""
Command-line entry point for the MCS resilience KPI engine.

Subcommands:
    compute   feeds -> report.json, report.csv, radar.csv
    simulate  scenario spec -> feed files plus ground truth
    validate  feeds -> schema check
    iri       declared feeds -> readiness index
    explain   report.json -> per-KPI provenance and SRS self-audit

Exit codes: 0 success, 1 failed self-audit, 2 schema/config errors,
3 insufficient data (no weighted KPI defined), 64 usage errors.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from adapters.feed_writer import write_feeds
from adapters.report_writer import explain_report, load_report, write_report
from core.composite import interoperability_readiness
from core.config import Settings, load_weight_config
from core.ingest import load_bundle, parse_timestamp
from core.observability import configure_logging, flush_traces, init_tracer_provider
from core.pipeline import compute_report
from core.schema import AnalysisWindow, HierarchyLevel, KpiEngineError
from core.simharness import generate_scenario, load_scenario

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_AUDIT_FAILED = 1
EXIT_SCHEMA = 2
EXIT_INSUFFICIENT = 3
EXIT_USAGE = 64

# Window used by `validate` when none is given: every timestamp up to 2100.
OPEN_WINDOW = AnalysisWindow(t0=0, t1=4102444800)

GROUND_TRUTH_FILE = "ground_truth.json"


class UsageParser(argparse.ArgumentParser):
    """ArgumentParser that exits 64 on usage errors."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_window(text: str) -> AnalysisWindow:
    """Parse an ISO-8601 interval 'start/end' into an AnalysisWindow."""
    parts = text.split("/")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"window must be 'start/end', got {text!r}")
    try:
        t0 = parse_timestamp(parts[0], "--window start")
        t1 = parse_timestamp(parts[1], "--window end")
        return AnalysisWindow(t0=t0, t1=t1)
    except (KpiEngineError, ValueError) as e:
        raise argparse.ArgumentTypeError(str(e))


def _add_feed_flags(parser: argparse.ArgumentParser, window_required: bool) -> None:
    parser.add_argument("--inventory", type=Path, required=True, help="Static inventory (inventory.json)")
    parser.add_argument("--status", type=Path, help="Dynamic status/price feed (JSON Lines)")
    parser.add_argument("--stressors", type=Path, help="Stressor log (JSON Lines)")
    parser.add_argument("--queue", type=Path, help="Queue records (JSON Lines)")
    parser.add_argument("--cyber", type=Path, help="Cyber telemetry (JSON)")
    parser.add_argument("--demand", type=Path, help="Demand points (JSON)")
    parser.add_argument("--window", type=parse_window, required=window_required,
                        help="ISO-8601 interval, e.g. 2025-01-01T00:00Z/2025-02-01T00:00Z")


def build_parser() -> argparse.ArgumentParser:
    parser = UsageParser(prog="mcs-kpi", description="Resilience KPIs for megawatt charging sites")
    parser.add_argument("--log-level", default=None, help="Overrides MCS_KPI_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=UsageParser)

    compute = sub.add_parser("compute", help="Compute KPIs and write the report")
    _add_feed_flags(compute, window_required=True)
    compute.add_argument("--config", type=Path, help="Weight config (TOML or JSON); falls back to MCS_KPI_CONFIG")
    compute.add_argument("--level", choices=[level.value for level in HierarchyLevel],
                         help="Hierarchy level for the availability breakdown")
    compute.add_argument("--out", type=Path, default=Path("."), help="Output directory")

    simulate = sub.add_parser("simulate", help="Generate feeds from a scenario spec")
    simulate.add_argument("--spec", type=Path, required=True, help="Scenario spec (JSON)")
    simulate.add_argument("--out", type=Path, required=True, help="Output directory")

    validate = sub.add_parser("validate", help="Check feeds against the schema")
    _add_feed_flags(validate, window_required=False)

    iri = sub.add_parser("iri", help="Interoperability readiness for declared feeds")
    iri.add_argument("--feeds", required=True,
                     help="Comma-separated feed labels (datex_static, datex_status, ocpp, ems, pki, hdv)")

    explain = sub.add_parser("explain", help="Explain a written report")
    explain.add_argument("--report", type=Path, required=True, help="Path to report.json")
    return parser


def _bundle(args: argparse.Namespace, window: AnalysisWindow, config=None):
    thresholds = config.thresholds if config is not None else None
    kwargs = {}
    if thresholds is not None:
        kwargs = {"lookback_s": thresholds.seed_lookback_s, "skew_tolerance_s": thresholds.clock_skew_tolerance_s}
    return load_bundle(
        window,
        args.inventory,
        status_path=args.status,
        queue_path=args.queue,
        cyber_path=args.cyber,
        demand_path=args.demand,
        stressors_path=args.stressors,
        **kwargs,
    )


def _print(document) -> None:
    print(json.dumps(document, sort_keys=True, indent=2))


def cmd_compute(args: argparse.Namespace) -> int:
    config = load_weight_config(args.config)
    bundle = _bundle(args, args.window, config)
    level = HierarchyLevel(args.level) if args.level else None
    report = compute_report(bundle, args.window, config, level)
    paths = write_report(report, args.out)
    if report.insufficient_data():
        logger.error(f"Insufficient data: {report.srs_undefined_reason}")
        return EXIT_INSUFFICIENT
    headline = report.srs.headline if report.srs else None
    _print({"siteId": report.site_id, "srsHeadline": headline, "iriPercent": report.iri.iri_percent,
            "artifacts": {k: str(p) for k, p in sorted(paths.items())}})
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    spec = load_scenario(args.spec)
    bundle, truth = generate_scenario(spec)
    paths = write_feeds(bundle, args.out)
    truth_path = Path(args.out) / GROUND_TRUTH_FILE
    truth_path.write_text(
        json.dumps(truth.model_dump(by_alias=True, mode="json"), sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    _print({"window": f"{spec.window.t0}/{spec.window.t1}",
            "feeds": {k: str(p) for k, p in sorted(paths.items())}, "groundTruth": str(truth_path)})
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    bundle = _bundle(args, args.window or OPEN_WINDOW)
    _print({"valid": True, "siteId": bundle.inventory.site_id, "declaredFeeds": sorted(bundle.declared_feeds),
            "statusEvents": len(bundle.status_events), "clockSkews": len(bundle.clock_skews)})
    return EXIT_OK


def cmd_iri(args: argparse.Namespace) -> int:
    feeds = {label.strip() for label in args.feeds.split(",") if label.strip()}
    result = interoperability_readiness(feeds)
    _print(result.model_dump(by_alias=True, mode="json"))
    return EXIT_OK


def cmd_explain(args: argparse.Namespace) -> int:
    explanation = explain_report(load_report(args.report))
    _print(explanation.model_dump(by_alias=True, mode="json"))
    return EXIT_OK if explanation.audit_passed else EXIT_AUDIT_FAILED


COMMANDS = {
    "compute": cmd_compute,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
    "iri": cmd_iri,
    "explain": cmd_explain,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse `argv`, dispatch the subcommand and return its exit status."""
    args = build_parser().parse_args(argv)
    settings = Settings()
    configure_logging(args.log_level or settings.log_level)
    init_tracer_provider(settings.trace_exporter)
    try:
        return COMMANDS[args.command](args)
    except KpiEngineError as e:
        logger.error(str(e))
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SCHEMA
    finally:
        flush_traces()


def main(argv: Optional[List[str]] = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
