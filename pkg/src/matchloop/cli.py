"""Command line front end.

Four subcommands: ``run`` executes one budgeted session against the
simulated reviewer and writes per-iteration metrics, ``synth`` generates
a synthetic corpus from a JSON spec, ``compare`` benchmarks strategies
across corpora and budgets, and ``serve`` starts the HTTP session
service.

``compare`` runs each (strategy, profile, seed) cell once at the largest
requested budget and derives the smaller budgets as row prefixes, so the
numbers for nested budgets come from a single trajectory and are directly
comparable.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from .data import (SYNTH_SCHEMA, CorruptionSpec, Dataset, GroundTruth,
                   generate_corpus, load_dataset, load_truth, save_dataset,
                   save_truth)
from .engine import EngineConfig
from .oracle import SimulatedOracle
from .scheduler import (STRATEGIES, QualityReport, RunResult, SchedulerConfig,
                        Session)

log = logging.getLogger(__name__)

REPORT_HEADER = ["iteration", "spent_cost", "questions_asked",
                 "gr_accuracy", "cluster_f1", "strategy", "seed"]

@dataclass(frozen=True)
class BenchmarkProfile:
    """One benchmark corpus recipe plus the rule grids suited to it."""

    spec: CorruptionSpec
    match_rule_thresholds: tuple[float, ...] = (0.7, 0.8, 0.9)
    non_match_rule_thresholds: tuple[float, ...] = (0.15, 0.3)

    @property
    def engine_overrides(self) -> dict:
        return {"match_rule_thresholds": self.match_rule_thresholds,
                "non_match_rule_thresholds": self.non_match_rule_thresholds}


# Benchmark corpora.  All three share a light background error mix
# (occasional abbreviations, ordinal suffixes, typos, case damage) on top
# of which tokens go missing outright; dropped tokens cannot be undone by
# any rewrite, so labeling and cluster review have real work on every
# profile.  Franchised entities (same name, different site) supply the
# hard near-duplicates.  "compact" is a smaller corpus with milder token
# loss, "lossy" turns the loss up, and "franchise" additionally gives
# every entity a sibling branch and widens the rule grids so rule quality
# is explorable at many operating points.
PROFILES = {
    "compact": BenchmarkProfile(
        spec=CorruptionSpec(n_entities=20, records_per_entity=(5, 7),
                            abbreviation_rate=0.03, numeric_suffix_rate=0.02,
                            typo_rate=0.08, case_rate=0.04,
                            drop_token_rate=0.16, franchise_rate=0.8,
                            franchise_records=(2, 3))),
    "lossy": BenchmarkProfile(
        spec=CorruptionSpec(n_entities=30, records_per_entity=(5, 8),
                            abbreviation_rate=0.03, numeric_suffix_rate=0.02,
                            typo_rate=0.08, case_rate=0.04,
                            drop_token_rate=0.24, franchise_rate=0.8,
                            franchise_records=(2, 3))),
    "franchise": BenchmarkProfile(
        spec=CorruptionSpec(n_entities=30, records_per_entity=(5, 8),
                            abbreviation_rate=0.03, numeric_suffix_rate=0.02,
                            typo_rate=0.08, case_rate=0.04,
                            drop_token_rate=0.24, franchise_rate=1.0,
                            franchise_records=(2, 3)),
        match_rule_thresholds=(0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9),
        non_match_rule_thresholds=(0.1, 0.2, 0.3)),
}

DEFAULT_SEEDS = (0, 1, 2, 3, 4)


def _parse_budget(text: str) -> float:
    if text.lower() in ("inf", "unbounded"):
        return math.inf
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("budget must be positive")
    return value


def _report_row(report: QualityReport, strategy: str, seed: int) -> list[str]:
    return [str(report.iteration),
            f"{report.spent_cost:.6f}",
            str(report.questions_asked),
            f"{report.gr_accuracy:.6f}",
            f"{report.cluster_f1:.6f}",
            strategy,
            str(seed)]


def write_report_csv(path: Path, rows: list[list[str]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_HEADER)
        writer.writerows(rows)


def reports_within(reports: list[QualityReport], budget: float
                   ) -> list[QualityReport]:
    """The per-iteration reports a run capped at ``budget`` would have
    produced: the prefix whose spend fits."""
    return [r for r in reports if r.spent_cost <= budget + 1e-9]


def _session_for(dataset: Dataset, truth: GroundTruth, args,
                 strategy: str, budget: float, seed: int,
                 trace_path: str | None = None,
                 engine_overrides: dict | None = None) -> Session:
    engine = EngineConfig.for_schema(
        dataset.schema,
        key_attribute=args.key_attribute,
        code_attribute=args.code_attribute,
        seed=seed, **(engine_overrides or {}))
    config = SchedulerConfig(strategy=strategy, budget=budget,
                             k=args.k, b=args.b, seed=seed,
                             auto_k=args.auto_k)
    oracle = SimulatedOracle(truth, approval_threshold=args.approval_threshold,
                             noise_rate=args.noise_rate, seed=seed)
    return Session(dataset, engine, config, oracle, truth=truth,
                   trace_path=trace_path)


def _write_run_outputs(out: Path, result: RunResult, strategy: str,
                       seed: int, budget: float) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    write_report_csv(out / "report.csv",
                     [_report_row(r, strategy, seed) for r in result.reports])

    clusters = sorted((sorted(c) for c in result.state.clusters),
                      key=lambda m: m[0])
    with (out / "clusters.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["record_id", "cluster_id"])
        for index, members in enumerate(clusters):
            for record_id in members:
                writer.writerow([record_id, f"c{index:04d}"])

    goldens = result.state.goldens
    with (out / "goldens.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cluster_id", "n_records", *result.state.dataset.schema])
        for index, members in enumerate(clusters):
            values = goldens.per_record[members[0]]
            writer.writerow([f"c{index:04d}", len(members), *values])

    final = result.final
    summary = {
        "strategy": strategy,
        "seed": seed,
        "budget": budget if math.isfinite(budget) else "inf",
        "spent_cost": round(result.spent, 6),
        "questions_asked": final.questions_asked if final else 0,
        "iterations": final.iteration if final else 0,
        "stop_reason": result.stop_reason,
        "gr_accuracy": round(final.gr_accuracy, 6) if final else None,
        "cluster_f1": round(final.cluster_f1, 6) if final else None,
        "n_clusters": len(clusters),
    }
    (out / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return summary


def cmd_run(args) -> int:
    dataset = load_dataset(args.dataset)
    truth = load_truth(args.truth_memberships, args.truth_goldens)
    out = Path(args.out)
    trace_path = str(out / "trace.jsonl") if args.trace else None
    if trace_path:
        out.mkdir(parents=True, exist_ok=True)
    session = _session_for(dataset, truth, args, args.strategy, args.budget,
                           args.seed, trace_path)
    result = session.run()
    summary = _write_run_outputs(out, result, args.strategy, args.seed,
                                 args.budget)
    print(f"{args.strategy}: {summary['questions_asked']} questions, "
          f"spent {summary['spent_cost']:.2f}, "
          f"gr_accuracy={summary['gr_accuracy']:.4f}, "
          f"cluster_f1={summary['cluster_f1']:.4f} ({summary['stop_reason']})")
    return 0


def cmd_synth(args) -> int:
    spec = CorruptionSpec.from_json(args.spec)
    dataset, truth = generate_corpus(spec)
    out = Path(args.out)
    save_dataset(dataset, out / "dataset.csv")
    save_truth(truth, dataset.schema, out / "memberships.csv",
               out / "goldens.csv")
    print(f"{len(dataset.records)} records over {len(truth.golden_of)} "
          f"entities -> {out}")
    return 0


def _parse_strategies(text: str) -> list[str]:
    if text == "all":
        return list(STRATEGIES)
    names = [s.strip() for s in text.split(",") if s.strip()]
    unknown = [s for s in names if s not in STRATEGIES]
    if unknown:
        raise argparse.ArgumentTypeError(
            f"unknown strategies: {', '.join(unknown)}")
    return names


def _parse_int_list(text: str) -> list[int]:
    return [int(s) for s in text.split(",") if s.strip()]


def _parse_float_list(text: str) -> list[float]:
    values = [float(s) for s in text.split(",") if s.strip()]
    if not values or any(v <= 0 for v in values):
        raise argparse.ArgumentTypeError("budgets must be positive numbers")
    return values


def _parse_profiles(text: str) -> dict[str, BenchmarkProfile]:
    if text == "all":
        return dict(PROFILES)
    chosen = {}
    for name in (s.strip() for s in text.split(",")):
        if name not in PROFILES:
            raise argparse.ArgumentTypeError(f"unknown profile: {name}")
        chosen[name] = PROFILES[name]
    return chosen


def _budget_label(budget: float) -> str:
    return str(int(budget)) if float(budget).is_integer() else str(budget)


def run_benchmark(strategies: list[str], profiles: dict[str, BenchmarkProfile],
                  budgets: list[float], seeds: list[int], out: Path,
                  args) -> dict:
    """One full grid.  Returns the summary structure that also lands in
    ``summary.json``."""
    budgets = sorted(budgets)
    max_budget = budgets[-1]
    out.mkdir(parents=True, exist_ok=True)
    trajectories: dict[tuple[str, str, int], list[QualityReport]] = {}
    for profile_name, profile in sorted(profiles.items()):
        for seed in seeds:
            dataset, truth = generate_corpus(replace(profile.spec, seed=seed))
            for strategy in strategies:
                session = _session_for(
                    dataset, truth, args, strategy, max_budget, seed,
                    engine_overrides=profile.engine_overrides)
                result = session.run()
                trajectories[(profile_name, strategy, seed)] = result.reports
                log.info("%s/%s/seed=%d: %d iterations, spent %.1f",
                         profile_name, strategy, seed,
                         result.final.iteration if result.final else 0,
                         result.spent)

    summary: dict = {"budgets": [_budget_label(b) for b in budgets],
                     "seeds": list(seeds), "profiles": {}}
    for profile_name in sorted(profiles):
        profile_summary: dict = {}
        for budget in budgets:
            rows = []
            means: dict[str, dict] = {}
            for strategy in strategies:
                finals = []
                for seed in seeds:
                    reports = reports_within(
                        trajectories[(profile_name, strategy, seed)], budget)
                    rows.extend(_report_row(r, strategy, seed)
                                for r in reports)
                    finals.append(reports[-1])
                means[strategy] = {
                    "mean_gr_accuracy": round(
                        sum(f.gr_accuracy for f in finals) / len(finals), 6),
                    "mean_cluster_f1": round(
                        sum(f.cluster_f1 for f in finals) / len(finals), 6),
                    "per_seed_gr_accuracy": {
                        str(seed): round(f.gr_accuracy, 6)
                        for seed, f in zip(seeds, finals)},
                }
            write_report_csv(
                out / f"{profile_name}_budget{_budget_label(budget)}.csv",
                rows)
            profile_summary[_budget_label(budget)] = means
        summary["profiles"][profile_name] = profile_summary

    (out / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return summary


def cmd_compare(args) -> int:
    strategies = _parse_strategies(args.strategies)
    profiles = _parse_profiles(args.profiles)
    if args.code_attribute is None:
        # Built-in profiles all carry an identifier column.
        args.code_attribute = "code"
    seeds = _parse_int_list(args.seeds) if args.seeds else list(DEFAULT_SEEDS)
    out = Path(args.out)
    summary = run_benchmark(strategies, profiles, args.budgets, seeds, out,
                            args)
    top_budget = summary["budgets"][-1]
    print(f"{len(strategies)} strategies x {len(profiles)} profiles x "
          f"{len(seeds)} seeds -> {out}")
    for profile_name, per_budget in sorted(summary["profiles"].items()):
        line = ", ".join(
            f"{s}={per_budget[top_budget][s]['mean_gr_accuracy']:.3f}"
            for s in strategies)
        print(f"  {profile_name} @ {top_budget}: {line}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(snapshot_dir=args.snapshot_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="matchloop",
        description="Budgeted review sessions over duplicated record sets.")
    parser.add_argument("--verbose", action="store_true",
                        help="log per-iteration progress")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one session on a corpus")
    run_p.add_argument("--dataset", required=True)
    run_p.add_argument("--truth-memberships", required=True)
    run_p.add_argument("--truth-goldens", required=True)
    run_p.add_argument("--strategy", default="global_k_corr_b",
                       choices=STRATEGIES)
    run_p.add_argument("--budget", type=_parse_budget, default=1000.0,
                       help="total answer budget; 'inf' for unbounded")
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--out", required=True)
    run_p.add_argument("--k", type=int, default=10,
                       help="candidates scored per iteration")
    run_p.add_argument("--b", type=int, default=None,
                       help="batch size override for the batched strategy")
    run_p.add_argument("--auto-k", action="store_true")
    run_p.add_argument("--key-attribute", default=None)
    run_p.add_argument("--code-attribute", default=None)
    run_p.add_argument("--approval-threshold", type=float, default=0.9)
    run_p.add_argument("--noise-rate", type=float, default=0.0)
    run_p.add_argument("--trace", action="store_true",
                       help="write per-iteration scoring detail to trace.jsonl")
    run_p.set_defaults(func=cmd_run)

    synth_p = sub.add_parser("synth", help="generate a synthetic corpus")
    synth_p.add_argument("--spec", required=True,
                         help="JSON file of corpus parameters")
    synth_p.add_argument("--out", required=True)
    synth_p.set_defaults(func=cmd_synth)

    cmp_p = sub.add_parser("compare",
                           help="benchmark strategies across corpora")
    cmp_p.add_argument("--strategies", default="all",
                       help="'all' or a comma separated list")
    cmp_p.add_argument("--budgets", type=_parse_float_list, required=True,
                       help="comma separated budgets; each is a prefix of "
                            "the largest")
    cmp_p.add_argument("--profiles", default="all",
                       help=f"'all' or a subset of {', '.join(PROFILES)}")
    cmp_p.add_argument("--seeds", default=None,
                       help="comma separated seeds (default 0-4)")
    cmp_p.add_argument("--out", default="benchmark")
    cmp_p.add_argument("--k", type=int, default=10)
    cmp_p.add_argument("--b", type=int, default=None)
    cmp_p.add_argument("--auto-k", action="store_true")
    cmp_p.add_argument("--key-attribute", default=None)
    cmp_p.add_argument("--code-attribute", default=None)
    cmp_p.add_argument("--approval-threshold", type=float, default=0.9)
    cmp_p.add_argument("--noise-rate", type=float, default=0.0)
    cmp_p.set_defaults(func=cmd_compare)

    serve_p = sub.add_parser("serve", help="start the HTTP session service")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8000)
    serve_p.add_argument("--snapshot-dir", default=None,
                         help="directory for session snapshots; restored "
                              "on startup")
    serve_p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
