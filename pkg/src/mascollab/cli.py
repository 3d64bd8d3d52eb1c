"""Command-line entry point.

Progress and diagnostics go to stderr; stdout carries only the paths of
files written. Exit codes: 0 success, 1 error, 2 usage error, 3 a plan
finished with failed instances.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .analysis import (
    AnalysisError,
    analysis_document,
    build_relevance_matrix,
    compute_accuracy_matrix,
    compute_alignment_deltas,
    compute_diversity,
    compute_paradigm_comparison,
    compute_scaling_report,
    render_bundle,
    render_tables,
)
from .analysis.report import ANALYSIS_FILE, write_json
from .backends import BackendError
from .config import CliConfig, ConfigError
from .harness import DatasetError, ExperimentPlan, PlanError, RunLogError, execute_plan, load_dataset, read_records
from .roles import (
    MissingRosterError,
    Provenance,
    RoleError,
    RoleLibrary,
    augment_roster,
    dump_role_file,
    generate_roster,
    load_role_file,
    role_filename,
)

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_PARTIAL = 0, 1, 2, 3


class CommandError(Exception):
    pass


def _emit(path: Path) -> None:
    print(path)


def _write_role(path: Path, text: str, force: bool) -> Path:
    if path.exists() and not force:
        raise CommandError(f"{path} exists; pass --force to overwrite")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def cmd_gen_roles(args, config: CliConfig) -> int:
    if args.size != 3:
        raise CommandError("gen-roles builds size-3 groups; use augment-roles for 6 or 10")
    out_dir = Path(args.out_dir) if args.out_dir else config.roles_dir
    path = out_dir / role_filename(args.group, args.paradigm, args.size)
    if path.exists() and not args.force:
        raise CommandError(f"{path} exists; pass --force to overwrite")
    backend = config.make_backend(args.backend)
    roster = generate_roster(args.group, args.paradigm, backend, size=args.size)
    _emit(_write_role(path, dump_role_file(roster, Provenance.GENERATED), args.force))
    return EXIT_OK


def cmd_augment_roles(args, config: CliConfig) -> int:
    base, _ = load_role_file(args.role_file)
    if base.size != 3:
        raise CommandError(f"{args.role_file} has size {base.size}; augmentation starts from size 3")
    out_dir = Path(args.out_dir) if args.out_dir else Path(args.role_file).parent
    path = out_dir / role_filename(base.domain_tag, base.paradigm, args.target_size)
    if path.exists() and not args.force:
        raise CommandError(f"{path} exists; pass --force to overwrite")
    backend = config.make_backend(args.backend)
    roster = augment_roster(base, args.target_size, backend)
    _emit(_write_role(path, dump_role_file(roster, Provenance.AUGMENTED), args.force))
    return EXIT_OK


def cmd_run(args, config: CliConfig) -> int:
    plan = ExperimentPlan.from_file(args.plan_file)
    profile = args.backend or plan.backend
    sampling = config.sampling(profile)
    plan = plan.with_defaults(**sampling)
    library = RoleLibrary.load(plan.library_dir or config.roles_dir)
    log_path = Path(args.log) if args.log else plan.run_log or config.runs_dir / f"{plan.name}.jsonl"
    backend = config.make_backend(profile)

    def progress(done, total, record):
        status = "FAILED" if record.result.failed else ("correct" if record.result.correct else "wrong")
        print(f"[{done}/{total}] {record.expert_group.value}/{record.paradigm.value}/{record.size} "
              f"{record.instance_id}: {status}", file=sys.stderr)

    summary = execute_plan(
        plan, library, backend, log_path,
        concurrency=args.concurrency or config.parallelism,
        config_snapshot=config.snapshot(profile),
        progress=None if args.quiet else progress,
    )
    print(f"{summary.planned} planned, {summary.skipped} already logged, {summary.written} written, "
          f"{summary.failed} failed", file=sys.stderr)
    _emit(summary.log_path)
    return EXIT_OK if summary.ok else EXIT_PARTIAL


def cmd_analyze(args, config: CliConfig) -> int:
    records = read_records(args.run_logs)
    if not records:
        raise CommandError("no records")
    out_dir = Path(args.out) if args.out else config.reports_dir
    matrix = compute_accuracy_matrix(records)
    deltas = compute_alignment_deltas(matrix, strict=False)
    notes = []
    scaling = compute_scaling_report(matrix) if args.scaling else None
    diversity = compute_diversity(records, config.make_embedder(args.embedder)) if args.diversity else None
    if diversity is not None and diversity.skipped:
        notes.append(f"diversity: skipped {diversity.skipped} record(s) that failed or had fewer than two turns")
    relevance = None
    if args.relevance:
        instances = load_dataset(args.relevance)
        relevance = build_relevance_matrix(
            instances, config.make_backend(args.backend), args.samples, seed=args.seed,
            concurrency=config.parallelism,
        )
        dropped = sum(relevance.dropped.values())
        if dropped:
            notes.append(f"relevance: dropped {dropped} invalid judgement(s)")
    doc = analysis_document(matrix, deltas, compute_paradigm_comparison(matrix), scaling=scaling,
                            diversity=diversity, relevance=relevance, notes=notes)
    out_dir.mkdir(parents=True, exist_ok=True)
    _emit(write_json(out_dir / ANALYSIS_FILE, doc))
    for path in render_tables(doc, out_dir):
        _emit(path)
    return EXIT_OK


def cmd_report(args, config: CliConfig) -> int:
    reports_dir = Path(args.reports_dir) if args.reports_dir else config.reports_dir
    for path in render_bundle(reports_dir, figures=not args.no_figures):
        _emit(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mascollab", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="config file (default: ./mascollab.json if present)")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    groups = ["math", "finance", "medical", "law"]
    paradigms = ["diversity", "workflow"]

    p = sub.add_parser("gen-roles", help="generate a size-3 expert group with a model")
    p.add_argument("--group", required=True, type=str.lower, choices=groups)
    p.add_argument("--paradigm", required=True, type=str.lower, choices=paradigms)
    p.add_argument("--size", type=int, default=3)
    p.add_argument("--backend", help="backend profile name")
    p.add_argument("--out-dir", help="role directory (default: config roles_dir)")
    p.add_argument("--force", action="store_true", help="overwrite an existing role file")
    p.set_defaults(func=cmd_gen_roles)

    p = sub.add_parser("augment-roles", help="grow a size-3 role file to 6 or 10 experts")
    p.add_argument("role_file")
    p.add_argument("--target-size", type=int, required=True, choices=[6, 10])
    p.add_argument("--backend")
    p.add_argument("--out-dir", help="directory for the new file (default: next to the input)")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_augment_roles)

    p = sub.add_parser("run", help="execute an experiment plan, resuming from its run log")
    p.add_argument("plan_file")
    p.add_argument("--backend", help="override the plan's backend profile")
    p.add_argument("--log", help="run log path (default: plan run_log or <runs_dir>/<plan name>.jsonl)")
    p.add_argument("--concurrency", type=int, help="instances in flight (default: config parallelism)")
    p.add_argument("-q", "--quiet", action="store_true", help="no per-record progress")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", help="compute accuracy and optional analyses from run logs")
    p.add_argument("run_logs", nargs="+")
    p.add_argument("--out", help="reports directory (default: config reports_dir)")
    p.add_argument("--diversity", action="store_true", help="pairwise embedding similarity of agent outputs")
    p.add_argument("--embedder", help="embedding profile, or 'hash' for the offline test embedder")
    p.add_argument("--scaling", action="store_true", help="accuracy/token trade-off against size 3")
    p.add_argument("--relevance", metavar="DATASET", help="build the expertise relevance matrix over DATASET")
    p.add_argument("--samples", type=int, default=100, help="relevance samples per domain")
    p.add_argument("--seed", type=int, default=0, help="relevance sampling seed")
    p.add_argument("--backend", help="backend profile for relevance judgements")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="render the consolidated CSV/JSON/SVG/PNG bundle")
    p.add_argument("reports_dir", nargs="?")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        config = CliConfig.load(args.config)
        return args.func(args, config)
    except (CommandError, ConfigError, PlanError, DatasetError, RunLogError, RoleError, AnalysisError,
            BackendError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except MissingRosterError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
