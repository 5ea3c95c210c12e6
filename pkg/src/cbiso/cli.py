"""Command line entry point: ``cbiso <subcommand> ...``.

Exit status is 0 on success, 1 when a stage fails at runtime and 2 for
usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .coverage import ExecutionRecord, build_matrix, ingest_gcov_dir, save_coverage
from .errors import CbiError
from .evaluate import (
    aggregate,
    format_table,
    load_manifest,
    load_rankings,
    score_bug,
    split_by_compiler,
    write_report,
)
from .llm import DEFAULT_KEY_ENV, DEFAULT_MODEL, ChatClient, ClientConfig, MockClient
from .pipeline import ABLATIONS, PipelineConfig, ablation_variants, dump_prompts, run_ablation, run_isolation
from .prompt import LIST_CAP, InfoToggles
from .sbfl import Formula, Granularity, rank
from .summarize import SummaryStore, ensure_summaries, load_doc_links

log = logging.getLogger("cbiso")

FORMULAS = [f.value for f in Formula]


class UsageError(Exception):
    pass


# --- config -----------------------------------------------------------------

def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    return doc


def _pick(args, file_cfg: dict, flag: str, key: str, default):
    value = getattr(args, flag, None)
    if value is not None:
        return value
    return file_cfg.get(key, default)


def build_config(args) -> PipelineConfig:
    """Merge CLI flags over the config file over built-in defaults."""
    cfg = _load_config_file(getattr(args, "config", None))
    try:
        testcov = Formula.parse(_pick(args, cfg, "testcov_formula", "testcov_formula", "ochiai"))
        execov = Formula.parse(_pick(args, cfg, "execov_formula", "execov_formula", "wong2"))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    disabled = set(getattr(args, "disable", None) or cfg.get("disable", []))
    unknown = disabled - set(ABLATIONS)
    if unknown:
        raise UsageError(f"cannot disable {sorted(unknown)}; choose from {', '.join(ABLATIONS)}")
    try:
        toggles = InfoToggles(
            summary="summary" not in disabled,
            failtest="failtest" not in disabled,
            testcov_list="testcov" not in disabled,
            compile="compile" not in disabled,
            execov_list="execov" not in disabled,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    client = ClientConfig(
        endpoint_url=_pick(args, cfg, "endpoint", "endpoint", ClientConfig.endpoint_url),
        api_key_env=cfg.get("api_key_env", DEFAULT_KEY_ENV),
        timeout=float(cfg.get("timeout", 120.0)),
        max_retries=int(cfg.get("max_retries", 3)),
        max_in_flight=int(cfg.get("max_in_flight", 4)),
    )
    try:
        return PipelineConfig(
            testcov_formula=testcov,
            execov_formula=execov,
            toggles=toggles,
            use_llm="llm" not in disabled,
            list_cap=int(_pick(args, cfg, "list_cap", "list_cap", LIST_CAP)),
            model_id=_pick(args, cfg, "model", "model", DEFAULT_MODEL),
            client=client,
            repeats=int(_pick(args, cfg, "repeats", "repeats", 1)),
            worker_limit=int(_pick(args, cfg, "workers", "worker_limit", 4)),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def make_client(args, config: PipelineConfig, needs_model: bool):
    if getattr(args, "mock_script", None):
        return MockClient.from_file(Path(args.mock_script), max_in_flight=config.client.max_in_flight,
                                    transcript=getattr(args, "transcript", None))
    client = ChatClient(config.client, transcript=getattr(args, "transcript", None))
    if needs_model:
        client.api_key()  # fail fast on missing credentials
    return client


def _write_usage(out: Path, client) -> None:
    usage = {"request_count": client.usage.request_count,
             "total_cost_estimate": round(client.usage.total_cost_estimate, 6)}
    (out / "usage.json").write_text(json.dumps(usage, indent=2) + "\n")


# --- subcommands ----------------------------------------------------------

def cmd_ingest(args) -> int:
    records = []
    for spec in args.execution:
        try:
            exec_id, outcome, directory = spec.split(":", 2)
        except ValueError:
            raise UsageError(f"--execution expects ID:OUTCOME:DIR, got {spec!r}") from None
        if outcome not in ("failing", "passing"):
            raise UsageError(f"outcome must be failing or passing, got {outcome!r}")
        records.append(ExecutionRecord.make(exec_id, outcome, ingest_gcov_dir(Path(directory), args.root)))
    matrix = build_matrix(records)
    save_coverage(matrix, Path(args.out))
    print(f"wrote {args.out}: {len(matrix.executions)} executions, {len(matrix.files)} files")
    return 0


def cmd_rank(args) -> int:
    try:
        formula = Formula.parse(args.formula)
        granularities = [Granularity.TEST, Granularity.EXEC] if args.granularity == "both" \
            else [Granularity.parse(args.granularity)]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    cases = load_manifest(Path(args.manifest))
    out = Path(args.out)
    failed = 0
    shift_rows = []
    for case in cases:
        try:
            matrix = case.load_coverage()
        except CbiError as exc:
            log.error("%s: %s", case.bug_id, exc)
            failed += 1
            continue
        firsts = []
        for g in granularities:
            ranked = rank(matrix, formula, g)
            target = out / g.value if len(granularities) > 1 else out
            (target / case.bug_id).mkdir(parents=True, exist_ok=True)
            (target / case.bug_id / "ranking.json").write_text(ranked.dumps())
            firsts.append(score_bug(ranked, case.ground_truth).first_rank)
        if len(firsts) == 2:
            shift_rows.append((case.bug_id, firsts[0], firsts[1]))
    if shift_rows:
        lines = ["bug_id\ttest_rank\texec_rank"] + [f"{b}\t{x}\t{y}" for b, x, y in shift_rows]
        (out / "rank_shift.tsv").write_text("\n".join(lines) + "\n")
        if not args.no_figures:
            from .plots import rank_shift_figure
            rank_shift_figure(shift_rows, out / "rank_shift.png")
    print(f"ranked {len(cases) - failed}/{len(cases)} cases into {out}")
    return 1 if failed else 0


def _doc_sources(args):
    sources = []
    for path in args.doc_links or []:
        sources.extend(load_doc_links(Path(path)))
    if args.manifest:
        for case in load_manifest(Path(args.manifest)):
            if case.doc_links_path is not None:
                sources.extend(load_doc_links(case.doc_links_path))
    seen, unique = set(), []
    for s in sources:
        if s.file not in seen:
            seen.add(s.file)
            unique.append(s)
    return unique


def cmd_summarize(args) -> int:
    config = build_config(args)
    sources = _doc_sources(args)
    if not sources:
        raise UsageError("nothing to summarize: give --doc-links or a --manifest with doc_links")
    store = SummaryStore.load(Path(args.store))
    pending = [s for s in sources if args.refresh or s.file not in store]
    client = make_client(args, config, needs_model=bool(pending))
    calls = ensure_summaries(store, sources, client, config.model_id, compiler=args.compiler, refresh=args.refresh)
    store.save()
    print(f"{calls} summaries generated, {len(store)} cached in {args.store}")
    return 0


def _load_store(args) -> SummaryStore:
    return SummaryStore.load(Path(args.summaries)) if args.summaries else SummaryStore()


def cmd_isolate(args) -> int:
    config = build_config(args)
    cases = load_manifest(Path(args.manifest))
    store = _load_store(args)
    if args.dump_prompt:
        digests = dump_prompts(cases, config, Path(args.dump_prompt), store)
        print(f"wrote {len(digests)} prompts to {args.dump_prompt}")
        return 0
    client = make_client(args, config, needs_model=config.use_llm)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outcome = run_isolation(cases, config, client, out, store)
    if args.summaries:
        store.save()
    _write_usage(out, client)
    for bug, err in sorted(outcome.failures.items()):
        print(f"{bug}: FAILED: {err}", file=sys.stderr)
    print(f"isolated {len(outcome.isolations)}/{len(cases)} cases into {out}")
    return 1 if outcome.failures else 0


def cmd_evaluate(args) -> int:
    cases = load_manifest(Path(args.manifest))
    results = load_rankings(Path(args.rankings), cases, Path(args.manifest))
    reports = [aggregate(results)]
    if args.by_compiler:
        reports = split_by_compiler(results) + reports
    out = Path(args.out)
    write_report(reports, out)
    if not args.no_figures:
        from .plots import topn_figure
        topn_figure(reports, out / "topn.png")
    sys.stdout.write(format_table(reports))
    return 0


def cmd_ablate(args) -> int:
    config = build_config(args)
    cases = load_manifest(Path(args.manifest))
    store = _load_store(args)
    variants = ablation_variants(config, formula_swaps=args.formula_swaps)
    client = make_client(args, config, needs_model=True)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports, failures = run_ablation(cases, variants, client, out, store)
    write_report(reports, out, title="Variant")
    if not args.no_figures:
        from .plots import topn_figure
        topn_figure(reports, out / "ablation.png")
    _write_usage(out, client)
    for label, errs in failures.items():
        for bug, err in sorted(errs.items()):
            print(f"{label} {bug}: FAILED: {err}", file=sys.stderr)
    sys.stdout.write(format_table(reports, title="Variant"))
    return 1 if failures else 0


# --- parser -------------------------------------------------------------------

def _add_model_flags(p):
    p.add_argument("--config", help="JSON config file (flags override it)")
    p.add_argument("--model", help=f"model id (default {DEFAULT_MODEL})")
    p.add_argument("--endpoint", help="chat-completions URL")
    p.add_argument("--mock-script", help="JSON map of prompt SHA-256 -> response; no network")
    p.add_argument("--transcript", help="append request/response records as JSON lines")


def _add_pipeline_flags(p):
    _add_model_flags(p)
    p.add_argument("--manifest", required=True, help="benchmark manifest (JSON array of bug cases)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--summaries", help="summary cache file")
    p.add_argument("--testcov-formula", choices=FORMULAS)
    p.add_argument("--execov-formula", choices=FORMULAS)
    p.add_argument("--list-cap", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cbiso", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="turn per-execution gcov directories into a coverage manifest")
    p.add_argument("--execution", action="append", required=True, metavar="ID:OUTCOME:DIR",
                   help="one execution; OUTCOME is failing or passing; DIR holds *.gcov files")
    p.add_argument("--root", help="source root prefix to strip from gcov paths")
    p.add_argument("--out", required=True, help="coverage manifest to write")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("rank", help="rank candidate files with one SBFL formula")
    p.add_argument("--manifest", required=True)
    p.add_argument("--formula", choices=FORMULAS, default="ochiai")
    p.add_argument("--granularity", choices=["test", "exec", "both"], default="test")
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("summarize", help="build or refresh the file summary cache")
    _add_model_flags(p)
    p.add_argument("--doc-links", action="append", help="file -> url/document map (repeatable)")
    p.add_argument("--manifest", help="take doc-link maps from a benchmark manifest")
    p.add_argument("--store", required=True, help="summary cache file")
    p.add_argument("--compiler", default="GCC")
    p.add_argument("--refresh", action="store_true", help="regenerate cached summaries")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("isolate", help="re-rank suspicious files with the model")
    _add_pipeline_flags(p)
    p.add_argument("--disable", action="append", choices=ABLATIONS, help="drop an information source")
    p.add_argument("--dump-prompt", metavar="DIR", help="only assemble prompts and write them to DIR")
    p.set_defaults(func=cmd_isolate)

    p = sub.add_parser("evaluate", help="compute Top-N, MFR and MAR over ranking files")
    p.add_argument("--rankings", required=True, help="directory of <bug_id>/ranking.json")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--by-compiler", action="store_true", help="add one row per compiler")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="evaluate the full pipeline and each single-source removal")
    _add_pipeline_flags(p)
    p.add_argument("--formula-swaps", action="store_true", help="also run every formula swap variant")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"cbiso: error: {exc}", file=sys.stderr)
        return 2
    except (CbiError, OSError, ValueError) as exc:
        print(f"cbiso: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
