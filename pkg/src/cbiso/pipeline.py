"""Single-bug isolation and the batch / ablation drivers built on it."""

from __future__ import annotations

import dataclasses
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .coverage import candidate_files
from .evaluate import BugCase, EvaluationReport, PerBugResult, aggregate, score_bug
from .errors import CbiError, MissingSection
from .llm import DEFAULT_MODEL, ChatRequest, ClientConfig, digest
from .prompt import LIST_CAP, InfoToggles, PromptBundle, assemble_isolation_prompt
from .rerank import ParseReport, parse_ranking
from .sbfl import Formula, Granularity, RankedList, rank
from .summarize import SummaryStore, ensure_summaries, load_doc_links

log = logging.getLogger(__name__)

# ablation variant -> component it removes
ABLATIONS = ("summary", "compile", "execov", "testcov", "llm", "failtest")
_TOGGLE_FIELD = {"summary": "summary", "compile": "compile", "execov": "execov_list",
                 "testcov": "testcov_list", "failtest": "failtest"}


@dataclass(frozen=True)
class PipelineConfig:
    testcov_formula: Formula = Formula.OCHIAI
    execov_formula: Formula = Formula.WONG2
    toggles: InfoToggles = field(default_factory=InfoToggles)
    use_llm: bool = True
    list_cap: int = LIST_CAP
    model_id: str = DEFAULT_MODEL
    client: ClientConfig = field(default_factory=ClientConfig)
    repeats: int = 1
    worker_limit: int = 4

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.worker_limit < 1:
            raise ValueError("worker_limit must be >= 1")

    def without(self, component: str) -> PipelineConfig:
        """Copy of this config with one information source removed."""
        if component == "llm":
            return dataclasses.replace(self, use_llm=False)
        if component not in _TOGGLE_FIELD:
            raise ValueError(f"unknown component {component!r}; choose from {', '.join(ABLATIONS)}")
        toggles = dataclasses.replace(self.toggles, **{_TOGGLE_FIELD[component]: False})
        return dataclasses.replace(self, toggles=toggles)


@dataclass
class Isolation:
    bug_id: str
    ranking: RankedList
    report: ParseReport
    prompt: str | None = None
    response: str | None = None


@dataclass
class PreparedCase:
    case: BugCase
    candidates: list[str]
    testcov: RankedList
    execov: RankedList
    prompt: str | None


def _shown_files(config: PipelineConfig, testcov: RankedList, execov: RankedList) -> list[str]:
    shown: set[str] = set()
    if config.toggles.testcov_list:
        shown.update(testcov.files[: config.list_cap])
    if config.toggles.execov_list:
        shown.update(execov.files[: config.list_cap])
    return sorted(shown)


def prepare_case(case: BugCase, config: PipelineConfig, store: SummaryStore | None = None,
                 summarizer=None) -> PreparedCase:
    """Rank the case's candidates both ways and, if the model is used, build its prompt."""
    matrix = case.load_coverage()
    testcov = rank(matrix, config.testcov_formula, Granularity.TEST)
    execov = rank(matrix, config.execov_formula, Granularity.EXEC)
    candidates = candidate_files(matrix)
    if not config.use_llm:
        return PreparedCase(case, candidates, testcov, execov, None)

    summaries = []
    if config.toggles.summary:
        store = store if store is not None else SummaryStore()
        shown = _shown_files(config, testcov, execov)
        if summarizer is not None and case.doc_links_path is not None:
            wanted = set(shown)
            sources = [s for s in load_doc_links(case.doc_links_path) if s.file in wanted]
            ensure_summaries(store, sources, summarizer, config.model_id, compiler=case.compiler)
        summaries = [store.get(f) for f in shown if f in store]
        if not summaries:
            raise MissingSection(f"{case.bug_id}: no summaries available for the listed files")

    bundle = PromptBundle(
        failing_source=case.failing_source() if config.toggles.failtest else "",
        testcov_list=testcov,
        execov_list=execov,
        summaries=summaries,
        compile_results=case.compile_results,
        toggles=config.toggles,
        list_cap=config.list_cap,
        compiler=case.compiler,
    )
    return PreparedCase(case, candidates, testcov, execov, assemble_isolation_prompt(bundle))


def isolate_bug(case: BugCase, config: PipelineConfig, client, store: SummaryStore | None = None) -> Isolation:
    prepared = prepare_case(case, config, store, summarizer=client)
    if not config.use_llm:
        return Isolation(case.bug_id, prepared.execov, ParseReport())

    best: tuple[RankedList, ParseReport, str] | None = None
    for _ in range(config.repeats):
        response = client.complete(ChatRequest(user=prepared.prompt, model_id=config.model_id))
        ranked, report = parse_ranking(response, prepared.candidates, prepared.testcov)
        if best is None or report.matched > best[1].matched:
            best = (ranked, report, response)
    ranked, report, response = best
    return Isolation(case.bug_id, ranked, report, prepared.prompt, response)


def write_isolation(out_dir: Path, iso: Isolation) -> None:
    bug_dir = Path(out_dir) / iso.bug_id
    bug_dir.mkdir(parents=True, exist_ok=True)
    if iso.prompt is not None:
        (bug_dir / "prompt.txt").write_text(iso.prompt, encoding="utf-8")
    if iso.response is not None:
        (bug_dir / "response.txt").write_text(iso.response, encoding="utf-8")
    (bug_dir / "ranking.json").write_text(iso.ranking.dumps())
    (bug_dir / "parse_report.json").write_text(json.dumps(iso.report.to_dict(), indent=2) + "\n")


@dataclass
class BatchOutcome:
    isolations: list[Isolation]
    failures: dict[str, str]

    def results(self, cases: Sequence[BugCase]) -> list[PerBugResult]:
        by_id = {iso.bug_id: iso for iso in self.isolations}
        out = []
        for case in cases:
            iso = by_id.get(case.bug_id)
            if iso is not None:
                out.append(score_bug(iso.ranking, case.ground_truth, bug_id=case.bug_id,
                                     fallback_used=iso.report.fallback_used, compiler=case.compiler))
        return out


def run_isolation(cases: Sequence[BugCase], config: PipelineConfig, client, out_dir: Path,
                  store: SummaryStore | None = None) -> BatchOutcome:
    """Isolate every case on a bounded worker pool; per-bug errors are collected, not raised."""
    store = store if store is not None else SummaryStore()

    def work(case: BugCase):
        try:
            iso = isolate_bug(case, config, client, store)
        except CbiError as exc:
            log.error("%s: %s", case.bug_id, exc)
            return case.bug_id, None, str(exc)
        write_isolation(out_dir, iso)
        return case.bug_id, iso, None

    with ThreadPoolExecutor(max_workers=config.worker_limit) as pool:
        done = list(pool.map(work, cases))
    isolations = [iso for _, iso, _ in done if iso is not None]
    failures = {bug: err for bug, _, err in done if err is not None}
    return BatchOutcome(isolations, failures)


def dump_prompts(cases: Sequence[BugCase], config: PipelineConfig, out_dir: Path,
                 store: SummaryStore | None = None) -> dict[str, str]:
    """Write each case's assembled prompt and return ``{bug_id: prompt digest}``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    digests = {}
    for case in cases:
        prepared = prepare_case(case, config, store)
        if prepared.prompt is None:
            continue
        (out_dir / f"{case.bug_id}.txt").write_text(prepared.prompt, encoding="utf-8")
        digests[case.bug_id] = digest(prepared.prompt)
    (out_dir / "digests.json").write_text(json.dumps(digests, indent=2, sort_keys=True) + "\n")
    return digests


@dataclass(frozen=True)
class Variant:
    label: str
    slug: str
    config: PipelineConfig


def ablation_variants(base: PipelineConfig, formula_swaps: bool = False) -> list[Variant]:
    """The full pipeline, each single-source removal, and optionally every formula swap."""
    variants = [Variant("full", "full", base)]
    variants += [Variant(f"-{c}", f"no-{c}", base.without(c)) for c in ABLATIONS]
    if formula_swaps:
        for f in Formula:
            if f is not base.execov_formula:
                variants.append(Variant(f"+{f.label}[exec]", f"{f.value}-exec",
                                        dataclasses.replace(base, execov_formula=f)))
        for f in Formula:
            if f is not base.testcov_formula:
                variants.append(Variant(f"+{f.label}[test]", f"{f.value}-test",
                                        dataclasses.replace(base, testcov_formula=f)))
    return variants


def run_ablation(cases: Sequence[BugCase], variants: Sequence[Variant], client, out_dir: Path,
                 store: SummaryStore | None = None) -> tuple[list[EvaluationReport], dict[str, dict[str, str]]]:
    reports, failures = [], {}
    for v in variants:
        outcome = run_isolation(cases, v.config, client, Path(out_dir) / "variants" / v.slug, store)
        if outcome.failures:
            failures[v.label] = outcome.failures
        results = outcome.results(cases)
        if results:
            reports.append(aggregate(results, v.label))
    return reports, failures
