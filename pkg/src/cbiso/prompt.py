"""Assembly of the multi-source bug isolation prompt.

Sections appear in a fixed order, each framed by a start/end tag.  Any
section can be switched off for ablation runs; the task description is
always emitted last.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from string import Template
from typing import TYPE_CHECKING, Sequence

from .errors import MissingSection

if TYPE_CHECKING:
    from .sbfl import RankedList
    from .summarize import FileSummary

log = logging.getLogger(__name__)

# section key -> (start tag, end tag), in prompt order
SECTIONS = {
    "summary": ("[summary-start]", "[summary-end]"),
    "failtest": ("[source-code-start]", "[source-code-end]"),
    "testcov_list": ("[rankfile-start]", "[rankfile-end]"),
    "compile": ("[result-start]", "[result-end]"),
    "execov_list": ("[executed-file-start]", "[executed-file-end]"),
}
SENTINELS = tuple(tag for pair in SECTIONS.values() for tag in pair)

LIST_CAP = 50
SOURCE_CAP = 20_000
PROMPT_BUDGET = 120_000


@dataclass(frozen=True)
class InfoToggles:
    summary: bool = True
    failtest: bool = True
    testcov_list: bool = True
    compile: bool = True
    execov_list: bool = True

    def __post_init__(self):
        if not (self.testcov_list or self.execov_list):
            raise ValueError("at least one ranked list must stay enabled")

    def enabled(self, section: str) -> bool:
        return getattr(self, section)


@dataclass(frozen=True)
class PromptBundle:
    failing_source: str
    testcov_list: RankedList | None
    execov_list: RankedList | None
    summaries: Sequence[FileSummary] = ()
    compile_results: Sequence[tuple[str, str]] = ()
    toggles: InfoToggles = field(default_factory=InfoToggles)
    list_cap: int = LIST_CAP
    compiler: str = "GCC"

    def __post_init__(self):
        configs = [c for c, _ in self.compile_results]
        if len(set(configs)) != len(configs):
            raise ValueError(f"compile configurations must be distinct: {configs}")


def neutralize(text: str) -> str:
    """Defuse section tags inside untrusted text so framing cannot be spoofed."""
    for tag in SENTINELS:
        text = text.replace(tag, "(" + tag[1:-1] + ")")
    return text


def _task_asset() -> dict:
    return json.loads(resources.files("cbiso").joinpath("assets/task_description.json").read_text())


def _ranked_lines(ranked: RankedList, cap: int) -> str:
    return "\n".join(f"{e.rank}. {e.file}" for e in ranked.entries[:cap])


def _summary_body(summaries: Sequence[FileSummary]) -> str:
    blocks = [f"File: {s.file}\nSummary: {neutralize(s.summary)}" for s in sorted(summaries, key=lambda s: s.file)]
    return "\n\n".join(blocks)


def _source_body(source: str) -> str:
    source = neutralize(source)
    if len(source) > SOURCE_CAP:
        source = source[:SOURCE_CAP] + "\n[truncated]"
    return source.rstrip("\n")


def _compile_body(results: Sequence[tuple[str, str]]) -> str:
    return "\n\n".join(f"Configuration: {cfg}\n{neutralize(out).rstrip()}" for cfg, out in results)


def _frame(section: str, body: str) -> str:
    start, end = SECTIONS[section]
    return f"{start}\n{body}\n{end}"


def task_description(toggles: InfoToggles, compiler: str = "GCC") -> str:
    asset = _task_asset()
    lines = [Template(asset["intro"]).substitute(compiler=compiler)]
    lines += [asset["sections"][key] for key in SECTIONS if toggles.enabled(key)]
    lines.append(asset["closing"])
    return "\n".join(lines)


def assemble_isolation_prompt(bundle: PromptBundle, budget: int | None = PROMPT_BUDGET) -> str:
    t = bundle.toggles
    parts: list[str] = []
    if t.summary:
        if not bundle.summaries:
            raise MissingSection("summary section enabled but no file summaries were supplied")
        parts.append(_frame("summary", _summary_body(bundle.summaries)))
        parts.append(
            f"The descriptions above explain what each {bundle.compiler} source file is responsible for. "
            "Keep these roles in mind while working on the task below."
        )
    if t.failtest:
        if not bundle.failing_source.strip():
            raise MissingSection("failtest section enabled but the failing program is empty")
        parts.append(_frame("failtest", _source_body(bundle.failing_source)))
    if t.testcov_list:
        if bundle.testcov_list is None or not len(bundle.testcov_list):
            raise MissingSection("testcov_list section enabled but the test-coverage list is empty")
        parts.append(_frame("testcov_list", _ranked_lines(bundle.testcov_list, bundle.list_cap)))
    if t.compile:
        if not bundle.compile_results:
            raise MissingSection("compile section enabled but no compilation results were supplied")
        parts.append(_frame("compile", _compile_body(bundle.compile_results)))
    if t.execov_list:
        if bundle.execov_list is None or not len(bundle.execov_list):
            raise MissingSection("execov_list section enabled but the execution-coverage list is empty")
        parts.append(_frame("execov_list", _ranked_lines(bundle.execov_list, bundle.list_cap)))
    parts.append(task_description(t, bundle.compiler))
    text = "\n\n".join(parts) + "\n"
    if budget is not None and prompt_budget(text) > budget:
        log.warning("prompt is %d characters, over the %d character budget", prompt_budget(text), budget)
    return text


def prompt_budget(text: str) -> int:
    return len(text)
