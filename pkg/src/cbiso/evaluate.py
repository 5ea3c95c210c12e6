"""Benchmark cases and the Top-N / MFR / MAR metrics."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from statistics import fmean
from typing import Iterable, Sequence

from .coverage import CoverageMatrix, load_coverage, normalize_path
from .errors import CbiError, EmptyResults, ManifestError
from .sbfl import RankedList

TOP_N = (1, 5, 10, 20)
KNOWN_COMPILERS = ("GCC", "LLVM")


@dataclass(frozen=True)
class BugCase:
    bug_id: str
    compiler: str
    failing_source_path: Path
    compile_results: tuple[tuple[str, str], ...]
    coverage_manifest_path: Path
    ground_truth: frozenset[str]
    doc_links_path: Path | None = None

    def load_coverage(self) -> CoverageMatrix:
        return load_coverage(self.coverage_manifest_path)

    def failing_source(self) -> str:
        return self.failing_source_path.read_text(errors="replace")


def _compiler_name(raw: str) -> str:
    for known in KNOWN_COMPILERS:
        if raw.strip().upper() == known:
            return known
    return raw.strip()


def _field(rec: dict, key: str, path: Path, where: str):
    if key not in rec:
        raise ManifestError(path, f"{where}.{key}", "missing")
    return rec[key]


def load_manifest(path: Path) -> list[BugCase]:
    """Parse a benchmark manifest; relative paths resolve against its directory."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ManifestError(path, "<file>", "does not exist") from None
    except json.JSONDecodeError as exc:
        raise ManifestError(path, "<json>", f"invalid JSON at byte {exc.pos}: {exc.msg}") from None
    if not isinstance(doc, list):
        raise ManifestError(path, "<root>", "expected a JSON array of bug cases")
    base = path.parent
    cases, ids = [], set()
    for i, rec in enumerate(doc):
        where = f"[{i}]"
        if not isinstance(rec, dict):
            raise ManifestError(path, where, "expected an object")
        bug_id = str(_field(rec, "bug_id", path, where))
        where = f"[{bug_id}]"
        if bug_id in ids:
            raise ManifestError(path, f"{where}.bug_id", "duplicate")
        ids.add(bug_id)

        source = base / _field(rec, "failing_source", path, where)
        if not source.is_file():
            raise ManifestError(path, f"{where}.failing_source", f"{source} does not exist")
        coverage = base / _field(rec, "coverage", path, where)
        if not coverage.is_file():
            raise ManifestError(path, f"{where}.coverage", f"{coverage} does not exist")
        try:
            load_coverage(coverage)
        except CbiError as exc:
            raise ManifestError(path, f"{where}.coverage", str(exc)) from None

        results = []
        for j, item in enumerate(rec.get("compile_results", [])):
            cfg = _field(item, "config", path, f"{where}.compile_results[{j}]")
            if "output" in item:
                out = item["output"]
            elif "output_file" in item:
                out_path = base / item["output_file"]
                if not out_path.is_file():
                    raise ManifestError(path, f"{where}.compile_results[{j}].output_file", f"{out_path} does not exist")
                out = out_path.read_text(errors="replace")
            else:
                raise ManifestError(path, f"{where}.compile_results[{j}]", "needs output or output_file")
            results.append((str(cfg), str(out)))
        if len({c for c, _ in results}) != len(results):
            raise ManifestError(path, f"{where}.compile_results", "configurations must be distinct")

        truth = _field(rec, "ground_truth", path, where)
        if not isinstance(truth, list) or not truth:
            raise ManifestError(path, f"{where}.ground_truth", "must be a non-empty list of paths")
        docs = rec.get("doc_links")
        doc_path = base / docs if docs else None
        if doc_path is not None and not doc_path.is_file():
            raise ManifestError(path, f"{where}.doc_links", f"{doc_path} does not exist")
        cases.append(BugCase(
            bug_id=bug_id,
            compiler=_compiler_name(str(rec.get("compiler", "GCC"))),
            failing_source_path=source,
            compile_results=tuple(results),
            coverage_manifest_path=coverage,
            ground_truth=frozenset(normalize_path(t) for t in truth),
            doc_links_path=doc_path,
        ))
    return cases


@dataclass(frozen=True)
class PerBugResult:
    bug_id: str
    first_rank: int
    all_ranks: tuple[int, ...]
    fallback_used: bool = False
    compiler: str = ""

    def to_dict(self) -> dict:
        return {"bug_id": self.bug_id, "compiler": self.compiler, "first_rank": self.first_rank,
                "all_ranks": list(self.all_ranks), "fallback_used": self.fallback_used}

    @classmethod
    def from_dict(cls, d: dict) -> PerBugResult:
        return cls(d["bug_id"], int(d["first_rank"]), tuple(int(r) for r in d["all_ranks"]),
                   bool(d.get("fallback_used", False)), d.get("compiler", ""))


def score_bug(final: RankedList, truth: Iterable[str], *, bug_id: str = "", fallback_used: bool = False,
              compiler: str = "") -> PerBugResult:
    truth = sorted(set(truth))
    if not truth:
        raise ValueError("ground truth must be non-empty")
    absent = len(final) + 1
    ranks = {e.file: e.rank for e in final.entries}
    all_ranks = tuple(sorted(ranks.get(f, absent) for f in truth))
    return PerBugResult(bug_id, min(all_ranks), all_ranks, fallback_used, compiler)


@dataclass
class EvaluationReport:
    per_bug: list[PerBugResult]
    top_n: dict[int, int]
    mfr: float
    mar: float
    label: str = "All"

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "bugs": len(self.per_bug),
            "top_n": {str(n): self.top_n[n] for n in TOP_N},
            "mfr": self.mfr,
            "mar": self.mar,
            "per_bug": [r.to_dict() for r in self.per_bug],
        }

    @classmethod
    def from_dict(cls, d: dict) -> EvaluationReport:
        report = aggregate([PerBugResult.from_dict(r) for r in d["per_bug"]])
        report.label = d.get("label", "All")
        return report


def aggregate(results: Sequence[PerBugResult], label: str = "All") -> EvaluationReport:
    results = list(results)
    if not results:
        raise EmptyResults("no per-bug results to aggregate")
    top_n = {n: sum(1 for r in results if r.first_rank <= n) for n in TOP_N}
    mfr = fmean(r.first_rank for r in results)
    mar = fmean(fmean(r.all_ranks) for r in results)
    return EvaluationReport(results, top_n, mfr, mar, label)


def split_by_compiler(results: Sequence[PerBugResult]) -> list[EvaluationReport]:
    groups: dict[str, list[PerBugResult]] = {}
    for r in results:
        groups.setdefault(r.compiler or "Other", []).append(r)
    order = [c for c in KNOWN_COMPILERS if c in groups] + sorted(c for c in groups if c not in KNOWN_COMPILERS)
    return [aggregate(groups[c], c) for c in order]


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def format_table(reports: Sequence[EvaluationReport], title: str = "Subject") -> str:
    """Aligned text table: one row per report, Top-1/5/10/20 then MFR and MAR."""
    header = [title] + [f"Top-{n}" for n in TOP_N] + ["MFR", "MAR"]
    rows = [[r.label] + [str(r.top_n[n]) for n in TOP_N] + [_fmt(r.mfr), _fmt(r.mar)] for r in reports]
    widths = [max(len(row[i]) for row in [header] + rows) for i in range(len(header))]

    def line(cells):
        first = cells[0].ljust(widths[0])
        rest = [c.rjust(w) for c, w in zip(cells[1:], widths[1:])]
        return "  ".join([first] + rest).rstrip()

    rule = "-" * len(line(header))
    return "\n".join([line(header), rule] + [line(r) for r in rows]) + "\n"


def emit_report(reports: Sequence[EvaluationReport] | EvaluationReport, fmt: str = "json") -> str:
    if isinstance(reports, EvaluationReport):
        reports = [reports]
    if fmt == "json":
        return json.dumps({"rows": [r.to_dict() for r in reports]}, indent=2) + "\n"
    if fmt == "text":
        return format_table(reports)
    raise ValueError(f"unknown report format {fmt!r}")


def write_report(reports: Sequence[EvaluationReport], out_dir: Path, title: str = "Subject") -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(emit_report(reports, "json"))
    (out_dir / "report.txt").write_text(format_table(reports, title))


def load_rankings(rankings_dir: Path, cases: Sequence[BugCase], manifest: Path | None = None) -> list[PerBugResult]:
    """Score every case against ``<rankings_dir>/<bug_id>/ranking.json``."""
    results = []
    for case in cases:
        path = Path(rankings_dir) / case.bug_id / "ranking.json"
        if not path.is_file():
            raise ManifestError(manifest or rankings_dir, case.bug_id, f"no ranking file at {path}")
        ranked = RankedList.from_dict(json.loads(path.read_text()))
        fallback = ranked.provenance == "fallback"
        results.append(score_bug(ranked, case.ground_truth, bug_id=case.bug_id,
                                 fallback_used=fallback, compiler=case.compiler))
    return results
