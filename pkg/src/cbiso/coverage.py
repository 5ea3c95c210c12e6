"""Per-file coverage of compiler executions at test and execution granularity.

A :class:`CoverageMatrix` records, for every execution of the compiler on a
test program, how many times each source file was executed.  Test coverage
only asks *whether* a file ran; execution coverage keeps the counts.
"""

from __future__ import annotations

import json
import posixpath
import random
import re
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping

from .errors import (
    CoverageError,
    DuplicateExecutionId,
    EmptyCandidateSet,
    MalformedGcovLine,
    NoFailingExecution,
    UnknownFile,
)


def normalize_path(path: str) -> str:
    """Canonical `/`-separated relative form used as a file identity."""
    if not isinstance(path, str) or not path.strip():
        raise CoverageError(f"empty file path: {path!r}")
    p = path.strip().replace("\\", "/")
    p = posixpath.normpath(p)
    p = p.lstrip("/")
    if p in ("", ".") or p == ".." or p.startswith("../"):
        raise CoverageError(f"path escapes the source tree: {path!r}")
    return p


class Outcome(str, Enum):
    FAILING = "failing"
    PASSING = "passing"


@dataclass(frozen=True)
class ExecutionRecord:
    execution_id: str
    outcome: Outcome
    hits: Mapping[str, int] = field(default_factory=dict)

    @classmethod
    def make(cls, execution_id: str, outcome: Outcome | str, hits: Mapping[str, int]) -> ExecutionRecord:
        """Build a record, normalizing paths and merging duplicates after normalization."""
        merged: dict[str, int] = {}
        for raw, count in hits.items():
            if isinstance(count, bool) or not isinstance(count, int) or count < 0:
                raise CoverageError(f"{execution_id}: hit count for {raw!r} must be a non-negative integer, got {count!r}")
            path = normalize_path(raw)
            merged[path] = merged.get(path, 0) + count
        return cls(str(execution_id), Outcome(outcome), dict(sorted(merged.items())))

    @property
    def failing(self) -> bool:
        return self.outcome is Outcome.FAILING

    def count(self, path: str) -> int:
        return self.hits.get(path, 0)


@dataclass(frozen=True)
class CountVector:
    failed_f: int
    passed_f: int
    total_failed: int
    total_passed: int
    cf: int
    cp: int
    cp_bar: Fraction


@dataclass(frozen=True)
class CoverageMatrix:
    executions: tuple[ExecutionRecord, ...]
    files: tuple[str, ...]

    @property
    def total_failed(self) -> int:
        return sum(1 for e in self.executions if e.failing)

    @property
    def total_passed(self) -> int:
        return sum(1 for e in self.executions if not e.failing)

    def to_manifest(self) -> dict:
        return {
            "executions": [
                {"id": e.execution_id, "outcome": e.outcome.value, "hits": dict(e.hits)}
                for e in self.executions
            ]
        }


def build_matrix(records: Iterable[ExecutionRecord]) -> CoverageMatrix:
    records = tuple(records)
    if not records:
        raise CoverageError("no execution records")
    seen: set[str] = set()
    for r in records:
        if r.execution_id in seen:
            raise DuplicateExecutionId(f"duplicate execution id {r.execution_id!r}")
        seen.add(r.execution_id)
    if not any(r.failing for r in records):
        raise NoFailingExecution("coverage has no failing execution")
    files = sorted({p for r in records for p, c in r.hits.items() if c > 0})
    matrix = CoverageMatrix(records, tuple(files))
    if not candidate_files(matrix):
        raise EmptyCandidateSet("failing executions cover no source file")
    return matrix


def counts(matrix: CoverageMatrix, file: str) -> CountVector:
    if file not in matrix.files:
        raise UnknownFile(file)
    failed_f = passed_f = cf = cp = 0
    for e in matrix.executions:
        n = e.count(file)
        if e.failing:
            cf += n
            failed_f += n > 0
        else:
            cp += n
            passed_f += n > 0
    cp_bar = Fraction(cp, passed_f) if passed_f else Fraction(0)
    return CountVector(
        failed_f=failed_f,
        passed_f=passed_f,
        total_failed=matrix.total_failed,
        total_passed=matrix.total_passed,
        cf=cf,
        cp=cp,
        cp_bar=cp_bar,
    )


def candidate_files(matrix: CoverageMatrix) -> list[str]:
    """Files executed by at least one failing run, in path order."""
    covered = {p for e in matrix.executions if e.failing for p, c in e.hits.items() if c > 0}
    return sorted(covered)


# --- gcov -----------------------------------------------------------------

_GCOV_LINE = re.compile(r"^\s*([^:]+?)\s*:\s*(\d+)\s*:(.*)$")
_COUNT = re.compile(r"^(\d+)\*?$")
_ZERO_MARKERS = {"-", "#####", "=====", "$$$$$", "%%%%%"}
_SKIP_PREFIXES = ("function ", "branch ", "call ", "unconditional ")


def _parse_gcov(text: str):
    """Yield (lineno, count, source_text) for every per-line record."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\r")
        stripped = line.strip()
        if not stripped or stripped.startswith(_SKIP_PREFIXES) or set(stripped) == {"-"}:
            continue
        m = _GCOV_LINE.match(line)
        if m is None:
            # function-instance headers such as "_Z3foov:" inside template blocks
            if re.fullmatch(r"\S+:", stripped):
                continue
            raise MalformedGcovLine(lineno, line)
        marker = m.group(1).strip()
        if marker in _ZERO_MARKERS or marker.rstrip("*") in _ZERO_MARKERS:
            yield lineno, 0, m.group(3)
            continue
        cm = _COUNT.match(marker)
        if cm is None:
            raise MalformedGcovLine(lineno, line)
        yield lineno, int(cm.group(1)), m.group(3)


def ingest_gcov(text: str, file: str | None = None) -> int:
    """Execution count of one source file: the sum of its line counts."""
    return sum(count for _, count, _ in _parse_gcov(text))


def gcov_source_path(text: str) -> str | None:
    """The `Source:` header of a gcov report, if present."""
    for _, _, src in _parse_gcov(text):
        if src.startswith("Source:"):
            return src[len("Source:"):].strip()
    return None


def ingest_gcov_dir(directory: Path, root: str | None = None) -> dict[str, int]:
    """Hit map for one execution from a directory of ``*.gcov`` reports."""
    hits: dict[str, int] = {}
    for report in sorted(Path(directory).rglob("*.gcov")):
        text = report.read_text(errors="replace")
        try:
            total = ingest_gcov(text)
        except MalformedGcovLine as exc:
            raise MalformedGcovLine(exc.lineno, f"{report}: {exc.line}") from None
        source = gcov_source_path(text) or report.name[: -len(".gcov")]
        if root and source.startswith(root):
            source = source[len(root):]
        path = normalize_path(source)
        hits[path] = hits.get(path, 0) + total
    return hits


# --- portable manifest ----------------------------------------------------

def matrix_from_json(doc: dict) -> CoverageMatrix:
    try:
        entries = doc["executions"]
        records = [ExecutionRecord.make(e["id"], e["outcome"], e.get("hits", {})) for e in entries]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CoverageError):
            raise
        raise CoverageError(f"invalid coverage manifest: {exc}") from exc
    return build_matrix(records)


def load_coverage(path: Path) -> CoverageMatrix:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CoverageError(f"{path}: invalid JSON at byte {exc.pos}: {exc.msg}") from exc
    return matrix_from_json(doc)


def save_coverage(matrix: CoverageMatrix, path: Path) -> None:
    Path(path).write_text(json.dumps(matrix.to_manifest(), indent=2, sort_keys=True) + "\n")


def synth_matrix(seed: int, n_files: int, n_passing: int, max_hits: int) -> CoverageMatrix:
    """Random matrix with one failing run that covers every file.

    Passing runs each cover a random subset of the files.  Deterministic for a
    given seed.
    """
    if n_files < 1:
        raise CoverageError("n_files must be >= 1")
    max_hits = max(1, max_hits)
    rng = random.Random(seed)
    width = len(str(n_files - 1))
    files = [f"src/file{i:0{width}d}.c" for i in range(n_files)]
    records = [ExecutionRecord.make("fail-0", Outcome.FAILING, {f: rng.randint(1, max_hits) for f in files})]
    for k in range(n_passing):
        hits = {f: rng.randint(1, max_hits) for f in files if rng.random() < 0.7}
        records.append(ExecutionRecord.make(f"pass-{k}", Outcome.PASSING, hits))
    return build_matrix(records)
