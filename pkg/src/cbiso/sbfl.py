"""Suspiciousness formulas and ranked file lists."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .coverage import CountVector, CoverageMatrix, candidate_files, counts

INF = math.inf


class Formula(str, Enum):
    WONG2 = "wong2"
    OCHIAI = "ochiai"
    DSTAR2 = "dstar2"
    BARINEL = "barinel"
    TARANTULA = "tarantula"

    @classmethod
    def parse(cls, name: str) -> Formula:
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(f"unknown formula {name!r}; choose from {', '.join(f.value for f in cls)}") from None

    @property
    def label(self) -> str:
        return {"wong2": "Wong2", "ochiai": "Ochiai", "dstar2": "DStar2",
                "barinel": "Barinel", "tarantula": "Tarantula"}[self.value]


class Granularity(str, Enum):
    TEST = "test"
    EXEC = "exec"

    @classmethod
    def parse(cls, name: str) -> Granularity:
        key = name.strip().lower()
        aliases = {"test": "test", "testcov": "test", "test-coverage": "test",
                   "exec": "exec", "execov": "exec", "execution": "exec", "execution-coverage": "exec"}
        if key not in aliases:
            raise ValueError(f"unknown granularity {name!r}; choose test or exec")
        return cls(aliases[key])


def _ratio(num: float, den: float) -> float:
    """num/den with the zero-denominator rule: n/0 -> +inf for n > 0, 0/0 -> 0."""
    if den == 0:
        return INF if num > 0 else 0.0
    return num / den


def _test_score(formula: Formula, c: CountVector) -> float:
    failed, passed, tf, tp = c.failed_f, c.passed_f, c.total_failed, c.total_passed
    if formula is Formula.WONG2:
        return float(failed - passed)
    if formula is Formula.OCHIAI:
        if failed == 0:
            return 0.0
        return failed / math.sqrt(tf * (failed + passed))
    if formula is Formula.DSTAR2:
        return _ratio(failed * failed, passed + (tf - failed))
    if formula is Formula.BARINEL:
        if failed + passed == 0:
            return 0.0
        # 1 - p/(p+f), written as f/(p+f) to avoid cancellation when p >> f
        return failed / (passed + failed)
    if formula is Formula.TARANTULA:
        fail_term = failed / tf if tf else 0.0
        pass_term = passed / tp if tp else 0.0
        if fail_term == 0:
            return 0.0
        return fail_term / (fail_term + pass_term)
    raise ValueError(formula)


def _exec_score(formula: Formula, c: CountVector) -> float:
    cf, cp = c.cf, c.cp
    if formula is Formula.WONG2:
        return float(cf - cp)
    if formula is Formula.OCHIAI:
        if cf == 0:
            return 0.0
        return cf / math.sqrt(cf * (cf + cp))
    if formula is Formula.DSTAR2:
        return _ratio(cf * cf, cp + cf)
    if formula is Formula.BARINEL:
        if cp + cf == 0:
            return 0.0
        return cf / (cp + cf)
    if formula is Formula.TARANTULA:
        if cf == 0:
            return 0.0
        return cf / (float(c.cp_bar) + cf)
    raise ValueError(formula)


def suspiciousness(formula: Formula, granularity: Granularity, c: CountVector) -> float:
    """Score of one file; never NaN, possibly ``inf``."""
    if granularity is Granularity.TEST:
        return _test_score(formula, c)
    return _exec_score(formula, c)


@dataclass(frozen=True)
class RankedEntry:
    file: str
    score: float
    rank: int


@dataclass(frozen=True)
class RankedList:
    entries: tuple[RankedEntry, ...]
    provenance: str

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def files(self) -> list[str]:
        return [e.file for e in self.entries]

    def rank_of(self, file: str) -> int | None:
        for e in self.entries:
            if e.file == file:
                return e.rank
        return None

    def to_dict(self) -> dict:
        return {
            "provenance": self.provenance,
            "entries": [
                {"rank": e.rank, "file": e.file, "score": "inf" if e.score == INF else e.score}
                for e in self.entries
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> RankedList:
        entries = []
        for e in doc["entries"]:
            score = INF if e["score"] == "inf" else float(e["score"])
            entries.append(RankedEntry(e["file"], score, int(e["rank"])))
        return cls(tuple(entries), doc["provenance"])


def sbfl_provenance(formula: Formula, granularity: Granularity) -> str:
    return f"sbfl:{formula.value}:{granularity.value}"


def order_scored(scored: Iterable[tuple[str, float]], provenance: str) -> RankedList:
    """Sort by score descending then path ascending and assign ranks 1..n."""
    ordered = sorted(scored, key=lambda item: (-item[1], item[0]))
    return RankedList(
        tuple(RankedEntry(path, score, i) for i, (path, score) in enumerate(ordered, start=1)),
        provenance,
    )


def from_order(files: Iterable[str], provenance: str) -> RankedList:
    """Ranked list for an explicit order; scores descend n..1 so the sort invariant holds."""
    files = list(files)
    n = len(files)
    return RankedList(
        tuple(RankedEntry(f, float(n - i), i + 1) for i, f in enumerate(files)), provenance
    )


def rank(matrix: CoverageMatrix, formula: Formula, granularity: Granularity) -> RankedList:
    scored = [(f, suspiciousness(formula, granularity, counts(matrix, f))) for f in candidate_files(matrix)]
    return order_scored(scored, sbfl_provenance(formula, granularity))


def first_rank_of(ranked: RankedList, targets: Iterable[str]) -> int:
    """Best rank of any target; ``len(ranked) + 1`` when none is listed."""
    targets = set(targets)
    ranks = [e.rank for e in ranked.entries if e.file in targets]
    return min(ranks) if ranks else len(ranked) + 1
