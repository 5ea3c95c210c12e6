"""Turn a model's free-text re-ranking into a ranked list over the candidates."""

from __future__ import annotations

import posixpath
import re
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterable

from .sbfl import RankedList, from_order

LLM_PROVENANCE = "llm"
FALLBACK_PROVENANCE = "fallback"

_TOKEN = re.compile(r"[A-Za-z0-9_./+\-]+")
_PATHLIKE = re.compile(r"[A-Za-z0-9_+\-]*[A-Za-z_][A-Za-z0-9_+\-]*\.[A-Za-z][A-Za-z0-9+]{0,5}$")


@dataclass
class ParseReport:
    matched: int = 0
    unmatched_mentions: list[str] = field(default_factory=list)
    appended_tail: int = 0
    fallback_used: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


class _Matcher:
    def __init__(self, candidates: Iterable[str]):
        self.paths = set(candidates)
        by_base = Counter(posixpath.basename(p) for p in self.paths)
        self.unique_base = {posixpath.basename(p): p for p in self.paths if by_base[posixpath.basename(p)] == 1}

    def match(self, token: str) -> str | None:
        if token in self.paths:
            return token
        # a longer path that ends with a candidate path, e.g. "src/gcc/tree.c" for "gcc/tree.c"
        suffix_hits = [p for p in self.paths if token.endswith("/" + p)]
        if len(suffix_hits) == 1:
            return suffix_hits[0]
        if len(suffix_hits) > 1:
            return max(suffix_hits, key=len)
        return self.unique_base.get(posixpath.basename(token))


def _tokens(line: str) -> list[str]:
    out = []
    for raw in _TOKEN.findall(line):
        tok = raw.strip(".-+/")
        while tok.startswith("./"):
            tok = tok[2:]
        if tok:
            out.append(tok)
    return out


def parse_ranking(response: str, candidates: Iterable[str], fallback: RankedList) -> tuple[RankedList, ParseReport]:
    """Read candidate mentions top to bottom; the first mention of a file fixes its place.

    Candidates the model never mentions are appended in fallback order.  When
    nothing matches at all, the fallback list is returned unchanged.
    """
    matcher = _Matcher(candidates)
    report = ParseReport()
    order: list[str] = []
    seen: set[str] = set()
    unmatched: dict[str, None] = {}
    for line in (response or "").splitlines():
        for tok in _tokens(line):
            hit = matcher.match(tok)
            if hit is None:
                if _PATHLIKE.match(posixpath.basename(tok)):
                    unmatched.setdefault(tok)
                continue
            if hit not in seen:
                seen.add(hit)
                order.append(hit)
    report.unmatched_mentions = list(unmatched)
    if not order:
        report.fallback_used = True
        return RankedList(fallback.entries, FALLBACK_PROVENANCE), report
    report.matched = len(order)
    tail = [f for f in fallback.files if f not in seen]
    report.appended_tail = len(tail)
    return from_order(order + tail, LLM_PROVENANCE), report
