"""Per-file documentation summaries and their on-disk cache."""

from __future__ import annotations

import json
import os
import re
import tempfile
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from string import Template
from typing import Mapping

from .coverage import normalize_path
from .errors import EmptyDocument, StoreCorrupt, SummaryEmpty, SummaryError
from .llm import ChatRequest
from .prompt import SENTINELS

SUMMARY_CHAR_CAP = 1200


@dataclass(frozen=True)
class DocSource:
    file: str
    url: str | None = None
    local_text: str | None = None

    def __post_init__(self):
        if (self.url is None) == (self.local_text is None):
            raise SummaryError(f"{self.file}: give exactly one of url or local_text")


@dataclass(frozen=True)
class FileSummary:
    file: str
    summary: str
    generated_at: str
    model_id: str


def _template() -> Template:
    return Template(resources.files("cbiso").joinpath("assets/summary_prompt.txt").read_text())


def build_summary_prompt(source: DocSource, compiler: str = "GCC") -> str:
    if source.url is not None:
        intro = "The documentation is published at the link below. Open it and read it before answering."
        body = source.url
    else:
        if not source.local_text or not source.local_text.strip():
            raise EmptyDocument(f"{source.file}: documentation text is empty")
        intro = "The documentation text follows between the two rulers."
        body = "-" * 40 + "\n" + source.local_text.strip() + "\n" + "-" * 40
    return _template().substitute(compiler=compiler, path=source.file, document_intro=intro, document=body)


def strip_sentinels(text: str) -> str:
    for marker in SENTINELS:
        text = text.replace(marker, "")
    return text


def truncate_words(text: str, cap: int) -> str:
    """Cut `text` to at most `cap` characters, preferring a whitespace boundary."""
    if len(text) <= cap:
        return text
    head = text[: cap + 1]
    cut = max(head.rfind(ch) for ch in (" ", "\n", "\t"))
    if cut <= 0:
        return text[:cap].rstrip()
    return head[:cut].rstrip()


def clean_summary(text: str, cap: int = SUMMARY_CHAR_CAP) -> str:
    text = strip_sentinels(text)
    text = re.sub(r"[ \t]+\n", "\n", text).strip()
    return truncate_words(text, cap)


def summarize_file(client, source: DocSource, model_id: str, *, compiler: str = "GCC",
                   cap: int = SUMMARY_CHAR_CAP) -> FileSummary:
    prompt = build_summary_prompt(source, compiler)
    reply = client.complete(ChatRequest(user=prompt, model_id=model_id))
    text = clean_summary(reply or "", cap)
    if not text:
        raise SummaryEmpty(f"{source.file}: model returned an empty summary")
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds").replace("+00:00", "Z")
    return FileSummary(source.file, text, stamp, model_id)


class SummaryStore:
    """Summaries keyed by file path, persisted as one JSON object."""

    def __init__(self, path: Path | None = None, entries: Mapping[str, FileSummary] | None = None):
        self.path = Path(path) if path is not None else None
        self.entries: dict[str, FileSummary] = dict(entries or {})
        self._lock = threading.Lock()

    def __contains__(self, file: str) -> bool:
        return file in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, file: str) -> FileSummary | None:
        return self.entries.get(file)

    def put(self, summary: FileSummary) -> None:
        with self._lock:
            self.entries[summary.file] = summary

    def to_json(self) -> str:
        doc = {
            f: {"summary": s.summary, "generated_at": s.generated_at, "model_id": s.model_id}
            for f, s in sorted(self.entries.items())
        }
        return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"

    def save(self, path: Path | None = None) -> None:
        target = Path(path or self.path)
        target.parent.mkdir(parents=True, exist_ok=True)
        with self._lock:
            data = self.to_json()
        fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=target.name, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(data)
        os.replace(tmp, target)

    @classmethod
    def load(cls, path: Path) -> SummaryStore:
        path = Path(path)
        if not path.exists():
            return cls(path)
        raw = path.read_text(encoding="utf-8")
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise StoreCorrupt(path, exc.pos, exc.msg) from None
        if not isinstance(doc, dict):
            raise StoreCorrupt(path, 0, "top level is not an object")
        entries = {}
        for file, rec in doc.items():
            try:
                entries[file] = FileSummary(file, rec["summary"], rec["generated_at"], rec["model_id"])
            except (KeyError, TypeError):
                offset = raw.find(json.dumps(file))
                raise StoreCorrupt(path, max(offset, 0), f"entry {file!r} lacks summary/generated_at/model_id") from None
        return cls(path, entries)


def load_doc_links(path: Path) -> list[DocSource]:
    """Read a file -> url/local-document map into DocSources."""
    path = Path(path)
    doc = json.loads(path.read_text())
    mode = doc.get("mode", "url")
    if mode not in ("url", "file"):
        raise SummaryError(f"{path}: mode must be 'url' or 'file', got {mode!r}")
    sources = []
    for file, target in sorted(doc.items()):
        if file == "mode":
            continue
        name = normalize_path(file)
        if mode == "url":
            sources.append(DocSource(name, url=target))
        else:
            sources.append(DocSource(name, local_text=(path.parent / target).read_text(errors="replace")))
    return sources


def ensure_summaries(store: SummaryStore, sources, client, model_id: str, *, compiler: str = "GCC",
                     refresh: bool = False, cap: int = SUMMARY_CHAR_CAP) -> int:
    """Summarize every source not already cached; returns the number of model calls made."""
    calls = 0
    for source in sources:
        if not refresh and source.file in store:
            continue
        store.put(summarize_file(client, source, model_id, compiler=compiler, cap=cap))
        calls += 1
    return calls
