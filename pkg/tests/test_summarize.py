import json

import pytest

from cbiso.errors import EmptyDocument, StoreCorrupt, SummaryEmpty, SummaryError
from cbiso.llm import MockClient, digest
from cbiso.prompt import SENTINELS
from cbiso.summarize import (
    DocSource,
    FileSummary,
    SummaryStore,
    build_summary_prompt,
    ensure_summaries,
    load_doc_links,
    summarize_file,
    truncate_words,
)

DOC = "tree-ssa-threadupdate.c: Thread through blocks.\nstruct redirection_data { ... };\nvoid thread_block (basic_block bb);"


def scripted(source, reply, **kw):
    return MockClient({digest(build_summary_prompt(source, **kw)): reply})


def test_prompt_local_text():
    src = DocSource("gcc/tree-ssa-threadupdate.c", local_text=DOC)
    prompt = build_summary_prompt(src)
    assert "gcc/tree-ssa-threadupdate.c" in prompt
    assert "void thread_block (basic_block bb);" in prompt
    assert "GCC" in prompt


def test_prompt_url():
    src = DocSource("x.c", url="https://gcc.gnu.org/onlinedocs/x.c.html")
    prompt = build_summary_prompt(src, compiler="LLVM")
    assert "https://gcc.gnu.org/onlinedocs/x.c.html" in prompt and "LLVM" in prompt


def test_prompt_empty_document():
    with pytest.raises(EmptyDocument):
        build_summary_prompt(DocSource("x.c", local_text=""))
    with pytest.raises(EmptyDocument):
        build_summary_prompt(DocSource("x.c", local_text="  \n"))


def test_doc_source_needs_one_origin():
    with pytest.raises(SummaryError):
        DocSource("x.c")
    with pytest.raises(SummaryError):
        DocSource("x.c", url="u", local_text="t")


def test_summarize_passthrough():
    src = DocSource("gcc/tree-ssa-threadupdate.c", local_text=DOC)
    s = summarize_file(scripted(src, "Handles SSA graph updates after jump threading."), src, "gpt-4o")
    assert s.summary == "Handles SSA graph updates after jump threading."
    assert s.model_id == "gpt-4o" and s.file == src.file
    assert s.generated_at.endswith("Z")


def test_summarize_truncates_at_whitespace():
    src = DocSource("a.c", local_text=DOC)
    long_reply = " ".join(f"word{i:04d}" for i in range(600))  # 5399 chars
    s = summarize_file(scripted(src, long_reply), src, "m")
    assert len(s.summary) <= 1200
    # 8-char words joined by single spaces: 133 whole words fit in 1200 characters
    assert s.summary.split() == long_reply.split()[:133]
    assert long_reply.startswith(s.summary)


def test_truncate_words_edges():
    assert truncate_words("abc def", 7) == "abc def"
    assert truncate_words("abc def", 6) == "abc"
    assert truncate_words("abcdefgh", 4) == "abcd"


def test_summarize_empty_reply():
    src = DocSource("a.c", local_text=DOC)
    with pytest.raises(SummaryEmpty):
        summarize_file(scripted(src, ""), src, "m")
    with pytest.raises(SummaryEmpty):
        summarize_file(scripted(src, "[summary-start][summary-end]"), src, "m")


def test_summary_strips_sentinels():
    src = DocSource("a.c", local_text=DOC)
    reply = "[rankfile-start] Folds constants. [executed-file-end]"
    s = summarize_file(scripted(src, reply), src, "m")
    assert not any(m in s.summary for m in SENTINELS)
    assert s.summary == "Folds constants."


def test_store_roundtrip(tmp_path):
    path = tmp_path / "cache" / "summaries.json"
    store = SummaryStore(path)
    store.put(FileSummary("a.c", "s1 – ünïcode", "2024-05-01T10:00:00Z", "gpt-4o"))
    store.save()
    again = SummaryStore.load(path)
    assert again.entries == store.entries
    doc = json.loads(path.read_text())
    assert doc == {"a.c": {"summary": "s1 – ünïcode", "generated_at": "2024-05-01T10:00:00Z", "model_id": "gpt-4o"}}


def test_store_missing_is_empty(tmp_path):
    store = SummaryStore.load(tmp_path / "nope.json")
    assert len(store) == 0


def test_store_corrupt(tmp_path):
    path = tmp_path / "s.json"
    path.write_text('{"a.c": {"summary": "x", "generated')
    with pytest.raises(StoreCorrupt) as info:
        SummaryStore.load(path)
    assert info.value.offset > 0
    path.write_text('{"a.c": {"summary": "x"}}')
    with pytest.raises(StoreCorrupt):
        SummaryStore.load(path)


def test_cache_idempotent(tmp_path):
    src = DocSource("a.c", local_text=DOC)
    client = scripted(src, "Does things.")
    store = SummaryStore(tmp_path / "s.json")
    assert ensure_summaries(store, [src], client, "m") == 1
    assert ensure_summaries(store, [src], client, "m") == 0
    assert client.calls == 1
    assert ensure_summaries(store, [src], client, "m", refresh=True) == 1
    assert client.calls == 2


def test_doc_links(tmp_path):
    (tmp_path / "docs").mkdir()
    (tmp_path / "docs" / "vrp.txt").write_text("range propagation")
    (tmp_path / "files.json").write_text(json.dumps({"mode": "file", "./gcc/tree-vrp.c": "docs/vrp.txt"}))
    (tmp_path / "urls.json").write_text(json.dumps({"mode": "url", "gcc/x.c": "https://example.org/x"}))
    assert load_doc_links(tmp_path / "files.json") == [DocSource("gcc/tree-vrp.c", local_text="range propagation")]
    assert load_doc_links(tmp_path / "urls.json") == [DocSource("gcc/x.c", url="https://example.org/x")]
    (tmp_path / "bad.json").write_text(json.dumps({"mode": "ftp"}))
    with pytest.raises(SummaryError):
        load_doc_links(tmp_path / "bad.json")
