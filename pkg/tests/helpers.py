"""Fixture builders shared by the test modules."""

from __future__ import annotations

import json
from pathlib import Path

from cbiso.coverage import ExecutionRecord, Outcome, build_matrix
from cbiso.summarize import FileSummary, SummaryStore

FAULTY_59221 = "gcc/tree-ssa-threadupdate.c"

# 22 neighbours of the faulty file; each is covered by at most two of the three
# passing programs, so every one of them outscores the faulty file under
# test-coverage Ochiai (1/sqrt(1*(1+k)) > 0.5 for k <= 2).
_NEIGHBOURS = [
    "gcc/tree-vrp.c", "gcc/tree-ssa-dom.c", "gcc/tree-cfg.c", "gcc/cfgloop.c",
    "gcc/tree-ssa-loop-niter.c", "gcc/tree-scalar-evolution.c", "gcc/gimple-fold.c",
    "gcc/fold-const.c", "gcc/tree-ssa-ccp.c", "gcc/tree-ssa-copy.c", "gcc/tree-into-ssa.c",
    "gcc/tree-ssa-propagate.c", "gcc/tree-ssa-threadedge.c", "gcc/cfganal.c", "gcc/dominance.c",
    "gcc/tree-ssa-loop-manip.c", "gcc/tree-chrec.c", "gcc/tree-ssa-pre.c", "gcc/tree-ssa-sccvn.c",
    "gcc/tree-data-ref.c", "gcc/tree-ssa-alias.c", "gcc/value-prof.c",
]


def gcc59221_records() -> list[ExecutionRecord]:
    fail = {FAULTY_59221: 900}
    passing = [{FAULTY_59221: 10}, {FAULTY_59221: 10}, {FAULTY_59221: 10}]
    for i, path in enumerate(_NEIGHBOURS):
        fail[path] = 120 + 3 * i
        for k in range(i % 3):  # 0, 1 or 2 passing programs cover it
            passing[k][path] = 40 + i
    records = [ExecutionRecord.make("fail", Outcome.FAILING, fail)]
    records += [ExecutionRecord.make(f"pass{k}", Outcome.PASSING, h) for k, h in enumerate(passing)]
    return records


def gcc59221_matrix():
    return build_matrix(gcc59221_records())


FAILING_SOURCE_59221 = """\
int a, b, c;
int main (void)
{
  for (b = 0; b < 2; b++)
    for (c = 0; c < 3; c++)
      a = c ? a : 1;
  return a - 1;
}
"""


def _write_json(path: Path, doc) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def _llvm_records():
    fail = {"lib/CodeGen/SelectionDAG/DAGCombiner.cpp": 40, "lib/Target/X86/X86ISelLowering.cpp": 300,
            "lib/CodeGen/MachineCSE.cpp": 20, "lib/Transforms/InstCombine/InstCombineAndOrXor.cpp": 15}
    passing = [
        {"lib/Target/X86/X86ISelLowering.cpp": 80, "lib/CodeGen/MachineCSE.cpp": 18},
        {"lib/Target/X86/X86ISelLowering.cpp": 90, "lib/Transforms/InstCombine/InstCombineAndOrXor.cpp": 15},
    ]
    return {"executions": [{"id": "fail", "outcome": "failing", "hits": fail}] +
            [{"id": f"pass{k}", "outcome": "passing", "hits": h} for k, h in enumerate(passing)]}


def _gcc_small_records():
    fail = {"gcc/combine.c": 70, "gcc/expr.c": 200, "gcc/reload.c": 30, "gcc/emit-rtl.c": 90}
    passing = [{"gcc/expr.c": 150, "gcc/emit-rtl.c": 80, "gcc/reload.c": 29},
               {"gcc/expr.c": 140, "gcc/combine.c": 5}]
    return {"executions": [{"id": "fail", "outcome": "failing", "hits": fail}] +
            [{"id": f"pass{k}", "outcome": "passing", "hits": h} for k, h in enumerate(passing)]}


SUMMARY_TEXT = "Implements one stage of the compiler middle end for {name}."


def build_benchmark(root: Path, multi_truth: bool = False) -> Path:
    """Three-bug benchmark (two GCC, one LLVM) with a primed summary cache.

    Every bug has one faulty file unless `multi_truth`, which gives GCC-70000 two.

    Returns the manifest path; the summary cache sits next to it as
    ``summaries.json``.
    """
    root.mkdir(parents=True, exist_ok=True)
    m59221 = {"executions": [
        {"id": r.execution_id, "outcome": r.outcome.value, "hits": dict(r.hits)} for r in gcc59221_records()
    ]}
    bugs = [
        ("GCC-59221", "GCC", m59221, FAILING_SOURCE_59221, [FAULTY_59221],
         [("-O0", "exit 0"), ("-O3", "exit 1 (wrong code)")]),
        ("LLVM-25154", "LLVM", _llvm_records(), "int f(int x) { return (x & 3) | (x & 12); }\n",
         ["lib/CodeGen/SelectionDAG/DAGCombiner.cpp"],
         [("-O0", "ok"), ("-O2", "clang: error: unable to execute command: Segmentation fault")]),
        ("GCC-70000", "GCC", _gcc_small_records(), "long g(long *p) { return *p++ + *p; }\n",
         ["gcc/combine.c", "gcc/reload.c"] if multi_truth else ["gcc/combine.c"],
         [("-O1", "ok"), ("-O2", "internal compiler error: in reload, at reload.c:1210")]),
    ]
    manifest = []
    all_files = set()
    for bug_id, compiler, cov, src, truth, results in bugs:
        d = root / bug_id
        _write_json(d / "coverage.json", cov)
        (d / "fail.c").write_text(src)
        for e in cov["executions"]:
            all_files.update(e["hits"])
        manifest.append({
            "bug_id": bug_id,
            "compiler": compiler,
            "failing_source": f"{bug_id}/fail.c",
            "coverage": f"{bug_id}/coverage.json",
            "compile_results": [{"config": c, "output": o} for c, o in results],
            "ground_truth": truth,
        })
    store = SummaryStore(root / "summaries.json")
    for f in sorted(all_files):
        store.put(FileSummary(f, SUMMARY_TEXT.format(name=f.rsplit("/", 1)[-1]), "2024-01-01T00:00:00Z", "gpt-4o"))
    store.save()
    return _write_json(root / "manifest.json", manifest)


def truth_first_script(prompts: dict[str, str], manifest: Path) -> dict[str, str]:
    """Mock script answering each bug's prompt with its ground truth first."""
    from cbiso.llm import digest

    cases = {c["bug_id"]: c for c in json.loads(manifest.read_text())}
    script = {}
    for bug_id, prompt in prompts.items():
        truth = sorted(cases[bug_id]["ground_truth"])
        script[digest(prompt)] = "\n".join(f"{i}. {f}" for i, f in enumerate(truth, start=1))
    return script


GCOV_FAIL = """\
        -:    0:Source:/src/gcc/tree-vrp.c
        5:    1:int f (int x)
        3:    2:{
        -:    3:  /* comment */
    #####:    4:  return x;
"""

GCOV_PASS = """\
        -:    0:Source:/src/gcc/tree-vrp.c
        1:    1:int f (int x)
    #####:    2:{
"""
