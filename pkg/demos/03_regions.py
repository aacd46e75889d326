"""Carving the report set into regions by which tools localize each report.

A tool "localizes" a report when one of the fixed files is in its top N.
From six tools we get Only-<tool>, <tool>, UNION, NOT-UNION and INTER.

    python demos/03_regions.py
"""
from bugloc import synthetic
from bugloc.evaluation import format_table
from bugloc.regions import build_regions, overlap, success_sets

corpus = synthetic.generate(0)
kept, _ = synthetic.curated_store(corpus)
truths = {r.id: r.fixed_files for r in kept}
bugs = [r.id for r in kept]

regions = build_regions(corpus.tool_results, truths, bugs, n=1)
print(format_table([{"region": r.name, "reports": len(r.bug_ids)} for r in regions]))

sets = success_sets(corpus.tool_results, truths, bugs, 1)
both, only_a, only_b = overlap(sets["ToolA"], sets["ToolB"])
print(f"\nToolA vs ToolB at Top-1: {both:.1f}% shared, {only_a:.1f}% only A, {only_b:.1f}% only B")

print("\nWidening to Top-5 can only grow what each tool localizes:")
wide = {r.name: len(r.bug_ids) for r in build_regions(corpus.tool_results, truths, bugs, n=5)}
print("  UNION", len(next(r for r in regions if r.name == "UNION").bug_ids), "->", wide["UNION"])
