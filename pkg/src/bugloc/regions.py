"""Baseline-tool results, TopN success sets and the region family.

A region is a set of bug-report ids. With one success set per tool
(reports the tool localizes within its first ``n`` files) the family is::

    <tool>        reports the tool localizes
    Only-<tool>   reports this tool and no other tool localizes
    UNION         localized by at least one tool
    INTER         localized by every tool
    NOT-UNION     localized by none
"""
from __future__ import annotations

import csv
import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import BugLocError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ToolResult:
    tool: str
    bug_id: str
    ranked_files: tuple

    def __post_init__(self):
        if len(set(self.ranked_files)) != len(self.ranked_files):
            raise ValueError(f"{self.tool}/{self.bug_id}: duplicate paths in ranked list")


@dataclass(frozen=True)
class Region:
    name: str
    bug_ids: frozenset

    def __len__(self):
        return len(self.bug_ids)


def topn_success(result: ToolResult, truth, n: int) -> int:
    if n < 1:
        raise ValueError("n must be >= 1")
    truth = set(truth)
    return int(any(path in truth for path in result.ranked_files[:n]))


def read_tool_results(fh) -> list[ToolResult]:
    """Parse ``tool,bug_id,rank,path`` rows (header optional) into ranked lists."""
    ranked = defaultdict(list)
    for lineno, row in enumerate(csv.reader(fh), start=1):
        if not row or (lineno == 1 and row[:4] == ["tool", "bug_id", "rank", "path"]):
            continue
        if len(row) != 4:
            raise BugLocError("input", f"tool results line {lineno}: expected 4 columns")
        tool, bug, rank, path = row
        try:
            rank = int(rank)
        except ValueError:
            raise BugLocError("input", f"tool results line {lineno}: bad rank {rank!r}") from None
        ranked[(tool, bug)].append((rank, path))
    results = []
    for (tool, bug), entries in ranked.items():
        entries.sort()
        ranks = [r for r, _ in entries]
        if ranks != list(range(1, len(ranks) + 1)):
            raise BugLocError("input", f"{tool}/{bug}: ranks are not 1..k")
        results.append(ToolResult(tool, bug, tuple(p for _, p in entries)))
    return results


def write_tool_results(results: Iterable[ToolResult], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["tool", "bug_id", "rank", "path"])
    for res in results:
        for rank, path in enumerate(res.ranked_files, start=1):
            w.writerow([res.tool, res.bug_id, rank, path])


def success_sets(results: Iterable[ToolResult], truths: Mapping[str, Iterable[str]],
                 all_bugs, n: int = 1) -> dict[str, set]:
    """Per-tool set of reports localized within the top ``n``."""
    all_bugs = set(all_bugs)
    sets: dict[str, set] = {}
    seen = set()
    ignored = 0
    for res in results:
        key = (res.tool, res.bug_id)
        if key in seen:
            raise BugLocError("ambiguous-result", f"duplicate result for tool {res.tool}, bug {res.bug_id}")
        seen.add(key)
        sets.setdefault(res.tool, set())
        if res.bug_id not in all_bugs:
            ignored += 1
            continue
        if topn_success(res, truths.get(res.bug_id, ()), n):
            sets[res.tool].add(res.bug_id)
    if ignored:
        log.warning("ignored %d tool results for reports outside the corpus", ignored)
    return sets


def build_regions(results: Iterable[ToolResult], truths: Mapping[str, Iterable[str]],
                  all_bugs, n: int = 1) -> list[Region]:
    """The region family: Only-<tool> and <tool> per tool, then UNION, NOT-UNION, INTER."""
    all_bugs = frozenset(all_bugs)
    sets = success_sets(results, truths, all_bugs, n)
    if not sets:
        raise BugLocError("input", "no tool results")
    tools = sorted(sets)
    union = frozenset().union(*sets.values())
    inter = frozenset.intersection(*(frozenset(sets[t]) for t in tools))
    regions = []
    for tool in tools:
        others = frozenset().union(*(sets[t] for t in tools if t != tool))
        regions.append(Region(f"Only-{tool}", frozenset(sets[tool]) - others))
    for tool in tools:
        regions.append(Region(tool, frozenset(sets[tool])))
    regions.append(Region("UNION", union))
    regions.append(Region("NOT-UNION", all_bugs - union))
    regions.append(Region("INTER", inter))
    return regions


def overlap(a, b):
    """Percentages ``(both, only_a, only_b)`` of ``a | b``."""
    a, b = set(a), set(b)
    universe = a | b
    if not universe:
        raise BugLocError("empty-universe", "both sets are empty")
    size = len(universe)
    return (100.0 * len(a & b) / size, 100.0 * len(a - b) / size, 100.0 * len(b - a) / size)


def overlap_table(results, truths, all_bugs, ns=(1, 5, 10)):
    """Pairwise overlap rows ``(tool_a, tool_b, {n: (both, only_a, only_b)})``."""
    results = list(results)
    per_n = {n: success_sets(results, truths, all_bugs, n) for n in ns}
    tools = sorted(per_n[ns[0]])
    rows = []
    for i, a in enumerate(tools):
        for b in tools[i + 1:]:
            cells = {}
            for n in ns:
                sa, sb = per_n[n][a], per_n[n][b]
                cells[n] = overlap(sa, sb) if sa | sb else (float("nan"),) * 3
            rows.append((a, b, cells))
    return rows


def exclusive_counts(results, truths, all_bugs, ns=(1, 5, 10)):
    """Venn-style counts per N: how many reports each tool alone localizes, etc."""
    results = list(results)
    table = {}
    for n in ns:
        regions = {r.name: len(r) for r in build_regions(results, truths, all_bugs, n)}
        table[n] = regions
    return table
