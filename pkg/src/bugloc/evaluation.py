"""Ranking metrics and the report tables built on them.

All metrics take a ranked list of paths (best first) and a collection of
truth paths. Average precision runs over the full list and divides by the
number of truth files, so truths the ranking never retrieves count as misses.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import BugLocError
from .textprep import BUG_CHANNELS
from .codeextract import CODE_CHANNELS
from .vsm import FeatureStore, cell_index

TOP_NS = (1, 5, 10)


def _check_n(n: int) -> None:
    if n < 1:
        raise ValueError("n must be >= 1")


def precision_at(ranked: Sequence[str], truth, n: int) -> float:
    _check_n(n)
    truth = set(truth)
    return sum(1 for p in ranked[:n] if p in truth) / n


def recall_at(ranked: Sequence[str], truth, n: int) -> float:
    _check_n(n)
    truth = set(truth)
    if not truth:
        raise BugLocError("no-ground-truth", "recall needs at least one truth file")
    return sum(1 for p in ranked[:n] if p in truth) / len(truth)


def average_precision(ranked: Sequence[str], truth) -> float:
    truth = set(truth)
    if not truth:
        raise BugLocError("no-ground-truth", "average precision needs at least one truth file")
    hits, total = 0, 0.0
    for i, path in enumerate(ranked, start=1):
        if path in truth:
            hits += 1
            total += hits / i
    return total / len(truth)


def reciprocal_rank(ranked: Sequence[str], truth) -> float:
    truth = set(truth)
    for i, path in enumerate(ranked, start=1):
        if path in truth:
            return 1.0 / i
    return 0.0


def first_hit(ranked: Sequence[str], truth) -> int | None:
    truth = set(truth)
    for i, path in enumerate(ranked, start=1):
        if path in truth:
            return i
    return None


@dataclass(frozen=True)
class BugMetrics:
    bug_id: str
    ap: float
    rr: float
    first_hit: int | None
    keys: tuple = ()  # grouping values, e.g. (("year", 2014), ("project", "A"))


def bug_metrics(bug_id: str, ranked: Sequence[str], truth, **keys) -> BugMetrics:
    return BugMetrics(bug_id, average_precision(ranked, truth), reciprocal_rank(ranked, truth),
                      first_hit(ranked, truth), tuple(sorted(keys.items())))


@dataclass
class EvalReport:
    population: str
    size: int
    map: float
    mrr: float
    top: dict  # n -> count
    per_bug: list = field(default_factory=list)

    def top_pct(self, n: int) -> float:
        return 100.0 * self.top[n] / self.size

    def summary(self) -> dict:
        out = {"population": self.population, "size": self.size, "MAP": self.map, "MRR": self.mrr}
        for n in sorted(self.top):
            out[f"Top{n}"] = self.top[n]
            out[f"Top{n}%"] = self.top_pct(n)
        return out

    def to_json(self) -> dict:
        data = self.summary()
        data["per_bug"] = [asdict(m) for m in self.per_bug]
        return data


def aggregate(metrics: Iterable[BugMetrics], population: str = "all", ns=TOP_NS) -> EvalReport:
    metrics = list(metrics)
    if not metrics:
        raise BugLocError("empty-population", f"population {population!r} has no reports")
    size = len(metrics)
    return EvalReport(
        population=population,
        size=size,
        map=math.fsum(m.ap for m in metrics) / size,
        mrr=math.fsum(m.rr for m in metrics) / size,
        top={n: sum(1 for m in metrics if m.first_hit is not None and m.first_hit <= n) for n in ns},
        per_bug=metrics,
    )


def evaluate_rankings(rankings: Mapping[str, Sequence[str]], truths: Mapping[str, Iterable[str]],
                      bugs: Iterable[str] | None = None, population: str = "all",
                      keys: Mapping[str, Mapping] | None = None) -> EvalReport:
    """Aggregate over ``bugs`` (default: every ranked report with a truth)."""
    bugs = list(bugs) if bugs is not None else [b for b in rankings if truths.get(b)]
    per_bug = []
    for b in bugs:
        if b not in rankings:
            raise BugLocError("input", f"no ranking for report {b}")
        per_bug.append(bug_metrics(b, rankings[b], truths[b], **(keys or {}).get(b, {})))
    return aggregate(per_bug, population)


def group_by(metrics: Iterable[BugMetrics], key: str) -> dict:
    groups: dict = {}
    for m in metrics:
        groups.setdefault(dict(m.keys).get(key), []).append(m)
    return {k: aggregate(v, f"{key}={k}") for k, v in sorted(groups.items(), key=lambda kv: str(kv[0]))}


# -- tables -----------------------------------------------------------------

def per_year_table(models_by_cutoff: Mapping[int, Mapping[str, Sequence[str]]], truths,
                   test_bugs_by_cutoff: Mapping[int, Iterable[str]]) -> list[dict]:
    """One row per cutoff: test population size, MAP, MRR, Top1/5/10 as percentages."""
    rows = []
    for year in sorted(models_by_cutoff):
        rep = evaluate_rankings(models_by_cutoff[year], truths, sorted(test_bugs_by_cutoff[year]),
                                population=f"cutoff={year}")
        rows.append({"cutoff": year, **rep.summary()})
    return rows


def baseline_comparison(ours: Mapping[str, Sequence[str]], tools: Mapping[str, Mapping[str, Sequence[str]]],
                        truths) -> list[dict]:
    """Per tool, both sides scored on the reports both rank (and which have a truth)."""
    rows = []
    for tool in sorted(tools):
        common = sorted(b for b in tools[tool] if b in ours and truths.get(b))
        if not common:
            continue
        theirs = evaluate_rankings(tools[tool], truths, common, population=tool)
        mine = evaluate_rankings(ours, truths, common, population="ours")
        rows.append({"tool": tool, "size": len(common),
                     "tool_MAP": theirs.map, "tool_MRR": theirs.mrr,
                     "ours_MAP": mine.map, "ours_MRR": mine.mrr,
                     **{f"tool_Top{n}": theirs.top[n] for n in TOP_NS},
                     **{f"ours_Top{n}": mine.top[n] for n in TOP_NS}})
    return rows


def region_vs_multi(per_region: Mapping[str, Mapping[str, Sequence[str]]], multi: Mapping[str, Sequence[str]],
                    truths, bugs: Iterable[str]) -> list[dict]:
    """Each single-region classifier and the averaged ensemble on one test population."""
    bugs = sorted(bugs)
    rows = []
    for name in sorted(per_region):
        rows.append({"classifier": name, **evaluate_rankings(per_region[name], truths, bugs, name).summary()})
    rows.append({"classifier": "multi", **evaluate_rankings(multi, truths, bugs, "multi").summary()})
    return rows


# -- dissection -------------------------------------------------------------

def rank_by_column(store: FeatureStore, column: np.ndarray) -> dict[str, list]:
    """Per report, paths by descending score with ties in store order."""
    groups: dict[str, list] = {}
    for i, b in enumerate(store.bug_ids):
        groups.setdefault(b, []).append(i)
    out = {}
    for b, idx in groups.items():
        idx = np.asarray(idx)
        order = np.argsort(-column[idx], kind="stable")
        out[b] = [store.paths[i] for i in idx[order]]
    return out


def store_truths(store: FeatureStore) -> dict[str, set]:
    truths: dict[str, set] = {b: set() for b in store.bug_order()}
    for b, p, y in zip(store.bug_ids, store.paths, store.y):
        if y:
            truths[b].add(p)
    return truths


def dissect_pairs(store: FeatureStore, truths: Mapping[str, Iterable[str]] | None = None,
                  bugs: Iterable[str] | None = None) -> dict[tuple, tuple]:
    """``{(bug_channel, code_channel): (MAP, MRR)}`` ranking by each grid cell alone."""
    truths = store_truths(store) if truths is None else truths
    if bugs is not None:
        keep = set(bugs)
        store = store.subset(np.array([i for i, b in enumerate(store.bug_ids) if b in keep], dtype=np.int64))
    population = [b for b in store.bug_order() if truths.get(b)]
    grid = {}
    for bc in BUG_CHANNELS:
        for cc in CODE_CHANNELS:
            ranked = rank_by_column(store, store.X[:, cell_index(bc, cc)])
            rep = evaluate_rankings(ranked, truths, population, f"{bc}2{cc}")
            grid[(bc, cc)] = (rep.map, rep.mrr)
    return grid


def best_cell(grid: Mapping[tuple, tuple], metric: int = 0) -> tuple:
    """Cell with the highest MAP (``metric=0``) or MRR (``1``); grid order breaks ties."""
    return max(grid, key=lambda c: (grid[c][metric], -list(grid).index(c)))


# -- emission ---------------------------------------------------------------

def to_json(obj) -> str:
    if isinstance(obj, EvalReport):
        obj = obj.to_json()
    return json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n"


def format_table(rows: Sequence[Mapping], columns: Sequence[str] | None = None) -> str:
    """Aligned plain-text columns; floats to four places."""
    if not rows:
        return ""
    columns = list(columns or rows[0].keys())

    def cell(v):
        if isinstance(v, float):
            return f"{v:.4f}"
        return str(v)

    body = [[cell(r.get(c, "")) for c in columns] for r in rows]
    widths = [max(len(c), *(len(r[i]) for r in body)) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for r in body:
        lines.append("  ".join(v.rjust(w) if v[:1].isdigit() or v[:1] == "-" else v.ljust(w)
                               for v, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"


def grid_csv(grid: Mapping[tuple, tuple]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bug_channel", "code_channel", "MAP", "MRR"])
    for (bc, cc), (m, r) in grid.items():
        w.writerow([bc, cc, repr(m), repr(r)])
    return buf.getvalue()
