"""Ranking metrics, aggregation, report tables and per-cell dissection."""
from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bugloc.errors import BugLocError
from bugloc.evaluation import (
    aggregate,
    average_precision,
    baseline_comparison,
    best_cell,
    bug_metrics,
    dissect_pairs,
    evaluate_rankings,
    first_hit,
    format_table,
    grid_csv,
    group_by,
    per_year_table,
    precision_at,
    recall_at,
    reciprocal_rank,
    region_vs_multi,
    to_json,
)
from bugloc.vsm import FeatureStore, cell_index

from oracles import brute_metrics, brute_report

FILES = [f"F{i}" for i in range(12)]


@st.composite
def instances(draw):
    ranked = draw(st.permutations(FILES).map(lambda p: list(p[: draw(st.integers(0, len(FILES)))])))
    truth = draw(st.sets(st.sampled_from(FILES), min_size=1, max_size=4))
    return ranked, truth


class TestMetrics:
    def test_precision(self):
        assert precision_at(["a"], {"a"}, 1) == 1.0
        assert precision_at(["a", "x", "b", "y", "z"], {"a", "b"}, 5) == pytest.approx(0.4)
        assert precision_at(["x", "y"], {"a"}, 2) == 0.0

    def test_recall(self):
        assert recall_at(["a", "b", "c"] + ["x"] * 7, {"a", "b", "c"}, 10) == 1.0
        assert recall_at(["a", "x", "y"], {"a", "b"}, 5) == 0.5
        with pytest.raises(ValueError):
            recall_at(["a"], {"a"}, 0)
        with pytest.raises(BugLocError) as err:
            recall_at(["a"], set(), 1)
        assert err.value.code == "no-ground-truth"

    def test_average_precision(self):
        assert average_precision(["a", "x"], {"a"}) == 1.0
        assert average_precision(["a", "x", "b"], {"a", "b"}) == pytest.approx((1 + 2 / 3) / 2)
        assert average_precision(["x", "y"], {"a"}) == 0.0

    def test_unretrieved_truth_still_counts(self):
        assert average_precision(["a", "x"], {"a", "b"}) == 0.5

    def test_reciprocal_rank(self):
        assert reciprocal_rank(["a"], {"a"}) == 1.0
        assert reciprocal_rank(["x", "y", "z", "a"], {"a"}) == 0.25
        assert reciprocal_rank(["x"], {"a"}) == 0.0
        assert first_hit(["x", "a"], {"a"}) == 2 and first_hit([], {"a"}) is None

    @given(instances())
    def test_matches_brute_force(self, inst):
        ranked, truth = inst
        ap, rr, first = brute_metrics(ranked, truth)
        assert abs(average_precision(ranked, truth) - ap) <= 1e-12
        assert abs(reciprocal_rank(ranked, truth) - rr) <= 1e-12
        assert first_hit(ranked, truth) == first

    @given(instances())
    def test_ap_bounds_and_perfect_rankings(self, inst):
        ranked, truth = inst
        ap = average_precision(ranked, truth)
        assert 0.0 <= ap <= 1.0
        perfect = set(ranked[: len(truth)]) == truth
        assert (ap == pytest.approx(1.0)) == perfect

    @given(st.permutations(FILES), st.sampled_from(FILES))
    def test_single_truth_identity(self, ranked, truth):
        r = ranked.index(truth) + 1
        assert average_precision(ranked, {truth}) == reciprocal_rank(ranked, {truth}) == 1 / r


class TestAggregate:
    def test_single_perfect_bug(self):
        rep = aggregate([bug_metrics("b", ["a"], {"a"})])
        assert (rep.map, rep.mrr, rep.top[1], rep.top_pct(1)) == (1.0, 1.0, 1, 100.0)

    def test_mean(self):
        rep = aggregate([bug_metrics("b1", ["a"], {"a"}), bug_metrics("b2", ["x", "a"], {"a"})])
        assert rep.map == 0.75

    def test_empty_population(self):
        with pytest.raises(BugLocError):
            aggregate([])

    @given(st.lists(instances(), min_size=1, max_size=20))
    def test_matches_brute_force_report(self, insts):
        rankings = {f"b{i}": r for i, (r, _) in enumerate(insts)}
        truths = {f"b{i}": t for i, (_, t) in enumerate(insts)}
        rep = evaluate_rankings(rankings, truths)
        m, r, top = brute_report(insts)
        assert abs(rep.map - m) <= 1e-12 and abs(rep.mrr - r) <= 1e-12
        assert rep.top == top
        assert rep.top[1] <= rep.top[5] <= rep.top[10]
        assert 0 <= rep.map <= 1 and 0 <= rep.mrr <= 1

    @given(instances())
    def test_singleton(self, inst):
        ranked, truth = inst
        m = bug_metrics("b", ranked, truth)
        rep = aggregate([m])
        assert rep.map == m.ap and rep.mrr == m.rr

    def test_grouping_and_json(self):
        rankings = {"b1": ["a"], "b2": ["x", "a"], "b3": ["a"]}
        truths = {b: {"a"} for b in rankings}
        keys = {"b1": {"year": 2013}, "b2": {"year": 2014}, "b3": {"year": 2014}}
        rep = evaluate_rankings(rankings, truths, keys=keys)
        groups = group_by(rep.per_bug, "year")
        assert groups[2014].map == 0.75 and groups[2013].size == 1
        data = json.loads(to_json(rep))
        assert data["MAP"] == rep.map and len(data["per_bug"]) == 3 and data["Top1%"] == pytest.approx(200 / 3)

    def test_missing_ranking_is_an_error(self):
        with pytest.raises(BugLocError):
            evaluate_rankings({}, {"b": {"a"}}, ["b"])


class TestTables:
    def test_per_year(self):
        truths = {"b1": {"a"}, "b2": {"a"}}
        rows = per_year_table({2013: {"b1": ["a"]}, 2014: {"b2": ["x", "a"]}}, truths,
                              {2013: ["b1"], 2014: ["b2"]})
        assert [r["cutoff"] for r in rows] == [2013, 2014]
        assert rows[1]["MAP"] == 0.5 and rows[0]["Top1%"] == 100.0

    def test_baseline_uses_intersection(self):
        truths = {"b1": {"a"}, "b2": {"a"}, "b3": {"a"}}
        ours = {"b1": ["a"], "b2": ["a"], "b3": ["x", "a"]}
        tools = {"T": {"b2": ["x", "a"], "b3": ["a"]}}
        (row,) = baseline_comparison(ours, tools, truths)
        assert row["size"] == 2 and row["tool_MAP"] == 0.75 and row["ours_MAP"] == 0.75

    def test_region_vs_multi(self):
        truths = {"b1": {"a"}}
        rows = region_vs_multi({"R1": {"b1": ["x", "a"]}}, {"b1": ["a"]}, truths, ["b1"])
        assert [r["classifier"] for r in rows] == ["R1", "multi"] and rows[1]["MAP"] == 1.0

    def test_format_table(self):
        text = format_table([{"name": "x", "MAP": 0.5}, {"name": "long", "MAP": 0.25}])
        lines = text.splitlines()
        assert lines[0].split() == ["name", "MAP"] and "0.5000" in lines[2] and len(lines) == 4


class TestDissect:
    def store(self):
        # two bugs, three files; the planted cell separates the truths
        X = np.zeros((6, 70))
        c = cell_index("summaryHints", "className")
        X[[0, 4], c] = 0.9
        X[[1, 3], c] = 0.2
        X[:, cell_index("summary", "rawSource")] = [0.1, 0.5, 0.2, 0.3, 0.1, 0.2]
        return FeatureStore(["b1"] * 3 + ["b2"] * 3, ["A", "B", "C"] * 2, X, [1, 0, 0, 0, 1, 0],
                            [2014] * 6, ["P"] * 6)

    def test_grid_shape_and_planted_cell(self):
        grid = dissect_pairs(self.store())
        assert len(grid) == 70
        assert grid[("summaryHints", "className")] == (1.0, 1.0)
        assert best_cell(grid) == ("summaryHints", "className")

    def test_empty_channel_gives_tie_order_baseline(self):
        grid = dissect_pairs(self.store())
        # all-zero scores keep store order: truths at ranks 1 and 2
        assert grid[("stackTraces", "hunks")] == pytest.approx(((1 + 1 / 2) / 2, (1 + 1 / 2) / 2))

    def test_subset_of_bugs(self):
        grid = dissect_pairs(self.store(), bugs=["b2"])
        assert grid[("summary", "rawSource")] == (1 / 3, 1 / 3)

    def test_best_cell_ties_follow_grid_order(self):
        grid = {("a", "x"): (0.5, 0.1), ("b", "y"): (0.5, 0.9)}
        assert best_cell(grid) == ("a", "x") and best_cell(grid, metric=1) == ("b", "y")

    def test_csv(self):
        text = grid_csv(dissect_pairs(self.store()))
        lines = text.splitlines()
        assert lines[0] == "bug_channel,code_channel,MAP,MRR" and len(lines) == 71
