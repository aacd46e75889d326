"""Timeline splits, per-region training, probability averaging and ranking."""
from __future__ import annotations

import io
import math
from datetime import datetime, timezone

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bugloc import synthetic
from bugloc.corpus import BugReport
from bugloc.dnc import (
    _chronological_holdout,
    _region_seed,
    ensemble_rank,
    leakage_violations,
    minmax_by_bug,
    rank_by_score,
    read_ranking,
    timeline_split,
    train_regions,
    write_ranking,
)
from bugloc.errors import BugLocError
from bugloc.learner import BoostedModel, TrainConfig, Tree
from bugloc.regions import Region, build_regions
from bugloc.vsm import FeatureStore

FAST = TrainConfig.quick(n_estimators_cap=15)


def dated(bug_id, when):
    return BugReport(bug_id, "P", "", "", when)


def step_model(p_low, p_high, feature=0, meta=None):
    """Predicts ``p_low`` when the feature is <= 0.5, else ``p_high``."""
    logit = lambda p: math.log(p / (1 - p))
    tree = Tree(np.array([feature, -1, -1], dtype=np.int32), np.array([0.5, 0.0, 0.0]),
                np.array([1, -1, -1], dtype=np.int32), np.array([2, -1, -1], dtype=np.int32),
                np.array([0.0, logit(p_low), logit(p_high)]), np.zeros(3))
    return BoostedModel([tree], 0.0, 1, 1.0, meta=dict(meta or {}))


def constant_model(p, meta=None):
    return BoostedModel([], math.log(p / (1 - p)), 0, 0.03, meta=dict(meta or {}))


def two_file_store():
    X = np.zeros((2, 70))
    X[1, 0] = 1.0  # file B sits on the high side of every step model
    return FeatureStore(["b1", "b1"], ["A.java", "B.java"], X, [1, 0], [2014, 2014], ["P", "P"])


def random_store(seed, bugs=4, files=6):
    rng = np.random.default_rng(seed)
    n = bugs * files
    X = rng.random((n, 70))
    X[:, 5] = np.round(X[:, 5], 1)  # ties
    bug_ids = [f"b{i // files}" for i in range(n)]
    paths = [f"F{i % files}.java" for i in range(n)]
    return FeatureStore(bug_ids, paths, X, np.zeros(n), np.full(n, 2014), ["P"] * n)


class TestTimeline:
    def test_before_cutoff_trains(self):
        split = timeline_split([dated("a", datetime(2007, 6, 1, tzinfo=timezone.utc))], 2008)
        assert split.train == {"a"} and not split.test

    def test_boundary_goes_to_test(self):
        split = timeline_split([dated("a", datetime(2008, 1, 1, tzinfo=timezone.utc)),
                                dated("b", datetime(2007, 12, 31, 23, 59, 59, tzinfo=timezone.utc))], 2008)
        assert split.test == {"a"} and split.train == {"b"}

    def test_fixture_counts(self, desk_corpus, desk_store):
        kept, _ = desk_store
        split = timeline_split(kept, desk_corpus.cutoff_year)
        manifest = desk_corpus.manifest()
        assert (len(split.train), len(split.test)) == (manifest["train"], manifest["test"])
        assert not split.train & split.test
        assert split.train | split.test == {r.id for r in kept}


class TestHoldout:
    def test_latest_fifth_validates(self):
        created = {f"b{i}": i for i in range(10)}
        fit, valid = _chronological_holdout(list(created), created, {b: True for b in created})
        assert fit == [f"b{i}" for i in range(8)] and valid == ["b8", "b9"]

    def test_no_positive_in_holdout_means_no_validation(self):
        created = {f"b{i}": i for i in range(10)}
        labels = {b: b not in ("b8", "b9") for b in created}
        fit, valid = _chronological_holdout(list(created), created, labels)
        assert valid == [] and len(fit) == 10

    def test_tiny_region(self):
        fit, valid = _chronological_holdout(["a", "b"], {"a": 1, "b": 2}, {"a": True, "b": True})
        assert (fit, valid) == (["a", "b"], [])


class TestTraining:
    def test_single_region(self, desk_corpus, desk_store):
        kept, store = desk_store
        split = timeline_split(kept, desk_corpus.cutoff_year)
        created = {r.id: r.created_at for r in kept}
        union = Region("UNION", frozenset(r.id for r in kept))
        ens = train_regions([union], store, split, FAST, created)
        assert list(ens.models) == ["UNION"] and ens.skipped == {}
        meta = ens.models["UNION"].meta
        assert set(meta["train_bugs"]) == split.train
        assert set(meta["fit_bugs"]) | set(meta["valid_bugs"]) == split.train

    def test_empty_region_is_skipped(self, desk_corpus, desk_store):
        kept, store = desk_store
        split = timeline_split(kept, desk_corpus.cutoff_year)
        created = {r.id: r.created_at for r in kept}
        regions = [Region("EMPTY", frozenset()), Region("UNION", frozenset(split.train))]
        ens = train_regions(regions, store, split, FAST, created)
        assert ens.skipped == {"EMPTY": "no training reports"} and list(ens.models) == ["UNION"]

    def test_nothing_trainable(self, desk_corpus, desk_store):
        kept, store = desk_store
        split = timeline_split(kept, desk_corpus.cutoff_year)
        with pytest.raises(BugLocError) as err:
            train_regions([Region("EMPTY", frozenset(split.test))], store, split, FAST, {})
        assert err.value.code == "empty-ensemble"

    def test_fifteen_regions(self, desk_corpus, desk_store):
        kept, store = desk_store
        split = timeline_split(kept, desk_corpus.cutoff_year)
        created = {r.id: r.created_at for r in kept}
        regions = build_regions(desk_corpus.tool_results, {r.id: r.fixed_files for r in kept}, [r.id for r in kept])
        ens = train_regions(regions, store, split, FAST, created)
        trainable = [r.name for r in regions if r.bug_ids & split.train]
        assert len(regions) == 15
        assert sorted(ens.models) == sorted(trainable)
        assert len(ens.models) + len(ens.skipped) == 15
        assert leakage_violations(ens.models, created) == []

    def test_per_project_models_and_scoping(self, desk_corpus, desk_store):
        kept, store = desk_store
        split = timeline_split(kept, desk_corpus.cutoff_year)
        created = {r.id: r.created_at for r in kept}
        union = Region("UNION", frozenset(split.train))
        ens = train_regions([union], store, split, FAST, created, per_project=True)
        assert sorted(ens.models) == [f"UNION@{p}" for p in synthetic.PROJECTS]
        for key, model in ens.models.items():
            project = key.split("@")[1]
            assert {r.project for r in kept if r.id in model.meta["train_bugs"]} == {project}
        test = store.subset(store.rows(split.test))
        ranked = ensemble_rank(ens.models, test)
        assert set(ranked) == split.test

    def test_parallel_matches_serial(self, desk_corpus, desk_store):
        kept, store = desk_store
        split = timeline_split(kept, desk_corpus.cutoff_year)
        created = {r.id: r.created_at for r in kept}
        regions = build_regions(desk_corpus.tool_results, {r.id: r.fixed_files for r in kept},
                                [r.id for r in kept])[-3:]
        serial = train_regions(regions, store, split, FAST, created)
        parallel = train_regions(regions, store, split, FAST, created, jobs=2)
        for key in serial.models:
            assert np.array_equal(serial.models[key].raw_score(store.X), parallel.models[key].raw_score(store.X))

    def test_region_seeds_are_stable_and_distinct(self):
        assert _region_seed(0, "UNION") == _region_seed(0, "UNION")
        assert _region_seed(0, "UNION") != _region_seed(0, "INTER")
        assert _region_seed(0, "UNION") != _region_seed(1, "UNION")


class TestLeakage:
    def test_detects_late_training_report(self):
        created = {"a": datetime(2013, 5, 1, tzinfo=timezone.utc), "b": datetime(2014, 1, 1, tzinfo=timezone.utc)}
        clean = constant_model(0.5, {"cutoff_year": 2014, "train_bugs": ["a"]})
        leaky = constant_model(0.5, {"cutoff_year": 2014, "train_bugs": ["a", "b"]})
        assert leakage_violations({"x": clean}, created) == []
        assert leakage_violations({"x": clean, "y": leaky}, created) == [("y", "b")]


class TestRanking:
    def test_hand_averaging(self):
        store = two_file_store()
        models = [step_model(0.9, 0.1), step_model(0.5, 0.7)]
        ranked = ensemble_rank(models, store)["b1"]
        entries = list(ranked.entries())
        assert [e[0] for e in entries] == ["A.java", "B.java"] and [e[2] for e in entries] == [1, 2]
        assert entries[0][1] == pytest.approx(0.7) and entries[1][1] == pytest.approx(0.4)

    def test_ties_keep_store_order(self):
        store = random_store(0)
        ranked = rank_by_score(store, np.zeros(len(store)))
        assert ranked["b0"].paths == [f"F{i}.java" for i in range(6)]
        assert ranked["b0"].ranks == [1, 2, 3, 4, 5, 6]

    @given(st.integers(0, 1000))
    def test_single_model_is_its_own_sort(self, seed):
        store = random_store(seed)
        m = step_model(0.2, 0.8, feature=5)
        ranked = ensemble_rank([m], store)
        for bug, rl in ranked.items():
            assert list(rl.probabilities) == sorted(rl.probabilities, reverse=True)
            assert sorted(rl.paths) == sorted(p for p, b in zip(store.paths, store.bug_ids) if b == bug)

    @given(st.integers(0, 1000), st.integers(1, 4))
    def test_identical_models_rank_like_one(self, seed, k):
        store = random_store(seed)
        m = step_model(0.3, 0.6, feature=5)
        one = ensemble_rank([m], store)
        many = ensemble_rank([m] * k, store)
        assert {b: r.paths for b, r in one.items()} == {b: r.paths for b, r in many.items()}

    @given(st.integers(0, 1000), st.floats(0.01, 0.99), st.randoms())
    def test_constant_model_and_order_invariance(self, seed, c, rnd):
        store = random_store(seed)
        models = [step_model(0.1, 0.9, feature=f) for f in (5, 6, 7)]
        base = {b: r.paths for b, r in ensemble_rank(models, store).items()}
        shuffled = models[:]
        rnd.shuffle(shuffled)
        assert {b: r.paths for b, r in ensemble_rank(shuffled, store).items()} == base
        with_const = ensemble_rank(models + [constant_model(c)], store)
        assert {b: r.paths for b, r in with_const.items()} == base

    def test_minmax_per_bug(self):
        out = minmax_by_bug(np.array([1.0, 3.0, 2.0, 5.0, 5.0]), ["a", "a", "a", "b", "b"])
        assert out.tolist() == [0.0, 1.0, 0.5, 0.0, 0.0]

    def test_ranking_csv_round_trip(self):
        store = random_store(3)
        ranked = ensemble_rank([step_model(0.2, 0.8, feature=1)], store)
        buf = io.StringIO()
        write_ranking(ranked, buf)
        text = buf.getvalue()
        assert text.splitlines()[0] == "bug_id,rank,path,probability"
        assert read_ranking(io.StringIO(text)) == {b: r.paths for b, r in ranked.items()}
