"""Divide and conquer: one classifier per region, averaged into a ranking."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import format_timestamp
from .errors import BugLocError
from .learner import BoostedModel, TrainConfig, WeightedDataset, class_weights, predict, train
from .vsm import FeatureStore

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TimelineSplit:
    cutoff_year: int
    train: frozenset
    test: frozenset


def cutoff_instant(year: int) -> datetime:
    return datetime(year, 1, 1, tzinfo=timezone.utc)


def timeline_split(bugs, cutoff_year: int) -> TimelineSplit:
    """Reports created before Jan 1 of ``cutoff_year`` train; the rest test."""
    cut = cutoff_instant(cutoff_year)
    train_ids, test_ids = set(), set()
    for bug in bugs:
        (train_ids if bug.created_at < cut else test_ids).add(bug.id)
    return TimelineSplit(cutoff_year, frozenset(train_ids), frozenset(test_ids))


@dataclass
class RankedList:
    bug_id: str
    paths: list
    probabilities: np.ndarray

    @property
    def ranks(self) -> list:
        return list(range(1, len(self.paths) + 1))

    def entries(self):
        for rank, (path, prob) in enumerate(zip(self.paths, self.probabilities), start=1):
            yield path, float(prob), rank


@dataclass
class Ensemble:
    models: dict
    skipped: dict = field(default_factory=dict)


def _chronological_holdout(bug_ids, created, labels_by_bug, fraction=0.2):
    """Split training reports into (fit, valid) by creation time.

    The latest ``fraction`` of reports validate. Returns ``(ids, [])`` when a
    holdout would leave either side without a fixed file.
    """
    ordered = sorted(bug_ids, key=lambda b: (created[b], b))
    n_valid = int(round(len(ordered) * fraction))
    if n_valid < 1 or len(ordered) - n_valid < 1:
        return ordered, []
    fit, valid = ordered[:-n_valid], ordered[-n_valid:]
    if not any(labels_by_bug[b] for b in fit) or not any(labels_by_bug[b] for b in valid):
        return ordered, []
    return fit, valid


def region_training_data(store: FeatureStore, bug_ids):
    """Rows, labels and class weights (ratio taken per project) for the given reports."""
    idx = store.rows(bug_ids)
    y = store.y[idx].astype(np.float64)
    groups = [store.projects[i] for i in idx]
    w = class_weights(y, groups)
    return WeightedDataset(store.X[idx], y, w, groups)


def _train_one(name, store, fit_ids, valid_ids, cfg):
    data = region_training_data(store, fit_ids)
    valid = None
    if valid_ids:
        vidx = store.rows(valid_ids)
        valid = WeightedDataset(store.X[vidx], store.y[vidx])
    return name, train(data, valid, cfg)


def train_regions(regions, store: FeatureStore, split: TimelineSplit, cfg: TrainConfig,
                  created: Mapping[str, datetime], selection: Sequence[str] | None = None,
                  jobs: int = 1, holdout: float = 0.2, per_project: bool = False) -> Ensemble:
    """Train one model per trainable region on its pre-cutoff reports.

    ``created`` maps bug ids to creation instants (used for the chronological
    early-stopping holdout and the leakage manifest). Regions are skipped,
    with the reason recorded, when they have no training reports or when
    some project among their training rows has no fixed file. With
    ``per_project`` each region yields one model per project, keyed
    ``region@project``.
    """
    present = set(store.bug_ids)
    labels_by_bug, project_of = {}, {}
    for b, label, proj in zip(store.bug_ids, store.y, store.projects):
        labels_by_bug[b] = labels_by_bug.get(b, False) or bool(label)
        project_of[b] = proj

    units = []
    for region in regions:
        if selection is not None and region.name not in selection:
            continue
        ids = sorted(b for b in region.bug_ids if b in split.train and b in present)
        if per_project:
            for proj in sorted({project_of[b] for b in ids}):
                units.append((f"{region.name}@{proj}", region.name, proj, [b for b in ids if project_of[b] == proj]))
            if not ids:
                units.append((region.name, region.name, None, []))
        else:
            units.append((region.name, region.name, None, ids))

    specs, skipped = [], {}
    for key, region_name, proj, ids in units:
        if not ids:
            skipped[key] = "no training reports"
            continue
        positives = {}
        for b in ids:
            positives[project_of[b]] = positives.get(project_of[b], False) or labels_by_bug[b]
        if not all(positives.values()):
            skipped[key] = "no-positive-samples in some project"
            continue
        fit, valid = _chronological_holdout(ids, created, labels_by_bug, holdout)
        specs.append((key, region_name, proj, fit, valid, replace(cfg, seed=_region_seed(cfg.seed, key)), ids))

    if not specs:
        raise BugLocError("empty-ensemble", "no region has trainable data")

    if jobs > 1 and len(specs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_train_one, s[0], store, s[3], s[4], s[5]) for s in specs]
            trained = dict(f.result() for f in futures)
    else:
        trained = dict(_train_one(s[0], store, s[3], s[4], s[5]) for s in specs)

    models = {}
    for key, region_name, proj, fit, valid, c, ids in specs:
        model = trained[key]
        model.meta = {
            "region": region_name,
            "project": proj,
            "cutoff_year": split.cutoff_year,
            "seed": c.seed,
            "train_bugs": list(ids),
            "fit_bugs": list(fit),
            "valid_bugs": list(valid),
            "max_created_at": format_timestamp(max(created[b] for b in ids)),
        }
        models[key] = model
    for key, reason in skipped.items():
        log.info("skipped region %s: %s", key, reason)
    return Ensemble(models, skipped)


def leakage_violations(models: Mapping[str, BoostedModel], created: Mapping[str, datetime]) -> list:
    """``(model key, bug id)`` for every training report created at or after its cutoff."""
    bad = []
    for key in sorted(models):
        meta = models[key].meta
        cut = cutoff_instant(int(meta["cutoff_year"]))
        for b in meta.get("train_bugs", ()):
            if created[b] >= cut:
                bad.append((key, b))
    return bad


def _region_seed(seed: int, name: str) -> int:
    # stable across runs and processes (unlike hash())
    h = 0
    for ch in name.encode("utf-8"):
        h = (h * 131 + ch) % (2**31 - 1)
    return (seed * 1_000_003 + h) % (2**63 - 1)


def minmax_by_bug(scores: np.ndarray, bug_ids: Sequence[str]) -> np.ndarray:
    out = np.array(scores, dtype=np.float64)
    groups = {}
    for i, b in enumerate(bug_ids):
        groups.setdefault(b, []).append(i)
    for idx in groups.values():
        vals = out[idx]
        lo, hi = vals.min(), vals.max()
        out[idx] = (vals - lo) / (hi - lo) if hi > lo else 0.0
    return out


def average_scores(models: Iterable[BoostedModel], store: FeatureStore, normalize: bool = False) -> np.ndarray:
    """Arithmetic mean of each model's probabilities over the store's rows."""
    models = list(models)
    if not models:
        raise BugLocError("empty-ensemble", "no models to average")
    total = np.zeros(len(store))
    for model in models:
        p = predict(model, store.X)
        if normalize:
            p = minmax_by_bug(p, store.bug_ids)
        total += p
    return total / len(models)


def rank_by_score(store: FeatureStore, scores: np.ndarray) -> dict[str, RankedList]:
    """Per report, files by descending score; ties keep store order; ranks 1, 2, 3, ..."""
    groups: dict[str, list] = {}
    for i, b in enumerate(store.bug_ids):
        groups.setdefault(b, []).append(i)
    ranked = {}
    for bug, idx in groups.items():
        idx = np.asarray(idx)
        order = np.argsort(-scores[idx], kind="stable")
        chosen = idx[order]
        ranked[bug] = RankedList(bug, [store.paths[i] for i in chosen], scores[chosen])
    return ranked


def ensemble_rank(models, store: FeatureStore, normalize: bool = False) -> dict[str, RankedList]:
    """Rank every report's candidates by the mean probability of the models.

    Models carrying a ``project`` in their meta only score that project's
    rows (per-project mode); the mean is taken over the models present.
    """
    if isinstance(models, Mapping):
        models = [models[k] for k in sorted(models)]
    models = list(models)
    scoped = [m for m in models if m.meta.get("project")]
    if not scoped:
        return rank_by_score(store, average_scores(models, store, normalize))
    scores = np.zeros(len(store))
    for proj in dict.fromkeys(store.projects):
        idx = np.array([i for i, p in enumerate(store.projects) if p == proj], dtype=np.int64)
        own = [m for m in models if m.meta.get("project") in (None, proj)]
        if not own:
            raise BugLocError("empty-ensemble", f"no model covers project {proj}")
        scores[idx] = average_scores(own, store.subset(idx), normalize)
    return rank_by_score(store, scores)


def write_ranking(ranked: Mapping[str, RankedList], fh) -> None:
    """CSV ``bug_id,rank,path,probability``; probabilities written with ``repr``."""
    fh.write("bug_id,rank,path,probability\n")
    for bug in ranked:
        for path, prob, rank in ranked[bug].entries():
            fh.write(f"{bug},{rank},{path},{prob!r}\n")


def read_ranking(fh) -> dict[str, list]:
    """``{bug_id: [path, ...]}`` in rank order."""
    import csv

    rows = {}
    reader = csv.reader(fh)
    header = next(reader, None)
    if header != ["bug_id", "rank", "path", "probability"]:
        raise BugLocError("input", "ranking CSV header mismatch")
    for row in reader:
        if not row:
            continue
        if len(row) != 4:
            raise BugLocError("input", f"ranking CSV line {reader.line_num}: expected 4 columns")
        bug, rank, path, _ = row
        rows.setdefault(bug, []).append((int(rank), path))
    return {b: [p for _, p in sorted(v)] for b, v in rows.items()}
