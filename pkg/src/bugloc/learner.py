"""Gradient-boosted decision trees for the buggy/non-buggy pair classifier.

Binary logistic loss with per-sample weights, leaf-wise (best-first) tree
growth over exact sorted split scans, per-tree feature sampling, and early
stopping on the RMSE of predicted probabilities over a validation set.

Regularization is expressed in units of the mean sample weight: with unit
weights ``lambda_l2=1`` is the usual L2 leaf penalty, and rescaling every
weight by a constant leaves trees and predictions unchanged.
"""
from __future__ import annotations

import hashlib
import io
import itertools
import json
import math
import struct
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import BugLocError
from .vsm import FEATURE_NAMES


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.03
    n_estimators_cap: int = 10000
    num_leaves: int = 31
    feature_fraction: float = 0.08
    early_stopping_rounds: int = 10
    lambda_l2: float = 1.0
    min_data_in_leaf: int = 20
    min_sum_hessian: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must be in (0, 1]")
        if self.num_leaves < 2:
            raise ValueError("num_leaves must be >= 2")
        if not 0 < self.feature_fraction <= 1:
            raise ValueError("feature_fraction must be in (0, 1]")
        if self.n_estimators_cap < 0 or self.early_stopping_rounds < 1:
            raise ValueError("n_estimators_cap must be >= 0 and early_stopping_rounds >= 1")

    @classmethod
    def quick(cls, **overrides) -> "TrainConfig":
        """Grid-search winner with a 100-tree cap."""
        return cls(**{"n_estimators_cap": 100, **overrides})

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class WeightedDataset:
    X: np.ndarray
    y: np.ndarray
    w: np.ndarray | None = None
    groups: Sequence | None = None

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=np.float64)
        if self.X.ndim != 2:
            self.X = self.X.reshape(len(self.X), -1)
        self.y = np.asarray(self.y, dtype=np.float64)
        self.w = np.ones(len(self.y)) if self.w is None else np.asarray(self.w, dtype=np.float64)
        if not (len(self.X) == len(self.y) == len(self.w)):
            raise ValueError("X, y and w differ in length")
        if len(self.w) and (not np.all(np.isfinite(self.w)) or np.any(self.w <= 0)):
            raise ValueError("sample weights must be finite and > 0")

    def __len__(self):
        return len(self.y)

    @classmethod
    def empty(cls, n_features: int = len(FEATURE_NAMES)) -> "WeightedDataset":
        return cls(np.zeros((0, n_features)), np.zeros(0))


def class_weights(labels, groups=None) -> np.ndarray:
    """``label * (negatives / positives) + 1``, with the ratio taken per group."""
    labels = np.asarray(labels)
    groups = np.zeros(len(labels), dtype=int) if groups is None else np.asarray(groups)
    weights = np.ones(len(labels), dtype=np.float64)
    for g in dict.fromkeys(groups.tolist()):
        mask = groups == g
        pos = int(np.sum(labels[mask] == 1))
        neg = int(np.sum(labels[mask] == 0))
        if pos == 0:
            raise BugLocError("no-positive-samples", f"group {g!r} has no positive label")
        weights[mask] = labels[mask] * (neg / pos) + 1
    return weights


# -- trees ------------------------------------------------------------------

@dataclass
class Tree:
    """Array-backed binary tree; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] >= 0
        while np.any(active):
            rows = np.nonzero(active)[0]
            cur = node[rows]
            go_left = X[rows, self.feature[cur]] <= self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])
            active = self.feature[node] >= 0
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


def _best_split(X, g, h, feats, orders, cfg, lam, min_hess):
    """Best (gain, feature, threshold, position) for one leaf, or None.

    ``orders[j]`` holds the leaf's row indices sorted by feature ``feats[j]``
    (ties in row order). All candidate features are scanned at once; a
    row-major argmax gives ties to the earlier feature, then the lower
    threshold.
    """
    n = orders.shape[1]
    if n < 2 * cfg.min_data_in_leaf:
        return None
    first = orders[0]
    G = float(np.sum(g[first]))
    H = float(np.sum(h[first]))
    parent = G * G / (H + lam)
    lo = max(cfg.min_data_in_leaf, 1)
    i = np.arange(lo - 1, n - lo)
    if len(i) == 0:
        return None
    sv = X[orders, feats[:, None]]
    ok = sv[:, i] < sv[:, i + 1]
    if not ok.any():
        return None
    cg = np.cumsum(g[orders], axis=1)[:, i]
    ch = np.cumsum(h[orders], axis=1)[:, i]
    GR, HR = G - cg, H - ch
    ok &= (ch >= min_hess) & (HR >= min_hess)
    if lam > 0:
        gains = np.where(ok, 0.5 * (cg * cg / (ch + lam) + GR * GR / (HR + lam) - parent), -np.inf)
    else:
        with np.errstate(invalid="ignore", divide="ignore"):
            gains = np.where(ok, 0.5 * (cg * cg / (ch + lam) + GR * GR / (HR + lam) - parent), -np.inf)
    flat = int(np.argmax(gains))
    j, k = divmod(flat, gains.shape[1])
    if not gains[j, k] > 0:
        return None
    pos = int(i[k])
    a, b = sv[j, pos], sv[j, pos + 1]
    thr = a + (b - a) / 2.0
    if not a <= thr < b:
        thr = a
    return float(gains[j, k]), j, float(thr), pos


def grow_tree(X, g, h, features, cfg: TrainConfig, lam: float, min_hess: float,
              presorted: Mapping[int, np.ndarray] | None = None) -> Tree:
    """Leaf-wise growth: always split the leaf with the largest gain.

    Ties between leaves go to the lower node id, ties between splits to the
    earlier feature and then the lower threshold.
    """
    feats = np.asarray(features, dtype=np.int64)
    if presorted is None:
        presorted = {int(f): np.argsort(X[:, f], kind="stable") for f in feats}
    feature, threshold, left, right, value, gain = [-1], [0.0], [-1], [-1], [0.0], [0.0]
    leaf_rows = {0: np.stack([presorted[int(f)] for f in feats])}
    candidates = {0: _best_split(X, g, h, feats, leaf_rows[0], cfg, lam, min_hess)}
    goes_left = np.zeros(len(g), dtype=bool)
    n_leaves = 1
    while n_leaves < cfg.num_leaves:
        node, split = None, None
        for leaf in sorted(candidates):
            cand = candidates[leaf]
            if cand is not None and (split is None or cand[0] > split[0]):
                node, split = leaf, cand
        if split is None:
            break
        del candidates[node]
        gval, j, thr, pos = split
        feature[node], threshold[node], gain[node] = int(feats[j]), thr, gval
        orders = leaf_rows.pop(node)
        goes_left[:] = False
        goes_left[orders[j, : pos + 1]] = True
        mask = goes_left[orders]
        n_left = pos + 1
        ids = []
        for side, count in ((mask, n_left), (~mask, orders.shape[1] - n_left)):
            cid = len(feature)
            ids.append(cid)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            gain.append(0.0)
            leaf_rows[cid] = orders[side].reshape(len(feats), count)
            candidates[cid] = _best_split(X, g, h, feats, leaf_rows[cid], cfg, lam, min_hess)
        left[node], right[node] = ids
        n_leaves += 1
    for leaf, orders in leaf_rows.items():
        r = orders[0]
        value[leaf] = -float(np.sum(g[r])) / (float(np.sum(h[r])) + lam)
    return Tree(
        np.array(feature, dtype=np.int32),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int32),
        np.array(right, dtype=np.int32),
        np.array(value, dtype=np.float64),
        np.array(gain, dtype=np.float64),
    )


# -- model ------------------------------------------------------------------

def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def rmse(p, y) -> float:
    return float(np.sqrt(np.mean((np.asarray(p) - np.asarray(y)) ** 2)))


@dataclass
class BoostedModel:
    trees: list
    base_score: float
    best_iteration: int
    learning_rate: float
    feature_names: tuple = FEATURE_NAMES
    config: TrainConfig = field(default_factory=TrainConfig)
    degenerate: bool = False
    eval_history: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def raw_score(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.full(len(X), self.base_score)
        for tree in self.trees[: self.best_iteration]:
            out += self.learning_rate * tree.predict(X)
        return out


def predict(model: BoostedModel, rows, feature_names: Sequence[str] | None = None) -> np.ndarray:
    """Probabilities of the positive class using trees up to ``best_iteration``."""
    X = np.asarray(rows, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if feature_names is not None and tuple(feature_names) != tuple(model.feature_names):
        raise BugLocError("feature-grid-mismatch", "rows use a different feature grid than the model")
    if X.shape[1] != len(model.feature_names):
        raise BugLocError("feature-grid-mismatch",
                          f"model expects {len(model.feature_names)} features, got {X.shape[1]}")
    return sigmoid(model.raw_score(X))


def train(data: WeightedDataset, valid: WeightedDataset | None, cfg: TrainConfig,
          feature_names: Sequence[str] | None = None) -> BoostedModel:
    """Boost until the cap, or until validation RMSE stalls for ``early_stopping_rounds``."""
    X, y, w = data.X, data.y, data.w
    n_features = X.shape[1]
    feature_names = tuple(feature_names) if feature_names is not None else (
        FEATURE_NAMES if n_features == len(FEATURE_NAMES) else tuple(f"f{i}" for i in range(n_features)))
    if len(y) == 0 or not (np.any(y == 1) and np.any(y == 0)):
        raise BugLocError("degenerate-data", "training data needs both labels")

    scale = float(np.mean(w))
    lam = cfg.lambda_l2 * scale
    min_hess = cfg.min_sum_hessian * scale
    p0 = float(np.sum(w * y) / np.sum(w))
    base = math.log(p0 / (1.0 - p0))
    k = max(1, math.ceil(round(cfg.feature_fraction * n_features, 9)))
    rng = np.random.default_rng(cfg.seed)

    F = np.full(len(y), base)
    has_valid = valid is not None and len(valid) > 0
    if has_valid:
        Fv = np.full(len(valid), base)
        history = [rmse(sigmoid(Fv), valid.y)]
    else:
        history = []
    best_iter, best_score = 0, (history[0] if history else math.inf)

    presorted = {}
    trees = []
    for it in range(cfg.n_estimators_cap):
        p = sigmoid(F)
        g = w * (p - y)
        h = w * p * (1.0 - p)
        if k < n_features:
            features = np.sort(rng.choice(n_features, size=k, replace=False))
        else:
            features = np.arange(n_features)
        for f in features:
            if int(f) not in presorted:
                presorted[int(f)] = np.argsort(X[:, f], kind="stable")
        tree = grow_tree(X, g, h, features, cfg, lam, min_hess, presorted)
        trees.append(tree)
        F += cfg.learning_rate * tree.predict(X)
        if has_valid:
            Fv += cfg.learning_rate * tree.predict(valid.X)
            score = rmse(sigmoid(Fv), valid.y)
            history.append(score)
            if score < best_score:
                best_score, best_iter = score, it + 1
            elif it + 1 - best_iter >= cfg.early_stopping_rounds:
                break
    if not has_valid:
        best_iter = len(trees)
    degenerate = not any(t.n_leaves > 1 for t in trees)
    return BoostedModel(
        trees=trees,
        base_score=base,
        best_iteration=best_iter,
        learning_rate=cfg.learning_rate,
        feature_names=feature_names,
        config=cfg,
        degenerate=degenerate,
        eval_history=history,
    )


def feature_importance(model: BoostedModel):
    """``(name, gain, normalized, cumulative)`` rows, most important first."""
    totals = np.zeros(len(model.feature_names))
    for tree in model.trees[: model.best_iteration]:
        internal = tree.feature >= 0
        np.add.at(totals, tree.feature[internal], tree.gain[internal])
    grand = float(totals.sum())
    if grand <= 0:
        return []
    order = sorted((i for i in range(len(totals)) if totals[i] > 0), key=lambda i: (-totals[i], i))
    rows, running = [], 0.0
    for i in order:
        share = float(totals[i]) / grand
        running += share
        rows.append((model.feature_names[i], float(totals[i]), share, running))
    return rows


def grid_search(param_grid: Mapping[str, Sequence], data: WeightedDataset, valid: WeightedDataset,
                base: TrainConfig | None = None) -> TrainConfig:
    """Config with the lowest best validation RMSE; ties go to fewer leaves, then lower rate."""
    base = base or TrainConfig.quick()
    if not param_grid or any(len(v) == 0 for v in param_grid.values()):
        raise BugLocError("empty-grid", "parameter grid has no combinations")
    if valid is None or len(valid) == 0:
        raise BugLocError("input", "grid search needs a validation set")
    names = sorted(param_grid)
    best_key, best_cfg = None, None
    for combo in itertools.product(*(param_grid[n] for n in names)):
        cfg = replace(base, **dict(zip(names, combo)))
        model = train(data, valid, cfg)
        score = min(model.eval_history)
        key = (score, cfg.num_leaves, cfg.learning_rate)
        if best_key is None or key < best_key:
            best_key, best_cfg = key, cfg
    return best_cfg


# -- persistence ------------------------------------------------------------

MAGIC = b"BLGB"
VERSION = 1


def _blob(obj) -> bytes:
    raw = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def dumps_model(model: BoostedModel) -> bytes:
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<H", VERSION))
    out.write(_blob(asdict(model.config)))
    out.write(_blob(list(model.feature_names)))
    out.write(_blob(model.meta))
    out.write(struct.pack("<ddIB", model.base_score, model.learning_rate, model.best_iteration,
                          int(model.degenerate)))
    out.write(struct.pack("<I", len(model.eval_history)))
    out.write(np.asarray(model.eval_history, dtype="<f8").tobytes())
    out.write(struct.pack("<I", len(model.trees)))
    for t in model.trees:
        out.write(struct.pack("<I", len(t.feature)))
        out.write(t.feature.astype("<i4").tobytes())
        out.write(t.threshold.astype("<f8").tobytes())
        out.write(t.left.astype("<i4").tobytes())
        out.write(t.right.astype("<i4").tobytes())
        out.write(t.value.astype("<f8").tobytes())
        out.write(t.gain.astype("<f8").tobytes())
    return out.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.buf = memoryview(data)
        self.pos = 0

    def unpack(self, fmt):
        vals = struct.unpack_from(fmt, self.buf, self.pos)
        self.pos += struct.calcsize(fmt)
        return vals

    def blob(self):
        (n,) = self.unpack("<I")
        raw = bytes(self.buf[self.pos:self.pos + n])
        self.pos += n
        return json.loads(raw)

    def array(self, dtype, count):
        arr = np.frombuffer(self.buf, dtype=dtype, count=count, offset=self.pos).copy()
        self.pos += arr.nbytes
        return arr


def loads_model(data: bytes) -> BoostedModel:
    r = _Reader(data)
    if bytes(r.buf[:4]) != MAGIC:
        raise BugLocError("bad-model", "not a model file (bad magic)")
    r.pos = 4
    (version,) = r.unpack("<H")
    if version != VERSION:
        raise BugLocError("bad-model", f"unsupported model version {version}")
    cfg = TrainConfig(**r.blob())
    names = tuple(r.blob())
    meta = r.blob()
    base, lr, best, degenerate = r.unpack("<ddIB")
    (n_hist,) = r.unpack("<I")
    history = r.array("<f8", n_hist).tolist()
    (n_trees,) = r.unpack("<I")
    trees = []
    for _ in range(n_trees):
        (m,) = r.unpack("<I")
        trees.append(Tree(
            r.array("<i4", m).astype(np.int32),
            r.array("<f8", m),
            r.array("<i4", m).astype(np.int32),
            r.array("<i4", m).astype(np.int32),
            r.array("<f8", m),
            r.array("<f8", m),
        ))
    return BoostedModel(trees, base, best, lr, names, cfg, bool(degenerate), history, meta)


def save_model(model: BoostedModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps_model(model))


def load_model(path) -> BoostedModel:
    with open(path, "rb") as fh:
        return loads_model(fh.read())


def dump_text(model: BoostedModel) -> str:
    """Human-readable listing of every tree."""
    lines = [
        f"base_score={model.base_score!r} learning_rate={model.learning_rate!r} "
        f"best_iteration={model.best_iteration} trees={len(model.trees)} degenerate={model.degenerate}",
    ]
    for k, t in enumerate(model.trees):
        lines.append(f"tree {k}{'' if k < model.best_iteration else ' (unused)'}")

        def walk(node, depth):
            pad = "  " * (depth + 1)
            if t.feature[node] < 0:
                lines.append(f"{pad}leaf {node}: value={t.value[node]!r}")
                return
            name = model.feature_names[t.feature[node]]
            lines.append(f"{pad}node {node}: {name} <= {t.threshold[node]!r} (gain={t.gain[node]!r})")
            walk(int(t.left[node]), depth + 1)
            walk(int(t.right[node]), depth + 1)

        walk(0, 0)
    return "\n".join(lines) + "\n"
