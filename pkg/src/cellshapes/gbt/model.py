"""Gradient-boosted decision trees for the 5-class shape problem.

Second-order (Newton) boosting on the softmax log-loss: per round and per
class, a regression tree is grown on gradients g = p - 1[y=c] and hessians
h = p (1 - p) by exact greedy split search (no histograms). Leaf weights are
the raw -G / (H + lambda); the learning rate scales them at accumulation
time. Growth bookkeeping lives here and is backend-independent; only the
per-level split scan runs in the selected kernel (compiled or numpy).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np

from ..contour_io import FeatureMatrix
from ..descriptors import FeatureVector
from ..errors import (
    DimensionMismatch,
    InvalidConfig,
    LabelOutOfRange,
    NonFiniteFeature,
    SchemaError,
)
from ._backend import scan_level, BACKEND_NAME

N_CLASSES = 5
MODEL_VERSION = "cellshapes-gbt-1"


@dataclass
class HyperParams:
    n_rounds: int = 100
    learning_rate: float = 0.3
    max_depth: int = 6
    min_child_weight: float = 1.0
    reg_lambda: float = 1.0
    gamma: float = 0.0
    subsample: float = 1.0
    colsample: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        if self.n_rounds < 0:
            raise InvalidConfig("n_rounds must be >= 0")
        if not 0.0 < self.learning_rate <= 1.0:
            raise InvalidConfig("learning_rate must be in (0, 1]")
        if self.max_depth < 0:
            raise InvalidConfig("max_depth must be >= 0")
        if not 0.0 < self.subsample <= 1.0 or not 0.0 < self.colsample <= 1.0:
            raise InvalidConfig("subsample/colsample must be in (0, 1]")
        if self.reg_lambda < 0 or self.gamma < 0 or self.min_child_weight < 0:
            raise InvalidConfig("reg_lambda, gamma, min_child_weight must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "HyperParams":
        return cls(**doc)


@dataclass
class Tree:
    """Flat array representation; node 0 is the root.

    feature[i] == -1 marks a leaf (weight[i] set); internal nodes carry
    threshold, gain, and child indices. Rows with value < threshold go left.
    """
    feature: np.ndarray    # (m,) int32
    threshold: np.ndarray  # (m,) float64
    gain: np.ndarray       # (m,) float64
    left: np.ndarray       # (m,) int32
    right: np.ndarray      # (m,) int32
    weight: np.ndarray     # (m,) float64

    def predict(self, X: np.ndarray) -> np.ndarray:
        idx = np.zeros(len(X), dtype=np.int64)
        while True:
            feat = self.feature[idx]
            internal = feat >= 0
            if not internal.any():
                break
            rows = np.nonzero(internal)[0]
            go_left = X[rows, feat[rows]] < self.threshold[idx[rows]]
            idx[rows] = np.where(go_left, self.left[idx[rows]],
                                 self.right[idx[rows]])
        return self.weight[idx]

    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))


@dataclass
class GbtModel:
    trees: list[tuple[int, Tree]]  # (class_index, tree), grouped in rounds
    hyperparams: HyperParams
    feature_names: list[str]
    n_classes: int = N_CLASSES
    training_loss: list[float] = field(default_factory=list)

    @property
    def n_rounds_trained(self) -> int:
        return len(self.trees) // self.n_classes


class _TreeBuilder:
    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.gain: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.weight: list[float] = []

    def add_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.gain.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.weight.append(0.0)
        return len(self.feature) - 1

    def set_split(self, node, feat, thr, gain, left, right):
        self.feature[node] = int(feat)
        self.threshold[node] = float(thr)
        self.gain[node] = float(gain)
        self.left[node] = left
        self.right[node] = right

    def set_leaf(self, node, weight):
        self.weight[node] = float(weight)

    def build(self) -> Tree:
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            gain=np.asarray(self.gain, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            weight=np.asarray(self.weight, dtype=np.float64),
        )


def _leaf_weight(g_sum: float, h_sum: float, reg_lambda: float) -> float:
    denom = h_sum + reg_lambda
    if denom <= 0:
        return 0.0
    return -g_sum / denom


def _grow_tree(X, sorted_idx, g, h, row_active, col_subset, hp) -> Tree:
    n = len(X)
    builder = _TreeBuilder()
    root = builder.add_node()
    node_slot = np.where(row_active, 0, -1).astype(np.int32)
    slot_node = [root]

    for depth in range(hp.max_depth + 1):
        n_slots = len(slot_node)
        mask = node_slot >= 0
        in_slot = node_slot[mask]
        G = np.bincount(in_slot, weights=g[mask], minlength=n_slots)
        H = np.bincount(in_slot, weights=h[mask], minlength=n_slots)
        count = np.bincount(in_slot, minlength=n_slots)

        can_split = np.zeros(n_slots, dtype=bool)
        if depth < hp.max_depth:
            can_split = (count >= 2) & (H >= 2.0 * hp.min_child_weight)

        best_gain = np.zeros(n_slots)
        best_feat = np.full(n_slots, -1, dtype=np.int32)
        best_thr = np.zeros(n_slots)
        if can_split.any():
            scan_slot = node_slot.copy()
            blocked = mask & ~can_split[np.maximum(node_slot, 0)]
            scan_slot[blocked] = -1
            best_gain, best_feat, best_thr = scan_level(
                X, sorted_idx, scan_slot, g, h, G, H, n_slots,
                hp.reg_lambda, hp.gamma, hp.min_child_weight, col_subset)

        split = can_split & (best_feat >= 0) & (best_gain > 0.0)
        if not split.any():
            for s in range(n_slots):
                builder.set_leaf(slot_node[s],
                                 _leaf_weight(G[s], H[s], hp.reg_lambda))
            return builder.build()

        new_slot_node: list[int] = []
        child_base = np.full(n_slots, -1, dtype=np.int32)
        for s in range(n_slots):
            if split[s]:
                left = builder.add_node()
                right = builder.add_node()
                builder.set_split(slot_node[s], best_feat[s], best_thr[s],
                                  best_gain[s], left, right)
                child_base[s] = len(new_slot_node)
                new_slot_node += [left, right]
            else:
                builder.set_leaf(slot_node[s],
                                 _leaf_weight(G[s], H[s], hp.reg_lambda))

        rows = np.nonzero(mask & split[np.maximum(node_slot, 0)])[0]
        s_of = node_slot[rows]
        go_left = X[rows, best_feat[s_of]] < best_thr[s_of]
        next_slot = np.full(n, -1, dtype=np.int32)
        next_slot[rows] = child_base[s_of] + np.where(go_left, 0, 1)
        node_slot = next_slot
        slot_node = new_slot_node
    return builder.build()


def _softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _logloss(proba: np.ndarray, y: np.ndarray) -> float:
    p = np.maximum(proba[np.arange(len(y)), y], 1e-300)
    return float(np.mean(-np.log(p)))


def _validate_matrix(fm: FeatureMatrix) -> tuple[np.ndarray, np.ndarray]:
    X = np.ascontiguousarray(fm.values, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise NonFiniteFeature("training matrix contains non-finite values")
    y = fm.label_array()
    if y.min() < 0 or y.max() >= N_CLASSES:
        raise LabelOutOfRange(
            f"labels must lie in [0, {N_CLASSES - 1}], found "
            f"[{y.min()}, {y.max()}]")
    return X, y


def train(fm: FeatureMatrix, hp: HyperParams) -> GbtModel:
    """Train the boosted ensemble; deterministic given (data, hyperparams)."""
    hp.validate()
    X, y = _validate_matrix(fm)
    n, p = X.shape
    sorted_idx = np.ascontiguousarray(
        np.argsort(X, axis=0, kind="stable").T.astype(np.int32))
    rng = np.random.default_rng(hp.seed)

    scores = np.zeros((n, N_CLASSES))  # base score 0: uniform prior
    trees: list[tuple[int, Tree]] = []
    loss_history: list[float] = []
    onehot = np.eye(N_CLASSES)[y]

    for _ in range(hp.n_rounds):
        proba = _softmax(scores)
        loss_history.append(_logloss(proba, y))

        row_active = np.ones(n, dtype=bool)
        if hp.subsample < 1.0:
            k = max(1, int(round(hp.subsample * n)))
            row_active = np.zeros(n, dtype=bool)
            row_active[np.sort(rng.choice(n, size=k, replace=False))] = True
        col_subset = np.arange(p, dtype=np.int32)
        if hp.colsample < 1.0:
            kc = max(1, int(round(hp.colsample * p)))
            col_subset = np.sort(rng.choice(p, size=kc,
                                            replace=False)).astype(np.int32)

        grad = proba - onehot
        hess = proba * (1.0 - proba)
        for c in range(N_CLASSES):
            tree = _grow_tree(X, sorted_idx,
                              np.ascontiguousarray(grad[:, c]),
                              np.ascontiguousarray(hess[:, c]),
                              row_active, col_subset, hp)
            scores[:, c] += hp.learning_rate * tree.predict(X)
            trees.append((c, tree))
    loss_history.append(_logloss(_softmax(scores), y))

    return GbtModel(trees=trees, hyperparams=hp,
                    feature_names=list(fm.names),
                    training_loss=loss_history)


def margin_scores(model: GbtModel, X: np.ndarray) -> np.ndarray:
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=np.float64)
    if X.shape[1] != len(model.feature_names):
        raise DimensionMismatch(
            f"expected {len(model.feature_names)} features, got {X.shape[1]}")
    scores = np.zeros((len(X), model.n_classes))
    lr = model.hyperparams.learning_rate
    for c, tree in model.trees:
        scores[:, c] += lr * tree.predict(X)
    return scores


def predict_proba(model: GbtModel, X: np.ndarray) -> np.ndarray:
    """Class probabilities; rows sum to 1 (uniform 1/n_classes for an empty
    model)."""
    return _softmax(margin_scores(model, X))


def predict(model: GbtModel, X: np.ndarray) -> np.ndarray:
    """Argmax class per row; ties break toward the lower class index."""
    return np.argmax(predict_proba(model, X), axis=1)


def feature_importance(model: GbtModel) -> FeatureVector:
    """Total split gain per feature, normalized to sum to 1."""
    totals = np.zeros(len(model.feature_names))
    for _, tree in model.trees:
        internal = tree.feature >= 0
        np.add.at(totals, tree.feature[internal], tree.gain[internal])
    s = totals.sum()
    if s > 0:
        totals = totals / s
    return FeatureVector(names=list(model.feature_names), values=totals)


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------

def _tree_to_nested(tree: Tree, node: int = 0) -> dict:
    if tree.feature[node] < 0:
        return {"weight": float(tree.weight[node])}
    return {
        "feature": int(tree.feature[node]),
        "threshold": float(tree.threshold[node]),
        "gain": float(tree.gain[node]),
        "left": _tree_to_nested(tree, int(tree.left[node])),
        "right": _tree_to_nested(tree, int(tree.right[node])),
    }


def _tree_from_nested(doc: dict) -> Tree:
    builder = _TreeBuilder()

    def walk(d: dict) -> int:
        node = builder.add_node()
        if "weight" in d:
            builder.set_leaf(node, float(d["weight"]))
            return node
        try:
            feat = int(d["feature"])
            thr = float(d["threshold"])
            gain = float(d["gain"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad tree node: {exc}") from exc
        left = walk(d["left"])
        right = walk(d["right"])
        builder.set_split(node, feat, thr, gain, left, right)
        return node

    walk(doc)
    return builder.build()


def to_dict(model: GbtModel) -> dict:
    return {
        "version": MODEL_VERSION,
        "n_classes": model.n_classes,
        "feature_names": model.feature_names,
        "hyperparams": model.hyperparams.to_dict(),
        "trees": [{"class": c, "nodes": _tree_to_nested(t)}
                  for c, t in model.trees],
    }


def from_dict(doc: dict) -> GbtModel:
    if not isinstance(doc, dict) or doc.get("version") != MODEL_VERSION:
        raise SchemaError(
            f"model version {doc.get('version')!r} != {MODEL_VERSION!r}")
    try:
        hp = HyperParams.from_dict(doc["hyperparams"])
        names = list(doc["feature_names"])
        n_classes = int(doc["n_classes"])
        trees = [(int(t["class"]), _tree_from_nested(t["nodes"]))
                 for t in doc["trees"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad model document: {exc}") from exc
    return GbtModel(trees=trees, hyperparams=hp, feature_names=names,
                    n_classes=n_classes)


def save(model: GbtModel, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        json.dump(to_dict(model), fh)


def load(path) -> GbtModel:
    with open(path, "r", encoding="ascii") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"not valid JSON: {exc}") from exc
    return from_dict(doc)
