"""Gradient-boosted CART trees for the binary NT-vs-TNN decision.

A small from-scratch boosted-tree classifier in the second-order
(gradient/hessian) formulation. Each round fits one regression tree by
exact greedy split search and adds it with shrinkage ``eta``; with the
default logistic objective the gradients are g = p - y and h = p(1-p)
for p = sigmoid(raw score). Labels are +/-1 at the API boundary and
{0, 1} internally.

Split gain at a node, given child aggregates (GL, HL) and (GR, HR):

    gain = 0.5 * [GL^2/(HL+lambda) + GR^2/(HR+lambda)
                  - (GL+GR)^2/(HL+HR+lambda)] - gamma

A split is taken only when gain > 0, depth stays under ``max_depth``
and both children carry at least ``min_child_weight`` of hessian. Leaf
weight is -G/(H+lambda). Thresholds sit at midpoints between
consecutive distinct sorted feature values; ties in gain resolve to the
lowest feature index, then the lowest threshold, so training is
bit-reproducible. Features are never normalized.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "GbdtParams",
    "TreeNode",
    "GbdtModel",
    "CvReport",
    "fit_tree",
    "fit_gbdt",
    "predict",
    "predict_raw",
    "predict_batch",
    "accuracy",
    "cross_validate",
    "serialize_model",
    "deserialize_model",
    "ModelFormatError",
]

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class GbdtParams:
    max_depth: int = 8
    n_estimators: int = 8
    eta: float = 1.0
    gamma: float = 0.0
    lam: float = 1.0
    min_child_weight: float = 1.0
    objective: str = "logistic"  # or "squared" for the plain-CART baseline

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.n_estimators < 1:
            raise ValueError(f"n_estimators must be >= 1, got {self.n_estimators}")
        if self.objective not in ("logistic", "squared"):
            raise ValueError(f"unknown objective {self.objective!r}")


@dataclass
class TreeNode:
    """Internal node (feature/threshold/children) or leaf (weight).

    Routing: feature value < threshold goes left, else right.
    """

    feature: int | None = None
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    weight: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def depth(self) -> int:
        """Edge count of the longest root-to-leaf path."""
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def route(self, x) -> float:
        node = self
        while not node.is_leaf:
            node = node.left if x[node.feature] < node.threshold else node.right
        return node.weight


@dataclass(frozen=True)
class GbdtModel:
    trees: tuple
    params: GbdtParams
    base_score: float = 0.0
    n_features: int = 8


def _sigmoid(raw):
    return 1.0 / (1.0 + np.exp(-raw))


def _leaf_weight(g_sum, h_sum, lam):
    return -g_sum / (h_sum + lam)


def _gain(gl, hl, gr, hr, lam, gamma):
    parent = (gl + gr) ** 2 / (hl + hr + lam)
    return 0.5 * (gl**2 / (hl + lam) + gr**2 / (hr + lam) - parent) - gamma


def _best_split(x, g, h, params):
    """Exact greedy search over all features and midpoint thresholds.

    Returns (gain, feature, threshold) or None when no split with
    positive gain satisfies the constraints.
    """
    g_sum = float(g.sum())
    h_sum = float(h.sum())
    parent = g_sum**2 / (h_sum + params.lam)
    best = None
    for feature in range(x.shape[1]):
        column = x[:, feature]
        order = np.argsort(column, kind="stable")
        xs = column[order]
        boundaries = np.flatnonzero(xs[1:] != xs[:-1])
        if boundaries.size == 0:
            continue  # single distinct value: nothing to split on
        gl = np.cumsum(g[order])[boundaries]
        hl = np.cumsum(h[order])[boundaries]
        gr = g_sum - gl
        hr = h_sum - hl
        gains = (
            0.5 * (gl**2 / (hl + params.lam) + gr**2 / (hr + params.lam) - parent)
            - params.gamma
        )
        ok = (hl >= params.min_child_weight) & (hr >= params.min_child_weight)
        if not ok.any():
            continue
        gains = np.where(ok, gains, -np.inf)
        idx = int(np.argmax(gains))  # first max: lowest threshold wins ties
        gain = float(gains[idx])
        if gain <= 0.0:
            continue
        if best is None or gain > best[0]:  # strict: lowest feature wins ties
            boundary = boundaries[idx]
            threshold = (float(xs[boundary]) + float(xs[boundary + 1])) / 2.0
            best = (gain, feature, threshold)
    return best


def _build_tree(x, g, h, params, depth):
    g_sum = float(g.sum())
    h_sum = float(h.sum())
    if depth >= params.max_depth:
        return TreeNode(weight=_leaf_weight(g_sum, h_sum, params.lam))
    split = _best_split(x, g, h, params)
    if split is None:
        return TreeNode(weight=_leaf_weight(g_sum, h_sum, params.lam))
    _, feature, threshold = split
    mask = x[:, feature] < threshold
    return TreeNode(
        feature=feature,
        threshold=threshold,
        left=_build_tree(x[mask], g[mask], h[mask], params, depth + 1),
        right=_build_tree(x[~mask], g[~mask], h[~mask], params, depth + 1),
    )


def fit_tree(x, g, h, params: GbdtParams | None = None) -> TreeNode:
    """Fit one regression tree to gradients/hessians by exact greedy search."""
    params = params or GbdtParams()
    x = np.asarray(x, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("need a non-empty 2-D feature array")
    if g.shape != (x.shape[0],) or h.shape != (x.shape[0],):
        raise ValueError("gradient/hessian length must match the sample count")
    if not (np.isfinite(g).all() and np.isfinite(h).all()):
        raise ValueError("gradients and hessians must be finite")
    return _build_tree(x, g, h, params, depth=0)


def _apply_tree(node, x, out, idx):
    if node.is_leaf:
        out[idx] = node.weight
        return
    mask = x[idx, node.feature] < node.threshold
    _apply_tree(node.left, x, out, idx[mask])
    _apply_tree(node.right, x, out, idx[~mask])


def _tree_outputs(node, x):
    out = np.empty(x.shape[0], dtype=np.float64)
    _apply_tree(node, x, out, np.arange(x.shape[0]))
    return out


def fit_gbdt(x, y, params: GbdtParams | None = None) -> GbdtModel:
    """Boosted ensemble on features ``x`` and labels ``y`` in {-1, +1}."""
    params = params or GbdtParams()
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("training set is empty")
    if y.shape != (x.shape[0],):
        raise ValueError("label count must match the sample count")
    if not np.isin(y, (-1, 1)).all():
        raise ValueError("labels must be -1 or +1")
    y01 = (y.astype(np.float64) + 1.0) / 2.0
    y_pm = y.astype(np.float64)
    base_score = 0.0
    raw = np.full(x.shape[0], base_score, dtype=np.float64)
    trees = []
    for _ in range(params.n_estimators):
        if params.objective == "logistic":
            p = _sigmoid(raw)
            g = p - y01
            h = p * (1.0 - p)
        else:
            g = raw - y_pm
            h = np.ones_like(raw)
        tree = _build_tree(x, g, h, params, depth=0)
        trees.append(tree)
        raw = raw + params.eta * _tree_outputs(tree, x)
    return GbdtModel(
        trees=tuple(trees),
        params=params,
        base_score=base_score,
        n_features=x.shape[1],
    )


def predict_raw(model: GbdtModel, features) -> float:
    """Raw (log-odds) score: base plus eta-scaled leaf weights."""
    x = np.asarray(features, dtype=np.float64)
    if x.shape != (model.n_features,):
        raise ValueError(
            f"expected {model.n_features} features, got shape {x.shape}"
        )
    if not np.isfinite(x).all():
        raise ValueError("features must be finite")
    raw = model.base_score
    for tree in model.trees:
        raw += model.params.eta * tree.route(x)
    return raw


def predict(model: GbdtModel, features) -> int:
    """+1 (choose NT) when the raw score is >= 0, else -1 (choose TNN)."""
    return 1 if predict_raw(model, features) >= 0.0 else -1


def predict_batch(model: GbdtModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise ValueError(f"expected an (n, {model.n_features}) array")
    raw = np.full(x.shape[0], model.base_score, dtype=np.float64)
    for tree in model.trees:
        raw += model.params.eta * _tree_outputs(tree, x)
    return np.where(raw >= 0.0, 1, -1)


def accuracy(model: GbdtModel, x, y) -> float:
    y = np.asarray(y)
    return float(np.mean(predict_batch(model, x) == y))


# ---------------------------------------------------------------------------
# Cross-validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CvReport:
    """Per-fold accuracies plus min/max/average for each class row."""

    fold_accuracies: tuple
    negative: tuple  # (min, max, average) accuracy on label -1
    positive: tuple  # (min, max, average) accuracy on label +1
    total: tuple  # (min, max, average) overall fold accuracy

    @property
    def overall_average(self) -> float:
        return self.total[2]


def _stratified_folds(y, folds, seed):
    """Fold id per sample; each class is spread evenly across folds."""
    rng = np.random.default_rng(seed)
    assignment = np.empty(len(y), dtype=np.int64)
    for cls in (-1, 1):
        idx = np.flatnonzero(y == cls)
        rng.shuffle(idx)
        assignment[idx] = np.arange(len(idx)) % folds
    return assignment


def _min_max_avg(values):
    return (float(min(values)), float(max(values)), float(np.mean(values)))


def cross_validate(
    x,
    y,
    folds: int = 5,
    params: GbdtParams | None = None,
    seed: int = 0,
) -> CvReport:
    """Stratified k-fold CV; accuracies reported per class and overall."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    if x.shape[0] < folds:
        raise ValueError(f"need at least {folds} samples, got {x.shape[0]}")
    assignment = _stratified_folds(y, folds, seed)
    fold_acc, neg_acc, pos_acc = [], [], []
    for fold in range(folds):
        test = assignment == fold
        train = ~test
        if not test.any():
            continue
        model = fit_gbdt(x[train], y[train], params)
        pred = predict_batch(model, x[test])
        truth = y[test]
        fold_acc.append(float(np.mean(pred == truth)))
        for cls, bucket in ((-1, neg_acc), (1, pos_acc)):
            mask = truth == cls
            if mask.any():
                bucket.append(float(np.mean(pred[mask] == cls)))
    return CvReport(
        fold_accuracies=tuple(fold_acc),
        negative=_min_max_avg(neg_acc) if neg_acc else (math.nan,) * 3,
        positive=_min_max_avg(pos_acc) if pos_acc else (math.nan,) * 3,
        total=_min_max_avg(fold_acc),
    )


# ---------------------------------------------------------------------------
# Serialization (JSON document, round-trip float precision)
# ---------------------------------------------------------------------------


class ModelFormatError(ValueError):
    """Malformed model document; message carries the location."""


def _node_to_obj(node: TreeNode):
    if node.is_leaf:
        return {"leaf": node.weight}
    return {
        "feat": node.feature,
        "thresh": node.threshold,
        "left": _node_to_obj(node.left),
        "right": _node_to_obj(node.right),
    }


def _node_from_obj(obj, where):
    if not isinstance(obj, dict):
        raise ModelFormatError(f"{where}: expected an object, got {type(obj).__name__}")
    if "leaf" in obj:
        if not isinstance(obj["leaf"], (int, float)):
            raise ModelFormatError(f"{where}.leaf: expected a number")
        return TreeNode(weight=float(obj["leaf"]))
    for key in ("feat", "thresh", "left", "right"):
        if key not in obj:
            raise ModelFormatError(f"{where}: missing {key!r}")
    if not isinstance(obj["feat"], int) or obj["feat"] < 0:
        raise ModelFormatError(f"{where}.feat: expected a non-negative integer")
    return TreeNode(
        feature=obj["feat"],
        threshold=float(obj["thresh"]),
        left=_node_from_obj(obj["left"], where + ".left"),
        right=_node_from_obj(obj["right"], where + ".right"),
    )


def serialize_model(model: GbdtModel) -> str:
    """JSON document for the model; floats keep round-trip precision."""
    doc = {
        "version": MODEL_FORMAT_VERSION,
        "params": {
            "max_depth": model.params.max_depth,
            "n_estimators": model.params.n_estimators,
            "eta": model.params.eta,
            "gamma": model.params.gamma,
            "lambda": model.params.lam,
            "min_child_weight": model.params.min_child_weight,
            "objective": model.params.objective,
        },
        "base_score": model.base_score,
        "n_features": model.n_features,
        "trees": [_node_to_obj(t) for t in model.trees],
    }
    return json.dumps(doc, indent=1)


def deserialize_model(text: str | bytes) -> GbdtModel:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(
            f"not valid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        raise ModelFormatError("$: expected a JSON object")
    for key in ("version", "params", "base_score", "trees"):
        if key not in doc:
            raise ModelFormatError(f"$: missing {key!r}")
    if doc["version"] != MODEL_FORMAT_VERSION:
        raise ModelFormatError(f"$.version: unsupported version {doc['version']!r}")
    raw_params = doc["params"]
    if not isinstance(raw_params, dict):
        raise ModelFormatError("$.params: expected an object")
    try:
        params = GbdtParams(
            max_depth=int(raw_params["max_depth"]),
            n_estimators=int(raw_params["n_estimators"]),
            eta=float(raw_params["eta"]),
            gamma=float(raw_params["gamma"]),
            lam=float(raw_params["lambda"]),
            min_child_weight=float(raw_params["min_child_weight"]),
            objective=str(raw_params.get("objective", "logistic")),
        )
    except KeyError as exc:
        raise ModelFormatError(f"$.params: missing {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"$.params: {exc}") from None
    if not isinstance(doc["trees"], list):
        raise ModelFormatError("$.trees: expected a list")
    trees = tuple(
        _node_from_obj(obj, f"$.trees[{i}]") for i, obj in enumerate(doc["trees"])
    )
    if len(trees) > params.n_estimators:
        raise ModelFormatError(
            f"$.trees: {len(trees)} trees exceeds n_estimators={params.n_estimators}"
        )
    return GbdtModel(
        trees=trees,
        params=params,
        base_score=float(doc["base_score"]),
        n_features=int(doc.get("n_features", 8)),
    )


def save_model(model: GbdtModel, path) -> None:
    with open(path, "w") as fh:
        fh.write(serialize_model(model))


def load_model(path) -> GbdtModel:
    with open(path) as fh:
        return deserialize_model(fh.read())
