"""Binary classifiers: ridge logistic regression, random forest, gradient boosting.

Trees are grown level by level on binned features. One compiled pass per
level builds the split histograms of every frontier node, so the Python
overhead scales with depth rather than with the number of nodes.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit

from tailsel import _kernels
from tailsel.errors import DataError, FeatureMismatchError

SCHEMA_VERSION = 1
KINDS = ("logistic", "random_forest", "gradient_boosting", "gradient_boosting_l2")


@dataclass(frozen=True)
class LearnerConfig:
    kind: str = "logistic"
    trees: int = 100
    depth: int | None = None  # None: unlimited for forests, 3 for boosting
    learning_rate: float = 0.1
    l2_leaf: float = 1.0
    l2: float = 1.0
    max_iterations: int = 1000
    tolerance: float = 1e-6
    subsample: float = 1.0
    min_leaf: int | None = None  # None: 5 for forests, 1 for boosting
    max_bins: int = 256
    seed: int = 0
    threads: int = 1

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown learner kind {self.kind!r}")
        if self.trees < 0 or self.max_iterations <= 0 or self.max_bins < 2:
            raise ValueError("trees, max_iterations and max_bins must be positive")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1]")
        if not 0.0 < self.subsample <= 1.0:
            raise ValueError("subsample must lie in (0, 1]")
        if self.depth is not None and self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.min_leaf is not None and self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if self.l2 < 0 or self.l2_leaf < 0 or self.tolerance <= 0:
            raise ValueError("regularization must be >= 0 and tolerance > 0")

    @property
    def effective_depth(self) -> int | None:
        if self.depth is not None:
            return self.depth
        return None if self.kind == "random_forest" else 3

    @property
    def effective_min_leaf(self) -> int:
        if self.min_leaf is not None:
            return self.min_leaf
        return 5 if self.kind == "random_forest" else 1

    def to_dict(self) -> dict:
        out = asdict(self)
        out.pop("threads")
        out["depth"] = self.effective_depth
        out["min_leaf"] = self.effective_min_leaf
        return out


@dataclass
class Tree:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray  # go left iff x <= threshold
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=float)
        return _kernels.tree_predict(self.feature, self.threshold, self.left, self.right, self.value, X)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=float),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=float),
        )


@dataclass
class TrainedModel:
    kind: str
    feature_names: list[str]
    config: LearnerConfig
    coef: np.ndarray | None = None
    intercept: float = 0.0
    trees: list[Tree] = field(default_factory=list)
    init_score: float = 0.0
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "feature_names": list(self.feature_names),
            "hyperparameters": self.config.to_dict(),
            "coef": None if self.coef is None else self.coef.tolist(),
            "intercept": self.intercept,
            "init_score": self.init_score,
            "trees": [t.to_dict() for t in self.trees],
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported model schema_version {d.get('schema_version')!r}")
        return cls(
            kind=d["kind"],
            feature_names=list(d["feature_names"]),
            config=LearnerConfig(**d["hyperparameters"]),
            coef=None if d["coef"] is None else np.asarray(d["coef"], dtype=float),
            intercept=float(d["intercept"]),
            trees=[Tree.from_dict(t) for t in d["trees"]],
            init_score=float(d["init_score"]),
            meta=dict(d["meta"]),
        )


def _as_matrix(X) -> tuple[np.ndarray, list[str] | None]:
    names = None
    if hasattr(X, "columns"):
        names = [str(c) for c in X.columns]
        X = X.to_numpy()
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X, names


def _check_xy(X, y) -> tuple[np.ndarray, np.ndarray]:
    X, _ = _as_matrix(X)
    y = np.asarray(y).astype(np.int64).ravel()
    if X.shape[0] != y.size:
        raise DataError("X and y have different row counts")
    if X.shape[0] == 0:
        raise DataError("cannot train on an empty dataset")
    if not np.isin(y, (0, 1)).all():
        raise DataError("labels must be 0/1")
    return X, y


def _default_names(X: np.ndarray, names) -> list[str]:
    return list(names) if names is not None else [f"x{j}" for j in range(X.shape[1])]


# ---------------------------------------------------------------------------
# logistic regression
# ---------------------------------------------------------------------------

def logistic_objective(params: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float):
    """Mean log-loss plus l2/(2n) * ||coef||^2; params = [intercept, coef...].

    Returns (value, gradient).
    """
    n = X.shape[0]
    z = params[0] + X @ params[1:]
    value = float(np.mean(np.logaddexp(0.0, z) - y * z)) + 0.5 * l2 / n * float(params[1:] @ params[1:])
    resid = expit(z) - y
    grad = np.empty_like(params)
    grad[0] = resid.mean()
    grad[1:] = X.T @ resid / n + l2 / n * params[1:]
    return value, grad


def train_logistic(X, y, cfg: LearnerConfig | None = None, feature_names=None) -> TrainedModel:
    """Damped Newton iterations on the ridge-penalized mean log-loss.

    Stops when the gradient norm drops below ``cfg.tolerance``; the intercept is
    not penalized. Fully deterministic.
    """
    cfg = cfg or LearnerConfig(kind="logistic")
    X, y = _check_xy(X, y)
    n, d = X.shape
    A = np.column_stack([np.ones(n), X])
    penalty = np.full(d + 1, cfg.l2 / n)
    penalty[0] = 0.0
    params = np.zeros(d + 1)
    prev = y.mean()
    params[0] = math.log(prev / (1 - prev)) if 0 < prev < 1 else 0.0
    value, grad = logistic_objective(params, X, y, cfg.l2)
    it = 0
    while it < cfg.max_iterations and np.linalg.norm(grad) >= cfg.tolerance:
        p = expit(A @ params)
        H = (A.T * (p * (1 - p))) @ A / n + np.diag(penalty) + 1e-12 * np.eye(d + 1)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = grad
        t = 1.0
        while True:
            cand = params - t * step
            cval, cgrad = logistic_objective(cand, X, y, cfg.l2)
            if cval <= value - 1e-4 * t * float(grad @ step) or t < 1e-10:
                break
            t *= 0.5
        params, value, grad = cand, cval, cgrad
        it += 1
    converged = bool(np.linalg.norm(grad) < cfg.tolerance)
    return TrainedModel(
        kind="logistic",
        feature_names=_default_names(X, feature_names),
        config=cfg,
        coef=params[1:].copy(),
        intercept=float(params[0]),
        meta={"iterations": it, "converged": converged, "final_loss": value},
    )


# ---------------------------------------------------------------------------
# histogram trees
# ---------------------------------------------------------------------------

def bin_edges(X: np.ndarray, max_bins: int) -> list[np.ndarray]:
    """Split candidates per column: midpoints between distinct values, or quantiles."""
    edges = []
    for j in range(X.shape[1]):
        uniq = np.unique(X[:, j])
        if uniq.size <= max_bins:
            edges.append((uniq[:-1] + uniq[1:]) / 2.0)
        else:
            qs = np.quantile(X[:, j], np.linspace(0, 1, max_bins + 1)[1:-1], method="lower")
            edges.append(np.unique(qs))
    return edges


def bin_codes(X: np.ndarray, edges: list[np.ndarray]) -> np.ndarray:
    # code <= b  <=>  x <= edges[b]
    return np.column_stack(
        [np.searchsorted(e, X[:, j], side="left").astype(np.int32) for j, e in enumerate(edges)]
    )


# Split scores: a split's gain is score(left) + score(right) - score(parent).
# gini: (pos^2 + neg^2) / w, squared: r^2 / cnt, newton: G^2 / (H + l2).
SCORES = {"gini": _kernels.GINI, "squared": _kernels.SQUARED, "newton": _kernels.NEWTON}


def grow_tree(
    codes: np.ndarray,
    edges: list[np.ndarray],
    stats: np.ndarray,
    score: str,
    leaf_value: Callable[[np.ndarray], np.ndarray],
    max_depth: int | None,
    min_leaf: int,
    n_candidates: int,
    rng: np.random.Generator,
    pure: Callable[[np.ndarray], np.ndarray] | None = None,
    l2: float = 0.0,
) -> Tree:
    """Grow one tree level by level.

    ``stats`` has shape (m, n); row 0 is the per-sample weight (count) used for
    the ``min_leaf`` constraint. Rows with zero weight are ignored. ``score``
    names the split criterion in ``SCORES``.
    """
    m_stats, n = stats.shape
    d = codes.shape[1]
    kind = SCORES[score]
    codes = np.ascontiguousarray(codes)
    stats = np.ascontiguousarray(stats, dtype=float)
    n_bins = np.array([e.size + 1 for e in edges], dtype=np.int64)
    edge_offset = np.concatenate([[0], np.cumsum([e.size for e in edges])]).astype(np.int64)
    flat_edges = np.concatenate([np.asarray(e, dtype=float) for e in edges] + [np.zeros(1)])

    feature = np.full(1, -1, dtype=np.int64)
    threshold = np.zeros(1)
    left = np.full(1, -1, dtype=np.int64)
    right = np.full(1, -1, dtype=np.int64)
    node_stats = stats.sum(axis=1)[:, None]  # (m, n_nodes)

    rows = np.flatnonzero(stats[0] > 0)
    row_node = np.zeros(rows.size, dtype=np.int64)
    frontier = np.array([0], dtype=np.int64)
    depth = 0
    while frontier.size and rows.size:
        L = frontier.size
        parent = node_stats[:, frontier]  # (m, L)
        splittable = parent[0] >= 2 * min_leaf
        if max_depth is not None and depth >= max_depth:
            break
        if pure is not None:
            splittable &= ~pure(parent)
        if not splittable.any():
            break
        local = np.full(feature.size, -1, dtype=np.int64)
        local[frontier] = np.arange(L)
        row_local = local[row_node]
        if n_candidates < d:
            cand = np.zeros((L, d), dtype=bool)
            pick = np.argsort(rng.random((L, d)), axis=1)[:, :n_candidates]
            np.put_along_axis(cand, pick, True, axis=1)
        else:
            cand = np.ones((L, d), dtype=bool)
        best_feat, best_bin, _ = _kernels.best_splits(
            rows, row_local, codes, stats, cand, splittable, np.ascontiguousarray(parent),
            n_bins, float(min_leaf), kind, float(l2),
        )

        split_local = np.flatnonzero(best_feat >= 0)
        if not split_local.size:
            break
        S = split_local.size
        parents = frontier[split_local]
        children = feature.size + np.arange(2 * S, dtype=np.int64).reshape(S, 2)
        feature[parents] = best_feat[split_local]
        threshold[parents] = flat_edges[edge_offset[best_feat[split_local]] + best_bin[split_local]]
        feature = np.concatenate([feature, np.full(2 * S, -1, dtype=np.int64)])
        threshold = np.concatenate([threshold, np.zeros(2 * S)])
        left = np.concatenate([left, np.full(2 * S, -1, dtype=np.int64)])
        right = np.concatenate([right, np.full(2 * S, -1, dtype=np.int64)])
        left[parents] = children[:, 0]
        right[parents] = children[:, 1]
        child_of = np.full((L, 2), -1, dtype=np.int64)
        child_of[split_local] = children

        moving = best_feat[row_local] >= 0
        rows, row_local = rows[moving], row_local[moving]
        go_right = codes[rows, best_feat[row_local]] > best_bin[row_local]
        row_node = child_of[row_local, go_right.astype(np.int64)]
        new_nodes = children.ravel()
        base = feature.size - 2 * S
        sums = np.stack(
            [np.bincount(row_node - base, weights=stats[s, rows], minlength=2 * S) for s in range(m_stats)]
        )
        node_stats = np.concatenate([node_stats, sums], axis=1)
        frontier = new_nodes
        depth += 1

    return Tree(feature, threshold, left, right, np.asarray(leaf_value(node_stats), dtype=float))


def _tree_seeds(seed: int, count: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


# ---------------------------------------------------------------------------
# random forest
# ---------------------------------------------------------------------------

def _gini_pure(s: np.ndarray) -> np.ndarray:
    return (s[1] <= 0) | (s[1] >= s[0])


def _majority_vote(s: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(s[0] > 0, s[1] / s[0], 0.0)
    return (frac >= 0.5).astype(float)


def train_random_forest(X, y, cfg: LearnerConfig | None = None, feature_names=None, oob: bool = False) -> TrainedModel:
    """Bagged Gini trees with ceil(sqrt(d)) candidate features per split.

    Each tree casts a hard 0/1 vote, so predicted probabilities are multiples
    of 1/trees. Per-tree generators come from ``SeedSequence(seed).spawn``,
    making the forest identical for any thread count.
    """
    cfg = cfg or LearnerConfig(kind="random_forest")
    X, y = _check_xy(X, y)
    n, d = X.shape
    edges = bin_edges(X, cfg.max_bins)
    codes = bin_codes(X, edges)
    n_candidates = max(1, math.ceil(math.sqrt(d)))
    rngs = _tree_seeds(cfg.seed, cfg.trees)

    def build(rng: np.random.Generator) -> tuple[Tree, np.ndarray]:
        counts = np.bincount(rng.integers(0, n, n), minlength=n).astype(float)
        stats = np.stack([counts, counts * y])
        tree = grow_tree(
            codes, edges, stats, "gini", _majority_vote,
            cfg.effective_depth, cfg.effective_min_leaf, n_candidates, rng, pure=_gini_pure,
        )
        return tree, counts == 0

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            built = list(pool.map(build, rngs))
    else:
        built = [build(r) for r in rngs]
    trees = [t for t, _ in built]
    meta: dict = {"n_trees": len(trees), "n_nodes": int(sum(t.n_nodes for t in trees))}
    if oob:
        votes = np.zeros(n)
        seen = np.zeros(n)
        for tree, out_of_bag in built:
            idx = np.flatnonzero(out_of_bag)
            votes[idx] += tree.predict(X[idx])
            seen[idx] += 1
        has = seen > 0
        meta["oob_accuracy"] = float(np.mean(((votes[has] / seen[has]) >= 0.5) == y[has]))
    return TrainedModel("random_forest", _default_names(X, feature_names), cfg, trees=trees, meta=meta)


# ---------------------------------------------------------------------------
# gradient boosting
# ---------------------------------------------------------------------------

def _log_loss(F: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(np.logaddexp(0.0, F) - y * F))


def _mean_leaf(s: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(s[0] > 0, s[1] / s[0], 0.0)


def train_gradient_boosting(X, y, cfg: LearnerConfig | None = None, feature_names=None) -> TrainedModel:
    """Stagewise regression trees on the logistic loss.

    ``kind="gradient_boosting"`` fits squared-error trees to the residuals
    y - p and uses the mean residual as leaf value (a step the logistic loss's
    curvature bound of 1/4 guarantees never increases training loss).
    ``kind="gradient_boosting_l2"`` scores splits with G^2/(H+l2) and uses
    the second-order leaf weight sum(y - p) / (sum p(1-p) + l2_leaf).
    """
    cfg = cfg or LearnerConfig(kind="gradient_boosting")
    if cfg.kind not in ("gradient_boosting", "gradient_boosting_l2"):
        raise ValueError(f"train_gradient_boosting cannot train kind {cfg.kind!r}")
    X, y = _check_xy(X, y)
    n, d = X.shape
    edges = bin_edges(X, cfg.max_bins)
    codes = bin_codes(X, edges)
    base = float(np.clip(y.mean(), 1e-12, 1 - 1e-12))
    init = math.log(base / (1 - base))
    F = np.full(n, init)
    second_order = cfg.kind == "gradient_boosting_l2"
    if second_order:
        score = "newton"
        lam = cfg.l2_leaf

        def leaf(s: np.ndarray) -> np.ndarray:
            return s[1] / (s[2] + lam)
    else:
        score, leaf = "squared", _mean_leaf

    rng = np.random.default_rng(cfg.seed)
    trees: list[Tree] = []
    losses = [_log_loss(F, y)]
    for _ in range(cfg.trees):
        p = expit(F)
        weight = np.ones(n)
        if cfg.subsample < 1.0:
            keep = rng.permutation(n)[: max(1, int(round(cfg.subsample * n)))]
            weight = np.zeros(n)
            weight[keep] = 1.0
        resid = (y - p) * weight
        if second_order:
            stats = np.stack([weight, resid, p * (1 - p) * weight])
        else:
            stats = np.stack([weight, resid])
        tree = grow_tree(
            codes, edges, stats, score, leaf, cfg.effective_depth, cfg.effective_min_leaf, d, rng, l2=cfg.l2_leaf
        )
        tree.value *= cfg.learning_rate
        trees.append(tree)
        F = F + tree.predict(X)
        losses.append(_log_loss(F, y))
    return TrainedModel(
        cfg.kind,
        _default_names(X, feature_names),
        cfg,
        trees=trees,
        init_score=init,
        meta={"n_trees": len(trees), "loss_history": losses},
    )


# ---------------------------------------------------------------------------
# dispatch and prediction
# ---------------------------------------------------------------------------

def train(cfg: LearnerConfig, X, y, feature_names=None) -> TrainedModel:
    if cfg.kind == "logistic":
        return train_logistic(X, y, cfg, feature_names)
    if cfg.kind == "random_forest":
        return train_random_forest(X, y, cfg, feature_names)
    return train_gradient_boosting(X, y, cfg, feature_names)


def predict_proba(model: TrainedModel, X, feature_names=None) -> np.ndarray:
    """P(y = 1) for each row of X; columns must match the training features."""
    X, frame_names = _as_matrix(X)
    names = feature_names if feature_names is not None else frame_names
    if names is not None and list(names) != list(model.feature_names):
        raise FeatureMismatchError(f"expected columns {model.feature_names}, got {list(names)}")
    if X.shape[1] != len(model.feature_names):
        raise FeatureMismatchError(f"expected {len(model.feature_names)} columns, got {X.shape[1]}")
    if model.kind == "logistic":
        return expit(model.intercept + X @ model.coef)
    if model.kind == "random_forest":
        if not model.trees:
            return np.full(X.shape[0], 0.5)
        votes = np.zeros(X.shape[0])
        for tree in model.trees:
            votes += tree.predict(X)
        return votes / len(model.trees)
    F = np.full(X.shape[0], model.init_score)
    for tree in model.trees:
        F += tree.predict(X)
    return expit(F)


def predict(model: TrainedModel, X, feature_names=None) -> np.ndarray:
    return (predict_proba(model, X, feature_names) >= 0.5).astype(np.int64)
