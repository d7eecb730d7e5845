"""Classification metrics, permutation importance and the 4 x 4 benchmark."""

from __future__ import annotations

import io
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import rankdata

from tailsel.copula_core import THETA_MAX
from tailsel.dataprep import BinaryDataset, pseudo_matrix, standardize, stratified_split
from tailsel.errors import DataError, FeatureMismatchError, TailselError
from tailsel.learners import LearnerConfig, TrainedModel, predict, predict_proba, train
from tailsel.selectors import derive_seed, ga_select, rank_a2, select_mi

log = logging.getLogger(__name__)

MODEL_SLOTS = (
    ("RF", "random_forest"),
    ("XGB", "gradient_boosting_l2"),
    ("LR", "logistic"),
    ("GB", "gradient_boosting"),
)
XGB_NOTE = "XGB row: second-order L2-regularized gradient boosting stand-in, not the XGBoost library"


@dataclass
class MetricsBlock:
    accuracy: float
    precision_weighted: float
    recall_weighted: float
    f1_weighted: float
    auc: float | None = None
    feature_set: str = ""
    model: str = ""
    features: list[str] = field(default_factory=list)
    status: str = "ok"
    error: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ImportanceRecord:
    feature: str
    mean_drop: float
    std_drop: float
    repeats: int
    drops: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _binary_pair(y_true, y_pred) -> tuple[np.ndarray, np.ndarray]:
    y_true = np.asarray(y_true).astype(np.int64).ravel()
    y_pred = np.asarray(y_pred).astype(np.int64).ravel()
    if y_true.size != y_pred.size:
        raise DataError("y_true and y_pred have different lengths")
    if y_true.size == 0:
        raise DataError("metrics of an empty sample")
    if not (np.isin(y_true, (0, 1)).all() and np.isin(y_pred, (0, 1)).all()):
        raise DataError("metrics expect 0/1 labels")
    return y_true, y_pred


def metrics(y_true, y_pred) -> MetricsBlock:
    """Accuracy and prevalence-weighted precision, recall and F1 (0 for empty denominators)."""
    y_true, y_pred = _binary_pair(y_true, y_pred)
    n = y_true.size
    prec = rec = f1 = 0.0
    for c in (0, 1):
        tp = int(np.sum((y_pred == c) & (y_true == c)))
        n_pred = int(np.sum(y_pred == c))
        n_true = int(np.sum(y_true == c))
        p = tp / n_pred if n_pred else 0.0
        r = tp / n_true if n_true else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        w = n_true / n
        prec += w * p
        rec += w * r
        f1 += w * f
    return MetricsBlock(float(np.mean(y_true == y_pred)), prec, rec, f1)


def roc_auc(y_true, scores) -> float:
    """Mann-Whitney AUC with midranks, i.e. ties count one half."""
    y_true = np.asarray(y_true).astype(np.int64).ravel()
    scores = np.asarray(scores, dtype=float).ravel()
    if y_true.size != scores.size:
        raise DataError("y_true and scores have different lengths")
    n_pos = int(np.sum(y_true == 1))
    n_neg = int(np.sum(y_true == 0))
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUC needs both classes present")
    ranks = rankdata(scores, method="average")
    u = float(np.sum(ranks[y_true == 1])) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def permutation_importance(
    model: TrainedModel,
    X_test,
    y_test,
    repeats: int = 20,
    seed: int = 42,
    feature_names=None,
) -> list[ImportanceRecord]:
    """Accuracy drop when one column at a time is shuffled, over ``repeats`` shuffles.

    Uses the 1 - accuracy loss, so each drop is baseline accuracy minus
    permuted accuracy. Shuffle j, r is seeded from (seed, j, r).
    """
    X = np.asarray(X_test, dtype=float)
    y = np.asarray(y_test).astype(np.int64).ravel()
    names = list(feature_names) if feature_names is not None else list(model.feature_names)
    if names != list(model.feature_names) or X.shape[1] != len(names):
        raise FeatureMismatchError(f"model expects columns {model.feature_names}")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    baseline = float(np.mean(predict(model, X) == y))
    records = []
    for j, name in enumerate(names):
        drops = []
        for r in range(repeats):
            rng = np.random.default_rng(derive_seed(seed, j, r))
            Xp = X.copy()
            Xp[:, j] = rng.permutation(Xp[:, j])
            drops.append(baseline - float(np.mean(predict(model, Xp) == y)))
        records.append(ImportanceRecord(name, float(np.mean(drops)), float(np.std(drops)), repeats, drops))
    return records


@dataclass
class EvalReport:
    blocks: list[MetricsBlock]
    importances: list[ImportanceRecord]
    selections: dict
    config: dict
    split: dict
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "blocks": [b.to_dict() for b in self.blocks],
            "importances": [r.to_dict() for r in self.importances],
            "selections": self.selections,
            "config": self.config,
            "split": self.split,
            "notes": self.notes,
        }

    def block(self, feature_set: str, model: str) -> MetricsBlock:
        for b in self.blocks:
            if b.feature_set == feature_set and b.model == model:
                return b
        raise KeyError((feature_set, model))

    def to_text(self) -> str:
        out = io.StringIO()
        head = f"{'Feature Set':<12} {'Model':<6} {'Acc.':>7} {'Prec.':>7} {'Recall':>7} {'F1':>7} {'AUC':>7}"
        out.write(head + "\n" + "-" * len(head) + "\n")
        last = None
        for b in self.blocks:
            label = b.feature_set if b.feature_set != last else ""
            if last is not None and label:
                out.write("-" * len(head) + "\n")
            last = b.feature_set
            model = b.model + ("*" if b.model == "XGB" else "")
            if b.status != "ok":
                out.write(f"{label:<12} {model:<6} failed: {b.error}\n")
                continue
            auc = f"{b.auc:7.4f}" if b.auc is not None else f"{'n/a':>7}"
            out.write(
                f"{label:<12} {model:<6} {b.accuracy:7.4f} {b.precision_weighted:7.4f} "
                f"{b.recall_weighted:7.4f} {b.f1_weighted:7.4f} {auc}\n"
            )
        out.write("\n")
        sets = []
        for b in self.blocks:
            if (b.feature_set, b.features) not in sets:
                sets.append((b.feature_set, b.features))
        for label, feats in sets:
            out.write(f"{label}: {', '.join(feats)}\n")
        out.write(f"* {XGB_NOTE}\n")
        if self.importances:
            out.write("\nPermutation importance (RF on A2 features, mean accuracy drop):\n")
            for r in sorted(self.importances, key=lambda r: -r.mean_drop):
                out.write(f"  {r.feature:<20} {r.mean_drop:8.5f} +/- {r.std_drop:.5f}\n")
        return out.getvalue()

    def importance_csv(self) -> str:
        lines = ["feature,mean_drop"]
        lines += [f"{r.feature},{r.mean_drop!r}" for r in self.importances]
        return "\n".join(lines) + "\n"


def _learner_config(kind: str, seed: int, threads: int, overrides: dict | None) -> LearnerConfig:
    params = dict((overrides or {}).get(kind, {}))
    params.setdefault("seed", seed)
    return LearnerConfig(kind=kind, threads=threads, **params)


def _run_cell(
    cfg: LearnerConfig, data: BinaryDataset, train_rows, test_rows, features: list[str]
) -> tuple[MetricsBlock, TrainedModel]:
    sub = data.select(features)
    Xtr, Xte = sub.X[train_rows], sub.X[test_rows]
    if cfg.kind == "logistic":
        Xtr, Xte, _, _ = standardize(Xtr, Xte)
    model = train(cfg, Xtr, sub.y[train_rows], features)
    proba = predict_proba(model, Xte)
    y_te = sub.y[test_rows]
    block = metrics(y_te, (proba >= 0.5).astype(np.int64))
    block.auc = roc_auc(y_te, proba)
    return block, model


def run_benchmark(
    data: BinaryDataset,
    seed: int = 42,
    k: int = 5,
    estimator: str = "tau",
    select_on: str = "train",
    threads: int = 1,
    repeats: int = 20,
    test_fraction: float = 0.2,
    learner_overrides: dict | None = None,
    theta_max: float = THETA_MAX,
) -> EvalReport:
    """Select features three ways and score four classifiers on each subset plus all features.

    One stratified split is shared by all cells. With ``select_on="train"``
    the selectors only see training rows. Logistic regression gets
    standardized inputs; tree models get raw values. Permutation importance is
    computed for the random forest on the A2 subset.
    """
    if select_on not in ("train", "full"):
        raise ValueError("select_on must be 'train' or 'full'")
    split = stratified_split(data.y, test_fraction, seed)
    sel_data = data.rows(split.train) if select_on == "train" else data

    ranking = rank_a2(pseudo_matrix(sel_data), k, estimator=estimator, theta_max=theta_max, threads=threads)
    log.info("a2 selected %s", ranking.selected)
    mi = select_mi(sel_data, k, seed=seed)
    log.info("mi selected %s", mi.features)
    ga = ga_select(sel_data, k, seed=seed)
    log.info("ga selected %s", ga.features)
    feature_sets = [
        (f"All ({data.d})", list(data.feature_names)),
        (f"A2 ({k})", ranking.selected),
        (f"MI ({k})", mi.features),
        (f"GA ({k})", ga.features),
    ]

    configs = {kind: _learner_config(kind, derive_seed(seed, 100 + i), threads, learner_overrides)
               for i, (_, kind) in enumerate(MODEL_SLOTS)}
    blocks: list[MetricsBlock] = []
    importances: list[ImportanceRecord] = []
    for set_label, feats in feature_sets:
        for model_label, kind in MODEL_SLOTS:
            try:
                block, model = _run_cell(configs[kind], data, split.train, split.test, feats)
            except (TailselError, np.linalg.LinAlgError, ValueError) as exc:
                log.error("cell %s/%s failed: %s", set_label, model_label, exc)
                block = MetricsBlock(math.nan, math.nan, math.nan, math.nan, None, status="failed", error=str(exc))
                model = None
            block.feature_set, block.model, block.features = set_label, model_label, list(feats)
            log.info("cell %s/%s: accuracy %.4f", set_label, model_label, block.accuracy)
            blocks.append(block)
            if set_label.startswith("A2") and kind == "random_forest" and model is not None:
                Xte = data.select(feats).X[split.test]
                importances = permutation_importance(model, Xte, data.y[split.test], repeats, seed)
                log.info("permutation importance done (%d repeats)", repeats)

    y = data.y
    return EvalReport(
        blocks=blocks,
        importances=importances,
        selections={"a2": ranking.to_dict(), "mi": mi.to_dict(), "ga": ga.to_dict()},
        config={
            "seed": seed,
            "k": k,
            "estimator": estimator,
            "select_on": select_on,
            "test_fraction": test_fraction,
            "theta_max": theta_max,
            "permutation_repeats": repeats,
            "ga": {"population": 10, "generations": 5, "tournament": 2, "mutation_rate": 0.1, "cv_folds": 3},
            "mi": {"folds": 5, "estimator": "plug-in, fold-averaged"},
            "learners": {label: configs[kind].to_dict() for label, kind in MODEL_SLOTS},
            "probability_threshold": 0.5,
        },
        split={
            "n": data.n,
            "n_train": int(split.train.size),
            "n_test": int(split.test.size),
            "prevalence": float(y.mean()),
            "prevalence_test": float(y[split.test].mean()),
            "majority_baseline_test": float(max(y[split.test].mean(), 1 - y[split.test].mean())),
        },
        notes=[XGB_NOTE],
    )
