"""Feature subset selection: A2 upper-tail ranking, mutual information, GA wrapper."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from tailsel.copula_core import THETA_MAX, fit_theta_mle, fit_theta_tau, upper_tail_coefficient
from tailsel.dataprep import BinaryDataset, PseudoMatrix, standardize, stratified_folds
from tailsel.errors import DataError, TailselError
from tailsel.learners import LearnerConfig, predict, train_logistic

log = logging.getLogger(__name__)

MAX_MI_LEVELS = 10_000


def derive_seed(seed: int, *path: int) -> int:
    """Deterministic sub-seed for a task identified by ``path``."""
    return int(np.random.SeedSequence([seed, *path]).generate_state(1)[0])


def _check_k(k: int, d: int) -> None:
    if not 1 <= k <= d:
        raise DataError(f"k must lie in [1, {d}], got {k}")


# ---------------------------------------------------------------------------
# A2 ranking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RankEntry:
    feature: str
    index: int
    theta: float
    lambda_u: float
    tau_hat: float
    clamped: bool
    method: str
    log_likelihood: float | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "feature": self.feature,
            "index": self.index,
            "theta": self.theta,
            "lambda_u": self.lambda_u,
            "tau_hat": self.tau_hat,
            "clamped": self.clamped,
            "method": self.method,
            "log_likelihood": self.log_likelihood,
            "error": self.error,
        }


TIE_RULE = "lambda_u desc, then tau_hat desc, then feature index asc; failed fits last"


@dataclass
class FeatureRanking:
    entries: list[RankEntry]
    k: int
    tie_rule: str = TIE_RULE

    @property
    def selected(self) -> list[str]:
        return [e.feature for e in self.entries[: self.k]]

    @property
    def names(self) -> list[str]:
        return [e.feature for e in self.entries]

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "selected": self.selected,
            "tie_rule": self.tie_rule,
            "entries": [e.to_dict() for e in self.entries],
        }


def _rank_key(e: RankEntry) -> tuple:
    if e.error is not None:
        return (1, 0.0, 0.0, e.index)
    return (0, -e.lambda_u, -e.tau_hat, e.index)


def rank_a2(
    pseudo: PseudoMatrix,
    k: int,
    estimator: str = "tau",
    theta_max: float = THETA_MAX,
    threads: int = 1,
) -> FeatureRanking:
    """Rank features by the upper-tail coefficient of an A2 copula fitted to (u_j, v).

    ``estimator`` is ``"tau"`` (Kendall-tau inversion) or ``"mle"``
    (pseudo-likelihood, started from the tau estimate). Every feature whose
    dependence is too weak for the family clamps to theta = 1; such ties on
    lambda_U are broken by the sample Kendall tau, which orders the clamped
    features the same way an unbounded inversion would.
    """
    d = len(pseudo.feature_names)
    _check_k(k, d)
    if estimator not in ("tau", "mle"):
        raise ValueError(f"estimator must be 'tau' or 'mle', got {estimator!r}")

    def fit_one(j: int) -> RankEntry:
        name = pseudo.feature_names[j]
        try:
            sample = pseudo.sample(j)
            est = fit_theta_tau(sample, theta_max)
            if estimator == "mle":
                est = fit_theta_mle(sample, init=est.theta, theta_max=theta_max, tau_hat=est.tau_hat)
        except TailselError as exc:
            log.warning("theta fit failed for %s: %s", name, exc)
            return RankEntry(name, j, math.nan, math.nan, math.nan, False, estimator, error=str(exc))
        return RankEntry(
            name, j, est.theta, upper_tail_coefficient(est.theta), est.tau_hat, est.clamped, est.method,
            est.log_likelihood,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            entries = list(pool.map(fit_one, range(d)))
    else:
        entries = [fit_one(j) for j in range(d)]
    return FeatureRanking(sorted(entries, key=_rank_key), k)


# ---------------------------------------------------------------------------
# mutual information
# ---------------------------------------------------------------------------

def mutual_information(x, y) -> float:
    """Plug-in mutual information (nats) of two discrete sequences."""
    x = np.asarray(x).ravel()
    y = np.asarray(y).ravel()
    if x.size != y.size:
        raise DataError("x and y must have the same length")
    if x.size == 0:
        raise DataError("mutual information of an empty sample")
    xs, cx = np.unique(x, return_inverse=True)
    ys, cy = np.unique(y, return_inverse=True)
    if xs.size > MAX_MI_LEVELS:
        raise DataError(f"x has {xs.size} distinct values; the plug-in estimator allows {MAX_MI_LEVELS}")
    joint = np.bincount(cx.ravel() * ys.size + cy.ravel(), minlength=xs.size * ys.size).reshape(xs.size, ys.size)
    pxy = joint / x.size
    px = pxy.sum(axis=1, keepdims=True)
    py = pxy.sum(axis=0, keepdims=True)
    nz = pxy > 0
    mi = float(np.sum(pxy[nz] * np.log(pxy[nz] / (px @ py)[nz])))
    return max(mi, 0.0)


@dataclass
class MiSelection:
    features: list[str]
    scores: dict[str, float]
    fold_scores: list[list[float]]

    def to_dict(self) -> dict:
        return {"selected": self.features, "mean_mi": self.scores, "fold_mi": self.fold_scores}


def select_mi(data: BinaryDataset, k: int, folds: int = 5, seed: int = 42) -> MiSelection:
    """Top-k features by mutual information averaged over stratified folds."""
    _check_k(k, data.d)
    parts = stratified_folds(data.y, folds, derive_seed(seed, 11))
    fold_scores = [
        [mutual_information(data.X[rows, j], data.y[rows]) for j in range(data.d)] for rows in parts
    ]
    mean = np.mean(np.asarray(fold_scores), axis=0)
    # stable sort on -mean keeps ascending index among ties
    order = np.argsort(-mean, kind="stable")[:k]
    return MiSelection(
        [data.feature_names[j] for j in order],
        {nm: float(s) for nm, s in zip(data.feature_names, mean)},
        fold_scores,
    )


# ---------------------------------------------------------------------------
# genetic algorithm wrapper
# ---------------------------------------------------------------------------

def cv_logistic_accuracy(data: BinaryDataset, cols, folds: list[np.ndarray], cfg: LearnerConfig | None = None) -> float:
    """Mean held-out accuracy of standardized logistic regression over ``folds``."""
    cfg = cfg or LearnerConfig(kind="logistic")
    X = data.X[:, list(cols)]
    accs = []
    for i, test_rows in enumerate(folds):
        train_rows = np.concatenate([f for j, f in enumerate(folds) if j != i])
        Xtr, Xte, _, _ = standardize(X[train_rows], X[test_rows])
        model = train_logistic(Xtr, data.y[train_rows], cfg)
        accs.append(float(np.mean(predict(model, Xte) == data.y[test_rows])))
    return float(np.mean(accs))


@dataclass
class GaResult:
    features: list[str]
    indices: list[int]
    fitness: float
    history: list[list[tuple[list[int], float]]]
    n_fits: int
    cache: dict[tuple[int, ...], float] = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "selected": self.features,
            "fitness": self.fitness,
            "n_fitness_evaluations": self.n_fits,
            "best_per_generation": [max(f for _, f in gen) for gen in self.history],
        }


def _repair(genes: list[int], k: int, d: int, rng: np.random.Generator) -> list[int]:
    out: list[int] = []
    for g in genes:
        if g not in out:
            out.append(g)
    if len(out) < k:
        unused = np.setdiff1d(np.arange(d), out)
        out.extend(int(g) for g in rng.choice(unused, k - len(out), replace=False))
    return out[:k]


def ga_select(
    data: BinaryDataset,
    k: int = 5,
    population: int = 10,
    generations: int = 5,
    seed: int = 42,
    mutation_rate: float = 0.1,
    cv_folds: int = 3,
    fitness: Callable[[tuple[int, ...]], float] | None = None,
) -> GaResult:
    """Evolve size-k feature subsets and return the fittest one ever seen.

    Each generation draws parents by size-2 tournaments, takes the first
    ceil(k/2) genes of one parent and the tail of the other, repairs
    duplicates with random unused features, and mutates each child with
    probability ``mutation_rate`` by swapping one member for a non-member.
    Default fitness is 3-fold stratified CV accuracy of logistic regression;
    each distinct subset is trained at most once.
    """
    d = data.d
    _check_k(k, d)
    if population < 2:
        raise DataError("population must be >= 2")
    rng = np.random.default_rng(derive_seed(seed, 21))
    if fitness is None:
        folds = stratified_folds(data.y, cv_folds, derive_seed(seed, 22))

        def fitness(cols: tuple[int, ...]) -> float:
            return cv_logistic_accuracy(data, cols, folds)

    cache: dict[tuple[int, ...], float] = {}
    n_fits = 0

    def evaluate(ind: list[int]) -> float:
        nonlocal n_fits
        key = tuple(sorted(ind))
        if key not in cache:
            n_fits += 1
            try:
                cache[key] = float(fitness(key))
            except (TailselError, np.linalg.LinAlgError, ValueError) as exc:
                log.warning("GA fitness failed for %s: %s", key, exc)
                cache[key] = -math.inf
        return cache[key]

    pop = [[int(g) for g in rng.choice(d, k, replace=False)] for _ in range(population)]
    fit = [evaluate(ind) for ind in pop]
    history = [list(zip([list(p) for p in pop], fit))]
    best_i = int(np.argmax(fit))
    best, best_fit = list(pop[best_i]), fit[best_i]
    head = math.ceil(k / 2)

    def tournament() -> list[int]:
        i, j = rng.choice(population, 2, replace=False)
        return pop[i] if fit[i] >= fit[j] else pop[j]

    for _ in range(generations):
        children = []
        for _ in range(population):
            p1, p2 = tournament(), tournament()
            child = _repair(p1[:head] + p2[head:], k, d, rng)
            if rng.random() < mutation_rate:
                unused = np.setdiff1d(np.arange(d), child)
                if unused.size:
                    child[int(rng.integers(k))] = int(rng.choice(unused))
            children.append(child)
        pop = children
        fit = [evaluate(ind) for ind in pop]
        history.append(list(zip([list(p) for p in pop], fit)))
        gi = int(np.argmax(fit))
        if fit[gi] > best_fit:
            best, best_fit = list(pop[gi]), fit[gi]

    indices = sorted(best)
    return GaResult([data.feature_names[j] for j in indices], indices, best_fit, history, n_fits, cache)
