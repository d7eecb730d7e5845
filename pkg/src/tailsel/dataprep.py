"""CSV ingestion, target binarization, pseudo-observations, splitting, scaling."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from tailsel.copula_core import PseudoSample
from tailsel.errors import DataError

log = logging.getLogger(__name__)

DEFAULT_TARGET = "Diabetes_binary"
FALLBACK_TARGET = "Diabetes_012"


@dataclass
class RawDataset:
    feature_names: list[str]
    X: np.ndarray
    target_raw: np.ndarray
    target_name: str = "target"

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=float)
        self.target_raw = np.asarray(self.target_raw).astype(np.int64)
        if self.X.ndim != 2 or self.X.shape[1] != len(self.feature_names):
            raise DataError("X must be 2-D with one column per feature name")
        if self.X.shape[0] != self.target_raw.shape[0]:
            raise DataError("features and target have different row counts")
        if self.n == 0:
            raise DataError("dataset has no rows")

    @property
    def n(self) -> int:
        return int(self.X.shape[0])


@dataclass
class BinaryDataset:
    feature_names: list[str]
    X: np.ndarray
    y: np.ndarray
    target_name: str = "target"

    def __post_init__(self) -> None:
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y).astype(np.int64)
        self.feature_names = list(self.feature_names)
        if self.X.ndim != 2 or self.X.shape[1] != len(self.feature_names):
            raise DataError("X must be 2-D with one column per feature name")
        if self.X.shape[0] != self.y.shape[0]:
            raise DataError("features and target have different row counts")
        if not np.isin(self.y, (0, 1)).all():
            raise DataError("binary target must contain only 0 and 1")

    @property
    def n(self) -> int:
        return int(self.X.shape[0])

    @property
    def d(self) -> int:
        return int(self.X.shape[1])

    def feature_index(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise DataError(f"unknown feature {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        return self.X[:, self.feature_index(name)]

    def rows(self, idx) -> "BinaryDataset":
        idx = np.asarray(idx)
        return BinaryDataset(self.feature_names, self.X[idx], self.y[idx], self.target_name)

    def select(self, names) -> "BinaryDataset":
        cols = [self.feature_index(nm) for nm in names]
        return BinaryDataset([self.feature_names[c] for c in cols], self.X[:, cols], self.y, self.target_name)


def _first_bad_cell(frame: pd.DataFrame, mask: pd.DataFrame) -> tuple[int, str]:
    col = next(c for c in frame.columns if mask[c].any())
    row = int(np.flatnonzero(mask[col].to_numpy())[0])
    # header is line 1
    return row + 2, col


def load_csv(path, target_name: str | None = None) -> RawDataset:
    """Read a numeric CSV with a header row.

    With ``target_name=None`` the target is ``Diabetes_binary`` if present,
    otherwise ``Diabetes_012``.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"input file not found: {path}")
    frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    frame.columns = [c.strip() for c in frame.columns]
    if target_name is None:
        target_name = DEFAULT_TARGET if DEFAULT_TARGET in frame.columns else FALLBACK_TARGET
    if target_name not in frame.columns:
        raise DataError(f"target column {target_name!r} not found in {path}")
    if frame.empty:
        raise DataError(f"{path} has no data rows")

    stripped = frame.apply(lambda s: s.str.strip())
    missing = stripped == ""
    if missing.to_numpy().any():
        line, col = _first_bad_cell(stripped, missing)
        raise DataError(f"missing value at line {line}, column {col!r}")
    numeric = stripped.apply(pd.to_numeric, errors="coerce")
    bad = numeric.isna()
    if bad.to_numpy().any():
        line, col = _first_bad_cell(stripped, bad)
        raise DataError(f"non-numeric value {stripped.at[line - 2, col]!r} at line {line}, column {col!r}")

    target = numeric[target_name].to_numpy(dtype=float)
    if np.any(target != np.round(target)):
        raise DataError(f"target column {target_name!r} must hold integer labels")
    if np.unique(target).size < 2:
        raise DataError(f"target column {target_name!r} is constant")
    feature_names = [c for c in numeric.columns if c != target_name]
    X = numeric[feature_names].to_numpy(dtype=float)
    constant = [nm for j, nm in enumerate(feature_names) if np.all(X[:, j] == X[0, j])]
    if constant:
        raise DataError(f"constant feature column(s): {', '.join(constant)}")
    log.info("loaded %s: n=%d, %d features, target=%s", path, X.shape[0], len(feature_names), target_name)
    return RawDataset(feature_names, X, target.astype(np.int64), target_name)


def binarize_target(raw: RawDataset) -> BinaryDataset:
    """Map label 0 to 0 and labels 1, 2 (prediabetes, diabetes) to 1."""
    labels = raw.target_raw
    unexpected = np.setdiff1d(np.unique(labels), (0, 1, 2))
    if unexpected.size:
        raise DataError(f"unexpected target label(s): {unexpected.tolist()}")
    return BinaryDataset(raw.feature_names, raw.X, (labels != 0).astype(np.int64), raw.target_name)


def pseudo_observations(column) -> np.ndarray:
    """Midrank / (n + 1), strictly inside (0, 1)."""
    column = np.asarray(column, dtype=float).ravel()
    if column.size == 0:
        raise DataError("pseudo-observations need at least one value")
    return rankdata(column, method="average") / (column.size + 1)


@dataclass
class PseudoMatrix:
    feature_names: list[str]
    U: np.ndarray
    v: np.ndarray

    def sample(self, j: int) -> PseudoSample:
        return PseudoSample(self.U[:, j], self.v)


def pseudo_matrix(data: BinaryDataset) -> PseudoMatrix:
    U = np.column_stack([pseudo_observations(data.X[:, j]) for j in range(data.d)])
    return PseudoMatrix(list(data.feature_names), U, pseudo_observations(data.y))


@dataclass
class SplitIndices:
    train: np.ndarray
    test: np.ndarray
    seed: int
    test_fraction: float = 0.2

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "test_fraction": self.test_fraction,
            "train": self.train.tolist(),
            "test": self.test.tolist(),
        }


def _class_rows(y: np.ndarray) -> list[np.ndarray]:
    y = np.asarray(y)
    classes = np.unique(y)
    if classes.size < 2:
        raise DataError("stratification needs both classes present")
    return [np.flatnonzero(y == c) for c in classes]


def stratified_split(y, test_fraction: float = 0.2, seed: int = 42) -> SplitIndices:
    """Shuffle each class with ``seed`` and hold out ``test_fraction`` of it.

    Accepts a label vector or a BinaryDataset.
    """
    if isinstance(y, BinaryDataset):
        y = y.y
    if not 0.0 < test_fraction < 1.0:
        raise DataError("test_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for rows in _class_rows(y):
        if rows.size < 2:
            raise DataError("each class needs at least two rows to split")
        rows = rng.permutation(rows)
        n_test = min(max(int(round(test_fraction * rows.size)), 1), rows.size - 1)
        test.append(rows[:n_test])
        train.append(rows[n_test:])
    return SplitIndices(np.sort(np.concatenate(train)), np.sort(np.concatenate(test)), seed, test_fraction)


def stratified_folds(y, n_folds: int, seed: int) -> list[np.ndarray]:
    """Partition row indices into ``n_folds`` class-balanced folds."""
    if n_folds < 2:
        raise DataError("need at least two folds")
    rng = np.random.default_rng(seed)
    folds: list[list[np.ndarray]] = [[] for _ in range(n_folds)]
    offset = 0
    for rows in _class_rows(y):
        rows = rng.permutation(rows)
        # rotate so the remainder rows of each class land in different folds
        for i, part in enumerate(np.array_split(rows, n_folds)):
            folds[(i + offset) % n_folds].append(part)
        offset += rows.size % n_folds
    return [np.sort(np.concatenate(f)) for f in folds]


def standardize(train, test):
    """Z-score with train means and population (ddof=0) standard deviations."""
    train = np.asarray(train, dtype=float)
    test = np.asarray(test, dtype=float)
    means = train.mean(axis=0)
    stds = train.std(axis=0)
    if np.any(stds == 0):
        bad = np.flatnonzero(np.atleast_1d(stds) == 0).tolist()
        raise DataError(f"zero-variance column(s) at index {bad}")
    return (train - means) / stds, (test - means) / stds, means, stds
