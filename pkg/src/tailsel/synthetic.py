"""Synthetic datasets with planted structure, for tests, smoke runs and demos."""

from __future__ import annotations

import numpy as np
import pandas as pd

from tailsel.dataprep import BinaryDataset

CDC_FEATURES = [
    "HighBP", "HighChol", "CholCheck", "BMI", "Smoker", "Stroke", "HeartDiseaseorAttack",
    "PhysActivity", "Fruits", "Veggies", "HvyAlcoholConsump", "AnyHealthcare", "NoDocbcCost",
    "GenHlth", "MentHlth", "PhysHlth", "DiffWalk", "Sex", "Age", "Education", "Income",
]


def planted_copy(n: int = 1000, d: int = 5, seed: int = 0, prevalence: float = 0.5) -> BinaryDataset:
    """Feature 0 is the target plus tiny noise; the rest are independent uniforms."""
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < prevalence).astype(np.int64)
    X = rng.random((n, d))
    X[:, 0] = y + 1e-3 * rng.random(n)
    return BinaryDataset([f"f{j}" for j in range(d)], X, y)


def planted_majority(n: int = 2000, d: int = 10, seed: int = 0) -> BinaryDataset:
    """Gaussian features; y is the majority vote of the signs of features 0-4."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = ((X[:, :5] > 0).sum(axis=1) >= 3).astype(np.int64)
    return BinaryDataset([f"f{j}" for j in range(d)], X, y)


def cdc_like_frame(n: int = 1000, seed: int = 0) -> pd.DataFrame:
    """Integer-coded table with the CDC column names and a 0/1/2 ``Diabetes_012`` target.

    Risk rises with GenHlth, HighBP, BMI, DiffWalk, HighChol and Age; the
    other columns are noise. Marginals only loosely resemble the real survey.
    """
    rng = np.random.default_rng(seed)
    cols = {
        "HighBP": rng.random(n) < 0.43,
        "HighChol": rng.random(n) < 0.42,
        "CholCheck": rng.random(n) < 0.96,
        "BMI": np.clip(np.round(rng.lognormal(np.log(27.5), 0.22, n)), 12, 98),
        "Smoker": rng.random(n) < 0.44,
        "Stroke": rng.random(n) < 0.04,
        "HeartDiseaseorAttack": rng.random(n) < 0.09,
        "PhysActivity": rng.random(n) < 0.76,
        "Fruits": rng.random(n) < 0.63,
        "Veggies": rng.random(n) < 0.81,
        "HvyAlcoholConsump": rng.random(n) < 0.06,
        "AnyHealthcare": rng.random(n) < 0.95,
        "NoDocbcCost": rng.random(n) < 0.08,
        "GenHlth": rng.choice(np.arange(1, 6), n, p=[0.18, 0.35, 0.30, 0.12, 0.05]),
        "MentHlth": np.where(rng.random(n) < 0.7, 0, rng.integers(1, 31, n)),
        "PhysHlth": np.where(rng.random(n) < 0.63, 0, rng.integers(1, 31, n)),
        "DiffWalk": rng.random(n) < 0.17,
        "Sex": rng.random(n) < 0.44,
        "Age": rng.integers(1, 14, n),
        "Education": rng.integers(1, 7, n),
        "Income": rng.integers(1, 9, n),
    }
    frame = pd.DataFrame({k: np.asarray(v).astype(np.int64) for k, v in cols.items()})[CDC_FEATURES]
    z = (
        -6.2
        + 0.55 * frame["GenHlth"]
        + 0.75 * frame["HighBP"]
        + 0.06 * frame["BMI"]
        + 0.35 * frame["DiffWalk"]
        + 0.55 * frame["HighChol"]
        + 0.12 * frame["Age"]
    )
    p = 1.0 / (1.0 + np.exp(-z.to_numpy(dtype=float)))
    diabetic = rng.random(n) < p
    frame["Diabetes_012"] = np.where(diabetic, np.where(rng.random(n) < 0.85, 2, 1), 0)
    return frame
