import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tailsel.dataprep import (
    BinaryDataset,
    RawDataset,
    binarize_target,
    load_csv,
    pseudo_matrix,
    pseudo_observations,
    standardize,
    stratified_folds,
    stratified_split,
)
from tailsel.errors import DataError


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


# ---------------------------------------------------------------- load_csv

def test_minimal_parse(tmp_path):
    raw = load_csv(write(tmp_path, "a,b,Diabetes_012\n1,2,0\n3,4,1\n5,7,2\n"), "Diabetes_012")
    assert raw.feature_names == ["a", "b"] and raw.n == 3
    assert raw.target_raw.tolist() == [0, 1, 2]


def test_default_target_resolution(tmp_path):
    raw = load_csv(write(tmp_path, "a,Diabetes_012\n1,0\n2,2\n"))
    assert raw.target_name == "Diabetes_012"
    raw = load_csv(write(tmp_path, "a,Diabetes_binary,Diabetes_012\n1,0,0\n2,1,2\n", "e.csv"))
    assert raw.target_name == "Diabetes_binary" and raw.feature_names == ["a", "Diabetes_012"]


def test_missing_target(tmp_path):
    with pytest.raises(DataError, match="target column"):
        load_csv(write(tmp_path, "a,b\n1,2\n3,4\n"), "Diabetes_012")


def test_missing_file(tmp_path):
    with pytest.raises(DataError, match="nope.csv"):
        load_csv(tmp_path / "nope.csv")


def test_non_numeric_cell_located(tmp_path):
    with pytest.raises(DataError, match=r"line 3, column 'b'"):
        load_csv(write(tmp_path, "a,b,y\n1,2,0\n3,x,1\n"), "y")


def test_missing_cell_located(tmp_path):
    with pytest.raises(DataError, match=r"missing value at line 2, column 'a'"):
        load_csv(write(tmp_path, "a,b,y\n,2,0\n3,4,1\n"), "y")


def test_constant_target_rejected(tmp_path):
    with pytest.raises(DataError, match="constant"):
        load_csv(write(tmp_path, "a,y\n1,0\n2,0\n"), "y")


def test_constant_feature_rejected(tmp_path):
    with pytest.raises(DataError, match="constant feature"):
        load_csv(write(tmp_path, "a,b,y\n1,5,0\n2,5,1\n"), "y")


def test_fractional_target_rejected(tmp_path):
    with pytest.raises(DataError, match="integer"):
        load_csv(write(tmp_path, "a,y\n1,0.5\n2,1\n"), "y")


# ---------------------------------------------------------------- binarize

def _raw(target):
    t = np.asarray(target)
    return RawDataset(["a"], np.arange(t.size, dtype=float)[:, None], t)


def test_binarize_examples():
    assert binarize_target(_raw([0, 1, 2, 0])).y.tolist() == [0, 1, 1, 0]
    assert binarize_target(_raw([2, 2])).y.tolist() == [1, 1]


def test_binarize_all_zero_fails_at_split():
    data = binarize_target(_raw([0, 0, 0, 0]))
    with pytest.raises(DataError, match="both classes"):
        stratified_split(data)


def test_binarize_unexpected_label():
    with pytest.raises(DataError, match="unexpected"):
        binarize_target(_raw([0, 3]))


# ---------------------------------------------------------------- pseudo-observations

def test_pseudo_examples():
    np.testing.assert_allclose(pseudo_observations([10, 20, 30]), [0.25, 0.5, 0.75])
    np.testing.assert_allclose(pseudo_observations([5, 5, 9]), [0.375, 0.375, 0.75])
    np.testing.assert_allclose(pseudo_observations([0, 0, 0, 1]), [0.4, 0.4, 0.4, 0.8])


@settings(max_examples=100, deadline=None)
@given(arrays(np.int64, st.integers(1, 200), elements=st.integers(-500, 500)))
def test_pseudo_properties(x):
    # integer inputs keep exp(x / 10) strictly increasing in floating point
    u = pseudo_observations(x)
    assert np.all((u > 0) & (u < 1))
    np.testing.assert_array_equal(pseudo_observations(np.exp(x / 10)), u)
    a, b = np.argmin(x), np.argmax(x)
    if x[a] < x[b]:
        assert u[a] < u[b]
    # midranks sum to n(n+1)/2
    assert u.sum() * (x.size + 1) == pytest.approx(x.size * (x.size + 1) / 2)


def test_pseudo_matrix_shapes():
    data = BinaryDataset(["a", "b"], np.array([[1, 4], [2, 3], [3, 2.0]]), np.array([0, 1, 1]))
    pm = pseudo_matrix(data)
    assert pm.U.shape == (3, 2)
    np.testing.assert_allclose(pm.v, [0.25, 0.625, 0.625])


# ---------------------------------------------------------------- split

def test_split_example():
    y = np.array([1] * 14 + [0] * 86)
    s = stratified_split(y, 0.2, seed=42)
    assert s.test.size == 20
    assert 2 <= y[s.test].sum() <= 3
    s2 = stratified_split(y, 0.2, seed=42)
    assert np.array_equal(s.train, s2.train) and np.array_equal(s.test, s2.test)


def test_split_rejects_degenerate_fraction():
    y = np.array([0, 0, 1, 1])
    for frac in (0.0, 1.0):
        with pytest.raises(DataError):
            stratified_split(y, frac)


def test_split_needs_two_rows_per_class():
    with pytest.raises(DataError):
        stratified_split(np.array([0, 0, 0, 1]))


def test_split_class_ratio_many_seeds():
    rng = np.random.default_rng(0)
    y = (rng.random(10_000) < 0.14).astype(int)
    p = y.mean()
    for seed in range(200):
        s = stratified_split(y, 0.2, seed)
        assert np.array_equal(np.sort(np.concatenate([s.train, s.test])), np.arange(y.size))
        assert abs(y[s.test].mean() - p) < 0.005
        assert abs(y[s.train].mean() - p) < 0.005
        for c in (0, 1):
            n_c = int((y == c).sum())
            assert abs(int((y[s.test] == c).sum()) - 0.2 * n_c) <= 1


def test_split_accepts_dataset_and_is_byte_stable(tmp_path):
    data = binarize_target(_raw([0, 1, 2, 0, 0, 2, 1, 0, 0, 0]))
    a = stratified_split(data, seed=5).to_dict()
    b = stratified_split(data, seed=5).to_dict()
    assert repr(a) == repr(b)


def test_folds_partition():
    y = np.array([0] * 23 + [1] * 7)
    folds = stratified_folds(y, 3, seed=1)
    allrows = np.sort(np.concatenate(folds))
    assert np.array_equal(allrows, np.arange(30))
    assert all(1 <= y[f].sum() <= 3 for f in folds)


# ---------------------------------------------------------------- standardize

def test_standardize_examples():
    ztr, zte, m, s = standardize(np.array([[1.0], [2.0], [3.0]]), np.array([[2.0]]))
    np.testing.assert_allclose(ztr.ravel(), [-1.2247449, 0, 1.2247449], atol=1e-6)
    assert zte[0, 0] == 0.0


def test_standardize_zero_variance():
    with pytest.raises(DataError, match="zero-variance"):
        standardize(np.array([[1.0], [1.0]]), np.array([[1.0]]))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(3, 40), st.integers(1, 4)), elements=st.floats(-1e3, 1e3)))
def test_standardize_moments(X):
    if np.any(X.std(axis=0) < 1e-3):
        return
    z, _, _, _ = standardize(X, X[:1])
    np.testing.assert_allclose(z.mean(axis=0), 0, atol=1e-9)
    np.testing.assert_allclose(z.std(axis=0), 1, atol=1e-9)
