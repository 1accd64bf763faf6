"""Tests for CSV loading, dataset validation, standardization and synthesis."""

import numpy as np
import pytest

from fsbench.dataio import (
    CsvFormatError,
    Dataset,
    load_csv,
    standardize,
    synth_blobs,
    write_csv,
)


def test_round_trip_with_labels(tmp_path):
    rng = np.random.default_rng(3)
    ds = Dataset(name="rt", X=rng.normal(size=(12, 4)), y=rng.integers(0, 3, size=12))
    path = tmp_path / "rt.csv"
    write_csv(ds, path)
    back = load_csv(path, label_column=-1)
    np.testing.assert_array_equal(back.X, ds.X)
    np.testing.assert_array_equal(back.y, ds.y)
    assert back.name == "rt"


def test_round_trip_without_labels(tmp_path):
    rng = np.random.default_rng(4)
    ds = Dataset(name="nolab", X=rng.normal(size=(5, 3)))
    path = tmp_path / "nolab.csv"
    write_csv(ds, path)
    back = load_csv(path)
    np.testing.assert_array_equal(back.X, ds.X)
    assert back.y is None


def test_load_header_and_named_label_column(tmp_path):
    path = tmp_path / "named.csv"
    path.write_text("a,b,target\n1.0,2.0,0\n3.0,4.0,1\n5.0,6.0,0\n")
    ds = load_csv(path, label_column="target", has_header=True)
    assert ds.d == 2
    np.testing.assert_array_equal(ds.y, [0, 1, 0])
    np.testing.assert_array_equal(ds.X[:, 0], [1.0, 3.0, 5.0])


def test_load_label_column_by_index(tmp_path):
    path = tmp_path / "idx.csv"
    path.write_text("0,1.0,2.0\n1,3.0,4.0\n")
    ds = load_csv(path, label_column=0)
    np.testing.assert_array_equal(ds.y, [0, 1])
    np.testing.assert_array_equal(ds.X, [[1.0, 2.0], [3.0, 4.0]])


def test_load_negative_label_column(tmp_path):
    path = tmp_path / "neg.csv"
    path.write_text("1.0,2.0,1\n3.0,4.0,0\n")
    ds = load_csv(path, label_column=-1)
    np.testing.assert_array_equal(ds.y, [1, 0])
    assert ds.d == 2


def test_named_label_requires_header(tmp_path):
    path = tmp_path / "h.csv"
    path.write_text("1.0,2.0\n3.0,4.0\n")
    with pytest.raises(CsvFormatError):
        load_csv(path, label_column="target")


def test_ragged_row_names_row_number(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("1.0,2.0\n3.0\n5.0,6.0\n")
    with pytest.raises(CsvFormatError) as err:
        load_csv(path)
    assert "row 2" in str(err.value)


def test_non_numeric_cell_names_row_and_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1.0,2.0\n3.0,oops\n")
    with pytest.raises(CsvFormatError) as err:
        load_csv(path)
    message = str(err.value)
    assert "row 2" in message and "column 2" in message


def test_empty_file_rejected(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(CsvFormatError):
        load_csv(path)


def test_labels_remapped_to_contiguous_ints():
    X = np.zeros((4, 2))
    ds = Dataset(name="remap", X=X, y=np.array([7, 3, 7, 9]))
    assert ds.n_classes == 3
    np.testing.assert_array_equal(ds.y, [1, 0, 1, 2])


def test_dataset_rejects_non_finite():
    X = np.array([[1.0, np.nan], [2.0, 3.0]])
    with pytest.raises(ValueError):
        Dataset(name="nan", X=X)
    X2 = np.array([[1.0, np.inf], [2.0, 3.0]])
    with pytest.raises(ValueError):
        Dataset(name="inf", X=X2)


def test_dataset_requires_two_rows():
    with pytest.raises(ValueError):
        Dataset(name="tiny", X=np.zeros((1, 3)))


def test_dataset_arrays_are_read_only():
    ds = Dataset(name="ro", X=np.zeros((3, 2)), y=np.array([0, 1, 0]))
    with pytest.raises(ValueError):
        ds.X[0, 0] = 1.0
    with pytest.raises(ValueError):
        ds.y[0] = 1


def test_require_labels():
    ds = Dataset(name="u", X=np.zeros((3, 2)))
    with pytest.raises(ValueError):
        ds.require_labels()


def test_standardize_moments():
    rng = np.random.default_rng(11)
    ds = Dataset(name="std", X=rng.normal(5.0, 3.0, size=(40, 6)))
    out, params = standardize(ds)
    np.testing.assert_allclose(out.X.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(out.X.std(axis=0), 1.0, atol=1e-12)
    np.testing.assert_allclose(params.mean, ds.X.mean(axis=0))


def test_standardize_constant_column_becomes_zero():
    X = np.column_stack([np.full(10, 4.2), np.arange(10.0)])
    ds = Dataset(name="const", X=X)
    out, params = standardize(ds)
    np.testing.assert_array_equal(out.X[:, 0], 0.0)
    assert params.std[0] == 1.0


def test_standardize_idempotent():
    rng = np.random.default_rng(12)
    ds = Dataset(name="idem", X=rng.normal(size=(30, 4)))
    once, _ = standardize(ds)
    twice, _ = standardize(once)
    np.testing.assert_allclose(twice.X, once.X, atol=1e-12)


def test_synth_blobs_shapes_and_labels():
    ds = synth_blobs(20, 7, 3, 2, seed=0)
    assert ds.X.shape == (20, 7)
    np.testing.assert_array_equal(ds.y, np.arange(20) % 3)
    assert ds.n_classes == 3


def test_synth_blobs_deterministic():
    a = synth_blobs(15, 5, 2, 2, seed=9)
    b = synth_blobs(15, 5, 2, 2, seed=9)
    c = synth_blobs(15, 5, 2, 2, seed=10)
    np.testing.assert_array_equal(a.X, b.X)
    assert not np.array_equal(a.X, c.X)


def test_synth_blobs_informative_features_separate_classes():
    ds = synth_blobs(300, 10, 3, 3, seed=2)
    class_means = np.stack([ds.X[ds.y == c].mean(axis=0) for c in range(3)])
    spread = class_means.var(axis=0)
    # between-class spread concentrates on the informative columns
    assert spread[:3].min() > spread[3:].max()


def test_write_csv_repr_round_trip(tmp_path):
    X = np.array([[0.1 + 0.2, 1e-17], [np.pi, -3.5]])
    ds = Dataset(name="exact", X=X)
    path = tmp_path / "exact.csv"
    write_csv(ds, path)
    back = load_csv(path)
    np.testing.assert_array_equal(back.X, X)
