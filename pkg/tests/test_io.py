import numpy as np
import pytest

from dpcp import io as dio
from dpcp.synth import SphericalModelSpec, sample_spherical


@pytest.fixture
def labeled_dataset():
    data, _ = sample_spherical(SphericalModelSpec(D=4, d=2, N=12, M=7, seed=42))
    return data


def test_csv_roundtrip(tmp_path, labeled_dataset):
    path = tmp_path / "ds.csv"
    dio.write_csv(labeled_dataset, path)
    head = path.read_text().splitlines()
    assert head[0] == "dim,label"
    assert head[1].rsplit(",", 1)[1] in ("in", "out")
    back = dio.read_csv(path)
    assert np.array_equal(back.columns, labeled_dataset.columns)
    assert np.array_equal(back.inlier_mask, labeled_dataset.inlier_mask)


def test_csv_unlabeled_roundtrip(tmp_path):
    from dpcp.core import Dataset
    ds = Dataset(np.eye(3))
    path = tmp_path / "u.csv"
    dio.write_csv(ds, path)
    assert all(line.endswith(",unk") for line in path.read_text().splitlines()[1:])
    back = dio.read_csv(path)
    assert back.inlier_mask is None
    assert np.array_equal(back.columns, ds.columns)


def test_csv_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("nope\n")
    with pytest.raises(ValueError, match="header"):
        dio.read_csv(bad)
    bad.write_text("dim,label\n1.0,in\n")
    with pytest.raises(ValueError, match="coordinates"):
        dio.read_csv(bad)
    bad.write_text("dim,label\n1.0,0.0,banana\n")
    with pytest.raises(ValueError, match="label"):
        dio.read_csv(bad)


def test_binary_roundtrip(tmp_path, labeled_dataset):
    path = tmp_path / "ds.dpcp"
    dio.write_binary(labeled_dataset, path)
    raw = path.read_bytes()
    assert raw[:4] == b"DPCP"
    back = dio.read_binary(path)
    assert np.array_equal(back.columns, labeled_dataset.columns)
    assert np.array_equal(back.inlier_mask, labeled_dataset.inlier_mask)


def test_binary_truncation_detected(tmp_path, labeled_dataset):
    path = tmp_path / "ds.dpcp"
    dio.write_binary(labeled_dataset, path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-3])
    with pytest.raises(ValueError, match="bytes"):
        dio.read_binary(path)
    path.write_bytes(b"NOPE" + raw[4:])
    with pytest.raises(ValueError, match="container"):
        dio.read_binary(path)


def test_dispatch_by_extension(tmp_path, labeled_dataset):
    csv_path = tmp_path / "a.csv"
    bin_path = tmp_path / "a.dpcp"
    dio.write_dataset(labeled_dataset, csv_path)
    dio.write_dataset(labeled_dataset, bin_path)
    a = dio.read_dataset(csv_path)
    b = dio.read_dataset(bin_path)
    assert np.array_equal(a.columns, b.columns)
