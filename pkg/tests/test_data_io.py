import bz2
import gzip
import io
import os
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from inexact_pg.data_io import (
    LibsvmFormatError,
    load_libsvm,
    map_labels,
    parse_libsvm,
    read_libsvm,
    scale_features,
    to_dataset,
    write_libsvm,
)
from inexact_pg.losses import Dataset


def parse(text):
    return parse_libsvm(io.StringIO(text))


def test_parse_single_line():
    raw = parse("+1 1:0.5 3:-2\n")
    assert raw.labels == [1.0]
    idx, val = raw.rows[0]
    assert idx.tolist() == [1, 3] and val.tolist() == [0.5, -2.0]
    assert raw.n_max == 3
    data = to_dataset(raw)
    assert data.n_features == 3
    np.testing.assert_array_equal(data.features.toarray(), [[0.5, 0.0, -2.0]])
    assert to_dataset(raw, n_features=5).n_features == 5


def test_parse_comments_blank_lines_and_label_only_rows():
    raw = parse("# header\n\n-1 2:1 # trailing\n+1\n   \n")
    assert raw.labels == [-1.0, 1.0]
    assert raw.rows[1][0].size == 0


def test_empty_input():
    raw = parse("")
    assert raw.rows == []
    with pytest.raises(ValueError):
        to_dataset(raw)


@pytest.mark.parametrize(
    "text, lineno",
    [
        ("+1 1:0.5\n-1 2-3\n", 2),
        ("+1 1:abc\n", 1),
        ("x 1:1\n", 1),
        ("+1 0:1\n", 1),
        ("+1 1:1\n+1 3:1 2:1\n", 2),
        ("+1 2:1 2:1\n", 1),
    ],
)
def test_malformed_lines_report_line_number(text, lineno):
    with pytest.raises(LibsvmFormatError, match=f"line {lineno}"):
        parse(text)


def test_index_beyond_override():
    with pytest.raises(ValueError):
        to_dataset(parse("+1 4:1\n"), n_features=3)


def test_label_mapping():
    np.testing.assert_array_equal(map_labels([0, 1, 1, 0]), [-1, 1, 1, -1])
    np.testing.assert_array_equal(map_labels([-1, 1]), [-1, 1])
    with pytest.warns(UserWarning):
        np.testing.assert_array_equal(map_labels([2, 4, 2]), [-1, 1, -1])
    with pytest.raises(ValueError):
        map_labels([1, 2, 3])
    with pytest.raises(ValueError):
        map_labels([3, 3])


def test_scale_maxabs_examples():
    X = sp.csr_matrix(np.array([[2.0, 0.0], [-4.0, 0.0]]))
    out = scale_features(Dataset(X, [1, -1]), "maxabs")
    np.testing.assert_array_equal(out.features.toarray(), [[0.5, 0.0], [-1.0, 0.0]])
    assert scale_features(Dataset(X, [1, -1]), "none").features is not None


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_scale_maxabs_properties(seed):
    rng = np.random.default_rng(seed)
    X = sp.random(15, 8, density=0.3, format="csr", random_state=rng, data_rvs=lambda k: 10 * rng.standard_normal(k))
    out = scale_features(Dataset(X, rng.choice([-1.0, 1.0], 15)), "maxabs").features.toarray()
    dense = X.toarray()
    assert np.all(np.abs(out) <= 1.0)
    for c in range(8):
        if np.any(dense[:, c] != 0):
            assert np.max(np.abs(out[:, c])) == pytest.approx(1.0, rel=1e-15)
    np.testing.assert_array_equal(out != 0, dense != 0)


def test_scale_standardize():
    rng = np.random.default_rng(0)
    X = sp.csr_matrix(rng.standard_normal((20, 4)) * [1, 5, 0.1, 3] + [0, 2, -1, 7])
    out = scale_features(Dataset(X, np.ones(20)), "standardize").features.toarray()
    np.testing.assert_allclose(out.mean(axis=0), 0, atol=1e-14)
    np.testing.assert_allclose(out.std(axis=0), 1, rtol=1e-12)
    with pytest.raises(ValueError):
        scale_features(Dataset(X, np.ones(20)), "unit")


def test_standardize_size_guard(monkeypatch):
    import inexact_pg.data_io as data_io

    monkeypatch.setattr(data_io, "STANDARDIZE_MAX_ENTRIES", 10)
    X = sp.csr_matrix(np.ones((4, 4)))
    with pytest.raises(ValueError):
        scale_features(Dataset(X, np.ones(4)), "standardize")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_round_trip(seed):
    rng = np.random.default_rng(seed)
    X = sp.random(12, 9, density=0.4, format="csr", random_state=rng, data_rvs=rng.standard_normal)
    data = Dataset(X, rng.choice([-1.0, 1.0], 12))
    buf = io.StringIO()
    write_libsvm(data, buf)
    back = to_dataset(parse_libsvm(io.StringIO(buf.getvalue())), n_features=9)
    assert (back.features != data.features).nnz == 0
    np.testing.assert_array_equal(back.labels, data.labels)


def test_gzip_and_plain_files(tmp_path):
    text = "+1 1:2 2:4\n-1 2:-8\n"
    (tmp_path / "d.txt").write_text(text)
    with gzip.open(tmp_path / "d.gz", "wt") as fh:
        fh.write(text)
    with bz2.open(tmp_path / "d.bz2", "wt") as fh:
        fh.write(text)
    a = read_libsvm(tmp_path / "d.txt")
    b = read_libsvm(tmp_path / "d.gz")
    c = read_libsvm(tmp_path / "d.bz2")
    assert a.labels == b.labels == c.labels and a.path.endswith("d.txt")
    data = load_libsvm(tmp_path / "d.gz")
    np.testing.assert_array_equal(data.features.toarray(), [[1.0, 0.5], [0.0, -1.0]])


def _data_file(name):
    base = os.environ.get("INEXACT_PG_DATA")
    if not base:
        return None
    for cand in (name, name + ".txt", name + ".gz"):
        p = Path(base) / cand
        if p.exists():
            return p
    return None


def test_a9a_shape_when_available():
    path = _data_file("a9a")
    if path is None:
        pytest.skip("a9a not found under $INEXACT_PG_DATA")
    data = load_libsvm(path, n_features=123)
    assert (data.n_samples, data.n_features) == (32561, 123)
