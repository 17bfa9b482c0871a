"""Dataset generation, persistence, the truth firewall, and batching."""

import numpy as np
import pytest

from openmix.config import ConfigError
from openmix.data import (
    DataFormatError,
    Dataset,
    HiddenTruth,
    LabeledSet,
    SplitSpec,
    UnlabeledSet,
    batch_iter,
    generate_blobs,
    load_dataset,
    load_split_spec,
    save_dataset,
)
from helpers import tiny_spec


def test_split_spec_defaults_validate():
    spec = SplitSpec()
    spec.validate()
    assert spec.c_l == 5 and spec.c_u == 5
    assert spec.per_class == 200
    assert spec.input_dim == 16
    assert spec.separation == 6.0 and spec.sigma == 1.0


@pytest.mark.parametrize(
    "field,value",
    [
        ("c_l", 0),
        ("c_u", 1),
        ("per_class", 0),
        ("input_dim", 9),
        ("separation", -1.0),
        ("sigma", -0.5),
    ],
)
def test_split_spec_rejects(field, value):
    spec = SplitSpec()
    setattr(spec, field, value)
    with pytest.raises(ConfigError):
        spec.validate()


def test_generate_blobs_shapes_and_labels():
    spec = tiny_spec()
    ds = generate_blobs(spec)
    n = spec.per_class
    assert ds.labeled.x.shape == (spec.c_l * n, spec.input_dim)
    assert ds.unlabeled.x.shape == (spec.c_u * n, spec.input_dim)
    assert ds.labeled.x.dtype == np.float64
    assert ds.labeled.y.dtype == np.int64
    assert ds.c_l == spec.c_l and ds.c_u == spec.c_u
    # class blocks in order, labeled classes 0..c_l-1
    assert np.array_equal(ds.labeled.y, np.repeat(np.arange(spec.c_l), n))
    truth = ds.truth.labels_for_eval()
    assert np.array_equal(truth, np.repeat(np.arange(spec.c_u), n))


def test_generate_blobs_center_geometry():
    # every pair of class centers is `separation` apart by construction
    spec = SplitSpec(c_l=2, c_u=3, per_class=400, input_dim=8, separation=6.0, sigma=0.5, seed=3)
    ds = generate_blobs(spec)
    truth = ds.truth.labels_for_eval()
    means = []
    for k in range(spec.c_l):
        means.append(ds.labeled.x[ds.labeled.y == k].mean(axis=0))
    for k in range(spec.c_u):
        means.append(ds.unlabeled.x[truth == k].mean(axis=0))
    means = np.stack(means)
    # sample means approach centers at rate sigma/sqrt(per_class) ~ 0.025
    tol = 0.2
    for i in range(len(means)):
        for j in range(i + 1, len(means)):
            d = np.linalg.norm(means[i] - means[j])
            assert abs(d - spec.separation) < tol, (i, j, d)


def test_generate_blobs_deterministic():
    a = generate_blobs(tiny_spec(seed=9))
    b = generate_blobs(tiny_spec(seed=9))
    c = generate_blobs(tiny_spec(seed=10))
    assert a == b
    assert a != c


def test_one_hot():
    ls = LabeledSet(np.zeros((3, 2)), np.array([0, 2, 1]), 3)
    want = np.array([[1.0, 0, 0], [0, 0, 1.0], [0, 1.0, 0]])
    assert np.array_equal(ls.one_hot(), want)


def test_labeled_set_rejects_bad_labels():
    with pytest.raises(ValueError):
        LabeledSet(np.zeros((2, 2)), np.array([0, 3]), 2)
    with pytest.raises(ValueError):
        LabeledSet(np.zeros((2, 2)), np.array([0]), 2)


def test_hidden_truth_counts_reads():
    truth = HiddenTruth(np.array([0, 1, 2]))
    assert truth.reads == 0
    labels = truth.labels_for_eval()
    assert truth.reads == 1
    truth.labels_for_eval()
    assert truth.reads == 2
    with pytest.raises(ValueError):
        labels[0] = 5  # read-only view


def test_dataset_cross_checks():
    with pytest.raises(ValueError, match="truth registry"):
        Dataset(
            LabeledSet(np.zeros((1, 2)), np.array([0]), 1),
            UnlabeledSet(np.zeros((2, 2)), 2),
            HiddenTruth(np.array([0])),
        )
    with pytest.raises(ValueError, match="input_dim"):
        Dataset(
            LabeledSet(np.zeros((1, 2)), np.array([0]), 1),
            UnlabeledSet(np.zeros((2, 3)), 2),
            HiddenTruth(np.array([0, 1])),
        )


def test_save_load_roundtrip_identity(tmp_path):
    ds = generate_blobs(tiny_spec(seed=4))
    path = tmp_path / "ds.csv"
    reads_before = ds.truth.reads
    save_dataset(str(path), ds)
    assert ds.truth.reads == reads_before  # persistence is not an eval read
    back = load_dataset(str(path))
    assert back == ds  # float64 repr round-trips bitwise


def test_load_dataset_header_errors(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("nonsense,v1,4,1,2\n")
    with pytest.raises(DataFormatError, match="line 1"):
        load_dataset(str(path))
    path.write_text("")
    with pytest.raises(DataFormatError, match="line 1"):
        load_dataset(str(path))
    path.write_text("omx-dataset,v2,4,1,2\n")
    with pytest.raises(DataFormatError, match="line 1"):
        load_dataset(str(path))


def test_load_dataset_row_errors(tmp_path):
    path = tmp_path / "bad.csv"
    head = "omx-dataset,v1,2,1,2\n"

    path.write_text(head + "L,0,1.0\n")
    with pytest.raises(DataFormatError, match="line 2: expected 4 fields"):
        load_dataset(str(path))

    path.write_text(head + "L,0,1.0,2.0\nX,0,1.0,2.0\n")
    with pytest.raises(DataFormatError, match="line 3: row kind"):
        load_dataset(str(path))

    path.write_text(head + "L,1,1.0,2.0\n")
    with pytest.raises(DataFormatError, match="line 2: labeled class 1"):
        load_dataset(str(path))

    path.write_text(head + "U,2,1.0,2.0\n")
    with pytest.raises(DataFormatError, match="line 2: hidden class 2"):
        load_dataset(str(path))

    path.write_text(head + "U,0,1.0,nan\n")
    with pytest.raises(DataFormatError, match="line 2: non-finite"):
        load_dataset(str(path))

    path.write_text(head + "U,zero,1.0,2.0\n")
    with pytest.raises(DataFormatError, match="line 2: bad class index"):
        load_dataset(str(path))


def test_load_split_spec(tmp_path):
    path = tmp_path / "blob.spec"
    path.write_text("c_l = 2\nc_u = 2\nper_class = 3\ninput_dim = 4\n")
    spec = load_split_spec(str(path))
    assert spec.c_l == 2 and spec.per_class == 3
    path.write_text("c_u = 1\n")
    with pytest.raises(ConfigError):
        load_split_spec(str(path))


def test_batch_iter_partitions_exactly():
    ds = generate_blobs(tiny_spec())
    batches = list(batch_iter(ds.unlabeled, 7, seed=5, epoch=1))
    sizes = [len(b) for b in batches]
    assert sum(sizes) == len(ds.unlabeled)
    assert all(s == 7 for s in sizes[:-1])
    seen = np.sort(np.concatenate(batches))
    assert np.array_equal(seen, np.arange(len(ds.unlabeled)))


def test_batch_iter_seeded_and_epoch_varying():
    ds = generate_blobs(tiny_spec())
    a = np.concatenate(list(batch_iter(ds.unlabeled, 8, seed=5, epoch=2)))
    b = np.concatenate(list(batch_iter(ds.unlabeled, 8, seed=5, epoch=2)))
    c = np.concatenate(list(batch_iter(ds.unlabeled, 8, seed=5, epoch=3)))
    d = np.concatenate(list(batch_iter(ds.unlabeled, 8, seed=6, epoch=2)))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)
    with pytest.raises(ValueError):
        next(batch_iter(ds.unlabeled, 0, seed=0, epoch=1))
