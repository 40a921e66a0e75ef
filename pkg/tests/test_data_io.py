"""Binary parsers, splits, CSV round-trips, and the bundled fixture."""

import gzip
import struct

import numpy as np
import pytest

from relae.data import (
    DataError,
    Dataset,
    fixture_paths,
    kfold_splits,
    load_cifar10,
    load_csv,
    load_fixture,
    load_mnist,
    make_synthetic_digits,
    save_csv,
    subset,
    write_idx_files,
    FIXTURE_SEED,
    FIXTURE_SIZE,
)
from relae.numeric import Rng


def make_idx_pair(tmp_path, pixels, labels, rows=2, cols=2, gz=False):
    """Build IDX files directly with struct, independent of the writer."""
    n = len(labels)
    img = struct.pack(">IIII", 0x00000803, n, rows, cols) + bytes(pixels)
    lbl = struct.pack(">II", 0x00000801, n) + bytes(labels)
    ip, lp = tmp_path / ("i.idx" + (".gz" if gz else "")), tmp_path / ("l.idx" + (".gz" if gz else ""))
    if gz:
        ip.write_bytes(gzip.compress(img))
        lp.write_bytes(gzip.compress(lbl))
    else:
        ip.write_bytes(img)
        lp.write_bytes(lbl)
    return ip, lp


class TestMnistParser:
    def test_parses_hand_packed_bytes(self, tmp_path):
        # 2 images of 2x2: pixel bytes chosen by hand
        pixels = [0, 255, 128, 64, 10, 20, 30, 40]
        ip, lp = make_idx_pair(tmp_path, pixels, [3, 7])
        ds = load_mnist(ip, lp)
        assert ds.features.shape == (2, 4)
        np.testing.assert_allclose(
            ds.features[0], np.array([0, 255, 128, 64]) / 255.0
        )
        np.testing.assert_allclose(
            ds.features[1], np.array([10, 20, 30, 40]) / 255.0
        )
        assert ds.labels.tolist() == [3, 7]

    def test_gzip_transparent(self, tmp_path):
        ip, lp = make_idx_pair(tmp_path, [0, 1, 2, 3], [5], gz=True)
        ds = load_mnist(ip, lp)
        assert ds.features.shape == (1, 4)
        assert ds.labels.tolist() == [5]

    def test_bad_image_magic(self, tmp_path):
        ip = tmp_path / "i.idx"
        ip.write_bytes(struct.pack(">IIII", 0xDEADBEEF, 1, 2, 2) + bytes(4))
        _, lp = make_idx_pair(tmp_path, [0, 0, 0, 0], [1])
        with pytest.raises(DataError, match="magic"):
            load_mnist(ip, lp)

    def test_bad_label_magic(self, tmp_path):
        ip, _ = make_idx_pair(tmp_path, [0, 0, 0, 0], [1])
        lp = tmp_path / "l.idx"
        lp.write_bytes(struct.pack(">II", 0x00000999, 1) + bytes(1))
        with pytest.raises(DataError, match="magic"):
            load_mnist(ip, lp)

    def test_count_mismatch(self, tmp_path):
        ip, _ = make_idx_pair(tmp_path, [0, 0, 0, 0], [1])
        _, lp = make_idx_pair(tmp_path, [0] * 8, [1, 2])
        with pytest.raises(DataError, match="images but"):
            load_mnist(ip, lp)

    def test_truncated_image_data(self, tmp_path):
        ip = tmp_path / "i.idx"
        ip.write_bytes(struct.pack(">IIII", 0x00000803, 2, 2, 2) + bytes(5))
        _, lp = make_idx_pair(tmp_path, [0] * 8, [1, 2])
        with pytest.raises(DataError, match="truncated"):
            load_mnist(ip, lp)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            load_mnist(tmp_path / "nope", tmp_path / "nope2")


class TestCifarParser:
    def test_parses_hand_packed_records(self, tmp_path):
        # 2 records: label byte then 3072 pixel bytes
        rec0 = bytes([4]) + bytes(range(256)) * 12
        rec1 = bytes([9]) + bytes([255]) * 3072
        path = tmp_path / "batch.bin"
        path.write_bytes(rec0 + rec1)
        ds = load_cifar10([path])
        assert ds.features.shape == (2, 3072)
        assert ds.labels.tolist() == [4, 9]
        assert ds.features[0, 0] == 0.0
        assert ds.features[0, 1] == pytest.approx(1 / 255)
        assert ds.features[1].min() == 1.0

    def test_rejects_partial_record(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(bytes(3073 + 10))
        with pytest.raises(DataError, match="multiple"):
            load_cifar10([path])

    def test_multiple_batches_concatenate(self, tmp_path):
        rec = bytes([1]) + bytes(3072)
        p1, p2 = tmp_path / "b1.bin", tmp_path / "b2.bin"
        p1.write_bytes(rec * 3)
        p2.write_bytes(rec * 2)
        assert len(load_cifar10([p1, p2])) == 5


class TestSubset:
    def test_full_size_is_permutation(self):
        ds = make_synthetic_digits(50, seed=1)
        sub = subset(ds, 50, seed=2)
        assert sorted(sub.labels.tolist()) == sorted(ds.labels.tolist())
        np.testing.assert_allclose(
            np.sort(sub.features.sum(axis=1)), np.sort(ds.features.sum(axis=1))
        )

    def test_ten_from_ten_classes_one_each(self):
        ds = make_synthetic_digits(100, seed=3)
        sub = subset(ds, 10, seed=4)
        assert sorted(sub.labels.tolist()) == list(range(10))

    def test_proportions_within_one(self):
        ds = make_synthetic_digits(400, seed=5)
        sub = subset(ds, 120, seed=6)
        _, counts = np.unique(sub.labels, return_counts=True)
        assert counts.min() >= 11 and counts.max() <= 13

    def test_deterministic(self):
        ds = make_synthetic_digits(60, seed=7)
        a = subset(ds, 30, seed=8)
        b = subset(ds, 30, seed=8)
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_oversize_rejected(self):
        ds = make_synthetic_digits(20, seed=9)
        with pytest.raises(DataError, match="available"):
            subset(ds, 21, seed=1)


class TestKފold:
    def test_ten_singletons(self):
        splits = kfold_splits(10, 10, seed=1)
        assert len(splits) == 10
        assert all(len(te) == 1 for _, te in splits)

    def test_partition_property(self):
        splits = kfold_splits(43, 7, seed=2)
        union = np.concatenate([te for _, te in splits])
        assert sorted(union.tolist()) == list(range(43))
        sizes = [len(te) for _, te in splits]
        assert max(sizes) - min(sizes) <= 1
        for tr, te in splits:
            assert not set(tr.tolist()) & set(te.tolist())
            assert len(tr) + len(te) == 43

    def test_deterministic(self):
        a = kfold_splits(30, 5, seed=3)
        b = kfold_splits(30, 5, seed=3)
        for (tra, tea), (trb, teb) in zip(a, b):
            np.testing.assert_array_equal(tra, trb)
            np.testing.assert_array_equal(tea, teb)

    def test_invalid_k(self):
        with pytest.raises(DataError, match="k must be"):
            kfold_splits(10, 1, seed=1)
        with pytest.raises(DataError, match="folds from"):
            kfold_splits(3, 5, seed=1)


class TestCsvRoundTrip:
    def test_features_and_labels_survive(self, tmp_path):
        ds = make_synthetic_digits(25, seed=10, side=6)
        path = tmp_path / "ds.csv"
        save_csv(ds, path)
        back = load_csv(path)
        assert back.labels.tolist() == ds.labels.tolist()
        np.testing.assert_allclose(back.features, ds.features, atol=1e-9)

    def test_header_shape(self, tmp_path):
        ds = Dataset(np.array([[0.25, 0.5]]), np.array([3]))
        path = tmp_path / "t.csv"
        save_csv(ds, path)
        first = path.read_text().splitlines()[0]
        assert first == "label,f0,f1"

    def test_malformed_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("label,f0\n1,0.5,0.7\n")
        with pytest.raises(DataError, match="fields"):
            load_csv(path)


class TestFixture:
    def test_shipped_fixture_loads(self):
        ds = load_fixture()
        assert len(ds) == FIXTURE_SIZE
        assert ds.features.shape == (FIXTURE_SIZE, 784)
        assert set(ds.labels.tolist()) == set(range(10))

    def test_fixture_matches_regeneration(self, tmp_path):
        """The shipped bytes equal a deterministic regeneration."""
        regen = make_synthetic_digits(FIXTURE_SIZE, seed=FIXTURE_SEED)
        ip, lp = tmp_path / "img", tmp_path / "lbl"
        write_idx_files(regen, ip, lp)
        ship_ip, ship_lp = fixture_paths()
        assert ip.read_bytes() == ship_ip.read_bytes()
        assert lp.read_bytes() == ship_lp.read_bytes()

    def test_idx_writer_roundtrip(self, tmp_path):
        ds = make_synthetic_digits(12, seed=44)
        ip, lp = tmp_path / "i", tmp_path / "l"
        write_idx_files(ds, ip, lp)
        back = load_mnist(ip, lp)
        assert back.labels.tolist() == ds.labels.tolist()
        # pixels quantized to bytes: reconstruction within half a level
        assert np.abs(back.features - ds.features).max() <= 0.5 / 255 + 1e-12


class TestDatasetInvariants:
    def test_rejects_out_of_range_labels(self):
        with pytest.raises(DataError, match="labels"):
            Dataset(np.zeros((2, 3)), np.array([0, 11]))

    def test_rejects_unnormalized_features(self):
        with pytest.raises(DataError, match="outside"):
            Dataset(np.array([[1.5, 0.0]]), np.array([1]))

    def test_rejects_length_mismatch(self):
        with pytest.raises(DataError, match="labels"):
            Dataset(np.zeros((3, 2)), np.array([1, 2]))
