import io
import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vidprobe.store import (
    ClassLabel,
    CorruptStoreError,
    DuplicateRecordError,
    EmbeddingRecord,
    EmbeddingStore,
    UnsupportedFormatError,
    average_frame_features,
    euclidean_distance,
    read_store,
    store_from_bytes,
    store_to_bytes,
    write_store,
)

from conftest import make_record, random_store


class TestAverageFrameFeatures:
    def test_single_row_identity(self):
        out = average_frame_features([[1.0, 2.0]])
        assert out.dtype == np.float32
        np.testing.assert_array_equal(out, np.array([1.0, 2.0], np.float32))

    def test_two_row_midpoint(self):
        out = average_frame_features([[0.0, 0.0], [2.0, 4.0]])
        np.testing.assert_array_equal(out, np.array([1.0, 2.0], np.float32))

    def test_random_matches_fsum_oracle(self):
        rng = np.random.default_rng(42)
        block = rng.normal(size=(16, 8)).astype(np.float32)
        out = average_frame_features(block)
        oracle = np.array(
            [math.fsum(float(v) for v in block[:, j]) / 16.0 for j in range(8)]
        )
        np.testing.assert_allclose(out.astype(np.float64), oracle, rtol=1e-6)

    def test_empty_block_rejected(self):
        with pytest.raises(ValueError, match="no frames"):
            average_frame_features(np.empty((0, 4)))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="invalid feature"):
            average_frame_features([[1.0, np.nan]])

    def test_non_matrix_rejected(self):
        with pytest.raises(ValueError):
            average_frame_features([1.0, 2.0])

    def test_permutation_invariant(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            block = rng.normal(size=(12, 6)).astype(np.float32)
            perm = rng.permutation(12)
            np.testing.assert_array_equal(
                average_frame_features(block), average_frame_features(block[perm])
            )

    def test_k_copies_equal_vector_exactly(self):
        rng = np.random.default_rng(3)
        vec = rng.normal(size=9).astype(np.float32)
        for k in (1, 2, 3, 7, 16):
            block = np.tile(vec, (k, 1))
            np.testing.assert_array_equal(average_frame_features(block), vec)


class TestEuclideanDistance:
    def test_identical_vectors(self):
        assert euclidean_distance([1.5, -2.0, 3.0], [1.5, -2.0, 3.0]) == 0.0

    def test_three_four_five(self):
        assert euclidean_distance([0.0, 0.0], [3.0, 4.0]) == 5.0

    def test_random_matches_fsum_oracle(self):
        rng = np.random.default_rng(11)
        a = rng.normal(size=32).astype(np.float32)
        b = rng.normal(size=32).astype(np.float32)
        d = euclidean_distance(a, b)
        oracle = math.sqrt(
            math.fsum((float(x) - float(y)) ** 2 for x, y in zip(a, b))
        )
        assert d == pytest.approx(oracle, rel=1e-9)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            euclidean_distance([1.0, 2.0], [1.0, 2.0, 3.0])

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="invalid feature"):
            euclidean_distance([np.inf, 0.0], [0.0, 0.0])

    def test_symmetry_exact(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            a = rng.normal(size=16).astype(np.float32)
            b = rng.normal(size=16).astype(np.float32)
            assert euclidean_distance(a, b) == euclidean_distance(b, a)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(13)
        for _ in range(200):
            a, b, c = rng.normal(size=(3, 12)).astype(np.float32)
            ab = euclidean_distance(a, b)
            bc = euclidean_distance(b, c)
            ac = euclidean_distance(a, c)
            assert ac <= ab + bc + 1e-7

    def test_scaling_homogeneity(self):
        rng = np.random.default_rng(17)
        for scale in (-3.0, 0.5, 2.0, 10.0):
            a = rng.normal(size=8).astype(np.float32)
            b = rng.normal(size=8).astype(np.float32)
            scaled = euclidean_distance(scale * a, scale * b)
            assert scaled == pytest.approx(abs(scale) * euclidean_distance(a, b), rel=1e-6)


def _one_record_store():
    vec = np.array([1.0, -2.5, 3.25], np.float32)
    return EmbeddingStore("enc", 3, [make_record("clip-a", 1, "latte", vec)])


class TestStoreFormat:
    def test_exact_byte_layout(self):
        payload = store_to_bytes(_one_record_store())
        expected = (
            b"VAEB"
            + struct.pack("<I", 1)
            + struct.pack("<H", 3) + b"enc"
            + struct.pack("<I", 3)
            + struct.pack("<Q", 1)
            + struct.pack("<H", 6) + b"clip-a"
            + struct.pack("<B", 1)
            + struct.pack("<H", 5) + b"latte"
            + np.array([1.0, -2.5, 3.25], "<f4").tobytes()
        )
        assert payload == expected

    def test_empty_store_header_only(self, tmp_path):
        empty = EmbeddingStore("m", 4)
        path = tmp_path / "empty.vaeb"
        n = write_store(empty, path)
        assert n == path.stat().st_size == 4 + 4 + 2 + 1 + 4 + 8
        loaded = read_store(path)
        assert loaded == empty
        assert len(loaded) == 0 and loaded.dim == 4

    def test_single_record_round_trip(self, tmp_path):
        original = _one_record_store()
        path = tmp_path / "one.vaeb"
        write_store(original, path)
        assert read_store(path) == original

    def test_round_trip_bitwise_fixpoint(self):
        rng = np.random.default_rng(23)
        original = random_store(rng, 100, 12)
        first = store_to_bytes(original)
        second = store_to_bytes(store_from_bytes(first))
        assert first == second

    def test_file_object_round_trip(self):
        buf = io.BytesIO()
        original = _one_record_store()
        write_store(original, buf)
        buf.seek(0)
        assert read_store(buf) == original

    def test_bad_magic(self):
        data = b"XXXX" + store_to_bytes(_one_record_store())[4:]
        with pytest.raises(UnsupportedFormatError, match="unsupported format"):
            store_from_bytes(data)

    def test_bad_version(self):
        good = store_to_bytes(_one_record_store())
        data = good[:4] + struct.pack("<I", 9) + good[8:]
        with pytest.raises(UnsupportedFormatError, match="unsupported format"):
            store_from_bytes(data)

    def test_truncation_anywhere_is_corrupt(self):
        good = store_to_bytes(_one_record_store())
        for cut in (5, 9, 12, 15, 23, len(good) - 4, len(good) - 1):
            with pytest.raises(CorruptStoreError, match="corrupt store"):
                store_from_bytes(good[:cut])

    def test_trailing_bytes_are_corrupt(self):
        with pytest.raises(CorruptStoreError, match="trailing"):
            store_from_bytes(store_to_bytes(_one_record_store()) + b"\x00")

    def test_duplicate_id(self):
        rec = make_record("dup", 0, "youtube-vos", [1.0, 2.0, 3.0])
        good = store_to_bytes(EmbeddingStore("m", 3, [rec]))
        header_len = 4 + 4 + 2 + 1 + 4 + 8
        record = good[header_len:]
        doubled = good[: header_len - 8] + struct.pack("<Q", 2) + record + record
        with pytest.raises(DuplicateRecordError, match="duplicate record"):
            store_from_bytes(doubled)

    def test_bad_label_byte(self):
        good = bytearray(store_to_bytes(_one_record_store()))
        label_pos = 4 + 4 + 2 + 3 + 4 + 8 + 2 + 6
        assert good[label_pos] == 1
        good[label_pos] = 7
        with pytest.raises(CorruptStoreError, match="class label"):
            store_from_bytes(bytes(good))

    def test_non_finite_payload_is_corrupt(self):
        good = bytearray(store_to_bytes(_one_record_store()))
        nan = struct.pack("<f", float("nan"))
        good[-4:] = nan
        with pytest.raises(CorruptStoreError, match="non-finite"):
            store_from_bytes(bytes(good))

    def test_atomic_write_leaves_no_temp_files(self, tmp_path):
        path = tmp_path / "s.vaeb"
        write_store(_one_record_store(), path)
        write_store(_one_record_store(), path)  # overwrite in place
        assert [p.name for p in tmp_path.iterdir()] == ["s.vaeb"]

    def test_store_invariants_enforced_at_construction(self):
        rec3 = make_record("a", 0, "youtube-vos", [1.0, 2.0, 3.0])
        rec2 = make_record("b", 1, "latte", [1.0, 2.0])
        with pytest.raises(ValueError, match="dimension mismatch"):
            EmbeddingStore("m", 3, [rec3, rec2])
        with pytest.raises(DuplicateRecordError):
            EmbeddingStore("m", 3, [rec3, make_record("a", 1, "latte", [0.0, 0.0, 0.0])])
        with pytest.raises(ValueError, match="non-empty"):
            make_record("", 0, "youtube-vos", [1.0])
        with pytest.raises(ValueError, match="invalid feature"):
            make_record("x", 0, "youtube-vos", [np.inf])


_ids = st.text(
    st.characters(codec="utf-8", exclude_categories=("Cs",)), min_size=1, max_size=12
)


@settings(max_examples=40, deadline=None)
@given(
    model_id=st.text(max_size=8),
    dim=st.integers(min_value=1, max_value=6),
    rows=st.lists(
        st.tuples(_ids, st.booleans(), st.text(max_size=6)), max_size=8, unique_by=lambda r: r[0]
    ),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_store_round_trip_property(model_id, dim, rows, seed):
    rng = np.random.default_rng(seed)
    records = [
        EmbeddingRecord(
            rid, ClassLabel(int(fake)), src, rng.normal(size=dim).astype(np.float32)
        )
        for rid, fake, src in rows
    ]
    original = EmbeddingStore(model_id, dim, records)
    payload = store_to_bytes(original)
    loaded = store_from_bytes(payload)
    assert loaded == original
    assert store_to_bytes(loaded) == payload
