import struct

import numpy as np
import pytest

from vidextract.vaeb import StoreRecord, store_bytes, write_store


def test_exact_byte_layout():
    rec = StoreRecord("clip-a", "fake", "latte", np.array([1.0, -2.5, 3.25], np.float32))
    payload = store_bytes("enc", 3, [rec])
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


def test_real_label_byte_is_zero():
    rec = StoreRecord("r", "real", "youtube-vos", np.zeros(2, np.float32))
    payload = store_bytes("m", 2, [rec])
    label_pos = 4 + 4 + 2 + 1 + 4 + 8 + 2 + 1
    assert payload[label_pos] == 0


def test_empty_store_is_header_only(tmp_path):
    path = tmp_path / "empty.vaeb"
    n = write_store(path, "enc", 4, [])
    assert n == path.stat().st_size == 4 + 4 + 2 + 3 + 4 + 8


def test_validation_errors():
    good = StoreRecord("a", "real", "s", np.zeros(2, np.float32))
    with pytest.raises(ValueError, match="duplicate"):
        store_bytes("m", 2, [good, StoreRecord("a", "fake", "s", np.ones(2, np.float32))])
    with pytest.raises(ValueError, match="dim"):
        store_bytes("m", 3, [good])
    with pytest.raises(ValueError, match="class label"):
        StoreRecord("x", "synthetic", "s", np.zeros(2, np.float32))
    with pytest.raises(ValueError, match="finite"):
        StoreRecord("x", "real", "s", np.array([np.nan], np.float32))
    with pytest.raises(ValueError, match="non-empty"):
        StoreRecord("", "real", "s", np.zeros(1, np.float32))
