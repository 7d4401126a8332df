import numpy as np
import pytest

from zsar.errors import BackendError
from zsar.vectable import read_table, write_table


def test_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    table = {
        b"snowboarding": rng.standard_normal(8).astype(np.float32),
        b"surfing": rng.standard_normal(8).astype(np.float32),
        "café".encode(): rng.standard_normal(8).astype(np.float32),
    }
    path = tmp_path / "table.bin"
    write_table(path, table, 8)
    dim, loaded = read_table(path)
    assert dim == 8
    assert set(loaded) == set(table)
    for key in table:
        np.testing.assert_array_equal(loaded[key], table[key])


def test_write_is_deterministic(tmp_path):
    rng = np.random.default_rng(1)
    table = {f"k{i}".encode(): rng.standard_normal(4).astype(np.float32) for i in range(10)}
    write_table(tmp_path / "a.bin", table, 4)
    write_table(tmp_path / "b.bin", dict(reversed(table.items())), 4)
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()


def test_wrong_dim_rejected_on_write(tmp_path):
    with pytest.raises(ValueError):
        write_table(tmp_path / "t.bin", {b"k": np.zeros(3, np.float32)}, 4)


def test_corruption_detected(tmp_path):
    path = tmp_path / "t.bin"
    write_table(path, {b"key": np.ones(4, np.float32)}, 4)
    data = bytearray(path.read_bytes())
    data[21] ^= 0xFF  # flip a bit inside the key bytes
    path.write_bytes(bytes(data))
    with pytest.raises(BackendError):
        read_table(path)


def test_bad_magic(tmp_path):
    path = tmp_path / "t.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(BackendError):
        read_table(path)


def test_truncated_file(tmp_path):
    path = tmp_path / "t.bin"
    write_table(path, {b"key": np.ones(4, np.float32)}, 4)
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(BackendError):
        read_table(path)


def test_empty_table(tmp_path):
    path = tmp_path / "t.bin"
    write_table(path, {}, 16)
    dim, loaded = read_table(path)
    assert dim == 16 and loaded == {}
