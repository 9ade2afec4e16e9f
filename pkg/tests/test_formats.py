import struct

import numpy as np
import pytest

from tl1cs.formats import (
    FormatError,
    read_matrix,
    read_problem,
    read_vector,
    write_matrix,
    write_problem,
    write_problem_csv,
    write_vector,
)
from tl1cs.sensing import EnsembleSpec, Problem, SignalSpec, make_problem


@pytest.fixture
def prob():
    return make_problem(EnsembleSpec("gaussian", 6, 15, seed=1), SignalSpec(15, 3, seed=2))


def test_problem_roundtrip(tmp_path, prob):
    path = tmp_path / "p.bin"
    write_problem(path, prob)
    back = read_problem(path)
    assert back.A.tobytes() == prob.A.tobytes()
    assert back.y.tobytes() == prob.y.tobytes()
    assert back.x_true.tobytes() == prob.x_true.tobytes()
    np.testing.assert_array_equal(back.support, prob.support)


def test_problem_without_truth(tmp_path):
    p = Problem(np.arange(6.0).reshape(2, 3), np.array([1.0, 2.0]))
    write_problem(tmp_path / "p.bin", p)
    back = read_problem(tmp_path / "p.bin")
    assert back.x_true is None


def test_header_layout(tmp_path, prob):
    path = tmp_path / "p.bin"
    write_problem(path, prob)
    raw = path.read_bytes()
    magic, version, rows, cols, flags = struct.unpack_from("<8sIIII", raw)
    assert (magic, version, rows, cols, flags) == (b"TL1PROB\0", 1, 6, 15, 1)
    assert len(raw) == 24 + 8 * (6 * 15 + 6 + 15)


def test_matrix_and_vector_roundtrip(tmp_path, prob):
    write_matrix(tmp_path / "a.bin", prob.A)
    np.testing.assert_array_equal(read_matrix(tmp_path / "a.bin"), prob.A)
    write_vector(tmp_path / "x.bin", prob.x_true)
    np.testing.assert_array_equal(read_vector(tmp_path / "x.bin"), prob.x_true)
    # a problem file also serves as a matrix file
    write_problem(tmp_path / "p.bin", prob)
    np.testing.assert_array_equal(read_matrix(tmp_path / "p.bin"), prob.A)


def test_format_errors(tmp_path, prob):
    (tmp_path / "short.bin").write_bytes(b"TL1")
    with pytest.raises(FormatError):
        read_problem(tmp_path / "short.bin")
    (tmp_path / "junk.bin").write_bytes(b"NOTAFILE" + bytes(16))
    with pytest.raises(FormatError):
        read_matrix(tmp_path / "junk.bin")
    write_vector(tmp_path / "x.bin", prob.x_true)
    with pytest.raises(FormatError):
        read_problem(tmp_path / "x.bin")
    write_problem(tmp_path / "p.bin", prob)
    raw = (tmp_path / "p.bin").read_bytes()
    (tmp_path / "trunc.bin").write_bytes(raw[:-8])
    with pytest.raises(FormatError):
        read_problem(tmp_path / "trunc.bin")
    bumped = raw[:8] + struct.pack("<I", 2) + raw[12:]
    (tmp_path / "v2.bin").write_bytes(bumped)
    with pytest.raises(FormatError):
        read_problem(tmp_path / "v2.bin")


def test_problem_csv(tmp_path, prob):
    path = tmp_path / "p.csv"
    write_problem_csv(path, prob)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# tl1cs problem")
    assert len(lines) == 1 + 6 + 2
    row = np.array([float(v) for v in lines[1].split(",")[1:]])
    np.testing.assert_array_equal(row, prob.A[0])
