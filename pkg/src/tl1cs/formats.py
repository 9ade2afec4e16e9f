"""Flat binary and CSV formats for problems, matrices and vectors.

Binary layout (all little-endian)::

    magic    8 bytes   b"TL1PROB\\0" | b"TL1MATX\\0" | b"TL1VECT\\0"
    version  uint32    currently 1
    rows     uint32    M (problems, matrices) or N (vectors)
    cols     uint32    N (problems, matrices) or 1 (vectors)
    flags    uint32    bit 0: problem carries ground truth
    payload  float64   problem: A row-major, y, then x* if flagged
                       matrix:  A row-major
                       vector:  the N entries
"""

import struct

import numpy as np

from .sensing import Problem

__all__ = [
    "FormatError",
    "write_problem",
    "read_problem",
    "write_matrix",
    "read_matrix",
    "write_vector",
    "read_vector",
    "write_problem_csv",
]

PROBLEM_MAGIC = b"TL1PROB\0"
MATRIX_MAGIC = b"TL1MATX\0"
VECTOR_MAGIC = b"TL1VECT\0"
VERSION = 1
_HEADER = struct.Struct("<8sIIII")
_F8 = np.dtype("<f8")


class FormatError(ValueError):
    pass


def _write(path, magic, rows, cols, flags, arrays):
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(magic, VERSION, rows, cols, flags))
        for arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype=_F8).tobytes())


def _read(path, expected=None):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: file too short for a header")
    magic, version, rows, cols, flags = _HEADER.unpack_from(raw)
    if magic not in (PROBLEM_MAGIC, MATRIX_MAGIC, VECTOR_MAGIC):
        raise FormatError(f"{path}: unrecognised magic bytes {magic!r}")
    if expected is not None and magic not in expected:
        raise FormatError(f"{path}: expected {expected}, found {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    data = np.frombuffer(raw, dtype=_F8, offset=_HEADER.size)
    return magic, rows, cols, flags, data


def write_problem(path, prob):
    M, N = prob.A.shape
    has_truth = prob.x_true is not None
    arrays = [prob.A, prob.y] + ([prob.x_true] if has_truth else [])
    _write(path, PROBLEM_MAGIC, M, N, int(has_truth), arrays)


def read_problem(path):
    _, M, N, flags, data = _read(path, (PROBLEM_MAGIC,))
    need = M * N + M + (N if flags & 1 else 0)
    if data.size != need:
        raise FormatError(f"{path}: payload has {data.size} values, expected {need}")
    A = data[: M * N].reshape(M, N).copy()
    y = data[M * N: M * N + M].copy()
    x = data[M * N + M:].copy() if flags & 1 else None
    return Problem(A, y, x)


def write_matrix(path, A):
    A = np.atleast_2d(A)
    _write(path, MATRIX_MAGIC, A.shape[0], A.shape[1], 0, [A])


def read_matrix(path):
    """Read a matrix file; a problem file yields its sensing matrix."""
    magic, M, N, _, data = _read(path, (MATRIX_MAGIC, PROBLEM_MAGIC))
    if data.size < M * N:
        raise FormatError(f"{path}: payload too short for a {M}x{N} matrix")
    if magic == MATRIX_MAGIC and data.size != M * N:
        raise FormatError(f"{path}: payload has {data.size} values, expected {M * N}")
    return data[: M * N].reshape(M, N).copy()


def write_vector(path, x):
    x = np.ravel(x)
    _write(path, VECTOR_MAGIC, x.size, 1, 0, [x])


def read_vector(path):
    _, n, _, _, data = _read(path, (VECTOR_MAGIC,))
    if data.size != n:
        raise FormatError(f"{path}: payload has {data.size} values, expected {n}")
    return data.copy()


def write_problem_csv(path, prob):
    """Human-readable dump: one ``A`` row per line, then ``y`` and ``x*`` rows."""
    with open(path, "w") as fh:
        fh.write(f"# tl1cs problem M={prob.A.shape[0]} N={prob.A.shape[1]}\n")
        for i, row in enumerate(prob.A):
            fh.write(f"A{i}," + ",".join(f"{v:.17g}" for v in row) + "\n")
        fh.write("y," + ",".join(f"{v:.17g}" for v in prob.y) + "\n")
        if prob.x_true is not None:
            fh.write("x_true," + ",".join(f"{v:.17g}" for v in prob.x_true) + "\n")
