"""Matrix Market (coordinate / array, real, 1-based) and JSON vector I/O."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import MissingDiagonal, NonSquare, ParseError
from .system import SparseSystem

_FIELDS = {"real", "integer", "double"}


def _data_lines(path):
    """Yield ``(lineno, text)`` for the header and all non-comment, non-blank lines."""
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if lineno == 1:
                yield lineno, text
                continue
            if not text or text.startswith("%"):
                continue
            yield lineno, text


def _header(lineno, text, expected_format):
    parts = text.lower().split()
    if len(parts) != 5 or parts[0] != "%%matrixmarket" or parts[1] != "matrix":
        raise ParseError(f"not a Matrix Market header: {text!r}", lineno)
    fmt, field, symmetry = parts[2], parts[3], parts[4]
    if fmt != expected_format:
        raise ParseError(f"expected {expected_format} format, got {fmt}", lineno)
    if field not in _FIELDS:
        raise ParseError(f"unsupported field {field!r}", lineno)
    if symmetry not in ("general", "symmetric"):
        raise ParseError(f"unsupported symmetry {symmetry!r}", lineno)
    return symmetry


def _numbers(lineno, text, count, kinds):
    parts = text.split()
    if len(parts) != count:
        raise ParseError(f"expected {count} fields, got {len(parts)}", lineno)
    try:
        return [k(p) for k, p in zip(kinds, parts)]
    except ValueError as exc:
        raise ParseError(str(exc), lineno) from None


def read_coordinate(path):
    """Parse a coordinate file into ``(n, entries)`` with 0-based keys."""
    lines = _data_lines(path)
    first = next(lines, None)
    if first is None:
        raise ParseError("empty file", 1)
    symmetry = _header(*first, "coordinate")
    size = next(lines, None)
    if size is None:
        raise ParseError("missing size line", first[0])
    m, n, nnz = _numbers(*size, 3, (int, int, int))
    if m != n:
        raise NonSquare(f"matrix is {m}x{n}", size[0])
    entries = {}
    count = 0
    for lineno, text in lines:
        count += 1
        if count > nnz:
            raise ParseError(f"more than the declared {nnz} entries", lineno)
        i, j, v = _numbers(lineno, text, 3, (int, int, float))
        if not (1 <= i <= n and 1 <= j <= n):
            raise ParseError(f"index ({i}, {j}) outside 1..{n}", lineno)
        key = (i - 1, j - 1)
        if key in entries:
            raise ParseError(f"duplicate entry ({i}, {j})", lineno)
        entries[key] = v
        if symmetry == "symmetric" and i != j:
            entries[(j - 1, i - 1)] = v
    if count != nnz:
        raise ParseError(f"declared {nnz} entries, found {count}")
    missing = [i for i in range(n) if (i, i) not in entries]
    if missing:
        raise MissingDiagonal(f"diagonal entry ({missing[0] + 1}, {missing[0] + 1}) is missing")
    return n, entries


def read_vector(path) -> np.ndarray:
    """Read a right-hand side stored as a Matrix Market array or a JSON list."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(exc.msg, exc.lineno) from None
        if isinstance(data, dict):
            data = data.get("b")
        if not isinstance(data, list) or not all(isinstance(v, (int, float)) for v in data):
            raise ParseError("JSON right-hand side must be a list of numbers")
        return np.asarray(data, dtype=np.float64)
    lines = _data_lines(path)
    first = next(lines, None)
    if first is None:
        raise ParseError("empty file", 1)
    _header(*first, "array")
    size = next(lines, None)
    if size is None:
        raise ParseError("missing size line", first[0])
    m, k = _numbers(*size, 2, (int, int))
    if k != 1:
        raise ParseError(f"right-hand side must have one column, got {k}", size[0])
    vals = [_numbers(lineno, text, 1, (float,))[0] for lineno, text in lines]
    if len(vals) != m:
        raise ParseError(f"declared {m} values, found {len(vals)}")
    return np.asarray(vals)


def companion_rhs(path):
    """Conventional right-hand-side file next to a matrix file, if present."""
    path = Path(path)
    for cand in (path.with_name(path.stem + "_rhs.mtx"), path.with_name(path.stem + "_rhs.json")):
        if cand.exists():
            return cand
    return None


def load_matrix_market(path, rhs=None) -> SparseSystem:
    """Load ``A`` from a coordinate file and ``b`` from ``rhs``.

    Without an explicit ``rhs`` a companion ``<stem>_rhs.mtx`` or
    ``<stem>_rhs.json`` is used; failing that ``b_i = i`` (1-based).
    """
    n, entries = read_coordinate(path)
    rhs = rhs if rhs is not None else companion_rhs(path)
    b = read_vector(rhs) if rhs is not None else np.arange(1.0, n + 1.0)
    if b.size != n:
        raise ParseError(f"right-hand side has {b.size} entries, matrix has {n} rows")
    return SparseSystem.from_entries(n, entries, b)


def write_matrix_market(sys: SparseSystem, path, rhs_path=None):
    """Write ``A`` (and optionally ``b``) with round-trip exact float formatting."""
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real general\n")
        fh.write(f"{sys.n} {sys.n} {sys.nnz}\n")
        for i, j, v in zip(sys.rows.tolist(), sys.cols.tolist(), sys.vals.tolist()):
            fh.write(f"{i + 1} {j + 1} {v!r}\n")
    if rhs_path is not None:
        write_vector(sys.b, rhs_path)


def write_vector(b, path):
    b = np.asarray(b, dtype=np.float64)
    path = Path(path)
    if path.suffix.lower() == ".json":
        with open(path, "w") as fh:
            json.dump(b.tolist(), fh)
        return
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix array real general\n")
        fh.write(f"{b.size} 1\n")
        for v in b.tolist():
            fh.write(f"{v!r}\n")
