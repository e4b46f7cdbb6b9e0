"""Matrix Market coordinate files (real, integer or pattern; general or symmetric)."""
from __future__ import annotations

from pathlib import Path

from .errors import ParseError
from .sparse import SparseMatrix, from_triplets

_FIELDS = {"real", "integer", "pattern"}
_SYMMETRY = {"general", "symmetric", "skew-symmetric"}


def _parse_header(line: str):
    parts = line.strip().lower().split()
    if len(parts) != 5 or parts[0] != "%%matrixmarket":
        raise ParseError("expected '%%MatrixMarket matrix coordinate <field> <symmetry>'", 1)
    _, obj, fmt, field, symmetry = parts
    if obj != "matrix" or fmt != "coordinate":
        raise ParseError(f"only 'matrix coordinate' is supported, got '{obj} {fmt}'", 1)
    if field not in _FIELDS:
        raise ParseError(f"unsupported field '{field}'", 1)
    if symmetry not in _SYMMETRY:
        raise ParseError(f"unsupported symmetry '{symmetry}'", 1)
    return field, symmetry


def parse_matrix_market(text: str) -> SparseMatrix:
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty file", 1)
    field, symmetry = _parse_header(lines[0])

    size = None
    entries = []
    expected = 0
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        tokens = line.split()
        if size is None:
            try:
                size = tuple(int(t) for t in tokens)
            except ValueError:
                raise ParseError(f"bad size line '{line}'", lineno) from None
            if len(size) != 3 or min(size) < 0:
                raise ParseError(f"size line needs 'rows cols nnz', got '{line}'", lineno)
            expected = size[2]
            continue
        want = 2 if field == "pattern" else 3
        if len(tokens) != want:
            raise ParseError(f"expected {want} fields, got {len(tokens)}", lineno)
        try:
            i, j = int(tokens[0]) - 1, int(tokens[1]) - 1
            if field == "pattern":
                v = 1.0
            elif field == "integer":
                v = float(int(tokens[2]))
            else:
                v = float(tokens[2])
        except ValueError:
            raise ParseError(f"bad entry '{line}'", lineno) from None
        if not (0 <= i < size[0] and 0 <= j < size[1]):
            raise ParseError(f"index ({i + 1}, {j + 1}) outside {size[0]}x{size[1]}", lineno)
        if len(entries) >= expected:
            raise ParseError(f"more than the declared {expected} entries", lineno)
        entries.append((i, j, v))
    if size is None:
        raise ParseError("missing size line", len(lines) + 1)
    if len(entries) != expected:
        raise ParseError(f"declared {expected} entries, found {len(entries)}", len(lines) + 1)

    if symmetry != "general":
        sign = -1.0 if symmetry == "skew-symmetric" else 1.0
        entries += [(j, i, sign * v) for i, j, v in entries if i != j]
    return from_triplets(size[0], size[1], entries)


def load_matrix_market(path) -> SparseMatrix:
    return parse_matrix_market(Path(path).read_text())


def _fmt(v) -> str:
    f = float(v)
    return str(int(f)) if f.is_integer() and abs(f) < 2**53 else repr(f)


def format_matrix_market(M: SparseMatrix) -> str:
    integral = M.is_integral()
    field = "integer" if integral else "real"
    out = [f"%%MatrixMarket matrix coordinate {field} general", f"{M.rows} {M.cols} {M.nnz}"]
    for i, j, v in M.triplets():
        out.append(f"{i + 1} {j + 1} {_fmt(v) if integral else repr(float(v))}")
    return "\n".join(out) + "\n"


def write_matrix_market(M: SparseMatrix, path) -> None:
    Path(path).write_text(format_matrix_market(M))
