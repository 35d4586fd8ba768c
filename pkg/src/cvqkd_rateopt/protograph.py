"""Protograph base matrices and their text file format.

File grammar (line oriented, ``#`` starts a comment, blank lines ignored)::

    [name: <label>]
    <rows> <cols> <z_min>
    <cols integers>          # one line per check type, ``rows`` lines
    ...
    punctured: [<col> ...]   # 0-based column indices, may be empty

Entries are edge multiplicities (non-negative integers). The ``punctured``
line is mandatory so that an omitted puncturing pattern is never silently
assumed; an empty list means nothing is punctured.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["Protograph", "ProtographError", "parse_protograph", "load_protograph", "default_protograph_path"]


class ProtographError(ValueError):
    """Malformed protograph text or a base matrix that violates its invariants."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


@dataclass(frozen=True, eq=False)
class Protograph:
    base_matrix: np.ndarray
    punctured: tuple[bool, ...]
    name: str = "protograph"
    z_min: int = 2

    def __post_init__(self):
        base = np.asarray(self.base_matrix)
        if base.ndim != 2 or base.size == 0:
            raise ProtographError("base matrix must be a non-empty 2-D array")
        if not np.issubdtype(base.dtype, np.integer):
            if not np.all(np.equal(np.mod(base, 1), 0)):
                raise ProtographError("base matrix entries must be integers")
            base = base.astype(np.int64)
        if np.any(base < 0):
            raise ProtographError("edge multiplicities must be >= 0")
        base = base.astype(np.int64)
        base.setflags(write=False)
        object.__setattr__(self, "base_matrix", base)

        punct = tuple(bool(p) for p in self.punctured)
        if len(punct) != base.shape[1]:
            raise ProtographError(f"punctured flags have length {len(punct)}, expected {base.shape[1]}")
        object.__setattr__(self, "punctured", punct)

        zero_rows = np.flatnonzero(base.sum(axis=1) == 0)
        if zero_rows.size:
            raise ProtographError(f"all-zero row(s) {zero_rows.tolist()} in base matrix")
        zero_cols = np.flatnonzero(base.sum(axis=0) == 0)
        if zero_cols.size:
            raise ProtographError(f"all-zero column(s) {zero_cols.tolist()} in base matrix")
        if self.n_transmitted <= 0:
            raise ProtographError("every column is punctured")
        rate = self.design_rate
        if not 0.0 < rate < 1.0:
            raise ProtographError(f"design rate {rate:.4g} is outside (0, 1)")

    @property
    def n_rows(self) -> int:
        return int(self.base_matrix.shape[0])

    @property
    def n_cols(self) -> int:
        return int(self.base_matrix.shape[1])

    @property
    def n_transmitted(self) -> int:
        return self.n_cols - sum(self.punctured)

    @property
    def max_multiplicity(self) -> int:
        return int(self.base_matrix.max())

    @property
    def design_rate(self) -> float:
        """Information columns over transmitted columns."""
        return (self.n_cols - self.n_rows) / self.n_transmitted

    def to_text(self) -> str:
        lines = [f"name: {self.name}", f"{self.n_rows} {self.n_cols} {self.z_min}"]
        lines += [" ".join(str(int(v)) for v in row) for row in self.base_matrix]
        cols = [str(i) for i, p in enumerate(self.punctured) if p]
        lines.append("punctured: " + " ".join(cols))
        return "\n".join(lines) + "\n"


def _parse_int(tok: str, line: int, col: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ProtographError(f"expected an integer, got {tok!r}", line, col) from None


def _tokens(raw: str) -> list[tuple[str, int]]:
    out = []
    pos = 0
    for tok in raw.split():
        pos = raw.index(tok, pos)
        out.append((tok, pos + 1))
        pos += len(tok)
    return out


def parse_protograph(text: str, name: str | None = None) -> Protograph:
    """Parse protograph file contents into a validated :class:`Protograph`."""
    label = name
    header = None
    rows: list[list[int]] = []
    punctured = None
    last_line = 0

    for lineno, raw in enumerate(text.splitlines(), start=1):
        last_line = lineno
        content = raw.split("#", 1)[0].rstrip()
        if not content.strip():
            continue
        stripped = content.strip()
        if stripped.startswith("name:"):
            label = stripped[len("name:"):].strip() or label
            continue
        if stripped.startswith("punctured:"):
            if header is None or len(rows) != header[0]:
                raise ProtographError("'punctured:' must follow the base matrix rows", lineno, 1)
            if punctured is not None:
                raise ProtographError("duplicate 'punctured:' line", lineno, 1)
            offset = content.index("punctured:") + len("punctured:")
            idx = []
            for tok, col in _tokens(content[offset:]):
                j = _parse_int(tok, lineno, col + offset)
                if not 0 <= j < header[1]:
                    raise ProtographError(f"punctured column {j} out of range [0, {header[1]})", lineno, col + offset)
                idx.append(j)
            punctured = idx
            continue

        toks = _tokens(content)
        if header is None:
            if len(toks) != 3:
                raise ProtographError("header must be '<rows> <cols> <z_min>'", lineno, 1)
            r, c, z = (_parse_int(t, lineno, col) for t, col in toks)
            if r < 1 or c < 1 or z < 1:
                raise ProtographError("header values must be positive", lineno, 1)
            header = (r, c, z)
            continue
        if punctured is not None:
            raise ProtographError("unexpected content after 'punctured:' line", lineno, toks[0][1])
        if len(rows) == header[0]:
            raise ProtographError(f"more than {header[0]} matrix rows", lineno, toks[0][1])
        if len(toks) != header[1]:
            raise ProtographError(f"row has {len(toks)} entries, expected {header[1]}", lineno, toks[0][1])
        vals = [_parse_int(t, lineno, col) for t, col in toks]
        for v, (_, col) in zip(vals, toks):
            if v < 0:
                raise ProtographError("edge multiplicity must be >= 0", lineno, col)
        rows.append(vals)

    if header is None:
        raise ProtographError("missing header line", last_line or 1)
    if len(rows) != header[0]:
        raise ProtographError(f"expected {header[0]} matrix rows, found {len(rows)}", last_line)
    if punctured is None:
        raise ProtographError("missing 'punctured:' line", last_line)

    flags = [False] * header[1]
    for j in punctured:
        flags[j] = True
    return Protograph(np.array(rows, dtype=np.int64), tuple(flags), name=label or "protograph", z_min=header[2])


def load_protograph(path) -> Protograph:
    path = Path(path)
    return parse_protograph(path.read_text(), name=path.stem)


def default_protograph_path() -> Path:
    return Path(__file__).with_name("data") / "default_rl_core.proto"
