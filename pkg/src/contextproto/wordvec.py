"""Word-embedding tables: frozen semantic vectors keyed by class name.

File format (UTF-8 text, one record per line)::

    <name>\t<v1> <v2> ... <v_dw>

Values are decimal floats; the writer emits shortest round-trip reprs so a
save/load cycle is bit-exact.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from .errors import DomainError, FormatError, ParseError, UnknownLabelError


class WordTable:
    """Ordered vocabulary of class names with one frozen vector per name."""

    def __init__(self, names, vectors):
        names = [str(n) for n in names]
        vectors = np.array(vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise FormatError(f"word table vectors must be 2-D, got shape {vectors.shape}")
        if vectors.shape[0] != len(names):
            raise FormatError(f"{len(names)} names but {vectors.shape[0]} vectors")
        seen = set()
        for n in names:
            if n in seen:
                raise FormatError(f"duplicate word table entry {n!r}")
            seen.add(n)
        vectors.setflags(write=False)
        self.names = names
        self.vectors = vectors
        self._index = {n: i for i, n in enumerate(names)}

    @property
    def d_w(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def vector(self, name: str) -> np.ndarray:
        """Vector for a name; unknown names are an error, never a silent zero."""
        try:
            return self.vectors[self._index[name]]
        except KeyError:
            raise UnknownLabelError(f"name {name!r} not in word table") from None

    def context_matrix(self, labels) -> np.ndarray:
        """Matrix (d_w x n_s) whose column i is the vector of labels[i]."""
        if not labels:
            return np.zeros((self.d_w, 0))
        return np.stack([self.vector(l) for l in labels], axis=1)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for n in self.names:
            h.update(n.encode("utf-8"))
            h.update(b"\x00")
        h.update(self.vectors.tobytes())
        return h.hexdigest()


def load_word_table(source) -> WordTable:
    """Parse a word table from a file path or an open text stream."""
    if isinstance(source, (str, Path)):
        with Path(source).open("r", encoding="utf-8") as fh:
            return load_word_table(fh)
    stream = source

    names: list[str] = []
    rows: list[list[float]] = []
    dim: int | None = None
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n")
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ParseError(f"line {lineno}: expected <name><TAB><values>, got {line!r}")
        name, payload = parts
        try:
            values = [float(tok) for tok in payload.split()]
        except ValueError as exc:
            raise ParseError(f"line {lineno}: bad float value ({exc})") from None
        if not values:
            raise ParseError(f"line {lineno}: no vector values for {name!r}")
        if dim is None:
            dim = len(values)
        elif len(values) != dim:
            raise FormatError(f"line {lineno}: dimension {len(values)} differs from first row's {dim}")
        if name in names:
            raise FormatError(f"line {lineno}: duplicate name {name!r}")
        names.append(name)
        rows.append(values)
    if not names:
        raise FormatError("word table is empty")
    return WordTable(names, rows)


def save_word_table(table: WordTable, dest) -> None:
    """Write a table in the text format; floats round-trip bit-exactly."""
    if isinstance(dest, (str, Path)):
        with Path(dest).open("w", encoding="utf-8") as fh:
            save_word_table(table, fh)
        return
    for name, row in zip(table.names, table.vectors):
        dest.write(name)
        dest.write("\t")
        dest.write(" ".join(repr(float(x)) for x in row))
        dest.write("\n")


def cosine_similarity(u, v) -> float:
    """u.v / (|u||v|); both vectors must be nonzero."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise DomainError(f"cosine similarity needs equal-length vectors, got {u.shape} and {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise DomainError("cosine similarity of a zero vector is undefined")
    return float(u @ v / (nu * nv))
