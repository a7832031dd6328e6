"""Per-language word embedding tables in a shared multilingual space.

Tables are loaded from plain-text vector files ("word f1 ... fd" per
line, optional "V d" header) and stay frozen: the matrix is marked
read-only and never enters the gradient tape. Lookups case-fold to
lowercase; unknown words map to the vocabulary mean vector.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


class EmbeddingError(ValueError):
    pass


@dataclass
class EmbeddingTable:
    lang: str
    vocab: dict[str, int]
    matrix: np.ndarray      # |V| x d, read-only
    unk: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __post_init__(self):
        self.matrix = np.ascontiguousarray(self.matrix, dtype=np.float64)
        self.matrix.flags.writeable = False
        self.unk = np.asarray(self.unk, dtype=np.float64)
        self.unk.flags.writeable = False


def make_table(lang: str, words: list[str], matrix: np.ndarray) -> EmbeddingTable:
    """Build a table from parallel word/row lists, folding case and
    letting later duplicates win."""
    vocab: dict[str, int] = {}
    for i, word in enumerate(words):
        folded = word.lower()
        if folded in vocab:
            warnings.warn(f"duplicate embedding for {folded!r} in {lang}; last wins")
        vocab[folded] = i
    matrix = np.asarray(matrix, dtype=np.float64)
    return EmbeddingTable(lang=lang, vocab=vocab, matrix=matrix, unk=matrix.mean(axis=0))


def load_embeddings(path, lang: str) -> EmbeddingTable:
    words: list[str] = []
    rows: list[list[float]] = []
    dim: int | None = None
    declared: tuple[int, int] | None = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            if line_no == 1 and len(parts) == 2:
                try:
                    declared = (int(parts[0]), int(parts[1]))
                    continue
                except ValueError:
                    pass  # not a header after all
            word, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
                if dim == 0:
                    raise EmbeddingError(f"{path} line {line_no}: no vector components")
            elif len(values) != dim:
                raise EmbeddingError(
                    f"{path} line {line_no}: expected {dim} components, got {len(values)}")
            try:
                rows.append([float(v) for v in values])
            except ValueError as exc:
                raise EmbeddingError(f"{path} line {line_no}: bad float ({exc})") from exc
            words.append(word)
    if not rows:
        raise EmbeddingError(f"{path}: no vectors")
    if declared is not None:
        if declared[0] != len(rows):
            raise EmbeddingError(
                f"{path}: header declares {declared[0]} vectors, file has {len(rows)}")
        if declared[1] != dim:
            raise EmbeddingError(
                f"{path}: header declares dimension {declared[1]}, vectors have {dim}")
    return make_table(lang, words, np.array(rows))


def write_embeddings(table: EmbeddingTable, path, header: bool = True) -> None:
    index_to_word = {i: w for w, i in table.vocab.items()}
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"{len(table.vocab)} {table.dim}\n")
        for i in sorted(index_to_word):
            vec = " ".join(repr(float(v)) for v in table.matrix[i])
            fh.write(f"{index_to_word[i]} {vec}\n")


def lookup(table: EmbeddingTable, tokens: list[str]) -> np.ndarray:
    """Token vectors, one row per token; unknown words get the unk row."""
    if not tokens:
        raise EmbeddingError("lookup of an empty token list")
    out = np.empty((len(tokens), table.dim))
    for i, tok in enumerate(tokens):
        row = table.vocab.get(tok.lower())
        out[i] = table.unk if row is None else table.matrix[row]
    return out
