"""Word vector table for soft phrase matching.

The on-disk format is one token per line: the token followed by d reals,
whitespace separated.  Lookups are case-insensitive.  Out-of-vocabulary
tokens get the zero vector, which makes their cosine similarity to
everything 0 rather than an error.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np


class EmbeddingFormatError(ValueError):
    pass


class EmbeddingTable:
    def __init__(self, vectors: Mapping[str, np.ndarray]):
        if not vectors:
            raise EmbeddingFormatError("empty embedding table")
        dims = {v.shape for v in vectors.values()}
        if len(dims) != 1:
            raise EmbeddingFormatError(f"inconsistent vector dimensions: {dims}")
        self._vectors = {k.lower(): np.asarray(v, dtype=float) for k, v in vectors.items()}
        self.dim = next(iter(self._vectors.values())).shape[0]
        self._zero = np.zeros(self.dim)

    def __len__(self) -> int:
        return len(self._vectors)

    def __contains__(self, token: str) -> bool:
        return token.lower() in self._vectors

    def vector(self, token: str) -> np.ndarray:
        return self._vectors.get(token.lower(), self._zero)

    def items(self):
        return self._vectors.items()

    def cosine(self, a: str, b: str) -> float:
        """Cosine similarity of two tokens; 0 when either is OOV."""
        va, vb = self.vector(a), self.vector(b)
        na, nb = np.linalg.norm(va), np.linalg.norm(vb)
        if na == 0.0 or nb == 0.0:
            return 0.0
        return float(np.dot(va, vb) / (na * nb))

    def matrix(self, tokens: Iterable[str]) -> np.ndarray:
        """Stacked vectors, one row per token."""
        rows = [self.vector(t) for t in tokens]
        if not rows:
            return np.zeros((0, self.dim))
        return np.stack(rows)

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingTable":
        vectors: dict[str, np.ndarray] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                parts = line.split()
                if not parts:
                    continue
                token, *values = parts
                try:
                    vec = np.array([float(v) for v in values])
                except ValueError as exc:
                    raise EmbeddingFormatError(
                        f"{path}:{lineno}: non-numeric component") from exc
                if vec.size == 0:
                    raise EmbeddingFormatError(f"{path}:{lineno}: token without vector")
                vectors[token] = vec
        return cls(vectors)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for token in sorted(self._vectors):
                comps = " ".join(f"{x:.6f}" for x in self._vectors[token])
                fh.write(f"{token} {comps}\n")


def toy_table() -> EmbeddingTable:
    """The small vector file bundled for tests and demos."""
    ref = resources.files("explanno").joinpath("data/toy_vectors.txt")
    with resources.as_file(ref) as path:
        return EmbeddingTable.load(path)
