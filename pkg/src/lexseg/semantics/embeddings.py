"""Word vectors in the GloVe text format."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from lexseg.errors import ConfigurationError, ResourceError

GLOVE_HINT = (
    "Expected a UTF-8 text file with one word per line followed by its "
    "vector components (e.g. glove.840B.300d.txt from the GloVe project)."
)


class EmbeddingTable:
    def __init__(self, rows: dict, dimension: int | None = None):
        if dimension is None:
            dimension = len(next(iter(rows.values()))) if rows else 300
        self.dimension = int(dimension)
        self.rows = {}
        for word, vec in rows.items():
            vec = np.asarray(vec, dtype=np.float64)
            if vec.shape != (self.dimension,):
                raise ConfigurationError(
                    f"embedding for {word!r} has shape {vec.shape}, expected ({self.dimension},)"
                )
            self.rows[word] = vec

    def __contains__(self, word):
        return word in self.rows

    def __len__(self):
        return len(self.rows)

    def get(self, word: str):
        return self.rows.get(word)

    def mean_vector(self, tokens) -> np.ndarray | None:
        """Mean over the tokens present in the table; None if none are."""
        vecs = [self.rows[t] for t in tokens if t in self.rows]
        if not vecs:
            return None
        return np.mean(vecs, axis=0)


def load_embeddings(path, vocabulary=None, dimension: int = 300) -> EmbeddingTable:
    """Read a GloVe-style text file.

    If ``vocabulary`` (a set of words) is given, only those rows are kept,
    which keeps memory flat when scanning the 840B file. Keys are
    lowercased; an exactly-lowercase row beats a cased one ("cat" over
    "Cat"), otherwise the first occurrence wins.
    """
    path = Path(path)
    if not path.is_file():
        raise ResourceError(f"embedding file not found: {path}. {GLOVE_HINT}")
    rows, exact = {}, set()
    with open(path, encoding="utf-8", errors="replace") as fh:
        for line in fh:
            parts = line.rstrip("\n").rstrip(" ").split(" ")
            if len(parts) < dimension + 1:
                continue
            # a few GloVe tokens contain spaces: the word is everything before the vector
            raw = " ".join(parts[:-dimension])
            word = raw.lower()
            if vocabulary is not None and word not in vocabulary:
                continue
            if word in exact or (word in rows and raw != word):
                continue
            rows[word] = np.asarray(parts[-dimension:], dtype=np.float64)
            if raw == word:
                exact.add(word)
    return EmbeddingTable(rows, dimension)
