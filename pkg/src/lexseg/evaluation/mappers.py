"""Side-by-side WordNet and word-vector proxy lists against reference labels."""

from __future__ import annotations

from dataclasses import dataclass

from lexseg.errors import NoEmbeddingError
from lexseg.evaluation.references import WORD2VEC_REFERENCE, WORDNET_REFERENCE
from lexseg.semantics.labels import tokenize_label, tokens_cover
from lexseg.semantics.proxies import DEFAULT_K, word2vec_candidates, wordnet_candidates


def missing_labels(required, indices, vocab) -> list[str]:
    """Reference labels not covered (token-wise) by any of the given entries."""
    labels = [vocab[i].label for i in indices]
    return [r for r in required if not any(tokens_cover(tokenize_label(r), lab) for lab in labels)]


@dataclass
class MapperRow:
    target: str
    wordnet: list  # class indices, vocabulary order
    word2vec: list | None  # (class index, cosine) pairs, best first
    wordnet_missing: list
    word2vec_missing: list | None

    @property
    def wordnet_pass(self) -> bool | None:
        return None if self.wordnet is None else not self.wordnet_missing

    @property
    def word2vec_pass(self) -> bool | None:
        return None if self.word2vec_missing is None else not self.word2vec_missing


def compare_mappers(targets, vocab, ontology, table=None, k: int = DEFAULT_K,
                    wordnet_reference=WORDNET_REFERENCE, word2vec_reference=WORD2VEC_REFERENCE) -> list[MapperRow]:
    """One row per target. Without an embedding table the word-vector columns are ``None``.

    A row fails on a mapper iff some reference label for that target is absent.
    """
    rows = []
    for target in targets:
        wn = wordnet_candidates(tokenize_label(target), vocab, ontology)
        w2v = None
        if table is not None:
            try:
                w2v = word2vec_candidates(tokenize_label(target), vocab, table, k)
            except NoEmbeddingError:
                w2v = []
        wn_missing = missing_labels(wordnet_reference.get(target, ()), wn, vocab)
        w2v_missing = None
        if w2v is not None:
            w2v_missing = missing_labels(word2vec_reference.get(target, ()), [i for i, _ in w2v], vocab)
        rows.append(MapperRow(target, wn, w2v, wn_missing, w2v_missing))
    return rows


def format_comparison(rows, vocab) -> str:
    def fmt(flag):
        return "n/a" if flag is None else ("pass" if flag else "FAIL")

    lines = ["target\twordnet\twordnet_check\tword2vec\tword2vec_check"]
    for r in rows:
        wn = "; ".join(vocab.label(i) for i in r.wordnet)
        w2v = "n/a" if r.word2vec is None else "; ".join(vocab.label(i) for i, _ in r.word2vec)
        lines.append(f"{r.target}\t{wn}\t{fmt(r.wordnet_pass)}\t{w2v}\t{fmt(r.word2vec_pass)}")
    return "\n".join(lines) + "\n"
