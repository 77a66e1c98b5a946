"""Map a target label to positive and negative proxy labels.

Positive proxies are vocabulary entries that are semantically related to
the target; negative proxies are whatever else the classifier sees in the
image. Both lists are capped at ``k`` entries.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from lexseg.errors import ConfigurationError, LexsegWarning, NoEmbeddingError
from lexseg.semantics.labels import ClassLabel, lemma_to_label, tokenize_label

DEFAULT_K = 5
MAPPERS = ("wordnet", "word2vec")


@dataclass(frozen=True)
class ProxyLabelSet:
    target: ClassLabel
    positives: tuple[tuple[int, float], ...]
    negatives: tuple[tuple[int, float], ...]
    k_max: int
    flags: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if len(self.positives) > self.k_max or len(self.negatives) > self.k_max:
            raise ValueError("proxy list longer than k_max")
        pos = {i for i, _ in self.positives}
        if pos & {i for i, _ in self.negatives}:
            raise ValueError("positives and negatives overlap")
        for seq in (self.positives, self.negatives):
            scores = [s for _, s in seq]
            if any(a < b for a, b in zip(scores, scores[1:])):
                raise ValueError("proxy scores must be non-increasing")

    @property
    def positive_indices(self) -> list[int]:
        return [i for i, _ in self.positives]

    @property
    def negative_indices(self) -> list[int]:
        return [i for i, _ in self.negatives]


def resolve_target(target: ClassLabel, ontology) -> list[str]:
    """Synsets for the target: the whole phrase first, then word by word."""
    found = list(ontology.lookup(target.text))
    if not found and len(target.tokens) > 1:
        for tok in target.tokens:
            for sid in ontology.lookup(tok):
                if sid not in found:
                    found.append(sid)
    return found


def semantic_tokens(target: ClassLabel, ontology) -> set[str]:
    """Words of the target, of its synonyms and of all their hypernyms."""
    words = set(target.tokens)
    synsets = resolve_target(target, ontology)
    related = set(synsets)
    for sid in synsets:
        related |= ontology.closure(sid)
    for sid in related:
        for lemma in ontology.lemmas(sid):
            words.update(lemma_to_label(lemma).tokens)
    return words


def wordnet_candidates(target: ClassLabel, vocab, ontology) -> list[int]:
    """Vocabulary entries related to ``target`` through WordNet.

    An entry matches if it shares a word with the target, a synonym or any
    hypernym of those, or if the target's synset lies on the entry's own
    hypernym chain (so "dog" picks up "pug"). Results keep vocabulary order.
    """
    if ontology is None:
        raise ConfigurationError("wordnet mapper needs a loaded ontology")
    if isinstance(target, str):
        target = tokenize_label(target)
    words = semantic_tokens(target, ontology)
    synsets = set(resolve_target(target, ontology))
    out = []
    for entry in vocab:
        if words.intersection(entry.label.tokens):
            out.append(entry.class_index)
            continue
        if entry.synset_id in synsets or synsets & ontology.closure(entry.synset_id):
            out.append(entry.class_index)
    return out


def _top_k(scores: dict, k: int) -> list[tuple[int, float]]:
    # descending score, ascending class index on ties
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return [(int(i), float(s)) for i, s in ranked[:k]]


def word2vec_candidates(target: ClassLabel, vocab, table, k: int) -> list[tuple[int, float]]:
    """The ``k`` vocabulary entries closest to ``target`` by cosine similarity.

    Multi-word labels are embedded as the mean of their word vectors; words
    missing from the table are skipped, and entries with no known word are
    left out.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if isinstance(target, str):
        target = tokenize_label(target)
    query = table.mean_vector(target.tokens)
    if query is None:
        raise NoEmbeddingError(f"no embeddable token in {target.text!r}")
    qn = np.linalg.norm(query)
    sims = {}
    for entry in vocab:
        vec = table.mean_vector(entry.label.tokens)
        if vec is None:
            continue
        denom = qn * np.linalg.norm(vec)
        sims[entry.class_index] = float(np.dot(query, vec) / denom) if denom > 0 else 0.0
    return _top_k(sims, k)


def prune_by_classifier(candidates, image, classifier, k: int, scores=None) -> list[tuple[int, float]]:
    """Keep the ``k`` candidates the classifier finds most probable in ``image``.

    ``scores`` may carry precomputed class probabilities for the image.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    candidates = list(dict.fromkeys(int(c) for c in candidates))
    if not candidates:
        warnings.warn("no positive proxy candidates; positive map will be zero", LexsegWarning, stacklevel=2)
        return []
    if scores is None:
        scores = classifier.classify(image)
    return _top_k({c: float(scores[c]) for c in candidates}, k)


def select_negative_labels(image, classifier, positives, k: int, scores=None) -> list[tuple[int, float]]:
    """The ``k`` most probable classes in ``image`` that are not positives."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return []
    if scores is None:
        scores = classifier.classify(image)
    excluded = {int(p) for p in positives}
    remaining = {i: float(s) for i, s in enumerate(scores) if i not in excluded}
    if k > len(remaining):
        warnings.warn(
            f"asked for {k} negative labels but only {len(remaining)} remain", LexsegWarning, stacklevel=2
        )
    return _top_k(remaining, k)


def build_proxy_set(
    target_text,
    image,
    mapper: str,
    vocab,
    classifier,
    ontology=None,
    table=None,
    k: int = DEFAULT_K,
) -> ProxyLabelSet:
    """Candidate generation, classifier pruning and negative selection in one go."""
    if k < 1:
        raise ValueError("k must be >= 1")
    target = tokenize_label(target_text) if isinstance(target_text, str) else target_text
    if mapper == "wordnet":
        candidates = wordnet_candidates(target, vocab, ontology)
    elif mapper == "word2vec":
        if table is None:
            raise ConfigurationError("word2vec mapper needs an embedding table")
        candidates = [i for i, _ in word2vec_candidates(target, vocab, table, k)]
    else:
        raise ConfigurationError(f"unknown mapper {mapper!r}; expected one of {MAPPERS}")
    scores = classifier.classify(image)
    flags = []
    positives = prune_by_classifier(candidates, image, classifier, k, scores=scores)
    negatives = select_negative_labels(image, classifier, [i for i, _ in positives], k, scores=scores)
    if not positives:
        flags.append("empty_positives")
    if len(negatives) < k:
        flags.append("short_negatives")
    return ProxyLabelSet(target, tuple(positives), tuple(negatives), k, tuple(flags))
