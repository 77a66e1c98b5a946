"""Label strings and the classifier vocabulary they index into."""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from lexseg.errors import ConfigurationError, InvalidLabelError, ResourceError

_SPLIT = re.compile(r"[\s,\-]+")


@dataclass(frozen=True)
class ClassLabel:
    text: str
    tokens: tuple[str, ...]

    def __str__(self):
        return self.text


def tokenize_label(text: str) -> ClassLabel:
    """Lowercase ``text`` and split it on whitespace, commas and hyphens.

    Repeated tokens are collapsed, keeping first-occurrence order, so
    ``"tabby, tabby cat"`` gives ``("tabby", "cat")``.
    """
    if text is None or not str(text).strip():
        raise InvalidLabelError(f"empty label: {text!r}")
    clean = str(text).strip().lower()
    tokens = []
    for tok in _SPLIT.split(clean):
        if tok and tok not in tokens:
            tokens.append(tok)
    if not tokens:
        raise InvalidLabelError(f"label has no word tokens: {text!r}")
    return ClassLabel(text=clean, tokens=tuple(tokens))


def lemma_to_label(lemma: str) -> ClassLabel:
    """WordNet lemmas join words with underscores."""
    return tokenize_label(lemma.replace("_", " "))


def tokens_cover(required: ClassLabel, candidate: ClassLabel) -> bool:
    """True when every token of ``required`` appears in ``candidate``.

    Used to compare reference label strings ("soda bottle") against
    vocabulary entries ("pop bottle, soda bottle").
    """
    return set(required.tokens) <= set(candidate.tokens)


@dataclass(frozen=True)
class VocabEntry:
    class_index: int
    synset_id: str
    label: ClassLabel


class ClassifierVocabulary:
    """Ordered label set a pretrained classifier was trained on."""

    def __init__(self, entries):
        self.entries = tuple(entries)
        indices = [e.class_index for e in self.entries]
        if indices != list(range(len(indices))):
            raise ConfigurationError("class_index values must be contiguous from 0 in file order")
        synsets = [e.synset_id for e in self.entries]
        if len(set(synsets)) != len(synsets):
            raise ConfigurationError("duplicate synset_id in vocabulary")
        self._by_synset = {e.synset_id: e for e in self.entries}

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, class_index: int) -> VocabEntry:
        return self.entries[class_index]

    def __iter__(self):
        return iter(self.entries)

    @property
    def size(self) -> int:
        return len(self.entries)

    def label(self, class_index: int) -> str:
        return self.entries[class_index].label.text

    def by_synset(self, synset_id: str) -> VocabEntry | None:
        return self._by_synset.get(synset_id)

    def find(self, text: str) -> list[int]:
        """Indices of entries whose tokens cover the tokens of ``text``."""
        want = tokenize_label(text)
        return [e.class_index for e in self.entries if tokens_cover(want, e.label)]


def load_vocabulary(path) -> ClassifierVocabulary:
    """Read a ``class_index, synset_id, label_text`` TSV (header optional)."""
    path = Path(path)
    if not path.is_file():
        raise ResourceError(f"vocabulary file not found: {path}")
    entries = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh, delimiter="\t"):
            if not row or row[0].startswith("#") or row[0] == "class_index":
                continue
            if len(row) != 3:
                raise ConfigurationError(f"{path}: expected 3 columns, got {row!r}")
            entries.append(VocabEntry(int(row[0]), row[1].strip(), tokenize_label(row[2])))
    return ClassifierVocabulary(entries)


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("lexseg") / "data" / name))


def imagenet_vocabulary() -> ClassifierVocabulary:
    return load_vocabulary(bundled_path("imagenet1k_vocab.tsv"))
