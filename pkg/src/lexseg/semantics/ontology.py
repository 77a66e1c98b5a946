"""Noun hierarchy loaded from WordNet flat files or a preprocessed TSV.

Synset ids use the ImageNet convention: ``"n"`` followed by the 8-digit
WordNet 3.0 offset, e.g. ``n02084071`` for dog.
"""

from __future__ import annotations

import csv
import importlib.util
import os
from functools import lru_cache
from pathlib import Path

from lexseg.errors import ConfigurationError, ResourceError

HYPERNYM_POINTERS = ("@", "@i")

WORDNET_HINT = (
    "WordNet 3.0 dict files (index.noun, data.noun) are required. Point "
    "--wordnet or LEXSEG_WORDNET at the directory, place it at "
    "$LEXSEG_DATA_ROOT/wordnet, or `pip install --no-deps wn==0.0.23`, "
    "which bundles a copy."
)


def _lemma_key(text: str) -> str:
    return "_".join(text.strip().lower().split())


class OntologyIndex:
    """Synsets with their lemmas and hypernym edges (child -> parents)."""

    def __init__(self, synsets: dict, hypernyms: dict, lemma_index: dict | None = None):
        self.synsets = {k: tuple(v) for k, v in synsets.items()}
        self.hypernym_edges = {k: tuple(v) for k, v in hypernyms.items()}
        if lemma_index is None:
            lemma_index = {}
            for sid, lemmas in self.synsets.items():
                for lemma in lemmas:
                    lemma_index.setdefault(_lemma_key(lemma), []).append(sid)
        self.lemma_index = {k: tuple(v) for k, v in lemma_index.items()}
        self._closure = {}

    def __len__(self):
        return len(self.synsets)

    def __contains__(self, synset_id):
        return synset_id in self.synsets

    def lookup(self, lemma: str) -> tuple[str, ...]:
        """Synsets for ``lemma`` in sense order; empty on a miss."""
        return self.lemma_index.get(_lemma_key(lemma), ())

    def lemmas(self, synset_id: str) -> tuple[str, ...]:
        return self.synsets.get(synset_id, ())

    def hypernyms(self, synset_id: str) -> tuple[str, ...]:
        return self.hypernym_edges.get(synset_id, ())

    def closure(self, synset_id: str) -> frozenset[str]:
        """All transitive hypernyms of ``synset_id`` (the synset itself excluded)."""
        cached = self._closure.get(synset_id)
        if cached is not None:
            return cached
        seen = set()
        stack = list(self.hypernyms(synset_id))
        while stack:
            sid = stack.pop()
            if sid in seen:
                continue
            seen.add(sid)
            stack.extend(self.hypernyms(sid))
        seen.discard(synset_id)
        result = frozenset(seen)
        self._closure[synset_id] = result
        return result

    def find_cycle(self) -> list[str] | None:
        """Return one hypernym cycle if the graph has any, else None."""
        state = {}
        for root in self.hypernym_edges:
            if root in state:
                continue
            path = []
            stack = [(root, iter(self.hypernyms(root)))]
            state[root] = 1
            path.append(root)
            while stack:
                node, children = stack[-1]
                child = next(children, None)
                if child is None:
                    state[node] = 2
                    stack.pop()
                    path.pop()
                elif state.get(child) == 1:
                    return path[path.index(child):] + [child]
                elif child not in state:
                    state[child] = 1
                    path.append(child)
                    stack.append((child, iter(self.hypernyms(child))))
        return None

    def subset(self, keep) -> "OntologyIndex":
        keep = set(keep)
        return OntologyIndex(
            {k: v for k, v in self.synsets.items() if k in keep},
            {k: [p for p in v if p in keep] for k, v in self.hypernym_edges.items() if k in keep},
        )

    def write_tsv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(["synset_id", "lemmas", "hypernym_ids"])
            for sid in sorted(self.synsets):
                w.writerow([sid, "|".join(self.synsets[sid]), "|".join(self.hypernyms(sid))])


def parse_data_noun(path) -> tuple[dict, dict]:
    synsets, hypernyms = {}, {}
    with open(path, encoding="utf-8", errors="replace") as fh:
        for line in fh:
            if line.startswith("  "):  # license header
                continue
            fields = line.split(" | ", 1)[0].split()
            if len(fields) < 4:
                continue
            sid = "n" + fields[0]
            w_cnt = int(fields[3], 16)
            words = fields[4:4 + 2 * w_cnt:2]
            pos = 4 + 2 * w_cnt
            p_cnt = int(fields[pos])
            parents = []
            for i in range(p_cnt):
                symbol, offset, ptr_pos = fields[pos + 1 + 4 * i: pos + 4 + 4 * i]
                if symbol in HYPERNYM_POINTERS and ptr_pos == "n":
                    parents.append("n" + offset)
            synsets[sid] = words
            hypernyms[sid] = parents
    return synsets, hypernyms


def parse_index_noun(path) -> dict:
    index = {}
    with open(path, encoding="utf-8", errors="replace") as fh:
        for line in fh:
            if line.startswith("  "):
                continue
            fields = line.split()
            if len(fields) < 6:
                continue
            lemma = fields[0]
            synset_cnt = int(fields[2])
            index[lemma] = ["n" + off for off in fields[-synset_cnt:]]
    return index


def load_wordnet(dict_dir) -> OntologyIndex:
    dict_dir = Path(dict_dir)
    data, index = dict_dir / "data.noun", dict_dir / "index.noun"
    if not data.is_file():
        raise ResourceError(f"{data} not found. {WORDNET_HINT}")
    synsets, hypernyms = parse_data_noun(data)
    lemma_index = parse_index_noun(index) if index.is_file() else None
    return OntologyIndex(synsets, hypernyms, lemma_index)


def load_ontology_tsv(path) -> OntologyIndex:
    """Read ``synset_id, lemmas, hypernym_ids`` with ``|``-separated lists."""
    path = Path(path)
    if not path.is_file():
        raise ResourceError(f"ontology TSV not found: {path}")
    synsets, hypernyms = {}, {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh, delimiter="\t"):
            if not row or row[0] == "synset_id" or row[0].startswith("#"):
                continue
            if len(row) < 2:
                raise ConfigurationError(f"{path}: malformed row {row!r}")
            sid = row[0].strip()
            synsets[sid] = [x for x in row[1].split("|") if x]
            hypernyms[sid] = [x for x in (row[2] if len(row) > 2 else "").split("|") if x]
    return OntologyIndex(synsets, hypernyms)


def find_wordnet_dir(explicit=None) -> Path:
    """Locate a WordNet 3.0 dict directory.

    Search order: ``explicit``, ``$LEXSEG_WORDNET``,
    ``$LEXSEG_DATA_ROOT/wordnet``, the data bundled with the ``wn`` 0.0.x
    package, then the usual nltk_data locations.
    """
    candidates = []
    if explicit:
        candidates.append(Path(explicit))
    if os.environ.get("LEXSEG_WORDNET"):
        candidates.append(Path(os.environ["LEXSEG_WORDNET"]))
    if os.environ.get("LEXSEG_DATA_ROOT"):
        candidates.append(Path(os.environ["LEXSEG_DATA_ROOT"]) / "wordnet")
    spec = importlib.util.find_spec("wn")
    if spec is not None and spec.submodule_search_locations:
        for loc in spec.submodule_search_locations:
            candidates.append(Path(loc) / "data" / "wordnet-3.0")
    for base in (Path.home() / "nltk_data", Path("/usr/share/nltk_data"), Path("/usr/local/share/nltk_data")):
        candidates.append(base / "corpora" / "wordnet")
    for c in candidates:
        if (c / "data.noun").is_file():
            return c
    if explicit:
        raise ResourceError(f"{explicit}: no data.noun. {WORDNET_HINT}")
    raise ResourceError(f"WordNet not found. {WORDNET_HINT}")


@lru_cache(maxsize=4)
def _load_cached(path: str) -> OntologyIndex:
    p = Path(path)
    if p.is_file():
        return load_ontology_tsv(p)
    return load_wordnet(p)


def load_ontology(source=None) -> OntologyIndex:
    """Load from a TSV file or WordNet dict directory (cached per path)."""
    if source is not None and Path(source).is_file():
        return _load_cached(str(Path(source).resolve()))
    return _load_cached(str(find_wordnet_dir(source).resolve()))
