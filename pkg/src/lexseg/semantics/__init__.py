from lexseg.semantics.embeddings import EmbeddingTable, load_embeddings
from lexseg.semantics.labels import (
    ClassifierVocabulary,
    ClassLabel,
    VocabEntry,
    imagenet_vocabulary,
    load_vocabulary,
    tokenize_label,
    tokens_cover,
)
from lexseg.semantics.ontology import OntologyIndex, find_wordnet_dir, load_ontology, load_ontology_tsv, load_wordnet
from lexseg.semantics.proxies import (
    DEFAULT_K,
    ProxyLabelSet,
    build_proxy_set,
    prune_by_classifier,
    select_negative_labels,
    word2vec_candidates,
    wordnet_candidates,
)

__all__ = [
    "DEFAULT_K",
    "ClassLabel",
    "ClassifierVocabulary",
    "EmbeddingTable",
    "OntologyIndex",
    "ProxyLabelSet",
    "VocabEntry",
    "build_proxy_set",
    "find_wordnet_dir",
    "imagenet_vocabulary",
    "load_embeddings",
    "load_ontology",
    "load_ontology_tsv",
    "load_vocabulary",
    "load_wordnet",
    "prune_by_classifier",
    "select_negative_labels",
    "tokenize_label",
    "tokens_cover",
    "word2vec_candidates",
    "wordnet_candidates",
]
