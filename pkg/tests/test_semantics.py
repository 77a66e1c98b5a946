import random
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lexseg.errors import ConfigurationError, InvalidLabelError, LexsegWarning, NoEmbeddingError, ResourceError
from lexseg.semantics import (
    ClassifierVocabulary,
    EmbeddingTable,
    OntologyIndex,
    ProxyLabelSet,
    VocabEntry,
    build_proxy_set,
    load_embeddings,
    load_wordnet,
    prune_by_classifier,
    select_negative_labels,
    tokenize_label,
    word2vec_candidates,
    wordnet_candidates,
)

from conftest import colour_image

# --- labels ---------------------------------------------------------------


@pytest.mark.parametrize(
    "text, tokens",
    [
        ("bottle-screw", ("bottle", "screw")),
        ("car", ("car",)),
        ("tabby, tabby cat", ("tabby", "cat")),
        ("  Studio  Couch ", ("studio", "couch")),
    ],
)
def test_tokenize_examples(text, tokens):
    assert tokenize_label(text).tokens == tokens


@pytest.mark.parametrize("text", ["", "   ", ",-,", None])
def test_tokenize_rejects_empty(text):
    with pytest.raises(InvalidLabelError):
        tokenize_label(text)


label_text = st.text(alphabet="abcXYZ ,-\t", min_size=1, max_size=30).filter(lambda s: any(c.isalpha() for c in s))


@given(label_text)
def test_tokenize_idempotent_and_nonempty(text):
    label = tokenize_label(text)
    assert label.tokens
    assert tokenize_label(" ".join(label.tokens)).tokens == label.tokens
    assert all(t == t.lower() and t for t in label.tokens)


def test_vocabulary_rejects_gaps_and_duplicate_synsets():
    lab = tokenize_label("x")
    with pytest.raises(ConfigurationError):
        ClassifierVocabulary([VocabEntry(0, "n1", lab), VocabEntry(2, "n2", lab)])
    with pytest.raises(ConfigurationError):
        ClassifierVocabulary([VocabEntry(0, "n1", lab), VocabEntry(1, "n1", lab)])


def test_imagenet_vocabulary_shape(imagenet_vocab):
    assert len(imagenet_vocab) == 1000
    assert len({e.synset_id for e in imagenet_vocab}) == 1000
    assert imagenet_vocab.find("studio couch")


# --- ontology -------------------------------------------------------------

DATA_NOUN = """\
  1 This software and database is being provided under a license
00000001 03 n 01 entity 0 000 | root
00000002 05 n 02 animal 0 beast 0 001 @ 00000001 n 0000 | a living thing
00000003 05 n 03 dog 0 domestic_dog 0 Canis_familiaris 0 002 @ 00000002 n 0000 ~ 00000004 n 0000 | a dog
00000004 05 n 01 pug 0 001 @ 00000003 n 0000 | small dog
00000005 05 n 01 Rex 0 001 @i 00000004 n 0000 | a particular pug
"""
INDEX_NOUN = """\
  1 This software and database is being provided under a license
dog n 1 1 @ 1 0 00000003
pug n 1 1 @ 1 0 00000004
"""


@pytest.fixture
def mini_wordnet(tmp_path):
    (tmp_path / "data.noun").write_text(DATA_NOUN)
    (tmp_path / "index.noun").write_text(INDEX_NOUN)
    return load_wordnet(tmp_path)


def test_data_noun_parsing(mini_wordnet):
    assert mini_wordnet.lemmas("n00000003") == ("dog", "domestic_dog", "Canis_familiaris")
    assert mini_wordnet.hypernyms("n00000004") == ("n00000003",)
    # instance hypernyms count as hypernyms; hyponym pointers do not
    assert mini_wordnet.hypernyms("n00000005") == ("n00000004",)
    assert mini_wordnet.hypernyms("n00000003") == ("n00000002",)
    assert mini_wordnet.closure("n00000005") >= {"n00000004", "n00000003", "n00000002", "n00000001"}
    assert mini_wordnet.lookup("dog") == ("n00000003",)
    assert mini_wordnet.lookup("nonesuch") == ()


def test_missing_wordnet_dir(tmp_path):
    with pytest.raises(ResourceError):
        load_wordnet(tmp_path)


def test_cycle_detection_and_terminating_closure():
    onto = OntologyIndex({"a": ["a"], "b": ["b"], "c": ["c"]}, {"a": ["b"], "b": ["c"], "c": ["a"]})
    assert onto.find_cycle()
    assert onto.closure("a") >= {"b", "c"}
    acyclic = OntologyIndex({"a": ["a"], "b": ["b"]}, {"a": ["b"], "b": []})
    assert acyclic.find_cycle() is None


def test_fixture_ontology_is_acyclic(fixture_ontology):
    assert fixture_ontology.find_cycle() is None


def test_real_wordnet_is_acyclic(wordnet):
    assert wordnet.find_cycle() is None


# --- wordnet candidates ---------------------------------------------------


def test_fixture_candidates(fixture_ontology, fixture_backend):
    vocab = fixture_backend.vocabulary
    names = lambda idx: [vocab.label(i) for i in idx]  # noqa: E731
    assert names(wordnet_candidates(tokenize_label("red"), vocab, fixture_ontology)) == ["red", "magenta"]
    assert names(wordnet_candidates(tokenize_label("cyan"), vocab, fixture_ontology)) == ["green", "blue", "cyan"]
    assert names(wordnet_candidates(tokenize_label("blue"), vocab, fixture_ontology)) == ["blue"]


def test_candidates_need_ontology(fixture_backend):
    with pytest.raises(ConfigurationError):
        wordnet_candidates(tokenize_label("red"), fixture_backend.vocabulary, None)


def test_unknown_target_gives_empty_list(fixture_ontology, fixture_backend):
    assert wordnet_candidates(tokenize_label("zzzz"), fixture_backend.vocabulary, fixture_ontology) == []


def test_wordnet_examples(wordnet, imagenet_vocab):
    def labels(target):
        return [imagenet_vocab[i].label for i in wordnet_candidates(tokenize_label(target), imagenet_vocab, wordnet)]

    def has(found, text):
        want = tokenize_label(text)
        return any(set(want.tokens) <= set(lab.tokens) for lab in found)

    sofa = labels("sofa")
    assert has(sofa, "studio couch")
    train = labels("train")
    assert has(train, "bullet train") and not has(train, "steam locomotive")
    dog = labels("dog")
    assert has(dog, "pug") and has(dog, "terrier")
    # deterministic and in vocabulary order
    again = wordnet_candidates(tokenize_label("dog"), imagenet_vocab, wordnet)
    assert again == sorted(again)
    assert again == wordnet_candidates(tokenize_label("dog"), imagenet_vocab, wordnet)


# --- embeddings -----------------------------------------------------------


def toy_table():
    return EmbeddingTable(
        {
            "water": [1.0, 0.0, 0.0],
            "bottle": [0.0, 1.0, 0.0],
            "cat": [0.0, 0.0, 1.0],
            "dog": [0.0, 0.2, 1.0],
            "wine": [0.9, 0.1, 0.0],
        }
    )


def toy_vocab(labels):
    return ClassifierVocabulary(VocabEntry(i, f"n{i:08d}", tokenize_label(t)) for i, t in enumerate(labels))


def test_mean_embedding_rule():
    table = toy_table()
    assert np.array_equal(table.mean_vector(["water", "bottle"]), [0.5, 0.5, 0.0])
    assert np.array_equal(table.mean_vector(["water", "unknownword"]), [1.0, 0.0, 0.0])
    assert table.mean_vector(["unknownword"]) is None


def test_embedding_dimension_checked():
    with pytest.raises(ConfigurationError):
        EmbeddingTable({"a": [1.0, 2.0], "b": [1.0]})


def test_self_similarity_ranks_first():
    vocab = toy_vocab(["dog", "cat", "water bottle", "wine bottle"])
    ranked = word2vec_candidates(tokenize_label("cat"), vocab, toy_table(), 2)
    assert ranked[0][0] == 1
    assert ranked[0][1] == pytest.approx(1.0)


def test_word2vec_tie_break_and_permutation():
    labels = ["cat", "water bottle", "bottle water", "wine", "dog", "cat cat"]
    table = toy_table()
    base = word2vec_candidates(tokenize_label("bottle water"), toy_vocab(labels), table, 3)
    # exact ties resolve by ascending index
    assert [i for i, _ in base[:2]] == [1, 2]
    rng = random.Random(0)
    for _ in range(5):
        order = list(range(len(labels)))
        rng.shuffle(order)
        shuffled = toy_vocab([labels[j] for j in order])
        got = word2vec_candidates(tokenize_label("bottle water"), shuffled, table, 3)
        assert sorted(labels[order[i]] for i, _ in got[:2]) == ["bottle water", "water bottle"]
        assert [round(s, 12) for _, s in got] == [round(s, 12) for _, s in base]


def test_no_embedding_error():
    with pytest.raises(NoEmbeddingError):
        word2vec_candidates(tokenize_label("zzz"), toy_vocab(["cat"]), toy_table(), 1)


def test_glove_reader(tmp_path):
    path = tmp_path / "vec.txt"
    path.write_text("Cat 1 2 3\ncat 4 5 6\nDog 7 8 9\nat&t co 1 1 1\nshort 1\n")
    table = load_embeddings(path, dimension=3)
    assert np.array_equal(table.get("cat"), [4, 5, 6])
    assert np.array_equal(table.get("dog"), [7, 8, 9])
    assert "at&t co" in table and "short" not in table
    only = load_embeddings(path, vocabulary={"dog"}, dimension=3)
    assert len(only) == 1
    with pytest.raises(ResourceError):
        load_embeddings(tmp_path / "missing.txt")


# --- pruning and negatives on the fixture classifier ----------------------


@pytest.fixture(scope="module")
def scene_scores(fixture_backend):
    img = colour_image(24, (("red", (2, 2, 12, 12)), ("green", (14, 14, 22, 22)), ("blue", (2, 14, 6, 22))))
    return img, fixture_backend.classify(img)


def brute_top(scores, allowed, k):
    return sorted(allowed, key=lambda i: (-scores[i], i))[:k]


def test_prune_matches_brute_force(fixture_backend, scene_scores):
    img, scores = scene_scores
    cands = [5, 0, 3, 1, 2, 4]
    got = prune_by_classifier(cands, img, fixture_backend, 5)
    assert [i for i, _ in got] == brute_top(scores, cands, 5)
    assert prune_by_classifier([2, 4, 1], img, fixture_backend, 5).__len__() == 3
    whole = prune_by_classifier(range(6), img, fixture_backend, 1)
    assert whole[0][0] == int(np.argmax(scores))


def test_prune_empty_warns(fixture_backend, scene_scores):
    img, _ = scene_scores
    with pytest.warns(LexsegWarning):
        assert prune_by_classifier([], img, fixture_backend, 5) == []


def test_negative_labels(fixture_backend, scene_scores):
    img, scores = scene_scores
    top2 = brute_top(scores, range(6), 2)
    got = select_negative_labels(img, fixture_backend, top2, 3)
    assert [i for i, _ in got] == brute_top(scores, range(6), 5)[2:5]
    assert select_negative_labels(img, fixture_backend, [], 0) == []
    assert [i for i, _ in select_negative_labels(img, fixture_backend, [], 5)] == brute_top(scores, range(6), 5)
    with pytest.warns(LexsegWarning):
        assert len(select_negative_labels(img, fixture_backend, [0, 1], 10)) == 4


@settings(max_examples=60, deadline=None)
@given(
    scores=st.lists(st.floats(0, 1, allow_nan=False), min_size=6, max_size=6),
    positives=st.sets(st.integers(0, 5)),
    k=st.integers(0, 6),
)
def test_negatives_never_hit_positives(scores, positives, k):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        got = select_negative_labels(None, None, positives, k, scores=np.array(scores))
    idx = [i for i, _ in got]
    assert not set(idx) & positives
    assert len(idx) == min(k, 6 - len(positives))
    assert idx == brute_top(scores, [i for i in range(6) if i not in positives], k)


@settings(max_examples=25, deadline=None)
@given(
    target=st.sampled_from(["red", "green", "blue", "yellow", "cyan", "magenta", "crimson", "teal"]),
    k=st.integers(1, 6),
    boxes=st.lists(st.tuples(st.sampled_from(["red", "green", "blue", "yellow", "cyan", "magenta"]),
                             st.integers(0, 10), st.integers(0, 10)), min_size=1, max_size=3),
)
def test_proxy_set_invariants(fixture_backend, fixture_ontology, target, k, boxes):
    img = colour_image(16, tuple((c, (y, x, y + 5, x + 5)) for c, y, x in boxes))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ps = build_proxy_set(target, img, "wordnet", fixture_backend.vocabulary, fixture_backend, fixture_ontology, k=k)
    assert len(ps.positives) <= k and len(ps.negatives) <= k
    assert not set(ps.positive_indices) & set(ps.negative_indices)
    for seq in (ps.positives, ps.negatives):
        s = [v for _, v in seq]
        assert s == sorted(s, reverse=True)


def test_proxy_set_rejects_violations():
    lab = tokenize_label("x")
    with pytest.raises(ValueError):
        ProxyLabelSet(lab, ((0, 0.5),), ((0, 0.4),), 5)
    with pytest.raises(ValueError):
        ProxyLabelSet(lab, ((0, 0.1), (1, 0.5)), (), 5)
    with pytest.raises(ValueError):
        ProxyLabelSet(lab, ((0, 0.5), (1, 0.4)), (), 1)


def test_build_proxy_set_unknown_mapper(fixture_backend, fixture_ontology):
    img = colour_image()
    with pytest.raises(ConfigurationError):
        build_proxy_set("red", img, "glove", fixture_backend.vocabulary, fixture_backend, fixture_ontology)
    with pytest.raises(ConfigurationError):
        build_proxy_set("red", img, "word2vec", fixture_backend.vocabulary, fixture_backend)


def test_bottle_positives_come_from_candidates(wordnet, imagenet_vocab):
    class Scores:
        # uniform classifier: pruning then keeps the first k candidates by index
        def classify(self, image):
            return np.full(1000, 1e-3)

    bottle = build_proxy_set("bottle", None, "wordnet", imagenet_vocab, Scores(), wordnet, k=5)
    assert 0 < len(bottle.positives) <= 5
    cands = set(wordnet_candidates(tokenize_label("bottle"), imagenet_vocab, wordnet))
    assert set(bottle.positive_indices) <= cands
    bottles = {i for i in cands if "bottle" in imagenet_vocab[i].label.tokens}
    for ref in ["beer bottle", "pill bottle", "water bottle", "wine bottle", "pop bottle"]:
        assert any(set(tokenize_label(ref).tokens) <= set(imagenet_vocab[i].label.tokens) for i in bottles)
