import os
import warnings

import numpy as np
import pytest
import torch

from lexseg.classifier import load_backend
from lexseg.errors import ResourceError
from lexseg.semantics import imagenet_vocabulary, load_ontology
from lexseg.semantics.labels import bundled_path

torch.set_num_threads(1)


@pytest.fixture(scope="session")
def fixture_backend():
    return load_backend("fixture")


@pytest.fixture(scope="session")
def fixture_ontology():
    return load_ontology(bundled_path("fixture_ontology.tsv"))


@pytest.fixture(scope="session")
def imagenet_vocab():
    return imagenet_vocabulary()


@pytest.fixture(scope="session")
def wordnet():
    try:
        return load_ontology()
    except ResourceError as exc:
        pytest.skip(f"WordNet unavailable: {exc}")


def colour_image(size=16, colours=(("red", (2, 2, 8, 8)),), saturation=1.0):
    """uint8 image: mid-grey with axis-aligned boxes of fixture colours."""
    from lexseg.classifier import FIXTURE_PALETTE

    img = np.full((size, size, 3), 0.5)
    for name, (y0, x0, y1, x1) in colours:
        img[y0:y1, x0:x1] = 0.5 + 0.5 * saturation * np.array(FIXTURE_PALETTE[name])
    return np.clip(np.round(img * 255), 0, 255).astype(np.uint8)


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


def pytest_report_header(config):
    return f"LEXSEG_DATA_ROOT={os.environ.get('LEXSEG_DATA_ROOT', '(unset)')}"


def mask_examples(n=32, seed=0, size=24, channels=5):
    """Endless TrainExamples whose first attention channel is the true mask."""
    from lexseg.dataset import synth_shapes_corpus
    from lexseg.pipeline import assemble_input
    from lexseg.segnet import TrainExample

    store = synth_shapes_corpus(n, seed=seed, size=size, max_shapes=2)
    pairs = [(s, lab) for s in store for lab in sorted(s.labels)]
    rng = np.random.default_rng(seed)
    while True:
        sample, label = pairs[int(rng.integers(len(pairs)))]
        mask = sample.mask(label)
        maps = [mask.astype(float), np.zeros(mask.shape)][: channels - 3]
        yield TrainExample(assemble_input(sample.image, maps), mask, label)
