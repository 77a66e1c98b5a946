import warnings

import numpy as np
import pytest

from lexseg.errors import ConfigurationError, DataLeakError, ShapeError
from lexseg.pipeline import VARIANTS, AttentionBuilder, TrainingExamples, assemble_input, parse_variant, segment
from lexseg.postprocess import threshold_baseline
from lexseg.segnet import ModelConfig, build_model

from conftest import colour_image

pytestmark = pytest.mark.filterwarnings("ignore::lexseg.errors.LexsegWarning")


@pytest.fixture
def builder(fixture_backend, fixture_ontology):
    return AttentionBuilder(fixture_backend, fixture_ontology)


@pytest.fixture
def scene():
    img = colour_image(20, (("red", (2, 2, 10, 10)), ("blue", (12, 12, 19, 19))))
    gt = np.zeros((20, 20), np.uint8)
    gt[2:10, 2:10] = 1
    return img, gt


def test_parse_variant_spellings():
    for spelling in ("SEM-2-C-NEG", "sem-2c-neg", "sem_2_c_neg", "Sem2CNeg"):
        assert parse_variant(spelling).tag == "SEM-2-C-NEG"
    assert parse_variant("oracle").tag == "ORACLE"
    with pytest.raises(ConfigurationError):
        parse_variant("sem-3c-neg")


@pytest.mark.parametrize("tag", list(VARIANTS))
def test_channel_wiring(builder, scene, tag, quiet):
    img, gt = scene
    att = builder.build(img, "red", tag, gt_mask=gt)
    want = {"SEM-0-C-NONE": 3, "SEM-1-C-RAND": 4, "SEM-1-C-GT": 4}.get(tag, 5)
    assert att.array.shape == (want, 20, 20) and att.array.dtype == np.float32
    assert VARIANTS[tag].channels == want
    extra = att.array[3:]
    assert (extra >= 0).all() and (extra <= 1).all()


def test_oracle_uses_truth_then_negative(builder, scene, quiet):
    img, gt = scene
    oracle = builder.build(img, "red", "ORACLE", gt_mask=gt)
    neg = builder.build(img, "red", "SEM-2-C-NEG")
    assert np.array_equal(oracle.array[3], gt.astype(np.float32))
    assert np.array_equal(oracle.array[4], neg.array[4])
    with pytest.raises(ConfigurationError):
        builder.build(img, "red", "ORACLE")


def test_positive_and_negative_maps_differ(builder, scene):
    img, _ = scene
    att = builder.build(img, "red", "SEM-2-C-NEG")
    assert att.proxies.positive_indices[0] == 0
    assert 0 not in att.proxies.negative_indices
    assert att.array[3, 2:10, 2:10].mean() > att.array[3, 12:19, 12:19].mean()


def test_random_labels_are_seeded(fixture_backend, fixture_ontology):
    a = AttentionBuilder(fixture_backend, fixture_ontology, seed=1).random_labels("img", "red")
    b = AttentionBuilder(fixture_backend, fixture_ontology, seed=1).random_labels("img", "red")
    c = AttentionBuilder(fixture_backend, fixture_ontology, seed=1).random_labels("img2", "red")
    assert a == b and len(a) == 5 and len(set(a)) == 5
    assert isinstance(c, list)


def test_assemble_input_validation():
    img = np.zeros((4, 4, 3), np.uint8)
    with pytest.raises(ShapeError):
        assemble_input(img, [np.zeros((3, 4))])
    with pytest.raises(ValueError):
        assemble_input(img, [np.full((4, 4), 1.5)])
    x = assemble_input(img, [np.ones((4, 4))])
    assert x.shape == (4, 4, 4) and np.allclose(x[:3], -1.0)


def test_no_grabcut_is_threshold(builder, scene):
    img, _ = scene
    model = build_model(ModelConfig())
    out = segment(img, "red", model, builder, "NO-GRABCUT")
    assert out.annotation is None
    assert np.array_equal(out.mask, threshold_baseline(out.likelihood, 0.5))
    same = segment(img, "red", model, builder, "SEM-2-C-NEG", grabcut=False)
    assert np.array_equal(same.mask, out.mask)


def test_segment_with_grabcut_keeps_seeds(builder, scene):
    img, _ = scene
    model = build_model(ModelConfig())
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out = segment(img, "red", model, builder, "SEM-2-C-NEG")
    codes = out.annotation.codes
    assert out.mask.shape == (20, 20)
    assert not out.mask[codes == 0].any()
    assert out.mask[codes == 3].all()


def test_model_variant_mismatch(builder, scene):
    img, _ = scene
    with pytest.raises(ShapeError):
        segment(img, "red", build_model(ModelConfig(input_channels=3)), builder, "SEM-2-C-NEG")


def test_training_examples_block_leaks(builder, scene):
    img, gt = scene

    class Ep:
        target_label = "red"
        image = img
        mask = gt

        class sample:
            image_id = "x"

    class Stream(list):
        forbidden_labels = frozenset({"red"})

    with pytest.raises(DataLeakError):
        next(iter(TrainingExamples(Stream([Ep()]), builder, "SEM-2-C-NEG")))
