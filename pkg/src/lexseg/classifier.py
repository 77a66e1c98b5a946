"""Pretrained classifier backends: class probabilities and guided gradients.

A backend owns its preprocessing. Pipeline code hands it plain RGB images
(``h x w x 3``, uint8 or floats in [0, 1]); :meth:`ClassifierBackend.preprocess`
turns those into the normalized ``3 x H x W`` tensors the other methods take.

Two backends ship: ``vgg19-imagenet1k`` (torchvision VGG-19, weights read
from a local file) and ``fixture``, a six-class colour detector whose
weights are written down in closed form so tests never need a download.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
import yaml
from torch import nn

from lexseg.errors import ConfigurationError, ResourceError, ShapeError
from lexseg.paths import resolve_resource
from lexseg.semantics.labels import bundled_path, load_vocabulary

VGG19_URL = "https://download.pytorch.org/models/vgg19-dcbb9e9d.pth"

# Fixture colour classes as signs of (R, G, B) around mid-grey.
FIXTURE_PALETTE = {
    "red": (1, -1, -1),
    "green": (-1, 1, -1),
    "blue": (-1, -1, 1),
    "yellow": (1, 1, -1),
    "cyan": (-1, 1, 1),
    "magenta": (1, -1, 1),
}
FIXTURE_BLUR = np.outer([1.0, 2.0, 1.0], [1.0, 2.0, 1.0]) / 16.0
FIXTURE_DETECTOR_BIAS = -0.5
FIXTURE_INHIBITION = 0.1
FIXTURE_HEAD_GAIN = 10.0
FIXTURE_HEAD_INHIBITION = 0.2


@dataclass
class BackendSpec:
    name: str
    weights_path: str | None = None
    input_size: int | None = None
    mean: tuple = (0.5, 0.5, 0.5)
    std: tuple = (0.5, 0.5, 0.5)
    vocabulary: str | None = None
    ontology: str | None = None
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_file(cls, path) -> "BackendSpec":
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
        known = {k: raw.pop(k) for k in list(raw) if k in cls.__dataclass_fields__ and k != "extra"}
        return cls(**known, extra=raw)

    @classmethod
    def named(cls, name: str, **overrides) -> "BackendSpec":
        path = bundled_path(f"backends/{name}.yaml")
        if not path.is_file():
            raise ConfigurationError(f"unknown backend {name!r}; expected 'vgg19-imagenet1k' or 'fixture'")
        spec = cls.from_file(path)
        for k, v in overrides.items():
            if v is not None:
                setattr(spec, k, v)
        return spec


class _GuidedReLUFunction(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x):
        ctx.save_for_backward(x)
        return x.clamp(min=0)

    @staticmethod
    def backward(ctx, grad_out):
        (x,) = ctx.saved_tensors
        # pass gradient only where the forward input and the upstream gradient are both positive
        return grad_out * (x > 0).to(grad_out.dtype) * (grad_out > 0).to(grad_out.dtype)


class GuidedReLU(nn.Module):
    def forward(self, x):
        return _GuidedReLUFunction.apply(x)


def guided_copy(net: nn.Sequential) -> nn.Sequential:
    """Same layers (shared parameters), every ReLU swapped for a guided one."""
    return nn.Sequential(*[GuidedReLU() if isinstance(m, nn.ReLU) else m for m in net])


def as_image_tensor(x) -> np.ndarray:
    arr = np.asarray(x)
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise ShapeError(f"expected a 3 x h x w image tensor, got shape {arr.shape}")
    if arr.shape[1] < 1 or arr.shape[2] < 1:
        raise ShapeError(f"zero-sized image tensor {arr.shape}")
    return arr


def rgb_to_float(image) -> np.ndarray:
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ShapeError(f"expected an h x w x 3 RGB image, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError("zero-sized image")
    if arr.dtype == np.uint8:
        return arr.astype(np.float64) / 255.0
    return arr.astype(np.float64)


class ClassifierBackend:
    """Wraps a ``nn.Sequential`` classifier that maps images to logits."""

    # Inference and input-gradient calls build independent autograd graphs and
    # never touch parameter .grad, so concurrent calls are safe.
    concurrent = True

    def __init__(self, spec: BackendSpec, net: nn.Sequential, vocabulary, dtype=torch.float32):
        self.spec = spec
        self.name = spec.name
        self.dtype = dtype
        self.net = net.to(dtype).eval()
        for p in self.net.parameters():
            p.requires_grad_(False)
        self.guided_net = guided_copy(self.net).eval()
        self.vocabulary = vocabulary
        self.mean = np.asarray(spec.mean, dtype=np.float64)
        self.std = np.asarray(spec.std, dtype=np.float64)

    @property
    def num_classes(self) -> int:
        return len(self.vocabulary)

    @property
    def input_size(self):
        return self.spec.input_size

    def preprocess(self, image) -> np.ndarray:
        """RGB image -> normalized ``3 x H x W`` tensor at the backend's input size."""
        rgb = rgb_to_float(image)
        chw = rgb.transpose(2, 0, 1)
        if self.input_size:
            t = torch.from_numpy(np.ascontiguousarray(chw))[None]
            t = F.interpolate(t, size=(self.input_size, self.input_size), mode="bilinear", align_corners=False)
            chw = t[0].numpy()
        return (chw - self.mean[:, None, None]) / self.std[:, None, None]

    def _tensor(self, x) -> torch.Tensor:
        return torch.as_tensor(np.ascontiguousarray(x), dtype=self.dtype)

    def logits(self, image_tensor) -> np.ndarray:
        x = self._tensor(as_image_tensor(image_tensor))[None]
        with torch.no_grad():
            return self.net(x)[0].double().numpy()

    def predict_scores(self, image_tensor) -> np.ndarray:
        """Softmax class probabilities for one preprocessed image."""
        return self.predict_scores_batch(as_image_tensor(image_tensor)[None])[0]

    def predict_scores_batch(self, batch) -> np.ndarray:
        batch = np.asarray(batch)
        if batch.ndim != 4:
            raise ShapeError(f"expected N x 3 x h x w batch, got {batch.shape}")
        for item in batch:
            as_image_tensor(item)
        with torch.no_grad():
            logits = self.net(self._tensor(batch)).double()
        return torch.softmax(logits, dim=1).numpy()

    def classify(self, image) -> np.ndarray:
        """Probabilities for a raw RGB image (preprocessing included)."""
        return self.predict_scores(self.preprocess(image))

    def guided_backprop_gradient(self, image_tensor, class_index: int, guided: bool = True) -> np.ndarray:
        """Gradient of one class logit w.r.t. the input pixels.

        With ``guided=False`` this is the ordinary input gradient.
        """
        if not 0 <= int(class_index) < self.num_classes:
            raise IndexError(f"class_index {class_index} outside [0, {self.num_classes})")
        x = self._tensor(as_image_tensor(image_tensor))[None].requires_grad_(True)
        net = self.guided_net if guided else self.net
        logit = net(x)[0, int(class_index)]
        (grad,) = torch.autograd.grad(logit, x)
        return grad[0].double().numpy()


def fixture_network(n_classes: int = len(FIXTURE_PALETTE)) -> nn.Sequential:
    """Two 3x3 convolutions with ReLU, global average pooling, linear head.

    conv1 channel c is a blurred colour detector: sign pattern of colour c
    times a 1-2-1 blur kernel, bias -0.5. conv2 keeps each detector and
    subtracts a tenth of the others. The head scores class c as ten times
    pooled channel c minus a fifth of the other channels. Nothing is random.
    """
    signs = np.array(list(FIXTURE_PALETTE.values()), dtype=np.float64)[:n_classes]
    f64 = {"dtype": torch.float64}
    conv1 = nn.Conv2d(3, n_classes, 3, padding=1, **f64)
    conv2 = nn.Conv2d(n_classes, n_classes, 3, padding=1, **f64)
    head = nn.Linear(n_classes, n_classes, **f64)
    w1 = signs[:, :, None, None] * FIXTURE_BLUR[None, None]
    mix = np.where(np.eye(n_classes, dtype=bool), 1.0, -FIXTURE_INHIBITION)
    w2 = mix[:, :, None, None] * FIXTURE_BLUR[None, None]
    wh = FIXTURE_HEAD_GAIN * np.where(np.eye(n_classes, dtype=bool), 1.0, -FIXTURE_HEAD_INHIBITION)
    with torch.no_grad():
        conv1.weight.copy_(torch.from_numpy(w1))
        conv1.bias.fill_(FIXTURE_DETECTOR_BIAS)
        conv2.weight.copy_(torch.from_numpy(w2))
        conv2.bias.zero_()
        head.weight.copy_(torch.from_numpy(wh))
        head.bias.zero_()
    return nn.Sequential(conv1, nn.ReLU(), conv2, nn.ReLU(), nn.AdaptiveAvgPool2d(1), nn.Flatten(1), head)


def _vgg19_network(weights_path) -> nn.Sequential:
    from torchvision.models import vgg19

    path = resolve_resource(weights_path)
    if path is None or not path.is_file():
        raise ResourceError(
            f"VGG-19 ImageNet weights not found at {weights_path!r}. Download {VGG19_URL} "
            "and pass it with --weights or the backend YAML's weights_path."
        )
    model = vgg19(weights=None)
    state = torch.load(path, map_location="cpu", weights_only=True)
    model.load_state_dict(state)
    layers = [m for m in model.features] + [model.avgpool, nn.Flatten(1)] + [m for m in model.classifier]
    for m in layers:
        if isinstance(m, nn.ReLU):
            m.inplace = False
    return nn.Sequential(*layers)


def _as_spec(spec) -> BackendSpec:
    if isinstance(spec, (str, Path)):
        return BackendSpec.from_file(spec) if Path(spec).suffix in (".yaml", ".yml") else BackendSpec.named(str(spec))
    return spec


def backend_vocabulary(spec):
    """The label vocabulary of a backend, without building its network."""
    spec = _as_spec(spec)
    default = {"fixture": "fixture_vocab.tsv", "vgg19-imagenet1k": "imagenet1k_vocab.tsv"}
    vocab_path = spec.vocabulary or default.get(spec.name)
    if vocab_path is None:
        raise ConfigurationError(f"backend {spec.name!r} names no vocabulary")
    return load_vocabulary(resolve_resource(vocab_path) or bundled_path(vocab_path))


def load_backend(spec) -> ClassifierBackend:
    """Build a backend from a :class:`BackendSpec`, a spec name or a spec file path."""
    spec = _as_spec(spec)
    if spec.name == "fixture":
        vocab = backend_vocabulary(spec)
        return ClassifierBackend(spec, fixture_network(len(vocab)), vocab, dtype=torch.float64)
    if spec.name == "vgg19-imagenet1k":
        vocab = backend_vocabulary(spec)
        return ClassifierBackend(spec, _vgg19_network(spec.weights_path), vocab)
    raise ConfigurationError(f"unknown backend {spec.name!r}; expected 'vgg19-imagenet1k' or 'fixture'")
