"""Two-class segmentation network over RGB plus attention channels.

``full`` is DeepLabv3 on a dilated ResNet-50 (output stride 16, ASPP rates
6/12/18). ``tiny`` keeps the same layout (strided encoder, atrous spatial
pyramid pooling with an image-pooling branch, 1x1 projection, bilinear
upsampling) at a size that trains on a CPU in seconds.

In both cases the first convolution takes 3, 4 or 5 input channels. Its RGB
slice is copied from a pretrained kernel; the extra attention slices are
drawn from a seeded generator.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from lexseg.errors import ConfigurationError, ResourceError, ShapeError
from lexseg.paths import resolve_resource

RESNET50_URL = "https://download.pytorch.org/models/resnet50-11ad3fa6.pth"
BACKBONES = ("tiny", "full")


@dataclass
class ModelConfig:
    backbone: str = "tiny"
    input_channels: int = 5
    num_output_channels: int = 2
    output_stride: int = 2
    atrous_rates: tuple = (1, 2, 4)
    width: int = 16
    init_source: str | None = "fixture"  # backend name for tiny, weights file for full
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.atrous_rates = tuple(int(r) for r in self.atrous_rates)
        if self.backbone not in BACKBONES:
            raise ConfigurationError(f"backbone must be one of {BACKBONES}, got {self.backbone!r}")
        if self.input_channels not in (3, 4, 5):
            raise ConfigurationError(f"input_channels must be 3, 4 or 5, got {self.input_channels}")
        if self.num_output_channels != 2:
            raise ConfigurationError("num_output_channels must be 2")
        if self.width < 1:
            raise ConfigurationError("width must be >= 1")

    @classmethod
    def full(cls, weights: str | None, input_channels: int = 5, seed: int = 0) -> "ModelConfig":
        return cls("full", input_channels, 2, 16, (6, 12, 18), 256, weights, seed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["atrous_rates"] = list(self.atrous_rates)
        return d


class ASPP(nn.Module):
    """1x1 branch, one dilated 3x3 branch per rate, image pooling, 1x1 projection."""

    def __init__(self, in_ch: int, out_ch: int, rates):
        super().__init__()
        self.branches = nn.ModuleList([nn.Sequential(nn.Conv2d(in_ch, out_ch, 1), nn.ReLU())])
        for r in rates:
            self.branches.append(nn.Sequential(nn.Conv2d(in_ch, out_ch, 3, padding=r, dilation=r), nn.ReLU()))
        self.pool = nn.Sequential(nn.AdaptiveAvgPool2d(1), nn.Conv2d(in_ch, out_ch, 1), nn.ReLU())
        self.project = nn.Sequential(nn.Conv2d(out_ch * (len(rates) + 2), out_ch, 1), nn.ReLU())

    def forward(self, x):
        feats = [b(x) for b in self.branches]
        feats.append(self.pool(x).expand(-1, -1, x.shape[2], x.shape[3]))
        return self.project(torch.cat(feats, dim=1))


class TinyDeepLab(nn.Module):
    def __init__(self, config: ModelConfig, stem_out: int = 6):
        super().__init__()
        self.config = config
        w = config.width
        self.stem = nn.Conv2d(config.input_channels, stem_out, 3, padding=1)
        layers, ch, stride = [], stem_out, 1
        while stride < config.output_stride:
            layers += [nn.Conv2d(ch, w, 3, stride=2, padding=1), nn.ReLU()]
            ch, stride = w, stride * 2
        if not layers:
            layers = [nn.Conv2d(ch, w, 3, padding=1), nn.ReLU()]
        self.encoder = nn.Sequential(*layers)
        self.aspp = ASPP(w, w, config.atrous_rates)
        self.classifier = nn.Conv2d(w, config.num_output_channels, 1)

    def forward(self, x):
        size = x.shape[-2:]
        h = self.encoder(F.relu(self.stem(x)))
        out = self.classifier(self.aspp(h))
        return F.interpolate(out, size=size, mode="bilinear", align_corners=False)


class FullDeepLab(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        from torchvision.models import resnet50
        from torchvision.models.segmentation.deeplabv3 import DeepLabHead

        self.config = config
        dilate = {8: [False, True, True], 16: [False, False, True], 32: [False, False, False]}
        if config.output_stride not in dilate:
            raise ConfigurationError("full backbone supports output_stride 8, 16 or 32")
        self.backbone = resnet50(weights=None, replace_stride_with_dilation=dilate[config.output_stride])
        self.backbone.conv1 = nn.Conv2d(config.input_channels, 64, 7, stride=2, padding=3, bias=False)
        self.head = DeepLabHead(2048, config.num_output_channels, config.atrous_rates)

    def forward(self, x):
        size = x.shape[-2:]
        b = self.backbone
        h = b.maxpool(b.relu(b.bn1(b.conv1(x))))
        h = b.layer4(b.layer3(b.layer2(b.layer1(h))))
        return F.interpolate(self.head(h), size=size, mode="bilinear", align_corners=False)

    @property
    def stem(self):
        return self.backbone.conv1


def _pretrained_rgb_kernel(config: ModelConfig):
    """(weight, bias-or-None) for the RGB slice of the first convolution."""
    if config.backbone == "tiny":
        if config.init_source is None:
            return None
        from lexseg.classifier import load_backend

        backend = load_backend(config.init_source)
        first = next(m for m in backend.net if isinstance(m, nn.Conv2d))
        if first.out_channels != int(config.extra.get("stem_channels", 6)):
            raise ConfigurationError(
                f"{config.init_source} has {first.out_channels} first-layer filters; "
                "set extra.stem_channels to match"
            )
        return first.weight.detach().clone(), first.bias.detach().clone()
    path = resolve_resource(config.init_source)
    if path is None or not path.is_file():
        raise ResourceError(
            f"ResNet-50 ImageNet weights not found at {config.init_source!r}. "
            f"Download {RESNET50_URL} and point init_source at the file."
        )
    return torch.load(path, map_location="cpu", weights_only=True), None


def build_model(config: ModelConfig, pretrained: bool = True) -> nn.Module:
    """Fresh model; deterministic in ``config.seed`` and independent of global RNG state.

    ``pretrained=False`` skips the RGB-kernel copy; checkpoint loading uses it
    so that restoring a model never needs the original initialization weights.
    """
    pretrained = _pretrained_rgb_kernel(config) if pretrained else None
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        if config.backbone == "tiny":
            stem_out = int(config.extra.get("stem_channels", 6))
            model = TinyDeepLab(config, stem_out)
        else:
            model = FullDeepLab(config)
    if pretrained is None:
        return model
    with torch.no_grad():
        if config.backbone == "full":
            state = dict(pretrained)
            rgb = state.pop("conv1.weight")
            state = {k: v for k, v in state.items() if not k.startswith("fc.")}
            model.backbone.load_state_dict(state, strict=False)
            model.stem.weight[:, :3] = rgb.to(model.stem.weight.dtype)
        else:
            weight, bias = pretrained
            model.stem.weight[:, :3] = weight.to(model.stem.weight.dtype)
            model.stem.bias.copy_(bias.to(model.stem.bias.dtype))
    return model


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def model_input_channels(model: nn.Module) -> int:
    return model.config.input_channels


def _as_batch(inputs, model) -> torch.Tensor:
    x = torch.as_tensor(np.ascontiguousarray(inputs))
    if x.ndim == 3:
        x = x[None]
    if x.ndim != 4:
        raise ShapeError(f"expected C x h x w or N x C x h x w input, got {tuple(x.shape)}")
    if x.shape[1] != model_input_channels(model):
        raise ShapeError(f"model takes {model_input_channels(model)} channels, input has {x.shape[1]}")
    dtype = next(model.parameters()).dtype
    return x.to(dtype)


def predict_probabilities(model: nn.Module, inputs) -> np.ndarray:
    """Per-pixel (background, foreground) softmax, ``N x 2 x h x w``."""
    x = _as_batch(inputs, model)
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            probs = torch.softmax(model(x), dim=1)
    finally:
        model.train(was_training)
    return probs.double().numpy()


def predict_likelihood(model: nn.Module, inputs) -> np.ndarray:
    """Foreground probability per pixel at the input resolution.

    A single ``C x h x w`` input gives ``h x w``; a batch gives ``N x h x w``.
    """
    single = np.ndim(inputs) == 3
    fg = predict_probabilities(model, inputs)[:, 1]
    return fg[0] if single else fg
