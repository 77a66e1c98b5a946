"""Episodic training loop, hyperparameters and checkpoints."""

from __future__ import annotations

import io
import os
import tempfile
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
import yaml

from lexseg.errors import ConfigurationError, DataLeakError, ResourceError, ShapeError
from lexseg.segnet.model import ModelConfig, build_model

IGNORE_INDEX = 255
CHECKPOINT_FORMAT = "lexseg-segnet"


@dataclass
class TrainHyper:
    steps: int = 1000
    batch_size: int = 8
    optimizer: str = "adam"
    lr: float = 3e-3
    momentum: float = 0.9
    weight_decay: float = 0.0
    poly_power: float = 0.9
    crop_size: int | None = None
    checkpoint_every: int = 0
    seed: int = 0
    variant: str = "sem-2c-neg"

    def __post_init__(self):
        if self.steps < 0:
            raise ConfigurationError("steps must be >= 0")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigurationError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")

    @classmethod
    def from_dict(cls, raw: dict) -> "TrainHyper":
        names = {f.name for f in fields(cls)}
        unknown = set(raw) - names
        if unknown:
            raise ConfigurationError(f"unknown training keys: {sorted(unknown)}")
        return cls(**raw)


def load_train_config(path) -> tuple[ModelConfig, TrainHyper]:
    """Read a YAML file with ``model:`` and ``train:`` sections."""
    path = Path(path)
    if not path.is_file():
        raise ResourceError(f"training config {path} not found")
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    return ModelConfig(**raw.get("model", {})), TrainHyper.from_dict(raw.get("train", {}))


@dataclass
class TrainExample:
    inputs: np.ndarray  # C x h x w
    mask: np.ndarray  # h x w, {0, 1} or IGNORE_INDEX
    label: str = ""


@dataclass
class TrainState:
    step: int = 0
    loss_history: list = field(default_factory=list)
    optimizer_state: dict | None = None
    checkpoint_path: str | None = None


def crop_or_pad(inputs, mask, size: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Pad with zeros (mask: ignore) up to ``size``, then take a random ``size`` crop."""
    c, h, w = inputs.shape
    ph, pw = max(0, size - h), max(0, size - w)
    if ph or pw:
        inputs = np.pad(inputs, ((0, 0), (0, ph), (0, pw)))
        mask = np.pad(mask, ((0, ph), (0, pw)), constant_values=IGNORE_INDEX)
        h, w = h + ph, w + pw
    y = int(rng.integers(0, h - size + 1))
    x = int(rng.integers(0, w - size + 1))
    return inputs[:, y : y + size, x : x + size], mask[y : y + size, x : x + size]


def collate(examples, crop_size, rng) -> tuple[torch.Tensor, torch.Tensor]:
    xs, ys = [], []
    for ex in examples:
        x, y = np.asarray(ex.inputs), np.asarray(ex.mask)
        if crop_size:
            x, y = crop_or_pad(x, y, crop_size, rng)
        xs.append(x)
        ys.append(y)
    if len({x.shape for x in xs}) != 1:
        raise ShapeError("examples differ in size; set crop_size")
    return torch.from_numpy(np.stack(xs)), torch.from_numpy(np.stack(ys).astype(np.int64))


def segmentation_loss(model, inputs: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Mean per-pixel two-class cross-entropy, ignoring ``IGNORE_INDEX`` pixels."""
    dtype = next(model.parameters()).dtype
    logits = model(inputs.to(dtype))
    if not (targets != IGNORE_INDEX).any():
        return logits.sum() * 0.0
    return F.cross_entropy(logits, targets, ignore_index=IGNORE_INDEX)


def make_optimizer(model, hyper: TrainHyper):
    params = [p for p in model.parameters() if p.requires_grad]
    if hyper.optimizer == "adam":
        return torch.optim.Adam(params, lr=hyper.lr, weight_decay=hyper.weight_decay)
    return torch.optim.SGD(params, lr=hyper.lr, momentum=hyper.momentum, weight_decay=hyper.weight_decay)


def poly_lr(base: float, step: int, total: int, power: float) -> float:
    return base * (1.0 - step / total) ** power if total > 0 else base


def check_episode(label: str, forbidden) -> None:
    if forbidden and label in forbidden:
        raise DataLeakError(f"training episode carries held-out label {label!r}")


def train(model, examples, steps: int, hyper: TrainHyper, state: TrainState | None = None,
          checkpoint_dir=None, forbidden_labels=None) -> TrainState:
    """Run optimizer steps until ``state.step == steps``.

    ``examples`` is an iterator of :class:`TrainExample`. Any example whose
    label is in ``forbidden_labels`` (default: the iterator's own
    ``forbidden_labels`` attribute, if any) aborts with :class:`DataLeakError`.
    With ``checkpoint_dir`` set, a checkpoint is written every
    ``hyper.checkpoint_every`` steps and always at the final step.
    """
    state = state or TrainState()
    if forbidden_labels is None:
        forbidden_labels = getattr(examples, "forbidden_labels", None)
    forbidden = set(forbidden_labels or ())
    optimizer = make_optimizer(model, hyper)
    if state.optimizer_state is not None:
        optimizer.load_state_dict(state.optimizer_state)
    rng = np.random.default_rng([hyper.seed, state.step])
    it = iter(examples)
    model.train()
    while state.step < steps:
        batch = []
        for _ in range(hyper.batch_size):
            ex = next(it)
            check_episode(ex.label, forbidden)
            batch.append(ex)
        x, y = collate(batch, hyper.crop_size, rng)
        for group in optimizer.param_groups:
            # the schedule spans the planned run, so stopping early and resuming matches one long run
            group["lr"] = poly_lr(hyper.lr, state.step, max(steps, hyper.steps), hyper.poly_power)
        optimizer.zero_grad()
        loss = segmentation_loss(model, x, y)
        loss.backward()
        optimizer.step()
        state.step += 1
        state.loss_history.append(float(loss.detach()))
        if checkpoint_dir and hyper.checkpoint_every and state.step % hyper.checkpoint_every == 0:
            state.optimizer_state = optimizer.state_dict()
            save_checkpoint(Path(checkpoint_dir) / f"step-{state.step:06d}.pt", model, state, hyper)
    model.eval()
    state.optimizer_state = optimizer.state_dict()
    if checkpoint_dir:
        final = Path(checkpoint_dir) / f"step-{state.step:06d}.pt"
        if not final.exists() or hyper.checkpoint_every == 0 or state.step % hyper.checkpoint_every:
            save_checkpoint(final, model, state, hyper)
        state.checkpoint_path = str(final)
    return state


def save_checkpoint(path, model, state: TrainState, hyper: TrainHyper | None = None, metadata=None) -> Path:
    """Write config, step, weights, optimizer state and loss history atomically."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": 1,
        "model_config": model.config.to_dict(),
        "hyper": asdict(hyper) if hyper is not None else None,
        "step": state.step,
        "state_dict": model.state_dict(),
        "optimizer": state.optimizer_state,
        "loss_history": list(state.loss_history),
        "metadata": dict(metadata or {}),
    }
    buf = io.BytesIO()
    torch.save(payload, buf)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".ckpt-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(buf.getvalue())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    state.checkpoint_path = str(path)
    return path


def load_checkpoint(path):
    """Returns ``(model, state, hyper, metadata)``; the model is in eval mode."""
    path = Path(path)
    if not path.is_file():
        raise ResourceError(f"checkpoint {path} not found")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise ConfigurationError(f"{path} is not a segmentation checkpoint")
    config = ModelConfig(**payload["model_config"])
    model = build_model(config, pretrained=False)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    state = TrainState(payload["step"], list(payload["loss_history"]), payload["optimizer"], str(path))
    hyper = TrainHyper(**payload["hyper"]) if payload.get("hyper") else None
    return model, state, hyper, payload.get("metadata", {})
