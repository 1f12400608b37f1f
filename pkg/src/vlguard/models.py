"""Desk-scale toy recognizer and frame-label scorer.

Both models are small torch networks run entirely in float64 (the
detector statistics downstream stay in 64-bit, and double precision keeps
finite-difference gradient checks tight). They are deliberately distinct
modalities: the recognizer is a spatio-temporal 3D convnet over the whole
clip, the scorer a per-frame dual encoder (frame embeddings against a
learned label-embedding table) trained with a contrastive objective.
Training is bitwise deterministic on one machine for a fixed seed: torch
seeding covers initialization, and per-epoch data order comes from a
numpy generator keyed by (seed, epoch).

Checkpoint container (``save_checkpoint``/``load_checkpoint``): a single
``.npz`` holding a JSON header (format version, contract type, label
vocabulary, seed, config and its digest, epochs completed) plus one array
per parameter and the Adam state needed to resume training. Format
version 1; layout changes within a major version must stay readable.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from vlguard.contracts import RecognizerContract, ScorerContract
from vlguard.detector import ClassProbabilities, SimilarityMatrix
from vlguard.video import LabelVocabulary, VideoTensor, sample_frame_indices

CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class RecognizerConfig:
    seed: int = 7
    epochs: int = 12
    learning_rate: float = 3e-3
    batch_size: int = 16
    n_frames: int = 16
    channels: tuple[int, int, int] = (8, 16, 32)


@dataclass(frozen=True)
class ScorerConfig:
    seed: int = 13
    epochs: int = 10
    learning_rate: float = 3e-3
    batch_size: int = 64
    embed_dim: int = 32
    frames_per_clip: int = 4
    temperature: float = 1.0


def config_digest(config) -> str:
    payload = json.dumps(asdict(config), sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()


def _seeded_rng(*key) -> np.random.Generator:
    return np.random.default_rng(list(key))


class _VideoNet(nn.Module):
    """Three normalized 3D-conv stages into a small linear class head.

    The head weights are scaled down at init so an untrained model emits
    near-uniform probabilities.
    """

    def __init__(self, n_classes: int, channels=(8, 16, 32), in_channels: int = 3):
        super().__init__()
        c1, c2, c3 = channels
        self.conv1 = nn.Conv3d(in_channels, c1, 3, stride=(1, 2, 2), padding=1)
        self.conv2 = nn.Conv3d(c1, c2, 3, stride=2, padding=1)
        self.conv3 = nn.Conv3d(c2, c3, 3, stride=2, padding=1)
        self.norm1 = nn.GroupNorm(4, c1)
        self.norm2 = nn.GroupNorm(4, c2)
        self.norm3 = nn.GroupNorm(4, c3)
        self.gap = nn.AdaptiveAvgPool3d((2, 2, 2))
        self.head = nn.Linear(c3 * 8, n_classes)
        with torch.no_grad():
            self.head.weight.mul_(0.1)
            self.head.bias.zero_()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = torch.relu(self.norm1(self.conv1(x)))
        x = torch.relu(self.norm2(self.conv2(x)))
        x = torch.relu(self.norm3(self.conv3(x)))
        x = self.gap(x).flatten(1)
        return self.head(x)


class _FrameEncoder(nn.Module):
    """Per-frame conv encoder emitting L2-normalized embeddings."""

    def __init__(self, embed_dim: int = 32, in_channels: int = 3):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, 8, 3, stride=2, padding=1)
        self.conv2 = nn.Conv2d(8, 16, 3, stride=2, padding=1)
        self.conv3 = nn.Conv2d(16, 32, 3, stride=2, padding=1)
        self.norm1 = nn.GroupNorm(4, 8)
        self.norm2 = nn.GroupNorm(4, 16)
        self.norm3 = nn.GroupNorm(4, 32)
        self.fc = nn.Linear(32 * 4, embed_dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = torch.relu(self.norm1(self.conv1(x)))
        x = torch.relu(self.norm2(self.conv2(x)))
        x = torch.relu(self.norm3(self.conv3(x)))
        # 2x2 spatial cells keep coarse layout (where the tail points)
        x = nn.functional.adaptive_avg_pool2d(x, 2).flatten(1)
        emb = self.fc(x)
        return emb / emb.norm(dim=1, keepdim=True).clamp_min(1e-12)


class _DualEncoder(nn.Module):
    """Frame encoder + label-embedding table + learnable logit scale."""

    MAX_LOG_SCALE = float(np.log(100.0))

    def __init__(self, n_labels: int, embed_dim: int = 32, in_channels: int = 3):
        super().__init__()
        self.encoder = _FrameEncoder(embed_dim, in_channels)
        self.label_embed = nn.Parameter(torch.randn(n_labels, embed_dim) / embed_dim**0.5)
        self.log_scale = nn.Parameter(torch.tensor(float(np.log(10.0))))

    def scores(self, frames: torch.Tensor) -> torch.Tensor:
        emb = self.encoder(frames)
        labels = self.label_embed / self.label_embed.norm(dim=1, keepdim=True).clamp_min(1e-12)
        scale = self.log_scale.clamp(max=self.MAX_LOG_SCALE).exp()
        return scale * emb @ labels.T


def _frames_to_tensor(frames: np.ndarray) -> torch.Tensor:
    """(N, H, W, C) float to a (C, N, H, W) double tensor."""
    return torch.from_numpy(np.ascontiguousarray(frames.astype(np.float64))).permute(3, 0, 1, 2)


class ToyVideoRecognizer(RecognizerContract):
    """Recognizer contract around a trained _VideoNet."""

    def __init__(self, module: _VideoNet, vocabulary: LabelVocabulary,
                 config: RecognizerConfig, training_state: dict | None = None):
        self.module = module.double().eval()
        self.vocabulary = vocabulary
        self.config = config
        self.training_state = training_state or {}

    def _check(self, video: VideoTensor) -> None:
        if video.frames.shape[-1] != self.module.conv1.in_channels:
            raise ValueError(
                f"channel mismatch: model expects {self.module.conv1.in_channels}, "
                f"clip has {video.frames.shape[-1]}")

    def _logits(self, frames: torch.Tensor) -> torch.Tensor:
        idx = sample_frame_indices(frames.shape[1], self.config.n_frames)
        sampled = frames[:, torch.from_numpy(idx)]
        return self.module(sampled.unsqueeze(0))[0]

    def predict(self, video: VideoTensor) -> ClassProbabilities:
        self._check(video)
        with torch.no_grad():
            logits = self._logits(_frames_to_tensor(video.frames))
            p = torch.softmax(logits, dim=0).numpy()
        return ClassProbabilities(p / p.sum(),
                                  label_vocabulary_id=self.vocabulary.vocabulary_id)

    def gradient(self, video: VideoTensor, label_index: int) -> np.ndarray:
        self._check(video)
        if not 0 <= label_index < len(self.vocabulary):
            raise ValueError(f"label index {label_index} out of range")
        x = torch.from_numpy(np.ascontiguousarray(video.frames.astype(np.float64)))
        x.requires_grad_(True)
        logits = self._logits(x.permute(3, 0, 1, 2))
        loss = nn.functional.cross_entropy(logits.unsqueeze(0),
                                           torch.tensor([label_index]))
        (g,) = torch.autograd.grad(loss, x)
        return g.numpy()


class ToyFrameLabelScorer(ScorerContract):
    """Scorer contract around a trained _DualEncoder.

    ``temperature`` divides the raw scores; 1.0 leaves the model's learned
    logit scale in charge.
    """

    def __init__(self, module: _DualEncoder, vocabulary: LabelVocabulary,
                 config: ScorerConfig, training_state: dict | None = None):
        self.module = module.double().eval()
        self.vocabulary = vocabulary
        self.config = config
        self.training_state = training_state or {}

    def similarity(self, frames: np.ndarray, vocabulary: LabelVocabulary) -> SimilarityMatrix:
        if vocabulary.vocabulary_id != self.vocabulary.vocabulary_id:
            raise ValueError(
                f"scorer trained on vocabulary {self.vocabulary.vocabulary_id!r}, "
                f"got {vocabulary.vocabulary_id!r}")
        frames = np.asarray(frames)
        if frames.ndim != 4:
            raise ValueError(f"expected (N, H, W, C) frames, got shape {frames.shape}")
        x = torch.from_numpy(np.ascontiguousarray(frames.astype(np.float64)))
        x = x.permute(0, 3, 1, 2)
        with torch.no_grad():
            scores = self.module.scores(x).numpy() / self.config.temperature
        return SimilarityMatrix(scores)


def _validate_dataset(dataset) -> None:
    counts = dataset.class_counts()
    if len(counts) < 2:
        raise ValueError(f"degenerate dataset: {len(counts)} class(es); need >= 2")


def _clip_batch(dataset, indices, n_frames: int) -> torch.Tensor:
    clips = []
    for i in indices:
        frames = dataset.clips[i].frames
        idx = sample_frame_indices(frames.shape[0], n_frames)
        clips.append(_frames_to_tensor(frames[idx]))
    return torch.stack(clips)


def _adam_state_arrays(optimizer, named_params) -> dict[str, np.ndarray]:
    arrays: dict[str, np.ndarray] = {}
    for name, param in named_params:
        state = optimizer.state.get(param)
        if not state:
            continue
        arrays[f"opt/exp_avg/{name}"] = state["exp_avg"].numpy()
        arrays[f"opt/exp_avg_sq/{name}"] = state["exp_avg_sq"].numpy()
        arrays[f"opt/step/{name}"] = np.asarray(float(state["step"]))
    return arrays


def _restore_adam_state(optimizer, named_params, arrays: dict) -> None:
    for name, param in named_params:
        key = f"opt/exp_avg/{name}"
        if key not in arrays:
            continue
        optimizer.state[param] = {
            "step": torch.tensor(float(arrays[f"opt/step/{name}"])),
            "exp_avg": torch.from_numpy(np.array(arrays[key])),
            "exp_avg_sq": torch.from_numpy(np.array(arrays[f"opt/exp_avg_sq/{name}"])),
        }


def toy_recognizer_train(dataset, config: RecognizerConfig = RecognizerConfig(),
                         resume_from: Path | str | None = None) -> ToyVideoRecognizer:
    """Train the clip classifier; deterministic given the seed.

    ``resume_from`` continues a partially trained checkpoint (same config)
    up to ``config.epochs``; the result is identical to an uninterrupted
    run because data order is re-derived per epoch and the full optimizer
    state travels with the checkpoint.
    """
    _validate_dataset(dataset)
    in_channels = dataset.clips[0].frames.shape[-1]
    torch.manual_seed(config.seed)
    module = _VideoNet(len(dataset.vocabulary), config.channels, in_channels).double()
    optimizer = torch.optim.Adam(module.parameters(), lr=config.learning_rate)
    start_epoch = 0
    if resume_from is not None:
        model = load_checkpoint(resume_from)
        if not isinstance(model, ToyVideoRecognizer):
            raise ValueError(f"{resume_from} is not a recognizer checkpoint")
        if model.config != config:
            raise ValueError("resume config differs from checkpoint config")
        module.load_state_dict(model.module.state_dict())
        _restore_adam_state(optimizer, list(module.named_parameters()),
                            model.training_state.get("optimizer", {}))
        start_epoch = model.training_state.get("epochs_completed", 0)

    labels = torch.tensor(dataset.labels, dtype=torch.int64)
    module.train()
    for epoch in range(start_epoch, config.epochs):
        order = _seeded_rng(config.seed, 1, epoch).permutation(len(dataset))
        for lo in range(0, len(order), config.batch_size):
            batch_idx = order[lo:lo + config.batch_size]
            x = _clip_batch(dataset, batch_idx, config.n_frames)
            y = labels[batch_idx]
            optimizer.zero_grad()
            loss = nn.functional.cross_entropy(module(x), y)
            loss.backward()
            optimizer.step()
    module.eval()
    state = {
        "epochs_completed": config.epochs,
        "optimizer": _adam_state_arrays(optimizer, list(module.named_parameters())),
    }
    return ToyVideoRecognizer(module, dataset.vocabulary, config, state)


def toy_scorer_train(dataset, config: ScorerConfig = ScorerConfig(),
                     resume_from: Path | str | None = None) -> ToyFrameLabelScorer:
    """Train the frame-label dual encoder with a contrastive objective.

    Each epoch draws ``frames_per_clip`` random frames per clip and
    classifies them against the label-embedding table; matched pairs are
    pushed to high similarity. Fully independent of the recognizer
    (separate parameters and seed).
    """
    _validate_dataset(dataset)
    in_channels = dataset.clips[0].frames.shape[-1]
    torch.manual_seed(config.seed)
    module = _DualEncoder(len(dataset.vocabulary), config.embed_dim, in_channels).double()
    optimizer = torch.optim.Adam(module.parameters(), lr=config.learning_rate)
    start_epoch = 0
    if resume_from is not None:
        model = load_checkpoint(resume_from)
        if not isinstance(model, ToyFrameLabelScorer):
            raise ValueError(f"{resume_from} is not a scorer checkpoint")
        if model.config != config:
            raise ValueError("resume config differs from checkpoint config")
        module.load_state_dict(model.module.state_dict())
        _restore_adam_state(optimizer, list(module.named_parameters()),
                            model.training_state.get("optimizer", {}))
        start_epoch = model.training_state.get("epochs_completed", 0)

    module.train()
    for epoch in range(start_epoch, config.epochs):
        rng = _seeded_rng(config.seed, 2, epoch)
        pairs = []
        for i, clip in enumerate(dataset.clips):
            for f in rng.integers(0, clip.n_frames, size=config.frames_per_clip):
                pairs.append((i, int(f)))
        order = rng.permutation(len(pairs))
        for lo in range(0, len(order), config.batch_size):
            chunk = [pairs[j] for j in order[lo:lo + config.batch_size]]
            frames = np.stack([dataset.clips[i].frames[f] for i, f in chunk])
            x = torch.from_numpy(frames.astype(np.float64)).permute(0, 3, 1, 2)
            y = torch.tensor([dataset.labels[i] for i, _ in chunk], dtype=torch.int64)
            optimizer.zero_grad()
            loss = nn.functional.cross_entropy(module.scores(x), y)
            loss.backward()
            optimizer.step()
    module.eval()
    state = {
        "epochs_completed": config.epochs,
        "optimizer": _adam_state_arrays(optimizer, list(module.named_parameters())),
    }
    return ToyFrameLabelScorer(module, dataset.vocabulary, config, state)


# ---------------------------------------------------------------------------
# accuracy helpers and audits
# ---------------------------------------------------------------------------

def clean_accuracy(model: RecognizerContract, dataset) -> float:
    hits = sum(model.predict(v).argmax() == y for v, y in dataset.items())
    return hits / len(dataset)


def frame_retrieval_accuracy(scorer: ToyFrameLabelScorer, dataset) -> float:
    """Fraction of individual frames whose top-scoring label is correct."""
    hits = 0
    total = 0
    for video, y in dataset.items():
        sim = scorer.similarity(video.frames, dataset.vocabulary)
        hits += int((sim.values.argmax(axis=1) == y).sum())
        total += sim.frame_count
    return hits / total


def shares_parameters(a, b) -> bool:
    """True if two models alias any parameter storage (modality audit)."""
    ptrs_a = {p.data_ptr() for p in a.module.parameters()}
    ptrs_b = {p.data_ptr() for p in b.module.parameters()}
    return bool(ptrs_a & ptrs_b)


# ---------------------------------------------------------------------------
# checkpoint container
# ---------------------------------------------------------------------------

def save_checkpoint(model: ToyVideoRecognizer | ToyFrameLabelScorer,
                    path: Path | str) -> Path:
    """Persist a model to the self-describing npz container."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(model, ToyVideoRecognizer):
        contract_type = "recognizer"
    elif isinstance(model, ToyFrameLabelScorer):
        contract_type = "scorer"
    else:
        raise ValueError(f"cannot checkpoint {type(model).__name__}")
    header = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "contract_type": contract_type,
        "labels": list(model.vocabulary.labels),
        "vocabulary_id": model.vocabulary.vocabulary_id,
        "seed": model.config.seed,
        "config": asdict(model.config),
        "config_digest": config_digest(model.config),
        "epochs_completed": model.training_state.get("epochs_completed", 0),
    }
    arrays = {f"param/{name}": p.detach().numpy()
              for name, p in model.module.named_parameters()}
    arrays.update(model.training_state.get("optimizer", {}))
    header_bytes = json.dumps(header, sort_keys=True).encode()
    np.savez(path, header=np.frombuffer(header_bytes, dtype=np.uint8), **arrays)
    return path


def load_checkpoint(path: Path | str) -> ToyVideoRecognizer | ToyFrameLabelScorer:
    """Load a model persisted with save_checkpoint."""
    path = Path(path)
    with np.load(path) as data:
        header = json.loads(bytes(data["header"]))
        if header["format_version"] > CHECKPOINT_FORMAT_VERSION:
            raise ValueError(
                f"{path}: checkpoint format {header['format_version']} is newer "
                f"than supported {CHECKPOINT_FORMAT_VERSION}")
        arrays = {k: np.array(v) for k, v in data.items() if k != "header"}
    vocab = LabelVocabulary(labels=tuple(header["labels"]),
                            vocabulary_id=header["vocabulary_id"])
    params = {k[len("param/"):]: v for k, v in arrays.items() if k.startswith("param/")}
    opt = {k: v for k, v in arrays.items() if k.startswith("opt/")}
    state = {"epochs_completed": header["epochs_completed"], "optimizer": opt}
    cfg_dict = dict(header["config"])
    if header["contract_type"] == "recognizer":
        cfg_dict["channels"] = tuple(cfg_dict["channels"])
        config = RecognizerConfig(**cfg_dict)
        in_channels = int(params["conv1.weight"].shape[1])
        module = _VideoNet(len(vocab), config.channels, in_channels).double()
        module.load_state_dict({k: torch.from_numpy(v) for k, v in params.items()})
        return ToyVideoRecognizer(module, vocab, config, state)
    if header["contract_type"] == "scorer":
        config = ScorerConfig(**cfg_dict)
        in_channels = int(params["encoder.conv1.weight"].shape[1])
        module = _DualEncoder(len(vocab), config.embed_dim, in_channels).double()
        module.load_state_dict({k: torch.from_numpy(v) for k, v in params.items()})
        return ToyFrameLabelScorer(module, vocab, config, state)
    raise ValueError(f"{path}: unknown contract type {header['contract_type']!r}")
