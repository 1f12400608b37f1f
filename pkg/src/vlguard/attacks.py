"""White-box attacks against any recognizer contract.

All four attacks maximize the cross-entropy loss of the true label
(untargeted) under an L-infinity budget, using only the contract's
``gradient``/``predict`` interface. Internal math runs in float64 on a
working copy; the adversarial clip is returned in the input's dtype.

* fgsm_video: single signed-gradient step on every frame.
* pgd_video: iterated projected signed-gradient steps.
* one_frame_attack: projected steps confined to the frame carrying the
  largest gradient L1 mass; every other frame is returned bit-identical.
* flickering_attack: one RGB offset per frame, constant over space,
  optimized by projected gradient on that broadcast parameterization.

The flickering offsets are quantized to the 1/1024 intensity grid and
projected so the perturbed clip needs no pixel clipping; for inputs whose
intensities lie on the same grid (all synthetic data here) the stored
perturbation is bitwise constant within each frame and channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from vlguard.video import VideoTensor

#: Offset quantization for the flickering attack; matches the renderer grid.
FLICK_GRID = 1024

#: Slack allowed when checking the L-infinity budget.
BUDGET_TOLERANCE = 1e-6


class AttackKind(str, Enum):
    FGSM_V = "FGSM_V"
    PGD_V = "PGD_V"
    ONE_FRAME = "ONE_FRAME"
    FLICK = "FLICK"


class FrameSelection(str, Enum):
    GRAD_MASS = "GRAD_MASS"


@dataclass(frozen=True)
class AttackSpec:
    """Configuration for one attack run.

    ``step_size`` defaults to epsilon/4 when None. ``seed`` only matters
    when ``random_start`` is enabled for the projected-gradient attacks.
    """

    kind: AttackKind
    epsilon: float
    steps: int = 10
    step_size: float | None = None
    frame_selection: FrameSelection = FrameSelection.GRAD_MASS
    seed: int = 0
    random_start: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", AttackKind(self.kind))
        object.__setattr__(self, "frame_selection", FrameSelection(self.frame_selection))
        if not (self.epsilon > 0):
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.step_size is not None and not (self.step_size > 0):
            raise ValueError(f"step_size must be > 0, got {self.step_size}")

    @property
    def resolved_step_size(self) -> float:
        return self.epsilon / 4.0 if self.step_size is None else self.step_size


@dataclass(frozen=True)
class AdversarialResult:
    adversarial_video: VideoTensor
    original_label: int
    predicted_label: int
    success: bool
    perturbation_linf: float

    def __post_init__(self):
        if self.success != (self.predicted_label != self.original_label):
            raise ValueError("success flag inconsistent with labels")


def _require_correct(model, video: VideoTensor, label: int) -> None:
    pred = model.predict(video).argmax()
    if pred != label:
        raise ValueError(
            f"attack precondition violated: clip {video.video_id!r} is already "
            f"misclassified ({pred} != {label})")


def _finish(model, video: VideoTensor, adv_frames: np.ndarray, label: int,
            epsilon: float) -> AdversarialResult:
    adv_frames = adv_frames.astype(video.frames.dtype, copy=False)
    adv = video.with_frames(adv_frames, suffix="#adv")
    linf = float(np.abs(adv_frames.astype(np.float64)
                        - video.frames.astype(np.float64)).max())
    if linf > epsilon + BUDGET_TOLERANCE:
        raise AssertionError(f"budget violated: {linf} > {epsilon}")
    predicted = model.predict(adv).argmax()
    return AdversarialResult(adversarial_video=adv, original_label=label,
                             predicted_label=predicted,
                             success=predicted != label,
                             perturbation_linf=linf)


def fgsm_video(model, video: VideoTensor, label: int, epsilon: float) -> AdversarialResult:
    """Single signed-gradient step of size epsilon on all frames."""
    _require_correct(model, video, label)
    x0 = video.frames.astype(np.float64)
    g = model.gradient(video, label)
    adv = np.clip(x0 + epsilon * np.sign(g), 0.0, 1.0)
    return _finish(model, video, adv, label, epsilon)


def pgd_video(model, video: VideoTensor, label: int, epsilon: float,
              steps: int = 10, step_size: float | None = None,
              random_start: bool = False, seed: int = 0) -> AdversarialResult:
    """Projected gradient descent within the epsilon ball and [0, 1].

    With steps=1 and step_size=epsilon this reproduces fgsm_video bitwise.
    """
    _require_correct(model, video, label)
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    alpha = epsilon / 4.0 if step_size is None else step_size
    x0 = video.frames.astype(np.float64)
    if random_start:
        rng = np.random.default_rng(seed)
        delta = rng.uniform(-epsilon, epsilon, size=x0.shape)
        delta = np.clip(x0 + delta, 0.0, 1.0) - x0
    else:
        delta = np.zeros_like(x0)
    for _ in range(steps):
        x_t = np.clip(x0 + delta, 0.0, 1.0)
        g = model.gradient(video.with_frames(x_t, suffix="#it"), label)
        delta = np.clip(delta + alpha * np.sign(g), -epsilon, epsilon)
    adv = np.clip(x0 + delta, 0.0, 1.0)
    return _finish(model, video, adv, label, epsilon)


def select_frame_by_gradient_mass(gradient: np.ndarray) -> int:
    """Index of the frame with the largest L1 gradient mass (ties: lowest)."""
    mass = np.abs(gradient).sum(axis=tuple(range(1, gradient.ndim)))
    return int(np.argmax(mass))


def one_frame_attack(model, video: VideoTensor, label: int, epsilon: float,
                     steps: int = 10, step_size: float | None = None) -> AdversarialResult:
    """Projected gradient attack confined to one gradient-selected frame."""
    _require_correct(model, video, label)
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    alpha = epsilon / 4.0 if step_size is None else step_size
    x0 = video.frames.astype(np.float64)
    g0 = model.gradient(video, label)
    target = select_frame_by_gradient_mass(g0)

    delta_f = np.zeros_like(x0[target])
    for _ in range(steps):
        x_t = x0.copy()
        x_t[target] = np.clip(x0[target] + delta_f, 0.0, 1.0)
        g = model.gradient(video.with_frames(x_t, suffix="#it"), label)
        delta_f = np.clip(delta_f + alpha * np.sign(g[target]), -epsilon, epsilon)

    adv = video.frames.copy()  # untouched frames stay bit-identical
    adv[target] = np.clip(x0[target] + delta_f, 0.0, 1.0).astype(video.frames.dtype)
    return _finish(model, video, adv, label, epsilon)


def flickering_attack(model, video: VideoTensor, label: int, epsilon: float,
                      steps: int = 10, step_size: float | None = None) -> AdversarialResult:
    """Per-frame spatially constant RGB offsets, optimized within budget.

    Offsets live on the 1/1024 grid and are projected into the interval
    where no pixel leaves [0, 1], so spatial constancy is never broken by
    clipping. steps=0 is allowed and returns the clip unchanged.
    """
    if video.frames.shape[-1] != 3:
        raise ValueError("flickering attack requires 3-channel (RGB) input")
    _require_correct(model, video, label)
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    alpha = epsilon / 4.0 if step_size is None else step_size
    x0 = video.frames.astype(np.float64)
    n = x0.shape[0]

    # feasible per-(frame, channel) offset range: stay in [0,1] everywhere
    # and inside the epsilon ball, expressed in grid units
    frame_min = x0.min(axis=(1, 2))  # (N, 3)
    frame_max = x0.max(axis=(1, 2))
    lo = np.maximum(-epsilon, -frame_min)
    hi = np.minimum(epsilon, 1.0 - frame_max)
    lo_int = np.ceil(lo * FLICK_GRID - 1e-9).astype(np.int64)
    hi_int = np.floor(hi * FLICK_GRID + 1e-9).astype(np.int64)
    lo_int = np.minimum(lo_int, 0)  # zero offset is always feasible
    hi_int = np.maximum(hi_int, 0)

    step_int = max(1, int(round(alpha * FLICK_GRID)))
    delta_int = np.zeros((n, 3), dtype=np.int64)
    for _ in range(steps):
        offsets = (delta_int / FLICK_GRID)[:, None, None, :]
        g = model.gradient(video.with_frames(x0 + offsets, suffix="#it"), label)
        g_fc = g.sum(axis=(1, 2))  # (N, 3)
        delta_int = delta_int + step_int * np.sign(g_fc).astype(np.int64)
        delta_int = np.clip(delta_int, lo_int, hi_int)

    offsets = (delta_int / FLICK_GRID).astype(video.frames.dtype)
    adv = video.frames + offsets[:, None, None, :]
    return _finish(model, video, adv, label, epsilon)


def run_attack(model, video: VideoTensor, label: int, spec: AttackSpec) -> AdversarialResult:
    """Dispatch one attack per its spec."""
    if spec.kind is AttackKind.FGSM_V:
        return fgsm_video(model, video, label, spec.epsilon)
    if spec.kind is AttackKind.PGD_V:
        return pgd_video(model, video, label, spec.epsilon, steps=spec.steps,
                         step_size=spec.step_size, random_start=spec.random_start,
                         seed=spec.seed)
    if spec.kind is AttackKind.ONE_FRAME:
        return one_frame_attack(model, video, label, spec.epsilon,
                                steps=spec.steps, step_size=spec.step_size)
    if spec.kind is AttackKind.FLICK:
        return flickering_attack(model, video, label, spec.epsilon,
                                 steps=spec.steps, step_size=spec.step_size)
    raise ValueError(f"unknown attack kind: {spec.kind}")
