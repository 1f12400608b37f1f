"""Core video and label-vocabulary types plus uniform frame sampling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class VideoTensor:
    """A clip as an (N, H, W, C) array of intensities in [0, 1].

    Attributes:
        frames: float array of shape (N, H, W, C), values in [0, 1].
        frame_rate: frames per second; metadata only, never used in math.
        video_id: stable identifier, unique within a dataset.
    """

    frames: np.ndarray
    frame_rate: float = 25.0
    video_id: str = ""

    def __post_init__(self):
        f = self.frames
        if not isinstance(f, np.ndarray) or f.ndim != 4:
            raise ValueError(f"frames must be a 4-d (N,H,W,C) array, got {getattr(f, 'shape', None)}")
        n, _, _, c = f.shape
        if n < 1:
            raise ValueError("video must have at least one frame")
        if c not in (1, 3):
            raise ValueError(f"channel count must be 1 or 3, got {c}")
        if not np.issubdtype(f.dtype, np.floating):
            raise ValueError(f"frames must be floating point, got {f.dtype}")
        lo, hi = float(f.min()), float(f.max())
        if not np.isfinite([lo, hi]).all() or lo < 0.0 or hi > 1.0:
            raise ValueError(f"intensities must lie in [0,1], got range [{lo}, {hi}]")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.frames.shape

    def with_frames(self, frames: np.ndarray, suffix: str = "") -> "VideoTensor":
        """New clip with replaced frame content, metadata carried over."""
        return VideoTensor(frames=frames, frame_rate=self.frame_rate,
                           video_id=self.video_id + suffix)


@dataclass(frozen=True)
class LabelVocabulary:
    """Ordered class-label strings shared by all probability vectors.

    The ordering is fixed: index j in any ClassProbabilities or
    SimilarityMatrix column always refers to ``labels[j]``.
    """

    labels: tuple[str, ...]
    vocabulary_id: str = ""

    def __post_init__(self):
        if isinstance(self.labels, list):
            object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.labels) < 2:
            raise ValueError("vocabulary needs at least 2 labels")
        if any(not lab for lab in self.labels):
            raise ValueError("labels must be non-empty strings")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("labels must be unique")

    def __len__(self) -> int:
        return len(self.labels)

    def index_of(self, label: str) -> int:
        return self.labels.index(label)


def sample_frame_indices(n_total: int, n: int) -> np.ndarray:
    """Uniformly spaced frame indices including both endpoints.

    Index k (0-based) maps to round(k * (n_total - 1) / (n - 1)); for n == 1
    only index 0 is used. Repeats occur when n_total < n. Rounding is
    half-up, so the index sequence is deterministic and non-decreasing.
    """
    if n < 1:
        raise ValueError(f"frame count must be >= 1, got {n}")
    if n_total < 1:
        raise ValueError("cannot sample from an empty video")
    if n == 1:
        return np.zeros(1, dtype=np.int64)
    pos = np.arange(n, dtype=np.float64) * (n_total - 1) / (n - 1)
    return np.floor(pos + 0.5).astype(np.int64)


def sample_frames(video: VideoTensor, n: int) -> np.ndarray:
    """Select n uniformly spaced frames of a clip, preserving time order.

    Returns an (n, H, W, C) array (a copy when indices repeat; views are
    never handed out so callers can mutate safely).
    """
    idx = sample_frame_indices(video.n_frames, n)
    return video.frames[idx].copy()
