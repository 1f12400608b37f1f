"""Adapter contracts for the action recognizer and vision-language scorer.

Any model - the bundled desk-scale toys or an external pretrained one -
plugs into the toolkit by implementing these two interfaces. Everything
downstream (attacks, detectors, evaluation) talks only to the contracts.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Callable

import numpy as np

from vlguard.detector import (
    ClassProbabilities,
    DetectionScore,
    ScoreVariant,
    SimilarityMatrix,
    average_similarity,
    context_probabilities,
    detection_score,
)
from vlguard.video import LabelVocabulary, VideoTensor, sample_frames


class RecognizerContract(ABC):
    """A video classifier with white-box gradient access.

    ``gradient`` returns d(cross-entropy loss for the given label)/d(input),
    shaped exactly like the input video; this realizes the white-box
    attack surface.
    """

    vocabulary: LabelVocabulary

    @abstractmethod
    def predict(self, video: VideoTensor) -> ClassProbabilities:
        """Class probabilities for a clip, tied to ``self.vocabulary``."""

    @abstractmethod
    def gradient(self, video: VideoTensor, label_index: int) -> np.ndarray:
        """Input gradient of the classification loss for one label."""


class ScorerContract(ABC):
    """A frame-label similarity scorer (vision-language model interface)."""

    @abstractmethod
    def similarity(self, frames: np.ndarray,
                   vocabulary: LabelVocabulary) -> SimilarityMatrix:
        """Raw similarity scores, one row per frame, one column per label."""


def context_pipeline(video: VideoTensor, scorer: ScorerContract,
                     vocabulary: LabelVocabulary, n_frames: int = 32) -> ClassProbabilities:
    """Context probabilities of a clip from the vision-language scorer.

    Composition, in order: uniform frame sampling -> per-frame similarity
    scores -> mean over frames -> stabilized softmax.
    """
    frames = sample_frames(video, n_frames)
    sim = scorer.similarity(frames, vocabulary)
    s = average_similarity(sim)
    return context_probabilities(s, vocabulary_id=vocabulary.vocabulary_id)


def make_consistency_detector(
    predict_fn: Callable[[VideoTensor], ClassProbabilities],
    scorer: ScorerContract,
    vocabulary: LabelVocabulary,
    variant: ScoreVariant = ScoreVariant.VLAD1,
    n_frames: int = 32,
) -> Callable[[VideoTensor], DetectionScore]:
    """Score function comparing recognizer output with context probabilities.

    ``predict_fn`` is usually ``recognizer.predict``, but can be any source
    of class probabilities (e.g. a precomputed lookup when benchmarking
    the detector in isolation).
    """
    variant = ScoreVariant(variant)

    def _detector(video: VideoTensor) -> DetectionScore:
        p_a = predict_fn(video)
        p_c = context_pipeline(video, scorer, vocabulary, n_frames=n_frames)
        return detection_score(p_a, p_c, variant)

    return _detector
