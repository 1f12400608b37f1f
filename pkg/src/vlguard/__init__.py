"""Adversarial-video detection via vision-language context consistency.

The package is organized by pipeline stage:

* ``video``      - clip/label containers and uniform frame sampling
* ``detector``   - detection statistics, threshold calibration, decision
* ``models``     - recognizer/scorer contracts and desk-scale toy models
* ``attacks``    - white-box attack suite against any recognizer contract
* ``baselines``  - temporal-consistency and shuffle-consistency detectors
* ``datagen``    - synthetic dataset generation, splits, paired test sets
* ``evaluation`` - ROC/AUC, strength sweeps, aggregation
* ``benchmark``  - frames-per-second measurement of detection pipelines
* ``cli``        - experiment orchestration commands
"""

from vlguard.detector import (
    EPS_FLOOR,
    ClassProbabilities,
    DetectionDecision,
    DetectionScore,
    ScoreVariant,
    SimilarityMatrix,
    ThresholdModel,
    average_similarity,
    calibrate_threshold,
    context_probabilities,
    decide,
    detection_score,
    one_hot,
    symmetric_kl,
)
from vlguard.video import LabelVocabulary, VideoTensor, sample_frame_indices, sample_frames

__version__ = "0.1.0"

__all__ = [
    "EPS_FLOOR",
    "ClassProbabilities",
    "DetectionDecision",
    "DetectionScore",
    "LabelVocabulary",
    "ScoreVariant",
    "SimilarityMatrix",
    "ThresholdModel",
    "VideoTensor",
    "average_similarity",
    "calibrate_threshold",
    "context_probabilities",
    "decide",
    "detection_score",
    "one_hot",
    "sample_frame_indices",
    "sample_frames",
    "symmetric_kl",
]
