"""Detection statistics for recognizer/context consistency checking.

Everything here is pure float64 math over probability vectors:

* frame-averaged similarity -> softmax context probabilities,
* the symmetric KL detection score and its one-hot variant,
* four simpler score variants (max-difference and L1-difference,
  each with and without L2 normalization),
* percentile threshold calibration over clean-clip scores,
* the final strict-threshold decision.

All probabilities are clamped to EPS_FLOOR and renormalized before any
logarithm, so every score is finite even for (smoothed) one-hot inputs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import Enum

import numpy as np

#: Probability floor applied before logarithms; keeps divergences finite
#: while preserving score ordering.
EPS_FLOOR = 1e-12


class ScoreVariant(str, Enum):
    """Available detection-score formulas."""

    VLAD1 = "VLAD1"   # symmetric KL on raw recognizer probabilities
    VLAD2 = "VLAD2"   # symmetric KL on one-hot recognizer probabilities
    A1 = "A1"         # |max| difference, L2-normalized inputs
    A2 = "A2"         # |max| difference, raw inputs
    A3 = "A3"         # L1 difference, L2-normalized inputs
    A4 = "A4"         # L1 difference, raw inputs


@dataclass(frozen=True)
class ClassProbabilities:
    """A length-M probability vector tied to a label vocabulary."""

    values: np.ndarray
    label_vocabulary_id: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or v.shape[0] < 2:
            raise ValueError(f"probability vector must be 1-d with M >= 2, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("probabilities must be finite")
        if np.any(v < 0):
            raise ValueError(f"probabilities must be non-negative, min = {v.min()}")
        total = float(v.sum())
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"probabilities must sum to 1 within 1e-6, got {total}")

    @property
    def m(self) -> int:
        return self.values.shape[0]

    def argmax(self) -> int:
        return int(np.argmax(self.values))


@dataclass(frozen=True)
class SimilarityMatrix:
    """Raw (N frames x M labels) frame-label similarity scores."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        if v.ndim != 2:
            raise ValueError(f"similarity matrix must be 2-d, got shape {v.shape}")
        n, m = v.shape
        if n < 1 or m < 2:
            raise ValueError(f"need N >= 1 frames and M >= 2 labels, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("similarity scores must be finite")

    @property
    def frame_count(self) -> int:
        return self.values.shape[0]

    @property
    def label_count(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class DetectionScore:
    """A non-negative detection statistic plus the variant that produced it."""

    value: float
    variant: ScoreVariant

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError(f"detection score must be finite, got {self.value}")
        if self.value < 0:
            raise ValueError(f"detection score must be >= 0, got {self.value}")


@dataclass(frozen=True)
class ThresholdModel:
    """Calibration result: percentile theta over K clean scores gives h.

    ``created_from`` is the SHA-256 digest of the ascending-sorted
    float64 calibration scores, for provenance checks.
    """

    theta: float
    h: float
    k: int
    variant: ScoreVariant
    created_from: str


@dataclass(frozen=True)
class DetectionDecision:
    adversarial: bool
    score: DetectionScore
    threshold: float


def average_similarity(s: SimilarityMatrix) -> np.ndarray:
    """Mean similarity over frames: column j of the output is the mean of
    column j of the matrix."""
    return s.values.mean(axis=0)


def context_probabilities(s: np.ndarray, vocabulary_id: str = "") -> ClassProbabilities:
    """Softmax of a similarity vector, stabilized by max subtraction."""
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 1:
        raise ValueError(f"similarity vector must be 1-d, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise ValueError("similarity vector must be finite")
    z = np.exp(s - s.max())
    return ClassProbabilities(z / z.sum(), label_vocabulary_id=vocabulary_id)


def _clamped(p: ClassProbabilities) -> np.ndarray:
    """Floor probabilities at EPS_FLOOR and renormalize (no-op for vectors
    already above the floor)."""
    v = np.maximum(p.values, EPS_FLOOR)
    return v / v.sum()


def symmetric_kl(p: ClassProbabilities, q: ClassProbabilities) -> float:
    """Average of forward and reverse KL divergence between p and q.

    Both inputs are clamped per EPS_FLOOR first, so the result is finite;
    it is 0 exactly when the clamped vectors coincide, and symmetric in
    its arguments bitwise.
    """
    if p.m != q.m:
        raise ValueError(f"dimension mismatch: {p.m} vs {q.m}")
    a = _clamped(p)
    b = _clamped(q)
    log_ratio = np.log(a) - np.log(b)
    forward = float(np.dot(a, log_ratio))
    reverse = float(np.dot(b, -log_ratio))
    return 0.5 * (forward + reverse)


def one_hot(p: ClassProbabilities) -> ClassProbabilities:
    """Smoothed one-hot of the argmax class (ties broken by lowest index).

    The winning entry gets 1 - (M-1)*EPS_FLOOR and every other entry
    EPS_FLOOR, so downstream divergences stay finite.
    """
    j = p.argmax()
    v = np.full(p.m, EPS_FLOOR, dtype=np.float64)
    v[j] = 1.0 - (p.m - 1) * EPS_FLOOR
    return ClassProbabilities(v, label_vocabulary_id=p.label_vocabulary_id)


def _l2_normalized(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def detection_score(p_a: ClassProbabilities, p_c: ClassProbabilities,
                    variant: ScoreVariant = ScoreVariant.VLAD1) -> DetectionScore:
    """Detection statistic between recognizer (p_a) and context (p_c)
    probabilities.

    VLAD1 is the symmetric KL on raw p_a; VLAD2 applies it to the
    (smoothed) one-hot of p_a. A1/A2 compare the maxima of the two
    vectors, A3/A4 their L1 difference; A1/A3 L2-normalize both vectors
    first, A2/A4 use them as-is.
    """
    variant = ScoreVariant(variant)
    if p_a.m != p_c.m:
        raise ValueError(f"dimension mismatch: {p_a.m} vs {p_c.m}")
    if variant is ScoreVariant.VLAD1:
        value = symmetric_kl(p_a, p_c)
    elif variant is ScoreVariant.VLAD2:
        value = symmetric_kl(one_hot(p_a), p_c)
    elif variant is ScoreVariant.A1:
        value = abs(float(_l2_normalized(p_a.values).max())
                    - float(_l2_normalized(p_c.values).max()))
    elif variant is ScoreVariant.A2:
        value = abs(float(p_a.values.max()) - float(p_c.values.max()))
    elif variant is ScoreVariant.A3:
        value = float(np.abs(_l2_normalized(p_a.values)
                             - _l2_normalized(p_c.values)).sum())
    elif variant is ScoreVariant.A4:
        value = float(np.abs(p_a.values - p_c.values).sum())
    else:  # pragma: no cover - ScoreVariant() above rejects unknowns
        raise ValueError(f"unknown score variant: {variant}")
    # tiny negative values cannot occur: every branch is an absolute value
    # or a clamped divergence
    return DetectionScore(value=value, variant=variant)


def calibrate_threshold(clean_scores, theta: float,
                        variant: ScoreVariant = ScoreVariant.VLAD1) -> ThresholdModel:
    """Pick the decision threshold as the theta-th percentile of clean scores.

    The K scores are sorted ascending into beta and h is the element at
    1-based position floor(K * theta / 100), clamped to [1, K]. No
    interpolation between order statistics is performed.
    """
    beta = np.sort(np.asarray(clean_scores, dtype=np.float64))
    k = beta.shape[0]
    if k < 1:
        raise ValueError("need at least one calibration score")
    if not np.all(np.isfinite(beta)):
        raise ValueError("calibration scores must be finite")
    if not (0.0 < theta <= 100.0):
        raise ValueError(f"theta must lie in (0, 100], got {theta}")
    pos = int(np.floor(k * theta / 100.0))
    pos = min(max(pos, 1), k)
    digest = hashlib.sha256(beta.tobytes()).hexdigest()
    return ThresholdModel(theta=float(theta), h=float(beta[pos - 1]), k=k,
                          variant=ScoreVariant(variant), created_from=digest)


def decide(score: DetectionScore, threshold: float) -> DetectionDecision:
    """Flag the input as adversarial iff the score strictly exceeds the
    threshold."""
    if not np.isfinite(threshold):
        raise ValueError(f"threshold must be finite, got {threshold}")
    return DetectionDecision(adversarial=score.value > threshold,
                             score=score, threshold=float(threshold))
