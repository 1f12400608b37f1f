"""Synthetic video dataset generation, ingestion, and the split protocol.

Clips show a single colored geometric figure translating across a noisy
gray background. A fading trail is rendered behind the figure, so the
motion direction is visible in every individual frame; this makes the
class label (a shape/direction pair such as "square moving right")
learnable both by a frame-level scorer and by a clip-level recognizer.

All intensities are quantized to the 1/1024 grid. Grid values are exact
in float32, which keeps the spatially-constant attack perturbations
bitwise constant after addition.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from vlguard.attacks import AdversarialResult, AttackSpec, run_attack
from vlguard.video import LabelVocabulary, VideoTensor

#: Intensity quantization grid (power of two: exact in float32).
INTENSITY_GRID = 1024

MANIFEST_SCHEMA_VERSION = 1

_SHAPES = ("square", "circle", "triangle", "cross", "ring")
_DIRECTIONS = ("right", "up", "left", "down")
_DIRECTION_VECTORS = {
    "right": (1.0, 0.0),
    "up": (0.0, -1.0),
    "left": (-1.0, 0.0),
    "down": (0.0, 1.0),
}
_SHAPE_COLORS = {
    "square": (0.85, 0.35, 0.30),
    "circle": (0.35, 0.85, 0.35),
    "triangle": (0.35, 0.45, 0.88),
    "cross": (0.85, 0.80, 0.30),
    "ring": (0.82, 0.38, 0.85),
}


@dataclass
class LabeledDataset:
    """Clips with integer labels under a shared vocabulary."""

    clips: list[VideoTensor]
    labels: list[int]
    vocabulary: LabelVocabulary

    def __post_init__(self):
        if len(self.clips) != len(self.labels):
            raise ValueError("clips and labels must have equal length")

    def __len__(self) -> int:
        return len(self.clips)

    def items(self):
        return list(zip(self.clips, self.labels))

    def class_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for y in self.labels:
            counts[y] = counts.get(y, 0) + 1
        return counts


@dataclass
class DatasetSplit:
    """Disjoint calibration and clean-test partitions of a dataset."""

    calibration: list[tuple[VideoTensor, int]]
    test_clean: list[tuple[VideoTensor, int]]
    ratio: float
    seed: int
    vocabulary: LabelVocabulary

    def __post_init__(self):
        cal_ids = {v.video_id for v, _ in self.calibration}
        test_ids = {v.video_id for v, _ in self.test_clean}
        if cal_ids & test_ids:
            raise ValueError(f"calibration/test overlap: {sorted(cal_ids & test_ids)[:3]}")


@dataclass
class PairedTestSet:
    """Equal-cardinality clean and (successfully) adversarial test clips."""

    clean: list[tuple[VideoTensor, int]]
    adversarial: list[tuple[AdversarialResult, int]]

    def __post_init__(self):
        if len(self.clean) != len(self.adversarial):
            raise ValueError("clean and adversarial sides must have equal cardinality")
        for result, _ in self.adversarial:
            if not result.success:
                raise ValueError(f"failed attack in paired set: {result.adversarial_video.video_id}")

    def __len__(self) -> int:
        return len(self.clean)


def class_definitions(n_classes: int) -> list[tuple[str, str]]:
    """(shape, direction) pairs, enumerated shape-major over directions."""
    max_classes = len(_SHAPES) * len(_DIRECTIONS)
    if not 2 <= n_classes <= max_classes:
        raise ValueError(f"n_classes must lie in [2, {max_classes}], got {n_classes}")
    return [(_SHAPES[k % len(_SHAPES)], _DIRECTIONS[k // len(_SHAPES)])
            for k in range(n_classes)]


def make_vocabulary(n_classes: int, vocabulary_id: str = "synthetic-shapes") -> LabelVocabulary:
    labels = tuple(f"{shape} moving {direction}"
                   for shape, direction in class_definitions(n_classes))
    return LabelVocabulary(labels=labels, vocabulary_id=vocabulary_id)


def _shape_mask(shape: str, xx: np.ndarray, yy: np.ndarray,
                cx: float, cy: float, r: float) -> np.ndarray:
    dx = xx - cx
    dy = yy - cy
    if shape == "square":
        return (np.abs(dx) <= r) & (np.abs(dy) <= r)
    if shape == "circle":
        return dx * dx + dy * dy <= r * r
    if shape == "triangle":
        # upward-pointing: width grows linearly from apex at cy - r
        return (dy >= -r) & (dy <= r) & (np.abs(dx) <= (dy + r) / 2)
    if shape == "cross":
        arm = 0.35 * r
        return ((np.abs(dx) <= arm) & (np.abs(dy) <= r)) | \
               ((np.abs(dy) <= arm) & (np.abs(dx) <= r))
    if shape == "ring":
        d2 = dx * dx + dy * dy
        return (d2 <= r * r) & (d2 >= (0.55 * r) ** 2)
    raise ValueError(f"unknown shape: {shape}")


def _quantize(frames: np.ndarray) -> np.ndarray:
    q = np.round(np.clip(frames, 0.0, 1.0) * INTENSITY_GRID) / INTENSITY_GRID
    return q.astype(np.float32)


def render_clip(shape: str, direction: str, n_frames: int, height: int, width: int,
                rng: np.random.Generator) -> np.ndarray:
    """Render one (n_frames, height, width, 3) clip in [0, 1].

    The figure travels at constant velocity; three fading trail blobs at
    its previous positions encode the direction within each frame.
    """
    if n_frames < 1 or height < 32 or width < 32:
        raise ValueError(f"invalid geometry: frames={n_frames}, size={height}x{width}")
    ux, uy = _DIRECTION_VECTORS[direction]
    dim = min(height, width)
    r = float(rng.uniform(0.08, 0.105) * dim)
    color = np.clip(np.asarray(_SHAPE_COLORS[shape]) + rng.uniform(-0.05, 0.05, size=3),
                    0.25, 0.92)

    # comet tail trailing the figure: blob offsets/radii in units of r so
    # the tail stays visible regardless of speed
    tail = ((1.3, 0.42, 0.55), (2.1, 0.33, 0.40), (2.8, 0.26, 0.28))
    back_extent = max(off + rad for off, rad, _ in tail) * r + 2.0
    fwd_extent = r + 2.0

    # speed derives from the span left after margins, so the whole path
    # always fits the canvas
    span = dim - 1 - back_extent - fwd_extent
    if span <= 2.0:
        raise ValueError(f"figure does not fit: {width}x{height} canvas, radius {r:.1f}px")
    steps = max(n_frames - 1, 1)
    speed = min(float(rng.uniform(0.55, 0.85)) * span / steps, 3.5)

    def _start(u: float, extent: int) -> float:
        lo = back_extent * max(0.0, u) + fwd_extent * max(0.0, -u) \
            + max(0.0, -u) * speed * (n_frames - 1)
        hi = extent - 1 - back_extent * max(0.0, -u) - fwd_extent * max(0.0, u) \
            - max(0.0, u) * speed * (n_frames - 1)
        return float(rng.uniform(lo, hi))

    x0 = _start(ux, width)
    y0 = _start(uy, height)

    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    frames = np.empty((n_frames, height, width, 3), dtype=np.float64)
    for t in range(n_frames):
        cx = x0 + ux * speed * t
        cy = y0 + uy * speed * t
        frame = 0.15 + rng.uniform(-0.03, 0.03, size=(height, width, 3))
        for off, rad, fade in reversed(tail):
            blob = _shape_mask("circle", xx, yy, cx - ux * off * r, cy - uy * off * r,
                               rad * r)
            frame[blob] = (1 - fade) * frame[blob] + fade * color
        body = _shape_mask(shape, xx, yy, cx, cy, r)
        frame[body] = color
        frames[t] = frame
    return _quantize(frames)


def generate_synthetic_dataset(n_classes: int = 10, clips_per_class: int = 50,
                               n_frames: int = 16, height: int = 64, width: int = 64,
                               seed: int = 0) -> LabeledDataset:
    """Balanced moving-figure dataset, bitwise deterministic in the seed.

    Each clip gets its own generator keyed by (seed, class, clip), so the
    output does not depend on generation order.
    """
    defs = class_definitions(n_classes)
    vocab = make_vocabulary(n_classes)
    clips: list[VideoTensor] = []
    labels: list[int] = []
    for class_idx, (shape, direction) in enumerate(defs):
        for clip_idx in range(clips_per_class):
            rng = np.random.default_rng([seed, class_idx, clip_idx])
            frames = render_clip(shape, direction, n_frames, height, width, rng)
            vid = VideoTensor(
                frames=frames,
                video_id=f"synth-{seed}-c{class_idx:02d}-{clip_idx:03d}",
            )
            clips.append(vid)
            labels.append(class_idx)
    return LabeledDataset(clips=clips, labels=labels, vocabulary=vocab)


def filter_correctly_classified(dataset: LabeledDataset, model) -> LabeledDataset:
    """Keep exactly the clips the model classifies correctly."""
    clips: list[VideoTensor] = []
    labels: list[int] = []
    for video, y in dataset.items():
        if model.predict(video).argmax() == y:
            clips.append(video)
            labels.append(y)
    if not clips:
        raise ValueError("model classified no clip correctly; cannot run the protocol")
    return LabeledDataset(clips=clips, labels=labels, vocabulary=dataset.vocabulary)


def split_dataset(dataset: LabeledDataset, ratio: float = 0.8,
                  seed: int = 0) -> DatasetSplit:
    """Stratified calibration/test split, deterministic in the seed."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    by_class: dict[int, list[int]] = {}
    for i, y in enumerate(dataset.labels):
        by_class.setdefault(y, []).append(i)
    for y, idxs in by_class.items():
        if len(idxs) < 2:
            raise ValueError(f"class {y} has a single clip; cannot split")
    rng = np.random.default_rng(seed)
    calibration: list[tuple[VideoTensor, int]] = []
    test_clean: list[tuple[VideoTensor, int]] = []
    for y in sorted(by_class):
        idxs = np.asarray(by_class[y])
        perm = rng.permutation(len(idxs))
        n_cal = int(round(len(idxs) * ratio))
        n_cal = min(max(n_cal, 1), len(idxs) - 1)  # both sides non-empty
        for j in perm[:n_cal]:
            calibration.append((dataset.clips[idxs[j]], y))
        for j in perm[n_cal:]:
            test_clean.append((dataset.clips[idxs[j]], y))
    return DatasetSplit(calibration=calibration, test_clean=test_clean,
                        ratio=ratio, seed=seed, vocabulary=dataset.vocabulary)


def build_paired_test_set(split: DatasetSplit, attack: AttackSpec, model) -> PairedTestSet:
    """Attack every clean test clip; drop failures from both sides.

    The result keeps the clean/adversarial pairing balanced and
    re-verifies that every surviving adversarial clip is misclassified.
    """
    clean: list[tuple[VideoTensor, int]] = []
    adversarial: list[tuple[AdversarialResult, int]] = []
    for video, y in split.test_clean:
        result = run_attack(model, video, y, attack)
        if not result.success:
            continue
        if model.predict(result.adversarial_video).argmax() == y:
            continue  # paranoia: success flag must mean misclassification
        clean.append((video, y))
        adversarial.append((result, y))
    if not adversarial:
        raise ValueError("attack succeeded on no clip; paired test set is empty")
    return PairedTestSet(clean=clean, adversarial=adversarial)


# ---------------------------------------------------------------------------
# persistence: manifest (JSONL) + one npz per clip
# ---------------------------------------------------------------------------

def save_dataset(dataset: LabeledDataset, directory: Path | str,
                 config_digest: str = "") -> Path:
    """Write clips (uint16 npz on the intensity grid) plus a JSONL manifest.

    The manifest is byte-identical across runs for identical inputs.
    Returns the manifest path.
    """
    directory = Path(directory)
    clip_dir = directory / "clips"
    clip_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for video, y in dataset.items():
        rel = f"clips/{video.video_id}.npz"
        q = np.round(video.frames.astype(np.float64) * INTENSITY_GRID).astype(np.uint16)
        np.savez_compressed(directory / rel, frames=q,
                            frame_rate=np.float64(video.frame_rate))
        records.append({
            "schema_version": MANIFEST_SCHEMA_VERSION,
            "video_id": video.video_id,
            "label": dataset.vocabulary.labels[y],
            "path": rel,
            "config_digest": config_digest,
        })
    manifest = directory / "manifest.jsonl"
    header = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "record": "header",
        "labels": list(dataset.vocabulary.labels),
        "vocabulary_id": dataset.vocabulary.vocabulary_id,
        "n_clips": len(dataset),
        "config_digest": config_digest,
    }
    with open(manifest, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return manifest


def load_dataset(directory: Path | str) -> LabeledDataset:
    """Load a dataset written by save_dataset (lossless round trip)."""
    directory = Path(directory)
    manifest = directory / "manifest.jsonl"
    if not manifest.exists():
        raise FileNotFoundError(f"no manifest at {manifest}")
    with open(manifest, encoding="utf-8") as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    header = lines[0]
    if header.get("record") != "header":
        raise ValueError(f"{manifest}: first record must be the header")
    vocab = LabelVocabulary(labels=tuple(header["labels"]),
                            vocabulary_id=header["vocabulary_id"])
    clips: list[VideoTensor] = []
    labels: list[int] = []
    for rec in lines[1:]:
        data = np.load(directory / rec["path"])
        frames = (data["frames"].astype(np.float32) / INTENSITY_GRID)
        clips.append(VideoTensor(frames=frames,
                                 frame_rate=float(data["frame_rate"]),
                                 video_id=rec["video_id"]))
        labels.append(vocab.index_of(rec["label"]))
    return LabeledDataset(clips=clips, labels=labels, vocabulary=vocab)


def load_video(path: Path | str, target_h: int | None = None,
               target_w: int | None = None) -> VideoTensor:
    """Decode a real video file, image, or frame directory into a clip.

    Frames are resized to (target_h, target_w) when given and scaled to
    [0, 1]. Grayscale image sources yield C=1 tensors; video containers
    decode as 3-channel. Raises ValueError with path context on
    unreadable or empty inputs.
    """
    import cv2

    path = Path(path)
    if not path.exists():
        raise ValueError(f"cannot read video: {path} does not exist")

    image_exts = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}
    raw_frames: list[np.ndarray] = []
    if path.is_dir():
        names = sorted(p for p in path.iterdir() if p.suffix.lower() in image_exts)
        if not names:
            raise ValueError(f"cannot read video: no image frames in {path}")
        for p in names:
            img = cv2.imread(str(p), cv2.IMREAD_UNCHANGED)
            if img is None:
                raise ValueError(f"cannot read video: undecodable frame {p}")
            raw_frames.append(img)
    elif path.suffix.lower() in image_exts:
        img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
        if img is None:
            raise ValueError(f"cannot read video: undecodable image {path}")
        raw_frames.append(img)
    else:
        cap = cv2.VideoCapture(str(path))
        try:
            while True:
                ok, frame = cap.read()
                if not ok:
                    break
                raw_frames.append(frame)
        finally:
            cap.release()
        if not raw_frames:
            raise ValueError(f"cannot read video: no decodable frames in {path}")

    out = []
    for img in raw_frames:
        if img.ndim == 2:
            img = img[:, :, None]
        elif img.shape[2] == 4:
            img = img[:, :, :3]
        if img.shape[2] == 3:
            img = img[:, :, ::-1]  # BGR -> RGB
        if target_h is not None and target_w is not None:
            src = img[:, :, 0] if img.shape[2] == 1 else img
            resized = cv2.resize(src, (target_w, target_h), interpolation=cv2.INTER_AREA)
            img = resized[:, :, None] if resized.ndim == 2 else resized
        out.append(img.astype(np.float32) / 255.0)
    frames = np.stack(out)
    return VideoTensor(frames=np.clip(frames, 0.0, 1.0), video_id=path.stem)


def save_video_frames(video: VideoTensor, directory: Path | str) -> Path:
    """Write a clip as numbered 8-bit PNG frames (lossless per frame)."""
    import cv2

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(video.frames):
        img = np.round(frame.astype(np.float64) * 255.0).astype(np.uint8)
        if img.shape[2] == 3:
            img = img[:, :, ::-1]  # RGB -> BGR
        else:
            img = img[:, :, 0]
        cv2.imwrite(str(directory / f"frame_{i:05d}.png"), img)
    return directory
