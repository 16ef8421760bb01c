"""Geometric object detector with a configurable imperfection model.

Stands in for a learned vision front-end: detections come straight from the
scene geometry, degraded by bounding-box jitter, missed objects, class
confusion and spurious boxes. Output order is deliberately randomized so
downstream order sensitivity is exercised end to end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scene import BoundingBox, CameraModel, Scene, clip_bbox, project_bbox


@dataclass(eq=False)
class Detection:
    class_id: int
    bbox: BoundingBox


@dataclass(eq=False)
class DetectorNoise:
    bbox_jitter_std: float = 2.0  # pixels, on each box component
    miss_prob: float = 0.02
    false_positive_rate: float = 0.05  # mean spurious boxes per image
    class_confusion_prob: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.miss_prob <= 1.0:
            raise ValueError("miss_prob must lie in [0, 1]")
        if not 0.0 <= self.class_confusion_prob <= 1.0:
            raise ValueError("class_confusion_prob must lie in [0, 1]")
        if self.bbox_jitter_std < 0 or self.false_positive_rate < 0:
            raise ValueError("noise magnitudes must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "bbox_jitter_std": self.bbox_jitter_std,
            "miss_prob": self.miss_prob,
            "false_positive_rate": self.false_positive_rate,
            "class_confusion_prob": self.class_confusion_prob,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DetectorNoise":
        return cls(**d)


# Spurious boxes span this fraction range of the frame on each axis.
_FP_SIZE_RANGE = (0.02, 0.25)


def detect(
    scene: Scene, camera: CameraModel, noise: DetectorNoise, rng: np.random.Generator
) -> list[Detection]:
    """Detections for one camera view, in randomized order.

    With all-zero noise this returns exactly the projected boxes of the
    camera-visible UEs. Every emitted box is clipped to the frame.
    """
    detections: list[Detection] = []
    for ue in scene.ues:
        bbox = project_bbox(camera, ue)
        if bbox is None:
            continue
        if rng.random() < noise.miss_prob:
            continue
        jitter = rng.normal(0.0, noise.bbox_jitter_std, size=4)
        jittered = BoundingBox(
            bbox.x_center + jitter[0],
            bbox.y_center + jitter[1],
            bbox.width + jitter[2],
            bbox.height + jitter[3],
        )
        clipped = clip_bbox(jittered, camera)
        if clipped is None:
            continue
        class_id = ue.class_id
        if scene.class_count > 1 and rng.random() < noise.class_confusion_prob:
            offset = int(rng.integers(1, scene.class_count))
            class_id = (class_id + offset) % scene.class_count
        detections.append(Detection(class_id, clipped))

    for _ in range(rng.poisson(noise.false_positive_rate)):
        cx = rng.uniform(0.0, camera.image_width)
        cy = rng.uniform(0.0, camera.image_height)
        bw = rng.uniform(*_FP_SIZE_RANGE) * camera.image_width
        bh = rng.uniform(*_FP_SIZE_RANGE) * camera.image_height
        clipped = clip_bbox(BoundingBox(cx, cy, bw, bh), camera)
        class_id = int(rng.integers(0, scene.class_count))
        if clipped is not None:
            detections.append(Detection(class_id, clipped))

    rng.shuffle(detections)
    return detections
