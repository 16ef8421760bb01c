"""Synthetic street scenes and the geometry queries the pipeline needs.

A scene is one independent snapshot: vehicles (UEs) dropped uniformly in a
road region, axis-aligned box blockers, and the fixed RIS / BS / camera
installation. The module also provides the two geometry primitives used
everywhere downstream: a segment-vs-box line-of-sight test and a pinhole
projection of a UE's bounding volume to an image-plane box.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .seeding import derived_seed, substream

Vec3 = np.ndarray

# Base vehicle footprints (length, width, height in meters) per class id.
DEFAULT_CLASS_EXTENTS = ((4.4, 1.8, 1.5), (6.5, 2.3, 2.6))
DEFAULT_CLASS_PROBS = (0.7, 0.3)


def _vec3(x) -> Vec3:
    v = np.asarray(x, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {v.shape}")
    return v


@dataclass(eq=False)
class Pose:
    """Position plus boresight orientation (yaw about +z, then pitch up)."""

    position: Vec3
    yaw: float = 0.0
    pitch: float = 0.0

    def __post_init__(self):
        self.position = _vec3(self.position)
        self.yaw = float(self.yaw)
        self.pitch = float(self.pitch)

    def basis(self) -> tuple[Vec3, Vec3, Vec3]:
        """Orthonormal (forward, right, up) axes in world coordinates."""
        cy, sy = math.cos(self.yaw), math.sin(self.yaw)
        cp, sp = math.cos(self.pitch), math.sin(self.pitch)
        forward = np.array([cp * cy, cp * sy, sp])
        right = np.array([sy, -cy, 0.0])
        up = np.array([-sp * cy, -sp * sy, cp])
        return forward, right, up

    def to_dict(self) -> dict:
        return {"position": self.position.tolist(), "yaw": self.yaw, "pitch": self.pitch}

    @classmethod
    def from_dict(cls, d: dict) -> "Pose":
        return cls(d["position"], d["yaw"], d["pitch"])


def pose_facing(position, target) -> Pose:
    """Pose at `position` with boresight through `target`."""
    position = _vec3(position)
    delta = _vec3(target) - position
    dist = float(np.linalg.norm(delta))
    if dist == 0.0:
        raise ValueError("cannot orient a pose toward its own position")
    yaw = math.atan2(delta[1], delta[0])
    pitch = math.asin(max(-1.0, min(1.0, delta[2] / dist)))
    return Pose(position, yaw, pitch)


@dataclass(eq=False)
class CameraModel:
    """Pinhole camera; vertical fov follows from the pixel aspect ratio."""

    position: Vec3
    yaw: float = 0.0
    pitch: float = 0.0
    horizontal_fov: float = math.radians(110.0)
    image_width: int = 800
    image_height: int = 450

    def __post_init__(self):
        self.position = _vec3(self.position)
        self.yaw = float(self.yaw)
        self.pitch = float(self.pitch)
        self.horizontal_fov = float(self.horizontal_fov)
        self.image_width = int(self.image_width)
        self.image_height = int(self.image_height)
        if not 0.0 < self.horizontal_fov < math.pi:
            raise ValueError("horizontal_fov must lie in (0, pi)")
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValueError("image dimensions must be positive")

    @property
    def focal_px(self) -> float:
        return (self.image_width / 2.0) / math.tan(self.horizontal_fov / 2.0)

    def pose(self) -> Pose:
        return Pose(self.position, self.yaw, self.pitch)

    def to_dict(self) -> dict:
        return {
            "position": self.position.tolist(),
            "yaw": self.yaw,
            "pitch": self.pitch,
            "horizontal_fov": self.horizontal_fov,
            "image_width": self.image_width,
            "image_height": self.image_height,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraModel":
        return cls(**d)


@dataclass(eq=False)
class BlockerSpec:
    """Axis-aligned box occluder given by center and full side lengths."""

    center: Vec3
    extents: Vec3

    def __post_init__(self):
        self.center = _vec3(self.center)
        self.extents = _vec3(self.extents)
        if not np.all(self.extents > 0):
            raise ValueError("blocker extents must be strictly positive")

    @property
    def lo(self) -> Vec3:
        return self.center - self.extents / 2.0

    @property
    def hi(self) -> Vec3:
        return self.center + self.extents / 2.0

    def to_dict(self) -> dict:
        return {"center": self.center.tolist(), "extents": self.extents.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "BlockerSpec":
        return cls(d["center"], d["extents"])


@dataclass(eq=False)
class AlignedBox:
    """Axis-aligned region given by opposite corners (lo <= hi)."""

    lo: Vec3
    hi: Vec3

    def __post_init__(self):
        self.lo = _vec3(self.lo)
        self.hi = _vec3(self.hi)
        if not np.all(self.hi >= self.lo):
            raise ValueError("box needs hi >= lo on every axis")

    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def contains(self, point) -> bool:
        p = _vec3(point)
        return bool(np.all(p >= self.lo) and np.all(p <= self.hi))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=(n, 3))

    def inflated(self, margin) -> "AlignedBox":
        m = _vec3(margin)
        return AlignedBox(self.lo - m, self.hi + m)

    def to_dict(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "AlignedBox":
        return cls(d["lo"], d["hi"])


@dataclass(eq=False)
class BoundingBox:
    """Image-plane box in pixels: center plus size."""

    x_center: float
    y_center: float
    width: float
    height: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_center, self.y_center, self.width, self.height)


@dataclass(eq=False)
class UE:
    ue_id: int
    position: Vec3
    class_id: int
    extents: Vec3
    velocity: Vec3 = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.ue_id = int(self.ue_id)
        self.position = _vec3(self.position)
        self.class_id = int(self.class_id)
        self.extents = _vec3(self.extents)
        self.velocity = _vec3(self.velocity)
        if not np.all(self.extents > 0):
            raise ValueError("UE extents must be strictly positive")

    def corners(self) -> np.ndarray:
        """The 8 corners of the axis-aligned bounding volume, shape (8, 3)."""
        half = self.extents / 2.0
        signs = np.array(
            [[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
            dtype=float,
        )
        return self.position[None, :] + signs * half[None, :]

    def to_dict(self) -> dict:
        return {
            "ue_id": self.ue_id,
            "position": self.position.tolist(),
            "class_id": self.class_id,
            "extents": self.extents.tolist(),
            "velocity": self.velocity.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "UE":
        return cls(d["ue_id"], d["position"], d["class_id"], d["extents"], d["velocity"])


@dataclass(eq=False)
class ScenarioConfig:
    """Fixed installation plus the randomization ranges for scene drops."""

    ris: Pose
    bs_position: Vec3
    street_axis: Vec3
    ue_count_range: tuple[int, int]
    ue_speed_range: tuple[float, float]
    ue_region: AlignedBox
    blockers: list[BlockerSpec]
    cameras: list[CameraModel]
    master_seed: int
    class_probs: tuple[float, ...] = DEFAULT_CLASS_PROBS
    class_extents: tuple[tuple[float, float, float], ...] = DEFAULT_CLASS_EXTENTS
    size_jitter: float = 0.1

    def __post_init__(self):
        self.bs_position = _vec3(self.bs_position)
        self.street_axis = _vec3(self.street_axis)
        norm = float(np.linalg.norm(self.street_axis))
        if norm == 0.0:
            raise ValueError("street_axis must be nonzero")
        self.street_axis = self.street_axis / norm
        self.ue_count_range = (int(self.ue_count_range[0]), int(self.ue_count_range[1]))
        self.ue_speed_range = (float(self.ue_speed_range[0]), float(self.ue_speed_range[1]))
        self.blockers = list(self.blockers)
        self.cameras = list(self.cameras)
        self.master_seed = int(self.master_seed)
        self.class_probs = tuple(float(p) for p in self.class_probs)
        self.class_extents = tuple(tuple(float(x) for x in e) for e in self.class_extents)
        self.size_jitter = float(self.size_jitter)
        self.validate()

    @property
    def class_count(self) -> int:
        return len(self.class_probs)

    def validate(self) -> None:
        lo, hi = self.ue_count_range
        if lo < 0 or lo > hi:
            raise ValueError("ue_count_range must satisfy 0 <= min <= max")
        if self.ue_speed_range[0] < 0 or self.ue_speed_range[0] > self.ue_speed_range[1]:
            raise ValueError("ue_speed_range must satisfy 0 <= min <= max")
        if self.ue_region.volume() == 0.0:
            raise ValueError("ue_region has zero volume")
        if self.ue_region.contains(self.bs_position):
            raise ValueError("ue_region must not contain the BS position")
        if len(self.class_extents) != len(self.class_probs):
            raise ValueError("class_extents and class_probs must have equal length")
        if abs(sum(self.class_probs) - 1.0) > 1e-9:
            raise ValueError("class_probs must sum to 1")
        if not 0.0 <= self.size_jitter < 1.0:
            raise ValueError("size_jitter must lie in [0, 1)")

    def to_dict(self) -> dict:
        return {
            "ris": self.ris.to_dict(),
            "bs_position": self.bs_position.tolist(),
            "street_axis": self.street_axis.tolist(),
            "ue_count_range": list(self.ue_count_range),
            "ue_speed_range": list(self.ue_speed_range),
            "ue_region": self.ue_region.to_dict(),
            "blockers": [b.to_dict() for b in self.blockers],
            "cameras": [c.to_dict() for c in self.cameras],
            "master_seed": self.master_seed,
            "class_probs": list(self.class_probs),
            "class_extents": [list(e) for e in self.class_extents],
            "size_jitter": self.size_jitter,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        return cls(
            ris=Pose.from_dict(d["ris"]),
            bs_position=d["bs_position"],
            street_axis=d["street_axis"],
            ue_count_range=tuple(d["ue_count_range"]),
            ue_speed_range=tuple(d["ue_speed_range"]),
            ue_region=AlignedBox.from_dict(d["ue_region"]),
            blockers=[BlockerSpec.from_dict(b) for b in d["blockers"]],
            cameras=[CameraModel.from_dict(c) for c in d["cameras"]],
            master_seed=d["master_seed"],
            class_probs=tuple(d.get("class_probs", DEFAULT_CLASS_PROBS)),
            class_extents=tuple(tuple(e) for e in d.get("class_extents", DEFAULT_CLASS_EXTENTS)),
            size_jitter=d.get("size_jitter", 0.1),
        )


@dataclass(eq=False)
class Scene:
    """One generated snapshot, carrying copies of the fixed installation."""

    scene_id: int
    scene_seed: int
    ues: list[UE]
    blockers: list[BlockerSpec]
    ris: Pose
    bs_position: Vec3
    cameras: list[CameraModel]
    class_count: int
    bounce_region: AlignedBox

    def __post_init__(self):
        self.bs_position = _vec3(self.bs_position)

    def to_record(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "scene_seed": self.scene_seed,
            "ues": [u.to_dict() for u in self.ues],
            "blockers": [b.to_dict() for b in self.blockers],
            "ris": self.ris.to_dict(),
            "bs_position": self.bs_position.tolist(),
            "cameras": [c.to_dict() for c in self.cameras],
            "class_count": self.class_count,
            "bounce_region": self.bounce_region.to_dict(),
        }

    @classmethod
    def from_record(cls, d: dict) -> "Scene":
        return cls(
            scene_id=d["scene_id"],
            scene_seed=d["scene_seed"],
            ues=[UE.from_dict(u) for u in d["ues"]],
            blockers=[BlockerSpec.from_dict(b) for b in d["blockers"]],
            ris=Pose.from_dict(d["ris"]),
            bs_position=d["bs_position"],
            cameras=[CameraModel.from_dict(c) for c in d["cameras"]],
            class_count=d["class_count"],
            bounce_region=AlignedBox.from_dict(d["bounce_region"]),
        )

    def to_json_line(self) -> str:
        return json.dumps(self.to_record(), sort_keys=True)

    @classmethod
    def from_json_line(cls, line: str) -> "Scene":
        return cls.from_record(json.loads(line))


# Margin around the UE region inside which single-bounce scatter points are
# sampled (x, y margin and extra headroom in z).
_BOUNCE_MARGIN = np.array([8.0, 8.0, 6.0])


def generate_scene(config: ScenarioConfig, scene_index: int) -> Scene:
    """Draw one scene; a pure function of (config, scene_index).

    UE positions are uniform in the UE region, classes follow the configured
    distribution, per-class footprints get a small multiplicative size
    jitter, and velocities run along the street axis in either direction.
    """
    config.validate()
    rng = substream(config.master_seed, "scene", scene_index)
    lo, hi = config.ue_count_range
    count = int(rng.integers(lo, hi + 1))
    positions = config.ue_region.sample(rng, count)
    classes = rng.choice(config.class_count, size=count, p=np.asarray(config.class_probs))
    scales = rng.uniform(1.0 - config.size_jitter, 1.0 + config.size_jitter, size=(count, 3))
    speeds = rng.uniform(config.ue_speed_range[0], config.ue_speed_range[1], size=count)
    headings = rng.choice(np.array([-1.0, 1.0]), size=count)

    base = np.asarray(config.class_extents, dtype=float)
    ues = []
    for i in range(count):
        extents = base[classes[i]] * scales[i]
        velocity = config.street_axis * speeds[i] * headings[i]
        ues.append(UE(i, positions[i], int(classes[i]), extents, velocity))

    bounce = config.ue_region.inflated(_BOUNCE_MARGIN)
    bounce.lo[2] = max(bounce.lo[2], 0.0)  # no underground bounce points

    return Scene(
        scene_id=int(scene_index),
        scene_seed=derived_seed(config.master_seed, "scene", scene_index),
        ues=ues,
        blockers=list(config.blockers),
        ris=config.ris,
        bs_position=config.bs_position,
        cameras=list(config.cameras),
        class_count=config.class_count,
        bounce_region=bounce,
    )


def _segment_hits_open_box(a: Vec3, b: Vec3, lo: Vec3, hi: Vec3) -> bool:
    """True iff the open segment (a, b) passes through the open box interior.

    Slab test with strict comparisons, so a segment grazing a face, edge or
    corner does not count as a hit, and neither does a box that only touches
    an endpoint.
    """
    d = b - a
    t0, t1 = 0.0, 1.0
    for ax in range(3):
        if d[ax] == 0.0:
            if not lo[ax] < a[ax] < hi[ax]:
                return False
        else:
            ta = (lo[ax] - a[ax]) / d[ax]
            tb = (hi[ax] - a[ax]) / d[ax]
            if ta > tb:
                ta, tb = tb, ta
            t0 = max(t0, ta)
            t1 = min(t1, tb)
            if t0 >= t1:
                return False
    return t0 < t1


def los_visible(scene: Scene, a, b) -> bool:
    """True iff the segment a-b crosses no blocker box interior."""
    a = _vec3(a)
    b = _vec3(b)
    if np.array_equal(a, b):
        raise ValueError("los_visible requires two distinct points")
    for blocker in scene.blockers:
        if _segment_hits_open_box(a, b, blocker.lo, blocker.hi):
            return False
    return True


def project_bbox(camera: CameraModel, ue: UE) -> BoundingBox | None:
    """Pinhole-project a UE's bounding volume to an image box.

    Returns None when the UE center sits behind the image plane or the
    projected hull falls entirely outside the frame. The returned box is
    clipped to [0, w] x [0, h].
    """
    forward, right, up = camera.pose().basis()
    center = ue.position - camera.position
    if center @ forward <= 0.0:
        return None

    f_px = camera.focal_px
    w, h = camera.image_width, camera.image_height
    xs, ys = [], []
    for corner in ue.corners():
        v = corner - camera.position
        depth = v @ forward
        if depth <= 1e-9:
            continue
        xs.append(w / 2.0 + f_px * (v @ right) / depth)
        ys.append(h / 2.0 - f_px * (v @ up) / depth)
    if not xs:
        return None

    x1 = max(0.0, min(xs))
    x2 = min(float(w), max(xs))
    y1 = max(0.0, min(ys))
    y2 = min(float(h), max(ys))
    if x2 <= x1 or y2 <= y1:
        return None
    return BoundingBox((x1 + x2) / 2.0, (y1 + y2) / 2.0, x2 - x1, y2 - y1)


def clip_bbox(bbox: BoundingBox, camera: CameraModel) -> BoundingBox | None:
    """Clip a pixel box to the camera frame; None if nothing remains.

    Boxes already inside the frame pass through unchanged (no bit churn
    from the corner round trip).
    """
    x1 = bbox.x_center - bbox.width / 2.0
    x2 = bbox.x_center + bbox.width / 2.0
    y1 = bbox.y_center - bbox.height / 2.0
    y2 = bbox.y_center + bbox.height / 2.0
    w, h = float(camera.image_width), float(camera.image_height)
    if x1 >= 0.0 and y1 >= 0.0 and x2 <= w and y2 <= h and bbox.width > 0 and bbox.height > 0:
        return bbox
    x1, x2 = max(0.0, x1), min(w, x2)
    y1, y2 = max(0.0, y1), min(h, y2)
    if x2 <= x1 or y2 <= y1:
        return None
    return BoundingBox((x1 + x2) / 2.0, (y1 + y2) / 2.0, x2 - x1, y2 - y1)


def save_scenes(path, scenes) -> None:
    """Write scenes as line-delimited JSON records, one scene per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for scene in scenes:
            fh.write(scene.to_json_line())
            fh.write("\n")


def load_scenes(path) -> list[Scene]:
    with open(path, "r", encoding="utf-8") as fh:
        return [Scene.from_json_line(line) for line in fh if line.strip()]


def street_scenario(master_seed: int = 0, n_cameras: int = 2) -> ScenarioConfig:
    """Default desk scenario: RIS at the roadside, BS mast behind a building.

    The building fully shadows the road from the BS while leaving the BS-RIS
    link clear, so every camera-visible vehicle is a candidate served via
    the RIS.
    """
    if not 1 <= n_cameras <= 2:
        raise ValueError("street_scenario supports 1 or 2 cameras")
    ris = Pose([0.0, 0.0, 5.0], yaw=math.pi / 2, pitch=0.0)
    cameras = [
        CameraModel(
            position=[0.0, 0.0, 5.0],
            yaw=math.pi / 2,
            pitch=0.0,
            horizontal_fov=math.radians(110.0),
            image_width=800,
            image_height=450,
        ),
        CameraModel(
            position=[0.0, 0.0, 5.0],
            yaw=math.pi / 2 - 0.7,
            pitch=0.0,
            horizontal_fov=math.radians(75.0),
            image_width=800,
            image_height=450,
        ),
    ][:n_cameras]
    # The road segment stays (almost entirely) inside the central camera's
    # frustum, so scenes with zero visible vehicles are rare.
    return ScenarioConfig(
        ris=ris,
        bs_position=[45.0, 25.0, 22.0],
        street_axis=[1.0, 0.0, 0.0],
        ue_count_range=(1, 5),
        ue_speed_range=(0.0, 20.0),
        ue_region=AlignedBox([-14.0, 8.0, 0.7], [14.0, 16.0, 1.7]),
        blockers=[BlockerSpec(center=[24.0, 21.0, 7.0], extents=[48.0, 8.0, 14.0])],
        cameras=cameras,
        master_seed=master_seed,
    )
