"""Input/label encoding and the on-disk dataset format.

The network input for one camera view is a (C+4) x U_max matrix: one column
per detection holding a one-hot class block plus the box normalized by the
image size, zero-padded to U_max columns. Labels are multi-hot vectors over
the codebook.

File format (text, one camera per file): a versioned JSON header line with
the dataset metadata, then one line per sample of the form

    scene_id,camera_id,<flattened V as decimal floats>,<label bit string>

V is flattened column by column; floats are written with shortest
round-trip repr so save/load is bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .scene import CameraModel
from .seeding import substream

FORMAT_NAME = "camris-dataset"
FORMAT_VERSION = 1


@dataclass(eq=False)
class Sample:
    scene_id: int
    camera_id: int
    features: np.ndarray  # (C+4, U_max) float64
    label: np.ndarray  # (Q,) uint8 multi-hot

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.label = np.asarray(self.label, dtype=np.uint8)
        if self.features.ndim != 2 or self.label.ndim != 1:
            raise ValueError("features must be 2-D and label 1-D")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Sample):
            return NotImplemented
        return (
            self.scene_id == other.scene_id
            and self.camera_id == other.camera_id
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.label, other.label)
        )


@dataclass(eq=True)
class DatasetMeta:
    class_count: int
    u_max: int
    codebook_size: int
    camera_id: int
    image_width: int
    image_height: int
    seed: int
    sample_count: int

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "class_count": self.class_count,
            "u_max": self.u_max,
            "codebook_size": self.codebook_size,
            "camera_id": self.camera_id,
            "image_width": self.image_width,
            "image_height": self.image_height,
            "seed": self.seed,
            "sample_count": self.sample_count,
        }


@dataclass(eq=False)
class Dataset:
    meta: DatasetMeta
    samples: list[Sample] = field(default_factory=list)


def encode_input(dets, class_count: int, u_max: int, camera: CameraModel) -> np.ndarray:
    """Detection list -> (C+4, U_max) input matrix.

    Columns are [one-hot class; x/w; y/h; width/w; height/h]; unused columns
    stay zero. When more than U_max detections arrive, those with the
    smallest box area (a proxy for the farthest objects) are dropped first.
    """
    dets = list(dets)
    if len(dets) > u_max:
        areas = np.array([d.bbox.width * d.bbox.height for d in dets])
        keep = np.sort(np.argsort(-areas, kind="stable")[:u_max])
        dets = [dets[i] for i in keep]

    out = np.zeros((class_count + 4, u_max), dtype=np.float64)
    w = float(camera.image_width)
    h = float(camera.image_height)
    for col, det in enumerate(dets):
        if not 0 <= det.class_id < class_count:
            raise ValueError(f"class id {det.class_id} outside 0..{class_count - 1}")
        out[det.class_id, col] = 1.0
        out[class_count + 0, col] = det.bbox.x_center / w
        out[class_count + 1, col] = det.bbox.y_center / h
        out[class_count + 2, col] = det.bbox.width / w
        out[class_count + 3, col] = det.bbox.height / h
    return out


def encode_label(beam_set, codebook_size: int) -> np.ndarray:
    """Beam index set -> multi-hot vector; index q marks position q-1."""
    label = np.zeros(codebook_size, dtype=np.uint8)
    for q in beam_set:
        if not 1 <= q <= codebook_size:
            raise ValueError(f"beam index {q} outside 1..{codebook_size}")
        label[q - 1] = 1
    return label


def split(samples, train_fraction: float, seed: int) -> tuple[list, list]:
    """Seeded shuffle then split; the two parts are disjoint and exhaustive."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly in (0, 1)")
    samples = list(samples)
    if len(samples) < 2:
        raise ValueError("need at least 2 samples to split")
    order = substream(seed, "split").permutation(len(samples))
    n_train = int(round(len(samples) * train_fraction))
    n_train = min(max(n_train, 1), len(samples) - 1)
    train = [samples[i] for i in order[:n_train]]
    test = [samples[i] for i in order[n_train:]]
    return train, test


def _format_sample(sample: Sample) -> str:
    floats = " ".join(repr(float(x)) for x in sample.features.ravel(order="F"))
    bits = "".join("1" if b else "0" for b in sample.label)
    return f"{sample.scene_id},{sample.camera_id},{floats},{bits}"


def save_dataset(path, dataset: Dataset) -> None:
    meta = dataset.meta
    if meta.sample_count != len(dataset.samples):
        raise ValueError("meta.sample_count does not match the sample list")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(meta.to_dict(), sort_keys=True))
        fh.write("\n")
        for sample in dataset.samples:
            if sample.camera_id != meta.camera_id:
                raise ValueError("a dataset file carries exactly one camera_id")
            fh.write(_format_sample(sample))
            fh.write("\n")


def _parse_sample(line: str, meta: DatasetMeta) -> Sample:
    parts = line.split(",")
    if len(parts) != 4:
        raise ValueError(f"malformed record: {line[:60]!r}")
    scene_id, camera_id = int(parts[0]), int(parts[1])
    values = np.array([float(x) for x in parts[2].split()], dtype=np.float64)
    rows = meta.class_count + 4
    if values.size != rows * meta.u_max:
        raise ValueError("record has the wrong number of feature values")
    features = values.reshape((rows, meta.u_max), order="F")
    bits = parts[3].strip()
    if len(bits) != meta.codebook_size or set(bits) - {"0", "1"}:
        raise ValueError("record has a malformed label bit string")
    label = np.frombuffer(bits.encode("ascii"), dtype=np.uint8) - ord("0")
    return Sample(scene_id, camera_id, features, label)


def load_dataset(path) -> Dataset:
    """Parse a dataset file; version mismatch and truncation raise ValueError."""
    with open(path, "r", encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line:
            raise ValueError(f"{path}: empty file")
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: corrupted header: {exc}") from exc
        if header.get("format") != FORMAT_NAME:
            raise ValueError(f"{path}: not a {FORMAT_NAME} file")
        if header.get("version") != FORMAT_VERSION:
            raise ValueError(
                f"{path}: version mismatch (file {header.get('version')}, "
                f"supported {FORMAT_VERSION})"
            )
        meta = DatasetMeta(
            class_count=int(header["class_count"]),
            u_max=int(header["u_max"]),
            codebook_size=int(header["codebook_size"]),
            camera_id=int(header["camera_id"]),
            image_width=int(header["image_width"]),
            image_height=int(header["image_height"]),
            seed=int(header["seed"]),
            sample_count=int(header["sample_count"]),
        )
        samples = []
        for line in fh:
            line = line.strip()
            if line:
                samples.append(_parse_sample(line, meta))
    if len(samples) != meta.sample_count:
        raise ValueError(
            f"{path}: truncated or padded file "
            f"(header says {meta.sample_count} samples, found {len(samples)})"
        )
    return Dataset(meta, samples)
