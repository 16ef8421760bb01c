"""Achievable rate, exhaustive beam search, and per-scene oracle beam sets.

The RIS beam acts on the link through the elementwise (Hadamard) cascade
g_k = h_k * (H_k f): the received amplitude on subcarrier k under beam psi
is g_k^T psi, identical to h_k^T diag(psi) H_k f. Rate is the subcarrier
average of log2(1 + SNR |g_k^T psi|^2). Ties in any argmax break toward
the lowest beam index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import RadioConfig, UpaGeometry, bs_ris_channel, ue_ris_channel
from .codebook import Codebook
from .scene import CameraModel, Scene, UE, los_visible, project_bbox

# A beam set is a plain set of 1-based codebook indices.
BeamSet = set


@dataclass(eq=False)
class LinkChannels:
    """Everything needed to rate one BS -> RIS -> UE link."""

    ue_ris: np.ndarray  # (K, M)
    bs_ris: np.ndarray  # (K, M, N)
    bs_beam: np.ndarray  # (N,), unit norm
    snr: float

    def __post_init__(self):
        self.ue_ris = np.asarray(self.ue_ris, dtype=np.complex128)
        self.bs_ris = np.asarray(self.bs_ris, dtype=np.complex128)
        self.bs_beam = np.asarray(self.bs_beam, dtype=np.complex128)
        self.snr = float(self.snr)
        if self.ue_ris.ndim != 2:
            raise ValueError("ue_ris must have shape (K, M)")
        if self.bs_ris.ndim != 3:
            raise ValueError("bs_ris must have shape (K, M, N)")
        k, m = self.ue_ris.shape
        if self.bs_ris.shape[:2] != (k, m):
            raise ValueError("ue_ris and bs_ris disagree on (K, M)")
        if self.bs_beam.shape != (self.bs_ris.shape[2],):
            raise ValueError("bs_beam length must match the BS antenna count")
        if abs(np.linalg.norm(self.bs_beam) - 1.0) > 1e-9:
            raise ValueError("bs_beam must have unit norm")
        if self.snr <= 0:
            raise ValueError("snr must be positive")


def cascade(link: LinkChannels) -> np.ndarray:
    """Per-subcarrier cascaded vector g_k = h_k * (H_k f), shape (K, M)."""
    return link.ue_ris * (link.bs_ris @ link.bs_beam)


def _rate_from_cascade(g: np.ndarray, snr: float, beam: np.ndarray) -> float:
    z = g @ beam
    return float(np.mean(np.log2(1.0 + snr * np.abs(z) ** 2)))


def achievable_rate(link: LinkChannels, beam: np.ndarray) -> float:
    """Subcarrier-averaged rate in bits/s/Hz under reflection beam `beam`."""
    beam = np.asarray(beam, dtype=np.complex128)
    if beam.shape != (link.ue_ris.shape[1],):
        raise ValueError("beam length must match the panel size")
    return _rate_from_cascade(cascade(link), link.snr, beam)


def best_beam(link: LinkChannels, cb: Codebook) -> int:
    """Exhaustive search over the codebook; lowest index wins ties."""
    g = cascade(link)
    best_q = 1
    best_r = -np.inf
    for q in range(1, cb.size + 1):
        r = _rate_from_cascade(g, link.snr, cb.beam(q))
        if r > best_r:
            best_q, best_r = q, r
    return best_q


def is_candidate(scene: Scene, camera: CameraModel, ue: UE) -> bool:
    """Candidate = inside the camera frustum and no BS line of sight."""
    if project_bbox(camera, ue) is None:
        return False
    return not los_visible(scene, scene.bs_position, ue.position)


def build_link(
    scene: Scene,
    ue: UE,
    geom: UpaGeometry,
    radio: RadioConfig,
    bs_channel: tuple[np.ndarray, np.ndarray] | None = None,
) -> LinkChannels:
    """Assemble the link channels for one UE, reusing a precomputed BS leg."""
    if bs_channel is None:
        bs_channel = bs_ris_channel(scene, geom, radio)
    bs_values, bs_beam = bs_channel
    return LinkChannels(ue_ris_channel(scene, ue, geom, radio), bs_values, bs_beam, radio.snr)


def scene_best_beams(scene: Scene, cb: Codebook, radio: RadioConfig) -> dict[int, int]:
    """Optimal beam index per BS-blocked UE (keyed by ue_id).

    Camera-independent: frustum filtering happens per camera on top of this.
    """
    blocked = [ue for ue in scene.ues if not los_visible(scene, scene.bs_position, ue.position)]
    if not blocked:
        return {}
    bs_channel = bs_ris_channel(scene, cb.geom, radio)
    return {
        ue.ue_id: best_beam(build_link(scene, ue, cb.geom, radio, bs_channel), cb)
        for ue in blocked
    }


def scene_beam_set(scene: Scene, camera: CameraModel, cb: Codebook, radio: RadioConfig) -> BeamSet:
    """Optimal candidate beam set of one (scene, camera) pair; duplicates collapse."""
    beams = scene_best_beams(scene, cb, radio)
    return {
        beams[ue.ue_id]
        for ue in scene.ues
        if ue.ue_id in beams and project_bbox(camera, ue) is not None
    }


def topk_beams(scores, k: int) -> list[int]:
    """1-based indices of the k highest scores, ties toward lower index."""
    scores = np.asarray(scores, dtype=float)
    if not 1 <= k <= scores.size:
        raise ValueError(f"k={k} outside 1..{scores.size}")
    order = np.lexsort((np.arange(scores.size), -scores))
    return [int(i) + 1 for i in order[:k]]


def topk_trained_rate(scores, k: int, link: LinkChannels, cb: Codebook) -> float:
    """Best rate achieved by sweeping only the k highest-scoring beams."""
    scores = np.asarray(scores, dtype=float)
    if scores.shape != (cb.size,):
        raise ValueError("scores length must match the codebook size")
    g = cascade(link)
    return max(_rate_from_cascade(g, link.snr, cb.beam(q)) for q in topk_beams(scores, k))
