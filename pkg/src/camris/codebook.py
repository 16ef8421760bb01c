"""Pre-defined unit-modulus reflection-beam codebook for the RIS panel.

Beams are conjugate steering vectors on a grid that is uniform in sine
space (cell centers, so a 1x1 grid steers broadside). Beam indices are
1-based and run row-major over (azimuth, elevation), which keeps multi-hot
label positions stable across runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import binio
from .channel import UpaGeometry, array_response


@dataclass(eq=False)
class Codebook:
    beams: np.ndarray  # (Q, M) complex, every entry unit modulus
    az_grid: np.ndarray  # (n_az,) sine-azimuth steering values
    el_grid: np.ndarray  # (n_el,) sine-elevation steering values
    geom: UpaGeometry

    def __post_init__(self):
        self.beams = np.asarray(self.beams, dtype=np.complex128)
        self.az_grid = np.asarray(self.az_grid, dtype=float)
        self.el_grid = np.asarray(self.el_grid, dtype=float)
        if self.beams.ndim != 2 or self.beams.shape[0] < 1:
            raise ValueError("beams must be a nonempty (Q, M) array")
        if self.beams.shape != (self.az_grid.size * self.el_grid.size, self.geom.size):
            raise ValueError("beam array inconsistent with grid and panel size")

    @property
    def size(self) -> int:
        return self.beams.shape[0]

    def beam(self, q: int) -> np.ndarray:
        """Beam for 1-based index q; out-of-range indices are a hard error."""
        if not 1 <= q <= self.size:
            raise IndexError(f"beam index {q} outside 1..{self.size}")
        return self.beams[q - 1]

    def grid_index(self, az_idx: int, el_idx: int) -> int:
        """1-based beam index of grid point (az_idx, el_idx)."""
        if not (0 <= az_idx < self.az_grid.size and 0 <= el_idx < self.el_grid.size):
            raise IndexError("grid point outside the codebook grid")
        return az_idx * self.el_grid.size + el_idx + 1

    def steering_angles(self, q: int) -> tuple[float, float]:
        """(azimuth, elevation) in radians of the 1-based beam q."""
        if not 1 <= q <= self.size:
            raise IndexError(f"beam index {q} outside 1..{self.size}")
        az_idx, el_idx = divmod(q - 1, self.el_grid.size)
        return math.asin(self.az_grid[az_idx]), math.asin(self.el_grid[el_idx])


def _sine_grid(n: int) -> np.ndarray:
    return (2.0 * np.arange(n) + 1.0 - n) / n


def build_codebook(geom: UpaGeometry, n_az: int = 32, n_el: int = 8) -> Codebook:
    """Steering-grid codebook with n_az * n_el beams."""
    if n_az < 1 or n_el < 1:
        raise ValueError("codebook grid needs n_az >= 1 and n_el >= 1")
    az_grid = _sine_grid(n_az)
    el_grid = _sine_grid(n_el)
    beams = np.empty((n_az * n_el, geom.size), dtype=np.complex128)
    for i, s_az in enumerate(az_grid):
        for j, s_el in enumerate(el_grid):
            a = array_response(geom, math.asin(s_az), math.asin(s_el))
            beams[i * n_el + j] = np.conj(a)
    return Codebook(beams, az_grid, el_grid, geom)


def save_codebook(path, cb: Codebook) -> None:
    """Dump beams in the shared binary complex-array format."""
    binio.save_complex_array(path, cb.beams)
