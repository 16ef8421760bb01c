"""Wideband geometric channels between the RIS and its link endpoints.

Each propagation path (one line-of-sight ray plus a few random single-bounce
rays) contributes a pulse-shaped, tap-weighted copy of the panel's array
response at the path's arrival angles:

    tap[d] = sqrt(M / pathloss) * sum_paths gain * p(d*Ts - delay) * a(az, el)

and the per-subcarrier response is the K-point DFT of the taps over the
delay window. BS-side links carry an extra departure steering factor so the
BS-to-RIS channel generalizes to multi-antenna transmitters.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import binio
from .scene import Pose, Scene, UE, Vec3, _vec3, los_visible, pose_facing
from .seeding import substream

SPEED_OF_LIGHT = 299_792_458.0

# Amplitude loss range applied to single-bounce rays on top of the
# free-space gain of the total path length.
_BOUNCE_LOSS_RANGE = (0.05, 0.3)


@dataclass(eq=False)
class UpaGeometry:
    """Uniform planar array: columns along the panel's right axis, rows up."""

    cols: int = 32
    rows: int = 8
    spacing: float = 0.5  # element pitch in wavelengths

    def __post_init__(self):
        self.cols = int(self.cols)
        self.rows = int(self.rows)
        self.spacing = float(self.spacing)
        if self.cols < 1 or self.rows < 1:
            raise ValueError("array needs at least one column and one row")
        if self.spacing <= 0:
            raise ValueError("element spacing must be positive")

    @property
    def size(self) -> int:
        return self.cols * self.rows

    def to_dict(self) -> dict:
        return {"cols": self.cols, "rows": self.rows, "spacing": self.spacing}

    @classmethod
    def from_dict(cls, d: dict) -> "UpaGeometry":
        return cls(**d)


def array_response(geom: UpaGeometry, azimuth: float, elevation: float) -> np.ndarray:
    """Unit-modulus steering vector of the panel.

    Element (p, q) at column p, row q (flattened row-major over (p, q), so
    index m = p * rows + q) has phase

        2*pi*spacing * (p * sin(az)*cos(el) + q * sin(el)).
    """
    if abs(elevation) > math.pi / 2 + 1e-12:
        raise ValueError("elevation must lie in [-pi/2, pi/2]")
    u = math.sin(azimuth) * math.cos(elevation)
    v = math.sin(elevation)
    col_phase = 2.0 * math.pi * geom.spacing * u * np.arange(geom.cols)
    row_phase = 2.0 * math.pi * geom.spacing * v * np.arange(geom.rows)
    return np.exp(1j * (col_phase[:, None] + row_phase[None, :])).ravel()


@dataclass(eq=False)
class PathCluster:
    """One propagation ray: complex gain, absolute delay, arrival angles.

    `tx_azimuth`/`tx_elevation` are the departure angles in the transmit
    array's frame (only used for matrix channels); `bounce_point` records
    the reflection point of single-bounce rays (None for line-of-sight).
    """

    gain: complex
    delay: float
    azimuth: float
    elevation: float
    tx_azimuth: float = 0.0
    tx_elevation: float = 0.0
    bounce_point: Vec3 | None = None

    def __post_init__(self):
        self.gain = complex(self.gain)
        self.delay = float(self.delay)
        if self.delay < 0:
            raise ValueError("path delay must be nonnegative")


@dataclass(eq=False)
class RadioConfig:
    """OFDM numerology, power budget and channel-synthesis knobs.

    The per-subcarrier SNR is tx_power / (n_subcarriers * noise_power).
    Defaults: 28 GHz carrier, 100 MHz bandwidth (10 ns sample period),
    64 subcarriers, 32 delay taps.
    """

    n_subcarriers: int = 64
    sample_period: float = 1e-8
    n_taps: int = 32
    tx_power: float = 1.0
    noise_power: float = 2e-14
    pathloss: float = 1.0
    pulse: str = "sinc"
    rc_rolloff: float = 0.8
    carrier_hz: float = 28e9
    n_scatter: int = 2

    def __post_init__(self):
        self.n_subcarriers = int(self.n_subcarriers)
        self.n_taps = int(self.n_taps)
        self.n_scatter = int(self.n_scatter)
        if self.n_subcarriers < 1:
            raise ValueError("n_subcarriers must be >= 1")
        if self.n_taps < 1:
            raise ValueError("n_taps must be >= 1")
        if self.sample_period <= 0:
            raise ValueError("sample_period must be positive")
        if self.tx_power <= 0:
            raise ValueError("tx_power must be positive")
        if self.noise_power <= 0:
            raise ValueError("noise_power must be positive")
        if self.pathloss <= 0:
            raise ValueError("pathloss must be positive")
        if self.pulse not in ("sinc", "raised_cosine"):
            raise ValueError("pulse must be 'sinc' or 'raised_cosine'")
        if self.n_scatter < 0:
            raise ValueError("n_scatter must be >= 0")

    @property
    def snr(self) -> float:
        return self.tx_power / (self.n_subcarriers * self.noise_power)

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    def to_dict(self) -> dict:
        return {
            "n_subcarriers": self.n_subcarriers,
            "sample_period": self.sample_period,
            "n_taps": self.n_taps,
            "tx_power": self.tx_power,
            "noise_power": self.noise_power,
            "pathloss": self.pathloss,
            "pulse": self.pulse,
            "rc_rolloff": self.rc_rolloff,
            "carrier_hz": self.carrier_hz,
            "n_scatter": self.n_scatter,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RadioConfig":
        return cls(**d)


def _sinc(x: np.ndarray) -> np.ndarray:
    """Normalized sinc with exact values at integer arguments.

    np.sinc leaves sin(pi*n)/(pi*n) residues of order 1e-16 at integers
    because pi is inexact; snapping integers makes integer-delay taps
    exactly zero, which downstream tests rely on.
    """
    vals = np.sinc(x)
    integral = x == np.round(x)
    return np.where(integral, np.where(x == 0.0, 1.0, 0.0), vals)


def pulse_value(radio: RadioConfig, x) -> np.ndarray:
    """Pulse shape evaluated at x = t / sample_period.

    `sinc` is the normalized sinc sin(pi x)/(pi x); `raised_cosine` applies
    the configured roll-off, with the removable singularity at
    x = 1/(2 rolloff) handled explicitly.
    """
    x = np.asarray(x, dtype=float)
    if radio.pulse == "sinc":
        return _sinc(x)
    beta = radio.rc_rolloff
    denom = 1.0 - (2.0 * beta * x) ** 2
    singular = np.isclose(denom, 0.0, atol=1e-12)
    safe = np.where(singular, 1.0, denom)
    vals = _sinc(x) * np.cos(math.pi * beta * x) / safe
    limit = (math.pi / 4.0) * _sinc(np.asarray(1.0 / (2.0 * beta)))
    return np.where(singular, limit, vals)


def _arrival_angles(pose: Pose, direction: Vec3) -> tuple[float, float]:
    forward, right, up = pose.basis()
    az = math.atan2(float(direction @ right), float(direction @ forward))
    el = math.asin(max(-1.0, min(1.0, float(direction @ up))))
    return az, el


def synth_paths(
    scene: Scene,
    tx,
    rx,
    rng: np.random.Generator,
    *,
    wavelength: float = SPEED_OF_LIGHT / 28e9,
    n_scatter: int = 2,
    tx_pose: Pose | None = None,
) -> list[PathCluster]:
    """Generate the ray set for a link terminating at the RIS.

    `rx` is treated as the RIS reference point: arrival angles are expressed
    in the RIS frame (scene.ris). A deterministic line-of-sight ray is
    emitted when no blocker interrupts the segment, with free-space gain and
    delay distance/c. Up to `n_scatter` single-bounce rays are added via
    random bounce points in the scene's bounce region; a bounce is kept only
    when both legs are unobstructed, and it carries an extra reflection loss
    plus a random phase. Returns [] under full blockage.
    """
    tx = _vec3(tx)
    rx = _vec3(rx)
    if np.array_equal(tx, rx):
        raise ValueError("synth_paths requires distinct endpoints")

    paths: list[PathCluster] = []
    dist = float(np.linalg.norm(rx - tx))
    if los_visible(scene, tx, rx):
        direction = (tx - rx) / dist
        az, el = _arrival_angles(scene.ris, direction)
        tx_az = tx_el = 0.0
        if tx_pose is not None:
            tx_az, tx_el = _arrival_angles(tx_pose, (rx - tx) / dist)
        gain = (wavelength / (4.0 * math.pi * dist)) * np.exp(-2j * math.pi * dist / wavelength)
        paths.append(PathCluster(gain, dist / SPEED_OF_LIGHT, az, el, tx_az, tx_el))

    for _ in range(n_scatter):
        point = scene.bounce_region.sample(rng, 1)[0]
        loss = rng.uniform(*_BOUNCE_LOSS_RANGE)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        if np.array_equal(point, tx) or np.array_equal(point, rx):
            continue
        if not (los_visible(scene, tx, point) and los_visible(scene, point, rx)):
            continue
        d1 = float(np.linalg.norm(point - tx))
        d2 = float(np.linalg.norm(rx - point))
        total = d1 + d2
        direction = (point - rx) / d2
        az, el = _arrival_angles(scene.ris, direction)
        tx_az = tx_el = 0.0
        if tx_pose is not None:
            tx_az, tx_el = _arrival_angles(tx_pose, (point - tx) / d1)
        gain = loss * (wavelength / (4.0 * math.pi * total)) * np.exp(1j * phase)
        paths.append(
            PathCluster(gain, total / SPEED_OF_LIGHT, az, el, tx_az, tx_el, bounce_point=point)
        )
    return paths


@dataclass(eq=False)
class DelayChannel:
    """Delay-tap response: taps has shape (D, M) or (D, M, N)."""

    taps: np.ndarray

    def __post_init__(self):
        self.taps = np.asarray(self.taps, dtype=np.complex128)
        if self.taps.ndim not in (2, 3):
            raise ValueError("taps must have shape (D, M) or (D, M, N)")
        if not np.all(np.isfinite(self.taps.view(float))):
            raise ValueError("taps must be finite")

    @property
    def n_taps(self) -> int:
        return self.taps.shape[0]


@dataclass(eq=False)
class FreqChannel:
    """Per-subcarrier response: values has shape (K, M) or (K, M, N)."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.ndim not in (2, 3):
            raise ValueError("values must have shape (K, M) or (K, M, N)")
        if not np.all(np.isfinite(self.values.view(float))):
            raise ValueError("values must be finite")

    @property
    def n_subcarriers(self) -> int:
        return self.values.shape[0]


def _tap_weights(paths, radio: RadioConfig) -> np.ndarray:
    """Pulse weights per (path, tap); warns when a delay falls off the window."""
    delays = np.array([p.delay for p in paths])
    window = radio.n_taps * radio.sample_period
    if np.any(delays >= window):
        warnings.warn(
            "path delay exceeds the tap window; contribution truncated",
            RuntimeWarning,
            stacklevel=3,
        )
    d_idx = np.arange(radio.n_taps, dtype=float)
    return pulse_value(radio, d_idx[None, :] - delays[:, None] / radio.sample_period)


def delay_channel(paths, geom: UpaGeometry, radio: RadioConfig) -> DelayChannel:
    """Vector delay taps (D, M) for a link into an M-element panel."""
    taps = np.zeros((radio.n_taps, geom.size), dtype=np.complex128)
    if paths:
        weights = _tap_weights(paths, radio)
        for i, path in enumerate(paths):
            a = array_response(geom, path.azimuth, path.elevation)
            taps += path.gain * weights[i][:, None] * a[None, :]
        taps *= math.sqrt(geom.size / radio.pathloss)
    return DelayChannel(taps)


def delay_channel_matrix(
    paths, rx_geom: UpaGeometry, tx_geom: UpaGeometry, radio: RadioConfig
) -> DelayChannel:
    """Matrix delay taps (D, M, N) between an N-element transmitter and the panel."""
    taps = np.zeros((radio.n_taps, rx_geom.size, tx_geom.size), dtype=np.complex128)
    if paths:
        weights = _tap_weights(paths, radio)
        for i, path in enumerate(paths):
            a_rx = array_response(rx_geom, path.azimuth, path.elevation)
            a_tx = array_response(tx_geom, path.tx_azimuth, path.tx_elevation)
            taps += path.gain * weights[i][:, None, None] * np.multiply.outer(a_rx, a_tx)
        taps *= math.sqrt(rx_geom.size * tx_geom.size / radio.pathloss)
    return DelayChannel(taps)


def freq_channel(dc: DelayChannel, n_subcarriers: int) -> FreqChannel:
    """DFT of the taps: values[k] = sum_d taps[d] * exp(-2j*pi*k*d / K)."""
    if n_subcarriers < 1:
        raise ValueError("n_subcarriers must be >= 1")
    taps = dc.taps
    d = taps.shape[0]
    if d <= n_subcarriers:
        pad = [(0, n_subcarriers - d)] + [(0, 0)] * (taps.ndim - 1)
        values = np.fft.fft(np.pad(taps, pad), axis=0)
    else:
        k = np.arange(n_subcarriers)
        dft = np.exp(-2j * math.pi * np.outer(k, np.arange(d)) / n_subcarriers)
        values = np.tensordot(dft, taps, axes=(1, 0))
    return FreqChannel(values)


def bs_beamformer(bs_geom: UpaGeometry, azimuth: float = 0.0, elevation: float = 0.0) -> np.ndarray:
    """Unit-norm conjugate steering vector of the BS array."""
    a = array_response(bs_geom, azimuth, elevation)
    return np.conj(a) / math.sqrt(bs_geom.size)


def ue_ris_channel(scene: Scene, ue: UE, geom: UpaGeometry, radio: RadioConfig) -> np.ndarray:
    """Per-subcarrier UE-to-RIS channel, shape (K, M); seeded by the scene."""
    rng = substream(scene.scene_seed, "ue_link", ue.ue_id)
    paths = synth_paths(
        scene,
        ue.position,
        scene.ris.position,
        rng,
        wavelength=radio.wavelength,
        n_scatter=radio.n_scatter,
    )
    return freq_channel(delay_channel(paths, geom, radio), radio.n_subcarriers).values


def bs_ris_channel(
    scene: Scene,
    geom: UpaGeometry,
    radio: RadioConfig,
    bs_geom: UpaGeometry | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-subcarrier BS-to-RIS channel (K, M, N) plus the BS beam f.

    The BS array faces the RIS, so its beam is the conjugate steering vector
    toward the line-of-sight direction (all-ones/sqrt(N) by construction);
    the default is a single-antenna BS.
    """
    if bs_geom is None:
        bs_geom = UpaGeometry(1, 1)
    rng = substream(scene.scene_seed, "bs_link")
    bs_pose = pose_facing(scene.bs_position, scene.ris.position)
    paths = synth_paths(
        scene,
        scene.bs_position,
        scene.ris.position,
        rng,
        wavelength=radio.wavelength,
        n_scatter=radio.n_scatter,
        tx_pose=bs_pose,
    )
    dc = delay_channel_matrix(paths, geom, bs_geom, radio)
    values = freq_channel(dc, radio.n_subcarriers).values
    return values, bs_beamformer(bs_geom)


def save_channel(path, fc: FreqChannel) -> None:
    binio.save_complex_array(path, fc.values)


def load_channel(path) -> FreqChannel:
    return FreqChannel(binio.load_complex_array(path))
