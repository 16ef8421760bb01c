import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from camris.binio import load_complex_array, save_complex_array
from camris.channel import (
    SPEED_OF_LIGHT,
    DelayChannel,
    FreqChannel,
    PathCluster,
    RadioConfig,
    UpaGeometry,
    array_response,
    bs_ris_channel,
    delay_channel,
    delay_channel_matrix,
    freq_channel,
    load_channel,
    pulse_value,
    save_channel,
    synth_paths,
    ue_ris_channel,
)
from camris.scene import generate_scene
from camris.seeding import substream

from conftest import make_scenario


def direct_dft(taps, n_subcarriers):
    """Independent oracle: literal evaluation of the tap-sum DFT."""
    k = np.arange(n_subcarriers)
    d = np.arange(taps.shape[0])
    phase = np.exp(-2j * np.pi * np.outer(k, d) / n_subcarriers)
    return np.tensordot(phase, taps, axes=(1, 0))


class TestArrayResponse:
    def test_broadside_all_ones(self):
        geom = UpaGeometry(4, 3)
        np.testing.assert_allclose(array_response(geom, 0.0, 0.0), np.ones(12))

    def test_two_element_hand_value(self):
        # Hand oracle: phase of element (p=1, q=0) is 2*pi*0.5*sin(pi/6) = pi/2.
        geom = UpaGeometry(2, 1, spacing=0.5)
        a = array_response(geom, math.pi / 6, 0.0)
        np.testing.assert_allclose(a, [1.0, 1.0j], atol=1e-12)

    def test_row_term_hand_value(self):
        geom = UpaGeometry(1, 2, spacing=0.5)
        a = array_response(geom, 0.0, math.pi / 6)
        np.testing.assert_allclose(a, [1.0, 1.0j], atol=1e-12)

    @given(az=st.floats(-math.pi, math.pi), el=st.floats(-math.pi / 2, math.pi / 2))
    @settings(max_examples=60, deadline=None)
    def test_unit_modulus(self, az, el):
        a = array_response(UpaGeometry(5, 4), az, el)
        np.testing.assert_allclose(np.abs(a), 1.0, atol=1e-12)

    def test_elevation_out_of_range(self):
        with pytest.raises(ValueError):
            array_response(UpaGeometry(2, 2), 0.0, 2.0)


class TestSynthPaths:
    def test_clear_los_single_path(self, tiny_radio):
        cfg = make_scenario(blockers=[])
        scene = generate_scene(cfg, 0)
        rng = substream(1, "ue_link", 0)
        paths = synth_paths(scene, [10.0, 12.0, 1.0], scene.ris.position, rng, n_scatter=0)
        assert len(paths) == 1
        dist = np.linalg.norm(np.array([10.0, 12.0, 1.0]) - scene.ris.position)
        assert paths[0].delay == pytest.approx(dist / SPEED_OF_LIGHT, rel=1e-12)
        assert paths[0].bounce_point is None

    def test_blocked_no_scatter_empty(self):
        cfg = make_scenario()
        scene = generate_scene(cfg, 0)
        rng = substream(1, "ue_link", 0)
        paths = synth_paths(scene, scene.bs_position, [0.0, 12.0, 1.0], rng, n_scatter=0)
        # This segment crosses the building, so with no bounces there is no path.
        assert paths == []

    def test_bounce_delay_is_path_length_sum(self):
        # Oracle: the recorded bounce point determines the delay exactly.
        cfg = make_scenario(blockers=[])
        scene = generate_scene(cfg, 0)
        tx = np.array([10.0, 12.0, 1.0])
        rx = scene.ris.position
        rng = substream(9, "ue_link", 3)
        paths = synth_paths(scene, tx, rx, rng, n_scatter=5)
        bounced = [p for p in paths if p.bounce_point is not None]
        assert bounced
        for p in bounced:
            total = np.linalg.norm(p.bounce_point - tx) + np.linalg.norm(rx - p.bounce_point)
            assert p.delay == pytest.approx(total / SPEED_OF_LIGHT, rel=1e-12)
            assert p.delay > np.linalg.norm(rx - tx) / SPEED_OF_LIGHT

    def test_bounce_weaker_than_los(self):
        cfg = make_scenario(blockers=[])
        scene = generate_scene(cfg, 0)
        rng = substream(2, "ue_link", 1)
        paths = synth_paths(scene, [5.0, 10.0, 1.0], scene.ris.position, rng, n_scatter=4)
        los = [p for p in paths if p.bounce_point is None]
        for p in paths:
            if p.bounce_point is not None:
                assert abs(p.gain) < abs(los[0].gain)

    def test_identical_endpoints_rejected(self):
        scene = generate_scene(make_scenario(), 0)
        with pytest.raises(ValueError):
            synth_paths(scene, [1, 1, 1], [1, 1, 1], substream(0, "ue_link", 0))


class TestDelayChannel:
    def test_integer_delay_sinc_exact(self):
        # With an integer-sample delay and a sinc pulse exactly one tap
        # survives, equal to the array response when pathloss equals the
        # element count; the other taps are exactly zero.
        geom = UpaGeometry(2, 2)
        radio = RadioConfig(n_subcarriers=8, n_taps=4, pathloss=geom.size)
        for d0 in (0, 2):
            path = PathCluster(1.0, d0 * radio.sample_period, 0.3, -0.1)
            dc = delay_channel([path], geom, radio)
            np.testing.assert_allclose(dc.taps[d0], array_response(geom, 0.3, -0.1), rtol=1e-15)
            others = [d for d in range(4) if d != d0]
            assert not dc.taps[others].any()

    def test_fractional_delay_pulse_oracle(self):
        # Hand oracle: |tap d| = |sinc(d - 1/2)| * sqrt(M / pathloss).
        geom = UpaGeometry(2, 2)
        radio = RadioConfig(n_subcarriers=8, n_taps=4, pathloss=2.0)
        dc = delay_channel([PathCluster(1.0, 0.5 * radio.sample_period, 0.0, 0.0)], geom, radio)
        scale = math.sqrt(geom.size / radio.pathloss)
        for d in range(radio.n_taps):
            x = d - 0.5
            expected = abs(math.sin(math.pi * x) / (math.pi * x)) * scale
            assert np.abs(dc.taps[d, 0]) == pytest.approx(expected, rel=1e-12)

    def test_empty_paths_zero_channel(self, small_geom, tiny_radio):
        dc = delay_channel([], small_geom, tiny_radio)
        assert not dc.taps.any()

    def test_truncation_warning(self, small_geom):
        radio = RadioConfig(n_subcarriers=8, n_taps=4)
        late = PathCluster(1.0, 10 * radio.sample_period, 0.0, 0.0)
        with pytest.warns(RuntimeWarning, match="truncated"):
            delay_channel([late], small_geom, radio)

    def test_matrix_channel_outer_product(self):
        rx, tx = UpaGeometry(2, 1), UpaGeometry(3, 1)
        radio = RadioConfig(n_subcarriers=4, n_taps=2, pathloss=1.0)
        path = PathCluster(2.0, 0.0, 0.4, 0.1, tx_azimuth=-0.2, tx_elevation=0.05)
        dc = delay_channel_matrix([path], rx, tx, radio)
        a_rx = array_response(rx, 0.4, 0.1)
        a_tx = array_response(tx, -0.2, 0.05)
        expected = 2.0 * math.sqrt(rx.size * tx.size) * np.outer(a_rx, a_tx)
        np.testing.assert_allclose(dc.taps[0], expected, atol=1e-12)

    def test_raised_cosine_pulse_nyquist_zeros(self):
        # Any valid pulse must vanish at nonzero integer symbol offsets.
        radio = RadioConfig(pulse="raised_cosine", rc_rolloff=0.8)
        vals = pulse_value(radio, np.array([-2.0, -1.0, 0.0, 1.0, 2.0]))
        np.testing.assert_allclose(vals, [0.0, 0.0, 1.0, 0.0, 0.0], atol=1e-12)

    def test_raised_cosine_singularity_finite(self):
        radio = RadioConfig(pulse="raised_cosine", rc_rolloff=0.8)
        x0 = 1.0 / (2.0 * 0.8)
        val = pulse_value(radio, np.array([x0]))[0]
        near = pulse_value(radio, np.array([x0 + 1e-9]))[0]
        assert np.isfinite(val)
        assert val == pytest.approx(near, rel=1e-6)


class TestFreqChannel:
    def test_single_tap_flat_spectrum(self):
        taps = np.zeros((4, 3), dtype=complex)
        taps[0] = [1 + 1j, 2.0, -0.5j]
        fc = freq_channel(DelayChannel(taps), 8)
        for k in range(8):
            np.testing.assert_allclose(fc.values[k], taps[0])

    def test_dc_subcarrier_is_tap_sum(self):
        rng = np.random.default_rng(3)
        taps = rng.normal(size=(5, 4)) + 1j * rng.normal(size=(5, 4))
        fc = freq_channel(DelayChannel(taps), 6)
        np.testing.assert_allclose(fc.values[0], taps.sum(axis=0), rtol=1e-12)

    def test_two_tap_hand_sum(self):
        # Hand oracle: with K = 4, h_k = a + b * (-j)^k.
        a, b = 1.0 + 2.0j, 0.5 - 1.0j
        taps = np.array([[a], [b]])
        fc = freq_channel(DelayChannel(taps), 4)
        expected = [a + b, a - 1j * b, a - b, a + 1j * b]
        np.testing.assert_allclose(fc.values[:, 0], expected, atol=1e-12)

    def test_matches_direct_sum(self):
        rng = np.random.default_rng(11)
        taps = rng.normal(size=(16, 8)) + 1j * rng.normal(size=(16, 8))
        fc = freq_channel(DelayChannel(taps), 32)
        oracle = direct_dft(taps, 32)
        err = np.linalg.norm(fc.values - oracle) / np.linalg.norm(oracle)
        assert err < 1e-10

    def test_more_taps_than_subcarriers(self):
        rng = np.random.default_rng(4)
        taps = rng.normal(size=(10, 2)) + 1j * rng.normal(size=(10, 2))
        fc = freq_channel(DelayChannel(taps), 4)
        np.testing.assert_allclose(fc.values, direct_dft(taps, 4), rtol=1e-10)

    def test_parseval(self):
        rng = np.random.default_rng(5)
        taps = rng.normal(size=(12, 6)) + 1j * rng.normal(size=(12, 6))
        fc = freq_channel(DelayChannel(taps), 16)
        lhs = np.sum(np.abs(fc.values) ** 2)
        rhs = 16 * np.sum(np.abs(taps) ** 2)
        assert abs(lhs - rhs) / rhs < 1e-9

    @given(re=st.floats(-2, 2), im=st.floats(-2, 2))
    @settings(max_examples=30, deadline=None)
    def test_gain_scaling_linearity(self, re, im):
        # Scaling every path gain by c scales every subcarrier value by c.
        c = complex(re, im)
        geom = UpaGeometry(3, 2)
        radio = RadioConfig(n_subcarriers=8, n_taps=6)
        paths = [PathCluster(0.8 - 0.2j, 1.3e-8, 0.5, 0.1), PathCluster(0.1j, 3.1e-8, -0.4, 0.0)]
        scaled = [PathCluster(c * p.gain, p.delay, p.azimuth, p.elevation) for p in paths]
        base = freq_channel(delay_channel(paths, geom, radio), 8).values
        got = freq_channel(delay_channel(scaled, geom, radio), 8).values
        np.testing.assert_allclose(got, c * base, atol=1e-12)


class TestLinkBuilders:
    def test_ue_channel_deterministic(self, tiny_radio, small_geom):
        scene = generate_scene(make_scenario(), 0)
        ue = scene.ues[0]
        h1 = ue_ris_channel(scene, ue, small_geom, tiny_radio)
        h2 = ue_ris_channel(scene, ue, small_geom, tiny_radio)
        np.testing.assert_array_equal(h1, h2)
        assert h1.shape == (tiny_radio.n_subcarriers, small_geom.size)

    def test_bs_channel_shape_and_beam(self, tiny_radio, small_geom):
        scene = generate_scene(make_scenario(), 0)
        values, beam = bs_ris_channel(scene, small_geom, tiny_radio)
        assert values.shape == (tiny_radio.n_subcarriers, small_geom.size, 1)
        np.testing.assert_allclose(np.linalg.norm(beam), 1.0)

    def test_bs_multi_antenna(self, tiny_radio, small_geom):
        scene = generate_scene(make_scenario(), 0)
        bs_geom = UpaGeometry(2, 2)
        values, beam = bs_ris_channel(scene, small_geom, tiny_radio, bs_geom)
        assert values.shape == (tiny_radio.n_subcarriers, small_geom.size, 4)
        np.testing.assert_allclose(np.linalg.norm(beam), 1.0)
        # The BS array faces the RIS, so the matched beam is uniform.
        np.testing.assert_allclose(beam, beam[0], atol=1e-12)


class TestBinaryCache:
    def test_vector_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        values = rng.normal(size=(6, 4)) + 1j * rng.normal(size=(6, 4))
        path = tmp_path / "chan.bin"
        save_channel(path, FreqChannel(values))
        loaded = load_channel(path)
        np.testing.assert_array_equal(loaded.values, values)

    def test_matrix_roundtrip(self, tmp_path):
        rng = np.random.default_rng(1)
        values = rng.normal(size=(5, 3, 2)) + 1j * rng.normal(size=(5, 3, 2))
        path = tmp_path / "chan.bin"
        save_complex_array(path, values)
        np.testing.assert_array_equal(load_complex_array(path), values)

    def test_header_is_self_describing(self, tmp_path):
        values = np.ones((2, 3, 4), dtype=complex)
        path = tmp_path / "chan.bin"
        save_complex_array(path, values)
        raw = path.read_bytes()
        assert raw[:4] == b"CXA1"
        # little-endian u32 fields: version, flags, M, N, K
        header = np.frombuffer(raw[4:24], dtype="<u4")
        assert list(header) == [1, 1, 3, 4, 2]

    def test_truncated_file_rejected(self, tmp_path):
        values = np.ones((2, 3), dtype=complex)
        path = tmp_path / "chan.bin"
        save_complex_array(path, values)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(ValueError, match="payload"):
            load_complex_array(path)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "chan.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 40)
        with pytest.raises(ValueError, match="magic"):
            load_complex_array(path)
