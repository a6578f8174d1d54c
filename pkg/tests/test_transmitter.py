"""Symbol generation, pulse shaping, and photon-scale normalization."""

import numpy as np
import pytest

from polrx.errors import ParameterError
from polrx.signals import power_spectrum
from polrx.transmitter import TxConfig, gen_symbols, modulate, psk_points, scale_to_photons

FS = 2.4576e9


class TestPskPoints:
    def test_unit_modulus_and_count(self):
        for order in (2, 4, 8, 16):
            pts = psk_points(order)
            assert pts.shape == (order,)
            assert np.allclose(np.abs(pts), 1.0)

    def test_equally_spaced_phases(self):
        pts = psk_points(8)
        phases = np.sort(np.mod(np.angle(pts), 2 * np.pi))
        assert np.allclose(np.diff(phases), np.pi / 4)


class TestGenSymbols:
    def test_deterministic_per_seed(self):
        cfg = TxConfig(seed=5)
        a = gen_symbols(cfg, 4096)
        b = gen_symbols(cfg, 4096)
        assert np.array_equal(a.symbols, b.symbols)

    def test_header_is_seed_independent(self):
        h1 = gen_symbols(TxConfig(seed=1), 4096).symbols[:1024]
        h2 = gen_symbols(TxConfig(seed=2), 4096).symbols[:1024]
        assert np.array_equal(h1, h2)

    def test_payload_varies_with_seed(self):
        p1 = gen_symbols(TxConfig(seed=1), 4096).symbols[1024:]
        p2 = gen_symbols(TxConfig(seed=2), 4096).symbols[1024:]
        assert not np.array_equal(p1, p2)

    def test_symbols_are_constellation_points(self):
        frame = gen_symbols(TxConfig(), 4096)
        pts = psk_points(8)
        dist = np.min(np.abs(frame.symbols[:, None] - pts[None, :]), axis=1)
        assert np.max(dist) < 1e-12

    def test_count_shorter_than_header_rejected(self):
        with pytest.raises(ParameterError):
            gen_symbols(TxConfig(), 100)


class TestModulate:
    def test_quantum_band_unit_power_and_pilot_ratio(self):
        cfg = TxConfig(pilot_power_ratio=100.0)
        frame = gen_symbols(cfg, 8192)
        sig = modulate(frame, cfg, FS)
        # The pilot is a DC-sideband CW line: estimate it as the coherent mean.
        pilot = np.mean(sig.samples)
        residual = sig.samples - pilot
        pilot_power = np.abs(pilot) ** 2
        band_power = np.mean(np.abs(residual) ** 2)
        assert band_power == pytest.approx(1.0, rel=0.05)
        assert pilot_power / band_power == pytest.approx(100.0, rel=0.05)

    def test_band_centered_on_quantum_if(self):
        cfg = TxConfig()
        frame = gen_symbols(cfg, 8192)
        sig = modulate(frame, cfg, FS)
        freqs, psd = power_spectrum(sig, nperseg=1 << 13)
        band = (np.abs(freqs) > 1e6) & (np.abs(freqs) < 200e6)
        centroid = np.sum(freqs[band] * psd[band]) / np.sum(psd[band])
        assert centroid == pytest.approx(cfg.quantum_if_hz, rel=0.05)

    def test_non_integer_oversampling_rejected(self):
        frame = gen_symbols(TxConfig(), 4096)
        with pytest.raises(ParameterError):
            modulate(frame, TxConfig(), 1e8)


class TestScaleToPhotons:
    def test_sets_band_power_to_mean_photons(self):
        cfg = TxConfig(mean_photons=0.33)
        frame = gen_symbols(cfg, 8192)
        sig = scale_to_photons(modulate(frame, cfg, FS), cfg)
        pilot = np.mean(sig.samples)
        band_power = np.mean(np.abs(sig.samples - pilot) ** 2)
        assert band_power == pytest.approx(0.33, rel=0.05)

    def test_idempotent(self):
        cfg = TxConfig()
        frame = gen_symbols(cfg, 4096)
        once = scale_to_photons(modulate(frame, cfg, FS), cfg)
        twice = scale_to_photons(once, cfg)
        assert np.allclose(once.samples, twice.samples, rtol=1e-9)
