"""Balanced-detection frontend: noise injection, ADC quantization, capture I/O."""

import numpy as np
import pytest

from polrx.errors import ClippingError, ParameterError
from polrx.frontend import (
    DualPolCapture,
    FrontendConfig,
    capture_noise,
    detect,
    load_capture,
    matched_conversion_gain,
    save_capture,
)
from polrx.signals import ComplexSignal, RealSignal

FS = 2.4576e9


def _fields(n=1 << 15, amp=1e-2):
    t = np.arange(n) / FS
    x = ComplexSignal(amp * np.exp(2j * np.pi * 1e9 * t), FS)
    y = ComplexSignal(amp * np.exp(2j * np.pi * 1e9 * t + 1j), FS)
    return x, y


class TestConfig:
    def test_full_scale_for_12_bits(self):
        assert FrontendConfig().full_scale == 2047

    def test_default_gain_is_matched(self):
        cfg = FrontendConfig()
        assert cfg.gain == matched_conversion_gain(cfg.shot_sigma, cfg.samples_per_symbol)

    def test_invalid_bits_rejected(self):
        with pytest.raises(ParameterError):
            FrontendConfig(adc_bits=1)


class TestDetect:
    def test_outputs_are_bounded_integers(self):
        cfg = FrontendConfig()
        cap = detect(*_fields(), cfg, np.random.default_rng(0), "signal")
        for rec in (cap.x, cap.y):
            assert np.array_equal(rec.samples, np.rint(rec.samples))
            assert np.max(np.abs(rec.samples)) <= cfg.full_scale

    def test_deterministic_under_seed(self):
        cfg = FrontendConfig()
        a = detect(*_fields(), cfg, np.random.default_rng(3), "signal")
        b = detect(*_fields(), cfg, np.random.default_rng(3), "signal")
        assert np.array_equal(a.x.samples, b.x.samples)
        assert np.array_equal(a.y.samples, b.y.samples)

    def test_overdriven_input_clips(self):
        cfg = FrontendConfig()
        with pytest.raises(ClippingError):
            detect(*_fields(amp=1e4), cfg, np.random.default_rng(0), "signal")

    def test_bad_kind_rejected(self):
        with pytest.raises(ParameterError):
            detect(*_fields(), FrontendConfig(), np.random.default_rng(0), "vacuum")


class TestCaptureNoise:
    def test_shot_only_std_matches_config(self):
        cfg = FrontendConfig()
        cap = capture_noise(cfg, "shot_only", 1e-4, np.random.default_rng(1))
        # "shot_only" means transmitter dark with the LO on, so the record
        # carries shot plus electronic noise; quantization (1/12 LSB^2) is
        # negligible against sigma = 40 counts.
        expected = np.hypot(cfg.shot_sigma, cfg.thermal_sigma)
        assert np.std(cap.x.samples) == pytest.approx(expected, rel=0.02)
        assert np.std(cap.y.samples) == pytest.approx(expected, rel=0.02)

    def test_thermal_only_std_matches_config(self):
        cfg = FrontendConfig()
        cap = capture_noise(cfg, "thermal_only", 1e-4, np.random.default_rng(2))
        assert np.std(cap.x.samples) == pytest.approx(cfg.thermal_sigma, rel=0.02)

    def test_branches_are_independent(self):
        cap = capture_noise(FrontendConfig(), "shot_only", 1e-4, np.random.default_rng(3))
        rho = np.corrcoef(cap.x.samples, cap.y.samples)[0, 1]
        assert abs(rho) < 0.01


class TestCaptureIO:
    def test_round_trip_exact(self, tmp_path):
        cap = capture_noise(FrontendConfig(), "shot_only", 1e-5, np.random.default_rng(4))
        save_capture(cap, tmp_path / "cap")
        back = load_capture(tmp_path / "cap")
        assert np.array_equal(cap.x.samples, back.x.samples)
        assert np.array_equal(cap.y.samples, back.y.samples)
        assert back.kind == cap.kind
        assert back.sample_rate == cap.sample_rate

    def test_mismatched_branches_rejected(self):
        x = RealSignal(np.zeros(100), FS)
        y = RealSignal(np.zeros(50), FS)
        with pytest.raises(ParameterError):
            DualPolCapture(x, y, "signal", {})
