"""Filter design, mixing, and fitting primitives."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polrx.errors import DegenerateInputError, ParameterError
from polrx.signals import (
    ComplexSignal,
    RealSignal,
    design_bandpass,
    design_lowpass,
    design_rrc,
    edge_invalid_len,
    fir_apply,
    linear_fit,
    mix,
    power_spectrum,
    unwrap_phase,
)

FS = 2.4576e9


def _freq_response(taps, freq, fs):
    n = np.arange(len(taps))
    center = (len(taps) - 1) / 2
    return np.sum(taps.coefficients * np.exp(-2j * np.pi * freq * (n - center) / fs))


class TestRrc:
    def test_matched_pair_isi_below_1e3_of_peak(self):
        # Oracle: an RRC pair convolves to a Nyquist pulse, so all
        # symbol-spaced taps except the peak must vanish.
        sps = 64
        taps = design_rrc(0.2, sps, 32)
        pulse = np.convolve(taps.coefficients, taps.coefficients)
        center = len(pulse) // 2
        peak = pulse[center]
        isi = pulse[center % sps :: sps]
        isi = isi[np.abs(np.arange(center % sps, len(pulse), sps) - center) > 0]
        assert np.max(np.abs(isi)) < 1e-3 * peak

    def test_unit_energy(self):
        taps = design_rrc(0.2, 64, 16)
        assert np.sum(taps.coefficients**2) == pytest.approx(1.0, rel=1e-3)

    def test_symmetric(self):
        c = design_rrc(0.35, 8, 12).coefficients
        assert np.allclose(c, c[::-1])


class TestFilterDesign:
    def test_lowpass_passband_and_stopband(self):
        taps = design_lowpass(3e6, FS, 4097)
        assert abs(_freq_response(taps, 0.0, FS)) == pytest.approx(1.0, abs=1e-3)
        assert abs(_freq_response(taps, 30e6, FS)) < 1e-3

    def test_bandpass_center_and_rejection(self):
        taps = design_bandpass(19.2e6, 1e6, FS, 4096)
        assert abs(_freq_response(taps, 19.2e6, FS)) == pytest.approx(1.0, abs=1e-2)
        assert abs(_freq_response(taps, 0.0, FS)) < 1e-3
        assert abs(_freq_response(taps, 38.4e6, FS)) < 1e-3


class TestFirApply:
    def test_matches_direct_convolution_away_from_edges(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=5000)
        taps = design_lowpass(5e6, FS, 513)
        out = fir_apply(RealSignal(x, FS), taps)
        ref = np.convolve(x, taps.coefficients, mode="same")
        guard = edge_invalid_len(taps)
        assert np.allclose(out.samples[guard:-guard], ref[guard:-guard], atol=1e-12)

    def test_preserves_type_and_length(self):
        taps = design_lowpass(5e6, FS, 513)
        out = fir_apply(RealSignal(np.ones(1000), FS), taps)
        assert isinstance(out, RealSignal) and len(out) == 1000
        out = fir_apply(ComplexSignal(np.ones(1000) + 0j, FS), taps)
        assert isinstance(out, ComplexSignal) and len(out) == 1000

    def test_short_signal_rejected(self):
        taps = design_lowpass(5e6, FS, 513)
        with pytest.raises(ParameterError):
            fir_apply(RealSignal(np.ones(10), FS), taps)


class TestMix:
    def test_shifts_tone_to_dc(self):
        f = 100e6
        t = np.arange(4096) / FS
        sig = ComplexSignal(np.exp(2j * np.pi * f * t), FS)
        out = mix(sig, f)
        assert np.allclose(out.samples, 1.0, atol=1e-9)

    def test_initial_phase(self):
        sig = ComplexSignal(np.ones(16, dtype=complex), FS)
        out = mix(sig, 0.0, phase0=np.pi / 2)
        assert np.allclose(out.samples, np.exp(-1j * np.pi / 2))


class TestUnwrapPhase:
    def test_matches_numpy_unwrap(self):
        rng = np.random.default_rng(1)
        phase = np.cumsum(rng.normal(0, 0.5, 1000))
        sig = ComplexSignal(np.exp(1j * phase), FS)
        assert np.allclose(unwrap_phase(sig), phase - phase[0] + np.angle(np.exp(1j * phase[0])))

    def test_rejects_zero_samples(self):
        samples = np.ones(10, dtype=complex)
        samples[3] = 0.0
        with pytest.raises(DegenerateInputError):
            unwrap_phase(ComplexSignal(samples, FS))


class TestLinearFit:
    @given(
        slope=st.floats(-1e6, 1e6),
        intercept=st.floats(-100, 100),
    )
    @settings(max_examples=50, deadline=None)
    def test_recovers_line(self, slope, intercept):
        t = np.linspace(0.0, 1e-3, 256)
        s, i = linear_fit(slope * t + intercept, t)
        assert s == pytest.approx(slope, abs=max(1e-6, 1e-9 * abs(slope)))
        assert i == pytest.approx(intercept, abs=1e-6)


class TestPowerSpectrum:
    def test_white_noise_total_power(self):
        # Oracle: integrated PSD equals the signal variance (Parseval).
        rng = np.random.default_rng(2)
        x = rng.normal(0, 3.0, 1 << 17)
        freqs, psd = power_spectrum(RealSignal(x, FS), nperseg=1 << 12)
        total = np.trapezoid(psd, freqs)
        assert total == pytest.approx(np.var(x), rel=0.05)

    def test_complex_input_two_sided_and_sorted(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=1 << 14) + 1j * rng.normal(size=1 << 14)
        freqs, _ = power_spectrum(ComplexSignal(x, FS), nperseg=1 << 10)
        assert freqs[0] < 0 < freqs[-1]
        assert np.all(np.diff(freqs) > 0)

    def test_tone_peak_location(self):
        f = 307.2e6
        t = np.arange(1 << 15) / FS
        sig = ComplexSignal(np.exp(2j * np.pi * f * t), FS)
        freqs, psd = power_spectrum(sig, nperseg=1 << 12)
        assert abs(freqs[np.argmax(psd)] - f) < FS / (1 << 12)
