"""Core signal containers and DSP primitives.

Everything downstream (transmitter, receiver DSP, calibration) is built on the
small set of operations in this module: FIR design (windowed-sinc and
root-raised-cosine), zero-padded FIR application with group-delay alignment,
complex mixing, phase unwrapping and least-squares line fitting.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import signal as sps

from .errors import DegenerateInputError, ParameterError

__all__ = [
    "ComplexSignal",
    "RealSignal",
    "FirTaps",
    "design_rrc",
    "design_lowpass",
    "design_bandpass",
    "fir_apply",
    "edge_invalid_len",
    "mix",
    "unwrap_phase",
    "linear_fit",
    "power_spectrum",
]


def _check_rate(sample_rate: float) -> None:
    if not (sample_rate > 0):
        raise ParameterError(f"sample_rate must be positive, got {sample_rate}")


@dataclass(frozen=True)
class ComplexSignal:
    """Uniformly sampled complex baseband signal."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        _check_rate(self.sample_rate)
        arr = np.asarray(self.samples, dtype=np.complex128)
        if arr.ndim != 1 or arr.size == 0:
            raise ParameterError("samples must be a non-empty 1-d array")
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def time(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate


@dataclass(frozen=True)
class RealSignal:
    """Uniformly sampled real-valued signal (e.g. an ADC record)."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        _check_rate(self.sample_rate)
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ParameterError("samples must be a non-empty 1-d array")
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def time(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate


@dataclass(frozen=True)
class FirTaps:
    """Linear-phase FIR filter coefficients.

    Taps are required to be symmetric so the group delay is the flat
    ``(len - 1) / 2`` samples that :func:`fir_apply` compensates.
    """

    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=np.float64)
        if c.ndim != 1 or c.size == 0:
            raise ParameterError("FIR taps must be a non-empty 1-d array")
        scale = np.max(np.abs(c))
        if scale == 0:
            raise ParameterError("FIR taps are all zero")
        if np.max(np.abs(c - c[::-1])) > 1e-9 * scale:
            raise ParameterError("FIR taps must be symmetric (linear phase)")
        object.__setattr__(self, "coefficients", c)

    def __len__(self) -> int:
        return self.coefficients.size

    @property
    def group_delay(self) -> float:
        return (self.coefficients.size - 1) / 2

    def response_at(self, freq: float, sample_rate: float) -> complex:
        """Complex frequency response at one frequency (direct evaluation)."""
        k = np.arange(self.coefficients.size)
        return complex(np.sum(self.coefficients * np.exp(-2j * np.pi * freq * k / sample_rate)))


def _rrc_impulse(t: np.ndarray, rolloff: float) -> np.ndarray:
    """Root-raised-cosine impulse response on a symbol-period time grid."""
    b = rolloff
    out = np.empty_like(t)
    # Regular points.
    denom = np.pi * t * (1.0 - (4.0 * b * t) ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (np.sin(np.pi * t * (1.0 - b)) + 4.0 * b * t * np.cos(np.pi * t * (1.0 + b))) / denom
    # t = 0 singularity.
    out[np.isclose(t, 0.0)] = 1.0 - b + 4.0 * b / np.pi
    # |t| = 1/(4 rolloff) singularity.
    if b > 0:
        sing = np.isclose(np.abs(t), 1.0 / (4.0 * b))
        val = (b / np.sqrt(2.0)) * (
            (1.0 + 2.0 / np.pi) * np.sin(np.pi / (4.0 * b))
            + (1.0 - 2.0 / np.pi) * np.cos(np.pi / (4.0 * b))
        )
        out[sing] = val
    return out


@lru_cache(maxsize=32)
def design_rrc(rolloff: float, samples_per_symbol: int, span_symbols: int) -> FirTaps:
    """Unit-energy root-raised-cosine taps.

    ``span_symbols * samples_per_symbol`` must be even so the filter length is
    odd and the peak lands on a sample.
    """
    if not (0 < rolloff < 1):
        raise ParameterError(f"rolloff must be in (0, 1), got {rolloff}")
    if samples_per_symbol < 2 or span_symbols < 2:
        raise ParameterError("need samples_per_symbol >= 2 and span_symbols >= 2")
    half = span_symbols * samples_per_symbol
    if half % 2:
        raise ParameterError("span_symbols * samples_per_symbol must be even")
    k = np.arange(half + 1) - half // 2
    t = k / float(samples_per_symbol)
    taps = _rrc_impulse(t, rolloff)
    taps = taps / np.sqrt(np.sum(taps**2))
    return FirTaps(taps)


def _odd(n: int) -> int:
    return n if n % 2 else n + 1


@lru_cache(maxsize=64)
def design_lowpass(cutoff: float, sample_rate: float, num_taps: int) -> FirTaps:
    """Blackman windowed-sinc lowpass with unit DC gain.

    An even ``num_taps`` is bumped to the next odd count so the group delay is
    an integer number of samples.
    """
    _check_rate(sample_rate)
    if not (0 < cutoff < sample_rate / 2):
        raise ParameterError(f"cutoff must be in (0, Nyquist), got {cutoff}")
    if num_taps < 9:
        raise ParameterError("num_taps too small for a usable response")
    n = _odd(int(num_taps))
    k = np.arange(n) - (n - 1) / 2
    h = 2.0 * cutoff / sample_rate * np.sinc(2.0 * cutoff / sample_rate * k)
    h *= np.blackman(n)
    h /= np.sum(h)
    return FirTaps(h)


@lru_cache(maxsize=64)
def design_bandpass(center: float, halfwidth: float, sample_rate: float, num_taps: int) -> FirTaps:
    """Real-coefficient bandpass: modulated windowed-sinc, unit gain at ``center``.

    Being real-tapped it passes both +center and -center, which is what the
    clock branch wants (spectrally symmetric treatment of the two images).
    """
    _check_rate(sample_rate)
    if halfwidth <= 0:
        raise ParameterError("halfwidth must be positive")
    if not (0 < center - halfwidth and center + halfwidth < sample_rate / 2):
        raise ParameterError(
            f"band [{center - halfwidth}, {center + halfwidth}] must sit inside (0, Nyquist)"
        )
    proto = design_lowpass(halfwidth, sample_rate, num_taps)
    n = len(proto)
    k = np.arange(n) - (n - 1) / 2
    h = 2.0 * proto.coefficients * np.cos(2.0 * np.pi * center * k / sample_rate)
    taps = FirTaps(h)
    gain = abs(taps.response_at(center, sample_rate))
    return FirTaps(h / gain)


def edge_invalid_len(taps: FirTaps) -> int:
    """Samples at each end of a filtered record contaminated by zero padding."""
    return (len(taps) - 1) // 2


def fir_apply(sig, taps: FirTaps):
    """Apply FIR taps with zero padding and group-delay alignment.

    Output has the same length and type as the input; the first and last
    :func:`edge_invalid_len` samples ramp in from the zero padding and should
    be excluded from downstream statistics.
    """
    if len(sig.samples) < len(taps):
        raise ParameterError("signal shorter than the filter")
    out = sps.oaconvolve(sig.samples, taps.coefficients, mode="same")
    if isinstance(sig, RealSignal):
        return RealSignal(out.real if np.iscomplexobj(out) else out, sig.sample_rate)
    return ComplexSignal(out, sig.sample_rate)


def mix(sig, freq: float, phase0: float = 0.0) -> ComplexSignal:
    """Multiply by exp(-i(2 pi freq t + phase0)); always returns a complex signal."""
    t = np.arange(len(sig.samples)) * (1.0 / sig.sample_rate)
    osc = np.exp(-1j * (2.0 * np.pi * freq * t + phase0))
    return ComplexSignal(sig.samples * osc, sig.sample_rate)


def unwrap_phase(sig: ComplexSignal) -> np.ndarray:
    """Unwrapped instantaneous phase; rejects zero-magnitude samples."""
    mags = np.abs(sig.samples)
    zero = np.flatnonzero(mags == 0.0)
    if zero.size:
        raise DegenerateInputError(f"zero-magnitude sample at index {zero[0]}")
    return np.unwrap(np.angle(sig.samples))


def linear_fit(values: np.ndarray, t: np.ndarray) -> tuple[float, float]:
    """Least-squares line fit; returns (slope, intercept)."""
    values = np.asarray(values, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if values.size != t.size or values.size < 2:
        raise ParameterError("need >= 2 matching samples for a line fit")
    slope, intercept = np.polyfit(t, values, 1)
    return float(slope), float(intercept)


def power_spectrum(sig, nperseg: int = 1 << 14) -> tuple[np.ndarray, np.ndarray]:
    """Welch PSD, frequency-sorted; two-sided for complex input."""
    x = sig.samples
    nperseg = int(min(nperseg, x.size))
    freqs, psd = sps.welch(
        x, fs=sig.sample_rate, nperseg=nperseg, return_onesided=not np.iscomplexobj(x)
    )
    order = np.argsort(freqs)
    return freqs[order], psd[order]
