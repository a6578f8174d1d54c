"""Polarization-diverse balanced heterodyne frontend and ADC model.

Each polarization branch produces one real ADC record:

    counts = round(clip(G * sqrt(eta) * Re{field} + n_shot + n_thermal))

Shot and thermal noise are white Gaussian in ADC counts.  ``conversion_gain``
defaults to the value that makes the post-DSP signal variance of a lossless
run equal to ``2 * eta * mean_photons`` shot-noise units, which is what the
security estimators assume (see :func:`matched_conversion_gain`).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ClippingError, ParameterError
from .signals import ComplexSignal, FirTaps, RealSignal, fir_apply

__all__ = [
    "FrontendConfig",
    "DualPolCapture",
    "matched_conversion_gain",
    "detect",
    "capture_noise",
    "save_capture",
    "load_capture",
]

_NOISE_KINDS = ("signal", "shot_only", "thermal_only")


def matched_conversion_gain(shot_sigma: float, samples_per_symbol: int) -> float:
    """Conversion gain G (counts per unit field) matched to the SNU convention.

    With unit-energy matched filtering the post-DSP shot variance per
    quadrature is ``shot_sigma**2 / 2`` and a symbol of ``n`` photons maps to
    a complex point of power ``(G/2)**2 * n * sps``.  Requiring that power to
    equal ``2 * n * (shot variance per quadrature)`` for a lossless channel
    gives ``G = 2 * shot_sigma / sqrt(sps)``.
    """
    if shot_sigma <= 0 or samples_per_symbol < 2:
        raise ParameterError("need positive shot_sigma and samples_per_symbol >= 2")
    return 2.0 * shot_sigma / np.sqrt(samples_per_symbol)


@dataclass(frozen=True)
class FrontendConfig:
    sample_rate: float = 2.4576e9
    adc_bits: int = 12
    shot_sigma: float = 40.0
    thermal_sigma: float = 12.65
    eta: float = 0.72
    conversion_gain: float | None = None  # None -> matched_conversion_gain at 64 S/sym
    samples_per_symbol: int = 64
    noise_shaping: FirTaps | None = None
    clip_limit_fraction: float = 1e-3

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ParameterError("sample_rate must be positive")
        if not (2 <= self.adc_bits <= 16):
            raise ParameterError("adc_bits must be in [2, 16]")
        if self.shot_sigma <= 0 or self.thermal_sigma < 0:
            raise ParameterError("noise sigmas must be positive (thermal may be zero)")
        if not (0 < self.eta <= 1):
            raise ParameterError("eta must be in (0, 1]")
        if self.conversion_gain is not None and self.conversion_gain <= 0:
            raise ParameterError("conversion_gain must be positive")

    @property
    def gain(self) -> float:
        if self.conversion_gain is not None:
            return self.conversion_gain
        return matched_conversion_gain(self.shot_sigma, self.samples_per_symbol)

    @property
    def full_scale(self) -> int:
        return 2 ** (self.adc_bits - 1) - 1


@dataclass(frozen=True)
class DualPolCapture:
    """One ADC record per polarization branch plus provenance metadata."""

    x: RealSignal
    y: RealSignal
    kind: str
    meta: dict

    def __post_init__(self):
        if self.kind not in _NOISE_KINDS:
            raise ParameterError(f"kind must be one of {_NOISE_KINDS}")
        if len(self.x) != len(self.y) or self.x.sample_rate != self.y.sample_rate:
            raise ParameterError("branch records must share length and sample rate")

    @property
    def sample_rate(self) -> float:
        return self.x.sample_rate


def _noise(cfg: FrontendConfig, sigma: float, n: int, rng: np.random.Generator) -> np.ndarray:
    noise = rng.normal(0.0, sigma, size=n)
    if cfg.noise_shaping is not None:
        noise = fir_apply(RealSignal(noise, cfg.sample_rate), cfg.noise_shaping).samples
    return noise


def _digitize(cfg: FrontendConfig, analog: np.ndarray) -> np.ndarray:
    fs = cfg.full_scale
    counts = np.rint(np.clip(analog, -fs, fs))
    clipped = np.count_nonzero(np.abs(analog) > fs) / analog.size
    if clipped > cfg.clip_limit_fraction:
        raise ClippingError(
            f"{clipped:.2%} of samples clipped (limit {cfg.clip_limit_fraction:.2%})"
        )
    return counts


def detect(
    field_x: ComplexSignal,
    field_y: ComplexSignal,
    cfg: FrontendConfig,
    rng: np.random.Generator,
    kind: str = "signal",
) -> DualPolCapture:
    """Balanced-heterodyne detect both branches into quantized ADC counts."""
    if len(field_x) != len(field_y) or field_x.sample_rate != field_y.sample_rate:
        raise ParameterError("branch fields must share length and sample rate")
    if abs(field_x.sample_rate - cfg.sample_rate) > 1e-3:
        raise ParameterError("field sample rate disagrees with frontend configuration")
    scale = cfg.gain * np.sqrt(cfg.eta)
    records = []
    for field in (field_x, field_y):
        analog = scale * field.samples.real
        analog = analog + _noise(cfg, cfg.shot_sigma, len(field), rng)
        if cfg.thermal_sigma > 0:
            analog += _noise(cfg, cfg.thermal_sigma, len(field), rng)
        records.append(RealSignal(_digitize(cfg, analog), cfg.sample_rate))
    meta = {"sample_rate": cfg.sample_rate, "adc_bits": cfg.adc_bits, "kind": kind}
    return DualPolCapture(records[0], records[1], kind, meta)


def capture_noise(
    cfg: FrontendConfig,
    kind: str,
    duration: float,
    rng: np.random.Generator,
) -> DualPolCapture:
    """Record a noise-only capture (transmitter dark) of the requested kind."""
    if kind not in ("shot_only", "thermal_only"):
        raise ParameterError("kind must be 'shot_only' or 'thermal_only'")
    n = int(round(duration * cfg.sample_rate))
    if n < 2:
        raise ParameterError("duration too short")
    records = []
    for _ in range(2):
        if kind == "shot_only":
            analog = _noise(cfg, cfg.shot_sigma, n, rng)
            if cfg.thermal_sigma > 0:
                analog += _noise(cfg, cfg.thermal_sigma, n, rng)
        else:
            analog = _noise(cfg, cfg.thermal_sigma, n, rng) if cfg.thermal_sigma > 0 else np.zeros(n)
        records.append(RealSignal(_digitize(cfg, analog), cfg.sample_rate))
    meta = {"sample_rate": cfg.sample_rate, "adc_bits": cfg.adc_bits, "kind": kind}
    return DualPolCapture(records[0], records[1], kind, meta)


def save_capture(capture: DualPolCapture, prefix: str | Path) -> None:
    """Write little-endian int16 branch records plus a JSON sidecar."""
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    for name, rec in (("x", capture.x), ("y", capture.y)):
        rec.samples.astype("<i2").tofile(f"{prefix}.{name}.raw")
    sidecar = dict(capture.meta)
    sidecar.setdefault("kind", capture.kind)
    sidecar["num_samples"] = len(capture.x)
    Path(f"{prefix}.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))


def load_capture(prefix: str | Path) -> DualPolCapture:
    """Read a capture written by :func:`save_capture`."""
    meta = json.loads(Path(f"{prefix}.json").read_text())
    rate = float(meta["sample_rate"])
    records = {}
    for name in ("x", "y"):
        raw = np.fromfile(f"{prefix}.{name}.raw", dtype="<i2")
        records[name] = RealSignal(raw.astype(np.float64), rate)
    return DualPolCapture(records["x"], records["y"], meta["kind"], meta)
