"""Shot-noise calibration, channel estimation and key-rate bounds.

Units convention: ``sigma2_shot`` and ``sigma2_thermal`` are **per-quadrature**
variances of the post-DSP output points, so after :func:`snu_normalize` the
vacuum contributes a complex variance of 2 shot-noise units.  The linear model
for the normalized points is

    b = t * a + z,   t = sqrt(2 eta T <n>),   Var(z) = 2 + 2 eps_thermal + eta T eps

with unit-power symbols a.  The Holevo bound is a Gaussian-equivalent
construction for the discrete PSK ensemble: an entangling-cloner covariance
matrix built from the measured (T, eps) with the ensemble correlation Z taken
from the exact PSK purification, conditioned on an ideal heterodyne
measurement of Bob's mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import exp, lgamma, log

import numpy as np
from scipy import signal

from .errors import (
    CalibrationError,
    EstimateDegenerateError,
    FockCutoffError,
    NumericalDomainError,
    ParameterError,
    SyncFailureError,
)
from .transmitter import SymbolFrame

__all__ = [
    "SecurityParams",
    "NoiseCalibration",
    "ChannelEstimate",
    "SecuritySnapshot",
    "quadrature_variance",
    "calibrate_variances",
    "snu_normalize",
    "frame_sync",
    "estimate_channel",
    "mutual_info",
    "ensemble_spectrum",
    "ensemble_correlation",
    "holevo_bound",
    "key_rate",
    "von_neumann_g",
]

_SYNC_PEAK_RATIO = 5.0


@dataclass(frozen=True)
class SecurityParams:
    eta: float = 0.72
    mean_photons: float = 0.33
    beta: float = 0.95
    constellation_order: int = 8
    fock_cutoff: int = 40

    def __post_init__(self):
        if not (0 < self.eta <= 1):
            raise ParameterError("eta must be in (0, 1]")
        if self.mean_photons <= 0:
            raise ParameterError("mean_photons must be positive")
        if not (0 < self.beta <= 1):
            raise ParameterError("beta must be in (0, 1]")
        if self.constellation_order < 2:
            raise ParameterError("constellation_order must be >= 2")
        if self.fock_cutoff < 4:
            raise ParameterError("fock_cutoff must be >= 4")


@dataclass(frozen=True)
class NoiseCalibration:
    """Per-quadrature shot and thermal variances of the DSP output points."""

    sigma2_shot: float
    sigma2_thermal: float

    def __post_init__(self):
        if self.sigma2_shot <= 0:
            raise CalibrationError("shot variance must be positive after thermal subtraction")
        if self.sigma2_thermal < 0:
            raise CalibrationError("thermal variance cannot be negative")

    @property
    def eps_thermal(self) -> float:
        return self.sigma2_thermal / self.sigma2_shot


@dataclass(frozen=True)
class ChannelEstimate:
    t_hat: float
    sigma2: float
    T_hat: float
    eps_hat: float
    num_points: int


@dataclass(frozen=True)
class SecuritySnapshot:
    estimate: ChannelEstimate
    eps_thermal: float
    mutual_info: float
    holevo: float
    key_rate: float

    @property
    def secure(self) -> bool:
        return self.key_rate > 0


def quadrature_variance(points: np.ndarray) -> float:
    """Pooled variance of the real and imaginary parts about the complex mean."""
    points = np.asarray(points)
    if points.size < 2:
        raise ParameterError("need at least two points")
    centred = points - points.mean()
    return float(np.mean(np.abs(centred) ** 2) / 2.0)


def calibrate_variances(shot_points: np.ndarray, thermal_points: np.ndarray) -> NoiseCalibration:
    """Build a calibration from DSP outputs of the two noise-only captures.

    The shot-only capture physically contains thermal noise as well, so the
    thermal variance is subtracted to isolate the shot contribution.
    """
    v_thermal = quadrature_variance(thermal_points)
    v_total = quadrature_variance(shot_points)
    v_shot = v_total - v_thermal
    if v_shot <= 0:
        raise CalibrationError(
            f"shot capture variance {v_total:.3g} not above thermal {v_thermal:.3g}"
        )
    return NoiseCalibration(v_shot, v_thermal)


def snu_normalize(points: np.ndarray, cal: NoiseCalibration) -> np.ndarray:
    """Scale output points into shot-noise units (vacuum -> complex variance 2)."""
    return np.asarray(points, dtype=np.complex128) / np.sqrt(cal.sigma2_shot)


def frame_sync(
    points: np.ndarray, frame: SymbolFrame
) -> tuple[np.ndarray, np.ndarray, int, float]:
    """Align received points to the transmitted frame via header correlation.

    Returns ``(a, b, first_symbol, phase)``: paired arrays over the full
    overlap (``a`` starts at frame symbol ``first_symbol``) with ``b`` rotated
    so the header correlation is real and positive.  Partial header overlaps
    are searched too, since the receiver chain may drop a few leading symbols.
    Raises :class:`SyncFailureError` when the peak is below 5x the off-peak
    RMS.
    """
    b = np.asarray(points, dtype=np.complex128)
    header = frame.header
    if b.size < header.size:
        raise SyncFailureError("fewer points than header symbols")
    # corr[k] pairs b[k - len(header) + 1 + j] with header[j]; the peak index
    # gives the position of the header start within b (possibly negative).
    corr = signal.fftconvolve(b, np.conj(header[::-1]), mode="full")
    peak = int(np.argmax(np.abs(corr)))
    mask = np.ones(corr.size, dtype=bool)
    mask[max(0, peak - 2) : peak + 3] = False
    if np.any(mask):
        off_rms = float(np.sqrt(np.mean(np.abs(corr[mask]) ** 2)))
    else:
        off_rms = 0.0
    if off_rms > 0 and np.abs(corr[peak]) < _SYNC_PEAK_RATIO * off_rms:
        raise SyncFailureError(
            f"correlation peak {np.abs(corr[peak]):.3g} below {_SYNC_PEAK_RATIO}x off-peak RMS"
        )
    phase = float(np.angle(corr[peak]))
    lag = peak - header.size + 1  # index of frame symbol 0 within b
    first_symbol = max(0, -lag)
    b0 = lag + first_symbol
    n = min(frame.symbols.size - first_symbol, b.size - b0)
    if n < 1:
        raise SyncFailureError("no overlap between points and frame after alignment")
    a = frame.symbols[first_symbol : first_symbol + n]
    b_aligned = b[b0 : b0 + n] * np.exp(-1j * phase)
    return a, b_aligned, first_symbol, phase


def estimate_channel(
    a: np.ndarray, b: np.ndarray, params: SecurityParams, cal: NoiseCalibration
) -> ChannelEstimate:
    """Least-squares channel estimate from paired symbols and normalized points."""
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    if a.size != b.size:
        raise ParameterError("a and b must be paired")
    if a.size < 1024:
        raise EstimateDegenerateError(f"too few points ({a.size}) for estimation")
    mean_power = float(np.mean(np.abs(a) ** 2))
    if abs(mean_power - 1.0) > 0.01:
        raise ParameterError(f"symbols must have unit mean power, got {mean_power:.4f}")
    t_hat = float(np.real(np.sum(a * np.conj(b))) / a.size)
    if t_hat <= 0:
        raise EstimateDegenerateError(f"non-positive correlation t={t_hat:.3g}")
    sigma2 = float(np.mean(np.abs(b - t_hat * a) ** 2))
    T_hat = t_hat**2 / (2.0 * params.eta * params.mean_photons)
    eps_hat = (sigma2 - 2.0 - 2.0 * cal.eps_thermal) / (params.eta * T_hat)
    return ChannelEstimate(t_hat, sigma2, T_hat, eps_hat, int(a.size))


def mutual_info(est: ChannelEstimate, params: SecurityParams, eps_thermal: float) -> float:
    """Heterodyne Shannon information of the estimated channel (bits/symbol)."""
    num = 2.0 * est.T_hat * params.eta * params.mean_photons
    den = 2.0 + est.T_hat * params.eta * est.eps_hat + 2.0 * eps_thermal
    if den <= 0:
        raise NumericalDomainError("non-positive noise denominator")
    return float(np.log2(1.0 + num / den))


@lru_cache(maxsize=128)
def ensemble_spectrum(mean_photons: float, order: int, cutoff: int = 40) -> np.ndarray:
    """Eigenvalues of the average M-PSK coherent-state density operator.

    Closed form: grouping Fock states by photon number mod M,

        lambda_k = e^{-alpha^2} sum_m alpha^{2(mM+k)} / (mM+k)!

    Raises :class:`FockCutoffError` when the truncated Fock space misses more
    than 1e-10 of the trace.
    """
    if mean_photons <= 0 or order < 2 or cutoff < 4:
        raise ParameterError("invalid ensemble parameters")
    alpha2 = mean_photons
    # Trace captured inside the cutoff.
    logp = -alpha2 + np.arange(cutoff + 1) * log(alpha2) - np.array(
        [lgamma(n + 1) for n in range(cutoff + 1)]
    )
    weights = np.exp(logp)
    deficit = 1.0 - float(np.sum(weights))
    if deficit > 1e-10:
        raise FockCutoffError(f"trace deficit {deficit:.3g} at cutoff {cutoff}")
    lams = np.zeros(order)
    for n in range(cutoff + 1):
        lams[n % order] += weights[n]
    return lams


@lru_cache(maxsize=128)
def _fock_ensemble(mean_photons: float, order: int, cutoff: int):
    """Density matrix, eigendecomposition and annihilation operator (truncated)."""
    alpha = np.sqrt(mean_photons)
    dim = cutoff + 1
    n = np.arange(dim)
    log_fact = np.array([lgamma(k + 1) for k in range(dim)])
    rho = np.zeros((dim, dim), dtype=np.complex128)
    for k in range(order):
        amp = alpha * np.exp(1j * (2 * k + 1) * np.pi / order)
        coeff = np.exp(-mean_photons / 2.0 + n * np.log(np.abs(amp)) - 0.5 * log_fact)
        coeff = coeff.astype(np.complex128) * np.exp(1j * n * np.angle(amp))
        rho += np.outer(coeff, coeff.conj())
    rho /= order
    evals, evecs = np.linalg.eigh(rho)
    lower = np.diag(np.sqrt(np.arange(1, dim)), k=1)  # annihilation operator
    return rho, evals, evecs, lower


def ensemble_correlation(params: SecurityParams) -> float:
    """Quadrature correlation Z of the PSK purification.

    Z = <Phi| a_A a_B + a_A^dag a_B^dag |Phi> for the canonical purification
    |Phi> = sum_k sqrt(lambda_k) |e_k>|e_k^*>, evaluated in the truncated Fock
    basis.  Bounded above by the EPR value sqrt(V^2 - 1).
    """
    _, evals, evecs, lower = _fock_ensemble(
        params.mean_photons, params.constellation_order, params.fock_cutoff
    )
    keep = evals > 1e-14
    lam = evals[keep]
    vec = evecs[:, keep]
    amat = vec.conj().T @ lower @ vec  # <e_k| a |e_l>
    root = np.sqrt(lam)
    z = 2.0 * float(np.real(np.sum(np.outer(root, root) * np.abs(amat) ** 2)))
    return z


def von_neumann_g(nu: float) -> float:
    """Entropy of a thermal state with symplectic eigenvalue nu (bits)."""
    if nu < 1.0 - 1e-9:
        raise NumericalDomainError(f"symplectic eigenvalue {nu} below 1")
    nu = max(nu, 1.0)
    if nu == 1.0:
        return 0.0
    p, m = (nu + 1.0) / 2.0, (nu - 1.0) / 2.0
    return float(p * np.log2(p) - m * np.log2(m))


def holevo_bound(est: ChannelEstimate, params: SecurityParams) -> float:
    """Gaussian-equivalent Holevo bound chi(B;E) in bits/symbol.

    Uses the measured (T, eps) with eps clipped at zero (only here: the raw
    estimate still feeds the mutual information), and conditions Eve's state
    on an ideal heterodyne measurement of Bob's mode.
    """
    t_chan = min(max(est.T_hat, 0.0), 1.0)
    if t_chan == 0.0:
        return 0.0
    eps = max(est.eps_hat, 0.0)
    v = 2.0 * params.mean_photons + 1.0
    a = v
    b = t_chan * (v - 1.0) + 1.0 + t_chan * eps / 2.0
    z = ensemble_correlation(params)
    c = np.sqrt(t_chan) * z
    delta = a**2 + b**2 - 2.0 * c**2
    det = (a * b - c**2) ** 2
    disc = delta**2 - 4.0 * det
    if disc < -1e-9 * max(delta**2, 1.0):
        raise NumericalDomainError("negative discriminant in symplectic spectrum")
    disc = max(disc, 0.0)
    nu1 = np.sqrt((delta + np.sqrt(disc)) / 2.0)
    nu2 = np.sqrt(max((delta - np.sqrt(disc)) / 2.0, 0.0))
    nu3 = a - c**2 / (b + 1.0)
    return von_neumann_g(nu1) + von_neumann_g(nu2) - von_neumann_g(nu3)


def key_rate(
    est: ChannelEstimate, params: SecurityParams, eps_thermal: float
) -> SecuritySnapshot:
    """Asymptotic reverse-reconciliation key rate K = beta * I_BA - chi_BE."""
    info = mutual_info(est, params, eps_thermal)
    chi = holevo_bound(est, params)
    k = params.beta * info - chi
    return SecuritySnapshot(est, eps_thermal, info, chi, k)
