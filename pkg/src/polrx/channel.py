"""Fiber channel: attenuation, polarization rotation, laser phase noise, LO offset.

The transmitted scalar field is launched along x-hat; the channel applies a
2x2 Jones matrix trajectory (zero-order-hold between trajectory steps), a
common Wiener phase-noise process for the combined signal/LO linewidth, and
the heterodyne beat offset ``lo_offset_hz``.  Chromatic dispersion is not
modeled at these symbol rates and lengths.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .signals import ComplexSignal

__all__ = [
    "StaticPol",
    "WienerPol",
    "ScramblerPol",
    "ChannelConfig",
    "JonesTrajectory",
    "transmission",
    "make_jones_trajectory",
    "apply_channel",
    "haar_unitary",
]

# Mean great-circle Stokes displacement of a unit vector under an isotropic
# SU(2) increment with per-axis std s is  E|delta| * E[sin(axis angle)]
#   = s*sqrt(8/pi) * pi/4 = s*sqrt(pi/2).
_STOKES_STEP_FACTOR = float(np.sqrt(np.pi / 2.0))

_PAULI = np.array(
    [
        [[0.0, 1.0], [1.0, 0.0]],
        [[0.0, -1.0j], [1.0j, 0.0]],
        [[1.0, 0.0], [0.0, -1.0]],
    ],
    dtype=np.complex128,
)


@dataclass(frozen=True)
class StaticPol:
    """Constant rotation/retardation Jones matrix."""

    theta: float = 0.0
    phi: float = 0.0


@dataclass(frozen=True)
class WienerPol:
    """Isotropic SU(2) random walk with a mean Stokes drift rate (rad/s)."""

    angular_rate: float = 1.0


@dataclass(frozen=True)
class ScramblerPol:
    """Independent Haar-uniform unitary redrawn at ``step_rate`` (Hz)."""

    step_rate: float = 10.0


@dataclass(frozen=True)
class ChannelConfig:
    length_km: float = 40.0
    alpha_db_per_km: float = 0.2
    excess_penalty_db: float = 0.0
    lo_offset_hz: float = 1e9
    combined_linewidth_hz: float = 1e4
    pol_model: object = field(default_factory=StaticPol)
    seed: int = 0

    def __post_init__(self):
        if self.length_km < 0 or self.alpha_db_per_km < 0 or self.excess_penalty_db < 0:
            raise ParameterError("loss parameters must be non-negative")
        if self.combined_linewidth_hz < 0:
            raise ParameterError("linewidth must be non-negative")
        if not isinstance(self.pol_model, (StaticPol, WienerPol, ScramblerPol)):
            raise ParameterError(f"unknown polarization model {self.pol_model!r}")


@dataclass(frozen=True)
class JonesTrajectory:
    """Sequence of unitaries applied zero-order-hold at ``update_period`` spacing."""

    matrices: np.ndarray  # (K, 2, 2) complex
    update_period: float

    def __post_init__(self):
        m = np.asarray(self.matrices, dtype=np.complex128)
        if m.ndim != 3 or m.shape[1:] != (2, 2) or m.shape[0] == 0:
            raise ParameterError("matrices must have shape (K, 2, 2) with K >= 1")
        if self.update_period <= 0:
            raise ParameterError("update_period must be positive")
        eye = np.eye(2)
        err = np.max(np.abs(np.einsum("kij,klj->kil", m, m.conj()) - eye))
        if err > 1e-8:
            raise ParameterError(f"trajectory contains non-unitary matrices (err {err:.2e})")
        object.__setattr__(self, "matrices", m)

    @property
    def duration(self) -> float:
        return self.matrices.shape[0] * self.update_period


def transmission(cfg: ChannelConfig) -> float:
    """Power transmission from fiber loss plus any excess penalty."""
    loss_db = cfg.alpha_db_per_km * cfg.length_km + cfg.excess_penalty_db
    return float(10.0 ** (-loss_db / 10.0))


def haar_unitary(rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed SU(2) element via a uniform unit quaternion."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    a, b, c, d = q
    return np.array([[a + 1j * b, c + 1j * d], [-c + 1j * d, a - 1j * b]], dtype=np.complex128)


def _static_matrix(model: StaticPol) -> np.ndarray:
    rot = np.array(
        [[np.cos(model.theta), -np.sin(model.theta)], [np.sin(model.theta), np.cos(model.theta)]],
        dtype=np.complex128,
    )
    ret = np.diag([np.exp(1j * model.phi / 2), np.exp(-1j * model.phi / 2)])
    return rot @ ret


def _su2_step(delta: np.ndarray) -> np.ndarray:
    """exp(-i delta . sigma / 2) in closed form."""
    angle = float(np.linalg.norm(delta))
    if angle == 0.0:
        return np.eye(2, dtype=np.complex128)
    axis = delta / angle
    sigma_n = np.tensordot(axis, _PAULI, axes=(0, 0))
    return np.cos(angle / 2) * np.eye(2) - 1j * np.sin(angle / 2) * sigma_n


def make_jones_trajectory(
    cfg: ChannelConfig,
    duration: float,
    update_period: float,
    rng: np.random.Generator | None = None,
    start: np.ndarray | None = None,
) -> JonesTrajectory:
    """Build the Jones trajectory covering ``duration`` for the configured model.

    ``start`` seeds the walk for the Wiener model (defaults to identity);
    the scrambler redraws Haar matrices at its own step rate regardless of
    ``update_period``.
    """
    if duration <= 0 or update_period <= 0:
        raise ParameterError("duration and update_period must be positive")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    steps = int(np.ceil(duration / update_period))
    model = cfg.pol_model
    if isinstance(model, StaticPol):
        mat = _static_matrix(model)
        return JonesTrajectory(np.broadcast_to(mat, (steps, 2, 2)).copy(), update_period)
    if isinstance(model, ScramblerPol):
        period = 1.0 / model.step_rate
        draws = max(1, int(np.ceil(duration / period)))
        mats = np.stack([haar_unitary(rng) for _ in range(draws)])
        idx = np.minimum((np.arange(steps) * update_period / period).astype(int), draws - 1)
        return JonesTrajectory(mats[idx], update_period)
    # Wiener walk.
    s = model.angular_rate * update_period / _STOKES_STEP_FACTOR
    u = np.eye(2, dtype=np.complex128) if start is None else np.asarray(start, np.complex128)
    mats = np.empty((steps, 2, 2), dtype=np.complex128)
    for k in range(steps):
        u = _su2_step(rng.normal(0.0, s, size=3)) @ u
        mats[k] = u
    return JonesTrajectory(mats, update_period)


def apply_channel(
    sig: ComplexSignal,
    cfg: ChannelConfig,
    trajectory: JonesTrajectory,
    rng: np.random.Generator | None = None,
) -> tuple[ComplexSignal, ComplexSignal]:
    """Propagate the x-launched field; returns the (x, y) fields at the receiver.

    Output includes sqrt(T) amplitude loss, the Jones mixing, the LO beat
    e^{i 2 pi f_S t} and the cumulative Wiener phase-noise process.
    """
    if trajectory.duration < sig.duration - 0.5 / sig.sample_rate:
        raise ParameterError("Jones trajectory shorter than the signal")
    if rng is None:
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x9A]))
    n = len(sig)
    dt = 1.0 / sig.sample_rate
    t = np.arange(n) * dt
    phase = 2.0 * np.pi * cfg.lo_offset_hz * t
    if cfg.combined_linewidth_hz > 0:
        dphi = rng.normal(0.0, np.sqrt(2.0 * np.pi * cfg.combined_linewidth_hz * dt), size=n)
        phase += np.cumsum(dphi)
    carrier = np.sqrt(transmission(cfg)) * np.exp(1j * phase)
    idx = np.minimum((t / trajectory.update_period).astype(int), trajectory.matrices.shape[0] - 1)
    u11 = trajectory.matrices[idx, 0, 0]
    u21 = trajectory.matrices[idx, 1, 0]
    base = sig.samples * carrier
    return (
        ComplexSignal(u11 * base, sig.sample_rate),
        ComplexSignal(u21 * base, sig.sample_rate),
    )
