"""Session harness: calibrate once, then run repeated receiver snapshots.

A *snapshot* is one short transmit/receive capture (default 2 ms) pushed
through the full chain: symbol generation, waveform synthesis, fiber channel,
balanced-heterodyne frontend, per-branch recovery, the two-branch combiner,
shot-noise-unit normalization, frame synchronization and channel estimation.
A *session* is a sequence of snapshots separated by a configured interval
during which the fiber state of polarization evolves; the harness collects
per-snapshot channel estimates and security figures and summarizes them.

Security is reported two ways.  Each snapshot carries a key rate computed
from its own excess-noise estimate; because a single snapshot only yields
~65k estimation symbols, that estimate has a standard error of several
hundredths of a shot-noise unit and the per-snapshot secure flag is noisy.
The session summary therefore also evaluates every snapshot at the mean
excess noise of its class (combined output, single branch x, single branch
y), which is the statistically meaningful security determination for the
session; see :func:`summarize_session`.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .channel import (
    ChannelConfig,
    ScramblerPol,
    StaticPol,
    WienerPol,
    _STOKES_STEP_FACTOR,
    _su2_step,
    apply_channel,
    haar_unitary,
    make_jones_trajectory,
    transmission,
)
from .cma import CmaConfig, ConstellationFrame, cma_error_trace_stats, cma_run
from .dsp import BranchRecovery, DspConfig, recover_branch
from .errors import (
    ClippingError,
    DegenerateInputError,
    DivergenceError,
    EstimateDegenerateError,
    ParameterError,
    PilotNotFoundError,
    SyncFailureError,
)
from .frontend import FrontendConfig, capture_noise, detect
from .security import (
    ChannelEstimate,
    NoiseCalibration,
    SecurityParams,
    SecuritySnapshot,
    calibrate_variances,
    estimate_channel,
    frame_sync,
    key_rate,
    snu_normalize,
)
from .transmitter import SymbolFrame, TxConfig, gen_symbols, modulate, scale_to_photons

__all__ = [
    "SCHEMA_VERSION",
    "CSV_COLUMNS",
    "SessionConfig",
    "SnapshotResult",
    "SessionResult",
    "session_config_to_dict",
    "session_config_from_dict",
    "load_session_config",
    "run_calibration",
    "run_snapshot",
    "run_session",
    "summarize_session",
    "write_snapshot_csv",
]

SCHEMA_VERSION = 1

# Column order of the per-snapshot CSV export.  This order is part of the
# output contract (downstream analysis scripts index by position) -- do not
# reorder or insert.
CSV_COLUMNS = (
    "index",
    "T_hat_x",
    "T_hat_y",
    "T_hat_rec",
    "eps_hat",
    "I_BA",
    "chi_BE",
    "K",
    "secure",
    "cma_settled_index",
    "failure_reason",
)

# Relative width of the transmittance histogram bins used for the session
# mode estimate, as a fraction of the configured line transmittance.
_HIST_REL_WIDTH = 0.04
_HIST_REL_SPAN = 2.0

# Stream labels for per-purpose random generators, mixed into SeedSequence
# spawn keys so each consumer draws from an independent stream.
_SEED_CALIBRATION = 2
_SEED_SNAPSHOT = 1
_SEED_SOP = 7


def _default_tx() -> TxConfig:
    # The pilot rides only 38.4 MHz from the quantum band, so laser phase
    # noise scatters pilot sidebands into the matched-filter passband; at the
    # transmitter default pilot-to-signal ratio of 1000 that leakage costs a
    # few hundredths of a shot-noise unit of excess noise.  A ratio of 100
    # keeps pilot phase tracking comfortable while cutting the leakage 10x.
    return TxConfig(header_len=4096, pilot_power_ratio=100.0)


def _default_channel() -> ChannelConfig:
    # 15.0515 km at 0.2 dB/km gives T = 0.500: high enough that the
    # recovered channel clears the key-rate threshold with margin, while
    # even the best-case single-polarization projection (bounded by T) sits
    # below the threshold for every rotation the scrambler can produce.
    return ChannelConfig(length_km=15.0515)


def _default_cma() -> CmaConfig:
    # A single-tap combiner: the clock tone alternates sign symbol to symbol,
    # which makes longer delay lines degenerate (every delayed copy produces
    # the same gradient direction), so added taps only smear the quantum
    # symbols.  The larger step lets the combiner track intra-snapshot
    # polarization drift, and the leak decays tap components the rank-one
    # clock gradient cannot correct (stale directions left behind by drift,
    # and the unit tap of a faded branch).
    return CmaConfig(num_taps=1, step=1e-2, leak=3e-3)


@dataclass(frozen=True)
class SessionConfig:
    """Everything needed to reproduce a measurement session."""

    tx: TxConfig = field(default_factory=_default_tx)
    channel: ChannelConfig = field(default_factory=_default_channel)
    frontend: FrontendConfig = field(default_factory=FrontendConfig)
    dsp: DspConfig = field(default_factory=DspConfig)
    cma: CmaConfig = field(default_factory=_default_cma)
    security: SecurityParams = field(default_factory=SecurityParams)
    snapshot_duration: float = 2e-3
    snapshot_interval: float = 10.0
    snapshot_count: int = 200
    scrambled: bool = False
    scramble_rate: float = 1.75e4  # Stokes diffusion rate while scrambled (rad/s)
    pol_update_period: float = 2e-6
    estimation_symbols: int = 65536
    calibration_captures: int = 12
    branch_gate: float = 0.02  # min clock-power share for a branch to combine
    output_dir: str | None = None
    seed: int = 0

    def __post_init__(self):
        if self.snapshot_duration <= 0 or self.snapshot_interval <= 0:
            raise ParameterError("snapshot duration and interval must be positive")
        if self.snapshot_count < 1:
            raise ParameterError("snapshot_count must be >= 1")
        if self.scramble_rate <= 0 or self.pol_update_period <= 0:
            raise ParameterError("scramble_rate and pol_update_period must be positive")
        if self.estimation_symbols < 1024:
            raise ParameterError("estimation_symbols must be >= 1024")
        if self.calibration_captures < 1:
            raise ParameterError("calibration_captures must be >= 1")
        if not (0 <= self.branch_gate < 1):
            raise ParameterError("branch_gate must be in [0, 1)")
        n_sym = self.snapshot_symbols
        if n_sym < self.tx.header_len:
            raise ParameterError("snapshot shorter than the synchronization header")

    @property
    def snapshot_symbols(self) -> int:
        return int(round(self.snapshot_duration * self.tx.symbol_rate))


@dataclass(frozen=True)
class SnapshotResult:
    """Outcome of one snapshot.  Recovery failures are data, not errors.

    Transmittance and noise fields are NaN when the corresponding estimate
    was unavailable (dark branch, sync failure, degenerate estimate); the
    ``failure_reason`` string records why the combined-output estimate is
    missing and is empty on success.
    """

    index: int
    T_hat_x: float
    T_hat_y: float
    T_hat_rec: float
    eps_hat: float
    I_BA: float
    chi_BE: float
    K: float
    secure: bool
    cma_settled_index: int
    failure_reason: str = ""
    # Non-CSV extras for session-level analysis.
    eps_hat_x: float = float("nan")
    eps_hat_y: float = float("nan")
    estimate_rec: ChannelEstimate | None = None
    estimate_x: ChannelEstimate | None = None
    estimate_y: ChannelEstimate | None = None
    pilot_freq_x: float = float("nan")
    pilot_freq_y: float = float("nan")


@dataclass(frozen=True)
class SessionResult:
    config: SessionConfig
    calibration: NoiseCalibration
    snapshots: tuple
    summary: dict


# ---------------------------------------------------------------------------
# Configuration (de)serialization


_POL_MODELS = {"static": StaticPol, "wiener": WienerPol, "scrambler": ScramblerPol}


def _pol_model_to_dict(model) -> dict:
    for tag, cls in _POL_MODELS.items():
        if isinstance(model, cls):
            return {"kind": tag, **dataclasses.asdict(model)}
    raise ParameterError(f"unknown polarization model {model!r}")


def _pol_model_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in _POL_MODELS:
        raise ParameterError(f"unknown polarization model kind {kind!r}")
    return _POL_MODELS[kind](**d)


def session_config_to_dict(cfg: SessionConfig) -> dict:
    """JSON-serializable dict with a versioned schema."""
    if cfg.frontend.noise_shaping is not None:
        raise ParameterError("noise_shaping filters are not serializable to JSON configs")
    out = {"schema_version": SCHEMA_VERSION}
    body = dataclasses.asdict(cfg)
    body["channel"]["pol_model"] = _pol_model_to_dict(cfg.channel.pol_model)
    out["session"] = body
    return out


def session_config_from_dict(data: dict) -> SessionConfig:
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ParameterError(f"unsupported config schema_version {version!r}")
    body = dict(data["session"])
    channel = dict(body.pop("channel"))
    channel["pol_model"] = _pol_model_from_dict(channel["pol_model"])
    kwargs = {
        "tx": TxConfig(**body.pop("tx")),
        "channel": ChannelConfig(**channel),
        "frontend": FrontendConfig(**body.pop("frontend")),
        "dsp": DspConfig(**body.pop("dsp")),
        "cma": CmaConfig(**body.pop("cma")),
        "security": SecurityParams(**body.pop("security")),
    }
    kwargs.update(body)
    return SessionConfig(**kwargs)


def load_session_config(path: str | Path) -> SessionConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return session_config_from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Calibration


def run_calibration(cfg: SessionConfig) -> NoiseCalibration:
    """Measure shot and thermal variances of the DSP output points.

    Runs transmitter-dark captures through the identical recovery chain
    (fixed nominal beat, no pilot tracking) and pools the symbol-rate points
    of both branches over ``calibration_captures`` captures per noise kind.
    """
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, _SEED_CALIBRATION]))
    beat = cfg.channel.lo_offset_hz + cfg.tx.pilot_if_hz
    pooled: dict[str, list[np.ndarray]] = {"shot_only": [], "thermal_only": []}
    for kind in ("shot_only", "thermal_only"):
        if kind == "thermal_only" and cfg.frontend.thermal_sigma == 0:
            continue
        for _ in range(cfg.calibration_captures):
            cap = capture_noise(cfg.frontend, kind, cfg.snapshot_duration, rng)
            for record in (cap.x, cap.y):
                rec = recover_branch(record, cfg.dsp, beat, pilot_tracking=False)
                pooled[kind].append(rec.quantum_points)
    shot = np.concatenate(pooled["shot_only"])
    if pooled["thermal_only"]:
        thermal = np.concatenate(pooled["thermal_only"])
    else:
        thermal = np.zeros(shot.size, dtype=np.complex128)
    return calibrate_variances(shot, thermal)


# ---------------------------------------------------------------------------
# State-of-polarization evolution across snapshot intervals


def _sop_start(cfg: SessionConfig, index: int) -> np.ndarray | None:
    """Jones matrix at the start of snapshot ``index``.

    Scrambled sessions draw an independent Haar-uniform matrix per snapshot:
    the scrambler decorrelates the state of polarization completely over the
    multi-second gap between snapshots.  Unscrambled sessions evolve the
    configured drift model across the accumulated interval time.  The state
    is reproduced deterministically from the session seed and the snapshot
    index alone, so any snapshot can be recomputed in isolation.
    """
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, _SEED_SOP]))
    if cfg.scrambled:
        u = haar_unitary(rng)
        for _ in range(index):
            u = haar_unitary(rng)
        return u
    model = cfg.channel.pol_model
    if isinstance(model, StaticPol):
        return None
    if isinstance(model, ScramblerPol):
        draws = 1 + int(index * cfg.snapshot_interval * model.step_rate)
        u = haar_unitary(rng)
        for _ in range(draws - 1):
            u = haar_unitary(rng)
        return u
    # Wiener drift: coarse walk over the elapsed interval time.
    steps_per_interval = 64
    tau = cfg.snapshot_interval / steps_per_interval
    s = model.angular_rate * tau / _STOKES_STEP_FACTOR
    u = np.eye(2, dtype=np.complex128)
    for _ in range(index * steps_per_interval):
        u = _su2_step(rng.normal(0.0, s, size=3)) @ u
    return u


# ---------------------------------------------------------------------------
# Snapshot pipeline


_COHERENCE_BLOCK = 256


def _coherence_profile(points: np.ndarray, block: int = _COHERENCE_BLOCK) -> np.ndarray:
    """Coherent clock-tone power of a per-symbol point stream, per block.

    The clock tone sits at half the symbol rate, so on the symbol grid it
    alternates sign.  Averaging ``points * (-1)**n`` over short blocks keeps
    the tone coherent (residual phase drift is negligible over a block) while
    suppressing noise by the block length; noise-only stretches of a fading
    branch therefore score far below any stretch carrying a real tone.
    """
    c = np.asarray(points)
    n = (c.size // block) * block
    if n == 0:
        return np.zeros(0, dtype=np.float64)
    alt = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    return np.abs((c[:n] * alt).reshape(-1, block).mean(axis=1)) ** 2


def _align_branches(bx: BranchRecovery, by: BranchRecovery):
    """Pair the two branch constellations on a common symbol grid.

    Clock recovery anchors each branch on its own zero-crossing grid.  A
    branch that fades dark tracks noise crossings while dark and can slip
    whole symbols, so no single offset aligns the full records.  Instead,
    every point of the reference branch (the one with the stronger
    coherent clock tone, hence the more trustworthy grid) is paired with
    the other branch's nearest-in-time point; across a slip the pairing
    simply jumps an index, and the mis-paired stretch is the one where the
    slipping branch carries noise anyway.
    """
    if bx.sample_indices.size < 2 or by.sample_indices.size < 2:
        raise SyncFailureError("branch records too short to align")
    swap = float(np.mean(_coherence_profile(by.clock_points))) > float(
        np.mean(_coherence_profile(bx.clock_points))
    )
    ref, oth = (by, bx) if swap else (bx, by)
    j = np.searchsorted(oth.sample_indices, ref.sample_indices)
    j = np.clip(j, 1, oth.sample_indices.size - 1)
    left_closer = (ref.sample_indices - oth.sample_indices[j - 1]) <= (
        oth.sample_indices[j] - ref.sample_indices
    )
    j = j - left_closer
    oc, oq = oth.clock_points[j], oth.quantum_points[j]
    if swap:
        return oc, oq, ref.clock_points, ref.quantum_points
    return ref.clock_points, ref.quantum_points, oc, oq


def _estimate_points(
    points: np.ndarray,
    frame: SymbolFrame,
    cfg: SessionConfig,
    cal: NoiseCalibration,
) -> ChannelEstimate:
    """SNU-normalize, synchronize against the frame and estimate the channel.

    Synchronization is run on the full point sequence (the header sits at the
    frame start) and the estimate uses the trailing ``estimation_symbols``
    pairs, which discards the leading symbols where the combiner is still
    converging.
    """
    b = snu_normalize(points, cal)
    a, b, _, _ = frame_sync(b, frame)
    n = min(cfg.estimation_symbols, a.size)
    return estimate_channel(a[-n:], b[-n:], cfg.security, cal)


def _nan_result(index: int, reason: str, **extras) -> SnapshotResult:
    nan = float("nan")
    return SnapshotResult(
        index=index,
        T_hat_x=extras.pop("T_hat_x", nan),
        T_hat_y=extras.pop("T_hat_y", nan),
        T_hat_rec=nan,
        eps_hat=nan,
        I_BA=nan,
        chi_BE=nan,
        K=nan,
        secure=False,
        cma_settled_index=extras.pop("cma_settled_index", -1),
        failure_reason=reason,
        **extras,
    )


def run_snapshot(cfg: SessionConfig, index: int, cal: NoiseCalibration) -> SnapshotResult:
    """Simulate and process snapshot ``index`` of the session.

    Deterministic given (config, index): every random stream is derived from
    the session seed and the snapshot index.  Recovery failures (lost pilot,
    diverged combiner, failed synchronization, degenerate estimate) are
    recorded in ``failure_reason`` rather than raised.
    """
    ss = np.random.SeedSequence([cfg.seed, _SEED_SNAPSHOT, index])
    rng_traj, rng_chan, rng_fe = (np.random.default_rng(s) for s in ss.spawn(3))
    tx_seed = int(np.random.SeedSequence([cfg.seed, _SEED_SNAPSHOT, index, 4]).generate_state(1)[0])

    tx_cfg = replace(cfg.tx, seed=tx_seed)
    frame = gen_symbols(tx_cfg, cfg.snapshot_symbols)
    sig = scale_to_photons(modulate(frame, tx_cfg, cfg.frontend.sample_rate), tx_cfg)

    ch_cfg = cfg.channel
    if cfg.scrambled:
        ch_cfg = replace(ch_cfg, pol_model=WienerPol(angular_rate=cfg.scramble_rate))
    start = _sop_start(cfg, index)
    traj = make_jones_trajectory(
        ch_cfg, sig.duration + cfg.pol_update_period, cfg.pol_update_period, rng_traj, start
    )
    try:
        field_x, field_y = apply_channel(sig, ch_cfg, traj, rng_chan)
        capture = detect(field_x, field_y, cfg.frontend, rng_fe)
    except ClippingError as exc:
        return _nan_result(index, f"frontend clipping: {exc}")

    beat = ch_cfg.lo_offset_hz + cfg.tx.pilot_if_hz
    branches: dict[str, BranchRecovery | None] = {}
    for name, record in (("x", capture.x), ("y", capture.y)):
        try:
            branches[name] = recover_branch(record, cfg.dsp, beat)
        except PilotNotFoundError:
            branches[name] = None

    bx, by = branches["x"], branches["y"]
    extras: dict = {}
    nan = float("nan")

    # Single-branch estimates bypass the combiner entirely.
    single: dict[str, ChannelEstimate | None] = {"x": None, "y": None}
    for name, rec in (("x", bx), ("y", by)):
        if rec is None:
            continue
        extras[f"pilot_freq_{name}"] = rec.pilot_freq_hz
        try:
            single[name] = _estimate_points(rec.quantum_points, frame, cfg, cal)
        except (SyncFailureError, EstimateDegenerateError):
            single[name] = None
    t_x = single["x"].T_hat if single["x"] else nan
    t_y = single["y"].T_hat if single["y"] else nan
    extras.update(
        T_hat_x=t_x,
        T_hat_y=t_y,
        eps_hat_x=single["x"].eps_hat if single["x"] else nan,
        eps_hat_y=single["y"].eps_hat if single["y"] else nan,
        estimate_x=single["x"],
        estimate_y=single["y"],
    )

    # A branch joins the combiner only when its peak coherent clock-tone
    # power is a usable share of the pair's.  Raw band power is not
    # selective enough: a dark branch still passes bandpassed noise through
    # the clock filter, and that noise drives the rank-one clock gradient
    # with junk.  The gate deliberately does not depend on the
    # single-branch estimate: a branch that is dark at the start of the
    # snapshot (so the sync header is invisible to it alone) can still
    # carry most of the signal later, and the combined output always sees
    # the header because the two branches together conserve the transmitted
    # power.
    p_x = float(np.max(_coherence_profile(bx.clock_points), initial=0.0)) if bx is not None else 0.0
    p_y = float(np.max(_coherence_profile(by.clock_points), initial=0.0)) if by is not None else 0.0
    p_total = p_x + p_y
    use_x = bx is not None and p_total > 0 and p_x >= cfg.branch_gate * p_total
    use_y = by is not None and p_total > 0 and p_y >= cfg.branch_gate * p_total
    if not use_x and not use_y:
        return _nan_result(index, "no branch with usable signal", **extras)

    # Build the combiner input; a dark branch contributes zero constellations
    # and is excluded from the combiner noise gain.
    if use_x and use_y:
        cx, qx, cy, qy = _align_branches(bx, by)
    else:
        active = bx if use_x else by
        zeros = np.zeros(active.clock_points.size, dtype=np.complex128)
        if use_x:
            cx, qx, cy, qy = bx.clock_points, bx.quantum_points, zeros, zeros
        else:
            cx, qx, cy, qy = zeros, zeros, by.clock_points, by.quantum_points
    clock_scale = np.sqrt(0.5 * (np.mean(np.abs(cx) ** 2) + np.mean(np.abs(cy) ** 2)))
    if clock_scale <= 0:
        return _nan_result(index, "clock tone carries no power", **extras)

    try:
        result = cma_run(
            ConstellationFrame(cx / clock_scale, cy / clock_scale, qx, qy), cfg.cma
        )
    except DivergenceError as exc:
        return _nan_result(index, f"combiner diverged at step {exc.step}", **extras)
    settled = cma_error_trace_stats(result.error_trace)["settled_index"]
    extras["cma_settled_index"] = settled

    # Normalize by the per-symbol tap norm: under polarization drift the
    # amplitude loop rescales the taps throughout the snapshot, so dividing by
    # the final noise gain alone would leave a slowly varying gain that shows
    # up as spurious excess noise.  A dark branch's tap sees no clock
    # gradient -- it only decays under the leak -- and its (zero-input) block
    # must be excluded from the noise norm.
    norm = result.tap_norm_trace
    if not (use_x and use_y):
        steps = np.arange(1, norm.size + 1)
        dark_tap = (1.0 - cfg.cma.leak) ** steps
        norm = np.sqrt(np.maximum(norm**2 - dark_tap**2, 1e-12))

    try:
        est = _estimate_points(result.quantum_out / norm, frame, cfg, cal)
    except SyncFailureError as exc:
        return _nan_result(index, f"frame sync failed: {exc}", **extras)
    except EstimateDegenerateError as exc:
        return _nan_result(index, f"degenerate estimate: {exc}", **extras)

    snap: SecuritySnapshot = key_rate(est, cfg.security, cal.eps_thermal)
    return SnapshotResult(
        index=index,
        T_hat_x=t_x,
        T_hat_y=t_y,
        T_hat_rec=est.T_hat,
        eps_hat=est.eps_hat,
        I_BA=snap.mutual_info,
        chi_BE=snap.holevo,
        K=snap.key_rate,
        secure=snap.secure,
        cma_settled_index=settled,
        failure_reason="",
        estimate_rec=est,
        **{k: v for k, v in extras.items() if k not in ("T_hat_x", "T_hat_y", "cma_settled_index")},
    )


# ---------------------------------------------------------------------------
# Session


def _class_mean_security(
    estimates: list[ChannelEstimate], cfg: SessionConfig, eps_thermal: float
) -> dict:
    """Evaluate each estimate at the class-mean excess noise.

    A single snapshot pins the transmittance to better than a percent but
    leaves several hundredths of a shot-noise unit of statistical error on
    the excess noise; averaging the noise over the class and re-evaluating
    the key rate per snapshot gives the session-level security answer.
    """
    if not estimates:
        return {
            "count": 0,
            "eps_mean": float("nan"),
            "key_rates": [],
            "secure_count": 0,
            "secure_fraction": float("nan"),
        }
    eps_mean = float(np.mean([e.eps_hat for e in estimates]))
    rates = []
    for est in estimates:
        snap = key_rate(replace(est, eps_hat=eps_mean), cfg.security, eps_thermal)
        rates.append(snap.key_rate)
    secure = int(np.sum(np.asarray(rates) > 0))
    return {
        "count": len(estimates),
        "eps_mean": eps_mean,
        "key_rates": rates,
        "secure_count": secure,
        "secure_fraction": secure / len(rates),
    }


def _nanmax_or_nan(values) -> float:
    arr = np.asarray(values, dtype=np.float64)
    finite = arr[np.isfinite(arr)]
    return float(np.max(finite)) if finite.size else float("nan")


def summarize_session(
    cfg: SessionConfig, snapshots: list[SnapshotResult], cal: NoiseCalibration
) -> dict:
    t_cfg = transmission(cfg.channel)
    rec = [s for s in snapshots if s.estimate_rec is not None]
    # Single-branch class statistics only include branches above the combining
    # gate: a near-dark branch yields an excess-noise estimate amplified by
    # 1/T_hat that would swamp the class mean without carrying information.
    sx = [
        s.estimate_x
        for s in snapshots
        if s.estimate_x is not None and s.estimate_x.T_hat >= cfg.branch_gate
    ]
    sy = [
        s.estimate_y
        for s in snapshots
        if s.estimate_y is not None and s.estimate_y.T_hat >= cfg.branch_gate
    ]

    t_rec = np.array([s.T_hat_rec for s in rec], dtype=float)
    width = _HIST_REL_WIDTH * t_cfg
    edges = (np.arange(int(_HIST_REL_SPAN / _HIST_REL_WIDTH) + 2) - 0.5) * width
    if t_rec.size:
        counts, _ = np.histogram(np.clip(t_rec, edges[0], edges[-1] - 1e-12), bins=edges)
        mode_T = float(np.argmax(counts) * width)
    else:
        counts = np.zeros(edges.size - 1, dtype=int)
        mode_T = float("nan")

    cls_rec = _class_mean_security([s.estimate_rec for s in rec], cfg, cal.eps_thermal)
    cls_x = _class_mean_security(sx, cfg, cal.eps_thermal)
    cls_y = _class_mean_security(sy, cfg, cal.eps_thermal)

    per_snapshot_secure = int(np.sum([s.secure for s in snapshots]))
    return {
        "schema_version": SCHEMA_VERSION,
        "snapshot_count": len(snapshots),
        "recovered_count": len(rec),
        "failure_count": len(snapshots) - len(rec),
        "configured_transmittance": t_cfg,
        "sigma2_shot": cal.sigma2_shot,
        "eps_thermal": cal.eps_thermal,
        "T_rec_mean": float(np.mean(t_rec)) if t_rec.size else float("nan"),
        "T_rec_mode": mode_T,
        "T_rec_hist_edges": edges.tolist(),
        "T_rec_hist_counts": counts.tolist(),
        "T_single_max": _nanmax_or_nan(
            [s.T_hat_x for s in snapshots] + [s.T_hat_y for s in snapshots]
        ),
        "secure_count_per_snapshot_eps": per_snapshot_secure,
        "class_recovered": cls_rec,
        "class_single_x": cls_x,
        "class_single_y": cls_y,
    }


def run_session(cfg: SessionConfig, progress=None) -> SessionResult:
    """Calibrate once, run all snapshots and summarize.

    ``progress`` is an optional callable invoked as ``progress(index, result)``
    after each snapshot.  When ``cfg.output_dir`` is set, writes
    ``snapshots.csv`` and ``summary.json`` there.
    """
    t0 = time.monotonic()
    cal = run_calibration(cfg)
    snapshots = []
    for i in range(cfg.snapshot_count):
        result = run_snapshot(cfg, i, cal)
        snapshots.append(result)
        if progress is not None:
            progress(i, result)
    summary = summarize_session(cfg, snapshots, cal)
    summary["runtime_s"] = time.monotonic() - t0
    session = SessionResult(cfg, cal, tuple(snapshots), summary)
    if cfg.output_dir is not None:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_snapshot_csv(snapshots, out / "snapshots.csv")
        write_summary_json(session, out / "summary.json")
    return session


# ---------------------------------------------------------------------------
# Export


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_snapshot_csv(snapshots, path: str | Path) -> None:
    """Write per-snapshot rows in the pinned :data:`CSV_COLUMNS` order.

    Floats are written with ``repr`` (shortest round-trip), so re-running the
    same configuration reproduces the file byte for byte.  Deliberately free
    of wall-clock fields.
    """
    import csv

    snapshots = list(snapshots)
    if not snapshots:
        raise DegenerateInputError("no snapshot results to export")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for s in snapshots:
            writer.writerow([_fmt(getattr(s, col)) for col in CSV_COLUMNS])


def write_summary_json(session: SessionResult, path: str | Path) -> None:
    body = {
        "schema_version": SCHEMA_VERSION,
        "config": session_config_to_dict(session.config),
        "calibration": {
            "sigma2_shot": session.calibration.sigma2_shot,
            "sigma2_thermal": session.calibration.sigma2_thermal,
        },
        "summary": session.summary,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(body, fh, indent=2, sort_keys=True)
        fh.write("\n")
