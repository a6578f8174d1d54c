"""Fiber attenuation, polarization trajectories, and phase noise."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polrx.channel import (
    ChannelConfig,
    ScramblerPol,
    StaticPol,
    WienerPol,
    apply_channel,
    haar_unitary,
    make_jones_trajectory,
    transmission,
)
from polrx.errors import ParameterError
from polrx.signals import ComplexSignal, unwrap_phase

FS = 2.4576e9


class TestTransmission:
    def test_matches_log_loss_oracle(self):
        cfg = ChannelConfig(length_km=40.0, alpha_db_per_km=0.2)
        assert transmission(cfg) == pytest.approx(10 ** (-8.0 / 10.0), rel=1e-12)

    def test_excess_penalty_stacks(self):
        base = ChannelConfig(length_km=10.0)
        penalized = ChannelConfig(length_km=10.0, excess_penalty_db=3.0)
        assert transmission(penalized) == pytest.approx(
            transmission(base) * 10 ** (-0.3), rel=1e-12
        )

    def test_zero_length_is_lossless(self):
        assert transmission(ChannelConfig(length_km=0.0)) == 1.0


class TestHaarUnitary:
    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_unitary(self, seed):
        u = haar_unitary(np.random.default_rng(seed))
        assert np.allclose(u @ u.conj().T, np.eye(2), atol=1e-12)

    def test_column_direction_uniform(self):
        # |U00|^2 is uniform on [0, 1] for Haar-random SU(2); check its mean.
        rng = np.random.default_rng(7)
        vals = [abs(haar_unitary(rng)[0, 0]) ** 2 for _ in range(4000)]
        assert np.mean(vals) == pytest.approx(0.5, abs=0.02)


class TestTrajectories:
    def test_static_identity(self):
        cfg = ChannelConfig(pol_model=StaticPol())
        traj = make_jones_trajectory(cfg, 1e-4, 1e-5, np.random.default_rng(0))
        assert np.allclose(traj.matrices, np.eye(2), atol=1e-12)

    def test_shapes_and_duration(self):
        cfg = ChannelConfig(pol_model=WienerPol(angular_rate=100.0))
        traj = make_jones_trajectory(cfg, 1e-4, 1e-5, np.random.default_rng(0))
        assert traj.matrices.shape[0] >= 10
        assert traj.duration >= 1e-4

    def test_deterministic_given_rng_state(self):
        cfg = ChannelConfig(pol_model=WienerPol(angular_rate=100.0))
        t1 = make_jones_trajectory(cfg, 1e-4, 1e-5, np.random.default_rng(42))
        t2 = make_jones_trajectory(cfg, 1e-4, 1e-5, np.random.default_rng(42))
        assert np.array_equal(t1.matrices, t2.matrices)

    def test_wiener_rate_scales_excursion(self):
        # Faster drift must wander further from the start in the same time.
        def excursion(rate, seed):
            cfg = ChannelConfig(pol_model=WienerPol(angular_rate=rate))
            traj = make_jones_trajectory(cfg, 1e-3, 1e-5, np.random.default_rng(seed))
            return np.max(np.abs(traj.matrices - traj.matrices[0]))

        slow = np.mean([excursion(10.0, s) for s in range(8)])
        fast = np.mean([excursion(1e4, s) for s in range(8)])
        assert fast > 5 * slow

    def test_scrambler_redraws_at_step_rate(self):
        cfg = ChannelConfig(pol_model=ScramblerPol(step_rate=1e4))
        traj = make_jones_trajectory(cfg, 1e-3, 1e-5, np.random.default_rng(0))
        # 10 kHz scrambler over 1 ms: ~10 distinct plateaus.
        changes = np.sum(np.any(np.abs(np.diff(traj.matrices, axis=0)) > 1e-12, axis=(1, 2)))
        assert 5 <= changes <= 15


class TestApplyChannel:
    def _run(self, cfg, n=1 << 14, seed=0):
        rng = np.random.default_rng(seed)
        sig = ComplexSignal(np.ones(n, dtype=complex), FS)
        traj = make_jones_trajectory(cfg, n / FS + 1e-5, 1e-5, rng)
        return sig, apply_channel(sig, cfg, traj, rng)

    def test_power_conservation(self):
        # Unitary polarization and pure phase rotation: the two output
        # branches always carry exactly T times the input power.
        cfg = ChannelConfig(length_km=10.0, pol_model=WienerPol(angular_rate=1e4))
        sig, (x, y) = self._run(cfg)
        total = np.abs(x.samples) ** 2 + np.abs(y.samples) ** 2
        assert np.allclose(total, transmission(cfg) * np.abs(sig.samples) ** 2, rtol=1e-9)

    def test_lo_offset_sets_phase_slope(self):
        cfg = ChannelConfig(length_km=0.0, combined_linewidth_hz=0.0, lo_offset_hz=1e9)
        _, (x, _) = self._run(cfg)
        phase = unwrap_phase(x)
        slope = (phase[-1] - phase[0]) / ((len(phase) - 1) / FS)
        assert slope / (2 * np.pi) == pytest.approx(1e9, rel=1e-6)

    def test_linewidth_sets_phase_diffusion(self):
        # Lorentzian linewidth L gives phase increments of variance
        # 2*pi*L*dt per sample.
        lw = 1e6
        cfg = ChannelConfig(length_km=0.0, combined_linewidth_hz=lw, lo_offset_hz=0.0)
        _, (x, _) = self._run(cfg, n=1 << 16)
        steps = np.diff(unwrap_phase(x))
        assert np.var(steps) == pytest.approx(2 * np.pi * lw / FS, rel=0.1)

    def test_zero_linewidth_zero_offset_is_phase_stable(self):
        cfg = ChannelConfig(length_km=0.0, combined_linewidth_hz=0.0, lo_offset_hz=0.0)
        _, (x, _) = self._run(cfg)
        assert np.allclose(x.samples, x.samples[0], atol=1e-12)

    def test_invalid_pol_model_rejected(self):
        with pytest.raises(ParameterError):
            ChannelConfig(pol_model="scrambled")
