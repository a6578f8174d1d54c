"""Session configuration, serialization, export, and summary statistics."""

import json

import numpy as np
import pytest

from polrx.channel import ChannelConfig, ScramblerPol, StaticPol, WienerPol
from polrx.errors import DegenerateInputError, ParameterError
from polrx.security import ChannelEstimate, NoiseCalibration
from polrx.session import (
    CSV_COLUMNS,
    SessionConfig,
    SnapshotResult,
    load_session_config,
    session_config_from_dict,
    session_config_to_dict,
    summarize_session,
    write_snapshot_csv,
)


class TestConfigRoundTrip:
    def test_default_round_trip(self):
        cfg = SessionConfig()
        assert session_config_from_dict(session_config_to_dict(cfg)) == cfg

    @pytest.mark.parametrize(
        "pol_model",
        [StaticPol(theta=0.3, phi=1.1), WienerPol(angular_rate=123.0), ScramblerPol(step_rate=7.0)],
    )
    def test_pol_models_round_trip(self, pol_model):
        cfg = SessionConfig(channel=ChannelConfig(pol_model=pol_model))
        back = session_config_from_dict(session_config_to_dict(cfg))
        assert back.channel.pol_model == pol_model

    def test_json_file_round_trip_exact(self, tmp_path):
        cfg = SessionConfig(seed=17, scrambled=True, snapshot_count=5, scramble_rate=2.2e4)
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(session_config_to_dict(cfg)))
        assert load_session_config(path) == cfg

    def test_unknown_schema_version_rejected(self):
        data = session_config_to_dict(SessionConfig())
        data["schema_version"] = 99
        with pytest.raises(ParameterError):
            session_config_from_dict(data)

    def test_validation(self):
        with pytest.raises(ParameterError):
            SessionConfig(snapshot_count=0)
        with pytest.raises(ParameterError):
            SessionConfig(branch_gate=1.5)


_CAL = NoiseCalibration(sigma2_shot=800.0, sigma2_thermal=80.0)


def _snapshot(index, T_rec, eps, K, T_x=float("nan"), T_y=float("nan"), secure=None):
    def est(T, e):
        if not np.isfinite(T):
            return None
        return ChannelEstimate(0.5, 2.0, T, e, 65536)

    return SnapshotResult(
        index=index,
        T_hat_x=T_x,
        T_hat_y=T_y,
        T_hat_rec=T_rec,
        eps_hat=eps,
        I_BA=0.2,
        chi_BE=0.15,
        K=K,
        secure=(K > 0) if secure is None else secure,
        cma_settled_index=100,
        estimate_rec=est(T_rec, eps),
        estimate_x=est(T_x, eps),
        estimate_y=est(T_y, eps),
        eps_hat_x=eps,
        eps_hat_y=eps,
    )


class TestCsvExport:
    def test_round_trip_values(self, tmp_path):
        snaps = [_snapshot(0, 0.69, 0.012, 0.03), _snapshot(1, 0.71, -0.004, 0.041)]
        path = tmp_path / "snapshots.csv"
        write_snapshot_csv(snaps, path)
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        row = dict(zip(CSV_COLUMNS, lines[1].split(",")))
        assert float(row["T_hat_rec"]) == 0.69
        assert float(row["eps_hat"]) == 0.012
        assert row["secure"] == "1"

    def test_byte_stability(self, tmp_path):
        snaps = [_snapshot(0, 1 / 3, -1e-17, 0.1)]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_snapshot_csv(snaps, a)
        write_snapshot_csv(snaps, b)
        assert a.read_bytes() == b.read_bytes()

    def test_empty_results_rejected(self, tmp_path):
        with pytest.raises(DegenerateInputError):
            write_snapshot_csv([], tmp_path / "empty.csv")

    def test_unwritable_path_raises_oserror(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(OSError):
            write_snapshot_csv([_snapshot(0, 0.7, 0.0, 0.1)], blocker / "sub.csv")


class TestSummary:
    def _cfg(self):
        return SessionConfig(snapshot_count=10)

    def test_mode_tracks_cluster(self):
        cfg = self._cfg()
        snaps = [_snapshot(i, 0.70 + 0.001 * i, 0.01, 0.03) for i in range(8)]
        snaps += [_snapshot(8, 0.30, 0.01, -0.01), _snapshot(9, float("nan"), float("nan"), float("nan"), secure=False)]
        summary = summarize_session(cfg, snaps, _CAL)
        assert summary["T_rec_mode"] == pytest.approx(0.70, abs=0.03)
        assert summary["recovered_count"] == 9
        assert summary["failure_count"] == 1

    def test_class_mean_security_uses_class_mean_eps(self):
        # Snapshots share T but scatter in eps around a small mean: each one
        # must be re-judged at the class-mean eps, not its own noisy draw.
        cfg = self._cfg()
        eps = [0.05, -0.04, 0.02, -0.03, 0.01, -0.01, 0.0, 0.02, -0.02, 0.0]
        snaps = [_snapshot(i, 0.70, e, 0.0) for i, e in enumerate(eps)]
        summary = summarize_session(cfg, snaps, _CAL)
        cls = summary["class_recovered"]
        assert cls["eps_mean"] == pytest.approx(np.mean(eps), rel=1e-9)
        assert cls["count"] == 10
        # At T=0.70 and the tiny mean eps every snapshot clears the threshold.
        assert cls["secure_count"] == 10

    def test_single_branch_gate_excludes_dark_fits(self):
        cfg = self._cfg()
        snaps = [
            _snapshot(0, 0.70, 0.01, 0.03, T_x=0.3, T_y=0.001),
            _snapshot(1, 0.70, 0.01, 0.03, T_x=0.25, T_y=0.4),
        ]
        summary = summarize_session(cfg, snaps, _CAL)
        assert summary["class_single_x"]["count"] == 2
        # T_y = 0.001 sits below branch_gate = 0.02 and must be excluded.
        assert summary["class_single_y"]["count"] == 1

    def test_single_pol_max(self):
        cfg = self._cfg()
        snaps = [_snapshot(0, 0.7, 0.0, 0.1, T_x=0.51, T_y=0.33)]
        summary = summarize_session(cfg, snaps, _CAL)
        assert summary["T_single_max"] == pytest.approx(0.51)
