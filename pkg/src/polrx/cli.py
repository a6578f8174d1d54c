"""Command-line interface.

Subcommands::

    simulate   run one snapshot end to end and report its channel estimate
    session    run a full multi-snapshot measurement session
    calibrate  capture noise records and report the noise calibration
    keyrate    evaluate the key-rate model on a transmittance/noise grid
    sweep      run snapshots across a channel-transmittance grid
    spectrum   dump the periodogram of a noise capture

Exit codes: 0 on success, 1 on configuration errors, 2 on I/O errors.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from polrx.channel import transmission
from polrx.errors import ParameterError, PolrxError
from polrx.frontend import capture_noise
from polrx.security import ChannelEstimate, key_rate
from polrx.session import (
    CSV_COLUMNS,
    SessionConfig,
    load_session_config,
    run_calibration,
    run_session,
    run_snapshot,
    session_config_to_dict,
    write_snapshot_csv,
)
from polrx.signals import power_spectrum


class _Parser(argparse.ArgumentParser):
    """Argument errors are configuration errors (exit code 1, not 2)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ParameterError(message)


def _float_list(text: str) -> list[float]:
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ParameterError(f"expected comma-separated floats, got {text!r}") from exc
    if not values:
        raise ParameterError("expected at least one value")
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="polrx", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="session configuration JSON")
        p.add_argument("--seed", type=int, help="override the session seed")
        p.add_argument(
            "--scrambled",
            action="store_true",
            help="randomize the polarization state per snapshot",
        )
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("simulate", help="run one snapshot")
    common(p)
    p.add_argument("--index", type=int, default=0, help="snapshot index (seed stream)")

    p = sub.add_parser("session", help="run a full measurement session")
    common(p)
    p.add_argument("--snapshots", type=int, help="override the snapshot count")

    p = sub.add_parser("calibrate", help="report the noise calibration")
    common(p)

    p = sub.add_parser("keyrate", help="evaluate the key-rate model on a grid")
    common(p)
    p.add_argument(
        "--transmittance",
        type=_float_list,
        required=True,
        help="comma-separated channel transmittance values",
    )
    p.add_argument(
        "--excess",
        type=_float_list,
        default=[0.0],
        help="comma-separated excess-noise values in shot-noise units",
    )
    p.add_argument(
        "--eps-thermal",
        type=float,
        default=0.0,
        help="trusted receiver noise in shot-noise units",
    )

    p = sub.add_parser("sweep", help="run snapshots across a transmittance grid")
    common(p)
    p.add_argument(
        "--transmittance",
        type=_float_list,
        required=True,
        help="comma-separated channel transmittance values",
    )
    p.add_argument(
        "--snapshots", type=int, default=1, help="snapshots per grid point"
    )

    p = sub.add_parser("spectrum", help="dump the periodogram of a noise capture")
    common(p)
    p.add_argument(
        "--kind",
        choices=("shot_only", "thermal_only"),
        default="shot_only",
        help="which noise sources are enabled during the capture",
    )
    p.add_argument("--duration", type=float, default=1e-4, help="capture length in s")
    p.add_argument(
        "--nperseg", type=int, default=1 << 14, help="Welch segment length"
    )

    return parser


def _load_config(args) -> SessionConfig:
    cfg = load_session_config(args.config) if args.config else SessionConfig()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if args.scrambled:
        cfg = dataclasses.replace(cfg, scrambled=True)
    return cfg


def _emit_rows(columns, rows, args, stem: str) -> None:
    """Write tabular results as CSV or JSON to --out, or print to stdout."""
    if args.format == "json":
        text = json.dumps([dict(zip(columns, row)) for row in rows], indent=2)
        text += "\n"
    else:
        import io

        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)
        text = buf.getvalue()
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        path = args.out / f"{stem}.{args.format}"
        path.write_text(text, encoding="utf-8")
        print(path)
    else:
        sys.stdout.write(text)


def _cmd_simulate(args) -> int:
    cfg = _load_config(args)
    cal = run_calibration(cfg)
    snap = run_snapshot(cfg, args.index, cal)
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        if args.format == "json":
            path = args.out / "snapshot.json"
            row = {col: getattr(snap, col) for col in CSV_COLUMNS}
            path.write_text(json.dumps(row, indent=2) + "\n", encoding="utf-8")
        else:
            path = args.out / "snapshot.csv"
            write_snapshot_csv([snap], path)
        print(path)
    else:
        for col in CSV_COLUMNS:
            print(f"{col}: {getattr(snap, col)}")
    return 0


def _cmd_session(args) -> int:
    cfg = _load_config(args)
    if args.snapshots is not None:
        cfg = dataclasses.replace(cfg, snapshot_count=args.snapshots)
    if args.out:
        cfg = dataclasses.replace(cfg, output_dir=str(args.out))

    def progress(i, snap):
        print(
            f"snapshot {i:3d}: T_rec={snap.T_hat_rec:.4f} eps={snap.eps_hat:+.4f} "
            f"K={snap.K:+.5f}{' [' + snap.failure_reason + ']' if snap.failure_reason else ''}",
            file=sys.stderr,
        )

    result = run_session(cfg, progress=progress)
    s = result.summary
    print(
        f"session: {s['recovered_count']}/{s['snapshot_count']} recovered, "
        f"T mode {s['T_rec_mode']:.3f} (configured {s['configured_transmittance']:.3f}), "
        f"recovered-class secure "
        f"{s['class_recovered']['secure_count']}/{s['class_recovered']['count']}"
    )
    if args.out:
        print(Path(args.out) / "snapshots.csv")
        print(Path(args.out) / "summary.json")
    return 0


def _cmd_calibrate(args) -> int:
    cfg = _load_config(args)
    cal = run_calibration(cfg)
    body = {
        "sigma2_shot": cal.sigma2_shot,
        "sigma2_thermal": cal.sigma2_thermal,
        "eps_thermal": cal.eps_thermal,
        "config": session_config_to_dict(cfg),
    }
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        path = args.out / "calibration.json"
        path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", "utf-8")
        print(path)
    else:
        for name in ("sigma2_shot", "sigma2_thermal", "eps_thermal"):
            print(f"{name}: {body[name]}")
    return 0


def _cmd_keyrate(args) -> int:
    cfg = _load_config(args)
    params = cfg.security
    rows = []
    for T in args.transmittance:
        if not (0 < T <= 1):
            raise ParameterError(f"transmittance {T} outside (0, 1]")
        for eps in args.excess:
            t = math.sqrt(2.0 * params.eta * T * params.mean_photons)
            sigma2 = 2.0 + 2.0 * args.eps_thermal + params.eta * T * eps
            est = ChannelEstimate(
                t_hat=t, sigma2=sigma2, T_hat=T, eps_hat=eps, num_points=1 << 16
            )
            snap = key_rate(est, params, args.eps_thermal)
            rows.append(
                (T, eps, snap.mutual_info, snap.holevo, snap.key_rate, snap.secure)
            )
    _emit_rows(
        ("T", "eps", "I_BA", "chi_BE", "K", "secure"), rows, args, "keyrate"
    )
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_config(args)
    cal = run_calibration(cfg)
    alpha = cfg.channel.alpha_db_per_km
    rows = []
    for T in args.transmittance:
        if not (0 < T <= 1):
            raise ParameterError(f"transmittance {T} outside (0, 1]")
        length = -10.0 * math.log10(T) / alpha
        chan = dataclasses.replace(cfg.channel, length_km=length, excess_penalty_db=0.0)
        point_cfg = dataclasses.replace(cfg, channel=chan)
        for i in range(args.snapshots):
            snap = run_snapshot(point_cfg, i, cal)
            rows.append(
                (
                    transmission(chan),
                    i,
                    snap.T_hat_rec,
                    snap.eps_hat,
                    snap.K,
                    snap.secure,
                    snap.failure_reason,
                )
            )
    _emit_rows(
        ("T_cfg", "index", "T_hat_rec", "eps_hat", "K", "secure", "failure_reason"),
        rows,
        args,
        "sweep",
    )
    return 0


def _cmd_spectrum(args) -> int:
    cfg = _load_config(args)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 5]))
    capture = capture_noise(cfg.frontend, args.kind, args.duration, rng)
    freqs, psd = power_spectrum(capture.x, nperseg=args.nperseg)
    rows = list(zip(freqs.tolist(), psd.tolist()))
    _emit_rows(("freq_hz", "psd"), rows, args, f"spectrum_{args.kind}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "session": _cmd_session,
    "calibrate": _cmd_calibrate,
    "keyrate": _cmd_keyrate,
    "sweep": _cmd_sweep,
    "spectrum": _cmd_spectrum,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    except (PolrxError, ValueError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
