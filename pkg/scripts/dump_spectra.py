"""Dump diagnostic periodograms: noise floors and one full signal capture.

Writes shot-only and thermal-only noise spectra plus the spectrum of a
detected dual-polarization signal record (pilot line at the branch beat
frequency, quantum band offset by the symbol-clock frequency).

Usage::

    python3 scripts/dump_spectra.py --out results/spectra [--seed 0]
"""

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from polrx import cli
from polrx.channel import make_jones_trajectory
from polrx.channel import apply_channel
from polrx.frontend import detect
from polrx.session import SessionConfig
from polrx.signals import power_spectrum
from polrx.transmitter import gen_symbols, modulate, scale_to_photons


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path("results/spectra"))
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    for kind in ("shot_only", "thermal_only"):
        cli.main(
            [
                "spectrum",
                "--kind",
                kind,
                "--seed",
                str(args.seed),
                "--duration",
                "1e-4",
                "--nperseg",
                "2048",
                "--out",
                str(args.out),
            ]
        )

    cfg = SessionConfig(seed=args.seed)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 6]))
    frame = gen_symbols(cfg.tx, cfg.snapshot_symbols)
    sig = scale_to_photons(modulate(frame, cfg.tx, cfg.frontend.sample_rate), cfg.tx)
    traj = make_jones_trajectory(
        cfg.channel, sig.duration + cfg.pol_update_period, cfg.pol_update_period, rng
    )
    fx, fy = apply_channel(sig, cfg.channel, traj, rng)
    capture = detect(fx, fy, cfg.frontend, rng, "signal")
    freqs, psd = power_spectrum(capture.x, nperseg=1 << 15)
    path = args.out / "spectrum_signal.csv"
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("freq_hz", "psd"))
        writer.writerows(zip(freqs.tolist(), psd.tolist()))
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
