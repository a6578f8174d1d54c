"""Clock-driven constant-modulus polarization combiner.

Two symbol-rate constellation pairs drive a single adaptive combiner: the
clock pair (constant modulus by construction) supplies the error signal and
the quantum pair is combined with the same taps.  Blocks are newest-first:
``u(n) = [x(n), x(n-1), ..., x(n-N+1), y(n), ...]`` and the combiner output is
``s(n) = h^dagger u(n)``.

The modulus target is ``R = mean|x_C| + mean|y_C|`` over the whole frame,
taps start at ``h_x[0] = h_y[0] = 1`` and the update is

    h <- h + mu * err * conj(s_C) * u_C

with ``err = R - |s_C|`` in the default ``"amplitude"`` error mode, or the
complex ``err = R - s_C`` in ``"literal"`` mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, ParameterError

try:  # pragma: no cover - exercised indirectly
    import numba

    _HAVE_NUMBA = True
except Exception:  # pragma: no cover
    _HAVE_NUMBA = False

__all__ = [
    "CmaConfig",
    "ConstellationFrame",
    "CmaResult",
    "cma_run",
    "cma_error_trace_stats",
    "noise_gain",
]

_DIVERGENCE_NORM = 1e6


@dataclass(frozen=True)
class CmaConfig:
    num_taps: int = 8
    step: float = 1e-3
    error_mode: str = "amplitude"
    leak: float = 0.0

    def __post_init__(self):
        if self.num_taps < 1:
            raise ParameterError("num_taps must be >= 1")
        if self.step < 0:
            raise ParameterError("step must be non-negative")
        if self.error_mode not in ("amplitude", "literal"):
            raise ParameterError("error_mode must be 'amplitude' or 'literal'")
        if not (0 <= self.leak < 1):
            raise ParameterError("leak must be in [0, 1)")


@dataclass(frozen=True)
class ConstellationFrame:
    """Time-aligned clock and quantum constellations for both branches."""

    clock_x: np.ndarray
    clock_y: np.ndarray
    quantum_x: np.ndarray
    quantum_y: np.ndarray

    def __post_init__(self):
        arrs = {}
        n = None
        for name in ("clock_x", "clock_y", "quantum_x", "quantum_y"):
            a = np.ascontiguousarray(getattr(self, name), dtype=np.complex128)
            if a.ndim != 1 or a.size == 0:
                raise ParameterError(f"{name} must be a non-empty 1-d array")
            if n is None:
                n = a.size
            elif a.size != n:
                raise ParameterError("all four constellations must be the same length")
            arrs[name] = a
        for name, a in arrs.items():
            object.__setattr__(self, name, a)

    def __len__(self) -> int:
        return self.clock_x.size


@dataclass(frozen=True)
class CmaResult:
    quantum_out: np.ndarray
    clock_out: np.ndarray
    taps: np.ndarray  # final (2N,) combiner, x block then y block
    error_trace: np.ndarray
    tap_norm_trace: np.ndarray  # |h| recorded once per symbol


def _kernel_py(cx, cy, qx, qy, h, mu, radius, amplitude_mode, leak):
    n_sym = cx.size
    ntaps = h.size // 2
    s_q = np.zeros(n_sym, dtype=np.complex128)
    s_c = np.zeros(n_sym, dtype=np.complex128)
    err_trace = np.zeros(n_sym)
    norm_trace = np.zeros(n_sym)
    uc = np.zeros(2 * ntaps, dtype=np.complex128)
    uq = np.zeros(2 * ntaps, dtype=np.complex128)
    for n in range(n_sym):
        uc[1:ntaps] = uc[: ntaps - 1].copy()
        uc[ntaps + 1 :] = uc[ntaps:-1].copy()
        uc[0] = cx[n]
        uc[ntaps] = cy[n]
        uq[1:ntaps] = uq[: ntaps - 1].copy()
        uq[ntaps + 1 :] = uq[ntaps:-1].copy()
        uq[0] = qx[n]
        uq[ntaps] = qy[n]
        sc = np.vdot(h, uc)
        s_c[n] = sc
        s_q[n] = np.vdot(h, uq)
        if amplitude_mode:
            err = radius - abs(sc)
        else:
            err = radius - sc
        if leak > 0.0:
            h *= 1.0 - leak
        h += mu * err * np.conj(sc) * uc
        err_trace[n] = abs(err)
        norm = np.linalg.norm(h)
        norm_trace[n] = norm
        if not np.isfinite(norm) or norm > _DIVERGENCE_NORM:
            return s_q, s_c, err_trace, norm_trace, n
    return s_q, s_c, err_trace, norm_trace, -1


if _HAVE_NUMBA:

    @numba.njit(cache=True)
    def _kernel_nb(cx, cy, qx, qy, h, mu, radius, amplitude_mode, leak):  # pragma: no cover
        n_sym = cx.size
        ntaps = h.size // 2
        s_q = np.zeros(n_sym, dtype=np.complex128)
        s_c = np.zeros(n_sym, dtype=np.complex128)
        err_trace = np.zeros(n_sym)
        norm_trace = np.zeros(n_sym)
        uc = np.zeros(2 * ntaps, dtype=np.complex128)
        uq = np.zeros(2 * ntaps, dtype=np.complex128)
        for n in range(n_sym):
            for j in range(ntaps - 1, 0, -1):
                uc[j] = uc[j - 1]
                uc[ntaps + j] = uc[ntaps + j - 1]
                uq[j] = uq[j - 1]
                uq[ntaps + j] = uq[ntaps + j - 1]
            uc[0] = cx[n]
            uc[ntaps] = cy[n]
            uq[0] = qx[n]
            uq[ntaps] = qy[n]
            sc = 0.0 + 0.0j
            sq = 0.0 + 0.0j
            for j in range(2 * ntaps):
                hc = np.conj(h[j])
                sc += hc * uc[j]
                sq += hc * uq[j]
            s_c[n] = sc
            s_q[n] = sq
            if amplitude_mode:
                err = (radius - np.abs(sc)) + 0.0j
            else:
                err = (radius - sc) + 0.0j
            scale = mu * err * np.conj(sc)
            acc = 0.0
            keep = 1.0 - leak
            for j in range(2 * ntaps):
                h[j] = keep * h[j] + scale * uc[j]
                acc += (h[j].real * h[j].real) + (h[j].imag * h[j].imag)
            err_trace[n] = np.abs(err)
            norm = np.sqrt(acc)
            norm_trace[n] = norm
            if not np.isfinite(norm) or norm > _DIVERGENCE_NORM:
                return s_q, s_c, err_trace, norm_trace, n
        return s_q, s_c, err_trace, norm_trace, -1


def cma_run(frame: ConstellationFrame, cfg: CmaConfig) -> CmaResult:
    """Run the combiner over a frame; raises :class:`DivergenceError` on blow-up."""
    n = len(frame)
    if n < cfg.num_taps:
        raise ParameterError("frame shorter than the combiner length")
    radius = float(np.mean(np.abs(frame.clock_x)) + np.mean(np.abs(frame.clock_y)))
    h = np.zeros(2 * cfg.num_taps, dtype=np.complex128)
    h[0] = 1.0
    h[cfg.num_taps] = 1.0
    amplitude_mode = cfg.error_mode == "amplitude"
    kernel = _kernel_nb if _HAVE_NUMBA else _kernel_py
    s_q, s_c, err_trace, norm_trace, bad = kernel(
        frame.clock_x, frame.clock_y, frame.quantum_x, frame.quantum_y,
        h, float(cfg.step), radius, amplitude_mode, float(cfg.leak),
    )
    if bad >= 0:
        raise DivergenceError(int(bad))
    return CmaResult(s_q, s_c, h, err_trace, norm_trace)


def cma_error_trace_stats(trace: np.ndarray, window: int = 1024) -> dict:
    """Summarize an error trace: mean/final error and the settling index.

    The settling index is the first step where the trailing moving average
    comes within 10% of its final value (0 for an already-settled trace).
    """
    trace = np.asarray(trace, dtype=np.float64)
    if trace.ndim != 1 or trace.size == 0:
        raise ParameterError("trace must be a non-empty 1-d array")
    window = int(min(window, trace.size))
    kernel = np.ones(window) / window
    # conv[k] sums trace[max(0, k-window+1) .. k], i.e. the trailing window
    # ending at k, so the first trace.size entries are exactly the trailing
    # moving averages.
    ma = np.convolve(trace, kernel, mode="full")[: trace.size]
    # The first window-1 entries average over a partial window; rescale them.
    ma[: window - 1] *= window / np.arange(1, window)
    final = ma[-1]
    tol = 0.1 * abs(final) if final != 0 else 1e-15
    within = np.abs(ma - final) <= tol
    settled = int(np.argmax(within)) if np.any(within) else trace.size
    return {
        "mean_error": float(np.mean(trace)),
        "final_error": float(ma[-1]),
        "settled_index": settled,
    }


def noise_gain(taps: np.ndarray, active_x: bool = True, active_y: bool = True) -> float:
    """RMS gain the combiner applies to independent per-branch noise.

    Branches that carried no signal (all-zero constellations) contribute no
    noise and are excluded.
    """
    taps = np.asarray(taps)
    ntaps = taps.size // 2
    acc = 0.0
    if active_x:
        acc += float(np.sum(np.abs(taps[:ntaps]) ** 2))
    if active_y:
        acc += float(np.sum(np.abs(taps[ntaps:]) ** 2))
    if acc <= 0:
        raise ParameterError("no active branch")
    return float(np.sqrt(acc))
