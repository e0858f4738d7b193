"""Echo figures of merit: efficiency, overlap fidelity, delay, phase and
time-order discrimination."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ZeroInput
from .signals import FieldEnvelope


@dataclass(frozen=True)
class EchoReport:
    efficiency: float
    fidelity: float
    delay: float
    phase: float
    reversal_score: float
    theta_reported: float
    dtau_predicted: float

    def as_dict(self) -> dict:
        return {k: float(v) for k, v in asdict(self).items()}


def _check(*fields: FieldEnvelope):
    g = fields[0].grid
    for f in fields:
        if f.grid != g:
            raise ValueError("envelopes must share one time grid")
        if f.energy == 0:
            raise ZeroInput("envelope has zero energy")


def efficiency(inp: FieldEnvelope, echo: FieldEnvelope) -> float:
    """Energy ratio ``E_echo / E_in``."""
    if inp.grid != echo.grid:
        raise ValueError("envelopes must share one time grid")
    if inp.energy == 0:
        raise ZeroInput("input has zero energy")
    return echo.energy / inp.energy


def _padded(x: np.ndarray) -> np.ndarray:
    out = np.zeros(2 * x.size, dtype=complex)
    out[: x.size] = x
    return out


def shifted(samples: np.ndarray, lag: float) -> np.ndarray:
    """Delay a sampled envelope by ``lag`` bins (fractional lags via the DFT
    shift theorem on a zero-padded copy, so nothing wraps around)."""
    n = samples.size
    X = np.fft.fft(_padded(samples))
    f = np.fft.fftfreq(2 * n)
    return np.fft.ifft(X * np.exp(-2j * np.pi * f * lag))[:n]


def _correlation(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``c[k] = sum_t conj(a[t]) b[t + k]`` for lags ``-n < k < n`` (index ``k mod 2n``)."""
    return np.fft.ifft(np.conj(np.fft.fft(_padded(a))) * np.fft.fft(_padded(b)))


def _peak_lag(c: np.ndarray) -> float:
    mag = np.abs(c)
    k = int(np.argmax(mag))
    y0, y1, y2 = mag[k - 1], mag[k], mag[(k + 1) % mag.size]
    den = y0 - 2 * y1 + y2
    frac = 0.5 * (y0 - y2) / den if den != 0 else 0.0
    lag = k if k < mag.size // 2 else k - mag.size
    return lag + float(np.clip(frac, -0.5, 0.5))


def _overlap(a: np.ndarray, b: np.ndarray) -> complex:
    return complex(np.vdot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))


def fidelity_and_delay(inp: FieldEnvelope, echo: FieldEnvelope) -> tuple[float, float, float]:
    """Fit ``echo(t) = c * inp(t - delay)``.

    The delay is the peak of the amplitude cross-correlation, refined by a
    three-point parabola; the fidelity is the normalised overlap with the
    input shifted by that delay and the phase is the argument of that
    overlap.  Returns ``(fidelity, delay, phase)`` with the delay in time
    units.
    """
    _check(inp, echo)
    lag = _peak_lag(_correlation(inp.samples, echo.samples))
    ov = _overlap(shifted(inp.samples, lag), echo.samples)
    return min(abs(ov), 1.0), lag * inp.grid.dt, float(np.angle(ov))


def time_reversed(inp: FieldEnvelope) -> FieldEnvelope:
    """Mirror the envelope about its energy centroid."""
    if inp.energy == 0:
        raise ZeroInput("input has zero energy")
    w = np.abs(inp.samples) ** 2
    c = float(np.sum(w * np.arange(w.size)) / w.sum())
    # reversed[t] = inp[2c - t]: flip, then shift by the centroid offset
    flipped = inp.samples[::-1]
    return FieldEnvelope(inp.grid, shifted(flipped, 2 * c - (w.size - 1)))


def _is_symmetric(inp: FieldEnvelope) -> bool:
    rev = time_reversed(inp)
    return abs(_overlap(inp.samples, rev.samples)) > 0.99


def reversal_score(inp: FieldEnvelope, echo: FieldEnvelope, delay: float) -> float:
    """``(F_same - F_rev) / (F_same + F_rev)``: +1 for a same-order replica
    delayed by ``delay``, -1 for a time-reversed one."""
    _check(inp, echo)
    if _is_symmetric(inp):
        warnings.warn("input is nearly symmetric in time; the reversal score is not informative", stacklevel=2)
    lag = delay / inp.grid.dt
    f_same = abs(_overlap(shifted(inp.samples, lag), echo.samples))
    f_rev = abs(_overlap(shifted(time_reversed(inp).samples, lag), echo.samples))
    if f_same + f_rev == 0:
        return 0.0
    return (f_same - f_rev) / (f_same + f_rev)


def energy_band(spectrum: np.ndarray, fraction: float = 0.99) -> np.ndarray:
    """Indices of the fewest bins holding ``fraction`` of the spectral energy."""
    pw = np.abs(spectrum) ** 2
    total = pw.sum()
    if total == 0:
        raise ZeroInput("spectrum has zero energy")
    order = np.argsort(pw, kind="stable")[::-1]
    k = int(np.searchsorted(np.cumsum(pw[order]) / total, fraction)) + 1
    return np.sort(order[: min(k, pw.size)])


def relative_l2(test: np.ndarray, ref: np.ndarray, idx=None) -> float:
    if idx is not None:
        test, ref = test[idx], ref[idx]
    return float(np.linalg.norm(test - ref) / np.linalg.norm(ref))
