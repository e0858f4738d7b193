"""Time/frequency grids, field envelopes and control-pulse shapes.

Fourier convention used everywhere in the package::

    A~(w) = integral A(t) exp(+i w t) dt,     A(t) = (1/2pi) integral A~(w) exp(-i w t) dw

so that a spectral factor ``exp(+i w D)`` delays a field by ``D``.  Atomic
coherences oscillate as ``exp(-i dw t)`` and resonate with the spectral
component at ``w = dw``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import GridTooCoarse, InvalidWindow, PulseClipped, ScheduleInvalid

_GL_ORDER = 8
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_ORDER)


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    dt: float
    n: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n < 8 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (self.n - 1)

    @property
    def span(self) -> float:
        return self.n * self.dt

    def frequency_grid(self) -> "FrequencyGrid":
        return FrequencyGrid(dw=2 * np.pi / (self.n * self.dt), n=self.n)

    def refined(self, factor: int = 2) -> "TimeGrid":
        """Same start and span with ``factor`` times as many samples."""
        return TimeGrid(self.t0, self.dt / factor, self.n * factor)

    @classmethod
    def covering(cls, t_start: float, t_stop: float, dt_max: float, n_min: int = 8) -> "TimeGrid":
        """Smallest power-of-two grid starting at ``t_start`` that reaches ``t_stop``
        with step no larger than ``dt_max``."""
        n = max(n_min, 8)
        need = (t_stop - t_start) / dt_max
        while n - 1 < need:
            n *= 2
        return cls(t_start, (t_stop - t_start) / (n - 1), n)


@dataclass(frozen=True)
class FrequencyGrid:
    dw: float
    n: int

    @property
    def omega(self) -> np.ndarray:
        """Centered ordering, ``-n/2 ... n/2-1``."""
        return self.dw * np.arange(-self.n // 2, self.n // 2)


@dataclass(frozen=True)
class FieldEnvelope:
    grid: TimeGrid
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got shape {s.shape}")
        object.__setattr__(self, "samples", s)

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2) * self.grid.dt)

    def __add__(self, other: "FieldEnvelope") -> "FieldEnvelope":
        if other.grid != self.grid:
            raise ValueError("envelopes live on different grids")
        return FieldEnvelope(self.grid, self.samples + other.samples)

    def scaled(self, factor: complex) -> "FieldEnvelope":
        return FieldEnvelope(self.grid, self.samples * factor)

    @classmethod
    def zeros(cls, grid: TimeGrid) -> "FieldEnvelope":
        return cls(grid, np.zeros(grid.n, dtype=complex))


def make_gaussian_pulse(center: float, width: float, amplitude: complex, grid: TimeGrid) -> FieldEnvelope:
    """``amplitude * exp(-(t - center)**2 / (2 width**2))`` sampled on ``grid``.

    The pulse must be resolved (``width > 4 dt``) and keep a five-sigma margin
    inside the grid on both sides.
    """
    if width <= 4 * grid.dt:
        raise GridTooCoarse(f"pulse width {width} must exceed 4*dt = {4 * grid.dt}")
    if center - 5 * width < grid.t0 or center + 5 * width > grid.t_end:
        raise PulseClipped(
            f"pulse at {center} +/- 5*{width} does not fit in [{grid.t0}, {grid.t_end}]"
        )
    t = grid.t
    return FieldEnvelope(grid, amplitude * np.exp(-((t - center) ** 2) / (2 * width**2)))


def forward_transform(f: FieldEnvelope) -> np.ndarray:
    """Spectrum on ``f.grid.frequency_grid()`` (centered ordering)."""
    g = f.grid
    w = g.frequency_grid().omega
    # sum_n A_n exp(i w_j t_n) dt with w_j t_n = w_j t0 + 2 pi j n / N
    spec = np.fft.fftshift(np.fft.ifft(f.samples)) * (g.n * g.dt)
    return spec * np.exp(1j * w * g.t0)


def inverse_transform(spectrum: np.ndarray, grid: TimeGrid) -> FieldEnvelope:
    w = grid.frequency_grid().omega
    spec = np.asarray(spectrum, dtype=complex) * np.exp(-1j * w * grid.t0)
    samples = np.fft.fft(np.fft.ifftshift(spec)) / (grid.n * grid.dt)
    return FieldEnvelope(grid, samples)


def spectrum_at(f: FieldEnvelope, omega) -> np.ndarray:
    """Evaluate the transform of the sampled envelope at arbitrary frequencies.

    Exact discrete-time sum, so it agrees with :func:`forward_transform` on the
    grid frequencies and interpolates band-limited signals between them.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    t = f.grid.t
    mask = f.samples != 0
    if not mask.any():
        return np.zeros(omega.shape, dtype=complex)
    lo, hi = np.flatnonzero(mask)[[0, -1]]
    tt, aa = t[lo : hi + 1], f.samples[lo : hi + 1]
    out = np.empty(omega.shape, dtype=complex)
    flat = omega.ravel()
    res = out.reshape(-1)
    for i0 in range(0, flat.size, 256):
        blk = flat[i0 : i0 + 256]
        res[i0 : i0 + 256] = np.exp(1j * np.outer(blk, tt)) @ aa
    return out * f.grid.dt


# ---------------------------------------------------------------------------
# control pulses


@dataclass(frozen=True)
class PulseShape:
    """Real control amplitude.

    ``rect-smoothed``: raised-cosine ramps of length ``edge`` inside
    ``[t_on, t_off]`` and a flat top in between.
    ``gaussian``: centred at ``(t_on + t_off)/2`` with rms width ``edge``.
    """

    kind: str
    amplitude: float
    t_on: float
    t_off: float
    edge: float

    def __post_init__(self):
        if self.kind not in ("rect-smoothed", "gaussian"):
            raise ValueError(f"unknown pulse kind {self.kind!r}")
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")
        if not self.t_off > self.t_on:
            raise ValueError(f"t_off ({self.t_off}) must exceed t_on ({self.t_on})")
        if not self.edge > 0:
            raise ValueError("edge must be positive")
        if self.kind == "rect-smoothed" and 2 * self.edge > self.t_off - self.t_on:
            raise ValueError("ramps longer than the pulse")

    @property
    def duration(self) -> float:
        return self.t_off - self.t_on

    @property
    def plateau(self) -> tuple[float, float]:
        if self.kind == "gaussian":
            c = 0.5 * (self.t_on + self.t_off)
            return (c, c)
        return (self.t_on + self.edge, self.t_off - self.edge)

    def with_(self, **changes) -> "PulseShape":
        d = dict(kind=self.kind, amplitude=self.amplitude, t_on=self.t_on, t_off=self.t_off, edge=self.edge)
        d.update(changes)
        return PulseShape(**d)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "gaussian":
            c = 0.5 * (self.t_on + self.t_off)
            return self.amplitude * np.exp(-((t - c) ** 2) / (2 * self.edge**2))
        up = np.clip((t - self.t_on) / self.edge, 0.0, 1.0)
        down = np.clip((self.t_off - t) / self.edge, 0.0, 1.0)
        ramp = 0.5 * (1 - np.cos(np.pi * np.minimum(up, down)))
        return self.amplitude * ramp

    def breakpoints(self) -> np.ndarray:
        """Instants where the intensity profile is not analytic."""
        if self.kind == "gaussian":
            return np.empty(0)
        return np.array([self.t_on, self.t_on + self.edge, self.t_off - self.edge, self.t_off])

    def _panels(self, t_from: float, t_to: float, per: int) -> np.ndarray:
        if self.kind == "gaussian":
            c = 0.5 * (self.t_on + self.t_off)
            lo, hi = max(t_from, c - 12 * self.edge), min(t_to, c + 12 * self.edge)
            if hi <= lo:
                return np.array([t_from, t_to])
            n = max(1, int(np.ceil((hi - lo) / self.edge * per)))
            inner = np.linspace(lo, hi, n + 1)
            return np.unique(np.concatenate([[t_from], inner, [t_to]]))
        bp = self.breakpoints()
        pts = [t_from, t_to] + [b for b in bp if t_from < b < t_to]
        pts = np.unique(pts)
        out = [pts[0]]
        for a, b in zip(pts[:-1], pts[1:]):
            ramp = (self.t_on <= a < self.t_on + self.edge) or (self.t_off - self.edge <= a < self.t_off)
            k = per if ramp else 1
            out.extend(np.linspace(a, b, k + 1)[1:])
        return np.asarray(out)


def _gl_sum(func, edges: np.ndarray) -> float:
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    x = (0.5 * (a + b))[:, None] + half[:, None] * _GL_X[None, :]
    return float(np.sum(half * (func(x) @ _GL_W)))


def pulse_area(p: PulseShape, t_from: float, t_to: float) -> float:
    """Integral of ``|Omega(t)|**2`` over ``[t_from, t_to]``.

    Composite Gauss-Legendre split at the ramp corners; refined until two
    successive estimates agree to 1e-12 relative.
    """
    if not t_to > t_from:
        raise InvalidWindow(f"empty window [{t_from}, {t_to}]")
    if p.amplitude == 0:
        return 0.0
    f = lambda t: p(t) ** 2  # noqa: E731
    per = 2
    prev = _gl_sum(f, p._panels(t_from, t_to, per))
    for _ in range(8):
        per *= 2
        cur = _gl_sum(f, p._panels(t_from, t_to, per))
        if abs(cur - prev) <= 1e-12 * max(abs(cur), 1e-300):
            return cur
        prev = cur
    return cur


def step_areas(p: PulseShape, edges: np.ndarray) -> np.ndarray:
    """``pulse_area`` over consecutive intervals ``[edges[i], edges[i+1]]``.

    Each interval is split at the pulse breakpoints so the per-step
    quadrature never straddles a corner of the ramp.
    """
    edges = np.asarray(edges, dtype=float)
    if p.amplitude == 0:
        return np.zeros(edges.size - 1)
    bp = p.breakpoints()
    if p.kind == "gaussian":
        c = 0.5 * (p.t_on + p.t_off)
        bp = c + p.edge * np.arange(-12, 12.5, 0.5)
    bp = bp[(bp > edges[0]) & (bp < edges[-1])]
    allpts = np.union1d(edges, bp)
    idx = np.searchsorted(allpts, edges)
    a, b = allpts[:-1], allpts[1:]
    half = 0.5 * (b - a)
    x = (0.5 * (a + b))[:, None] + half[:, None] * _GL_X[None, :]
    sub = half * ((p(x) ** 2) @ _GL_W)
    return np.add.reduceat(sub, idx[:-1]) if sub.size else np.zeros(edges.size - 1)


@dataclass(frozen=True)
class ControlSchedule:
    """Write, rephase and read controls plus optional pi-pulse instants.

    ``T_a``: end of writing; ``T_s``: end of dark storage; ``T_R``: rephasing
    window length, so the read control may start at ``T_s + T_R``.
    """

    write: PulseShape
    rephase: PulseShape
    read: PulseShape
    T_a: float
    T_s: float
    T_R: float
    pi_pulses: Optional[tuple[float, float]] = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        w, r, d = self.write, self.rephase, self.read
        tol = 1e-9 * max(1.0, abs(self.T_s + self.T_R))
        if not w.t_off <= self.T_a + tol:
            raise ScheduleInvalid(f"write control must be off by T_a: t_off={w.t_off} > T_a={self.T_a}")
        if not self.T_a < self.T_s:
            raise ScheduleInvalid(f"T_a ({self.T_a}) must precede T_s ({self.T_s})")
        if not self.T_s <= r.t_on + tol:
            raise ScheduleInvalid(f"rephase must start after T_s: t_on={r.t_on} < T_s={self.T_s}")
        if not r.t_off <= self.T_s + self.T_R + tol:
            raise ScheduleInvalid(
                f"rephase must end by T_s + T_R = {self.T_s + self.T_R}, got t_off={r.t_off}"
            )
        if not self.T_s + self.T_R <= d.t_on + tol:
            raise ScheduleInvalid(f"read must start after T_s + T_R = {self.T_s + self.T_R}, got {d.t_on}")
        if self.pi_pulses is not None:
            t1, t2 = self.pi_pulses
            if not (self.T_a <= t1 < r.t_on):
                raise ScheduleInvalid(f"first pi-pulse at {t1} must lie in [T_a, rephase.t_on)")
            if not (r.t_off < t2 < d.t_on):
                raise ScheduleInvalid(f"second pi-pulse at {t2} must lie in (rephase.t_off, read.t_on)")

    def replace(self, **changes) -> "ControlSchedule":
        d = dict(
            write=self.write, rephase=self.rephase, read=self.read, T_a=self.T_a,
            T_s=self.T_s, T_R=self.T_R, pi_pulses=self.pi_pulses,
        )
        d.update(changes)
        return ControlSchedule(**d)
