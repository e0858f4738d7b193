"""Frequency-domain solution of write, storage and backward echo emission.

Every expression here is linear in the signal.  The stored coherence is kept
in closed form (``StoredState.imprint`` plus a scalar Stark area and a global
phase) so the echo can be evaluated at any frequency, while per-node arrays on
an ensemble x depth grid are carried alongside for comparison with the
time-domain integrator.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.special import roots_legendre

from .ensemble import (
    EnsembleGrid,
    RamanMap,
    chi as ensemble_chi,
    detuning_of_frequency,
    two_photon_shift,
)
from .errors import (
    BandwidthExceedsComb,
    DepthQuadratureNotConverged,
    DepthTooLowForAsymptotic,
    QuadratureNotConverged,
)
from .signals import FieldEnvelope, PulseShape, forward_transform, inverse_transform, pulse_area, spectrum_at


@dataclass(frozen=True)
class ProtocolParams:
    """Physical constants of a run (normalised units).

    ``delta2`` defaults to ``delta1``; ``omega_ref`` defaults to the peak
    frequency ``Delta21 - Omega1**2/Delta1`` once the control amplitude is known.
    """

    beta: float
    g: float = 1.0
    gamma: float = 1e-5
    L: float = 1.0
    delta1: float = 20.0
    delta2: Optional[float] = None
    delta21: float = 1.8
    kappa_slope: float = 0.0
    omega_ref: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.gamma <= 1e-4:
            raise ValueError(f"gamma must lie in (0, 1e-4], got {self.gamma}")
        if self.delta2 is None:
            object.__setattr__(self, "delta2", self.delta1)
        if self.delta2 != self.delta1:
            raise ValueError("retrieval requires Delta2 == Delta1")
        if self.beta < 0 or self.g <= 0 or self.L <= 0:
            raise ValueError("beta >= 0, g > 0 and L > 0 required")

    def raman_map(self, omega1: float, width: float = 1.0) -> RamanMap:
        return RamanMap(self.delta1, self.delta21, omega1, width)

    def reference_frequency(self, omega1: float) -> float:
        if self.omega_ref is not None:
            return self.omega_ref
        return self.delta21 - omega1**2 / self.delta1

    def with_(self, **changes) -> "ProtocolParams":
        return replace(self, **changes)


# ---------------------------------------------------------------------------
# absorption kernel

_KERNEL_ORDER = 96


def _kernel_once(omega, dist, m, g, gamma, order):
    x, w = roots_legendre(order)
    lo, hi = dist.support
    w_lo, w_hi = two_photon_shift(lo, m), two_photon_shift(hi, m)

    def H(freq):
        inside = (freq > w_lo) & (freq < w_hi)
        out = np.zeros(freq.shape)
        if inside.any():
            out[inside] = dist.pdf(detuning_of_frequency(freq[inside], m))
        return out

    a = w_lo - omega
    b = w_hi - omega
    h = 1e-3 * (w_hi - w_lo)
    inside = (a < 0) & (b > 0)
    H0 = np.where(inside, H(omega), 0.0)
    H1 = np.where(inside & (a < -h) & (b > h), (H(omega + h) - H(omega - h)) / (2 * h), 0.0)

    def remainder(y_lo, y_hi):
        half = 0.5 * (y_hi - y_lo)
        y = (0.5 * (y_lo + y_hi))[:, None] + half[:, None] * x[None, :]
        r = (H(omega[:, None] + y) - H0[:, None] - H1[:, None] * y) / (gamma + 1j * y)
        return half * (r @ w)

    split = np.where(inside, 0.0, a)
    total = remainder(a, split) + remainder(split, b)
    # analytic pieces of the subtracted Lorentzian
    I0 = -1j * (np.log(gamma + 1j * b) - np.log(gamma + 1j * a))
    I1 = -1j * ((b - a) - gamma * I0)
    return (total + H0 * I0 + H1 * I1) / g


def susceptibility_kernel(omega, e: EnsembleGrid, p: ProtocolParams, omega1: float, order: int = _KERNEL_ORDER):
    """Absorption kernel ``B1(w)`` of the Stark-shifted Raman line.

    ``B1(w) = (1/g) |Omega1|^2 < 1 / ((Delta1 + Delta)^2 (gamma + i(dw1(Delta) - w))) >``.
    The average is done in the two-photon frequency variable with the exact
    Jacobian; the near-pole part is subtracted and integrated analytically so
    that ``gamma -> 0`` is harmless.  ``Re B1 = (pi/g) G(Delta(w))`` up to
    O(gamma) and is never negative.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    m = p.raman_map(omega1)
    if omega1 == 0:
        return np.zeros(omega.shape, dtype=complex)
    dist = e.distribution
    if dist is None or dist.is_point_mass:
        x = 1.0 / (p.delta1 + e.nodes)
        dw = two_photon_shift(e.nodes, m)
        terms = e.weights * omega1**2 * x**2 / (p.gamma + 1j * (dw[None, :] - omega[:, None]))
        return terms.sum(axis=1) / p.g
    flat = omega.ravel()
    coarse = _kernel_once(flat, dist, m, p.g, p.gamma, order)
    fine = _kernel_once(flat, dist, m, p.g, p.gamma, 2 * order)
    scale = np.pi * dist.pdf(dist.center) / p.g
    err = np.abs(fine - coarse) / np.maximum(np.abs(fine), scale)
    if np.any(err > 1e-6):
        raise QuadratureNotConverged(f"B1 refinement mismatch {err.max():.2e}")
    return fine.reshape(omega.shape)


def optical_depth(e: EnsembleGrid, p: ProtocolParams, omega1: float) -> float:
    """``beta * L * Re B1(w_o)``."""
    w0 = p.raman_map(omega1).peak_frequency
    return float(p.beta * p.L * susceptibility_kernel(w0, e, p, omega1)[0].real)


def beta_for_depth(depth: float, e: EnsembleGrid, p: ProtocolParams, omega1: float) -> float:
    w0 = p.raman_map(omega1).peak_frequency
    return depth / (p.L * susceptibility_kernel(w0, e, p.with_(beta=1.0), omega1)[0].real)


def phase_mismatch(omega, e: EnsembleGrid, p: ProtocolParams, omega1: float):
    """``dk(w) = -beta * chi + kappa' (w - w_ref)``."""
    c = ensemble_chi(e, p.delta1)
    return -p.beta * c + p.kappa_slope * (np.asarray(omega) - p.reference_frequency(omega1))


def kernel_slope(e: EnsembleGrid, p: ProtocolParams, omega1: float, step: float) -> complex:
    """Central difference of ``B1`` at the reference frequency."""
    w = p.reference_frequency(omega1)
    b = susceptibility_kernel(np.array([w - step, w + step]), e, p, omega1)
    return complex((b[1] - b[0]) / (2 * step))


def dispersion_delay(e: EnsembleGrid, p: ProtocolParams, omega1: float, step: float) -> float:
    """``dtau = (g/pi) (Im B1'(w') - kappa'/beta) / G(Delta(w'))``."""
    m = p.raman_map(omega1)
    w = p.reference_frequency(omega1)
    G = float(e.distribution.pdf(detuning_of_frequency(w, m)))
    slope = kernel_slope(e, p, omega1, step).imag
    return p.g / (np.pi * G) * (slope - p.kappa_slope / p.beta)


def null_delay_slope(e: EnsembleGrid, p: ProtocolParams, omega1: float, step: float) -> float:
    """Phase-matching slope that makes :func:`dispersion_delay` vanish."""
    return p.beta * kernel_slope(e, p, omega1, step).imag


# ---------------------------------------------------------------------------
# storage


def storage_transform(spectrum, omega, z, e: EnsembleGrid, p: ProtocolParams, omega1: float, kernel=None):
    """Propagate a signal spectrum to depth ``z``:
    ``A(w, z) = exp{(beta/2)[i chi - B1(w)] z} A(w, 0)``."""
    if not 0 <= z <= p.L:
        raise ValueError(f"depth {z} outside [0, {p.L}]")
    B = susceptibility_kernel(omega, e, p, omega1) if kernel is None else kernel
    c = ensemble_chi(e, p.delta1)
    return np.exp(0.5 * p.beta * (1j * c - B) * z) * np.asarray(spectrum)


@dataclass(frozen=True)
class Imprint:
    """Closed form of the written coherence, free of storage dephasing.

    ``I(Delta, z) = i Omega1 x exp(-i x W0) A1(dw1(Delta), z)`` with
    ``x = 1/(Delta1 + Delta)`` and ``W0`` the write area extrapolated back to
    ``t = 0`` from the plateau (the Fourier time origin).
    """

    signal: FieldEnvelope
    params: ProtocolParams
    ensemble: EnsembleGrid
    omega1: float
    w0_area: float

    def __call__(self, delta, z) -> np.ndarray:
        delta = np.asarray(delta, dtype=float)
        z = np.asarray(z, dtype=float)
        p = self.params
        m = p.raman_map(self.omega1)
        x = 1.0 / (p.delta1 + delta)
        dw = two_photon_shift(delta, m)
        A0 = spectrum_at(self.signal, dw)
        B = susceptibility_kernel(dw, self.ensemble, p, self.omega1)
        c = ensemble_chi(self.ensemble, p.delta1)
        prop = np.exp(0.5 * p.beta * (1j * c - B)[..., None] * z)
        base = 1j * self.omega1 * x * np.exp(-1j * x * self.w0_area) * A0
        return base[..., None] * prop


@dataclass(frozen=True)
class StoredState:
    """Coherence ``R12[k, j] = exp(-i phase) exp(i x_k stark_area) imprint[k, j]``."""

    nodes: np.ndarray
    depths: np.ndarray
    coherence: np.ndarray
    imprint: np.ndarray
    stark_area: float
    global_phase: float
    time: float
    stage: str
    source: Optional[Imprint] = field(default=None, repr=False, compare=False)

    def evolved(self, *, d_global: float, d_stark: float, time: float, stage: str, delta1: float) -> "StoredState":
        x = 1.0 / (delta1 + self.nodes)
        factor = np.exp(-1j * d_global + 1j * x * d_stark)
        return replace(
            self,
            coherence=self.coherence * factor[:, None],
            stark_area=self.stark_area + d_stark,
            global_phase=self.global_phase + d_global,
            time=time,
            stage=stage,
        )

    def continuous(self, delta, z) -> np.ndarray:
        """Coherence at arbitrary detunings from the closed form."""
        x = 1.0 / (self.source.params.delta1 + np.asarray(delta, dtype=float))
        ph = np.exp(-1j * self.global_phase + 1j * x * self.stark_area)
        return ph[..., None] * self.source(delta, z)


def write_reference(write: PulseShape) -> float:
    """Extrapolated pre-origin write area ``W(t_ref) - Omega1^2 t_ref`` (plateau midpoint)."""
    lo, hi = write.plateau
    t_ref = 0.5 * (lo + hi)
    return pulse_area(write, write.t_on, t_ref) - write.amplitude**2 * t_ref


def check_signal_band(signal: FieldEnvelope, e: EnsembleGrid, m: RamanMap, write: PulseShape) -> None:
    """Raise :class:`BandwidthExceedsComb` unless the signal sits on the flat
    part of the write control and inside the mapped Raman band (<= 1e-6 and
    <= 1% of its energy outside, respectively)."""
    if signal.energy == 0:
        return
    weight = np.abs(signal.samples) ** 2
    lo, hi = write.plateau
    t = signal.grid.t
    if weight[(t < lo) | (t > hi)].sum() > 1e-6 * weight.sum():
        raise BandwidthExceedsComb("signal is not contained in the flat part of the write control", stage="write")
    spec = forward_transform(signal)
    freq = signal.grid.frequency_grid().omega
    s_lo, s_hi = e.distribution.support
    band = (freq > two_photon_shift(s_lo, m)) & (freq < two_photon_shift(s_hi, m))
    power = np.abs(spec) ** 2
    if power[~band].sum() > 0.01 * power.sum():
        raise BandwidthExceedsComb(
            "more than 1% of the signal energy lies outside the mapped Raman band", stage="write"
        )


def stored_coherence(
    signal: FieldEnvelope,
    e: EnsembleGrid,
    p: ProtocolParams,
    write: PulseShape,
    T_a: float,
    depths,
) -> StoredState:
    """Coherence left in the medium at ``T_a`` once the write control is off.

    Node ``k`` at depth ``z`` holds the propagated signal spectrum evaluated
    at its own two-photon frequency, times the drive prefactor and the Stark
    dephasing accumulated under the write control.
    """
    omega1 = write.amplitude
    check_signal_band(signal, e, p.raman_map(omega1), write)
    depths = np.asarray(depths, dtype=float)
    src = Imprint(signal, p, e, omega1, write_reference(write))
    imprint = src(e.nodes, depths)
    W = pulse_area(write, write.t_on, max(T_a, write.t_on + 1e-12))
    state = StoredState(
        nodes=e.nodes, depths=depths, coherence=imprint, imprint=imprint,
        stark_area=0.0, global_phase=0.0, time=0.0, stage="imprint", source=src,
    )
    return state.evolved(d_global=p.delta21 * T_a, d_stark=W, time=T_a, stage="post-write", delta1=p.delta1)


def dark_phase(s: StoredState, t_from: float, t_to: float, p: ProtocolParams) -> StoredState:
    """Free precession with every control off: a node-independent phase."""
    if not t_to >= t_from:
        raise ValueError("dark interval must not run backwards")
    return s.evolved(d_global=p.delta21 * (t_to - t_from), d_stark=0.0, time=t_to, stage="post-dark", delta1=p.delta1)


# ---------------------------------------------------------------------------
# echo


@dataclass(frozen=True)
class EchoTiming:
    """Echo delay and the global phase ``exp(-i phase)`` of the replica."""

    delay: float
    phase: float


def read_onset(read: PulseShape) -> tuple[float, float]:
    """Start of the read plateau and the area of its ramp."""
    t_p = read.plateau[0]
    return t_p, pulse_area(read, read.t_on, t_p) if t_p > read.t_on else 0.0


def _gl_depth(order, L):
    x, w = roots_legendre(order)
    return 0.5 * L * (x + 1), 0.5 * L * w


def echo_spectrum_finite_depth(
    omega,
    s: StoredState,
    e: EnsembleGrid,
    p: ProtocolParams,
    read: PulseShape,
    depth_order: int = 64,
):
    """Backward echo spectrum at the exit face ``z = 0``.

    Solves ``-dA2/dz = (beta/2)(i chi - B1) A2 + S(w, z)`` with ``A2(L) = 0``
    by Gauss-Legendre quadrature of the source against the integrating factor.
    The source collapses the ensemble average onto the atoms resonant with
    ``w`` (the echo is emitted long after the read onset, so the full-line
    density applies).  Returned spectrum uses the absolute time origin.
    """
    if s.stage != "post-rephase":
        from .errors import WrongStage

        raise WrongStage(f"echo needs a post-rephase state, got {s.stage}", stage="read")
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    omega2 = read.amplitude
    m2 = p.raman_map(omega2)
    if omega2 == 0 or s.source is None:
        return np.zeros(omega.shape, dtype=complex)
    lo, hi = e.distribution.support
    band = (omega > two_photon_shift(lo, m2)) & (omega < two_photon_shift(hi, m2))
    out = np.zeros(omega.shape, dtype=complex)
    if not band.any():
        return out
    w = omega[band]
    delta = detuning_of_frequency(w, m2)
    x = 1.0 / (p.delta1 + delta)
    G = e.distribution.pdf(delta)
    t_p, Q = read_onset(read)
    B = susceptibility_kernel(w, e, p.with_(delta1=p.delta2), omega2)
    c = ensemble_chi(e, p.delta2)
    a = 0.5 * p.beta * (1j * c - B)
    dk = phase_mismatch(w, e, p, s.source.omega1)
    phase0 = np.exp(-1j * (s.global_phase + p.delta21 * (t_p - s.time)) + 1j * x * (s.stark_area + Q))

    def integral(order):
        z, wz = _gl_depth(order, p.L)
        R0 = phase0[:, None] * s.source(delta, z) * np.exp(1j * dk[:, None] * z[None, :])
        src = 1j * 0.5 * p.beta * (omega2 / p.g) * 2 * np.pi * G[:, None] * R0 / (omega2**2 * x[:, None])
        return (np.exp(a[:, None] * z[None, :]) * src) @ wz

    coarse = integral(depth_order)
    fine = integral(2 * depth_order)
    scale = max(np.abs(fine).max(), 1e-300)
    if np.abs(fine - coarse).max() > 1e-6 * scale:
        raise DepthQuadratureNotConverged(
            f"depth quadrature mismatch {np.abs(fine - coarse).max() / scale:.2e}", stage="read"
        )
    out[band] = fine * np.exp(1j * w * t_p)
    return out


def echo_transfer_asymptotic(omega, e: EnsembleGrid, p: ProtocolParams, omega1: float, timing: EchoTiming):
    """Infinite-depth transfer function

    ``T(w) = -exp(-i phase + i w D) (pi/g) G(Delta(w)) / (B1(w) - i[chi + dk(w)/beta])``.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    m = p.raman_map(omega1)
    lo, hi = e.distribution.support
    band = (omega > two_photon_shift(lo, m)) & (omega < two_photon_shift(hi, m))
    T = np.zeros(omega.shape, dtype=complex)
    w = omega[band]
    G = e.distribution.pdf(detuning_of_frequency(w, m))
    B = susceptibility_kernel(w, e, p, omega1)
    c = ensemble_chi(e, p.delta1)
    dk = phase_mismatch(w, e, p, omega1)
    T[band] = -np.exp(-1j * timing.phase + 1j * w * timing.delay) * (np.pi / p.g) * G / (B - 1j * (c + dk / p.beta))
    return T


def echo_spectrum_asymptotic(spectrum, omega, e: EnsembleGrid, p: ProtocolParams, omega1: float, timing: EchoTiming):
    if optical_depth(e, p, omega1) < 10:
        raise DepthTooLowForAsymptotic("asymptotic echo needs optical depth >= 10", stage="read")
    return echo_transfer_asymptotic(omega, e, p, omega1, timing) * np.asarray(spectrum)


def echo_time_trace(spectrum, grid) -> FieldEnvelope:
    """Echo envelope from either echo spectrum."""
    return inverse_transform(spectrum, grid)
