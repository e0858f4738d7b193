"""Time-domain Maxwell-Bloch integrator for the whole storage protocol.

Method of lines on a depth grid of ``m + 1`` points.  In time the coherence
uses an exponential integrator (the homogeneous rotation over a step is
exact, the drive is treated by the trapezoid rule); in depth the field is
advanced by the trapezoid rule, which leaves one scalar linear equation per
slice.  Both directions are second order.

The backward read is the same march on the reflected depth axis.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numba
import numpy as np

from .amr import RephasePlan
from .ensemble import EnsembleGrid, RamanMap, two_photon_shift
from .errors import ScheduleInvalid, StepTooCoarse, UnstableGrowth, WrongStage
from .signals import ControlSchedule, FieldEnvelope, TimeGrid, pulse_area, step_areas
from .spectral import ProtocolParams, phase_mismatch

from .ensemble import chi as ensemble_chi


@numba.njit(cache=True, nogil=True)
def _static_profile(a0, R, x, w, omega, beta, chi, g, dz, out):
    """Field along depth at one instant for given coherences (no time step)."""
    m1 = R.shape[0]
    M = R.shape[1]
    c = 0.5j * beta
    out[0] = a0
    pol = 0j
    for k in range(M):
        pol += w[k] * x[k] * R[0, k]
    F = c * (chi * out[0] + omega / g * pol)
    for j in range(1, m1):
        pol = 0j
        for k in range(M):
            pol += w[k] * x[k] * R[j, k]
        rhs = out[j - 1] + 0.5 * dz * (F + c * omega / g * pol)
        out[j] = rhs / (1.0 - 0.5 * dz * c * chi)
        F = c * (chi * out[j] + omega / g * pol)


@numba.njit(cache=True, nogil=True)
def _march(a_in, omega, areas, R, x, w, delta21, dt, beta, chi, g, dz, a_prev, phase):
    """Advance coherences ``R[j, k]`` and the field through ``len(areas)`` steps.

    ``a_in[n]`` is the field entering at depth index 0, ``omega[n]`` the
    control amplitude at sample ``n`` and ``areas[n]`` the exact integral of
    ``omega**2`` over step ``n``.  ``a_prev`` holds the depth profile at the
    first sample and is overwritten with the final one.  ``phase[k]``
    accumulates the rotation applied to node ``k``.  Returns the field
    leaving at the last depth index for every sample, and the largest
    coherence magnitude seen.
    """
    m1 = R.shape[0]
    M = R.shape[1]
    nsteps = areas.shape[0]
    out = np.empty(nsteps + 1, dtype=np.complex128)
    out[0] = a_prev[m1 - 1]
    c = 0.5j * beta
    K = 0.0
    for k in range(M):
        K += w[k] * x[k] * x[k]
    rot = np.empty(M, dtype=np.complex128)
    a_new = np.empty(m1, dtype=np.complex128)
    peak = 0.0
    for n in range(nsteps):
        o0 = omega[n]
        o1 = omega[n + 1]
        for k in range(M):
            ph = delta21 * dt - x[k] * areas[n]
            phase[k] += ph
            rot[k] = np.cos(ph) - 1j * np.sin(ph)
        # implicit part of the slice equation: A multiplies this in F_{j}
        alpha = c * (chi + o1 / g * 0.5 * dt * 1j * o1 * K)
        denom = 1.0 - 0.5 * dz * alpha
        F = 0j
        for j in range(m1):
            s_old = 1j * o0 * a_prev[j]
            known = 0j
            for k in range(M):
                known += w[k] * x[k] * rot[k] * (R[j, k] + 0.5 * dt * s_old * x[k])
            if j == 0:
                a = a_in[n + 1]
            else:
                a = (a_new[j - 1] + 0.5 * dz * (F + c * o1 / g * known)) / denom
            a_new[j] = a
            F = alpha * a + c * o1 / g * known
            s_new = 0.5 * dt * 1j * o1 * a
            for k in range(M):
                r = rot[k] * (R[j, k] + 0.5 * dt * s_old * x[k]) + s_new * x[k]
                R[j, k] = r
                mag = abs(r)
                if mag > peak:
                    peak = mag
        for j in range(m1):
            a_prev[j] = a_new[j]
        out[n + 1] = a_new[m1 - 1]
    return out, peak


@dataclass(frozen=True)
class DepthGrid:
    m_slices: int = 128
    L: float = 1.0

    def __post_init__(self):
        if self.m_slices < 32:
            raise ValueError(f"need at least 32 depth slices, got {self.m_slices}")

    @property
    def dz(self) -> float:
        return self.L / self.m_slices

    @property
    def z(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.m_slices + 1)

    def refined(self, factor: int = 2) -> "DepthGrid":
        return DepthGrid(self.m_slices * factor, self.L)


@dataclass(frozen=True)
class MediumState:
    """Coherences ``R12[k, j]`` (node ``k``, depth ``z_j``) and bookkeeping.

    ``phase[k]`` is the total rotation the integrator has applied to node
    ``k``, so ``R12 * exp(i phase)`` is the coherence as written, stripped of
    all subsequent free and Stark precession.
    """

    R12: np.ndarray
    phase: np.ndarray
    time: float
    stage: str
    depths: np.ndarray
    R14: Optional[np.ndarray] = None
    rho2: float = 0.0
    rho4: float = 0.0
    peak: float = 0.0

    @property
    def imprint(self) -> np.ndarray:
        return self.R12 * np.exp(1j * self.phase)[:, None]


@dataclass(frozen=True)
class WriteResult:
    transmitted: FieldEnvelope
    state: MediumState


def _ceiling(A: FieldEnvelope, e: EnsembleGrid, p: ProtocolParams, omega1: float) -> float:
    """Linear-response bound on ``|R12|`` used for the growth guard."""
    x = 1.0 / (p.delta1 + e.nodes)
    return float(omega1 * np.max(np.abs(x)) * np.sum(np.abs(A.samples)) * A.grid.dt) + 1e-300


def _check_step(grid: TimeGrid, e: EnsembleGrid, m: RamanMap, stage: str):
    dw = np.abs(two_photon_shift(e.nodes, m))
    if grid.dt * dw.max() >= 0.5:
        raise StepTooCoarse(f"dt * max|dw| = {grid.dt * dw.max():.3f} >= 0.5", stage=stage)


def _window(grid: TimeGrid, t_from: float, t_to: float) -> tuple[int, int]:
    i0 = int(np.floor((t_from - grid.t0) / grid.dt + 1e-9))
    i1 = int(np.ceil((t_to - grid.t0) / grid.dt - 1e-9))
    i0 = max(i0, 0)
    if i1 > grid.n - 1:
        raise ScheduleInvalid(f"time grid ends at {grid.t_end}, before {t_to}")
    return i0, i1


def _run_stage(a_in, pulse, grid, i0, i1, R, phase, e, p, depth, stage):
    t = grid.t[i0 : i1 + 1]
    omega = pulse(t).astype(float)
    areas = step_areas(pulse, t)
    x = 1.0 / (p.delta1 + e.nodes)
    chi = ensemble_chi(e, p.delta1)
    a_prev = np.empty(depth.m_slices + 1, dtype=complex)
    _static_profile(complex(a_in[0]), R, x, e.weights, float(omega[0]), p.beta, chi, p.g, depth.dz, a_prev)
    out, peak = _march(
        np.ascontiguousarray(a_in, dtype=complex), omega, areas, R, x, e.weights,
        p.delta21, grid.dt, p.beta, chi, p.g, depth.dz, a_prev, phase,
    )
    return out, peak


def integrate_write(
    A1_in: FieldEnvelope,
    schedule: ControlSchedule,
    e: EnsembleGrid,
    p: ProtocolParams,
    depth: DepthGrid,
) -> WriteResult:
    """March the forward signal through the medium while the write control is on.

    Runs from the first grid sample at or before ``write.t_on`` to the first
    sample at or after ``T_a``; returns the field at ``z = L`` on the full grid
    (zero outside the window) and the medium left behind.
    """
    grid = A1_in.grid
    w = schedule.write
    _check_step(grid, e, p.raman_map(w.amplitude), "write")
    i0, i1 = _window(grid, w.t_on, schedule.T_a)
    if np.any(A1_in.samples[:i0] != 0) or np.any(A1_in.samples[i1 + 1 :] != 0):
        mass = np.sum(np.abs(A1_in.samples[:i0]) ** 2) + np.sum(np.abs(A1_in.samples[i1 + 1 :]) ** 2)
        if mass > 1e-20 * np.sum(np.abs(A1_in.samples) ** 2):
            raise ScheduleInvalid("input field extends outside the write window", stage="write")
    R = np.zeros((depth.m_slices + 1, e.count), dtype=complex)
    phase = np.zeros(e.count)
    # rotation from the Fourier origin to the window start is a global phase
    phase += p.delta21 * grid.t[i0]
    R_out, peak = _run_stage(A1_in.samples[i0 : i1 + 1], w, grid, i0, i1, R, phase, e, p, depth, "write")
    ceiling = _ceiling(A1_in, e, p, w.amplitude)
    if not np.isfinite(peak) or peak > 10 * ceiling:
        raise UnstableGrowth(f"|R12| reached {peak:.3e}, ceiling {ceiling:.3e}", stage="write")
    trans = np.zeros(grid.n, dtype=complex)
    trans[i0 : i1 + 1] = R_out
    state = MediumState(R.T.copy(), phase, float(grid.t[i1]), "post-write", depth.z, peak=peak)
    return WriteResult(FieldEnvelope(grid, trans), state)


def _free(state: MediumState, t_to: float, p: ProtocolParams) -> MediumState:
    ph = p.delta21 * (t_to - state.time)
    rot = np.exp(-1j * ph)
    R14 = None if state.R14 is None else state.R14 * rot
    return replace(state, R12=state.R12 * rot, R14=R14, phase=state.phase + ph, time=t_to)


def integrate_dark(state: MediumState, t_from: float, t_to: float, p: ProtocolParams) -> MediumState:
    """Free precession with all controls off: a node-independent rotation."""
    if state.stage != "post-write":
        raise WrongStage(f"dark storage needs a post-write state, got {state.stage}", stage="dark")
    if t_to < t_from:
        raise ValueError("dark interval must not run backwards")
    return replace(_free(replace(state, time=t_from), t_to, p), stage="post-dark")


def _free_phase(state, e, p, pulse, t_from, t_to, steps_per_unit):
    """Per-node phase of ``dR/dt = -i (Delta21 + x |Omega|^2) R`` stepped over
    ``[t_from, t_to]`` with exact per-step areas."""
    if t_to <= t_from:
        return np.zeros(e.count)
    n = max(8, int(np.ceil((t_to - t_from) * steps_per_unit)))
    edges = np.linspace(t_from, t_to, n + 1)
    areas = step_areas(pulse, edges)
    x = 1.0 / (p.delta1 + e.nodes)
    h = np.diff(edges)
    return np.sum(p.delta21 * h) + x * np.sum(areas)


def integrate_rephase(
    state: MediumState,
    plan: RephasePlan,
    e: EnsembleGrid,
    p: ProtocolParams,
    steps_per_unit: float = 4.0,
) -> MediumState:
    """Integrate the rephase-stage rotation node by node.

    The rephase control only shifts each node's frequency, so the solution
    over one step is a rotation by the step's phase.  Steps are summed in a
    fixed order; the pulse envelope enters through exact per-step areas.
    """
    if state.stage != "post-dark":
        raise WrongStage(f"rephasing needs a post-dark state, got {state.stage}", stage="rephase")
    ph = _free_phase(state, e, p, plan.pulse, state.time, plan.t_end, steps_per_unit)
    rot = np.exp(-1j * ph)[:, None]
    R14 = None if state.R14 is None else state.R14 * rot
    return replace(
        state, R12=state.R12 * rot, R14=R14, phase=state.phase + ph, time=plan.t_end, stage="post-rephase"
    )


def read_phase_profile(state: MediumState, e: EnsembleGrid, p: ProtocolParams, omega1: float) -> np.ndarray:
    """``exp{i dk(dw1(Delta_k)) z_j}`` imprinted on the coherence for the backward read."""
    m = p.raman_map(omega1)
    dk = phase_mismatch(two_photon_shift(e.nodes, m), e, p, omega1)
    return np.exp(1j * np.outer(dk, state.depths))


def integrate_read(
    state: MediumState,
    schedule: ControlSchedule,
    e: EnsembleGrid,
    p: ProtocolParams,
    depth: DepthGrid,
    grid: TimeGrid,
) -> FieldEnvelope:
    """Backward echo leaving at ``z = 0`` from the read onset to the grid end."""
    if state.stage != "post-rephase":
        raise WrongStage(f"read needs a post-rephase state, got {state.stage}", stage="read")
    r = schedule.read
    _check_step(grid, e, p.raman_map(r.amplitude), "read")
    i0, _ = _window(grid, r.t_on, r.t_on)
    if grid.t[i0] < state.time - 1e-9 * max(1.0, abs(state.time)):
        i0 = int(np.ceil((state.time - grid.t0) / grid.dt - 1e-9))
    i1 = grid.n - 1
    if i0 >= i1:
        raise ScheduleInvalid("time grid ends before the read starts", stage="read")
    t_start = float(grid.t[i0])
    x = 1.0 / (p.delta1 + e.nodes)
    # any part of the ramp that precedes the first read sample is a pure rotation
    stark = pulse_area(r, r.t_on, t_start) if t_start > r.t_on else 0.0
    free = p.delta21 * (t_start - state.time) - x * stark
    R0 = state.R12 * np.exp(-1j * free)[:, None] * read_phase_profile(state, e, p, schedule.write.amplitude)
    # reflect depth: the backward field enters at z = L
    R = np.ascontiguousarray(R0.T[::-1, :])
    phase = state.phase + free
    zeros = np.zeros(i1 - i0 + 1, dtype=complex)
    out, _ = _run_stage(zeros, r, grid, i0, i1, R, phase, e, p, depth, "read")
    echo = np.zeros(grid.n, dtype=complex)
    echo[i0:] = out
    return FieldEnvelope(grid, echo)


def pi_swap(state: MediumState, forward: bool) -> MediumState:
    """Ideal pi-pulse on the 2-4 transition.

    ``forward`` moves the coherence to level 4 (``R14 = -i R12``) and the
    return pulse, applied with the opposite carrier phase, brings it back
    (``R12 = +i R14``).  Populations of levels 2 and 4 are exchanged.
    """
    if forward:
        R14 = -1j * state.R12
        R12 = np.zeros_like(state.R12)
    else:
        R12 = 1j * state.R14
        R14 = np.zeros_like(state.R14)
    return replace(state, R12=R12, R14=R14, rho2=state.rho4, rho4=state.rho2)


@dataclass(frozen=True)
class FourLevelResult:
    echo: FieldEnvelope
    rho2_final: float
    rho2_flag: bool
    state: MediumState


def run_four_level(
    A1_in: FieldEnvelope,
    schedule: ControlSchedule,
    plan: RephasePlan,
    e: EnsembleGrid,
    p: ProtocolParams,
    depth: DepthGrid,
    noise_injection: float = 0.0,
    use_pi_pulses: bool = True,
    rng: Optional[np.random.Generator] = None,
    written: Optional[MediumState] = None,
) -> FourLevelResult:
    """Protocol with the storage coherence parked on the 1-4 transition during
    rephasing.  ``noise_injection`` is the population that spontaneous Raman
    scattering moves to level 2 during the rephase pulse, added as random
    increments drawn from ``rng`` with a fixed total.  The second
    pi-pulse moves it to level 4 before the read.  ``written`` reuses a
    post-write state from an earlier run of the same input."""
    rng = np.random.default_rng() if rng is None else rng
    kicks = noise_injection * rng.dirichlet(np.ones(16)) if noise_injection > 0 else np.zeros(0)
    if use_pi_pulses and schedule.pi_pulses is None:
        raise ScheduleInvalid("four-level run needs pi-pulse instants", stage="four-level")
    s = integrate_write(A1_in, schedule, e, p, depth).state if written is None else written
    if s.stage != "post-write":
        raise WrongStage(f"expected a post-write state, got {s.stage}", stage="four-level")
    if use_pi_pulses:
        t1, t2 = schedule.pi_pulses
        s = pi_swap(integrate_dark(s, s.time, t1, p), forward=True)
        # level 4 is taken degenerate with level 2 in the rotating frame, so
        # the parked coherence precesses and Stark-shifts exactly like R12
        s = integrate_rephase(_free(s, plan.t_start, p), plan, e, p)
        s = replace(s, rho2=s.rho2 + float(np.sum(kicks)))
        s = pi_swap(_free(s, t2, p), forward=False)
    else:
        s = integrate_rephase(integrate_dark(s, s.time, plan.t_start, p), plan, e, p)
        s = replace(s, rho2=s.rho2 + float(np.sum(kicks)))
    echo = integrate_read(s, schedule, e, p, depth, A1_in.grid)
    return FourLevelResult(echo, s.rho2, s.rho2 > 0, s)
