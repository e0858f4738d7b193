"""Rephasing bookkeeping: phase functional, rephase plans and echo timing."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.optimize import brentq

from .ensemble import EnsembleGrid, RamanMap
from .errors import NoRootInBracket, ScheduleInvalid, WrongStage
from .signals import ControlSchedule, PulseShape, pulse_area
from .spectral import EchoTiming, StoredState, read_onset, write_reference


def _area(p: PulseShape) -> float:
    return pulse_area(p, p.t_on, p.t_off) if p.amplitude > 0 else 0.0


@dataclass(frozen=True)
class RephasePlan:
    """One rephasing pulse with its phase-area bookkeeping.

    ``P_value`` is the rephase area minus the write area; ``theta`` the
    node-independent phase accumulated from the start of writing to the end
    of the rephase window.
    """

    pulse: PulseShape
    t_start: float
    T_R: float
    P_value: float
    theta: float
    mode: str

    @property
    def t_end(self) -> float:
        return self.t_start + self.T_R

    @property
    def area(self) -> float:
        return _area(self.pulse)


def phase_functional(schedule: ControlSchedule, delta1: float, delta21: float) -> tuple[float, float]:
    """Return ``(P, theta)`` for a schedule.

    ``P = int |Omega_R|^2 - int |Omega_1|^2`` and
    ``theta = Delta21 (T_s + T_R) + (R - W) / Delta1``, i.e. the integrals of
    ``delta_1 = Delta21 - |Omega_1|^2/Delta1`` up to ``T_s`` and of
    ``delta_R = Delta21 + |Omega_R|^2/Delta1`` over the rephase window.
    """
    schedule.validate()
    W = _area(schedule.write)
    R = _area(schedule.rephase)
    theta = delta21 * schedule.T_s - W / delta1 + delta21 * schedule.T_R + R / delta1
    return R - W, theta


def make_plan(schedule: ControlSchedule, delta1: float, delta21: float, rtol: float = 1e-9) -> RephasePlan:
    P, theta = phase_functional(schedule, delta1, delta21)
    ref = max(_area(schedule.write), _area(schedule.rephase), 1e-300)
    mode = "full-recovery" if abs(P) <= rtol * ref else "echo-preparation"
    return RephasePlan(schedule.rephase, schedule.T_s, schedule.T_R, P, theta, mode)


def apply_rephase(s: StoredState, plan: RephasePlan, e: EnsembleGrid, m: RamanMap) -> StoredState:
    """Closed-form rephasing: node ``k`` picks up ``exp{-i Delta21 T + i x_k (-R)}``
    with ``x_k = 1/(Delta1 + Delta_k)``, ``R`` the rephase area."""
    if s.stage != "post-dark":
        raise WrongStage(f"rephasing needs a post-dark state, got {s.stage}", stage="rephase")
    if plan.t_start < s.time - 1e-9 * max(1.0, abs(s.time)):
        raise WrongStage("rephase window starts before the stored state's time", stage="rephase")
    dark = plan.t_start - s.time
    return s.evolved(
        d_global=m.delta21 * (dark + plan.T_R),
        d_stark=-plan.area,
        time=plan.t_end,
        stage="post-rephase",
        delta1=m.delta1,
    )


Target = Union[str, tuple]


def solve_rephase_duration(
    target: Target,
    write: PulseShape,
    amplitude: float,
    edge: float | None = None,
    kind: str = "rect-smoothed",
) -> float:
    """Rephase pulse duration that sets ``P`` to the requested value.

    ``target`` is ``"full-recovery"`` (``P = 0``) or ``("echo-at", T)``
    (``P = |Omega_1|^2 T``).  Bisection (Brent) to machine precision.
    """
    if not amplitude > 0:
        raise ValueError("rephase amplitude must be positive")
    if target == "full-recovery":
        goal = 0.0
    elif isinstance(target, tuple) and target[0] == "echo-at":
        goal = write.amplitude**2 * float(target[1])
    else:
        raise ValueError(f"unknown target {target!r}")
    edge = write.edge if edge is None else edge
    W = _area(write)

    def f(T):
        return _area(PulseShape(kind, amplitude, 0.0, T, edge)) - W - goal

    lo = 2 * edge if kind == "rect-smoothed" else 1e-6 * edge
    hi = max(2 * lo, (W + goal) / amplitude**2 + 4 * edge)
    if f(lo) > 0:
        raise NoRootInBracket(f"target area {W + goal} is below the shortest admissible pulse", stage="rephase")
    for _ in range(60):
        if f(hi) >= 0:
            break
        hi *= 2
    else:
        raise NoRootInBracket("could not bracket the rephase duration", stage="rephase")
    return brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)


def optical_variant_scaling(omega_r: float, delta1: float) -> float:
    """``f_R = (Omega_R / Delta1)**2``: rate at which a far-detuned dressing pulse
    rephases an optical-transition coherence relative to the bare IB rate."""
    if delta1 == 0:
        raise ValueError("Delta1 must be nonzero")
    return (omega_r / delta1) ** 2


def echo_timing(schedule: ControlSchedule, delta21: float) -> EchoTiming:
    """Delay ``D`` and global phase ``Delta21 * D`` of the asymptotic echo.

    ``D = t_p + (P + W0 - Q) / |Omega_1|^2`` where ``t_p`` is the start of the
    read plateau, ``Q`` the area of its ramp, ``W0`` the write area
    extrapolated back to ``t = 0`` and ``P`` the phase functional.
    """
    w, r = schedule.write, schedule.read
    if not np.isclose(w.amplitude, r.amplitude, rtol=1e-12, atol=0):
        raise ScheduleInvalid("echo timing assumes equal write and read amplitudes", stage="read")
    if w.amplitude == 0:
        raise ScheduleInvalid("write control is off", stage="write")
    P = _area(schedule.rephase) - _area(w)
    t_p, Q = read_onset(r)
    D = t_p + (P + write_reference(w) - Q) / w.amplitude**2
    return EchoTiming(delay=D, phase=delta21 * D)
