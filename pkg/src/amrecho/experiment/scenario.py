"""Turn a :class:`RunConfig` into grids, pulses, schedule and parameters."""

from __future__ import annotations

from dataclasses import dataclass

from ..amr import RephasePlan, echo_timing, make_plan, solve_rephase_duration
from ..ensemble import Distribution, EnsembleGrid, RamanMap, make_ensemble
from ..errors import ConfigValidationError
from ..mbsolver import DepthGrid
from ..signals import ControlSchedule, FieldEnvelope, PulseShape, TimeGrid, make_gaussian_pulse
from ..spectral import (
    EchoTiming,
    ProtocolParams,
    beta_for_depth,
    check_signal_band,
    dispersion_delay,
    null_delay_slope,
    read_onset,
    write_reference,
)
from .config import RunConfig


@dataclass(frozen=True)
class Scenario:
    config: RunConfig
    ensemble: EnsembleGrid
    params: ProtocolParams
    omega1: float
    schedule: ControlSchedule
    plan: RephasePlan
    grid: TimeGrid
    depth: DepthGrid
    signal: FieldEnvelope
    timing: EchoTiming
    dtau: float

    @property
    def P(self) -> float:
        return self.plan.P_value

    @property
    def theta(self) -> float:
        return self.plan.theta


def _distribution(c: dict) -> Distribution:
    support = tuple(c["support"]) if c["support"] is not None else None
    if c["kind"] == "tabulated":
        if not c["file"]:
            raise ConfigValidationError("tabulated ensemble needs 'file'", stage="config")
        return Distribution.from_file(c["file"], width=c["width"], center=c["center"], support=support)
    return Distribution(kind=c["kind"], width=c["width"], center=c["center"], support=support)


def _signal(pulses: list, grid: TimeGrid) -> FieldEnvelope:
    out = FieldEnvelope.zeros(grid)
    for p in pulses:
        a = p["amplitude"]
        amp = complex(a[0], a[1]) if isinstance(a, list) else complex(a)
        out = out + make_gaussian_pulse(p["center"], p["width"], amp, grid)
    return out


def _auto_schedule(cfg: RunConfig, delta21: float) -> ControlSchedule:
    c = cfg.controls
    pulses = cfg.input["pulses"]
    o1, orr, edge = c["omega1"], c["omega_r"], c["edge"]
    first = min(pulses, key=lambda p: p["center"])
    last_edge = max(p["center"] + 5 * p["width"] for p in pulses)
    T_a = last_edge + c["write_hold"]
    write = PulseShape("rect-smoothed", o1, 0.0, T_a, edge)
    T_s = T_a + c["dark"]
    lead = 6 * first["width"] if c["echo_lead"] is None else c["echo_lead"]
    read_edge = PulseShape("rect-smoothed", o1, 0.0, 4 * edge, edge)
    _, Q = read_onset(read_edge)
    # echo of the earliest pulse appears ``lead`` after the read plateau starts
    P = o1**2 * (lead - first["center"]) - write_reference(write) + Q
    dur = solve_rephase_duration(("echo-at", P / o1**2), write, orr, edge)
    gap = 10.0
    rephase = PulseShape("rect-smoothed", orr, T_s, T_s + dur, edge)
    T_R = dur + gap
    t_read = T_s + T_R
    t_p = t_read + edge
    D = t_p + (P + write_reference(write) - Q) / o1**2
    end = max(p["center"] + D + 7 * p["width"] for p in pulses) + c["read_tail"]
    read = PulseShape("rect-smoothed", o1, t_read, end, edge)
    pi = (0.5 * (T_a + T_s), T_s + dur + 0.5 * gap) if c["pi_pulses"] else None
    return ControlSchedule(write, rephase, read, T_a, T_s, T_R, pi)


def _explicit_schedule(s: dict) -> ControlSchedule:
    mk = lambda d: PulseShape(d["kind"], d["amplitude"], d["t_on"], d["t_off"], d["edge"])  # noqa: E731
    pi = tuple(s["pi_pulses"]) if s.get("pi_pulses") is not None else None
    return ControlSchedule(mk(s["write"]), mk(s["rephase"]), mk(s["read"]), s["T_a"], s["T_s"], s["T_R"], pi)


def build_scenario(cfg: RunConfig) -> Scenario:
    pr = cfg.params
    dist = _distribution(cfg.ensemble)
    o1 = cfg.controls["omega1"] if cfg.schedule is None else cfg.schedule["write"]["amplitude"]
    try:
        m = RamanMap(pr["delta1"], pr["delta21"], o1, dist.width)
    except ValueError as exc:
        raise ConfigValidationError(str(exc), stage="config") from None
    dist.check_pole_clearance(pr["delta1"])
    e = make_ensemble(dist, cfg.ensemble["M"], panels=cfg.ensemble["panels"])
    if cfg.mode == "four-level" and cfg.solver == "spectral":
        raise ConfigValidationError("four-level mode needs the time-domain solver", stage="config")
    schedule = _auto_schedule(cfg, pr["delta21"]) if cfg.schedule is None else _explicit_schedule(cfg.schedule)
    if cfg.mode == "four-level" and cfg.controls["pi_pulses"] and schedule.pi_pulses is None:
        raise ConfigValidationError("four-level mode with pi-pulses needs pi-pulse instants", stage="config")
    grid = TimeGrid.covering(0.0, schedule.read.t_off + 10.0, cfg.grid["dt_max"])
    signal = _signal(cfg.input["pulses"], grid)
    check_signal_band(signal, e, m, schedule.write)
    base = ProtocolParams(
        beta=1.0, g=pr["g"], gamma=pr["gamma"], L=pr["L"], delta1=pr["delta1"], delta2=pr["delta2"],
        delta21=pr["delta21"], kappa_slope=0.0, omega_ref=pr["omega_ref"],
    )
    p = base.with_(beta=beta_for_depth(cfg.depth, e, base, o1))
    step = grid.frequency_grid().dw
    kappa = pr["kappa_slope"]
    p = p.with_(kappa_slope=null_delay_slope(e, p, o1, step) if kappa == "null-delay" else float(kappa))
    plan = make_plan(schedule, p.delta1, p.delta21)
    return Scenario(
        config=cfg, ensemble=e, params=p, omega1=o1, schedule=schedule, plan=plan, grid=grid,
        depth=DepthGrid(cfg.grid["m_slices"], p.L), signal=signal,
        timing=echo_timing(schedule, p.delta21), dtau=dispersion_delay(e, p, o1, step),
    )
