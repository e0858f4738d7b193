"""Protocol orchestration on either solver path, sweeps and result files."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .. import mbsolver, metrics
from ..amr import apply_rephase
from ..errors import AMRError
from ..signals import FieldEnvelope, forward_transform
from ..spectral import dark_phase, echo_spectrum_finite_depth, echo_time_trace, stored_coherence
from .config import RunConfig
from .scenario import Scenario, build_scenario

SOLVERS = ("spectral", "timedomain")


@dataclass
class RunResult:
    scenario: Scenario
    echoes: dict = field(default_factory=dict)
    reports: dict = field(default_factory=dict)
    discrepancy: Optional[dict] = None
    four_level: Optional[dict] = None

    def report_document(self) -> dict:
        sc = self.scenario
        doc = {
            "reports": {k: v.as_dict() for k, v in self.reports.items()},
            "timing": {
                "echo_delay_D": sc.timing.delay,
                "echo_phase": sc.timing.phase,
                "dtau_predicted": sc.dtau,
                "expected_delay": sc.timing.delay - sc.dtau,
                "P": sc.P,
                "theta": sc.theta,
                "rephase_mode": sc.plan.mode,
            },
            "params": {
                "optical_depth": sc.config.depth,
                "beta": sc.params.beta,
                "kappa_slope": sc.params.kappa_slope,
                "dt": sc.grid.dt,
                "n": sc.grid.n,
                "M": sc.ensemble.count,
                "m_slices": sc.depth.m_slices,
            },
            "discrepancy": self.discrepancy,
            "four_level": self.four_level,
        }
        return doc


def run_spectral(sc: Scenario) -> FieldEnvelope:
    p, sch = sc.params, sc.schedule
    try:
        s = stored_coherence(sc.signal, sc.ensemble, p, sch.write, sch.T_a, sc.depth.z[[0, -1]])
        s = dark_phase(s, sch.T_a, sc.plan.t_start, p)
        s = apply_rephase(s, sc.plan, sc.ensemble, p.raman_map(sc.omega1))
        spec = echo_spectrum_finite_depth(sc.grid.frequency_grid().omega, s, sc.ensemble, p, sch.read)
    except AMRError as exc:
        if exc.stage is None:
            exc.stage = "spectral"
            exc.args = (f"[spectral] {exc.args[0]}",)
        raise
    return echo_time_trace(spec, sc.grid)


def run_timedomain(sc: Scenario) -> tuple[FieldEnvelope, mbsolver.MediumState]:
    """Echo and the post-write medium from the integrator."""
    p, sch = sc.params, sc.schedule
    wr = mbsolver.integrate_write(sc.signal, sch, sc.ensemble, p, sc.depth)
    s = mbsolver.integrate_dark(wr.state, wr.state.time, sc.plan.t_start, p)
    s = mbsolver.integrate_rephase(s, sc.plan, sc.ensemble, p)
    return mbsolver.integrate_read(s, sch, sc.ensemble, p, sc.depth, sc.grid), wr.state


def make_report(sc: Scenario, echo: FieldEnvelope) -> metrics.EchoReport:
    inp = sc.signal
    eff = metrics.efficiency(inp, echo)
    if echo.energy == 0:
        return metrics.EchoReport(eff, 0.0, float("nan"), float("nan"), 0.0, sc.theta, sc.dtau)
    fid, delay, phase = metrics.fidelity_and_delay(inp, echo)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        score = metrics.reversal_score(inp, echo, delay)
    return metrics.EchoReport(eff, fid, delay, phase, score, sc.theta, sc.dtau)


def run(cfg: Union[RunConfig, Scenario], seed: Optional[int] = None) -> RunResult:
    """Write, store, rephase and read on the configured solver path(s)."""
    sc = cfg if isinstance(cfg, Scenario) else build_scenario(cfg)
    cfg = sc.config
    res = RunResult(sc)
    wanted = SOLVERS if cfg.solver == "both" else (cfg.solver,)
    if "spectral" in wanted:
        res.echoes["spectral"] = run_spectral(sc)
    if "timedomain" in wanted:
        echo, written = run_timedomain(sc)
        res.echoes["timedomain"] = echo
        if cfg.mode == "four-level" or cfg.noise_injection > 0:
            res.four_level = _four_level(sc, echo, written, seed)
    for k, echo in res.echoes.items():
        res.reports[k] = make_report(sc, echo)
    if len(res.echoes) == 2:
        a, b = res.echoes["timedomain"], res.echoes["spectral"]
        ea, eb = res.reports["timedomain"].efficiency, res.reports["spectral"].efficiency
        res.discrepancy = {
            "echo_relative_l2": metrics.relative_l2(a.samples, b.samples) if b.energy > 0 else float("nan"),
            "efficiency_relative_difference": abs(ea - eb) / eb if eb > 0 else float("nan"),
        }
    return res


def _four_level(sc: Scenario, three_level_echo: FieldEnvelope, written, seed) -> dict:
    use_pi = sc.config.mode == "four-level" and sc.schedule.pi_pulses is not None
    rng = np.random.default_rng(seed)
    out = mbsolver.run_four_level(
        sc.signal, sc.schedule, sc.plan, sc.ensemble, sc.params, sc.depth,
        noise_injection=sc.config.noise_injection, use_pi_pulses=use_pi, rng=rng, written=written,
    )
    ref = np.linalg.norm(three_level_echo.samples)
    diff = float(np.linalg.norm(out.echo.samples - three_level_echo.samples) / ref) if ref > 0 else 0.0
    return {
        "pi_pulses": use_pi,
        "noise_injection": sc.config.noise_injection,
        "rho2_at_read": out.rho2_final,
        "rho4_at_read": out.state.rho4,
        "rho2_flag": out.rho2_flag,
        "echo_relative_difference": diff,
        "echo_identical_to_three_level": diff <= 1e-10,
    }


# ---------------------------------------------------------------------------
# sweeps


def sweep(cfg: RunConfig, threads: int = 1, seed: Optional[int] = None) -> list[dict]:
    """Run every sweep point as an isolated run; rows come back in input order."""
    if cfg.sweep is None:
        raise ValueError("config has no sweep section")
    path, values = cfg.sweep["parameter"], cfg.sweep["values"]
    points = [cfg.with_value(path, v) for v in values]
    for pt in points:
        from .config import validate

        validate(pt)

    def one(pt):
        r = run(pt, seed)
        row = {"value": pt_value(pt, path)}
        for k in SOLVERS:
            if k in r.reports:
                rep = r.reports[k]
                row.update({f"efficiency_{k}": rep.efficiency, f"fidelity_{k}": rep.fidelity, f"delay_{k}": rep.delay})
        return row

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(one, points))
    return [one(pt) for pt in points]


def pt_value(cfg: RunConfig, path: str):
    node = cfg.to_dict()
    for k in path.split("."):
        node = node[k]
    return node


# ---------------------------------------------------------------------------
# output


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def traces_csv(inp: FieldEnvelope, echo: FieldEnvelope) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "re_in", "im_in", "re_echo", "im_echo"])
    for t, a, b in zip(inp.grid.t, inp.samples, echo.samples):
        w.writerow([_fmt(t), _fmt(a.real), _fmt(a.imag), _fmt(b.real), _fmt(b.imag)])
    return buf.getvalue()


def read_traces_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1] + 1j * data[:, 2], data[:, 3] + 1j * data[:, 4]


def _columns(*cols) -> str:
    return "".join(" ".join(_fmt(v) for v in row) + "\n" for row in zip(*cols))


def sweep_csv(rows: list[dict]) -> str:
    keys = list(rows[0])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(keys)
    for r in rows:
        w.writerow([_fmt(r[k]) for k in keys])
    return buf.getvalue()


def emit_results(res: RunResult, destination, formats=("csv", "json", "dat")) -> list[Path]:
    """Write traces (CSV), the report (JSON) and plot-ready two-column files."""
    dest = Path(destination)
    written = []
    inp = res.scenario.signal
    if "csv" in formats:
        for k, echo in res.echoes.items():
            p = dest / f"traces_{k}.csv"
            _atomic_write(p, traces_csv(inp, echo))
            written.append(p)
    if "json" in formats:
        doc = res.report_document()
        doc["config"] = res.scenario.config.to_dict()
        p = dest / "report.json"
        _atomic_write(p, json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n")
        written.append(p)
    if "dat" in formats:
        t = inp.grid.t
        p = dest / "input_intensity.dat"
        _atomic_write(p, _columns(t, np.abs(inp.samples) ** 2))
        written.append(p)
        a_in = forward_transform(inp)
        w = inp.grid.frequency_grid().omega
        keep = np.abs(a_in) ** 2 > 1e-12 * np.max(np.abs(a_in) ** 2)
        for k, echo in res.echoes.items():
            p = dest / f"echo_intensity_{k}.dat"
            _atomic_write(p, _columns(t, np.abs(echo.samples) ** 2))
            written.append(p)
            T = np.abs(forward_transform(echo)[keep] / a_in[keep])
            p = dest / f"transfer_{k}.dat"
            _atomic_write(p, _columns(w[keep], T))
            written.append(p)
    return written
