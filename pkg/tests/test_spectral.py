import numpy as np
import pytest

from conftest import small_config
from amrecho.amr import apply_rephase
from amrecho.ensemble import Distribution, make_ensemble
from amrecho.errors import DepthTooLowForAsymptotic, WrongStage
from amrecho.experiment import build_scenario, demo_config, from_dict
from amrecho.experiment.runner import run_spectral
from amrecho.metrics import efficiency, energy_band, fidelity_and_delay
from amrecho.signals import FieldEnvelope, forward_transform, spectrum_at
from amrecho.spectral import (
    ProtocolParams,
    beta_for_depth,
    dark_phase,
    dispersion_delay,
    echo_spectrum_finite_depth,
    echo_transfer_asymptotic,
    echo_spectrum_asymptotic,
    null_delay_slope,
    optical_depth,
    storage_transform,
    stored_coherence,
    susceptibility_kernel,
)

O1 = 6.0


@pytest.fixture(scope="module")
def ens():
    return make_ensemble(Distribution(), 256, panels=8)


def scenario(depth, **over):
    d = demo_config().to_dict()
    d["depth"] = depth
    for k, v in over.items():
        if isinstance(v, dict):
            d[k].update(v)
        else:
            d[k] = v
    return build_scenario(from_dict(d, check=False))


def post_rephase(sc, signal=None):
    sig = sc.signal if signal is None else signal
    p, sch = sc.params, sc.schedule
    s = stored_coherence(sig, sc.ensemble, p, sch.write, sch.T_a, sc.depth.z[[0, -1]])
    s = dark_phase(s, sch.T_a, sc.plan.t_start, p)
    return apply_rephase(s, sc.plan, sc.ensemble, p.raman_map(sc.omega1))


class TestParams:
    def test_gamma_range(self):
        with pytest.raises(ValueError):
            ProtocolParams(beta=1.0, gamma=1e-3)
        with pytest.raises(ValueError):
            ProtocolParams(beta=1.0, gamma=0.0)

    def test_delta2_must_match(self):
        assert ProtocolParams(beta=1.0).delta2 == 20.0
        with pytest.raises(ValueError):
            ProtocolParams(beta=1.0, delta2=25.0)

    def test_reference_frequency_default(self):
        assert ProtocolParams(beta=1.0).reference_frequency(O1) == pytest.approx(0.0, abs=1e-15)


class TestKernel:
    def test_peak_value(self, ens):
        p = ProtocolParams(beta=1.0, g=2.0)
        b = susceptibility_kernel(0.0, ens, p, O1)[0]
        assert b.real == pytest.approx(np.pi * ens.distribution.pdf(0.0) / 2.0, rel=0.02)

    def test_real_part_is_mapped_line(self, ens):
        p = ProtocolParams(beta=1.0)
        m = p.raman_map(O1)
        delta = np.linspace(-5, 5, 41)
        from amrecho.ensemble import two_photon_shift

        b = susceptibility_kernel(two_photon_shift(delta, m), ens, p, O1)
        # O(gamma) leakage from the line centre sets the absolute floor
        assert np.allclose(b.real, np.pi * ens.distribution.pdf(delta), rtol=1e-3, atol=1e-4)
        assert np.all(b.real >= 0)

    def test_argmax_at_peak(self, ens):
        p = ProtocolParams(beta=1.0)
        dw = 0.0024
        w = dw * np.arange(-100, 101)
        b = susceptibility_kernel(w, ens, p, O1)
        assert abs(w[np.argmax(b.real)]) <= dw

    def test_transparent_wings(self, ens):
        # absorption vanishes in the wings; the dispersive part falls off only as 1/(w - w_o)
        p = ProtocolParams(beta=1.0)
        m = p.raman_map(O1)
        w = m.peak_frequency + 10.5 * m.raman_width() * np.array([-8, -4, -1, 1, 4, 8])
        b0 = susceptibility_kernel(m.peak_frequency, ens, p, O1)[0]
        assert np.all(susceptibility_kernel(w, ens, p, O1).real < 1e-3 * b0.real)

    @pytest.mark.parametrize("delta1", [20.0, 100.0, 1000.0])
    def test_line_centre_dispersion_scales_with_detuning(self, ens, delta1):
        # the exact Stark map skews the line by sigma/Delta1; Im/Re = 0.8 sigma/Delta1
        o = 0.3 * delta1
        p = ProtocolParams(beta=1.0, delta1=delta1, delta21=o**2 / delta1)
        b = susceptibility_kernel(0.0, ens, p, o)[0]
        assert abs(b.imag) / b.real == pytest.approx(0.8 / delta1, rel=0.01)
        if delta1 >= 1000:
            assert abs(b.imag) <= 1e-3 * b.real

    def test_point_mass_branch(self):
        d = Distribution(kind="tabulated", table=np.array([[0.0, 1.0]]))
        e = make_ensemble(d, 16)
        p = ProtocolParams(beta=1.0, gamma=1e-4)
        b = susceptibility_kernel(np.array([0.0, 0.01]), e, p, O1)
        x = 1 / 20.0
        assert b[0] == pytest.approx(O1**2 * x**2 / 1e-4)
        assert b[1] == pytest.approx(O1**2 * x**2 / (1e-4 - 0.01j))


class TestStorage:
    def test_identity_at_entrance(self, ens):
        p = ProtocolParams(beta=5.0)
        w = np.linspace(-0.1, 0.1, 11)
        spec = np.exp(1j * w)
        assert np.array_equal(storage_transform(spec, w, 0.0, ens, p, O1), spec)

    def test_depth_30_attenuation(self, ens):
        p0 = ProtocolParams(beta=1.0)
        p = p0.with_(beta=beta_for_depth(30.0, ens, p0, O1))
        assert optical_depth(ens, p, O1) == pytest.approx(30.0)
        out = storage_transform(np.ones(1), np.zeros(1), 1.0, ens, p, O1)
        assert abs(out[0]) == pytest.approx(np.exp(-15.0), rel=1e-9)

    def test_depth_out_of_range(self, ens):
        with pytest.raises(ValueError):
            storage_transform(np.ones(1), np.zeros(1), 1.5, ens, ProtocolParams(beta=1.0), O1)


class TestStoredCoherence:
    def test_zero_input(self, demo_scenario):
        sc = demo_scenario
        zero = FieldEnvelope.zeros(sc.grid)
        s = stored_coherence(zero, sc.ensemble, sc.params, sc.schedule.write, sc.schedule.T_a, [0.0, 1.0])
        assert np.all(s.coherence == 0)

    def test_linear(self, demo_scenario):
        sc = demo_scenario
        args = (sc.ensemble, sc.params, sc.schedule.write, sc.schedule.T_a, [0.0, 0.5])
        a = stored_coherence(sc.signal, *args).coherence
        b = stored_coherence(sc.signal.scaled(2.0), *args).coherence
        assert np.allclose(np.abs(b), 2 * np.abs(a), rtol=1e-14, atol=0)

    def test_narrow_input_selects_node(self, demo_scenario):
        # a long pulse detuned to the two-photon frequency of one node excites that node most
        sc = demo_scenario
        p = sc.params
        m = p.raman_map(sc.omega1)
        from amrecho.ensemble import two_photon_shift
        from amrecho.signals import make_gaussian_pulse

        k_star = np.argmin(np.abs(sc.ensemble.nodes - 0.5))
        w_star = two_photon_shift(sc.ensemble.nodes[k_star], m)
        t = sc.grid.t
        env = make_gaussian_pulse(420.0, 56.0, 1.0, sc.grid).samples * np.exp(-1j * w_star * t)
        s = stored_coherence(FieldEnvelope(sc.grid, env), sc.ensemble, p.with_(beta=1e-6),
                             sc.schedule.write, sc.schedule.T_a, [0.0])
        mag = np.abs(s.coherence[:, 0])
        assert np.argmax(mag) == k_star

    def test_dark_phase(self, demo_scenario):
        sc = demo_scenario
        s = stored_coherence(sc.signal, sc.ensemble, sc.params, sc.schedule.write, sc.schedule.T_a, [0.0, 1.0])
        still = dark_phase(s, 0.0, 50.0, sc.params.with_(delta21=0.0))
        assert np.array_equal(still.coherence, s.coherence)
        moved = dark_phase(s, 0.0, 37.0, sc.params)
        rel = lambda c: np.angle(c[1:, 0] * np.conj(c[:-1, 0]))  # noqa: E731
        assert np.max(np.abs(rel(moved.coherence) - rel(s.coherence))) < 1e-12
        rev = dark_phase(s, 0.0, 2 * np.pi / sc.params.delta21, sc.params)
        assert np.max(np.abs(rev.coherence - s.coherence)) <= 1e-12 * np.abs(s.coherence).max()


class TestEcho:
    def test_requires_rephased_state(self, demo_scenario):
        sc = demo_scenario
        s = stored_coherence(sc.signal, sc.ensemble, sc.params, sc.schedule.write, sc.schedule.T_a, [0.0, 1.0])
        with pytest.raises(WrongStage):
            echo_spectrum_finite_depth(np.zeros(1), s, sc.ensemble, sc.params, sc.schedule.read)

    def test_zero_coherence(self, demo_scenario):
        sc = demo_scenario
        s = post_rephase(sc, FieldEnvelope.zeros(sc.grid))
        spec = echo_spectrum_finite_depth(sc.grid.frequency_grid().omega, s, sc.ensemble, sc.params, sc.schedule.read)
        assert np.all(spec == 0)

    def test_transfer_near_one_at_depth_30(self, demo_scenario):
        sc = demo_scenario
        s = post_rephase(sc)
        wo = sc.params.raman_map(sc.omega1).peak_frequency
        e2 = echo_spectrum_finite_depth(np.array([wo]), s, sc.ensemble, sc.params, sc.schedule.read)
        assert abs(e2[0] / spectrum_at(sc.signal, wo)[0]) == pytest.approx(1.0, abs=0.02)

    def test_efficiency_increases_with_depth(self):
        assert efficiency(*_io(1.0)) < efficiency(*_io(30.0))

    def test_no_gain(self):
        for d in (5.0, 30.0, 80.0):
            assert efficiency(*_io(d)) <= 1 + 1e-3

    def test_linearity(self, demo_scenario):
        sc = demo_scenario
        w = sc.grid.frequency_grid().omega
        a = echo_spectrum_finite_depth(w, post_rephase(sc), sc.ensemble, sc.params, sc.schedule.read)
        b = echo_spectrum_finite_depth(w, post_rephase(sc, sc.signal.scaled(1e-3)), sc.ensemble, sc.params, sc.schedule.read)
        assert np.linalg.norm(b - 1e-3 * a) <= 1e-10 * np.linalg.norm(1e-3 * a)

    def test_asymptotic_unit_transfer_at_reference(self, demo_scenario):
        sc = demo_scenario
        wref = sc.params.reference_frequency(sc.omega1)
        T = echo_transfer_asymptotic(np.array([wref]), sc.ensemble, sc.params, sc.omega1, sc.timing)
        assert abs(T[0]) == pytest.approx(1.0, abs=1e-3)

    def test_asymptotic_matches_finite_depth_at_50(self):
        sc = scenario(50.0)
        w = sc.grid.frequency_grid().omega
        a_in = forward_transform(sc.signal)
        band = energy_band(a_in, 0.99)
        fin = echo_spectrum_finite_depth(w[band], post_rephase(sc), sc.ensemble, sc.params, sc.schedule.read)
        asy = echo_spectrum_asymptotic(a_in[band], w[band], sc.ensemble, sc.params, sc.omega1, sc.timing)
        assert np.max(np.abs(fin - asy) / np.abs(a_in[band])) <= 0.01

    def test_asymptotic_needs_depth(self):
        sc = scenario(5.0)
        w = np.zeros(1)
        with pytest.raises(DepthTooLowForAsymptotic):
            echo_spectrum_asymptotic(np.ones(1), w, sc.ensemble, sc.params, sc.omega1, sc.timing)


def _io(depth):
    sc = scenario(depth)
    return sc.signal, run_spectral(sc)


class TestDelay:
    def test_same_width_replica(self, demo_scenario):
        sc = demo_scenario
        echo = run_spectral(sc)
        fid, delay, _ = fidelity_and_delay(sc.signal, echo)
        assert fid > 0.999
        assert abs(delay - (sc.timing.delay - sc.dtau)) <= 2 * sc.grid.dt

    def test_null_delay_slope(self):
        sc = scenario(30.0, params={"kappa_slope": "null-delay"})
        step = sc.grid.frequency_grid().dw
        assert abs(dispersion_delay(sc.ensemble, sc.params, sc.omega1, step)) < 1e-9
        _, delay, _ = fidelity_and_delay(sc.signal, run_spectral(sc))
        assert abs(delay - sc.timing.delay) <= sc.grid.dt

    def test_detuned_slope_shifts_delay(self):
        base = scenario(30.0, params={"kappa_slope": "null-delay"})
        k0 = base.params.kappa_slope
        off = scenario(30.0, params={"kappa_slope": 1.1 * k0})
        _, d0, _ = fidelity_and_delay(base.signal, run_spectral(base))
        _, d1, _ = fidelity_and_delay(off.signal, run_spectral(off))
        assert (d1 - d0) == pytest.approx(-off.dtau, abs=0.15 * off.grid.dt)
        step = off.grid.frequency_grid().dw
        assert null_delay_slope(off.ensemble, off.params, off.omega1, step) == pytest.approx(k0, rel=1e-9)


def test_small_ensemble_still_converges():
    sc = build_scenario(small_config())
    echo = run_spectral(sc)
    assert efficiency(sc.signal, echo) > 0.95
