import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amrecho.errors import GridTooCoarse, InvalidWindow, PulseClipped, ScheduleInvalid
from amrecho.signals import (
    ControlSchedule,
    FieldEnvelope,
    PulseShape,
    TimeGrid,
    forward_transform,
    inverse_transform,
    make_gaussian_pulse,
    pulse_area,
    spectrum_at,
    step_areas,
)


def centered_grid(dt=0.05, n=4096):
    return TimeGrid(-dt * n / 2, dt, n)


class TestTimeGrid:
    def test_rejects_non_power_of_two(self):
        with pytest.raises(ValueError):
            TimeGrid(0.0, 0.1, 1000)

    def test_rejects_nonpositive_step(self):
        with pytest.raises(ValueError):
            TimeGrid(0.0, 0.0, 64)

    def test_covering_reaches_stop(self):
        g = TimeGrid.covering(0.0, 2600.0, 0.32)
        assert g.t_end == pytest.approx(2600.0)
        assert g.dt <= 0.32
        assert g.n == 8192

    def test_frequency_grid_is_dual(self):
        g = TimeGrid(0.0, 0.25, 256)
        f = g.frequency_grid()
        assert f.dw * g.span == pytest.approx(2 * np.pi)
        assert f.omega[f.n // 2] == 0.0


class TestGaussianPulse:
    def test_zero_amplitude(self):
        p = make_gaussian_pulse(0.0, 1.0, 0.0, centered_grid())
        assert p.energy == 0.0

    def test_energy_matches_gaussian_integral(self):
        # |exp(-t^2/2w^2)|^2 integrates to w * sqrt(pi)
        p = make_gaussian_pulse(0.0, 1.0, 1.0, centered_grid())
        assert p.energy == pytest.approx(np.sqrt(np.pi), rel=1e-6)

    def test_doubling_amplitude_quadruples_energy(self):
        g = centered_grid()
        assert make_gaussian_pulse(0.0, 1.0, 2.0, g).energy == 4 * make_gaussian_pulse(0.0, 1.0, 1.0, g).energy

    def test_unresolved_width(self):
        with pytest.raises(GridTooCoarse):
            make_gaussian_pulse(0.0, 0.1, 1.0, centered_grid())

    def test_clipped(self):
        with pytest.raises(PulseClipped):
            make_gaussian_pulse(95.0, 2.0, 1.0, centered_grid())


class TestTransforms:
    def test_impulse_has_flat_spectrum(self):
        g = TimeGrid(0.0, 0.1, 256)
        s = np.zeros(256, complex)
        s[17] = 1.0
        mag = np.abs(forward_transform(FieldEnvelope(g, s)))
        assert np.ptp(mag) < 1e-14

    def test_gaussian_fourier_pair(self):
        w = 2.0
        g = centered_grid(0.05, 4096)
        spec = forward_transform(make_gaussian_pulse(0.0, w, 1.0, g))
        omega = g.frequency_grid().omega
        exact = w * np.sqrt(2 * np.pi) * np.exp(-0.5 * (omega * w) ** 2)
        assert np.max(np.abs(spec - exact)) < 1e-6 * exact.max()

    def test_delay_sign(self):
        # a later pulse picks up exp(+i w D) in this convention
        g = centered_grid(0.05, 4096)
        a = forward_transform(make_gaussian_pulse(0.0, 2.0, 1.0, g))
        b = forward_transform(make_gaussian_pulse(3.0, 2.0, 1.0, g))
        omega = g.frequency_grid().omega
        keep = np.abs(a) > 1e-3 * np.abs(a).max()
        assert np.allclose(b[keep], a[keep] * np.exp(1j * omega[keep] * 3.0), atol=1e-9)

    def test_spectrum_at_agrees_on_grid(self):
        g = TimeGrid(-20.0, 0.1, 512)
        f = make_gaussian_pulse(1.0, 2.0, 1 + 0.5j, g)
        omega = g.frequency_grid().omega
        assert np.allclose(spectrum_at(f, omega[::7]), forward_transform(f)[::7], atol=1e-12)

    @pytest.mark.parametrize("k", range(8, 17))
    def test_round_trip_all_sizes(self, k):
        n = 2**k
        rng = np.random.default_rng(k)
        g = TimeGrid(-3.0, 0.01, n)
        f = FieldEnvelope(g, rng.normal(size=n) + 1j * rng.normal(size=n))
        back = inverse_transform(forward_transform(f), g)
        assert np.linalg.norm(back.samples - f.samples) / np.linalg.norm(f.samples) <= 1e-12

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(3, 10), st.floats(0.01, 3.0), st.floats(-50, 50))
    def test_parseval(self, seed, k, dt, t0):
        n = 2**k
        rng = np.random.default_rng(seed)
        g = TimeGrid(t0, dt, n)
        f = FieldEnvelope(g, rng.normal(size=n) + 1j * rng.normal(size=n))
        spec = forward_transform(f)
        dw = g.frequency_grid().dw
        assert np.sum(np.abs(spec) ** 2) * dw / (2 * np.pi) == pytest.approx(f.energy, rel=1e-12)


class TestPulseArea:
    def test_zero_amplitude(self):
        assert pulse_area(PulseShape("rect-smoothed", 0.0, 0.0, 10.0, 1.0), 0.0, 10.0) == 0.0

    def test_rect_smoothed_closed_form(self):
        # raised-cosine ramps each contribute 3/8 of a flat edge
        p = PulseShape("rect-smoothed", 3.0, 0.0, 100.0, 5.0)
        exact = 9.0 * (100.0 - 1.25 * 5.0)
        assert pulse_area(p, 0.0, 100.0) == pytest.approx(exact, rel=1e-12)
        assert abs(pulse_area(p, 0.0, 100.0) - 9.0 * 100.0) <= 2 * 5.0 * 9.0

    def test_gaussian_against_erf(self):
        from scipy.special import erf

        p = PulseShape("gaussian", 2.0, 0.0, 20.0, 1.5)
        a, b = 7.0, 12.5
        s = 1.5  # intensity is exp(-(t - c)^2 / edge^2)
        exact = 4.0 * s * np.sqrt(np.pi) / 2 * (erf((b - 10.0) / s) - erf((a - 10.0) / s))
        assert pulse_area(p, a, b) == pytest.approx(exact, rel=1e-9)

    def test_empty_window(self):
        with pytest.raises(InvalidWindow):
            pulse_area(PulseShape("rect-smoothed", 1.0, 0.0, 10.0, 1.0), 3.0, 3.0)

    def test_step_areas_sum(self):
        p = PulseShape("rect-smoothed", 6.0, 0.0, 850.0, 20.0)
        edges = np.linspace(-3.0, 900.0, 2823)
        assert step_areas(p, edges).sum() == pytest.approx(pulse_area(p, 0.0, 850.0), rel=1e-12)

    def test_edges_are_c1(self):
        p = PulseShape("rect-smoothed", 2.0, 0.0, 50.0, 4.0)
        t = np.linspace(-1.0, 51.0, 100001)
        deriv = np.abs(np.diff(p(t)) / np.diff(t))
        assert deriv.max() <= 3 * p.amplitude / p.edge
        # no jump in the derivative at the ramp corners
        assert np.max(np.abs(np.diff(deriv))) < 1e-3


class TestControlSchedule:
    def _pulses(self):
        w = PulseShape("rect-smoothed", 6.0, 0.0, 100.0, 10.0)
        r = PulseShape("rect-smoothed", 6.0, 120.0, 200.0, 10.0)
        d = PulseShape("rect-smoothed", 6.0, 210.0, 400.0, 10.0)
        return w, r, d

    def test_valid(self):
        w, r, d = self._pulses()
        ControlSchedule(w, r, d, 100.0, 120.0, 90.0, pi_pulses=(110.0, 205.0))

    def test_write_overlaps_storage(self):
        w, r, d = self._pulses()
        with pytest.raises(ScheduleInvalid):
            ControlSchedule(w, r, d, 90.0, 120.0, 90.0)

    def test_read_before_rephase_end(self):
        w, r, d = self._pulses()
        with pytest.raises(ScheduleInvalid):
            ControlSchedule(w, r, d, 100.0, 120.0, 95.0)

    def test_pi_pulse_inside_rephase(self):
        w, r, d = self._pulses()
        with pytest.raises(ScheduleInvalid):
            ControlSchedule(w, r, d, 100.0, 120.0, 90.0, pi_pulses=(130.0, 205.0))
