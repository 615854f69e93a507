import math

import numpy as np
import pytest
from pydantic import ValidationError

from dualspin.errors import UnsupportedOrbitError
from dualspin.orbit import (
    OrbitConfig,
    OrbitElements,
    gg_scale,
    orbit_schedule,
    orbital_period,
    propagate,
    propagate_many,
    semi_major_axis_for_period,
    solve_kepler,
)
from dualspin.presets import ORBIT_PERIOD

pytestmark = pytest.mark.unit

A_REFERENCE = semi_major_axis_for_period(ORBIT_PERIOD)


def elements(e=0.0, i_deg=0.0, **extra):
    return OrbitConfig(a=A_REFERENCE, e=e, i_deg=i_deg, **extra).to_elements()


class TestKepler:
    """Test the Kepler equation solver."""

    def test_quarter_mean_anomaly(self):
        """M = pi/2, e = 0.2 gives E near 1.767."""
        E = solve_kepler(math.pi / 2, 0.2)
        assert abs(E - 1.7671) < 1e-3
        assert abs(E - 0.2 * math.sin(E) - math.pi / 2) < 1e-12

    def test_circular_identity(self):
        """For e = 0 the eccentric anomaly equals the mean anomaly."""
        M = np.linspace(0.0, 6.0, 25)
        assert np.allclose(solve_kepler(M, 0.0), M, rtol=0, atol=1e-14)

    def test_random_residuals(self):
        """Residual stays below 1e-12 across random (M, e) pairs."""
        rng = np.random.default_rng(42)
        M = rng.uniform(-20.0, 20.0, 10_000)
        e = rng.uniform(0.0, 0.9, 10_000)
        worst = 0.0
        for ecc in np.unique(np.round(e, 2)):
            mask = np.round(e, 2) == ecc
            E = solve_kepler(M[mask], float(ecc))
            worst = max(worst, float(np.max(np.abs(E - ecc * np.sin(E) - M[mask]))))
        assert worst < 1e-12

    def test_scalar_in_scalar_out(self):
        """A scalar mean anomaly returns a float."""
        assert isinstance(solve_kepler(1.0, 0.1), float)

    def test_open_orbit_rejected(self):
        """Parabolic eccentricity is unsupported."""
        with pytest.raises(UnsupportedOrbitError):
            solve_kepler(1.0, 1.0)


class TestPeriod:
    """Test period and semi-major axis conversions."""

    def test_round_trip(self):
        """The semi-major axis for the reference period reproduces that period."""
        assert abs(orbital_period(elements()) - ORBIT_PERIOD) < 1e-9 * ORBIT_PERIOD

    def test_reference_axis(self):
        """The reference period corresponds to a roughly 8080 km orbit."""
        assert 8.05e6 < A_REFERENCE < 8.11e6

    def test_elements_reject_open_orbit(self):
        """OrbitConfig refuses e >= 1."""
        with pytest.raises(ValidationError, match="closed orbits"):
            OrbitConfig(a=A_REFERENCE, e=1.0)


class TestPropagate:
    """Test orbit propagation."""

    def test_circular_equatorial(self):
        """Drift rate and out-of-plane distance vanish identically."""
        schedule = propagate_many(elements(), np.linspace(0.0, 3 * ORBIT_PERIOD, 501))
        assert np.all(schedule.delta_n == 0.0)
        assert np.all(schedule.R_Zp == 0.0)
        assert np.all(schedule.R == A_REFERENCE)

    def test_perigee_apogee_rate_ratio(self):
        """n(perigee) / n(apogee) = ((1 + e) / (1 - e))^2."""
        orbit = elements(e=0.2)
        perigee = propagate(orbit, 0.0)
        apogee = propagate(orbit, 0.5 * orbital_period(orbit))
        assert abs(perigee.n / apogee.n - 2.25) < 1e-12

    def test_orbital_rate_sign_and_speed(self):
        """n = -V_theta / R and the rate is negative."""
        state = propagate(elements(e=0.2), 1234.5)
        assert state.n < 0
        assert abs(state.n - (-state.V_theta / state.R)) < 1e-15 * abs(state.n)

    def test_angular_momentum_constant(self):
        """R * V_theta is constant along the orbit."""
        schedule = propagate_many(elements(e=0.3), np.linspace(0.0, ORBIT_PERIOD, 997))
        h = schedule.R * schedule.V_theta
        assert np.max(np.abs(h - h[0])) < 1e-9 * h[0]

    def test_vis_viva(self):
        """V_theta with the conic radial speed satisfies V^2 = mu (2/R - 1/a)."""
        orbit = elements(e=0.2, i_deg=30.0)
        schedule = propagate_many(orbit, np.linspace(0.0, 2 * ORBIT_PERIOD, 1201))
        p = orbit.a * (1 - orbit.e**2)
        h = math.sqrt(orbit.mu * p)
        assert np.max(np.abs(schedule.R * schedule.V_theta - h)) < 1e-9 * h

        v_radial = math.sqrt(orbit.mu / p) * orbit.e * np.sin(schedule.nu)
        v_squared = schedule.V_theta**2 + v_radial**2
        expected = orbit.mu * (2.0 / schedule.R - 1.0 / orbit.a)
        assert np.max(np.abs(v_squared / expected - 1.0)) < 1e-9

    def test_periodicity(self):
        """Every quantity repeats after one period."""
        orbit = elements(e=0.2, i_deg=30.0, argp_deg=40.0)
        period = orbital_period(orbit)
        t = np.linspace(0.0, period, 53)
        first = propagate_many(orbit, t)
        second = propagate_many(orbit, t + period)
        for name in ("R", "V_theta", "n", "R_Zp"):
            a, b = getattr(first, name), getattr(second, name)
            assert np.max(np.abs(a - b)) <= 1e-9 * np.max(np.abs(a))

    def test_drift_rate_has_zero_mean(self):
        """delta_n averages to zero over one revolution."""
        orbit = elements(e=0.2)
        samples = 4000
        t = np.arange(samples) * (orbital_period(orbit) / samples)
        schedule = propagate_many(orbit, t)
        assert abs(np.mean(schedule.delta_n)) < 1e-9 * abs(schedule.n[0])

    def test_apogee_epoch(self):
        """With the epoch at apogee the orbit starts at a(1 + e)."""
        orbit = elements(e=0.2, t0_at_perigee=False)
        assert abs(propagate(orbit, 0.0).R - 1.2 * A_REFERENCE) < 1e-6

    def test_vectorised_matches_scalar(self):
        """propagate_many agrees with propagate sample by sample."""
        orbit = elements(e=0.15, i_deg=30.0)
        times = np.array([0.0, 100.0, 2500.0, 7000.0])
        schedule = propagate_many(orbit, times)
        for k, t in enumerate(times):
            single = propagate(orbit, float(t))
            assert schedule.R[k] == pytest.approx(single.R, rel=1e-12)
            assert schedule.delta_n[k] == pytest.approx(single.delta_n, rel=1e-9, abs=1e-18)

    def test_inclined_orbit_leaves_plane(self):
        """A 30 degree inclination gives a nonzero out-of-plane distance."""
        schedule = propagate_many(elements(e=0.0, i_deg=30.0), np.linspace(0.0, ORBIT_PERIOD, 100))
        assert abs(np.max(np.abs(schedule.R_Zp)) - 0.5 * A_REFERENCE) < 1e-3 * A_REFERENCE


class TestGravityScale:
    """Test the gravity-gradient radius scaling."""

    def test_perigee_scale(self):
        """At perigee of an e = 0.2 orbit the scale is 1/0.8^3."""
        orbit = elements(e=0.2)
        assert abs(gg_scale(propagate(orbit, 0.0), orbit.a) - 1.953125) < 1e-12

    def test_reference_radius(self):
        """On a circular orbit with R0 = a the scale is one."""
        assert gg_scale(propagate(elements(), 500.0), A_REFERENCE) == 1.0


class TestOrbitSchedule:
    """Test the tabulated schedule."""

    def test_columns_and_rows(self):
        """Schedule has the documented columns and inclusive end point."""
        frame = orbit_schedule(elements(e=0.2), 100.0, 10.0)
        assert list(frame.columns) == ["t", "R", "V_theta", "n", "delta_n", "R_Zp"]
        assert len(frame) == 11
        assert frame["t"].iloc[-1] == 100.0

    def test_raw_elements(self):
        """OrbitElements accept radians directly."""
        orbit = OrbitElements(a=A_REFERENCE, e=0.1, i=math.pi / 6)
        assert propagate(orbit, 0.0).R == pytest.approx(0.9 * A_REFERENCE)
