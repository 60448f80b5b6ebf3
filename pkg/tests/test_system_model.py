import math

import numpy as np
import pytest

from detec.system_model import (
    DisturbanceSpec,
    LinearSystem,
    aircraft_model,
    derivative,
    disturbance_signal,
    rk4_step,
    spectral_abscissa,
)

# Max real eigenvalue part of the aircraft plant, by hand: the third row is
# (0, 0, -6.67), so the eigenvalues are -6.67 plus those of the top-left
# 2x2 block [[-0.277, 1], [-17.1, -0.178]]. Its discriminant
# (-0.455)^2 - 4*(0.277*0.178 + 17.1) is negative, so the pair is complex
# with real part trace/2 = -0.2275.
AIRCRAFT_ABSCISSA = -0.2275


class TestDerivative:
    def test_first_state_unit_vector_reads_column_of_A(self):
        sys = aircraft_model()
        xdot = derivative(sys, [1.0, 0.0, 0.0], [0.0], [0.0, 0.0, 0.0])
        assert np.array_equal(xdot, [-0.277, -17.1, 0.0])

    def test_pure_input_reads_column_of_B(self):
        sys = aircraft_model()
        xdot = derivative(sys, [0.0, 0.0, 0.0], [1.0], [0.0, 0.0, 0.0])
        assert np.array_equal(xdot, [0.0, 0.0, 6.67])

    def test_disturbance_passthrough(self):
        sys = aircraft_model()
        xdot = derivative(sys, np.zeros(3), [0.0], [1.0, 2.0, 3.0])
        assert np.array_equal(xdot, [1.0, 2.0, 3.0])

    def test_linearity(self):
        rng = np.random.default_rng(5)
        sys = LinearSystem(rng.standard_normal((4, 4)), rng.standard_normal((4, 2)))
        x1, x2 = rng.standard_normal(4), rng.standard_normal(4)
        u1, u2 = rng.standard_normal(2), rng.standard_normal(2)
        d1, d2 = rng.standard_normal(4), rng.standard_normal(4)
        a, b = 0.7, -1.3
        lhs = derivative(sys, a * x1 + b * x2, a * u1 + b * u2, a * d1 + b * d2)
        rhs = a * derivative(sys, x1, u1, d1) + b * derivative(sys, x2, u2, d2)
        assert np.allclose(lhs, rhs, rtol=0.0, atol=1e-12)

    def test_dimension_mismatch_raises(self):
        sys = aircraft_model()
        with pytest.raises(ValueError):
            derivative(sys, [1.0, 0.0], [0.0], [0.0, 0.0, 0.0])
        with pytest.raises(ValueError):
            derivative(sys, np.zeros(3), [0.0, 0.0], np.zeros(3))

    def test_bad_shapes_rejected_at_construction(self):
        with pytest.raises(ValueError):
            LinearSystem(np.zeros((2, 3)), np.zeros((2, 1)))
        with pytest.raises(ValueError):
            LinearSystem(np.zeros((2, 2)), np.zeros((3, 1)))
        with pytest.raises(ValueError):
            LinearSystem(np.array([[np.nan, 0.0], [0.0, 1.0]]), np.zeros((2, 1)))


class TestRk4Step:
    def test_scalar_exponential(self):
        # xdot = -x from 1.0: one RK4 step of 0.1 gives the degree-4
        # Taylor polynomial of e^{-0.1} = 0.90483741..., i.e. 0.9048375.
        out = rk4_step(lambda t, y: -y, 0.0, np.array([1.0]), 0.1)
        assert out[0] == pytest.approx(0.9048375, abs=1e-12)
        assert abs(out[0] - math.exp(-0.1)) <= 1e-6

    def test_one_step_order(self):
        # Halving h must shrink the one-step error by at least 2^4.
        def err(h):
            out = rk4_step(lambda t, y: -y, 0.0, np.array([1.0]), h)
            return abs(out[0] - math.exp(-h))

        assert err(0.1) / err(0.05) >= 2.0**4

    def test_constant_field_exact(self):
        c = np.array([2.0, -3.0])
        out = rk4_step(lambda t, y: c, 0.0, np.zeros(2), 0.25)
        assert np.allclose(out, 0.25 * c, rtol=0.0, atol=1e-15)

    def test_equilibrium_stays_put(self):
        A = np.array([[0.0, 1.0], [-1.0, 0.0]])
        out = rk4_step(lambda t, y: A @ y, 0.0, np.zeros(2), 0.1)
        assert np.array_equal(out, np.zeros(2))

    def test_time_dependent_field(self):
        # ydot = 2t integrates exactly (polynomial of degree 1 in t).
        out = rk4_step(lambda t, y: np.array([2.0 * t]), 0.0, np.array([0.0]), 0.5)
        assert out[0] == pytest.approx(0.25, abs=1e-15)

    def test_nonpositive_step_rejected(self):
        with pytest.raises(ValueError):
            rk4_step(lambda t, y: -y, 0.0, np.array([1.0]), 0.0)


class TestSpectralAbscissa:
    def test_diagonal(self):
        assert spectral_abscissa(np.diag([-3.0, -1.0, -2.0])) == -1.0
        assert spectral_abscissa(np.diag([1.0, -2.0])) == 1.0

    def test_aircraft_value(self):
        sys = aircraft_model()
        assert spectral_abscissa(sys.A) == pytest.approx(AIRCRAFT_ABSCISSA, abs=1e-12)

    def test_rotation_has_zero_abscissa(self):
        assert spectral_abscissa([[0.0, 1.0], [-1.0, 0.0]]) == pytest.approx(0.0, abs=1e-14)

    def test_nonsquare_rejected(self):
        with pytest.raises(ValueError):
            spectral_abscissa(np.zeros((2, 3)))


class TestDisturbanceSignal:
    def test_zero_kind(self):
        d = disturbance_signal(DisturbanceSpec(kind="zero"), 3)
        assert np.array_equal(d(0.0), np.zeros(3))
        assert np.array_equal(d(17.3), np.zeros(3))

    @pytest.mark.parametrize("kind", ["constant", "sinusoid", "piecewise_random"])
    def test_norm_bound(self, kind):
        spec = DisturbanceSpec(kind=kind, dbar=0.3, seed=11)
        d = disturbance_signal(spec, 3)
        rng = np.random.default_rng(0)
        worst = max(np.linalg.norm(d(t)) for t in rng.uniform(0.0, 50.0, size=10_000))
        assert worst <= 0.3 + 1e-12

    @pytest.mark.parametrize("kind", ["constant", "sinusoid", "piecewise_random"])
    def test_deterministic_given_spec(self, kind):
        spec = DisturbanceSpec(kind=kind, dbar=0.2, seed=4)
        d1 = disturbance_signal(spec, 2)
        d2 = disturbance_signal(spec, 2)
        for t in [0.0, 0.005, 0.01, 0.5, 3.21]:
            assert np.array_equal(d1(t), d2(t))

    def test_piecewise_random_holds_value_within_interval(self):
        spec = DisturbanceSpec(kind="piecewise_random", dbar=0.5, seed=9, hold=0.01)
        d = disturbance_signal(spec, 3)
        assert np.array_equal(d(0.020), d(0.0299))
        # evaluation order must not matter
        d2 = disturbance_signal(spec, 3)
        assert np.array_equal(d2(0.0299), d(0.020))

    def test_piecewise_random_changes_across_intervals(self):
        spec = DisturbanceSpec(kind="piecewise_random", dbar=0.5, seed=9, hold=0.01)
        d = disturbance_signal(spec, 3)
        assert not np.array_equal(d(0.005), d(0.015))

    def test_different_seeds_differ(self):
        a = disturbance_signal(DisturbanceSpec(kind="constant", dbar=1.0, seed=1), 3)
        b = disturbance_signal(DisturbanceSpec(kind="constant", dbar=1.0, seed=2), 3)
        assert not np.array_equal(a(0.0), b(0.0))

    def test_invalid_specs_rejected(self):
        with pytest.raises(ValueError):
            DisturbanceSpec(kind="bogus")
        with pytest.raises(ValueError):
            DisturbanceSpec(kind="zero", dbar=-1.0)
        with pytest.raises(ValueError):
            DisturbanceSpec(kind="zero", seed=-1)
        with pytest.raises(ValueError):
            DisturbanceSpec(kind="piecewise_random", hold=0.0)
