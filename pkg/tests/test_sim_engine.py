import math
import warnings

import numpy as np
import pytest

from detec.data_collection import DataMatrices, ExperimentConfig, build_matrices, run_experiment
from detec.etm import EtmConfig, f_derivative, phi_matrix
from detec.exceptions import NonFiniteStateError, ZenoSuspectError
from detec.sim_engine import (
    AnalysisReport,
    Scenario,
    SimulationTrace,
    analyze_trace,
    fit_exponential,
    run_closed_loop,
    save_events,
    save_trace,
)
from detec.synthesis import Certificates, DesignOptions, SynthesisResult, synthesize
from detec.system_model import DisturbanceSpec, LinearSystem, aircraft_model


@pytest.fixture(scope="module")
def scalar_loop():
    """Synthesized controller for the integrator plant x' = u."""
    data = DataMatrices(
        X0=np.array([[1.0, 2.0]]),
        X1=np.array([[1.0, -1.0]]),
        U0=np.array([[1.0, -1.0]]),
        Delta=np.zeros((1, 1)),
        times=np.array([0.0, 0.1]),
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result, cert = synthesize(data, DesignOptions(omega=np.eye(1)))
    sys = LinearSystem(np.array([[0.0]]), np.array([[1.0]]))
    return sys, result, cert


@pytest.fixture(scope="module")
def aircraft_loop():
    sys = aircraft_model()
    cfg = ExperimentConfig(
        samples=10,
        seed=3,
        disturbance=DisturbanceSpec(kind="piecewise_random", dbar=0.1, seed=103, hold=0.05),
    )
    data = build_matrices(run_experiment(sys, cfg), "exact", 0.1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result, cert = synthesize(data, DesignOptions(omega=7.0 * np.eye(3)))
    return sys, result, cert


@pytest.fixture(scope="module")
def aircraft_trace(aircraft_loop):
    sys, result, cert = aircraft_loop
    etm = EtmConfig(fbar=100.0, alpha=result.alpha, beta=result.beta)
    sc = Scenario(
        sys=sys,
        synth=result,
        etm=etm,
        x0=np.array([10.0, -5.0, 8.0]),
        T=5.0,
        disturbance=DisturbanceSpec(kind="piecewise_random", dbar=0.1, seed=7, hold=0.05),
    )
    return sc, run_closed_loop(sc), cert


def fake_synth(beta=400.0, delta=1.0):
    z = np.zeros((2, 1))
    return SynthesisResult(
        K=np.array([[-1.0]]),
        Y=z,
        gamma=1.0,
        P=np.array([[1.0]]),
        Q=z,
        G=z,
        alpha=1e-6,
        beta=beta,
        delta=delta,
        omega=np.array([[1.0]]),
        margins={"design": 1.0, "trigger": 1.0},
    )


def fake_cert():
    return Certificates(
        decay_rate=0.5,
        disturbance_gain=8.0,
        decay_rate_uniform=0.4,
        decay_rate_log=0.3,
        theta_max=0.2,
        quant_offset_rate=10.0,
    )


class TestScenarioValidation:
    def test_rejects_bad_horizon(self, scalar_loop):
        sys, result, _ = scalar_loop
        etm = EtmConfig(fbar=1.0, alpha=result.alpha, beta=result.beta)
        with pytest.raises(ValueError):
            Scenario(sys=sys, synth=result, etm=etm, x0=np.zeros(1), T=0.0)

    def test_rejects_step_larger_than_horizon(self, scalar_loop):
        sys, result, _ = scalar_loop
        etm = EtmConfig(fbar=1.0, alpha=result.alpha, beta=result.beta)
        with pytest.raises(ValueError):
            Scenario(sys=sys, synth=result, etm=etm, x0=np.zeros(1), T=0.5, h_sim=1.0)

    def test_rejects_tolerance_above_step(self, scalar_loop):
        sys, result, _ = scalar_loop
        etm = EtmConfig(fbar=1.0, alpha=result.alpha, beta=result.beta)
        with pytest.raises(ValueError):
            Scenario(
                sys=sys, synth=result, etm=etm, x0=np.zeros(1), T=1.0,
                h_sim=1e-3, tol_event=1e-2,
            )

    def test_rejects_wrong_x0_length(self, scalar_loop):
        sys, result, _ = scalar_loop
        etm = EtmConfig(fbar=1.0, alpha=result.alpha, beta=result.beta)
        with pytest.raises(ValueError):
            Scenario(sys=sys, synth=result, etm=etm, x0=np.zeros(2), T=1.0)

    def test_rejects_gain_plant_mismatch(self):
        sys = aircraft_model()
        synth = fake_synth()  # scalar gain against a 3-state plant
        etm = EtmConfig(fbar=1.0, alpha=1e-6, beta=1.0)
        with pytest.raises(ValueError):
            Scenario(sys=sys, synth=synth, etm=etm, x0=np.zeros(3), T=1.0)


class TestEquilibriumRun:
    def test_origin_stays_put_with_one_event(self, scalar_loop):
        sys, result, _ = scalar_loop
        etm = EtmConfig(fbar=100.0, alpha=result.alpha, beta=result.beta)
        sc = Scenario(sys=sys, synth=result, etm=etm, x0=np.zeros(1), T=2.0)
        tr = run_closed_loop(sc)
        assert np.array_equal(tr.event_times, [0.0])
        assert np.all(tr.states == 0.0)
        assert np.all(tr.inputs == 0.0)
        # With e identically zero the trigger ODE is pure decay.
        assert np.abs(tr.f_values - 100.0 * np.exp(-tr.times)).max() <= 1e-6
        assert tr.f_values.min() >= 0.0
        assert tr.f_values.max() <= 100.0


class TestAircraftRun:
    def test_trace_shape_and_grid(self, aircraft_trace):
        sc, tr, _ = aircraft_trace
        assert tr.times[0] == 0.0
        assert tr.times[-1] == sc.T
        assert np.all(np.diff(tr.times) > 0.0)
        # grid rows plus one row per post-t=0 event
        assert tr.times.shape[0] == 5001 + (tr.event_times.shape[0] - 1)

    def test_event_times_start_at_zero_and_increase(self, aircraft_trace):
        _, tr, _ = aircraft_trace
        assert tr.event_times[0] == 0.0
        assert np.all(np.diff(tr.event_times) > 0.0)
        assert 10 <= tr.event_times.shape[0] <= 500

    def test_f_stays_in_band(self, aircraft_trace):
        _, tr, _ = aircraft_trace
        assert tr.f_values.min() >= -1e-9
        assert tr.f_values.max() <= 100.0 + 1e-9

    def test_hold_is_bitwise_constant_between_events(self, aircraft_trace):
        _, tr, _ = aircraft_trace
        event_rows = np.flatnonzero(tr.event_flags == 1)
        bounds = list(event_rows) + [tr.times.shape[0]]
        for a, b in zip(bounds[:-1], bounds[1:]):
            segment = tr.inputs[a:b]
            assert np.all(segment == segment[0])

    def test_v_column_matches_definition(self, aircraft_trace):
        sc, tr, _ = aircraft_trace
        P, delta = sc.synth.P, sc.synth.delta
        recomputed = np.einsum("ij,jk,ik->i", tr.states, P, tr.states) + tr.f_values / delta
        assert np.allclose(recomputed, tr.V_values, rtol=1e-12, atol=1e-12)

    def test_gaps_respect_certified_lower_bound(self, aircraft_trace):
        sc, tr, cert = aircraft_trace
        rep = analyze_trace(tr, sc.synth, cert)
        gaps = np.diff(tr.event_times)
        assert np.all(gaps >= rep.miet_bound - sc.tol_event)
        assert rep.miet_observed == pytest.approx(gaps.min())

    def test_decay_inequality_between_events(self, aircraft_trace):
        sc, tr, cert = aircraft_trace
        rep = analyze_trace(tr, sc.synth, cert)
        assert rep.lyapunov_violation <= 1e-4 * tr.V_values.max()

    def test_deterministic_rerun(self, aircraft_trace):
        sc, tr, _ = aircraft_trace
        again = run_closed_loop(sc)
        assert np.array_equal(tr.times, again.times)
        assert np.array_equal(tr.states, again.states)
        assert np.array_equal(tr.event_times, again.event_times)
        assert np.array_equal(tr.f_values, again.f_values)


class TestEventLocalization:
    def test_first_event_matches_dense_integration(self, scalar_loop):
        sys, result, _ = scalar_loop
        etm = EtmConfig(fbar=1.0, alpha=result.alpha, beta=result.beta)
        sc = Scenario(
            sys=sys, synth=result, etm=etm, x0=np.array([5.0]), T=1.0, h_sim=0.01
        )
        tr = run_closed_loop(sc)
        t_engine = tr.event_times[1]
        # Re-integrate the first inter-event interval on a 1e-6 grid with
        # the held input frozen; the crossing must agree with the engine's
        # bisected time far better than the coarse 0.01 step could explain.
        phi = phi_matrix(result.alpha, result.beta, 1)
        x_held = np.array([5.0])
        u = result.K @ x_held
        y = np.array([5.0, 1.0])
        h, t = 1e-6, 0.0

        def deriv(_, yy):
            e = x_held - yy[:1]
            z = np.concatenate([yy[:1], e])
            fdot = min(-float(z @ phi @ z), 0.0) - yy[1]
            return np.array([float(u[0]), fdot])

        while y[1] > 0.0:
            k1 = deriv(t, y)
            k2 = deriv(t, y + 0.5 * h * k1)
            k3 = deriv(t, y + 0.5 * h * k2)
            k4 = deriv(t, y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += h
        assert abs(t_engine - t) <= 1e-5


class TestGuards:
    def test_event_storm_raises_zeno(self, scalar_loop):
        sys, result, _ = scalar_loop
        # The inter-event time is set by two scales: the budget flip at
        # sqrt(alpha/beta) * |x/u| and the time beta‖e‖² needs to burn
        # fbar. Both must sit below the storm guard, and the tolerance
        # must let bisection resolve gaps that small.
        etm = EtmConfig(fbar=1e-35, alpha=1e-20, beta=1e6)
        sc = Scenario(
            sys=sys, synth=result, etm=etm, x0=np.array([5.0]), T=1.0,
            tol_event=1e-13,
        )
        with pytest.raises(ZenoSuspectError) as err:
            run_closed_loop(sc)
        assert err.value.trace is not None
        assert err.value.trace.times.shape[0] >= 1

    def test_divergence_raises_nonfinite_with_partial_trace(self):
        sys = LinearSystem(np.array([[100.0]]), np.array([[1.0]]))
        synth = fake_synth(beta=1e-9)  # positive-feedback gain, lazy trigger
        bad = SynthesisResult(
            K=np.array([[100.0]]), Y=synth.Y, gamma=synth.gamma, P=synth.P,
            Q=synth.Q, G=synth.G, alpha=1.0, beta=1e-9, delta=1.0,
            omega=synth.omega, margins=synth.margins,
        )
        etm = EtmConfig(fbar=100.0, alpha=1.0, beta=1e-9)
        sc = Scenario(sys=sys, synth=bad, etm=etm, x0=np.array([1.0]), T=20.0, h_sim=0.01)
        with pytest.raises(NonFiniteStateError) as err:
            run_closed_loop(sc)
        assert err.value.trace is not None
        assert err.value.trace.times.shape[0] > 1


class TestQuantizedModes:
    def test_logarithmic_decay_inside_certified_theta(self, scalar_loop):
        sys, result, cert = scalar_loop
        assert cert.theta_max > 0.15
        T = max(20.01, 20.0 / cert.decay_rate_log + 0.01)
        etm = EtmConfig(
            fbar=0.01, alpha=result.alpha, beta=result.beta,
            mode="logarithmic", theta=0.15,
        )
        sc = Scenario(sys=sys, synth=result, etm=etm, x0=np.array([5.0]), T=T)
        rep = analyze_trace(run_closed_loop(sc), result, cert)
        assert rep.final_norm_ratio <= 1e-2

    def test_uniform_residual_ball(self, scalar_loop):
        sys, result, cert = scalar_loop
        theta = 0.1
        etm = EtmConfig(
            fbar=1.0, alpha=result.alpha, beta=result.beta,
            mode="uniform", theta=theta,
        )
        sc = Scenario(sys=sys, synth=result, etm=etm, x0=np.array([5.0]), T=20.0)
        tr = run_closed_loop(sc)
        tail = np.linalg.norm(tr.states[tr.times >= 0.9 * sc.T], axis=1).mean()
        v_inf = cert.quantization_offset(theta) / cert.decay_rate_uniform
        ball = math.sqrt(v_inf / np.linalg.eigvalsh(result.P).min())
        assert tail <= ball

    def test_quantized_hold_is_quantized(self, scalar_loop):
        sys, result, _ = scalar_loop
        theta = 0.25
        etm = EtmConfig(
            fbar=1.0, alpha=result.alpha, beta=result.beta,
            mode="uniform", theta=theta,
        )
        sc = Scenario(sys=sys, synth=result, etm=etm, x0=np.array([5.0]), T=2.0)
        tr = run_closed_loop(sc)
        event_rows = np.flatnonzero(tr.event_flags == 1)
        held = tr.inputs[event_rows] / result.K[0, 0]
        assert np.allclose(held / theta, np.round(held / theta), atol=1e-9)


class TestAnalyzeTrace:
    def test_synthetic_event_spacing(self):
        tr = SimulationTrace(
            times=np.array([0.0, 0.5, 1.5, 2.0]),
            states=np.array([[1.0], [0.5], [0.25], [0.2]]),
            inputs=np.zeros((4, 1)),
            f_values=np.array([1.0, 1.0, 1.0, 0.5]),
            V_values=np.array([2.0, 1.25, 1.06, 0.54]),
            d_norms=np.zeros(4),
            event_times=np.array([0.0, 0.5, 1.5]),
            event_flags=np.array([1, 1, 1, 0]),
        )
        rep = analyze_trace(tr, fake_synth(), fake_cert())
        assert rep.miet_observed == 0.5
        assert rep.event_count == 3

    def test_single_event_gives_infinite_miet(self, scalar_loop):
        sys, result, cert = scalar_loop
        etm = EtmConfig(fbar=100.0, alpha=result.alpha, beta=result.beta)
        sc = Scenario(sys=sys, synth=result, etm=etm, x0=np.zeros(1), T=1.0)
        rep = analyze_trace(run_closed_loop(sc), result, cert)
        assert rep.event_count == 1
        assert rep.miet_observed == math.inf
        assert rep.final_norm_ratio == 0.0

    def test_error_supremum_reconstruction(self):
        # One event at t=0 holding x=1; the plain-mode error is 1 - x(t).
        tr = SimulationTrace(
            times=np.array([0.0, 1.0, 2.0]),
            states=np.array([[1.0], [0.6], [0.2]]),
            inputs=np.zeros((3, 1)),
            f_values=np.array([4.0, 2.0, 1.0]),
            V_values=np.array([5.0, 2.36, 1.04]),
            d_norms=np.zeros(3),
            event_times=np.array([0.0]),
            event_flags=np.array([1, 0, 0]),
        )
        beta = 3.0
        rep = analyze_trace(tr, fake_synth(beta=beta), fake_cert())
        assert rep.e_sup == pytest.approx(0.8)
        assert rep.miet_bound == pytest.approx(4.0 / (beta * 0.8**2 + 4.0))

    def test_short_trace_rejected(self):
        tr = SimulationTrace(
            times=np.array([0.0, 1.0]),
            states=np.zeros((2, 1)),
            inputs=np.zeros((2, 1)),
            f_values=np.ones(2),
            V_values=np.ones(2),
            d_norms=np.zeros(2),
            event_times=np.array([0.0]),
            event_flags=np.array([1, 0]),
        )
        with pytest.raises(ValueError):
            analyze_trace(tr, fake_synth(), fake_cert())

    def test_report_validation(self):
        with pytest.raises(ValueError):
            AnalysisReport(
                event_count=0, miet_observed=1.0, miet_bound=0.5, e_sup=1.0,
                lyapunov_violation=-1.0, iss_fit=(1.0, 1.0), final_norm_ratio=0.1,
            )
        with pytest.raises(ValueError):
            AnalysisReport(
                event_count=1, miet_observed=-1.0, miet_bound=0.5, e_sup=1.0,
                lyapunov_violation=-1.0, iss_fit=(1.0, 1.0), final_norm_ratio=0.1,
            )


class TestFitExponential:
    def test_exact_exponential(self):
        t = np.linspace(0.0, 3.0, 40)
        c1, c2 = fit_exponential(t, 2.0 * np.exp(-3.0 * t))
        assert c1 == pytest.approx(2.0, abs=1e-6)
        assert c2 == pytest.approx(3.0, abs=1e-6)

    def test_constant_signal_has_zero_rate(self):
        t = np.linspace(0.0, 1.0, 10)
        c1, c2 = fit_exponential(t, np.full(10, 0.7))
        assert c1 == pytest.approx(0.7, rel=1e-12)
        assert c2 == pytest.approx(0.0, abs=1e-12)

    def test_dead_signal_sentinel(self):
        t = np.linspace(0.0, 1.0, 5)
        assert fit_exponential(t, np.zeros(5)) == (1.0, math.inf)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            fit_exponential(np.zeros(3), np.zeros(4))

    def test_observed_decay_beats_certified_rate(self, scalar_loop):
        # The certificates are sufficient conditions and heavily
        # conservative; the fitted decay must be at least half the
        # certified V-rate (the state norm decays at about rate/2).
        sys, result, cert = scalar_loop
        etm = EtmConfig(fbar=0.1, alpha=result.alpha, beta=result.beta)
        sc = Scenario(sys=sys, synth=result, etm=etm, x0=np.array([5.0]), T=10.0)
        rep = analyze_trace(run_closed_loop(sc), result, cert)
        assert rep.iss_fit[1] > 0.0
        assert rep.iss_fit[1] >= 0.5 * cert.decay_rate - 1e-9


class TestTraceFiles:
    def test_csv_layout_and_roundtrip(self, scalar_loop, tmp_path):
        sys, result, _ = scalar_loop
        etm = EtmConfig(fbar=1.0, alpha=result.alpha, beta=result.beta)
        sc = Scenario(sys=sys, synth=result, etm=etm, x0=np.array([1.0]), T=0.05)
        tr = run_closed_loop(sc)
        path = tmp_path / "trace.csv"
        save_trace(tr, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,x_1,u_1,f,V,d_norm,event"
        assert len(lines) == 1 + tr.times.shape[0]
        body = np.loadtxt(path, delimiter=",", skiprows=1)
        assert np.array_equal(body[:, 0], tr.times)
        assert np.array_equal(body[:, 1], tr.states[:, 0])
        assert np.array_equal(body[:, 3], tr.f_values)
        assert np.array_equal(body[:, -1], tr.event_flags)

    def test_events_file_full_precision(self, scalar_loop, tmp_path):
        sys, result, _ = scalar_loop
        etm = EtmConfig(fbar=1.0, alpha=result.alpha, beta=result.beta)
        sc = Scenario(sys=sys, synth=result, etm=etm, x0=np.array([5.0]), T=1.0)
        tr = run_closed_loop(sc)
        path = tmp_path / "events.txt"
        save_events(tr, path)
        parsed = np.array([float(s) for s in path.read_text().split()])
        assert np.array_equal(parsed, tr.event_times)
