"""Event-triggered feedback when the controller only sees quantized states.

Two quantizer families are supported. The uniform one rounds each
coordinate to a grid of pitch theta, so its error is bounded by
sqrt(n) * theta / 2 everywhere; convergence stalls in a ball whose size
tracks theta. The logarithmic one rounds the magnitude on a geometric
grid, so its error is relative; below the certified coarseness theta_max
the loop still converges to the origin, just along a slower envelope.
"""

import math

import numpy as np

from detec import (
    DesignOptions,
    DisturbanceSpec,
    EtmConfig,
    ExperimentConfig,
    Scenario,
    aircraft_model,
    analyze_trace,
    build_matrices,
    quantize_log,
    quantize_uniform,
    run_closed_loop,
    run_experiment,
    synthesize,
)

plant = aircraft_model()
experiment = ExperimentConfig(
    sampling_period=0.1,
    samples=10,
    seed=9,
    disturbance=DisturbanceSpec(kind="piecewise_random", dbar=0.1, seed=9),
)
data = build_matrices(run_experiment(plant, experiment), dbar=0.1)
result, cert = synthesize(data, DesignOptions(omega=7.0 * np.eye(3)))

# ----------------------------------------------------------------------
# The raw quantizer maps, before any dynamics.
# ----------------------------------------------------------------------
x = np.array([3.21, -0.047, 0.95])
print("x                =", x)
print("uniform, th=0.5  =", quantize_uniform(x, 0.5))
print("log, th=0.5      =", quantize_log(x, 0.5))
print("uniform error bound: sqrt(3)*0.25 = %.4f" % (math.sqrt(3) * 0.25))
print("log relative bound:  e^0.25 - 1   = %.4f" % (math.exp(0.25) - 1.0))

# ----------------------------------------------------------------------
# Uniform quantization: the quantization error acts like a persistent
# input. The trigger compensates for a coarser grid by firing more
# often, which at this short horizon actually speeds up the descent;
# the stall balls, whose radius grows with theta, only separate after
# the transient has died out (the long-horizon behaviour is pinned
# down in the test suite).
# ----------------------------------------------------------------------
print("\nuniform quantization, zero disturbance, T = 8 s")
print(f"{'theta':>6} {'events':>7} {'final |x|':>10}")
for theta in (0.2, 0.5, 1.0):
    etm = EtmConfig(fbar=0.1, alpha=result.alpha, beta=result.beta,
                    mode="uniform", theta=theta)
    scenario = Scenario(sys=plant, synth=result, etm=etm, x0=(10.0, -5.0, 8.0),
                        T=8.0, disturbance=DisturbanceSpec(kind="zero"))
    trace = run_closed_loop(scenario)
    report = analyze_trace(trace, result, cert)
    final = float(np.linalg.norm(trace.states[-1]))
    print(f"{theta:6.1f} {report.event_count:7d} {final:10.4f}")

# ----------------------------------------------------------------------
# Logarithmic quantization: any theta below the certificate preserves
# convergence. theta_max is tiny for this aggressive design, which is
# the honest price of the disturbance robustness baked into P.
# ----------------------------------------------------------------------
theta = 0.9 * cert.theta_max
print("\nlogarithmic quantization, theta = %.3g (theta_max = %.3g)"
      % (theta, cert.theta_max))
etm = EtmConfig(fbar=0.1, alpha=result.alpha, beta=result.beta,
                mode="logarithmic", theta=theta)
scenario = Scenario(sys=plant, synth=result, etm=etm, x0=(10.0, -5.0, 8.0),
                    T=10.0, disturbance=DisturbanceSpec(kind="zero"))
trace = run_closed_loop(scenario)
x0_norm = float(np.linalg.norm(trace.states[0]))
xT_norm = float(np.linalg.norm(trace.states[-1]))
print("|x(0)| = %.3f, |x(10)| = %.5f, ratio = %.2e"
      % (x0_norm, xT_norm, xT_norm / x0_norm))
print("still shrinking at the horizon; run longer to watch it vanish")
