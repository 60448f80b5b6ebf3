"""detec: data-driven synthesis of dynamic event-triggered state feedback.

From sampled input/state data of an unknown disturbed linear plant the
toolkit designs a stabilizing feedback gain and a dynamic event-triggering
mechanism (optionally with uniform or logarithmic state quantization),
computes the associated stability and inter-event-time certificates, and
verifies them in closed-loop simulation.
"""

__version__ = "0.1.0"

from .data_collection import (
    DataMatrices,
    ExperimentConfig,
    SampleSet,
    build_matrices,
    check_rank,
    load_samples,
    run_experiment,
    save_samples,
)
from .etm import EtmConfig, EtmState, quantize_log, quantize_uniform
from .exceptions import (
    ConfigError,
    DataRankError,
    DetecError,
    InfeasibleError,
    NonFiniteStateError,
    NumericalError,
    ZenoSuspectError,
)
from .sim_engine import (
    AnalysisReport,
    Scenario,
    SimulationTrace,
    analyze_trace,
    run_closed_loop,
    save_events,
    save_trace,
)
from .synthesis import (
    Certificates,
    DesignOptions,
    SynthesisResult,
    load_result,
    miet_lower_bound,
    save_result,
    synthesize,
)
from .system_model import (
    DisturbanceSpec,
    LinearSystem,
    aircraft_model,
    derivative,
    disturbance_signal,
    rk4_step,
    spectral_abscissa,
)

__all__ = [
    "__version__",
    "AnalysisReport",
    "Certificates",
    "ConfigError",
    "DataMatrices",
    "DataRankError",
    "DesignOptions",
    "DetecError",
    "DisturbanceSpec",
    "EtmConfig",
    "EtmState",
    "ExperimentConfig",
    "InfeasibleError",
    "LinearSystem",
    "NonFiniteStateError",
    "NumericalError",
    "SampleSet",
    "Scenario",
    "SimulationTrace",
    "SynthesisResult",
    "ZenoSuspectError",
    "aircraft_model",
    "analyze_trace",
    "build_matrices",
    "check_rank",
    "derivative",
    "disturbance_signal",
    "load_result",
    "load_samples",
    "miet_lower_bound",
    "quantize_log",
    "quantize_uniform",
    "rk4_step",
    "run_closed_loop",
    "run_experiment",
    "save_events",
    "save_result",
    "save_samples",
    "save_trace",
    "spectral_abscissa",
    "synthesize",
]
