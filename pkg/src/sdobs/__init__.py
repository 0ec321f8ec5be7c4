"""Sampled-data observers with inter-sample output prediction."""

from .baselines import (
    DiscreteObserverDesign,
    SampledErrorSeries,
    design_discrete_observer,
    simulate_continuous,
    simulate_discrete_observer,
    simulate_zoh,
)
from .design import (
    ContinuousObserver,
    HighGainDesign,
    LinearDesign,
    design_highgain,
    design_linear,
    max_sampling_period,
    mismatch_constant,
    verify_dissipation,
)
from .metrics import compute_metrics
from .plants import (
    Plant,
    double_integrator,
    growth_bound_check,
    make_linear_plant,
    make_triangular_plant,
    oscillator_preset,
    sin_triangular,
)
from .simulate import (
    HybridTrajectory,
    NoiseSignal,
    PerturbationSource,
    SamplingSchedule,
    generate_schedule,
    simulate_sampled_data,
)

__version__ = "0.1.0"
