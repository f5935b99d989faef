"""Average measurement fidelity of noisy quantum measurements: exact values,
closed-form lower bounds, sampling protocols and a tomography baseline."""

from .core import (
    DensityMatrix,
    Povm,
    PureState,
    Rank1Pvm,
    overlap,
    overlaps,
    state_fidelity,
    validate_povm,
)
from .device import NoisyDevice, measure, measure_sequential, probe_state_dependence
from .haar import BlochQuadrature, HaarSampler, bloch_integrate, mc_integrate, sample_pure, sym_projector
from .metrics import (
    BoundInputs,
    FidelityResult,
    MonteCarlo,
    Quadrature,
    avg_error,
    avg_fidelity_probs,
    avg_fidelity_states,
    lower_bound_probs,
    lower_bound_states,
)
from .protocols import (
    EstimationConfig,
    check_fk_qk,
    chebyshev_trials,
    hoeffding_pairs,
    laplace_estimate,
    run_protocol_probs,
    run_protocol_states,
)
from .qubit import CoherentQubitPovm, sufficient_condition, sweep_table1, violation_scan
from .tomography import TomographyPlan, cost_model, reconstruct

__version__ = "0.1.0"
