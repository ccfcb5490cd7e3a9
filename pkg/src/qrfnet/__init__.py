"""Exact simulation of networks of quantum reference frames on a circle."""
from .dynamics import (
    ConservationReport, InteractionSpec, Interact, Measure, Pipeline, Prepare,
    apply_interaction, check_individual_conservation, simulate, validate_momentum_conserving,
)
from .frc import LabelTransform, builtin_transforms, transform_state, validate
from .network import FrameNetwork, conserving_set, first_common_frame, prepare
from .statevec import (
    Distribution, SparseState, measure_momentum, shift_particle, tensor, total_momentum_distribution,
)
from .wavefun import Wavefunction, evaluate_angle, prepared_pair_amplitudes

__version__ = "0.1.0"

__all__ = [
    "ConservationReport", "Distribution", "FrameNetwork", "Interact", "InteractionSpec", "LabelTransform",
    "Measure", "Pipeline", "Prepare", "SparseState", "Wavefunction", "apply_interaction", "builtin_transforms",
    "check_individual_conservation", "conserving_set", "evaluate_angle", "first_common_frame", "measure_momentum",
    "prepare", "prepared_pair_amplitudes", "shift_particle", "simulate", "tensor", "total_momentum_distribution",
    "transform_state", "validate", "validate_momentum_conserving",
]
