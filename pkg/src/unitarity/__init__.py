"""Unitarity of quantum channels: exact values, query-efficient estimators and experiments."""

from .builtins import BUILTINS, builtin_channel
from .channels import (
    KrausChannel,
    PartialDensityOperator,
    apply_channel,
    choi_matrix,
    jamiolkowski_fidelity,
    jamiolkowski_state,
    matrix_representation,
    validate_channel,
    vec,
)
from .errors import (
    DegenerateChannelWarning,
    IoError,
    ParseError,
    UnitarityError,
    ValidationError,
)
from .estimators import (
    EstimateRecord,
    EstimatorConfig,
    dqipe,
    estimate_o_coherent,
    estimate_o_incoherent,
    estimate_p_coherent,
    estimate_p_incoherent,
    estimate_s,
    estimate_t,
    estimate_unitarity,
    partial_collision,
)
from .experiments import (
    ChannelSpec,
    ExperimentConfig,
    ResultRecord,
    run_distinguish,
    run_estimate,
    run_scaling,
)
from .io import emit_result, load_channel_spec, load_result
from .oracle import (
    approximability_bounds,
    exact_alt_unitarity,
    exact_avg_gate_fidelity,
    exact_op_index,
    exact_pp_index,
    exact_s_index,
    exact_t_index,
    exact_unitarity,
    index_report,
    random_channel,
)
from .sampling import RngStream, haar_unitary

__all__ = [name for name in dir() if not name.startswith("_")]
