"""Distributed transmit-antenna selection with reversing Petri nets."""

from ._validation import ContractError, DomainError, TopologyError
from .baselines import exhaustive_select, greedy_select, nn_select, random_select
from .channel import (
    ChannelTensor,
    SceneConfig,
    generate_channel,
    load_channel,
    normalize_channel,
    perturb_csi,
    save_channel,
    subsample_subcarriers,
)
from .flops import FlopLedger
from .harness import (
    ExperimentConfig,
    ResultRecord,
    run_csi_experiment,
    run_flops_experiment,
    run_sumrate_experiment,
)
from .metrics import ScalingReport, compare_flops, measure_scaling
from .numerics import SnrConfig, logdet_hermitian_psd, sum_capacity, waterfill, zf_sum_rate
from .rpn import SelectionState, init_state, race, run_to_fixpoint, step
from .selectors import (
    ExhaustiveSelector,
    GreedySelector,
    NNSelector,
    RandomSelector,
    RPNSelector,
)
from .topology import RpnTopology, build_custom, build_toroid, validate

__version__ = "0.1.0"
