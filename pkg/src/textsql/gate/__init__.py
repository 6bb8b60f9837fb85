"""Gated extraction layer: autodiff core, layer math, host model, training."""

from .autodiff import Tensor
from .copy_task import (
    CopyMetrics,
    CopyTaskConfig,
    CopyVocab,
    TrainingDiverged,
    TrainResult,
    build_vocab,
    evaluate_copy_model,
    gate_config_for,
    make_example,
    train_copy_model,
)
from .gradcheck import GradCheckResult, epsilon_sweep, grad_check, random_check_instance
from .layers import (
    GateActivations,
    GateParams,
    copy_distribution,
    cross_attention,
    extraction_gate,
    generation_head,
    merge,
    run_gate,
)
from .model import (
    ForwardPass,
    GateConfig,
    GateModel,
    ParamsFormatError,
    load_params,
    save_params,
)

__all__ = [
    "Tensor",
    "CopyMetrics",
    "CopyTaskConfig",
    "CopyVocab",
    "TrainingDiverged",
    "TrainResult",
    "build_vocab",
    "evaluate_copy_model",
    "gate_config_for",
    "make_example",
    "train_copy_model",
    "GradCheckResult",
    "epsilon_sweep",
    "grad_check",
    "random_check_instance",
    "GateActivations",
    "GateParams",
    "copy_distribution",
    "cross_attention",
    "extraction_gate",
    "generation_head",
    "merge",
    "run_gate",
    "ForwardPass",
    "GateConfig",
    "GateModel",
    "ParamsFormatError",
    "load_params",
    "save_params",
]
