"""Hybrid image classification with quantum-circuit convolution filters."""

from .data import Dataset, derive_seed, load_dataset, random_subset, stratified_subset
from .filters import (
    EstimatorMode,
    FilterParams,
    eval_classical_dot,
    eval_hadamard_real,
    eval_overlap_sq,
    grad_params,
)
from .model import (
    FilterKind,
    HybridModel,
    conv_forward,
    extract_windows,
    init_model,
    load_checkpoint,
    model_backward,
    op_count,
    save_checkpoint,
)
from .optim import AdadeltaState, SgdConfig, adadelta_step, sgd_step
from .parallel import map_batch
from .statevec import Circuit, GateOp, StateVector, new_zero_state, run_circuit
from .train import MetricsRecord, evaluate, train

__all__ = [
    "AdadeltaState",
    "Circuit",
    "Dataset",
    "EstimatorMode",
    "FilterKind",
    "FilterParams",
    "GateOp",
    "HybridModel",
    "MetricsRecord",
    "SgdConfig",
    "StateVector",
    "adadelta_step",
    "conv_forward",
    "derive_seed",
    "eval_classical_dot",
    "eval_hadamard_real",
    "eval_overlap_sq",
    "evaluate",
    "extract_windows",
    "grad_params",
    "init_model",
    "load_checkpoint",
    "load_dataset",
    "map_batch",
    "model_backward",
    "new_zero_state",
    "op_count",
    "random_subset",
    "run_circuit",
    "save_checkpoint",
    "sgd_step",
    "stratified_subset",
    "train",
]

__version__ = "0.1.0"
