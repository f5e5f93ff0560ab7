"""Graph pre-training and conditional prompt tuning for non-homophilic graphs."""

from .encoder import GcnEncoder, encode, freeze, load_encoder, parameter_digest, save_encoder
from .errors import (
    ConfigError,
    DataError,
    FreezeViolationError,
    GraphFormatError,
    InsufficientDataError,
    KernelUnsupportedError,
    NHPromptError,
    NumericalError,
    ShapeError,
    UndefinedRatioError,
)
from .experiment import EvalReport, ExperimentConfig, build_encoder, load_config, load_source, run_pipeline, run_variant
from .graph import (
    FewShotTask,
    Graph,
    GraphCollection,
    graph_homophily_ratio,
    load_graph,
    node_homophily_ratio,
    planted_homophily_graph,
    sample_kshot_task,
    save_graph,
)
from .pretrain import PretrainConfig, pretrain, verify_theorem1, verify_theorem2
from .prompt import ConditionNet, TuneConfig, tune

__version__ = "0.1.0"

__all__ = [
    "GcnEncoder",
    "encode",
    "freeze",
    "load_encoder",
    "parameter_digest",
    "save_encoder",
    "ConfigError",
    "DataError",
    "FreezeViolationError",
    "GraphFormatError",
    "InsufficientDataError",
    "KernelUnsupportedError",
    "NHPromptError",
    "NumericalError",
    "ShapeError",
    "UndefinedRatioError",
    "ExperimentConfig",
    "EvalReport",
    "build_encoder",
    "load_source",
    "load_config",
    "run_pipeline",
    "run_variant",
    "FewShotTask",
    "Graph",
    "GraphCollection",
    "graph_homophily_ratio",
    "load_graph",
    "node_homophily_ratio",
    "planted_homophily_graph",
    "sample_kshot_task",
    "save_graph",
    "PretrainConfig",
    "pretrain",
    "verify_theorem1",
    "verify_theorem2",
    "ConditionNet",
    "TuneConfig",
    "tune",
]
