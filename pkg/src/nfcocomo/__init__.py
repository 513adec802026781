"""Neuro-fuzzy COCOMO: fuzzy rating adjustment, per-driver Takagi-Sugeno
subsystems and constrained gradient calibration of COCOMO effort models."""

from .core import (
    CocomoCoefficients,
    ConfigurationError,
    Direction,
    DomainError,
    DriverKind,
    DriverSpec,
    Family,
    NFCocomoError,
    ProjectRecord,
    RatingLevel,
    cocomo2_effort,
    cocomo81_effort,
    parse_rating,
)
from .evaluation import (
    Comparison,
    Dataset,
    DatasetError,
    EvaluationReport,
    compare_models,
    evaluate,
    load_dataset,
    loocv,
    mmre,
    pred,
)
from .fuzzy import (
    DependencyRule,
    DriverCalibration,
    MembershipFamily,
    RuleActivation,
    dnfis_adjust,
    dnfis_gradient,
    fuzzify,
    nf_output,
    nf_output_gradient,
)
from .learning import (
    TrainConfig,
    TrainingError,
    TrainTrace,
    finite_difference_check,
    gradient,
    objective,
    project_monotone,
    train,
)
from .model import ModelParams, default_rules, load_params, load_table, predict_effort, save_params

__version__ = "0.1.0"

__all__ = [
    "CocomoCoefficients",
    "Comparison",
    "ConfigurationError",
    "Dataset",
    "DatasetError",
    "DependencyRule",
    "Direction",
    "DomainError",
    "DriverCalibration",
    "DriverKind",
    "DriverSpec",
    "EvaluationReport",
    "Family",
    "MembershipFamily",
    "ModelParams",
    "NFCocomoError",
    "ProjectRecord",
    "RatingLevel",
    "RuleActivation",
    "TrainConfig",
    "TrainTrace",
    "TrainingError",
    "cocomo2_effort",
    "cocomo81_effort",
    "compare_models",
    "default_rules",
    "dnfis_adjust",
    "dnfis_gradient",
    "evaluate",
    "finite_difference_check",
    "fuzzify",
    "gradient",
    "load_dataset",
    "load_params",
    "load_table",
    "loocv",
    "mmre",
    "nf_output",
    "nf_output_gradient",
    "objective",
    "parse_rating",
    "pred",
    "predict_effort",
    "project_monotone",
    "save_params",
    "train",
]
