"""Honest decision forests for conditional entropy and mutual information.

The package estimates H(Y|X) and I(X;Y) for a categorical Y against
numeric features by fitting forests whose trees split their rows into
disjoint partition, voting, and evaluation sets, with a finite-sample
correction keeping leaf posteriors off the simplex boundary. Reference
estimators (k-NN mutual information, calibrated forests), a simulation
harness with quadrature ground truth, permutation tests, and a CLI sit
alongside the core.
"""

from .baselines import (
    CalibrationMap,
    IrfModel,
    KnnIndex,
    digamma,
    fit_irf,
    irf_estimate,
    isotonic_fit,
    ksg_mi,
    mixed_ksg_mi,
)
from .errors import ConfigError, DataError, UforestError
from .estimators import ESTIMATOR_NAMES, fit_posterior, preset_config, \
    run_estimator
from .forest import (
    EstimateReport,
    ForestConfig,
    UncertaintyForest,
    conditional_entropy_at,
    empirical_entropy,
    estimate_conditional_entropy,
    estimate_mutual_information,
    finite_sample_correct,
    fit_forest,
    load_forest,
    posterior,
    save_forest,
)
from .inference import (
    DecompositionRow,
    PermutationTestResult,
    mi_decomposition,
    permutation_test,
)
from .io import LabeledDataset, load_csv, load_report, save_csv, save_report
from .sim import (
    SETTING_NAMES,
    SimSetting,
    TruthValues,
    posterior_at,
    sample,
    truth,
)
from .tree import TreeParams, TreePartition, fit_tree

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataError",
    "UforestError",
    "CalibrationMap",
    "IrfModel",
    "KnnIndex",
    "digamma",
    "fit_irf",
    "irf_estimate",
    "isotonic_fit",
    "ksg_mi",
    "mixed_ksg_mi",
    "ESTIMATOR_NAMES",
    "fit_posterior",
    "preset_config",
    "run_estimator",
    "EstimateReport",
    "ForestConfig",
    "UncertaintyForest",
    "conditional_entropy_at",
    "empirical_entropy",
    "estimate_conditional_entropy",
    "estimate_mutual_information",
    "finite_sample_correct",
    "fit_forest",
    "load_forest",
    "posterior",
    "save_forest",
    "DecompositionRow",
    "PermutationTestResult",
    "mi_decomposition",
    "permutation_test",
    "LabeledDataset",
    "load_csv",
    "load_report",
    "save_csv",
    "save_report",
    "SETTING_NAMES",
    "SimSetting",
    "TruthValues",
    "posterior_at",
    "sample",
    "truth",
    "TreeParams",
    "TreePartition",
    "fit_tree",
    "__version__",
]
